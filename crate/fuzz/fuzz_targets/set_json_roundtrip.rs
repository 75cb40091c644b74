#![no_main]

use energy_lab::io::{parse_set_json, set_to_json};
use energy_lab::{make_group, GSet};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&head, rest)) = data.split_first() else {
        return;
    };
    let factors: &[usize] = match head % 4 {
        0 => &[7],
        1 => &[101],
        2 => &[2, 2, 2, 2, 2, 2, 2, 2],
        _ => &[2, 3, 4],
    };
    let g = make_group(factors).expect("fixed groups are valid");
    let a = GSet::from_indices(&g, rest.iter().map(|&b| b as usize % g.size()))
        .expect("reduced indices are in range");
    let text = set_to_json(&a);
    let back = parse_set_json(&text).expect("written sets parse");
    assert_eq!(a, back);
    assert_eq!(text, set_to_json(&back));
});
