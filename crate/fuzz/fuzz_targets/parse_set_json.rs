#![no_main]

use energy_lab::io::{parse_set_json, set_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(a) = parse_set_json(text) {
        let again = parse_set_json(&set_to_json(&a)).expect("written sets parse");
        assert_eq!(a, again);
    }
});
