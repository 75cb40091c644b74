#![no_main]

use energy_lab::group::{parse_factors, parse_group};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let factors = parse_factors(text);
    if let Ok(g) = parse_group(text) {
        let factors = factors.expect("a parsed group has parsed factors");
        assert_eq!(g.factors(), &factors[..]);
        assert_eq!(g.size(), factors.iter().product::<usize>());
    }
});
