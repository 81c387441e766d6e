#![no_main]

use libfuzzer_sys::fuzz_target;
use psystem::config::parse_epsilons;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(list) = parse_epsilons(text) {
        assert!(!list.is_empty());
        assert!(list.iter().all(|e| *e > 0.0 && e.is_finite()));
    }
});
