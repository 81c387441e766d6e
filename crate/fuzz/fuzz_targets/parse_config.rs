#![no_main]

use libfuzzer_sys::fuzz_target;
use psystem::config::{emit_config, parse_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // anything accepted must survive a round trip
        let emitted = emit_config(&cfg).expect("valid config emits");
        assert_eq!(parse_config(&emitted).expect("emitted config parses"), cfg);
    }
});
