#![no_main]

use gmidloop::netlist::{format_eng, EngNumber};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(e) = EngNumber::parse(text) {
        // a successful parse remembers its exact spelling and yields a
        // finite value that the formatter can round-trip
        assert_eq!(e.rendered, text);
        assert!(e.value.is_finite());
        if e.value != 0.0 {
            let back = EngNumber::parse(&format_eng(e.value)).unwrap().value;
            assert!(((back - e.value) / e.value).abs() < 1e-9);
        }
    }
});
