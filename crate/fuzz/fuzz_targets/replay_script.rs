#![no_main]

use gmidloop::strategy::replay::ReplayStrategist;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(s) = ReplayStrategist::from_text(text) {
        assert!(!s.is_empty());
    }
});
