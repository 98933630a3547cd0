#![no_main]

use gmidloop::specs::SpecSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(specs) = SpecSet::from_text(text) {
        // accepted spec sets round-trip through their text form
        let again = SpecSet::from_text(&specs.to_text()).unwrap();
        assert_eq!(again, specs);
    }
});
