#![no_main]

use gmidloop::strategy::parse::{parse_response, render_plan};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(plan) = parse_response(text) {
        // any accepted reply re-renders into a reply that parses to the
        // same patches
        let rendered = render_plan(&plan);
        let again = parse_response(&rendered).unwrap();
        assert_eq!(again.patches, plan.patches);
        assert_eq!(again.declared_done, plan.declared_done);
    }
});
