#![no_main]

use gmidloop::orchestrator::load_run_text;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok((records, _truncated)) = load_run_text(text, "fuzz") {
        // loaded records survive re-serialization
        for r in &records {
            let line = serde_json::to_string(r).unwrap();
            let back: gmidloop::orchestrator::IterationRecord =
                serde_json::from_str(&line).unwrap();
            assert_eq!(back, *r);
        }
    }
});
