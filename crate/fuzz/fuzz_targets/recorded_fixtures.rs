#![no_main]

use gmidloop::backends::stub::RecordedBackend;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = RecordedBackend::from_text(text);
});
