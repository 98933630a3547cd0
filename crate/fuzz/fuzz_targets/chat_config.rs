#![no_main]

use gmidloop::strategy::llm::ChatConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(config) = ChatConfig::from_text(text) {
        assert!(!config.url.is_empty());
        assert!(!config.credential_env.is_empty());
    }
});
