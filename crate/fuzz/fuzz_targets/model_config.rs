#![no_main]

use gmidloop::device_model::{DeviceKind, ModelConfig, ProcessCorner};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(model) = ModelConfig::from_config_text(text) {
        // an accepted config must still evaluate without panicking
        let _ = model.evaluate(DeviceKind::Nmos, ProcessCorner::TT, 0.5, 0.6, 0.9);
    }
});
