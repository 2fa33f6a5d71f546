#![no_main]

use flowcast_cli::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::from_json(text) {
        let _ = config.pipeline();
        let again = RunConfig::from_json(&serde_json::to_string(&config).unwrap());
        assert!(again.is_ok());
    }
});
