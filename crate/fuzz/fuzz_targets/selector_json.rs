#![no_main]

use flowcast::hybrid::HybridSelector;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(selector) = HybridSelector::from_json(text) {
        let again = HybridSelector::from_json(&selector.to_json().unwrap()).unwrap();
        assert_eq!(selector, again);
    }
});
