#![no_main]

use flowcast::forecast::LagModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = LagModel::from_json(text) {
        let again = LagModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, again);
    }
});
