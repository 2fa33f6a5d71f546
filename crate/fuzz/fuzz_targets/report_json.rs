#![no_main]

use flowcast::eval::{compare_report, EvaluationReport};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = EvaluationReport::from_json(text) {
        let _ = compare_report(std::slice::from_ref(&report));
    }
});
