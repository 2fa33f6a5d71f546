#![no_main]

use flowcast::ingest::{clean_and_bucket, parse_records, CleaningPolicy};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = parse_records(data) else {
        return;
    };
    if let Some(first) = parsed.records.first() {
        let _ = clean_and_bucket(&parsed.records, &CleaningPolicy::default(), &first.station);
    }
});
