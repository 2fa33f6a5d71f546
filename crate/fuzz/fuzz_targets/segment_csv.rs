#![no_main]

use flowcast::ingest::{Segment, SegmentSeries};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(series) = SegmentSeries::read_csv(data, "S", Segment::H07To11) else {
        return;
    };
    let mut buf = Vec::new();
    series.write_csv(&mut buf).unwrap();
    let again = SegmentSeries::read_csv(buf.as_slice(), "S", Segment::H07To11).unwrap();
    assert_eq!(series, again);
});
