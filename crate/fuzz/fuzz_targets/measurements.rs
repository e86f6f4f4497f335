#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::funcspace::{ingest_measurements, SampledFunction};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = ingest_measurements(text) {
        assert!(s.values().iter().all(|v| v.is_finite()));
        SampledFunction::from_csv(&s.to_csv()).expect("ingested samples reparse");
    }
});
