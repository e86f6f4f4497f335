#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::reconstruct::FitDiagnostics;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = FitDiagnostics::from_jsonl(text) {
        let again = d.to_jsonl().expect("serializes");
        FitDiagnostics::from_jsonl(&again).expect("round trip");
    }
});
