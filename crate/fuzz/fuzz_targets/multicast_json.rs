#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::multicast::MulticastProblem;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = MulticastProblem::from_json(text) {
        let again = p.to_json().expect("serializes");
        MulticastProblem::from_json(&again).expect("round trip");
    }
});
