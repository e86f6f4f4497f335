#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::channel::DiscreteChannel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ch) = DiscreteChannel::from_json(text) {
        let again = ch.to_json().expect("serializes");
        DiscreteChannel::from_json(&again).expect("round trip");
    }
});
