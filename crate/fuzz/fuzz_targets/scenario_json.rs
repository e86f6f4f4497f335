#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = ScenarioConfig::from_json(text) {
        let again = c.to_json().expect("serializes");
        ScenarioConfig::from_json(&again).expect("round trip");
    }
});
