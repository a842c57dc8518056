#![no_main]

use emonet::synth::{parse_templates, templates_to_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(templates) = parse_templates(text) {
        let again = parse_templates(&templates_to_string(&templates)).expect("written templates parse");
        assert_eq!(again, templates);
    }
});
