#![no_main]

use emonet::net::parse_model;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(net) = parse_model(text) {
        let again = parse_model(&net.to_model_string()).expect("written model parses");
        assert_eq!(again, net);
        let input = vec![0.5; net.input_size()];
        let _ = net.predict(&input);
    }
});
