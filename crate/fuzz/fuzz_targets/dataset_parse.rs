#![no_main]

use emonet::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ds) = Dataset::parse(text) {
        let again = Dataset::parse(&ds.to_canonical_string()).expect("canonical text parses");
        assert_eq!(again, ds);
    }
});
