#![no_main]

use emonet::search::{parse_records, records_to_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_records(text) {
        let again = parse_records(&records_to_string(&records)).expect("written records parse");
        assert_eq!(again, records);
    }
});
