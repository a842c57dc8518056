#![no_main]

use emonet::{CategoryMap, EmotionLabel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = data.parse::<EmotionLabel>();
    if let Ok(map) = data.parse::<CategoryMap>() {
        assert!(!map.is_empty());
        for label in EmotionLabel::ALL {
            if let Some(c) = map.category_of(label) {
                assert!(c < map.len());
            }
        }
    }
});
