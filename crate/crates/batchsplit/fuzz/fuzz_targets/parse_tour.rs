#![no_main]

use batchsplit::instance::parse_tour;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(order) = parse_tour(text) {
            assert!(!order.is_empty());
            assert!(order.iter().all(|&id| id >= 1));
        }
    }
});
