#![no_main]

use batchsplit::scenario::ScenarioSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = ScenarioSet::from_bytes(data) {
        let bytes = set.to_bytes();
        let again = ScenarioSet::from_bytes(&bytes).expect("round trip must decode");
        assert_eq!(set.m(), again.m());
        assert_eq!(set.n(), again.n());
        assert_eq!(set.demands(), again.demands());
    }
});
