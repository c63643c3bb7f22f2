#![no_main]

use batchsplit::instance::InstanceFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = InstanceFile::parse(text) {
            let rendered = file.render();
            let reparsed = InstanceFile::parse(&rendered).expect("render must reparse");
            assert_eq!(file, reparsed);
        }
    }
});
