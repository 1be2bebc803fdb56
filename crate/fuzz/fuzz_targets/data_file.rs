#![no_main]

use std::path::Path;

use daqwear::analysis::DataFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(f) = DataFile::parse(Path::new("fuzz.csv"), text) {
        // every non-blank line after the header is a row or reported malformed
        let body = text
            .split_inclusive('\n')
            .skip(1)
            .filter(|l| !l.trim_end_matches(['\n', '\r']).is_empty())
            .count();
        assert_eq!(f.rows.len() + f.malformed.len(), body);
    }
});
