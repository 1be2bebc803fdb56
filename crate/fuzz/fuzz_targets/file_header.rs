#![no_main]

use daqwear::format::FileHeader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(h) = FileHeader::parse(line) {
        assert_eq!(FileHeader::parse(&h.to_line()), Ok(h));
    }
});
