#![no_main]

use daqwear::format::parse_filename;
use daqwear::logistics::tree_path;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(name) = std::str::from_utf8(data) else {
        return;
    };
    if let Some(f) = parse_filename(name) {
        assert!(f.person_id <= 999);
        let path = tree_path(name).expect("parsed names have a tree path");
        assert_eq!(path.components().count(), 3);
    }
});
