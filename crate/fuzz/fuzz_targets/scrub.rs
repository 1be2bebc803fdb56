#![no_main]

use daqwear::logistics::scrub_bytes;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let (once, report) = scrub_bytes(data);
    assert!(once.len() <= data.len());
    if report.removed == 0 {
        assert_eq!(once, data);
    }
    let (twice, again) = scrub_bytes(&once);
    assert_eq!(twice, once);
    assert_eq!(again.removed, 0);
});
