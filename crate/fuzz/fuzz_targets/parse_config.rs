#![no_main]

use daqwear::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let (config, _) = parse_config(data);
    // whatever came in, the corrected config reparses unchanged
    let (again, report) = parse_config(config.to_config_text().as_bytes());
    assert_eq!(again, config);
    assert!(report.is_empty());
});
