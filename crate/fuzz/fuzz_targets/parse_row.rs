#![no_main]

use daqwear::format::parse_row;
use daqwear::sensor::SensorKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // first byte picks the file's sensors
    let Some((&mask, rest)) = data.split_first() else {
        return;
    };
    let kinds: Vec<SensorKind> = SensorKind::ALL
        .into_iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, k)| k)
        .collect();
    let Ok(line) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(row) = parse_row(line, &kinds) {
        assert_eq!(row.cells.len(), kinds.len());
        assert_eq!(row.fresh.len(), kinds.len());
    }
});
