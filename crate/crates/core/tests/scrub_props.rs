use std::fs;

use daqwear::logistics::{scrub_bytes, scrub_tree};
use proptest::prelude::*;

const HEADER: &str = "#person=001;date=20220601;time=093000;watch=D8F8;sensors=accel;interval_ms=25;write_interval_s=0.025;start_ms=0;package_version=0.1.0;columns=label,t_ms,fresh,accel_seq,accel_ts,accel_x,accel_y,accel_z\n";

#[derive(Debug, Clone)]
enum Line {
    Row(char, u32),
    /// A `P` row cut short; kept because it cannot be trusted to be a row.
    Truncated(u32),
    Junk(String),
}

impl Line {
    fn text(&self) -> String {
        match self {
            Line::Row(l, k) => format!("{l},{},1,{k},{},0.5,-1,9.81\n", 25 * k, 25 * k + 3),
            Line::Truncated(k) => format!("P,{},1,{k}\n", 25 * k),
            Line::Junk(s) => format!("{s}\n"),
        }
    }
}

fn line() -> impl Strategy<Value = Line> {
    prop_oneof![
        8 => (prop_oneof![Just('I'), Just('P'), Just('?')], 0u32..100_000).prop_map(|(l, k)| Line::Row(l, k)),
        1 => (0u32..100_000).prop_map(Line::Truncated),
        1 => "[^\n]{0,30}".prop_map(Line::Junk),
    ]
}

/// What a scrub must produce, worked out from how the lines were built.
fn expected(lines: &[Line]) -> (String, usize) {
    let mut out = HEADER.to_string();
    let mut removed = 0;
    for l in lines {
        match l {
            Line::Row('P', _) => removed += 1,
            other => out.push_str(&other.text()),
        }
    }
    (out, removed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn removes_exactly_the_private_rows(lines in prop::collection::vec(line(), 0..60)) {
        // junk that happens to be a valid P row is indistinguishable from one
        prop_assume!(lines.iter().all(|l| !matches!(l, Line::Junk(s) if s.starts_with("P,"))));
        let input: String = std::iter::once(HEADER.to_string()).chain(lines.iter().map(Line::text)).collect();
        let (out, report) = scrub_bytes(input.as_bytes());
        let (want, removed) = expected(&lines);
        prop_assert_eq!(String::from_utf8(out.clone()).unwrap(), want);
        prop_assert_eq!(report.removed, removed);
        prop_assert!(!report.bad_header);

        let (twice, r2) = scrub_bytes(&out);
        prop_assert_eq!(twice, out);
        prop_assert_eq!(r2.removed, 0);
    }

    #[test]
    fn any_bytes_scrub_idempotently(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let (once, _) = scrub_bytes(&bytes);
        prop_assert!(once.len() <= bytes.len());
        let (twice, r) = scrub_bytes(&once);
        prop_assert_eq!(twice, once);
        prop_assert_eq!(r.removed, 0);
    }
}

#[test]
fn tree_scrub_keeps_layout_and_metafiles() {
    let src = tempfile::tempdir().unwrap();
    let session = src.path().join("P001/20220601_093000");
    fs::create_dir_all(&session).unwrap();
    let data = format!("{HEADER}{}{}{}", Line::Row('I', 0).text(), Line::Row('P', 1).text(), Line::Row('?', 2).text());
    fs::write(session.join("P001_20220601_093000_D8F8_accel.csv"), &data).unwrap();
    fs::write(session.join("P001_20220601_093000_D8F8_meta.txt"), "person_id=001\n").unwrap();
    fs::write(session.join("P001_20220601_093000_D8F8_baro.csv.part"), "partial").unwrap();

    let out = tempfile::tempdir().unwrap();
    let report = scrub_tree(src.path(), out.path()).unwrap();
    assert_eq!(report.removed(), 1);
    assert_eq!(report.copied.len(), 1);
    let scrubbed = fs::read_to_string(out.path().join("P001/20220601_093000/P001_20220601_093000_D8F8_accel.csv")).unwrap();
    assert_eq!(scrubbed.lines().count(), 3);
    assert!(!scrubbed.lines().any(|l| l.starts_with("P,")));
    assert!(!out.path().join("P001/20220601_093000/P001_20220601_093000_D8F8_baro.csv.part").exists());

    let again = tempfile::tempdir().unwrap();
    let r2 = scrub_tree(out.path(), again.path()).unwrap();
    assert_eq!(r2.removed(), 0);
    assert_eq!(
        fs::read(again.path().join("P001/20220601_093000/P001_20220601_093000_D8F8_accel.csv")).unwrap(),
        scrubbed.into_bytes()
    );
}
