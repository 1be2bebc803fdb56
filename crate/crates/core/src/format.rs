//! On-disk layout of measurement files: file names, the metadata header line
//! and data rows.
//!
//! ```text
//! P001_20220601_093000_D8F8_accel-linearaccel-gyro.csv
//! #person=001;date=20220601;time=093000;watch=D8F8;sensors=accel-linearaccel-gyro;...;columns=label,t_ms,fresh,accel_seq,...
//! I,1654075800025,111,1,1654075800028,0.0123,-0.0051,9.8112,...
//! ```
//!
//! Every parser here takes untrusted text and reports errors instead of
//! panicking.

use std::fmt::Write as _;

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::config::{valid_watch_id, SensorGroup};
use crate::geofence::PrivacyLabel;
use crate::sensor::{Sample, SensorKind};

pub const DATA_EXT: &str = "csv";
pub const META_SUFFIX: &str = "meta.txt";

/// The identifying parts of a measurement or metafile name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileName {
    pub person_id: u16,
    /// `YYYYMMDD`
    pub date: String,
    /// `HHMMSS`
    pub time: String,
    pub watch_id: String,
    /// `accel-gyro` style token, or `meta` for a metafile.
    pub kinds: String,
}

impl FileName {
    pub fn is_meta(&self) -> bool {
        self.kinds == "meta"
    }

    /// `YYYYMMDD_HHMMSS`, the session directory name on the host.
    pub fn session_stamp(&self) -> String {
        format!("{}_{}", self.date, self.time)
    }

    /// Name of the metafile that belongs to the same session.
    pub fn meta_name(&self) -> String {
        format!(
            "P{:03}_{}_{}_{}_{}",
            self.person_id, self.date, self.time, self.watch_id, META_SUFFIX
        )
    }
}

fn stamp(start: &NaiveDateTime) -> (String, String) {
    (
        start.format("%Y%m%d").to_string(),
        start.format("%H%M%S").to_string(),
    )
}

/// `P<person>_<YYYYMMDD>_<HHMMSS>_<watch>_<kinds>.csv`
pub fn make_filename(person_id: u16, start: &NaiveDateTime, watch_id: &str, group: &SensorGroup) -> String {
    let (date, time) = stamp(start);
    format!(
        "P{person_id:03}_{date}_{time}_{watch_id}_{}.{DATA_EXT}",
        group.kinds_token()
    )
}

pub fn make_meta_filename(person_id: u16, start: &NaiveDateTime, watch_id: &str) -> String {
    let (date, time) = stamp(start);
    format!("P{person_id:03}_{date}_{time}_{watch_id}_{META_SUFFIX}")
}

fn all_digits(s: &str, n: usize) -> bool {
    s.len() == n && s.bytes().all(|b| b.is_ascii_digit())
}

/// Parse a measurement or metafile name. Returns `None` for anything else.
pub fn parse_filename(name: &str) -> Option<FileName> {
    let (stem, kinds) = if let Some(stem) = name.strip_suffix(&format!("_{META_SUFFIX}")) {
        (stem, "meta".to_string())
    } else {
        let stem = name.strip_suffix(&format!(".{DATA_EXT}"))?;
        let (stem, kinds) = stem.rsplit_once('_')?;
        let valid = !kinds.is_empty()
            && kinds
                .split('-')
                .all(|k| SensorKind::ALL.iter().any(|s| s.token() == k));
        if !valid {
            return None;
        }
        (stem, kinds.to_string())
    };
    let mut parts = stem.splitn(4, '_');
    let person = parts.next()?.strip_prefix('P')?;
    let date = parts.next()?;
    let time = parts.next()?;
    let watch = parts.next()?;
    if !all_digits(person, 3) || !all_digits(date, 8) || !all_digits(time, 6) || !valid_watch_id(watch) {
        return None;
    }
    Some(FileName {
        person_id: person.parse().ok()?,
        date: date.to_string(),
        time: time.to_string(),
        watch_id: watch.to_string(),
        kinds,
    })
}

/// Metadata repeated on the first line of every measurement file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileHeader {
    pub person_id: u16,
    pub date: String,
    pub time: String,
    pub watch_id: String,
    pub kinds: Vec<SensorKind>,
    pub interval_ms: u32,
    pub write_interval_s: f64,
    /// Central-clock time (unix ms) the session started.
    pub start_ms: i64,
    pub package_version: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum HeaderError {
    #[error("header line must start with '#'")]
    NotAHeader,
    #[error("header is missing {0}")]
    Missing(&'static str),
    #[error("bad header value for {0}")]
    BadValue(&'static str),
    #[error("column list does not match the sensors")]
    ColumnMismatch,
}

pub fn columns_for(kinds: &[SensorKind]) -> Vec<String> {
    let mut cols = vec!["label".to_string(), "t_ms".to_string(), "fresh".to_string()];
    for k in kinds {
        cols.push(format!("{}_seq", k.token()));
        cols.push(format!("{}_ts", k.token()));
        for v in k.value_names() {
            cols.push(format!("{}_{v}", k.token()));
        }
    }
    cols
}

impl FileHeader {
    pub fn new(
        person_id: u16,
        start: &NaiveDateTime,
        start_ms: i64,
        watch_id: &str,
        group: &SensorGroup,
        write_interval_s: f64,
        package_version: &str,
    ) -> Self {
        let (date, time) = stamp(start);
        Self {
            person_id,
            date,
            time,
            watch_id: watch_id.to_string(),
            kinds: group.members.clone(),
            interval_ms: group.interval_ms,
            write_interval_s,
            start_ms,
            package_version: package_version.to_string(),
            columns: columns_for(&group.members),
        }
    }

    pub fn to_line(&self) -> String {
        let kinds: Vec<&str> = self.kinds.iter().map(|k| k.token()).collect();
        format!(
            "#person={:03};date={};time={};watch={};sensors={};interval_ms={};write_interval_s={};start_ms={};package_version={};columns={}",
            self.person_id,
            self.date,
            self.time,
            self.watch_id,
            kinds.join("-"),
            self.interval_ms,
            self.write_interval_s,
            self.start_ms,
            self.package_version,
            self.columns.join(","),
        )
    }

    pub fn parse(line: &str) -> Result<Self, HeaderError> {
        let body = line
            .trim_end_matches(['\r', '\n'])
            .strip_prefix('#')
            .ok_or(HeaderError::NotAHeader)?;
        let mut fields: Vec<(&str, &str)> = Vec::new();
        for part in body.split(';') {
            if let Some((k, v)) = part.split_once('=') {
                fields.push((k, v));
            }
        }
        let get = |key: &'static str| -> Result<&str, HeaderError> {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or(HeaderError::Missing(key))
        };

        let person = get("person")?;
        if !all_digits(person, 3) {
            return Err(HeaderError::BadValue("person"));
        }
        let date = get("date")?;
        if !all_digits(date, 8) {
            return Err(HeaderError::BadValue("date"));
        }
        let time = get("time")?;
        if !all_digits(time, 6) {
            return Err(HeaderError::BadValue("time"));
        }
        let watch_id = get("watch")?;
        if !valid_watch_id(watch_id) {
            return Err(HeaderError::BadValue("watch"));
        }
        let kinds = get("sensors")?
            .split('-')
            .map(|k| k.parse::<SensorKind>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| HeaderError::BadValue("sensors"))?;
        if kinds.is_empty() {
            return Err(HeaderError::BadValue("sensors"));
        }
        let interval_ms: u32 = get("interval_ms")?
            .parse()
            .ok()
            .filter(|v| *v > 0)
            .ok_or(HeaderError::BadValue("interval_ms"))?;
        let write_interval_s: f64 = get("write_interval_s")?
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v > 0.0)
            .ok_or(HeaderError::BadValue("write_interval_s"))?;
        let start_ms: i64 = get("start_ms")?
            .parse()
            .map_err(|_| HeaderError::BadValue("start_ms"))?;
        let package_version = get("package_version")?.to_string();
        let columns: Vec<String> = get("columns")?.split(',').map(str::to_string).collect();
        if columns != columns_for(&kinds) {
            return Err(HeaderError::ColumnMismatch);
        }
        Ok(Self {
            person_id: person.parse().map_err(|_| HeaderError::BadValue("person"))?,
            date: date.to_string(),
            time: time.to_string(),
            watch_id: watch_id.to_string(),
            kinds,
            interval_ms,
            write_interval_s,
            start_ms,
            package_version,
            columns,
        })
    }

    /// Writer period in whole milliseconds.
    pub fn write_interval_ms(&self) -> u64 {
        ((self.write_interval_s * 1000.0).round() as u64).max(1)
    }
}

/// One member's cell in a row.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub seq: u64,
    pub sensor_time_ms: i64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: PrivacyLabel,
    pub t_ms: i64,
    pub fresh: Vec<bool>,
    /// `None` for a member that has not produced a readout yet.
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RowError {
    #[error("expected {expected} columns, found {found}")]
    ColumnCount { expected: usize, found: usize },
    #[error("bad privacy label {0:?}")]
    Label(String),
    #[error("bad value in column {0}")]
    Value(usize),
}

fn format_value(kind: SensorKind, v: f64) -> String {
    match kind {
        SensorKind::Gps => format!("{v:.6}"),
        // float32 shortest round-trip
        _ => format!("{}", v as f32),
    }
}

/// Format a data row (without line ending).
pub fn format_row(
    label: PrivacyLabel,
    t_ms: i64,
    kinds: &[SensorKind],
    fresh: &[bool],
    cells: &[Option<&Sample>],
    sensor_clock_offset_ms: i64,
) -> String {
    let mut out = String::with_capacity(128);
    out.push(label.as_char());
    let _ = write!(out, ",{t_ms},");
    for f in fresh {
        out.push(if *f { '1' } else { '0' });
    }
    for (kind, cell) in kinds.iter().zip(cells) {
        match cell {
            Some(s) => {
                let _ = write!(out, ",{},{}", s.seq, s.sensor_time_ms + sensor_clock_offset_ms);
                for v in &s.values {
                    out.push(',');
                    out.push_str(&format_value(*kind, *v));
                }
            }
            None => {
                for _ in 0..kind.arity() + 2 {
                    out.push(',');
                }
            }
        }
    }
    out
}

/// Parse a data row against the header's sensor list.
pub fn parse_row(line: &str, kinds: &[SensorKind]) -> Result<Row, RowError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    let expected = 3 + kinds.iter().map(|k| k.arity() + 2).sum::<usize>();
    if fields.len() != expected {
        return Err(RowError::ColumnCount {
            expected,
            found: fields.len(),
        });
    }
    let mut label_chars = fields[0].chars();
    let label = match (label_chars.next(), label_chars.next()) {
        (Some(c), None) => PrivacyLabel::from_char(c),
        _ => None,
    }
    .ok_or_else(|| RowError::Label(fields[0].to_string()))?;
    let t_ms: i64 = fields[1].parse().map_err(|_| RowError::Value(1))?;
    let fresh_field = fields[2];
    if fresh_field.len() != kinds.len() || !fresh_field.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(RowError::Value(2));
    }
    let fresh: Vec<bool> = fresh_field.bytes().map(|b| b == b'1').collect();

    let mut cells = Vec::with_capacity(kinds.len());
    let mut col = 3;
    for (i, kind) in kinds.iter().enumerate() {
        let width = kind.arity() + 2;
        let slice = &fields[col..col + width];
        if slice.iter().all(|f| f.is_empty()) {
            if fresh[i] {
                return Err(RowError::Value(col));
            }
            cells.push(None);
        } else {
            let seq = slice[0].parse().map_err(|_| RowError::Value(col))?;
            let sensor_time_ms = slice[1].parse().map_err(|_| RowError::Value(col + 1))?;
            let mut values = Vec::with_capacity(kind.arity());
            for (j, v) in slice[2..].iter().enumerate() {
                let v: f64 = v.parse().map_err(|_| RowError::Value(col + 2 + j))?;
                values.push(v);
            }
            cells.push(Some(Cell {
                seq,
                sensor_time_ms,
                values,
            }));
        }
        col += width;
    }
    Ok(Row {
        label,
        t_ms,
        fresh,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2022, 6, 1)
            .unwrap()
            .and_hms_opt(9, 30, 0)
            .unwrap()
    }

    fn motion() -> SensorGroup {
        SensorGroup {
            interval_ms: 25,
            members: vec![SensorKind::Accel, SensorKind::LinearAccel, SensorKind::Gyro],
        }
    }

    #[test]
    fn motion_file_name() {
        assert_eq!(
            make_filename(1, &start(), "D8F8", &motion()),
            "P001_20220601_093000_D8F8_accel-linearaccel-gyro.csv"
        );
        let baro = SensorGroup {
            interval_ms: 100,
            members: vec![SensorKind::Baro],
        };
        assert_eq!(
            make_filename(1, &start(), "D8F8", &baro),
            "P001_20220601_093000_D8F8_baro.csv"
        );
    }

    #[test]
    fn names_parse_back() {
        let name = make_filename(42, &start(), "D8F8", &motion());
        let parsed = parse_filename(&name).unwrap();
        assert_eq!(parsed.person_id, 42);
        assert_eq!(parsed.session_stamp(), "20220601_093000");
        assert_eq!(parsed.kinds, "accel-linearaccel-gyro");
        let meta = make_meta_filename(42, &start(), "D8F8");
        assert!(parse_filename(&meta).unwrap().is_meta());
        assert_eq!(parsed.meta_name(), meta);
        for bad in [
            "notes.txt",
            "P01_20220601_093000_D8F8_baro.csv",
            "P001_20220601_093000_D8F8_wind.csv",
            "P001_2022060_093000_D8F8_baro.csv",
            "P001_20220601_093000_D8-F8_baro.csv",
        ] {
            assert!(parse_filename(bad).is_none(), "{bad}");
        }
    }

    #[test]
    fn header_round_trip() {
        let h = FileHeader::new(1, &start(), 1_654_075_800_000, "D8F8", &motion(), 0.05, "0.1.0");
        let line = h.to_line();
        assert!(line.contains("watch=D8F8"));
        assert!(line.contains("columns=label,t_ms,fresh,accel_seq,accel_ts,accel_x"));
        assert!(!line.contains('\n'));
        assert_eq!(FileHeader::parse(&line).unwrap(), h);
        assert_eq!(FileHeader::parse("person=001"), Err(HeaderError::NotAHeader));
        assert_eq!(
            FileHeader::parse(&line.replace("columns=label,", "columns=")),
            Err(HeaderError::ColumnMismatch)
        );
    }

    #[test]
    fn row_round_trip_with_empty_member() {
        let kinds = [SensorKind::Gps, SensorKind::Battery];
        let gps = Sample {
            kind: SensorKind::Gps,
            seq: 3,
            sensor_time_ms: 3012,
            values: vec![52.169311, 4.456711],
        };
        let line = format_row(PrivacyLabel::Unknown, 1000, &kinds, &[true, false], &[Some(&gps), None], 10);
        assert_eq!(line, "?,1000,10,3,3022,52.169311,4.456711,,,");
        let row = parse_row(&line, &kinds).unwrap();
        assert_eq!(row.label, PrivacyLabel::Unknown);
        assert_eq!(row.fresh, vec![true, false]);
        assert_eq!(row.cells[0].as_ref().unwrap().seq, 3);
        assert!(row.cells[1].is_none());
    }

    #[test]
    fn bad_rows() {
        let kinds = [SensorKind::Baro];
        assert!(matches!(parse_row("I,1,1,0,0", &kinds), Err(RowError::ColumnCount { .. })));
        assert!(matches!(parse_row("X,1,1,0,0,1013.25", &kinds), Err(RowError::Label(_))));
        assert!(matches!(parse_row("I,1,2,0,0,1013.25", &kinds), Err(RowError::Value(2))));
        assert!(matches!(parse_row("I,1,1,,,", &kinds), Err(RowError::Value(3))));
        assert!(parse_row("I,1,1,0,0,1013.25", &kinds).is_ok());
    }
}
