//! Measurement configuration: `key=value` parsing with silent correction to
//! defaults, metafile serialization and per-frequency sensor grouping.
//!
//! Parsing never fails. Anything missing, unparsable or out of range is
//! replaced by the default for that field and recorded in a
//! [`CorrectionReport`], so a bad config file can never block a measurement.

use std::fmt;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::sensor::SensorKind;

pub const DEFAULT_WATCH_ID: &str = "0000";

/// Battery is not configurable and is always recorded at this interval.
pub const BATTERY_INTERVAL_MS: u32 = 1000;

/// Keys appended to a metafile. They are recognised (and skipped) by
/// [`parse_config`] so a metafile parses back cleanly.
pub const META_KEYS: [&str; 4] = ["package_version", "person_id", "start_time", "duration_ms"];

/// The settings a measurement session runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub watch_id: String,
    pub accel_interval_ms: u32,
    pub linear_accel_interval_ms: u32,
    pub gyro_interval_ms: u32,
    pub baro_interval_ms: u32,
    pub gps_interval_s: u32,
    pub privacy_lat_deg: f64,
    pub privacy_lon_deg: f64,
    pub privacy_radius_m: u32,
    pub write_interval_s: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            watch_id: DEFAULT_WATCH_ID.to_string(),
            accel_interval_ms: 25,
            linear_accel_interval_ms: 25,
            gyro_interval_ms: 25,
            baro_interval_ms: 100,
            gps_interval_s: 1,
            privacy_lat_deg: 52.169311,
            privacy_lon_deg: 4.456711,
            privacy_radius_m: 100,
            write_interval_s: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    WatchId,
    AccelIntervalMs,
    LinearAccelIntervalMs,
    GyroIntervalMs,
    BaroIntervalMs,
    GpsIntervalS,
    PrivacyLatDeg,
    PrivacyLonDeg,
    PrivacyRadiusM,
    WriteIntervalS,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::WatchId,
        Field::AccelIntervalMs,
        Field::LinearAccelIntervalMs,
        Field::GyroIntervalMs,
        Field::BaroIntervalMs,
        Field::GpsIntervalS,
        Field::PrivacyLatDeg,
        Field::PrivacyLonDeg,
        Field::PrivacyRadiusM,
        Field::WriteIntervalS,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Field::WatchId => "watch_id",
            Field::AccelIntervalMs => "accel_interval_ms",
            Field::LinearAccelIntervalMs => "linear_accel_interval_ms",
            Field::GyroIntervalMs => "gyro_interval_ms",
            Field::BaroIntervalMs => "baro_interval_ms",
            Field::GpsIntervalS => "gps_interval_s",
            Field::PrivacyLatDeg => "privacy_lat_deg",
            Field::PrivacyLonDeg => "privacy_lon_deg",
            Field::PrivacyRadiusM => "privacy_radius_m",
            Field::WriteIntervalS => "write_interval_s",
        }
    }

    pub fn from_key(key: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.key() == key)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionReason {
    Missing,
    OutOfRange,
    Unparsable,
}

impl fmt::Display for CorrectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionReason::Missing => "missing",
            CorrectionReason::OutOfRange => "out_of_range",
            CorrectionReason::Unparsable => "unparsable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub field: Field,
    /// The text found in the file, empty when the key was missing.
    pub raw: String,
    /// The replacement value, formatted as it would be serialized.
    pub corrected: String,
    pub reason: CorrectionReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub entries: Vec<Correction>,
    /// Keys that are neither config fields nor metafile keys.
    pub ignored_keys: Vec<String>,
}

impl CorrectionReport {
    /// True when every field parsed and validated unchanged.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, field: Field) -> Option<&Correction> {
        self.entries.iter().find(|c| c.field == field)
    }
}

impl fmt::Display for CorrectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.entries {
            writeln!(
                f,
                "{}: {} ({:?} -> {})",
                c.field, c.reason, c.raw, c.corrected
            )?;
        }
        for k in &self.ignored_keys {
            writeln!(f, "{k}: ignored")?;
        }
        Ok(())
    }
}

fn valid_interval(v: i64, lo: i64, hi: i64) -> bool {
    v == 0 || (lo..=hi).contains(&v)
}

pub fn valid_watch_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 16 && s.bytes().all(|b| b.is_ascii_alphanumeric())
}

enum Check {
    Ok,
    Unparsable,
    OutOfRange,
}

/// Integer interval with a 0 off-sentinel, otherwise within `lo..=hi`.
fn set_interval(slot: &mut u32, raw: &str, lo: i64, hi: i64) -> Check {
    match raw.parse::<i64>() {
        Ok(v) if valid_interval(v, lo, hi) => {
            *slot = v as u32;
            Check::Ok
        }
        Ok(_) => Check::OutOfRange,
        Err(_) => Check::Unparsable,
    }
}

fn set_float(slot: &mut f64, raw: &str, lo: f64, hi: f64) -> Check {
    match raw.parse::<f64>() {
        Ok(v) if !v.is_finite() => Check::Unparsable,
        Ok(v) if (lo..=hi).contains(&v) => {
            *slot = v;
            Check::Ok
        }
        Ok(_) => Check::OutOfRange,
        Err(_) => Check::Unparsable,
    }
}

impl Config {
    fn field_text(&self, field: Field) -> String {
        match field {
            Field::WatchId => self.watch_id.clone(),
            Field::AccelIntervalMs => self.accel_interval_ms.to_string(),
            Field::LinearAccelIntervalMs => self.linear_accel_interval_ms.to_string(),
            Field::GyroIntervalMs => self.gyro_interval_ms.to_string(),
            Field::BaroIntervalMs => self.baro_interval_ms.to_string(),
            Field::GpsIntervalS => self.gps_interval_s.to_string(),
            Field::PrivacyLatDeg => self.privacy_lat_deg.to_string(),
            Field::PrivacyLonDeg => self.privacy_lon_deg.to_string(),
            Field::PrivacyRadiusM => self.privacy_radius_m.to_string(),
            Field::WriteIntervalS => self.write_interval_s.to_string(),
        }
    }

    /// Try to apply one raw value, leaving the field untouched on rejection.
    fn apply(&mut self, field: Field, raw: &str) -> Check {
        match field {
            Field::WatchId if valid_watch_id(raw) => {
                self.watch_id = raw.to_string();
                Check::Ok
            }
            Field::WatchId => Check::Unparsable,
            Field::AccelIntervalMs => set_interval(&mut self.accel_interval_ms, raw, 10, 1000),
            Field::LinearAccelIntervalMs => {
                set_interval(&mut self.linear_accel_interval_ms, raw, 10, 1000)
            }
            Field::GyroIntervalMs => set_interval(&mut self.gyro_interval_ms, raw, 10, 1000),
            Field::BaroIntervalMs => set_interval(&mut self.baro_interval_ms, raw, 10, 1000),
            Field::GpsIntervalS => set_interval(&mut self.gps_interval_s, raw, 1, 10),
            Field::PrivacyRadiusM => set_interval(&mut self.privacy_radius_m, raw, 10, 1000),
            Field::PrivacyLatDeg => set_float(&mut self.privacy_lat_deg, raw, -90.0, 90.0),
            Field::PrivacyLonDeg => set_float(&mut self.privacy_lon_deg, raw, -180.0, 180.0),
            Field::WriteIntervalS => set_float(&mut self.write_interval_s, raw, 0.01, 10.0),
        }
    }

    /// Readout interval of a sensor in milliseconds, `None` when switched off.
    pub fn interval_ms(&self, kind: SensorKind) -> Option<u32> {
        let ms = match kind {
            SensorKind::Accel => self.accel_interval_ms,
            SensorKind::LinearAccel => self.linear_accel_interval_ms,
            SensorKind::Gyro => self.gyro_interval_ms,
            SensorKind::Baro => self.baro_interval_ms,
            SensorKind::Gps => self.gps_interval_s * 1000,
            SensorKind::Battery => BATTERY_INTERVAL_MS,
        };
        (ms != 0).then_some(ms)
    }

    /// Writer period in whole milliseconds.
    pub fn write_interval_ms(&self) -> u64 {
        ((self.write_interval_s * 1000.0).round() as u64).max(1)
    }

    /// Serialize as a plain config file (no metafile keys).
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for field in Field::ALL {
            out.push_str(field.key());
            out.push('=');
            out.push_str(&self.field_text(field));
            out.push('\n');
        }
        out
    }
}

/// Parse config-file bytes. Never fails: every rejected field falls back to
/// its default and is recorded in the report.
pub fn parse_config(input: &[u8]) -> (Config, CorrectionReport) {
    let text = String::from_utf8_lossy(input);
    let mut raw: Vec<(Field, String)> = Vec::new();
    let mut report = CorrectionReport::default();

    for line in text.split('\n') {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            report.ignored_keys.push(line.to_string());
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        match Field::from_key(key) {
            // later assignments override earlier ones
            Some(field) => match raw.iter_mut().find(|(f, _)| *f == field) {
                Some(slot) => slot.1 = value.to_string(),
                None => raw.push((field, value.to_string())),
            },
            None if META_KEYS.contains(&key) => {}
            None => report.ignored_keys.push(key.to_string()),
        }
    }

    let defaults = Config::default();
    let mut config = Config::default();
    for field in Field::ALL {
        let found = raw.iter().find(|(f, _)| *f == field).map(|(_, v)| v.as_str());
        let reason = match found {
            None => Some(CorrectionReason::Missing),
            Some("") => Some(CorrectionReason::Missing),
            Some(value) => match config.apply(field, value) {
                Check::Ok => None,
                Check::Unparsable => Some(CorrectionReason::Unparsable),
                Check::OutOfRange => Some(CorrectionReason::OutOfRange),
            },
        };
        if let Some(reason) = reason {
            log::warn!("config field {field} corrected to default ({reason})");
            report.entries.push(Correction {
                field,
                raw: found.unwrap_or("").to_string(),
                corrected: defaults.field_text(field),
                reason,
            });
        }
    }
    (config, report)
}

/// Metadata recorded next to the settings of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMeta {
    pub package_version: String,
    pub person_id: u16,
    pub start: NaiveDateTime,
    /// Session length on the central clock; known once the session closed.
    pub duration_ms: Option<u64>,
}

pub const START_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// The metafile: config-file format, corrected values, plus session keys.
pub fn serialize_metafile(config: &Config, meta: &SessionMeta) -> String {
    let mut out = config.to_config_text();
    out.push_str(&format!("package_version={}\n", meta.package_version));
    out.push_str(&format!("person_id={:03}\n", meta.person_id));
    out.push_str(&format!(
        "start_time={}\n",
        meta.start.format(START_TIME_FORMAT)
    ));
    if let Some(d) = meta.duration_ms {
        out.push_str(&format!("duration_ms={d}\n"));
    }
    out
}

/// Read the session keys back out of a metafile.
pub fn parse_session_meta(text: &str) -> Option<SessionMeta> {
    let mut version = None;
    let mut person = None;
    let mut start = None;
    let mut duration_ms = None;
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else {
            continue;
        };
        match k.trim() {
            "package_version" => version = Some(v.trim().to_string()),
            "person_id" => person = v.trim().parse::<u16>().ok().filter(|p| *p <= 999),
            "start_time" => {
                start = NaiveDateTime::parse_from_str(v.trim(), START_TIME_FORMAT).ok()
            }
            "duration_ms" => duration_ms = v.trim().parse().ok(),
            _ => {}
        }
    }
    Some(SessionMeta {
        package_version: version?,
        person_id: person?,
        start: start?,
        duration_ms,
    })
}

/// Sensors sharing one readout interval. Each group gets its own file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorGroup {
    pub interval_ms: u32,
    pub members: Vec<SensorKind>,
}

impl SensorGroup {
    /// `accel-linearaccel-gyro` style token used in file names and headers.
    pub fn kinds_token(&self) -> String {
        self.members
            .iter()
            .map(|k| k.token())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Partition enabled sensors by identical interval, ascending.
pub fn sensor_groups(config: &Config) -> Vec<SensorGroup> {
    let mut groups: Vec<SensorGroup> = Vec::new();
    for kind in SensorKind::ALL {
        let Some(interval_ms) = config.interval_ms(kind) else {
            continue;
        };
        match groups.iter_mut().find(|g| g.interval_ms == interval_ms) {
            Some(g) => g.members.push(kind),
            None => groups.push(SensorGroup {
                interval_ms,
                members: vec![kind],
            }),
        }
    }
    groups.sort_by_key(|g| g.interval_ms);
    groups
}
