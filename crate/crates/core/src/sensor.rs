use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Sensor kinds in canonical order. The order matters: it fixes group member
/// order, column order and event tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Accel,
    LinearAccel,
    Gyro,
    Baro,
    Gps,
    Battery,
}

impl SensorKind {
    pub const ALL: [SensorKind; 6] = [
        SensorKind::Accel,
        SensorKind::LinearAccel,
        SensorKind::Gyro,
        SensorKind::Baro,
        SensorKind::Gps,
        SensorKind::Battery,
    ];

    /// Number of values a readout carries.
    pub fn arity(self) -> usize {
        match self {
            SensorKind::Accel | SensorKind::LinearAccel | SensorKind::Gyro => 3,
            SensorKind::Baro | SensorKind::Battery => 1,
            SensorKind::Gps => 2,
        }
    }

    /// Compact name used in file names and column prefixes.
    pub fn token(self) -> &'static str {
        match self {
            SensorKind::Accel => "accel",
            SensorKind::LinearAccel => "linearaccel",
            SensorKind::Gyro => "gyro",
            SensorKind::Baro => "baro",
            SensorKind::Gps => "gps",
            SensorKind::Battery => "battery",
        }
    }

    pub fn value_names(self) -> &'static [&'static str] {
        match self {
            SensorKind::Accel | SensorKind::LinearAccel | SensorKind::Gyro => &["x", "y", "z"],
            SensorKind::Baro => &["hpa"],
            SensorKind::Gps => &["lat", "lon"],
            SensorKind::Battery => &["pct"],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SensorKind::ALL
            .into_iter()
            .find(|k| k.token() == s || (s == "linear_accel" && *k == SensorKind::LinearAccel))
            .ok_or_else(|| format!("unknown sensor kind {s:?}"))
    }
}

/// One sensor readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub kind: SensorKind,
    /// Readout index within the session; gaps mean dropped readouts.
    pub seq: u64,
    /// The sensor's own timestamp, including its bias and jitter.
    pub sensor_time_ms: i64,
    pub values: Vec<f64>,
}

/// Latest-value mailbox, one slot per sensor kind. Writing overwrites, so a
/// reader only ever sees the newest readout.
#[derive(Debug, Clone, Default)]
pub struct Mailbox {
    slots: [Option<Sample>; 6],
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, sample: Sample) {
        let i = sample.kind.index();
        self.slots[i] = Some(sample);
    }

    pub fn latest(&self, kind: SensorKind) -> Option<&Sample> {
        self.slots[kind.index()].as_ref()
    }

    pub fn clear(&mut self) {
        self.slots = Default::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mailbox_keeps_only_latest() {
        let mut m = Mailbox::new();
        for seq in 0..3 {
            m.put(Sample {
                kind: SensorKind::Gyro,
                seq,
                sensor_time_ms: seq as i64 * 10,
                values: vec![0.0; 3],
            });
        }
        assert_eq!(m.latest(SensorKind::Gyro).unwrap().seq, 2);
        assert!(m.latest(SensorKind::Accel).is_none());
    }

    #[test]
    fn kind_tokens_parse_back() {
        for k in SensorKind::ALL {
            assert_eq!(k.token().parse::<SensorKind>().unwrap(), k);
            assert_eq!(k.value_names().len(), k.arity());
        }
        assert_eq!("linear_accel".parse::<SensorKind>().unwrap(), SensorKind::LinearAccel);
    }
}
