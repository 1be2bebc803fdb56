//! Seedable simulated sensors.
//!
//! Each scenario describes the physics the watch experiences (lying still,
//! spinning face-up on its glass, walking a GPS track, climbing) and a timing
//! pathology: a constant timestamp bias per sensor, gaussian jitter on the
//! readout instant and randomly dropped readouts.
//!
//! Every random draw for readout `k` of sensor `kind` comes from a ChaCha
//! stream positioned at a fixed word offset derived from `(seed, kind, k)`,
//! so a readout can be regenerated in isolation and two runs with the same
//! seed are bit-identical.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geofence::EARTH_RADIUS_M;
use crate::sensor::{Sample, SensorKind};

pub const STANDARD_GRAVITY: f64 = 9.81;
pub const SEA_LEVEL_HPA: f64 = 1013.25;
/// Altitude change per hPa near sea level at 10 °C.
pub const METERS_PER_HPA: f64 = 7.75;

/// Gravity low-pass coefficient per 25 ms step.
pub const GRAVITY_ALPHA: f64 = 0.9;
const GRAVITY_STEP_MS: f64 = 25.0;

/// Random words reserved per readout in each ChaCha stream.
const WORDS_PER_READOUT: u128 = 64;
const MAX_JITTER_DRAWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Rest,
    Spin,
    Walk,
    Climb,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Rest => "rest",
            ScenarioKind::Spin => "spin",
            ScenarioKind::Walk => "walk",
            ScenarioKind::Climb => "climb",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rest" => Ok(ScenarioKind::Rest),
            "spin" => Ok(ScenarioKind::Spin),
            "walk" => Ok(ScenarioKind::Walk),
            "climb" => Ok(ScenarioKind::Climb),
            other => Err(ScenarioError::UnknownScenario(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {value:?}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {0}: expected key=value")]
    Syntax(usize),
    #[error("{0}")]
    Invalid(String),
}

/// Timestamp and delivery defects of the sensor framework.
#[derive(Debug, Clone, PartialEq)]
pub struct Pathology {
    /// Constant offset added to each sensor's own timestamps, by kind index.
    pub bias_ms: [i64; 6],
    pub jitter_std_ms: f64,
    pub drop_probability: f64,
}

impl Pathology {
    pub fn ideal() -> Self {
        Self {
            bias_ms: [0; 6],
            jitter_std_ms: 0.0,
            drop_probability: 0.0,
        }
    }

    pub fn bias(&self, kind: SensorKind) -> i64 {
        self.bias_ms[kind.index()]
    }
}

impl Default for Pathology {
    /// Biased per-sensor clocks, a few ms of readout jitter and 2 % drops.
    fn default() -> Self {
        Self {
            bias_ms: [3, 5, 7, -4, 12, 0],
            jitter_std_ms: 4.0,
            drop_probability: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t_s: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub duration_s: f64,
    pub seed: u64,
    pub gravity_mps2: f64,
    /// Tilt of the watch face about its x axis.
    pub tilt_deg: f64,
    pub accel_noise_std: f64,
    pub gyro_noise_std_dps: f64,
    pub baro_noise_std_hpa: f64,
    pub base_pressure_hpa: f64,
    pub omega0_dps: f64,
    pub tau_s: f64,
    /// Sensor offset from the spin axis.
    pub spin_radius_m: f64,
    /// Whether the GPS ever gets a satellite lock.
    pub gps_lock: bool,
    pub track: Vec<Waypoint>,
    pub pathology: Pathology,
}

pub const HOME_LAT: f64 = 52.169311;
pub const HOME_LON: f64 = 4.456711;

/// Latitude `meters` north of `lat_deg` along a meridian.
pub fn lat_offset(lat_deg: f64, meters: f64) -> f64 {
    lat_deg + (meters / EARTH_RADIUS_M).to_degrees()
}

impl Scenario {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        let home = |t_s, alt_m| Waypoint {
            t_s,
            lat_deg: HOME_LAT,
            lon_deg: HOME_LON,
            alt_m,
        };
        let track = match kind {
            ScenarioKind::Rest | ScenarioKind::Spin => vec![home(0.0, 0.0)],
            // Walks north at 1.4 m/s from 93 m north of the default privacy
            // center, so it leaves the 100 m circle at t = 5 s.
            ScenarioKind::Walk => vec![
                Waypoint {
                    lat_deg: lat_offset(HOME_LAT, 93.0),
                    ..home(0.0, 0.0)
                },
                Waypoint {
                    lat_deg: lat_offset(HOME_LAT, 93.0 + 1.4 * 600.0),
                    ..home(600.0, 0.0)
                },
            ],
            // 10 s at ground level, 40 s climbing 31 m, then holding.
            ScenarioKind::Climb => vec![home(0.0, 0.0), home(10.0, 0.0), home(50.0, 31.0)],
        };
        Self {
            kind,
            duration_s: 60.0,
            seed,
            gravity_mps2: STANDARD_GRAVITY,
            tilt_deg: 0.0,
            accel_noise_std: 0.03,
            gyro_noise_std_dps: 0.05,
            baro_noise_std_hpa: 0.01,
            base_pressure_hpa: SEA_LEVEL_HPA,
            omega0_dps: 360.0,
            tau_s: 10.0,
            spin_radius_m: 0.02,
            gps_lock: true,
            track,
            pathology: Pathology::default(),
        }
    }

    pub fn with_pathology(mut self, pathology: Pathology) -> Self {
        self.pathology = pathology;
        self
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s;
        self
    }

    pub fn noise_free(mut self) -> Self {
        self.accel_noise_std = 0.0;
        self.gyro_noise_std_dps = 0.0;
        self.baro_noise_std_hpa = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        if !(self.pathology.jitter_std_ms >= 0.0 && self.pathology.jitter_std_ms.is_finite()) {
            return bad("jitter_std_ms must be non-negative");
        }
        if !(0.0..1.0).contains(&self.pathology.drop_probability) {
            return bad("drop_probability must be in [0, 1)");
        }
        let noise = [
            self.accel_noise_std,
            self.gyro_noise_std_dps,
            self.baro_noise_std_hpa,
        ];
        if noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise levels must be non-negative");
        }
        if self.kind == ScenarioKind::Spin && !(self.omega0_dps > 0.0 && self.tau_s > 0.0) {
            return bad("spin needs omega0_dps > 0 and tau_s > 0");
        }
        if self.spin_radius_m.is_nan() || self.spin_radius_m < 0.0 {
            return bad("radius_m must be non-negative");
        }
        if self.track.is_empty() {
            return bad("track needs at least one waypoint");
        }
        if self.track.windows(2).any(|w| w[1].t_s < w[0].t_s) {
            return bad("waypoints must be in time order");
        }
        Ok(())
    }

    /// Position along the track, holding the end points outside its span.
    pub fn track_at(&self, t_s: f64) -> Waypoint {
        let first = self.track[0];
        if t_s <= first.t_s {
            return Waypoint { t_s, ..first };
        }
        for w in self.track.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t_s <= b.t_s {
                let span = b.t_s - a.t_s;
                let f = if span > 0.0 { (t_s - a.t_s) / span } else { 1.0 };
                let lerp = |x: f64, y: f64| x + (y - x) * f;
                return Waypoint {
                    t_s,
                    lat_deg: lerp(a.lat_deg, b.lat_deg),
                    lon_deg: lerp(a.lon_deg, b.lon_deg),
                    alt_m: lerp(a.alt_m, b.alt_m),
                };
            }
        }
        Waypoint {
            t_s,
            ..*self.track.last().unwrap()
        }
    }

    /// Noise-free accelerometer reading at `t_s`.
    pub fn accel_truth(&self, t_s: f64) -> [f64; 3] {
        match self.kind {
            ScenarioKind::Spin => {
                spin_kinematics(t_s, self.omega0_dps, self.tau_s, self.spin_radius_m, self.gravity_mps2)
                    .accel
            }
            _ => gravity_vector(self.gravity_mps2, self.tilt_deg),
        }
    }

    pub fn gyro_truth(&self, t_s: f64) -> [f64; 3] {
        match self.kind {
            ScenarioKind::Spin => {
                spin_kinematics(t_s, self.omega0_dps, self.tau_s, self.spin_radius_m, self.gravity_mps2)
                    .gyro_dps
            }
            _ => [0.0; 3],
        }
    }

    pub fn pressure_truth(&self, t_s: f64) -> f64 {
        pressure_at_altitude(self.base_pressure_hpa, self.track_at(t_s).alt_m)
    }
}

/// Gravity as seen by a watch tilted about its x axis; z is the face normal.
pub fn gravity_vector(g0: f64, tilt_deg: f64) -> [f64; 3] {
    let t = tilt_deg.to_radians();
    [0.0, g0 * t.sin(), g0 * t.cos()]
}

pub fn pressure_at_altitude(p0_hpa: f64, alt_m: f64) -> f64 {
    p0_hpa - alt_m / METERS_PER_HPA
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub gyro_dps: [f64; 3],
    pub accel: [f64; 3],
}

/// Watch spinning face-up about its z axis with exponentially decaying rate.
/// The sensor sits `r_m` from the axis, so it feels a centripetal
/// acceleration of `ω²·r` pointing at the axis (−x in the watch frame).
pub fn spin_kinematics(t_s: f64, omega0_dps: f64, tau_s: f64, r_m: f64, g0: f64) -> SpinState {
    let omega_dps = omega0_dps * (-t_s / tau_s).exp();
    let omega_rad = omega_dps * PI / 180.0;
    SpinState {
        gyro_dps: [0.0, 0.0, omega_dps],
        accel: [-(omega_rad * omega_rad) * r_m, 0.0, g0],
    }
}

/// Values are reported at the sensor's float32 word size.
fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

/// When readout `k` happens and whether it is delivered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutTiming {
    /// Nominal readout time relative to the stream origin.
    pub nominal_ms: u64,
    pub jitter_ms: i64,
    pub dropped: bool,
}

impl ReadoutTiming {
    /// Actual readout instant relative to the stream origin.
    pub fn actual_ms(&self) -> u64 {
        (self.nominal_ms as i64 + self.jitter_ms).max(0) as u64
    }
}

const CHANNEL_TIMING: u64 = 0;
const CHANNEL_VALUES: u64 = 1;

fn readout_rng(seed: u64, kind: SensorKind, channel: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind.index() as u64 * 2 + channel);
    rng.set_word_pos(k as u128 * WORDS_PER_READOUT);
    rng
}

/// Timing of readout `k`: jitter from a normal truncated so that readouts
/// never overtake each other, then the drop decision.
pub fn readout_timing(pathology: &Pathology, seed: u64, kind: SensorKind, interval_ms: u32, k: u64) -> ReadoutTiming {
    let mut rng = readout_rng(seed, kind, CHANNEL_TIMING, k);
    let bound = (interval_ms.saturating_sub(1) / 2) as i64;
    let mut jitter_ms = 0;
    if pathology.jitter_std_ms > 0.0 {
        for _ in 0..MAX_JITTER_DRAWS {
            let z: f64 = StandardNormal.sample(&mut rng);
            let j = (z * pathology.jitter_std_ms).round() as i64;
            if j.abs() <= bound {
                jitter_ms = j;
                break;
            }
        }
    }
    let dropped = pathology.drop_probability > 0.0 && rng.random::<f64>() < pathology.drop_probability;
    ReadoutTiming {
        nominal_ms: k * interval_ms as u64,
        jitter_ms,
        dropped,
    }
}

/// A delivered (or dropped) readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    /// Virtual time since boot at which the readout is available.
    pub at_ms: u64,
    pub sample: Option<Sample>,
}

/// Sequential readout generator for one sensor. Only the linear-acceleration
/// stream carries state (its gravity estimate); all other readouts are a
/// pure function of `(scenario, kind, k)`.
#[derive(Debug, Clone)]
pub struct SensorStream {
    kind: SensorKind,
    interval_ms: u32,
    /// Virtual time since boot of readout 0.
    origin_ms: u64,
    next_k: u64,
    /// Timing of readout `next_k`, once computed.
    pending: Option<ReadoutTiming>,
    gravity_estimate: [f64; 3],
}

impl SensorStream {
    pub fn new(kind: SensorKind, interval_ms: u32, origin_ms: u64) -> Self {
        Self {
            kind,
            interval_ms,
            origin_ms,
            next_k: 0,
            pending: None,
            gravity_estimate: [0.0; 3],
        }
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn interval_ms(&self) -> u32 {
        self.interval_ms
    }

    /// When the next readout becomes available.
    pub fn peek_time(&mut self, scenario: &Scenario) -> u64 {
        self.origin_ms + self.pending_timing(scenario).actual_ms()
    }

    fn pending_timing(&mut self, scenario: &Scenario) -> ReadoutTiming {
        let (kind, interval, k) = (self.kind, self.interval_ms, self.next_k);
        *self
            .pending
            .get_or_insert_with(|| readout_timing(&scenario.pathology, scenario.seed, kind, interval, k))
    }

    pub fn next_readout(&mut self, scenario: &Scenario) -> Readout {
        let timing = self.pending_timing(scenario);
        let k = self.next_k;
        self.next_k += 1;
        self.pending = None;
        let at_ms = self.origin_ms + timing.actual_ms();
        let t_s = at_ms as f64 / 1000.0;
        let mut rng = readout_rng(scenario.seed, self.kind, CHANNEL_VALUES, k);
        let mut normal = |std: f64| -> f64 {
            if std > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * std
            } else {
                0.0
            }
        };

        let values: Option<Vec<f64>> = match self.kind {
            SensorKind::Accel => {
                let a = scenario.accel_truth(t_s);
                Some(a.iter().map(|v| quantize(v + normal(scenario.accel_noise_std))).collect())
            }
            SensorKind::LinearAccel => {
                let a = scenario.accel_truth(t_s);
                let raw: Vec<f64> = a.iter().map(|v| v + normal(scenario.accel_noise_std)).collect();
                let alpha = GRAVITY_ALPHA.powf(self.interval_ms as f64 / GRAVITY_STEP_MS);
                let mut out = Vec::with_capacity(3);
                for (g, r) in self.gravity_estimate.iter_mut().zip(&raw) {
                    *g = alpha * *g + (1.0 - alpha) * r;
                    out.push(quantize(r - *g));
                }
                Some(out)
            }
            SensorKind::Gyro => {
                let w = scenario.gyro_truth(t_s);
                Some(w.iter().map(|v| quantize(v + normal(scenario.gyro_noise_std_dps))).collect())
            }
            SensorKind::Baro => Some(vec![quantize(
                scenario.pressure_truth(t_s) + normal(scenario.baro_noise_std_hpa),
            )]),
            SensorKind::Gps => scenario.gps_lock.then(|| {
                let p = scenario.track_at(t_s);
                vec![p.lat_deg, p.lon_deg]
            }),
            SensorKind::Battery => {
                // drains linearly over 12 hours
                let pct = (100.0 - t_s / 432.0).max(0.0);
                Some(vec![quantize(pct)])
            }
        };

        let sample = match values {
            Some(values) if !timing.dropped => Some(Sample {
                kind: self.kind,
                seq: k,
                sensor_time_ms: timing.nominal_ms as i64 + timing.jitter_ms + scenario.pathology.bias(self.kind),
                values,
            }),
            _ => None,
        };
        Readout { at_ms, sample }
    }
}

/// Stateless readout for kinds without filter state; linear acceleration is
/// regenerated from the start of its stream.
pub fn next_sample(scenario: &Scenario, kind: SensorKind, interval_ms: u32, k: u64) -> Option<Sample> {
    let mut stream = SensorStream::new(kind, interval_ms, 0);
    if kind == SensorKind::LinearAccel {
        for _ in 0..k {
            stream.next_readout(scenario);
        }
    } else {
        stream.next_k = k;
    }
    stream.next_readout(scenario).sample
}

/// Parse a scenario file: `key=value` lines, `#` comments. `waypoint=` lines
/// (`t_s,lat,lon,alt_m`) replace the scenario's default track.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ScenarioError::Syntax(i + 1))?;
        lines.push((i + 1, k.trim(), v.trim()));
    }
    let kind = match lines.iter().find(|(_, k, _)| *k == "name") {
        Some((_, _, v)) => v.parse()?,
        None => ScenarioKind::Rest,
    };
    let mut s = Scenario::new(kind, 0);
    let mut track = Vec::new();
    for (line, key, value) in lines {
        let bad = || ScenarioError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        let float = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "name" => {}
            "duration_s" => s.duration_s = float()?,
            "seed" => s.seed = value.parse().map_err(|_| bad())?,
            "gravity_mps2" => s.gravity_mps2 = float()?,
            "tilt_deg" => s.tilt_deg = float()?,
            "accel_noise_std" => s.accel_noise_std = float()?,
            "gyro_noise_std_dps" => s.gyro_noise_std_dps = float()?,
            "baro_noise_std_hpa" => s.baro_noise_std_hpa = float()?,
            "base_pressure_hpa" => s.base_pressure_hpa = float()?,
            "omega0_dps" => s.omega0_dps = float()?,
            "tau_s" => s.tau_s = float()?,
            "radius_m" => s.spin_radius_m = float()?,
            "gps_lock" => s.gps_lock = value.parse().map_err(|_| bad())?,
            "jitter_std_ms" => s.pathology.jitter_std_ms = float()?,
            "drop_probability" => s.pathology.drop_probability = float()?,
            "waypoint" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                let [t_s, lat_deg, lon_deg, alt_m] = parts[..] else {
                    return Err(bad());
                };
                if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..=180.0).contains(&lon_deg) {
                    return Err(bad());
                }
                track.push(Waypoint {
                    t_s,
                    lat_deg,
                    lon_deg,
                    alt_m,
                });
            }
            _ => match key.strip_prefix("bias_ms.") {
                Some(kind) => {
                    let kind: SensorKind = kind.parse().map_err(|_| ScenarioError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })?;
                    s.pathology.bias_ms[kind.index()] = value.parse().map_err(|_| bad())?;
                }
                None => {
                    return Err(ScenarioError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            },
        }
    }
    if !track.is_empty() {
        s.track = track;
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(kind: ScenarioKind) -> Scenario {
        Scenario::new(kind, 1).with_pathology(Pathology::ideal())
    }

    #[test]
    fn unperturbed_timestamp_is_nominal() {
        let s = ideal(ScenarioKind::Rest);
        let sample = next_sample(&s, SensorKind::Accel, 25, 4).unwrap();
        assert_eq!(sample.sensor_time_ms, 100);
        assert_eq!(sample.seq, 4);
    }

    #[test]
    fn bias_shifts_sensor_clock() {
        let mut s = ideal(ScenarioKind::Rest);
        s.pathology.bias_ms[SensorKind::Gyro.index()] = 7;
        let sample = next_sample(&s, SensorKind::Gyro, 25, 0).unwrap();
        assert_eq!(sample.sensor_time_ms, 7);
    }

    #[test]
    fn noiseless_rest_is_gravity() {
        let s = ideal(ScenarioKind::Rest).noise_free();
        let sample = next_sample(&s, SensorKind::Accel, 25, 17).unwrap();
        assert_eq!(sample.values, vec![0.0, 0.0, 9.81_f32 as f64]);
    }

    #[test]
    fn tilt_projects_gravity() {
        let g = gravity_vector(9.81, 30.0);
        assert!((g[2] - 9.81 * 30f64.to_radians().cos()).abs() < 1e-12);
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        assert!((norm - 9.81).abs() < 1e-12);
    }

    #[test]
    fn spin_start_and_limit() {
        let s0 = spin_kinematics(0.0, 360.0, 10.0, 0.02, 9.81);
        assert_eq!(s0.gyro_dps[2], 360.0);
        let expected = (2.0 * PI).powi(2) * 0.02;
        assert!((s0.accel[0].abs() - expected).abs() < 1e-12);
        assert!((s0.accel[0].abs() - 0.7896).abs() < 1e-4);
        let late = spin_kinematics(1e4, 360.0, 10.0, 0.02, 9.81);
        assert!(late.gyro_dps[2] < 1e-300);
        assert_eq!(late.accel[2], 9.81);
    }

    #[test]
    fn pressure_profile() {
        assert_eq!(pressure_at_altitude(SEA_LEVEL_HPA, 0.0), 1013.25);
        assert!((pressure_at_altitude(SEA_LEVEL_HPA, 15.5) - 1011.25).abs() < 1e-12);
    }

    #[test]
    fn jitter_stays_within_half_interval() {
        let mut p = Pathology::ideal();
        p.jitter_std_ms = 50.0;
        for k in 0..2000 {
            let t = readout_timing(&p, 9, SensorKind::Accel, 25, k);
            assert!(t.jitter_ms.abs() <= 12);
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let s = Scenario::new(ScenarioKind::Spin, 42);
        let run = || {
            let mut st = SensorStream::new(SensorKind::LinearAccel, 25, 0);
            (0..500).map(|_| st.next_readout(&s)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn walk_leaves_circle_at_five_seconds() {
        let s = Scenario::new(ScenarioKind::Walk, 0);
        let d = |t| {
            let p = s.track_at(t);
            crate::geofence::haversine_m(p.lat_deg, p.lon_deg, HOME_LAT, HOME_LON)
        };
        assert!(d(4.9) < 100.0);
        assert!(d(5.1) > 100.0);
        assert!((d(5.0) - 100.0).abs() < 1e-6);
    }

    #[test]
    fn scenario_file() {
        let s = parse_scenario(
            "name=climb\nseed=7\nduration_s=90\njitter_std_ms=0\nbias_ms.gyro=-3\nwaypoint=0,52,4,0\nwaypoint=60,52,4,31\n",
        )
        .unwrap();
        assert_eq!(s.kind, ScenarioKind::Climb);
        assert_eq!(s.seed, 7);
        assert_eq!(s.pathology.bias(SensorKind::Gyro), -3);
        assert_eq!(s.track.len(), 2);
        assert_eq!(s.track_at(30.0).alt_m, 15.5);

        assert!(matches!(parse_scenario("name=dance"), Err(ScenarioError::UnknownScenario(_))));
        assert!(matches!(parse_scenario("wobble=1"), Err(ScenarioError::UnknownKey { .. })));
        assert!(matches!(parse_scenario("duration_s=-1"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(parse_scenario("drop_probability=1"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(parse_scenario("waypoint=1,2"), Err(ScenarioError::BadValue { .. })));
    }
}
