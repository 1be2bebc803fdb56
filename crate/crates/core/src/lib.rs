//! Hardware-independent wearable data acquisition.
//!
//! A virtual watch ([`service::Device`]) records simulated multi-rate sensor
//! streams into per-frequency CSV files with privacy labels, driven by a
//! `key=value` configuration that is corrected rather than rejected. The
//! [`bridge`] module exposes the device to host tools over newline-delimited
//! JSON, and [`logistics`] / [`analysis`] implement the host side: pulling
//! files into a per-person tree, scrubbing private rows and checking sample
//! density and sensor statistics.

pub mod analysis;
pub mod bridge;
pub mod config;
pub mod format;
pub mod geofence;
pub mod logistics;
pub mod recorder;
pub mod sensor;
pub mod service;
pub mod sim;

pub use config::{parse_config, serialize_metafile, Config, CorrectionReport};
pub use geofence::PrivacyLabel;
pub use sensor::{Sample, SensorKind};
pub use service::{ControlMessage, Device, DeviceOptions, DeviceState};
