//! The central-clock writer. One CSV file per sensor group; at every writer
//! tick each group gets at most one row holding the newest sample of every
//! member.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::config::{sensor_groups, Config, SensorGroup};
use crate::format::{format_row, make_filename, FileHeader};
use crate::geofence::PrivacyLabel;
use crate::sensor::Mailbox;

#[derive(Debug, Error)]
pub enum RecorderError {
    #[error("storage full: {needed} bytes needed, {available} available")]
    StorageFull { needed: u64, available: u64 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Simulated flash capacity shared by every file on the device.
#[derive(Debug, Clone, Copy)]
pub struct StorageBudget {
    pub capacity: Option<u64>,
    pub used: u64,
}

impl StorageBudget {
    pub fn unlimited() -> Self {
        Self {
            capacity: None,
            used: 0,
        }
    }

    pub fn with_capacity(bytes: u64) -> Self {
        Self {
            capacity: Some(bytes),
            used: 0,
        }
    }

    fn reserve(&mut self, bytes: u64) -> Result<(), RecorderError> {
        if let Some(cap) = self.capacity {
            let available = cap.saturating_sub(self.used);
            if bytes > available {
                return Err(RecorderError::StorageFull {
                    needed: bytes,
                    available,
                });
            }
        }
        self.used += bytes;
        Ok(())
    }
}

/// Everything needed to name and head a session's files.
#[derive(Debug, Clone)]
pub struct SessionInfo {
    pub person_id: u16,
    pub start: NaiveDateTime,
    /// Central-clock time (unix ms) of the session start.
    pub start_ms: i64,
    pub package_version: String,
}

#[derive(Debug)]
pub struct MeasurementFile {
    pub name: String,
    pub path: PathBuf,
    pub group: SensorGroup,
    pub header: FileHeader,
    pub rows_written: u64,
    last_written_seq: Vec<Option<u64>>,
    last_t_ms: Option<i64>,
    out: BufWriter<File>,
}

impl MeasurementFile {
    fn create(
        dir: &Path,
        config: &Config,
        info: &SessionInfo,
        group: SensorGroup,
        budget: &mut StorageBudget,
    ) -> Result<Self, RecorderError> {
        let name = make_filename(info.person_id, &info.start, &config.watch_id, &group);
        let path = dir.join(&name);
        let header = FileHeader::new(
            info.person_id,
            &info.start,
            info.start_ms,
            &config.watch_id,
            &group,
            config.write_interval_s,
            &info.package_version,
        );
        let line = header.to_line();
        budget.reserve(line.len() as u64 + 1)?;
        let io_err = |source| RecorderError::Io {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io_err)?);
        writeln!(out, "{line}").map_err(io_err)?;
        Ok(Self {
            name,
            last_written_seq: vec![None; group.members.len()],
            path: path.clone(),
            group,
            header,
            rows_written: 0,
            last_t_ms: None,
            out,
        })
    }

    /// Append a row if any member has a sample newer than the last one
    /// written. Returns whether a row was written.
    fn tick(
        &mut self,
        t_ms: i64,
        mailbox: &Mailbox,
        label: PrivacyLabel,
        sensor_clock_offset_ms: i64,
        budget: &mut StorageBudget,
    ) -> Result<bool, RecorderError> {
        if self.last_t_ms.is_some_and(|last| t_ms <= last) {
            return Ok(false);
        }
        let latest: Vec<_> = self.group.members.iter().map(|k| mailbox.latest(*k)).collect();
        let fresh: Vec<bool> = latest
            .iter()
            .zip(&self.last_written_seq)
            .map(|(s, last)| match (s, last) {
                (Some(s), Some(last)) => s.seq > *last,
                (Some(_), None) => true,
                (None, _) => false,
            })
            .collect();
        if !fresh.iter().any(|f| *f) {
            return Ok(false);
        }
        let mut line = format_row(
            label,
            t_ms,
            &self.group.members,
            &fresh,
            &latest,
            sensor_clock_offset_ms,
        );
        line.push('\n');
        budget.reserve(line.len() as u64)?;
        self.out
            .write_all(line.as_bytes())
            .map_err(|source| RecorderError::Io {
                path: self.path.clone(),
                source,
            })?;
        for ((slot, s), f) in self.last_written_seq.iter_mut().zip(&latest).zip(&fresh) {
            if *f {
                *slot = s.map(|s| s.seq);
            }
        }
        self.last_t_ms = Some(t_ms);
        self.rows_written += 1;
        Ok(true)
    }

    fn flush(&mut self) -> Result<(), RecorderError> {
        self.out.flush().map_err(|source| RecorderError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

/// Open files of one session.
#[derive(Debug)]
pub struct Recorder {
    pub files: Vec<MeasurementFile>,
    /// Added to sensor-relative timestamps before writing.
    sensor_clock_offset_ms: i64,
}

impl Recorder {
    /// Create one file per sensor group under `dir`, each starting with its
    /// header line.
    pub fn open(
        dir: &Path,
        config: &Config,
        info: &SessionInfo,
        budget: &mut StorageBudget,
    ) -> Result<Self, RecorderError> {
        fs::create_dir_all(dir).map_err(|source| RecorderError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let files = sensor_groups(config)
            .into_iter()
            .map(|g| MeasurementFile::create(dir, config, info, g, budget))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            files,
            sensor_clock_offset_ms: info.start_ms,
        })
    }

    /// One writer tick. Returns the number of rows written per file, in
    /// file order. A failure leaves earlier files of this tick written.
    pub fn writer_tick(
        &mut self,
        t_ms: i64,
        mailbox: &Mailbox,
        label: PrivacyLabel,
        budget: &mut StorageBudget,
    ) -> Result<Vec<u64>, RecorderError> {
        let offset = self.sensor_clock_offset_ms;
        let mut written = Vec::with_capacity(self.files.len());
        for f in &mut self.files {
            written.push(f.tick(t_ms, mailbox, label, offset, budget)? as u64);
        }
        Ok(written)
    }

    pub fn flush(&mut self) -> Result<(), RecorderError> {
        for f in &mut self.files {
            f.flush()?;
        }
        Ok(())
    }

    pub fn rows_written(&self) -> u64 {
        self.files.iter().map(|f| f.rows_written).sum()
    }

    pub fn close(mut self) -> Result<(), RecorderError> {
        self.flush()
    }
}

/// Bytes needed to record `hours_per_day × days` with the given average row
/// size: one row per readout interval per group.
pub fn estimate_storage(config: &Config, hours_per_day: f64, days: f64, bytes_per_row: f64) -> f64 {
    estimate_for_intervals(
        sensor_groups(config).iter().map(|g| g.interval_ms as f64),
        hours_per_day,
        days,
        bytes_per_row,
    )
}

pub fn estimate_for_intervals(
    intervals_ms: impl IntoIterator<Item = f64>,
    hours_per_day: f64,
    days: f64,
    bytes_per_row: f64,
) -> f64 {
    let duration_s = hours_per_day * 3600.0 * days;
    intervals_ms
        .into_iter()
        .map(|ms| duration_s * 1000.0 / ms * bytes_per_row)
        .sum()
}
