//! Host-side analysis of recorded files: G statistics, sample density,
//! barometric altitude and row size.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::config::{parse_config, parse_session_meta};
use crate::format::{parse_filename, parse_row, FileHeader, HeaderError, Row, DATA_EXT};
use crate::sensor::SensorKind;
use crate::sim::METERS_PER_HPA;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: bad header: {source}")]
    Header {
        path: PathBuf,
        #[source]
        source: HeaderError,
    },
    #[error("{0}: empty file")]
    Empty(PathBuf),
    #[error("{0}: no accelerometer columns")]
    NoAccel(PathBuf),
}

/// Height difference for a pressure difference, near sea level.
pub fn altitude(delta_p_hpa: f64) -> f64 {
    -METERS_PER_HPA * delta_p_hpa
}

/// A measurement file split into header and rows.
#[derive(Debug, Clone)]
pub struct DataFile {
    pub header: FileHeader,
    pub header_bytes: usize,
    pub rows: Vec<Row>,
    /// 1-based line numbers of rows that did not parse.
    pub malformed: Vec<usize>,
}

impl DataFile {
    pub fn parse(path: &Path, text: &str) -> Result<Self, AnalysisError> {
        let mut lines = text.split_inclusive('\n');
        let first = lines.next().ok_or_else(|| AnalysisError::Empty(path.to_path_buf()))?;
        let header = FileHeader::parse(first.trim_end_matches(['\n', '\r'])).map_err(|source| {
            AnalysisError::Header {
                path: path.to_path_buf(),
                source,
            }
        })?;
        let mut rows = Vec::new();
        let mut malformed = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            match parse_row(line, &header.kinds) {
                Ok(r) => rows.push(r),
                Err(_) => malformed.push(i + 2),
            }
        }
        Ok(Self {
            header,
            header_bytes: first.len(),
            rows,
            malformed,
        })
    }

    pub fn read(path: &Path) -> Result<Self, AnalysisError> {
        let bytes = fs::read(path).map_err(|source| AnalysisError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, &String::from_utf8_lossy(&bytes))
    }

    pub fn member(&self, kind: SensorKind) -> Option<usize> {
        self.header.kinds.iter().position(|k| *k == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GStats {
    pub n: u64,
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation of |a| over fresh accelerometer
/// cells. `None` if there are none.
pub fn gstats_of(file: &DataFile, path: &Path) -> Result<Option<GStats>, AnalysisError> {
    let idx = file
        .member(SensorKind::Accel)
        .ok_or_else(|| AnalysisError::NoAccel(path.to_path_buf()))?;
    // Welford
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for row in &file.rows {
        let Some(cell) = row.cells[idx].as_ref().filter(|_| row.fresh[idx]) else {
            continue;
        };
        let g = cell.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        n += 1;
        let d = g - mean;
        mean += d / n as f64;
        m2 += d * (g - mean);
    }
    if n == 0 {
        return Ok(None);
    }
    let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
    Ok(Some(GStats { n, mean, std }))
}

pub fn gstats(path: &Path) -> Result<Option<GStats>, AnalysisError> {
    gstats_of(&DataFile::read(path)?, path)
}

/// Average data row size in bytes, header excluded.
pub fn bytes_per_row(path: &Path) -> Result<Option<f64>, AnalysisError> {
    let len = fs::metadata(path)
        .map_err(|source| AnalysisError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .len();
    let file = DataFile::read(path)?;
    let rows = file.rows.len() + file.malformed.len();
    Ok((rows > 0).then(|| (len as usize - file.header_bytes) as f64 / rows as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEntry {
    pub file: String,
    pub sensor: SensorKind,
    /// Configured readout interval.
    pub interval_ms: u32,
    /// The slower of readout and writer interval: at most one sample of a
    /// sensor can be recorded per such period.
    pub effective_interval_ms: u64,
    pub duration_ms: u64,
    pub recorded: u64,
    pub expected: u64,
}

impl DensityEntry {
    pub fn density(&self) -> Option<f64> {
        (self.expected > 0).then(|| self.recorded as f64 / self.expected as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensityReport {
    pub entries: Vec<DensityEntry>,
    pub warnings: Vec<String>,
}

impl DensityReport {
    pub fn get(&self, sensor: SensorKind) -> Option<&DensityEntry> {
        self.entries.iter().find(|e| e.sensor == sensor)
    }
}

impl fmt::Display for DensityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<60} {:<13} {:>8} {:>9} {:>9} {:>8}",
            "file", "sensor", "interval", "recorded", "expected", "density"
        )?;
        for e in &self.entries {
            let d = e
                .density()
                .map(|d| format!("{d:.3}"))
                .unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:<60} {:<13} {:>8} {:>9} {:>9} {:>8}",
                e.file,
                e.sensor.to_string(),
                e.interval_ms,
                e.recorded,
                e.expected,
                d
            )?;
        }
        Ok(())
    }
}

struct Intervals {
    sensor_ms: Vec<u32>,
    writer_ms: u64,
    duration_ms: Option<u64>,
}

/// Intervals from the session metafile next to `path`, or from the header.
fn intervals_for(path: &Path, file: &DataFile, warnings: &mut Vec<String>) -> Intervals {
    let from_header = |warnings: &mut Vec<String>, why: &str| {
        warnings.push(format!("{}: {why}, using header intervals", path.display()));
        Intervals {
            sensor_ms: vec![file.header.interval_ms; file.header.kinds.len()],
            writer_ms: file.header.write_interval_ms(),
            duration_ms: None,
        }
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
    let Some(parsed) = name.as_deref().and_then(parse_filename) else {
        return from_header(warnings, "unrecognized file name");
    };
    let meta_path = path.with_file_name(parsed.meta_name());
    let Ok(bytes) = fs::read(&meta_path) else {
        return from_header(warnings, "missing metafile");
    };
    let (config, _) = parse_config(&bytes);
    let meta = parse_session_meta(&String::from_utf8_lossy(&bytes));
    let mut sensor_ms = Vec::new();
    for kind in &file.header.kinds {
        match config.interval_ms(*kind) {
            Some(ms) => sensor_ms.push(ms),
            None => return from_header(warnings, "metafile disables a recorded sensor"),
        }
    }
    Intervals {
        sensor_ms,
        writer_ms: config.write_interval_ms(),
        duration_ms: meta.and_then(|m| m.duration_ms),
    }
}

/// Density of every sensor in one measurement file.
pub fn density_file(path: &Path) -> Result<DensityReport, AnalysisError> {
    let file = DataFile::read(path)?;
    let mut report = DensityReport::default();
    let iv = intervals_for(path, &file, &mut report.warnings);
    if !file.malformed.is_empty() {
        report.warnings.push(format!(
            "{}: {} malformed rows skipped",
            path.display(),
            file.malformed.len()
        ));
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for (i, kind) in file.header.kinds.iter().enumerate() {
        let effective = (iv.sensor_ms[i] as u64).max(iv.writer_ms).max(1);
        // without a recorded session length, the last row bounds it
        let duration_ms = iv.duration_ms.unwrap_or_else(|| {
            file.rows
                .last()
                .map(|r| (r.t_ms - file.header.start_ms).max(0) as u64 + effective)
                .unwrap_or(0)
        });
        let recorded = file.rows.iter().filter(|r| r.fresh[i]).count() as u64;
        report.entries.push(DensityEntry {
            file: name.clone(),
            sensor: *kind,
            interval_ms: iv.sensor_ms[i],
            effective_interval_ms: effective,
            duration_ms,
            recorded,
            expected: duration_ms / effective,
        });
    }
    Ok(report)
}

/// Measurement files under `root` (or `root` itself), sorted by path.
pub fn data_files(root: &Path) -> Vec<PathBuf> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .flatten()
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            let name = e.file_name().to_string_lossy();
            name.ends_with(DATA_EXT) && parse_filename(&name).is_some_and(|f| !f.is_meta())
        })
        .map(|e| e.into_path())
        .collect()
}

/// Density of a file or every measurement file in a tree.
pub fn density(path: &Path) -> Result<DensityReport, AnalysisError> {
    if path.is_file() {
        return density_file(path);
    }
    if !path.exists() {
        return Err(AnalysisError::Io {
            path: path.to_path_buf(),
            source: io::ErrorKind::NotFound.into(),
        });
    }
    let mut report = DensityReport::default();
    for f in data_files(path) {
        match density_file(&f) {
            Ok(r) => {
                report.entries.extend(r.entries);
                report.warnings.extend(r.warnings);
            }
            Err(e) => report.warnings.push(e.to_string()),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "#person=001;date=20220601;time=093000;watch=D8F8;sensors=accel;interval_ms=25;write_interval_s=0.025;start_ms=1000;package_version=0.1.0;columns=label,t_ms,fresh,accel_seq,accel_ts,accel_x,accel_y,accel_z\n";

    fn file(rows: &[&str]) -> DataFile {
        let text = format!("{HEADER}{}", rows.join("\n"));
        DataFile::parse(Path::new("x.csv"), &text).unwrap()
    }

    #[test]
    fn altitude_examples() {
        assert_eq!(altitude(-2.0), 15.5);
        assert_eq!(altitude(0.0), 0.0);
        assert!((altitude(0.01) + 0.0775).abs() < 1e-12);
    }

    #[test]
    fn gstats_three_four_five() {
        let f = file(&["I,1000,1,0,1000,3,4,0", "I,1025,1,1,1025,3,4,0"]);
        let g = gstats_of(&f, Path::new("x")).unwrap().unwrap();
        assert_eq!(g.mean, 5.0);
        assert_eq!(g.std, 0.0);
        assert_eq!(g.n, 2);
    }

    #[test]
    fn gstats_skips_stale_and_reports_empty() {
        let f = file(&["I,1000,0,0,1000,3,4,0"]);
        assert_eq!(gstats_of(&f, Path::new("x")).unwrap(), None);
    }

    #[test]
    fn density_without_metafile_uses_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("P001_20220601_093000_D8F8_accel.csv");
        let rows: String = (0..4)
            .map(|k| format!("I,{},1,{k},{},1,1,1\n", 1000 + 25 * k, 1000 + 25 * k))
            .collect();
        fs::write(&path, format!("{HEADER}{rows}")).unwrap();
        let r = density(&path).unwrap();
        assert_eq!(r.warnings.len(), 1);
        let e = r.get(SensorKind::Accel).unwrap();
        assert_eq!((e.recorded, e.expected), (4, 4));
        assert_eq!(e.density(), Some(1.0));
    }
}
