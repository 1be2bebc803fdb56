//! Copying data off the device into a person/session tree, and the privacy
//! scrub that drops rows recorded outside the public area.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::format::{parse_filename, parse_row, FileHeader, DATA_EXT};
use crate::geofence::PrivacyLabel;
use crate::service::{Device, FileEntry};

#[derive(Debug, Error)]
pub enum LogisticsError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("device: {0}")]
    Source(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LogisticsError + '_ {
    move |source| LogisticsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Anything files can be pulled from: a local device or a bridge client.
pub trait FileSource {
    fn list(&mut self) -> Result<Vec<FileEntry>, LogisticsError>;
    fn fetch(&mut self, name: &str) -> Result<Vec<u8>, LogisticsError>;
}

impl FileSource for Device {
    fn list(&mut self) -> Result<Vec<FileEntry>, LogisticsError> {
        Ok(self.list_files())
    }

    fn fetch(&mut self, name: &str) -> Result<Vec<u8>, LogisticsError> {
        self.read_file(name)
            .ok_or_else(|| LogisticsError::Source(format!("not_found: {name}")))
    }
}

/// `P<person>/<YYYYMMDD_HHMMSS>/<name>` for a device file name.
pub fn tree_path(name: &str) -> Option<PathBuf> {
    let f = parse_filename(name)?;
    Some(
        PathBuf::from(format!("P{:03}", f.person_id))
            .join(f.session_stamp())
            .join(name),
    )
}

#[derive(Debug, Default)]
pub struct PullReport {
    pub copied: Vec<PathBuf>,
    pub failed: Vec<(String, String)>,
    /// Filled when pulling with the scrub applied.
    pub scrubbed: Vec<ScrubFileReport>,
}

impl PullReport {
    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Write through a `.part` file so an interrupted copy never looks complete.
fn write_atomic(dest: &Path, bytes: &[u8]) -> Result<(), LogisticsError> {
    if let Some(dir) = dest.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut part = dest.as_os_str().to_owned();
    part.push(".part");
    let part = PathBuf::from(part);
    fs::write(&part, bytes).map_err(io_err(&part))?;
    fs::rename(&part, dest).map_err(io_err(dest))
}

/// Copy every file from the device into `out_dir`. With `scrub`, data files
/// pass through [`scrub_bytes`] on the way.
pub fn pull_all(
    source: &mut dyn FileSource,
    out_dir: &Path,
    scrub: bool,
) -> Result<PullReport, LogisticsError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut report = PullReport::default();
    for entry in source.list()? {
        let Some(rel) = tree_path(&entry.name) else {
            report
                .failed
                .push((entry.name.clone(), "unrecognized file name".into()));
            continue;
        };
        let bytes = match source.fetch(&entry.name) {
            Ok(b) => b,
            Err(e) => {
                report.failed.push((entry.name.clone(), e.to_string()));
                continue;
            }
        };
        let dest = out_dir.join(&rel);
        let bytes = if scrub && is_data_file(&entry.name) {
            let (out, mut r) = scrub_bytes(&bytes);
            r.path = rel.clone();
            report.scrubbed.push(r);
            out
        } else {
            bytes
        };
        match write_atomic(&dest, &bytes) {
            Ok(()) => report.copied.push(rel),
            Err(e) => report.failed.push((entry.name.clone(), e.to_string())),
        }
    }
    Ok(report)
}

fn is_data_file(name: &str) -> bool {
    name.ends_with(DATA_EXT) && parse_filename(name).is_some_and(|f| !f.is_meta())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScrubFileReport {
    pub path: PathBuf,
    pub kept: usize,
    pub removed: usize,
    /// 1-based line numbers of rows kept because they did not parse.
    pub malformed: Vec<usize>,
    pub bad_header: bool,
}

/// Drop rows labeled `P`. The header, `I`/`?` rows and unparsable rows are
/// kept byte for byte.
pub fn scrub_bytes(input: &[u8]) -> (Vec<u8>, ScrubFileReport) {
    let mut report = ScrubFileReport::default();
    let mut out = Vec::with_capacity(input.len());
    let mut lines = input.split_inclusive(|b| *b == b'\n');
    let Some(first) = lines.next() else {
        return (out, report);
    };
    out.extend_from_slice(first);
    let header = std::str::from_utf8(first)
        .ok()
        .and_then(|h| FileHeader::parse(h.trim_end_matches(['\n', '\r'])).ok());
    report.bad_header = header.is_none();
    for (i, raw) in lines.enumerate() {
        let parsed = header.as_ref().and_then(|h| {
            let line = std::str::from_utf8(raw).ok()?;
            parse_row(line.trim_end_matches(['\n', '\r']), &h.kinds).ok()
        });
        match parsed {
            Some(row) if row.label == PrivacyLabel::Private => report.removed += 1,
            Some(_) => {
                report.kept += 1;
                out.extend_from_slice(raw);
            }
            None => {
                report.malformed.push(i + 2);
                out.extend_from_slice(raw);
            }
        }
    }
    (out, report)
}

#[derive(Debug, Default)]
pub struct ScrubReport {
    pub files: Vec<ScrubFileReport>,
    /// Non-data files copied unchanged.
    pub copied: Vec<PathBuf>,
}

impl ScrubReport {
    pub fn removed(&self) -> usize {
        self.files.iter().map(|f| f.removed).sum()
    }

    pub fn malformed(&self) -> usize {
        self.files.iter().map(|f| f.malformed.len()).sum()
    }
}

/// Scrubbed copy of `in_tree` at `out_tree`; the relative layout is kept.
pub fn scrub_tree(in_tree: &Path, out_tree: &Path) -> Result<ScrubReport, LogisticsError> {
    let mut report = ScrubReport::default();
    for entry in WalkDir::new(in_tree).sort_by_file_name() {
        let entry = entry.map_err(|e| LogisticsError::Io {
            path: e.path().unwrap_or(in_tree).to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(in_tree)
            .expect("walkdir stays under its root")
            .to_path_buf();
        let name = entry.file_name().to_string_lossy();
        if name.ends_with(".part") {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(io_err(entry.path()))?;
        let dest = out_tree.join(&rel);
        if is_data_file(&name) {
            let (out, mut r) = scrub_bytes(&bytes);
            r.path = rel;
            write_atomic(&dest, &out)?;
            report.files.push(r);
        } else {
            write_atomic(&dest, &bytes)?;
            report.copied.push(rel);
        }
    }
    Ok(report)
}
