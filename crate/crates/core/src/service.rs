//! The background measurement service.
//!
//! [`handle`] is the pure state machine: it maps a state and a control
//! message to the next state plus the actions to perform. [`Device`] owns the
//! device file system, the simulated sensors and the recorder, executes those
//! actions and drives everything from a virtual clock.
//!
//! There is deliberately no message that stops a running measurement: only
//! `Clean` (which also deletes the data) or a shutdown leave `Measuring`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_config, serialize_metafile, Config, CorrectionReport, SessionMeta};
use crate::format::{make_meta_filename, parse_filename};
use crate::geofence::{fresh_fix, label, GpsFix, PrivacyCircle};
use crate::recorder::{Recorder, SessionInfo, StorageBudget};
use crate::sensor::{Mailbox, SensorKind};
use crate::sim::{Scenario, SensorStream};

pub const PACKAGE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const UPLOAD_DIR: &str = "upload";
pub const CONFIG_FILE: &str = "config.txt";
pub const DATA_DIR: &str = "data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceState {
    BootedIdle,
    Measuring,
    /// Measuring, but the last write failed; retried every writer tick.
    Degraded,
    ShutDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ControlMessage {
    Restart { person_id: u16 },
    Clean,
}

impl ControlMessage {
    pub fn is_valid(&self) -> bool {
        match self {
            ControlMessage::Restart { person_id } => *person_id <= 999,
            ControlMessage::Clean => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    CloseSession,
    ReloadConfig,
    OpenSession { person_id: u16 },
    WriteMetafile,
    DeleteAllFiles,
}

/// Transition function. Invalid messages and anything after shutdown leave
/// the state unchanged with no actions.
pub fn handle(state: DeviceState, msg: ControlMessage) -> (DeviceState, Vec<Action>) {
    if state == DeviceState::ShutDown || !msg.is_valid() {
        return (state, Vec::new());
    }
    match (state, msg) {
        (DeviceState::BootedIdle, ControlMessage::Restart { person_id }) => (
            DeviceState::Measuring,
            vec![
                Action::ReloadConfig,
                Action::OpenSession { person_id },
                Action::WriteMetafile,
            ],
        ),
        (_, ControlMessage::Restart { person_id }) => (
            DeviceState::Measuring,
            vec![
                Action::CloseSession,
                Action::ReloadConfig,
                Action::OpenSession { person_id },
                Action::WriteMetafile,
            ],
        ),
        (DeviceState::BootedIdle, ControlMessage::Clean) => {
            (DeviceState::BootedIdle, vec![Action::DeleteAllFiles])
        }
        (_, ControlMessage::Clean) => (
            DeviceState::BootedIdle,
            vec![Action::CloseSession, Action::DeleteAllFiles],
        ),
    }
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DeviceError + '_ {
    move |source| DeviceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub size: u64,
    /// Still being written by the running session.
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceStatus {
    pub state: DeviceState,
    pub watch_id: String,
    pub files: usize,
    pub person_id: Option<u16>,
    /// `YYYYMMDD_HHMMSS` of the running session.
    pub session: Option<String>,
    pub clock_ms: u64,
    pub rows_written: u64,
    pub battery_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DeviceOptions {
    /// Wall-clock time the virtual clock reads at boot.
    pub epoch: NaiveDateTime,
    pub scenario: Scenario,
    pub package_version: String,
    /// Simulated flash size; `None` for unlimited.
    pub storage_capacity: Option<u64>,
}

impl DeviceOptions {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            epoch: default_epoch(),
            scenario,
            package_version: PACKAGE_VERSION.to_string(),
            storage_capacity: None,
        }
    }
}

/// 2022-06-01 09:30:00, the boot time used by simulations.
pub fn default_epoch() -> NaiveDateTime {
    DateTime::from_timestamp(1_654_075_800, 0)
        .expect("valid timestamp")
        .naive_utc()
}

struct Session {
    config: Config,
    info: SessionInfo,
    dir: PathBuf,
    recorder: Option<Recorder>,
    meta_written: bool,
    streams: Vec<SensorStream>,
    mailbox: Mailbox,
    gps_fix: Option<GpsFix>,
    origin_ms: u64,
    next_tick: u64,
}

impl Session {
    fn tick_time(&self, n: u64) -> u64 {
        self.origin_ms + (n as f64 * self.config.write_interval_s * 1000.0).round() as u64
    }

    fn file_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .recorder
            .iter()
            .flat_map(|r| r.files.iter().map(|f| f.name.clone()))
            .collect();
        if self.meta_written {
            names.push(make_meta_filename(
                self.info.person_id,
                &self.info.start,
                &self.config.watch_id,
            ));
        }
        names
    }
}

fn metafile_text(session: &Session, duration_ms: Option<u64>) -> String {
    serialize_metafile(
        &session.config,
        &SessionMeta {
            package_version: session.info.package_version.clone(),
            person_id: session.info.person_id,
            start: session.info.start,
            duration_ms,
        },
    )
}

/// Write the session's metafile once. Returns false if it could not be
/// written (it is retried on the next tick).
fn write_metafile(budget: &mut StorageBudget, session: &mut Session) -> bool {
    if session.meta_written {
        return true;
    }
    let text = metafile_text(session, None);
    let path = session.dir.join(make_meta_filename(
        session.info.person_id,
        &session.info.start,
        &session.config.watch_id,
    ));
    let fits = budget
        .capacity
        .is_none_or(|cap| budget.used + text.len() as u64 <= cap);
    if fits && fs::create_dir_all(&session.dir).is_ok() && fs::write(&path, &text).is_ok() {
        budget.used += text.len() as u64;
        session.meta_written = true;
        true
    } else {
        log::warn!("cannot write metafile {}", path.display());
        false
    }
}

/// The virtual watch: service state, file system and sensors.
pub struct Device {
    root: PathBuf,
    epoch: NaiveDateTime,
    epoch_ms: i64,
    now_ms: u64,
    state: DeviceState,
    scenario: Scenario,
    package_version: String,
    budget: StorageBudget,
    session: Option<Session>,
    last_stamp: Option<NaiveDateTime>,
    last_report: CorrectionReport,
}

impl Device {
    /// Boot the service on the device file system at `root`. Files from
    /// earlier runs are left untouched.
    pub fn boot(root: impl Into<PathBuf>, options: DeviceOptions) -> Result<Self, DeviceError> {
        let root = root.into();
        for dir in [root.join(UPLOAD_DIR), root.join(DATA_DIR)] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let mut device = Self {
            epoch_ms: options.epoch.and_utc().timestamp_millis(),
            epoch: options.epoch,
            root,
            now_ms: 0,
            state: DeviceState::BootedIdle,
            scenario: options.scenario,
            package_version: options.package_version,
            budget: StorageBudget {
                capacity: options.storage_capacity,
                used: 0,
            },
            session: None,
            last_stamp: None,
            last_report: CorrectionReport::default(),
        };
        device.budget.used = device.list_files().iter().map(|f| f.size).sum();
        log::info!("service booted at {}", device.root.display());
        Ok(device)
    }

    pub fn state(&self) -> DeviceState {
        self.state
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join(DATA_DIR)
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join(UPLOAD_DIR).join(CONFIG_FILE)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Config of the running session.
    pub fn active_config(&self) -> Option<&Config> {
        self.session.as_ref().map(|s| &s.config)
    }

    /// Corrections applied when the current session loaded its config.
    pub fn last_report(&self) -> &CorrectionReport {
        &self.last_report
    }

    /// Store a config file in the upload location. It takes effect at the
    /// next restart. Never rejected: the returned report says what would be
    /// corrected.
    pub fn push_config(&mut self, text: &[u8]) -> Result<CorrectionReport, DeviceError> {
        let path = self.config_path();
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(parse_config(text).1)
    }

    fn load_config(&self) -> (Config, CorrectionReport) {
        // an unreadable or missing file is just an empty config
        let bytes = fs::read(self.config_path()).unwrap_or_default();
        parse_config(&bytes)
    }

    pub fn send(&mut self, msg: ControlMessage) -> DeviceState {
        let (next, actions) = handle(self.state, msg);
        log::debug!("{:?} + {:?} -> {:?} {:?}", self.state, msg, next, actions);
        self.state = next;
        let mut loaded = None;
        for action in actions {
            match action {
                Action::CloseSession => self.close_session(),
                Action::ReloadConfig => loaded = Some(self.load_config()),
                Action::OpenSession { person_id } => {
                    let (config, report) = loaded.take().unwrap_or_else(|| self.load_config());
                    self.last_report = report;
                    self.open_session(config, person_id);
                }
                Action::WriteMetafile => self.write_metafile(),
                Action::DeleteAllFiles => self.delete_all_files(),
            }
        }
        self.state
    }

    fn session_stamp(&mut self) -> NaiveDateTime {
        let now = self.epoch + Duration::milliseconds(self.now_ms as i64);
        let mut stamp = now.with_nanosecond(0).unwrap_or(now);
        // one session per second keeps names unique and sortable
        if let Some(last) = self.last_stamp {
            if stamp <= last {
                stamp = last + Duration::seconds(1);
            }
        }
        self.last_stamp = Some(stamp);
        stamp
    }

    fn open_session(&mut self, config: Config, person_id: u16) {
        let start = self.session_stamp();
        let info = SessionInfo {
            person_id,
            start,
            start_ms: self.epoch_ms + self.now_ms as i64,
            package_version: self.package_version.clone(),
        };
        let streams = SensorKind::ALL
            .into_iter()
            .filter_map(|k| config.interval_ms(k).map(|ms| SensorStream::new(k, ms, self.now_ms)))
            .collect();
        let dir = self.data_dir().join(&config.watch_id);
        let mut session = Session {
            config,
            info,
            dir,
            recorder: None,
            meta_written: false,
            streams,
            mailbox: Mailbox::new(),
            gps_fix: None,
            origin_ms: self.now_ms,
            next_tick: 0,
        };
        self.try_open_recorder(&mut session);
        log::info!(
            "session P{:03} {} started",
            person_id,
            session.info.start.format("%Y%m%d_%H%M%S")
        );
        self.session = Some(session);
    }

    fn try_open_recorder(&mut self, session: &mut Session) {
        if session.recorder.is_some() {
            return;
        }
        match Recorder::open(&session.dir, &session.config, &session.info, &mut self.budget) {
            Ok(r) => session.recorder = Some(r),
            Err(e) => {
                log::warn!("cannot open session files: {e}");
                self.state = DeviceState::Degraded;
            }
        }
    }

    fn write_metafile(&mut self) {
        if let Some(session) = self.session.as_mut() {
            if !write_metafile(&mut self.budget, session) {
                self.state = DeviceState::Degraded;
            }
        }
    }

    fn close_session(&mut self) {
        if let Some(mut session) = self.session.take() {
            if let Some(recorder) = session.recorder.take() {
                if let Err(e) = recorder.close() {
                    log::warn!("closing session files: {e}");
                }
            }
            if session.meta_written {
                self.finalize_metafile(&session);
            }
            log::info!("session closed");
        }
    }

    /// Rewrite the metafile with the session length.
    fn finalize_metafile(&mut self, session: &Session) {
        let duration = self.now_ms - session.origin_ms;
        let old = metafile_text(session, None).len() as u64;
        let text = metafile_text(session, Some(duration));
        let extra = text.len() as u64 - old;
        if self.budget.capacity.is_some_and(|cap| self.budget.used + extra > cap) {
            log::warn!("no room to finalize metafile");
            return;
        }
        let path = session.dir.join(make_meta_filename(
            session.info.person_id,
            &session.info.start,
            &session.config.watch_id,
        ));
        match fs::write(&path, text) {
            Ok(()) => self.budget.used += extra,
            Err(e) => log::warn!("cannot finalize {}: {e}", path.display()),
        }
    }

    fn delete_all_files(&mut self) {
        for entry in self.list_files() {
            if let Some(path) = self.find_file(&entry.name) {
                if let Err(e) = fs::remove_file(&path) {
                    log::warn!("cannot delete {}: {e}", path.display());
                }
            }
        }
        self.budget.used = self.list_files().iter().map(|f| f.size).sum();
    }

    /// Stop sensors and close files. Files stay on the device.
    pub fn shutdown(&mut self) -> DeviceState {
        self.close_session();
        self.state = DeviceState::ShutDown;
        log::info!("shut down");
        self.state
    }

    /// Run the virtual clock up to (not including) `target_ms`.
    pub fn advance_to(&mut self, target_ms: u64) {
        if target_ms <= self.now_ms {
            return;
        }
        if matches!(self.state, DeviceState::Measuring | DeviceState::Degraded) {
            if let Some(mut session) = self.session.take() {
                self.run_session(&mut session, target_ms);
                self.session = Some(session);
            }
        }
        self.now_ms = target_ms;
    }

    pub fn run_for(&mut self, duration_ms: u64) {
        self.advance_to(self.now_ms + duration_ms);
    }

    fn run_session(&mut self, session: &mut Session, target_ms: u64) {
        let scenario = self.scenario.clone();
        let scenario = &scenario;
        loop {
            // earliest readout; ties go to the canonical sensor order
            let mut next_readout: Option<(u64, usize)> = None;
            for (i, s) in session.streams.iter_mut().enumerate() {
                let t = s.peek_time(scenario);
                if next_readout.is_none_or(|(best, _)| t < best) {
                    next_readout = Some((t, i));
                }
            }
            let tick_at = session.tick_time(session.next_tick);

            match next_readout {
                Some((t, i)) if t <= tick_at && t < target_ms => {
                    self.now_ms = t;
                    let readout = session.streams[i].next_readout(scenario);
                    if let Some(sample) = readout.sample {
                        if sample.kind == SensorKind::Gps {
                            session.gps_fix = Some(GpsFix {
                                lat_deg: sample.values[0],
                                lon_deg: sample.values[1],
                                time_ms: readout.at_ms,
                                valid: true,
                            });
                        }
                        session.mailbox.put(sample);
                    }
                }
                _ if tick_at < target_ms => {
                    self.now_ms = tick_at;
                    session.next_tick += 1;
                    self.writer_tick(session, tick_at);
                }
                _ => break,
            }
        }
    }

    fn writer_tick(&mut self, session: &mut Session, now_ms: u64) {
        self.try_open_recorder(session);
        if !write_metafile(&mut self.budget, session) {
            self.state = DeviceState::Degraded;
        }
        let Some(recorder) = session.recorder.as_mut() else {
            return;
        };
        let fix = match session.config.interval_ms(SensorKind::Gps) {
            Some(gps_ms) => fresh_fix(session.gps_fix.as_ref(), now_ms, gps_ms as u64),
            None => None,
        };
        let row_label = label(fix, &PrivacyCircle::from_config(&session.config));
        let t_ms = self.epoch_ms + now_ms as i64;
        match recorder.writer_tick(t_ms, &session.mailbox, row_label, &mut self.budget) {
            Ok(_) => {
                if self.state == DeviceState::Degraded && session.meta_written {
                    log::info!("writes recovered");
                    self.state = DeviceState::Measuring;
                }
            }
            Err(e) => {
                if self.state != DeviceState::Degraded {
                    log::warn!("write failed, retrying every tick: {e}");
                }
                self.state = DeviceState::Degraded;
            }
        }
    }

    /// Flush buffered rows so readers see everything written so far.
    pub fn flush(&mut self) {
        if let Some(r) = self.session.as_mut().and_then(|s| s.recorder.as_mut()) {
            if let Err(e) = r.flush() {
                log::warn!("flush failed: {e}");
            }
        }
    }

    /// Measurement files and metafiles on the device, sorted by name.
    pub fn list_files(&self) -> Vec<FileEntry> {
        let open: Vec<String> = self.session.as_ref().map(|s| s.file_names()).unwrap_or_default();
        let mut out = Vec::new();
        let Ok(watch_dirs) = fs::read_dir(self.data_dir()) else {
            return out;
        };
        for dir in watch_dirs.flatten() {
            let Ok(files) = fs::read_dir(dir.path()) else {
                continue;
            };
            for f in files.flatten() {
                let name = f.file_name().to_string_lossy().into_owned();
                if parse_filename(&name).is_none() {
                    continue;
                }
                let size = f.metadata().map(|m| m.len()).unwrap_or(0);
                out.push(FileEntry {
                    open: open.contains(&name),
                    name,
                    size,
                });
            }
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    fn find_file(&self, name: &str) -> Option<PathBuf> {
        let parsed = parse_filename(name)?;
        let path = self.data_dir().join(&parsed.watch_id).join(name);
        path.is_file().then_some(path)
    }

    /// Contents of a measurement or metafile, flushed first if open.
    pub fn read_file(&mut self, name: &str) -> Option<Vec<u8>> {
        self.flush();
        fs::read(self.find_file(name)?).ok()
    }

    pub fn watch_id(&self) -> String {
        match &self.session {
            Some(s) => s.config.watch_id.clone(),
            None => self.load_config().0.watch_id,
        }
    }

    pub fn status(&self) -> DeviceStatus {
        let session = self.session.as_ref();
        DeviceStatus {
            state: self.state,
            watch_id: self.watch_id(),
            files: self.list_files().len(),
            person_id: session.map(|s| s.info.person_id),
            session: session.map(|s| s.info.start.format("%Y%m%d_%H%M%S").to_string()),
            clock_ms: self.now_ms,
            rows_written: session
                .and_then(|s| s.recorder.as_ref())
                .map(|r| r.rows_written())
                .unwrap_or(0),
            battery_pct: session
                .and_then(|s| s.mailbox.latest(SensorKind::Battery))
                .map(|b| b.values[0]),
        }
    }
}

impl Drop for Device {
    fn drop(&mut self) {
        self.close_session();
    }
}

/// Boot a device at `root`, upload `config_text`, start a session for
/// `person_id`, run the scenario's duration on the virtual clock and shut
/// down. The result is fully determined by the arguments.
pub fn simulate(
    root: &Path,
    scenario: Scenario,
    config_text: &[u8],
    person_id: u16,
) -> Result<DeviceStatus, DeviceError> {
    let duration_ms = (scenario.duration_s * 1000.0).round() as u64;
    let mut device = Device::boot(root, DeviceOptions::new(scenario))?;
    device.push_config(config_text)?;
    device.send(ControlMessage::Restart { person_id });
    device.run_for(duration_ms);
    let status = device.status();
    device.shutdown();
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions() {
        use DeviceState::*;
        let restart = ControlMessage::Restart { person_id: 7 };
        assert_eq!(
            handle(BootedIdle, restart),
            (
                Measuring,
                vec![
                    Action::ReloadConfig,
                    Action::OpenSession { person_id: 7 },
                    Action::WriteMetafile
                ]
            )
        );
        assert_eq!(handle(Measuring, restart).0, Measuring);
        assert_eq!(handle(Measuring, restart).1[0], Action::CloseSession);
        assert_eq!(handle(Degraded, restart).0, Measuring);
        assert_eq!(
            handle(Measuring, ControlMessage::Clean),
            (BootedIdle, vec![Action::CloseSession, Action::DeleteAllFiles])
        );
        assert_eq!(
            handle(BootedIdle, ControlMessage::Clean),
            (BootedIdle, vec![Action::DeleteAllFiles])
        );
        assert_eq!(handle(ShutDown, restart), (ShutDown, vec![]));
        let invalid = ControlMessage::Restart { person_id: 1000 };
        assert_eq!(handle(Measuring, invalid), (Measuring, vec![]));
    }

    #[test]
    fn control_message_wire_form() {
        let m: ControlMessage = serde_json::from_str(r#"{"type":"RESTART","person_id":7}"#).unwrap();
        assert_eq!(m, ControlMessage::Restart { person_id: 7 });
        let c: ControlMessage = serde_json::from_str(r#"{"type":"CLEAN"}"#).unwrap();
        assert_eq!(c, ControlMessage::Clean);
    }
}
