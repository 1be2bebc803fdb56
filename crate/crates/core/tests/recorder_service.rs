use std::fs;
use std::path::{Path, PathBuf};

use daqwear::analysis::{density, DataFile};
use daqwear::config::Config;
use daqwear::sensor::SensorKind;
use daqwear::service::{simulate, ControlMessage, Device, DeviceOptions, DeviceState};
use daqwear::sim::{Pathology, Scenario, ScenarioKind};
use proptest::prelude::*;

fn config(f: impl FnOnce(&mut Config)) -> String {
    let mut c = Config {
        watch_id: "D8F8".into(),
        ..Config::default()
    };
    f(&mut c);
    c.to_config_text()
}

fn ideal_rest(seconds: f64) -> Scenario {
    Scenario::new(ScenarioKind::Rest, 1)
        .with_pathology(Pathology::ideal())
        .with_duration(seconds)
}

fn csv_files(root: &Path) -> Vec<PathBuf> {
    daqwear::analysis::data_files(root)
}

fn accel_file(root: &Path) -> DataFile {
    let path = csv_files(root)
        .into_iter()
        .find(|p| p.to_string_lossy().contains("_accel"))
        .expect("accel file");
    DataFile::read(&path).unwrap()
}

#[test]
fn ten_seconds_at_40hz_writer_gives_400_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(|c| c.write_interval_s = 0.025);
    simulate(dir.path(), ideal_rest(10.0), text.as_bytes(), 1).unwrap();
    let f = accel_file(dir.path());
    assert_eq!(f.rows.len(), 400);
    assert!(f.malformed.is_empty());
}

#[test]
fn ten_seconds_at_default_writer_gives_200_rows() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), ideal_rest(10.0), config(|_| ()).as_bytes(), 1).unwrap();
    let f = accel_file(dir.path());
    assert_eq!(f.rows.len(), 200);
    // writer slower than the sensor: every row holds a fresh sample
    assert!(f.rows.iter().all(|r| r.fresh.iter().all(|x| *x)));
}

#[test]
fn rows_are_ordered_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::new(ScenarioKind::Walk, 7).with_duration(20.0);
    simulate(dir.path(), scenario, config(|_| ()).as_bytes(), 3).unwrap();
    let files = csv_files(dir.path());
    // accel-linearaccel-gyro, baro, gps-battery
    assert_eq!(files.len(), 3, "{files:?}");
    for path in files {
        let f = DataFile::read(&path).unwrap();
        assert!(f.malformed.is_empty(), "{}", path.display());
        assert!(!f.rows.is_empty());
        assert!(f.rows.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
        assert_eq!(f.header.columns.len(), 3 + f.header.kinds.iter().map(|k| k.arity() + 2).sum::<usize>());
        for row in &f.rows {
            assert_eq!(row.cells.len(), f.header.kinds.len());
            assert_eq!(row.fresh.len(), f.header.kinds.len());
        }
        // a stale member repeats the cell it had before
        for w in f.rows.windows(2) {
            for m in 0..f.header.kinds.len() {
                if !w[1].fresh[m] {
                    assert_eq!(w[1].cells[m], w[0].cells[m]);
                }
            }
        }
    }
}

#[test]
fn sensor_equal_to_writer_is_exactly_dense() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(|c| c.write_interval_s = 0.025);
    simulate(dir.path(), ideal_rest(10.0), text.as_bytes(), 1).unwrap();
    let report = density(dir.path()).unwrap();
    for kind in [SensorKind::Accel, SensorKind::LinearAccel, SensorKind::Gyro] {
        assert_eq!(report.get(kind).unwrap().density(), Some(1.0), "{kind}");
    }
}

#[test]
fn storage_full_degrades_without_stopping() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = DeviceOptions::new(ideal_rest(60.0));
    opts.storage_capacity = Some(20_000);
    let mut d = Device::boot(dir.path(), opts).unwrap();
    d.push_config(config(|_| ()).as_bytes()).unwrap();
    assert_eq!(d.send(ControlMessage::Restart { person_id: 1 }), DeviceState::Measuring);
    d.run_for(30_000);
    assert_eq!(d.state(), DeviceState::Degraded);
    let rows = d.status().rows_written;
    d.run_for(5_000);
    assert_eq!(d.status().rows_written, rows);
    let used: u64 = d.list_files().iter().map(|f| f.size).sum();
    assert!(used <= 20_000, "{used}");

    // freeing space and restarting brings the device back
    d.send(ControlMessage::Clean);
    assert_eq!(d.list_files().len(), 0);
    d.send(ControlMessage::Restart { person_id: 2 });
    d.run_for(1_000);
    assert_eq!(d.state(), DeviceState::Measuring);
    assert!(d.status().rows_written > 0);
}

#[test]
fn clean_removes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = Device::boot(dir.path(), DeviceOptions::new(ideal_rest(60.0))).unwrap();
    d.push_config(config(|_| ()).as_bytes()).unwrap();
    d.send(ControlMessage::Restart { person_id: 1 });
    d.run_for(2_000);
    d.send(ControlMessage::Restart { person_id: 2 });
    d.run_for(2_000);
    assert!(d.list_files().len() >= 8);
    assert_eq!(d.send(ControlMessage::Clean), DeviceState::BootedIdle);
    assert!(d.list_files().is_empty());
    assert!(csv_files(dir.path()).is_empty());
    // the uploaded config is not a data file and stays
    assert!(d.config_path().is_file());
}

#[test]
fn restart_picks_up_the_new_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = Device::boot(dir.path(), DeviceOptions::new(ideal_rest(60.0))).unwrap();
    d.push_config(config(|_| ()).as_bytes()).unwrap();
    d.send(ControlMessage::Restart { person_id: 1 });
    d.run_for(2_000);
    d.push_config(config(|c| c.accel_interval_ms = 50).as_bytes()).unwrap();
    // pushing alone changes nothing until the restart
    assert_eq!(d.active_config().unwrap().accel_interval_ms, 25);
    d.send(ControlMessage::Restart { person_id: 1 });
    assert_eq!(d.active_config().unwrap().accel_interval_ms, 50);
    d.run_for(2_000);
    d.shutdown();

    let names: Vec<String> = d.list_files().into_iter().map(|f| f.name).collect();
    let sessions: std::collections::BTreeSet<&str> = names.iter().map(|n| &n[..20]).collect();
    assert_eq!(sessions.len(), 2, "{names:?}");
    assert!(names.iter().any(|n| n.ends_with("_accel.csv")), "{names:?}");
    assert!(names.iter().any(|n| n.ends_with("_accel-linearaccel-gyro.csv")));
    let meta = names.iter().rfind(|n| n.ends_with("_meta.txt")).unwrap();
    let text = String::from_utf8(d.read_file(meta).unwrap()).unwrap();
    assert!(text.lines().any(|l| l == "accel_interval_ms=50"));
    assert!(text.lines().any(|l| l == "duration_ms=2000"));
}

#[test]
fn shutdown_keeps_files_and_ignores_messages() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = Device::boot(dir.path(), DeviceOptions::new(ideal_rest(60.0))).unwrap();
    d.push_config(config(|_| ()).as_bytes()).unwrap();
    d.send(ControlMessage::Restart { person_id: 1 });
    d.run_for(1_000);
    let before = d.list_files().len();
    d.shutdown();
    assert_eq!(d.send(ControlMessage::Clean), DeviceState::ShutDown);
    assert_eq!(d.list_files().len(), before);
}

#[test]
fn garbage_config_still_records() {
    let dir = tempfile::tempdir().unwrap();
    let status = simulate(dir.path(), ideal_rest(2.0), b"\xff\xfe\0garbage\n=\n", 1).unwrap();
    assert_eq!(status.state, DeviceState::Measuring);
    assert_eq!(status.watch_id, "0000");
    assert!(status.rows_written > 0);
    let meta = fs::read_dir(dir.path().join("data/0000"))
        .unwrap()
        .flatten()
        .find(|e| e.file_name().to_string_lossy().ends_with("_meta.txt"))
        .unwrap();
    let text = fs::read_to_string(meta.path()).unwrap();
    assert!(text.contains("accel_interval_ms=25"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_never_exceeds_one(
        seed in any::<u64>(),
        jitter in 0.0f64..10.0,
        drop in 0.0f64..0.2,
        accel in prop_oneof![Just(10u32), Just(25), Just(40), Just(100)],
        write in prop_oneof![Just(0.01f64), Just(0.025), Just(0.05), Just(0.1)],
    ) {
        let dir = tempfile::tempdir().unwrap();
        let scenario = Scenario::new(ScenarioKind::Rest, seed)
            .with_duration(5.0)
            .with_pathology(Pathology { jitter_std_ms: jitter, drop_probability: drop, ..Pathology::default() });
        let text = config(|c| {
            c.accel_interval_ms = accel;
            c.write_interval_s = write;
        });
        simulate(dir.path(), scenario, text.as_bytes(), 1).unwrap();
        let report = density(dir.path()).unwrap();
        prop_assert!(!report.entries.is_empty());
        for e in &report.entries {
            let d = e.density().unwrap();
            prop_assert!(d > 0.0 && d <= 1.0, "{} {}", e.sensor, d);
        }
    }
}
