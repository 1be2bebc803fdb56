//! Researcher-side tool for the daqwear virtual watch.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use daqwear::analysis::{self, altitude, bytes_per_row, data_files};
use daqwear::bridge::{
    BridgeClient, BridgeServer, DeviceRunner, Pacing, ServeOptions, DEFAULT_ENDPOINT, ENDPOINT_ENV,
};
use daqwear::config::{parse_config, Config};
use daqwear::logistics::{pull_all, scrub_tree};
use daqwear::recorder::{estimate_for_intervals, estimate_storage};
use daqwear::service::{simulate, ControlMessage, Device, DeviceOptions};
use daqwear::sim::{parse_scenario, Pathology, Scenario, ScenarioKind};

const STORAGE_LIMIT_BYTES: f64 = 500e6;

#[derive(Parser)]
#[command(name = "bridgehost", version, about = "Prepare, collect and check daqwear recordings")]
struct Cli {
    /// Bridge endpoint as host:port.
    #[arg(long, global = true, env = ENDPOINT_ENV, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Upload a config file; it applies at the next restart.
    PushConfig { file: PathBuf },
    /// Show device state.
    Status,
    /// Start a new measurement session.
    Restart {
        #[arg(long, value_parser = clap::value_parser!(u16).range(0..=999))]
        person: u16,
    },
    /// Stop measuring and delete every file on the device.
    Clean {
        /// Must be given three times.
        #[arg(long, action = ArgAction::Count)]
        force: u8,
    },
    /// Copy all files into OUT/P<person>/<YYYYMMDD_HHMMSS>/.
    Pull {
        #[arg(long)]
        out: PathBuf,
        /// Drop rows labeled P on the way.
        #[arg(long)]
        scrub: bool,
    },
    /// Copy a pulled tree without rows labeled P.
    Scrub {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample density per sensor for a file or tree.
    Density { path: PathBuf },
    /// Mean and standard deviation of |a| over fresh accelerometer samples.
    Gstats { file: PathBuf },
    /// Height difference in meters for a pressure difference in hPa.
    Altitude {
        #[arg(allow_negative_numbers = true)]
        delta_hpa: f64,
    },
    /// Storage needed for a study.
    Estimate(EstimateArgs),
    /// Run the simulator without a bridge.
    Sim {
        #[command(subcommand)]
        cmd: SimCmd,
    },
    /// Run a virtual watch and expose it over the bridge.
    Serve(ServeArgs),
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    hours: f64,
    #[arg(long)]
    days: f64,
    #[arg(long)]
    row_bytes: f64,
    /// Rows per second of a single sensor file.
    #[arg(long, conflicts_with = "config")]
    rate_hz: Option<f64>,
    /// Take the sensor files from a config file instead.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also record a short simulation and report this recorder's bytes/row.
    #[arg(long)]
    measure: bool,
}

#[derive(Subcommand)]
enum SimCmd {
    /// Record one session on the virtual clock.
    Run(SimArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// rest, spin, walk, climb, or a scenario file.
    #[arg(long, default_value = "rest")]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// No timestamp bias, jitter or drops.
    #[arg(long)]
    ideal: bool,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Device file system to create.
    #[arg(long, default_value = "sim-out")]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(0..=999))]
    person: u16,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Device file system.
    #[arg(long, default_value = "daqwear-device")]
    root: PathBuf,
    #[arg(long, default_value_t = daqwear::bridge::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value_t = daqwear::bridge::DEFAULT_WS_PORT)]
    ws_port: u16,
    /// Listen on all interfaces instead of loopback only.
    #[arg(long)]
    lan: bool,
    /// Serve the watch face from this directory.
    #[arg(long)]
    ui: Option<PathBuf>,
    /// Keep the virtual clock still instead of following the wall clock.
    #[arg(long)]
    frozen: bool,
}

/// Failure with its exit status.
struct Fail(u8, String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(1, e.to_string())
    }
}

type Outcome = Result<(), Fail>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("bridgehost: {msg}");
            }
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let endpoint = cli.endpoint;
    let connect = || BridgeClient::connect(&endpoint);
    match cli.cmd {
        Cmd::PushConfig { file } => {
            let text = fs::read(&file).map_err(|e| Fail(1, format!("{}: {e}", file.display())))?;
            let report = connect()?.push_config(&String::from_utf8_lossy(&text))?;
            if report.is_empty() {
                println!("config stored, no corrections");
            } else {
                println!("config stored; corrected at next restart:");
                print!("{report}");
            }
            for key in &report.ignored_keys {
                println!("ignored unknown key: {key}");
            }
        }
        Cmd::Status => {
            let status = connect()?.status()?;
            println!("{}", serde_json::to_string_pretty(&status)?);
        }
        Cmd::Restart { person } => {
            let state = connect()?.send(ControlMessage::Restart { person_id: person })?;
            println!("{state:?}, person {person:03}");
        }
        Cmd::Clean { force } => {
            if force < 3 {
                return Err(Fail(
                    2,
                    format!("clean deletes all data; repeat --force three times (got {force})"),
                ));
            }
            let state = connect()?.send(ControlMessage::Clean)?;
            println!("{state:?}, all files deleted");
        }
        Cmd::Pull { out, scrub } => {
            let mut client = connect()?;
            let report = pull_all(&mut client, &out, scrub)?;
            for f in &report.scrubbed {
                println!("{}: kept {} removed {}", f.path.display(), f.kept, f.removed);
            }
            println!("pulled {} files into {}", report.copied.len(), out.display());
            if !report.is_complete() {
                for (name, why) in &report.failed {
                    eprintln!("failed: {name}: {why}");
                }
                return Err(Fail(1, format!("{} files not pulled", report.failed.len())));
            }
        }
        Cmd::Scrub { input, out } => {
            let report = scrub_tree(&input, &out)?;
            for f in &report.files {
                println!("{}: kept {} removed {}", f.path.display(), f.kept, f.removed);
                if f.bad_header {
                    eprintln!("warning: {}: unreadable header, rows kept as is", f.path.display());
                }
                if !f.malformed.is_empty() {
                    eprintln!(
                        "warning: {}: kept malformed rows at lines {:?}",
                        f.path.display(),
                        f.malformed
                    );
                }
            }
            println!("removed {} rows in {} files", report.removed(), report.files.len());
        }
        Cmd::Density { path } => {
            let report = analysis::density(&path)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{report}");
        }
        Cmd::Gstats { file } => match analysis::gstats(&file)? {
            Some(g) => println!("n={} mean_G={:.4} std_G={:.4}", g.n, g.mean, g.std),
            None => println!("empty: no fresh accelerometer samples"),
        },
        Cmd::Altitude { delta_hpa } => println!("{}", altitude(delta_hpa)),
        Cmd::Estimate(args) => estimate(args)?,
        Cmd::Sim {
            cmd: SimCmd::Run(args),
        } => sim_run(args)?,
        Cmd::Serve(args) => serve(args)?,
    }
    Ok(())
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, Fail> {
    let mut s = match args.scenario.parse::<ScenarioKind>() {
        Ok(kind) => Scenario::new(kind, 0),
        Err(_) => {
            let path = Path::new(&args.scenario);
            let text = fs::read_to_string(path).map_err(|e| {
                Fail(2, format!("--scenario {}: not a scenario name or file ({e})", args.scenario))
            })?;
            parse_scenario(&text).map_err(|e| Fail(2, format!("{}: {e}", path.display())))?
        }
    };
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(d) = args.duration {
        s.duration_s = d;
    }
    if args.ideal {
        s.pathology = Pathology::ideal();
    }
    s.validate().map_err(|e| Fail(2, e.to_string()))?;
    Ok(s)
}

fn read_config_text(path: Option<&Path>) -> Result<Vec<u8>, Fail> {
    match path {
        Some(p) => fs::read(p).map_err(|e| Fail(1, format!("{}: {e}", p.display()))),
        None => Ok(Config::default().to_config_text().into_bytes()),
    }
}

fn sim_run(args: SimArgs) -> Outcome {
    let scenario = load_scenario(&args.scenario)?;
    let config_text = read_config_text(args.config.as_deref())?;
    let (_, report) = parse_config(&config_text);
    if !report.is_empty() {
        eprint!("config corrected:\n{report}");
    }
    if args.out.exists() {
        return Err(Fail(1, format!("{} already exists", args.out.display())));
    }
    let status = simulate(&args.out, scenario, &config_text, args.person)?;
    println!(
        "recorded {} rows in {} files under {}",
        status.rows_written,
        status.files,
        args.out.display()
    );
    let density = analysis::density(&args.out)?;
    print!("{density}");
    Ok(())
}

/// Bytes/row of this recorder: a short accelerometer-only recording at
/// `interval_ms`.
fn measure_bytes_per_row(interval_ms: u32) -> Result<f64, Fail> {
    let dir = std::env::temp_dir().join(format!("bridgehost-measure-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    let config = Config {
        accel_interval_ms: interval_ms,
        linear_accel_interval_ms: 0,
        gyro_interval_ms: 0,
        baro_interval_ms: 0,
        gps_interval_s: 0,
        write_interval_s: interval_ms as f64 / 1000.0,
        ..Config::default()
    }
    .to_config_text();
    let scenario = Scenario::new(ScenarioKind::Rest, 1).with_duration(10.0);
    let result = simulate(&dir, scenario, config.as_bytes(), 1)
        .map_err(Fail::from)
        .and_then(|_| {
            let file = data_files(&dir)
                .into_iter()
                .next()
                .ok_or_else(|| Fail(1, "measurement produced no file".into()))?;
            bytes_per_row(&file)?.ok_or_else(|| Fail(1, "measurement produced no rows".into()))
        });
    let _ = fs::remove_dir_all(&dir);
    result
}

fn estimate(args: EstimateArgs) -> Outcome {
    let bad = |what: &str| Fail(2, format!("{what} must be a non-negative number"));
    for (v, name) in [(args.hours, "--hours"), (args.days, "--days"), (args.row_bytes, "--row-bytes")] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(bad(name));
        }
    }
    let (bytes, describe, measure_ms) = match (&args.config, args.rate_hz) {
        (Some(path), _) => {
            let (config, _) = parse_config(&read_config_text(Some(path))?);
            let bytes = estimate_storage(&config, args.hours, args.days, args.row_bytes);
            (bytes, format!("sensor files from {}", path.display()), None)
        }
        (None, rate) => {
            let rate = rate.unwrap_or(50.0);
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Fail(2, "--rate-hz must be positive".into()));
            }
            let interval = 1000.0 / rate;
            let bytes = estimate_for_intervals([interval], args.hours, args.days, args.row_bytes);
            (bytes, format!("{rate} Hz"), Some(interval.round().max(1.0) as u32))
        }
    };
    let fits = bytes <= STORAGE_LIMIT_BYTES;
    println!(
        "estimate: {:.2} MB ({bytes:.0} bytes) for {describe}, {} h/day, {} days, {} B/row",
        bytes / 1e6,
        args.hours,
        args.days,
        args.row_bytes
    );
    println!("fits in 500 MB: {}", if fits { "yes" } else { "no" });
    if args.measure {
        let ms = measure_ms.unwrap_or(20);
        let measured = measure_bytes_per_row(ms)?;
        let actual = match (&args.config, args.rate_hz) {
            (Some(path), _) => {
                let (config, _) = parse_config(&read_config_text(Some(path))?);
                estimate_storage(&config, args.hours, args.days, measured)
            }
            _ => estimate_for_intervals([1000.0 / args.rate_hz.unwrap_or(50.0)], args.hours, args.days, measured),
        };
        println!(
            "measured: {measured:.1} B/row for this recorder ({ms} ms accelerometer file), {:.2} MB at that size, fits in 500 MB: {}",
            actual / 1e6,
            if actual <= STORAGE_LIMIT_BYTES { "yes" } else { "no" }
        );
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Outcome {
    let scenario = load_scenario(&args.scenario)?;
    let device = Device::boot(&args.root, DeviceOptions::new(scenario))?;
    let pacing = if args.frozen { Pacing::Frozen } else { Pacing::Realtime };
    let runner = DeviceRunner::spawn(device, pacing);
    let mut opts = ServeOptions::new(args.lan);
    opts.tcp.set_port(args.port);
    if let Some(ws) = opts.ws.as_mut() {
        ws.set_port(args.ws_port);
    }
    opts.ui_dir = args.ui;
    let server = BridgeServer::start(runner.handle(), &opts)?;
    println!("device root: {}", args.root.display());
    println!("bridge: {}", server.tcp_addr());
    if let Some(ws) = server.ws_addr() {
        println!("watch face: http://{ws}/");
    }
    server.wait();
    runner.stop();
    Ok(())
}
