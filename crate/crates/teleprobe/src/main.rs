use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use teleprobe::config::{self, ConfigError};
use teleprobe::harness::exp3::{Condition, Exp3Config};
use teleprobe::harness::report::{self, Check, OutputFile};
use teleprobe::harness::{exp1, exp2, exp3};
use teleprobe::services::operate::{run_operator, OperateConfig};
use teleprobe::services::relay::{start_relay, RelayServiceConfig};
use teleprobe::services::robot::{start_robot, RobotServiceConfig};
use teleprobe::services::{DialPolicy, ServiceError};
use teleprobe::vnet::Topology;
use teleprobe_core::operator::{OperatorConfig, SegmentRecord, TaskOutcome};
use teleprobe_core::relay::RelayConfig;
use teleprobe_core::robot::RobotConfig;
use teleprobe_core::impair::ImpairmentModel;
use teleprobe_core::ProbeModel;

const EXIT_CONFIG: u8 = 2;
const EXIT_SERVICE: u8 = 3;
const EXIT_THRESHOLD: u8 = 4;

/// Software twin of a teleoperated trans-esophageal ultrasound probe robot.
#[derive(Parser)]
#[command(name = "teleprobe", version)]
struct Cli {
    /// Write the JSON-lines event log here instead of stderr.
    #[arg(long, global = true)]
    log_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the robot endpoint.
    Robot(RobotArgs),
    /// Run the relay.
    Relay(RelayArgs),
    /// Drive a live robot with a scripted operator.
    Operate(OperateArgs),
    /// Mode timing over a direct link and through the relay.
    Exp1(Exp1Args),
    /// Hysteresis sweep of both steering axes.
    Exp2(Exp2Args),
    /// Target reaching under each control condition.
    Exp3(Exp3Args),
    /// Print the checks in report.json files below a directory.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ap,
    Sta,
}

#[derive(Args)]
struct RobotArgs {
    #[arg(long, value_enum, default_value = "ap")]
    mode: Mode,
    /// Listen port in access-point mode; WebSocket and assets on port + 1.
    #[arg(long, default_value_t = 7332)]
    port: u16,
    /// Relay address in station mode.
    #[arg(long, default_value = "127.0.0.1:7400")]
    relay: String,
    #[arg(long, default_value = "default")]
    session: String,
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Seed for IMU noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of console assets to serve.
    #[arg(long)]
    assets: Option<PathBuf>,
}

#[derive(Args)]
struct RelayArgs {
    #[arg(long, default_value_t = 7400)]
    port: u16,
    /// Impairment applied in both directions: none, lan or 5g.
    #[arg(long, default_value = "none")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    assets: Option<PathBuf>,
}

#[derive(Args)]
struct OperateArgs {
    /// Robot port on localhost (ignored with --relay).
    #[arg(long, default_value_t = 7332)]
    port: u16,
    /// Relay address; joins --session instead of a robot directly.
    #[arg(long)]
    relay: Option<String>,
    #[arg(long, default_value = "default")]
    session: String,
    /// Built-in profile name or JSON file.
    #[arg(long, default_value = "gamepad")]
    profile: String,
    /// Built-in script name (lr_default, ud_default) or JSON file.
    #[arg(long, default_value = "ud_default")]
    script: String,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Pace the run to real time.
    #[arg(long)]
    wall_clock: bool,
}

#[derive(Args)]
struct Exp1Args {
    /// Impairment on every link in both modes: none, lan or 5g.
    #[arg(long, default_value = "none")]
    preset: String,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct Exp2Args {
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct Exp3Args {
    /// Profiles to compare (names or JSON files). A profile named manual
    /// runs over a direct link; the others go through the relay.
    #[arg(long)]
    profile: Vec<String>,
    /// Scripts to run (names or JSON files).
    #[arg(long)]
    script: Vec<String>,
    /// Seeds: `7`, `1-20` or `1,4,9`.
    #[arg(long, default_value = "1-20")]
    seed: String,
    /// Impairment on the relayed links: none, lan or 5g.
    #[arg(long, default_value = "5g")]
    preset: String,
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Also write one trace file per trial.
    #[arg(long)]
    traces: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(default_value = "out")]
    dir: PathBuf,
    /// Exit with status 4 when any check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Threshold(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Service(_) => EXIT_SERVICE,
            Failure::Threshold(_) => EXIT_THRESHOLD,
        }
    }
}

fn init_log(path: Option<&Path>) -> Result<(), ConfigError> {
    let builder = tracing_subscriber::fmt().json().with_current_span(false);
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            builder.with_writer(Mutex::new(file)).init();
        }
        None => builder.with_writer(std::io::stderr).init(),
    }
    Ok(())
}

/// Virtual time unless `--wall-clock` is given; TELEPROBE_VIRTUAL_TIME=1
/// forces virtual time and TELEPROBE_VIRTUAL_TIME=0 makes wall clock the
/// default.
fn wall_clock(flag: bool) -> bool {
    match std::env::var("TELEPROBE_VIRTUAL_TIME").as_deref() {
        Ok("1") => false,
        Ok("0") => true,
        _ => flag,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_log(cli.log_file.as_deref()) {
        eprintln!("teleprobe: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("teleprobe: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Robot(a) => serve(robot(a)),
        Command::Relay(a) => serve(relay(a)),
        Command::Operate(a) => operate(a),
        Command::Exp1(a) => cmd_exp1(a),
        Command::Exp2(a) => cmd_exp2(a),
        Command::Exp3(a) => cmd_exp3(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Service(e.into()))
}

fn serve(prepared: Result<ServiceStart, Failure>) -> Result<(), Failure> {
    let start = prepared?;
    runtime()?.block_on(async move {
        let handle = match start {
            ServiceStart::Robot(c) => start_robot(*c).await?,
            ServiceStart::Relay(c) => start_relay(c).await?,
        };
        if let Some(tcp) = handle.endpoints.tcp {
            eprintln!("listening on {tcp} (web on {})", handle.endpoints.web.map_or("-".into(), |a| a.to_string()));
        }
        handle.join().await.map_err(Failure::from)
    })
}

enum ServiceStart {
    Robot(Box<RobotServiceConfig>),
    Relay(RelayServiceConfig),
}

fn any_addr(port: u16) -> SocketAddr {
    SocketAddr::new(IpAddr::V4(Ipv4Addr::UNSPECIFIED), port)
}

fn robot(a: RobotArgs) -> Result<ServiceStart, Failure> {
    let cal = config::load_calibration(a.calib.as_deref())?;
    let mut robot = match a.mode {
        Mode::Ap => RobotConfig::access_point(),
        Mode::Sta => RobotConfig::station(a.session),
    };
    robot.imu_seed = a.seed;
    Ok(ServiceStart::Robot(Box::new(RobotServiceConfig {
        model: ProbeModel::new(cal),
        robot,
        listen: any_addr(a.port),
        relay: Some(a.relay),
        assets: a.assets,
        dial: DialPolicy::default(),
    })))
}

fn relay(a: RelayArgs) -> Result<ServiceStart, Failure> {
    let model = config::resolve_preset(&a.preset)?.with_seed(a.seed);
    Ok(ServiceStart::Relay(RelayServiceConfig {
        relay: RelayConfig::symmetric(model),
        listen: any_addr(a.port),
        assets: a.assets,
    }))
}

fn segment_json(s: &SegmentRecord) -> serde_json::Value {
    json!({
        "index": s.index,
        "target_deg": s.target_deg,
        "start_deg": s.start_deg,
        "final_deg": s.final_deg,
        "error_deg": s.error_deg,
        "max_overshoot_deg": s.max_overshoot_deg,
        "duration_s": s.duration_s,
        "reversal_in_deadband_count": s.reversal_in_deadband_count,
        "aborted": s.aborted,
    })
}

fn operate(a: OperateArgs) -> Result<(), Failure> {
    let cal = config::load_calibration(a.calib.as_deref())?;
    let profile = config::resolve_profile(&a.profile)?;
    let script = config::resolve_script(&a.script, &cal)?;
    let mut operator = OperatorConfig::new(profile, script, a.seed);
    let addr = match a.relay {
        Some(r) => {
            operator.session = a.session;
            r
        }
        None => format!("127.0.0.1:{}", a.port),
    };
    let config = OperateConfig {
        addr,
        operator,
        dial: DialPolicy::default(),
    };
    let result = runtime()?.block_on(run_operator(config, |s| {
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{}", segment_json(s)).and_then(|_| out.flush());
    }))?;
    match result.outcome {
        TaskOutcome::Completed => Ok(()),
        other => Err(Failure::Service(ServiceError::Io(std::io::Error::other(format!(
            "task ended early: {other:?}"
        ))))),
    }
}

fn write_out(dir: &Path, files: &[OutputFile], started: Instant, argv: &[String]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Service(ServiceError::Io(e));
    report::write_files(dir, files).map_err(io)?;
    let run = json!({
        "argv": argv,
        "wall_ms": started.elapsed().as_millis() as u64,
    });
    std::fs::write(dir.join("run.json"), format!("{}\n", serde_json::to_string_pretty(&run).expect("json"))).map_err(io)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn print_checks(checks: &[Check]) -> bool {
    let mut all = true;
    for c in checks {
        println!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.pass;
    }
    all
}

fn cmd_exp1(a: Exp1Args) -> Result<(), Failure> {
    let started = Instant::now();
    let cal = config::load_calibration(a.calib.as_deref())?;
    let mut cfg = exp1::Exp1Config::new(cal, config::resolve_preset(&a.preset)?, a.seed);
    cfg.wall_clock = wall_clock(a.out.wall_clock);
    tracing::info!(event = "exp1_start", seed = a.seed, preset = %a.preset, wall_clock = cfg.wall_clock);
    let r = exp1::run_exp1(&cfg);
    print_checks(&report::exp1_checks(&cfg, &r));
    let dir = a.out.out.join("exp1").join(a.seed.to_string());
    write_out(&dir, &report::exp1_files(&cfg, &r), started, &std::env::args().collect::<Vec<_>>())
}

fn cmd_exp2(a: Exp2Args) -> Result<(), Failure> {
    let started = Instant::now();
    let cal = config::load_calibration(a.calib.as_deref())?;
    let mut cfg = exp2::Exp2Config::new(cal, a.seed);
    cfg.wall_clock = wall_clock(a.out.wall_clock);
    tracing::info!(event = "exp2_start", seed = a.seed, wall_clock = cfg.wall_clock);
    let r = exp2::run_exp2(&cfg).map_err(|e| Failure::Config(ConfigError::Invalid(e.to_string())))?;
    print_checks(&report::exp2_checks(&cfg, &r));
    let dir = a.out.out.join("exp2").join(a.seed.to_string());
    write_out(&dir, &report::exp2_files(&cfg, &r), started, &std::env::args().collect::<Vec<_>>())
}

fn cmd_exp3(a: Exp3Args) -> Result<(), Failure> {
    let started = Instant::now();
    let cal = config::load_calibration(a.calib.as_deref())?;
    let seeds = config::parse_seeds(&a.seed)?;
    let link = config::resolve_preset(&a.preset)?;
    let mut cfg = Exp3Config::new(cal, seeds.clone());
    cfg.conditions = if a.profile.is_empty() {
        exp3::default_conditions(link)
    } else {
        a.profile
            .iter()
            .map(|p| {
                let profile = config::resolve_profile(p)?;
                let local = profile.name == "manual";
                Ok(Condition {
                    topology: if local { Topology::AccessPoint } else { Topology::Station },
                    impairment: if local { ImpairmentModel::none() } else { link },
                    profile,
                })
            })
            .collect::<Result<_, ConfigError>>()?
    };
    if !a.script.is_empty() {
        cfg.scripts = a
            .script
            .iter()
            .map(|s| config::resolve_script(s, &cfg.calibration))
            .collect::<Result<_, _>>()?;
    }
    cfg.wall_clock = wall_clock(a.out.wall_clock);
    tracing::info!(event = "exp3_start", seeds = %a.seed, preset = %a.preset, wall_clock = cfg.wall_clock);
    let r = exp3::run_exp3(&cfg);
    print_checks(&report::exp3_checks(&cfg, &r));
    let dir = a.out.out.join("exp3").join(config::seed_label(&seeds));
    write_out(&dir, &report::exp3_files(&cfg, &r, a.traces), started, &std::env::args().collect::<Vec<_>>())
}

fn find_reports(dir: &Path) -> Vec<PathBuf> {
    let mut found: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_name() == "report.json")
        .map(|e| e.into_path())
        .collect();
    found.sort();
    found
}

fn cmd_report(a: ReportArgs) -> Result<(), Failure> {
    let reports = find_reports(&a.dir);
    if reports.is_empty() {
        return Err(ConfigError::Invalid(format!("no report.json below {}", a.dir.display())).into());
    }
    let mut failed = Vec::new();
    for path in reports {
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        let checks = report::checks_from_report(&text)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
        if !print_checks(&checks) {
            failed.push(path.display().to_string());
        }
    }
    if a.check && !failed.is_empty() {
        return Err(Failure::Threshold(format!("checks failed in {}", failed.join(", "))));
    }
    Ok(())
}
