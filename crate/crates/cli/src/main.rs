//! `vpon`: runs virtualized-PON fronthaul scenarios and sweeps.
//!
//! Settings resolve as command-line flags, then the configuration file,
//! then built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vpon_core::{sweep, ConfigError, RunError, Scenario, ScenarioConfig, SweepAxis};

const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "vpon", version, about = "Virtualized PON fronthaul latency simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report, histograms and event log.
    Run(RunArgs),
    /// Run every scenario over a list of distances or packet sizes.
    Sweep(SweepArgs),
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Total background load as a fraction of the line rate.
    #[arg(long)]
    load: Option<f64>,
    /// Output directory (default: `out_dir` from the file, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    distance_km: Option<f64>,
    /// LTE transport block size in bytes.
    #[arg(long)]
    packet_size: Option<u32>,
    /// Also write the full event log (events.csv).
    #[arg(long)]
    event_log: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Distance,
    PacketSize,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Axis points: kilometres or bytes.
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Scenarios to run (default: all three).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    scenarios: Vec<Scenario>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: 1, err }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            err: anyhow::anyhow!("invalid configuration:\n{e}"),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            RunError::Sim(s) => Failure {
                code: EXIT_INVARIANT,
                err: anyhow::anyhow!("simulation aborted: {s}"),
            },
        }
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let src = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|err| Failure { code: EXIT_CONFIG, err })?;
            ScenarioConfig::from_toml(&src)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = common.duration {
        cfg.duration_s = d;
    }
    if let Some(l) = common.load {
        cfg.load.total_load = l;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run_cmd(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    if let Some(d) = args.distance_km {
        cfg.pon.fiber_km = d;
    }
    if let Some(b) = args.packet_size {
        cfg.lte.tb_size_bytes = b;
    }
    cfg.event_log |= args.event_log;
    cfg.validate()?;

    let out = vpon_core::run(&cfg)?;
    let dir = out_dir(&cfg)?;
    let json = serde_json::to_string_pretty(&out.report).context("encoding report")?;
    write(&dir, "report.json", &json)?;
    write(&dir, "rtt_histogram.csv", &out.rtt_histogram.to_csv())?;
    write(&dir, "jitter_histogram.csv", &out.jitter_histogram.to_csv())?;
    if let Some(log) = &out.event_log {
        write(&dir, "events.csv", &format!("time_ns,entity,event,packet_id,detail\n{log}"))?;
    }
    let r = &out.report;
    println!(
        "{} at {} km: {} samples, mean RTT {:.3} us, NGMN margin {:.3} us ({})",
        r.scenario,
        r.distance_km,
        r.sample_count,
        r.rtt_mean_us,
        r.ngmn_margin_us,
        if r.compliant { "compliant" } else { "not compliant" }
    );
    log::info!("artifacts written to {}", dir.display());
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let axis = match args.axis {
        Axis::Distance => SweepAxis::DistanceKm,
        Axis::PacketSize => SweepAxis::PacketSize,
    };
    let scenarios = if args.scenarios.is_empty() {
        Scenario::ALL.to_vec()
    } else {
        args.scenarios
    };
    // Reject bad axis points before spending time on the others.
    for v in &args.values {
        let mut point = cfg.clone();
        axis.apply(&mut point, *v);
        point.validate()?;
    }

    let res = sweep(&cfg, axis, &args.values, &scenarios)?;
    let dir = out_dir(&cfg)?;
    write(&dir, "sweep.csv", &res.to_csv())?;
    if axis == SweepAxis::DistanceKm {
        let summary: Vec<_> = res
            .crossings
            .iter()
            .map(|(s, c)| serde_json::json!({ "scenario": s, "max_compliant_distance": c }))
            .collect();
        let json = serde_json::to_string_pretty(&summary).context("encoding crossings")?;
        write(&dir, "crossings.json", &json)?;
        for (s, c) in &res.crossings {
            println!("{s}: {c:?}");
        }
    }
    print!("{}", res.to_csv());
    if let Some((s, v, e)) = res.failures.first() {
        return Err(Failure {
            code: EXIT_INVARIANT,
            err: anyhow::anyhow!("{} sweep point(s) failed; first: {s} at {v}: {e}", res.failures.len()),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
