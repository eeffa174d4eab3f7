//! Command-line driver: `run`, `cdf`, `sweep` and `selftest`.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use ulofdma_core::harness::topology_for_run;
use ulofdma_core::{
    moving_average, run_cdf_study, run_k_sweep, run_single, stability_report, ExperimentConfig, PolicyKind,
    RunOptions, RunSummary,
};

pub mod config;
pub mod output;

use config::Overrides;
use output::OutputDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ulofdma_core::Error> for CliError {
    fn from(e: ulofdma_core::Error) -> Self {
        match e {
            ulofdma_core::Error::Config(_) | ulofdma_core::Error::McsParse { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(what: &str) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{what}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "ulofdma", version, about = "Uplink OFDMA scheduling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every policy on one topology; per-epoch traces and per-station averages.
    Run(ExperimentArgs),
    /// Empirical CDFs of minimum and sum rate over random topologies.
    Cdf(ExperimentArgs),
    /// Minimum and sum rate against the number of stations.
    Sweep(ExperimentArgs),
    /// Short checked runs of the queue-based policies.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Optional configuration; built-in defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args, Default)]
pub struct OverrideArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma separated, e.g. `dpp,srm,pf`.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<PolicyKind>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub topologies: Option<usize>,
    /// Station count for `run`/`cdf`; comma separated list for `sweep`.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub k: Option<Vec<usize>>,
    #[arg(long)]
    pub v: Option<f64>,
    /// Verify the per-epoch drift and telescoping inequalities.
    #[arg(long)]
    pub checks: bool,
}

impl OverrideArgs {
    fn resolve(&self, sweep: bool) -> Result<Overrides, CliError> {
        let mut o = Overrides {
            seed: self.seed,
            policies: self.policies.clone(),
            epochs: self.epochs,
            topologies: self.topologies,
            v: self.v,
            checks: self.checks,
            ..Overrides::default()
        };
        match (&self.k, sweep) {
            (Some(ks), true) => o.k_values = Some(ks.clone()),
            (Some(ks), false) if ks.len() == 1 => o.stations = Some(ks[0]),
            (Some(_), false) => return Err(CliError::Usage("--k takes a single station count here".into())),
            (None, _) => {}
        }
        Ok(o)
    }
}

/// Parses `args` (program name first), dispatches, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the human-readable report.
pub fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Run(a) => with_config(&a, false, cmd_run),
        Command::Cdf(a) => with_config(&a, false, cmd_cdf),
        Command::Sweep(a) => with_config(&a, true, cmd_sweep),
        Command::Selftest(a) => cmd_selftest(&a),
    }
}

fn with_config(
    args: &ExperimentArgs,
    sweep: bool,
    body: fn(&ExperimentConfig, &mut OutputDir) -> Result<String, CliError>,
) -> Result<String, CliError> {
    let mut cfg = config::load(&args.config)?;
    args.overrides.resolve(sweep)?.apply(&mut cfg);
    cfg.validate()?;

    let mut out = OutputDir::create(&args.out).map_err(io_err("creating output directory"))?;
    out.write("config.json", config::to_json(&cfg).as_bytes())
        .map_err(io_err("writing config.json"))?;
    let report = body(&cfg, &mut out)?;
    out.write("summary.txt", report.as_bytes())
        .map_err(io_err("writing summary.txt"))?;
    out.commit();
    Ok(report)
}

fn write_csv<T: serde::Serialize>(out: &mut OutputDir, name: &str, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let bytes = output::to_csv(header, rows).map_err(|e| CliError::Runtime(format!("encoding {name}: {e}")))?;
    out.write(name, &bytes).map_err(io_err(name))?;
    Ok(())
}

fn cmd_run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<String, CliError> {
    let topo = topology_for_run(cfg)?;
    let far = topo.most_distant();
    let opts = RunOptions { record_epochs: true, checks: cfg.checks };
    let mut summaries = Vec::new();
    let mut traces = Vec::new();
    let mut report = String::new();
    let _ = writeln!(
        report,
        "run: K = {}, {} epochs, seed {}, most distant station {far} at {:.2} m",
        cfg.stations,
        cfg.epochs,
        cfg.seed,
        topo.station_distances[far]
    );

    for &policy in &cfg.policies {
        let result = run_single(cfg, &topo, policy, cfg.channel_seed(0), opts)?;
        let name = format!("epochs_{}.csv", policy.name().to_lowercase());
        write_csv(out, &name, &output::EPOCH_HEADER, &output::epoch_rows(&result.epochs))?;

        let power: Vec<f64> = result.epochs.iter().map(|e| e.power[far]).collect();
        let smooth = moving_average(&power, cfg.moving_average_window);
        traces.extend(power.iter().zip(&smooth).enumerate().map(|(t, (&p, &m))| output::PowerTraceRow {
            policy: policy.to_string(),
            station: far,
            epoch: t,
            power_mw: p,
            moving_average_mw: m,
        }));

        describe_summary(&mut report, cfg, &result.summary);
        if let Some(d) = &result.diagnostics {
            let _ = writeln!(
                report,
                "    checks: {} epochs, {} drift violations, telescoping {}",
                d.epochs_checked,
                d.drift_violations,
                if d.telescoping_holds { "holds" } else { "FAILS" }
            );
            if !d.passed() {
                return Err(CliError::Runtime(format!("{policy}: sample-path inequality violated")));
            }
        }
        summaries.push(result.summary);
    }
    write_csv(out, "summary.csv", &output::SUMMARY_HEADER, &output::summary_rows(&summaries))?;
    write_csv(out, "power_trace.csv", &output::POWER_TRACE_HEADER, &traces)?;
    Ok(report)
}

fn describe_summary(report: &mut String, cfg: &ExperimentConfig, s: &RunSummary) {
    let pcfg = cfg.policy_config(s.policy, s.avg_rate.len());
    let max_power = s.avg_power.iter().copied().fold(0.0, f64::max);
    let _ = writeln!(
        report,
        "  {:<5} sum {:>10.1} bits  min {:>9.1} bits  max violation {:.4}  max avg power {:.3} mW",
        s.policy.name(),
        s.sum_rate,
        s.min_rate,
        s.max_violation,
        max_power
    );
    if s.policy.is_queue_based() {
        let st = stability_report(s, &pcfg, cfg.stability_tolerance);
        let _ = writeln!(
            report,
            "    queues: {} (tolerance {})",
            if st.stable { "stable" } else { "growing" },
            cfg.stability_tolerance
        );
    }
}

fn cmd_cdf(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<String, CliError> {
    let study = run_cdf_study(cfg)?;
    write_csv(out, "cdf.csv", &output::CDF_HEADER, &output::cdf_rows(&study.policies))?;
    let mut report = format!(
        "cdf: K = {}, {} topologies x {} epochs, seed {}\n",
        cfg.stations, cfg.topologies, cfg.epochs, cfg.seed
    );
    for p in &study.policies {
        let _ = writeln!(
            report,
            "  {:<5} mean min rate {:>9.1} bits  mean sum rate {:>10.1} bits",
            p.policy.name(),
            p.mean_min_rate,
            p.mean_sum_rate
        );
    }
    Ok(report)
}

fn cmd_sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<String, CliError> {
    let points = run_k_sweep(cfg, &cfg.k_values)?;
    write_csv(out, "sweep.csv", &output::SWEEP_HEADER, &output::sweep_rows(&points))?;
    let mut report = format!("sweep: K in {:?}, {} epochs, seed {}\n", cfg.k_values, cfg.epochs, cfg.seed);
    for p in &points {
        let _ = writeln!(
            report,
            "  K = {:>3}  {:<5} min {:>9.1} bits  sum {:>10.1} bits",
            p.k,
            p.policy.name(),
            p.min_rate,
            p.sum_rate
        );
    }
    Ok(report)
}

const SELFTEST_EPOCHS: usize = 500;

fn cmd_selftest(args: &SelftestArgs) -> Result<String, CliError> {
    let mut cfg = match &args.config {
        Some(path) => config::load(path)?,
        None => ExperimentConfig { stations: 10, epochs: SELFTEST_EPOCHS, ..ExperimentConfig::default() },
    };
    args.overrides.resolve(false)?.apply(&mut cfg);
    cfg.checks = true;
    cfg.policies = vec![PolicyKind::Dpp, PolicyKind::Esrm, PolicyKind::Wmm, PolicyKind::Mm];
    cfg.validate()?;

    let topo = topology_for_run(&cfg)?;
    let mut report = format!("selftest: K = {}, {} epochs, seed {}\n", cfg.stations, cfg.epochs, cfg.seed);
    let mut failed = Vec::new();
    for &policy in &cfg.policies {
        let result = run_single(&cfg, &topo, policy, cfg.channel_seed(0), RunOptions { record_epochs: false, checks: true })?;
        let d = result.diagnostics.expect("checks requested");
        let ok = d.passed() && d.epochs_checked == cfg.epochs;
        let _ = writeln!(
            report,
            "  {:<5} drift {}/{} epochs, min slack {:.3e}, telescoping {}: {}",
            policy.name(),
            d.epochs_checked - d.drift_violations,
            d.epochs_checked,
            d.min_drift_slack,
            if d.telescoping_holds { "holds" } else { "fails" },
            if ok { "ok" } else { "FAILED" }
        );
        if !ok {
            failed.push(policy);
        }
    }
    if failed.is_empty() {
        Ok(report)
    } else {
        print!("{report}");
        Err(CliError::Runtime(format!("selftest failed for {failed:?}")))
    }
}
