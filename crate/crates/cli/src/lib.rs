//! `mipt`: sweeps of monitored Clifford circuits on a torus, ensemble tables
//! and finite-size-scaling analysis.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config or input error,
//! 3 ensemble error, 4 fit failure.

pub mod analysis;
pub mod config;
pub mod ensemble_cmd;
pub mod error;
pub mod exec;
pub mod simulate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mipt_core::ensembles::EnsembleKind;
use mipt_core::fss::SurvivalOptions;
use serde::Serialize;

use crate::analysis::{AnalyzeOptions, RowFilter};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::exec::resolve_workers;
use crate::simulate::{EnsembleInfo, Mode};

#[derive(Debug, Parser)]
#[command(name = "mipt", version, about = "Monitored Clifford circuit sweeps and scaling analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or check a stored ensemble table.
    #[command(subcommand)]
    Ensemble(EnsembleCommand),
    /// Run every sweep of a config and write per-point aggregates.
    Run(RunArgs),
    /// Like `run`, after an ancilla-scrambling prologue, writing S_anc per sample time.
    AncillaRun(RunArgs),
    /// Fit critical point and exponent to aggregate CSVs.
    Analyze(AnalyzeArgs),
    /// Run and fit each sweep line, writing one boundary point per line.
    BoundaryScan(BoundaryArgs),
    /// Fit survival times from decay tables written by `ancilla-run`.
    FitSurvival(SurvivalArgs),
    /// Regress a critical entanglement profile on the chord-length log.
    FitProfile(ProfileArgs),
}

#[derive(Debug, Subcommand)]
pub enum EnsembleCommand {
    Build {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        qubits: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    Verify {
        file: PathBuf,
        #[arg(long)]
        kind: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `trajectories` in every sweep.
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long)]
    pub raw_log: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// `nearest`, `multilevel`, `polynomial`, a comma list, or `all`.
    #[arg(long, default_value = "all")]
    pub method: String,
    #[arg(long = "pc")]
    pub p_c: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long)]
    pub fit_gamma: bool,
    /// Start from the initial guess instead of a coarse grid scan.
    #[arg(long)]
    pub no_scan: bool,
    /// Landscape grid `pc_lo,pc_hi,nu_lo,nu_hi,n`.
    #[arg(long, value_parser = parse_landscape)]
    pub landscape: Option<(f64, f64, f64, f64, usize)>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(required = true)]
    pub csv: Vec<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub diagnostic: Option<String>,
    #[arg(long)]
    pub geometry: Option<String>,
    #[arg(long, default_value = "analysis")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Overrides `analysis.method`.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SurvivalArgs {
    #[arg(required = true)]
    pub csv: Vec<PathBuf>,
    /// Fit window as fractions of the decay range, `lo,hi`.
    #[arg(long, default_value = "0.2,0.8", value_parser = parse_pair)]
    pub window: (f64, f64),
    #[arg(long, default_value_t = 1.0)]
    pub log_floor: f64,
    #[arg(long, default_value = "survival.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    pub csv: PathBuf,
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value = "profile.json")]
    pub out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad number {x:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [a, b] if a < b => Ok((a, b)),
        _ => Err("expected `lo,hi` with lo < hi".into()),
    }
}

fn parse_landscape(s: &str) -> std::result::Result<(f64, f64, f64, f64, usize), String> {
    let f: Vec<&str> = s.split(',').map(str::trim).collect();
    if f.len() != 5 {
        return Err("expected `pc_lo,pc_hi,nu_lo,nu_hi,n`".into());
    }
    let num = |x: &str| x.parse::<f64>().map_err(|_| format!("bad number {x:?}"));
    let n = f[4].parse::<usize>().map_err(|_| format!("bad count {:?}", f[4]))?;
    Ok((num(f[0])?, num(f[1])?, num(f[2])?, num(f[3])?, n))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ensemble(EnsembleCommand::Build { kind, qubits, out }) => {
            let kind = parse_kind(&kind)?;
            let m = ensemble_cmd::build(kind, qubits.unwrap_or(kind.default_qubits()), &out)?;
            println!("{}", serde_json::to_string_pretty(&m).expect("serialisable"));
            Ok(())
        }
        Command::Ensemble(EnsembleCommand::Verify { file, kind }) => {
            let r = ensemble_cmd::verify(&file, parse_kind(&kind)?)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("serialisable"));
            if r.ok {
                Ok(())
            } else {
                Err(CliError::Ensemble(format!("{} failed verification", file.display())))
            }
        }
        Command::Run(a) => run_command(&a, Mode::Standard).map(|_| ()),
        Command::AncillaRun(a) => run_command(&a, Mode::Decay).map(|_| ()),
        Command::Analyze(a) => {
            let filter = RowFilter {
                diagnostic: a.diagnostic.clone(),
                geometry: a.geometry.clone(),
            };
            let points = analysis::load_points(&a.csv, &filter)?;
            let opts = fit_options(&a.fit, &points)?;
            let report = analysis::analyze(&points, &opts)?;
            analysis::write_analysis(&report, &a.out)?;
            print!("{}", analysis::summary_table(&report));
            Ok(())
        }
        Command::BoundaryScan(a) => boundary_scan(&a).map(|_| ()),
        Command::FitSurvival(a) => {
            let series = analysis::load_decay(&a.csv)?;
            let opts = SurvivalOptions {
                window: a.window,
                log_floor: a.log_floor,
            };
            let fit = analysis::survival(&series, &opts)?;
            analysis::write_json(&a.out, &fit)?;
            println!("p_c = {:.4}, nu = {:.4}, amplitude = {:.4e}", fit.p_c, fit.nu, fit.amplitude);
            Ok(())
        }
        Command::FitProfile(a) => {
            let (p, profile) = analysis::load_profile(&a.csv, a.l, a.p)?;
            let r = analysis::profile_report(a.l, p, &profile)?;
            analysis::write_json(&a.out, &r)?;
            println!(
                "linear residual {:.6e}, quadratic residual {:.6e}",
                r.linear.residual, r.quadratic.residual
            );
            Ok(())
        }
    }
}

fn parse_kind(s: &str) -> Result<EnsembleKind> {
    EnsembleKind::parse(s).ok_or_else(|| CliError::Config(format!("unknown ensemble kind {s:?}")))
}

fn fit_options(a: &FitArgs, points: &[mipt_core::DataPoint]) -> Result<AnalyzeOptions> {
    let methods = analysis::parse_methods(&a.method)?;
    let p_c = a.p_c.unwrap_or_else(|| {
        let lo = points.iter().map(|d| d.p).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|d| d.p).fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    });
    let mut o = AnalyzeOptions::new(methods, p_c, a.nu);
    o.gamma = a.gamma;
    o.fit_gamma = a.fit_gamma;
    o.scan = !a.no_scan;
    o.landscape = a.landscape;
    Ok(o)
}

/// Loads a config file and applies command-line overrides.
pub fn load_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if let Some(t) = a.trajectories {
        for s in &mut cfg.sweeps {
            s.trajectories = t;
        }
    }
    cfg.raw_log |= a.raw_log;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_path: Option<&'a Path>,
    config: &'a ExperimentConfig,
    workers: usize,
    ensemble: &'a EnsembleInfo,
    outputs: &'a [PathBuf],
    status: &'static str,
    failure: Option<&'a str>,
    wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn run_command(a: &RunArgs, mode: Mode) -> Result<RunSummary> {
    let cfg = load_config(a)?;
    run_experiment(&cfg, Some(&a.config), mode)
}

/// Runs every sweep of `cfg`, writing CSVs, a frozen config copy and
/// `manifest.json` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, config_path: Option<&Path>, mode: Mode) -> Result<RunSummary> {
    let started = Instant::now();
    let base = config_path.and_then(Path::parent);
    let ensemble = simulate::load_ensemble(cfg, base)?;
    let workers = resolve_workers(cfg.workers);
    let mut outputs = Vec::new();
    let mut failure = None;
    for sweep in &cfg.sweeps {
        let out = simulate::run_sweep(sweep, &ensemble.spec, cfg.seed, workers, mode, cfg.raw_log)?;
        outputs.extend(simulate::write_sweep(&out, &cfg.out, cfg.raw_log)?);
        if let Some(f) = out.failure {
            failure = Some(format!("sweep {}: {f}", sweep.name));
            break;
        }
    }
    let command = match mode {
        Mode::Standard => "run",
        Mode::Decay => "ancilla-run",
    };
    let manifest = finish_run(cfg, config_path, command, &ensemble.info, workers, &mut outputs, failure.as_deref(), started)?;
    match failure {
        Some(f) => Err(CliError::Worker(f)),
        None => Ok(RunSummary { outputs, manifest }),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_run(
    cfg: &ExperimentConfig,
    config_path: Option<&Path>,
    command: &'static str,
    ensemble: &EnsembleInfo,
    workers: usize,
    outputs: &mut Vec<PathBuf>,
    failure: Option<&str>,
    started: Instant,
) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let frozen = cfg.out.join("config.frozen.toml");
    let text = toml::to_string_pretty(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&frozen, text).map_err(|e| CliError::io(&frozen, e))?;
    outputs.push(frozen);
    let path = cfg.out.join("manifest.json");
    let m = Manifest {
        tool: "mipt",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_path,
        config: cfg,
        workers,
        ensemble,
        outputs,
        status: if failure.is_some() { "partial" } else { "complete" },
        failure,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    analysis::write_json(&path, &m)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryRow {
    pub sweep: String,
    pub ensemble: String,
    pub diagnostic: String,
    pub geometry: String,
    pub vary: String,
    pub fixed: String,
    pub fixed_value: f64,
    pub method: String,
    pub p_c: f64,
    pub p_c_width: f64,
    pub nu: f64,
    pub nu_width: f64,
    pub epsilon: f64,
    pub pu: f64,
    pub pmz: f64,
    pub pms: f64,
}

fn boundary_scan(a: &BoundaryArgs) -> Result<Vec<BoundaryRow>> {
    let mut cfg = load_config(&a.run)?;
    if let Some(m) = &a.method {
        cfg.analysis.method = m.clone();
        cfg.validate()?;
    }
    scan_boundary(&cfg, Some(&a.run.config))
}

/// For each sweep: run, fit with `analysis.method`, and record the critical
/// point in `boundary.csv`.
pub fn scan_boundary(cfg: &ExperimentConfig, config_path: Option<&Path>) -> Result<Vec<BoundaryRow>> {
    let summary = run_experiment(cfg, config_path, Mode::Standard)?;
    let method = cfg.method()?;
    let mut rows = Vec::new();
    let mut error = None;
    for sweep in &cfg.sweeps {
        let csv = cfg.out.join(format!("{}.csv", sweep.name));
        let points = analysis::load_points(&[csv], &RowFilter::default())?;
        let grid = sweep.grid();
        let [p0, nu0] = sweep.guess.unwrap_or([0.5 * (grid[0] + grid[grid.len() - 1]), 1.0]);
        let mut opts = AnalyzeOptions::new(vec![method], p0, nu0);
        opts.gamma = cfg.analysis.gamma;
        let report = match analysis::analyze(&points, &opts) {
            Ok(r) => r,
            Err(e) => {
                error = Some(CliError::Fit(format!("sweep {}: {e}", sweep.name)));
                break;
            }
        };
        analysis::write_analysis(&report, &cfg.out.join("analysis").join(&sweep.name))?;
        let fit = &report.fits[0];
        let mix = sweep.mix_at(fit.p_c).ok();
        let name = |p: config::Probability| serde_json::to_value(p).expect("enum").as_str().expect("str").to_string();
        rows.push(BoundaryRow {
            sweep: sweep.name.clone(),
            ensemble: cfg.ensemble.kind.clone(),
            diagnostic: sweep.diagnostic.clone(),
            geometry: sweep.geometry_label().into(),
            vary: name(sweep.vary),
            fixed: name(sweep.fixed),
            fixed_value: sweep.fixed_value,
            method: method.name().into(),
            p_c: fit.p_c,
            p_c_width: fit.p_c_width.half_width,
            nu: fit.nu,
            nu_width: fit.nu_width.half_width,
            epsilon: fit.epsilon,
            pu: mix.map_or(f64::NAN, |m| m.pu),
            pmz: mix.map_or(f64::NAN, |m| m.pmz),
            pms: mix.map_or(f64::NAN, |m| m.pms),
        });
    }
    let path = cfg.out.join("boundary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    log::info!("boundary scan wrote {} rows; run manifest {}", rows.len(), summary.manifest.display());
    match error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}
