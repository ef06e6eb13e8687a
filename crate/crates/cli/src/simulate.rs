//! Sweep execution: per-point circuits and probes, the trajectory body,
//! deterministic aggregation and the CSV writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mipt_core::diagnostics::{dumbbell, DiagnosticKind, DumbbellShape, Probe};
use mipt_core::ensembles::{load_table, EnsembleSpec};
use mipt_core::lattice::{
    point_key, scramble_with_ancillas, trajectory_rng, Circuit, LatticeGeometry, Schedule,
};
use mipt_core::pauli::{Basis, StabilizerTableau};
use serde::Serialize;

use crate::config::{EnsembleConfig, ExperimentConfig, GridPoint, SweepConfig};
use crate::error::{CliError, Result};
use crate::exec::{run_pool, PoolOutput};

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleInfo {
    pub kind: String,
    pub k: usize,
    /// `uniform`, `fixing-subgroup` or `table`.
    pub sampler: &'static str,
    pub table: Option<PathBuf>,
    pub table_crc32: Option<u32>,
    pub table_len: Option<usize>,
}

pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub info: EnsembleInfo,
}

/// Builds the ensemble, loading and checking a stored table if one is named.
/// Relative table paths resolve against `base`.
pub fn load_ensemble(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<Ensemble> {
    let kind = cfg.ensemble_kind()?;
    let k = cfg.ensemble_qubits()?;
    let spec = EnsembleSpec::new(kind, k)?;
    let EnsembleConfig { table, .. } = &cfg.ensemble;
    let Some(rel) = table else {
        let sampler = match kind {
            mipt_core::ensembles::EnsembleKind::Unconstrained => "uniform",
            _ => "fixing-subgroup",
        };
        return Ok(Ensemble {
            spec,
            info: EnsembleInfo {
                kind: kind.name().into(),
                k,
                sampler,
                table: None,
                table_crc32: None,
                table_len: None,
            },
        });
    };
    let path = match base {
        Some(b) if rel.is_relative() => b.join(rel),
        _ => rel.clone(),
    };
    let loaded = load_table(&path).map_err(|e| CliError::Ensemble(format!("{}: {e}", path.display())))?;
    if loaded.k != k {
        return Err(CliError::Ensemble(format!(
            "{}: table has k = {}, ensemble needs k = {k}",
            path.display(),
            loaded.k
        )));
    }
    let gens = spec.packed_generators();
    if let Some(i) = loaded.elements.iter().position(|c| !c.fixes_all(&gens)) {
        return Err(CliError::Ensemble(format!(
            "{}: element {i} breaks the {} symmetry",
            path.display(),
            kind.name()
        )));
    }
    let (crc, len) = (loaded.crc32, loaded.elements.len());
    let spec = spec.with_table(loaded.elements)?;
    Ok(Ensemble {
        spec,
        info: EnsembleInfo {
            kind: kind.name().into(),
            k,
            sampler: "table",
            table: Some(path),
            table_crc32: Some(crc),
            table_len: Some(len),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Warmup then periodic samples; one aggregate row per point.
    Standard,
    /// Scrambling prologue then samples from `t = 0`; one row per sample time.
    Decay,
}

/// Everything a worker needs to run one trajectory of a point.
struct PointCtx {
    point: GridPoint,
    key: u64,
    circuit: Circuit,
    probe: Probe,
    schedule: Schedule,
    ancillas: usize,
    scramble: u64,
}

fn build_probe(sweep: &SweepConfig, geom: &LatticeGeometry) -> std::result::Result<Probe, String> {
    let kind = sweep.diagnostic_kind();
    match kind {
        DiagnosticKind::SDumb => {
            let shape = sweep
                .dumbbell_head
                .map_or(DumbbellShape::for_side(geom.side()), |head| DumbbellShape { head });
            let regions = dumbbell(geom, shape).map_err(|e| e.to_string())?;
            Ok(Probe::Seven { kind, regions })
        }
        DiagnosticKind::Profile => Ok(Probe::Profile {
            geometry: *geom,
            dir: sweep.cut,
        }),
        _ => Probe::new(geom, kind, sweep.geometry_tag(), sweep.ancillas).map_err(|e| e.to_string()),
    }
}

fn contexts(sweep: &SweepConfig, ensemble: &EnsembleSpec, mode: Mode) -> Result<Vec<PointCtx>> {
    let needs_ancillas = mode == Mode::Decay || sweep.diagnostic_kind() == DiagnosticKind::SAnc;
    let bad = |field: &str, m: String| CliError::Config(format!("sweep ({}).{field}: {m}", sweep.name));
    sweep
        .points()
        .into_iter()
        .map(|point| {
            let geom = LatticeGeometry::new(point.l).map_err(|e| bad("L", e.to_string()))?;
            let circuit = Circuit::new(geom, point.mix, ensemble).map_err(|e| bad("L", e.to_string()))?;
            let probe = build_probe(sweep, &geom).map_err(|m| bad("geometry", m))?;
            let mut schedule = sweep.schedule_for(point.l).map_err(|e| bad(e.field, e.message))?;
            if mode == Mode::Decay {
                schedule.warmup = 0;
            }
            Ok(PointCtx {
                key: point_key(point.l, &point.mix),
                point,
                circuit,
                probe,
                schedule,
                ancillas: if needs_ancillas { sweep.ancillas } else { 0 },
                scramble: if needs_ancillas { sweep.scramble_steps(point.l) } else { 0 },
            })
        })
        .collect()
}

/// `(time, value)` pairs of one trajectory.
pub type Samples = Vec<(u64, Vec<i64>)>;

fn trajectory(ctx: &PointCtx, seed: u64, t: u64, mode: Mode) -> Samples {
    let mut rng = trajectory_rng(seed, ctx.key, t);
    let n = ctx.point.l * ctx.point.l;
    let mut state = StabilizerTableau::product_state(n, Basis::Z).expect("nonempty lattice");
    if ctx.ancillas > 0 {
        state = scramble_with_ancillas(&state, ctx.ancillas, ctx.scramble, &mut rng);
    }
    let mut out = Vec::with_capacity(ctx.schedule.sample_count() as usize + 1);
    if mode == Mode::Decay {
        out.push((0, ctx.probe.measure(&state)));
    }
    out.extend(
        ctx.circuit
            .run(&mut state, &ctx.schedule, &mut rng, |s, time| (time, ctx.probe.measure(s))),
    );
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub delta: f64,
    pub sigma: f64,
    pub count: usize,
}

/// Mean of all samples and the standard error of per-trajectory means.
/// `pick(samples)` extracts the values of one trajectory.
fn aggregate<F>(trajs: &[&Samples], pick: F) -> Option<Aggregate>
where
    F: Fn(&Samples) -> Vec<i64>,
{
    if trajs.is_empty() {
        return None;
    }
    let mut total: i128 = 0;
    let mut n_samples: u64 = 0;
    let mut means = Vec::with_capacity(trajs.len());
    for s in trajs {
        let v = pick(s);
        let sum: i128 = v.iter().map(|&x| x as i128).sum();
        total += sum;
        n_samples += v.len() as u64;
        means.push(if v.is_empty() { 0.0 } else { sum as f64 / v.len() as f64 });
    }
    if n_samples == 0 {
        return None;
    }
    let count = trajs.len();
    let delta = total as f64 / n_samples as f64;
    let sigma = if count > 1 {
        let m = means.iter().sum::<f64>() / count as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        0.0
    };
    Some(Aggregate { delta, sigma, count })
}

pub struct PointResult {
    pub point: GridPoint,
    /// Row for the main CSV; `None` when the point has no trajectories.
    pub main: Option<Aggregate>,
    /// Per-width aggregates for profiles.
    pub profile: Vec<Aggregate>,
    /// Per-time aggregates in decay mode.
    pub decay: Vec<(u64, Aggregate)>,
    pub samples: Vec<Samples>,
}

pub struct SweepOutput {
    pub sweep: SweepConfig,
    pub points: Vec<PointResult>,
    /// Set when a worker failed; only fully finished points are present.
    pub failure: Option<String>,
}

fn summarise(ctx: &PointCtx, kind: DiagnosticKind, mode: Mode, done: Vec<Samples>) -> PointResult {
    let refs: Vec<&Samples> = done.iter().collect();
    let l = ctx.point.l;
    let main_index = if kind == DiagnosticKind::Profile { l / 2 - 1 } else { 0 };
    let main = match mode {
        Mode::Standard => aggregate(&refs, |s| s.iter().map(|(_, v)| v[main_index]).collect()),
        Mode::Decay => None,
    };
    let profile = if kind == DiagnosticKind::Profile && mode == Mode::Standard {
        (0..l - 1)
            .filter_map(|w| aggregate(&refs, |s| s.iter().map(|(_, v)| v[w]).collect()))
            .collect()
    } else {
        Vec::new()
    };
    let decay = if mode == Mode::Decay && !refs.is_empty() {
        (0..refs[0].len())
            .filter_map(|i| {
                let time = refs[0][i].0;
                aggregate(&refs, |s| vec![s[i].1[main_index]]).map(|a| (time, a))
            })
            .collect()
    } else {
        Vec::new()
    };
    PointResult {
        point: ctx.point,
        main,
        profile,
        decay,
        samples: done,
    }
}

/// Runs one sweep on the pool. `keep_samples` retains raw samples for the
/// raw log.
pub fn run_sweep(
    sweep: &SweepConfig,
    ensemble: &EnsembleSpec,
    seed: u64,
    workers: usize,
    mode: Mode,
    keep_samples: bool,
) -> Result<SweepOutput> {
    let ctxs = contexts(sweep, ensemble, mode)?;
    let counts = vec![sweep.trajectories; ctxs.len()];
    let mut order: Vec<usize> = (0..ctxs.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(ctxs[i].point.l));
    log::info!(
        "sweep {}: {} points x {} trajectories on {workers} workers",
        sweep.name,
        ctxs.len(),
        sweep.trajectories
    );
    let PoolOutput { results, failure } = run_pool(&counts, &order, workers, |pt, t| trajectory(&ctxs[pt], seed, t, mode));
    let kind = sweep.diagnostic_kind();
    let points = ctxs
        .iter()
        .zip(results)
        .filter_map(|(ctx, slots)| {
            let done: Option<Vec<Samples>> = slots.into_iter().collect();
            let mut r = summarise(ctx, kind, mode, done?);
            if !keep_samples {
                r.samples.clear();
            }
            Some(r)
        })
        .collect();
    Ok(SweepOutput {
        sweep: sweep.clone(),
        points,
        failure,
    })
}

#[derive(Serialize)]
struct MainRow<'a> {
    #[serde(rename = "L")]
    l: usize,
    p: f64,
    pu: f64,
    pmz: f64,
    pms: f64,
    diagnostic: &'a str,
    geometry: &'a str,
    delta: f64,
    sigma: f64,
    count: usize,
}

pub const MAIN_HEADER: [&str; 10] = ["L", "p", "pu", "pmz", "pms", "diagnostic", "geometry", "delta", "sigma", "count"];
pub const PROFILE_HEADER: [&str; 10] = ["L", "p", "pu", "pmz", "pms", "geometry", "width", "delta", "sigma", "count"];
pub const DECAY_HEADER: [&str; 9] = ["L", "p", "pu", "pmz", "pms", "time", "delta", "sigma", "count"];
pub const RAW_HEADER: [&str; 8] = ["L", "p", "pu", "pmz", "pms", "trajectory", "time", "value"];

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    Ok(w)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| CliError::io(path, e))
}

/// Writes the CSV files of one sweep and returns their paths. Files of a
/// failed sweep carry a `.partial` infix.
pub fn write_sweep(out: &SweepOutput, dir: &Path, raw: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let stem = if out.failure.is_some() {
        format!("{}.partial", out.sweep.name)
    } else {
        out.sweep.name.clone()
    };
    let diag = out.sweep.diagnostic_kind().name();
    let geo = out.sweep.geometry_label();
    let mut written = Vec::new();
    let decay_mode = out.points.iter().any(|p| !p.decay.is_empty());

    if decay_mode {
        let path = dir.join(format!("{stem}.decay.csv"));
        let mut w = writer(&path, &DECAY_HEADER)?;
        for r in &out.points {
            let m = r.point.mix;
            for (time, a) in &r.decay {
                w.serialize((r.point.l, r.point.p, m.pu, m.pmz, m.pms, time, a.delta, a.sigma, a.count))
                    .map_err(|e| csv_err(&path, e))?;
            }
        }
        finish(&path, w)?;
        written.push(path);
    } else {
        let path = dir.join(format!("{stem}.csv"));
        let mut w = writer(&path, &MAIN_HEADER)?;
        for r in &out.points {
            let Some(a) = r.main else { continue };
            let m = r.point.mix;
            w.serialize(MainRow {
                l: r.point.l,
                p: r.point.p,
                pu: m.pu,
                pmz: m.pmz,
                pms: m.pms,
                diagnostic: diag,
                geometry: geo,
                delta: a.delta,
                sigma: a.sigma,
                count: a.count,
            })
            .map_err(|e| csv_err(&path, e))?;
        }
        finish(&path, w)?;
        written.push(path);
    }

    if out.sweep.diagnostic_kind() == DiagnosticKind::Profile {
        let path = dir.join(format!("{stem}.profile.csv"));
        let mut w = writer(&path, &PROFILE_HEADER)?;
        for r in &out.points {
            let m = r.point.mix;
            for (i, a) in r.profile.iter().enumerate() {
                w.serialize((r.point.l, r.point.p, m.pu, m.pmz, m.pms, geo, i + 1, a.delta, a.sigma, a.count))
                    .map_err(|e| csv_err(&path, e))?;
            }
        }
        finish(&path, w)?;
        written.push(path);
    }

    if raw {
        let path = dir.join(format!("{stem}.raw.csv"));
        let mut w = writer(&path, &RAW_HEADER)?;
        for r in &out.points {
            let m = r.point.mix;
            for (t, samples) in r.samples.iter().enumerate() {
                for (time, v) in samples {
                    let value = v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
                    w.serialize((r.point.l, r.point.p, m.pu, m.pmz, m.pms, t, time, value))
                        .map_err(|e| csv_err(&path, e))?;
                }
            }
        }
        finish(&path, w)?;
        written.push(path);
    }
    Ok(written)
}
