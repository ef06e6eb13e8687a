//! Experiment configuration: a TOML file with global keys, an `[ensemble]`
//! table and one `[[sweep]]` block per parameter line.
//!
//! ```toml
//! seed = 7
//! workers = 8
//! out = "runs/pure-measurement"
//!
//! [ensemble]
//! kind = "unconstrained"
//!
//! [[sweep]]
//! name = "pmz-line"
//! L = [8, 12]
//! vary = "pmz"          # p is this probability
//! fixed = "pu"          # held at fixed_value; the third takes the rest
//! fixed_value = 0.0
//! p = [0.40, 0.45, 0.50, 0.55, 0.60]
//! trajectories = 2000
//! diagnostic = "s_dumb"
//! geometry = "dumbbell"
//! ```

use std::path::{Path, PathBuf};

use mipt_core::diagnostics::{CutDirection, DiagnosticKind, GeometryTag};
use mipt_core::ensembles::EnsembleKind;
use mipt_core::fss::Method;
use mipt_core::lattice::{LatticeGeometry, OperationMix, Schedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Write every sample, not just the per-point aggregates.
    #[serde(default)]
    pub raw_log: bool,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(rename = "sweep", default)]
    pub sweeps: Vec<SweepConfig>,
}

fn default_seed() -> u64 {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Defaults to 5, or 4 for `z-preserving`.
    pub qubits: Option<usize>,
    /// Stored table to draw from instead of the built-in sampler.
    pub table: Option<PathBuf>,
}

fn default_kind() -> String {
    EnsembleKind::Unconstrained.name().to_string()
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            qubits: None,
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub gamma: f64,
}

fn default_method() -> String {
    Method::Polynomial.name().to_string()
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Probability {
    Pu,
    Pmz,
    Pms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

/// Schedule relative to the lattice: `total = total_factor L^4`,
/// `warmup = warmup_fraction total`, `interval = interval_factor L^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "one")]
    pub total_factor: f64,
    #[serde(default = "quarter")]
    pub warmup_fraction: f64,
    #[serde(default = "one")]
    pub interval_factor: f64,
}

fn one() -> f64 {
    1.0
}

fn quarter() -> f64 {
    0.25
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_factor: 1.0,
            warmup_fraction: 0.25,
            interval_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    #[serde(rename = "L")]
    pub sizes: Vec<usize>,
    pub vary: Probability,
    pub fixed: Probability,
    #[serde(default)]
    pub fixed_value: f64,
    pub p: Option<Vec<f64>>,
    pub p_range: Option<PRange>,
    pub trajectories: usize,
    pub diagnostic: String,
    #[serde(default = "default_geometry")]
    pub geometry: String,
    /// Side of the dumbbell heads; defaults to `L/4 + 1`.
    pub dumbbell_head: Option<usize>,
    #[serde(default = "default_cut")]
    pub cut: CutDirection,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// Ancilla count for `s_anc`.
    #[serde(default = "default_ancillas")]
    pub ancillas: usize,
    /// Scrambling prologue length in units of `L^4`.
    #[serde(default = "one")]
    pub scramble_factor: f64,
    /// Initial `(p_c, nu)` for boundary scans.
    pub guess: Option<[f64; 2]>,
}

fn default_geometry() -> String {
    GeometryTag::Cylinder.name().to_string()
}

fn default_cut() -> CutDirection {
    CutDirection::Row
}

fn default_ancillas() -> usize {
    20
}

/// One `(L, p)` cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub l: usize,
    pub p: f64,
    pub mix: OperationMix,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(message) => CliError::ConfigFile {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn ensemble_kind(&self) -> Result<EnsembleKind> {
        EnsembleKind::parse(&self.ensemble.kind)
            .ok_or_else(|| CliError::Config(format!("ensemble.kind: unknown ensemble {:?}", self.ensemble.kind)))
    }

    pub fn ensemble_qubits(&self) -> Result<usize> {
        Ok(self.ensemble.qubits.unwrap_or(self.ensemble_kind()?.default_qubits()))
    }

    pub fn method(&self) -> Result<Method> {
        Method::parse(&self.analysis.method)
            .ok_or_else(|| CliError::Config(format!("analysis.method: unknown method {:?}", self.analysis.method)))
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble_kind()?;
        self.method()?;
        if self.sweeps.is_empty() {
            return Err(CliError::Config("at least one [[sweep]] block is required".into()));
        }
        let mut names = std::collections::HashSet::new();
        for (i, s) in self.sweeps.iter().enumerate() {
            let at = |field: &str| format!("sweep[{i}] ({}).{field}", s.name);
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(CliError::Config(format!("{}: use letters, digits, '-' or '_'", at("name"))));
            }
            if !names.insert(s.name.as_str()) {
                return Err(CliError::Config(format!("{}: duplicate sweep name", at("name"))));
            }
            s.validate().map_err(|m| CliError::Config(format!("{}: {m}", at(m.field))))?;
        }
        Ok(())
    }
}

/// Validation message tagged with the offending field.
#[derive(Debug)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn field(field: &'static str, message: impl Into<String>) -> FieldError {
    FieldError {
        field,
        message: message.into(),
    }
}

impl SweepConfig {
    pub fn diagnostic_kind(&self) -> DiagnosticKind {
        DiagnosticKind::parse(&self.diagnostic).expect("validated")
    }

    pub fn geometry_tag(&self) -> GeometryTag {
        match self.diagnostic_kind() {
            DiagnosticKind::SDumb => GeometryTag::Dumbbell,
            _ => GeometryTag::parse(&self.geometry).expect("validated"),
        }
    }

    /// Label written to the `geometry` column.
    pub fn geometry_label(&self) -> &'static str {
        match self.diagnostic_kind() {
            DiagnosticKind::STop | DiagnosticKind::SDumb => self.geometry_tag().name(),
            DiagnosticKind::SAnc => "ancilla",
            DiagnosticKind::HalfSystem => "row",
            DiagnosticKind::Profile => match self.cut {
                CutDirection::Row => "row",
                CutDirection::Column => "column",
            },
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        match (&self.p, &self.p_range) {
            (Some(p), _) => p.clone(),
            (None, Some(r)) if r.count == 1 => vec![r.start],
            (None, Some(r)) => (0..r.count)
                .map(|i| r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64)
                .collect(),
            (None, None) => Vec::new(),
        }
    }

    pub fn mix_at(&self, p: f64) -> std::result::Result<OperationMix, FieldError> {
        let mut v = [0.0f64; 3];
        let slot = |q: Probability| match q {
            Probability::Pu => 0,
            Probability::Pmz => 1,
            Probability::Pms => 2,
        };
        let (a, b) = (slot(self.vary), slot(self.fixed));
        let c = 3 - a - b;
        v[a] = p;
        v[b] = self.fixed_value;
        v[c] = 1.0 - p - self.fixed_value;
        if v[c].abs() < 1e-12 {
            v[c] = 0.0;
        }
        OperationMix::new(v[0], v[1], v[2])
            .map_err(|_| field("p", format!("p = {p} gives an invalid mix ({}, {}, {})", v[0], v[1], v[2])))
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let grid = self.grid();
        self.sizes
            .iter()
            .flat_map(|&l| {
                grid.iter().map(move |&p| GridPoint {
                    l,
                    p,
                    mix: self.mix_at(p).expect("validated"),
                })
            })
            .collect()
    }

    pub fn schedule_for(&self, l: usize) -> std::result::Result<Schedule, FieldError> {
        let l2 = (l * l) as f64;
        let total = (self.schedule.total_factor * l2 * l2).round() as u64;
        let warmup = (self.schedule.warmup_fraction * total as f64).round() as u64;
        let interval = ((self.schedule.interval_factor * l2).round() as u64).max(1);
        Schedule::new(warmup, interval, total).map_err(|e| field("schedule", format!("L = {l}: {e}")))
    }

    pub fn scramble_steps(&self, l: usize) -> u64 {
        let l2 = (l * l) as f64;
        (self.scramble_factor * l2 * l2).round() as u64
    }

    fn validate(&self) -> std::result::Result<(), FieldError> {
        if self.sizes.is_empty() {
            return Err(field("L", "at least one size is required"));
        }
        for &l in &self.sizes {
            LatticeGeometry::new(l).map_err(|e| field("L", e.to_string()))?;
        }
        if self.vary == self.fixed {
            return Err(field("fixed", "must differ from `vary`"));
        }
        if !(0.0..=1.0).contains(&self.fixed_value) {
            return Err(field("fixed_value", "must lie in [0, 1]"));
        }
        match (&self.p, &self.p_range) {
            (Some(_), Some(_)) => return Err(field("p", "give either `p` or `p_range`, not both")),
            (None, None) => return Err(field("p", "a p grid (`p` or `p_range`) is required")),
            (None, Some(r)) if r.count == 0 || (r.count > 1 && !(r.stop > r.start)) => {
                return Err(field("p_range", "needs count >= 1 and stop > start"))
            }
            _ => {}
        }
        let grid = self.grid();
        if grid.is_empty() {
            return Err(field("p", "grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(field("p", "grid must be strictly increasing"));
        }
        for &p in &grid {
            self.mix_at(p)?;
        }
        let kind = DiagnosticKind::parse(&self.diagnostic).map_err(|e| field("diagnostic", e.to_string()))?;
        let tag = GeometryTag::parse(&self.geometry).map_err(|e| field("geometry", e.to_string()))?;
        if kind == DiagnosticKind::STop && tag == GeometryTag::Dumbbell {
            return Err(field("geometry", "use diagnostic = \"s_dumb\" for the dumbbell"));
        }
        if kind == DiagnosticKind::SAnc && self.ancillas == 0 {
            return Err(field("ancillas", "s_anc needs at least one ancilla"));
        }
        if self.ancillas > 64 {
            return Err(field("ancillas", "at most 64 ancillas"));
        }
        if !(self.scramble_factor >= 0.0) {
            return Err(field("scramble_factor", "must be non-negative"));
        }
        if self.dumbbell_head == Some(0) {
            return Err(field("dumbbell_head", "must be positive"));
        }
        let s = self.schedule;
        if !(s.total_factor > 0.0 && (0.0..1.0).contains(&s.warmup_fraction) && s.interval_factor > 0.0) {
            return Err(field(
                "schedule",
                "needs total_factor > 0, 0 <= warmup_fraction < 1, interval_factor > 0",
            ));
        }
        for &l in &self.sizes {
            self.schedule_for(l)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[[sweep]]
name = "a"
L = [8]
vary = "pmz"
fixed = "pu"
p = [0.4, 0.5]
trajectories = 2
diagnostic = "s_dumb"
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.ensemble_kind().unwrap(), EnsembleKind::Unconstrained);
        let pts = c.sweeps[0].points();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].mix.pu, pts[0].mix.pmz), (0.0, 0.4));
        assert!((pts[0].mix.pms - 0.6).abs() < 1e-15);
        assert_eq!(c.sweeps[0].geometry_tag(), GeometryTag::Dumbbell);
    }

    #[test]
    fn rejects_bad_grids_and_sizes() {
        let bad = BASE.replace("p = [0.4, 0.5]", "p = [0.5, 0.4]");
        let e = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("sweep[0] (a).p") && e.contains("increasing"), "{e}");
        let odd = BASE.replace("L = [8]", "L = [7]");
        assert!(ExperimentConfig::parse(&odd).unwrap_err().to_string().contains(".L"));
        let over = BASE.replace("p = [0.4, 0.5]", "p = [0.4, 1.5]");
        assert!(ExperimentConfig::parse(&over).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let broken = BASE.replace("trajectories = 2", "trajectories = \"x\"");
        let e = ExperimentConfig::parse(&broken).unwrap_err().to_string();
        assert!(e.contains("line"), "{e}");
        let unknown = format!("{BASE}bogus = 1\n");
        assert!(ExperimentConfig::parse(&unknown).unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn p_range_and_schedule() {
        let c = ExperimentConfig::parse(&BASE.replace(
            "p = [0.4, 0.5]",
            "p_range = { start = 0.1, stop = 0.3, count = 3 }\nschedule = { total_factor = 0.5 }",
        ))
        .unwrap();
        let s = &c.sweeps[0];
        assert_eq!(s.grid().len(), 3);
        let sch = s.schedule_for(8).unwrap();
        assert_eq!((sch.total, sch.warmup, sch.interval), (2048, 512, 64));
    }
}
