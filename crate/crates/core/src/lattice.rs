//! Monitored circuits on an `L x L` torus.
//!
//! Every timestep applies exactly one operation at a uniformly random center:
//! an ensemble unitary on the stencil, a `Z` measurement of the center, or a
//! measurement of the cluster stabilizer `Z_c X_N X_E X_S X_W`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{sample_clifford, EnsembleError, EnsembleSampler, EnsembleSpec};
use crate::pauli::{Basis, OutcomeKind, Pauli, PauliString, StabilizerTableau};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("side length must be even and at least 4, got {0}")]
    BadSide(usize),
    #[error("operation probabilities must be non-negative and sum to 1 (got {pu}, {pmz}, {pms})")]
    BadMix { pu: f64, pmz: f64, pms: f64 },
    #[error("schedule needs warmup < total and interval >= 1 (got {warmup}, {interval}, {total})")]
    BadSchedule { warmup: u64, interval: u64, total: u64 },
    #[error("no stencil shape for {0}-qubit unitaries")]
    BadStencil(usize),
    #[error("state has {state} qubits, geometry needs at least {needed}")]
    StateSize { state: usize, needed: usize },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeGeometry {
    l: usize,
}

impl LatticeGeometry {
    pub fn new(l: usize) -> Result<Self, LatticeError> {
        if l < 4 || l % 2 != 0 {
            return Err(LatticeError::BadSide(l));
        }
        Ok(Self { l })
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn num_sites(&self) -> usize {
        self.l * self.l
    }

    /// Index of `(x, y)` with periodic wrap.
    pub fn index(&self, x: i64, y: i64) -> usize {
        let l = self.l as i64;
        (x.rem_euclid(l) + l * y.rem_euclid(l)) as usize
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.l, i / self.l)
    }

    /// `(center, N, E, S, W)`.
    pub fn stencil_sites(&self, center: (usize, usize)) -> [usize; 5] {
        let (x, y) = (center.0 as i64, center.1 as i64);
        [
            self.index(x, y),
            self.index(x, y + 1),
            self.index(x + 1, y),
            self.index(x, y - 1),
            self.index(x - 1, y),
        ]
    }

    /// Unitary support for a `k`-qubit ensemble: the "+" stencil for `k = 5`,
    /// the horizontal line `(x-1, x, x+1)` for `k = 3` and the 2x2 square with
    /// the center at its lower-left corner for `k = 4`.
    pub fn unitary_sites(&self, k: usize, center: (usize, usize)) -> Result<Vec<usize>, LatticeError> {
        let (x, y) = (center.0 as i64, center.1 as i64);
        Ok(match k {
            5 => self.stencil_sites(center).to_vec(),
            3 => vec![self.index(x - 1, y), self.index(x, y), self.index(x + 1, y)],
            4 => vec![
                self.index(x, y),
                self.index(x + 1, y),
                self.index(x, y + 1),
                self.index(x + 1, y + 1),
            ],
            _ => return Err(LatticeError::BadStencil(k)),
        })
    }

    /// Cluster stabilizer on the system qubits only.
    pub fn cluster_stabilizer(&self, center: (usize, usize)) -> PauliString {
        self.cluster_stabilizer_padded(center, self.num_sites())
    }

    /// Cluster stabilizer on an `n`-qubit register whose first `L^2` qubits
    /// are the lattice.
    pub fn cluster_stabilizer_padded(&self, center: (usize, usize), n: usize) -> PauliString {
        let s = self.stencil_sites(center);
        let factors = [
            (s[0], Pauli::Z),
            (s[1], Pauli::X),
            (s[2], Pauli::X),
            (s[3], Pauli::X),
            (s[4], Pauli::X),
        ];
        PauliString::from_sparse(n, &factors).expect("stencil inside register")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationMix {
    pub pu: f64,
    pub pmz: f64,
    pub pms: f64,
}

impl OperationMix {
    pub fn new(pu: f64, pmz: f64, pms: f64) -> Result<Self, LatticeError> {
        let ok = [pu, pmz, pms].iter().all(|p| p.is_finite() && *p >= 0.0) && (pu + pmz + pms - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(LatticeError::BadMix { pu, pmz, pms });
        }
        Ok(Self { pu, pmz, pms })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> OpKind {
        let r: f64 = rng.gen();
        if r < self.pu {
            OpKind::Unitary
        } else if r < self.pu + self.pmz {
            OpKind::MeasureZ
        } else {
            OpKind::MeasureCluster
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Unitary,
    MeasureZ,
    MeasureCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub kind: OpKind,
    pub center: (usize, usize),
    /// `None` for unitaries.
    pub outcome: Option<OutcomeKind>,
}

/// Sampling schedule in timesteps: samples are taken after steps
/// `warmup + interval, warmup + 2 interval, ...` up to `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub warmup: u64,
    pub interval: u64,
    pub total: u64,
}

impl Schedule {
    pub fn new(warmup: u64, interval: u64, total: u64) -> Result<Self, LatticeError> {
        if warmup >= total || interval == 0 {
            return Err(LatticeError::BadSchedule { warmup, interval, total });
        }
        Ok(Self { warmup, interval, total })
    }

    /// Warmup `L^4 / 4`, interval `L^2`, total `L^4`.
    pub fn standard(geom: &LatticeGeometry) -> Self {
        let l2 = geom.num_sites() as u64;
        Self {
            warmup: l2 * l2 / 4,
            interval: l2,
            total: l2 * l2,
        }
    }

    pub fn sample_count(&self) -> u64 {
        (self.total - self.warmup) / self.interval
    }

    pub fn is_sample_time(&self, t: u64) -> bool {
        t > self.warmup && (t - self.warmup) % self.interval == 0
    }
}

/// Geometry, mix and a ready-to-draw ensemble sampler.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub geometry: LatticeGeometry,
    pub mix: OperationMix,
    sampler: EnsembleSampler,
}

impl Circuit {
    pub fn new(geometry: LatticeGeometry, mix: OperationMix, ensemble: &EnsembleSpec) -> Result<Self, LatticeError> {
        let sampler = ensemble.sampler()?;
        geometry.unitary_sites(sampler.num_qubits(), (0, 0))?;
        Ok(Self {
            geometry,
            mix,
            sampler,
        })
    }

    /// One timestep. Ancillas (qubits beyond `L^2`) are never touched.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut StabilizerTableau, rng: &mut R) -> Event {
        let kind = self.mix.draw(rng);
        let l = self.geometry.side();
        let center = (rng.gen_range(0..l), rng.gen_range(0..l));
        let outcome = match kind {
            OpKind::Unitary => {
                let sites = self
                    .geometry
                    .unitary_sites(self.sampler.num_qubits(), center)
                    .expect("stencil checked at construction");
                let c = self.sampler.sample(rng);
                state.apply_clifford_unchecked(&c, &sites);
                None
            }
            OpKind::MeasureZ => {
                let q = self.geometry.index(center.0 as i64, center.1 as i64);
                Some(state.measure_z(q).expect("center inside register"))
            }
            OpKind::MeasureCluster => {
                let p = self.geometry.cluster_stabilizer_padded(center, state.num_qubits());
                Some(state.measure(&p).expect("nontrivial, sized to state"))
            }
        };
        Event { kind, center, outcome }
    }

    /// Runs `schedule.total` steps from `state`, calling `observe(state, t)`
    /// at every sample time.
    pub fn run<R, T, F>(&self, state: &mut StabilizerTableau, schedule: &Schedule, rng: &mut R, mut observe: F) -> Vec<T>
    where
        R: Rng + ?Sized,
        F: FnMut(&StabilizerTableau, u64) -> T,
    {
        let mut out = Vec::with_capacity(schedule.sample_count() as usize);
        for t in 1..=schedule.total {
            self.step(state, rng);
            if cfg!(debug_assertions) && t % 1000 == 0 {
                state.check_invariants().expect("tableau invariants");
            }
            if schedule.is_sample_time(t) {
                out.push(observe(state, t));
            }
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for trajectory `trajectory` of sweep point `point`.
pub fn trajectory_rng(seed: u64, point: u64, trajectory: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ point) ^ trajectory);
    ChaCha8Rng::seed_from_u64(key)
}

/// Stable key of a sweep point, independent of its position in any grid.
pub fn point_key(l: usize, mix: &OperationMix) -> u64 {
    [mix.pu, mix.pmz, mix.pms]
        .iter()
        .fold(splitmix64(l as u64), |h, p| splitmix64(h ^ p.to_bits()))
}

/// Appends `n_anc` ancillas in the `Z` basis and applies `steps` unconstrained
/// five-qubit Cliffords on uniformly random five-qubit subsets of the whole
/// register.
pub fn scramble_with_ancillas<R: Rng + ?Sized>(
    state: &StabilizerTableau,
    n_anc: usize,
    steps: u64,
    rng: &mut R,
) -> StabilizerTableau {
    let mut out = state.extend(n_anc, Basis::Z);
    let n = out.num_qubits();
    for _ in 0..steps {
        let sites = index::sample(rng, n, 5).into_vec();
        let c = sample_clifford(5, rng);
        out.apply_clifford_unchecked(&c, &sites);
    }
    out
}
