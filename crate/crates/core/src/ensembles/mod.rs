//! Unitary ensembles: unconstrained, checkerboard-symmetric (SPT),
//! diagonal-subsystem-symmetric (SSPT) five-qubit Cliffords, and the
//! Z-preserving three-qubit line / four-qubit square ensembles.
//!
//! Stencil qubit order for five-qubit ensembles is `(center, N, E, S, W)`.
//! A global symmetry generator restricted to a stencil is the `Z` product over
//! the stencil qubits it touches:
//!
//! * checkerboard sublattices: the center sits alone on its sublattice and the
//!   four arms share the other one, giving `{Z_c, Z_N Z_E Z_S Z_W}`;
//! * diagonal lines `x - y = const` and `x + y = const`: the center is alone
//!   on both of its lines, while `N,W` / `E,S` share the lines
//!   `x - y = d -/+ 1` and `N,E` / `S,W` share `x + y = s +/- 1`, giving
//!   `{Z_c, Z_N Z_W, Z_E Z_S, Z_N Z_E, Z_S Z_W}`;
//! * for a horizontal three-qubit line or a 2x2 square every qubit is alone on
//!   at least one of its two diagonals, so each `Z_i` is conserved.

mod clifford;
mod fixing;
mod table_io;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clifford::{
    clifford_from_index, count_cliffords, omega, pauli_label, sample_clifford, swap_blocks,
    symplectic_group_order, SymplecticClifford, MAX_QUBITS,
};
pub use fixing::FixingSubgroup;
pub use table_io::{
    decode_table, encode_table, load_table, store_table, table_file_size, EnsembleTable, FORMAT_VERSION,
    HEADER_LEN, TRAILER_LEN,
};

use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("unsupported qubit count {0}")]
    UnsupportedQubits(usize),
    #[error("Clifford on {k} qubits needs {} images, got {len}", 2 * k)]
    BadCliffordShape { k: usize, len: usize },
    #[error("matrix is not symplectic")]
    NotSymplectic,
    #[error("index {index} out of range for {k}-qubit Cliffords")]
    IndexOutOfRange { k: usize, index: u128 },
    #[error("symmetry generators must be {k}-qubit Paulis")]
    GeneratorLength { k: usize },
    #[error("symmetry generators do not commute")]
    NonCommutingGenerators,
    #[error("unsupported ensemble {kind:?} on {k} qubits")]
    UnsupportedEnsemble { kind: EnsembleKind, k: usize },
    #[error("no symmetric element found in {0} attempts")]
    TooSparse(u64),
    #[error("ensemble table is empty")]
    EmptyTable,
    #[error("ensemble file: {0}")]
    Format(String),
    #[error("ensemble file checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Unconstrained,
    SptCheckerboard,
    SsptDiagonal,
    ZPreserving,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::Unconstrained => "unconstrained",
            EnsembleKind::SptCheckerboard => "spt-checkerboard",
            EnsembleKind::SsptDiagonal => "sspt-diagonal",
            EnsembleKind::ZPreserving => "z-preserving",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            EnsembleKind::Unconstrained,
            EnsembleKind::SptCheckerboard,
            EnsembleKind::SsptDiagonal,
            EnsembleKind::ZPreserving,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    /// Stencil size used by the circuit for this ensemble.
    pub fn default_qubits(self) -> usize {
        match self {
            EnsembleKind::ZPreserving => 4,
            _ => 5,
        }
    }
}

/// Packs a k-qubit Pauli into the `u32` layout used by [`SymplecticClifford`].
pub fn pack(p: &PauliString) -> u32 {
    let k = p.num_qubits();
    assert!(k <= MAX_QUBITS);
    (0..k).fold(0u32, |acc, q| {
        let (x, z) = match p.get(q) {
            Pauli::I => (0, 0),
            Pauli::X => (1, 0),
            Pauli::Y => (1, 1),
            Pauli::Z => (0, 1),
        };
        acc | (x << q) | (z << (k + q))
    })
}

fn z_product(k: usize, qubits: &[usize]) -> PauliString {
    let factors: Vec<_> = qubits.iter().map(|&q| (q, Pauli::Z)).collect();
    PauliString::from_sparse(k, &factors).expect("qubits within stencil")
}

/// Symmetry generators restricted to the unitary stencil.
pub fn restricted_symmetry_generators(
    kind: EnsembleKind,
    k: usize,
) -> Result<Vec<PauliString>, EnsembleError> {
    const C: usize = 0;
    const N: usize = 1;
    const E: usize = 2;
    const S: usize = 3;
    const W: usize = 4;
    match (kind, k) {
        (EnsembleKind::SptCheckerboard, 5) => Ok(vec![z_product(5, &[C]), z_product(5, &[N, E, S, W])]),
        (EnsembleKind::SsptDiagonal, 5) => Ok(vec![
            z_product(5, &[C]),
            z_product(5, &[N, W]),
            z_product(5, &[E, S]),
            z_product(5, &[N, E]),
            z_product(5, &[S, W]),
        ]),
        (EnsembleKind::ZPreserving, 3 | 4) => Ok((0..k).map(|q| z_product(k, &[q])).collect()),
        _ => Err(EnsembleError::UnsupportedEnsemble { kind, k }),
    }
}

/// True iff `c` maps every generator bitstring to itself.
pub fn respects_symmetry(c: &SymplecticClifford, gens: &[PauliString]) -> Result<bool, EnsembleError> {
    let k = c.num_qubits();
    if gens.iter().any(|g| g.num_qubits() != k) {
        return Err(EnsembleError::GeneratorLength { k });
    }
    Ok(gens.iter().all(|g| {
        let v = pack(g);
        c.apply(v) == v
    }))
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub k: usize,
    pub symmetry_generators: Vec<PauliString>,
    pub table: Option<Arc<Vec<SymplecticClifford>>>,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, k: usize) -> Result<Self, EnsembleError> {
        let symmetry_generators = match kind {
            EnsembleKind::Unconstrained => {
                if !(1..=MAX_QUBITS).contains(&k) {
                    return Err(EnsembleError::UnsupportedQubits(k));
                }
                Vec::new()
            }
            _ => restricted_symmetry_generators(kind, k)?,
        };
        Ok(Self {
            kind,
            k,
            symmetry_generators,
            table: None,
        })
    }

    pub fn with_table(mut self, table: Vec<SymplecticClifford>) -> Result<Self, EnsembleError> {
        if table.is_empty() {
            return Err(EnsembleError::EmptyTable);
        }
        if table.iter().any(|c| c.num_qubits() != self.k) {
            return Err(EnsembleError::UnsupportedQubits(table[0].num_qubits()));
        }
        self.table = Some(Arc::new(table));
        Ok(self)
    }

    pub fn packed_generators(&self) -> Vec<u32> {
        self.symmetry_generators.iter().map(pack).collect()
    }

    /// Uniform sampler over the ensemble.
    pub fn sampler(&self) -> Result<EnsembleSampler, EnsembleError> {
        if let Some(t) = &self.table {
            return Ok(EnsembleSampler::Table(Arc::clone(t)));
        }
        Ok(match self.kind {
            EnsembleKind::Unconstrained => EnsembleSampler::Unconstrained { k: self.k },
            _ => EnsembleSampler::Subgroup(FixingSubgroup::new(self.k, &self.packed_generators())?),
        })
    }
}

/// Draws ensemble elements during circuit evolution.
#[derive(Debug, Clone)]
pub enum EnsembleSampler {
    Unconstrained { k: usize },
    Subgroup(FixingSubgroup),
    Table(Arc<Vec<SymplecticClifford>>),
}

impl EnsembleSampler {
    pub fn num_qubits(&self) -> usize {
        match self {
            EnsembleSampler::Unconstrained { k } => *k,
            EnsembleSampler::Subgroup(g) => g.num_qubits(),
            EnsembleSampler::Table(t) => t[0].num_qubits(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymplecticClifford {
        match self {
            EnsembleSampler::Unconstrained { k } => sample_clifford(*k, rng),
            EnsembleSampler::Subgroup(g) => g.sample(rng),
            EnsembleSampler::Table(t) => t[rng.gen_range(0..t.len())].clone(),
        }
    }
}

/// Default cap on rejection-sampling attempts.
pub const DEFAULT_REJECTION_CAP: u64 = 100_000_000;

/// Rejection sampling: draw uniform k-qubit Cliffords until one respects the
/// symmetry. Returns the element and the number of attempts used.
pub fn sample_symmetric_clifford<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    rng: &mut R,
    max_attempts: u64,
) -> Result<(SymplecticClifford, u64), EnsembleError> {
    let gens = spec.packed_generators();
    for attempt in 1..=max_attempts {
        let c = sample_clifford(spec.k, rng);
        if c.fixes_all(&gens) {
            return Ok((c, attempt));
        }
    }
    Err(EnsembleError::TooSparse(max_attempts))
}

/// The complete five-qubit SSPT ensemble, sorted. Branches over the first
/// free image are enumerated independently and merged by sorting.
pub fn enumerate_sspt_table() -> Vec<SymplecticClifford> {
    let spec = EnsembleSpec::new(EnsembleKind::SsptDiagonal, 5).expect("supported");
    let group = FixingSubgroup::new(5, &spec.packed_generators()).expect("commuting");
    let mut all: Vec<SymplecticClifford> = group
        .enumerate_branches()
        .iter()
        .flat_map(|prefix| group.enumerate_from(prefix))
        .collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// All sign-agnostic k-qubit Cliffords commuting with every `Z_i`.
pub fn enumerate_z_preserving(k: usize) -> Result<Vec<SymplecticClifford>, EnsembleError> {
    let spec = EnsembleSpec::new(EnsembleKind::ZPreserving, k)?;
    Ok(FixingSubgroup::new(k, &spec.packed_generators())?.enumerate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn generator_lists() {
        let z3 = restricted_symmetry_generators(EnsembleKind::ZPreserving, 3).unwrap();
        let labels: Vec<String> = z3.iter().map(|p| p.to_string()).collect();
        assert_eq!(labels, ["ZII", "IZI", "IIZ"]);

        let spt = restricted_symmetry_generators(EnsembleKind::SptCheckerboard, 5).unwrap();
        assert_eq!(spt.len(), 2);
        assert_eq!(spt[0].support(), vec![0]);
        assert_eq!(spt[1].support(), vec![1, 2, 3, 4]);
        assert!(spt.iter().all(|p| p.support().iter().all(|&q| p.get(q) == Pauli::Z)));

        let sspt = restricted_symmetry_generators(EnsembleKind::SsptDiagonal, 5).unwrap();
        assert!(sspt.contains(&PauliString::parse("ZIIII").unwrap()));
        assert!(restricted_symmetry_generators(EnsembleKind::Unconstrained, 5).is_err());
        assert!(restricted_symmetry_generators(EnsembleKind::SsptDiagonal, 4).is_err());
        assert!(restricted_symmetry_generators(EnsembleKind::ZPreserving, 5).is_err());
    }

    #[test]
    fn respects_symmetry_examples() {
        let gens = vec![PauliString::parse("ZIIII").unwrap()];
        assert!(respects_symmetry(&SymplecticClifford::identity(5), &gens).unwrap());
        assert!(!respects_symmetry(&SymplecticClifford::hadamard_all(5), &gens).unwrap());
        assert!(respects_symmetry(&SymplecticClifford::identity(4), &gens).is_err());
    }

    #[test]
    fn sspt_contains_spt_constraints() {
        let spt = FixingSubgroup::new(5, &EnsembleSpec::new(EnsembleKind::SptCheckerboard, 5).unwrap().packed_generators()).unwrap();
        let sspt = FixingSubgroup::new(5, &EnsembleSpec::new(EnsembleKind::SsptDiagonal, 5).unwrap().packed_generators()).unwrap();
        assert_eq!(spt.fixed_dim(), 2);
        assert_eq!(sspt.fixed_dim(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spt_gens = EnsembleSpec::new(EnsembleKind::SptCheckerboard, 5).unwrap().symmetry_generators;
        for _ in 0..100 {
            let c = sspt.sample(&mut rng);
            assert!(respects_symmetry(&c, &spt_gens).unwrap());
        }
    }

    #[test]
    fn z_preserving_counts_and_generation() {
        let t3 = enumerate_z_preserving(3).unwrap();
        assert_eq!(t3.len(), 64);
        let t4 = enumerate_z_preserving(4).unwrap();
        assert_eq!(t4.len(), 1024);
        for (k, t) in [(3usize, &t3), (4, &t4)] {
            let gens = restricted_symmetry_generators(EnsembleKind::ZPreserving, k).unwrap();
            assert!(t.iter().all(|c| respects_symmetry(c, &gens).unwrap() && c.is_symplectic()));
            // closure of the phase and controlled-Z generators
            let mut gates: Vec<SymplecticClifford> = (0..k).map(|q| SymplecticClifford::phase(k, q)).collect();
            for a in 0..k {
                for b in a + 1..k {
                    gates.push(SymplecticClifford::cz(k, a, b));
                }
            }
            let mut group: HashSet<SymplecticClifford> = HashSet::from([SymplecticClifford::identity(k)]);
            let mut frontier: Vec<SymplecticClifford> = group.iter().cloned().collect();
            while let Some(g) = frontier.pop() {
                for h in &gates {
                    let p = h.compose(&g);
                    if group.insert(p.clone()) {
                        frontier.push(p);
                    }
                }
            }
            let table: HashSet<_> = t.iter().cloned().collect();
            assert_eq!(group, table);
        }
    }

    #[test]
    fn rejection_matches_enumeration_at_k2() {
        let gens = vec![PauliString::parse("ZZ").unwrap()];
        let spec = EnsembleSpec {
            kind: EnsembleKind::SptCheckerboard,
            k: 2,
            symmetry_generators: gens.clone(),
            table: None,
        };
        let brute: HashSet<SymplecticClifford> = (0..720)
            .map(|i| clifford_from_index(2, i).unwrap())
            .filter(|c| respects_symmetry(c, &gens).unwrap())
            .collect();
        assert_eq!(brute.len(), 48);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = 48 * 150;
        let mut counts: HashMap<SymplecticClifford, usize> = HashMap::new();
        let mut attempts = 0;
        for _ in 0..draws {
            let (c, a) = sample_symmetric_clifford(&spec, &mut rng, DEFAULT_REJECTION_CAP).unwrap();
            attempts += a;
            *counts.entry(c).or_default() += 1;
        }
        assert_eq!(counts.keys().cloned().collect::<HashSet<_>>(), brute);
        let expected = draws as f64 / 48.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 82.7, "chi2 = {chi2}");
        // acceptance 48/720
        let rate = draws as f64 / attempts as f64;
        assert!((rate - 48.0 / 720.0).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn rejection_cap_reports_too_sparse() {
        let spec = EnsembleSpec::new(EnsembleKind::SsptDiagonal, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_symmetric_clifford(&spec, &mut rng, 10),
            Err(EnsembleError::TooSparse(10))
        ));
    }

    #[test]
    fn samplers_respect_their_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in [EnsembleKind::SptCheckerboard, EnsembleKind::SsptDiagonal] {
            let spec = EnsembleSpec::new(kind, 5).unwrap();
            let s = spec.sampler().unwrap();
            for _ in 0..200 {
                let c = s.sample(&mut rng);
                assert!(c.is_symplectic());
                assert!(respects_symmetry(&c, &spec.symmetry_generators).unwrap());
            }
        }
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in [
            EnsembleKind::Unconstrained,
            EnsembleKind::SptCheckerboard,
            EnsembleKind::SsptDiagonal,
            EnsembleKind::ZPreserving,
        ] {
            assert_eq!(EnsembleKind::parse(k.name()), Some(k));
        }
        assert_eq!(EnsembleKind::parse("nope"), None);
    }
}
