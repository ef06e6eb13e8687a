//! The subgroup of sign-agnostic Cliffords fixing a set of commuting Paulis.
//!
//! A Clifford respects a Pauli symmetry group exactly when it fixes every
//! element of an isotropic subspace `W` pointwise. Elements are built one
//! basis vector at a time over a basis adapted to `W` (a basis of `W` first,
//! completed by standard vectors). Each new image must have the prescribed
//! symplectic products with the images already chosen and stay linearly
//! independent of them; those constraints are an affine subspace, so every
//! candidate set is enumerated directly. Every valid partial assignment
//! extends to the same number of group elements, so picking uniformly at each
//! step samples the subgroup uniformly, and a depth-first walk enumerates it.

use rand::Rng;

use super::clifford::{omega, SymplecticClifford, MAX_QUBITS};
use super::EnsembleError;

#[derive(Debug, Clone)]
pub struct FixingSubgroup {
    k: usize,
    /// Adapted basis: the first `fixed_dim` entries span `W`.
    basis: Vec<u32>,
    fixed_dim: usize,
    /// `coords[j]`: standard vector `e_j` expanded over `basis`.
    coords: Vec<u32>,
}

/// Incremental row-echelon span of packed vectors.
#[derive(Clone, Default)]
struct Span {
    rows: Vec<u32>,
}

impl Span {
    fn reduce(&self, mut v: u32) -> u32 {
        for &r in &self.rows {
            let lead = 31 - r.leading_zeros();
            if (v >> lead) & 1 == 1 {
                v ^= r;
            }
        }
        v
    }

    fn contains(&self, v: u32) -> bool {
        self.reduce(v) == 0
    }

    /// Inserts `v`; returns false if it was already in the span.
    fn insert(&mut self, v: u32) -> bool {
        let r = self.reduce(v);
        if r == 0 {
            return false;
        }
        let lead = 31 - r.leading_zeros();
        for row in &mut self.rows {
            if (*row >> lead) & 1 == 1 {
                *row ^= r;
            }
        }
        let pos = self
            .rows
            .iter()
            .position(|&x| 31 - x.leading_zeros() < lead)
            .unwrap_or(self.rows.len());
        self.rows.insert(pos, r);
        true
    }
}

/// All `v` with `parity(duals[i] & v) = rhs[i]` for every `i`, `v < 2^bits`.
fn affine_solutions(duals: &[u32], rhs: &[bool], bits: usize) -> Vec<u32> {
    // Gaussian elimination on augmented rows (bit `bits` holds the rhs).
    let mut rows: Vec<u32> = duals
        .iter()
        .zip(rhs)
        .map(|(&d, &r)| d | ((r as u32) << bits))
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..bits {
        let Some(p) = (rank..rows.len()).find(|&i| (rows[i] >> col) & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        for i in 0..rows.len() {
            if i != rank && (rows[i] >> col) & 1 == 1 {
                rows[i] ^= rows[rank];
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if rows[rank..].iter().any(|&r| r != 0) {
        return Vec::new();
    }
    let free: Vec<usize> = (0..bits).filter(|c| !pivots.contains(c)).collect();
    let mut particular = 0u32;
    for (i, &c) in pivots.iter().enumerate() {
        if (rows[i] >> bits) & 1 == 1 {
            particular |= 1 << c;
        }
    }
    // null vector for each free column
    let nulls: Vec<u32> = free
        .iter()
        .map(|&f| {
            let mut v = 1u32 << f;
            for (i, &c) in pivots.iter().enumerate() {
                if (rows[i] >> f) & 1 == 1 {
                    v |= 1 << c;
                }
            }
            v
        })
        .collect();
    let mut out = Vec::with_capacity(1 << nulls.len());
    for mask in 0u32..(1u32 << nulls.len()) {
        let mut v = particular;
        let mut m = mask;
        while m != 0 {
            v ^= nulls[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        out.push(v);
    }
    out
}

impl FixingSubgroup {
    /// `generators` are packed k-qubit Paulis; they must pairwise commute.
    pub fn new(k: usize, generators: &[u32]) -> Result<Self, EnsembleError> {
        if k == 0 || k > MAX_QUBITS {
            return Err(EnsembleError::UnsupportedQubits(k));
        }
        for (i, &a) in generators.iter().enumerate() {
            if a >> (2 * k) != 0 {
                return Err(EnsembleError::GeneratorLength { k });
            }
            if generators[i + 1..].iter().any(|&b| omega(a, b, k)) {
                return Err(EnsembleError::NonCommutingGenerators);
            }
        }
        let mut span = Span::default();
        let mut basis = Vec::with_capacity(2 * k);
        for &g in generators {
            if span.insert(g) {
                basis.push(g);
            }
        }
        let fixed_dim = basis.len();
        // Z block first, then X block, keeps the enumeration order natural.
        for b in (k..2 * k).chain(0..k) {
            if span.insert(1u32 << b) {
                basis.push(1u32 << b);
            }
        }
        debug_assert_eq!(basis.len(), 2 * k);
        let coords = (0..2 * k)
            .map(|j| expand_over(&basis, 1u32 << j, 2 * k))
            .collect();
        Ok(Self {
            k,
            basis,
            fixed_dim,
            coords,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.k
    }

    /// Dimension of the fixed subspace `W`.
    pub fn fixed_dim(&self) -> usize {
        self.fixed_dim
    }

    /// Order of the pointwise stabilizer of `W`:
    /// `|Sp(2(k-m), 2)| * 2^(2m(k-m) + m(m+1)/2)`.
    pub fn order(&self) -> u128 {
        let (k, m) = (self.k, self.fixed_dim);
        let inner = super::clifford::symplectic_group_order(k - m).unwrap_or(0);
        inner << (2 * m * (k - m) + m * (m + 1) / 2)
    }

    /// Valid images for basis position `t` given images `assigned[..t]`.
    fn candidates(&self, assigned: &[u32], span: &Span) -> Vec<u32> {
        let t = assigned.len();
        let target = self.basis[t];
        let duals: Vec<u32> = assigned
            .iter()
            .map(|&a| super::clifford::swap_blocks(a, self.k))
            .collect();
        let rhs: Vec<bool> = self.basis[..t]
            .iter()
            .map(|&b| omega(target, b, self.k))
            .collect();
        let mut c = affine_solutions(&duals, &rhs, 2 * self.k);
        c.retain(|&v| !span.contains(v));
        c
    }

    fn assemble(&self, assigned: &[u32]) -> SymplecticClifford {
        let images = self
            .coords
            .iter()
            .map(|&c| {
                let mut v = 0;
                let mut m = c;
                while m != 0 {
                    v ^= assigned[m.trailing_zeros() as usize];
                    m &= m - 1;
                }
                v
            })
            .collect();
        SymplecticClifford::from_images_unchecked(self.k, images)
    }

    fn seed(&self) -> (Vec<u32>, Span) {
        let assigned: Vec<u32> = self.basis[..self.fixed_dim].to_vec();
        let mut span = Span::default();
        for &a in &assigned {
            span.insert(a);
        }
        (assigned, span)
    }

    /// Uniform element of the subgroup.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymplecticClifford {
        let (mut assigned, mut span) = self.seed();
        while assigned.len() < 2 * self.k {
            let c = self.candidates(&assigned, &span);
            let v = c[rng.gen_range(0..c.len())];
            span.insert(v);
            assigned.push(v);
        }
        self.assemble(&assigned)
    }

    /// Every element, sorted.
    pub fn enumerate(&self) -> Vec<SymplecticClifford> {
        let mut out = Vec::new();
        let (assigned, span) = self.seed();
        self.walk(assigned, span, &mut out);
        out.sort_unstable();
        out
    }

    /// Enumerates the subtree under each first free choice separately; the
    /// concatenation in candidate order equals a full walk.
    pub fn enumerate_branches(&self) -> Vec<Vec<u32>> {
        let (assigned, span) = self.seed();
        if assigned.len() == 2 * self.k {
            return vec![assigned];
        }
        self.candidates(&assigned, &span)
            .into_iter()
            .map(|v| {
                let mut a = assigned.clone();
                a.push(v);
                a
            })
            .collect()
    }

    /// Enumerates all completions of a partial assignment from
    /// [`enumerate_branches`](Self::enumerate_branches).
    pub fn enumerate_from(&self, prefix: &[u32]) -> Vec<SymplecticClifford> {
        let mut span = Span::default();
        for &a in prefix {
            span.insert(a);
        }
        let mut out = Vec::new();
        self.walk(prefix.to_vec(), span, &mut out);
        out
    }

    fn walk(&self, assigned: Vec<u32>, span: Span, out: &mut Vec<SymplecticClifford>) {
        if assigned.len() == 2 * self.k {
            out.push(self.assemble(&assigned));
            return;
        }
        for v in self.candidates(&assigned, &span) {
            let mut a = assigned.clone();
            a.push(v);
            let mut s = span.clone();
            s.insert(v);
            self.walk(a, s, out);
        }
    }
}

/// Coordinates of `v` over the (independent, spanning) `basis`.
fn expand_over(basis: &[u32], v: u32, bits: usize) -> u32 {
    // Solve sum_i c_i basis[i] = v: rows are the bit positions.
    let n = basis.len();
    let duals: Vec<u32> = (0..bits)
        .map(|r| {
            (0..n).fold(0u32, |acc, i| acc | (((basis[i] >> r) & 1) << i))
        })
        .collect();
    let rhs: Vec<bool> = (0..bits).map(|r| (v >> r) & 1 == 1).collect();
    let sol = affine_solutions(&duals, &rhs, n);
    debug_assert_eq!(sol.len(), 1);
    sol[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::clifford::{clifford_from_index, symplectic_group_order};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn z(k: usize, qs: &[usize]) -> u32 {
        qs.iter().fold(0, |acc, &q| acc | (1u32 << (k + q)))
    }

    fn brute_force(k: usize, gens: &[u32]) -> HashSet<SymplecticClifford> {
        (0..symplectic_group_order(k).unwrap())
            .map(|i| clifford_from_index(k, i).unwrap())
            .filter(|c| c.fixes_all(gens))
            .collect()
    }

    #[test]
    fn affine_solutions_basic() {
        // x0 + x1 = 1 over 2 bits
        let s = affine_solutions(&[0b11], &[true], 2);
        let set: HashSet<_> = s.into_iter().collect();
        assert_eq!(set, HashSet::from([0b01, 0b10]));
        assert!(affine_solutions(&[0b01, 0b01], &[true, false], 2).is_empty());
    }

    #[test]
    fn unconstrained_enumeration_is_whole_group() {
        for k in 1..=2 {
            let g = FixingSubgroup::new(k, &[]).unwrap();
            let all: HashSet<_> = g.enumerate().into_iter().collect();
            assert_eq!(all.len() as u128, symplectic_group_order(k).unwrap());
            assert_eq!(g.order(), symplectic_group_order(k).unwrap());
        }
    }

    #[test]
    fn enumeration_matches_brute_force_filter() {
        let cases: Vec<(usize, Vec<u32>)> = vec![
            (2, vec![z(2, &[0, 1])]),
            (2, vec![z(2, &[0]), z(2, &[1])]),
            (3, vec![z(3, &[0]), z(3, &[1, 2])]),
            (3, vec![z(3, &[0, 1, 2])]),
        ];
        for (k, gens) in cases {
            let g = FixingSubgroup::new(k, &gens).unwrap();
            let enumerated: HashSet<_> = g.enumerate().into_iter().collect();
            let brute = brute_force(k, &gens);
            assert_eq!(enumerated, brute, "k={k} gens={gens:?}");
            assert_eq!(g.order(), brute.len() as u128);
        }
    }

    #[test]
    fn branches_partition_the_walk() {
        let g = FixingSubgroup::new(3, &[z(3, &[0])]).unwrap();
        let mut joined: Vec<_> = g
            .enumerate_branches()
            .iter()
            .flat_map(|p| g.enumerate_from(p))
            .collect();
        joined.sort_unstable();
        assert_eq!(joined, g.enumerate());
    }

    #[test]
    fn sampling_is_uniform_at_k2() {
        let gens = [z(2, &[0, 1])];
        let g = FixingSubgroup::new(2, &gens).unwrap();
        let elements = g.enumerate();
        assert_eq!(elements.len(), 48);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 48 * 200;
        let mut counts: HashMap<SymplecticClifford, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(g.sample(&mut rng)).or_default() += 1;
        }
        assert_eq!(counts.len(), 48);
        let expected = draws as f64 / 48.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 47 dof, p = 0.001 critical value is about 82.7
        assert!(chi2 < 82.7, "chi2 = {chi2}");
    }

    #[test]
    fn rejects_noncommuting_generators() {
        let x0 = 1u32;
        let z0 = 1u32 << 2;
        assert!(matches!(
            FixingSubgroup::new(2, &[x0, z0]),
            Err(EnsembleError::NonCommutingGenerators)
        ));
    }
}
