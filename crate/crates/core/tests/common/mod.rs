//! Independent oracles shared by the integration suites and the acceptance
//! target.
#![allow(dead_code)]

use std::collections::HashSet;

use mipt_core::diagnostics::{GeometryTag, RegionSet};
use mipt_core::ensembles::{sample_clifford, SymplecticClifford};
use mipt_core::fss::DataPoint;
use mipt_core::gf2::BitMatrix;
use mipt_core::lattice::LatticeGeometry;
use mipt_core::pauli::{Basis, OutcomeKind, Pauli, PauliString, StabilizerTableau};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// ---- dense density matrices ----

type C = Complex64;

fn single(p: Pauli) -> DMatrix<C> {
    let (o, l, i) = (C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 1.0));
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// Qubit 0 is the most significant tensor factor.
pub fn dense(p: &PauliString) -> DMatrix<C> {
    let mut m = DMatrix::from_element(1, 1, C::new(1.0, 0.0));
    for q in 0..p.num_qubits() {
        m = m.kronecker(&single(p.get(q)));
    }
    m
}

pub fn density(state: &StabilizerTableau) -> DMatrix<C> {
    let n = state.num_qubits();
    let d = 1usize << n;
    let id = DMatrix::<C>::identity(d, d);
    let mut rho = id.clone();
    for g in state.generators() {
        rho = rho * (&id + dense(&g)) * C::new(0.5, 0.0);
    }
    rho
}

/// Reduced density matrix on `region` (sorted) by explicit index sums.
pub fn reduce(rho: &DMatrix<C>, n: usize, region: &[usize]) -> DMatrix<C> {
    let rest: Vec<usize> = (0..n).filter(|q| !region.contains(q)).collect();
    let bit = |q: usize| 1usize << (n - 1 - q);
    let compose = |a: usize, b: usize| -> usize {
        let mut idx = 0;
        for (j, &q) in region.iter().enumerate() {
            if (a >> (region.len() - 1 - j)) & 1 == 1 {
                idx |= bit(q);
            }
        }
        for (j, &q) in rest.iter().enumerate() {
            if (b >> (rest.len() - 1 - j)) & 1 == 1 {
                idx |= bit(q);
            }
        }
        idx
    };
    let da = 1usize << region.len();
    let db = 1usize << rest.len();
    DMatrix::from_fn(da, da, |i, j| (0..db).map(|b| rho[(compose(i, b), compose(j, b))]).sum())
}

pub fn von_neumann_bits(rho: &DMatrix<C>) -> f64 {
    // singular values of a PSD matrix are its eigenvalues; the Hermitian
    // eigensolver stalls on some rank-one inputs
    rho.clone()
        .singular_values()
        .iter()
        .filter(|&&l| l > 1e-10)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Random local Cliffords with occasional Z measurements.
pub fn random_state(n: usize, rng: &mut ChaCha8Rng, layers: usize, p_measure: f64) -> StabilizerTableau {
    let mut s = StabilizerTableau::product_state(n, Basis::Z).unwrap();
    for _ in 0..layers * n {
        let k = rng.gen_range(1..=n.min(3));
        let support: Vec<usize> = sample(rng, n, k).into_vec();
        s.apply_clifford(&sample_clifford(k, rng), &support).unwrap();
        if rng.gen_bool(p_measure) {
            s.measure_z(rng.gen_range(0..n)).unwrap();
        }
    }
    s
}

/// Runs `states` trials on 2..=8 qubits with three random regions each and
/// returns the first disagreement between the tableau and the dense entropy.
pub fn entropy_oracle_sweep(seed: u64, states: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for trial in 0..states {
        let n = 2 + trial % 7;
        let state = random_state(n, &mut rng, 3, 0.2);
        let rho = density(&state);
        let trace: C = rho.trace();
        if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 || ((&rho * &rho) - &rho).norm() > 1e-8 {
            return Err(format!("trial {trial}: not a pure projector"));
        }
        for _ in 0..3 {
            let m = rng.gen_range(1..n);
            let mut region = sample(&mut rng, n, m).into_vec();
            region.sort_unstable();
            let exact = von_neumann_bits(&reduce(&rho, n, &region));
            let fast = state.entanglement_entropy(&region) as f64;
            if (exact - fast).abs() > 1e-8 {
                return Err(format!("n={n} region={region:?}: {exact} vs {fast}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

// ---- measurement algebra ----

pub const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

pub fn pauli(n: usize, codes: &[u8]) -> PauliString {
    let mut p = PauliString::identity(n);
    for (q, &c) in codes.iter().take(n).enumerate() {
        p.set(q, PAULIS[c as usize]).unwrap();
    }
    p
}

fn stacked(rows: impl IntoIterator<Item = PauliString>, n: usize) -> BitMatrix {
    let mut m = BitMatrix::zeros(0, 2 * n);
    for r in rows {
        m.push_row(&r.to_bits()).unwrap();
    }
    m
}

pub fn in_group(s: &StabilizerTableau, p: &PauliString) -> bool {
    let n = s.num_qubits();
    stacked(s.generators().into_iter().chain([p.clone()]), n).rank() == n
}

pub fn same_group(a: &StabilizerTableau, b: &StabilizerTableau) -> bool {
    let n = a.num_qubits();
    stacked(a.generators().into_iter().chain(b.generators()), n).rank() == n
}

/// Generators pairwise commute and have full rank.
fn valid(s: &StabilizerTableau) -> bool {
    let g = s.generators();
    let n = s.num_qubits();
    g.len() == n
        && stacked(g.iter().cloned(), n).rank() == n
        && g.iter().enumerate().all(|(i, a)| g[i + 1..].iter().all(|b| a.commutes_with(b)))
}

/// One measurement-algebra case: measure `p` (then `q`) on the state grown
/// from `seed`. An identity `p` is vacuous.
pub fn measurement_case(n: usize, seed: u64, pc: &[u8], qc: &[u8]) -> Result<(), String> {
    let p = pauli(n, pc);
    if p.is_identity() {
        return Ok(());
    }
    let before = random_state(n, &mut ChaCha8Rng::seed_from_u64(seed), 2, 0.3);
    let mut s = before.clone();
    let anticommutes = before.generators().iter().any(|g| !g.commutes_with(&p));
    let outcome = s.measure(&p).map_err(|e| e.to_string())?;
    let fail = |what: &str| Err(format!("n={n} seed={seed} p={pc:?}: {what}"));

    if (outcome == OutcomeKind::Random) != anticommutes {
        return fail("outcome kind disagrees with commutation");
    }
    if (outcome == OutcomeKind::Deterministic) != in_group(&before, &p) {
        return fail("deterministic outcome for an operator outside the group");
    }
    if !valid(&s) || s.check_invariants().is_err() {
        return fail("post-measurement generators are not an independent Abelian set");
    }
    if !in_group(&s, &p) {
        return fail("measured operator does not stabilise the post-state");
    }
    if outcome == OutcomeKind::Deterministic && s != before {
        return fail("deterministic outcome changed the state");
    }
    let again = s.clone();
    if s.measure(&p).map_err(|e| e.to_string())? != OutcomeKind::Deterministic || s != again {
        return fail("repeated measurement is not idempotent");
    }
    let q = pauli(n, qc);
    if !q.is_identity() && q.commutes_with(&p) {
        let mut pq = before.clone();
        pq.measure(&p).unwrap();
        pq.measure(&q).unwrap();
        let mut qp = before.clone();
        qp.measure(&q).unwrap();
        qp.measure(&p).unwrap();
        if !same_group(&pq, &qp) {
            return fail("commuting measurements do not commute");
        }
    }
    Ok(())
}

// ---- Clifford closure ----

/// Order of the group generated by `H_i`, `S_i` and `CNOT_ij`, by breadth-first
/// closure.
pub fn closure_order(k: usize) -> usize {
    let mut gens = Vec::new();
    for q in 0..k {
        gens.push(SymplecticClifford::hadamard(k, q));
        gens.push(SymplecticClifford::phase(k, q));
        for t in 0..k {
            if t != q {
                gens.push(SymplecticClifford::cnot(k, q, t));
            }
        }
    }
    let id = SymplecticClifford::identity(k);
    let mut seen: HashSet<Vec<u32>> = HashSet::from([id.images().to_vec()]);
    let mut frontier = vec![id];
    while let Some(c) = frontier.pop() {
        for g in &gens {
            let next = g.compose(&c);
            if seen.insert(next.images().to_vec()) {
                frontier.push(next);
            }
        }
    }
    seen.len()
}

// ---- toric cluster state ----

const GOLDEN: &str = include_str!("../golden/cluster_state.txt");

pub fn golden() -> Vec<(usize, GeometryTag, i64)> {
    GOLDEN
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            (f[0].parse().unwrap(), GeometryTag::parse(f[1]).unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

pub fn golden_value(l: usize, tag: GeometryTag) -> i64 {
    golden()
        .into_iter()
        .find(|&(gl, gt, _)| gl == l && gt == tag)
        .expect("golden row")
        .2
}

/// All cluster stabilizers measured on `|0...0>`.
pub fn cluster(geom: &LatticeGeometry) -> StabilizerTableau {
    let n = geom.num_sites();
    let mut s = StabilizerTableau::product_state(n, Basis::Z).unwrap();
    for i in 0..n {
        s.measure(&geom.cluster_stabilizer(geom.coords(i))).unwrap();
    }
    s
}

fn torus_neighbours(l: usize, i: usize) -> [usize; 4] {
    let (x, y) = (i % l, i / l);
    [
        ((x + 1) % l) + y * l,
        ((x + l - 1) % l) + y * l,
        x + ((y + 1) % l) * l,
        x + ((y + l - 1) % l) * l,
    ]
}

pub fn rank(mut rows: Vec<Vec<bool>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c]) else { continue };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && rows[i][c] {
                let pivot = rows[r].clone();
                for (a, b) in rows[i].iter_mut().zip(pivot) {
                    *a ^= b;
                }
            }
        }
        r += 1;
    }
    r
}

/// Graph-state entropy of `region`: GF(2) rank of the adjacency block
/// `Gamma[A, not A]`.
pub fn cut_rank(l: usize, region: &[usize]) -> i64 {
    let n = l * l;
    let outside: Vec<usize> = (0..n).filter(|i| !region.contains(i)).collect();
    let rows = region
        .iter()
        .map(|&a| {
            let nb = torus_neighbours(l, a);
            outside.iter().map(|b| nb.contains(b)).collect()
        })
        .collect();
    rank(rows) as i64
}

pub fn oracle_seven(l: usize, r: &RegionSet) -> i64 {
    let s = |parts: &[&[usize]]| -> i64 {
        let v: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        cut_rank(l, &v)
    };
    let (a, b, c) = (&r.a[..], &r.b[..], &r.c[..]);
    s(&[a, b]) + s(&[b, c]) + s(&[a, c]) - s(&[a]) - s(&[b]) - s(&[c]) - s(&[a, b, c])
}

// ---- planted scaling collapse ----

pub const P_C: f64 = 0.5;
pub const NU: f64 = 0.85;

pub fn scaling_function(x: f64) -> f64 {
    2.0 / (1.0 + (0.8 * x).exp()) + 0.1 * (0.5 * x).sin()
}

/// `f((p - P_C) L^(1/NU))` plus Gaussian noise on four sizes.
pub fn planted(seed: u64, noise: f64) -> Vec<DataPoint<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let mut out = Vec::new();
    for l in [8usize, 12, 16, 24] {
        for i in 0..11 {
            let p = 0.40 + 0.02 * i as f64;
            let x = (p - P_C) * (l as f64).powf(1.0 / NU);
            out.push(DataPoint {
                l,
                p,
                delta: scaling_function(x) + normal.sample(&mut rng),
                sigma: noise,
                count: 2000,
            });
        }
    }
    out
}
