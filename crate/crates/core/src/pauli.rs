//! Phase-agnostic Pauli strings and stabilizer tableaux.
//!
//! A Pauli on `n` qubits is a pair of bit rows (X part, Z part); `Y` is both
//! bits set. Signs are never tracked: every operation here acts on the
//! stabilizer group modulo phases, which is all the entanglement quantities
//! depend on.

use std::fmt;

use thiserror::Error;

use crate::gf2::{rank_words, words_for, BitMatrix, BitVec};
use crate::ensembles::SymplecticClifford;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StabilizerError {
    #[error("a stabilizer state needs at least one qubit")]
    Empty,
    #[error("qubit count mismatch: state has {state}, operator has {op}")]
    QubitMismatch { state: usize, op: usize },
    #[error("cannot measure the identity")]
    IdentityMeasurement,
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("support has {got} qubits but the Clifford acts on {expected}")]
    SupportSize { expected: usize, got: usize },
    #[error("duplicate qubit {0} in support")]
    DuplicateSupport(usize),
    #[error("generators have rank {rank}, expected {n}")]
    RankDeficient { rank: usize, n: usize },
    #[error("generators {0} and {1} anticommute")]
    NotAbelian(usize, usize),
    #[error("invalid Pauli character {0:?}")]
    BadChar(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    Deterministic,
    Random,
}

/// An `n`-qubit Pauli operator modulo phase.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        Self {
            n,
            x: vec![0; w],
            z: vec![0; w],
        }
    }

    /// Builds a Pauli from `(qubit, factor)` pairs; later entries overwrite.
    pub fn from_sparse(n: usize, factors: &[(usize, Pauli)]) -> Result<Self, StabilizerError> {
        let mut p = Self::identity(n);
        for &(q, f) in factors {
            p.set(q, f)?;
        }
        Ok(p)
    }

    pub fn single(n: usize, q: usize, f: Pauli) -> Result<Self, StabilizerError> {
        Self::from_sparse(n, &[(q, f)])
    }

    /// Parses `"XIZY"`, qubit 0 first.
    pub fn parse(s: &str) -> Result<Self, StabilizerError> {
        let n = s.chars().count();
        let mut p = Self::identity(n);
        for (q, c) in s.chars().enumerate() {
            let f = match c {
                'I' | '_' | '.' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => return Err(StabilizerError::BadChar(other)),
            };
            p.set(q, f)?;
        }
        Ok(p)
    }

    /// Reads the X-block/Z-block bitstring layout.
    pub fn from_bits(bits: &BitVec) -> Result<Self, StabilizerError> {
        let n = bits.len() / 2;
        if bits.len() % 2 != 0 {
            return Err(StabilizerError::QubitMismatch {
                state: n,
                op: bits.len(),
            });
        }
        let mut p = Self::identity(n);
        for q in 0..n {
            p.set(q, Pauli::from_bits(bits.get(q), bits.get(n + q)))?;
        }
        Ok(p)
    }

    pub fn to_bits(&self) -> BitVec {
        let mut b = BitVec::zeros(2 * self.n);
        for q in 0..self.n {
            let (x, z) = self.get(q).bits();
            b.set(q, x);
            b.set(self.n + q, z);
        }
        b
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(bit(&self.x, q), bit(&self.z, q))
    }

    pub fn set(&mut self, q: usize, f: Pauli) -> Result<(), StabilizerError> {
        if q >= self.n {
            return Err(StabilizerError::IndexOutOfRange { index: q, n: self.n });
        }
        let (x, z) = f.bits();
        set_bit(&mut self.x, q, x);
        set_bit(&mut self.z, q, z);
        Ok(())
    }

    /// Number of qubits carrying a non-identity factor.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    /// Qubits with a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        !anticommute_words(&self.x, &self.z, &other.x, &other.z)
    }

    /// Product modulo phase.
    pub fn mul_assign(&mut self, other: &Self) {
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a ^= b;
        }
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a ^= b;
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q).symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

#[inline]
fn bit(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
fn set_bit(words: &mut [u64], i: usize, v: bool) {
    let m = 1u64 << (i % 64);
    if v {
        words[i / 64] |= m;
    } else {
        words[i / 64] &= !m;
    }
}

#[inline]
fn anticommute_words(ax: &[u64], az: &[u64], bx: &[u64], bz: &[u64]) -> bool {
    let mut acc = 0u64;
    for i in 0..ax.len() {
        acc ^= (ax[i] & bz[i]) ^ (az[i] & bx[i]);
    }
    acc.count_ones() % 2 == 1
}

/// Sign-free stabilizer state: `n` independent commuting generators.
///
/// Row `r` is stored as `w` words of X bits followed by `w` words of Z bits.
#[derive(Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    w: usize,
    data: Vec<u64>,
}

impl StabilizerTableau {
    pub fn product_state(n: usize, basis: Basis) -> Result<Self, StabilizerError> {
        if n == 0 {
            return Err(StabilizerError::Empty);
        }
        let w = words_for(n);
        let mut t = Self {
            n,
            w,
            data: vec![0; n * 2 * w],
        };
        for q in 0..n {
            let off = match basis {
                Basis::X => 0,
                Basis::Z => w,
            };
            let row = t.row_mut(q);
            set_bit(&mut row[off..off + w], q, true);
        }
        Ok(t)
    }

    /// Builds a state from explicit generators, checking rank and commutation.
    pub fn from_generators(gens: &[PauliString]) -> Result<Self, StabilizerError> {
        let n = gens.len();
        if n == 0 {
            return Err(StabilizerError::Empty);
        }
        let w = words_for(n);
        let mut data = Vec::with_capacity(n * 2 * w);
        for g in gens {
            if g.num_qubits() != n {
                return Err(StabilizerError::QubitMismatch {
                    state: n,
                    op: g.num_qubits(),
                });
            }
            data.extend_from_slice(&g.x);
            data.extend_from_slice(&g.z);
        }
        let t = Self { n, w, data };
        t.check_invariants()?;
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * 2 * self.w..(r + 1) * 2 * self.w]
    }

    #[inline]
    fn row_mut(&mut self, r: usize) -> &mut [u64] {
        let s = 2 * self.w;
        &mut self.data[r * s..(r + 1) * s]
    }

    pub fn generator(&self, r: usize) -> PauliString {
        let row = self.row(r);
        PauliString {
            n: self.n,
            x: row[..self.w].to_vec(),
            z: row[self.w..].to_vec(),
        }
    }

    pub fn generators(&self) -> Vec<PauliString> {
        (0..self.n).map(|r| self.generator(r)).collect()
    }

    /// The n x 2n generator matrix (X block then Z block).
    pub fn generator_matrix(&self) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.n, 2 * self.n);
        for r in 0..self.n {
            let row = self.row(r);
            for q in 0..self.n {
                if bit(&row[..self.w], q) {
                    m.set(r, q, true);
                }
                if bit(&row[self.w..], q) {
                    m.set(r, self.n + q, true);
                }
            }
        }
        m
    }

    /// Rank n and pairwise commutation.
    pub fn check_invariants(&self) -> Result<(), StabilizerError> {
        let rank = self.generator_matrix().rank();
        if rank != self.n {
            return Err(StabilizerError::RankDeficient { rank, n: self.n });
        }
        let w = self.w;
        for a in 0..self.n {
            let ra = self.row(a);
            for b in a + 1..self.n {
                let rb = self.row(b);
                if anticommute_words(&ra[..w], &ra[w..], &rb[..w], &rb[w..]) {
                    return Err(StabilizerError::NotAbelian(a, b));
                }
            }
        }
        Ok(())
    }

    /// Adds `extra` qubits, each stabilized by its own `Z`.
    pub fn extend(&self, extra: usize, basis: Basis) -> Self {
        let n = self.n + extra;
        let mut t = Self::product_state(n, basis).expect("n >= 1");
        for r in 0..self.n {
            let src = self.row(r).to_vec();
            let w_new = t.w;
            let dst = t.row_mut(r);
            dst.fill(0);
            dst[..self.w].copy_from_slice(&src[..self.w]);
            dst[w_new..w_new + self.w].copy_from_slice(&src[self.w..]);
        }
        t
    }

    /// Heisenberg action of a k-qubit symplectic map on the qubits `support`.
    pub fn apply_clifford(
        &mut self,
        c: &SymplecticClifford,
        support: &[usize],
    ) -> Result<(), StabilizerError> {
        let k = c.num_qubits();
        if support.len() != k {
            return Err(StabilizerError::SupportSize {
                expected: k,
                got: support.len(),
            });
        }
        for (i, &q) in support.iter().enumerate() {
            if q >= self.n {
                return Err(StabilizerError::IndexOutOfRange { index: q, n: self.n });
            }
            if support[..i].contains(&q) {
                return Err(StabilizerError::DuplicateSupport(q));
            }
        }
        self.apply_clifford_unchecked(c, support);
        Ok(())
    }

    /// As [`apply_clifford`](Self::apply_clifford) without validating `support`.
    #[inline]
    pub fn apply_clifford_unchecked(&mut self, c: &SymplecticClifford, support: &[usize]) {
        let k = support.len();
        let w = self.w;
        let images = c.images();
        for r in 0..self.n {
            let row = self.row_mut(r);
            let mut v = 0u32;
            for (j, &q) in support.iter().enumerate() {
                let wi = q / 64;
                let sh = q % 64;
                v |= (((row[wi] >> sh) & 1) as u32) << j;
                v |= (((row[w + wi] >> sh) & 1) as u32) << (k + j);
            }
            if v == 0 {
                continue;
            }
            let mut img = 0u32;
            let mut bits = v;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                img ^= images[b];
                bits &= bits - 1;
            }
            let diff = img ^ v;
            if diff == 0 {
                continue;
            }
            for (j, &q) in support.iter().enumerate() {
                let wi = q / 64;
                let sh = q % 64;
                row[wi] ^= (((diff >> j) & 1) as u64) << sh;
                row[w + wi] ^= (((diff >> (k + j)) & 1) as u64) << sh;
            }
        }
    }

    /// Projective measurement of `p`, ignoring the outcome sign.
    ///
    /// If generators anticommute with `p`, the lowest-index one is replaced by
    /// `p` and multiplied into every other anticommuting generator.
    pub fn measure(&mut self, p: &PauliString) -> Result<OutcomeKind, StabilizerError> {
        if p.num_qubits() != self.n {
            return Err(StabilizerError::QubitMismatch {
                state: self.n,
                op: p.num_qubits(),
            });
        }
        if p.is_identity() {
            return Err(StabilizerError::IdentityMeasurement);
        }
        let w = self.w;
        let anti: Vec<usize> = if p.weight() <= 8 {
            let sup: Vec<(usize, bool, bool)> = p
                .support()
                .into_iter()
                .map(|q| {
                    let (x, z) = p.get(q).bits();
                    (q, x, z)
                })
                .collect();
            (0..self.n)
                .filter(|&r| {
                    let row = self.row(r);
                    let mut par = false;
                    for &(q, px, pz) in &sup {
                        par ^= (pz & bit(&row[..w], q)) ^ (px & bit(&row[w..], q));
                    }
                    par
                })
                .collect()
        } else {
            (0..self.n)
                .filter(|&r| {
                    let row = self.row(r);
                    anticommute_words(&row[..w], &row[w..], &p.x, &p.z)
                })
                .collect()
        };
        let Some((&first, rest)) = anti.split_first() else {
            return Ok(OutcomeKind::Deterministic);
        };
        self.multiply_into(first, rest);
        let row = self.row_mut(first);
        row[..w].copy_from_slice(&p.x);
        row[w..].copy_from_slice(&p.z);
        Ok(OutcomeKind::Random)
    }

    /// Single-qubit `Z` measurement; anticommuting rows are those with an X
    /// (or Y) on `q`.
    pub fn measure_z(&mut self, q: usize) -> Result<OutcomeKind, StabilizerError> {
        if q >= self.n {
            return Err(StabilizerError::IndexOutOfRange { index: q, n: self.n });
        }
        let (wi, sh) = (q / 64, q % 64);
        let stride = 2 * self.w;
        let anti: Vec<usize> = (0..self.n)
            .filter(|&r| (self.data[r * stride + wi] >> sh) & 1 == 1)
            .collect();
        let Some((&first, rest)) = anti.split_first() else {
            return Ok(OutcomeKind::Deterministic);
        };
        self.multiply_into(first, rest);
        let w = self.w;
        let row = self.row_mut(first);
        row.fill(0);
        row[w + wi] = 1u64 << sh;
        Ok(OutcomeKind::Random)
    }

    fn multiply_into(&mut self, src: usize, dsts: &[usize]) {
        let s = 2 * self.w;
        for &d in dsts {
            debug_assert!(d > src);
            let (lo, hi) = self.data.split_at_mut(d * s);
            let from = &lo[src * s..(src + 1) * s];
            for (a, b) in hi[..s].iter_mut().zip(from) {
                *a ^= *b;
            }
        }
    }

    /// Bipartite entanglement entropy in bits: `rank(G|region) - |region|`.
    pub fn entanglement_entropy(&self, region: &[usize]) -> usize {
        let m = region.len();
        if m == 0 {
            return 0;
        }
        let cols = 2 * m;
        let stride = words_for(cols);
        let mut buf = vec![0u64; self.n * stride];
        let w = self.w;
        for r in 0..self.n {
            let row = self.row(r);
            let out = &mut buf[r * stride..(r + 1) * stride];
            for (j, &q) in region.iter().enumerate() {
                let (wi, sh) = (q / 64, q % 64);
                let xb = (row[wi] >> sh) & 1;
                let zb = (row[w + wi] >> sh) & 1;
                let c = 2 * j;
                out[c / 64] |= xb << (c % 64);
                out[(c + 1) / 64] |= zb << ((c + 1) % 64);
            }
        }
        rank_words(&mut buf, self.n, stride, cols) - m
    }
}

impl fmt::Display for StabilizerTableau {
    /// One generator per line as `I`/`X`/`Y`/`Z` characters.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.n {
            writeln!(f, "{}", self.generator(r))?;
        }
        Ok(())
    }
}

impl fmt::Debug for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "StabilizerTableau(n = {})", self.n)?;
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::SymplecticClifford;

    fn state(gens: &[&str]) -> StabilizerTableau {
        let gens: Vec<_> = gens.iter().map(|g| PauliString::parse(g).unwrap()).collect();
        StabilizerTableau::from_generators(&gens).unwrap()
    }

    #[test]
    fn product_states() {
        let s = StabilizerTableau::product_state(1, Basis::Z).unwrap();
        assert_eq!(s.to_string(), "Z\n");
        let s = StabilizerTableau::product_state(3, Basis::X).unwrap();
        assert_eq!(s.to_string(), "XII\nIXI\nIIX\n");
        assert_eq!(
            StabilizerTableau::product_state(0, Basis::Z),
            Err(StabilizerError::Empty)
        );
        let s = StabilizerTableau::product_state(70, Basis::Z).unwrap();
        for region in [vec![0], vec![3, 65, 69], (0..35).collect()] {
            assert_eq!(s.entanglement_entropy(&region), 0);
        }
    }

    #[test]
    fn pauli_bits_follow_block_layout() {
        let cases = [("XX", "1100"), ("ZX", "0110"), ("IX", "0100"), ("YZ", "1011")];
        for (p, bits) in cases {
            let p = PauliString::parse(p).unwrap();
            assert_eq!(format!("{:?}", p.to_bits()), bits);
            assert_eq!(PauliString::from_bits(&p.to_bits()).unwrap(), p);
        }
        let p = PauliString::parse("XIYZI").unwrap();
        assert_eq!(p.weight(), 3);
        assert!(PauliString::identity(4).is_identity());
    }

    #[test]
    fn measurement_examples() {
        let mut s = state(&["ZI", "IZ"]);
        let before = s.clone();
        assert_eq!(
            s.measure(&PauliString::parse("ZI").unwrap()).unwrap(),
            OutcomeKind::Deterministic
        );
        assert_eq!(s, before);
        assert_eq!(
            s.measure(&PauliString::parse("XI").unwrap()).unwrap(),
            OutcomeKind::Random
        );
        assert_eq!(s.to_string(), "XI\nIZ\n");

        let mut bell = state(&["XX", "ZZ"]);
        assert_eq!(
            bell.measure(&PauliString::parse("ZZ").unwrap()).unwrap(),
            OutcomeKind::Deterministic
        );
        assert_eq!(bell.entanglement_entropy(&[0]), 1);
        assert_eq!(
            bell.measure(&PauliString::parse("XI").unwrap()).unwrap(),
            OutcomeKind::Random
        );
        // ZZ anticommutes with XI and is the lowest-index anticommuting row.
        assert_eq!(bell.to_string(), "XX\nXI\n");
        bell.check_invariants().unwrap();
        assert_eq!(bell.entanglement_entropy(&[0]), 0);
    }

    #[test]
    fn measure_rejects_identity_and_size_mismatch() {
        let mut s = state(&["ZI", "IZ"]);
        assert_eq!(
            s.measure(&PauliString::identity(2)),
            Err(StabilizerError::IdentityMeasurement)
        );
        assert!(matches!(
            s.measure(&PauliString::parse("Z").unwrap()),
            Err(StabilizerError::QubitMismatch { .. })
        ));
    }

    #[test]
    fn measure_z_matches_general_path() {
        let mut a = state(&["XXX", "ZZI", "IZZ"]);
        let mut b = a.clone();
        let ka = a.measure_z(1).unwrap();
        let kb = b.measure(&PauliString::parse("IZI").unwrap()).unwrap();
        assert_eq!(ka, kb);
        assert_eq!(a, b);
    }

    #[test]
    fn apply_clifford_examples() {
        let mut s = StabilizerTableau::product_state(4, Basis::Z).unwrap();
        let before = s.clone();
        s.apply_clifford(&SymplecticClifford::identity(2), &[1, 3]).unwrap();
        assert_eq!(s, before);
        s.apply_clifford(&SymplecticClifford::hadamard_all(4), &[0, 1, 2, 3])
            .unwrap();
        assert_eq!(s.to_string(), "XIII\nIXII\nIIXI\nIIIX\n");
        assert!(matches!(
            s.apply_clifford(&SymplecticClifford::identity(2), &[1, 1]),
            Err(StabilizerError::DuplicateSupport(1))
        ));
        assert!(matches!(
            s.apply_clifford(&SymplecticClifford::identity(2), &[1]),
            Err(StabilizerError::SupportSize { .. })
        ));
        assert!(matches!(
            s.apply_clifford(&SymplecticClifford::identity(1), &[9]),
            Err(StabilizerError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn from_generators_validates() {
        let gens: Vec<_> = ["XX", "XX"].iter().map(|g| PauliString::parse(g).unwrap()).collect();
        assert!(matches!(
            StabilizerTableau::from_generators(&gens),
            Err(StabilizerError::RankDeficient { rank: 1, n: 2 })
        ));
        let gens: Vec<_> = ["XI", "ZI"].iter().map(|g| PauliString::parse(g).unwrap()).collect();
        assert!(StabilizerTableau::from_generators(&gens).is_err());
    }

    #[test]
    fn extend_adds_z_stabilized_qubits() {
        let s = state(&["XX", "ZZ"]);
        let e = s.extend(2, Basis::Z);
        assert_eq!(e.to_string(), "XXII\nZZII\nIIZI\nIIIZ\n");
        e.check_invariants().unwrap();
    }
}
