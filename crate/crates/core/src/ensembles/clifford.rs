//! Sign-agnostic Cliffords as symplectic maps on small Pauli bitstrings.
//!
//! A k-qubit Pauli is packed into a `u32`: bit `q` is the X bit of qubit `q`
//! and bit `k + q` its Z bit. A Clifford is stored by the images of the `2k`
//! basis vectors, i.e. the columns of its symplectic matrix.

use std::fmt;

use rand::Rng;

use super::EnsembleError;
use crate::gf2::{symplectic_check, BitMatrix};

/// Largest qubit count a packed `u32` Pauli can hold.
pub const MAX_QUBITS: usize = 16;

/// Symplectic product of two packed k-qubit Paulis.
#[inline]
pub fn omega(a: u32, b: u32, k: usize) -> bool {
    (swap_blocks(a, k) & b).count_ones() % 2 == 1
}

/// Exchanges the X and Z blocks; `omega(a, b) = parity(swap_blocks(a) & b)`.
#[inline]
pub fn swap_blocks(a: u32, k: usize) -> u32 {
    let mask = (1u32 << k) - 1;
    ((a & mask) << k) | ((a >> k) & mask)
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymplecticClifford {
    k: usize,
    images: Vec<u32>,
}

impl SymplecticClifford {
    pub fn identity(k: usize) -> Self {
        assert!(k <= MAX_QUBITS);
        Self {
            k,
            images: (0..2 * k).map(|b| 1u32 << b).collect(),
        }
    }

    /// Builds from basis images, verifying the symplectic condition.
    pub fn from_images(k: usize, images: Vec<u32>) -> Result<Self, EnsembleError> {
        if k > MAX_QUBITS || images.len() != 2 * k {
            return Err(EnsembleError::BadCliffordShape { k, len: images.len() });
        }
        let c = Self { k, images };
        if !c.preserves_omega() {
            return Err(EnsembleError::NotSymplectic);
        }
        Ok(c)
    }

    pub(crate) fn from_images_unchecked(k: usize, images: Vec<u32>) -> Self {
        debug_assert_eq!(images.len(), 2 * k);
        Self { k, images }
    }

    pub fn from_matrix(m: &BitMatrix) -> Result<Self, EnsembleError> {
        if m.rows() != m.cols() || m.rows() % 2 != 0 || m.rows() > 2 * MAX_QUBITS {
            return Err(EnsembleError::BadCliffordShape {
                k: m.rows() / 2,
                len: m.cols(),
            });
        }
        let k = m.rows() / 2;
        let images = (0..2 * k)
            .map(|c| (0..2 * k).fold(0u32, |acc, r| acc | ((m.get(r, c) as u32) << r)))
            .collect();
        Self::from_images(k, images)
    }

    /// The 2k x 2k matrix `M` with `M e_j = images[j]`.
    pub fn matrix(&self) -> BitMatrix {
        let n = 2 * self.k;
        let mut m = BitMatrix::zeros(n, n);
        for (c, &img) in self.images.iter().enumerate() {
            for r in 0..n {
                if (img >> r) & 1 == 1 {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    pub fn num_qubits(&self) -> usize {
        self.k
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, v: u32) -> u32 {
        let mut out = 0;
        let mut bits = v;
        while bits != 0 {
            out ^= self.images[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        out
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.k, other.k);
        Self {
            k: self.k,
            images: other.images.iter().map(|&v| self.apply(v)).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        // For a symplectic M, M⁻¹ = Ω Mᵀ Ω.
        let n = 2 * self.k;
        let mut images = vec![0u32; n];
        for (j, img) in images.iter_mut().enumerate() {
            // column j of Ω Mᵀ Ω: entry i is omega(images[i], e_j)
            for i in 0..n {
                if omega(self.images[i], 1u32 << j, self.k) {
                    *img |= 1u32 << partner(i, self.k);
                }
            }
        }
        Self { k: self.k, images }
    }

    /// Checks `omega(M a, M b) = omega(a, b)` on basis pairs.
    pub fn preserves_omega(&self) -> bool {
        let n = 2 * self.k;
        (0..n).all(|i| {
            (i..n).all(|j| omega(self.images[i], self.images[j], self.k) == (j == partner(i, self.k)))
        })
    }

    /// Matrix-route check `M Ω Mᵀ = Ω`.
    pub fn is_symplectic(&self) -> bool {
        symplectic_check(&self.matrix(), self.k).unwrap_or(false)
    }

    /// True iff every packed Pauli in `gens` is mapped to itself.
    pub fn fixes_all(&self, gens: &[u32]) -> bool {
        gens.iter().all(|&g| self.apply(g) == g)
    }

    pub fn hadamard_all(k: usize) -> Self {
        Self {
            k,
            images: (0..2 * k).map(|b| 1u32 << partner(b, k)).collect(),
        }
    }

    pub fn hadamard(k: usize, q: usize) -> Self {
        let mut c = Self::identity(k);
        c.images.swap(q, k + q);
        c
    }

    /// Phase gate: `X_q -> Y_q`, `Z_q` fixed.
    pub fn phase(k: usize, q: usize) -> Self {
        let mut c = Self::identity(k);
        c.images[q] |= 1u32 << (k + q);
        c
    }

    /// Controlled-Z: `X_a -> X_a Z_b`, `X_b -> Z_a X_b`.
    pub fn cz(k: usize, a: usize, b: usize) -> Self {
        assert_ne!(a, b);
        let mut c = Self::identity(k);
        c.images[a] |= 1u32 << (k + b);
        c.images[b] |= 1u32 << (k + a);
        c
    }

    /// CNOT: `X_c -> X_c X_t`, `Z_t -> Z_c Z_t`.
    pub fn cnot(k: usize, control: usize, target: usize) -> Self {
        assert_ne!(control, target);
        let mut c = Self::identity(k);
        c.images[control] |= 1u32 << target;
        c.images[k + target] |= 1u32 << (k + control);
        c
    }
}

#[inline]
fn partner(b: usize, k: usize) -> usize {
    if b < k {
        b + k
    } else {
        b - k
    }
}

impl fmt::Debug for SymplecticClifford {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymplecticClifford(k={}, images=[", self.k)?;
        for (i, img) in self.images.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&pauli_label(*img, self.k))?;
        }
        f.write_str("])")
    }
}

/// `IXYZ` label of a packed Pauli, qubit 0 first.
pub fn pauli_label(v: u32, k: usize) -> String {
    (0..k)
        .map(|q| match ((v >> q) & 1, (v >> (k + q)) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        })
        .collect()
}

/// Tabulated sign-agnostic Clifford counts for 1..=5 qubits.
pub fn count_cliffords(k: usize) -> Result<u128, EnsembleError> {
    const TABLE: [u128; 5] = [
        6,
        720,
        1_451_520,
        47_377_612_800,
        24_815_256_521_932_800,
    ];
    match k {
        1..=5 => Ok(TABLE[k - 1]),
        _ => Err(EnsembleError::UnsupportedQubits(k)),
    }
}

/// `|Sp(2k, 2)|` via the extension recursion; `None` on `u128` overflow.
pub fn symplectic_group_order(k: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 1..=k as u32 {
        let pairs = 4u128.checked_pow(i)?.checked_sub(1)?;
        let partners = 2u128.checked_pow(2 * i - 1)?;
        acc = acc.checked_mul(pairs)?.checked_mul(partners)?;
    }
    Some(acc)
}

/// The `b`-th vector `z` (in increasing order of the free bits) with
/// `omega(x, z) = 1`. `x` must be nonzero and `b < 2^(2k-1)`.
fn nth_partner(x: u32, b: u32, k: usize) -> u32 {
    let dual = swap_blocks(x, k);
    let p = dual.trailing_zeros();
    let low = b & ((1u32 << p) - 1);
    let high = (b >> p) << (p + 1);
    let mut z = low | high;
    if (dual & z).count_ones() % 2 == 0 {
        z |= 1u32 << p;
    }
    z
}

/// Extends the anticommuting pair `(x, z)` to a full symplectic basis.
/// Returns images for `X_0, .., X_{k-1}, Z_0, .., Z_{k-1}` with `X_0 -> x`
/// and `Z_0 -> z`; the completion is deterministic.
fn complete_basis(x: u32, z: u32, k: usize) -> Vec<u32> {
    let mut images = vec![0u32; 2 * k];
    images[0] = x;
    images[k] = z;
    let mut pairs: Vec<(u32, u32)> = vec![(x, z)];
    let project = |v: u32, pairs: &[(u32, u32)]| {
        pairs.iter().fold(v, |acc, &(e, f)| {
            let mut r = acc;
            if omega(acc, f, k) {
                r ^= e;
            }
            if omega(acc, e, k) {
                r ^= f;
            }
            r
        })
    };
    let mut candidates: Vec<u32> = (0..2 * k).map(|b| 1u32 << b).collect();
    let mut next = 1;
    while next < k {
        let v = project(candidates.remove(0), &pairs);
        if v == 0 {
            continue;
        }
        let pos = candidates
            .iter()
            .position(|&w| omega(v, project(w, &pairs), k))
            .expect("nondegenerate form always supplies a partner");
        let w = project(candidates.remove(pos), &pairs);
        images[next] = v;
        images[k + next] = w;
        pairs.push((v, w));
        next += 1;
    }
    images
}

/// Assembles `S ∘ (I ⊕ inner)` where `S` maps qubit 0 to `(x, z)`.
fn extend_clifford(x: u32, z: u32, inner: &SymplecticClifford, k: usize) -> SymplecticClifford {
    let s = SymplecticClifford::from_images_unchecked(k, complete_basis(x, z, k));
    let m = k - 1;
    let mut images = vec![0u32; 2 * k];
    images[0] = x;
    images[k] = z;
    for q in 0..m {
        for (half, base) in [(0usize, 0usize), (1, m)] {
            let local = inner.images[base + q];
            // local qubit j is qubit j + 1 of the k-qubit register
            let mut lifted = 0u32;
            for j in 0..m {
                lifted |= ((local >> j) & 1) << (j + 1);
                lifted |= ((local >> (m + j)) & 1) << (k + j + 1);
            }
            images[half * k + q + 1] = s.apply(lifted);
        }
    }
    SymplecticClifford::from_images_unchecked(k, images)
}

/// Decodes `index < |Sp(2k,2)|` into a Clifford; a bijection onto the group.
pub fn clifford_from_index(k: usize, index: u128) -> Result<SymplecticClifford, EnsembleError> {
    let order = symplectic_group_order(k).ok_or(EnsembleError::UnsupportedQubits(k))?;
    if k == 0 || k > MAX_QUBITS || index >= order {
        return Err(EnsembleError::IndexOutOfRange { k, index });
    }
    let mut choices = Vec::with_capacity(k);
    let mut rest = index;
    for level in (1..=k).rev() {
        let n_x = (1u128 << (2 * level)) - 1;
        let n_z = 1u128 << (2 * level - 1);
        let a = (rest % n_x) as u32;
        rest /= n_x;
        let b = (rest % n_z) as u32;
        rest /= n_z;
        choices.push((a, b));
    }
    Ok(build_from_choices(k, &choices))
}

/// Uniform sign-agnostic k-qubit Clifford via recursive extension.
pub fn sample_clifford<R: Rng + ?Sized>(k: usize, rng: &mut R) -> SymplecticClifford {
    assert!((1..=MAX_QUBITS).contains(&k));
    let choices: Vec<(u32, u32)> = (1..=k)
        .rev()
        .map(|level| {
            let a = rng.gen_range(0..(1u32 << (2 * level)) - 1);
            let b = rng.gen_range(0..1u32 << (2 * level - 1));
            (a, b)
        })
        .collect();
    build_from_choices(k, &choices)
}

/// `choices[i]` is the `(x, z)` choice for the level with `k - i` qubits.
fn build_from_choices(k: usize, choices: &[(u32, u32)]) -> SymplecticClifford {
    let mut c = SymplecticClifford::identity(0);
    for (i, &(a, b)) in choices.iter().enumerate().rev() {
        let level = k - i;
        let x = a + 1;
        let z = nth_partner(x, b, level);
        c = extend_clifford(x, z, &c, level);
    }
    c
}
