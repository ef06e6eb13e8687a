//! Bit-packed linear algebra over GF(2).
//!
//! Rows are stored as runs of `u64` words. Every row owns the same number of
//! words and the bits past `cols` in the last word of a row are kept at zero,
//! so whole-word operations (XOR, AND, popcount) never see stray bits.

use std::fmt;

use thiserror::Error;

const WORD: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Gf2Error {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("symplectic vectors need an even length, got {0}")]
    OddLength(usize),
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    BadShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid bit character {0:?}")]
    BadChar(char),
}

/// Packed vector of bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Parses a string of `0`/`1` characters, first character is bit 0.
    pub fn parse(s: &str) -> Result<Self, Gf2Error> {
        let mut v = Self::zeros(s.chars().count());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i, true),
                other => return Err(Gf2Error::BadChar(other)),
            }
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `(a_X . b_Z + a_Z . b_X) mod 2` for vectors laid out as X block then Z
/// block. Zero iff the two Paulis commute.
pub fn symplectic_product(a: &BitVec, b: &BitVec) -> Result<bool, Gf2Error> {
    if a.len != b.len {
        return Err(Gf2Error::LengthMismatch(a.len, b.len));
    }
    if a.len % 2 != 0 {
        return Err(Gf2Error::OddLength(a.len));
    }
    let k = a.len / 2;
    let mut acc = false;
    for q in 0..k {
        acc ^= (a.get(q) & b.get(k + q)) ^ (a.get(k + q) & b.get(q));
    }
    Ok(acc)
}

/// Dense row-major bit matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from `0`/`1` strings, one per row.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, Gf2Error> {
        let cols = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let v = BitVec::parse(r.as_ref())?;
            if v.len() != cols {
                return Err(Gf2Error::LengthMismatch(cols, v.len()));
            }
            m.row_words_mut(i).copy_from_slice(v.words());
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let idx = r * self.stride + c / WORD;
        let mask = 1u64 << (c % WORD);
        if value {
            self.data[idx] |= mask;
        } else {
            self.data[idx] &= !mask;
        }
    }

    #[inline]
    pub fn toggle(&mut self, r: usize, c: usize) {
        self.data[r * self.stride + c / WORD] ^= 1u64 << (c % WORD);
    }

    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    pub fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BitVec {
        BitVec {
            len: self.cols,
            words: self.row_words(r).to_vec(),
        }
    }

    /// `row[dst] ^= row[src]`.
    #[inline]
    pub fn xor_row(&mut self, src: usize, dst: usize) {
        if src == dst {
            self.row_words_mut(dst).fill(0);
            return;
        }
        let s = self.stride;
        let (a, b) = if src < dst {
            let (lo, hi) = self.data.split_at_mut(dst * s);
            (&lo[src * s..(src + 1) * s], &mut hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(src * s);
            (&hi[..s], &mut lo[dst * s..(dst + 1) * s])
        };
        for (d, w) in b.iter_mut().zip(a) {
            *d ^= *w;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        let (lo, hi) = (a.min(b), a.max(b));
        let (first, second) = self.data.split_at_mut(hi * s);
        first[lo * s..(lo + 1) * s].swap_with_slice(&mut second[..s]);
    }

    /// Appends a row; the vector length must equal `cols`.
    pub fn push_row(&mut self, row: &BitVec) -> Result<(), Gf2Error> {
        if row.len() != self.cols {
            return Err(Gf2Error::LengthMismatch(self.cols, row.len()));
        }
        self.data.extend_from_slice(row.words());
        self.rows += 1;
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, rhs: &Self) -> Result<Self, Gf2Error> {
        if self.cols != rhs.rows {
            return Err(Gf2Error::LengthMismatch(self.cols, rhs.rows));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) {
                    let src = rhs.row_words(k);
                    for (d, w) in out.row_words_mut(r).iter_mut().zip(src) {
                        *d ^= *w;
                    }
                }
            }
        }
        Ok(out)
    }

    /// GF(2) rank, leaving `self` untouched.
    pub fn rank(&self) -> usize {
        self.clone().rank_in_place()
    }

    /// Reduces `self` to row echelon form and returns the rank. Pivot rows
    /// end up in the first `rank` rows.
    pub fn rank_in_place(&mut self) -> usize {
        rank_words(&mut self.data, self.rows, self.stride, self.cols)
    }
}

/// Row-echelon elimination on a raw packed buffer of `rows` rows of `stride`
/// words. Returns the rank.
pub(crate) fn rank_words(data: &mut [u64], rows: usize, stride: usize, cols: usize) -> usize {
    let mut rank = 0;
    for w in 0..stride {
        let hi = if w + 1 == stride && cols % WORD != 0 {
            cols % WORD
        } else {
            WORD
        };
        for bit in 0..hi {
            if rank == rows {
                return rank;
            }
            let mask = 1u64 << bit;
            let Some(pivot) = (rank..rows).find(|&r| data[r * stride + w] & mask != 0) else {
                continue;
            };
            if pivot != rank {
                for j in w..stride {
                    data.swap(pivot * stride + j, rank * stride + j);
                }
            }
            let (top, rest) = data.split_at_mut((rank + 1) * stride);
            let prow = &top[rank * stride..];
            for chunk in rest.chunks_exact_mut(stride) {
                if chunk[w] & mask != 0 {
                    for j in w..stride {
                        chunk[j] ^= prow[j];
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                f.write_str(if self.get(r, c) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// The 2k x 2k form pairing X bit `q` with Z bit `k + q`.
pub fn symplectic_form(k: usize) -> BitMatrix {
    let mut omega = BitMatrix::zeros(2 * k, 2 * k);
    for q in 0..k {
        omega.set(q, k + q, true);
        omega.set(k + q, q, true);
    }
    omega
}

/// True iff `M Ω Mᵀ = Ω`.
pub fn symplectic_check(m: &BitMatrix, k: usize) -> Result<bool, Gf2Error> {
    if m.rows() != m.cols() || m.rows() != 2 * k {
        return Err(Gf2Error::BadShape {
            expected: 2 * k,
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let omega = symplectic_form(k);
    let lhs = m.mul(&omega)?.mul(&m.transpose())?;
    Ok(lhs == omega)
}
