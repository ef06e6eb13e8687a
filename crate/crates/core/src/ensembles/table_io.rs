//! Binary ensemble table format (little-endian):
//!
//! ```text
//! "SSPT" | version: u16 | k: u8 | count: u64 | matrices | crc32: u32
//! ```
//!
//! Each matrix is the 2k x 2k symplectic matrix in row-major order, bit
//! `r * 2k + c` stored least-significant-bit first, padded to whole bytes.
//! The CRC covers every byte before the trailer.

use std::fs;
use std::path::Path;

use super::clifford::{SymplecticClifford, MAX_QUBITS};
use super::EnsembleError;

pub const MAGIC: &[u8; 4] = b"SSPT";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 1 + 8;
pub const TRAILER_LEN: usize = 4;

/// A loaded table together with its checksum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleTable {
    pub k: usize,
    pub elements: Vec<SymplecticClifford>,
    pub crc32: u32,
}

fn matrix_bytes(k: usize) -> usize {
    (4 * k * k).div_ceil(8)
}

/// Exact file size for `count` matrices on `k` qubits.
pub fn table_file_size(k: usize, count: usize) -> usize {
    HEADER_LEN + count * matrix_bytes(k) + TRAILER_LEN
}

fn encode_matrix(c: &SymplecticClifford, out: &mut Vec<u8>) {
    let n = 2 * c.num_qubits();
    let start = out.len();
    out.resize(start + matrix_bytes(c.num_qubits()), 0);
    for (col, &img) in c.images().iter().enumerate() {
        for row in 0..n {
            if (img >> row) & 1 == 1 {
                let bit = row * n + col;
                out[start + bit / 8] |= 1 << (bit % 8);
            }
        }
    }
}

fn decode_matrix(k: usize, bytes: &[u8]) -> Result<SymplecticClifford, EnsembleError> {
    let n = 2 * k;
    let mut images = vec![0u32; n];
    for row in 0..n {
        for (col, img) in images.iter_mut().enumerate() {
            let bit = row * n + col;
            if (bytes[bit / 8] >> (bit % 8)) & 1 == 1 {
                *img |= 1 << row;
            }
        }
    }
    SymplecticClifford::from_images(k, images)
}

pub fn encode_table(table: &[SymplecticClifford]) -> Result<Vec<u8>, EnsembleError> {
    let k = table.first().ok_or(EnsembleError::EmptyTable)?.num_qubits();
    if let Some(bad) = table.iter().find(|c| c.num_qubits() != k) {
        return Err(EnsembleError::Format(format!(
            "mixed qubit counts {k} and {}",
            bad.num_qubits()
        )));
    }
    let mut out = Vec::with_capacity(table_file_size(k, table.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(k as u8);
    out.extend_from_slice(&(table.len() as u64).to_le_bytes());
    for c in table {
        encode_matrix(c, &mut out);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_table(bytes: &[u8]) -> Result<EnsembleTable, EnsembleError> {
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(EnsembleError::Format(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(EnsembleError::Format("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(EnsembleError::Format(format!("unsupported version {version}")));
    }
    let k = bytes[6] as usize;
    if k == 0 || k > MAX_QUBITS {
        return Err(EnsembleError::UnsupportedQubits(k));
    }
    let count = u64::from_le_bytes(bytes[7..15].try_into().expect("8 bytes"));
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(matrix_bytes(k)))
        .and_then(|b| b.checked_add(HEADER_LEN + TRAILER_LEN));
    if expected != Some(bytes.len()) {
        return Err(EnsembleError::Format(format!(
            "size {} does not match header (k = {k}, count = {count})",
            bytes.len()
        )));
    }
    let body_end = bytes.len() - TRAILER_LEN;
    let stored = u32::from_le_bytes(bytes[body_end..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(EnsembleError::Checksum { stored, computed });
    }
    let elements = bytes[HEADER_LEN..body_end]
        .chunks_exact(matrix_bytes(k))
        .map(|chunk| decode_matrix(k, chunk))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleTable {
        k,
        elements,
        crc32: stored,
    })
}

/// Writes the table and returns its CRC32.
pub fn store_table(table: &[SymplecticClifford], path: impl AsRef<Path>) -> Result<u32, EnsembleError> {
    let bytes = encode_table(table)?;
    fs::write(path, &bytes)?;
    Ok(u32::from_le_bytes(bytes[bytes.len() - TRAILER_LEN..].try_into().expect("4 bytes")))
}

pub fn load_table(path: impl AsRef<Path>) -> Result<EnsembleTable, EnsembleError> {
    decode_table(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{clifford_from_index, enumerate_z_preserving};

    #[test]
    fn roundtrip_and_size() {
        let table = enumerate_z_preserving(4).unwrap();
        let bytes = encode_table(&table).unwrap();
        assert_eq!(bytes.len(), table_file_size(4, 1024));
        assert_eq!(bytes.len(), 15 + 1024 * 8 + 4);
        let back = decode_table(&bytes).unwrap();
        assert_eq!(back.k, 4);
        assert_eq!(back.elements, table);
    }

    #[test]
    fn odd_bit_padding() {
        // k = 1: 4 bits per matrix, one byte each
        let table: Vec<_> = (0..6).map(|i| clifford_from_index(1, i).unwrap()).collect();
        let bytes = encode_table(&table).unwrap();
        assert_eq!(bytes.len(), 15 + 6 + 4);
        assert_eq!(decode_table(&bytes).unwrap().elements, table);
    }

    #[test]
    fn rejects_corruption() {
        let table = enumerate_z_preserving(3).unwrap();
        let bytes = encode_table(&table).unwrap();
        assert!(matches!(decode_table(&bytes[..bytes.len() - 1]), Err(EnsembleError::Format(_))));
        assert!(matches!(decode_table(&bytes[..10]), Err(EnsembleError::Format(_))));
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 3] ^= 0x10;
        assert!(matches!(decode_table(&flipped), Err(EnsembleError::Checksum { .. })));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_table(&magic), Err(EnsembleError::Format(_))));
        assert!(matches!(encode_table(&[]), Err(EnsembleError::EmptyTable)));
    }

    #[test]
    fn header_layout() {
        let table = vec![SymplecticClifford::identity(5)];
        let bytes = encode_table(&table).unwrap();
        assert_eq!(&bytes[..4], b"SSPT");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(bytes[6], 5);
        assert_eq!(&bytes[7..15], &1u64.to_le_bytes());
        // identity: bits r*10 + r set
        let body = &bytes[15..15 + 13];
        for r in 0..10 {
            let bit = r * 10 + r;
            assert_eq!((body[bit / 8] >> (bit % 8)) & 1, 1);
        }
        assert_eq!(body.iter().map(|b| b.count_ones()).sum::<u32>(), 10);
    }
}
