//! `ensemble build` and `ensemble verify`.

use std::path::{Path, PathBuf};

use mipt_core::ensembles::{
    load_table, store_table, table_file_size, EnsembleKind, EnsembleSpec, FixingSubgroup, SymplecticClifford,
};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Tables above this many elements are refused.
pub const MAX_TABLE: u128 = 1 << 26;

#[derive(Debug, Clone, Serialize)]
pub struct TableManifest {
    pub file: PathBuf,
    pub kind: String,
    pub k: usize,
    pub count: usize,
    pub crc32: u32,
    pub file_size: usize,
    pub format_version: u16,
}

fn group_for(kind: EnsembleKind, k: usize) -> Result<(EnsembleSpec, FixingSubgroup)> {
    let spec = EnsembleSpec::new(kind, k)?;
    let group = FixingSubgroup::new(k, &spec.packed_generators())?;
    Ok((spec, group))
}

/// Every element of the ensemble, sorted.
pub fn enumerate(kind: EnsembleKind, k: usize) -> Result<Vec<SymplecticClifford>> {
    let (_, group) = group_for(kind, k)?;
    if group.order() > MAX_TABLE {
        return Err(CliError::Ensemble(format!(
            "{} with k = {k} has {} elements; too many to store",
            kind.name(),
            group.order()
        )));
    }
    if kind == EnsembleKind::SsptDiagonal && k == 5 {
        return Ok(mipt_core::ensembles::enumerate_sspt_table());
    }
    let mut all = group.enumerate();
    all.sort_unstable();
    Ok(all)
}

/// Writes the table and a `<file>.json` manifest next to it.
pub fn build(kind: EnsembleKind, k: usize, out: &Path) -> Result<TableManifest> {
    let table = enumerate(kind, k)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let crc32 = store_table(&table, out)?;
    let manifest = TableManifest {
        file: out.to_path_buf(),
        kind: kind.name().into(),
        k,
        count: table.len(),
        crc32,
        file_size: table_file_size(k, table.len()),
        format_version: mipt_core::ensembles::FORMAT_VERSION,
    };
    crate::analysis::write_json(&manifest_path(out), &manifest)?;
    Ok(manifest)
}

pub fn manifest_path(table: &Path) -> PathBuf {
    let mut s = table.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub file: PathBuf,
    pub kind: String,
    pub k: usize,
    pub count: usize,
    pub expected_count: u128,
    pub crc32: u32,
    pub symplectic: bool,
    pub symmetric: bool,
    pub distinct: bool,
    pub ok: bool,
}

/// Checks checksum (on load), shape, group membership, distinctness and the
/// element count against the analytic group order.
pub fn verify(path: &Path, kind: EnsembleKind) -> Result<VerifyReport> {
    let table = load_table(path).map_err(|e| CliError::Ensemble(format!("{}: {e}", path.display())))?;
    let (spec, group) = group_for(kind, table.k)?;
    let gens = spec.packed_generators();
    let symplectic = table.elements.iter().all(SymplecticClifford::is_symplectic);
    let symmetric = table.elements.iter().all(|c| c.fixes_all(&gens));
    let distinct = {
        let mut v: Vec<&SymplecticClifford> = table.elements.iter().collect();
        v.sort_unstable();
        v.windows(2).all(|w| w[0] != w[1])
    };
    let expected_count = group.order();
    let ok = symplectic && symmetric && distinct && table.elements.len() as u128 == expected_count;
    Ok(VerifyReport {
        file: path.to_path_buf(),
        kind: kind.name().into(),
        k: table.k,
        count: table.elements.len(),
        expected_count,
        crc32: table.crc32,
        symplectic,
        symmetric,
        distinct,
        ok,
    })
}
