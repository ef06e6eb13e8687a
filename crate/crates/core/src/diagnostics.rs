//! Region sets and entanglement diagnostics evaluated on a tableau snapshot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::LatticeGeometry;
use crate::pauli::StabilizerTableau;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagnosticError {
    #[error("{tag} regions need L divisible by {divisor}, got L = {l}")]
    Incompatible { tag: &'static str, divisor: usize, l: usize },
    #[error("{tag} regions do not fit on an L = {l} torus")]
    TooSmall { tag: &'static str, l: usize },
    #[error("unknown geometry {0:?}")]
    UnknownGeometry(String),
    #[error("unknown diagnostic {0:?}")]
    UnknownDiagnostic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryTag {
    Cylinder,
    Ring,
    Diagonal,
    Dumbbell,
}

impl GeometryTag {
    pub fn name(self) -> &'static str {
        match self {
            GeometryTag::Cylinder => "cylinder",
            GeometryTag::Ring => "ring",
            GeometryTag::Diagonal => "diagonal",
            GeometryTag::Dumbbell => "dumbbell",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DiagnosticError> {
        match s {
            "cylinder" => Ok(GeometryTag::Cylinder),
            "ring" => Ok(GeometryTag::Ring),
            "diagonal" => Ok(GeometryTag::Diagonal),
            "dumbbell" => Ok(GeometryTag::Dumbbell),
            _ => Err(DiagnosticError::UnknownGeometry(s.to_string())),
        }
    }
}

/// Three disjoint sets of system-qubit indices, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSet {
    pub tag: GeometryTag,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
}

impl RegionSet {
    fn new(tag: GeometryTag, mut a: Vec<usize>, mut b: Vec<usize>, mut c: Vec<usize>) -> Self {
        a.sort_unstable();
        b.sort_unstable();
        c.sort_unstable();
        Self { tag, a, b, c }
    }

    pub fn is_disjoint(&self) -> bool {
        let mut all: Vec<usize> = self.a.iter().chain(&self.b).chain(&self.c).copied().collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        all.len() == n
    }
}

/// Dumbbell shape: square heads of side `head` placed on the diagonal
/// `x = y` at `t = 0` and `t = L/2`, joined by the diagonal cells strictly
/// between them. Even sides extend one cell further towards negative `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumbbellShape {
    pub head: usize,
}

impl DumbbellShape {
    /// Heads of side `L/4 + 1`, leaving a handle of `L/4 - 1` cells and an
    /// equal gap on the far side of the torus.
    pub fn for_side(l: usize) -> Self {
        Self { head: l / 4 + 1 }
    }
}

pub fn make_regions(geom: &LatticeGeometry, tag: GeometryTag) -> Result<RegionSet, DiagnosticError> {
    match tag {
        GeometryTag::Cylinder => bands(geom, tag, |x, _| x),
        GeometryTag::Diagonal => bands(geom, tag, |x, y| x + y),
        GeometryTag::Ring => ring(geom),
        GeometryTag::Dumbbell => dumbbell(geom, DumbbellShape::for_side(geom.side())),
    }
}

/// Three adjacent width-`L/4` bands of the coordinate `key(x, y) mod L`.
fn bands(
    geom: &LatticeGeometry,
    tag: GeometryTag,
    key: impl Fn(usize, usize) -> usize,
) -> Result<RegionSet, DiagnosticError> {
    let l = geom.side();
    if l % 4 != 0 {
        return Err(DiagnosticError::Incompatible {
            tag: tag.name(),
            divisor: 4,
            l,
        });
    }
    let w = l / 4;
    let mut parts: [Vec<usize>; 3] = Default::default();
    for i in 0..geom.num_sites() {
        let (x, y) = geom.coords(i);
        let band = (key(x, y) % l) / w;
        if band < 3 {
            parts[band].push(i);
        }
    }
    let [a, b, c] = parts;
    Ok(RegionSet::new(tag, a, b, c))
}

/// Euclidean annulus `3/2 <= r <= L/2 - 3/2` around the cell `(L/2, L/2)`,
/// split by polar angle into three arcs of near-equal size. Thicker or
/// wider annuli pick up spurious contributions on the cluster state: a
/// square annulus aligned with the axes, or one whose exterior becomes a thin
/// strip wrapping the torus, both give nonzero `S_top`.
fn ring(geom: &LatticeGeometry) -> Result<RegionSet, DiagnosticError> {
    let l = geom.side();
    if l < 8 {
        return Err(DiagnosticError::TooSmall { tag: "ring", l });
    }
    let c = l as i64 / 2;
    // radii doubled to stay in integers
    let (r_in2, r_out2) = (3, l as i64 - 3);
    let mut cells: Vec<(f64, usize)> = Vec::new();
    for dy in -c..c {
        for dx in -c..c {
            let d4 = 4 * (dx * dx + dy * dy);
            if d4 >= r_in2 * r_in2 && d4 <= r_out2 * r_out2 {
                let angle = (dy as f64).atan2(dx as f64);
                cells.push((angle, geom.index(c + dx, c + dy)));
            }
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = cells.len();
    let cut1 = n / 3;
    let cut2 = 2 * n / 3;
    let ids = |r: std::ops::Range<usize>| cells[r].iter().map(|c| c.1).collect();
    Ok(RegionSet::new(GeometryTag::Ring, ids(0..cut1), ids(cut1..cut2), ids(cut2..n)))
}

pub fn dumbbell(geom: &LatticeGeometry, shape: DumbbellShape) -> Result<RegionSet, DiagnosticError> {
    let l = geom.side() as i64;
    let h = shape.head as i64;
    let half = l / 2;
    // a nonempty handle, and a gap of at least one diagonal cell on the far side
    if h == 0 || half < h + 1 {
        return Err(DiagnosticError::TooSmall { tag: "dumbbell", l: geom.side() });
    }
    let lo = -(h / 2);
    let hi = lo + h - 1;
    let head = |t: i64| -> Vec<usize> {
        let mut v = Vec::new();
        for dy in lo..=hi {
            for dx in lo..=hi {
                v.push(geom.index(t + dx, t + dy));
            }
        }
        v
    };
    let handle = (hi + 1..half + lo).map(|t| geom.index(t, t)).collect();
    Ok(RegionSet::new(GeometryTag::Dumbbell, head(0), head(half), handle))
}

/// `S_AB + S_BC + S_AC - S_A - S_B - S_C - S_ABC`.
pub fn s_top_seven(state: &StabilizerTableau, regions: &RegionSet) -> i64 {
    let s = |parts: &[&[usize]]| -> i64 {
        let region: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        state.entanglement_entropy(&region) as i64
    };
    let (a, b, c) = (&regions.a[..], &regions.b[..], &regions.c[..]);
    s(&[a, b]) + s(&[b, c]) + s(&[a, c]) - s(&[a]) - s(&[b]) - s(&[c]) - s(&[a, b, c])
}

/// Seven-term combination on dumbbell regions (heads `A`, `B`, handle `C`).
pub fn s_dumb(state: &StabilizerTableau, regions: &RegionSet) -> i64 {
    s_top_seven(state, regions)
}

pub fn s_anc(state: &StabilizerTableau, ancillas: &[usize]) -> i64 {
    state.entanglement_entropy(ancillas) as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutDirection {
    /// Cylinders of columns `x < l`.
    Row,
    /// Cylinders of rows `y < l`.
    Column,
}

fn cylinder(geom: &LatticeGeometry, dir: CutDirection, width: usize) -> Vec<usize> {
    (0..geom.num_sites())
        .filter(|&i| {
            let (x, y) = geom.coords(i);
            match dir {
                CutDirection::Row => x < width,
                CutDirection::Column => y < width,
            }
        })
        .collect()
}

/// `S(l)` for cylinders of width `l = 1..L-1`.
pub fn entanglement_profile(state: &StabilizerTableau, geom: &LatticeGeometry, dir: CutDirection) -> Vec<i64> {
    (1..geom.side())
        .map(|w| state.entanglement_entropy(&cylinder(geom, dir, w)) as i64)
        .collect()
}

pub fn half_system_entropy(state: &StabilizerTableau, geom: &LatticeGeometry) -> i64 {
    state.entanglement_entropy(&cylinder(geom, CutDirection::Row, geom.side() / 2)) as i64
}

/// What a trajectory records at each sample time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    STop,
    SDumb,
    SAnc,
    Profile,
    HalfSystem,
}

impl DiagnosticKind {
    pub fn name(self) -> &'static str {
        match self {
            DiagnosticKind::STop => "s_top",
            DiagnosticKind::SDumb => "s_dumb",
            DiagnosticKind::SAnc => "s_anc",
            DiagnosticKind::Profile => "profile",
            DiagnosticKind::HalfSystem => "half_system",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DiagnosticError> {
        [
            DiagnosticKind::STop,
            DiagnosticKind::SDumb,
            DiagnosticKind::SAnc,
            DiagnosticKind::Profile,
            DiagnosticKind::HalfSystem,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| DiagnosticError::UnknownDiagnostic(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticSample {
    pub kind: DiagnosticKind,
    /// One entry, or `L - 1` entries for profiles.
    pub value: Vec<i64>,
    pub time: u64,
    pub trajectory: u64,
}

/// A diagnostic with its regions precomputed.
#[derive(Debug, Clone)]
pub enum Probe {
    Seven { kind: DiagnosticKind, regions: RegionSet },
    Ancilla { qubits: Vec<usize> },
    Profile { geometry: LatticeGeometry, dir: CutDirection },
    HalfSystem { region: Vec<usize> },
}

impl Probe {
    /// `tag` selects the regions for `S_top`; `S_dumb` always uses the
    /// dumbbell.
    pub fn new(
        geom: &LatticeGeometry,
        kind: DiagnosticKind,
        tag: GeometryTag,
        n_anc: usize,
    ) -> Result<Self, DiagnosticError> {
        Ok(match kind {
            DiagnosticKind::STop => Probe::Seven {
                kind,
                regions: make_regions(geom, tag)?,
            },
            DiagnosticKind::SDumb => Probe::Seven {
                kind,
                regions: make_regions(geom, GeometryTag::Dumbbell)?,
            },
            DiagnosticKind::SAnc => Probe::Ancilla {
                qubits: (geom.num_sites()..geom.num_sites() + n_anc).collect(),
            },
            DiagnosticKind::Profile => Probe::Profile {
                geometry: *geom,
                dir: CutDirection::Row,
            },
            DiagnosticKind::HalfSystem => Probe::HalfSystem {
                region: cylinder(geom, CutDirection::Row, geom.side() / 2),
            },
        })
    }

    pub fn kind(&self) -> DiagnosticKind {
        match self {
            Probe::Seven { kind, .. } => *kind,
            Probe::Ancilla { .. } => DiagnosticKind::SAnc,
            Probe::Profile { .. } => DiagnosticKind::Profile,
            Probe::HalfSystem { .. } => DiagnosticKind::HalfSystem,
        }
    }

    pub fn regions(&self) -> Option<&RegionSet> {
        match self {
            Probe::Seven { regions, .. } => Some(regions),
            _ => None,
        }
    }

    pub fn measure(&self, state: &StabilizerTableau) -> Vec<i64> {
        match self {
            Probe::Seven { regions, .. } => vec![s_top_seven(state, regions)],
            Probe::Ancilla { qubits } => vec![s_anc(state, qubits)],
            Probe::Profile { geometry, dir } => entanglement_profile(state, geometry, *dir),
            Probe::HalfSystem { region } => vec![state.entanglement_entropy(region) as i64],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Basis;

    fn geom(l: usize) -> LatticeGeometry {
        LatticeGeometry::new(l).unwrap()
    }

    #[test]
    fn cylinder_sizes() {
        let r = make_regions(&geom(8), GeometryTag::Cylinder).unwrap();
        assert_eq!((r.a.len(), r.b.len(), r.c.len()), (16, 16, 16));
        assert!(make_regions(&geom(6), GeometryTag::Cylinder).is_err());
        let d = make_regions(&geom(8), GeometryTag::Diagonal).unwrap();
        assert_eq!((d.a.len(), d.b.len(), d.c.len()), (16, 16, 16));
    }

    #[test]
    fn regions_disjoint() {
        for l in [8, 12, 16] {
            for tag in [GeometryTag::Cylinder, GeometryTag::Ring, GeometryTag::Diagonal, GeometryTag::Dumbbell] {
                let r = make_regions(&geom(l), tag).unwrap();
                assert!(r.is_disjoint(), "{tag:?} at L = {l}");
                assert!(!r.a.is_empty() && !r.b.is_empty() && !r.c.is_empty());
                assert!(r.a.iter().chain(&r.b).chain(&r.c).all(|&i| i < l * l));
            }
        }
    }

    #[test]
    fn dumbbell_handle_on_diagonal() {
        for l in [8, 12, 16] {
            let g = geom(l);
            let r = make_regions(&g, GeometryTag::Dumbbell).unwrap();
            let h = l / 4 + 1;
            assert_eq!(r.a.len(), h * h);
            assert_eq!(r.b.len(), h * h);
            assert_eq!(r.c.len(), l / 4 - 1);
            assert!(r.c.iter().all(|&i| {
                let (x, y) = g.coords(i);
                x == y
            }));
        }
        assert!(dumbbell(&geom(6), DumbbellShape { head: 3 }).is_err());
        assert!(dumbbell(&geom(8), DumbbellShape { head: 4 }).is_err());
        assert_eq!(dumbbell(&geom(12), DumbbellShape { head: 3 }).unwrap().c.len(), 3);
    }

    #[test]
    fn ring_arcs_balanced() {
        let r = make_regions(&geom(8), GeometryTag::Ring).unwrap();
        let sizes = [r.a.len(), r.b.len(), r.c.len()];
        assert_eq!(sizes, [4, 4, 4]);
        let r = make_regions(&geom(12), GeometryTag::Ring).unwrap();
        assert_eq!([r.a.len(), r.b.len(), r.c.len()], [20, 20, 20]);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn product_state_diagnostics_vanish() {
        let g = geom(8);
        let s = StabilizerTableau::product_state(64, Basis::Z).unwrap();
        for tag in [GeometryTag::Cylinder, GeometryTag::Ring, GeometryTag::Diagonal, GeometryTag::Dumbbell] {
            assert_eq!(s_top_seven(&s, &make_regions(&g, tag).unwrap()), 0);
        }
        assert_eq!(entanglement_profile(&s, &g, CutDirection::Column), vec![0; 7]);
        assert_eq!(half_system_entropy(&s, &g), 0);
        assert_eq!(s_anc(&s, &[]), 0);
    }

    #[test]
    fn seven_term_is_permutation_symmetric() {
        use crate::lattice::{trajectory_rng, scramble_with_ancillas};
        let g = geom(8);
        let s0 = StabilizerTableau::product_state(64, Basis::Z).unwrap();
        let s = scramble_with_ancillas(&s0, 0, 40, &mut trajectory_rng(9, 0, 0));
        let r = make_regions(&g, GeometryTag::Ring).unwrap();
        let v = s_top_seven(&s, &r);
        for (a, b, c) in [(&r.b, &r.a, &r.c), (&r.c, &r.b, &r.a), (&r.a, &r.c, &r.b)] {
            let p = RegionSet::new(r.tag, a.clone(), b.clone(), c.clone());
            assert_eq!(s_top_seven(&s, &p), v);
        }
    }

    #[test]
    fn diagnostic_names() {
        for k in ["s_top", "s_dumb", "s_anc", "profile", "half_system"] {
            assert_eq!(DiagnosticKind::parse(k).unwrap().name(), k);
        }
        assert!(GeometryTag::parse("torus").is_err());
    }
}
