//! Finite-size-scaling collapse of `Delta(L, p) ~ L^gamma F((p - p_c) L^(1/nu))`.
//!
//! Three objectives measure how well rescaled data fall on one curve:
//! nearest-neighbour interpolation, multilevel regression against larger
//! sizes, and a global weighted polynomial. Fits minimise one of them with
//! Nelder-Mead and read error bars off the `2 eps*` level set.

mod linalg;
mod optimize;
mod profile;
mod survival;

use std::cmp::Ordering;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use linalg::{line_fit, lstsq, polyval, weighted_lstsq};
pub use optimize::{
    error_widths, fit_scaling, landscape, nelder_mead, FitOptions, LandscapeCell, NelderMeadOptions, NelderMeadResult,
    ScalingFitResult, Width,
};
pub use profile::{chord, fit_profile, ProfileFit, ProfileModel};
pub use survival::{decay_time, fit_survival, DecaySeries, SurvivalFit, SurvivalOptions, TauEstimate};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FssError {
    #[error("nu must be positive, got {0}")]
    InvalidNu(f64),
    #[error("need at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least two distinct system sizes")]
    SingleSize,
    #[error("no point has a bracketing pair at a larger size")]
    NoOverlap,
    #[error("least-squares design matrix is degenerate")]
    Degenerate,
    #[error("objective returned a non-finite value at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("minimum value must be positive to define error widths")]
    ZeroMinimum,
    #[error("series ({l}, {p}) has a non-positive value inside the fit window")]
    NonPositive { l: usize, p: f64 },
    #[error("series ({l}, {p}) has fewer than two samples inside the fit window")]
    EmptyWindow { l: usize, p: f64 },
    #[error("profile needs L >= 8 and L - 1 entries (L = {l}, {len} entries)")]
    ProfileShape { l: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint<T> {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: T,
    pub delta: T,
    pub sigma: T,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledPoint<T> {
    #[serde(rename = "L")]
    pub l: usize,
    pub x: T,
    pub y: T,
    pub sigma: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Nearest,
    Multilevel,
    Polynomial,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Nearest, Method::Multilevel, Method::Polynomial];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nearest => "nearest",
            Method::Multilevel => "multilevel",
            Method::Polynomial => "polynomial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

pub(crate) fn cst<T: Float>(v: f64) -> T {
    T::from(v).expect("representable constant")
}

fn size<T: Float>(l: usize) -> T {
    T::from(l).expect("system size fits the float type")
}

fn total_order<T: Float>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// `x = (p - p_c) L^(1/nu)`, `y = Delta L^(-gamma)`, `sigma` scaled like `y`;
/// stable-sorted by `x`.
pub fn scale_points<T: Float>(points: &[DataPoint<T>], p_c: T, nu: T, gamma: T) -> Result<Vec<ScaledPoint<T>>, FssError> {
    if !(nu > T::zero()) {
        return Err(FssError::InvalidNu(nu.to_f64().unwrap_or(f64::NAN)));
    }
    let mut out: Vec<ScaledPoint<T>> = points
        .iter()
        .map(|d| {
            let l = size::<T>(d.l);
            let ys = l.powf(-gamma);
            ScaledPoint {
                l: d.l,
                x: (d.p - p_c) * l.powf(nu.recip()),
                y: d.delta * ys,
                sigma: d.sigma * ys,
            }
        })
        .collect();
    out.sort_by(|a, b| total_order(a.x, b.x));
    Ok(out)
}

/// Inverse of [`scale_points`] for one point.
pub fn unscale_point<T: Float>(s: &ScaledPoint<T>, p_c: T, nu: T, gamma: T) -> (T, T) {
    let l = size::<T>(s.l);
    (s.x / l.powf(nu.recip()) + p_c, s.y * l.powf(gamma))
}

/// Sorted by `(x, y, sigma)` so ties do not depend on input order.
fn scaled_sorted<T: Float>(points: &[DataPoint<T>], p_c: T, nu: T, gamma: T) -> Result<Vec<ScaledPoint<T>>, FssError> {
    let mut s = scale_points(points, p_c, nu, gamma)?;
    s.sort_by(|a, b| {
        total_order(a.x, b.x)
            .then(total_order(a.y, b.y))
            .then(total_order(a.sigma, b.sigma))
    });
    Ok(s)
}

/// Points with a usable error estimate.
fn weighted_points<T: Float>(points: &[DataPoint<T>]) -> Vec<DataPoint<T>> {
    points
        .iter()
        .filter(|d| d.count >= 2 && d.sigma > T::zero())
        .copied()
        .collect()
}

/// Mean squared residual of each interior point against the line through its
/// two neighbours in the `x`-sorted scaled data. No error weighting.
pub fn objective_nearest<T: Float>(points: &[DataPoint<T>], p_c: T, nu: T, gamma: T) -> Result<T, FssError> {
    if points.len() < 3 {
        return Err(FssError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let s = scaled_sorted(points, p_c, nu, gamma)?;
    let mut sum = T::zero();
    for w in s.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let dx = c.x - a.x;
        let fit = if dx > T::zero() {
            a.y + (c.y - a.y) / dx * (b.x - a.x)
        } else {
            (a.y + c.y) / cst(2.0)
        };
        sum = sum + (b.y - fit).powi(2);
    }
    Ok(sum / size(s.len() - 2))
}

/// For each point, the bracketing pair at every larger size is gathered and
/// fitted with a straight line; the objective is the mean of the squared
/// error-weighted residuals over points that have at least one bracketing
/// level. The largest size contributes no residuals.
pub fn objective_multilevel<T: Float>(points: &[DataPoint<T>], p_c: T, nu: T, gamma: T) -> Result<T, FssError> {
    let pts = weighted_points(points);
    let mut sizes: Vec<usize> = pts.iter().map(|d| d.l).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(FssError::SingleSize);
    }
    let s = scaled_sorted(&pts, p_c, nu, gamma)?;
    let levels: Vec<Vec<ScaledPoint<T>>> = sizes
        .iter()
        .map(|&l| s.iter().filter(|q| q.l == l).copied().collect())
        .collect();
    let mut sum = T::zero();
    let mut used = 0usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (li, level) in levels.iter().enumerate() {
        for q in level {
            xs.clear();
            ys.clear();
            for upper in &levels[li + 1..] {
                // first index with x > q.x
                let j = upper.partition_point(|u| u.x <= q.x);
                if j == 0 || j == upper.len() {
                    continue;
                }
                for u in &upper[j - 1..=j] {
                    xs.push(u.x);
                    ys.push(u.y);
                }
            }
            if xs.is_empty() {
                continue;
            }
            let fit = match line_fit(&xs, &ys) {
                Some((a, b)) => a + b * q.x,
                // all gathered points share one x
                None => ys.iter().fold(T::zero(), |acc, &v| acc + v) / size(ys.len()),
            };
            sum = sum + ((q.y - fit) / q.sigma).powi(2);
            used += 1;
        }
    }
    if used == 0 {
        return Err(FssError::NoOverlap);
    }
    Ok(sum / size(used))
}

/// Chi-square of a `degree` polynomial fitted to all scaled data with
/// weights `1 / sigma`. Not divided by the number of points.
pub fn objective_polynomial<T: Float>(
    points: &[DataPoint<T>],
    p_c: T,
    nu: T,
    gamma: T,
    degree: usize,
) -> Result<T, FssError> {
    let pts = weighted_points(points);
    if pts.len() <= degree + 1 {
        return Err(FssError::TooFewPoints {
            needed: degree + 2,
            got: pts.len(),
        });
    }
    let s = scaled_sorted(&pts, p_c, nu, gamma)?;
    let (lo, hi) = (s[0].x, s[s.len() - 1].x);
    let half = (hi - lo) / cst(2.0);
    if !(half > T::zero()) {
        return Err(FssError::Degenerate);
    }
    let mid = (hi + lo) / cst(2.0);
    let t: Vec<T> = s.iter().map(|q| (q.x - mid) / half).collect();
    let cols = degree + 1;
    let mut design = Vec::with_capacity(s.len() * cols);
    for &ti in &t {
        let mut v = T::one();
        for _ in 0..cols {
            design.push(v);
            v = v * ti;
        }
    }
    let y: Vec<T> = s.iter().map(|q| q.y).collect();
    let w: Vec<T> = s.iter().map(|q| q.sigma.recip()).collect();
    let coeffs = weighted_lstsq(&design, &y, &w, cols).ok_or(FssError::Degenerate)?;
    Ok(s.iter().zip(&t).fold(T::zero(), |acc, (q, &ti)| {
        acc + ((q.y - polyval(&coeffs, ti)) / q.sigma).powi(2)
    }))
}

/// Dispatches to the objective for `method` (polynomial degree 8).
pub fn objective<T: Float>(method: Method, points: &[DataPoint<T>], p_c: T, nu: T, gamma: T) -> Result<T, FssError> {
    match method {
        Method::Nearest => objective_nearest(points, p_c, nu, gamma),
        Method::Multilevel => objective_multilevel(points, p_c, nu, gamma),
        Method::Polynomial => objective_polynomial(points, p_c, nu, gamma, 8),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(l: usize, p: f64, delta: f64, sigma: f64) -> DataPoint<f64> {
        DataPoint {
            l,
            p,
            delta,
            sigma,
            count: 10,
        }
    }

    #[test]
    fn scaling_examples() {
        let pts = [pt(8, 0.5, 3.0, 0.1), pt(16, 0.6, 2.0, 0.1)];
        let s = scale_points(&pts, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(s[0].x, 0.0);
        assert_eq!(s[0].y, 3.0);
        assert_relative_eq!(s[1].x, 1.6, epsilon = 1e-12);
        let s = scale_points(&pts, 0.5, 0.5, 1.0).unwrap();
        assert_relative_eq!(s[1].x, 0.1 * 256.0, epsilon = 1e-9);
        assert_relative_eq!(s[1].y, 2.0 / 16.0, epsilon = 1e-12);
        assert!(matches!(scale_points(&pts, 0.5, 0.0, 0.0), Err(FssError::InvalidNu(_))));
        assert!(scale_points(&pts, 0.5, -1.0, 0.0).is_err());
        // equal (p - p_c) L^(1/nu)
        let pts = [pt(4, 0.5 + 0.2, 1.0, 0.1), pt(16, 0.5 + 0.1, 1.0, 0.1)];
        let s = scale_points(&pts, 0.5, 2.0, 0.0).unwrap();
        assert_relative_eq!(s[0].x, s[1].x, epsilon = 1e-15);
    }

    #[test]
    fn nearest_examples() {
        let line: Vec<_> = (0..6).map(|i| pt(8, i as f64 * 0.1, 2.0 * i as f64, 0.1)).collect();
        assert!(objective_nearest(&line, 0.0, 1.0, 0.0).unwrap() < 1e-20);
        // middle displaced by d = 0.3; scaled x = p * 8
        let three = [pt(8, 0.0, 0.0, 0.1), pt(8, 0.1, 0.3, 0.1), pt(8, 0.3, 0.0, 0.1)];
        assert_relative_eq!(objective_nearest(&three, 0.0, 1.0, 0.0).unwrap(), 0.09, epsilon = 1e-12);
        assert!(objective_nearest(&three[..2], 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn multilevel_examples() {
        let f = |x: f64| 0.3 * x - 1.0;
        let mut pts = Vec::new();
        for l in [8usize, 16, 32] {
            for i in 0..9 {
                let p = 0.3 + 0.05 * i as f64;
                pts.push(pt(l, p, f((p - 0.5) * (l as f64).powf(1.0 / 0.8)), 0.01));
            }
        }
        let exact = objective_multilevel(&pts, 0.5, 0.8, 0.0).unwrap();
        let off = objective_multilevel(&pts, 0.52, 0.8, 0.0).unwrap();
        assert!(exact < 1e-20, "{exact}");
        assert!(off > 1.0, "{off}");
        let single: Vec<_> = pts.iter().filter(|d| d.l == 8).copied().collect();
        assert_eq!(objective_multilevel(&single, 0.5, 0.8, 0.0), Err(FssError::SingleSize));
        // largest size alone has no larger levels: removing its residual-free
        // points from the bottom changes nothing
        let two: Vec<_> = pts.iter().filter(|d| d.l != 8).copied().collect();
        assert!(objective_multilevel(&two, 0.5, 0.8, 0.0).unwrap() >= 0.0);
    }

    #[test]
    fn polynomial_examples() {
        let poly = |x: f64| 1.0 - 0.5 * x + 0.2 * x.powi(3) - 0.01 * x.powi(8);
        let mut pts = Vec::new();
        for l in [8usize, 12, 16] {
            for i in 0..7 {
                let p = 0.4 + 0.03 * i as f64;
                let x = (p - 0.5) * (l as f64).powf(1.0 / 0.85);
                pts.push(pt(l, p, poly(x), 0.05));
            }
        }
        let e = objective_polynomial(&pts, 0.5, 0.85, 0.0, 8).unwrap();
        assert!(e < 1e-8, "{e}");
        let noisy: Vec<_> = pts
            .iter()
            .enumerate()
            .map(|(i, d)| DataPoint {
                delta: d.delta + 0.01 * ((i * 7919) % 13) as f64 / 13.0,
                ..*d
            })
            .collect();
        let e1 = objective_polynomial(&noisy, 0.5, 0.85, 0.0, 8).unwrap();
        let doubled: Vec<_> = noisy.iter().map(|d| DataPoint { sigma: 2.0 * d.sigma, ..*d }).collect();
        let e2 = objective_polynomial(&doubled, 0.5, 0.85, 0.0, 8).unwrap();
        assert_relative_eq!(e1 / 4.0, e2, max_relative = 1e-9);
        assert!(objective_polynomial(&pts[..9], 0.5, 0.85, 0.0, 8).is_err());
    }

    #[test]
    fn excludes_single_sample_points() {
        let mut pts: Vec<_> = (0..12).map(|i| pt(8 + 4 * (i % 2), 0.1 * i as f64, i as f64, 0.1)).collect();
        let before = objective_polynomial(&pts, 0.5, 1.0, 0.0, 8).unwrap();
        pts.push(DataPoint {
            count: 1,
            ..pt(8, 0.55, 100.0, 0.0)
        });
        assert_eq!(objective_polynomial(&pts, 0.5, 1.0, 0.0, 8).unwrap(), before);
    }

    #[test]
    fn f32_objectives() {
        let pts: Vec<DataPoint<f32>> = (0..5)
            .map(|i| DataPoint {
                l: 8,
                p: i as f32 * 0.1,
                delta: i as f32,
                sigma: 0.1,
                count: 4,
            })
            .collect();
        assert!(objective_nearest(&pts, 0.0f32, 1.0, 0.0).unwrap() < 1e-8);
    }
}
