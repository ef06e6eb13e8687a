//! Nelder-Mead minimisation, `2 eps*` error widths and the scaling fit driver.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::linalg::lstsq;
use super::{cst, objective, DataPoint, FssError, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions<T> {
    /// Stop once every vertex is within `tol` (max-norm) of the best one.
    pub tol: T,
    pub max_evals: usize,
    /// Initial simplex offsets per coordinate; empty means 5% of each
    /// coordinate (or 0.00025 for zero coordinates).
    pub initial_step: Vec<T>,
}

impl<T: Float> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            tol: cst(1e-5),
            max_evals: 10_000,
            initial_step: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult<T> {
    pub x: Vec<T>,
    pub fx: T,
    pub evaluations: usize,
    pub converged: bool,
}

fn checked<T: Float>(fx: T, x: &[T]) -> Result<T, FssError> {
    if fx.is_finite() {
        Ok(fx)
    } else {
        Err(FssError::NonFinite(x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()))
    }
}

/// Reflection 1, expansion 2, contraction 1/2, shrink 1/2.
pub fn nelder_mead<T: Float, F: FnMut(&[T]) -> T>(
    mut f: F,
    x0: &[T],
    opts: &NelderMeadOptions<T>,
) -> Result<NelderMeadResult<T>, FssError> {
    let n = x0.len();
    let half: T = cst(0.5);
    let two: T = cst(2.0);
    let mut evals = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| -> Result<T, FssError> {
        *evals += 1;
        checked(f(x), x)
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)?));
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = opts.initial_step.get(i).copied().unwrap_or_else(|| {
            if v[i] == T::zero() {
                cst(0.00025)
            } else {
                v[i] * cst(0.05)
            }
        });
        v[i] = v[i] + step;
        let fv = eval(&v, &mut evals)?;
        simplex.push((v, fv));
    }
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite values"));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(best).map(|(&a, &b)| (a - b).abs()))
            .fold(T::zero(), T::max);
        if diameter < opts.tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        let mut centroid = vec![T::zero(); n];
        for (v, _) in &simplex[..n] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c = *c + x;
            }
        }
        let nf: T = T::from(n).expect("small integer");
        centroid.iter_mut().for_each(|c| *c = *c / nf);
        let along = |t: T, from: &[T]| -> Vec<T> {
            centroid.iter().zip(from).map(|(&c, &w)| c + t * (c - w)).collect()
        };
        let worst = simplex[n].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;
        let xr = along(T::one(), &worst.0);
        let fr = eval(&xr, &mut evals)?;
        if fr < f_best {
            let xe = along(two, &worst.0);
            let fe = eval(&xe, &mut evals)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(half, &worst.0);
            let fc = eval(&xc, &mut evals)?;
            (xc, if fc <= fr { fc } else { T::infinity() })
        } else {
            let xc = along(-half, &worst.0);
            let fc = eval(&xc, &mut evals)?;
            (xc, if fc < worst.1 { fc } else { T::infinity() })
        };
        if fc.is_finite() {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v: Vec<T> = x_best
                .iter()
                .zip(&vertex.0)
                .map(|(&b, &x)| b + half * (x - b))
                .collect();
            let fv = eval(&v, &mut evals)?;
            *vertex = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite values"));
    let (x, fx) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        fx,
        evaluations: evals,
        converged,
    })
}

/// Half-width of the `eps <= 2 eps*` interval along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Width<T> {
    pub half_width: T,
    /// Distances from the minimum to the lower and upper crossings.
    pub lower: T,
    pub upper: T,
    /// No crossing was found on at least one side; the reported extent is
    /// the largest distance probed.
    pub unbounded: bool,
}

const MAX_DOUBLINGS: usize = 40;

/// Distance along `dir` where `f` first reaches `level`, by doubling then
/// bisection. `None` when no crossing is found.
fn crossing<T: Float, F: FnMut(&[T]) -> T>(
    f: &mut F,
    x: &[T],
    axis: usize,
    dir: T,
    level: T,
    step: T,
) -> Result<(T, bool), FssError> {
    let probe = |f: &mut F, h: T| -> Result<T, FssError> {
        let mut v = x.to_vec();
        v[axis] = v[axis] + dir * h;
        checked(f(&v), &v)
    };
    let mut lo = T::zero();
    let mut hi = step;
    let mut found = false;
    for _ in 0..MAX_DOUBLINGS {
        if probe(f, hi)? >= level {
            found = true;
            break;
        }
        lo = hi;
        hi = hi * cst(2.0);
    }
    if !found {
        return Ok((lo, false));
    }
    for _ in 0..60 {
        let mid = (lo + hi) / cst(2.0);
        if probe(f, mid)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= hi * cst(1e-10) {
            break;
        }
    }
    Ok(((lo + hi) / cst(2.0), true))
}

/// Error widths along each coordinate: the `eps <= 2 eps*` interval is first
/// bracketed on the objective itself, then refined from a quadratic fitted to
/// eleven samples spanning the bracket. The quadratic's crossings are used
/// when it is convex and crosses within twice the raw bracket.
pub fn error_widths<T: Float, F: FnMut(&[T]) -> T>(
    mut f: F,
    minimum: &[T],
    f_min: T,
    steps: &[T],
) -> Result<Vec<Width<T>>, FssError> {
    if !(f_min > T::zero()) {
        return Err(FssError::ZeroMinimum);
    }
    let level = f_min * cst(2.0);
    let mut out = Vec::with_capacity(minimum.len());
    for axis in 0..minimum.len() {
        let step = steps.get(axis).copied().unwrap_or_else(|| cst(1e-3));
        let (down, ok_down) = crossing(&mut f, minimum, axis, -T::one(), level, step)?;
        let (up, ok_up) = crossing(&mut f, minimum, axis, T::one(), level, step)?;
        if !(ok_down && ok_up) {
            out.push(Width {
                half_width: (down + up) / cst(2.0),
                lower: down,
                upper: up,
                unbounded: true,
            });
            continue;
        }
        let (lower, upper) = refine_quadratic(&mut f, minimum, axis, level, down, up)?.unwrap_or((down, up));
        out.push(Width {
            half_width: (lower + upper) / cst(2.0),
            lower,
            upper,
            unbounded: false,
        });
    }
    Ok(out)
}

fn refine_quadratic<T: Float, F: FnMut(&[T]) -> T>(
    f: &mut F,
    x: &[T],
    axis: usize,
    level: T,
    down: T,
    up: T,
) -> Result<Option<(T, T)>, FssError> {
    const SAMPLES: usize = 11;
    let mut design = Vec::with_capacity(3 * SAMPLES);
    let mut ys = Vec::with_capacity(SAMPLES);
    let span = down + up;
    for i in 0..SAMPLES {
        let t = -down + span * T::from(i).expect("small") / T::from(SAMPLES - 1).expect("small");
        let mut v = x.to_vec();
        v[axis] = v[axis] + t;
        let fv = checked(f(&v), &v)?;
        // skip penalty values from invalid parameters
        if fv < T::max_value() / cst(2.0) {
            design.extend([T::one(), t, t * t]);
            ys.push(fv);
        }
    }
    let Some(c) = lstsq(&design, &ys, 3) else {
        return Ok(None);
    };
    let (a, b, q) = (c[0] - level, c[1], c[2]);
    if !(q > T::zero()) {
        return Ok(None);
    }
    let disc = b * b - cst::<T>(4.0) * q * a;
    if !(disc > T::zero()) {
        return Ok(None);
    }
    let r = disc.sqrt();
    let lo = (-b - r) / (q + q);
    let hi = (-b + r) / (q + q);
    let (lower, upper) = (-lo, hi);
    let two: T = cst(2.0);
    if lower > T::zero() && upper > T::zero() && lower <= two * down && upper <= two * up {
        Ok(Some((lower, upper)))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions<T> {
    pub method: Method,
    pub p_c: T,
    pub nu: T,
    pub gamma: T,
    /// Fit `gamma` as a third parameter instead of holding it fixed.
    pub fit_gamma: bool,
    pub nelder_mead: NelderMeadOptions<T>,
    /// Initial probe step per parameter for the width search.
    pub width_steps: Vec<T>,
    /// Optional coarse grid `(p_c lo, p_c hi, nu lo, nu hi, n)` whose best
    /// cell replaces the initial guess.
    pub scan: Option<(T, T, T, T, usize)>,
}

impl<T: Float> FitOptions<T> {
    pub fn new(method: Method, p_c: T, nu: T) -> Self {
        Self {
            method,
            p_c,
            nu,
            gamma: T::zero(),
            fit_gamma: false,
            nelder_mead: NelderMeadOptions {
                initial_step: vec![cst(0.02), cst(0.1), cst(0.05)],
                ..NelderMeadOptions::default()
            },
            width_steps: vec![cst(1e-3), cst(1e-2), cst(1e-2)],
            scan: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFitResult<T> {
    pub method: Method,
    pub p_c: T,
    pub nu: T,
    pub gamma: T,
    pub epsilon: T,
    pub p_c_width: Width<T>,
    pub nu_width: Width<T>,
    pub gamma_width: Option<Width<T>>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Objective as a function of `[p_c, nu]` or `[p_c, nu, gamma]`, with invalid
/// regions mapped to `T::max_value()`.
fn penalised<'a, T: Float>(
    points: &'a [DataPoint<T>],
    method: Method,
    fixed_gamma: T,
) -> impl FnMut(&[T]) -> T + 'a {
    move |v: &[T]| {
        let gamma = v.get(2).copied().unwrap_or(fixed_gamma);
        if !(v[1] > T::zero()) {
            return T::max_value();
        }
        match objective(method, points, v[0], v[1], gamma) {
            Ok(e) => e,
            Err(FssError::NoOverlap | FssError::Degenerate | FssError::InvalidNu(_)) => T::max_value(),
            Err(_) => T::nan(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCell<T> {
    pub p_c: T,
    pub nu: T,
    /// `None` where the objective is undefined.
    pub epsilon: Option<T>,
}

/// Objective on an `n x n` grid (inclusive bounds), `p_c` varying fastest.
pub fn landscape<T: Float>(
    points: &[DataPoint<T>],
    method: Method,
    gamma: T,
    p_c: (T, T),
    nu: (T, T),
    n: usize,
) -> Vec<LandscapeCell<T>> {
    let at = |lo: T, hi: T, i: usize| {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * T::from(i).expect("small") / T::from(n - 1).expect("small")
        }
    };
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (pc, v) = (at(p_c.0, p_c.1, i), at(nu.0, nu.1, j));
            out.push(LandscapeCell {
                p_c: pc,
                nu: v,
                epsilon: objective(method, points, pc, v, gamma).ok().filter(|e| e.is_finite()),
            });
        }
    }
    out
}

/// Nelder-Mead on the chosen objective followed by error widths.
pub fn fit_scaling<T: Float>(points: &[DataPoint<T>], opts: &FitOptions<T>) -> Result<ScalingFitResult<T>, FssError> {
    // structural problems (too few points, one size) surface here
    match objective(opts.method, points, opts.p_c, opts.nu, opts.gamma) {
        Ok(_) | Err(FssError::NoOverlap | FssError::Degenerate) => {}
        Err(e) => return Err(e),
    }
    let (mut p0, mut nu0) = (opts.p_c, opts.nu);
    if let Some((plo, phi, nlo, nhi, n)) = opts.scan {
        let best = landscape(points, opts.method, opts.gamma, (plo, phi), (nlo, nhi), n)
            .into_iter()
            .filter_map(|c| c.epsilon.map(|e| (e, c.p_c, c.nu)))
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        if let Some((_, p, v)) = best {
            p0 = p;
            nu0 = v;
        }
    }
    let mut x0 = vec![p0, nu0];
    if opts.fit_gamma {
        x0.push(opts.gamma);
    }
    let f = penalised(points, opts.method, opts.gamma);
    let nm = nelder_mead(f, &x0, &opts.nelder_mead)?;
    if nm.fx >= T::max_value() {
        return Err(FssError::NoOverlap);
    }
    let widths = error_widths(penalised(points, opts.method, opts.gamma), &nm.x, nm.fx, &opts.width_steps)?;
    Ok(ScalingFitResult {
        method: opts.method,
        p_c: nm.x[0],
        nu: nm.x[1],
        gamma: nm.x.get(2).copied().unwrap_or(opts.gamma),
        epsilon: nm.fx,
        p_c_width: widths[0],
        nu_width: widths[1],
        gamma_width: widths.get(2).copied(),
        evaluations: nm.evaluations,
        converged: nm.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(
            |v: &[f64]| (v[0] - 0.3).powi(2) + (v[1] + 1.7).powi(2),
            &[2.0, 2.0],
            &NelderMeadOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-4 && (r.x[1] + 1.7).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn rosenbrock_and_budget() {
        let rosen = |v: &[f64]| 100.0 * (v[1] - v[0] * v[0]).powi(2) + (1.0 - v[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], &NelderMeadOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-3, "{:?}", r.x);
        let opts = NelderMeadOptions {
            max_evals: 20,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &opts).unwrap();
        assert!(!r.converged);
        assert!(r.evaluations <= 20 + 3);
    }

    #[test]
    fn non_finite_is_an_error() {
        let r = nelder_mead(|v: &[f64]| if v[0] > 0.5 { f64::NAN } else { -v[0] }, &[0.0], &NelderMeadOptions::default());
        assert!(matches!(r, Err(FssError::NonFinite(_))));
    }

    #[test]
    fn widths_closed_form() {
        let (eps, w0, w1) = (0.3, 0.02, 0.15);
        let f = |v: &[f64]| eps * (1.0 + ((v[0] - 0.5) / w0).powi(2) + ((v[1] - 0.9) / w1).powi(2));
        let w = error_widths(f, &[0.5, 0.9], eps, &[1e-3, 1e-3]).unwrap();
        assert_relative_eq!(w[0].half_width, w0, max_relative = 1e-9);
        assert_relative_eq!(w[1].half_width, w1, max_relative = 1e-9);
        assert!(!w[0].unbounded);
    }

    #[test]
    fn widths_asymmetric_and_flat() {
        let f = |v: &[f64]| if v[0] < 0.0 { 1.0 + (v[0] / 0.1).powi(2) } else { 1.0 + (v[0] / 0.3).powi(2) };
        let w = error_widths(f, &[0.0], 1.0, &[1e-3]).unwrap();
        assert!((w[0].half_width - 0.2).abs() < 0.05, "{:?}", w[0]);
        let flat = error_widths(|_: &[f64]| 1.0, &[0.0], 1.0, &[1e-3]).unwrap();
        assert!(flat[0].unbounded);
        assert_eq!(error_widths(|_: &[f64]| 1.0, &[0.0], 0.0, &[1e-3]), Err(FssError::ZeroMinimum));
    }

    #[test]
    fn landscape_layout() {
        let pts: Vec<DataPoint<f64>> = (0..10)
            .map(|i| DataPoint {
                l: 8 + 8 * (i % 2),
                p: 0.1 * i as f64,
                delta: (i as f64).sin(),
                sigma: 0.1,
                count: 5,
            })
            .collect();
        let g = landscape(&pts, Method::Nearest, 0.0, (0.0, 1.0), (0.5, 1.5), 3);
        assert_eq!(g.len(), 9);
        assert_eq!((g[1].p_c, g[1].nu), (0.5, 0.5));
        assert_eq!((g[3].p_c, g[3].nu), (0.0, 1.0));
        assert!(g.iter().all(|c| c.epsilon.is_some()));
    }
}
