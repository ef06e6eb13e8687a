//! Ancilla survival times: `tau` from the exponential tail of `S_anc(t)` and
//! a collapse of `tau(L, p)` against `|p - p_c|^(-nu) L^3 log L`.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::linalg::line_fit;
use super::optimize::{nelder_mead, NelderMeadOptions};
use super::{cst, FssError};

/// Averaged ancilla entropy at increasing times for one `(L, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries<T> {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: T,
    pub times: Vec<T>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOptions<T> {
    /// Window as fractions of the decay range: from the first sample to the
    /// last sample before the series first reaches zero.
    pub window: (T, T),
    /// Lower bound on the `log L` factor.
    pub log_floor: T,
}

impl<T: Float> Default for SurvivalOptions<T> {
    fn default() -> Self {
        Self {
            window: (cst(0.2), cst(0.8)),
            log_floor: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate<T> {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: T,
    pub tau: T,
    pub window: (T, T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalFit<T> {
    pub taus: Vec<TauEstimate<T>>,
    pub p_c: T,
    pub nu: T,
    /// Prefactor `A` in `tau = A |p - p_c|^(-nu) L^3 max(log L, floor)`.
    pub amplitude: T,
    /// Variance of the log-residuals at the optimum.
    pub residual: T,
}

/// `tau = -1 / slope` of `log S(t)` regressed on `t` inside the window.
pub fn decay_time<T: Float>(series: &DecaySeries<T>, window: (T, T)) -> Result<TauEstimate<T>, FssError> {
    let p64 = series.p.to_f64().unwrap_or(f64::NAN);
    let empty = FssError::EmptyWindow { l: series.l, p: p64 };
    let n = series.times.len().min(series.values.len());
    let t0 = *series.times.first().ok_or(empty.clone())?;
    let end = series.values[..n]
        .iter()
        .position(|&v| !(v > T::zero()))
        .unwrap_or(n);
    if end < 2 {
        return Err(empty);
    }
    let span = series.times[end - 1] - t0;
    let (lo, hi) = (t0 + window.0 * span, t0 + window.1 * span);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let t = series.times[i];
        if t < lo || t > hi {
            continue;
        }
        let v = series.values[i];
        if !(v > T::zero()) {
            return Err(FssError::NonPositive { l: series.l, p: p64 });
        }
        xs.push(t);
        ys.push(v.ln());
    }
    if xs.len() < 2 {
        return Err(empty);
    }
    let (_, slope) = line_fit(&xs, &ys).ok_or(FssError::Degenerate)?;
    if !(slope < T::zero()) {
        return Err(FssError::Degenerate);
    }
    Ok(TauEstimate {
        l: series.l,
        p: series.p,
        tau: -slope.recip(),
        window: (lo, hi),
    })
}

fn size_factor<T: Float>(l: usize, floor: T) -> T {
    let lf = T::from(l).expect("system size fits the float type");
    lf.powi(3) * lf.ln().max(floor)
}

/// Log-residuals `log tau + nu log|p - p_c| - log(L^3 g(L))` and their mean.
fn log_residuals<T: Float>(taus: &[TauEstimate<T>], p_c: T, nu: T, floor: T) -> Option<(Vec<T>, T)> {
    let mut r = Vec::with_capacity(taus.len());
    for e in taus {
        let d = (e.p - p_c).abs();
        if !(d > T::zero()) {
            return None;
        }
        r.push(e.tau.ln() + nu * d.ln() - size_factor(e.l, floor).ln());
    }
    let mean = r.iter().fold(T::zero(), |a, &v| a + v) / T::from(r.len()).expect("small");
    Some((r, mean))
}

fn residual_variance<T: Float>(taus: &[TauEstimate<T>], p_c: T, nu: T, floor: T) -> T {
    match log_residuals(taus, p_c, nu, floor) {
        Some((r, mean)) => r.iter().fold(T::zero(), |a, &v| a + (v - mean).powi(2)) / T::from(r.len()).expect("small"),
        None => T::max_value(),
    }
}

/// Extracts `tau` for every series, then fits `(p_c, nu)` by minimising the
/// variance of the log-residuals. Starts from the best cell of a grid over
/// `p_c` between the sampled `p` values and `nu` in `[0.2, 2]`.
pub fn fit_survival<T: Float>(series: &[DecaySeries<T>], opts: &SurvivalOptions<T>) -> Result<SurvivalFit<T>, FssError> {
    let taus = series
        .iter()
        .map(|s| decay_time(s, opts.window))
        .collect::<Result<Vec<_>, _>>()?;
    if taus.len() < 3 {
        return Err(FssError::TooFewPoints {
            needed: 3,
            got: taus.len(),
        });
    }
    let (pmin, pmax) = taus
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), e| (a.min(e.p), b.max(e.p)));
    let floor = opts.log_floor;
    let mut best = (T::max_value(), pmin, T::one());
    const GRID: usize = 60;
    for i in 0..=GRID {
        let pc = pmin + (pmax - pmin) * T::from(i).expect("small") / T::from(GRID).expect("small");
        for j in 0..=GRID {
            let nu = cst::<T>(0.2) + cst::<T>(1.8) * T::from(j).expect("small") / T::from(GRID).expect("small");
            let v = residual_variance(&taus, pc, nu, floor);
            if v < best.0 {
                best = (v, pc, nu);
            }
        }
    }
    let opts_nm = NelderMeadOptions {
        tol: cst(1e-8),
        initial_step: vec![(pmax - pmin) / cst(GRID as f64), cst(0.03)],
        ..NelderMeadOptions::default()
    };
    let nm = nelder_mead(
        |v: &[T]| {
            if v[1] > T::zero() {
                residual_variance(&taus, v[0], v[1], floor)
            } else {
                T::max_value()
            }
        },
        &[best.1, best.2],
        &opts_nm,
    )?;
    let (p_c, nu) = (nm.x[0], nm.x[1]);
    let (_, mean) = log_residuals(&taus, p_c, nu, floor).ok_or(FssError::Degenerate)?;
    Ok(SurvivalFit {
        taus,
        p_c,
        nu,
        amplitude: mean.exp(),
        residual: nm.fx,
    })
}
