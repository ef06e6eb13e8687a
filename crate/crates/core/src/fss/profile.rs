//! Critical entanglement profiles `S(l)` regressed on
//! `u(l) = log((L / pi) sin(pi l / L))`.

use num_traits::{Float, FloatConst};
use serde::{Deserialize, Serialize};

use super::linalg::lstsq;
use super::{polyval, FssError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileModel {
    /// `S = a + b u`
    LinearLog,
    /// `S = a + b u + c u^2`
    QuadraticLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit<T> {
    pub model: ProfileModel,
    /// Constant first, then increasing powers of `u`.
    pub coefficients: Vec<T>,
    /// Sum of squared residuals.
    pub residual: T,
}

pub fn chord<T: Float + FloatConst>(l: usize, width: usize) -> T {
    let lf = T::from(l).expect("small integer");
    let w = T::from(width).expect("small integer");
    ((lf / T::PI()) * (T::PI() * w / lf).sin()).ln()
}

/// `profile[i]` is `S(i + 1)` for `i = 0..L-1`.
pub fn fit_profile<T: Float + FloatConst>(profile: &[T], l: usize, model: ProfileModel) -> Result<ProfileFit<T>, FssError> {
    if l < 8 || profile.len() != l - 1 {
        return Err(FssError::ProfileShape { l, len: profile.len() });
    }
    let cols = match model {
        ProfileModel::LinearLog => 2,
        ProfileModel::QuadraticLog => 3,
    };
    let u: Vec<T> = (1..l).map(|w| chord(l, w)).collect();
    let design: Vec<T> = u
        .iter()
        .flat_map(|&x| [T::one(), x, x * x].into_iter().take(cols))
        .collect();
    let coefficients = lstsq(&design, profile, cols).ok_or(FssError::Degenerate)?;
    let residual = u
        .iter()
        .zip(profile)
        .fold(T::zero(), |acc, (&x, &s)| acc + (s - polyval(&coefficients, x)).powi(2));
    Ok(ProfileFit {
        model,
        coefficients,
        residual,
    })
}
