//! Stabilizer simulation of monitored Clifford circuits on an `L x L` torus
//! with symmetric unitary ensembles, entanglement diagnostics and
//! finite-size-scaling fits.
//!
//! The scaling fits in [`fss`] are generic over the float type; the aliases
//! below fix it to `f64`.

pub mod diagnostics;
pub mod ensembles;
pub mod fss;
pub mod gf2;
pub mod lattice;
pub mod pauli;

pub type DataPoint = fss::DataPoint<f64>;
pub type ScaledPoint = fss::ScaledPoint<f64>;
pub type ScalingFitResult = fss::ScalingFitResult<f64>;
pub type FitOptions = fss::FitOptions<f64>;
pub type SurvivalFit = fss::SurvivalFit<f64>;
pub type DecaySeries = fss::DecaySeries<f64>;
pub type ProfileFit = fss::ProfileFit<f64>;
