//! Intersubband cavity polaritons coupled to LO phonons: Hopfield
//! diagonalization, exact composite-boson correlators, bosonicity-corrected
//! stimulated scattering rates and the resulting lasing threshold.
//!
//! The numerical core is generic over the scalar type. Dispersion, rate and
//! dynamics code takes any [`Real`] (`f32`/`f64`); the correlator
//! recurrence takes any [`CorrelatorScalar`], either an exact
//! [`BigRational`] or a sign/log-magnitude [`LogFloat`]. The aliases below
//! fix the common choices.

pub mod cbalg;
pub mod dynamics;
pub mod numerics;
pub mod oracle;
pub mod params;
pub mod polariton;
pub mod rates;
pub mod scalar;

pub use cbalg::{CbError, CorrelatorKey, CorrelatorScalar, CorrelatorValue, Correlators, LogFloat, NumericMode};
pub use num_rational::BigRational;
pub use params::{load_config, DeviceConfig, LoadedConfig};
pub use scalar::Real;

/// Log-magnitude float used by float-mode correlators.
pub type LogF64 = LogFloat<f64>;
/// Exact correlators over rationals.
pub type ExactCorrelators = Correlators<BigRational>;
/// Float-mode correlators.
pub type FloatCorrelators = Correlators<LogF64>;
pub type PolaritonMode = polariton::PolaritonMode<f64>;
pub type ScatteringGeometry = polariton::ScatteringGeometry<f64>;
pub type Dispersion = polariton::Dispersion<f64>;
pub type RateCalculator = rates::RateCalculator<f64>;
pub type RateResult = rates::RateResult<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
