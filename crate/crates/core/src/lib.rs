//! Large-deviation machinery for the Heston stochastic volatility model.
//!
//! * [`model`]: validated parameters, extended reals and intervals.
//! * [`cgf`]: the limiting cumulant generating function, its effective
//!   domain, measure tilts, exponential-perturbation truncations and an
//!   essential-smoothness classifier.
//! * [`legendre`]: the Fenchel-Legendre transform (rate function) and its
//!   infima over intervals.
//! * [`asymptotics`]: the large-maturity limits of exponentially perturbed
//!   tail probabilities and the Gartner-Ellis applicability gate.
//! * [`montecarlo`]: a reproducible parallel simulator that checks all of the
//!   above at desk scale.
//! * [`cli`]: the `heston-ldp` command-line front end.
//!
//! The analytic modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod asymptotics;
pub mod cgf;
pub mod cli;
pub mod error;
pub mod legendre;
pub mod model;
pub mod montecarlo;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type HestonParams = model::HestonParams<f64>;
pub type HestonParams32 = model::HestonParams<f32>;
pub type RawHestonParams = model::RawHestonParams<f64>;
pub type CgfSpec = cgf::CgfSpec<f64>;
pub type CgfSpec32 = cgf::CgfSpec<f32>;
pub type RatePoint = legendre::RatePoint<f64>;
pub type RatePoint32 = legendre::RatePoint<f32>;
pub type SmoothnessReport = cgf::SmoothnessReport<f64>;
pub type Interval = model::Interval<f64>;
pub type ExtendedReal = model::ExtendedReal<f64>;
