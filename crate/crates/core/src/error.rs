use thiserror::Error;

/// Errors raised by the analytic modules and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("parameter `{name}` must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },

    #[error("correlation rho must lie in (-1, 1), got {0}")]
    CorrelationOutOfRange(f64),

    #[error("standing assumption rho*sigma - kappa < 0 violated: rho*sigma - kappa = {0}")]
    StandingAssumptionViolated(f64),

    #[error("malformed interval: {0}")]
    InvalidInterval(String),

    #[error("interval is empty")]
    EmptyInterval,

    #[error("effective domain is empty")]
    EmptyDomain,

    #[error("u = {u} is outside the interior ({lo}, {hi}) of the effective domain")]
    OutsideDomainInterior { u: f64, lo: f64, hi: f64 },

    #[error("0 is not in the interior of the effective domain")]
    ZeroNotInDomainInterior,

    #[error("perturbation rate lambda must be strictly positive and finite, got {0}")]
    InvalidPerturbation(f64),

    #[error("spec is already truncated; only one exponential perturbation is supported")]
    AlreadyTruncated,

    #[error("tilt must be applied before perturbation")]
    TiltAfterPerturb,

    #[error("{kind} limit only proven for {bound}; got x = {x}")]
    OutOfTheoremRange {
        kind: &'static str,
        x: f64,
        bound: String,
    },

    #[error("estimator argument u = {u} must lie in ({lo}, {hi})")]
    OutsideEstimatorRange { u: f64, lo: f64, hi: f64 },

    #[error("simulation budget exceeded: {paths} paths x {steps} steps > {budget}")]
    BudgetExceeded { paths: u64, steps: u64, budget: u64 },

    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
