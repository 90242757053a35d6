//! Large-maturity limits of the exponentially perturbed tail probabilities.
//!
//! With `E_1` a unit exponential independent of `X` and `P~` the share measure:
//!
//! ```text
//! (1/t) log P [X_t - x0 + E_1 <  x t] -> -Lambda*(x)      x <= Lambda'(0)
//! (1/t) log P~[X_t - x0 - E_1 >  x t] -> x - Lambda*(x)   x >= Lambda'(1)
//! (1/t) log P~[X_t - x0 - E_1 <= x t] -> x - Lambda*(x)   Lambda'(0) <= x <= Lambda'(1)
//! ```
//!
//! The cgfs of the perturbed families are not essentially smooth once the
//! exponential cut lands inside `[u_-, u_+]`, so these limits cannot be read
//! off the Gartner-Ellis theorem directly; [`ldp_gate`] reports when it can.

use std::fmt;

use serde::Serialize;

use crate::cgf::{CgfSpec, EndpointKind};
use crate::error::{Error, Result};
use crate::legendre::conjugate;
use crate::model::HestonParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LimitKind {
    PutTail,
    CallTail,
    MidTail,
}

impl LimitKind {
    pub fn name(&self) -> &'static str {
        match self {
            LimitKind::PutTail => "put_tail",
            LimitKind::CallTail => "call_tail",
            LimitKind::MidTail => "mid_tail",
        }
    }
}

impl fmt::Display for LimitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitQuery<T = f64> {
    pub kind: LimitKind,
    pub x: T,
}

/// `Lambda'(0) = -theta / 2`, the mean growth rate of `X_t / t` under `P`.
pub fn pricing_minimizer<T: Scalar>(params: &HestonParams<T>) -> T {
    -params.theta() * T::lit(0.5)
}

/// `Lambda'(1) = theta kappa / (2 (kappa - rho sigma))`, the mean growth rate under `P~`.
pub fn share_minimizer<T: Scalar>(params: &HestonParams<T>) -> T {
    params.theta() * params.kappa() / (T::lit(2.0) * params.share_kappa())
}

/// Admissible `x`-range `(lo, hi)` of a limit, with infinite ends where unbounded.
pub fn admissible_range<T: Scalar>(params: &HestonParams<T>, kind: LimitKind) -> (T, T) {
    match kind {
        LimitKind::PutTail => (T::neg_infinity(), pricing_minimizer(params)),
        LimitKind::CallTail => (share_minimizer(params), T::infinity()),
        LimitKind::MidTail => (pricing_minimizer(params), share_minimizer(params)),
    }
}

pub fn in_range<T: Scalar>(params: &HestonParams<T>, query: LimitQuery<T>) -> bool {
    let (lo, hi) = admissible_range(params, query.kind);
    query.x >= lo && query.x <= hi
}

/// Limit formula evaluated without the range check.
pub fn limit_unchecked<T: Scalar>(params: &HestonParams<T>, query: LimitQuery<T>) -> T {
    let rate = conjugate(&CgfSpec::base(*params), query.x)
        .expect("base domain is nonempty")
        .value;
    match query.kind {
        LimitKind::PutTail => -rate,
        LimitKind::CallTail | LimitKind::MidTail => query.x - rate,
    }
}

/// Limit with the range check; out-of-range `x` is an error naming the bound.
pub fn limit<T: Scalar>(params: &HestonParams<T>, query: LimitQuery<T>) -> Result<T> {
    if !in_range(params, query) {
        let (lo, hi) = admissible_range(params, query.kind);
        let bound = match query.kind {
            LimitKind::PutTail => format!("x <= {}", hi),
            LimitKind::CallTail => format!("x >= {}", lo),
            LimitKind::MidTail => format!("{} <= x <= {}", lo, hi),
        };
        return Err(Error::OutOfTheoremRange {
            kind: query.kind.name(),
            x: query.x.as_f64(),
            bound,
        });
    }
    Ok(limit_unchecked(params, query))
}

pub fn limit_put_tail<T: Scalar>(params: &HestonParams<T>, x: T) -> Result<T> {
    limit(params, LimitQuery { kind: LimitKind::PutTail, x })
}

pub fn limit_call_tail<T: Scalar>(params: &HestonParams<T>, x: T) -> Result<T> {
    limit(params, LimitQuery { kind: LimitKind::CallTail, x })
}

pub fn limit_mid_tail<T: Scalar>(params: &HestonParams<T>, x: T) -> Result<T> {
    limit(params, LimitQuery { kind: LimitKind::MidTail, x })
}

/// Why a family fails the Gartner-Ellis hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GateFailure {
    NotSteep { endpoint: f64 },
    NotLowerSemicontinuous { endpoint: f64 },
}

impl fmt::Display for GateFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateFailure::NotSteep { endpoint } => {
                write!(f, "not steep at endpoint {endpoint}")
            }
            GateFailure::NotLowerSemicontinuous { endpoint } => {
                write!(f, "not lower semicontinuous at endpoint {endpoint}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateVerdict {
    pub ldp_valid: bool,
    pub failures: Vec<GateFailure>,
}

/// Whether the cgf is essentially smooth and lower semicontinuous.
pub fn ldp_gate<T: Scalar>(spec: &CgfSpec<T>) -> GateVerdict {
    let report = spec.smoothness_report();
    let mut failures = Vec::new();
    for e in &report.endpoints {
        if !e.is_steep {
            failures.push(GateFailure::NotSteep {
                endpoint: e.endpoint.as_f64(),
            });
        }
        if e.kind == EndpointKind::Truncation && !e.lower_semicontinuous {
            failures.push(GateFailure::NotLowerSemicontinuous {
                endpoint: e.endpoint.as_f64(),
            });
        }
    }
    GateVerdict {
        ldp_valid: failures.is_empty(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgf::{domain_endpoints, Side};

    fn params() -> HestonParams<f64> {
        HestonParams::reference()
    }

    #[test]
    fn put_tail_examples() {
        assert!(limit_put_tail(&params(), -0.05).unwrap().abs() < 1e-15);
        let v = limit_put_tail(&params(), -0.5).unwrap();
        // 10^6-point grid supremum of u x - Lambda(u), computed offline
        assert!((v + 0.46018016555680497).abs() < 1e-6);
        let err = limit_put_tail(&params(), 0.0).unwrap_err();
        assert!(matches!(err, Error::OutOfTheoremRange { kind: "put_tail", .. }));
        assert!(err.to_string().contains("x <= -0.05"));
    }

    #[test]
    fn call_tail_examples() {
        assert!(limit_call_tail(&params(), 0.05).unwrap().abs() < 1e-12);
        let v = limit_call_tail(&params(), 0.5).unwrap();
        let via_tilt = -crate::legendre::tilted_rate(&params(), 0.5);
        assert!((v - via_tilt).abs() < 1e-9);
        assert!(limit_call_tail(&params(), 0.0).is_err());
    }

    #[test]
    fn mid_tail_examples() {
        assert!((limit_mid_tail(&params(), -0.05).unwrap() + 0.05).abs() < 1e-15);
        assert!(limit_mid_tail(&params(), 0.05).unwrap().abs() < 1e-12);
        let v = limit_mid_tail(&params(), 0.0).unwrap();
        assert!((v + 0.01231056256176606).abs() < 1e-6);
        assert!(limit_mid_tail(&params(), 0.2).is_err());
        assert!(limit_mid_tail(&params(), -0.2).is_err());
    }

    #[test]
    fn unchecked_matches_checked_inside_range() {
        let q = LimitQuery {
            kind: LimitKind::PutTail,
            x: -0.3,
        };
        assert_eq!(limit(&params(), q).unwrap(), limit_unchecked(&params(), q));
        let outside = LimitQuery {
            kind: LimitKind::PutTail,
            x: 0.3,
        };
        assert!(limit_unchecked(&params(), outside).is_finite());
    }

    #[test]
    fn gate_verdicts() {
        let base = CgfSpec::base(params());
        assert!(ldp_gate(&base).ldp_valid);
        let cut = base.perturb(1.0, Side::Upper).unwrap();
        let v = ldp_gate(&cut);
        assert!(!v.ldp_valid);
        assert!(v.failures.contains(&GateFailure::NotSteep { endpoint: 1.0 }));
        assert!(v
            .failures
            .contains(&GateFailure::NotLowerSemicontinuous { endpoint: 1.0 }));
        let (_, hi) = domain_endpoints(&params());
        assert!(ldp_gate(&base.perturb(hi + 0.1, Side::Upper).unwrap()).ldp_valid);
        // a cut exactly at u_+ keeps steepness but loses lower semicontinuity
        assert!(!ldp_gate(&base.perturb(hi, Side::Upper).unwrap()).ldp_valid);
    }
}
