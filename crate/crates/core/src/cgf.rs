//! Limiting cumulant generating function of `X_t / t` in the Heston model.
//!
//! For validated parameters the limit
//!
//! ```text
//! Lambda(u) = -(theta kappa / sigma^2) (u rho sigma - kappa + sqrt(Delta(u)))
//! Delta(u)  = (u rho sigma - kappa)^2 - sigma^2 (u^2 - u)
//! ```
//!
//! is finite exactly on the closed interval `[u_-, u_+]` bounded by the zeros
//! of `Delta`. A [`CgfSpec`] layers a measure tilt (`Lambda(u + s)`) and an
//! optional one-sided truncation coming from an independent exponential
//! perturbation on top of that base function.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ExtendedReal, HestonParams, Interval};
use crate::scalar::Scalar;

/// Divergence threshold for the numeric steepness sequence.
pub const STEEPNESS_THRESHOLD: f64 = 1e6;

/// `Delta(u) = (u rho sigma - kappa)^2 - sigma^2 (u^2 - u)`.
pub fn delta<T: Scalar>(params: &HestonParams<T>, u: T) -> T {
    let a = u * params.rho() * params.sigma() - params.kappa();
    let s2 = params.sigma() * params.sigma();
    a * a - s2 * (u * u - u)
}

/// Derivative of [`delta`] in `u`.
pub fn delta_prime<T: Scalar>(params: &HestonParams<T>, u: T) -> T {
    let rs = params.rho() * params.sigma();
    let two = T::lit(2.0);
    two * rs * (u * rs - params.kappa()) - params.sigma() * params.sigma() * (two * u - T::one())
}

/// Zeros `(u_-, u_+)` of `Delta`; always `u_- < 0 < 1 < u_+` for valid parameters.
pub fn domain_endpoints<T: Scalar>(params: &HestonParams<T>) -> (T, T) {
    let k_over_s = params.kappa() / params.sigma();
    let rho = params.rho();
    let half = T::lit(0.5);
    let disc = ((k_over_s - rho) * k_over_s + T::lit(0.25)).sqrt();
    let centre = half - rho * k_over_s;
    let denom = T::one() - rho * rho;
    ((centre - disc) / denom, (centre + disc) / denom)
}

fn clamped_sqrt_delta<T: Scalar>(params: &HestonParams<T>, v: T) -> T {
    let d = delta(params, v);
    if d >= T::zero() {
        return d.sqrt();
    }
    // roundoff near u_-/u_+
    let a = params.kappa() - v * params.rho() * params.sigma();
    let scale = (a * a + params.sigma() * params.sigma() * (v * v - v).abs()).max(T::one());
    let tol = T::lit(1e-14).max(T::epsilon() * T::lit(16.0)) * scale;
    if d >= -tol {
        T::zero()
    } else {
        T::nan()
    }
}

/// Closed form of the base cgf at `v`, assuming `v` is in `[u_-, u_+]`.
fn base_value<T: Scalar>(params: &HestonParams<T>, v: T) -> T {
    let (kappa, theta, sigma) = (params.kappa(), params.theta(), params.sigma());
    let a = kappa - v * params.rho() * sigma;
    let root = clamped_sqrt_delta(params, v);
    if a > T::zero() {
        // rationalised: exact zeros at v = 0 and v = 1
        theta * kappa * (v * v - v) / (root + a)
    } else {
        -(theta * kappa / (sigma * sigma)) * (root - a)
    }
}

/// First derivative of the base cgf at `v`; `+-inf` at the zeros of `Delta`.
fn base_derivative<T: Scalar>(params: &HestonParams<T>, v: T) -> T {
    let (kappa, theta, sigma) = (params.kappa(), params.theta(), params.sigma());
    let rs = params.rho() * sigma;
    let a = kappa - v * rs;
    let root = clamped_sqrt_delta(params, v);
    let two = T::lit(2.0);
    if a > T::zero() {
        let q = v * v - v;
        theta * kappa * ((two * v - T::one()) + two * rs * q / (root + a)) / (two * root)
    } else {
        -(theta * kappa / (sigma * sigma)) * (rs + delta_prime(params, v) / (two * root))
    }
}

fn base_second_derivative<T: Scalar>(params: &HestonParams<T>, v: T) -> T {
    let (kappa, theta, sigma, rho) = (params.kappa(), params.theta(), params.sigma(), params.rho());
    let s2 = sigma * sigma;
    let d = delta(params, v).max(T::zero());
    let dp = delta_prime(params, v);
    let four = T::lit(4.0);
    (theta * kappa / s2) * (dp * dp + four * s2 * (T::one() - rho * rho) * d)
        / (four * d * d.sqrt())
}

/// Which side of the distribution an exponential perturbation enters on.
///
/// `Upper` models `Z_t + E_lambda / t` and cuts the domain to `(-inf, lambda)`;
/// `Lower` models `Z_t - E_lambda / t` and cuts it to `(-lambda, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation<T> {
    pub lambda: T,
    pub side: Side,
}

impl<T: Scalar> Truncation<T> {
    /// The open window the perturbation leaves finite.
    pub fn window(&self) -> Interval<T> {
        match self.side {
            Side::Upper => Interval::below(self.lambda, true).expect("finite lambda"),
            Side::Lower => Interval::above(-self.lambda, true).expect("finite lambda"),
        }
    }
}

/// A limiting cgf: the Heston base function, tilted by `s` and optionally truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgfSpec<T = f64> {
    params: HestonParams<T>,
    tilt: T,
    truncation: Option<Truncation<T>>,
}

impl<T: Scalar> CgfSpec<T> {
    /// Cgf of `(X_t - x0) / t` under the pricing measure.
    pub fn base(params: HestonParams<T>) -> Self {
        Self {
            params,
            tilt: T::zero(),
            truncation: None,
        }
    }

    /// Cgf under the share measure, `Lambda(u + 1)`.
    pub fn share(params: HestonParams<T>) -> Self {
        Self::base(params)
            .tilt(T::one())
            .expect("untruncated spec accepts a tilt")
    }

    pub fn params(&self) -> &HestonParams<T> {
        &self.params
    }

    pub fn tilt_shift(&self) -> T {
        self.tilt
    }

    pub fn truncation(&self) -> Option<Truncation<T>> {
        self.truncation
    }

    /// `u -> Lambda(u + s)`. Tilts compose additively; tilting a truncated spec is rejected.
    pub fn tilt(&self, s: T) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::InvalidInterval(format!("non-finite tilt {s}")));
        }
        if self.truncation.is_some() {
            return Err(Error::TiltAfterPerturb);
        }
        Ok(Self {
            tilt: self.tilt + s,
            ..*self
        })
    }

    /// Adds an independent `Exp(lambda)` perturbation on the given side.
    pub fn perturb(&self, lambda: T, side: Side) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidPerturbation(lambda.as_f64()));
        }
        if self.truncation.is_some() {
            return Err(Error::AlreadyTruncated);
        }
        let spec = Self {
            truncation: Some(Truncation { lambda, side }),
            ..*self
        };
        if spec.effective_domain().interior().is_empty() {
            return Err(Error::EmptyDomain);
        }
        Ok(spec)
    }

    /// `[u_- - s, u_+ - s]`, ignoring truncation.
    pub fn analytic_domain(&self) -> Interval<T> {
        let (lo, hi) = domain_endpoints(&self.params);
        Interval::closed(lo - self.tilt, hi - self.tilt).expect("u_- < u_+")
    }

    pub fn effective_domain(&self) -> Interval<T> {
        let analytic = self.analytic_domain();
        match self.truncation {
            Some(tr) => analytic.intersect(&tr.window()),
            None => analytic,
        }
    }

    /// Evaluates the cgf, `+inf` outside the effective domain.
    pub fn eval(&self, u: T) -> ExtendedReal<T> {
        if !self.effective_domain().contains(u) {
            return ExtendedReal::PosInfinity;
        }
        ExtendedReal::new(base_value(&self.params, u + self.tilt))
            .unwrap_or(ExtendedReal::PosInfinity)
    }

    fn check_interior(&self, u: T) -> Result<()> {
        let interior = self.effective_domain().interior();
        if interior.contains(u) {
            Ok(())
        } else {
            Err(Error::OutsideDomainInterior {
                u: u.as_f64(),
                lo: interior.lo().as_f64(),
                hi: interior.hi().as_f64(),
            })
        }
    }

    pub fn derivative(&self, u: T) -> Result<T> {
        self.check_interior(u)?;
        Ok(base_derivative(&self.params, u + self.tilt))
    }

    pub fn second_derivative(&self, u: T) -> Result<T> {
        self.check_interior(u)?;
        Ok(base_second_derivative(&self.params, u + self.tilt))
    }

    /// Closed-form value at `u` as a limit from inside the domain.
    ///
    /// Finite on the closure of the effective domain even where [`Self::eval`]
    /// returns `+inf` at an open truncation endpoint.
    pub fn limit_value(&self, u: T) -> T {
        base_value(&self.params, u + self.tilt)
    }

    /// Derivative as a limit from inside the domain; `+-inf` at `u_-`/`u_+`.
    pub fn limit_derivative(&self, u: T) -> T {
        base_derivative(&self.params, u + self.tilt)
    }

    /// True when `u` is a zero of `Delta` after the tilt, i.e. an analytic endpoint.
    pub(crate) fn is_analytic_endpoint(&self, u: T) -> bool {
        let analytic = self.analytic_domain();
        u == analytic.lo() || u == analytic.hi()
    }

    pub fn smoothness_report(&self) -> SmoothnessReport<T> {
        let domain = self.effective_domain();
        let interior = domain.interior();
        let threshold = T::lit(STEEPNESS_THRESHOLD);
        let mut endpoints = Vec::with_capacity(2);
        for side in [EndpointSide::Left, EndpointSide::Right] {
            let (b, open) = match side {
                EndpointSide::Left => (domain.lo(), domain.lo_open()),
                EndpointSide::Right => (domain.hi(), domain.hi_open()),
            };
            if !b.is_finite() {
                continue;
            }
            let analytic = self.is_analytic_endpoint(b);
            let kind = if analytic && !open {
                EndpointKind::Analytic
            } else {
                EndpointKind::Truncation
            };

            let mut sequence = Vec::new();
            for k in 2..=12 {
                let h = T::lit(10f64.powi(-k));
                let u = match side {
                    EndpointSide::Left => b + h,
                    EndpointSide::Right => b - h,
                };
                if u == b || !interior.contains(u) {
                    continue;
                }
                sequence.push(base_derivative(&self.params, u + self.tilt).abs());
            }
            let n = sequence.len();
            let numerically_divergent = n >= 4
                && sequence[n - 1] > threshold
                && sequence[n - 4..].windows(2).all(|w| w[1] > w[0]);

            let (is_steep, derivative_limit) = if analytic {
                (true, ExtendedReal::PosInfinity)
            } else {
                let lim = base_derivative(&self.params, b + self.tilt).abs();
                (
                    numerically_divergent,
                    ExtendedReal::new(lim).unwrap_or(ExtendedReal::PosInfinity),
                )
            };

            // At an open endpoint the base function still has a finite limit, so
            // jumping to +inf there breaks lower semicontinuity.
            let lower_semicontinuous = if open {
                !self.limit_value(b).is_finite()
            } else {
                true
            };

            endpoints.push(EndpointReport {
                endpoint: b,
                side,
                kind,
                is_steep,
                derivative_limit,
                lower_semicontinuous,
                numerically_divergent,
                derivative_sequence: sequence,
            });
        }
        let essentially_smooth = endpoints.iter().all(|e| e.is_steep);
        SmoothnessReport {
            differentiable_in_interior: true,
            essentially_smooth,
            lower_semicontinuous: endpoints.iter().all(|e| e.lower_semicontinuous),
            divergence_threshold: threshold,
            endpoints,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointSide {
    Left,
    Right,
}

/// Origin of a boundary point of the effective domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    /// Closed zero of `Delta`.
    Analytic,
    /// Open cut introduced by an exponential perturbation.
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct EndpointReport<T> {
    pub endpoint: T,
    pub side: EndpointSide,
    pub kind: EndpointKind,
    pub is_steep: bool,
    /// Limit of `|Lambda'|` approaching the endpoint from inside.
    pub derivative_limit: ExtendedReal<T>,
    pub lower_semicontinuous: bool,
    pub numerically_divergent: bool,
    /// `|Lambda'(b -+ 10^-k)|` for `k = 2..=12`, clipped to the interior.
    pub derivative_sequence: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct SmoothnessReport<T> {
    pub endpoints: Vec<EndpointReport<T>>,
    pub differentiable_in_interior: bool,
    pub essentially_smooth: bool,
    pub lower_semicontinuous: bool,
    pub divergence_threshold: T,
}

impl<T: Scalar> SmoothnessReport<T> {
    pub fn endpoint(&self, side: EndpointSide) -> Option<&EndpointReport<T>> {
        self.endpoints.iter().find(|e| e.side == side)
    }
}
