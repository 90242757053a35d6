//! Heston parameters, extended reals and intervals with endpoint openness.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Unvalidated parameter record as read from a JSON config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHestonParams<T = f64> {
    pub kappa: T,
    pub theta: T,
    pub sigma: T,
    pub rho: T,
    pub y0: T,
    pub x0: T,
}

/// Validated Heston model constants.
///
/// Log-spot `X` and variance `Y` follow
/// `dX = -Y/2 dt + sqrt(Y) dW1`, `dY = kappa (theta - Y) dt + sigma sqrt(Y) dW2`
/// with `d<W1, W2> = rho dt`. Construction enforces positivity, `|rho| < 1`
/// and `rho * sigma < kappa`, so the share measure is well defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HestonParams<T = f64> {
    kappa: T,
    theta: T,
    sigma: T,
    rho: T,
    y0: T,
    x0: T,
}

/// Checks every constraint on a raw parameter record.
pub fn validate<T: Scalar>(raw: RawHestonParams<T>) -> Result<HestonParams<T>> {
    let named = [
        ("kappa", raw.kappa),
        ("theta", raw.theta),
        ("sigma", raw.sigma),
        ("rho", raw.rho),
        ("y0", raw.y0),
        ("x0", raw.x0),
    ];
    for (name, value) in named {
        if !value.is_finite() {
            return Err(Error::NonFiniteParameter {
                name,
                value: value.as_f64(),
            });
        }
    }
    for (name, value) in [
        ("kappa", raw.kappa),
        ("theta", raw.theta),
        ("sigma", raw.sigma),
        ("y0", raw.y0),
    ] {
        if value <= T::zero() {
            return Err(Error::NonPositiveParameter {
                name,
                value: value.as_f64(),
            });
        }
    }
    if raw.rho <= -T::one() || raw.rho >= T::one() {
        return Err(Error::CorrelationOutOfRange(raw.rho.as_f64()));
    }
    let chi = raw.rho * raw.sigma - raw.kappa;
    if chi >= T::zero() {
        return Err(Error::StandingAssumptionViolated(chi.as_f64()));
    }
    Ok(HestonParams {
        kappa: raw.kappa,
        theta: raw.theta,
        sigma: raw.sigma,
        rho: raw.rho,
        y0: raw.y0,
        x0: raw.x0,
    })
}

impl<T: Scalar> HestonParams<T> {
    pub fn new(kappa: T, theta: T, sigma: T, rho: T, y0: T, x0: T) -> Result<Self> {
        validate(RawHestonParams {
            kappa,
            theta,
            sigma,
            rho,
            y0,
            x0,
        })
    }

    /// kappa = 2, theta = 0.1, sigma = 1, rho = 0, y0 = 0.1, x0 = 0.
    pub fn reference() -> Self {
        Self::new(
            T::lit(2.0),
            T::lit(0.1),
            T::one(),
            T::zero(),
            T::lit(0.1),
            T::zero(),
        )
        .expect("reference parameters are valid")
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }
    pub fn theta(&self) -> T {
        self.theta
    }
    pub fn sigma(&self) -> T {
        self.sigma
    }
    pub fn rho(&self) -> T {
        self.rho
    }
    pub fn y0(&self) -> T {
        self.y0
    }
    pub fn x0(&self) -> T {
        self.x0
    }

    /// `kappa - rho * sigma`, strictly positive for validated parameters.
    pub fn share_kappa(&self) -> T {
        self.kappa - self.rho * self.sigma
    }

    pub fn to_raw(&self) -> RawHestonParams<T> {
        RawHestonParams {
            kappa: self.kappa,
            theta: self.theta,
            sigma: self.sigma,
            rho: self.rho,
            y0: self.y0,
            x0: self.x0,
        }
    }
}

impl<T: Scalar> TryFrom<RawHestonParams<T>> for HestonParams<T> {
    type Error = Error;

    fn try_from(raw: RawHestonParams<T>) -> Result<Self> {
        validate(raw)
    }
}

/// A value in `(-inf, +inf]`. NaN and `-inf` are not representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal<T> {
    Finite(T),
    PosInfinity,
}

impl<T: Scalar> ExtendedReal<T> {
    /// Maps `+inf` to [`ExtendedReal::PosInfinity`]; rejects NaN and `-inf`.
    pub fn new(v: T) -> Option<Self> {
        if v.is_nan() || v == T::neg_infinity() {
            None
        } else if v == T::infinity() {
            Some(Self::PosInfinity)
        } else {
            Some(Self::Finite(v))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            Self::Finite(v) => Some(v),
            Self::PosInfinity => None,
        }
    }

    /// Float view, with `+inf` for the infinite case.
    pub fn to_float(&self) -> T {
        match *self {
            Self::Finite(v) => v,
            Self::PosInfinity => T::infinity(),
        }
    }
}

impl<T: Scalar> Add for ExtendedReal<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Self::Finite(a), Self::Finite(b)) => {
                Self::new(a + b).unwrap_or(Self::PosInfinity)
            }
            _ => Self::PosInfinity,
        }
    }
}

impl<T: Scalar> PartialOrd for ExtendedReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_float().partial_cmp(&other.to_float())
    }
}

impl<T: Scalar> fmt::Display for ExtendedReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::PosInfinity => f.write_str("+inf"),
        }
    }
}

impl<T: Scalar + Serialize> Serialize for ExtendedReal<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => v.serialize(serializer),
            Self::PosInfinity => serializer.serialize_str("+inf"),
        }
    }
}

/// Real interval with explicit endpoint openness.
///
/// Infinite endpoints are always open. The empty interval is a distinguished
/// value rather than an inverted pair of endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    lo: T,
    hi: T,
    lo_open: bool,
    hi_open: bool,
    empty: bool,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T, lo_open: bool, hi_open: bool) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidInterval("NaN endpoint".into()));
        }
        if lo > hi {
            return Err(Error::InvalidInterval(format!("lo {lo} > hi {hi}")));
        }
        if lo == T::infinity() || hi == T::neg_infinity() {
            return Err(Error::InvalidInterval("endpoint at the wrong infinity".into()));
        }
        let lo_open = lo_open || lo.is_infinite();
        let hi_open = hi_open || hi.is_infinite();
        let empty = lo == hi && (lo_open || hi_open);
        Ok(Self {
            lo,
            hi,
            lo_open,
            hi_open,
            empty,
        })
    }

    pub fn closed(lo: T, hi: T) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    pub fn open(lo: T, hi: T) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    pub fn real_line() -> Self {
        Self::new(T::neg_infinity(), T::infinity(), true, true).expect("real line")
    }

    /// `(-inf, hi)` or `(-inf, hi]`.
    pub fn below(hi: T, open: bool) -> Result<Self> {
        Self::new(T::neg_infinity(), hi, true, open)
    }

    /// `(lo, +inf)` or `[lo, +inf)`.
    pub fn above(lo: T, open: bool) -> Result<Self> {
        Self::new(lo, T::infinity(), open, true)
    }

    pub fn empty() -> Self {
        Self {
            lo: T::zero(),
            hi: T::zero(),
            lo_open: true,
            hi_open: true,
            empty: true,
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }
    pub fn hi(&self) -> T {
        self.hi
    }
    pub fn lo_open(&self) -> bool {
        self.lo_open
    }
    pub fn hi_open(&self) -> bool {
        self.hi_open
    }
    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn contains(&self, u: T) -> bool {
        if self.empty || u.is_nan() {
            return false;
        }
        let above_lo = if self.lo_open { u > self.lo } else { u >= self.lo };
        let below_hi = if self.hi_open { u < self.hi } else { u <= self.hi };
        above_lo && below_hi
    }

    pub fn interior(&self) -> Self {
        if self.empty || self.lo == self.hi {
            return Self::empty();
        }
        Self {
            lo_open: true,
            hi_open: true,
            ..*self
        }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        if self.empty || other.empty {
            return Self::empty();
        }
        let (lo, lo_open) = match self.lo.partial_cmp(&other.lo) {
            Some(Ordering::Greater) => (self.lo, self.lo_open),
            Some(Ordering::Less) => (other.lo, other.lo_open),
            _ => (self.lo, self.lo_open || other.lo_open),
        };
        let (hi, hi_open) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Less) => (self.hi, self.hi_open),
            Some(Ordering::Greater) => (other.hi, other.hi_open),
            _ => (self.hi, self.hi_open || other.hi_open),
        };
        if lo > hi {
            return Self::empty();
        }
        Self::new(lo, hi, lo_open, hi_open).unwrap_or_else(|_| Self::empty())
    }

    /// Shifts both endpoints by `-s`.
    pub fn shift_left(&self, s: T) -> Self {
        if self.empty {
            return *self;
        }
        Self {
            lo: self.lo - s,
            hi: self.hi - s,
            ..*self
        }
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return f.write_str("{}");
        }
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

impl<T: Scalar + Serialize> Serialize for Interval<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let finite_or_none = |v: T| if v.is_finite() { Some(v) } else { None };
        let mut st = serializer.serialize_struct("Interval", 5)?;
        st.serialize_field("lo", &finite_or_none(self.lo))?;
        st.serialize_field("hi", &finite_or_none(self.hi))?;
        st.serialize_field("lo_open", &self.lo_open)?;
        st.serialize_field("hi_open", &self.hi_open)?;
        st.serialize_field("empty", &self.empty)?;
        st.end()
    }
}
