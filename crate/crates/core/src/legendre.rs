//! Fenchel-Legendre transform `sup_u { u x - Lambda(u) }` of a [`CgfSpec`].

use serde::Serialize;

use crate::cgf::CgfSpec;
use crate::error::{Error, Result};
use crate::model::{ExtendedReal, HestonParams, Interval};
use crate::scalar::Scalar;

/// Iteration cap for the bracketed Newton solve.
pub const MAX_ITERATIONS: usize = 200;

/// One evaluation of the rate function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint<T = f64> {
    pub x: T,
    pub value: T,
    /// Point `u*` where the supremum is attained, or the open endpoint it is approached at.
    pub maximizer: T,
    pub attained: bool,
}

/// Evaluates the rate function at `x`.
///
/// Inside the range of `Lambda'` the maximiser solves `Lambda'(u) = x`; it is
/// found by safeguarded Newton iteration on a bracket that approaches the
/// relevant domain endpoint geometrically from a point near `u = 0`. When a
/// truncation makes the cgf non-steep and `x` is at or beyond the one-sided
/// derivative limit at the open endpoint `b`, the supremum is the limit
/// `b x - Lambda(b-)` and is not attained.
pub fn conjugate<T: Scalar>(spec: &CgfSpec<T>, x: T) -> Result<RatePoint<T>> {
    let domain = spec.effective_domain();
    let interior = domain.interior();
    if interior.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let (lo, hi) = (domain.lo(), domain.hi());

    if domain.hi_open() {
        let d_hi = spec.limit_derivative(hi);
        if d_hi.is_finite() && x >= d_hi {
            return Ok(boundary_point(spec, x, hi));
        }
    }
    if domain.lo_open() {
        let d_lo = spec.limit_derivative(lo);
        if d_lo.is_finite() && x <= d_lo {
            return Ok(boundary_point(spec, x, lo));
        }
    }

    let u = solve_derivative(spec, &interior, x);
    let value = u * x - spec.limit_value(u);
    Ok(RatePoint {
        x,
        value: value.max(T::zero()),
        maximizer: u,
        attained: true,
    })
}

fn boundary_point<T: Scalar>(spec: &CgfSpec<T>, x: T, b: T) -> RatePoint<T> {
    RatePoint {
        x,
        value: (b * x - spec.limit_value(b)).max(T::zero()),
        maximizer: b,
        attained: false,
    }
}

/// Root of `Lambda'(u) = x` strictly inside `interior`.
fn solve_derivative<T: Scalar>(spec: &CgfSpec<T>, interior: &Interval<T>, x: T) -> T {
    let (lo, hi) = (interior.lo(), interior.hi());
    let half = T::lit(0.5);
    let g = |u: T| spec.limit_derivative(u) - x;

    let anchor = if interior.contains(T::zero()) {
        T::zero()
    } else {
        half * (lo + hi)
    };
    let g0 = g(anchor);
    if g0 == T::zero() {
        return anchor;
    }

    // Bracket [a, b] with g(a) < 0 <= g(b), grown toward the endpoint.
    let (mut a, mut b);
    if g0 < T::zero() {
        a = anchor;
        b = hi;
        let mut gap = hi - anchor;
        loop {
            gap = gap * half;
            let c = hi - gap;
            if c <= a || c >= hi {
                break;
            }
            if g(c) >= T::zero() {
                b = c;
                break;
            }
            a = c;
        }
    } else {
        b = anchor;
        a = lo;
        let mut gap = anchor - lo;
        loop {
            gap = gap * half;
            let c = lo + gap;
            if c >= b || c <= lo {
                break;
            }
            if g(c) < T::zero() {
                a = c;
                break;
            }
            b = c;
        }
    }

    let mut u = half * (a + b);
    for _ in 0..MAX_ITERATIONS {
        let gu = g(u);
        if gu == T::zero() {
            return u;
        }
        if gu < T::zero() {
            a = u;
        } else {
            b = u;
        }
        let tol = T::root_tolerance(u);
        let curvature = spec.second_derivative(u).unwrap_or(T::zero());
        let newton = u - gu / curvature;
        let newton_ok = newton.is_finite() && newton > a && newton < b;
        if newton_ok && (newton - u).abs() <= tol {
            return newton;
        }
        u = if newton_ok { newton } else { half * (a + b) };
        if b - a <= tol {
            return u;
        }
    }
    u
}

/// Rate of the share-measure family: the conjugate of `u -> Lambda(u + 1)`.
pub fn tilted_rate<T: Scalar>(params: &HestonParams<T>, x: T) -> T {
    conjugate(&CgfSpec::share(*params), x)
        .expect("share-measure domain has nonempty interior")
        .value
}

/// `inf { Lambda*(x) : x in B }` for a convex rate function.
///
/// The minimum of `Lambda*` sits at `Lambda'(0)`; outside `B` the infimum is
/// the value at the endpoint of `B` nearest to it (continuity of `Lambda*`
/// makes openness of that endpoint irrelevant).
pub fn rate_infimum<T: Scalar>(spec: &CgfSpec<T>, set: &Interval<T>) -> Result<ExtendedReal<T>> {
    if set.is_empty() {
        return Err(Error::EmptyInterval);
    }
    if !spec.effective_domain().interior().contains(T::zero()) {
        return Err(Error::ZeroNotInDomainInterior);
    }
    let x_min = spec.derivative(T::zero())?;
    if set.contains(x_min) {
        return Ok(ExtendedReal::Finite(T::zero()));
    }
    let nearest = if set.hi() <= x_min { set.hi() } else { set.lo() };
    let point = conjugate(spec, nearest)?;
    Ok(ExtendedReal::new(point.value).unwrap_or(ExtendedReal::PosInfinity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgf::{domain_endpoints, Side};

    fn base() -> CgfSpec<f64> {
        CgfSpec::base(HestonParams::reference())
    }

    /// Brute-force `sup` of `u x - Lambda(u)` over a uniform grid of the domain.
    fn grid_sup(spec: &CgfSpec<f64>, x: f64, n: usize) -> f64 {
        let d = spec.effective_domain();
        let (lo, hi) = (d.lo(), d.hi());
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .filter_map(|u| spec.eval(u).finite().map(|l| u * x - l))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn minimum_at_pricing_mean() {
        let p = conjugate(&base(), -0.05).unwrap();
        assert!(p.value.abs() < 1e-15);
        assert!(p.maximizer.abs() < 1e-12);
        assert!(p.attained);
    }

    #[test]
    fn share_mean_maps_to_unit_maximizer() {
        let p = conjugate(&base(), 0.05).unwrap();
        assert!((p.value - 0.05).abs() < 1e-12);
        assert!((p.maximizer - 1.0).abs() < 1e-10);
    }

    #[test]
    fn agrees_with_grid_oracle() {
        for x in [-1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0] {
            let got = conjugate(&base(), x).unwrap().value;
            let want = grid_sup(&base(), x, 1_000_000);
            assert!((got - want).abs() < 1e-6, "x={x}: {got} vs {want}");
            assert!(got >= want - 1e-12);
        }
    }

    #[test]
    fn first_order_condition_when_attained() {
        for x in [-3.0, -0.4, 0.01, 0.3, 4.0] {
            let p = conjugate(&base(), x).unwrap();
            let d = base().derivative(p.maximizer).unwrap();
            assert!((d - x).abs() <= 1e-8 * x.abs().max(1.0), "x={x}: {d}");
        }
    }

    #[test]
    fn truncated_conjugate_is_affine_past_cut() {
        let cut = base().perturb(1.0, Side::Upper).unwrap();
        // Lambda'(1-) = 0.05: beyond it the sup sits at the open endpoint.
        let p = conjugate(&cut, 0.5).unwrap();
        assert!(!p.attained);
        assert_eq!(p.maximizer, 1.0);
        assert!((p.value - 0.5).abs() < 1e-15);
        let edge = conjugate(&cut, 0.05).unwrap();
        assert!(!edge.attained);
        assert_eq!(edge.maximizer, 1.0);
        assert!((grid_sup(&cut, 0.5, 200_000) - p.value).abs() < 1e-5);
        // below the cut the transform is unchanged
        let q = conjugate(&cut, -0.3).unwrap();
        assert!((q.value - conjugate(&base(), -0.3).unwrap().value).abs() < 1e-14);
    }

    #[test]
    fn lower_truncation_under_share_measure() {
        let spec = CgfSpec::share(HestonParams::reference())
            .perturb(1.0, Side::Lower)
            .unwrap();
        let p = conjugate(&spec, -2.0).unwrap();
        assert!(!p.attained);
        assert_eq!(p.maximizer, -1.0);
        assert!((grid_sup(&spec, -2.0, 200_000) - p.value).abs() < 1e-4);
    }

    #[test]
    fn tilted_rate_identity() {
        let params = HestonParams::reference();
        assert!(tilted_rate(&params, 0.05f64).abs() < 1e-12);
        assert!((tilted_rate(&params, -0.05f64) - 0.05).abs() < 1e-12);
        let r = conjugate(&base(), 0.5).unwrap().value;
        assert!((tilted_rate(&params, 0.5) - (r - 0.5)).abs() < 1e-9);
    }

    #[test]
    fn infimum_over_intervals() {
        let spec = base();
        let left = Interval::below(-0.05, false).unwrap();
        assert_eq!(rate_infimum(&spec, &left).unwrap(), ExtendedReal::Finite(0.0));
        let tail = Interval::below(-0.5, false).unwrap();
        let v = conjugate(&spec, -0.5).unwrap().value;
        assert_eq!(rate_infimum(&spec, &tail).unwrap(), ExtendedReal::Finite(v));
        let right = Interval::closed(0.2, 0.4).unwrap();
        let w = conjugate(&spec, 0.2).unwrap().value;
        assert_eq!(rate_infimum(&spec, &right).unwrap(), ExtendedReal::Finite(w));
        let open_at_min = Interval::above(-0.05, true).unwrap();
        assert!(rate_infimum(&spec, &open_at_min).unwrap().finite().unwrap() < 1e-15);
        assert!(matches!(
            rate_infimum(&spec, &Interval::empty()),
            Err(Error::EmptyInterval)
        ));
    }

    #[test]
    fn wide_truncation_leaves_conjugate_unchanged() {
        let (_, hi) = domain_endpoints(base().params());
        let loose = base().perturb(hi, Side::Upper).unwrap();
        for x in [-0.8, -0.05, 0.3, 2.0] {
            let a = conjugate(&loose, x).unwrap();
            let b = conjugate(&base(), x).unwrap();
            assert!((a.value - b.value).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn single_precision_conjugate() {
        let spec = CgfSpec::base(HestonParams::<f32>::reference());
        let p = conjugate(&spec, -0.5f32).unwrap();
        assert!((p.value - 0.460_180_17).abs() < 1e-4);
    }
}
