//! Monte Carlo simulation of the Heston log-spot under `P` and the share measure.
//!
//! Every estimator is deterministic in `(seed, n_paths, n_steps, scheme,
//! measure)`: paths are simulated in fixed blocks with counter-based streams
//! (see [`stream`]) and all reductions run sequentially in path order.

pub mod stream;

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Gamma, Poisson, StandardNormal};
use serde::Serialize;

use crate::asymptotics::{self, LimitKind, LimitQuery};
use crate::cgf::domain_endpoints;
use crate::error::{Error, Result};
use crate::model::HestonParams;

use self::stream::{block_rng, concat_blocks, Purpose};

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.1;
/// Smallest admissible path count.
pub const MIN_PATHS: usize = 1_000;
/// Default cap on `n_paths * n_steps`.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;
/// Normal quantile used for the reported confidence intervals (95%).
pub const CI_Z: f64 = 1.96;
/// Multiple of the standard error used by pass/fail consistency checks.
pub const CHECK_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler with `Y^+ = max(Y, 0)` in drift and diffusion; tolerates Feller violations.
    FullTruncationEuler,
    /// Exact noncentral chi-squared variance transition, log-Euler for `X`.
    ExactVarianceEulerLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Pricing,
    /// `dP~/dP = exp(X_t - x0)`.
    Share,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    None,
    /// `+ E_lambda`, mean `1/lambda`.
    PlusExp(f64),
    /// `- E_lambda`.
    MinusExp(f64),
}

impl Perturbation {
    fn validate(&self) -> Result<()> {
        match *self {
            Perturbation::None => Ok(()),
            Perturbation::PlusExp(l) | Perturbation::MinusExp(l) => {
                if l > 0.0 && l.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidPerturbation(l))
                }
            }
        }
    }

    /// Shift applied to `X_t - x0` given a unit exponential draw.
    #[inline]
    fn offset(&self, unit_exp: f64) -> f64 {
        match *self {
            Perturbation::None => 0.0,
            Perturbation::PlusExp(l) => unit_exp / l,
            Perturbation::MinusExp(l) => -unit_exp / l,
        }
    }

    fn is_some(&self) -> bool {
        !matches!(self, Perturbation::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `{ value < x t }`
    Below,
    /// `{ value > x t }`
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub t: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub measure: Measure,
    pub budget: u64,
    /// Worker threads; `None` uses the global rayon pool. Never affects results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(t: f64, n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            t,
            n_paths,
            n_steps,
            scheme: Scheme::FullTruncationEuler,
            seed,
            measure: Measure::Pricing,
            budget: DEFAULT_BUDGET,
            threads: None,
        }
    }

    /// Horizon `t` discretised at `steps_per_unit` steps per unit time.
    pub fn with_step_density(t: f64, n_paths: usize, steps_per_unit: f64, seed: u64) -> Self {
        let n_steps = ((t * steps_per_unit).round() as usize).max(1);
        Self::new(t, n_paths, n_steps, seed)
    }

    pub fn measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn dt(&self) -> f64 {
        self.t / self.n_steps as f64
    }

    /// Same step size, new horizon.
    pub fn at_horizon(&self, t: f64) -> Self {
        let n_steps = ((t / self.dt()).round() as usize).max(1);
        Self { t, n_steps, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::InvalidConfig(format!("horizon t must be positive, got {}", self.t)));
        }
        if self.n_paths < MIN_PATHS {
            return Err(Error::InvalidConfig(format!(
                "n_paths must be at least {MIN_PATHS}, got {}",
                self.n_paths
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be at least 1".into()));
        }
        if self.dt() > MAX_DT * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "time step {} exceeds {MAX_DT}",
                self.dt()
            )));
        }
        let work = (self.n_paths as u128) * (self.n_steps as u128);
        if work > self.budget as u128 {
            return Err(Error::BudgetExceeded {
                paths: self.n_paths as u64,
                steps: self.n_steps as u64,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

/// Terminal states `(X_t, Y_t)` in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TerminalSample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Drift constants of the simulated dynamics
/// `dX = sign * Y/2 dt + sqrt(Y) dW1`, `dY = (a - b Y) dt + sigma sqrt(Y) dW2`.
#[derive(Debug, Clone, Copy)]
struct Dynamics {
    x_drift_sign: f64,
    a: f64,
    b: f64,
    sigma: f64,
    rho: f64,
}

impl Dynamics {
    fn new(params: &HestonParams, measure: Measure) -> Self {
        let a = params.kappa() * params.theta();
        match measure {
            Measure::Pricing => Self {
                x_drift_sign: -1.0,
                a,
                b: params.kappa(),
                sigma: params.sigma(),
                rho: params.rho(),
            },
            // Girsanov with density exp(X_t - x0): W1~ = W1 - int sqrt(Y),
            // W2~ = W2 - rho int sqrt(Y).
            Measure::Share => Self {
                x_drift_sign: 1.0,
                a,
                b: params.share_kappa(),
                sigma: params.sigma(),
                rho: params.rho(),
            },
        }
    }
}

fn simulate_block_euler(
    dyn_: Dynamics,
    x0: f64,
    y0: f64,
    dt: f64,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
    range: Range<usize>,
) -> (Vec<f64>, Vec<f64>) {
    let rho_bar = (1.0 - dyn_.rho * dyn_.rho).sqrt();
    let half_sign = 0.5 * dyn_.x_drift_sign;
    let mut xs = Vec::with_capacity(range.len());
    let mut ys = Vec::with_capacity(range.len());
    for _ in range {
        let (mut x, mut y) = (x0, y0);
        for _ in 0..n_steps {
            let yp = y.max(0.0);
            let sq = (yp * dt).sqrt();
            let z2: f64 = rng.sample(StandardNormal);
            let zp: f64 = rng.sample(StandardNormal);
            let z1 = dyn_.rho * z2 + rho_bar * zp;
            x += half_sign * yp * dt + sq * z1;
            y += (dyn_.a - dyn_.b * yp) * dt + dyn_.sigma * sq * z2;
        }
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

fn simulate_block_exact(
    dyn_: Dynamics,
    x0: f64,
    y0: f64,
    dt: f64,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
    range: Range<usize>,
) -> (Vec<f64>, Vec<f64>) {
    let rho_bar2 = 1.0 - dyn_.rho * dyn_.rho;
    let s2 = dyn_.sigma * dyn_.sigma;
    let decay = (-dyn_.b * dt).exp();
    let scale = s2 * (1.0 - decay) / (4.0 * dyn_.b);
    let dof = 4.0 * dyn_.a / s2;
    let mut xs = Vec::with_capacity(range.len());
    let mut ys = Vec::with_capacity(range.len());
    for _ in range {
        let (mut x, mut y) = (x0, y0);
        for _ in 0..n_steps {
            // Y_{t+dt} = scale * chi'^2(dof, ncp)
            let ncp = y * decay / scale;
            let mixing = if ncp > 0.0 {
                let poisson: f64 = rng.sample(Poisson::new(0.5 * ncp).expect("positive rate"));
                poisson
            } else {
                0.0
            };
            let shape = 0.5 * dof + mixing;
            let chi2: f64 = rng.sample(Gamma::new(shape, 2.0).expect("positive shape"));
            let y_next = scale * chi2;
            let integrated = 0.5 * (y + y_next) * dt;
            let stoch_int2 = (y_next - y - dyn_.a * dt + dyn_.b * integrated) / dyn_.sigma;
            let z: f64 = rng.sample(StandardNormal);
            x += 0.5 * dyn_.x_drift_sign * integrated
                + dyn_.rho * stoch_int2
                + (rho_bar2 * integrated).sqrt() * z;
            y = y_next;
        }
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

/// Simulates `(X_t, Y_t)` on every path.
pub fn simulate_terminal(params: &HestonParams, cfg: &McConfig) -> Result<TerminalSample> {
    cfg.validate()?;
    let dyn_ = Dynamics::new(params, cfg.measure);
    let (x0, y0, dt, n_steps) = (params.x0(), params.y0(), cfg.dt(), cfg.n_steps);
    let scheme = cfg.scheme;
    let seed = cfg.seed;
    let blocks = stream::map_blocks(cfg.n_paths, cfg.threads, move |block, range| {
        let mut rng = block_rng(seed, Purpose::Path, block);
        match scheme {
            Scheme::FullTruncationEuler => {
                simulate_block_euler(dyn_, x0, y0, dt, n_steps, &mut rng, range)
            }
            Scheme::ExactVarianceEulerLog => {
                simulate_block_exact(dyn_, x0, y0, dt, n_steps, &mut rng, range)
            }
        }
    });
    let mut x = Vec::with_capacity(cfg.n_paths);
    let mut y = Vec::with_capacity(cfg.n_paths);
    for (bx, by) in blocks {
        x.extend(bx);
        y.extend(by);
    }
    Ok(TerminalSample { x, y })
}

/// One `Exp(1)` draw per path from a stream independent of the path stream.
pub fn unit_exponentials(seed: u64, n_paths: usize, purpose: Purpose, threads: Option<usize>) -> Vec<f64> {
    concat_blocks(n_paths, threads, move |block, range| {
        let mut rng = block_rng(seed, purpose, block);
        range.map(|_| rng.sample::<f64, _>(Exp1)).collect()
    })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moment {
    pub mean: f64,
    pub std_err: f64,
}

impl Moment {
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut n, mut sum) = (0usize, 0.0);
        for v in values.clone() {
            n += 1;
            sum += v;
        }
        let mean = sum / n as f64;
        let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
        let var = if n > 1 { ss / (n as f64 - 1.0) } else { 0.0 };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
        }
    }

    /// Whether the mean is within `CHECK_SIGMAS` standard errors of `target`.
    pub fn consistent_with(&self, target: f64) -> bool {
        (self.mean - target).abs() <= CHECK_SIGMAS * self.std_err
    }
}

/// Tail probability estimate on the `1/t log` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub t: f64,
    pub threshold: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub n_hits: u64,
    pub n_paths: u64,
    /// `(1/t) log p_hat`; `None` when there were no hits.
    pub scaled_log: Option<f64>,
    /// Delta-method interval around `scaled_log`.
    pub scaled_log_ci: Option<(f64, f64)>,
}

impl TailEstimate {
    fn from_counts(t: f64, threshold: f64, n_hits: u64, n_paths: u64) -> Self {
        let n = n_paths as f64;
        let p_hat = n_hits as f64 / n;
        let std_err = (p_hat * (1.0 - p_hat) / n).sqrt();
        let (scaled_log, scaled_log_ci) = if n_hits == 0 {
            (None, None)
        } else {
            let log_p = p_hat.ln();
            let half_width = CI_Z * std_err / p_hat;
            (
                Some(log_p / t),
                Some(((log_p - half_width) / t, ((log_p + half_width) / t).min(0.0))),
            )
        };
        Self {
            t,
            threshold,
            p_hat,
            std_err,
            n_hits,
            n_paths,
            scaled_log,
            scaled_log_ci,
        }
    }

    pub fn is_no_hits(&self) -> bool {
        self.n_hits == 0
    }
}

#[inline]
fn event(value: f64, level: f64, direction: Direction) -> bool {
    match direction {
        Direction::Below => value < level,
        Direction::Above => value > level,
    }
}

/// Tail estimate from already simulated log-spots and unit exponentials.
pub fn tail_from_sample(
    x_t: &[f64],
    unit_exp: &[f64],
    x0: f64,
    t: f64,
    threshold: f64,
    perturbation: Perturbation,
    direction: Direction,
) -> TailEstimate {
    let level = threshold * t;
    let hits = x_t
        .iter()
        .zip(unit_exp)
        .filter(|&(&x, &e)| event(x - x0 + perturbation.offset(e), level, direction))
        .count() as u64;
    TailEstimate::from_counts(t, threshold, hits, x_t.len() as u64)
}

/// Estimates `P[X_t - x0 +- E_lambda  <  x t]` (or `>`) under `cfg.measure`.
pub fn estimate_tail(
    params: &HestonParams,
    cfg: &McConfig,
    threshold: f64,
    perturbation: Perturbation,
    direction: Direction,
) -> Result<TailEstimate> {
    perturbation.validate()?;
    let sample = simulate_terminal(params, cfg)?;
    let exps = if perturbation.is_some() {
        unit_exponentials(cfg.seed, cfg.n_paths, Purpose::Exponential, cfg.threads)
    } else {
        vec![0.0; cfg.n_paths]
    };
    Ok(tail_from_sample(
        &sample.x,
        &exps,
        params.x0(),
        cfg.t,
        threshold,
        perturbation,
        direction,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgfEstimate {
    pub u: f64,
    pub t: f64,
    pub value: f64,
    pub std_err: f64,
}

/// Admissible `u` range of [`estimate_scaled_cgf`]: the domain shrunk by 10% of its width at each end.
pub fn scaled_cgf_range(params: &HestonParams) -> (f64, f64) {
    let (lo, hi) = domain_endpoints(params);
    let margin = 0.1 * (hi - lo);
    (lo + margin, hi - margin)
}

/// `(1/t) log mean exp(u (X_t - x0))`, computed with a max shift.
pub fn estimate_scaled_cgf(params: &HestonParams, cfg: &McConfig, u: f64) -> Result<CgfEstimate> {
    let (lo, hi) = scaled_cgf_range(params);
    if !(u > lo && u < hi) {
        return Err(Error::OutsideEstimatorRange { u, lo, hi });
    }
    let sample = simulate_terminal(params, cfg)?;
    Ok(scaled_cgf_from_sample(&sample.x, params.x0(), cfg.t, u))
}

pub fn scaled_cgf_from_sample(x_t: &[f64], x0: f64, t: f64, u: f64) -> CgfEstimate {
    let exponents = x_t.iter().map(|&x| u * (x - x0));
    let shift = exponents.clone().fold(f64::NEG_INFINITY, f64::max);
    let weights = Moment::of(exponents.map(|e| (e - shift).exp()));
    CgfEstimate {
        u,
        t,
        value: (shift + weights.mean.ln()) / t,
        std_err: weights.std_err / weights.mean / t,
    }
}

/// Mean of `exp(X_t - x0)` under the pricing measure; equals 1 for a true martingale.
pub fn martingale_check(params: &HestonParams, cfg: &McConfig) -> Result<Moment> {
    let cfg = cfg.measure(Measure::Pricing);
    let sample = simulate_terminal(params, &cfg)?;
    let x0 = params.x0();
    Ok(Moment::of(sample.x.iter().map(|&x| (x - x0).exp())))
}

/// `P[E_lambda < alpha] = 1 - exp(-lambda alpha)` for `alpha > 0`, else 0.
pub fn exponential_cdf(lambda: f64, alpha: f64) -> f64 {
    if alpha > 0.0 {
        -(-lambda * alpha).exp_m1()
    } else {
        0.0
    }
}

/// Checks that the exponential CDF is nondecreasing in `lambda` at every `alpha`.
///
/// A larger rate gives a stochastically smaller variable, so
/// `P[E_l1 < alpha] <= P[E_l2 < alpha]` whenever `l1 <= l2`.
pub fn exact_cdf_monotone(lambdas: &[f64], alphas: &[f64]) -> bool {
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    alphas.iter().all(|&alpha| {
        sorted
            .windows(2)
            .all(|w| exponential_cdf(w[0], alpha) <= exponential_cdf(w[1], alpha))
    })
}

/// Paired difference `p_larger - p_smaller` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingGap {
    pub smaller: &'static str,
    pub larger: &'static str,
    pub difference: f64,
    pub std_err: f64,
    pub holds: bool,
}

impl OrderingGap {
    fn from_indicators(smaller: &'static str, larger: &'static str, a: &[bool], b: &[bool]) -> Self {
        let m = Moment::of(a.iter().zip(b).map(|(&lo, &hi)| hi as u8 as f64 - lo as u8 as f64));
        Self {
            smaller,
            larger,
            difference: m.mean,
            std_err: m.std_err,
            holds: m.mean >= -CHECK_SIGMAS * m.std_err,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `E_l2 = (l1 / l2) E_l1`: the ordering holds path by path.
    Coupled,
    /// Separate exponential streams: the ordering holds within sampling error.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub x: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub coupling: Coupling,
    pub p_lambda1: TailEstimate,
    pub p_lambda2: TailEstimate,
    pub p_none: TailEstimate,
    pub gaps: Vec<OrderingGap>,
}

impl OrderingReport {
    pub fn holds(&self) -> bool {
        self.gaps.iter().all(|g| g.holds)
    }
}

/// Compares `P[X_t - x0 + E_l1 < x t] <= P[X_t - x0 + E_l2 < x t] <= P[X_t - x0 < x t]`
/// on common `X` paths, for `0 < l1 <= l2`.
pub fn ordering_check(
    params: &HestonParams,
    cfg: &McConfig,
    x: f64,
    lambda1: f64,
    lambda2: f64,
    coupling: Coupling,
) -> Result<OrderingReport> {
    for l in [lambda1, lambda2] {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidPerturbation(l));
        }
    }
    if lambda1 > lambda2 {
        return Err(Error::InvalidConfig(format!(
            "ordering check needs lambda1 <= lambda2, got {lambda1} > {lambda2}"
        )));
    }
    let sample = simulate_terminal(params, cfg)?;
    let e1 = unit_exponentials(cfg.seed, cfg.n_paths, Purpose::Exponential, cfg.threads);
    let e2 = match coupling {
        Coupling::Coupled => e1.clone(),
        Coupling::Independent => {
            unit_exponentials(cfg.seed, cfg.n_paths, Purpose::ExponentialAlt, cfg.threads)
        }
    };
    let level = x * cfg.t;
    let x0 = params.x0();
    let below = |xs: &[f64], es: &[f64], l: Option<f64>| -> Vec<bool> {
        xs.iter()
            .zip(es)
            .map(|(&xt, &e)| xt - x0 + l.map_or(0.0, |l| e / l) < level)
            .collect()
    };
    let ind1 = below(&sample.x, &e1, Some(lambda1));
    let ind2 = below(&sample.x, &e2, Some(lambda2));
    let ind0 = below(&sample.x, &e1, None);
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count() as u64;
    let n = cfg.n_paths as u64;
    Ok(OrderingReport {
        x,
        lambda1,
        lambda2,
        coupling,
        p_lambda1: TailEstimate::from_counts(cfg.t, x, count(&ind1), n),
        p_lambda2: TailEstimate::from_counts(cfg.t, x, count(&ind2), n),
        p_none: TailEstimate::from_counts(cfg.t, x, count(&ind0), n),
        gaps: vec![
            OrderingGap::from_indicators("p_lambda1", "p_lambda2", &ind1, &ind2),
            OrderingGap::from_indicators("p_lambda2", "p_none", &ind2, &ind0),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PutReport {
    pub strike: f64,
    /// `E[(K - S_t)^+]`.
    pub direct: Moment,
    /// `K P[log K > X_t + E_1]`.
    pub representation: Moment,
    pub difference: f64,
    pub joint_std_err: f64,
    pub agrees: bool,
}

/// Compares the put price with its single-probability representation on common paths.
pub fn put_representation_check(params: &HestonParams, cfg: &McConfig, strike: f64) -> Result<PutReport> {
    if !(strike > 0.0) || !strike.is_finite() {
        return Err(Error::InvalidConfig(format!("strike must be positive, got {strike}")));
    }
    if cfg.measure != Measure::Pricing {
        return Err(Error::InvalidConfig("put representation holds under the pricing measure".into()));
    }
    let sample = simulate_terminal(params, cfg)?;
    let e = unit_exponentials(cfg.seed, cfg.n_paths, Purpose::Exponential, cfg.threads);
    let log_k = strike.ln();
    let payoff = |x: f64| (strike - x.exp()).max(0.0);
    let indicator = |x: f64, e: f64| if log_k > x + e { strike } else { 0.0 };
    let direct = Moment::of(sample.x.iter().map(|&x| payoff(x)));
    let representation = Moment::of(sample.x.iter().zip(&e).map(|(&x, &e)| indicator(x, e)));
    let paired = Moment::of(
        sample
            .x
            .iter()
            .zip(&e)
            .map(|(&x, &e)| payoff(x) - indicator(x, e)),
    );
    Ok(PutReport {
        strike,
        direct,
        representation,
        difference: paired.mean,
        joint_std_err: paired.std_err,
        agrees: paired.mean.abs() <= CHECK_SIGMAS * paired.std_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareConsistency {
    pub threshold: f64,
    pub direction: Direction,
    /// `P~[A]` from the tilted dynamics.
    pub direct: Moment,
    /// `E[exp(X_t - x0) 1_A]` under the pricing measure.
    pub weighted: Moment,
    pub joint_std_err: f64,
    pub agrees: bool,
}

/// Checks the tilted simulator against likelihood-ratio weighting of pricing paths,
/// for `A = { X_t - x0 <> x t }`.
pub fn share_consistency_check(
    params: &HestonParams,
    cfg: &McConfig,
    threshold: f64,
    direction: Direction,
) -> Result<ShareConsistency> {
    let share = simulate_terminal(params, &cfg.measure(Measure::Share))?;
    let pricing = simulate_terminal(params, &cfg.measure(Measure::Pricing))?;
    let (x0, level) = (params.x0(), threshold * cfg.t);
    let direct = Moment::of(
        share
            .x
            .iter()
            .map(|&x| event(x - x0, level, direction) as u8 as f64),
    );
    let weighted = Moment::of(pricing.x.iter().map(|&x| {
        if event(x - x0, level, direction) {
            (x - x0).exp()
        } else {
            0.0
        }
    }));
    let joint_std_err = direct.std_err.hypot(weighted.std_err);
    Ok(ShareConsistency {
        threshold,
        direction,
        direct,
        weighted,
        joint_std_err,
        agrees: (direct.mean - weighted.mean).abs() <= CHECK_SIGMAS * joint_std_err,
    })
}

/// The limit statement a simulated configuration corresponds to, if any.
pub fn theorem_kind(measure: Measure, perturbation: Perturbation, direction: Direction) -> Option<LimitKind> {
    match (measure, perturbation, direction) {
        (Measure::Pricing, Perturbation::PlusExp(l), Direction::Below) if l == 1.0 => {
            Some(LimitKind::PutTail)
        }
        (Measure::Share, Perturbation::MinusExp(l), Direction::Above) if l == 1.0 => {
            Some(LimitKind::CallTail)
        }
        (Measure::Share, Perturbation::MinusExp(l), Direction::Below) if l == 1.0 => {
            Some(LimitKind::MidTail)
        }
        _ => None,
    }
}

/// Formula used when matching is forced: by measure and direction only.
pub fn formula_kind(measure: Measure, direction: Direction) -> Option<LimitKind> {
    match (measure, direction) {
        (Measure::Pricing, Direction::Below) => Some(LimitKind::PutTail),
        (Measure::Share, Direction::Above) => Some(LimitKind::CallTail),
        (Measure::Share, Direction::Below) => Some(LimitKind::MidTail),
        (Measure::Pricing, Direction::Above) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub t: f64,
    pub n_steps: usize,
    pub p_hat: f64,
    pub std_err: f64,
    pub n_hits: u64,
    pub scaled_log: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub theoretical_limit: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub x: f64,
    pub measure: Measure,
    pub perturbation: Perturbation,
    pub direction: Direction,
    pub limit_kind: Option<LimitKind>,
    /// The theorem does not cover this configuration or `x`; produced under `force`.
    pub outside_proven_range: bool,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Gap at the largest horizon; `None` for a no-hit final row.
    pub fn final_gap(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.gap)
    }

    /// Strict decrease of the gap across rows that have hits; needs two such rows.
    pub fn gaps_decreasing(&self) -> bool {
        let gaps: Vec<f64> = self.rows.iter().filter_map(|r| r.gap).collect();
        gaps.len() >= 2 && gaps.windows(2).all(|w| w[1] < w[0])
    }
}

/// Runs [`estimate_tail`] along an increasing horizon grid at the base config's step size.
pub fn convergence_study(
    params: &HestonParams,
    base: &McConfig,
    x: f64,
    perturbation: Perturbation,
    direction: Direction,
    t_grid: &[f64],
    force: bool,
) -> Result<ConvergenceTable> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("t grid must be nonempty and strictly increasing".into()));
    }
    let strict = theorem_kind(base.measure, perturbation, direction);
    let kind = match (strict, force) {
        (Some(k), _) => Some(k),
        (None, true) => formula_kind(base.measure, direction),
        (None, false) => {
            return Err(Error::InvalidConfig(
                "measure/perturbation/direction match no proven limit; use force".into(),
            ))
        }
    };
    let mut outside = strict.is_none();
    let limit = match kind {
        Some(kind) => {
            let query = LimitQuery { kind, x };
            match asymptotics::limit(params, query) {
                Ok(v) => Some(v),
                Err(e) if !force => return Err(e),
                Err(_) => {
                    outside = true;
                    Some(asymptotics::limit_unchecked(params, query))
                }
            }
        }
        None => None,
    };

    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let cfg = base.at_horizon(t);
        let est = estimate_tail(params, &cfg, x, perturbation, direction)?;
        let gap = match (est.scaled_log, limit) {
            (Some(s), Some(l)) => Some((s - l).abs()),
            _ => None,
        };
        rows.push(ConvergenceRow {
            t,
            n_steps: cfg.n_steps,
            p_hat: est.p_hat,
            std_err: est.std_err,
            n_hits: est.n_hits,
            scaled_log: est.scaled_log,
            ci_lo: est.scaled_log_ci.map(|c| c.0),
            ci_hi: est.scaled_log_ci.map(|c| c.1),
            theoretical_limit: limit,
            gap,
        });
    }
    Ok(ConvergenceTable {
        x,
        measure: base.measure,
        perturbation,
        direction,
        limit_kind: kind,
        outside_proven_range: outside,
        rows,
    })
}
