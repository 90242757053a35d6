//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Tolerances, grids and budgets are fixed here and not tuned to the results.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use heston_ldp::asymptotics::{limit_put_tail, pricing_minimizer, share_minimizer};
use heston_ldp::cgf::{delta, domain_endpoints, CgfSpec, EndpointSide, Side};
use heston_ldp::cli;
use heston_ldp::legendre::{conjugate, tilted_rate};
use heston_ldp::montecarlo::{
    convergence_study, estimate_scaled_cgf, exact_cdf_monotone, ordering_check,
    put_representation_check, share_consistency_check, ConvergenceTable, Coupling, Direction,
    McConfig, Measure, Perturbation,
};
use heston_ldp::HestonParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> HestonParams {
    loop {
        let kappa = rng.random_range(0.2..6.0);
        let theta = rng.random_range(0.01..0.6);
        let sigma = rng.random_range(0.05..2.5);
        let rho = rng.random_range(-0.95..0.95);
        let y0 = rng.random_range(0.01..0.6);
        if let Ok(p) = HestonParams::new(kappa, theta, sigma, rho, y0, 0.0) {
            return p;
        }
    }
}

/// Textbook (unrationalised) form of the limiting cgf, used as an oracle.
fn lambda_oracle(p: &HestonParams, u: f64) -> f64 {
    let (k, th, s, r) = (p.kappa(), p.theta(), p.sigma(), p.rho());
    let d = (u * r * s - k).powi(2) - s * s * (u * u - u);
    -(th * k / (s * s)) * (u * r * s - k + d.sqrt())
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let sets: Vec<HestonParams> = (0..100).map(|_| random_params(&mut rng)).collect();
    let (mut zero_err, mut delta_err, mut d0_err, mut d1_stated, mut d1_correct, mut fd_err) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in &sets {
        let spec = CgfSpec::base(*p);
        zero_err = zero_err
            .max(spec.eval(0.0).to_float().abs())
            .max(spec.eval(1.0).to_float().abs());
        let (lo, hi) = domain_endpoints(p);
        let (s, r, k) = (p.sigma(), p.rho(), p.kappa());
        for u in [lo, hi] {
            let scale = (s * s * (1.0 - r * r) * u * u).abs() + ((s * s - 2.0 * k * r * s) * u).abs() + k * k;
            delta_err = delta_err.max(delta(p, u).abs() / scale);
        }
        let d0 = spec.derivative(0.0).unwrap();
        let d1 = spec.derivative(1.0).unwrap();
        d0_err = d0_err.max(rel(d0, -p.theta() / 2.0));
        d1_stated = d1_stated.max(rel(d1, p.theta() * k / (k - r * s)));
        d1_correct = d1_correct.max(rel(d1, p.theta() * k / (2.0 * (k - r * s))));
        // fourth-order stencil, step kept well inside the domain
        let h = 1e-3 * (hi - 1.0).min(1.0);
        let g = |u: f64| lambda_oracle(p, u);
        let fd = (8.0 * (g(1.0 + h) - g(1.0 - h)) - (g(1.0 + 2.0 * h) - g(1.0 - 2.0 * h))) / (12.0 * h);
        fd_err = fd_err.max(rel(d1, fd));
    }
    let elapsed = start.elapsed();
    let ok_identities = zero_err <= 1e-12 && delta_err <= 1e-9 && d0_err <= 1e-10;
    let ok_stated = d1_stated <= 1e-10;
    let ok_correct = d1_correct <= 1e-10 && fd_err <= 1e-6;
    verdict(
        ok_identities && ok_stated && ok_correct && elapsed < Duration::from_secs(1),
        format!(
            "Lambda(0),Lambda(1) err {zero_err:.2e}; Delta(u+-) rel {delta_err:.2e}; \
             Lambda'(0) rel {d0_err:.2e}; Lambda'(1) vs theta*kappa/(kappa-rho*sigma) rel {d1_stated:.2e} [{}]; \
             vs theta*kappa/(2(kappa-rho*sigma)) rel {d1_correct:.2e}, vs finite difference rel {fd_err:.2e} [{}]; {elapsed:.2?}",
            if ok_stated { "ok" } else { "FAILS" },
            if ok_correct { "ok" } else { "FAILS" },
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let p = HestonParams::reference();
    let spec = CgfSpec::base(p);
    let (lo, hi) = domain_endpoints(&p);
    let n = 1_000_000;
    let grid: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let u = lo + (hi - lo) * i as f64 / n as f64;
            (u, lambda_oracle(&p, u))
        })
        .filter(|(_, l)| l.is_finite())
        .collect();
    let mut oracle_err = 0.0f64;
    for i in 0..50 {
        let x = -1.0 + 2.0 * i as f64 / 49.0;
        let want = grid.iter().map(|&(u, l)| u * x - l).fold(f64::NEG_INFINITY, f64::max);
        let got = conjugate(&spec, x).unwrap().value;
        oracle_err = oracle_err.max((got - want).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut fy = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let u = rng.random_range(lo..=hi);
        let x = rng.random_range(-3.0..3.0);
        let gap = spec.eval(u).to_float() + conjugate(&spec, x).unwrap().value - u * x;
        fy = fy.max(-gap);
    }
    let elapsed = start.elapsed();
    verdict(
        oracle_err <= 1e-6 && fy <= 1e-9 && elapsed < Duration::from_secs(10),
        format!(
            "max |conjugate - grid sup| {oracle_err:.2e} over 50 x; worst Fenchel-Young violation {fy:.2e}; {elapsed:.2?}"
        ),
    )
}

fn criterion_3() -> Verdict {
    let p = HestonParams::reference();
    let spec = CgfSpec::base(p);
    let err = (0..100)
        .map(|i| {
            let x = -1.5 + 3.0 * i as f64 / 99.0;
            (tilted_rate(&p, x) - (conjugate(&spec, x).unwrap().value - x)).abs()
        })
        .fold(0.0, f64::max);
    verdict(err <= 1e-9, format!("max |tilted - (rate - x)| {err:.2e} over 100 x"))
}

fn criterion_4() -> Verdict {
    let p = HestonParams::reference();
    let base = CgfSpec::base(p);
    let (_, hi) = domain_endpoints(&p);
    let base_smooth = base.smoothness_report().essentially_smooth;
    let cut = base.perturb(1.0, Side::Upper).unwrap().smoothness_report();
    let right = cut.endpoint(EndpointSide::Right).unwrap();
    let cut_flagged = right.endpoint == 1.0 && !right.is_steep && !right.lower_semicontinuous;
    let wide = base.perturb(hi + 0.5, Side::Upper).unwrap().smoothness_report();
    let steep_at = base.derivative(hi - 1e-8).unwrap().abs();
    let base_report = base.smoothness_report();
    let seq = &base_report.endpoint(EndpointSide::Right).unwrap().derivative_sequence;
    // k = 2..=12, so k = 8 sits at index 6
    let seq_k8 = seq[6];
    verdict(
        base_smooth && cut_flagged && wide.essentially_smooth && steep_at > 1e3 && seq_k8 > 1e3,
        format!(
            "base smooth {base_smooth}; cut at 1 not steep/not lsc {cut_flagged}; \
             cut at {:.3} smooth {}; |Lambda'(u+ - 1e-8)| {steep_at:.3e}",
            hi + 0.5,
            wide.essentially_smooth
        ),
    )
}

fn describe(table: &ConvergenceTable) -> String {
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| match (r.scaled_log, r.gap) {
            (Some(s), Some(g)) => format!("t={} hits={} scaled_log={s:.4} gap={g:.4}", r.t, r.n_hits),
            _ => format!("t={} no hits", r.t),
        })
        .collect();
    format!(
        "limit {:.5}; {}",
        table.rows[0].theoretical_limit.unwrap_or(f64::NAN),
        rows.join(", ")
    )
}

fn table_passes(table: &ConvergenceTable) -> bool {
    table.gaps_decreasing()
        && table.rows.iter().all(|r| r.gap.is_some())
        && table.final_gap().is_some_and(|g| g <= 0.05)
}

const T_GRID: [f64; 3] = [25.0, 50.0, 100.0];
const PATHS: usize = 200_000;

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let p = HestonParams::reference();
    let base = McConfig::with_step_density(T_GRID[0], PATHS, 20.0, SEED);
    let table = convergence_study(&p, &base, -0.5, Perturbation::PlusExp(1.0), Direction::Below, &T_GRID, false)
        .unwrap();
    let elapsed = start.elapsed();
    let limit = limit_put_tail(&p, -0.5).unwrap();
    verdict(
        table_passes(&table) && elapsed < Duration::from_secs(300),
        format!("put tail x=-0.5 (limit {limit:.5}): {}; {elapsed:.1?}", describe(&table)),
    )
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let p = HestonParams::reference();
    let base = McConfig::with_step_density(T_GRID[0], PATHS, 20.0, SEED).measure(Measure::Share);
    let x_call = 0.15;
    let x_mid = 0.0;
    assert!(x_call >= share_minimizer(&p));
    assert!(x_mid >= pricing_minimizer(&p) && x_mid <= share_minimizer(&p));
    let call = convergence_study(&p, &base, x_call, Perturbation::MinusExp(1.0), Direction::Above, &T_GRID, false)
        .unwrap();
    let mid = convergence_study(&p, &base, x_mid, Perturbation::MinusExp(1.0), Direction::Below, &T_GRID, false)
        .unwrap();
    let five = McConfig::with_step_density(5.0, PATHS, 20.0, SEED);
    let above = share_consistency_check(&p, &five, 0.05, Direction::Above).unwrap();
    let below = share_consistency_check(&p, &five, 0.05, Direction::Below).unwrap();
    let elapsed = start.elapsed();
    verdict(
        table_passes(&call) && table_passes(&mid) && above.agrees && below.agrees,
        format!(
            "call x={x_call}: {}; mid x={x_mid}: {}; share consistency t=5 above {:.4} vs {:.4} (se {:.1e}), below {:.4} vs {:.4} (se {:.1e}); {elapsed:.1?}",
            describe(&call),
            describe(&mid),
            above.direct.mean,
            above.weighted.mean,
            above.joint_std_err,
            below.direct.mean,
            below.weighted.mean,
            below.joint_std_err,
        ),
    )
}

fn criterion_7() -> Verdict {
    let p = HestonParams::reference();
    let mut failures = Vec::new();
    for seed in 1..=10u64 {
        let cfg = McConfig::with_step_density(5.0, 20_000, 20.0, seed);
        let report = ordering_check(&p, &cfg, -0.1, 1.0, 3.0, Coupling::Coupled).unwrap();
        if !report.holds() {
            failures.push(seed);
        }
    }
    let lambdas = [0.25, 0.5, 1.0, 2.0, 3.0, 10.0];
    let alphas = [1e-3, 0.1, 0.5, 1.0, 2.0, 10.0];
    let cdf_ok = exact_cdf_monotone(&lambdas, &alphas);
    verdict(
        failures.is_empty() && cdf_ok,
        format!("p(E1) <= p(E3) <= p(none) failed on seeds {failures:?} of 1..=10; exact CDF monotone {cdf_ok}"),
    )
}

fn criterion_8() -> Verdict {
    let p = HestonParams::reference();
    let cfg = McConfig::with_step_density(1.0, 100_000, 20.0, SEED);
    let r = put_representation_check(&p, &cfg, p.x0().exp()).unwrap();
    verdict(
        r.agrees,
        format!(
            "E(K-S)+ {:.6} vs K P[log K > X + E1] {:.6}, diff {:.2e}, joint se {:.2e}",
            r.direct.mean, r.representation.mean, r.difference, r.joint_std_err
        ),
    )
}

fn criterion_9() -> Verdict {
    let p = HestonParams::reference();
    let target = CgfSpec::base(p).eval(0.5).to_float();
    let mut gaps = Vec::new();
    for t in [10.0, 20.0, 40.0] {
        let cfg = McConfig::with_step_density(t, 100_000, 20.0, SEED);
        let est = estimate_scaled_cgf(&p, &cfg, 0.5).unwrap();
        gaps.push((est.value - target).abs());
    }
    let last = *gaps.last().unwrap();
    verdict(
        last <= 0.02,
        format!("Lambda(0.5) = {target:.6}; gaps at t=10,20,40: {gaps:.4?}"),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["heston-ldp"];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out, &mut err);
    (code, out)
}

fn criterion_10() -> Verdict {
    let args = [
        "verify", "--x", "0.0", "--measure", "share", "--perturb", "-exp:1", "--t", "5,10",
        "--paths", "20000", "--seed", "7",
    ];
    let with = |extra: &[&str], format: &str| {
        let mut a: Vec<&str> = args.to_vec();
        a.extend_from_slice(&["--format", format]);
        a.extend_from_slice(extra);
        run_cli(&a)
    };
    let mut same = true;
    for format in ["csv", "json"] {
        let first = with(&[], format);
        let second = with(&[], format);
        let one = with(&["--threads", "1"], format);
        let four = with(&["--threads", "4"], format);
        same &= !first.1.is_empty() && first == second && first == one && first == four;
    }
    verdict(same, "verify output identical across repeated runs and --threads 1/4, csv and json")
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("analytic identities", criterion_1),
        ("conjugate oracle and Fenchel-Young", criterion_2),
        ("tilt identity", criterion_3),
        ("smoothness classification", criterion_4),
        ("MC put-tail limit", criterion_5),
        ("MC call and mid limits, share consistency", criterion_6),
        ("stochastic ordering", criterion_7),
        ("put representation", criterion_8),
        ("empirical cgf convergence", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            name,
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
