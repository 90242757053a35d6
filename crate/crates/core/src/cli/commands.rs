use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::format::{json_bytes, opt, sig, CsvTable};
use super::{
    CliError, CommonArgs, DomainArgs, MeasureArg, Outcome, OutputFormat, RateArgs, RunConfig,
    SelftestArgs, VerifyArgs, EXIT_FAILED, EXIT_OK,
};
use crate::asymptotics::{self, ldp_gate, GateVerdict, LimitKind, LimitQuery};
use crate::cgf::{delta, domain_endpoints, CgfSpec, Side, SmoothnessReport};
use crate::legendre::{conjugate, tilted_rate};
use crate::model::{HestonParams, Interval};
use crate::montecarlo::{
    self, convergence_study, exact_cdf_monotone, martingale_check, ordering_check,
    put_representation_check, share_consistency_check, Coupling, Direction, McConfig, Measure,
    Perturbation,
};

pub(super) struct Context<'a> {
    pub common: &'a CommonArgs,
    pub params: &'a HestonParams,
    pub seed: u64,
}

fn config<O: Serialize>(command: &'static str, ctx: &Context, options: O) -> RunConfig<O> {
    RunConfig {
        command,
        params: ctx.params.to_raw(),
        seed: ctx.seed,
        force: ctx.common.force,
        options,
    }
}

fn config_comment<O: Serialize>(cfg: &RunConfig<O>) -> String {
    format!("config={}", serde_json::to_string(cfg).expect("serializable config"))
}

fn yes_no(b: bool) -> String {
    b.to_string()
}

#[derive(Serialize)]
struct Family {
    family: &'static str,
    effective_domain: Interval<f64>,
    smoothness: SmoothnessReport<f64>,
    gate: GateVerdict,
}

#[derive(Serialize)]
struct DomainReport<'a> {
    config: &'a RunConfig<DomainArgs>,
    u_minus: f64,
    u_plus: f64,
    lambda_prime_0: f64,
    lambda_prime_1: f64,
    families: Vec<Family>,
}

pub(super) fn domain(ctx: &Context, args: &DomainArgs) -> Result<Outcome, CliError> {
    let (common, params) = (ctx.common, ctx.params);
    let cfg = config("domain", ctx, args.clone());
    let base = CgfSpec::base(*params);
    let share = base.tilt(1.0)?;
    let specs = [
        ("base", base),
        ("tilt", share),
        ("perturb_upper", base.perturb(args.lambda, Side::Upper)?),
        ("tilt_perturb_lower", share.perturb(args.lambda, Side::Lower)?),
    ];
    let (u_minus, u_plus) = domain_endpoints(params);
    let report = DomainReport {
        config: &cfg,
        u_minus,
        u_plus,
        lambda_prime_0: base.derivative(0.0)?,
        lambda_prime_1: base.derivative(1.0)?,
        families: specs
            .iter()
            .map(|(name, spec)| Family {
                family: name,
                effective_domain: spec.effective_domain(),
                smoothness: spec.smoothness_report(),
                gate: ldp_gate(spec),
            })
            .collect(),
    };

    let bytes = match common.format {
        OutputFormat::Json => json_bytes(&report),
        OutputFormat::Csv => {
            let mut table = CsvTable::new(vec![
                "family",
                "domain",
                "side",
                "endpoint",
                "kind",
                "is_steep",
                "derivative_limit",
                "lower_semicontinuous",
                "essentially_smooth",
                "ldp_valid",
            ]);
            table.comment(config_comment(&cfg));
            table.comment(format!("u_minus={}", sig(u_minus)));
            table.comment(format!("u_plus={}", sig(u_plus)));
            table.comment(format!("lambda_prime_0={}", sig(report.lambda_prime_0)));
            table.comment(format!("lambda_prime_1={}", sig(report.lambda_prime_1)));
            for f in &report.families {
                for e in &f.smoothness.endpoints {
                    table.row(vec![
                        f.family.to_string(),
                        interval_text(&f.effective_domain),
                        ser_name(&e.side),
                        sig(e.endpoint),
                        ser_name(&e.kind),
                        yes_no(e.is_steep),
                        sig(e.derivative_limit.to_float()),
                        yes_no(e.lower_semicontinuous),
                        yes_no(f.smoothness.essentially_smooth),
                        yes_no(f.gate.ldp_valid),
                    ]);
                }
            }
            table.to_bytes()
        }
    };
    Ok(Outcome {
        bytes,
        exit_code: EXIT_OK,
        summary: None,
    })
}

fn interval_text(i: &Interval<f64>) -> String {
    if i.is_empty() {
        return "{}".into();
    }
    format!(
        "{}{},{}{}",
        if i.lo_open() { '(' } else { '[' },
        sig(i.lo()),
        sig(i.hi()),
        if i.hi_open() { ')' } else { ']' }
    )
}

fn ser_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

#[derive(Debug, Clone, Serialize)]
struct RateOptions {
    xs: Vec<f64>,
}

#[derive(Serialize)]
struct RateRow {
    x: f64,
    rate: f64,
    maximizer: f64,
    tilted_rate: f64,
    limit_put_tail: Option<f64>,
    limit_mid_tail: Option<f64>,
    limit_call_tail: Option<f64>,
    /// Limits filled in outside their proven range (only with `--force`).
    outside_proven_range: Vec<&'static str>,
}

#[derive(Serialize)]
struct RateReport<'a> {
    config: &'a RunConfig<RateOptions>,
    rows: Vec<RateRow>,
}

fn rate_grid(args: &RateArgs) -> Result<Vec<f64>, String> {
    let xs = match (&args.grid, &args.xs) {
        (Some(g), _) => super::parse_grid(g)?,
        (None, Some(xs)) => xs.clone(),
        (None, None) => return Err("rate needs --grid START:STOP:N or --xs".into()),
    };
    if xs.is_empty() {
        return Err("empty x grid".into());
    }
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(format!("grid values must be finite, got {x}"));
    }
    Ok(xs)
}

pub(super) fn rate(ctx: &Context, args: &RateArgs) -> Result<Outcome, CliError> {
    let (common, params) = (ctx.common, ctx.params);
    let xs = rate_grid(args)?;
    let cfg = config("rate", ctx, RateOptions { xs: xs.clone() });
    let base = CgfSpec::base(*params);
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let point = conjugate(&base, x)?;
        let mut outside = Vec::new();
        let mut limit = |kind: LimitKind| {
            let query = LimitQuery { kind, x };
            if asymptotics::in_range(params, query) {
                Some(asymptotics::limit_unchecked(params, query))
            } else if common.force {
                outside.push(kind.name());
                Some(asymptotics::limit_unchecked(params, query))
            } else {
                None
            }
        };
        let (put, mid, call) = (
            limit(LimitKind::PutTail),
            limit(LimitKind::MidTail),
            limit(LimitKind::CallTail),
        );
        rows.push(RateRow {
            x,
            rate: point.value,
            maximizer: point.maximizer,
            tilted_rate: tilted_rate(params, x),
            limit_put_tail: put,
            limit_mid_tail: mid,
            limit_call_tail: call,
            outside_proven_range: outside,
        });
    }
    let report = RateReport { config: &cfg, rows };
    let bytes = match common.format {
        OutputFormat::Json => json_bytes(&report),
        OutputFormat::Csv => {
            let mut table = CsvTable::new(vec![
                "x",
                "rate",
                "maximizer",
                "tilted_rate",
                "limit_put_tail",
                "limit_mid_tail",
                "limit_call_tail",
                "outside_proven_range",
            ]);
            table.comment(config_comment(&cfg));
            for r in &report.rows {
                table.row(vec![
                    sig(r.x),
                    sig(r.rate),
                    sig(r.maximizer),
                    sig(r.tilted_rate),
                    opt(r.limit_put_tail),
                    opt(r.limit_mid_tail),
                    opt(r.limit_call_tail),
                    r.outside_proven_range.join(";"),
                ]);
            }
            table.to_bytes()
        }
    };
    Ok(Outcome {
        bytes,
        exit_code: EXIT_OK,
        summary: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// `false` for checks that are reported but do not affect the exit code.
    pub gating: bool,
    pub detail: String,
}

#[derive(Serialize)]
struct VerifyOptions<'a> {
    #[serde(flatten)]
    args: &'a VerifyArgs,
    perturbation: Perturbation,
    limit_kind: Option<LimitKind>,
    outside_proven_range: bool,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: &'a RunConfig<VerifyOptions<'a>>,
    estimates: &'a [montecarlo::ConvergenceRow],
    invariant_checks: &'a [Check],
}

fn default_perturbation(measure: MeasureArg) -> Perturbation {
    match measure {
        MeasureArg::Pricing => Perturbation::PlusExp(1.0),
        MeasureArg::Share => Perturbation::MinusExp(1.0),
    }
}

/// Spec of the family whose tail is being estimated, for the informational gate.
fn perturbed_spec(params: &HestonParams, measure: Measure, perturbation: Perturbation) -> Option<CgfSpec> {
    let spec = match measure {
        Measure::Pricing => CgfSpec::base(*params),
        Measure::Share => CgfSpec::share(*params),
    };
    match perturbation {
        Perturbation::None => Some(spec),
        Perturbation::PlusExp(l) => spec.perturb(l, Side::Upper).ok(),
        Perturbation::MinusExp(l) => spec.perturb(l, Side::Lower).ok(),
    }
}

pub(super) fn verify(ctx: &Context, args: &VerifyArgs) -> Result<Outcome, CliError> {
    let (common, params) = (ctx.common, ctx.params);
    if !args.x.is_finite() {
        return Err(format!("--x must be finite, got {}", args.x).into());
    }
    if !(args.steps_per_unit_time > 0.0) || !args.steps_per_unit_time.is_finite() {
        return Err(format!(
            "--steps-per-unit-time must be positive, got {}",
            args.steps_per_unit_time
        )
        .into());
    }
    if !(args.tol >= 0.0) {
        return Err(format!("--tol must be nonnegative, got {}", args.tol).into());
    }
    let t0 = *args.t.first().ok_or_else(|| "--t needs at least one horizon".to_string())?;
    let perturbation = args.perturb.unwrap_or_else(|| default_perturbation(args.measure));
    let measure: Measure = args.measure.into();
    let direction: Direction = args.direction.into();
    let mut base = McConfig::with_step_density(t0, args.paths, args.steps_per_unit_time, ctx.seed)
        .measure(measure)
        .scheme(args.scheme.into())
        .threads(common.threads);
    base.budget = args.budget;
    for &t in &args.t {
        base.at_horizon(t).validate()?;
    }

    let table = convergence_study(params, &base, args.x, perturbation, direction, &args.t, common.force)?;

    let final_gap = table.final_gap();
    let within = final_gap.is_some_and(|g| g <= args.tol);
    let mut checks = vec![
        Check {
            name: "final_gap_within_tolerance",
            passed: within,
            gating: true,
            detail: match final_gap {
                Some(g) => format!("gap {} vs tol {}", sig(g), sig(args.tol)),
                None => "no hits at the final horizon".into(),
            },
        },
        Check {
            name: "gaps_decreasing",
            passed: table.gaps_decreasing(),
            gating: false,
            detail: table
                .rows
                .iter()
                .map(|r| opt(r.gap))
                .collect::<Vec<_>>()
                .join(";"),
        },
    ];
    if let Some(spec) = perturbed_spec(params, measure, perturbation) {
        let gate = ldp_gate(&spec);
        checks.push(Check {
            name: "gartner_ellis_gate",
            passed: gate.ldp_valid,
            gating: false,
            detail: if gate.failures.is_empty() {
                "essentially smooth".into()
            } else {
                gate.failures
                    .iter()
                    .map(|f| f.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            },
        });
    }

    let cfg = config(
        "verify",
        ctx,
        VerifyOptions {
            args,
            perturbation,
            limit_kind: table.limit_kind,
            outside_proven_range: table.outside_proven_range,
        },
    );
    let bytes = match common.format {
        OutputFormat::Json => json_bytes(&VerifyReport {
            config: &cfg,
            estimates: &table.rows,
            invariant_checks: &checks,
        }),
        OutputFormat::Csv => {
            let mut out = CsvTable::new(vec![
                "t",
                "n_steps",
                "p_hat",
                "std_err",
                "n_hits",
                "scaled_log",
                "ci_lo",
                "ci_hi",
                "theoretical_limit",
                "gap",
            ]);
            out.comment(config_comment(&cfg));
            if table.outside_proven_range {
                out.comment("outside proven range");
            }
            for c in &checks {
                out.comment(format!(
                    "check {}={} ({})",
                    c.name,
                    if c.passed { "pass" } else { "fail" },
                    c.detail
                ));
            }
            for r in &table.rows {
                out.row(vec![
                    sig(r.t),
                    r.n_steps.to_string(),
                    sig(r.p_hat),
                    sig(r.std_err),
                    r.n_hits.to_string(),
                    r.scaled_log.map_or_else(|| "-inf".into(), sig),
                    opt(r.ci_lo),
                    opt(r.ci_hi),
                    opt(r.theoretical_limit),
                    opt(r.gap),
                ]);
            }
            out.to_bytes()
        }
    };
    let summary = match final_gap {
        Some(g) => format!(
            "verify: final gap {} {} tolerance {}",
            sig(g),
            if within { "<=" } else { ">" },
            sig(args.tol)
        ),
        None => "verify: no hits at the final horizon".into(),
    };
    Ok(Outcome {
        bytes,
        exit_code: if within { EXIT_OK } else { EXIT_FAILED },
        summary: Some(summary),
    })
}

#[derive(Serialize)]
struct SelftestReport<'a> {
    config: &'a RunConfig<&'a SelftestArgs>,
    invariant_checks: &'a [Check],
    passed: bool,
}

fn random_params(rng: &mut ChaCha8Rng) -> HestonParams {
    loop {
        let kappa = rng.random_range(0.5..5.0);
        let theta = rng.random_range(0.01..0.5);
        let sigma = rng.random_range(0.1..2.0);
        let rho = rng.random_range(-0.9..0.9);
        let y0 = rng.random_range(0.01..0.5);
        if let Ok(p) = HestonParams::new(kappa, theta, sigma, rho, y0, 0.0) {
            return p;
        }
    }
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        gating: true,
        detail: format!("max error {} (tol {})", sig(worst), sig(tol)),
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
}

fn grid_sup(spec: &CgfSpec, x: f64, n: usize) -> f64 {
    let d = spec.effective_domain();
    let (lo, hi) = (d.lo(), d.hi());
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .filter_map(|u| spec.eval(u).finite().map(|l| u * x - l))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Runs the invariant suite; analytic items first, then simulation items.
pub(crate) fn selftest_checks(params: &HestonParams, seed: u64, paths: usize, threads: Option<usize>) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = vec![*params];
    sets.extend((0..50).map(|_| random_params(&mut rng)));
    let mut checks = Vec::new();

    checks.push(check(
        "cgf_zero_at_0_and_1",
        max_of(sets.iter().flat_map(|p| {
            let s = CgfSpec::base(*p);
            [s.eval(0.0).to_float().abs(), s.eval(1.0).to_float().abs()]
        })),
        1e-12,
    ));
    checks.push(check(
        "delta_vanishes_at_endpoints",
        max_of(sets.iter().flat_map(|p| {
            let (lo, hi) = domain_endpoints(p);
            let scale = p.kappa() * p.kappa() + p.sigma() * p.sigma();
            [delta(p, lo).abs() / scale, delta(p, hi).abs() / scale]
        })),
        1e-9,
    ));
    checks.push(check(
        "derivative_at_0",
        max_of(sets.iter().map(|p| {
            let want = asymptotics::pricing_minimizer(p);
            let got = CgfSpec::base(*p).derivative(0.0).unwrap_or(f64::NAN);
            ((got - want) / want).abs()
        })),
        1e-10,
    ));
    checks.push(check(
        "derivative_at_1",
        max_of(sets.iter().map(|p| {
            let want = asymptotics::share_minimizer(p);
            let got = CgfSpec::base(*p).derivative(1.0).unwrap_or(f64::NAN);
            ((got - want) / want).abs()
        })),
        1e-10,
    ));

    let base = CgfSpec::base(*params);
    let xs: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let mut oracle_err = 0.0f64;
    for &x in &xs {
        let got = conjugate(&base, x)?.value;
        let want = grid_sup(&base, x, 200_000);
        oracle_err = oracle_err.max(if got >= want - 1e-12 { got - want } else { f64::INFINITY });
    }
    checks.push(check("conjugate_matches_grid_supremum", oracle_err, 1e-6));

    let (lo, hi) = domain_endpoints(params);
    let mut fy_violation = 0.0f64;
    for _ in 0..1000 {
        let u = rng.random_range(lo..hi);
        let x = rng.random_range(-2.0..2.0);
        let lam = base.eval(u).to_float();
        let rate = conjugate(&base, x)?.value;
        fy_violation = fy_violation.max(u * x - lam - rate);
    }
    checks.push(check("fenchel_young", fy_violation, 1e-9));

    let mut tilt_err = 0.0f64;
    for &x in &xs {
        let r = conjugate(&base, x)?.value;
        tilt_err = tilt_err.max((tilted_rate(params, x) - (r - x)).abs());
    }
    checks.push(check("tilt_identity", tilt_err, 1e-9));

    let cut = base.perturb(1.0, Side::Upper)?;
    let cut_report = cut.smoothness_report();
    let cut_ok = cut_report
        .endpoints
        .iter()
        .any(|e| e.endpoint == 1.0 && !e.is_steep && !e.lower_semicontinuous);
    let wide = base.perturb(hi + 0.5, Side::Upper)?.smoothness_report();
    let base_smooth = base.smoothness_report().essentially_smooth;
    checks.push(Check {
        name: "smoothness_classification",
        passed: base_smooth && (hi <= 1.0 || cut_ok) && wide.essentially_smooth,
        gating: true,
        detail: format!(
            "base smooth={base_smooth}, cut at 1 flagged={cut_ok}, wide cut smooth={}",
            wide.essentially_smooth
        ),
    });

    checks.push(Check {
        name: "exponential_cdf_monotone",
        passed: exact_cdf_monotone(&[0.5, 1.0, 3.0, 10.0], &[0.01, 0.1, 1.0, 5.0]),
        gating: true,
        detail: "P[E_lambda < a] increasing in lambda".into(),
    });

    let short = McConfig::with_step_density(1.0, paths, 20.0, seed).threads(threads);
    let five = McConfig::with_step_density(5.0, paths, 20.0, seed).threads(threads);

    let ordering = ordering_check(params, &five, -0.1, 1.0, 3.0, Coupling::Coupled)?;
    checks.push(Check {
        name: "ordering_lambda_1_3",
        passed: ordering.holds(),
        gating: true,
        detail: format!(
            "p(E1)={} p(E3)={} p(none)={}",
            sig(ordering.p_lambda1.p_hat),
            sig(ordering.p_lambda2.p_hat),
            sig(ordering.p_none.p_hat)
        ),
    });

    let put = put_representation_check(params, &short, params.x0().exp())?;
    checks.push(Check {
        name: "put_representation_t1",
        passed: put.agrees,
        gating: true,
        detail: format!(
            "direct={} representation={} diff={} se={}",
            sig(put.direct.mean),
            sig(put.representation.mean),
            sig(put.difference),
            sig(put.joint_std_err)
        ),
    });

    let m = martingale_check(params, &short)?;
    checks.push(Check {
        name: "martingale_t1",
        passed: m.consistent_with(1.0),
        gating: true,
        detail: format!("mean={} se={}", sig(m.mean), sig(m.std_err)),
    });

    let share = share_consistency_check(params, &five, 0.0, Direction::Above)?;
    checks.push(Check {
        name: "share_measure_consistency_t5",
        passed: share.agrees,
        gating: true,
        detail: format!(
            "direct={} weighted={} se={}",
            sig(share.direct.mean),
            sig(share.weighted.mean),
            sig(share.joint_std_err)
        ),
    });
    Ok(checks)
}

pub(super) fn selftest(ctx: &Context, args: &SelftestArgs) -> Result<Outcome, CliError> {
    let (common, params) = (ctx.common, ctx.params);
    let cfg = config("selftest", ctx, args);
    let checks = selftest_checks(params, ctx.seed, args.paths, common.threads)?;
    let passed = checks.iter().filter(|c| c.gating).all(|c| c.passed);
    let bytes = match common.format {
        OutputFormat::Json => json_bytes(&SelftestReport {
            config: &cfg,
            invariant_checks: &checks,
            passed,
        }),
        OutputFormat::Csv => {
            let mut table = CsvTable::new(vec!["item", "status", "detail"]);
            table.comment(config_comment(&cfg));
            for c in &checks {
                table.row(vec![
                    c.name.to_string(),
                    if c.passed { "PASS" } else { "FAIL" }.to_string(),
                    c.detail.clone(),
                ]);
            }
            table.to_bytes()
        }
    };
    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(Outcome {
        bytes,
        exit_code: if passed { EXIT_OK } else { EXIT_FAILED },
        summary: Some(format!("selftest: {} of {} items passed", checks.len() - failed, checks.len())),
    })
}
