//! Command-line front end: `domain`, `rate`, `verify` and `selftest`.
//!
//! Exit codes are 0 for success, 1 when a verification fails and 2 for usage
//! or configuration errors. Every output embeds the resolved configuration
//! (parameters, seed and command options) as its first record.

mod commands;
pub mod format;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::model::{self, HestonParams, RawHestonParams};
use crate::montecarlo::{Direction, Measure, Perturbation, Scheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "heston-ldp", version, about = "Large-maturity asymptotics of the Heston model")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file with kappa, theta, sigma, rho, y0, x0 (or an output's embedded config)
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Random seed [default: the seed embedded in --params, else 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Evaluate limit formulas outside the range where they are proven
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for simulation; never changes results
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Effective domain and smoothness of the base, tilted and perturbed cgfs
    Domain(DomainArgs),
    /// Rate function, tilted rate and limit values on an x grid
    Rate(RateArgs),
    /// Monte Carlo convergence of a scaled log tail probability to its limit
    Verify(VerifyArgs),
    /// Analytic and simulation invariant suite
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DomainArgs {
    /// Rate of the exponential perturbation
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RateArgs {
    /// Uniform grid START:STOP:N
    #[arg(long, allow_hyphen_values = true, conflicts_with = "xs")]
    pub grid: Option<String>,
    /// Comma-separated x values
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub xs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureArg {
    Pricing,
    Share,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionArg {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Euler,
    Exact,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, value_enum, default_value_t = MeasureArg::Pricing)]
    pub measure: MeasureArg,
    /// none, +exp:LAMBDA or -exp:LAMBDA [default: +exp:1 under pricing, -exp:1 under share]
    #[arg(long, allow_hyphen_values = true, value_parser = parse_perturbation)]
    pub perturb: Option<Perturbation>,
    #[arg(long, value_enum, default_value_t = DirectionArg::Below)]
    pub direction: DirectionArg,
    /// Comma-separated horizons
    #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 20.0)]
    pub steps_per_unit_time: f64,
    /// Absolute tolerance on the gap at the largest horizon
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Euler)]
    pub scheme: SchemeArg,
    /// Cap on simulated path-steps per horizon
    #[arg(long, default_value_t = crate::montecarlo::DEFAULT_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelftestArgs {
    /// Paths per simulation check
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Pricing => Measure::Pricing,
            MeasureArg::Share => Measure::Share,
        }
    }
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Below => Direction::Below,
            DirectionArg::Above => Direction::Above,
        }
    }
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => Scheme::FullTruncationEuler,
            SchemeArg::Exact => Scheme::ExactVarianceEulerLog,
        }
    }
}

/// Parses `none`, `+exp:LAMBDA` or `-exp:LAMBDA`.
pub fn parse_perturbation(s: &str) -> Result<Perturbation, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("none") {
        return Ok(Perturbation::None);
    }
    let (sign, rest) = if let Some(r) = s.strip_prefix("+exp:") {
        (1, r)
    } else if let Some(r) = s.strip_prefix("-exp:") {
        (-1, r)
    } else {
        return Err(format!("expected none, +exp:LAMBDA or -exp:LAMBDA, got {s:?}"));
    };
    let lambda: f64 = rest
        .parse()
        .map_err(|_| format!("bad perturbation rate {rest:?}"))?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(format!("perturbation rate must be positive and finite, got {lambda}"));
    }
    Ok(if sign > 0 {
        Perturbation::PlusExp(lambda)
    } else {
        Perturbation::MinusExp(lambda)
    })
}

/// Parses a `START:STOP:N` grid into `N` equally spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be START:STOP:N, got {s:?}"));
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| format!("bad grid start {:?}", parts[0]))?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| format!("bad grid stop {:?}", parts[1]))?;
    let n: usize = parts[2].trim().parse().map_err(|_| format!("bad grid size {:?}", parts[2]))?;
    if !start.is_finite() || !stop.is_finite() {
        return Err("grid endpoints must be finite".into());
    }
    if n == 0 {
        return Err("grid needs at least one point".into());
    }
    if stop < start {
        return Err(format!("grid stop {stop} is below start {start}"));
    }
    if n == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i + 1 == n { stop } else { start + step * i as f64 })
        .collect())
}

/// Parameters and seed after applying defaults, `--params` and flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub params: HestonParams,
    pub seed: u64,
}

/// Reference parameters, then `--params`, then individual flags; the seed
/// comes from `--seed`, else the file, else [`DEFAULT_SEED`].
pub fn resolve(common: &CommonArgs) -> Result<Resolved, String> {
    let mut raw = HestonParams::reference().to_raw();
    let mut file_seed = None;
    if let Some(path) = &common.params {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        (raw, file_seed) = parse_params_file(&text)?;
    }
    let overrides = [
        (&mut raw.kappa, common.kappa),
        (&mut raw.theta, common.theta),
        (&mut raw.sigma, common.sigma),
        (&mut raw.rho, common.rho),
        (&mut raw.y0, common.y0),
        (&mut raw.x0, common.x0),
    ];
    for (slot, flag) in overrides {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    Ok(Resolved {
        params: model::validate(raw).map_err(|e| e.to_string())?,
        seed: common.seed.or(file_seed).unwrap_or(DEFAULT_SEED),
    })
}

/// Reads a bare parameter object, a JSON output of a previous run, or a CSV
/// output whose first line is `# config={...}`.
fn parse_params_file(text: &str) -> Result<(RawHestonParams, Option<u64>), String> {
    let json = match text.trim_start().strip_prefix("# config=") {
        Some(rest) => rest.lines().next().unwrap_or_default(),
        None => text,
    };
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| format!("invalid params JSON: {e}"))?;
    let scope = value.get("config").unwrap_or(&value);
    let seed = scope.get("seed").and_then(|s| s.as_u64());
    let params = scope.get("params").unwrap_or(scope);
    let raw = serde_json::from_value(params.clone()).map_err(|e| format!("invalid params JSON: {e}"))?;
    Ok((raw, seed))
}

/// Configuration echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig<O: Serialize> {
    pub command: &'static str,
    pub params: RawHestonParams,
    pub seed: u64,
    pub force: bool,
    pub options: O,
}

/// Rendered command result.
pub struct Outcome {
    pub bytes: Vec<u8>,
    pub exit_code: i32,
    /// One-line summary for stderr.
    pub summary: Option<String>,
}

pub(crate) enum CliError {
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<String> for CliError {
    fn from(s: String) -> Self {
        CliError::Usage(s)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.common.out {
                Some(path) => fs::write(path, &outcome.bytes)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out.write_all(&outcome.bytes).map_err(|e| e.to_string()),
            };
            if let Err(msg) = written {
                let _ = writeln!(err, "error: {msg}");
                return EXIT_USAGE;
            }
            if let Some(s) = outcome.summary {
                let _ = writeln!(err, "{s}");
            }
            outcome.exit_code
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let resolved = resolve(&cli.common)?;
    let ctx = commands::Context {
        common: &cli.common,
        params: &resolved.params,
        seed: resolved.seed,
    };
    match &cli.command {
        Command::Domain(a) => commands::domain(&ctx, a),
        Command::Rate(a) => commands::rate(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::Selftest(a) => commands::selftest(&ctx, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_syntax() {
        assert_eq!(parse_perturbation("none"), Ok(Perturbation::None));
        assert_eq!(parse_perturbation("+exp:1"), Ok(Perturbation::PlusExp(1.0)));
        assert_eq!(parse_perturbation("-exp:2.5"), Ok(Perturbation::MinusExp(2.5)));
        assert!(parse_perturbation("exp:1").is_err());
        assert!(parse_perturbation("+exp:0").is_err());
        assert!(parse_perturbation("+exp:-1").is_err());
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:inf:3").is_err());
    }

    #[test]
    fn params_json_forms() {
        let bare = r#"{"kappa":2,"theta":0.1,"sigma":1,"rho":0,"y0":0.1,"x0":0}"#;
        let reference = HestonParams::reference().to_raw();
        assert_eq!(parse_params_file(bare).unwrap(), (reference, None));
        let echoed = format!(r#"{{"command":"rate","params":{bare},"seed":1}}"#);
        assert_eq!(parse_params_file(&echoed).unwrap(), (reference, Some(1)));
        let doc = format!(r#"{{"config":{{"params":{bare},"seed":9}},"rows":[]}}"#);
        assert_eq!(parse_params_file(&doc).unwrap(), (reference, Some(9)));
        let csv = format!("# config={{\"params\":{bare},\"seed\":3}}\nx,rate\n");
        assert_eq!(parse_params_file(&csv).unwrap(), (reference, Some(3)));
        assert!(parse_params_file(r#"{"kappa":2}"#).is_err());
    }
}
