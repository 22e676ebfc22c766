//! Flag definitions, config-file expansion and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rivalfit_core::discrete::{parse_rational, Rational};
use rivalfit_core::solver::{self, Interval, OverlapRule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{flag}: {message}")]
    Flag { flag: &'static str, message: String },
    #[error("{0}")]
    Numerical(rivalfit_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Flag { .. } | CliError::Io { .. } => EXIT_CONFIG,
        }
    }
}

/// Attributes a core error to `flag` unless it is a numerical failure.
pub fn blame(flag: &'static str) -> impl Fn(rivalfit_core::Error) -> CliError {
    move |e| {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Flag {
                flag,
                message: e.to_string(),
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rivalfit",
    version,
    about = "Winner-take-all rewards and maxmin coefficients for two competing linear predictors",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Write the artifact here instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Output format [default: json, or csv for sweep, hermite and example --table]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Random seed for Monte Carlo
    #[arg(long, global = true, env = "RIVALFIT_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for sweep and mc
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=4096))]
    pub parallel: u32,
    /// Flat key=value file; flags given on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Print 17 significant digits instead of 10
    #[arg(long, global = true)]
    pub full_precision: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expected normalized reward of A by cubature
    #[command(args_override_self = true)]
    Reward(RewardArgs),
    /// Monte Carlo rewards of A, B and the total
    #[command(args_override_self = true)]
    Mc(McArgs),
    /// Guaranteed reward of A and the coefficients that attain it
    #[command(args_override_self = true)]
    Maxmin(MaxminArgs),
    /// Maxmin over a grid of regimes
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// The four-bit worked example
    #[command(args_override_self = true)]
    Example(ExampleArgs),
    /// Gauss-Hermite nodes and weights
    #[command(args_override_self = true)]
    Hermite(HermiteArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RegimeArgs {
    /// Fraction of features seen by A
    #[arg(long)]
    pub g1: f64,
    /// Fraction of features seen by B
    #[arg(long)]
    pub g2: f64,
    /// Fraction seen by both
    #[arg(long)]
    pub g12: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RewardArgs {
    #[command(flatten)]
    pub regime: RegimeArgs,
    /// Coefficients a11,a12,a21,a22
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_quad, allow_hyphen_values = true)]
    pub a: [f64; 4],
    /// Cubature order
    #[arg(long, default_value_t = 60)]
    pub order: usize,
    /// Multiply by sqrt(n) to report the absolute reward
    #[arg(long, requires = "n")]
    pub absolute: bool,
    /// Number of features, used with --absolute
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub regime: RegimeArgs,
    /// Coefficients a11,a12,a21,a22
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_quad, allow_hyphen_values = true)]
    pub a: [f64; 4],
    /// Number of draws
    #[arg(long, default_value = "1000000", value_parser = parse_count)]
    pub samples: u64,
    /// Number of features the regime is realized with
    #[arg(long, default_value_t = rivalfit_core::mc::DEFAULT_FEATURES)]
    pub n: usize,
    /// Multiply by sqrt(n) to report absolute rewards
    #[arg(long)]
    pub absolute: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Coefficient range lo:hi for every coefficient
    #[arg(long = "box", default_value = "-2:5", value_parser = parse_box, allow_hyphen_values = true)]
    pub bounds: Interval,
    /// Grid points per axis in each search round
    #[arg(long, default_value_t = solver::DEFAULT_COARSE_POINTS)]
    pub coarse: usize,
    /// Refinement rounds after the coarse pass
    #[arg(long, default_value_t = solver::DEFAULT_REFINE_ROUNDS)]
    pub refine: usize,
    /// Window shrink factor per refinement round
    #[arg(long, default_value_t = solver::DEFAULT_REFINE_SHRINK)]
    pub shrink: f64,
    /// Cubature order
    #[arg(long, default_value_t = rivalfit_core::cubature::DEFAULT_ORDER)]
    pub order: usize,
}

impl SearchArgs {
    pub fn config(&self) -> solver::SearchConfig {
        solver::SearchConfig {
            bounds: self.bounds,
            coarse_points: self.coarse,
            refine_rounds: self.refine,
            refine_shrink: self.shrink,
            cubature_order: self.order,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MaxminArgs {
    #[command(flatten)]
    pub regime: RegimeArgs,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// A's fractions as start:stop:step, or one value
    #[arg(long, value_parser = parse_grid)]
    pub g1: Values,
    /// B's fractions as start:stop:step, or one value
    #[arg(long, value_parser = parse_grid)]
    pub g2: Values,
    /// Overlap: `product` for g1*g2, or a fixed value
    #[arg(long, default_value = "product", value_parser = parse_overlap)]
    pub g12: OverlapRule,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExampleArgs {
    /// A's coefficients (decimals or p/q, exact): one value for both features, or two
    #[arg(long, default_value = "1", value_parser = parse_rationals, allow_hyphen_values = true)]
    pub alpha: Rationals,
    /// B's coefficients (decimals or p/q, exact): one value for all three features, or three
    #[arg(long, default_value = "1", value_parser = parse_rationals, allow_hyphen_values = true)]
    pub beta: Rationals,
    /// Emit the per-outcome table instead of the totals
    #[arg(long, conflicts_with = "maxmin")]
    pub table: bool,
    /// Solve the equal-coefficient maxmin instead
    #[arg(long)]
    pub maxmin: bool,
    /// Grid step for --maxmin
    #[arg(long, default_value = "0.01", value_parser = parse_exact)]
    pub step: Rational,
    /// Lower end of the --maxmin grid
    #[arg(long, default_value = "0", value_parser = parse_exact, allow_hyphen_values = true)]
    pub lo: Rational,
    /// Upper end of the --maxmin grid
    #[arg(long, default_value = "3", value_parser = parse_exact, allow_hyphen_values = true)]
    pub hi: Rational,
}

#[derive(Debug, Clone, Args)]
pub struct HermiteArgs {
    /// Number of nodes
    #[arg(long)]
    pub order: usize,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// A list of numbers given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

/// Exact coefficients given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Rationals(pub Vec<Rational>);

fn parse_exact(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|_| format!("'{s}' is not a decimal or p/q"))
}

fn parse_rationals(s: &str) -> Result<Rationals, String> {
    s.split(',')
        .map(parse_exact)
        .collect::<Result<_, _>>()
        .map(Rationals)
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_f64).collect()
}

fn parse_quad(s: &str) -> Result<[f64; 4], String> {
    let v = parse_list(s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected a11,a12,a21,a22, got {} values", v.len()))
}

fn parse_box(s: &str) -> Result<Interval, String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let (lo, hi) = (parse_f64(lo)?, parse_f64(hi)?);
    if lo >= hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok(Interval::new(lo, hi))
}

fn parse_grid(s: &str) -> Result<Values, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(Values(vec![parse_f64(v)?])),
        [lo, hi, step] => solver::step_grid(parse_f64(lo)?, parse_f64(hi)?, parse_f64(step)?)
            .map(Values)
            .map_err(|e| e.to_string()),
        _ => Err(format!("expected start:stop:step, got '{s}'")),
    }
}

fn parse_overlap(s: &str) -> Result<OverlapRule, String> {
    if s.trim() == "product" {
        Ok(OverlapRule::Product)
    } else {
        parse_f64(s).map(OverlapRule::Fixed)
    }
}

/// Accepts plain integers and forms like `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.trim().parse::<u64>() {
        return Ok(v);
    }
    let v = parse_f64(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("'{s}' is not a whole number"))
    }
}

/// Splices the flags of a `--config` file in right after the subcommand, so
/// that flags given on the command line come later and win.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    for (i, arg) in argv.iter().enumerate() {
        let Some(s) = arg.to_str() else { continue };
        if s == "--" {
            break;
        }
        if s == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Flag {
        flag: "--config",
        message: format!("cannot read {}: {e}", PathBuf::from(&path).display()),
    })?;
    let extra = config_flags(&text)?;
    let at = argv.len().min(2);
    let mut out = argv[..at].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

/// `key = value` lines become `--key value`; `#` starts a comment. A value
/// of `true` or `false` toggles a switch.
pub fn config_flags(text: &str) -> Result<Vec<String>, CliError> {
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Flag {
            flag: "--config",
            message: format!("line {}: expected key=value", lineno + 1),
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Flag {
                flag: "--config",
                message: format!("line {}: bad key", lineno + 1),
            });
        }
        match value.trim() {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => flags.push(format!("--{key}={v}")),
        }
    }
    Ok(flags)
}
