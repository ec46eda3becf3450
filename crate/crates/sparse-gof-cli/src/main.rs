//! `sparse-gof`: file-driven front end for the sparse-regime
//! goodness-of-fit library. Every subcommand reads plain-text inputs,
//! writes JSON (default) or CSV, and embeds the full invocation in JSON
//! output so runs can be reproduced from their artifacts alone.
//!
//! Exit codes: 0 success, 2 input validation failure, 3 guard/budget
//! refusal, 1 internal error.

use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::json;

use sparse_gof::cumulants::{
    moments_to_cumulants, moments_to_cumulants_exact, statulevicius_delta, CumulantVector,
    MomentVector,
};
use sparse_gof::io::{parse_counts, parse_numbers, parse_probabilities, ParsedNumbers};
use sparse_gof::oracle::{enumerate_multinomial, exact_tail};
use sparse_gof::poisson::{central_moment, moment_coefficients, PoissonRate};
use sparse_gof::simulate::{estimate_tail, results_to_csv, SimulationConfig};
use sparse_gof::statistics::{
    chi_square_profile, chi_square_statistic, log_likelihood_ratio, lr_profile_asymptotic,
    Centering, CountsVector, ProbabilityVector, StatKind, LR_EXPANSION_LAMBDA_FLOOR,
};
use sparse_gof::tail::{tail_pvalue, zone_diagnostics, ZoneConstants};

const EXIT_VALIDATION: i32 = 2;
const EXIT_REFUSAL: i32 = 3;
const EXIT_INTERNAL: i32 = 1;

#[derive(Parser, Serialize)]
#[command(
    name = "sparse-gof",
    version,
    about = "Tail p-values, exact enumeration and seeded simulation for sparse multinomial goodness-of-fit statistics"
)]
struct Cli {
    #[command(subcommand)]
    #[serde(flatten)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Statistic and tail p-value report from a counts file and a probs file
    Pvalue(PvalueArgs),
    /// Mean/variance profile of a statistic under the Poissonized scheme
    Profile(ProfileArgs),
    /// Poisson central moment and its exact polynomial coefficients
    Moments(MomentsArgs),
    /// Moment vector (file or stdin) to cumulant vector
    Cumulants(CumulantsArgs),
    /// Exact tail probability by full enumeration (small instances)
    Exact(ExactArgs),
    /// Seeded Monte Carlo estimate of tail probabilities
    Simulate(SimulateArgs),
    /// Validity-zone caps and condition flags for a deviation
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Serialize, Clone)]
struct OutputArgs {
    /// Output format (units: none; default json)
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    /// Write output to this path instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PvalueArgs {
    /// Statistic kind: chi2 (Pearson) or lr (log-likelihood ratio)
    #[arg(long)]
    stat: String,
    /// Counts file: one non-negative integer per line, # comments
    #[arg(long)]
    counts: PathBuf,
    /// Probability file: one value per line, decimals or rationals a/b
    #[arg(long)]
    probs: PathBuf,
    /// Sample size override; must match the summed counts (units: draws)
    #[arg(long)]
    n: Option<u64>,
    /// Chi-square centering: N (default, asymptotic) or N-1 (exact mean)
    #[arg(long, default_value = "N", value_parser = ["N", "N-1"])]
    centering: String,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ProfileArgs {
    /// Statistic kind: chi2 or lr
    #[arg(long)]
    stat: String,
    /// Probability file
    #[arg(long)]
    probs: PathBuf,
    /// Sample size (units: draws)
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct MomentsArgs {
    /// Central-moment order ν, between 2 and 40
    #[arg(long)]
    order: u32,
    /// Poisson rate λ > 0; decimals or a rational a/b
    #[arg(long)]
    lambda: String,
    /// Also evaluate the moment in exact rational arithmetic
    #[arg(long, default_value_t = false)]
    exact_rational: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct CumulantsArgs {
    /// Moment file, one raw moment per line (stdin when omitted)
    input: Option<PathBuf>,
    /// Run the transform in exact rational arithmetic
    #[arg(long, default_value_t = false)]
    exact_rational: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ExactArgs {
    /// Statistic kind: chi2 or lr
    #[arg(long)]
    stat: String,
    /// Probability file
    #[arg(long)]
    probs: PathBuf,
    /// Sample size (units: draws)
    #[arg(long)]
    n: u64,
    /// Tail threshold on the raw statistic; the tail is P{stat >= t}
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Statistic kind: chi2 or lr
    #[arg(long)]
    stat: String,
    /// Probability file
    #[arg(long)]
    probs: PathBuf,
    /// Sample size per replication (units: draws)
    #[arg(long)]
    n: u64,
    /// Comma-separated standardized deviations, ascending, non-negative
    #[arg(long)]
    x: String,
    /// Replications (minimum 1000)
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    /// RNG seed (64-bit)
    #[arg(long, default_value_t = 0)]
    seed: i64,
    /// Worker partitions; output does not depend on this value
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct DiagnoseArgs {
    /// Statistic kind: chi2 or lr
    #[arg(long)]
    stat: String,
    /// Probability file
    #[arg(long)]
    probs: PathBuf,
    /// Sample size (units: draws)
    #[arg(long)]
    n: u64,
    /// Comma-separated standardized deviations to diagnose
    #[arg(long)]
    x: String,
    /// Lower cell-balance constant (chi-square condition)
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Upper cell-balance constant (chi-square condition)
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Lower cell-balance constant (likelihood-ratio condition)
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    /// Upper cell-balance constant (likelihood-ratio condition)
    #[arg(long, default_value_t = 1.0)]
    c4: f64,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<sparse_gof::Error> for Failure {
    fn from(err: sparse_gof::Error) -> Self {
        let code = if err.is_refusal() {
            EXIT_REFUSAL
        } else if err.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_INTERNAL
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

fn read_file(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))
}

fn parse_kind(s: &str) -> Result<StatKind, Failure> {
    s.parse::<StatKind>().map_err(Failure::from)
}

fn parse_centering(s: &str) -> Result<Centering, Failure> {
    s.parse::<Centering>().map_err(Failure::from)
}

fn parse_x_list(s: &str) -> Result<Vec<f64>, Failure> {
    let xs: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    xs.map_err(|e| Failure::validation(format!("cannot parse --x list {s:?}: {e}")))
}

fn emit(output: &OutputArgs, text: String) -> Result<(), Failure> {
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            if text.ends_with('\n') {
                print!("{text}");
            } else {
                println!("{text}");
            }
            Ok(())
        }
    }
}

fn envelope<T: Serialize>(subcommand: &str, flags: &impl Serialize, result: T) -> String {
    let doc = json!({
        "invocation": {
            "subcommand": subcommand,
            "flags": flags,
            "version": env!("CARGO_PKG_VERSION"),
        },
        "result": result,
    });
    serde_json::to_string_pretty(&doc).expect("serializable output")
}

fn warn_low_lambda(probs: &ProbabilityVector, n: u64) {
    let lambda = n as f64 / probs.len() as f64;
    if lambda < LR_EXPANSION_LAMBDA_FLOOR {
        eprintln!(
            "warning: mean cell count {lambda:.3} is below {LR_EXPANSION_LAMBDA_FLOOR}; \
             the likelihood-ratio expansion degrades there"
        );
    }
}

fn run_pvalue(args: &PvalueArgs) -> Result<(), Failure> {
    let kind = parse_kind(&args.stat)?;
    let centering = parse_centering(&args.centering)?;
    let probs = parse_probabilities(&read_file(&args.probs)?)?;
    let counts_raw = parse_counts(&read_file(&args.counts)?)?;
    let counts = match args.n {
        Some(declared) => CountsVector::with_declared_n(counts_raw.counts().to_vec(), declared)?,
        None => counts_raw,
    };
    let statistic = match kind {
        StatKind::ChiSquare => chi_square_statistic(&counts, &probs)?,
        StatKind::LikelihoodRatio => log_likelihood_ratio(&counts, &probs)?,
    };
    if kind == StatKind::LikelihoodRatio {
        warn_low_lambda(&probs, counts.n());
    }
    let report = tail_pvalue(statistic, kind, &probs, counts.n(), centering)?;
    match args.output.format.as_str() {
        "csv" => {
            let mut text = String::from("kind,N,n,statistic,x,p_upper,p_lower\n");
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                kind,
                probs.len(),
                counts.n(),
                statistic,
                report.x,
                report.p_upper,
                report.p_lower
            ));
            emit(&args.output, text)
        }
        _ => emit(
            &args.output,
            envelope(
                "pvalue",
                args,
                json!({
                    "kind": kind,
                    "n": counts.n(),
                    "n_cells": probs.len(),
                    "statistic": statistic,
                    "report": report,
                }),
            ),
        ),
    }
}

fn run_profile(args: &ProfileArgs) -> Result<(), Failure> {
    let kind = parse_kind(&args.stat)?;
    let probs = parse_probabilities(&read_file(&args.probs)?)?;
    let profile = match kind {
        StatKind::ChiSquare => chi_square_profile(&probs, args.n)?,
        StatKind::LikelihoodRatio => {
            warn_low_lambda(&probs, args.n);
            lr_profile_asymptotic(&probs, args.n)?
        }
    };
    match args.output.format.as_str() {
        "csv" => {
            let mut text = String::from(
                "poissonized_mean,covariance_slope,raw_variance,corrected_variance,mean_cell_count,sparsity_factor\n",
            );
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                profile.poissonized_mean,
                profile.covariance_slope,
                profile.raw_variance,
                profile.corrected_variance,
                profile.mean_cell_count,
                profile.sparsity_factor
            ));
            emit(&args.output, text)
        }
        _ => emit(&args.output, envelope("profile", args, profile)),
    }
}

fn parse_lambda(text: &str) -> Result<(f64, Option<BigRational>), Failure> {
    if text.contains('/') {
        match parse_numbers(text)? {
            ParsedNumbers::Rationals(v) if v.len() == 1 => {
                let lambda = v.into_iter().next().unwrap();
                let f = lambda.to_f64().unwrap_or(f64::NAN);
                Ok((f, Some(lambda)))
            }
            _ => Err(Failure::validation(format!(
                "--lambda {text:?} is not a single rational"
            ))),
        }
    } else {
        text.parse::<f64>()
            .map(|f| (f, None))
            .map_err(|e| Failure::validation(format!("cannot parse --lambda {text:?}: {e}")))
    }
}

fn run_moments(args: &MomentsArgs) -> Result<(), Failure> {
    let (lambda_f, lambda_exact) = parse_lambda(&args.lambda)?;
    let rate = PoissonRate::new(lambda_f)?;
    let poly = moment_coefficients(args.order)?;
    let value = central_moment(args.order, rate)?;
    let coefficients: Vec<_> = poly
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            json!({
                "l": i + 1,
                "numerator": c.numer().to_string(),
                "denominator": c.denom().to_string(),
            })
        })
        .collect();
    let exact_value = if args.exact_rational {
        let lambda = lambda_exact
            .unwrap_or_else(|| BigRational::from_float(lambda_f).expect("finite lambda"));
        let v = poly.eval_exact(&lambda);
        Some(format!("{}/{}", v.numer(), v.denom()))
    } else {
        None
    };
    match args.output.format.as_str() {
        "csv" => {
            let mut text = String::from("nu,l,numerator,denominator\n");
            text.push_str(&poly.csv_rows());
            emit(&args.output, text)
        }
        _ => emit(
            &args.output,
            envelope(
                "moments",
                args,
                json!({
                    "order": args.order,
                    "lambda": lambda_f,
                    "central_moment": value,
                    "central_moment_exact": exact_value,
                    "coefficients": coefficients,
                }),
            ),
        ),
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<String, Failure> {
    match path {
        Some(p) => read_file(p),
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Failure::validation(format!("cannot read stdin: {e}")))?;
            Ok(buf)
        }
    }
}

fn run_cumulants(args: &CumulantsArgs) -> Result<(), Failure> {
    let mut text = read_input(&args.input)?;
    // moment vectors are accepted as JSON arrays or one-value-per-line text
    if text.trim_start().starts_with('[') {
        let values: Vec<f64> = serde_json::from_str(text.trim())
            .map_err(|e| Failure::validation(format!("cannot parse JSON array input: {e}")))?;
        text = values
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join("\n");
    }
    let text = text;
    let (moments_f, cumulants_f, exact_strings) = if args.exact_rational {
        let rationals = match parse_numbers(&text)? {
            ParsedNumbers::Rationals(v) => v,
            ParsedNumbers::Floats(v) => v
                .into_iter()
                .map(|f| {
                    BigRational::from_float(f).ok_or_else(|| {
                        Failure::validation(format!("non-finite moment {f}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        let cums = moments_to_cumulants_exact(&rationals)?;
        let moments_f: Vec<f64> = rationals.iter().map(|r| r.to_f64().unwrap()).collect();
        let cums_f: Vec<f64> = cums.iter().map(|r| r.to_f64().unwrap()).collect();
        let strings: Vec<String> = cums
            .iter()
            .map(|c| format!("{}/{}", c.numer(), c.denom()))
            .collect();
        (moments_f, cums_f, Some(strings))
    } else {
        let moments = MomentVector::new(sparse_gof::io::parse_floats(&text)?)?;
        let cums = moments_to_cumulants(&moments)?;
        (
            moments.values().to_vec(),
            cums.values().to_vec(),
            None,
        )
    };
    // a Δ certificate is only defined for standardized input
    let delta = CumulantVector::new(cumulants_f.clone())
        .ok()
        .and_then(|c| statulevicius_delta(&c).ok());
    match args.output.format.as_str() {
        "csv" => {
            let mut text = String::new();
            for c in &cumulants_f {
                text.push_str(&format!("{c}\n"));
            }
            emit(&args.output, text)
        }
        _ => emit(
            &args.output,
            envelope(
                "cumulants",
                args,
                json!({
                    "moments": moments_f,
                    "cumulants": cumulants_f,
                    "cumulants_exact": exact_strings,
                    "statulevicius": delta,
                }),
            ),
        ),
    }
}

fn run_exact(args: &ExactArgs) -> Result<(), Failure> {
    let kind = parse_kind(&args.stat)?;
    let probs = parse_probabilities(&read_file(&args.probs)?)?;
    let table = enumerate_multinomial(args.n, &probs)?;
    let tail = match args.threshold {
        Some(t) => Some(exact_tail(args.n, &probs, kind, t)?),
        None => None,
    };
    match args.output.format.as_str() {
        "csv" => emit(&args.output, table.to_csv()),
        _ => emit(
            &args.output,
            envelope(
                "exact",
                args,
                json!({
                    "kind": kind,
                    "n": args.n,
                    "n_cells": probs.len(),
                    "outcomes": table.len(),
                    "rational_weights": table.exact_inputs(),
                    "threshold": args.threshold,
                    "tail": tail,
                }),
            ),
        ),
    }
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let kind = parse_kind(&args.stat)?;
    let probs = parse_probabilities(&read_file(&args.probs)?)?;
    let x_grid = parse_x_list(&args.x)?;
    let config = SimulationConfig::new(kind, args.n, probs, args.reps, x_grid, args.seed as u64)
        .with_partitions(args.threads);
    let result = estimate_tail(&config)?;
    match args.output.format.as_str() {
        "csv" => emit(&args.output, results_to_csv(&[result])),
        _ => emit(&args.output, envelope("simulate", args, result)),
    }
}

fn run_diagnose(args: &DiagnoseArgs) -> Result<(), Failure> {
    let kind = parse_kind(&args.stat)?;
    let probs = parse_probabilities(&read_file(&args.probs)?)?;
    let x_grid = parse_x_list(&args.x)?;
    if args.n == 0 {
        return Err(Failure::validation("--n must be positive"));
    }
    let constants = ZoneConstants {
        c1: args.c1,
        c2: args.c2,
        c3: args.c3,
        c4: args.c4,
    };
    let diagnostics: Vec<_> = x_grid
        .iter()
        .map(|&x| {
            let zone = zone_diagnostics(&probs, args.n, x, kind, &constants);
            json!({ "x": x, "zone": zone })
        })
        .collect();
    match args.output.format.as_str() {
        "csv" => {
            let mut text = String::from("x,cap,value,ratio,flag\n");
            for &x in &x_grid {
                let zone = zone_diagnostics(&probs, args.n, x, kind, &constants);
                for (name, value) in &zone.caps {
                    text.push_str(&format!(
                        "{},{},{},{},{}\n",
                        x, name, value, zone.cap_ratios[name], zone.flags[name]
                    ));
                }
            }
            emit(&args.output, text)
        }
        _ => emit(&args.output, envelope("diagnose", args, diagnostics)),
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Pvalue(args) => run_pvalue(args),
        Command::Profile(args) => run_profile(args),
        Command::Moments(args) => run_moments(args),
        Command::Cumulants(args) => run_cumulants(args),
        Command::Exact(args) => run_exact(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Diagnose(args) => run_diagnose(args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
