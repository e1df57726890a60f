//! `supermarket`: reproducible experiments on the power-of-d supermarket model.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use supermarket::fixedpoint::ThetaMode;
use supermarket::simulator::ChoiceMode;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "supermarket", version, about = "Fixed points, mean-field dynamics and simulation of the supermarket model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Key parameter theta of a service distribution (JSON).
    Theta(ThetaArgs),
    /// Fixed-point tails u_k (CSV: k,u_k,log10_u_k,upper_bound).
    FixedPoint(FixedPointArgs),
    /// Expected sojourn time at the fixed point (CSV sweep or JSON report).
    Sojourn(SojournArgs),
    /// Phase-type fixed point by one of the three methods (JSON).
    Ph(PhArgs),
    /// Integrate the truncated mean-field ODE (long-form CSV).
    Ode(OdeArgs),
    /// Discrete-event simulation (JSON result, CSV comparison under --out).
    Simulate(SimulateArgs),
    /// Potential function along an empty-start trajectory and its decay fit.
    Convergence(ConvergenceArgs),
    /// Recompute a published theta table with relative errors (CSV).
    Tables(TablesArgs),
}

/// Parses `--mode` through the library's own names.
fn parse_mode(s: &str) -> Result<ThetaMode, String> {
    ThetaMode::from_str(s)
}

fn parse_choice(s: &str) -> Result<ChoiceMode, String> {
    ChoiceMode::from_str(s)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Sweep {
    /// Grid points from `lo` up to `hi` inclusive, tolerant of rounding in `step`.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(format!("expected lo:hi:step, got '{s}'"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number"));
    let sweep = Sweep {
        lo: num(lo)?,
        hi: num(hi)?,
        step: num(step)?,
    };
    if !(sweep.step > 0.0) || !(sweep.hi >= sweep.lo) || !sweep.lo.is_finite() || !sweep.hi.is_finite() {
        return Err(format!("need lo <= hi and step > 0, got '{s}'"));
    }
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("'{lo}' is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("'{hi}' is not a number"))?;
    if !(hi > lo) {
        return Err(format!("need lo < hi, got '{s}'"));
    }
    Ok(Window { lo, hi })
}

#[derive(Debug, Args, Serialize)]
pub struct OutArgs {
    /// Directory for artifacts and their manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ThetaArgs {
    /// Service distribution, e.g. `weibull:tau=0.5,mu=5`.
    #[arg(long)]
    pub dist: String,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub d: u32,
    /// generic | closed-form | paper-table
    #[arg(long, default_value = "generic", value_parser = parse_mode)]
    #[serde(serialize_with = "display")]
    pub mode: ThetaMode,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct FixedPointArgs {
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub d: u32,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[arg(long, default_value = "generic", value_parser = parse_mode)]
    #[serde(serialize_with = "display")]
    pub mode: ThetaMode,
    /// Use this theta instead of computing it (e.g. 1 for the classical tail).
    #[arg(long)]
    pub theta: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SojournArgs {
    #[arg(long)]
    pub dist: String,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub d: u32,
    /// Arrival rates `lo:hi:step` (CSV lambda,e_td).
    #[arg(long, value_parser = parse_sweep, conflicts_with = "lambda", required_unless_present = "lambda")]
    pub lambda_sweep: Option<Sweep>,
    /// Single arrival rate (JSON report).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value = "generic", value_parser = parse_mode)]
    #[serde(serialize_with = "display")]
    pub mode: ThetaMode,
    #[arg(long)]
    pub theta: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PhArgs {
    /// PH representation file: the alpha row, then the rows of T.
    #[arg(long)]
    pub alpha: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub method: u8,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub d: u32,
    /// Number of levels; by default levels are added until the mass drops below 1e-15.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Exp,
    Ph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Empty,
    FixedPoint,
}

#[derive(Debug, Args, Serialize)]
pub struct OdeArgs {
    #[arg(long, value_enum)]
    pub system: SystemKind,
    /// Service law; exponential for `exp`, any law with a PH form for `ph`.
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub d: u32,
    /// Truncation level; by default the first level whose classical tail is below 1e-12.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long)]
    pub step: f64,
    #[arg(long, default_value_t = 1)]
    pub output_every: usize,
    #[arg(long, value_enum, default_value = "empty")]
    pub initial: InitialKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Simulated time; default 2e4 mean service times.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Discarded initial time; default 20% of the horizon.
    #[arg(long)]
    pub warmup: Option<f64>,
    /// with-replacement | without-replacement
    #[arg(long, default_value = "without-replacement", value_parser = parse_choice)]
    #[serde(serialize_with = "display")]
    pub choice_mode: ChoiceMode,
    /// Candidate for the `u_k_model` CSV column: generic, classical or ph-method-1..3.
    /// Defaults to the candidate closest to the simulated tails.
    #[arg(long)]
    pub model: Option<String>,
    /// Leave out the per-replication records from the JSON result.
    #[arg(long)]
    pub summary_only: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Constant,
    Adaptive,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub d: u32,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 100)]
    pub output_every: usize,
    /// Fit window `lo:hi`.
    #[arg(long, default_value = "5:40", value_parser = parse_window)]
    pub window: Window,
    /// Constant weights (w = 1) or weights recomputed from the ratios at each time.
    #[arg(long, value_enum, default_value = "constant")]
    pub weights: WeightKind,
    /// Weight recursion rate; default 0.01 lambda.
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TablesArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub which: u8,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", CliError::validation(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Theta(a) => commands::theta(&a),
        Command::FixedPoint(a) => commands::fixed_point(&a),
        Command::Sojourn(a) => commands::sojourn(&a),
        Command::Ph(a) => commands::ph(&a),
        Command::Ode(a) => commands::ode(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Convergence(a) => commands::convergence(&a),
        Command::Tables(a) => commands::tables(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
