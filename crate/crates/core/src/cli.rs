//! Command-line interface: argument parsing, command execution and JSON reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bdw::{self, joint_pmf, joint_sf, BDWParams};
use crate::datasets::{self, BuiltinDataset};
use crate::error::{Error, Result};
use crate::fit_bayes::{augmented_gibbs, AlphaPrior, Augmentation, DGPrior, GibbsOptions};
use crate::fit_ml::{
    init_estimates_with, nested_em, test_alpha_equals_one, BivariateDataset, Column, Imputation,
    MarginalEstimator, NestedEmOptions,
};
use crate::gof::{chisq_bdw_with, chisq_dw_with, dw_fit_min_chisq, GofOptions, TailCell};
use crate::univariate::{dw_fit_ml, dw_loglik};

/// Version of the JSON report layout; bumped on incompatible changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest grid side `pmf-table` picks on its own.
const MAX_AUTO_K: u64 = 5_000;

#[derive(Debug, Parser)]
#[command(
    name = "bdw",
    version,
    about = "Bivariate discrete Weibull: fitting, testing, simulation"
)]
pub struct Cli {
    /// Seed for every random draw; recorded in the report.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Add the wall-clock time to the report (makes reports run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a univariate discrete Weibull to one column.
    FitDw(FitDwArgs),
    /// Maximum-likelihood BDW fit by nested EM.
    FitMl(FitMlArgs),
    /// Bayesian BDW fit by augmented Gibbs sampling.
    FitBayes(FitBayesArgs),
    /// Chi-square goodness of fit of the BDW law and its marginals.
    Gof(GofArgs),
    /// Draw a BDW sample as CSV.
    Simulate(SimulateArgs),
    /// Export the joint pmf on a square grid as CSV.
    PmfTable(PmfTableArgs),
    /// Means, variances, covariance and correlation of a BDW law.
    Moments(MomentsArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct InputArgs {
    /// Bundled dataset.
    #[arg(long, value_parser = ["football", "nasal"])]
    pub dataset: Option<String>,
    /// CSV file with two non-negative integer columns and an optional header.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnArg {
    X1,
    X2,
    Min,
}

impl From<ColumnArg> for Column {
    fn from(c: ColumnArg) -> Self {
        match c {
            ColumnArg::X1 => Column::X1,
            ColumnArg::X2 => Column::X2,
            ColumnArg::Min => Column::Min,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    Ml,
    MinChisq,
}

impl From<EstimatorArg> for MarginalEstimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Ml => MarginalEstimator::MaxLikelihood,
            EstimatorArg::MinChisq => MarginalEstimator::MinChiSquare,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputationArg {
    ConditionalExpectation,
    Predictor,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentationArg {
    Draw,
    Predictor,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailArg {
    Absorb,
    Exclude,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GofArgsCommon {
    /// Treatment of the open upper tail.
    #[arg(long, value_enum, default_value_t = TailArg::Absorb)]
    pub tail: TailArg,
    /// Pool adjacent cells until each expected count reaches this value.
    #[arg(long, default_value_t = 1.0)]
    pub min_expected: f64,
    /// Degrees of freedom lost to estimated parameters.
    #[arg(long, default_value_t = 0)]
    pub df_penalty: usize,
}

impl GofArgsCommon {
    fn options(&self) -> GofOptions {
        GofOptions {
            tail: match self.tail {
                TailArg::Absorb => TailCell::Absorb,
                TailArg::Exclude => TailCell::Exclude,
            },
            min_expected: self.min_expected,
            df_penalty: self.df_penalty,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitDwArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = ColumnArg::X1)]
    pub column: ColumnArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Ml)]
    pub estimator: EstimatorArg,
    #[command(flatten)]
    pub gof: GofArgsCommon,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitMlArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Estimator behind the starting values.
    #[arg(long, value_enum, default_value_t = EstimatorArg::Ml)]
    pub init: EstimatorArg,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_outer: usize,
    #[arg(long, value_enum, default_value_t = ImputationArg::ConditionalExpectation)]
    pub imputation: ImputationArg,
    /// Gauss-Legendre order per coordinate for conditional-expectation imputation.
    #[arg(long, default_value_t = 12)]
    pub order: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub gof: GofArgsCommon,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitBayesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Ml)]
    pub init: EstimatorArg,
    /// Gibbs draws per outer step.
    #[arg(long, default_value_t = 10_000)]
    pub m: usize,
    /// Outer steps.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub burn_in: f64,
    #[arg(long, value_enum, default_value_t = AugmentationArg::Draw)]
    pub augmentation: AugmentationArg,
    #[arg(long, default_value_t = 1e-4)]
    pub a: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub b: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub a0: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub a1: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub a2: f64,
    /// Shape of the gamma prior on alpha.
    #[arg(long, default_value_t = 1e-4)]
    pub c: f64,
    /// Rate of the gamma prior on alpha.
    #[arg(long, default_value_t = 1e-4)]
    pub d: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Also write the retained draws as CSV.
    #[arg(long)]
    pub draws: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct ParamArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub p0: f64,
    #[arg(long)]
    pub p1: f64,
    #[arg(long)]
    pub p2: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<BDWParams> {
        BDWParams::new(self.alpha, self.p0, self.p1, self.p2)
    }
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct OptionalParamArgs {
    #[arg(long, requires_all = ["p0", "p1", "p2"])]
    pub alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub p0: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub p1: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub p2: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GofArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Parameters to test; without them the ML fit is tested.
    #[command(flatten)]
    pub params: OptionalParamArgs,
    #[command(flatten)]
    pub gof: GofArgsCommon,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Sample size.
    #[arg(long)]
    pub n: usize,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PmfTableArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Grid side; by default the smallest K leaving less than 1e-6 mass outside [0, K]^2.
    #[arg(long)]
    pub k: Option<u64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Tail mass at which summation stops.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
}

#[derive(Debug, Serialize)]
struct InputEcho {
    source: &'static str,
    name: String,
    n: usize,
    n0: usize,
    n1: usize,
    n2: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<InputEcho>,
    config: Value,
    result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
}

fn load_input(input: &InputArgs) -> Result<(BivariateDataset, InputEcho)> {
    let (data, source, name) = match (&input.dataset, &input.input) {
        (Some(name), None) => (
            name.parse::<BuiltinDataset>()?.load(),
            "builtin",
            name.clone(),
        ),
        (None, Some(path)) => (
            datasets::load_csv(path)?,
            "file",
            path.display().to_string(),
        ),
        _ => {
            return Err(Error::InvalidArgument(
                "exactly one of --dataset and --input is required".into(),
            ))
        }
    };
    let echo = InputEcho {
        source,
        name,
        n: data.len(),
        n0: data.n0(),
        n1: data.n1(),
        n2: data.n2(),
    };
    Ok((data, echo))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn write_text(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn pmf_grid_k(params: &BDWParams) -> Result<u64> {
    let omitted = |k: u64| {
        joint_sf(params, k + 1, 0) + joint_sf(params, 0, k + 1) - joint_sf(params, k + 1, k + 1)
    };
    let mut k = 0;
    while omitted(k) >= 1e-6 {
        k += 1;
        if k > MAX_AUTO_K {
            return Err(Error::InvalidArgument(format!(
                "more than {MAX_AUTO_K} points per axis are needed for 1e-6 omitted mass; pass --k"
            )));
        }
    }
    Ok(k)
}

fn fit_dw(args: &FitDwArgs) -> Result<(InputEcho, Value)> {
    let (data, echo) = load_input(&args.input)?;
    let col = data.column(args.column.into());
    let (params, statistic) = match args.estimator {
        EstimatorArg::Ml => (dw_fit_ml(&col)?.params, None),
        EstimatorArg::MinChisq => {
            let f = dw_fit_min_chisq(&col)?;
            (f.params, Some(f.statistic))
        }
    };
    let loglik = dw_loglik(&col, &params)?;
    let gof = chisq_dw_with(&col, &params, &args.gof.options())?;
    Ok((
        echo,
        json!({
            "alpha": params.alpha(),
            "p": params.p(),
            "loglik": loglik,
            "min_chisq_statistic": statistic,
            "gof": to_value(&gof),
        }),
    ))
}

fn fit_ml(args: &FitMlArgs) -> Result<(InputEcho, Value)> {
    let (data, echo) = load_input(&args.input)?;
    let init = init_estimates_with(&data, args.init.into())?;
    let imputation = match args.imputation {
        ImputationArg::ConditionalExpectation => {
            Imputation::ConditionalExpectation { order: args.order }
        }
        ImputationArg::Predictor => Imputation::Predictor,
    };
    let options = NestedEmOptions {
        tol: args.tol,
        max_outer: args.max_outer,
        imputation,
        level: args.level,
    };
    let fit = nested_em(&data, &init.params, &options)?;
    let alpha_test = match test_alpha_equals_one(&fit) {
        Ok(t) => to_value(&t),
        Err(e) => {
            log::warn!("alpha = 1 test unavailable: {e}");
            Value::Null
        }
    };
    let gof = chisq_bdw_with(&data, &fit.bdw, &args.gof.options())?;
    Ok((
        echo,
        json!({ "init": to_value(&init), "fit": to_value(&fit), "alpha_one_test": alpha_test, "gof": to_value(&gof) }),
    ))
}

fn fit_bayes(args: &FitBayesArgs, seed: u64, stdout: &mut dyn Write) -> Result<(InputEcho, Value)> {
    let (data, echo) = load_input(&args.input)?;
    let init = init_estimates_with(&data, args.init.into())?;
    let prior = DGPrior::new(args.a, args.b, args.a0, args.a1, args.a2)?;
    let alpha_prior = AlphaPrior::new(args.c, args.d)?;
    let options = GibbsOptions {
        m: args.m,
        n: args.n,
        burn_in: args.burn_in,
        augmentation: match args.augmentation {
            AugmentationArg::Draw => Augmentation::Draw,
            AugmentationArg::Predictor => Augmentation::Predictor,
        },
        level: args.level,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let post = augmented_gibbs(
        &data,
        &prior,
        &alpha_prior,
        &options,
        &init.params,
        &mut rng,
    )?;
    if let Some(path) = &args.draws {
        let mut csv = String::from("alpha,lambda0,lambda1,lambda2\n");
        for d in &post.draws {
            csv.push_str(&format!("{},{},{},{}\n", d[0], d[1], d[2], d[3]));
        }
        write_text(Some(path), &csv, stdout)?;
    }
    Ok((
        echo,
        json!({
            "start": to_value(&init.params),
            "retained_draws": post.draws.len(),
            "burn_in": post.burn_in,
            "summary": to_value(&post.summary),
            "acceptance_rate": post.acceptance_rate,
            "step_means": to_value(&post.step_means),
        }),
    ))
}

fn gof(args: &GofArgs) -> Result<(InputEcho, Value)> {
    let (data, echo) = load_input(&args.input)?;
    let p = &args.params;
    let (params, source) = match (p.alpha, p.p0, p.p1, p.p2) {
        (Some(a), Some(p0), Some(p1), Some(p2)) => (BDWParams::new(a, p0, p1, p2)?, "given"),
        _ => {
            let init = init_estimates_with(&data, MarginalEstimator::MaxLikelihood)?;
            (
                nested_em(&data, &init.params, &NestedEmOptions::default())?.bdw,
                "ml-fit",
            )
        }
    };
    let options = args.gof.options();
    let (m1, m2) = bdw::marginals(&params);
    let mn = bdw::min_distribution(&params);
    Ok((
        echo,
        json!({
            "params": to_value(&params),
            "params_source": source,
            "bivariate": to_value(&chisq_bdw_with(&data, &params, &options)?),
            "x1": to_value(&chisq_dw_with(&data.column(Column::X1), &m1, &options)?),
            "x2": to_value(&chisq_dw_with(&data.column(Column::X2), &m2, &options)?),
            "min": to_value(&chisq_dw_with(&data.column(Column::Min), &mn, &options)?),
        }),
    ))
}

fn simulate(args: &SimulateArgs, seed: u64, stdout: &mut dyn Write) -> Result<Value> {
    let params = args.params.params()?;
    if args.n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(u64, u64)> = (0..args.n)
        .map(|_| bdw::sample(&params, &mut rng))
        .collect();
    let data = BivariateDataset::new(pairs)?;
    write_text(args.csv.as_deref(), &datasets::to_csv(&data), stdout)?;
    let mean =
        |c: Column| data.column(c).iter().map(|&v| v as f64).sum::<f64>() / data.len() as f64;
    Ok(json!({
        "n": data.len(),
        "n0": data.n0(),
        "n1": data.n1(),
        "n2": data.n2(),
        "mean_x1": mean(Column::X1),
        "mean_x2": mean(Column::X2),
    }))
}

fn pmf_table(args: &PmfTableArgs, stdout: &mut dyn Write) -> Result<Value> {
    let params = args.params.params()?;
    let k = match args.k {
        Some(k) => k,
        None => pmf_grid_k(&params)?,
    };
    let mut csv = String::from("x1,x2,pmf\n");
    let mut total = 0.0;
    for x1 in 0..=k {
        for x2 in 0..=k {
            let v = joint_pmf(&params, x1, x2);
            total += v;
            csv.push_str(&format!("{x1},{x2},{v:e}\n"));
        }
    }
    write_text(args.csv.as_deref(), &csv, stdout)?;
    Ok(
        json!({ "k": k, "cells": (k + 1) * (k + 1), "captured_mass": total, "omitted_mass": (1.0 - total).max(0.0) }),
    )
}

fn moments_cmd(args: &MomentsArgs) -> Result<Value> {
    let params = args.params.params()?;
    let m = bdw::moments(&params, args.epsilon)?;
    let (m1, m2) = bdw::marginals(&params);
    Ok(json!({
        "moments": to_value(&m),
        "marginal_x1": to_value(&m1),
        "marginal_x2": to_value(&m2),
        "min": to_value(&bdw::min_distribution(&params)),
    }))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FitDw(_) => "fit-dw",
            Command::FitMl(_) => "fit-ml",
            Command::FitBayes(_) => "fit-bayes",
            Command::Gof(_) => "gof",
            Command::Simulate(_) => "simulate",
            Command::PmfTable(_) => "pmf-table",
            Command::Moments(_) => "moments",
        }
    }

    fn config(&self) -> Value {
        match self {
            Command::FitDw(a) => to_value(a),
            Command::FitMl(a) => to_value(a),
            Command::FitBayes(a) => to_value(a),
            Command::Gof(a) => to_value(a),
            Command::Simulate(a) => to_value(a),
            Command::PmfTable(a) => to_value(a),
            Command::Moments(a) => to_value(a),
        }
    }
}

/// Runs one command. Data products go to their `--csv`/`--draws` paths or
/// to `stdout`; the JSON report goes to `--output`, or to `stdout` for
/// commands without a data product on `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    let seed = cli.seed;
    let (input, result) = match &cli.command {
        Command::FitDw(a) => fit_dw(a).map(|(i, r)| (Some(i), r))?,
        Command::FitMl(a) => fit_ml(a).map(|(i, r)| (Some(i), r))?,
        Command::FitBayes(a) => fit_bayes(a, seed, stdout).map(|(i, r)| (Some(i), r))?,
        Command::Gof(a) => gof(a).map(|(i, r)| (Some(i), r))?,
        Command::Simulate(a) => (None, simulate(a, seed, stdout)?),
        Command::PmfTable(a) => (None, pmf_table(a, stdout)?),
        Command::Moments(a) => (None, moments_cmd(a)?),
    };
    let elapsed = start.elapsed().as_secs_f64();
    log::info!("{} finished in {elapsed:.3} s", cli.command.name());
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: cli.command.name(),
        seed,
        input,
        config: cli.command.config(),
        result,
        wall_time_seconds: cli.timing.then_some(elapsed),
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    let data_on_stdout = match &cli.command {
        Command::Simulate(a) => a.csv.is_none(),
        Command::PmfTable(a) => a.csv.is_none(),
        _ => false,
    };
    match (&cli.output, data_on_stdout) {
        (Some(p), _) => write_text(Some(p), &text, stdout),
        (None, false) => write_text(None, &text, stdout),
        (None, true) => Ok(()),
    }
}
