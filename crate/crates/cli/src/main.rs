use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use cste_core::data::{parse_covariates, parse_csv, simulate_binary_dgp, simulate_survival_dgp, Dataset, Schema};
use cste_core::error::CsteError;
use cste_core::export::{curve_csv, recommendations_csv, to_json};
use cste_core::itr::RegionReport;
use cste_core::numkit::Kernel;
use cste_core::pipeline::{
    lambda_sequence, predict, run_binary, run_survival, BinaryRequest, FitArtifact, PenaltyKind,
    SurvivalRequest,
};

const EXIT_USER: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Covariate-specific treatment effect curves, bands and treatment rules.
#[derive(Parser, Debug)]
#[command(name = "cste", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Binary outcome: single-index fit, SBK smoothing and bootstrap band.
    FitBinary(FitBinaryArgs),
    /// Survival outcome: varying-coefficient Cox fit and resampling band.
    FitSurvival(FitSurvivalArgs),
    /// Score new subjects against a fit directory.
    Predict(PredictArgs),
    /// Draw a dataset from one of the validation designs.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KernelArg {
    Epanechnikov,
    Gaussian,
    Uniform,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Epanechnikov => Kernel::Epanechnikov,
            KernelArg::Gaussian => Kernel::Gaussian,
            KernelArg::Uniform => Kernel::Uniform,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PenaltyArg {
    Scad,
    L1,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("tuning").args(["lambda", "lambda_from"])))]
struct FitBinaryArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    outcome: String,
    #[arg(long)]
    treatment: String,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',', required = true)]
    covariates: Vec<String>,
    #[arg(long)]
    id: Option<String>,
    /// Z-score covariates before fitting.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 2)]
    knots: usize,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, requires_all = ["lambda_to", "lambda_by"])]
    lambda_from: Option<f64>,
    #[arg(long, requires = "lambda_from")]
    lambda_to: Option<f64>,
    #[arg(long, requires = "lambda_from")]
    lambda_by: Option<f64>,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Scad)]
    penalty: PenaltyArg,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    boot: usize,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("arms").required(true).args(["treatment", "treatments"])))]
struct FitSurvivalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    time: String,
    #[arg(long)]
    status: String,
    #[arg(long)]
    biomarker: String,
    /// Categorical treatment column, dummy-coded against --reference.
    #[arg(long)]
    treatment: Option<String>,
    /// Reference level of --treatment (default: the highest level).
    #[arg(long, requires = "treatment")]
    reference: Option<String>,
    /// Comma-separated, already dummy-coded treatment columns.
    #[arg(long, value_delimiter = ',')]
    treatments: Option<Vec<String>>,
    #[arg(long)]
    id: Option<String>,
    /// Comma-separated contrast vector, one entry per non-reference arm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    contrast: Option<Vec<f64>>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 50)]
    grid_size: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Directory written by fit-binary or fit-survival.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    new: PathBuf,
    /// Larger outcome values are worse (flips the advice).
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    outcome_harmful: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Design {
    Binary,
    Survival,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(value_enum)]
    design: Design,
    #[arg(long)]
    n: usize,
    /// Number of covariates (binary design only).
    #[arg(long, default_value_t = 20)]
    p: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the generating parameters (default: truth.json next to --out).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<CsteError> for Failure {
    fn from(e: CsteError) -> Self {
        let code = if e.is_user_error() { EXIT_USER } else { EXIT_NUMERIC };
        Failure { code, message: e.to_string() }
    }
}

fn user(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USER, message: message.into() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| user(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| user(format!("cannot write {}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| user(format!("cannot create {}: {e}", dir.display())))
}

fn fit_binary(a: FitBinaryArgs) -> Result<(), Failure> {
    let schema = Schema::Binary {
        outcome: a.outcome,
        treatment: a.treatment,
        covariates: a.covariates,
        id: a.id,
    };
    let data = match parse_csv(&read(&a.data)?, &schema)? {
        Dataset::Binary(d) => d,
        Dataset::Survival(_) => unreachable!("binary schema yields a binary dataset"),
    };
    let lambda_grid = match (a.lambda_from, a.lambda_to, a.lambda_by) {
        (Some(f), Some(t), Some(b)) => Some(lambda_sequence(f, t, b)?),
        _ => None,
    };
    let req = BinaryRequest {
        knots: a.knots,
        lambda: a.lambda,
        lambda_grid,
        penalty: match a.penalty {
            PenaltyArg::Scad => PenaltyKind::Scad,
            PenaltyArg::L1 => PenaltyKind::L1,
        },
        bandwidth: a.bandwidth,
        kernel: a.kernel.into(),
        alpha: a.alpha,
        n_boot: a.boot,
        seed: a.seed,
        grid_size: a.grid_size,
        normalize: a.normalize,
    };
    req.validate()?;
    let out = run_binary(&data, None, &req)?;
    out_dir(&a.out)?;
    write(&a.out.join("fit.json"), &to_json(&FitArtifact::Binary(Box::new(out.artifact)))?)?;
    write(&a.out.join("curve.csv"), &curve_csv(&out.curve))?;
    write(&a.out.join("regions.json"), &to_json(&out.regions)?)?;
    Ok(())
}

fn fit_survival(a: FitSurvivalArgs) -> Result<(), Failure> {
    let schema = Schema::Survival {
        time: a.time,
        status: a.status,
        biomarker: a.biomarker,
        treatment: a.treatment,
        reference: a.reference,
        treatments: a.treatments,
        id: a.id,
    };
    let data = match parse_csv(&read(&a.data)?, &schema)? {
        Dataset::Survival(d) => d,
        Dataset::Binary(_) => unreachable!("survival schema yields a survival dataset"),
    };
    let req = SurvivalRequest {
        contrast: a.contrast,
        bandwidth: a.bandwidth,
        kernel: a.kernel.into(),
        alpha: a.alpha,
        n_resample: a.resamples,
        seed: a.seed,
        grid_size: a.grid_size,
    };
    req.validate()?;
    let out = run_survival(&data, &req)?;
    out_dir(&a.out)?;
    write(&a.out.join("fit.json"), &to_json(&FitArtifact::Survival(Box::new(out.artifact)))?)?;
    write(&a.out.join("curve.csv"), &curve_csv(&out.curve))?;
    write(&a.out.join("regions.json"), &to_json(&out.regions)?)?;
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<(), Failure> {
    let artifact: FitArtifact = serde_json::from_str(&read(&a.fit.join("fit.json"))?)
        .map_err(|e| user(format!("malformed fit.json: {e}")))?;
    let regions: RegionReport = serde_json::from_str(&read(&a.fit.join("regions.json"))?)
        .map_err(|e| user(format!("malformed regions.json: {e}")))?;
    let table = parse_covariates(&read(&a.new)?, &artifact.score_columns(), artifact.id_column())?;
    let recs = predict(&artifact, &regions, &table, a.outcome_harmful)?;
    write(&a.out, &recommendations_csv(&recs))
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let (csv, truth) = match a.design {
        Design::Binary => {
            let (d, t) = simulate_binary_dgp(a.n, a.p, a.seed)?;
            (Dataset::Binary(d).to_csv(), to_json(&t)?)
        }
        Design::Survival => {
            let (d, t) = simulate_survival_dgp(a.n, a.seed)?;
            (Dataset::Survival(d).to_csv(), to_json(&t)?)
        }
    };
    let truth_path = a.truth.unwrap_or_else(|| {
        a.out
            .parent()
            .map(|p| p.join("truth.json"))
            .unwrap_or_else(|| PathBuf::from("truth.json"))
    });
    write(&a.out, &csv)?;
    write(&truth_path, &truth)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::FitBinary(a) => fit_binary(a),
        Command::FitSurvival(a) => fit_survival(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
