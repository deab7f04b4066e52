//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage errors, 1 for runtime failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cg::{self, SolverConfig};
use crate::error::Error;
use crate::global_op::MeasurementOperator;
use crate::io;
use crate::metrics::QualityReport;
use crate::objective::LearnParams;
use crate::oblique;
use crate::patches::{self, Image};
use crate::reconstruct::{self, ReconstructionProblem};

#[derive(Debug, Parser)]
#[command(name = "goal", version, about = "Analysis operator learning and image reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn an analysis operator from training images.
    Learn(LearnArgs),
    /// Remove additive Gaussian noise.
    Denoise(DenoiseArgs),
    /// Fill in missing pixels given a mask file.
    Inpaint(InpaintArgs),
    /// Magnify a low-resolution image.
    Superres(SuperresArgs),
    /// Print PSNR and MSSIM of a test image against a reference.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Directory of training images.
    #[arg(long)]
    pub images: PathBuf,
    /// Patch side length.
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    /// Number of atoms.
    #[arg(long, default_value_t = 128)]
    pub k: usize,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.4)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub nu: f64,
    #[arg(long, default_value_t = 9000.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.01)]
    pub mu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconArgs {
    /// Operator file.
    #[arg(long)]
    pub op: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sparsity weight (default depends on the task).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Iteration budget (default depends on the task).
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub common: ReconArgs,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct InpaintArgs {
    #[command(flatten)]
    pub common: ReconArgs,
    /// Mask file (`h w` header, then row-major 0/1 flags).
    #[arg(long)]
    pub mask: PathBuf,
}

#[derive(Debug, Args)]
pub struct SuperresArgs {
    #[command(flatten)]
    pub common: ReconArgs,
    /// Magnification factor.
    #[arg(long)]
    pub factor: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Runtime(Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Normal output goes to `out`, diagnostics to stderr.
pub fn run_from_args<I, T>(args: I, out: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Learn(a) => learn(a, out),
        Command::Denoise(a) => denoise(a, out),
        Command::Inpaint(a) => inpaint(a, out),
        Command::Superres(a) => superres(a, out),
        Command::Eval(a) => eval(a, out),
    }
}

/// Image files in `dir`, sorted by name.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                e.eq_ignore_ascii_case("pgm") || (cfg!(feature = "png") && e.eq_ignore_ascii_case("png"))
            })
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no images found in {}", dir.display())));
    }
    Ok(paths)
}

fn learn(a: LearnArgs, out: &mut impl Write) -> Result<(), CliError> {
    let n = a.patch * a.patch;
    if a.patch < 2 {
        return Err(usage("--patch must be at least 2"));
    }
    if a.k < n {
        return Err(usage(format!("--k {} is smaller than the patch dimension {n}", a.k)));
    }
    if a.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let params = LearnParams {
        p: a.p,
        nu: a.nu,
        kappa: a.kappa,
        mu: a.mu,
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let cfg = SolverConfig {
        max_iters: a.max_iters,
        tol: a.tol,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let images = list_images(&a.images)?
        .iter()
        .map(|p| io::read_image(p))
        .collect::<Result<Vec<_>, _>>()?;
    let samples = patches::extract_training_set(&images, a.patch, a.samples, a.seed)?;
    let init = oblique::random_point(n, a.k, a.seed.wrapping_add(1))?;
    let mut write_failed = None;
    let outcome = cg::goal_learn(&samples, params, &cfg, init, |rec| {
        if write_failed.is_none() {
            if let Err(e) = writeln!(
                out,
                "iter {:5}  f = {:.8e}  |G| = {:.4e}  alpha = {:.4e}",
                rec.iter, rec.cost, rec.grad_norm, rec.alpha
            ) {
                write_failed = Some(e);
            }
        }
    })?;
    if let Some(e) = write_failed {
        return Err(out_err(e));
    }
    io::write_operator(&a.out, &outcome.operator)?;
    writeln!(
        out,
        "{:?} after {} iterations: f = {:.8e} (initial {:.8e}), coherence {:.4}",
        outcome.report.status,
        outcome.report.iterations,
        outcome.report.final_cost,
        outcome.report.initial_cost,
        outcome.operator.mutual_coherence()
    )
    .map_err(out_err)?;
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<f64, CliError> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(usage(format!("--lambda must be positive, got {lambda}")))
    }
}

fn reconstruct_and_write(
    common: &ReconArgs,
    measurement: MeasurementOperator,
    y: ndarray::Array1<f64>,
    lambda: f64,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let lambda = check_lambda(lambda)?;
    let operator = io::read_operator(&common.op)?;
    let prob = ReconstructionProblem::new(measurement, y, operator, lambda)?;
    let iters = common.iters.unwrap_or_else(|| reconstruct::default_iters(prob.task()));
    let init = reconstruct::init_guess(&prob)?;
    let (img, report) = reconstruct::solve(&prob, &init, iters, reconstruct::REL_COST_TOL)?;
    io::write_image(&common.out, &img)?;
    writeln!(
        out,
        "{:?} after {} iterations: cost {:.6e} -> {:.6e}",
        report.status, report.iterations, report.initial_cost, report.final_cost
    )
    .map_err(out_err)?;
    Ok(())
}

fn denoise(a: DenoiseArgs, out: &mut impl Write) -> Result<(), CliError> {
    if !(a.sigma > 0.0 && a.sigma.is_finite()) {
        return Err(usage(format!("--sigma must be positive, got {}", a.sigma)));
    }
    let noisy = io::read_image(&a.common.input)?;
    let (h, w) = noisy.dims();
    let lambda = a.common.lambda.unwrap_or(reconstruct::denoise_lambda(a.sigma));
    reconstruct_and_write(&a.common, MeasurementOperator::identity(h, w), noisy.to_vector(), lambda, out)
}

fn inpaint(a: InpaintArgs, out: &mut impl Write) -> Result<(), CliError> {
    let img = io::read_image(&a.common.input)?;
    let mask = io::read_mask(&a.mask)?;
    if mask.dim() != img.dims() {
        return Err(CliError::Runtime(Error::dim(format!(
            "mask is {:?} but image is {:?}",
            mask.dim(),
            img.dims()
        ))));
    }
    let measurement = MeasurementOperator::mask(mask.view())?;
    let y = measurement.measure(&img)?;
    let lambda = a.common.lambda.unwrap_or(reconstruct::INPAINT_LAMBDA);
    reconstruct_and_write(&a.common, measurement, y, lambda, out)
}

fn superres(a: SuperresArgs, out: &mut impl Write) -> Result<(), CliError> {
    if a.factor == 0 {
        return Err(usage("--factor must be positive"));
    }
    let low = io::read_image(&a.common.input)?;
    let (h, w) = (low.height() * a.factor, low.width() * a.factor);
    let measurement = MeasurementOperator::blur_decimate(h, w, a.factor)?;
    debug_assert_eq!(measurement.low_res_dims(), Some(low.dims()));
    let lambda = a.common.lambda.unwrap_or(reconstruct::SUPERRES_LAMBDA);
    reconstruct_and_write(&a.common, measurement, low.to_vector(), lambda, out)
}

fn eval(a: EvalArgs, out: &mut impl Write) -> Result<(), CliError> {
    let reference = io::read_image(&a.reference)?;
    let test: Image = io::read_image(&a.test)?;
    let report = QualityReport::compute(&reference, &test)?;
    writeln!(out, "{report}").map_err(out_err)?;
    Ok(())
}
