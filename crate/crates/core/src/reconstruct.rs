//! Analysis-model image reconstruction.
//!
//! Minimizes
//!
//! ```text
//! F(s) = ½‖As − y‖² + b(s) + λ Σ_i ((Ω^F s)_i² + ν)^{p/2}
//! ```
//!
//! over images `s`, where `b` quadratically penalizes intensities outside
//! `[b_l, b_u]`. The solver is the conjugate gradient core of [`crate::cg`]
//! with straight-line steps and identity transport.

use log::debug;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::cg::{self, IterRecord, Problem, SolveReport, SolverConfig, StepInit};
use crate::error::{Error, Result};
use crate::global_op::{self, GlobalOperatorConfig, MeasurementOperator};
use crate::objective::AnalysisOperator;
use crate::oblique::frobenius_inner;
use crate::par;
use crate::patches::Image;
use crate::resize;

/// Coefficients per parallel work item in the sparsity sums.
const COEFF_CHUNK: usize = 1 << 14;

pub const DENOISE_ITERS: usize = 30;
pub const INPAINT_ITERS: usize = 200;
pub const SUPERRES_ITERS: usize = 200;
pub const INPAINT_LAMBDA: f64 = 1e-2;
pub const SUPERRES_LAMBDA: f64 = 1e-2;
pub const REL_COST_TOL: f64 = 1e-6;

/// Default weight for Gaussian noise of standard deviation `sigma`.
pub fn denoise_lambda(sigma: f64) -> f64 {
    sigma / 16.0
}

/// `Σ (s − b_u)²` over pixels above `upper` plus `Σ (s − b_l)²` below `lower`.
pub fn bound_penalty(s: ArrayView2<f64>, lower: f64, upper: f64) -> f64 {
    s.iter()
        .map(|&v| {
            if v > upper {
                (v - upper).powi(2)
            } else if v < lower {
                (v - lower).powi(2)
            } else {
                0.0
            }
        })
        .sum()
}

pub fn bound_penalty_grad(s: ArrayView2<f64>, lower: f64, upper: f64) -> Array2<f64> {
    s.mapv(|v| {
        if v > upper {
            2.0 * (v - upper)
        } else if v < lower {
            2.0 * (v - lower)
        } else {
            0.0
        }
    })
}

#[inline]
fn smoothed_abs_pow(z: f64, p: f64, nu: f64) -> f64 {
    (z * z + nu).powf(0.5 * p)
}

/// `Σ_i (z_i² + ν)^{p/2}`.
pub fn global_sparsity(z: ArrayView1<f64>, p: f64, nu: f64) -> f64 {
    let z = z.as_standard_layout();
    let z = z.as_slice().expect("standard layout");
    par::chunked_sum(z.len(), COEFF_CHUNK, |range| {
        z[range].iter().map(|&v| smoothed_abs_pow(v, p, nu)).sum()
    })
}

/// `p·z_i·(z_i² + ν)^{p/2 − 1}`.
pub fn global_sparsity_grad(z: ArrayView1<f64>, p: f64, nu: f64) -> Array1<f64> {
    z.mapv(|v| p * v * (v * v + nu).powf(0.5 * p - 1.0))
}

/// Sum and gradient in one pass.
fn sparsity_value_and_grad(z: &Array1<f64>, p: f64, nu: f64) -> (f64, Array1<f64>) {
    let zs = z.as_slice().expect("contiguous");
    let parts = par::map_collect(par::chunk_count(zs.len(), COEFF_CHUNK), |ci| {
        let start = ci * COEFF_CHUNK;
        let end = (start + COEFF_CHUNK).min(zs.len());
        let mut sum = 0.0;
        let grad: Vec<f64> = zs[start..end]
            .iter()
            .map(|&v| {
                let base = v * v + nu;
                let pw = base.powf(0.5 * p);
                sum += pw;
                p * v * pw / base
            })
            .collect();
        (sum, grad)
    });
    let total = parts.iter().map(|(s, _)| s).sum();
    let grad = parts.into_iter().flat_map(|(_, g)| g).collect();
    (total, grad)
}

/// The reconstruction kind, inferred from the measurement operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Denoise,
    Inpaint,
    SuperResolve,
}

/// Measurements, prior and weights of one reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionProblem {
    measurement: MeasurementOperator,
    y: Array1<f64>,
    operator: AnalysisOperator,
    config: GlobalOperatorConfig,
    lambda: f64,
    p: f64,
    nu: f64,
    lower: f64,
    upper: f64,
}

impl ReconstructionProblem {
    /// Dense patch grid, `p = 0.4`, `ν = 10⁻⁶` and bounds `[0, 255]`.
    pub fn new(measurement: MeasurementOperator, y: Array1<f64>, operator: AnalysisOperator, lambda: f64) -> Result<Self> {
        if y.len() != measurement.output_len() {
            return Err(Error::dim(format!(
                "{} observations for an operator producing {}",
                y.len(),
                measurement.output_len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("observations must be finite".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {lambda}")));
        }
        let (h, w) = measurement.input_dims();
        let config = GlobalOperatorConfig::dense(operator.patch_side(), h, w);
        Ok(Self {
            measurement,
            y,
            operator,
            config,
            lambda,
            p: 0.4,
            nu: 1e-6,
            lower: 0.0,
            upper: 255.0,
        })
    }

    pub fn with_sparsity(mut self, p: f64, nu: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) || !(nu >= 0.0) {
            return Err(Error::param(format!("need 0 < p <= 2 and nu >= 0, got p={p}, nu={nu}")));
        }
        self.p = p;
        self.nu = nu;
        Ok(self)
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::param(format!("bounds must satisfy lower < upper, got [{lower}, {upper}]")));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn with_strides(mut self, stride_v: usize, stride_h: usize) -> Result<Self> {
        let cfg = GlobalOperatorConfig {
            stride_v,
            stride_h,
            ..self.config
        };
        cfg.validate()?;
        self.config = cfg;
        Ok(self)
    }

    pub fn task(&self) -> Task {
        match self.measurement {
            MeasurementOperator::Identity { .. } => Task::Denoise,
            MeasurementOperator::Mask { .. } => Task::Inpaint,
            MeasurementOperator::BlurDecimate { .. } => Task::SuperResolve,
        }
    }

    pub fn measurement(&self) -> &MeasurementOperator {
        &self.measurement
    }

    pub fn observations(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn global_config(&self) -> GlobalOperatorConfig {
        self.config
    }

    /// Output image dimensions.
    pub fn dims(&self) -> (usize, usize) {
        self.measurement.input_dims()
    }

    fn check(&self, s: ArrayView2<f64>) -> Result<()> {
        if s.dim() != self.dims() {
            return Err(Error::dim(format!("image is {:?}, problem expects {:?}", s.dim(), self.dims())));
        }
        Ok(())
    }

    fn residual(&self, s: &Image) -> Result<Array1<f64>> {
        Ok(self.measurement.measure(s)? - &self.y)
    }

    fn analyze(&self, s: &Image) -> Result<Array1<f64>> {
        global_op::apply_global(&self.operator, s, &self.config)
    }
}

/// `F(s)`.
pub fn recon_cost(s: &Image, prob: &ReconstructionProblem) -> Result<f64> {
    prob.check(s.view())?;
    let r = prob.residual(s)?;
    let z = prob.analyze(s)?;
    Ok(0.5 * r.dot(&r)
        + bound_penalty(s.view(), prob.lower, prob.upper)
        + prob.lambda * global_sparsity(z.view(), prob.p, prob.nu))
}

/// `∇F(s) = Aᵀ(As − y) + ∇b(s) + λ (Ω^F)ᵀ ∇g(Ω^F s)`.
pub fn recon_grad(s: &Image, prob: &ReconstructionProblem) -> Result<Image> {
    Ok(cost_and_grad(s, prob)?.1)
}

fn cost_and_grad(s: &Image, prob: &ReconstructionProblem) -> Result<(f64, Image)> {
    prob.check(s.view())?;
    let r = prob.residual(s)?;
    let z = prob.analyze(s)?;
    let (g_val, mut dz) = sparsity_value_and_grad(&z, prob.p, prob.nu);
    dz *= prob.lambda;
    let cost = 0.5 * r.dot(&r) + bound_penalty(s.view(), prob.lower, prob.upper) + prob.lambda * g_val;

    let mut grad = prob.measurement.measure_adjoint(r.view())?.into_inner();
    grad += &bound_penalty_grad(s.view(), prob.lower, prob.upper);
    grad += &global_op::apply_global_adjoint(&prob.operator, dz.view(), &prob.config)?.into_inner();
    Ok((cost, Image::from_raw(grad)))
}

impl Problem for ReconstructionProblem {
    type Point = Array2<f64>;
    type Tangent = Array2<f64>;

    fn cost(&self, x: &Array2<f64>) -> Result<f64> {
        recon_cost(&Image::from_raw(x.clone()), self)
    }

    fn cost_and_grad(&self, x: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        let (c, g) = cost_and_grad(&Image::from_raw(x.clone()), self)?;
        Ok((c, g.into_inner()))
    }

    fn step(&self, x: &Array2<f64>, h: &Array2<f64>, t: f64) -> Array2<f64> {
        cg::lincomb(1.0, x, t, h)
    }

    fn transport(&self, xi: &Array2<f64>, _x: &Array2<f64>, _h: &Array2<f64>, _t: f64) -> Array2<f64> {
        xi.clone()
    }

    fn inner(&self, a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        frobenius_inner(a.view(), b.view())
    }

    fn combine(&self, a: f64, u: &Array2<f64>, b: f64, v: &Array2<f64>) -> Array2<f64> {
        cg::lincomb(a, u, b, v)
    }

    fn distance(&self, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        cg::frobenius_distance(x.view(), y.view())
    }

    /// Both `A` and `Ω^F` are linear, so the residual and the coefficients
    /// along `x + t·h` are affine in `t` and each evaluation is a pointwise
    /// pass instead of two operator applications.
    fn line<'a>(&'a self, x: &'a Array2<f64>, h: &'a Array2<f64>) -> Box<dyn FnMut(f64) -> f64 + 'a> {
        let prepared = (|| -> Result<_> {
            let xs = Image::from_raw(x.clone());
            let hs = Image::from_raw(h.clone());
            let r = self.residual(&xs)?;
            let ah = self.measurement.measure(&hs)?;
            let zx = self.analyze(&xs)?;
            let zh = self.analyze(&hs)?;
            Ok((r.dot(&r), r.dot(&ah), ah.dot(&ah), zx, zh))
        })();
        let Ok((rr, rah, ahah, zx, zh)) = prepared else {
            return Box::new(|_| f64::INFINITY);
        };
        let (p, nu, lambda, lower, upper) = (self.p, self.nu, self.lambda, self.lower, self.upper);
        Box::new(move |t| {
            let fidelity = 0.5 * (rr + 2.0 * t * rah + t * t * ahah);
            let mut bound = 0.0;
            Zip::from(x).and(h).for_each(|&a, &b| {
                let v = a + t * b;
                if v > upper {
                    bound += (v - upper).powi(2);
                } else if v < lower {
                    bound += (v - lower).powi(2);
                }
            });
            let zx = zx.as_slice().expect("contiguous");
            let zh = zh.as_slice().expect("contiguous");
            let sparsity = par::chunked_sum(zx.len(), COEFF_CHUNK, |range| {
                zx[range.clone()]
                    .iter()
                    .zip(&zh[range])
                    .map(|(&a, &b)| smoothed_abs_pow(a + t * b, p, nu))
                    .sum()
            });
            fidelity + bound + lambda * sparsity
        })
    }
}

/// Starting image: the observations for denoising, observed pixels with the
/// mean of the observed values elsewhere for inpainting, bicubic upsampling
/// of the low-resolution image for super-resolution.
pub fn init_guess(prob: &ReconstructionProblem) -> Result<Image> {
    let (h, w) = prob.dims();
    match &prob.measurement {
        MeasurementOperator::Identity { .. } => Image::from_vector(prob.y.view(), h, w),
        MeasurementOperator::Mask { kept, .. } => {
            let mean = if kept.is_empty() {
                0.5 * (prob.lower + prob.upper)
            } else {
                prob.y.mean().expect("nonempty")
            };
            let mut out = Array2::from_elem((h, w), mean);
            for (&i, &v) in kept.iter().zip(prob.y.iter()) {
                out[[i % h, i / h]] = v;
            }
            Ok(Image::from_raw(out))
        }
        MeasurementOperator::BlurDecimate { .. } => {
            let (lh, lw) = prob.measurement.low_res_dims().expect("blur-decimate");
            let low = Image::from_vector(prob.y.view(), lh, lw)?;
            resize::bicubic(&low, h, w)
        }
    }
}

/// Inpainting baseline: mean fill, 5×5 Gaussian smoothing (`σ = 1`), then
/// the observed pixels are put back.
pub fn smooth_fill_baseline(prob: &ReconstructionProblem) -> Result<Image> {
    let MeasurementOperator::Mask { kept, .. } = &prob.measurement else {
        return Err(Error::param("the smoothing baseline needs a mask problem"));
    };
    let (h, _) = prob.dims();
    let filled = init_guess(prob)?;
    let mut out = global_op::blur(filled.view(), global_op::gaussian_window(5, 1.0).view());
    for (&i, &v) in kept.iter().zip(prob.y.iter()) {
        out[[i % h, i / h]] = v;
    }
    Ok(Image::from_raw(out))
}

/// Solver settings for reconstruction: stop on relative cost change below
/// `rel_tol` or after `max_iters` iterations.
pub fn solver_config(max_iters: usize, rel_tol: f64) -> SolverConfig {
    SolverConfig {
        max_iters,
        tol: 0.0,
        rel_cost_tol: Some(rel_tol),
        first_step: Some(1.0),
        step_init: StepInit::Previous,
        ..SolverConfig::default()
    }
}

/// Default iteration budget for the problem's task.
pub fn default_iters(task: Task) -> usize {
    match task {
        Task::Denoise => DENOISE_ITERS,
        Task::Inpaint => INPAINT_ITERS,
        Task::SuperResolve => SUPERRES_ITERS,
    }
}

/// Runs the reconstruction from `init`. A failed line search ends the run
/// with the last accepted iterate.
pub fn solve(prob: &ReconstructionProblem, init: &Image, max_iters: usize, rel_tol: f64) -> Result<(Image, SolveReport)> {
    solve_with(prob, init, &solver_config(max_iters, rel_tol), |rec| {
        debug!("iter {:4}  F = {:.6e}  |G| = {:.3e}  alpha = {:.3e}", rec.iter, rec.cost, rec.grad_norm, rec.alpha);
    })
}

pub fn solve_with(
    prob: &ReconstructionProblem,
    init: &Image,
    cfg: &SolverConfig,
    progress: impl FnMut(&IterRecord),
) -> Result<(Image, SolveReport)> {
    prob.check(init.view())?;
    let (x, report) = cg::minimize(prob, init.pixels().clone(), cfg, progress)?;
    Ok((Image::from_raw(x), report))
}
