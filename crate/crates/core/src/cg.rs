//! Geometric nonlinear conjugate gradient.
//!
//! One solver core serves two problems:
//!
//! * operator learning on `OB(n, k)`, where a step follows the geodesic
//!   `Γ(X, H, t)` and old directions are moved by parallel transport;
//! * image reconstruction in `R^{h×w}`, where the geodesic is the straight
//!   line `s + t·d` and transport is the identity.
//!
//! The search direction update uses the hybrid rule
//! `β = max(0, min(β_DY, β_HS))` by default, the step size comes from Armijo
//! backtracking started at `1/‖G⁽⁰⁾‖_F` and afterwards at `α_prev / c1`.

use log::warn;
use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::objective::{AnalysisOperator, LearnParams, LearningObjective, TrainingSet};
use crate::oblique::{self, ObliquePoint, TangentVector};

/// Maximum number of step shrinkages before the line search gives up.
pub const MAX_SHRINKS: usize = 200;

/// Conjugate direction update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaRule {
    /// `max(0, min(β_DY, β_HS))`.
    #[default]
    Hybrid,
    FletcherReeves,
    HestenesStiefel,
    DaiYuan,
    /// `β = 0` every iteration.
    SteepestDescent,
}

/// First trial step of each line search after the first iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepInit {
    /// `α_prev / c1`.
    #[default]
    Previous,
    /// `α_prev · ⟨G_prev, H_prev⟩ / ⟨G, H⟩`, i.e. the previous first-order
    /// decrease is expected again.
    SlopeRatio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖X⁽ⁱ⁾ − X⁽ⁱ⁻¹⁾‖_F < tol`.
    pub tol: f64,
    /// Additionally stop once `|f⁽ⁱ⁾ − f⁽ⁱ⁺¹⁾| ≤ rel_cost_tol · |f⁽ⁱ⁾|`.
    pub rel_cost_tol: Option<f64>,
    /// Backtracking shrink factor, `0 < c1 < 1`.
    pub c1: f64,
    /// Armijo slope fraction, `0 < c2 < 0.5`.
    pub c2: f64,
    pub beta: BetaRule,
    /// First trial step; `None` uses `1/‖G⁽⁰⁾‖_F`.
    pub first_step: Option<f64>,
    pub step_init: StepInit,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-4,
            rel_cost_tol: None,
            c1: 0.9,
            c2: 1e-2,
            beta: BetaRule::Hybrid,
            first_step: None,
            step_init: StepInit::Previous,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::param(format!("c1 must lie in (0, 1), got {}", self.c1)));
        }
        if !(self.c2 > 0.0 && self.c2 < 0.5) {
            return Err(Error::param(format!("c2 must lie in (0, 0.5), got {}", self.c2)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("tol must be nonnegative"));
        }
        Ok(())
    }
}

/// A smooth cost on a space with geodesics and parallel transport.
pub trait Problem {
    type Point: Clone;
    type Tangent: Clone;

    fn cost(&self, x: &Self::Point) -> Result<f64>;

    /// Cost and (Riemannian) gradient at `x`.
    fn cost_and_grad(&self, x: &Self::Point) -> Result<(f64, Self::Tangent)>;

    /// Point reached after time `t` along the geodesic from `x` in direction `h`.
    fn step(&self, x: &Self::Point, h: &Self::Tangent, t: f64) -> Self::Point;

    /// Moves `xi` from `x` to `step(x, h, t)`.
    fn transport(&self, xi: &Self::Tangent, x: &Self::Point, h: &Self::Tangent, t: f64) -> Self::Tangent;

    fn inner(&self, a: &Self::Tangent, b: &Self::Tangent) -> f64;

    /// `a·u + b·v`.
    fn combine(&self, a: f64, u: &Self::Tangent, b: f64, v: &Self::Tangent) -> Self::Tangent;

    /// Ambient Frobenius distance between two points.
    fn distance(&self, x: &Self::Point, y: &Self::Point) -> f64;

    /// `t ↦ f(step(x, h, t))`. Problems with cheap restrictions to a line can
    /// override this; the solver re-checks accepted steps with [`Problem::cost`].
    fn line<'a>(&'a self, x: &'a Self::Point, h: &'a Self::Tangent) -> Box<dyn FnMut(f64) -> f64 + 'a> {
        Box::new(move |t| self.cost(&self.step(x, h, t)).unwrap_or(f64::INFINITY))
    }
}

/// `β` from the scalar pairings used by every rule.
///
/// `gg_new = ⟨G⁺,G⁺⟩`, `gg_old = ⟨G,G⟩`, `g_y = ⟨G⁺,Y⟩`, `h_y = ⟨T_H,Y⟩`
/// with `Y = G⁺ − T_G`. A vanishing denominator restarts with `β = 0`.
pub fn beta_from_pairings(rule: BetaRule, gg_new: f64, gg_old: f64, g_y: f64, h_y: f64) -> f64 {
    let safe = |num: f64, den: f64| {
        if den == 0.0 || !den.is_finite() {
            0.0
        } else {
            let b = num / den;
            if b.is_finite() {
                b
            } else {
                0.0
            }
        }
    };
    match rule {
        BetaRule::Hybrid => {
            if h_y == 0.0 || !h_y.is_finite() {
                return 0.0;
            }
            let dy = safe(gg_new, h_y);
            let hs = safe(g_y, h_y);
            dy.min(hs).max(0.0)
        }
        BetaRule::FletcherReeves => safe(gg_new, gg_old),
        BetaRule::HestenesStiefel => safe(g_y, h_y),
        BetaRule::DaiYuan => safe(gg_new, h_y),
        BetaRule::SteepestDescent => 0.0,
    }
}

/// Hybrid `β = max(0, min(β_DY, β_HS))` for tangent vectors at the new point.
pub fn cg_beta(g_new: &TangentVector, g_old_transported: &TangentVector, h_transported: &TangentVector) -> f64 {
    let y = g_new.combine(1.0, g_old_transported, -1.0);
    beta_from_pairings(
        BetaRule::Hybrid,
        g_new.inner(g_new),
        0.0,
        g_new.inner(&y),
        h_transported.inner(&y),
    )
}

/// Fletcher-Reeves `⟨G⁺,G⁺⟩ / ⟨G,G⟩`.
pub fn beta_fr(g_new: &TangentVector, g_old: &TangentVector) -> f64 {
    beta_from_pairings(BetaRule::FletcherReeves, g_new.inner(g_new), g_old.inner(g_old), 0.0, 0.0)
}

/// Armijo backtracking on a scalar restriction `phi(t) = f(Γ(x, h, t))`.
///
/// Returns the first `t = t0·c1^j` with `phi(t) ≤ f0 + t·c2·slope`, where
/// `slope = ⟨G, H⟩ < 0`. Non-finite values of `phi` count as failures.
pub fn backtracking(mut phi: impl FnMut(f64) -> f64, f0: f64, slope: f64, t0: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(t0 > 0.0) {
        return Err(Error::param(format!("initial step must be positive, got {t0}")));
    }
    if !(slope < 0.0) {
        return Err(Error::param(format!("not a descent direction (slope {slope:e})")));
    }
    let mut t = t0;
    let mut best = (f64::INFINITY, t0);
    for _ in 0..=MAX_SHRINKS {
        let f = phi(t);
        if f <= f0 + t * c2 * slope {
            return Ok(t);
        }
        if f < best.0 {
            best = (f, t);
        }
        t *= c1;
    }
    Err(Error::LineSearchFailed {
        shrinks: MAX_SHRINKS,
        best_step: best.1,
    })
}

/// Algorithm-level line search on the oblique manifold for the learning cost.
pub fn backtracking_linesearch(
    objective: &LearningObjective<'_>,
    x: &ObliquePoint,
    g: &TangentVector,
    h: &TangentVector,
    t0: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    let f0 = objective.cost(x)?;
    let slope = g.inner(h);
    backtracking(
        |t| objective.cost(&oblique::geodesic(x, h, t)).unwrap_or(f64::INFINITY),
        f0,
        slope,
        t0,
        c1,
        c2,
    )
}

/// One entry of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Step below `tol`.
    StepTolerance,
    /// Relative cost change below `rel_cost_tol`.
    CostTolerance,
    /// Gradient is exactly zero.
    Stationary,
    MaxIterations,
    /// Line search failed; the last accepted iterate is returned.
    LineSearchFailed,
}

impl Status {
    pub fn is_converged(self) -> bool {
        matches!(self, Status::StepTolerance | Status::CostTolerance | Status::Stationary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub trace: Vec<IterRecord>,
}

/// Progress of one [`CgState::advance`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Continue(IterRecord),
    Done(Status),
}

/// Solver state `(X⁽ⁱ⁾, G⁽ⁱ⁾, H⁽ⁱ⁾, α⁽ⁱ⁻¹⁾)`.
#[derive(Debug, Clone)]
pub struct CgState<P: Problem> {
    pub x: P::Point,
    pub g: P::Tangent,
    pub h: P::Tangent,
    pub cost: f64,
    pub alpha_prev: f64,
    pub iter: usize,
    t0: f64,
    prev_slope: f64,
}

impl<P: Problem> CgState<P> {
    /// Evaluates the gradient at `init` and sets `H⁽⁰⁾ = −G⁽⁰⁾`.
    pub fn new(problem: &P, init: P::Point) -> Result<Self> {
        let (cost, g) = problem.cost_and_grad(&init)?;
        if !cost.is_finite() {
            return Err(Error::Domain("initial point has infinite cost".into()));
        }
        let h = problem.combine(-1.0, &g, 0.0, &g);
        let gn = problem.inner(&g, &g).sqrt();
        Ok(Self {
            x: init,
            g,
            h,
            cost,
            alpha_prev: 0.0,
            iter: 0,
            t0: if gn > 0.0 { 1.0 / gn } else { 1.0 },
            prev_slope: 0.0,
        })
    }

    pub fn grad_norm(&self, problem: &P) -> f64 {
        problem.inner(&self.g, &self.g).sqrt()
    }

    /// Line search, geodesic update, gradient, `β` and transported direction.
    pub fn advance(&mut self, problem: &P, cfg: &SolverConfig) -> StepOutcome {
        let gg = problem.inner(&self.g, &self.g);
        if gg == 0.0 {
            return StepOutcome::Done(Status::Stationary);
        }
        let mut slope = problem.inner(&self.g, &self.h);
        if !(slope < 0.0) {
            // not a descent direction: restart along −G
            self.h = problem.combine(-1.0, &self.g, 0.0, &self.g);
            slope = -gg;
        }

        let t0 = match cfg.step_init {
            StepInit::SlopeRatio if self.iter > 0 => self.alpha_prev * self.prev_slope / slope,
            _ => self.t0,
        };
        let alpha = {
            let phi = problem.line(&self.x, &self.h);
            match backtracking(phi, self.cost, slope, t0, cfg.c1, cfg.c2) {
                Ok(a) => a,
                Err(e) => {
                    warn!("iteration {}: {e}", self.iter);
                    return StepOutcome::Done(Status::LineSearchFailed);
                }
            }
        };

        // Accept only if the exact cost agrees with the Armijo test.
        let mut alpha = alpha;
        let (x_new, cost_new, g_new) = loop {
            let x_new = problem.step(&self.x, &self.h, alpha);
            match problem.cost_and_grad(&x_new) {
                Ok((c, g)) if c <= self.cost + alpha * cfg.c2 * slope => break (x_new, c, g),
                _ => {
                    alpha *= cfg.c1;
                    if alpha < t0 * cfg.c1.powi(MAX_SHRINKS as i32) {
                        warn!("iteration {}: exact cost rejected every step", self.iter);
                        return StepOutcome::Done(Status::LineSearchFailed);
                    }
                }
            }
        };

        let tg = problem.transport(&self.g, &self.x, &self.h, alpha);
        let th = problem.transport(&self.h, &self.x, &self.h, alpha);
        let y = problem.combine(1.0, &g_new, -1.0, &tg);
        let beta = beta_from_pairings(
            cfg.beta,
            problem.inner(&g_new, &g_new),
            gg,
            problem.inner(&g_new, &y),
            problem.inner(&th, &y),
        );
        let h_new = problem.combine(-1.0, &g_new, beta, &th);
        let step = problem.distance(&self.x, &x_new);
        let cost_old = self.cost;

        self.x = x_new;
        self.g = g_new;
        self.h = h_new;
        self.cost = cost_new;
        self.alpha_prev = alpha;
        self.t0 = alpha / cfg.c1;
        self.prev_slope = slope;
        self.iter += 1;

        let record = IterRecord {
            iter: self.iter,
            cost: cost_new,
            grad_norm: problem.inner(&self.g, &self.g).sqrt(),
            alpha,
            beta,
            step,
        };
        if step < cfg.tol {
            return StepOutcome::Done(Status::StepTolerance);
        }
        if let Some(rel) = cfg.rel_cost_tol {
            if (cost_old - cost_new).abs() <= rel * cost_old.abs() {
                return StepOutcome::Done(Status::CostTolerance);
            }
        }
        StepOutcome::Continue(record)
    }
}

/// Runs the conjugate gradient loop from `init`.
pub fn minimize<P: Problem>(
    problem: &P,
    init: P::Point,
    cfg: &SolverConfig,
    mut progress: impl FnMut(&IterRecord),
) -> Result<(P::Point, SolveReport)> {
    cfg.validate()?;
    let mut state = CgState::new(problem, init)?;
    if let Some(t) = cfg.first_step {
        state.t0 = t;
    }
    let initial_cost = state.cost;
    let mut trace = Vec::new();
    let status = loop {
        if state.iter >= cfg.max_iters {
            break Status::MaxIterations;
        }
        let before = state.iter;
        match state.advance(problem, cfg) {
            StepOutcome::Continue(rec) => {
                progress(&rec);
                trace.push(rec);
            }
            StepOutcome::Done(status) => {
                if state.iter > before {
                    let rec = IterRecord {
                        iter: state.iter,
                        cost: state.cost,
                        grad_norm: state.grad_norm(problem),
                        alpha: state.alpha_prev,
                        beta: f64::NAN,
                        step: f64::NAN,
                    };
                    progress(&rec);
                    trace.push(rec);
                }
                break status;
            }
        }
    };
    let report = SolveReport {
        status,
        iterations: state.iter,
        initial_cost,
        final_cost: state.cost,
        trace,
    };
    Ok((state.x, report))
}

impl Problem for LearningObjective<'_> {
    type Point = ObliquePoint;
    type Tangent = TangentVector;

    fn cost(&self, x: &ObliquePoint) -> Result<f64> {
        LearningObjective::cost(self, x)
    }

    fn cost_and_grad(&self, x: &ObliquePoint) -> Result<(f64, TangentVector)> {
        LearningObjective::cost_and_grad(self, x)
    }

    fn step(&self, x: &ObliquePoint, h: &TangentVector, t: f64) -> ObliquePoint {
        oblique::geodesic(x, h, t)
    }

    fn transport(&self, xi: &TangentVector, x: &ObliquePoint, h: &TangentVector, t: f64) -> TangentVector {
        oblique::transport(xi, x, h, t)
    }

    fn inner(&self, a: &TangentVector, b: &TangentVector) -> f64 {
        a.inner(b)
    }

    fn combine(&self, a: f64, u: &TangentVector, b: f64, v: &TangentVector) -> TangentVector {
        u.combine(a, v, b)
    }

    fn distance(&self, x: &ObliquePoint, y: &ObliquePoint) -> f64 {
        frobenius_distance(x.view(), y.view())
    }
}

pub(crate) fn frobenius_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
        .sqrt()
}

/// `a·u + b·v` for plain matrices.
pub(crate) fn lincomb(a: f64, u: &Array2<f64>, b: f64, v: &Array2<f64>) -> Array2<f64> {
    let mut out = u.clone();
    Zip::from(&mut out).and(v).for_each(|o, &w| *o = a * *o + b * w);
    out
}

/// Result of [`goal_learn`].
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub operator: AnalysisOperator,
    pub report: SolveReport,
}

/// Learns an analysis operator from unit-norm training patches.
///
/// `init` is the transposed initial operator. A failed line search ends the
/// run early with [`Status::LineSearchFailed`]; the last accepted iterate is
/// still returned.
pub fn goal_learn(
    samples: &TrainingSet,
    params: LearnParams,
    cfg: &SolverConfig,
    init: ObliquePoint,
    progress: impl FnMut(&IterRecord),
) -> Result<LearnOutcome> {
    let side = (samples.dim() as f64).sqrt().round() as usize;
    if side * side != samples.dim() {
        return Err(Error::dim(format!("patch dimension {} is not a square", samples.dim())));
    }
    if init.n() != samples.dim() {
        return Err(Error::dim(format!(
            "initial operator has {} columns, patches have dimension {}",
            init.n(),
            samples.dim()
        )));
    }
    let objective = LearningObjective::new(samples, params)?;
    let (x, report) = minimize(&objective, init, cfg, progress)?;
    // Accumulated rounding in long runs stays far below this tolerance.
    let operator = AnalysisOperator::with_tolerance(x.view().t().to_owned(), side, 1e-8)?;
    Ok(LearnOutcome { operator, report })
}
