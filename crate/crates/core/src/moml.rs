//! Truncated iterative-differentiation (ITD) baseline.
//!
//! Every outer iteration runs `T` warm-started gradient steps on the lower
//! level, differentiates `x ↦ F_i(x, y_T(x))` in reverse mode through that
//! trajectory, and moves `x` along the min-norm convex combination of the `m`
//! resulting gradients.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::direction::min_norm_simplex;
use crate::error::{Error, Result};
use crate::gmoba::{growth_bound, FrontDistance, RunRecord, SolverState, Termination, DIVERGENCE_NORM};
use crate::problem::{check_len, BilevelProblem, EvalPoint, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomlConfig {
    pub inner_steps: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub max_iters: usize,
    pub tol_obj_change: f64,
    pub tol_dp: Option<f64>,
}

impl Default for MomlConfig {
    fn default() -> Self {
        Self { inner_steps: 5, inner_lr: 0.01, outer_lr: 1.0, max_iters: 100_000, tol_obj_change: 1e-4, tol_dp: Some(0.05) }
    }
}

impl MomlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_steps == 0 {
            return Err(Error::Config("inner_steps must be at least 1".into()));
        }
        if !(self.inner_lr > 0.0) || !(self.outer_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.tol_obj_change >= 0.0) {
            return Err(Error::Config("tol_obj_change must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Hypergradients of `x ↦ F_i(x, y_T(x))` for every objective, and `y_T`.
///
/// The inner trajectory is `y_{t+1} = y_t − ν ∇_y f(x, y_t)` from `y_init`; the
/// backward pass uses only Hessian-vector and cross-derivative products:
/// `p_T = ∇_y F_i`, `p_t = (I − ν ∇²_yy f(x, y_t)) p_{t+1}`, and the result is
/// `∇_x F_i − ν Σ_t ∇²_xy f(x, y_t) p_{t+1}`.
pub fn itd_hypergradient<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Vector,
    y_init: &Vector,
    steps: usize,
    nu: f64,
) -> Result<(Vec<Vector>, Vector)> {
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one inner step is required".into()));
    }
    let dims = problem.dims();
    check_len(x, dims.n_x)?;
    check_len(y_init, dims.n_y)?;
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(y_init.clone());
    for t in 0..steps {
        let g = problem.grad_lower_y(EvalPoint::new(x, &traj[t]))?;
        let next = &traj[t] - g * nu;
        traj.push(next);
    }
    let y_last = traj[steps].clone();
    let mut grads = Vec::with_capacity(dims.m);
    for i in 0..dims.m {
        let (gx, gy) = problem.grad_upper(i, EvalPoint::new(x, &y_last))?;
        let mut p = gy;
        let mut acc = Vector::zeros(dims.n_x);
        for y_t in traj[..steps].iter().rev() {
            let pt = EvalPoint::new(x, y_t);
            acc += problem.cross_xy_vec(pt, &p)?;
            p -= problem.hess_yy_vec(pt, &p)? * nu;
        }
        let grad = gx - acc * nu;
        if grad.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("ITD hypergradient".into()));
        }
        grads.push(grad);
    }
    Ok((grads, y_last))
}

/// Runs the ITD baseline. Stopping rules match [`crate::gmoba::solve_from`].
pub fn moml_solve<P: BilevelProblem + ?Sized>(
    problem: &P,
    x0: Vector,
    y0: Vector,
    config: &MomlConfig,
    front: Option<&dyn FrontDistance>,
) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let mut parallel_time = Duration::ZERO;
    let bound = growth_bound(&x0);
    let mut state = SolverState::new(problem, x0, y0, None)?;
    let mut termination = Termination::MaxIters;
    while state.k < config.max_iters {
        let t = Instant::now();
        let grads = match itd_hypergradient(problem, &state.x, &state.y, config.inner_steps, config.inner_lr) {
            Ok(g) => g,
            Err(Error::NonFinite(_)) => {
                termination = Termination::Divergence;
                break;
            }
            Err(e) => return Err(e),
        };
        let (ds, y_next) = grads;
        let lambda = min_norm_simplex(&ds)?;
        let x_next = &state.x - lambda.combine(&ds) * config.outer_lr;
        // Objectives are differentiated independently, so one of m shares counts.
        parallel_time += t.elapsed() / problem.dims().m as u32;

        let sane = |v: &Vector| v.iter().all(|a| a.is_finite() && a.abs() <= DIVERGENCE_NORM);
        if !sane(&x_next) || !sane(&y_next) || x_next.norm() > bound {
            termination = Termination::Divergence;
            break;
        }
        let mut next = SolverState::new(problem, x_next, y_next, None)?;
        next.k = state.k + 1;
        if next.last_f.iter().any(|f| !f.is_finite()) {
            termination = Termination::Divergence;
            break;
        }
        let change = state.last_f.iter().zip(&next.last_f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        state = next;
        if change < config.tol_obj_change {
            termination = Termination::ObjectiveChange;
            break;
        }
        if let (Some(front), Some(tol)) = (front, config.tol_dp) {
            if front.distance(&state.x)? < tol {
                termination = Termination::Dp;
                break;
            }
        }
    }
    Ok(RunRecord {
        iterations: state.k,
        state,
        termination,
        wall_time: started.elapsed(),
        parallel_time,
        history: None,
        max_lyapunov_increase: None,
        preamble: None,
    })
}
