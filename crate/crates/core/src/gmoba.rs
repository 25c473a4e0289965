//! Single-loop gMOBA solver.
//!
//! Each iteration reads only the iteration-`k` triple `(x, y, v_1..v_m)`:
//!
//! ```text
//! y'   = y − β ∇_y f(x, y)
//! v_i' = v_i − η (∇²_yy f(x, y) v_i − ∇_y F_i(x, y))
//! d_i  = ∇_x F_i(x, y) − ∇²_xy f(x, y) v_i
//! x'   = argmin_x max_i ⟨d_i, x − x_k⟩ + g_i(x) − g_i(x_k) + ‖x − x_k‖²/(2α)
//! ```
//!
//! The three updates are independent, so the reported per-iteration time is
//! the slowest of the three plus the shared oracle evaluation.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::direction::{solve_x_subproblem, SimplexWeights};
use crate::error::{Error, Result};
use crate::problem::{check_len, BilevelProblem, EvalPoint, ExactOracle, Vector};

/// Any state entry above this magnitude is treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// A run whose `‖x‖` exceeds this multiple of `max(1, ‖x⁰‖)` is treated as
/// divergence. Catches slow geometric drift long before `DIVERGENCE_NORM`.
pub const DIVERGENCE_GROWTH: f64 = 1e2;

pub(crate) fn growth_bound(x0: &Vector) -> f64 {
    DIVERGENCE_GROWTH * x0.norm().max(1.0)
}

/// Step sizes, stopping rules and recording switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub max_iters: usize,
    pub tol_obj_change: f64,
    /// Distance-to-front threshold; used only when a front oracle is attached.
    pub tol_dp: Option<f64>,
    pub record_history: bool,
    pub lyapunov_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0025,
            beta: 1.0,
            eta: 0.1,
            max_iters: 100_000,
            tol_obj_change: 1e-4,
            tol_dp: Some(0.05),
            record_history: false,
            lyapunov_check: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("eta", self.eta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tol_obj_change >= 0.0) {
            return Err(Error::Config("tol_obj_change must be nonnegative".into()));
        }
        if let Some(t) = self.tol_dp {
            if !(t >= 0.0) {
                return Err(Error::Config("tol_dp must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// The iterate `(x, y, v)` with values and directions cached at that iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vector,
    pub y: Vector,
    pub v: Vec<Vector>,
    pub k: usize,
    /// `F_i(x, y)`.
    pub last_f: Vec<f64>,
    /// `d_φi = ∇_x F_i(x, y) − ∇²_xy f(x, y) v_i`.
    pub d_phi: Vec<Vector>,
    grad_y: Vec<Vector>,
}

impl SolverState {
    /// Builds the state at iteration 0. `v0 = None` starts every `v_i` at zero.
    pub fn new<P: BilevelProblem + ?Sized>(problem: &P, x: Vector, y: Vector, v0: Option<Vec<Vector>>) -> Result<Self> {
        let dims = problem.dims();
        check_len(&x, dims.n_x)?;
        check_len(&y, dims.n_y)?;
        let v = v0.unwrap_or_else(|| vec![Vector::zeros(dims.n_y); dims.m]);
        if v.len() != dims.m {
            return Err(Error::DimensionMismatch { expected: dims.m, got: v.len() });
        }
        for vi in &v {
            check_len(vi, dims.n_y)?;
        }
        Self::at(problem, x, y, v, 0)
    }

    fn at<P: BilevelProblem + ?Sized>(problem: &P, x: Vector, y: Vector, v: Vec<Vector>, k: usize) -> Result<Self> {
        let m = problem.dims().m;
        let p = EvalPoint::new(&x, &y);
        let mut last_f = Vec::with_capacity(m);
        let mut d_phi = Vec::with_capacity(m);
        let mut grad_y = Vec::with_capacity(m);
        for (i, vi) in v.iter().enumerate() {
            let (f, gx, gy) = problem.upper_value_and_grad(i, p)?;
            last_f.push(f);
            d_phi.push(gx - problem.cross_xy_vec(p, vi)?);
            grad_y.push(gy);
        }
        Ok(Self { x, y, v, k, last_f, d_phi, grad_y })
    }

    fn is_sane(&self) -> bool {
        let ok = |v: &Vector| v.iter().all(|a| a.is_finite() && a.abs() <= DIVERGENCE_NORM);
        ok(&self.x)
            && ok(&self.y)
            && self.v.iter().all(ok)
            && self.last_f.iter().all(|f| f.is_finite())
            && self.d_phi.iter().all(ok)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    ObjectiveChange,
    Dp,
    MaxIters,
    Divergence,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ObjectiveChange => "objective-change",
            Termination::Dp => "dp",
            Termination::MaxIters => "max-iters",
            Termination::Divergence => "divergence",
        }
    }
}

impl std::str::FromStr for Termination {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "objective-change" => Termination::ObjectiveChange,
            "dp" => Termination::Dp,
            "max-iters" => Termination::MaxIters,
            "divergence" => Termination::Divergence,
            other => return Err(Error::InvalidArgument(format!("unknown termination {other:?}"))),
        })
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// `F_i(x^{k+1}, y^{k+1})`.
    pub f_values: Vec<f64>,
    pub step_norm: f64,
    /// `‖Σ λ_i d_φi‖` at the weights chosen by the x-subproblem.
    pub stationarity: f64,
    pub lambda: Vec<f64>,
    /// `V_i` at the new iterate, when Lyapunov checking is on.
    pub lyapunov: Option<Vec<f64>>,
}

/// Summary of an L2O warm start that preceded the gMOBA run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preamble {
    pub layers: usize,
    pub wall_time: Duration,
}

/// Result of a complete solver run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub state: SolverState,
    pub termination: Termination,
    pub iterations: usize,
    pub wall_time: Duration,
    /// Sum over iterations of the slowest of the three parallel updates.
    pub parallel_time: Duration,
    pub history: Option<Vec<IterationRecord>>,
    /// Largest observed `V_i^{k+1} − V_i^k` over all `i, k` (Lyapunov checking only).
    pub max_lyapunov_increase: Option<f64>,
    pub preamble: Option<Preamble>,
}

/// Full output of one iteration.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: SolverState,
    pub lambda: SimplexWeights,
    pub step_norm: f64,
    pub stationarity: f64,
    pub parallel_time: Duration,
}

/// One gMOBA iteration; a pure function of its inputs.
pub fn gmoba_step<P: BilevelProblem + ?Sized>(
    problem: &P,
    state: &SolverState,
    config: &SolverConfig,
) -> Result<SolverState> {
    Ok(gmoba_step_detailed(problem, state, config)?.state)
}

pub fn gmoba_step_detailed<P: BilevelProblem + ?Sized>(
    problem: &P,
    state: &SolverState,
    config: &SolverConfig,
) -> Result<StepOutput> {
    let p = EvalPoint::new(&state.x, &state.y);

    let t = Instant::now();
    let y_next = &state.y - problem.grad_lower_y(p)? * config.beta;
    let t_y = t.elapsed();

    let t = Instant::now();
    let mut v_next = Vec::with_capacity(state.v.len());
    for (vi, gy) in state.v.iter().zip(&state.grad_y) {
        let d_v = problem.hess_yy_vec(p, vi)? - gy;
        v_next.push(vi - d_v * config.eta);
    }
    let t_v = t.elapsed();

    let t = Instant::now();
    let dir = solve_x_subproblem(&state.x, &state.d_phi, problem.nonsmooth(), problem.constraint(), config.alpha)?;
    let t_x = t.elapsed();

    let stationarity = dir.lambda.combine(&state.d_phi).norm();
    let step_norm = (&dir.x_next - &state.x).norm();

    let t = Instant::now();
    let next = SolverState::at(problem, dir.x_next, y_next, v_next, state.k + 1)?;
    let t_eval = t.elapsed();

    if !next.is_sane() {
        return Err(Error::NonFinite(format!("iterate diverged at k = {}", state.k + 1)));
    }
    Ok(StepOutput {
        state: next,
        lambda: dir.lambda,
        step_norm,
        stationarity,
        parallel_time: t_y.max(t_v).max(t_x) + t_eval,
    })
}

/// Distance from an upper-level point to a reference Pareto set.
pub trait FrontDistance: Sync {
    fn distance(&self, x: &Vector) -> Result<f64>;
}

/// Runs gMOBA from `(x0, y0, v0)` with no front oracle attached.
pub fn solve<P: BilevelProblem + ?Sized>(
    problem: &P,
    x0: Vector,
    y0: Vector,
    v0: Option<Vec<Vector>>,
    config: &SolverConfig,
) -> Result<RunRecord> {
    let state = SolverState::new(problem, x0, y0, v0)?;
    solve_from(problem, state, config, None)
}

/// Runs gMOBA from an existing state, optionally stopping on distance to a front.
pub fn solve_from<P: BilevelProblem + ?Sized>(
    problem: &P,
    initial: SolverState,
    config: &SolverConfig,
    front: Option<&dyn FrontDistance>,
) -> Result<RunRecord> {
    config.validate()?;
    if config.lyapunov_check && problem.exact().is_none() {
        return Err(Error::OracleUnavailable);
    }
    let started = Instant::now();
    let mut parallel_time = Duration::ZERO;
    let mut history = config.record_history.then(Vec::new);
    let mut max_increase = config.lyapunov_check.then_some(f64::NEG_INFINITY);
    let mut prev_lyap = if config.lyapunov_check { Some(lyapunov(problem, &initial)?) } else { None };
    let bound = growth_bound(&initial.x);
    let mut state = initial;
    let mut termination = Termination::MaxIters;

    while state.k < config.max_iters {
        let out = match gmoba_step_detailed(problem, &state, config) {
            Ok(out) => out,
            Err(Error::NonFinite(_)) => {
                termination = Termination::Divergence;
                break;
            }
            Err(e) => return Err(e),
        };
        parallel_time += out.parallel_time;
        let change = state
            .last_f
            .iter()
            .zip(&out.state.last_f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        let lyap = match prev_lyap.as_ref() {
            Some(prev) => {
                let now = lyapunov(problem, &out.state)?;
                let inc = now.iter().zip(prev).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
                max_increase = max_increase.map(|m| m.max(inc));
                Some(now)
            }
            None => None,
        };
        if let Some(h) = history.as_mut() {
            h.push(IterationRecord {
                f_values: out.state.last_f.clone(),
                step_norm: out.step_norm,
                stationarity: out.stationarity,
                lambda: out.lambda.as_slice().to_vec(),
                lyapunov: lyap.clone(),
            });
        }
        if lyap.is_some() {
            prev_lyap = lyap;
        }
        state = out.state;

        if state.x.norm() > bound {
            termination = Termination::Divergence;
            break;
        }
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
        history,
        max_lyapunov_increase: max_increase,
        preamble: None,
    })
}

/// `V_i = φ_i(x) + g_i(x) + ‖y − y*(x)‖² + ‖v_i − v_i*(x)‖²` for every objective.
pub fn lyapunov<P: BilevelProblem + ?Sized>(problem: &P, state: &SolverState) -> Result<Vec<f64>> {
    let oracle = problem.exact().ok_or(Error::OracleUnavailable)?;
    let y_star = oracle.lower_solution(&state.x)?;
    let y_err = (&state.y - &y_star).norm_squared();
    (0..problem.dims().m)
        .map(|i| {
            let phi = problem.eval_upper(i, EvalPoint::new(&state.x, &y_star))? + problem.nonsmooth().value(i, &state.x);
            let v_err = (&state.v[i] - oracle.exact_v_star(i, &state.x)?).norm_squared();
            Ok(phi + y_err + v_err)
        })
        .collect()
}

/// `‖∇φ_i(x) − d_φi‖` for every objective.
pub fn hypergradient_error<P: BilevelProblem + ?Sized>(problem: &P, state: &SolverState) -> Result<Vec<f64>> {
    let oracle = problem.exact().ok_or(Error::OracleUnavailable)?;
    (0..problem.dims().m)
        .map(|i| Ok((oracle.exact_hypergradient(i, &state.x)? - &state.d_phi[i]).norm()))
        .collect()
}

/// Exact hypergradients `∇φ_i(x)` for every objective.
pub fn exact_hypergradients(oracle: &dyn ExactOracle, m: usize, x: &Vector) -> Result<Vec<Vector>> {
    (0..m).map(|i| oracle.exact_hypergradient(i, x)).collect()
}
