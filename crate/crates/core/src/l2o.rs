//! Unrolled, trainable warm start for gMOBA.
//!
//! `K` layers mimic gMOBA iterations with the x-subproblem replaced by a fixed,
//! learned convex combination `λ^k = softmax(λ̃^k)` and an overall step
//! multiplier `γ^k`:
//!
//! ```text
//! y^{k+1}   = y^k − γ^k β ∇_y f(x^k, y^k)
//! v_i^{k+1} = v_i^k − γ^k η (∇²_yy f(x^k, y^k) v_i^k − ∇_y F_i(x^k, y^k))
//! x^{k+1}   = x^k − γ^k α Σ_i λ_i^k (∇_x F_i(x^k, y^k) − ∇²_xy f(x^k, y^k) v_i^k)
//! ```
//!
//! Parameters are trained per problem instance with Adam on one of four
//! losses, sampling a preference vector `p ~ Dir(1_m)` and a Gaussian start
//! every iteration. Loss gradients come either from central finite differences
//! (any problem) or from a hand-written reverse pass through the unrolled
//! recursion (quadratic instances, exact to rounding).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmoba::{solve_from, FrontDistance, Preamble, RunRecord, SolverConfig, SolverState};
use crate::problem::{BilevelProblem, EvalPoint, QuadraticInstance, Vector};
use crate::rng::{dirichlet_ones, seeded, standard_normal_vector};

/// Central-difference step for [`GradientMethod::FiniteDifference`].
pub const FD_STEP: f64 = 1e-5;

/// Learnable parameters of a `K`-layer network: `K + 1` weight logits and step multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2OParams {
    pub lambda_raw: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

impl L2OParams {
    /// Uniform weights and unit multipliers: an untrained network is a
    /// fixed-uniform-weight version of gMOBA.
    pub fn uniform(layers: usize, m: usize) -> Self {
        Self { lambda_raw: vec![vec![0.0; m]; layers + 1], gamma: vec![1.0; layers + 1] }
    }

    /// Gaussian logits (scale 0.1) with unit multipliers.
    pub fn random(layers: usize, m: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let lambda_raw =
            (0..=layers).map(|_| standard_normal_vector(m, &mut rng).iter().map(|a| 0.1 * a).collect()).collect();
        Self { lambda_raw, gamma: vec![1.0; layers + 1] }
    }

    /// Number of unrolled layers `K`.
    pub fn layers(&self) -> usize {
        self.gamma.len().saturating_sub(1)
    }

    pub fn m(&self) -> usize {
        self.lambda_raw.first().map_or(0, Vec::len)
    }

    pub fn weights(&self, k: usize) -> Vec<f64> {
        softmax(&self.lambda_raw[k])
    }

    /// Layer-major layout: `λ̃^0, γ^0, λ̃^1, γ^1, …`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.lambda_raw
            .iter()
            .zip(&self.gamma)
            .flat_map(|(l, g)| l.iter().copied().chain(std::iter::once(*g)))
            .collect()
    }

    pub fn from_flat(flat: &[f64], layers: usize, m: usize) -> Result<Self> {
        if flat.len() != (layers + 1) * (m + 1) {
            return Err(Error::DimensionMismatch { expected: (layers + 1) * (m + 1), got: flat.len() });
        }
        let chunks = flat.chunks(m + 1);
        Ok(Self {
            lambda_raw: chunks.clone().map(|c| c[..m].to_vec()).collect(),
            gamma: chunks.map(|c| c[m]).collect(),
        })
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.lambda_raw.len() != self.gamma.len() || self.gamma.is_empty() {
            return Err(Error::InvalidArgument("need K + 1 logits and multipliers".into()));
        }
        if self.lambda_raw.iter().any(|l| l.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: self.m() });
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|a| (a - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|a| a / s).collect()
}

/// Base step sizes scaled by each layer's `γ^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseSteps {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl From<&SolverConfig> for BaseSteps {
    fn from(c: &SolverConfig) -> Self {
        Self { alpha: c.alpha, beta: c.beta, eta: c.eta }
    }
}

impl Default for BaseSteps {
    fn default() -> Self {
        (&SolverConfig::default()).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// `Σ p_i F_i(x^K, y^K)`.
    L1,
    /// `L1 + f(x^K, y^K)`.
    L2,
    /// `max_i F_i(x^K, y^K)`.
    L3,
    /// `L3 + f(x^K, y^K)`.
    L4,
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(LossKind::L1),
            "L2" => Ok(LossKind::L2),
            "L3" => Ok(LossKind::L3),
            "L4" => Ok(LossKind::L4),
            other => Err(Error::InvalidArgument(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    #[default]
    FiniteDifference,
    Adjoint,
}

/// Output of the unrolled network.
#[derive(Debug, Clone, PartialEq)]
pub struct Unrolled {
    pub x: Vector,
    pub y: Vector,
    pub v: Vec<Vector>,
}

/// Runs the `K` layers from `(x0, y0, v0)`.
pub fn l2o_forward<P: BilevelProblem + ?Sized>(
    problem: &P,
    params: &L2OParams,
    steps: BaseSteps,
    x0: &Vector,
    y0: &Vector,
    v0: &[Vector],
) -> Result<Unrolled> {
    let dims = problem.dims();
    params.validate(dims.m)?;
    if !problem.nonsmooth().is_zero() {
        return Err(Error::Unsupported("unrolled layers need g ≡ 0".into()));
    }
    if v0.len() != dims.m {
        return Err(Error::DimensionMismatch { expected: dims.m, got: v0.len() });
    }
    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut v = v0.to_vec();
    for k in 0..params.layers() {
        let gamma = params.gamma[k];
        let lambda = params.weights(k);
        let p = EvalPoint::new(&x, &y);
        let y_next = &y - problem.grad_lower_y(p)? * (gamma * steps.beta);
        let mut x_dir = Vector::zeros(dims.n_x);
        let mut v_next = Vec::with_capacity(dims.m);
        for (i, vi) in v.iter().enumerate() {
            let (gx, gy) = problem.grad_upper(i, p)?;
            x_dir += (gx - problem.cross_xy_vec(p, vi)?) * lambda[i];
            v_next.push(vi - (problem.hess_yy_vec(p, vi)? - gy) * (gamma * steps.eta));
        }
        x -= x_dir * (gamma * steps.alpha);
        y = y_next;
        v = v_next;
        let finite = |a: &Vector| a.iter().all(|c| c.is_finite());
        if !finite(&x) || !finite(&y) || !v.iter().all(finite) {
            return Err(Error::NonFinite(format!("unrolled layer {k}")));
        }
    }
    Ok(Unrolled { x, y, v })
}

fn terminal_loss<P: BilevelProblem + ?Sized>(problem: &P, out: &Unrolled, pref: &[f64], kind: LossKind) -> Result<f64> {
    let p = EvalPoint::new(&out.x, &out.y);
    let values = (0..problem.dims().m).map(|i| problem.eval_upper(i, p)).collect::<Result<Vec<_>>>()?;
    let base = match kind {
        LossKind::L1 | LossKind::L2 => values.iter().zip(pref).map(|(f, w)| f * w).sum(),
        LossKind::L3 | LossKind::L4 => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(match kind {
        LossKind::L2 | LossKind::L4 => base + problem.eval_lower(p)?,
        _ => base,
    })
}

/// Training loss for one start and preference vector.
#[allow(clippy::too_many_arguments)]
pub fn loss<P: BilevelProblem + ?Sized>(
    problem: &P,
    params: &L2OParams,
    steps: BaseSteps,
    x0: &Vector,
    y0: &Vector,
    v0: &[Vector],
    pref: &[f64],
    kind: LossKind,
) -> Result<f64> {
    if pref.len() != problem.dims().m {
        return Err(Error::DimensionMismatch { expected: problem.dims().m, got: pref.len() });
    }
    let out = l2o_forward(problem, params, steps, x0, y0, v0)?;
    terminal_loss(problem, &out, pref, kind)
}

/// Central finite differences over every parameter.
#[allow(clippy::too_many_arguments)]
pub fn loss_gradient_fd<P: BilevelProblem + ?Sized>(
    problem: &P,
    params: &L2OParams,
    steps: BaseSteps,
    x0: &Vector,
    y0: &Vector,
    v0: &[Vector],
    pref: &[f64],
    kind: LossKind,
) -> Result<L2OParams> {
    let (layers, m) = (params.layers(), params.m());
    let flat = params.to_flat();
    let grad = (0..flat.len())
        .into_par_iter()
        .map(|j| {
            let eval = |delta: f64| {
                let mut f = flat.clone();
                f[j] += delta;
                loss(problem, &L2OParams::from_flat(&f, layers, m)?, steps, x0, y0, v0, pref, kind)
            };
            Ok((eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP))
        })
        .collect::<Result<Vec<f64>>>()?;
    L2OParams::from_flat(&grad, layers, m)
}

/// Exact loss gradient on a quadratic instance by a reverse pass through the layers.
#[allow(clippy::too_many_arguments)]
pub fn loss_gradient_adjoint(
    inst: &QuadraticInstance,
    params: &L2OParams,
    steps: BaseSteps,
    x0: &Vector,
    y0: &Vector,
    v0: &[Vector],
    pref: &[f64],
    kind: LossKind,
) -> Result<(f64, L2OParams)> {
    let dims = inst.dims();
    params.validate(dims.m)?;
    let (n, m) = (dims.n_x, dims.m);
    let layers = params.layers();
    let h = inst.lower_hessian();

    // Forward pass, keeping every layer input.
    let mut states: Vec<Unrolled> = Vec::with_capacity(layers + 1);
    states.push(Unrolled { x: x0.clone(), y: y0.clone(), v: v0.to_vec() });
    for k in 0..layers {
        let single = L2OParams { lambda_raw: vec![params.lambda_raw[k].clone(), vec![0.0; m]], gamma: vec![params.gamma[k], 0.0] };
        let s = &states[k];
        let next = l2o_forward(inst, &single, steps, &s.x, &s.y, &s.v)?;
        states.push(next);
    }
    let last = &states[layers];
    let value = terminal_loss(inst, last, pref, kind)?;

    // Terminal adjoint.
    let p = EvalPoint::new(&last.x, &last.y);
    let mut xb = Vector::zeros(n);
    let mut yb = Vector::zeros(n);
    match kind {
        LossKind::L1 | LossKind::L2 => {
            for (i, w) in pref.iter().enumerate() {
                let (gx, gy) = inst.grad_upper(i, p)?;
                xb += gx * *w;
                yb += gy * *w;
            }
        }
        LossKind::L3 | LossKind::L4 => {
            let values = (0..m).map(|i| inst.eval_upper(i, p)).collect::<Result<Vec<_>>>()?;
            let top = (0..m).fold(0, |best, i| if values[i] > values[best] { i } else { best });
            let (gx, gy) = inst.grad_upper(top, p)?;
            xb += gx;
            yb += gy;
        }
    }
    if matches!(kind, LossKind::L2 | LossKind::L4) {
        xb += &last.y;
        yb += h * &last.y + &last.x;
    }
    let mut vb = vec![Vector::zeros(n); m];

    let mut grad = L2OParams { lambda_raw: vec![vec![0.0; m]; layers + 1], gamma: vec![0.0; layers + 1] };
    for k in (0..layers).rev() {
        let s = &states[k];
        let gamma = params.gamma[k];
        let lambda = params.weights(k);
        let p = EvalPoint::new(&s.x, &s.y);
        let lower_grad = h * &s.y + &s.x;

        let mut d_gamma = -steps.beta * yb.dot(&lower_grad);
        let mut d_lambda = vec![0.0; m];
        let mut x_dir = Vector::zeros(n);
        let mut xb_new = &xb - &yb * (gamma * steps.beta);
        let mut yb_new = &yb - h * &yb * (gamma * steps.beta);
        let mut vb_new = Vec::with_capacity(m);
        for i in 0..m {
            let (gx, gy) = inst.grad_upper(i, p)?;
            let d_i = gx - &s.v[i];
            d_lambda[i] = -gamma * steps.alpha * xb.dot(&d_i);
            x_dir += &d_i * lambda[i];
            let v_res = h * &s.v[i] - gy;
            d_gamma -= steps.eta * vb[i].dot(&v_res);

            // A_i [−γαλ_i x̄'; γη v̄_i'] carries both the x- and y-adjoint contributions.
            let mut u = Vector::zeros(2 * n);
            u.rows_mut(0, n).copy_from(&(&xb * (-gamma * steps.alpha * lambda[i])));
            u.rows_mut(n, n).copy_from(&(&vb[i] * (gamma * steps.eta)));
            let au = inst.upper_matrix(i) * u;
            xb_new += au.rows(0, n);
            yb_new += au.rows(n, n);
            vb_new.push(&vb[i] - h * &vb[i] * (gamma * steps.eta) + &xb * (gamma * steps.alpha * lambda[i]));
        }
        d_gamma -= steps.alpha * xb.dot(&x_dir);

        let avg: f64 = lambda.iter().zip(&d_lambda).map(|(l, d)| l * d).sum();
        grad.lambda_raw[k] = lambda.iter().zip(&d_lambda).map(|(l, d)| l * (d - avg)).collect();
        grad.gamma[k] = d_gamma;
        xb = xb_new;
        yb = yb_new;
        vb = vb_new;
    }
    Ok((value, grad))
}

/// Loss gradient by the requested method.
#[allow(clippy::too_many_arguments)]
pub fn loss_gradient(
    inst: &QuadraticInstance,
    params: &L2OParams,
    steps: BaseSteps,
    x0: &Vector,
    y0: &Vector,
    v0: &[Vector],
    pref: &[f64],
    kind: LossKind,
    method: GradientMethod,
) -> Result<L2OParams> {
    match method {
        GradientMethod::FiniteDifference => loss_gradient_fd(inst, params, steps, x0, y0, v0, pref, kind),
        GradientMethod::Adjoint => Ok(loss_gradient_adjoint(inst, params, steps, x0, y0, v0, pref, kind)?.1),
    }
}

/// Training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: BaseSteps,
    pub layers: usize,
    pub learn_rate: f64,
    pub train_iters: usize,
    pub loss: LossKind,
    pub gradient: GradientMethod,
    pub seed: u64,
    /// Gaussian logits instead of uniform ones at initialization.
    pub random_init: bool,
    /// Draw `y0` from a standard normal instead of starting at zero.
    pub gaussian_lower_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: BaseSteps::default(),
            layers: 100,
            learn_rate: 0.01,
            train_iters: 1000,
            loss: LossKind::L1,
            gradient: GradientMethod::Adjoint,
            seed: 0,
            random_init: false,
            gaussian_lower_start: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learn_rate > 0.0) {
            return Err(Error::Config("learn_rate must be positive".into()));
        }
        for v in [self.steps.alpha, self.steps.beta, self.steps.eta] {
            if !(v > 0.0) {
                return Err(Error::Config("base steps must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Trained parameters and training bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: L2OParams,
    pub iterations: usize,
    /// Set when a non-finite loss stopped training early; `params` are the last finite ones.
    pub diverged: bool,
    pub wall_time: Duration,
    pub losses: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Trains the network on one instance with Adam.
pub fn train(inst: &QuadraticInstance, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let started = Instant::now();
    let dims = inst.dims();
    let (layers, m) = (config.layers, dims.m);
    let mut params =
        if config.random_init { L2OParams::random(layers, m, config.seed ^ 0x5eed) } else { L2OParams::uniform(layers, m) };
    let mut rng = seeded(config.seed);
    let mut first = vec![0.0; (layers + 1) * (m + 1)];
    let mut second = first.clone();
    let mut losses = Vec::with_capacity(config.train_iters);
    let mut diverged = false;
    let mut done = 0;
    for t in 1..=config.train_iters {
        let pref = dirichlet_ones(m, &mut rng);
        let x0 = standard_normal_vector(dims.n_x, &mut rng);
        let y0 = if config.gaussian_lower_start {
            standard_normal_vector(dims.n_y, &mut rng)
        } else {
            Vector::zeros(dims.n_y)
        };
        let v0 = vec![Vector::zeros(dims.n_y); m];
        let result = match config.gradient {
            GradientMethod::Adjoint => loss_gradient_adjoint(inst, &params, config.steps, &x0, &y0, &v0, &pref, config.loss),
            GradientMethod::FiniteDifference => {
                loss(inst, &params, config.steps, &x0, &y0, &v0, &pref, config.loss).and_then(|value| {
                    Ok((value, loss_gradient_fd(inst, &params, config.steps, &x0, &y0, &v0, &pref, config.loss)?))
                })
            }
        };
        let (value, grad) = match result {
            Ok(r) if r.0.is_finite() && r.1.to_flat().iter().all(|g| g.is_finite()) => r,
            Ok(_) | Err(Error::NonFinite(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        losses.push(value);
        let g = grad.to_flat();
        let mut flat = params.to_flat();
        let bias1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let bias2 = 1.0 - ADAM_BETA2.powi(t as i32);
        for j in 0..flat.len() {
            first[j] = ADAM_BETA1 * first[j] + (1.0 - ADAM_BETA1) * g[j];
            second[j] = ADAM_BETA2 * second[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
            flat[j] -= config.learn_rate * (first[j] / bias1) / ((second[j] / bias2).sqrt() + ADAM_EPS);
        }
        params = L2OParams::from_flat(&flat, layers, m)?;
        done = t;
    }
    Ok(TrainOutcome { params, iterations: done, diverged, wall_time: started.elapsed(), losses })
}

/// Runs the unrolled network, then hands its output to gMOBA.
///
/// The record's iteration count covers only the gMOBA phase; the preamble is
/// reported separately.
pub fn l2o_then_gmoba<P: BilevelProblem + ?Sized>(
    problem: &P,
    params: &L2OParams,
    x0: &Vector,
    y0: &Vector,
    v0: &[Vector],
    config: &SolverConfig,
    front: Option<&dyn FrontDistance>,
) -> Result<RunRecord> {
    let t = Instant::now();
    let warm = l2o_forward(problem, params, config.into(), x0, y0, v0)?;
    let preamble = Preamble { layers: params.layers(), wall_time: t.elapsed() };
    let state = SolverState::new(problem, warm.x, warm.y, Some(warm.v))?;
    let mut record = solve_from(problem, state, config, front)?;
    record.preamble = Some(preamble);
    Ok(record)
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    layers: usize,
    m: usize,
    lambda_raw: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    config: TrainConfig,
}

const CHECKPOINT_FORMAT: &str = "moblo-l2o-checkpoint";

/// Writes parameters and the training configuration that produced them.
pub fn write_checkpoint<W: Write>(w: W, params: &L2OParams, config: &TrainConfig) -> Result<()> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        layers: params.layers(),
        m: params.m(),
        lambda_raw: params.lambda_raw.clone(),
        gamma: params.gamma.clone(),
        config: config.clone(),
    };
    serde_json::to_writer_pretty(w, &ck)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<(L2OParams, TrainConfig)> {
    let ck: Checkpoint = serde_json::from_reader(r)?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(Error::InvalidArgument(format!("unexpected checkpoint format {:?}", ck.format)));
    }
    let params = L2OParams { lambda_raw: ck.lambda_raw, gamma: ck.gamma };
    params.validate(ck.m)?;
    if params.layers() != ck.layers {
        return Err(Error::DimensionMismatch { expected: ck.layers, got: params.layers() });
    }
    Ok((params, ck.config))
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &L2OParams, config: &TrainConfig) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, params, config)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(L2OParams, TrainConfig)> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
