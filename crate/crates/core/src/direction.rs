//! The x-subproblem of each gMOBA iteration.
//!
//! Given approximate hypergradients `d_1, …, d_m` at `x_k`, the next iterate is
//!
//! ```text
//! x_{k+1} = argmin_x  max_i { ⟨d_i, x − x_k⟩ + g_i(x) − g_i(x_k) } + ‖x − x_k‖² / (2α)
//! ```
//!
//! With `g ≡ 0` the dual is the minimum-norm point of the convex hull of the
//! `d_i`, and `x_{k+1} = x_k − α Σ λ_i* d_i`. With weighted-ℓ₁ `g_i` the inner
//! minimization is a soft-thresholding step and the dual over the simplex is
//! solved by projected ascent.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::problem::{Constraint, Nonsmooth, Vector};

/// Ties in the two-objective closed form below this distance fall back to `(½, ½)`.
const TIE_TOL: f64 = 1e-14;
const PG_TOL: f64 = 1e-12;
const PG_MAX_ITERS: usize = 10_000;
const WOLFE_MAX_ITERS: usize = 1_000;
/// Iterations between active-set certification attempts in the projected-gradient loop.
const POLISH_EVERY: usize = 25;
const DUAL_ITERS: usize = 2_000;

/// A point on the unit simplex `{λ ≥ 0, Σλ = 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidArgument("simplex weights must be nonempty".into()));
        }
        let sum: f64 = lambda.iter().sum();
        if lambda.iter().any(|&l| !(l >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("{lambda:?} is not on the simplex")));
        }
        Ok(Self(lambda))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ λ_i d_i`.
    pub fn combine(&self, ds: &[Vector]) -> Vector {
        let mut w = Vector::zeros(ds[0].len());
        for (l, d) in self.0.iter().zip(ds) {
            if *l != 0.0 {
                w.axpy(*l, d, 1.0);
            }
        }
        w
    }
}

/// Outcome of the x-subproblem.
#[derive(Debug, Clone)]
pub struct DirectionResult {
    pub x_next: Vector,
    pub lambda: SimplexWeights,
    /// `max_i h_i(x_next) + ‖x_next − x_k‖²/(2α)`; never positive.
    pub subproblem_value: f64,
}

fn validate(ds: &[Vector]) -> Result<usize> {
    let first = ds.first().ok_or_else(|| Error::InvalidArgument("no directions given".into()))?;
    let n = first.len();
    for d in ds {
        if d.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: d.len() });
        }
    }
    Ok(n)
}

/// Euclidean projection onto the unit simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

fn gram(ds: &[Vector]) -> DMatrix<f64> {
    let m = ds.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = ds[i].dot(&ds[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn quad(g: &DMatrix<f64>, lambda: &[f64]) -> f64 {
    let l = DVector::from_column_slice(lambda);
    l.dot(&(g * &l))
}

/// Minimizer of `λᵀGλ` over the affine hull of `support` (weights may be negative).
fn solve_on_support_unsigned(g: &DMatrix<f64>, support: &[usize]) -> Option<Vec<f64>> {
    let s = support.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    let mut rhs = DVector::zeros(s + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = g[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    rhs[s] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut lambda = vec![0.0; g.nrows()];
    for (a, &i) in support.iter().enumerate() {
        lambda[i] = sol[a];
    }
    Some(lambda)
}

/// Solves the equality-constrained problem on the support `support` exactly and
/// returns the full weight vector if it is feasible.
fn solve_on_support(g: &DMatrix<f64>, support: &[usize]) -> Option<Vec<f64>> {
    let mut lambda = solve_on_support_unsigned(g, support)?;
    if lambda.iter().any(|&l| !(l >= -1e-15)) {
        return None;
    }
    lambda.iter_mut().for_each(|l| *l = l.max(0.0));
    let total: f64 = lambda.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    lambda.iter_mut().for_each(|l| *l /= total);
    Some(lambda)
}

/// First-order optimality of `lambda` for `min λᵀGλ` over the simplex.
fn is_optimal(g: &DMatrix<f64>, lambda: &[f64]) -> bool {
    let l = DVector::from_column_slice(lambda);
    let gl = g * &l;
    let value = l.dot(&gl);
    let scale = g.diagonal().max().max(1e-300);
    gl.iter().all(|&gj| gj - value >= -1e-13 * scale)
}

/// Minimizes `‖Σ λ_i d_i‖²` over the unit simplex.
///
/// Two directions use the closed form. Three or more use Wolfe's min-norm-point
/// active-set method on the Gram matrix, falling back to projected gradient
/// with support polishing if an affine subproblem is numerically singular.
pub fn min_norm_simplex(ds: &[Vector]) -> Result<SimplexWeights> {
    validate(ds)?;
    let m = ds.len();
    match m {
        1 => Ok(SimplexWeights(vec![1.0])),
        2 => {
            let diff = &ds[0] - &ds[1];
            let denom = diff.norm_squared();
            if denom.sqrt() <= TIE_TOL {
                return Ok(SimplexWeights::uniform(2));
            }
            let l1 = ((&ds[1] - &ds[0]).dot(&ds[1]) / denom).clamp(0.0, 1.0);
            Ok(SimplexWeights(vec![l1, 1.0 - l1]))
        }
        _ => {
            let g = gram(ds);
            let lambda = match wolfe_min_norm(&g) {
                Some(l) if is_optimal(&g, &l) => l,
                Some(l) => {
                    let pg = min_norm_gram(&g);
                    if quad(&g, &pg) < quad(&g, &l) { pg } else { l }
                }
                None => min_norm_gram(&g),
            };
            Ok(SimplexWeights(lambda))
        }
    }
}

/// Wolfe's algorithm: grow a corral of affinely independent points, move to
/// the affine minimizer of the corral, and drop points whose weights reach zero.
fn wolfe_min_norm(g: &DMatrix<f64>) -> Option<Vec<f64>> {
    let m = g.nrows();
    let scale = g.diagonal().max();
    if !(scale > 0.0) {
        return Some(vec![1.0 / m as f64; m]);
    }
    let tol = 1e-13 * scale;
    let start = (0..m).min_by(|&a, &b| g[(a, a)].total_cmp(&g[(b, b)]))?;
    let mut lambda = vec![0.0; m];
    lambda[start] = 1.0;
    let mut corral = vec![start];
    for _ in 0..WOLFE_MAX_ITERS {
        let gl = g * DVector::from_column_slice(&lambda);
        let value = lambda.iter().zip(gl.iter()).map(|(l, v)| l * v).sum::<f64>();
        let (j, gj) = gl.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1))?;
        if gj >= value - tol || corral.contains(&j) {
            return Some(lambda);
        }
        corral.push(j);
        loop {
            let affine = solve_on_support_unsigned(g, &corral)?;
            if corral.iter().all(|&i| affine[i] > 0.0) {
                for &i in &corral {
                    lambda[i] = affine[i];
                }
                break;
            }
            let theta = corral
                .iter()
                .filter(|&&i| affine[i] <= 0.0)
                .map(|&i| lambda[i] / (lambda[i] - affine[i]))
                .fold(1.0, f64::min);
            for &i in &corral {
                lambda[i] = theta * affine[i] + (1.0 - theta) * lambda[i];
            }
            corral.retain(|&i| lambda[i] > 1e-15);
            for (i, l) in lambda.iter_mut().enumerate() {
                if !corral.contains(&i) {
                    *l = 0.0;
                }
            }
            if corral.is_empty() {
                return None;
            }
        }
    }
    None
}

fn min_norm_gram(g: &DMatrix<f64>) -> Vec<f64> {
    let m = g.nrows();
    let lipschitz = 2.0 * SymmetricEigen::new(g.clone()).eigenvalues.max();
    let mut lambda = vec![1.0 / m as f64; m];
    if !(lipschitz > 0.0) {
        return lambda;
    }
    let mut best = lambda.clone();
    let mut best_value = quad(g, &best);
    for it in 1..=PG_MAX_ITERS {
        let l = DVector::from_column_slice(&lambda);
        let grad = g * &l * 2.0;
        let stepped: Vec<f64> = lambda.iter().zip(grad.iter()).map(|(a, b)| a - b / lipschitz).collect();
        let next = project_simplex(&stepped);
        let pg_norm = lipschitz * lambda.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        lambda = next;
        if pg_norm <= PG_TOL {
            break;
        }
        if it % POLISH_EVERY == 0 {
            let support: Vec<usize> = (0..m).filter(|&i| lambda[i] > 0.0).collect();
            if let Some(polished) = solve_on_support(g, &support) {
                if is_optimal(g, &polished) {
                    return polished;
                }
            }
        }
    }
    let value = quad(g, &lambda);
    if value <= best_value {
        best = lambda;
        best_value = value;
    }
    let support: Vec<usize> = (0..m).filter(|&i| best[i] > 0.0).collect();
    if let Some(polished) = solve_on_support(g, &support) {
        if quad(g, &polished) <= best_value {
            return polished;
        }
    }
    best
}

/// `‖Σ λ_i* d_i‖` at the min-norm weights; zero exactly at Pareto-stationary points
/// when the `d_i` are exact hypergradients.
pub fn stationarity_residual(ds: &[Vector]) -> Result<f64> {
    let lambda = min_norm_simplex(ds)?;
    Ok(lambda.combine(ds).norm())
}

fn soft_threshold(v: &Vector, t: f64) -> Vector {
    v.map(|a| a.signum() * (a.abs() - t).max(0.0))
}

/// Value of the x-subproblem objective at `x`.
pub fn subproblem_objective(x_k: &Vector, ds: &[Vector], g: &Nonsmooth, alpha: f64, x: &Vector) -> f64 {
    let step = x - x_k;
    let worst = ds
        .iter()
        .enumerate()
        .map(|(i, d)| d.dot(&step) + g.value(i, x) - g.value(i, x_k))
        .fold(f64::NEG_INFINITY, f64::max);
    worst + step.norm_squared() / (2.0 * alpha)
}

/// Solves the x-subproblem for `g ≡ 0` or weighted-ℓ₁ `g` with `X = ℝⁿ`.
pub fn solve_x_subproblem(
    x_k: &Vector,
    ds: &[Vector],
    g: &Nonsmooth,
    x_set: &Constraint,
    alpha: f64,
) -> Result<DirectionResult> {
    let n = validate(ds)?;
    if x_k.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x_k.len() });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if let Constraint::Box { .. } = x_set {
        return Err(Error::Unsupported("box constraints in the x-subproblem".into()));
    }
    match g {
        Nonsmooth::WeightedL1(c) if !g.is_zero() => {
            if c.len() != ds.len() {
                return Err(Error::DimensionMismatch { expected: ds.len(), got: c.len() });
            }
            if c.iter().any(|&ci| !(ci >= 0.0)) {
                return Err(Error::Unsupported("negative l1 weight".into()));
            }
            Ok(solve_l1(x_k, ds, c, g, alpha))
        }
        _ => {
            let lambda = min_norm_simplex(ds)?;
            let w = lambda.combine(ds);
            let x_next = x_k - &w * alpha;
            let subproblem_value = subproblem_objective(x_k, ds, g, alpha, &x_next);
            Ok(DirectionResult { x_next, lambda, subproblem_value })
        }
    }
}

fn solve_l1(x_k: &Vector, ds: &[Vector], c: &[f64], g: &Nonsmooth, alpha: f64) -> DirectionResult {
    let m = ds.len();
    let n = x_k.len();
    let x_k_l1 = x_k.lp_norm(1);
    let primal = |lambda: &[f64]| -> Vector {
        let w = SimplexWeights(lambda.to_vec()).combine(ds);
        let weight: f64 = lambda.iter().zip(c).map(|(l, ci)| l * ci).sum();
        soft_threshold(&(x_k - w * alpha), alpha * weight)
    };
    let curvature: f64 =
        ds.iter().zip(c).map(|(d, ci)| (d.norm() + ci * (n as f64).sqrt()).powi(2)).sum::<f64>() * alpha;
    let mut lambda = vec![1.0 / m as f64; m];
    let mut avg = vec![0.0; m];
    if curvature > 0.0 {
        let step = 1.0 / curvature;
        for it in 0..DUAL_ITERS {
            let x = primal(&lambda);
            let dx = &x - x_k;
            let x_l1 = x.lp_norm(1);
            let ascended: Vec<f64> = (0..m)
                .map(|i| lambda[i] + step * (ds[i].dot(&dx) + c[i] * (x_l1 - x_k_l1)))
                .collect();
            lambda = project_simplex(&ascended);
            let w = 1.0 / (it + 1) as f64;
            for (a, l) in avg.iter_mut().zip(&lambda) {
                *a += w * (l - *a);
            }
        }
    } else {
        avg = lambda.clone();
    }
    let normalize = |v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|a| a / s).collect::<Vec<_>>()
    };
    let avg = normalize(avg);
    let lambda = normalize(lambda);
    let mut best = (primal(&avg), avg.clone());
    let mut best_value = subproblem_objective(x_k, ds, g, alpha, &best.0);
    let last = primal(&lambda);
    let last_value = subproblem_objective(x_k, ds, g, alpha, &last);
    if last_value < best_value {
        best = (last, lambda);
        best_value = last_value;
    }
    if best_value > 0.0 {
        best = (x_k.clone(), avg);
        best_value = 0.0;
    }
    DirectionResult { x_next: best.0, lambda: SimplexWeights(best.1), subproblem_value: best_value }
}
