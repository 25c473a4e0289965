//! Exact Pareto fronts of the quadratic family and non-dominated filtering.
//!
//! Substituting `y*(x) = −M x` with `M = (BᵀB + μI)⁻¹` turns every upper-level
//! objective into a quadratic in `x` alone: with `P = [I; −M]`,
//! `φ_i(x) = ½ xᵀ PᵀA_iP x + a_iᵀ P x`. Each weighted sum of these is minimized
//! by one linear solve, and a sweep over weights traces the whole front.

use std::io::{Read, Write};

use nalgebra::{Cholesky, LU};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmoba::FrontDistance;
use crate::problem::{BilevelProblem, ExactOracle, Matrix, QuadraticInstance, Vector};

/// Ridge added to every scalarized system.
pub const RIDGE: f64 = 1e-10;
/// Points closer than this in ℓ∞ are treated as duplicates by the filter.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// The quadratic family with the lower level eliminated.
#[derive(Debug, Clone)]
pub struct ReducedQuadratic {
    /// `PᵀA_iP`.
    pub hessians: Vec<Matrix>,
    /// `Pᵀa_i`.
    pub linear: Vec<Vector>,
}

impl ReducedQuadratic {
    pub fn new(inst: &QuadraticInstance) -> Self {
        let dims = inst.dims();
        let n = dims.n_x;
        let ny = dims.n_y;
        let lift = inst.lower_hessian().clone().try_inverse().expect("BᵀB + μI is invertible");
        let mut p = Matrix::zeros(n + ny, n);
        p.view_mut((0, 0), (n, n)).copy_from(&Matrix::identity(n, n));
        p.view_mut((n, 0), (ny, n)).copy_from(&(-&lift));
        let pt = p.transpose();
        let hessians = (0..dims.m)
            .map(|i| {
                let h = &pt * inst.upper_matrix(i) * &p;
                (&h + h.transpose()) * 0.5
            })
            .collect();
        let linear = (0..dims.m).map(|i| &pt * inst.upper_vector(i)).collect();
        Self { hessians, linear }
    }

    pub fn m(&self) -> usize {
        self.hessians.len()
    }

    pub fn value(&self, i: usize, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessians[i] * x)) + self.linear[i].dot(x)
    }

    pub fn gradient(&self, i: usize, x: &Vector) -> Vector {
        &self.hessians[i] * x + &self.linear[i]
    }

    /// Minimizer of `Σ w_i φ_i + (ρ/2)‖x‖²` and its objective vector.
    pub fn scalarized(&self, w: &[f64]) -> Result<(Vector, Vec<f64>)> {
        if w.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), got: w.len() });
        }
        if w.iter().any(|&wi| !(wi >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights {w:?} are not on the simplex")));
        }
        let n = self.hessians[0].nrows();
        let mut system = Matrix::identity(n, n) * RIDGE;
        let mut rhs = Vector::zeros(n);
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                system += &self.hessians[i] * wi;
                rhs -= &self.linear[i] * wi;
            }
        }
        let x = match Cholesky::new(system.clone()) {
            Some(ch) => ch.solve(&rhs),
            None => LU::new(system)
                .solve(&rhs)
                .ok_or_else(|| Error::Factorization("scalarized system is singular".into()))?,
        };
        if x.iter().any(|a| !a.is_finite()) {
            return Err(Error::Factorization("scalarized system is singular".into()));
        }
        let objectives = (0..self.m()).map(|i| self.value(i, &x)).collect();
        Ok((x, objectives))
    }
}

/// Minimizer of the `w`-weighted sum of reduced objectives and its objective vector.
pub fn scalarized_solution(inst: &QuadraticInstance, w: &[f64]) -> Result<(Vector, Vec<f64>)> {
    ReducedQuadratic::new(inst).scalarized(w)
}

/// One point of a swept front.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint {
    pub weight: Vec<f64>,
    pub x: Vector,
    pub objectives: Vec<f64>,
}

/// A non-dominated set of objective vectors with their decision points.
#[derive(Debug, Clone)]
pub struct ParetoFront {
    pub points: Vec<FrontPoint>,
    pub instance_seed: u64,
    pub num_weights: usize,
    /// `R` with `RᵀR = I + M²`, so that `‖R(x − x')‖` is the distance between
    /// `(x, y*(x))` and `(x', y*(x'))`. Present for swept fronts.
    factor: Option<Matrix>,
    /// `R x` for every point when `factor` is present.
    reduced: Vec<Vector>,
}

/// Uniform lattice on the simplex with `per_edge` points along each edge.
pub fn simplex_lattice(m: usize, per_edge: usize) -> Vec<Vec<f64>> {
    if m == 1 {
        return vec![vec![1.0]];
    }
    let steps = per_edge - 1;
    let mut out = Vec::new();
    let mut current = vec![0usize; m];
    fn rec(pos: usize, left: usize, steps: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        let m = current.len();
        if pos == m - 1 {
            current[pos] = left;
            out.push(current.iter().map(|&c| c as f64 / steps as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            current[pos] = c;
            rec(pos + 1, left - c, steps, current, out);
        }
    }
    rec(0, steps, steps, &mut current, &mut out);
    out
}

/// Sweeps the weighted-sum scalarization over a uniform weight grid and filters
/// the results. For `m = 2` the grid has `num_weights` points on `[0, 1]`; for
/// `m ≥ 3` it is the lattice with `num_weights` points per edge.
pub fn sweep_front(inst: &QuadraticInstance, num_weights: usize) -> Result<ParetoFront> {
    if num_weights < 2 {
        return Err(Error::InvalidArgument("num_weights must be at least 2".into()));
    }
    let reduced = ReducedQuadratic::new(inst);
    let weights = simplex_lattice(inst.dims().m, num_weights);
    let solved: Vec<(Vector, Vec<f64>)> =
        weights.par_iter().map(|w| reduced.scalarized(w)).collect::<Result<Vec<_>>>()?;
    let objectives: Vec<Vec<f64>> = solved.iter().map(|(_, o)| o.clone()).collect();
    let keep = nondominated_filter(&objectives);
    let mut points = Vec::with_capacity(keep.len());
    let factor = distance_factor(inst)?;
    let mut reduced = Vec::with_capacity(keep.len());
    for idx in keep {
        let (x, objectives) = solved[idx].clone();
        reduced.push(&factor * &x);
        points.push(FrontPoint { weight: weights[idx].clone(), x, objectives });
    }
    Ok(ParetoFront { points, instance_seed: inst.seed(), num_weights, factor: Some(factor), reduced })
}

/// Upper Cholesky factor of `I + M²`, `M = (BᵀB + μI)⁻¹`.
fn distance_factor(inst: &QuadraticInstance) -> Result<Matrix> {
    let inverse = Cholesky::new(inst.lower_hessian().clone())
        .ok_or_else(|| Error::InvalidArgument("lower-level Hessian is not positive definite".into()))?
        .inverse();
    let n = inverse.nrows();
    let metric = Matrix::identity(n, n) + &inverse * &inverse;
    let chol = Cholesky::new(metric).ok_or_else(|| Error::InvalidArgument("singular distance metric".into()))?;
    Ok(chol.l().transpose())
}

fn lift(inst: &QuadraticInstance, x: &Vector) -> Result<Vector> {
    let y = inst.lower_solution(x)?;
    let mut z = Vector::zeros(x.len() + y.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), y.len()).copy_from(&y);
    Ok(z)
}

fn dominates(q: &[f64], p: &[f64]) -> bool {
    q.iter().zip(p).all(|(a, b)| a <= b) && q != p
}

fn near(q: &[f64], p: &[f64]) -> bool {
    q.iter().zip(p).all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
}

/// Indices of the points no other point dominates. Near-duplicates collapse to
/// the first one in input order.
pub fn nondominated_filter(points: &[Vec<f64>]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        if points[..i].iter().any(|q| near(q, p)) {
            continue;
        }
        for q in points {
            if !near(q, p) && dominates(q, p) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.objectives.clone()).collect()
    }

    /// `min_j ‖(x, y*(x)) − (x_j, y*(x_j))‖ / n`.
    pub fn decision_distance(&self, inst: &QuadraticInstance, x: &Vector) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("empty front".into()));
        }
        let mut best = f64::INFINITY;
        if let Some(factor) = &self.factor {
            crate::problem::check_len(x, factor.ncols())?;
            let z = factor * x;
            for r in &self.reduced {
                best = best.min(squared_distance(z.as_slice(), r.as_slice()));
            }
        } else {
            let z = lift(inst, x)?;
            for p in &self.points {
                best = best.min((&z - lift(inst, &p.x)?).norm_squared());
            }
        }
        Ok(best.sqrt() / x.len() as f64)
    }

    /// CSV with columns `w_1..w_m, x_1..x_n, phi_1..phi_m`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let m = self.points.first().map_or(0, |p| p.weight.len());
        let n = self.points.first().map_or(0, |p| p.x.len());
        let header: Vec<String> = (1..=m)
            .map(|i| format!("w_{i}"))
            .chain((1..=n).map(|i| format!("x_{i}")))
            .chain((1..=m).map(|i| format!("phi_{i}")))
            .collect();
        wr.write_record(&header)?;
        for p in &self.points {
            let row: Vec<String> = p
                .weight
                .iter()
                .chain(p.x.iter())
                .chain(p.objectives.iter())
                .map(|v| v.to_string())
                .collect();
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a front written by [`ParetoFront::write_csv`]. Decision points are
    /// lifted lazily when distances are requested.
    pub fn read_csv<R: Read>(r: R, instance_seed: u64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let m = headers.iter().filter(|h| h.starts_with("w_")).count();
        let n = headers.iter().filter(|h| h.starts_with("x_")).count();
        if m == 0 || headers.len() != 2 * m + n {
            return Err(Error::InvalidArgument("malformed front csv header".into()));
        }
        let mut points = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            points.push(FrontPoint {
                weight: vals[..m].to_vec(),
                x: Vector::from_column_slice(&vals[m..m + n]),
                objectives: vals[m + n..].to_vec(),
            });
        }
        Ok(Self { num_weights: points.len(), points, instance_seed, factor: None, reduced: Vec::new() })
    }
}

/// `‖a − b‖²` with independent partial sums, which the compiler can vectorize.
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Distance-to-front oracle for stopping rules and `d_p`.
#[derive(Debug, Clone, Copy)]
pub struct FrontOracle<'a> {
    pub instance: &'a QuadraticInstance,
    pub front: &'a ParetoFront,
}

impl FrontDistance for FrontOracle<'_> {
    fn distance(&self, x: &Vector) -> Result<f64> {
        self.front.decision_distance(self.instance, x)
    }
}
