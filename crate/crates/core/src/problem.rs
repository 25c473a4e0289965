//! Bilevel problem interface and the randomly generated quadratic test family.
//!
//! A multi-objective bilevel problem has `m` upper-level objectives
//! `F_i(x, y) + g_i(x)` and a single lower-level objective `f(x, y)` that is
//! strongly convex in `y`. Solvers only touch a problem through
//! [`BilevelProblem`]; problems with closed-form lower-level solutions also
//! expose an [`ExactOracle`] used for diagnostics and metrics.
//!
//! The quadratic family uses
//!
//! ```text
//! F_i(x, y) = ½ [x;y]ᵀ A_i [x;y] + a_iᵀ [x;y]
//! f(x, y)   = ½ yᵀ (BᵀB) y + xᵀ y + (μ/2) ‖y‖²
//! ```
//!
//! so that `y*(x) = −(BᵀB + μI)⁻¹ x` holds exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Name of the generator used for every seeded stream in this crate.
pub const RNG_NAME: &str = "ChaCha20Rng (rand_chacha 0.9, seed_from_u64)";

/// Problem sizes: `n_x` upper-level variables, `n_y` lower-level variables, `m` objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n_x: usize,
    pub n_y: usize,
    pub m: usize,
}

impl ProblemDims {
    pub fn new(n_x: usize, n_y: usize, m: usize) -> Result<Self> {
        if n_x == 0 || n_y == 0 || m == 0 {
            return Err(Error::InvalidDims(format!(
                "n_x = {n_x}, n_y = {n_y}, m = {m}; all must be at least 1"
            )));
        }
        Ok(Self { n_x, n_y, m })
    }

    /// Dimensions of the quadratic toy family, where `n_x = n_y = n`.
    pub fn square(n: usize, m: usize) -> Result<Self> {
        Self::new(n, n, m)
    }
}

/// A point `(x, y)` at which problem oracles are evaluated.
#[derive(Debug, Clone, Copy)]
pub struct EvalPoint<'a> {
    pub x: &'a Vector,
    pub y: &'a Vector,
}

impl<'a> EvalPoint<'a> {
    pub fn new(x: &'a Vector, y: &'a Vector) -> Self {
        Self { x, y }
    }
}

/// Nonsmooth upper-level parts `g_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum Nonsmooth {
    /// `g_i ≡ 0` for every objective.
    #[default]
    Zero,
    /// `g_i(x) = c_i ‖x‖₁` with one nonnegative weight per objective.
    WeightedL1(Vec<f64>),
}

impl Nonsmooth {
    pub fn value(&self, i: usize, x: &Vector) -> f64 {
        match self {
            Nonsmooth::Zero => 0.0,
            Nonsmooth::WeightedL1(c) => c[i] * x.lp_norm(1),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Nonsmooth::Zero => true,
            Nonsmooth::WeightedL1(c) => c.iter().all(|&ci| ci == 0.0),
        }
    }
}

/// Feasible set `X` for the upper-level variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum Constraint {
    #[default]
    Unconstrained,
    /// Componentwise bounds. Described for completeness; the x-subproblem
    /// solver rejects it.
    Box { lower: f64, upper: f64 },
}

/// Oracles of a multi-objective bilevel problem.
///
/// Objective indices are zero-based (`0..m`).
pub trait BilevelProblem: Sync {
    fn dims(&self) -> ProblemDims;

    /// `F_i(x, y)`.
    fn eval_upper(&self, i: usize, p: EvalPoint<'_>) -> Result<f64>;

    /// `(∇_x F_i(x, y), ∇_y F_i(x, y))`.
    fn grad_upper(&self, i: usize, p: EvalPoint<'_>) -> Result<(Vector, Vector)>;

    /// `F_i` together with both gradient blocks. Override when the two share work.
    fn upper_value_and_grad(&self, i: usize, p: EvalPoint<'_>) -> Result<(f64, Vector, Vector)> {
        let value = self.eval_upper(i, p)?;
        let (gx, gy) = self.grad_upper(i, p)?;
        Ok((value, gx, gy))
    }

    fn grad_upper_x(&self, i: usize, p: EvalPoint<'_>) -> Result<Vector> {
        Ok(self.grad_upper(i, p)?.0)
    }

    fn grad_upper_y(&self, i: usize, p: EvalPoint<'_>) -> Result<Vector> {
        Ok(self.grad_upper(i, p)?.1)
    }

    /// `f(x, y)`.
    fn eval_lower(&self, p: EvalPoint<'_>) -> Result<f64>;

    /// `∇_y f(x, y)`.
    fn grad_lower_y(&self, p: EvalPoint<'_>) -> Result<Vector>;

    /// `∇²_yy f(x, y) · v`, `v ∈ ℝ^{n_y}`.
    fn hess_yy_vec(&self, p: EvalPoint<'_>, v: &Vector) -> Result<Vector>;

    /// `∇²_xy f(x, y) · v`, `v ∈ ℝ^{n_y}`, result in `ℝ^{n_x}`.
    fn cross_xy_vec(&self, p: EvalPoint<'_>, v: &Vector) -> Result<Vector>;

    fn nonsmooth(&self) -> &Nonsmooth {
        const ZERO: &Nonsmooth = &Nonsmooth::Zero;
        ZERO
    }

    fn constraint(&self) -> &Constraint {
        const FREE: &Constraint = &Constraint::Unconstrained;
        FREE
    }

    /// Closed-form lower-level oracles, when the problem has them.
    fn exact(&self) -> Option<&dyn ExactOracle> {
        None
    }
}

/// Closed-form oracles for problems whose lower level can be solved exactly.
pub trait ExactOracle: Sync {
    /// `y*(x) = argmin_y f(x, y)`.
    fn lower_solution(&self, x: &Vector) -> Result<Vector>;

    /// `v_i*(x)`, the solution of `∇²_yy f(x, y*(x)) v = ∇_y F_i(x, y*(x))`.
    fn exact_v_star(&self, i: usize, x: &Vector) -> Result<Vector>;

    /// `∇φ_i(x)` for `φ_i(x) = F_i(x, y*(x))`.
    fn exact_hypergradient(&self, i: usize, x: &Vector) -> Result<Vector>;

    /// `φ_i(x) = F_i(x, y*(x))`.
    fn reduced_objective(&self, i: usize, x: &Vector) -> Result<f64>;
}

/// A problem with a nonsmooth upper-level part attached to an inner smooth problem.
#[derive(Debug, Clone)]
pub struct WithNonsmooth<P> {
    pub inner: P,
    pub g: Nonsmooth,
}

impl<P: BilevelProblem> WithNonsmooth<P> {
    pub fn new(inner: P, g: Nonsmooth) -> Result<Self> {
        if let Nonsmooth::WeightedL1(c) = &g {
            if c.len() != inner.dims().m {
                return Err(Error::DimensionMismatch { expected: inner.dims().m, got: c.len() });
            }
            if c.iter().any(|&ci| !(ci >= 0.0) || !ci.is_finite()) {
                return Err(Error::InvalidArgument("l1 weights must be finite and nonnegative".into()));
            }
        }
        Ok(Self { inner, g })
    }
}

impl<P: BilevelProblem> BilevelProblem for WithNonsmooth<P> {
    fn dims(&self) -> ProblemDims {
        self.inner.dims()
    }
    fn eval_upper(&self, i: usize, p: EvalPoint<'_>) -> Result<f64> {
        self.inner.eval_upper(i, p)
    }
    fn grad_upper(&self, i: usize, p: EvalPoint<'_>) -> Result<(Vector, Vector)> {
        self.inner.grad_upper(i, p)
    }
    fn upper_value_and_grad(&self, i: usize, p: EvalPoint<'_>) -> Result<(f64, Vector, Vector)> {
        self.inner.upper_value_and_grad(i, p)
    }
    fn eval_lower(&self, p: EvalPoint<'_>) -> Result<f64> {
        self.inner.eval_lower(p)
    }
    fn grad_lower_y(&self, p: EvalPoint<'_>) -> Result<Vector> {
        self.inner.grad_lower_y(p)
    }
    fn hess_yy_vec(&self, p: EvalPoint<'_>, v: &Vector) -> Result<Vector> {
        self.inner.hess_yy_vec(p, v)
    }
    fn cross_xy_vec(&self, p: EvalPoint<'_>, v: &Vector) -> Result<Vector> {
        self.inner.cross_xy_vec(p, v)
    }
    fn nonsmooth(&self) -> &Nonsmooth {
        &self.g
    }
    fn constraint(&self) -> &Constraint {
        self.inner.constraint()
    }
    fn exact(&self) -> Option<&dyn ExactOracle> {
        self.inner.exact()
    }
}

/// Global smoothness constants of a quadratic instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub mu: f64,
    /// Lipschitz constant of `∇_y f`: `λ_max(BᵀB) + μ`.
    pub l_fy: f64,
    /// Lipschitz constant of `∇²_yy f` (zero: the Hessian is constant).
    pub l_fyy: f64,
    /// Lipschitz constant of `∇²_xy f` (zero: the cross block is the identity).
    pub l_fxy: f64,
}

/// Largest lower-level step sizes for which the `y` and `v` iterations contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBounds {
    pub beta_max: f64,
    pub eta_max: f64,
}

pub fn recommend_steps(c: &ProblemConstants) -> StepBounds {
    StepBounds { beta_max: 2.0 / (c.mu + c.l_fy), eta_max: 1.0 / c.l_fy }
}

/// A member of the quadratic test family plus cached factorizations.
///
/// Immutable after construction; safe to share between concurrent runs.
#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    dims: ProblemDims,
    mu: f64,
    seed: u64,
    upper_mats: Vec<Matrix>,
    upper_vecs: Vec<Vector>,
    b: Matrix,
    lower_hessian: Matrix,
    lower_chol: Cholesky<f64, Dyn>,
    btb_lambda_max: f64,
}

/// `Q Λ Qᵀ` with `Q` Haar-orthogonal and `Λ` uniform on `[0, 1]`.
fn random_psd<R: Rng>(n: usize, rng: &mut R) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let eig = Vector::from_fn(n, |_, _| rng.random::<f64>());
    let a = &q * Matrix::from_diagonal(&eig) * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Draws a quadratic instance. A pure function of `(dims, mu, seed)`.
///
/// Each `A_i` is a random `2n × 2n` PSD matrix with spectrum in `[0, 1]`, each
/// `a_i` is uniform on `[−1, 1]^{2n}`, and `B` follows the same recipe as `A_i`
/// at size `n × n`.
pub fn generate_instance(dims: ProblemDims, mu: f64, seed: u64) -> Result<QuadraticInstance> {
    let dims = ProblemDims::new(dims.n_x, dims.n_y, dims.m)?;
    if dims.n_x != dims.n_y {
        return Err(Error::InvalidDims("the quadratic family couples xᵀy and needs n_x = n_y".into()));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let nz = dims.n_x + dims.n_y;
    let mut upper_mats = Vec::with_capacity(dims.m);
    let mut upper_vecs = Vec::with_capacity(dims.m);
    for _ in 0..dims.m {
        upper_mats.push(random_psd(nz, &mut rng));
        upper_vecs.push(Vector::from_fn(nz, |_, _| rng.random_range(-1.0..=1.0)));
    }
    let b = random_psd(dims.n_y, &mut rng);
    QuadraticInstance::from_parts(dims, mu, seed, upper_mats, upper_vecs, b)
}

impl QuadraticInstance {
    /// Assembles an instance from explicit data and builds the cached factorization.
    pub fn from_parts(
        dims: ProblemDims,
        mu: f64,
        seed: u64,
        upper_mats: Vec<Matrix>,
        upper_vecs: Vec<Vector>,
        b: Matrix,
    ) -> Result<Self> {
        let dims = ProblemDims::new(dims.n_x, dims.n_y, dims.m)?;
        if dims.n_x != dims.n_y {
            return Err(Error::InvalidDims("the quadratic family needs n_x = n_y".into()));
        }
        let nz = dims.n_x + dims.n_y;
        if upper_mats.len() != dims.m || upper_vecs.len() != dims.m {
            return Err(Error::DimensionMismatch { expected: dims.m, got: upper_mats.len().min(upper_vecs.len()) });
        }
        for (a, v) in upper_mats.iter().zip(&upper_vecs) {
            if a.nrows() != nz || a.ncols() != nz {
                return Err(Error::DimensionMismatch { expected: nz, got: a.nrows() });
            }
            if v.len() != nz {
                return Err(Error::DimensionMismatch { expected: nz, got: v.len() });
            }
        }
        if b.nrows() != dims.n_y || b.ncols() != dims.n_y {
            return Err(Error::DimensionMismatch { expected: dims.n_y, got: b.nrows() });
        }
        let btb = b.transpose() * &b;
        let btb_lambda_max = SymmetricEigen::new(btb.clone()).eigenvalues.max().max(0.0);
        let lower_hessian = btb + Matrix::identity(dims.n_y, dims.n_y) * mu;
        let lower_chol = Cholesky::new(lower_hessian.clone())
            .ok_or_else(|| Error::Factorization("BᵀB + μI is not positive definite".into()))?;
        Ok(Self { dims, mu, seed, upper_mats, upper_vecs, b, lower_hessian, lower_chol, btb_lambda_max })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn upper_matrix(&self, i: usize) -> &Matrix {
        &self.upper_mats[i]
    }

    pub fn upper_vector(&self, i: usize) -> &Vector {
        &self.upper_vecs[i]
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// `H = BᵀB + μI`, the (constant) lower-level Hessian.
    pub fn lower_hessian(&self) -> &Matrix {
        &self.lower_hessian
    }

    /// Solves `H z = rhs` with the cached Cholesky factor.
    pub fn solve_lower_hessian(&self, rhs: &Vector) -> Vector {
        self.lower_chol.solve(rhs)
    }

    pub fn compute_constants(&self) -> ProblemConstants {
        ProblemConstants { mu: self.mu, l_fy: self.btb_lambda_max + self.mu, l_fyy: 0.0, l_fxy: 0.0 }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dims.m {
            return Err(Error::ObjectiveIndex { index: i, m: self.dims.m });
        }
        Ok(())
    }

    fn check_point(&self, p: EvalPoint<'_>) -> Result<()> {
        check_len(p.x, self.dims.n_x)?;
        check_len(p.y, self.dims.n_y)
    }

    fn stack(&self, p: EvalPoint<'_>) -> Vector {
        let n = self.dims.n_x;
        let mut z = Vector::zeros(n + self.dims.n_y);
        z.rows_mut(0, n).copy_from(p.x);
        z.rows_mut(n, self.dims.n_y).copy_from(p.y);
        z
    }

    /// Writes the instance as self-describing JSON. Floats round-trip exactly.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &InstanceFile::from(self))?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: InstanceFile = serde_json::from_reader(r)?;
        file.into_instance()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_json(BufReader::new(File::open(path)?))
    }
}

pub(crate) fn check_len(v: &Vector, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: v.len() });
    }
    Ok(())
}

impl BilevelProblem for QuadraticInstance {
    fn dims(&self) -> ProblemDims {
        self.dims
    }

    fn eval_upper(&self, i: usize, p: EvalPoint<'_>) -> Result<f64> {
        self.check_index(i)?;
        self.check_point(p)?;
        let z = self.stack(p);
        Ok(0.5 * z.dot(&(&self.upper_mats[i] * &z)) + self.upper_vecs[i].dot(&z))
    }

    fn grad_upper(&self, i: usize, p: EvalPoint<'_>) -> Result<(Vector, Vector)> {
        let (_, gx, gy) = self.upper_value_and_grad(i, p)?;
        Ok((gx, gy))
    }

    fn upper_value_and_grad(&self, i: usize, p: EvalPoint<'_>) -> Result<(f64, Vector, Vector)> {
        self.check_index(i)?;
        self.check_point(p)?;
        let z = self.stack(p);
        let az = &self.upper_mats[i] * &z;
        let value = 0.5 * z.dot(&az) + self.upper_vecs[i].dot(&z);
        let g = az + &self.upper_vecs[i];
        let n = self.dims.n_x;
        Ok((value, g.rows(0, n).into_owned(), g.rows(n, self.dims.n_y).into_owned()))
    }

    fn eval_lower(&self, p: EvalPoint<'_>) -> Result<f64> {
        self.check_point(p)?;
        let by = &self.b * p.y;
        Ok(0.5 * by.norm_squared() + p.x.dot(p.y) + 0.5 * self.mu * p.y.norm_squared())
    }

    fn grad_lower_y(&self, p: EvalPoint<'_>) -> Result<Vector> {
        self.check_point(p)?;
        Ok(&self.lower_hessian * p.y + p.x)
    }

    fn hess_yy_vec(&self, _p: EvalPoint<'_>, v: &Vector) -> Result<Vector> {
        check_len(v, self.dims.n_y)?;
        Ok(&self.lower_hessian * v)
    }

    fn cross_xy_vec(&self, _p: EvalPoint<'_>, v: &Vector) -> Result<Vector> {
        check_len(v, self.dims.n_y)?;
        Ok(v.clone())
    }

    fn exact(&self) -> Option<&dyn ExactOracle> {
        Some(self)
    }
}

impl ExactOracle for QuadraticInstance {
    fn lower_solution(&self, x: &Vector) -> Result<Vector> {
        check_len(x, self.dims.n_x)?;
        Ok(-self.lower_chol.solve(x))
    }

    fn exact_v_star(&self, i: usize, x: &Vector) -> Result<Vector> {
        self.check_index(i)?;
        let y = self.lower_solution(x)?;
        let gy = self.grad_upper_y(i, EvalPoint::new(x, &y))?;
        Ok(self.lower_chol.solve(&gy))
    }

    fn exact_hypergradient(&self, i: usize, x: &Vector) -> Result<Vector> {
        self.check_index(i)?;
        let y = self.lower_solution(x)?;
        let p = EvalPoint::new(x, &y);
        let (gx, gy) = self.grad_upper(i, p)?;
        let v = self.lower_chol.solve(&gy);
        Ok(gx - self.cross_xy_vec(p, &v)?)
    }

    fn reduced_objective(&self, i: usize, x: &Vector) -> Result<f64> {
        let y = self.lower_solution(x)?;
        self.eval_upper(i, EvalPoint::new(x, &y))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixData {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl From<&Matrix> for MatrixData {
    fn from(m: &Matrix) -> Self {
        let data = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl MatrixData {
    fn into_matrix(self) -> Result<Matrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * self.cols, got: self.data.len() });
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u32,
    rng: String,
    dims: ProblemDims,
    mu: f64,
    seed: u64,
    upper_matrices: Vec<MatrixData>,
    upper_vectors: Vec<Vec<f64>>,
    b: MatrixData,
}

const INSTANCE_FORMAT: &str = "moblo-quadratic-instance";

impl From<&QuadraticInstance> for InstanceFile {
    fn from(inst: &QuadraticInstance) -> Self {
        Self {
            format: INSTANCE_FORMAT.to_string(),
            version: 1,
            rng: RNG_NAME.to_string(),
            dims: inst.dims,
            mu: inst.mu,
            seed: inst.seed,
            upper_matrices: inst.upper_mats.iter().map(MatrixData::from).collect(),
            upper_vectors: inst.upper_vecs.iter().map(|v| v.iter().copied().collect()).collect(),
            b: MatrixData::from(&inst.b),
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<QuadraticInstance> {
        if self.format != INSTANCE_FORMAT {
            return Err(Error::InvalidArgument(format!("unexpected instance format {:?}", self.format)));
        }
        let mats = self.upper_matrices.into_iter().map(MatrixData::into_matrix).collect::<Result<Vec<_>>>()?;
        let vecs = self.upper_vectors.into_iter().map(Vector::from_vec).collect();
        QuadraticInstance::from_parts(self.dims, self.mu, self.seed, mats, vecs, self.b.into_matrix()?)
    }
}
