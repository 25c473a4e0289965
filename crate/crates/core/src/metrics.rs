//! Front-quality metrics.
//!
//! Objective-space metrics compare an obtained set `Y_N` with a reference set
//! `Y_P`; `d_p` and feasibility measure bilevel optimality of a single terminal
//! point with the exact lower-level oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::ParetoFront;
use crate::problem::{BilevelProblem, EvalPoint, ExactOracle, QuadraticInstance, Vector};

/// Default purity tolerance (Euclidean, objective space).
pub const DEFAULT_PURITY_TAU: f64 = 0.1;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_sq(y: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter().map(|p| sq_dist(y, p)).fold(f64::INFINITY, f64::min)
}

fn nonempty(set: &[Vec<f64>], what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    Ok(())
}

/// Fraction of `Y_N` within Euclidean distance `tau` of some point of `Y_P`.
pub fn purity(obtained: &[Vec<f64>], reference: &[Vec<f64>], tau: f64) -> Result<f64> {
    nonempty(obtained, "obtained set")?;
    let tau_sq = tau * tau;
    let hits = obtained.iter().filter(|y| nearest_sq(y, reference) <= tau_sq).count();
    Ok(hits as f64 / obtained.len() as f64)
}

/// Generational distance `sqrt(Σ_y min_p ‖y − p‖²) / |Y_N|`.
pub fn gd(obtained: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    nonempty(obtained, "obtained set")?;
    nonempty(reference, "reference set")?;
    let total: f64 = obtained.iter().map(|y| nearest_sq(y, reference)).sum();
    Ok(total.sqrt() / obtained.len() as f64)
}

/// Per-objective gaps: `(δ_0, interior δ_1..δ_{N−1}, δ_N)`, with boundary gaps
/// measured against the reference extremes and floored at zero.
fn gaps(obtained: &[Vec<f64>], reference: &[Vec<f64>], j: usize) -> (f64, Vec<f64>, f64) {
    let mut vals: Vec<f64> = obtained.iter().map(|y| y[j]).collect();
    vals.sort_by(f64::total_cmp);
    let ref_min = reference.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
    let ref_max = reference.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
    let interior = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let first = (vals[0] - ref_min).max(0.0);
    let last = (ref_max - vals[vals.len() - 1]).max(0.0);
    (first, interior, last)
}

fn spread_inputs(obtained: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<usize> {
    if obtained.len() < 2 {
        return Err(Error::InvalidArgument("spread needs at least two points".into()));
    }
    nonempty(reference, "reference set")?;
    Ok(obtained[0].len())
}

/// Largest gap `Γ` over all objectives, boundary gaps included.
pub fn spread_gamma(obtained: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    let m = spread_inputs(obtained, reference)?;
    Ok((0..m)
        .map(|j| {
            let (first, interior, last) = gaps(obtained, reference, j);
            interior.into_iter().fold(first.max(last), f64::max)
        })
        .fold(0.0, f64::max))
}

/// Gap-uniformity spread `Δ`, the worst objective's ratio.
pub fn spread_delta(obtained: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    let m = spread_inputs(obtained, reference)?;
    Ok((0..m)
        .map(|j| {
            let (first, interior, last) = gaps(obtained, reference, j);
            let mean = interior.iter().sum::<f64>() / interior.len() as f64;
            let dev: f64 = interior.iter().map(|d| (d - mean).abs()).sum();
            let denom = first + last + interior.len() as f64 * mean;
            if denom > 0.0 {
                (first + last + dev) / denom
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max))
}

/// Spacing: sample standard deviation of nearest-neighbour ℓ₁ distances.
pub fn sp(obtained: &[Vec<f64>]) -> Result<f64> {
    let n = obtained.len();
    if n < 2 {
        return Err(Error::InvalidArgument("spacing needs at least two points".into()));
    }
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            (0..n).filter(|&k| k != i).map(|k| l1(&obtained[i], &obtained[k])).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    Ok((d.iter().map(|v| (mean - v).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
}

/// Normalized decision-space distance from `(x, y*(x))` to the front.
pub fn dp(inst: &QuadraticInstance, front: &ParetoFront, x: &Vector) -> Result<f64> {
    front.decision_distance(inst, x)
}

/// Lower-level optimality gap `f(x, y) − f(x, y*(x))`.
pub fn feasibility(inst: &QuadraticInstance, x: &Vector, y: &Vector) -> Result<f64> {
    let y_star = inst.lower_solution(x)?;
    Ok(inst.eval_lower(EvalPoint::new(x, y))? - inst.eval_lower(EvalPoint::new(x, &y_star))?)
}

/// Objective-space metrics of one method on one instance, plus bilevel means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub purity: f64,
    pub gd: f64,
    /// Undefined (None) when fewer than two points were obtained.
    pub spread_gamma: Option<f64>,
    pub spread_delta: Option<f64>,
    pub sp: Option<f64>,
    pub dp_mean: f64,
    pub feasibility_mean: f64,
    pub n_obtained: usize,
    pub n_reference: usize,
}

impl MetricsReport {
    /// Builds a report from an already filtered obtained set.
    pub fn compute(
        obtained: &[Vec<f64>],
        reference: &[Vec<f64>],
        tau: f64,
        dps: &[f64],
        feasibilities: &[f64],
    ) -> Result<Self> {
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let two = obtained.len() >= 2;
        Ok(Self {
            purity: purity(obtained, reference, tau)?,
            gd: gd(obtained, reference)?,
            spread_gamma: if two { Some(spread_gamma(obtained, reference)?) } else { None },
            spread_delta: if two { Some(spread_delta(obtained, reference)?) } else { None },
            sp: if two { Some(sp(obtained)?) } else { None },
            dp_mean: mean(dps),
            feasibility_mean: mean(feasibilities),
            n_obtained: obtained.len(),
            n_reference: reference.len(),
        })
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    /// Ignores non-finite entries; `None` if nothing is left.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().filter(|a| a.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = if v.len() > 1 {
            (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, count: v.len() })
    }
}
