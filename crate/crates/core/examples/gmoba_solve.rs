//! Run gMOBA on one instance with history and Lyapunov tracking.

use moblo::gmoba::{hypergradient_error, solve_from};
use moblo::metrics::{dp, feasibility};
use moblo::pareto::{sweep_front, FrontOracle};
use moblo::rng::{seeded, standard_normal_vector};
use moblo::{generate_instance, recommend_steps, ProblemDims, SolverConfig, SolverState, Vector};

fn main() -> moblo::Result<()> {
    let n = 20;
    let inst = generate_instance(ProblemDims::square(n, 2)?, 0.1, 1)?;
    let front = sweep_front(&inst, 500)?;
    let oracle = FrontOracle { instance: &inst, front: &front };
    let steps = recommend_steps(&inst.compute_constants());

    let config = SolverConfig {
        alpha: 0.001,
        beta: steps.beta_max,
        eta: steps.eta_max,
        tol_dp: None,
        record_history: true,
        lyapunov_check: true,
        ..SolverConfig::default()
    };
    let x0 = standard_normal_vector(n, &mut seeded(42));
    let start = SolverState::new(&inst, x0, Vector::zeros(n), None)?;
    let rec = solve_from(&inst, start, &config, Some(&oracle))?;

    println!("termination: {}", rec.termination.as_str());
    println!("iterations: {}", rec.iterations);
    let history = rec.history.as_deref().unwrap_or_default();
    for (k, it) in history.iter().enumerate().step_by((history.len() / 8).max(1)) {
        println!(
            "k = {k:5}  F = {:>10.4?}  |dx| = {:.2e}  lambda = {:.3?}",
            it.f_values, it.step_norm, it.lambda
        );
    }
    println!("largest Lyapunov increase: {:.3e}", rec.max_lyapunov_increase.unwrap_or(f64::NAN));
    println!("direction error at the end: {:.3?}", hypergradient_error(&inst, &rec.state)?);
    println!("d_p = {:.4}", dp(&inst, &front, &rec.state.x)?);
    println!("feasibility = {:.3e}", feasibility(&inst, &rec.state.x, &rec.state.y)?);
    Ok(())
}
