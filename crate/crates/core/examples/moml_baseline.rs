//! The truncated-ITD baseline next to gMOBA from the same starts.

use moblo::gmoba::solve_from;
use moblo::metrics::dp;
use moblo::moml::{itd_hypergradient, moml_solve, MomlConfig};
use moblo::pareto::{sweep_front, FrontOracle};
use moblo::rng::{seeded, standard_normal_vector};
use moblo::{generate_instance, ExactOracle, ProblemDims, SolverConfig, SolverState, Vector};

fn main() -> moblo::Result<()> {
    let n = 20;
    let inst = generate_instance(ProblemDims::square(n, 2)?, 0.1, 5)?;
    let x = standard_normal_vector(n, &mut seeded(0));

    // Truncation error of the unrolled hypergradient shrinks with more inner steps.
    let exact = inst.exact_hypergradient(0, &x)?;
    let y_star = inst.lower_solution(&x)?;
    for steps in [1, 5, 50, 500] {
        let (g, _) = itd_hypergradient(&inst, &x, &y_star, steps, 0.05)?;
        println!("T = {steps:3}: relative error {:.3e}", (&g[0] - &exact).norm() / exact.norm());
    }

    let front = sweep_front(&inst, 500)?;
    let oracle = FrontOracle { instance: &inst, front: &front };
    let gcfg = SolverConfig { alpha: 0.001, ..SolverConfig::default() };
    let mcfg = MomlConfig::default();
    let mut rng = seeded(9);
    for s in 0..3 {
        let x0 = standard_normal_vector(n, &mut rng);
        let g = solve_from(&inst, SolverState::new(&inst, x0.clone(), Vector::zeros(n), None)?, &gcfg, Some(&oracle))?;
        let m = moml_solve(&inst, x0, Vector::zeros(n), &mcfg, Some(&oracle))?;
        println!(
            "start {s}: gMOBA {} after {} iterations, d_p {:.4} | MOML {} after {} iterations, d_p {:.4}",
            g.termination.as_str(),
            g.iterations,
            dp(&inst, &front, &g.state.x)?,
            m.termination.as_str(),
            m.iterations,
            dp(&inst, &front, &m.state.x)?
        );
    }
    Ok(())
}
