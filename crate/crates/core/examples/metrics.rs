//! Score a set of solver outputs against the reference front.

use moblo::gmoba::solve_from;
use moblo::metrics::{dp, feasibility, MetricsReport};
use moblo::pareto::{nondominated_filter, sweep_front, FrontOracle};
use moblo::rng::{seeded, standard_normal_vector};
use moblo::{generate_instance, ExactOracle, ProblemDims, SolverConfig, SolverState, Vector};

fn main() -> moblo::Result<()> {
    let n = 10;
    let inst = generate_instance(ProblemDims::square(n, 2)?, 0.1, 2)?;
    let front = sweep_front(&inst, 500)?;
    let oracle = FrontOracle { instance: &inst, front: &front };
    let cfg = SolverConfig { alpha: 0.001, ..SolverConfig::default() };

    let mut rng = seeded(3);
    let (mut points, mut dps, mut feas) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..30 {
        let x0 = standard_normal_vector(n, &mut rng);
        let rec = solve_from(&inst, SolverState::new(&inst, x0, Vector::zeros(n), None)?, &cfg, Some(&oracle))?;
        let x = &rec.state.x;
        points.push((0..2).map(|i| inst.reduced_objective(i, x)).collect::<moblo::Result<Vec<f64>>>()?);
        dps.push(dp(&inst, &front, x)?);
        feas.push(feasibility(&inst, x, &rec.state.y)?);
    }
    let kept: Vec<Vec<f64>> = nondominated_filter(&points).into_iter().map(|i| points[i].clone()).collect();
    let report = MetricsReport::compute(&kept, &front.objectives(), 0.1, &dps, &feas)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
