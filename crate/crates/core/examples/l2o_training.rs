//! Train the unrolled warm start on one instance and compare it with plain gMOBA.
//!
//! ```sh
//! cargo run --release --example l2o_training
//! ```

use moblo::gmoba::solve_from;
use moblo::l2o::{l2o_then_gmoba, train, L2OParams, LossKind, TrainConfig};
use moblo::pareto::{sweep_front, FrontOracle};
use moblo::rng::{seeded, standard_normal_vector};
use moblo::{generate_instance, ProblemDims, SolverConfig, SolverState, Vector};

fn main() -> moblo::Result<()> {
    let n = 5;
    let inst = generate_instance(ProblemDims::square(n, 2)?, 0.1, 1)?;
    let config = TrainConfig { layers: 100, train_iters: 1000, loss: LossKind::L1, seed: 10, ..TrainConfig::default() };
    let outcome = train(&inst, &config)?;
    let first: f64 = outcome.losses.iter().take(50).sum::<f64>() / 50.0;
    let last: f64 = outcome.losses.iter().rev().take(50).sum::<f64>() / 50.0;
    println!(
        "trained {} iterations in {:.2} s; mean loss {first:.3} -> {last:.3}",
        outcome.iterations,
        outcome.wall_time.as_secs_f64()
    );
    let gammas = &outcome.params.gamma;
    println!("step multipliers: first {:.3}, middle {:.3}, last {:.3}", gammas[0], gammas[50], gammas[99]);

    let front = sweep_front(&inst, 500)?;
    let oracle = FrontOracle { instance: &inst, front: &front };
    let solver = SolverConfig::default();
    let untrained = L2OParams::uniform(100, 2);
    let mut rng = seeded(100);
    let (mut plain, mut warm, mut cold) = (0, 0, 0);
    for _ in 0..50 {
        let x0 = standard_normal_vector(n, &mut rng);
        let v0 = vec![Vector::zeros(n); 2];
        let y0 = Vector::zeros(n);
        plain += solve_from(&inst, SolverState::new(&inst, x0.clone(), y0.clone(), None)?, &solver, Some(&oracle))?.iterations;
        warm += l2o_then_gmoba(&inst, &outcome.params, &x0, &y0, &v0, &solver, Some(&oracle))?.iterations;
        cold += l2o_then_gmoba(&inst, &untrained, &x0, &y0, &v0, &solver, Some(&oracle))?.iterations;
    }
    println!("mean gMOBA iterations over 50 starts:");
    println!("  plain             {:.1}", plain as f64 / 50.0);
    println!("  untrained preamble {:.1}", cold as f64 / 50.0);
    println!("  trained preamble   {:.1}", warm as f64 / 50.0);
    Ok(())
}
