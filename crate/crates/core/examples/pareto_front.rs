//! Sweep the exact Pareto front of a quadratic instance and write it as CSV.

use moblo::pareto::{nondominated_filter, scalarized_solution, sweep_front};
use moblo::{generate_instance, ProblemDims};

fn main() -> moblo::Result<()> {
    let inst = generate_instance(ProblemDims::square(10, 2)?, 0.1, 4)?;

    for w in [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]] {
        let (_, phi) = scalarized_solution(&inst, &w)?;
        println!("weights {w:?}: Phi = {phi:.4?}");
    }

    let front = sweep_front(&inst, 500)?;
    let objs = front.objectives();
    assert_eq!(nondominated_filter(&objs).len(), objs.len());
    println!("{} non-dominated points from 500 weights", front.len());

    let path = std::env::temp_dir().join("moblo_front.csv");
    front.write_csv(std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());

    let three = generate_instance(ProblemDims::square(10, 3)?, 0.1, 4)?;
    let front3 = sweep_front(&three, 30)?;
    println!("m = 3: {} points from a 30-per-edge lattice", front3.len());
    Ok(())
}
