//! The x-subproblem: a min-norm point of the convex hull of directions, and
//! its weighted-ℓ₁ proximal variant.

use moblo::direction::{min_norm_simplex, solve_x_subproblem, stationarity_residual};
use moblo::{Constraint, Nonsmooth, Vector};

fn main() -> moblo::Result<()> {
    let ds = vec![Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![0.0, 1.0])];
    let lambda = min_norm_simplex(&ds)?;
    println!("orthogonal pair: lambda = {:?}, residual = {:.4}", lambda.as_slice(), stationarity_residual(&ds)?);

    let opposed = vec![Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![-1.0, 0.0])];
    println!("opposed pair: residual = {:.1e} (Pareto stationary)", stationarity_residual(&opposed)?);

    let three = vec![
        Vector::from_vec(vec![2.0, 0.5, 0.0]),
        Vector::from_vec(vec![0.0, 1.0, 1.0]),
        Vector::from_vec(vec![-0.5, 0.2, 1.5]),
    ];
    println!("three directions: lambda = {:.4?}", min_norm_simplex(&three)?.as_slice());

    let x_k = Vector::from_vec(vec![0.3, -0.2, 1.0]);
    let alpha = 0.1;
    let smooth = solve_x_subproblem(&x_k, &three, &Nonsmooth::Zero, &Constraint::Unconstrained, alpha)?;
    println!("smooth step:  x+ = {:.4?}", smooth.x_next.as_slice());

    let l1 = Nonsmooth::WeightedL1(vec![0.5, 1.0, 2.0]);
    let prox = solve_x_subproblem(&x_k, &three, &l1, &Constraint::Unconstrained, alpha)?;
    println!(
        "l1 step:      x+ = {:.4?}, lambda = {:.4?}, subproblem value {:.4}",
        prox.x_next.as_slice(),
        prox.lambda.as_slice(),
        prox.subproblem_value
    );
    Ok(())
}
