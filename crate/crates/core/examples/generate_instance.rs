//! Generate a seeded quadratic instance, inspect its constants and round-trip it through JSON.
//!
//! ```sh
//! cargo run --example generate_instance -- 20 2 7
//! ```

use moblo::{generate_instance, recommend_steps, BilevelProblem, EvalPoint, ExactOracle, ProblemDims, QuadraticInstance, Vector};

fn main() -> moblo::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (n, m, seed) = (*args.first().unwrap_or(&20) as usize, *args.get(1).unwrap_or(&2) as usize, *args.get(2).unwrap_or(&7));

    let inst = generate_instance(ProblemDims::square(n, m)?, 0.1, seed)?;
    let c = inst.compute_constants();
    let steps = recommend_steps(&c);
    println!("n = {n}, m = {m}, seed = {seed}");
    println!("mu = {}, L_fy = {:.4}", c.mu, c.l_fy);
    println!("largest stable lower-level step beta = {:.4}, v step eta = {:.4}", steps.beta_max, steps.eta_max);

    let x = Vector::from_element(n, 0.5);
    let y_star = inst.lower_solution(&x)?;
    let p = EvalPoint::new(&x, &y_star);
    println!("|grad_y f(x, y*(x))| = {:.2e}", inst.grad_lower_y(p)?.norm());
    for i in 0..m {
        println!("F_{}(x, y*(x)) = {:.6}", i + 1, inst.eval_upper(i, p)?);
    }

    let path = std::env::temp_dir().join(format!("moblo_instance_{seed}.json"));
    inst.save(&path)?;
    let back = QuadraticInstance::load(&path)?;
    assert_eq!(back.upper_matrix(0), inst.upper_matrix(0));
    println!("saved and reloaded {}", path.display());
    Ok(())
}
