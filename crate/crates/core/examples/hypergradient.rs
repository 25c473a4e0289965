//! Exact hypergradients versus the approximation gMOBA tracks.
//!
//! The hypergradient of `φ_i(x) = F_i(x, y*(x))` is `∇_x F_i − ∇²_xy f · v_i*`
//! with `v_i*` solving `∇²_yy f · v = ∇_y F_i`. gMOBA replaces `y*` and `v_i*`
//! by running estimates; this example shows how the direction error shrinks as
//! those estimates converge with `x` held fixed.

use moblo::gmoba::hypergradient_error;
use moblo::rng::{seeded, standard_normal_vector};
use moblo::{generate_instance, BilevelProblem, EvalPoint, ExactOracle, ProblemDims, SolverState, Vector};

fn main() -> moblo::Result<()> {
    let n = 10;
    let inst = generate_instance(ProblemDims::square(n, 2)?, 0.1, 3)?;
    let x = standard_normal_vector(n, &mut seeded(1));

    // Central differences of the reduced objective agree with the closed form.
    let g = inst.exact_hypergradient(0, &x)?;
    let h = 1e-5;
    let fd = Vector::from_fn(n, |j, _| {
        let (mut a, mut b) = (x.clone(), x.clone());
        a[j] += h;
        b[j] -= h;
        (inst.reduced_objective(0, &a).unwrap() - inst.reduced_objective(0, &b).unwrap()) / (2.0 * h)
    });
    println!("relative finite-difference error: {:.2e}", (&g - &fd).norm() / g.norm());

    // Freeze x and let the y and v estimates converge.
    let (beta, eta) = (1.0, 0.5);
    let mut y = Vector::zeros(n);
    let mut v = vec![Vector::zeros(n); 2];
    for k in 0..=200 {
        if k % 40 == 0 {
            let s = SolverState::new(&inst, x.clone(), y.clone(), Some(v.clone()))?;
            let err = hypergradient_error(&inst, &s)?;
            println!("k = {k:3}: direction error {:.3e}, {:.3e}", err[0], err[1]);
        }
        let p = EvalPoint::new(&x, &y);
        let y_next = &y - inst.grad_lower_y(p)? * beta;
        for (i, vi) in v.iter_mut().enumerate() {
            let gy = inst.grad_upper(i, p)?.1;
            *vi = &*vi - (inst.hess_yy_vec(p, vi)? - gy) * eta;
        }
        y = y_next;
    }
    Ok(())
}
