//! Solves the ideal min-max problem on a discretized two-component mixture
//! from a skewed start and shows the ratio field settling at one.

use lrgan::ideal_solver::{
    discretize, minmax_value, solve_minmax_grid, RatioField, SolverOptions, Window,
};
use lrgan::loss_family::catalogue_lookup;

fn main() -> lrgan::Result<()> {
    let target =
        "mixture(0.3: gaussian(mean=[-2], cov=[[0.5]]); 0.7: gaussian(mean=[1.5], cov=[[1]]))"
            .parse()?;
    let f = discretize(&target, 200, Window::Interval(-7.0, 7.0))?;
    let loss = catalogue_lookup("CrossEntropy")?.loss;
    let skew: Vec<f64> = f.support.iter().map(|x| (0.8 * x[0]).exp()).collect();
    let r0 = RatioField::normalized(skew, &f)?;
    println!("start: L∞(r - 1) = {:.3}", r0.linf_to_one());

    let (r, trace) = solve_minmax_grid(&loss, &f, &r0, &SolverOptions::default())?;
    for t in trace.iter().step_by((trace.len() / 8).max(1)) {
        println!(
            "iter {:>5}  objective {:>12.9}  L∞ {:.3e}  constraint {:+.1e}",
            t.iteration, t.objective, t.linf_to_one, t.constraint_residual
        );
    }
    let anchor = loss.anchor();
    println!(
        "final: L∞ = {:.2e}, value = {:.9} (expected {:.9})",
        r.linf_to_one(),
        minmax_value(&loss, &r, &f)?,
        loss.phi(anchor) + loss.psi(anchor)
    );
    Ok(())
}
