//! Drive the solver end to end from outside the test harness: build the
//! reference kernels, solve both the band and the barrier problem, and
//! print the policies with their residuals and fit diagnostics.

use ssinv_core::*;

fn main() -> Result<()> {
    let q = 0.03;
    let cost = CostModel::new(10.0, 10.0, q, HoldingCost::Quadratic)?;
    let free = CostModel::new(10.0, 0.0, q, HoldingCost::Quadratic)?;
    for (label, sigma, n) in [("bounded", 0.0, 2000usize), ("unbounded", 0.2, 2000)] {
        let model = Model::BetaFamily {
            delta_hat: 0.1,
            sigma,
            alpha: 3.0,
            beta: 1.0,
            varpi: 0.1,
            lambda: 1.5,
        };
        let kernel = ScaleKernel::build(&model, q, n)?;
        let sol = solve_ss(&kernel, &cost, 1e-9 * cost.k_fixed())?;
        let fit = sol.fit();
        println!(
            "{label}: s* = {:+.9}, a0 = {:+.9}, S* = {:+.9}",
            sol.threshold(),
            sol.a0(),
            sol.target()
        );
        println!(
            "  |G| = {:.2e}, |H| = {:.2e}, value_gap = {:.2e}, slope_gap = {:.2e}, smooth_fit = {}",
            sol.residual_g().abs(),
            sol.residual_h().abs(),
            fit.value_gap,
            fit.slope_gap,
            fit.smooth_fit
        );
        println!(
            "  v(0) = {:.6}, v(s*-1) = {:.6}, v(S*+1) = {:.6}, v'(S*) = {:+.2e}",
            sol.value(0.0)?,
            sol.value(sol.threshold() - 1.0)?,
            sol.value(sol.target() + 1.0)?,
            fit.slope_at_target.unwrap()
        );
        let barrier = solve_barrier(&kernel, &free)?;
        let bf = barrier.fit();
        println!(
            "  barrier: a0 = {:+.9}, v(0) = {:.6}, slope_gap = {:.2e}, curv_gap = {:.2e}, smooth_fit = {}",
            barrier.a0(),
            barrier.value(0.0)?,
            bf.slope_gap,
            bf.curvature_gap.unwrap(),
            bf.smooth_fit
        );
    }
    Ok(())
}
