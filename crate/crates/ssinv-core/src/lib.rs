//! Optimal (s,S) inventory policies for spectrally negative Lévy demand.
//!
//! The inventory level is modelled as `X_t = x - D_t` where the cumulative
//! demand `D` makes `X` a spectrally negative Lévy process (downward jumps,
//! continuous upward motion). Replenishment is an impulse control: each order
//! costs a fixed amount `K` plus a proportional amount `C` per unit, and the
//! held inventory accrues a running cost `f(X_t)`, all discounted at rate `q`.
//!
//! Under an (s,S) policy the controller orders up to `S` as soon as the level
//! falls below `s`. For the models implemented here the expected discounted
//! cost of any such policy — and the optimal thresholds themselves — have
//! closed expressions in terms of the q-scale function `W^(q)` of `X`, which
//! this crate evaluates as a truncated exponential sum derived from the
//! partial-fraction structure of `1/(ψ(s) - q)`.
//!
//! Module layout:
//!
//! * [`levy`] — model parametrisations, Laplace exponent `ψ` and its
//!   derivatives, `Φ(q)`, variation classification, jump structure.
//! * [`scale`] — scale-function kernels `W^(q)`, `Z^(q)`, their integrals and
//!   combinations, plus the classical exit/reflection identities.
//! * [`cost`] — running/order cost specifications, the transforms
//!   `Ψ(s; h)` and `φ_s(x; h)` that enter every cost formula.
//! * [`policy`] — the two-stage solver for `(s*, S*)`, value functions,
//!   and smooth-fit diagnostics.
//! * [`sim`] — Monte Carlo validation: jump-diffusion path simulation with
//!   small-jump Gaussian substitution, policy cost and exit-functional
//!   estimators.
//! * [`num`] — shared numerics: special functions, adaptive quadrature,
//!   bracketed root-finding, compensated summation.

pub mod cost;
pub mod levy;
pub mod num;
pub mod policy;
pub mod scale;
pub mod sim;

pub use cost::{CostModel, HoldingCost, Transform};
pub use levy::{BoundaryData, Model, VariationClass};
pub use policy::{
    barrier_value, expected_cost_ss, g_func, h_func, k_func, solve_barrier, solve_ss, FitReport,
    Policy, Solution,
};
pub use scale::ScaleKernel;
pub use sim::{
    estimate_barrier_cost, estimate_exit_functional, estimate_ss_cost, CostEstimate, ExitKind,
    SimConfig,
};

/// Crate-wide error type.
///
/// Numerical routines that can fail structurally (no bracket, no
/// convergence, invalid parameters) report through this enum; plain
/// evaluation paths stay infallible and panic only on contract violations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Model or cost parameters violate a documented restriction.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A root-finder could not bracket or refine its target.
    #[error("root finding failed: {0}")]
    RootFinding(String),
    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    /// A numerical invariant was violated at runtime (overflow, NaN, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
