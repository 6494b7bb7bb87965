//! Shared numerical building blocks.
//!
//! Everything here is deliberately small and self-contained: a signed
//! log-gamma family ([`gamma`]), adaptive Gauss–Kronrod quadrature
//! ([`quad`]), bracketed root-finding ([`root`]), compensated summation
//! ([`sum`]) and stable exponential moment kernels ([`expf`]). The rest
//! of the crate treats these as primitives.

pub mod expf;
pub mod gamma;
pub mod quad;
pub mod root;
pub mod sum;
