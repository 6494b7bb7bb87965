//! q-scale functions as exponential sums, with the exit and reflection
//! functionals built on them.
//!
//! For q > 0 the scale function of a [`Model`] with rational
//! (mixed-exponential) jump structure is the exponential sum
//!
//! ```text
//!     W(x) = e^{Φx}/ψ'(Φ) − Σ_{i≥1} B_i e^{−ξ_i x},        x ≥ 0,
//! ```
//!
//! where `Φ = Φ(q)` is the right inverse of the Laplace exponent, the
//! `ξ_i > 0` solve `ψ(−ξ_i) = q` and interlace the poles `η_i` of `ψ`
//! (`ξ_1 < η_1 < ξ_2 < η_2 < …`), and every `B_i` is positive. Writing
//! `c_0 = 1/ψ'(Φ)`, `ρ_0 = Φ`, `c_i = −B_i`, `ρ_i = −ξ_i`, all derived
//! functions are sums of the same shape over `(c_k, ρ_k)`:
//!
//! ```text
//!     W̄(x) = Σ c_k (e^{ρ_k x}−1)/ρ_k              (W̄ = ∫_0^x W)
//!     Z(x)  = 1 + q W̄(x)
//!     Z̄(x) = x + q Σ c_k (e^{ρ_k x}−1−ρ_k x)/ρ_k²
//!     Θ(x)  = W'(x) − Φ W(x)  = Σ B_i (ξ_i+Φ) e^{−ξ_i x}
//!     Θ̄(x) = W(x) − Φ W̄(x)  = Σ c_k [(1−Φ/ρ_k)e^{ρ_k x} + Φ/ρ_k]
//! ```
//!
//! `Θ` and `Θ̄` carry no growing mode: the `k = 0` term of `Θ̄` is the
//! constant `c_0` and `Θ̄(∞) = Φ/q`. Every functional exposed here
//! (ruin transform, overshoot, resolvents, reflection at a barrier) is
//! assembled so the `e^{Φx}` mode cancels *algebraically* — term by
//! term, before any floating-point subtraction — leaving sums whose
//! summands stay bounded as x grows. The textbook combinations
//! (`Z − (q/Φ)W` and relatives) subtract numbers of size `e^{Φx}` and
//! are kept only as test oracles on moderate arguments.
//!
//! Truncation: the default 50 terms put the series error far below any
//! solver tolerance for arguments bounded away from 0 (the tail decays
//! like `e^{−ξ_{N+1} x}`), but convergence *at* x = 0 is slow when the
//! paths have bounded variation — `W_N(0) − W(0)` falls like `N^{−1/2}`
//! there. [`ScaleKernel::build_adaptive`] grows N until the last term is
//! negligible at the smallest argument of interest, and
//! [`w_zero_series_residue`] pushes the series value at 0 to millions of
//! terms (residue coefficients, O(N) work) to confirm the boundary
//! identity `W(0) = 1/δ` numerically.

use crate::levy::{BoundaryData, Model, VariationClass};
use crate::num::expf::{e0, ec, ecp};
use crate::num::sum::Accumulator;
use crate::num::{quad, root};
use crate::{Error, Result};

/// Which of the scale-function family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// `W(x)`; `0` for x < 0, series value at x = 0.
    W,
    /// `W'(x)`; `0` for x < 0, series value at x = 0.
    WPrime,
    /// `W̄(x) = ∫_0^x W`; `0` for x ≤ 0.
    WBar,
    /// `Z(x) = 1 + q W̄(x)`; `1` for x ≤ 0.
    Z,
    /// `Z̄(x) = ∫_0^x Z + x·0…` — equals `x` for x ≤ 0.
    ZBar,
    /// `e^{−Φx} W(x)`; `0` for x < 0.
    WPhi,
    /// `Θ(x) = W'(x) − Φ W(x)`; `0` for x < 0.
    Theta,
    /// `Θ̄(x) = W(x) − Φ W̄(x)`; `0` for x < 0.
    ThetaBar,
}

/// How the series coefficients `B_i` are computed.
///
/// The two forms express the same number:
/// `B_i = (Φ/q) ξ_i A_i/(Φ+ξ_i)` with the interlacing product
/// `A_i = (1−ξ_i/η_i) Π_{j≠i} (1−ξ_i/η_j)/(1−ξ_i/ξ_j)` running over
/// *all* `j ≥ 1`, which evaluates in closed form to the residue
/// `B_i = −1/ψ'(−ξ_i)` of `1/(ψ − q)` at `−ξ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffForm {
    /// Exact value via `B_i = −1/ψ'(−ξ_i)`; O(N) work. The default.
    Residue,
    /// The interlacing product truncated to the kernel's own N roots and
    /// poles; every factor is positive, which is the structural reason
    /// `B_i > 0`, but dropping the tail factors biases each coefficient
    /// low by O(ξ_i Σ_{j>N} (η_j−ξ_j)/η_j²). Kept as a cross-check that
    /// must *converge* to the residue value as N grows.
    Product,
}

/// Truncated exponential-sum representation of the q-scale function of a
/// [`Model`], with evaluators for the derived functions and functionals.
#[derive(Debug, Clone)]
pub struct ScaleKernel {
    model: Model,
    q: f64,
    phi: f64,
    psi_d_phi: f64,
    c0: f64,
    /// Decay rates ξ_i, strictly increasing.
    xis: Vec<f64>,
    /// Coefficients B_i > 0.
    bs: Vec<f64>,
    /// Poles η_i of ψ (empty for the jump-free model).
    etas: Vec<f64>,
    mu: f64,
    /// Series value Σ c_k = W_N(0) (exact-boundary value lives in `boundary`).
    w0_series: f64,
    /// Series value Σ c_k ρ_k = W_N'(0).
    wprime0_series: f64,
    /// Θ̄(∞) = c_0 + Σ B_i Φ/ξ_i; equals Φ/q up to truncation.
    theta_bar_inf: f64,
    boundary: BoundaryData,
    variation: VariationClass,
    coeff_form: CoeffForm,
}

impl ScaleKernel {
    /// Build a kernel with `n_terms` series terms and residue (exact)
    /// coefficients. For [`Model::BrownianDrift`] the representation is
    /// the exact two-term closed form and `n_terms` is ignored.
    pub fn build(model: &Model, q: f64, n_terms: usize) -> Result<Self> {
        Self::build_with(model, q, n_terms, CoeffForm::Residue)
    }

    /// Build with an explicit coefficient scheme.
    pub fn build_with(model: &Model, q: f64, n_terms: usize, form: CoeffForm) -> Result<Self> {
        model.validate()?;
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale kernel needs a discount rate q > 0, got {q}"
            )));
        }
        let phi = model.phi_q(q)?;
        let psi_d_phi = model.psi_d1(phi);
        if !(psi_d_phi > 0.0) {
            return Err(Error::Numerical(format!(
                "psi'(Phi) = {psi_d_phi:.3e} must be positive"
            )));
        }
        let c0 = 1.0 / psi_d_phi;

        let (xis, bs, etas) = match *model {
            Model::BrownianDrift { drift, sigma } => {
                // ψ − q = (σ²/2)(z − Φ)(z + θ): one decaying mode with
                // θ = (m̂ + √(m̂² + 2σ²q))/σ² and residue 1/ψ'(Φ).
                let s2 = sigma * sigma;
                let disc = (drift * drift + 2.0 * s2 * q).sqrt();
                let theta = (drift + disc) / s2;
                (vec![theta], vec![c0], Vec::new())
            }
            Model::BetaFamily { .. } => {
                if n_terms == 0 {
                    return Err(Error::InvalidParameter(
                        "scale kernel needs at least one series term".into(),
                    ));
                }
                let (xis, etas) = beta_root_sequence(model, q, n_terms)?;
                let bs = match form {
                    CoeffForm::Product => product_coefficients(&xis, &etas, phi, q),
                    CoeffForm::Residue => xis.iter().map(|&xi| -1.0 / model.psi_d1(-xi)).collect(),
                };
                for (i, &b) in bs.iter().enumerate() {
                    if !(b > 0.0) || !b.is_finite() {
                        return Err(Error::Numerical(format!(
                            "scale coefficient B_{} = {b:.3e} is not positive",
                            i + 1
                        )));
                    }
                }
                (xis, bs, etas)
            }
        };

        let mut b_sum = Accumulator::new();
        let mut bxi_sum = Accumulator::new();
        let mut b_over_xi = Accumulator::new();
        for (&b, &xi) in bs.iter().zip(&xis) {
            b_sum.add(b);
            bxi_sum.add(b * xi);
            b_over_xi.add(b / xi);
        }

        Ok(ScaleKernel {
            model: *model,
            q,
            phi,
            psi_d_phi,
            c0,
            mu: model.mean_mu(),
            w0_series: c0 - b_sum.value(),
            wprime0_series: c0 * phi + bxi_sum.value(),
            theta_bar_inf: c0 + phi * b_over_xi.value(),
            boundary: model.boundary_data(q),
            variation: model.variation_class(),
            coeff_form: form,
            xis,
            bs,
            etas,
        })
    }

    /// Double the term count (starting from 50) until the last series
    /// term is below `1e−12 · W(x_min)` at the smallest argument of
    /// interest, capping at `n_cap`. The cap kernel is still returned if
    /// reached; [`ScaleKernel::truncation_bound`] reports the residual.
    pub fn build_adaptive(model: &Model, q: f64, x_min: f64, n_cap: usize) -> Result<Self> {
        if !(x_min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "adaptive truncation needs x_min > 0, got {x_min}"
            )));
        }
        let mut n = 50usize;
        loop {
            let kernel = Self::build(model, q, n)?;
            if matches!(model, Model::BrownianDrift { .. })
                || kernel.truncation_bound(x_min) <= 1e-12 * kernel.w(x_min).abs()
                || n >= n_cap
            {
                return Ok(kernel);
            }
            n = (n * 2).min(n_cap);
        }
    }

    /// Magnitude of the last retained series term at `x` — an estimate of
    /// the truncation error of `W(x)` (the tail alternates in nothing:
    /// all omitted terms are negative, decaying in both index and `x`).
    pub fn truncation_bound(&self, x: f64) -> f64 {
        match (self.bs.last(), self.xis.last()) {
            (Some(&b), Some(&xi)) => b * (-xi * x).exp(),
            _ => 0.0,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    /// `ψ'(Φ) = 1/c_0`.
    pub fn psi_d_phi(&self) -> f64 {
        self.psi_d_phi
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    /// Mean `μ = ψ'(0+)` of the underlying model.
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// Decay rates ξ_i (increasing).
    pub fn roots(&self) -> &[f64] {
        &self.xis
    }
    /// Coefficients B_i (positive).
    pub fn coeffs(&self) -> &[f64] {
        &self.bs
    }
    /// Poles η_i of ψ bracketing the roots (empty for the jump-free model).
    pub fn poles(&self) -> &[f64] {
        &self.etas
    }
    pub fn n_terms(&self) -> usize {
        self.xis.len()
    }
    /// Series value `W_N(0) = Σ c_k` (≠ exact `W(0)` under truncation).
    pub fn w0_series(&self) -> f64 {
        self.w0_series
    }
    /// Series value `W_N'(0) = Σ c_k ρ_k`.
    pub fn wprime0_series(&self) -> f64 {
        self.wprime0_series
    }
    /// `Θ̄(∞) = c_0 + Σ B_i Φ/ξ_i`; equals `Φ/q` up to truncation.
    pub fn theta_bar_inf(&self) -> f64 {
        self.theta_bar_inf
    }
    /// Exact boundary values of W implied by the path variation.
    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }
    pub fn variation(&self) -> VariationClass {
        self.variation
    }
    pub fn coeff_form(&self) -> CoeffForm {
        self.coeff_form
    }

    /// Evaluate one of the scale-function family at `x` (conventions for
    /// x ≤ 0 per [`Kind`]).
    pub fn eval(&self, kind: Kind, x: f64) -> f64 {
        match kind {
            Kind::W => {
                if x < 0.0 {
                    0.0
                } else {
                    let mut acc = Accumulator::new();
                    acc.add(self.c0 * (self.phi * x).exp());
                    for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                        acc.add(-b * (-xi * x).exp());
                    }
                    acc.value()
                }
            }
            Kind::WPrime => {
                if x < 0.0 {
                    0.0
                } else {
                    let mut acc = Accumulator::new();
                    acc.add(self.c0 * self.phi * (self.phi * x).exp());
                    for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                        acc.add(b * xi * (-xi * x).exp());
                    }
                    acc.value()
                }
            }
            Kind::WBar => {
                if x <= 0.0 {
                    0.0
                } else {
                    // Σ c_k (e^{ρ_k x} − 1)/ρ_k, each term via expm1.
                    let mut acc = Accumulator::new();
                    acc.add(self.c0 * (self.phi * x).exp_m1() / self.phi);
                    for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                        acc.add(b * (-xi * x).exp_m1() / xi);
                    }
                    acc.value()
                }
            }
            Kind::Z => {
                if x <= 0.0 {
                    1.0
                } else {
                    1.0 + self.q * self.eval(Kind::WBar, x)
                }
            }
            Kind::ZBar => {
                if x <= 0.0 {
                    x
                } else {
                    // x + q Σ c_k (e^{ρ_k x} − 1 − ρ_k x)/ρ_k²
                    //   = x + q x² [c_0 ecp(Φx) − Σ B_i ec(ξ_i x)].
                    let mut acc = Accumulator::new();
                    acc.add(self.c0 * ecp(self.phi * x));
                    for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                        acc.add(-b * ec(xi * x));
                    }
                    x + self.q * x * x * acc.value()
                }
            }
            Kind::WPhi => {
                if x < 0.0 {
                    0.0
                } else {
                    let mut acc = Accumulator::new();
                    acc.add(self.c0);
                    for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                        acc.add(-b * (-(xi + self.phi) * x).exp());
                    }
                    acc.value()
                }
            }
            Kind::Theta => {
                if x < 0.0 {
                    0.0
                } else {
                    let mut acc = Accumulator::new();
                    for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                        acc.add(b * (xi + self.phi) * (-xi * x).exp());
                    }
                    acc.value()
                }
            }
            Kind::ThetaBar => {
                if x < 0.0 {
                    0.0
                } else {
                    // Θ̄(∞) minus the decaying remainder, all terms bounded.
                    let mut acc = Accumulator::new();
                    acc.add(self.theta_bar_inf);
                    for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                        acc.add(-b * (1.0 + self.phi / xi) * (-xi * x).exp());
                    }
                    acc.value()
                }
            }
        }
    }

    pub fn w(&self, x: f64) -> f64 {
        self.eval(Kind::W, x)
    }
    pub fn w_prime(&self, x: f64) -> f64 {
        self.eval(Kind::WPrime, x)
    }
    pub fn w_bar(&self, x: f64) -> f64 {
        self.eval(Kind::WBar, x)
    }
    pub fn z(&self, x: f64) -> f64 {
        self.eval(Kind::Z, x)
    }
    pub fn z_bar(&self, x: f64) -> f64 {
        self.eval(Kind::ZBar, x)
    }
    pub fn w_phi(&self, x: f64) -> f64 {
        self.eval(Kind::WPhi, x)
    }
    pub fn theta(&self, x: f64) -> f64 {
        self.eval(Kind::Theta, x)
    }
    pub fn theta_bar(&self, x: f64) -> f64 {
        self.eval(Kind::ThetaBar, x)
    }

    /// Closed-form Laplace transform `∫_0^∞ e^{−sx} W(x) dx =
    /// Σ c_k/(s − ρ_k)` for `s > Φ`; equals `1/(ψ(s) − q)` exactly for
    /// the untruncated series.
    pub fn laplace_transform(&self, s: f64) -> f64 {
        debug_assert!(s > self.phi);
        let mut acc = Accumulator::new();
        acc.add(self.c0 / (s - self.phi));
        for (&b, &xi) in self.bs.iter().zip(&self.xis) {
            acc.add(-b / (s + xi));
        }
        acc.value()
    }

    /// `|(ψ(s) − q) ∫_0^∞ e^{−sx} W(x) dx − 1|` with the transform done
    /// by adaptive quadrature — an end-to-end check that the represented
    /// function really is the q-scale function. Needs `s > Φ`.
    pub fn laplace_residual(&self, s: f64) -> Result<f64> {
        if !(s > self.phi) {
            return Err(Error::InvalidParameter(format!(
                "Laplace check needs s > Phi = {:.6}, got {s}",
                self.phi
            )));
        }
        // Evaluate e^{−sx} W(x) with the exponents combined per term so
        // the integrand never overflows however far the tail is probed.
        let integrand = |x: f64| {
            let mut acc = Accumulator::new();
            acc.add(self.c0 * ((self.phi - s) * x).exp());
            for (&b, &xi) in self.bs.iter().zip(&self.xis) {
                acc.add(-b * (-(s + xi) * x).exp());
            }
            acc.value()
        };
        let lt = quad::integrate_to_inf(integrand, 0.0, 1e-9, 1e-300)?;
        Ok(((self.model.psi(s) - self.q) * lt.value - 1.0).abs())
    }

    /// Upward two-sided exit transform
    /// `E_x[e^{−q τ_b⁺}; τ_b⁺ < τ_s⁻] = W(x−s)/W(b−s)` for s ≤ x ≤ b,
    /// evaluated as `e^{Φ(x−b)} W_Φ(x−s)/W_Φ(b−s)` so nothing overflows.
    /// Returns 0 for x < s (the lower barrier is hit immediately) and 1
    /// for x ≥ b.
    pub fn exit_up_lt(&self, x: f64, s: f64, b: f64) -> f64 {
        debug_assert!(b > s);
        if x >= b {
            return 1.0;
        }
        if x < s {
            return 0.0;
        }
        (self.phi * (x - b)).exp() * self.w_phi(x - s) / self.w_phi(b - s)
    }

    /// Ruin transform `E_x[e^{−q τ_s⁻}] = Z(x−s) − (q/Φ) W(x−s)`,
    /// evaluated as `1 − (q/Φ) Θ̄(x−s)`; `1` for x < s. At x = s the
    /// formula value `1 − (q/Φ)W(0)` applies: it is 1 only for unbounded
    /// variation, since bounded-variation paths take time to cross down.
    /// Decays to the truncation floor `1 − (q/Φ)Θ̄(∞)` (exactly 0
    /// untruncated) as x → ∞.
    pub fn ruin_lt(&self, x: f64, s: f64) -> f64 {
        let u = x - s;
        if u < 0.0 {
            return 1.0;
        }
        1.0 - (self.q / self.phi) * self.theta_bar(u)
    }

    /// Discounted position at first passage below `s`:
    /// `E_x[e^{−q τ_s⁻} X_{τ_s⁻}]`. The closed form
    /// `Z̄(u) − (q/Φ²)W(u) + (μ/Φ)Θ̄(u) + s·[ruin]` (u = x−s) is
    /// assembled with the `e^{Φu}` parts of `Z̄` and `W` cancelled
    /// algebraically. Returns `x` for x < s (passage is immediate).
    pub fn overshoot_expectation(&self, x: f64, s: f64) -> f64 {
        let u = x - s;
        if u < 0.0 {
            return x;
        }
        let (q, phi) = (self.q, self.phi);
        let mut acc = Accumulator::new();
        acc.add(u);
        acc.add(s);
        acc.add(-q * self.c0 * (1.0 + phi * u) / (phi * phi));
        acc.add(-(s - self.mu / q) * (q / phi) * self.theta_bar(u));
        for (&b, &xi) in self.bs.iter().zip(&self.xis) {
            let damp = (-xi * u).exp();
            // −q B_i (e^{−ξu} − 1 + ξu)/ξ² + (q/Φ²) B_i e^{−ξu}
            acc.add(-q * b * u * u * ec(xi * u));
            acc.add(q / (phi * phi) * b * damp);
        }
        acc.value()
    }

    /// `Ψ(y; h) = ∫_0^∞ e^{−Φt} h(y + t) dt` by adaptive quadrature.
    /// The closed forms for polynomial `h` live with the cost model; this
    /// generic version keeps the functionals below usable with any
    /// locally integrable `h` of subexponential growth.
    pub fn psi_weight<F: Fn(f64) -> f64>(&self, y: f64, h: F) -> Result<f64> {
        let phi = self.phi;
        let q = quad::integrate_to_inf(|t| (-phi * t).exp() * h(y + t), 0.0, 1e-11, 1e-300)?;
        Ok(q.value)
    }

    /// Resolvent of the process killed at first passage below `s`:
    /// `E_x[∫_0^{τ_s⁻} e^{−qt} h(X_t) dt] = W(x−s)Ψ(s;h) − φ_s(x;h)`,
    /// assembled per term as `c_0 Ψ(x;h) − Σ B_i [e^{−ξ_i u}Ψ(s;h) − J_i]`
    /// with `J_i = ∫_0^u e^{−ξ_i v} h(x−v) dv`, so every summand is
    /// bounded. Returns 0 for x < s.
    pub fn resolvent_cost<F: Fn(f64) -> f64>(&self, x: f64, s: f64, h: F) -> Result<f64> {
        let u = x - s;
        if u < 0.0 {
            return Ok(0.0);
        }
        // At u = 0 the value is W(0)·Ψ(s;h): zero only for unbounded
        // variation — bounded-variation paths take time to cross down.
        let psi_s = self.psi_weight(s, &h)?;
        let mut acc = Accumulator::new();
        acc.add(self.psi_weight(x, &h)? * self.c0);
        let scale = h(x).abs().max(h(s).abs()).max(1.0);
        for (&b, &xi) in self.bs.iter().zip(&self.xis) {
            let j = damped_integral(&h, x, u, xi, scale)?;
            acc.add(-b * ((-xi * u).exp() * psi_s - j));
        }
        Ok(acc.value())
    }

    /// Discounted local time at `s` of the process reflected (upward) at
    /// `s`: `E_x[∫_0^∞ e^{−qt} dL_t] = Z(u)/Φ − Z̄(u) − μ/q`, u = x−s,
    /// with the growing modes cancelled. For x < s the reflection is
    /// immediate and adds `s − x` to the local time.
    pub fn reflected_local_time_lt(&self, x: f64, s: f64) -> f64 {
        let u = x - s;
        if u < 0.0 {
            return (s - x) + self.reflected_local_time_lt(s, s);
        }
        let (q, phi) = (self.q, self.phi);
        let mut acc = Accumulator::new();
        acc.add(-u);
        acc.add(-self.mu / q);
        acc.add(1.0 / phi);
        acc.add(q * self.c0 * u / phi);
        for (&b, &xi) in self.bs.iter().zip(&self.xis) {
            let t = xi * u;
            acc.add(q * b * u * (u * ec(t) - e0(t) / phi));
        }
        acc.value()
    }

    /// Running cost of the process reflected (upward) at `s`:
    /// `E_x[∫_0^∞ e^{−qt} h(U_t) dt] = (Φ/q) Ψ(s;h) Z(u) − φ_s(x;h)`,
    /// u = x−s, assembled as
    /// `(Φ/q)Ψ(s;h) − c_0 Ψ(s;h) + c_0 Ψ(x;h)
    ///  − Φ Ψ(s;h) Σ B_i u e0(ξ_i u) + Σ B_i J_i`
    /// (all summands bounded; for h ≡ 1 it telescopes to exactly `1/q`).
    /// For x < s the process starts reflected: the value at `s` is
    /// returned.
    pub fn reflected_running_cost<F: Fn(f64) -> f64>(&self, x: f64, s: f64, h: F) -> Result<f64> {
        let x = x.max(s);
        let u = x - s;
        let psi_s = self.psi_weight(s, &h)?;
        let psi_x = if u == 0.0 { psi_s } else { self.psi_weight(x, &h)? };
        let (q, phi) = (self.q, self.phi);
        let mut acc = Accumulator::new();
        acc.add(phi / q * psi_s);
        acc.add(-self.c0 * psi_s);
        acc.add(self.c0 * psi_x);
        let scale = h(x).abs().max(h(s).abs()).max(1.0);
        for (&b, &xi) in self.bs.iter().zip(&self.xis) {
            let j = if u == 0.0 {
                0.0
            } else {
                damped_integral(&h, x, u, xi, scale)?
            };
            acc.add(b * (j - phi * psi_s * u * e0(xi * u)));
        }
        Ok(acc.value())
    }
}

/// `∫_0^u e^{−ξ v} h(x − v) dv` by adaptive quadrature, cutting the range
/// where the damping has decayed below 1e−20.
fn damped_integral<F: Fn(f64) -> f64>(h: F, x: f64, u: f64, xi: f64, scale: f64) -> Result<f64> {
    let hi = u.min(46.0 / xi);
    let q = quad::integrate(
        |v| (-xi * v).exp() * h(x - v),
        0.0,
        hi,
        1e-11,
        1e-15 * scale * hi.max(1e-30),
        400,
    )?;
    Ok(q.value)
}

/// The roots `0 < ξ_1 < … < ξ_n` of `ψ(−t) = q` together with the poles
/// `η_1 < … < η_n` of the Beta-family `ψ`. On each pole gap
/// `(η_{i−1}, η_i)` (with `η_0 = 0`) the function `ψ(−t) − q` runs from
/// −∞ (resp. `−q` at t = 0) to +∞ and crosses zero exactly once, so every
/// root is bracketed; bisection plus a Newton polish takes each root to
/// machine precision, and the residual `|ψ(−ξ) − q|` is verified.
fn beta_root_sequence(model: &Model, q: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (etas, _) = model.jump_expansion(n);
    let mut xis = Vec::with_capacity(n);
    let mut left = 0.0;
    for &eta in &etas {
        let xi = beta_root_in_gap(model, q, left, eta)?;
        xis.push(xi);
        left = eta;
    }
    Ok((xis, etas))
}

/// One root of `ψ(−t) = q` inside the pole gap `(left, right)`.
fn beta_root_in_gap(model: &Model, q: f64, left: f64, right: f64) -> Result<f64> {
    let f = |t: f64| model.psi(-t) - q;
    let span = right - left;
    // Walk the endpoints toward their poles until the signs bracket
    // (f → −∞ at left⁺ — or f(0) = −q — and f → +∞ at right⁻). The
    // insets shrink two decades per step; roots hug a pole no closer
    // than ~1e−5 of the gap for any term count this path serves.
    let mut lo = left + 1e-8 * span;
    let mut hi = right - 1e-8 * span;
    for _ in 0..7 {
        if f(lo) < 0.0 {
            break;
        }
        lo = left + (lo - left) * 1e-2;
    }
    for _ in 0..7 {
        if f(hi) > 0.0 {
            break;
        }
        hi = right - (right - hi) * 1e-2;
    }
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::RootFinding(format!(
            "could not bracket the scale root in ({left:.6e}, {right:.6e})"
        )));
    }
    let rough = root::bisect(f, lo, hi, 1e-13 * right.max(1.0))?;
    let xi = root::newton_polish(f, |t| -model.psi_d1(-t), rough, lo, hi, 6);
    // |f| at the representable point nearest the root is limited by
    // |f'| · ulp(ξ); accept a small multiple of that floor, or the
    // absolute tolerance the downstream invariants ask for.
    let slope_floor = 64.0 * model.psi_d1(-xi).abs() * (f64::EPSILON * xi.max(1.0));
    let resid = f(xi).abs();
    if resid > slope_floor.max(1e-10) {
        return Err(Error::RootFinding(format!(
            "scale root residual {resid:.3e} at xi = {xi:.12e}"
        )));
    }
    Ok(xi)
}

/// Interlacing product form of the coefficients: every factor of
/// `A_i = (1−ξ_i/η_i) Π_{j≠i} (1−ξ_i/η_j)/(1−ξ_i/ξ_j)` pairs a pole with
/// a root on the same side of ξ_i, so each ratio is positive and O(1);
/// the product is accumulated ratio-by-ratio to stay in range.
fn product_coefficients(xis: &[f64], etas: &[f64], phi: f64, q: f64) -> Vec<f64> {
    let n = xis.len();
    let mut bs = Vec::with_capacity(n);
    for i in 0..n {
        let xi = xis[i];
        let mut a = 1.0 - xi / etas[i];
        for j in 0..n {
            if j != i {
                a *= (1.0 - xi / etas[j]) / (1.0 - xi / xis[j]);
            }
        }
        bs.push(phi / q * xi * a / (phi + xi));
    }
    bs
}

/// Series value `W_N(0) = 1/ψ'(Φ) − Σ_{i≤N} B_i` pushed to very large N
/// with residue coefficients `B_i = −1/ψ'(−ξ_i)` — O(N) total work.
///
/// The first 200 roots are found by bracketed bisection as in the kernel
/// build. Beyond that the root is a perturbation of a pole and is
/// resolved by the pole-local fixed point
///
/// ```text
///     d ← c_i / (q − R(η_i − d)),    R(t) = ψ(−t) − c_i/d
/// ```
///
/// (`c_i` = residue of ψ at −η_i = the i-th mixed-exponential jump
/// coefficient), warm-started from the previous gap's distance; the map
/// contracts like O(1/i). Every 1024th root the residual is spot-checked
/// against the exact equation. Falls back to bisection in any gap where
/// the fixed point misbehaves (e.g. σ > 0, where roots hug the *left*
/// pole — that regime converges at small N anyway and never needs this
/// path).
///
/// This is the boundary diagnostic for bounded variation, where
/// `W_N(0) → 1/δ` only like N^{−1/2}.
pub fn w_zero_series_residue(model: &Model, q: f64, n_terms: usize) -> Result<f64> {
    model.validate()?;
    let (alpha, beta, lambda) = match *model {
        Model::BetaFamily {
            alpha, beta, lambda, ..
        } => (alpha, beta, lambda),
        Model::BrownianDrift { .. } => {
            return Err(Error::InvalidParameter(
                "the series boundary diagnostic needs the Beta family".into(),
            ))
        }
    };
    if n_terms == 0 {
        return Err(Error::InvalidParameter("need at least one term".into()));
    }
    let phi = model.phi_q(q)?;
    let c0 = 1.0 / model.psi_d1(phi);

    let n_bisect = n_terms.min(200);
    let (xis, etas) = beta_root_sequence(model, q, n_bisect)?;
    let mut b_sum = Accumulator::new();
    for &xi in &xis {
        b_sum.add(-1.0 / model.psi_d1(-xi));
    }

    if n_terms > n_bisect {
        let (_, cs) = model.jump_expansion(n_bisect);
        let mut c = cs[n_bisect - 1];
        let mut d_prev = etas[n_bisect - 1] - xis[n_bisect - 1];
        let mut eta_prev = etas[n_bisect - 1];
        for j in (n_bisect + 1)..=n_terms {
            let jf = (j - 1) as f64;
            let eta = beta * (alpha + jf);
            c *= (lambda + jf - 1.0) / jf;
            let gap = eta - eta_prev;

            let mut d = d_prev.min(0.5 * gap);
            let iters = if j > 5000 { 2 } else { 3 };
            let mut ok = d > 0.0;
            for _ in 0..iters {
                if !ok {
                    break;
                }
                let reg = model.psi(-(eta - d)) - c / d;
                let denom = q - reg;
                if !(denom > 0.0) {
                    ok = false;
                    break;
                }
                d = c / denom;
                ok = d > 0.0 && d < gap;
            }
            let xi = if ok {
                eta - d
            } else {
                beta_root_in_gap(model, q, eta_prev, eta)?
            };
            if j % 1024 == 0 {
                let dpsi = model.psi_d1(-xi).abs();
                let resid = (model.psi(-xi) - q).abs();
                if resid > 1e-6 * dpsi * (eta - xi) {
                    return Err(Error::RootFinding(format!(
                        "pole-march residual {resid:.3e} at term {j}"
                    )));
                }
            }
            let b = -1.0 / model.psi_d1(-xi);
            if !(b > 0.0) {
                return Err(Error::Numerical(format!(
                    "residue coefficient B_{j} = {b:.3e} is not positive"
                )));
            }
            b_sum.add(b);
            d_prev = eta - xi;
            eta_prev = eta;
        }
    }
    Ok(c0 - b_sum.value())
}
