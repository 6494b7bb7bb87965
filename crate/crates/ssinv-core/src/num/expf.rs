//! Stable evaluation of the exponential moment kernels
//!
//! ```text
//!     e0(t) = (1 − e^{−t})/t           = ∫_0^1 e^{−t u} du,
//!     e1(t) = (1 − (1+t) e^{−t})/t²    = ∫_0^1 u e^{−t u} du,
//!     e2(t) = (2 − (2+2t+t²) e^{−t})/t³ = ∫_0^1 u² e^{−t u} du,
//!     ec(t) = (e^{−t} − 1 + t)/t²,
//! ```
//!
//! for t ≥ 0. The closed forms lose all precision near t = 0 (the
//! numerators vanish to second or third order), so below a fixed
//! crossover each function switches to its Taylor series, truncated
//! where the next term is below 1e−14 relative. All four are positive
//! and decreasing on [0, ∞) with e0 → 1, e1 → 1/2, e2 → 1/3, ec → 1/2
//! at the origin.

const CROSSOVER: f64 = 0.15;

/// (1 − e^{−t})/t, the mean of e^{−tU} for U uniform on (0,1).
pub fn e0(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t == 0.0 {
        1.0
    } else {
        -(-t).exp_m1() / t
    }
}

/// (1 − (1+t)e^{−t})/t² = ∫_0^1 u e^{−tu} du.
pub fn e1(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < CROSSOVER {
        // sum_{m>=0} (-1)^m (m+1)/(m+2)! t^m
        let c = [
            0.5,
            -1.0 / 3.0,
            1.0 / 8.0,
            -1.0 / 30.0,
            1.0 / 144.0,
            -1.0 / 840.0,
            1.0 / 5760.0,
            -1.0 / 45360.0,
            1.0 / 403200.0,
        ];
        horner(t, &c)
    } else {
        (1.0 - (1.0 + t) * (-t).exp()) / (t * t)
    }
}

/// (2 − (2+2t+t²)e^{−t})/t³ = ∫_0^1 u² e^{−tu} du.
pub fn e2(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < CROSSOVER {
        // sum_{m>=0} (-1)^m (m+1)(m+2)/(m+3)! t^m
        let c = [
            1.0 / 3.0,
            -0.25,
            0.1,
            -1.0 / 36.0,
            1.0 / 168.0,
            -1.0 / 960.0,
            1.0 / 6480.0,
            -1.0 / 50400.0,
            1.0 / 443520.0,
        ];
        horner(t, &c)
    } else {
        (2.0 - (2.0 + 2.0 * t + t * t) * (-t).exp()) / (t * t * t)
    }
}

/// (e^{t} − 1 − t)/t², the compensated remainder of the *growing*
/// exponential; the Taylor series Σ t^m/(m+2)! has all-positive terms.
pub fn ecp(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < CROSSOVER {
        let c = [
            0.5,
            1.0 / 6.0,
            1.0 / 24.0,
            1.0 / 120.0,
            1.0 / 720.0,
            1.0 / 5040.0,
            1.0 / 40320.0,
            1.0 / 362880.0,
            1.0 / 3628800.0,
        ];
        horner(t, &c)
    } else {
        (t.exp_m1() - t) / (t * t)
    }
}

/// (e^{−t} − 1 + t)/t², the compensated exponential remainder.
pub fn ec(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < CROSSOVER {
        // sum_{m>=0} (-1)^m/(m+2)! t^m
        let c = [
            0.5,
            -1.0 / 6.0,
            1.0 / 24.0,
            -1.0 / 120.0,
            1.0 / 720.0,
            -1.0 / 5040.0,
            1.0 / 40320.0,
            -1.0 / 362880.0,
            1.0 / 3628800.0,
        ];
        horner(t, &c)
    } else {
        (t + (-t).exp_m1()) / (t * t)
    }
}

fn horner(t: f64, coeffs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_values_at_one() {
        let e = std::f64::consts::E;
        assert_relative_eq!(e0(1.0), 1.0 - 1.0 / e, max_relative = 1e-15);
        assert_relative_eq!(e1(1.0), 1.0 - 2.0 / e, max_relative = 1e-14);
        assert_relative_eq!(e2(1.0), 2.0 - 5.0 / e, max_relative = 1e-14);
        assert_relative_eq!(ec(1.0), 1.0 / e, max_relative = 1e-14);
        assert_relative_eq!(ecp(1.0), e - 2.0, max_relative = 1e-14);
    }

    #[test]
    fn limits_at_zero() {
        assert_eq!(e0(0.0), 1.0);
        assert_relative_eq!(e1(0.0), 0.5);
        assert_relative_eq!(e2(0.0), 1.0 / 3.0);
        assert_relative_eq!(ec(0.0), 0.5);
        assert_relative_eq!(ecp(0.0), 0.5);
    }

    // Branch agreement at the crossover is covered by the quadrature
    // points just below and above it in `quadrature_consistency`.

    #[test]
    fn quadrature_consistency() {
        // e_n(t) = ∫_0^1 u^n e^{-tu} du for a few t spanning the branches.
        use crate::num::quad::integrate;
        // 0.149/0.151 sit just either side of the series/closed-form switch.
        for &t in &[0.01, 0.1, 0.149, 0.151, 0.5, 3.0, 40.0] {
            let q0 = integrate(|u| (-t * u).exp(), 0.0, 1.0, 1e-13, 1e-15, 200).unwrap();
            let q1 = integrate(|u| u * (-t * u).exp(), 0.0, 1.0, 1e-13, 1e-15, 200).unwrap();
            let q2 = integrate(|u| u * u * (-t * u).exp(), 0.0, 1.0, 1e-13, 1e-15, 200).unwrap();
            assert_relative_eq!(e0(t), q0.value, max_relative = 1e-12);
            assert_relative_eq!(e1(t), q1.value, max_relative = 1e-12);
            assert_relative_eq!(e2(t), q2.value, max_relative = 1e-12);
            // ecp(t) = ∫_0^1 (1-u) e^{tu} du (growing kernel).
            let qp = integrate(|u| (1.0 - u) * (t * u).exp(), 0.0, 1.0, 1e-13, 1e-15, 200).unwrap();
            assert_relative_eq!(ecp(t), qp.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn positive_decreasing() {
        let mut prev = [f64::INFINITY; 4];
        for k in 0..200 {
            let t = 0.05 * k as f64;
            let vals = [e0(t), e1(t), e2(t), ec(t)];
            for (v, p) in vals.iter().zip(prev.iter()) {
                assert!(*v > 0.0 && *v <= *p);
            }
            prev = vals;
        }
    }
}
