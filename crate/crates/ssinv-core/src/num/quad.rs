//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 15-point Kronrod rule with embedded 7-point Gauss rule supplies the
//! per-segment value and error estimate; segments are split greedily by
//! largest estimated error until the requested tolerance is met. Two
//! wrappers cover the shapes that appear in the cost transforms:
//!
//! * [`integrate_to_inf`] — upper limit `+∞` for integrands with
//!   (eventually) exponential decay, summed over width-doubling blocks;
//! * [`integrate_algebraic_left`] — an integrable algebraic singularity at
//!   the left endpoint (e.g. `x^{-0.8}`), handled by geometrically shrinking
//!   blocks toward the endpoint.

use crate::num::sum::Accumulator;
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Positive abscissae of the 15-point Kronrod rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

/// 7-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature call: value and an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    /// Integral of `|f|`, accumulated alongside the value: the scale
    /// against which roundoff limits any further error reduction.
    pub absf: f64,
}

/// One Gauss–Kronrod 7-15 evaluation on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quad {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);

    let fc = f(mid);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut resabs = resk.abs();

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        let fsum = f1 + f2;
        resk += WGK[j] * fsum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
    }

    // Rescaled error estimate in the QUADPACK style: sharp on smooth
    // integrands, conservative when the Gauss/Kronrod values disagree.
    let diff = ((resk - resg) * half).abs();
    let resabs = resabs * half.abs();
    let err = if diff == 0.0 {
        f64::EPSILON * resabs
    } else {
        let scaled = (200.0 * diff / resabs.max(f64::MIN_POSITIVE)).powf(1.5);
        if scaled < 1.0 {
            diff.max(resabs * scaled)
        } else {
            diff.max(resabs.min(diff * 200.0))
        }
        .max(f64::EPSILON * resabs)
    };

    Quad {
        value: resk * half,
        error: err.max(diff),
        absf: resabs,
    }
}

/// Segment stored in the refinement heap, ordered by error estimate.
struct Segment {
    a: f64,
    b: f64,
    q: Quad,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
///
/// Splits the segment with the largest error estimate until the summed
/// error drops below `max(abs_tol, rel_tol · |value|)` or `max_segments`
/// is reached (in which case an error is returned). The tolerance is
/// floored at `50 ε ∫|f|`: when cancellation leaves `|value| ≪ ∫|f|`, a
/// purely relative target would demand less than the roundoff noise of
/// summing the segments, which no amount of refinement delivers.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0, absf: 0.0 });
    }
    if a > b {
        let q = integrate(f, b, a, rel_tol, abs_tol, max_segments)?;
        return Ok(Quad { value: -q.value, error: q.error, absf: q.absf });
    }

    let first = gk15(&f, a, b);
    if !first.value.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    let mut total_val = first.value;
    let mut total_err = first.error;
    let mut total_absf = first.absf;
    heap.push(Segment { a, b, q: first });

    let mut n_segments = 1usize;
    loop {
        let tol = abs_tol
            .max(rel_tol * total_val.abs())
            .max(50.0 * f64::EPSILON * total_absf);
        if total_err <= tol {
            return Ok(Quad { value: total_val, error: total_err, absf: total_absf });
        }
        if n_segments >= max_segments {
            return Err(Error::Quadrature(format!(
                "error {total_err:.3e} above tolerance {tol:.3e} after {n_segments} segments"
            )));
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at floating-point resolution; accept what we have.
            total_err = total_err.min(tol);
            return Ok(Quad { value: total_val, error: total_err, absf: total_absf });
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        if !(left.value.is_finite() && right.value.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{}, {}]",
                worst.a, worst.b
            )));
        }
        total_val += left.value + right.value - worst.q.value;
        total_err += left.error + right.error - worst.q.error;
        total_absf += left.absf + right.absf - worst.q.absf;
        heap.push(Segment { a: worst.a, b: mid, q: left });
        heap.push(Segment { a: mid, b: worst.b, q: right });
        n_segments += 1;
    }
}

/// Integration of `f` over `[a, ∞)` for integrands with eventually
/// exponential decay.
///
/// Sums adaptive integrals over blocks of doubling width and stops once
/// two consecutive blocks contribute less than a quarter of the target
/// tolerance each.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    let mut acc = Accumulator::new();
    let mut err_acc = 0.0;
    let mut absf_acc = 0.0;
    let mut lo = a;
    let mut width = 1.0;
    let mut small_blocks = 0u32;
    for _ in 0..64 {
        let hi = lo + width;
        let q = integrate(&f, lo, hi, rel_tol, abs_tol * 0.1, 400)?;
        acc.add(q.value);
        err_acc += q.error;
        absf_acc += q.absf;
        let tol = abs_tol.max(rel_tol * acc.value().abs());
        if q.value.abs() < 0.25 * tol {
            small_blocks += 1;
            if small_blocks >= 2 {
                return Ok(Quad { value: acc.value(), error: err_acc, absf: absf_acc });
            }
        } else {
            small_blocks = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Quadrature(
        "semi-infinite integral did not settle within 64 blocks".into(),
    ))
}

/// Integration of `f` over `(a, b]` when `f(x) ~ c·(x-a)^p` near `a`
/// with a known exponent `p > -1` (integrable algebraic singularity).
///
/// Substituting `x = a + (b-a) u^m` with `m ≥ 2/(1+p)` turns the
/// integrand into `m (b-a) u^{m(1+p)-1} g(·)` with a vanishing (or at
/// worst bounded) factor at `u = 0`, which the adaptive rule resolves to
/// full precision. Also valid for `p ≥ 0` (then `m = 1`, plain
/// integration).
///
/// `f` must be well-conditioned near `a`: if it internally re-derives
/// `x - a` by subtraction the singular factor is evaluated with amplified
/// rounding error and the quadrature stalls at that noise floor. All uses
/// in this crate have `a = 0` with integrands written directly in `x`.
pub fn integrate_power_left<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    p: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    if !(b > a) {
        return Ok(Quad { value: 0.0, error: 0.0, absf: 0.0 });
    }
    if !(p > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "integrate_power_left needs exponent > -1, got {p}"
        )));
    }
    let span = b - a;
    if p >= 1.0 {
        return integrate(f, a, b, rel_tol, abs_tol, 800);
    }
    // m(1+p) - 1 ≥ 1 makes the mapped integrand vanish at u = 0.
    let m = (2.0 / (1.0 + p)).ceil().max(2.0);
    let mapped = |u: f64| {
        let x = a + span * u.powf(m);
        if x <= a {
            // Underflowed into the endpoint: the true mapped integrand
            // carries a positive power of u here, so it is negligible.
            return 0.0;
        }
        m * span * u.powf(m - 1.0) * f(x)
    };
    integrate(mapped, 0.0, 1.0, rel_tol, abs_tol, 800)
}
