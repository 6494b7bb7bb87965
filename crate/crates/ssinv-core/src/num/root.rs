//! Bracketed scalar root-finding.
//!
//! Every root located in this crate sits in an interval with a known sign
//! change (between poles of `ψ`, beyond `Φ(q)`, beyond `a₀`, ...), so the
//! primitives here are bracket-first: geometric bracket expansion, plain
//! bisection to a width tolerance, and a guarded Newton polish that never
//! leaves the bracket and never accepts a step that worsens the residual.

use crate::{Error, Result};

/// Bisection on `[lo, hi]` (must bracket a sign change) down to an
/// absolute width of `xtol`. Returns the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo:.6e}, {hi:.6e}]: f = ({flo:.3e}, {fhi:.3e})"
        )));
    }
    // f64 has ~52 bits of mantissa; 200 halvings always reach resolution.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Guarded Newton refinement of a root already isolated in `[lo, hi]`.
///
/// Steps that leave the bracket or fail to reduce `|f|` are rejected, so
/// the result is never worse than `x0`.
pub fn newton_polish<F, D>(f: F, df: D, x0: f64, lo: f64, hi: f64, iters: usize) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0;
    let mut fx = f(x);
    for _ in 0..iters {
        if fx == 0.0 {
            return x;
        }
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            return x;
        }
        let candidate = x - fx / d;
        if !(candidate > lo && candidate < hi) {
            return x;
        }
        let fc = f(candidate);
        if fc.abs() >= fx.abs() {
            return x;
        }
        x = candidate;
        fx = fc;
    }
    x
}

/// Expand a bracket to the right of `start` in geometric steps until the
/// sign of `f` changes. Returns the bracketing interval `(a, b)` with
/// `f(a)` and `f(b)` of opposite (or zero) sign.
///
/// `f(start)` is evaluated once; `step0` is the first step and each
/// subsequent step is multiplied by `factor`.
pub fn expand_bracket_right<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    step0: f64,
    factor: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    debug_assert!(step0 > 0.0 && factor > 1.0);
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut a = start;
    let mut fa = f0;
    let mut step = step0;
    for _ in 0..max_steps {
        let b = a + step;
        let fb = f(b);
        if !fb.is_finite() {
            return Err(Error::RootFinding(format!(
                "non-finite value while expanding right of {start:.6e}"
            )));
        }
        if fb == 0.0 || fb.signum() != fa.signum() {
            return Ok((a, b));
        }
        a = b;
        fa = fb;
        step *= factor;
    }
    Err(Error::RootFinding(format!(
        "no sign change within {max_steps} geometric steps right of {start:.6e}"
    )))
}

/// Mirror image of [`expand_bracket_right`]: walk left from `start`.
/// Returns `(a, b)` with `a < b = previous point`.
pub fn expand_bracket_left<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    step0: f64,
    factor: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    debug_assert!(step0 > 0.0 && factor > 1.0);
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut b = start;
    let mut fb = f0;
    let mut step = step0;
    for _ in 0..max_steps {
        let a = b - step;
        let fa = f(a);
        if !fa.is_finite() {
            return Err(Error::RootFinding(format!(
                "non-finite value while expanding left of {start:.6e}"
            )));
        }
        if fa == 0.0 || fa.signum() != fb.signum() {
            return Ok((a, b));
        }
        b = a;
        fb = fa;
        step *= factor;
    }
    Err(Error::RootFinding(format!(
        "no sign change within {max_steps} geometric steps left of {start:.6e}"
    )))
}
