//! Compensated (Neumaier) summation.
//!
//! The scale-function kernels are alternating-ish exponential sums whose
//! leading terms can exceed the result by several orders of magnitude near
//! the boundary, so plain accumulation loses digits exactly where the
//! policy solver needs them. Neumaier's variant of Kahan summation keeps
//! the running error term correct even when the next summand is larger
//! than the running total.

/// Accumulator for Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    /// Fresh accumulator at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one term.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        // Once the total leaves the finite range the compensation
        // arithmetic degenerates (inf − inf = NaN); keep the overflow
        // honest instead of poisoning the sum.
        if t.is_finite() {
            if self.sum.abs() >= x.abs() {
                self.comp += (self.sum - t) + x;
            } else {
                self.comp += (x - t) + self.sum;
            }
        }
        self.sum = t;
    }

    /// Current compensated total.
    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of terms.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = Accumulator::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancels_large_terms() {
        // 1 + 1e100 - 1e100 + 1: plain f64 addition returns 2 only by luck
        // of ordering; the compensated sum must return 2 in this order.
        let s = neumaier_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn matches_plain_sum_on_benign_input() {
        let terms: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        let plain: f64 = terms.iter().sum();
        let comp = neumaier_sum(terms.iter().copied());
        assert!((plain - comp).abs() < 1e-12);
    }

    #[test]
    fn overflow_stays_infinite_not_nan() {
        let mut acc = Accumulator::new();
        acc.add(1.0);
        acc.add(f64::MAX);
        acc.add(f64::MAX);
        acc.add(-3.0);
        assert_eq!(acc.value(), f64::INFINITY);
    }

    #[test]
    fn accumulator_incremental_use() {
        let mut acc = Accumulator::new();
        for k in 0..10_000 {
            acc.add(0.1 + k as f64 * 0.0);
        }
        assert!((acc.value() - 1000.0).abs() < 1e-9);
    }
}
