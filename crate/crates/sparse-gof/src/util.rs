//! Small numeric helpers shared across modules.

use num_bigint::BigInt;
use num_rational::BigRational;

/// Neumaier compensated accumulator. Summation results do not depend on
/// how callers interleave partial sums as long as the term order is fixed,
/// and the compensation keeps long per-cell reductions accurate.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.compensation += (self.sum - t) + term;
        } else {
            self.compensation += (term - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator of terms.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// n! as an exact big integer.
pub fn factorial_big(n: u64) -> BigInt {
    let mut acc = BigInt::from(1u32);
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// n! in f64; exact through n = 22, then correctly rounded products.
pub fn factorial_f64(n: u64) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Binomial coefficient with saturation, used for enumeration guards.
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Exact rational from a finite f64. Panics on NaN/inf, which callers
/// exclude by validation.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut s = NeumaierSum::new();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn factorials_agree() {
        for n in 0..=20u64 {
            let big = factorial_big(n);
            assert_eq!(big.to_string(), format!("{}", factorial_f64(n) as u128));
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial_u128(3, 1), 3);
        assert_eq!(binomial_u128(11, 3), 165);
        assert_eq!(binomial_u128(23, 7), 245157);
    }
}
