//! Exact Poisson central-moment algebra and truncated-support expectations.
//!
//! The central moment of `Poi(λ)` of order `ν ≥ 2` is a polynomial
//! `μ_ν(λ) = ν! Σ_{l=1}^{⌊ν/2⌋} c_{l,ν} λ^l` with positive rational
//! coefficients. Two independent constructions of the `c_{l,ν}` are
//! provided: a recurrence driven by
//! `μ_{v+1}(λ) = v·λ·μ_{v-1}(λ) + λ·dμ_v/dλ`, and a direct partition
//! enumeration obtained by expanding the centered characteristic function
//! with Faà di Bruno's formula. The second serves as an oracle for the
//! first.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::util::{factorial_big, NeumaierSum};

/// Highest supported moment order. Coefficient numerators grow factorially;
/// forty covers every consumer of this crate with room to spare.
pub const MAX_MOMENT_ORDER: u32 = 40;

/// Upper bound accepted for truncation mass tolerances.
pub const MAX_MASS_TOL: f64 = 1e-8;

/// Truncated-summation term guard.
const MAX_TERMS: u64 = 10_000_000;

/// Number of trailing terms that must all be negligible before a truncated
/// sum is allowed to stop; heavy polynomial weights can matter well past
/// the bulk of the distribution.
const TAIL_RUN: u32 = 10;

/// A validated Poisson rate λ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonRate(f64);

impl PoissonRate {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Self(lambda))
        } else {
            Err(Error::InvalidRate(lambda))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Coefficients `c_{l,ν}` of the central-moment polynomial of order `ν`.
///
/// Index 0 of [`coefficients`](Self::coefficients) holds `c_{1,ν}`, and the
/// list has exactly `⌊ν/2⌋` entries. Every coefficient is an exact rational
/// in `(0, 1/l!)`, and `ν!·c_{1,ν} = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentPolynomial {
    order: u32,
    coefficients: Vec<BigRational>,
}

impl MomentPolynomial {
    pub fn order(&self) -> u32 {
        self.order
    }

    /// All coefficients, `c_{1,ν}` first.
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    /// `c_{l,ν}` for `1 ≤ l ≤ ⌊ν/2⌋`.
    pub fn coefficient(&self, l: usize) -> &BigRational {
        &self.coefficients[l - 1]
    }

    /// Evaluates `μ_ν(λ) = ν! Σ c_{l,ν} λ^l` in floating point.
    pub fn eval(&self, lambda: f64) -> f64 {
        let order_fact = crate::util::factorial_f64(self.order as u64);
        // Horner over l = ⌊ν/2⌋ .. 1
        let mut acc = 0.0;
        for c in self.coefficients.iter().rev() {
            acc = acc * lambda + c.to_f64().expect("coefficient fits in f64");
        }
        acc * lambda * order_fact
    }

    /// Evaluates the polynomial exactly at a rational rate.
    pub fn eval_exact(&self, lambda: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coefficients.iter().rev() {
            acc = acc * lambda + c;
        }
        acc * lambda * BigRational::from_integer(factorial_big(self.order as u64))
    }

    /// CSV rows `nu,l,numerator,denominator`, one per coefficient.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.coefficients.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.order,
                i + 1,
                c.numer(),
                c.denom()
            ));
        }
        out
    }
}

fn check_order(order: u32) -> Result<()> {
    if (2..=MAX_MOMENT_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::OrderOutOfRange {
            order,
            min: 2,
            max: MAX_MOMENT_ORDER,
        })
    }
}

/// Full central-moment polynomials μ_0..μ_MAX as coefficient vectors in λ
/// (index = power of λ), built once.
fn moment_table() -> &'static Vec<Vec<BigRational>> {
    static TABLE: OnceLock<Vec<Vec<BigRational>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let one = BigRational::from_integer(BigInt::from(1));
        let mut mu: Vec<Vec<BigRational>> = Vec::with_capacity(MAX_MOMENT_ORDER as usize + 1);
        mu.push(vec![one]); // μ_0 = 1
        mu.push(vec![BigRational::zero()]); // μ_1 = 0
        for v in 1..MAX_MOMENT_ORDER as usize {
            // μ_{v+1} = v·λ·μ_{v-1} + λ·dμ_v/dλ
            let len = mu[v - 1].len().max(mu[v].len()) + 1;
            let mut next = vec![BigRational::zero(); len];
            for (power, coeff) in mu[v - 1].iter().enumerate() {
                next[power + 1] += coeff * BigInt::from(v);
            }
            for (power, coeff) in mu[v].iter().enumerate() {
                next[power] += coeff * BigInt::from(power);
            }
            while next.len() > 1 && next.last().is_some_and(|c| c.is_zero()) {
                next.pop();
            }
            mu.push(next);
        }
        mu
    })
}

/// Coefficients of `μ_ν(λ)` via the moment recurrence.
pub fn moment_coefficients(order: u32) -> Result<MomentPolynomial> {
    check_order(order)?;
    let mu = &moment_table()[order as usize];
    let fact = BigRational::from_integer(factorial_big(order as u64));
    let half = (order / 2) as usize;
    debug_assert_eq!(mu.len(), half + 1);
    debug_assert!(mu[0].is_zero());
    let coefficients = (1..=half).map(|l| &mu[l] / &fact).collect();
    Ok(MomentPolynomial {
        order,
        coefficients,
    })
}

/// Independent reconstruction of the same coefficients by enumerating the
/// partitions of `ν` into parts of size at least two:
/// `c_{l,ν} = Σ ∏_m 1/(k_m!·(m!)^{k_m})` over multiplicities `k_2..k_ν`
/// with `Σ m·k_m = ν` and `Σ k_m = l`.
pub fn moment_coefficients_bruno(order: u32) -> Result<MomentPolynomial> {
    check_order(order)?;
    let half = (order / 2) as usize;
    let mut coefficients = vec![BigRational::zero(); half];

    // DFS over part sizes m = 2..=order with multiplicities.
    fn descend(
        part: usize,
        remaining: usize,
        parts_used: usize,
        weight: &BigRational,
        out: &mut [BigRational],
    ) {
        if remaining == 0 {
            out[parts_used - 1] += weight;
            return;
        }
        if part > remaining {
            return;
        }
        let part_fact = BigRational::from_integer(factorial_big(part as u64));
        let mut multiplicity_fact = BigInt::from(1);
        let mut w = weight.clone();
        let mut used = remaining;
        // multiplicity k of this part size, k = 0 first (skip to next size)
        descend(part + 1, remaining, parts_used, weight, out);
        let mut k = 0u64;
        while used >= part {
            used -= part;
            k += 1;
            multiplicity_fact *= k;
            w /= &part_fact;
            let w_k = &w / BigRational::from_integer(multiplicity_fact.clone());
            descend(part + 1, used, parts_used + k as usize, &w_k, out);
        }
    }

    let one = BigRational::from_integer(BigInt::from(1));
    descend(2, order as usize, 0, &one, &mut coefficients);
    Ok(MomentPolynomial {
        order,
        coefficients,
    })
}

/// `μ_ν(λ)` in floating point.
pub fn central_moment(order: u32, rate: PoissonRate) -> Result<f64> {
    Ok(moment_coefficients(order)?.eval(rate.get()))
}

/// `μ_ν(λ)` exactly, for rational λ.
pub fn central_moment_exact(order: u32, lambda: &BigRational) -> Result<BigRational> {
    if !lambda.is_positive() {
        return Err(Error::InvalidRate(lambda.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(moment_coefficients(order)?.eval_exact(lambda))
}

/// `E ξ̃^ν = μ_ν(λ)/λ^{ν/2}` for the standardized cell variable
/// `ξ̃ = (ξ − λ)/√λ`.
pub fn standardized_moment(order: u32, rate: PoissonRate) -> Result<f64> {
    let lambda = rate.get();
    Ok(central_moment(order, rate)? / lambda.powf(order as f64 / 2.0))
}

fn check_mass_tol(mass_tol: f64) -> Result<()> {
    if mass_tol > 0.0 && mass_tol <= MAX_MASS_TOL {
        Ok(())
    } else {
        Err(Error::InvalidMassTolerance {
            got: mass_tol,
            max: MAX_MASS_TOL,
        })
    }
}

/// Brute-force `E (ξ−λ)^ν` by truncated summation over the Poisson support.
/// Test oracle for the polynomial path; `ν = 0` and `ν = 1` are allowed.
pub fn central_moment_oracle(order: u32, rate: PoissonRate, mass_tol: f64) -> Result<f64> {
    let lambda = rate.get();
    if lambda > 1e6 {
        return Err(Error::ArgumentOutOfRange {
            name: "lambda",
            value: lambda,
            requirement: "oracle supports lambda <= 1e6",
        });
    }
    let [m] = poisson_expectations(lambda, mass_tol, |j| {
        [(j as f64 - lambda).powi(order as i32)]
    })?;
    Ok(m)
}

/// Truncated `E f(ξ)` for `ξ ~ Poi(λ)`.
pub fn poisson_expectation<F: FnMut(u64) -> f64>(
    lambda: f64,
    mass_tol: f64,
    mut f: F,
) -> Result<f64> {
    let [v] = poisson_expectations(lambda, mass_tol, |j| [f(j)])?;
    Ok(v)
}

/// Truncated expectations of `K` functions of the same Poisson variable in
/// one sweep. The sweep stops once the accumulated probability mass reaches
/// `1 − mass_tol` and the last [`TAIL_RUN`] terms of every component were
/// each below `mass_tol` relative to that component's accumulated magnitude.
pub fn poisson_expectations<const K: usize, F: FnMut(u64) -> [f64; K]>(
    lambda: f64,
    mass_tol: f64,
    mut f: F,
) -> Result<[f64; K]> {
    check_mass_tol(mass_tol)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidRate(lambda));
    }

    // Linear-domain pmf recurrence is safe while e^{-λ} stays normal;
    // beyond that each pmf value is taken through the log domain.
    let linear = lambda < 700.0;
    let ln_lambda = lambda.ln();
    let mut pmf = if linear { (-lambda).exp() } else { 0.0 };

    let mut sums = [NeumaierSum::new(); K];
    let mut abs_sums = [0.0f64; K];
    let mut mass = NeumaierSum::new();
    let mut small_run = 0u32;

    let mut j = 0u64;
    loop {
        let p = if linear {
            if j > 0 {
                pmf *= lambda / j as f64;
            }
            pmf
        } else {
            (-lambda + j as f64 * ln_lambda - statrs::function::gamma::ln_gamma(j as f64 + 1.0))
                .exp()
        };
        mass.add(p);
        let values = f(j);
        let mut all_small = true;
        for k in 0..K {
            let term = values[k] * p;
            sums[k].add(term);
            abs_sums[k] += term.abs();
            if term.abs() > mass_tol * (abs_sums[k] + f64::MIN_POSITIVE) {
                all_small = false;
            }
        }
        small_run = if all_small { small_run + 1 } else { 0 };
        if mass.value() >= 1.0 - mass_tol && small_run >= TAIL_RUN {
            break;
        }
        j += 1;
        if j >= MAX_TERMS {
            return Err(Error::TruncationFailure {
                lambda,
                terms: MAX_TERMS,
            });
        }
    }

    let mut out = [0.0f64; K];
    for k in 0..K {
        out[k] = sums[k].value();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn variance_polynomial() {
        let p = moment_coefficients(2).unwrap();
        assert_eq!(p.coefficients(), &[rational(1, 2)]);
        assert_eq!(p.eval(7.3), 7.3);
    }

    #[test]
    fn fourth_order_coefficients() {
        let p = moment_coefficients(4).unwrap();
        assert_eq!(p.coefficients(), &[rational(1, 24), rational(1, 8)]);
        // μ₄ = λ + 3λ²
        assert_eq!(p.eval(2.0), 14.0);
    }

    #[test]
    fn sixth_order_coefficients() {
        let p = moment_coefficients(6).unwrap();
        assert_eq!(
            p.coefficients(),
            &[rational(1, 720), rational(25, 720), rational(1, 48)]
        );
        // μ₆ = λ + 25λ² + 15λ³
        assert_eq!(p.eval(1.0), 41.0);
    }

    #[test]
    fn bruno_hand_enumerations() {
        // ν=2: single partition {2}
        let p2 = moment_coefficients_bruno(2).unwrap();
        assert_eq!(p2.coefficients(), &[rational(1, 2)]);
        // ν=4: partitions {4} and {2,2}
        let p4 = moment_coefficients_bruno(4).unwrap();
        assert_eq!(p4.coefficients(), &[rational(1, 24), rational(1, 8)]);
        // ν=5: {5} and {2,3} → μ₅ = λ + 10λ²
        let p5 = moment_coefficients_bruno(5).unwrap();
        assert_eq!(p5.coefficients(), &[rational(1, 120), rational(1, 12)]);
    }

    #[test]
    fn recursion_matches_bruno_everywhere() {
        for order in 2..=MAX_MOMENT_ORDER {
            assert_eq!(
                moment_coefficients(order).unwrap(),
                moment_coefficients_bruno(order).unwrap(),
                "coefficient mismatch at order {order}"
            );
        }
    }

    #[test]
    fn coefficient_bounds_exact() {
        for order in 2..=MAX_MOMENT_ORDER {
            let p = moment_coefficients(order).unwrap();
            let fact = BigRational::from_integer(factorial_big(order as u64));
            assert!((&fact * p.coefficient(1)).is_one(), "ν!·c_1 ≠ 1 at ν={order}");
            let mut l_fact = BigInt::from(1);
            for (i, c) in p.coefficients().iter().enumerate() {
                l_fact *= i as u64 + 1;
                assert!(c.is_positive(), "c_{{{},{}}} not positive", i + 1, order);
                let bound = BigRational::new(BigInt::from(1), l_fact.clone());
                assert!(c < &bound, "c_{{{},{}}} ≥ 1/l!", i + 1, order);
            }
        }
    }

    #[test]
    fn growth_inequalities_on_grid() {
        // μ_ν ≤ μ_{ν+1} ≤ (νλ + ⌊ν/2⌋)μ_ν, and for the two-step bound
        // (ν+1)λμ_ν < μ_{ν+2} ≤ [(3ν+1)λ + ⌊ν/2⌋(⌊ν/2⌋+1)]μ_ν for all
        // ν ≥ 2. The tighter constant 2ν(λ+ν) holds for even ν only: at
        // ν=3, λ=5 it gives 240 while μ₅ = 255. All checks are exact.
        let grid = [
            rational(1, 10),
            rational(1, 2),
            rational(1, 1),
            rational(2, 1),
            rational(5, 1),
            rational(10, 1),
            rational(50, 1),
            rational(100, 1),
        ];
        for lambda in &grid {
            for order in 2..=20u32 {
                let lo = central_moment_exact(order, lambda).unwrap();
                let mid = central_moment_exact(order + 1, lambda).unwrap();
                let hi = central_moment_exact(order + 2, lambda).unwrap();
                let half = BigRational::from_integer(BigInt::from(order / 2));
                let ord = BigRational::from_integer(BigInt::from(order));
                assert!(lo <= mid, "μ_ν ≤ μ_ν+1 fails at ν={order}, λ={lambda}");
                assert!(
                    mid <= (&ord * lambda + &half) * &lo,
                    "upper bound fails at ν={order}, λ={lambda}"
                );
                let ord1 = BigRational::from_integer(BigInt::from(order + 1));
                assert!(
                    &ord1 * lambda * &lo < hi,
                    "two-step lower bound fails at ν={order}, λ={lambda}"
                );
                let slope = BigRational::from_integer(BigInt::from(3 * order + 1));
                let offset = &half * (&half + BigRational::from_integer(BigInt::from(1)));
                assert!(
                    hi <= (&slope * lambda + &offset) * &lo,
                    "two-step upper bound fails at ν={order}, λ={lambda}"
                );
                if order % 2 == 0 {
                    let two_ord =
                        BigRational::from_integer(BigInt::from(2 * order)) * (lambda + &ord);
                    assert!(
                        hi <= &two_ord * &lo,
                        "even-order two-step bound fails at ν={order}, λ={lambda}"
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_basics() {
        let rate = PoissonRate::new(5.0).unwrap();
        assert!((central_moment_oracle(0, rate, 1e-15).unwrap() - 1.0).abs() < 1e-12);
        assert!(central_moment_oracle(1, rate, 1e-15).unwrap().abs() < 1e-12);
        let rate2 = PoissonRate::new(2.0).unwrap();
        assert!((central_moment_oracle(4, rate2, 1e-15).unwrap() - 14.0).abs() < 1e-10);
    }

    #[test]
    fn polynomial_agrees_with_oracle() {
        for &lambda in &[0.1, 0.5, 1.0, 3.7, 10.0, 41.5, 100.0] {
            let rate = PoissonRate::new(lambda).unwrap();
            for order in 2..=12u32 {
                let poly = central_moment(order, rate).unwrap();
                let oracle = central_moment_oracle(order, rate, 1e-14).unwrap();
                let scale = poly.abs().max(1e-300);
                assert!(
                    ((poly - oracle) / scale).abs() < 1e-9,
                    "ν={order}, λ={lambda}: poly={poly}, oracle={oracle}"
                );
            }
        }
    }

    #[test]
    fn standardized_moments() {
        for &lambda in &[0.3, 1.0, 4.0, 9.0] {
            let rate = PoissonRate::new(lambda).unwrap();
            assert!((standardized_moment(2, rate).unwrap() - 1.0).abs() < 1e-14);
        }
        let r1 = PoissonRate::new(1.0).unwrap();
        assert!((standardized_moment(4, r1).unwrap() - 4.0).abs() < 1e-12);
        let r4 = PoissonRate::new(4.0).unwrap();
        assert!((standardized_moment(3, r4).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absolute_moment_interpolation() {
        // E|ξ̂|^ℓ ≤ (E ξ̂^{ℓ+1})^{ℓ/(ℓ+1)} for odd ℓ (even ℓ+1), where
        // ξ̂ = (ξ−λ)/λ; checked against direct truncated sums.
        for &lambda in &[0.5, 1.0, 2.0, 5.0, 20.0] {
            for l in [1u32, 3, 5, 7] {
                let [abs_l, plain_l1] = poisson_expectations(lambda, 1e-14, |j| {
                    let xhat = (j as f64 - lambda) / lambda;
                    [xhat.abs().powi(l as i32), xhat.powi(l as i32 + 1)]
                })
                .unwrap();
                let bound = plain_l1.powf(l as f64 / (l as f64 + 1.0));
                assert!(
                    abs_l <= bound * (1.0 + 1e-12),
                    "ℓ={l}, λ={lambda}: {abs_l} > {bound}"
                );
            }
        }
    }

    #[test]
    fn order_range_errors() {
        assert!(matches!(
            moment_coefficients(1),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            moment_coefficients(MAX_MOMENT_ORDER + 1),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            moment_coefficients_bruno(0),
            Err(Error::OrderOutOfRange { .. })
        ));
    }

    #[test]
    fn mass_tol_validation() {
        let rate = PoissonRate::new(1.0).unwrap();
        assert!(central_moment_oracle(2, rate, 0.0).is_err());
        assert!(central_moment_oracle(2, rate, 1e-7).is_err());
    }

    #[test]
    fn csv_dump_shape() {
        let rows = moment_coefficients(6).unwrap().csv_rows();
        assert_eq!(rows, "6,1,1,720\n6,2,5,144\n6,3,1,48\n");
    }

    #[test]
    fn large_rate_uses_log_domain() {
        let rate = PoissonRate::new(2000.0).unwrap();
        let v = central_moment_oracle(2, rate, 1e-12).unwrap();
        assert!((v / 2000.0 - 1.0).abs() < 1e-9, "got {v}");
    }
}
