//! Moment/cumulant transforms, independent-sum combination, and
//! factorial-decay certificates for normal tail approximation.
//!
//! The forward transform is the partition sum
//! `C_k = k! Σ (−1)^{M−1}(M−1)! ∏_l (1/m_l!)(α_l/l!)^{m_l}` over all
//! non-negative `m_1..m_k` with `Σ l·m_l = k` and `M = Σ m_l`. The inverse
//! uses the binomial recursion `α_k = Σ_j C(k−1, j−1)·C_j·α_{k−j}`, so
//! round trips cross-check two genuinely different routes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::{factorial_big, factorial_f64};

/// Transform order cap in floating point; factorial weights exhaust double
/// precision beyond this.
pub const MAX_TRANSFORM_ORDER: usize = 20;

/// Transform order cap in exact-rational mode.
pub const MAX_TRANSFORM_ORDER_EXACT: usize = 40;

/// Tolerance used when checking that a cumulant vector is standardized.
const STANDARDIZED_TOL: f64 = 1e-9;

/// Raw moments `α_1..α_K` of a random variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MomentVector(Vec<f64>);

impl MomentVector {
    /// Requires `K ≥ 2` and a non-negative implied variance `α₂ − α₁²`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::ShapeMismatch {
                expected: 2,
                actual: values.len(),
            });
        }
        let variance = values[1] - values[0] * values[0];
        if variance < -1e-9 * values[1].abs().max(1.0) {
            return Err(Error::ArgumentOutOfRange {
                name: "alpha_2",
                value: values[1],
                requirement: "second moment must dominate the squared mean",
            });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cumulants `C_1..C_K` of a random variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CumulantVector(Vec<f64>);

impl CumulantVector {
    /// Requires `K ≥ 2` and `C₂ ≥ 0`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::ShapeMismatch {
                expected: 2,
                actual: values.len(),
            });
        }
        if values[1] < -1e-9 * values[1].abs().max(1.0) {
            return Err(Error::ArgumentOutOfRange {
                name: "C_2",
                value: values[1],
                requirement: "second cumulant is a variance and cannot be negative",
            });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Certificate that `|C_k| ≤ (k!)^{1+ν} Δ^{−(k−2)}` holds for
/// `3 ≤ k ≤ max_order` (all orders when `max_order` is `None`).
#[derive(Debug, Clone, Serialize)]
pub struct DeltaCertificate {
    pub delta: f64,
    /// Condition exponent; this crate works at ν = 1 throughout.
    pub nu: f64,
    /// Highest cumulant order actually checked.
    pub max_order: Option<usize>,
}

impl DeltaCertificate {
    /// Re-asserts the defining inequality against a cumulant vector.
    pub fn holds_for(&self, cumulants: &CumulantVector) -> bool {
        cumulants.values().iter().enumerate().skip(2).all(|(i, c)| {
            let k = i + 1;
            if let Some(max) = self.max_order {
                if k > max {
                    return true;
                }
            }
            let fact = factorial_f64(k as u64);
            let bound = fact.powf(1.0 + self.nu) * self.delta.powi(-(k as i32 - 2));
            c.abs() <= bound * (1.0 + 1e-9)
        })
    }
}

/// Calls `visit` with each multiset `{(part, multiplicity)}` forming a
/// partition of `k`.
fn for_each_partition(k: usize, visit: &mut impl FnMut(&[(usize, usize)])) {
    fn descend(
        remaining: usize,
        max_part: usize,
        stack: &mut Vec<(usize, usize)>,
        visit: &mut impl FnMut(&[(usize, usize)]),
    ) {
        if remaining == 0 {
            visit(stack);
            return;
        }
        for part in (1..=max_part.min(remaining)).rev() {
            let mut used = 0;
            let mut mult = 0;
            while used + part <= remaining {
                used += part;
                mult += 1;
                stack.push((part, mult));
                descend(remaining - used, part - 1, stack, visit);
                stack.pop();
            }
        }
    }
    let mut stack = Vec::new();
    descend(k, k, &mut stack, visit);
}

/// Raw moments → cumulants via the partition sum.
pub fn moments_to_cumulants(moments: &MomentVector) -> Result<CumulantVector> {
    let k_max = moments.len();
    if k_max > MAX_TRANSFORM_ORDER {
        return Err(Error::OrderOutOfRange {
            order: k_max as u32,
            min: 2,
            max: MAX_TRANSFORM_ORDER as u32,
        });
    }
    let alpha = moments.values();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut total = 0.0;
        for_each_partition(k, &mut |parts| {
            let m_total: usize = parts.iter().map(|&(_, m)| m).sum();
            let sign = if m_total % 2 == 1 { 1.0 } else { -1.0 };
            let mut term = sign * factorial_f64(m_total as u64 - 1);
            for &(l, m) in parts {
                term /= factorial_f64(m as u64);
                term *= (alpha[l - 1] / factorial_f64(l as u64)).powi(m as i32);
            }
            total += term;
        });
        out.push(total * factorial_f64(k as u64));
    }
    CumulantVector::new(out)
}

/// Exact-rational forward transform; lifts the order cap to
/// [`MAX_TRANSFORM_ORDER_EXACT`].
pub fn moments_to_cumulants_exact(moments: &[BigRational]) -> Result<Vec<BigRational>> {
    let k_max = moments.len();
    if k_max < 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            actual: k_max,
        });
    }
    if k_max > MAX_TRANSFORM_ORDER_EXACT {
        return Err(Error::OrderOutOfRange {
            order: k_max as u32,
            min: 2,
            max: MAX_TRANSFORM_ORDER_EXACT as u32,
        });
    }
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut total = BigRational::zero();
        for_each_partition(k, &mut |parts| {
            let m_total: usize = parts.iter().map(|&(_, m)| m).sum();
            let mut term =
                BigRational::from_integer(factorial_big(m_total as u64 - 1));
            if m_total.is_multiple_of(2) {
                term = -term;
            }
            for &(l, m) in parts {
                term /= BigRational::from_integer(factorial_big(m as u64));
                let base = &moments[l - 1] / BigRational::from_integer(factorial_big(l as u64));
                for _ in 0..m {
                    term *= &base;
                }
            }
            total += term;
        });
        out.push(total * BigRational::from_integer(factorial_big(k as u64)));
    }
    Ok(out)
}

/// Cumulants → raw moments via `α_k = Σ_{j=1}^{k} C(k−1, j−1) C_j α_{k−j}`.
pub fn cumulants_to_moments(cumulants: &CumulantVector) -> Result<MomentVector> {
    let k_max = cumulants.len();
    if k_max > MAX_TRANSFORM_ORDER {
        return Err(Error::OrderOutOfRange {
            order: k_max as u32,
            min: 2,
            max: MAX_TRANSFORM_ORDER as u32,
        });
    }
    let c = cumulants.values();
    let mut alpha = vec![1.0f64];
    for k in 1..=k_max {
        let mut total = 0.0;
        for j in 1..=k {
            total += binomial_f64(k - 1, j - 1) * c[j - 1] * alpha[k - j];
        }
        alpha.push(total);
    }
    MomentVector::new(alpha[1..].to_vec())
}

/// Exact-rational inverse transform.
pub fn cumulants_to_moments_exact(cumulants: &[BigRational]) -> Result<Vec<BigRational>> {
    let k_max = cumulants.len();
    if k_max < 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            actual: k_max,
        });
    }
    if k_max > MAX_TRANSFORM_ORDER_EXACT {
        return Err(Error::OrderOutOfRange {
            order: k_max as u32,
            min: 2,
            max: MAX_TRANSFORM_ORDER_EXACT as u32,
        });
    }
    let mut alpha = vec![BigRational::from_integer(BigInt::from(1))];
    for k in 1..=k_max {
        let mut total = BigRational::zero();
        for j in 1..=k {
            let binom = BigRational::from_integer(binomial_big(k - 1, j - 1));
            total += binom * &cumulants[j - 1] * &alpha[k - j];
        }
        alpha.push(total);
    }
    Ok(alpha[1..].to_vec())
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    crate::util::binomial_u128(n as u64, k as u64) as f64
}

fn binomial_big(n: usize, k: usize) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::from(1);
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Componentwise sum: cumulants are additive over independent summands.
pub fn sum_independent_cumulants(parts: &[CumulantVector]) -> Result<CumulantVector> {
    let first = parts.first().ok_or(Error::ShapeMismatch {
        expected: 1,
        actual: 0,
    })?;
    let len = first.len();
    let mut total = vec![0.0f64; len];
    for part in parts {
        if part.len() != len {
            return Err(Error::ShapeMismatch {
                expected: len,
                actual: part.len(),
            });
        }
        for (acc, v) in total.iter_mut().zip(part.values()) {
            *acc += v;
        }
    }
    CumulantVector::new(total)
}

/// Largest Δ for which a standardized cumulant vector satisfies
/// `|C_k| ≤ (k!)² Δ^{−(k−2)}` for every `3 ≤ k ≤ K`:
/// `Δ = min_k ((k!)²/|C_k|)^{1/(k−2)}`, `+∞` when all higher cumulants
/// vanish.
pub fn statulevicius_delta(cumulants: &CumulantVector) -> Result<DeltaCertificate> {
    let c = cumulants.values();
    if c.len() < 3 {
        return Err(Error::ShapeMismatch {
            expected: 3,
            actual: c.len(),
        });
    }
    if c[0].abs() > STANDARDIZED_TOL || (c[1] - 1.0).abs() > STANDARDIZED_TOL {
        return Err(Error::NotStandardized { c1: c[0], c2: c[1] });
    }
    let mut delta = f64::INFINITY;
    for (i, &ck) in c.iter().enumerate().skip(2) {
        let k = i + 1;
        if ck == 0.0 {
            continue;
        }
        let fact = factorial_f64(k as u64);
        let candidate = (fact * fact / ck.abs()).powf(1.0 / (k as f64 - 2.0));
        delta = delta.min(candidate);
    }
    let cert = DeltaCertificate {
        delta,
        nu: 1.0,
        max_order: Some(c.len()),
    };
    debug_assert!(cert.holds_for(cumulants));
    Ok(cert)
}

/// Moment-decay constant → cumulant-decay constant: `Δ = (2B)^{−1}`.
pub fn bernstein_to_delta(b: f64) -> Result<DeltaCertificate> {
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::ArgumentOutOfRange {
            name: "B",
            value: b,
            requirement: "Bernstein constant must be positive and finite",
        });
    }
    Ok(DeltaCertificate {
        delta: 1.0 / (2.0 * b),
        nu: 1.0,
        max_order: None,
    })
}

/// Admissible standardized deviation under a Δ certificate with usable
/// cumulant orders up to `k_tilde`: `x_max = min(√k̃, Δ^{1/3})/12`.
pub fn tail_validity_range(delta: f64, k_tilde: f64) -> f64 {
    debug_assert!(delta > 0.0 && k_tilde >= 3.0);
    k_tilde.sqrt().min(delta.cbrt()) / 12.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn poisson_central_moments_to_cumulants() {
        // central moments of Poisson(2): (0, 2, 2, 14, 42) → all cumulants 2
        let m = MomentVector::new(vec![0.0, 2.0, 2.0, 14.0, 42.0]).unwrap();
        let c = moments_to_cumulants(&m).unwrap();
        assert!(close(c.values()[0], 0.0, 1e-12));
        for &v in &c.values()[1..] {
            assert!(close(v, 2.0, 1e-12), "got {v}");
        }
    }

    #[test]
    fn gaussian_cumulants_vanish() {
        let m = MomentVector::new(vec![0.0, 1.0, 0.0, 3.0, 0.0, 15.0]).unwrap();
        let c = moments_to_cumulants(&m).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in c.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
    }

    #[test]
    fn fourth_cumulant_formula() {
        // α = (0, 1, 1, 4): C₄ = α₄ − 3α₂² = 1 (with α₁ = 0, α₃ contributes
        // nothing at k=4 beyond the α₁ cross terms, which vanish)
        let m = MomentVector::new(vec![0.0, 1.0, 1.0, 4.0]).unwrap();
        let c = moments_to_cumulants(&m).unwrap();
        assert!(close(c.values()[3], 1.0, 1e-12));
    }

    #[test]
    fn inverse_examples() {
        let c = CumulantVector::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let m = cumulants_to_moments(&c).unwrap();
        assert_eq!(m.values(), &[0.0, 1.0, 0.0, 3.0]);

        let c = CumulantVector::new(vec![0.0, 3.0, 3.0, 3.0]).unwrap();
        let m = cumulants_to_moments(&c).unwrap();
        assert_eq!(m.values(), &[0.0, 3.0, 3.0, 30.0]);
    }

    #[test]
    fn exact_poisson_closure() {
        use num_rational::BigRational;
        // Exact central moments of Poi(λ) feed the exact transform and
        // come back as C_k = λ for every k ≥ 2.
        for (num, den) in [(1i64, 2i64), (1, 1), (3, 1), (10, 1)] {
            let lambda = BigRational::new(num.into(), den.into());
            let mut alphas = vec![BigRational::zero()];
            for order in 2..=12u32 {
                alphas.push(poisson::central_moment_exact(order, &lambda).unwrap());
            }
            let cums = moments_to_cumulants_exact(&alphas).unwrap();
            assert!(cums[0].is_zero());
            for c in &cums[1..] {
                assert_eq!(c, &lambda);
            }
        }
    }

    #[test]
    fn independent_sum_examples() {
        let a = CumulantVector::new(vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let b = CumulantVector::new(vec![0.0, 2.0, 2.0, 2.0]).unwrap();
        let s = sum_independent_cumulants(&[a.clone(), b]).unwrap();
        assert_eq!(s.values(), &[0.0, 3.0, 3.0, 3.0]);

        let id = sum_independent_cumulants(std::slice::from_ref(&a)).unwrap();
        assert_eq!(id.values(), a.values());

        let shorter = CumulantVector::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            sum_independent_cumulants(&[a, shorter]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn additivity_matches_convolution() {
        // Two small discrete distributions; moments of the convolution feed
        // the forward transform and must match the summed cumulants.
        let da = [(0.0f64, 0.3f64), (1.0, 0.5), (3.0, 0.2)];
        let db = [(-1.0f64, 0.25f64), (0.0, 0.25), (2.0, 0.5)];
        let k = 6usize;
        let raw = |d: &[(f64, f64)]| -> Vec<f64> {
            (1..=k)
                .map(|j| d.iter().map(|&(x, p)| p * x.powi(j as i32)).sum())
                .collect()
        };
        let ca = moments_to_cumulants(&MomentVector::new(raw(&da)).unwrap()).unwrap();
        let cb = moments_to_cumulants(&MomentVector::new(raw(&db)).unwrap()).unwrap();
        let summed = sum_independent_cumulants(&[ca, cb]).unwrap();

        let mut conv: Vec<(f64, f64)> = Vec::new();
        for &(xa, pa) in &da {
            for &(xb, pb) in &db {
                conv.push((xa + xb, pa * pb));
            }
        }
        let cc = moments_to_cumulants(&MomentVector::new(raw(&conv)).unwrap()).unwrap();
        for (s, c) in summed.values().iter().zip(cc.values()) {
            assert!(close(*s, *c, 1e-10), "sum {s} vs convolution {c}");
        }
    }

    #[test]
    fn delta_for_standardized_poisson() {
        // standardized Poisson(4): C_k = 4^{1−k/2}
        let c = CumulantVector::new(vec![0.0, 1.0, 0.5, 0.25, 0.125]).unwrap();
        let cert = statulevicius_delta(&c).unwrap();
        assert!(close(cert.delta, 48.0, 1e-12), "got {}", cert.delta);
        assert!(cert.holds_for(&c));
    }

    #[test]
    fn delta_gaussian_is_infinite() {
        let c = CumulantVector::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let cert = statulevicius_delta(&c).unwrap();
        assert!(cert.delta.is_infinite());
    }

    #[test]
    fn delta_third_order_candidate() {
        let c = CumulantVector::new(vec![0.0, 1.0, 6.0]).unwrap();
        let cert = statulevicius_delta(&c).unwrap();
        assert!(close(cert.delta, 6.0, 1e-12));
    }

    #[test]
    fn delta_requires_standardized_input() {
        let c = CumulantVector::new(vec![0.5, 1.0, 1.0]).unwrap();
        assert!(matches!(
            statulevicius_delta(&c),
            Err(Error::NotStandardized { .. })
        ));
        let c = CumulantVector::new(vec![0.0, 2.0, 1.0]).unwrap();
        assert!(statulevicius_delta(&c).is_err());
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_to_delta(0.5).unwrap().delta, 1.0);
        assert_eq!(bernstein_to_delta(1.0).unwrap().delta, 0.5);
        assert_eq!(bernstein_to_delta(2f64.powi(-13)).unwrap().delta, 4096.0);
        assert!(bernstein_to_delta(0.0).is_err());
        assert!(bernstein_to_delta(-1.0).is_err());
    }

    #[test]
    fn validity_range_examples() {
        assert!(close(tail_validity_range(64.0, 144.0), 1.0 / 3.0, 1e-15));
        assert!(close(tail_validity_range(f64::INFINITY, 144.0), 1.0, 1e-15));
        assert!(close(
            tail_validity_range(1.0, 3.0),
            1.0 / 12.0,
            1e-15
        ));
    }

    #[test]
    fn chi_square_cell_cumulant_bound() {
        // |C_k(ξ̃²)| ≤ (k!)²(2⁸ max(1, λ⁻¹))^{k−2} · Var ξ̃² with
        // Var ξ̃² = λ⁻¹ + 2, for ξ̃ = (ξ−λ)/√λ, ξ ~ Poi(λ).
        for &lambda in &[0.5, 1.0, 5.0, 20.0] {
            let rate = poisson::PoissonRate::new(lambda).unwrap();
            let raw: Vec<f64> = (1..=8u32)
                .map(|j| poisson::standardized_moment(2 * j, rate).unwrap())
                .collect();
            let c = moments_to_cumulants(&MomentVector::new(raw).unwrap()).unwrap();
            let var = 1.0 / lambda + 2.0;
            assert!(close(c.values()[1], var, 1e-10));
            let base = 256.0 * (1.0f64).max(1.0 / lambda);
            for (i, &ck) in c.values().iter().enumerate().skip(2) {
                let k = (i + 1) as u64;
                let bound = factorial_f64(k).powi(2) * base.powi(k as i32 - 2) * var;
                assert!(
                    ck.abs() <= bound,
                    "λ={lambda}, k={k}: |C_k|={} > bound={bound}",
                    ck.abs()
                );
            }
        }
    }

    #[test]
    fn order_caps() {
        let m = MomentVector::new(vec![1.0; 21]).unwrap();
        assert!(matches!(
            moments_to_cumulants(&m),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(MomentVector::new(vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_recovers_moments(
            seed_cums in proptest::collection::vec(-1.2f64..1.2, 4..9)
        ) {
            // Random cumulants with a positive variance produce a valid
            // moment sequence; the round trip must return it. Tolerance is
            // scaled by the largest moment, the natural condition scale of
            // the partition sum.
            let mut cums = seed_cums;
            cums[1] = cums[1].abs() + 0.1;
            let c = CumulantVector::new(cums).unwrap();
            let m = cumulants_to_moments(&c).unwrap();
            let scale = m.values().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            let back = moments_to_cumulants(&m).unwrap();
            for (a, b) in c.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-10 * scale.max(a.abs()));
            }
            let m_back = cumulants_to_moments(&back).unwrap();
            for (a, b) in m.values().iter().zip(m_back.values()) {
                prop_assert!((a - b).abs() <= 1e-10 * scale.max(a.abs()));
            }
        }
    }
}
