//! Exact small-instance ground truth: full multinomial enumeration, the
//! conditioned-Poisson route to the same moments, exact cumulants of both
//! sides, and the normalizing constant of the conditioning argument.
//!
//! All enumeration weights are exact big rationals. Float-valued inputs are
//! lifted to the rationals they denote, so sums are order-independent and
//! free of cancellation; the only floating-point content of a moment is the
//! per-outcome statistic evaluation itself, which both routes share.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::cumulants::{moments_to_cumulants, sum_independent_cumulants, CumulantVector, MomentVector};
use crate::error::{Error, Result};
use crate::poisson::poisson_expectation;
use crate::statistics::{ProbabilityVector, StatKind};
use crate::util::{binomial_u128, factorial_big, rational_from_f64};

fn rational_pow(base: &BigRational, exp: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Hard cap on the number of outcomes an enumeration may produce.
pub const MAX_OUTCOMES: u64 = 10_000_000;

/// Moment order cap for enumerated moments.
pub const MAX_ENUM_MOMENT: u32 = 8;

/// Cumulant order cap for [`exact_cumulants`].
pub const MAX_ENUM_CUMULANT: usize = 6;

/// One enumerated outcome: the cell counts and their exact probability.
#[derive(Debug, Clone)]
pub struct OutcomeEntry {
    pub counts: Vec<u64>,
    pub probability: BigRational,
}

/// The full outcome table of a multinomial scheme.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    n: u64,
    n_cells: usize,
    entries: Vec<OutcomeEntry>,
    exact_inputs: bool,
}

impl OutcomeTable {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn entries(&self) -> &[OutcomeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when the table was built from exact rational probabilities.
    pub fn exact_inputs(&self) -> bool {
        self.exact_inputs
    }

    /// Total probability mass, exact.
    pub fn total_mass(&self) -> BigRational {
        let mut acc = BigRational::zero();
        for e in &self.entries {
            acc += &e.probability;
        }
        acc
    }

    /// CSV export: `eta_1,…,eta_N,prob_num,prob_den` in rational mode,
    /// `eta_1,…,eta_N,prob` in float mode.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for m in 1..=self.n_cells {
            out.push_str(&format!("eta_{m},"));
        }
        if self.exact_inputs {
            out.push_str("prob_num,prob_den\n");
        } else {
            out.push_str("prob\n");
        }
        for e in &self.entries {
            for c in &e.counts {
                out.push_str(&format!("{c},"));
            }
            if self.exact_inputs {
                out.push_str(&format!("{},{}\n", e.probability.numer(), e.probability.denom()));
            } else {
                out.push_str(&format!("{}\n", e.probability.to_f64().unwrap_or(f64::NAN)));
            }
        }
        out
    }
}

fn exact_probs(probs: &ProbabilityVector) -> Vec<BigRational> {
    match probs.exact() {
        Some(exact) => exact.to_vec(),
        None => probs.values().iter().map(|&p| rational_from_f64(p)).collect(),
    }
}

fn check_guard(n: u64, n_cells: usize) -> Result<()> {
    let outcomes = binomial_u128(n + n_cells as u64 - 1, n_cells as u64 - 1);
    if outcomes > MAX_OUTCOMES as u128 {
        return Err(Error::EnumerationTooLarge {
            outcomes,
            limit: MAX_OUTCOMES,
        });
    }
    Ok(())
}

/// Walks every composition of `n` into `n_cells` parts in lexicographic
/// order, calling `visit(counts, weight)` where `weight` is the running
/// product `∏ base_m^{η_m} / η_m!`.
fn walk_compositions(
    n: u64,
    bases: &[BigRational],
    visit: &mut impl FnMut(&[u64], &BigRational),
) {
    fn descend(
        cell: usize,
        remaining: u64,
        bases: &[BigRational],
        counts: &mut Vec<u64>,
        weight: &BigRational,
        visit: &mut impl FnMut(&[u64], &BigRational),
    ) {
        if cell == bases.len() - 1 {
            // the last cell takes everything: weight · base^r / r!
            let mut w = weight.clone();
            for i in 1..=remaining {
                w = w * &bases[cell] / BigRational::from_integer(BigInt::from(i));
            }
            counts.push(remaining);
            visit(counts, &w);
            counts.pop();
            return;
        }
        let mut w = weight.clone();
        let mut k = 0u64;
        loop {
            counts.push(k);
            descend(cell + 1, remaining - k, bases, counts, &w, visit);
            counts.pop();
            if k == remaining {
                break;
            }
            k += 1;
            w = w * &bases[cell] / BigRational::from_integer(BigInt::from(k));
        }
    }
    let mut counts = Vec::with_capacity(bases.len());
    let one = BigRational::one();
    descend(0, n, bases, &mut counts, &one, visit);
}

/// Enumerates the full multinomial outcome table with exact probabilities
/// `n!/(η_1!…η_N!) ∏ p_m^{η_m}`.
pub fn enumerate_multinomial(n: u64, probs: &ProbabilityVector) -> Result<OutcomeTable> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    check_guard(n, probs.len())?;
    let bases = exact_probs(probs);
    let n_fact = BigRational::from_integer(factorial_big(n));
    let mut entries = Vec::new();
    walk_compositions(n, &bases, &mut |counts, weight| {
        entries.push(OutcomeEntry {
            counts: counts.to_vec(),
            probability: &n_fact * weight,
        });
    });
    Ok(OutcomeTable {
        n,
        n_cells: probs.len(),
        entries,
        exact_inputs: probs.exact().is_some(),
    })
}

fn statistic_value(kind: StatKind, counts: &[u64], probs: &ProbabilityVector, n: u64) -> f64 {
    match kind {
        StatKind::ChiSquare => crate::statistics::chi_square_from_slice(counts, probs.values(), n),
        StatKind::LikelihoodRatio => crate::statistics::lr_from_slice(counts, probs.values(), n),
    }
}

/// Exact `P{statistic ≥ threshold}` by enumeration.
pub fn exact_tail(
    n: u64,
    probs: &ProbabilityVector,
    kind: StatKind,
    threshold: f64,
) -> Result<f64> {
    let table = enumerate_multinomial(n, probs)?;
    let mut mass = BigRational::zero();
    for e in table.entries() {
        if statistic_value(kind, &e.counts, probs, n) >= threshold {
            mass += &e.probability;
        }
    }
    Ok(mass.to_f64().unwrap_or(f64::NAN))
}

fn check_moment_order(k: u32) -> Result<()> {
    if k > MAX_ENUM_MOMENT {
        return Err(Error::OrderOutOfRange {
            order: k,
            min: 0,
            max: MAX_ENUM_MOMENT,
        });
    }
    Ok(())
}

/// `E[(Σ_m h_m(η_m))^k]` under the multinomial law, with exact weights.
pub fn exact_moment_multinomial<F>(
    n: u64,
    probs: &ProbabilityVector,
    cells: F,
    k: u32,
) -> Result<f64>
where
    F: Fn(usize, u64) -> f64,
{
    check_moment_order(k)?;
    let table = enumerate_multinomial(n, probs)?;
    let mut acc = BigRational::zero();
    for e in table.entries() {
        let stat: f64 = e
            .counts
            .iter()
            .enumerate()
            .map(|(m, &c)| cells(m, c))
            .sum();
        acc += &e.probability * rational_pow(&rational_from_f64(stat), k);
    }
    Ok(acc.to_f64().unwrap_or(f64::NAN))
}

/// The same moment through the Poissonization route:
/// `E[(Σ_m h_m(ξ_m))^k | Σ ξ_m = n]` with independent `ξ_m ~ Poi(n·p_m)`,
/// computed by renormalizing the product Poisson weights over the
/// conditioning support. The common factor `e^{−n}` of every weight cancels
/// in the normalization, so the weights stay exact rationals.
pub fn conditioned_poisson_moment<F>(
    n: u64,
    probs: &ProbabilityVector,
    cells: F,
    k: u32,
) -> Result<f64>
where
    F: Fn(usize, u64) -> f64,
{
    check_moment_order(k)?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    check_guard(n, probs.len())?;
    // Poisson weight of an outcome: ∏ (n p_m)^{η_m} / η_m!
    let bases: Vec<BigRational> = exact_probs(probs)
        .into_iter()
        .map(|p| p * BigRational::from_integer(BigInt::from(n)))
        .collect();
    let mut numerator = BigRational::zero();
    let mut normalizer = BigRational::zero();
    walk_compositions(n, &bases, &mut |counts, weight| {
        let stat: f64 = counts
            .iter()
            .enumerate()
            .map(|(m, &c)| cells(m, c))
            .sum();
        numerator += weight * rational_pow(&rational_from_f64(stat), k);
        normalizer += weight;
    });
    Ok((numerator / normalizer).to_f64().unwrap_or(f64::NAN))
}

/// Which side of the Poissonization identity a cumulant computation
/// targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticSide {
    /// The multinomial statistic, by full enumeration.
    Multinomial,
    /// The independent-Poisson statistic, by per-cell truncated summation.
    Poissonized,
}

/// Exact cumulants `C_1..C_max_order` of the decomposable statistic on
/// either side of the conditioning identity. The Poissonized side sums
/// per-cell cumulants, which is exact for independent summands.
pub fn exact_cumulants<F>(
    n: u64,
    probs: &ProbabilityVector,
    cells: F,
    max_order: usize,
    side: StatisticSide,
    mass_tol: f64,
) -> Result<CumulantVector>
where
    F: Fn(usize, u64) -> f64,
{
    if !(2..=MAX_ENUM_CUMULANT).contains(&max_order) {
        return Err(Error::OrderOutOfRange {
            order: max_order as u32,
            min: 2,
            max: MAX_ENUM_CUMULANT as u32,
        });
    }
    match side {
        StatisticSide::Multinomial => {
            let table = enumerate_multinomial(n, probs)?;
            let mut raw = vec![BigRational::zero(); max_order];
            for e in table.entries() {
                let stat: f64 = e
                    .counts
                    .iter()
                    .enumerate()
                    .map(|(m, &c)| cells(m, c))
                    .sum();
                let stat = rational_from_f64(stat);
                let mut power = BigRational::one();
                for acc in raw.iter_mut() {
                    power *= &stat;
                    *acc += &e.probability * &power;
                }
            }
            let raw_f: Vec<f64> = raw
                .iter()
                .map(|r| r.to_f64().unwrap_or(f64::NAN))
                .collect();
            moments_to_cumulants(&MomentVector::new(raw_f)?)
        }
        StatisticSide::Poissonized => {
            let nf = n as f64;
            let mut per_cell = Vec::with_capacity(probs.len());
            for (m, &p) in probs.values().iter().enumerate() {
                let lambda = nf * p;
                let mut raw = Vec::with_capacity(max_order);
                for j in 1..=max_order {
                    raw.push(poisson_expectation(lambda, mass_tol, |x| {
                        cells(m, x).powi(j as i32)
                    })?);
                }
                per_cell.push(moments_to_cumulants(&MomentVector::new(raw)?)?);
            }
            sum_independent_cumulants(&per_cell)
        }
    }
}

/// Exact Pearson statistic as a rational, for instances with rational
/// probabilities.
pub fn chi_square_exact(counts: &[u64], probs: &[BigRational], n: u64) -> BigRational {
    let n_big = BigRational::from_integer(BigInt::from(n));
    let mut acc = BigRational::zero();
    for (&eta, p) in counts.iter().zip(probs) {
        let expected = &n_big * p;
        let d = BigRational::from_integer(BigInt::from(eta)) - &expected;
        acc += &d * &d / expected;
    }
    acc
}

/// The normalizing constant of the conditioning argument,
/// `ν_n = n!·eⁿ/(2π·nⁿ·√n)`, evaluated in the log domain, together with
/// its distance from the limit `1/√(2π)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditioningNormalizer {
    pub value: f64,
    pub deviation_from_limit: f64,
}

/// Inverse of `2π√n·P{S = 0}` for a centered Poisson total at rate `n`.
/// Converges to `1/√(2π)` from above.
pub fn conditioning_normalizer(n: u64) -> Result<ConditioningNormalizer> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let ln_value = statrs::function::gamma::ln_gamma(nf + 1.0) + nf
        - (nf + 0.5) * nf.ln()
        - (2.0 * std::f64::consts::PI).ln();
    let value = ln_value.exp();
    let limit = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    Ok(ConditioningNormalizer {
        value,
        deviation_from_limit: value - limit,
    })
}
