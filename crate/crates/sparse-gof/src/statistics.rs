//! Goodness-of-fit statistics over multinomial counts and the
//! mean/variance characteristics of decomposable statistics under the
//! Poissonized scheme.
//!
//! A decomposable statistic is a sum `Σ_m h_m(η_m)` of per-cell functions
//! of the counts. Its Poissonized profile collects the mean
//! `A_N = Σ E h_m(ξ_m)`, the covariance slope
//! `γ_n = n⁻¹ Σ cov(h_m(ξ_m), ξ_m)`, the raw variance
//! `σ̃²_N = Σ Var h_m(ξ_m)` and the conditioning-corrected variance
//! `σ²_N = σ̃²_N − nγ²_n`, where `ξ_m ~ Poi(n·p_m)` are independent.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poisson::poisson_expectations;
use crate::util::NeumaierSum;

/// Which goodness-of-fit statistic a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    #[serde(rename = "chi2")]
    ChiSquare,
    #[serde(rename = "lr")]
    LikelihoodRatio,
}

impl std::fmt::Display for StatKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StatKind::ChiSquare => write!(f, "chi2"),
            StatKind::LikelihoodRatio => write!(f, "lr"),
        }
    }
}

impl std::str::FromStr for StatKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi2" => Ok(StatKind::ChiSquare),
            "lr" => Ok(StatKind::LikelihoodRatio),
            other => Err(Error::Parse(format!(
                "unknown statistic kind {other:?}; expected chi2 or lr"
            ))),
        }
    }
}

/// Centering used when standardizing the chi-square statistic. The
/// limit approximation centers at the cell count `N`; the exact mean
/// `N − 1` is offered for sensitivity studies. The likelihood-ratio
/// statistic always centers at `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Centering {
    #[default]
    #[serde(rename = "N")]
    CellCount,
    #[serde(rename = "N-1")]
    CellCountMinusOne,
}

impl std::str::FromStr for Centering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" => Ok(Centering::CellCount),
            "N-1" => Ok(Centering::CellCountMinusOne),
            other => Err(Error::Parse(format!(
                "unknown centering {other:?}; expected N or N-1"
            ))),
        }
    }
}

/// Sum-to-one slack accepted before renormalization.
const PROB_SUM_TOL: f64 = 1e-12;

/// Validated, normalized cell probabilities. When constructed from exact
/// rationals the exact representation is retained for the enumeration
/// oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    values: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl ProbabilityVector {
    /// Validates positivity and `|Σp − 1| ≤ 1e-12`, then renormalizes.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        for (i, &p) in raw.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidProbabilities(format!(
                    "cell {i} has non-positive or non-finite probability {p}"
                )));
            }
        }
        let total: f64 = crate::util::compensated_sum(raw.iter().copied());
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProbabilities(format!(
                "probabilities sum to {total}, more than {PROB_SUM_TOL} away from 1"
            )));
        }
        let values = raw.into_iter().map(|p| p / total).collect();
        Ok(Self {
            values,
            exact: None,
        })
    }

    /// Exact-rational construction; normalization divides by the exact sum.
    pub fn from_rationals(raw: Vec<BigRational>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        let mut total = BigRational::zero();
        for (i, p) in raw.iter().enumerate() {
            if !p.is_positive() {
                return Err(Error::InvalidProbabilities(format!(
                    "cell {i} has non-positive probability {p}"
                )));
            }
            total += p;
        }
        let total_f = total.to_f64().unwrap_or(f64::NAN);
        if total_f.is_nan() || (total_f - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProbabilities(format!(
                "probabilities sum to {total_f}, more than {PROB_SUM_TOL} away from 1"
            )));
        }
        let exact: Vec<BigRational> = raw.into_iter().map(|p| p / &total).collect();
        let values = exact
            .iter()
            .map(|p| p.to_f64().expect("probability fits in f64"))
            .collect();
        Ok(Self {
            values,
            exact: Some(exact),
        })
    }

    /// `N` equal cells, kept exact.
    pub fn equiprobable(n_cells: usize) -> Self {
        let exact: Vec<BigRational> = (0..n_cells)
            .map(|_| BigRational::new(1.into(), (n_cells as u64).into()))
            .collect();
        Self {
            values: vec![1.0 / n_cells as f64; n_cells],
            exact: Some(exact),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Exact representation, present when the input was rational.
    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn p_min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn p_max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Observed cell counts; the sample size is their sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsVector {
    counts: Vec<u64>,
    n: u64,
}

impl CountsVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Self { counts, n })
    }

    /// Like [`new`](Self::new) but cross-checks a declared sample size.
    pub fn with_declared_n(counts: Vec<u64>, declared: u64) -> Result<Self> {
        let v = Self::new(counts)?;
        if v.n != declared {
            return Err(Error::CountMismatch {
                declared,
                summed: v.n,
            });
        }
        Ok(v)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Poissonized characteristics of a decomposable statistic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StatisticProfile {
    /// `A_N = Σ E h_m(ξ_m)`.
    pub poissonized_mean: f64,
    /// `γ_n = n⁻¹ Σ cov(h_m(ξ_m), ξ_m)`.
    pub covariance_slope: f64,
    /// `σ̃²_N = Σ Var h_m(ξ_m)`.
    pub raw_variance: f64,
    /// `σ²_N = σ̃²_N − nγ²_n`.
    pub corrected_variance: f64,
    /// `λ_n = n/N`, the mean cell count.
    pub mean_cell_count: f64,
    /// `∇_n = max(1, (n·p_min)⁻¹)`.
    pub sparsity_factor: f64,
}

fn check_dims(counts: &CountsVector, probs: &ProbabilityVector) -> Result<()> {
    if counts.len() != probs.len() {
        return Err(Error::ShapeMismatch {
            expected: probs.len(),
            actual: counts.len(),
        });
    }
    Ok(())
}

pub(crate) fn chi_square_from_slice(counts: &[u64], probs: &[f64], n: u64) -> f64 {
    let n = n as f64;
    let mut acc = NeumaierSum::new();
    for (&eta, &p) in counts.iter().zip(probs) {
        let expected = n * p;
        let d = eta as f64 - expected;
        acc.add(d * d / expected);
    }
    acc.value()
}

pub(crate) fn lr_from_slice(counts: &[u64], probs: &[f64], n: u64) -> f64 {
    let n = n as f64;
    let mut acc = NeumaierSum::new();
    for (&eta, &p) in counts.iter().zip(probs) {
        if eta > 0 {
            let eta = eta as f64;
            acc.add(eta * (eta / (n * p)).ln());
        }
    }
    2.0 * acc.value()
}

/// Pearson statistic `Σ (η_m − n·p_m)²/(n·p_m)`.
pub fn chi_square_statistic(counts: &CountsVector, probs: &ProbabilityVector) -> Result<f64> {
    check_dims(counts, probs)?;
    Ok(chi_square_from_slice(
        counts.counts(),
        probs.values(),
        counts.n(),
    ))
}

/// Log-likelihood-ratio statistic `2 Σ η_m ln(η_m/(n·p_m))`; empty cells
/// contribute zero (`0·ln 0 = 0`).
pub fn log_likelihood_ratio(counts: &CountsVector, probs: &ProbabilityVector) -> Result<f64> {
    check_dims(counts, probs)?;
    Ok(lr_from_slice(counts.counts(), probs.values(), counts.n()))
}

/// Closed-form chi-square profile:
/// `A_N = N`, `σ̃²_N = Σ 1/(n·p_m) + 2N`, `σ²_N = σ̃²_N − N/λ_n`,
/// `γ_n = 1/λ_n` (the per-cell covariance `cov(ξ̃²_m, ξ_m)` reduces to
/// `μ₃(n·p_m)/(n·p_m) = 1`), and `∇_n = max(1, (n·p_min)⁻¹)`.
pub fn chi_square_profile(probs: &ProbabilityVector, n: u64) -> Result<StatisticProfile> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let cells = probs.len() as f64;
    let nf = n as f64;
    let lambda_n = nf / cells;
    let inv_sum = crate::util::compensated_sum(probs.values().iter().map(|&p| 1.0 / (nf * p)));
    let raw_variance = inv_sum + 2.0 * cells;
    let corrected_variance = raw_variance - cells / lambda_n;
    Ok(StatisticProfile {
        poissonized_mean: cells,
        covariance_slope: 1.0 / lambda_n,
        raw_variance,
        corrected_variance,
        mean_cell_count: lambda_n,
        sparsity_factor: (1.0f64).max(1.0 / (nf * probs.p_min())),
    })
}

/// Profile of an arbitrary decomposable statistic by truncated Poisson
/// summation; `cells(m, x)` evaluates the per-cell function `h_m` at count
/// `x`. Tiny negative corrected variances from cancellation are clamped to
/// zero; genuinely degenerate statistics legitimately produce zero.
pub fn generic_profile<F>(
    cells: F,
    probs: &ProbabilityVector,
    n: u64,
    mass_tol: f64,
) -> Result<StatisticProfile>
where
    F: Fn(usize, u64) -> f64,
{
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let mut mean = NeumaierSum::new();
    let mut cov = NeumaierSum::new();
    let mut var = NeumaierSum::new();
    for (m, &p) in probs.values().iter().enumerate() {
        let lambda = nf * p;
        let [e_h, e_h2, e_hx] =
            poisson_expectations(lambda, mass_tol, |x| {
                let h = cells(m, x);
                [h, h * h, h * x as f64]
            })?;
        mean.add(e_h);
        cov.add(e_hx - e_h * lambda);
        var.add(e_h2 - e_h * e_h);
    }
    let covariance_slope = cov.value() / nf;
    let raw_variance = var.value();
    let corrected = raw_variance - nf * covariance_slope * covariance_slope;
    let cells_f = probs.len() as f64;
    Ok(StatisticProfile {
        poissonized_mean: mean.value(),
        covariance_slope,
        raw_variance,
        corrected_variance: if corrected < 0.0 && corrected > -1e-9 * raw_variance.max(1.0) {
            0.0
        } else {
            corrected
        },
        mean_cell_count: nf / cells_f,
        sparsity_factor: (1.0f64).max(1.0 / (nf * probs.p_min())),
    })
}

/// Per-cell function of the Pearson statistic, for use with
/// [`generic_profile`] and the enumeration oracle.
pub fn chi_square_cell_fn(
    probs: &ProbabilityVector,
    n: u64,
) -> impl Fn(usize, u64) -> f64 + '_ {
    move |m, x| {
        let expected = n as f64 * probs.values()[m];
        let d = x as f64 - expected;
        d * d / expected
    }
}

/// Per-cell function `h_m(x) = x·ln(x/(n·p_m))` of the likelihood-ratio
/// statistic (the statistic itself is twice the sum).
pub fn lr_cell_fn(probs: &ProbabilityVector, n: u64) -> impl Fn(usize, u64) -> f64 + '_ {
    move |m, x| {
        if x == 0 {
            0.0
        } else {
            let x = x as f64;
            x * (x / (n as f64 * probs.values()[m])).ln()
        }
    }
}

/// Below this mean cell count the likelihood-ratio expansion degrades.
pub const LR_EXPANSION_LAMBDA_FLOOR: f64 = 5.0;

/// Leading-plus-first-correction closed forms for the likelihood-ratio
/// profile, with `S = Σ (n·p_m)⁻¹`:
/// `A_N = N/2 + S/12`, `γ_n = 1 − S/(12n)`, `σ²_N = N/2 + S/6`,
/// `σ̃²_N = σ²_N + nγ²_n`.
///
/// Values are returned for any positive `n`; below a mean cell count of
/// [`LR_EXPANSION_LAMBDA_FLOOR`] they should be treated as indicative only
/// (compare `mean_cell_count`).
pub fn lr_profile_asymptotic(probs: &ProbabilityVector, n: u64) -> Result<StatisticProfile> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let cells = probs.len() as f64;
    let nf = n as f64;
    let inv_sum = crate::util::compensated_sum(probs.values().iter().map(|&p| 1.0 / (nf * p)));
    let poissonized_mean = cells / 2.0 + inv_sum / 12.0;
    let covariance_slope = 1.0 - inv_sum / (12.0 * nf);
    let corrected_variance = cells / 2.0 + inv_sum / 6.0;
    Ok(StatisticProfile {
        poissonized_mean,
        covariance_slope,
        raw_variance: corrected_variance + nf * covariance_slope * covariance_slope,
        corrected_variance,
        mean_cell_count: nf / cells,
        sparsity_factor: (1.0f64).max(1.0 / (nf * probs.p_min())),
    })
}

/// Maps a raw statistic value to its standardized deviation:
/// chi-square `x = (t − center)/σ_N` with `σ_N = √σ²_N`, likelihood ratio
/// `x = (t − N)/√(2N)`. The `N − 1` centering option applies to the
/// chi-square only.
pub fn standardize(
    t: f64,
    kind: StatKind,
    profile: &StatisticProfile,
    n_cells: usize,
    centering: Centering,
) -> Result<f64> {
    let cells = n_cells as f64;
    match kind {
        StatKind::ChiSquare => {
            let scale = profile.corrected_variance.sqrt();
            if scale.is_nan() || scale <= 0.0 {
                return Err(Error::DegenerateProfile(profile.corrected_variance));
            }
            let center = match centering {
                Centering::CellCount => cells,
                Centering::CellCountMinusOne => cells - 1.0,
            };
            Ok((t - center) / scale)
        }
        StatKind::LikelihoodRatio => {
            if n_cells == 0 {
                return Err(Error::EmptySample);
            }
            Ok((t - cells) / (2.0 * cells).sqrt())
        }
    }
}
