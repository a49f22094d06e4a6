//! KL divergence calculators.
//!
//! Divergences that are infinite (absolute continuity fails) are reported as
//! `f64::INFINITY` by the calculators that document it; callers treat that
//! value as "no finite bound".

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Sentinel returned for infinite divergences.
pub const INFINITE_DIVERGENCE: f64 = f64::INFINITY;

/// Tolerance on the total mass of a [`DiscreteDistribution`].
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    mean: f64,
    variance: f64,
}

impl GaussianSpec {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(param("mean", mean, "must be finite"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(param("variance", variance, "must be positive and finite"));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Laplace distribution with location `mean` and scale `scale` (variance
/// `2 * scale^2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSpec {
    mean: f64,
    scale: f64,
}

impl LaplaceSpec {
    pub fn new(mean: f64, scale: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(param("mean", mean, "must be finite"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(param("scale", scale, "must be positive and finite"));
        }
        Ok(Self { mean, scale })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Finite distribution over an ordered list of labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution<L = usize> {
    support: Vec<L>,
    probs: Vec<f64>,
}

impl<L: PartialEq> DiscreteDistribution<L> {
    pub fn new(support: Vec<L>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::Distribution(format!(
                "support has {} labels but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::Distribution("empty support".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Distribution(format!("invalid probability {bad}")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Distribution(format!("probabilities sum to {mass}")));
        }
        Ok(Self { support, probs })
    }

    pub fn support(&self) -> &[L] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl DiscreteDistribution<usize> {
    /// Distribution on labels `0..probs.len()`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        Self::new((0..probs.len()).collect(), probs)
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::from_probs(vec![1.0 / size as f64; size])
    }
}

/// `r - 1 - ln r` for `r > 0`, accurate near `r = 1`.
pub(crate) fn ratio_excess(r: f64) -> f64 {
    let d = r - 1.0;
    if d.abs() < 1e-2 {
        // d - ln(1 + d) = sum_{k>=2} (-1)^k d^k / k
        let mut term = d * d;
        let mut acc = 0.0;
        for k in 2..=12 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / k as f64;
            term *= d;
        }
        acc
    } else {
        d - d.ln_1p()
    }
}

/// `e^{-u} - 1 + u` for `u >= 0`, accurate near zero.
fn exp_excess(u: f64) -> f64 {
    if u < 1e-2 {
        let mut term = u * u / 2.0;
        let mut acc = 0.0;
        for k in 2..=12 {
            acc += term;
            term *= -u / (k + 1) as f64;
        }
        acc
    } else {
        (-u).exp_m1() + u
    }
}

pub fn kl_gaussian(p: &GaussianSpec, q: &GaussianSpec) -> f64 {
    let gap = p.mean - q.mean;
    gap * gap / (2.0 * q.variance) + 0.5 * ratio_excess(p.variance / q.variance)
}

/// Upper bound on [`kl_gaussian`] that is quadratic in the mean gap and in
/// the variance ratio deviation.
pub fn kl_gaussian_upper(p: &GaussianSpec, q: &GaussianSpec) -> f64 {
    let gap = p.mean - q.mean;
    let ratio = p.variance / q.variance;
    let inv_dev = q.variance / p.variance - 1.0;
    let shrink = ((2.0 + ratio) / 6.0).min(1.0);
    // gap^2 ratio / p.variance rewritten as gap^2 / q.variance so the mean
    // term rounds exactly like the one in `kl_gaussian`.
    gap * gap / (2.0 * q.variance) + 0.5 * inv_dev * inv_dev * shrink * ratio
}

/// Exact Laplace KL divergence and its quadratic upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceKl {
    pub exact: f64,
    pub upper: f64,
}

pub fn kl_laplace(p: &LaplaceSpec, q: &LaplaceSpec) -> LaplaceKl {
    let gap = (q.mean - p.mean).abs();
    let rho = p.scale / q.scale;
    let exact = rho * exp_excess(gap / p.scale) + ratio_excess(rho);
    let inv_dev = (q.scale * q.scale) / (p.scale * p.scale) - 1.0;
    let upper = gap * gap / (2.0 * p.scale * q.scale) + inv_dev * inv_dev * rho * rho / 7.0;
    LaplaceKl { exact, upper }
}

fn plogp_over(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        INFINITE_DIVERGENCE
    } else {
        a * (a / b).ln()
    }
}

/// Binary KL divergence `D(B(p) || B(q))`.
///
/// Returns [`INFINITE_DIVERGENCE`] when `q` is 0 or 1 and `p` puts mass where
/// `q` has none.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(param("p", p, "must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(param("q", q, "must lie in [0, 1]"));
    }
    Ok(plogp_over(p, q) + plogp_over(1.0 - p, 1.0 - q))
}

/// `sum_i p_i ln(p_i / q_i)` with the `0 ln 0 = 0` convention; infinite when
/// some `p_i > 0 = q_i`.
pub(crate) fn kl_probs(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        acc += plogp_over(a, b);
        if acc == INFINITE_DIVERGENCE {
            return acc;
        }
    }
    // Rounding can push a zero divergence slightly negative.
    acc.max(0.0)
}

pub fn kl_discrete<L: PartialEq>(
    p: &DiscreteDistribution<L>,
    q: &DiscreteDistribution<L>,
) -> Result<f64> {
    if p.support != q.support {
        return Err(Error::Distribution("supports differ".into()));
    }
    if let Some(i) = p
        .probs
        .iter()
        .zip(&q.probs)
        .position(|(a, b)| *a > 0.0 && *b == 0.0)
    {
        return Err(Error::Distribution(format!(
            "not absolutely continuous at support index {i}"
        )));
    }
    Ok(kl_probs(&p.probs, &q.probs))
}

/// Upper bound on `E[X]` from `D(X || Y)` and `ln E[e^{tY}]`.
pub fn mgf_kl_expectation_bound(kl: f64, log_mgf_at_t: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(param("t", t, "must be positive"));
    }
    if !(kl >= 0.0) {
        return Err(param("kl", kl, "must be nonnegative"));
    }
    Ok((kl + log_mgf_at_t) / t)
}

/// Largest bias `p` compatible with `D(B(p) || B(q)) <= kl`, relaxed to
/// `(kl + ln 2) / ln(1/q)`.
pub fn bernoulli_bias_bound(kl: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(param("q", q, "must lie in (0, 1)"));
    }
    if !(kl >= 0.0) {
        return Err(param("kl", kl, "must be nonnegative"));
    }
    Ok((kl + std::f64::consts::LN_2) / (1.0 / q).ln())
}
