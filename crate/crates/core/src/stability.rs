//! Average leave-one-out KL (ALKL) accounting and generalization bounds.
//!
//! A mechanism `M` is `eps`-ALKL stable when, for every input `s` of size
//! `n`, `(1/n) * sum_i D(M(s) || M(s_{-i})) <= eps`. Stability composes
//! additively across adaptively chosen steps, bounds the mutual information
//! between a product-distributed sample and the output by `eps * n`, and
//! through that bounds the generalization error of whatever the mechanism
//! outputs. Every calculator here takes scalars only.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::data::{evaluate_query_stats, Dataset, QueryStats, StatisticalQuery};
use crate::divergence::{kl_gaussian, GaussianSpec};
use crate::error::{param, Error, Result};

/// Running ALKL budget of an interaction.
///
/// Each entry holds the data-dependent exact ALKL of one answer and the
/// data-independent cap proven for it. Entries may be
/// [`f64::INFINITY`](crate::divergence::INFINITE_DIVERGENCE) for
/// mechanisms with no finite guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityLedger {
    n: usize,
    per_answer_alkl: Vec<f64>,
    per_answer_cap: Vec<f64>,
    epsilon_total: f64,
    cap_total: f64,
}

impl StabilityLedger {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            per_answer_alkl: Vec::new(),
            per_answer_cap: Vec::new(),
            epsilon_total: 0.0,
            cap_total: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.per_answer_alkl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_answer_alkl.is_empty()
    }

    pub fn per_answer_alkl(&self) -> &[f64] {
        &self.per_answer_alkl
    }

    pub fn per_answer_cap(&self) -> &[f64] {
        &self.per_answer_cap
    }

    /// Sum of the exact per-answer ALKL values.
    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }

    /// Sum of the per-answer caps.
    pub fn cap_total(&self) -> f64 {
        self.cap_total
    }

    /// Appends one answer with its exact ALKL and its cap.
    pub fn record(&mut self, exact: f64, cap: f64) -> Result<()> {
        if !(exact >= 0.0) {
            return Err(param("exact", exact, "ALKL entries must be nonnegative"));
        }
        if !(cap >= 0.0) {
            return Err(param("cap", cap, "ALKL caps must be nonnegative"));
        }
        self.per_answer_alkl.push(exact);
        self.per_answer_cap.push(cap);
        self.epsilon_total = self.per_answer_alkl.iter().sum();
        self.cap_total = self.per_answer_cap.iter().sum();
        Ok(())
    }
}

/// Composes `ledger` with another `eps_new`-ALKL stable step.
///
/// An externally supplied entry is its own cap.
pub fn compose(mut ledger: StabilityLedger, eps_new: f64) -> Result<StabilityLedger> {
    if !(eps_new >= 0.0) {
        return Err(param("eps_new", eps_new, "must be nonnegative"));
    }
    ledger.record(eps_new, eps_new)?;
    Ok(ledger)
}

/// Noise variance of the calibrated mechanism for empirical variance `var`.
pub fn calibrated_noise_variance(var: f64, variance_divisor: f64, inverse_floor: f64) -> f64 {
    (var / variance_divisor).max(1.0 / inverse_floor)
}

fn check_tt(variance_divisor: f64, inverse_floor: f64) -> Result<()> {
    if !(variance_divisor > 0.0 && variance_divisor.is_finite()) {
        return Err(param("t", variance_divisor, "must be positive and finite"));
    }
    if !(inverse_floor > 0.0 && inverse_floor.is_finite()) {
        return Err(param("T", inverse_floor, "must be positive and finite"));
    }
    Ok(())
}

/// Exact ALKL of one calibrated answer, from precomputed statistics.
pub fn alkl_from_stats(stats: &QueryStats, variance_divisor: f64, inverse_floor: f64) -> Result<f64> {
    check_tt(variance_divisor, inverse_floor)?;
    let n = stats.n();
    if n < 2 {
        return Err(Error::TooFewRecords { n, min: 2 });
    }
    let full = GaussianSpec::new(
        stats.mean,
        calibrated_noise_variance(stats.variance, variance_divisor, inverse_floor),
    )?;
    let mut acc = 0.0;
    for (&m, &v) in stats.loo_means.iter().zip(&stats.loo_variances) {
        let loo = GaussianSpec::new(m, calibrated_noise_variance(v, variance_divisor, inverse_floor))?;
        acc += kl_gaussian(&full, &loo);
    }
    Ok(acc / n as f64)
}

/// `(1/n) sum_i D(N(mu, V) || N(mu_{-i}, V_{-i}))` with
/// `V = max(var / t, 1 / T)`.
pub fn alkl_one_answer_exact<R, Q>(
    dataset: &Dataset<R>,
    query: &Q,
    variance_divisor: f64,
    inverse_floor: f64,
) -> Result<f64>
where
    Q: StatisticalQuery<R> + ?Sized,
{
    check_tt(variance_divisor, inverse_floor)?;
    let stats = evaluate_query_stats(dataset, query)?;
    alkl_from_stats(&stats, variance_divisor, inverse_floor)
}

/// Data-independent cap on the per-answer ALKL of the calibrated mechanism:
///
/// ```text
/// (1 / 4n^2) * (2t + (T/t)(1 + zeta)) * (1 + zeta)
/// 1 + zeta = (1 + 1/(n-1))^2 * (1 + (T/(t n)) * (1 + 1/(n-1))^2)
/// ```
pub fn alkl_bound_formula(n: usize, variance_divisor: f64, inverse_floor: f64) -> Result<f64> {
    check_tt(variance_divisor, inverse_floor)?;
    if n < 2 {
        return Err(Error::TooFewRecords { n, min: 2 });
    }
    let nf = n as f64;
    let (t, big_t) = (variance_divisor, inverse_floor);
    let inflate = (1.0 + 1.0 / (nf - 1.0)).powi(2);
    let one_plus_zeta = inflate * (1.0 + big_t / (t * nf) * inflate);
    Ok((2.0 * t + big_t / t * one_plus_zeta) * one_plus_zeta / (4.0 * nf * nf))
}

/// `n >= 20` and `T <= min(t^2, t n / 10)`: the regime where the per-answer
/// cap is at most `max(t, T/t) / n^2`.
pub fn in_stability_regime(n: usize, variance_divisor: f64, inverse_floor: f64) -> bool {
    n >= 20
        && inverse_floor <= (variance_divisor * variance_divisor).min(variance_divisor * n as f64 / 10.0)
}

/// Mutual information bound `I(M(S); S) <= eps * n` for product samples.
pub fn mi_from_alkl(epsilon: f64, n: usize) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(param("epsilon", epsilon, "must be nonnegative"));
    }
    Ok(epsilon * n as f64)
}

fn check_eps_tau(epsilon: f64, tau: f64) -> Result<()> {
    if !(epsilon >= 0.0) {
        return Err(param("epsilon", epsilon, "must be nonnegative"));
    }
    if !(tau > 0.0) {
        return Err(param("tau", tau, "must be positive"));
    }
    Ok(())
}

/// Bound on the expected generalization error of the output query in units
/// of `max(sd, tau)`: `2 sqrt(eps)` when `sqrt(eps) <= tau`, otherwise
/// `eps / tau + tau`.
pub fn gen_expectation_bound(epsilon: f64, tau: f64) -> Result<f64> {
    check_eps_tau(epsilon, tau)?;
    let root = epsilon.sqrt();
    Ok(if root <= tau {
        2.0 * root
    } else {
        epsilon / tau + tau
    })
}

/// Bound on the expected squared ratio of empirical to true (floored) sd.
pub fn emp_variance_bound(epsilon: f64, tau: f64) -> Result<f64> {
    check_eps_tau(epsilon, tau)?;
    Ok(2.0 + epsilon / (tau * tau))
}

/// PAC-Bayes style bound on the expected true mean of the output query.
pub fn pac_bayes_bound(emp_mean: f64, mi: f64, n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.5) {
        return Err(param("lambda", lambda, "must exceed 1/2"));
    }
    if !(mi >= 0.0) {
        return Err(param("mi", mi, "must be nonnegative"));
    }
    if n == 0 {
        return Err(Error::TooFewRecords { n, min: 1 });
    }
    Ok((emp_mean + lambda / n as f64 * mi) / (1.0 - 1.0 / (2.0 * lambda)))
}

/// Probability bound for an event of fresh-data probability at most `delta`.
pub fn event_prob_bound(mi: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param("delta", delta, "must lie in (0, 1)"));
    }
    if !(mi >= 0.0) {
        return Err(param("mi", mi, "must be nonnegative"));
    }
    Ok((mi + LN_2) / (1.0 / delta).ln())
}

/// Bound on `P[(S[psi] - P[psi]) / max(sd, tau) > threshold]`:
///
/// ```text
/// (2 + (2/3)(threshold / tau)) / threshold^2 * (eps + ln 2 / n)
/// ```
pub fn tail_bound_bernstein(epsilon: f64, n: usize, tau: f64, threshold: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(param("epsilon", epsilon, "must be positive"));
    }
    if n == 0 {
        return Err(Error::TooFewRecords { n, min: 1 });
    }
    if !(tau > 0.0) {
        return Err(param("tau", tau, "must be positive"));
    }
    if !(threshold > 0.0) {
        return Err(param("threshold", threshold, "must be positive"));
    }
    Ok((2.0 + 2.0 / 3.0 * threshold / tau) / (threshold * threshold) * (epsilon + LN_2 / n as f64))
}

/// Smallest threshold at which [`tail_bound_bernstein`] reaches `beta`.
pub fn tail_level(epsilon: f64, n: usize, tau: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(param("beta", beta, "must lie in (0, 1)"));
    }
    // Validates the remaining arguments.
    tail_bound_bernstein(epsilon, n, tau, 1.0)?;
    let c = epsilon + LN_2 / n as f64;
    // beta x^2 - (2c / 3 tau) x - 2c = 0
    let b = 2.0 * c / (3.0 * tau);
    Ok((b + (b * b + 8.0 * beta * c).sqrt()) / (2.0 * beta))
}

/// `E[max_j xi_j^2] <= 2 ln(2k)` for `k` independent standard normals.
pub fn gauss_max_bound(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(param("k", 0.0, "must be at least 1"));
    }
    Ok(2.0 * (2.0 * k as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLevel {
    pub beta: f64,
    pub level: f64,
}

/// Every bound implied by a total ALKL budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub tau: f64,
    pub mi_bound: f64,
    pub gen_expectation: f64,
    pub emp_variance_factor: f64,
    pub tail: Vec<TailLevel>,
    pub gauss_max: f64,
}

impl BoundReport {
    pub const DEFAULT_BETAS: [f64; 3] = [0.5, 0.1, 0.01];

    pub fn compute(epsilon: f64, n: usize, k: usize, tau: f64, betas: &[f64]) -> Result<Self> {
        let tail = if epsilon > 0.0 {
            betas
                .iter()
                .map(|&beta| {
                    Ok(TailLevel {
                        beta,
                        level: tail_level(epsilon, n, tau, beta)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            epsilon,
            tau,
            mi_bound: mi_from_alkl(epsilon, n)?,
            gen_expectation: gen_expectation_bound(epsilon, tau)?,
            emp_variance_factor: emp_variance_bound(epsilon, tau)?,
            tail,
            gauss_max: gauss_max_bound(k.max(1))?,
        })
    }
}
