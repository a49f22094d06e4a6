//! Query-answering mechanisms and the interaction protocol.
//!
//! The calibrated mechanism answers a statistical query `psi` with
//!
//! ```text
//! v = mu + xi * sqrt(max(var / t, 1 / T)),   xi ~ N(0, 1)
//! ```
//!
//! where `mu` and `var` are the empirical mean and variance of `psi`. The
//! noise shrinks for low-variance queries but never drops below `1 / T`.
//! Answers are emitted raw; [`Transcript::clamped_answers`] is the only
//! place they are ever clipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{query_values, Dataset, QueryStats, StatisticalQuery};
use crate::error::{param, Error, Result};
use crate::stability::{
    alkl_bound_formula, alkl_from_stats, calibrated_noise_variance, in_stability_regime,
    StabilityLedger,
};

/// Smallest `n` and `k` accepted by [`params_from_main_theorem`].
pub const THEOREM_MIN: usize = 20;

/// Parameters of the calibrated mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    /// Divisor applied to the empirical variance (`t`).
    #[serde(rename = "t")]
    pub variance_divisor: f64,
    /// Reciprocal of the noise-variance floor (`T`).
    #[serde(rename = "T")]
    pub inverse_floor: f64,
    pub n: usize,
    pub k: usize,
}

impl CalibrationParams {
    pub fn new(n: usize, k: usize, variance_divisor: f64, inverse_floor: f64) -> Result<Self> {
        if !(variance_divisor > 0.0 && variance_divisor.is_finite()) {
            return Err(param("t", variance_divisor, "must be positive and finite"));
        }
        if !(inverse_floor > 0.0 && inverse_floor.is_finite()) {
            return Err(param("T", inverse_floor, "must be positive and finite"));
        }
        if n < 2 {
            return Err(Error::TooFewRecords { n, min: 2 });
        }
        Ok(Self {
            variance_divisor,
            inverse_floor,
            n,
            k,
        })
    }

    /// Whether `n >= 20` and `T <= min(t^2, t n / 10)`.
    pub fn in_stability_regime(&self) -> bool {
        in_stability_regime(self.n, self.variance_divisor, self.inverse_floor)
    }

    pub fn noise_variance(&self, empirical_variance: f64) -> f64 {
        calibrated_noise_variance(empirical_variance, self.variance_divisor, self.inverse_floor)
    }

    /// Data-independent cap on the ALKL of a single answer.
    pub fn per_answer_cap(&self) -> f64 {
        alkl_bound_formula(self.n, self.variance_divisor, self.inverse_floor)
            .expect("validated on construction")
    }

    /// `k * t / n^2`.
    pub fn theorem_budget(&self) -> f64 {
        self.k as f64 * self.variance_divisor / (self.n as f64 * self.n as f64)
    }
}

/// Error scale parameter `tau = sqrt(sqrt(2k ln 2k) / n)`.
///
/// Zero when `k = 0`.
pub fn theorem_tau(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    ((2.0 * kf * (2.0 * kf).ln()).sqrt() / n as f64).sqrt()
}

/// `T = n^2 / k`, `t = n sqrt(2 ln(2k) / k)` and the matching `tau`.
///
/// With these choices `k t / n^2 = tau^2`.
pub fn params_from_main_theorem(n: usize, k: usize) -> Result<(CalibrationParams, f64)> {
    if n < THEOREM_MIN {
        return Err(Error::Regime(format!(
            "n = {n} is below the minimum of {THEOREM_MIN}"
        )));
    }
    if k < THEOREM_MIN {
        return Err(Error::Regime(format!(
            "k = {k} is below the minimum of {THEOREM_MIN}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let inverse_floor = nf * nf / kf;
    let variance_divisor = nf * (2.0 * (2.0 * kf).ln() / kf).sqrt();
    let params = CalibrationParams::new(n, k, variance_divisor, inverse_floor)?;
    Ok((params, theorem_tau(n, k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismKind {
    Calibrated(CalibrationParams),
    /// Exact empirical mean.
    Empirical,
    /// Empirical mean plus `N(0, sd^2)`.
    FixedGaussian { sd: f64 },
    /// Empirical mean over the `j`-th of `k` disjoint chunks.
    Split,
}

/// Single-interaction state of a mechanism over a borrowed dataset.
///
/// Not shareable between threads while answering; distinct states over the
/// same dataset are independent.
#[derive(Debug)]
pub struct Mechanism<'a, R> {
    dataset: &'a Dataset<R>,
    kind: MechanismKind,
    budget: usize,
    answered: usize,
    seed: u64,
    rng: ChaCha8Rng,
    ledger: StabilityLedger,
    zero_noise: bool,
}

impl<'a, R> Mechanism<'a, R> {
    pub fn new(dataset: &'a Dataset<R>, kind: MechanismKind, budget: usize, seed: u64) -> Result<Self> {
        let n = dataset.len();
        match kind {
            MechanismKind::Calibrated(p) => {
                if p.n != n {
                    return Err(Error::Config(format!(
                        "calibration was derived for n = {} but the dataset has {n} records",
                        p.n
                    )));
                }
                if budget > p.k {
                    return Err(Error::Config(format!(
                        "budget {budget} exceeds the calibrated query count k = {}",
                        p.k
                    )));
                }
            }
            MechanismKind::FixedGaussian { sd } => {
                if !(sd >= 0.0 && sd.is_finite()) {
                    return Err(param("sd", sd, "must be nonnegative and finite"));
                }
            }
            MechanismKind::Split => {
                if n < budget {
                    return Err(Error::Config(format!(
                        "split needs at least one record per query, got n = {n} < k = {budget}"
                    )));
                }
            }
            MechanismKind::Empirical => {}
        }
        Ok(Self {
            dataset,
            kind,
            budget,
            answered: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ledger: StabilityLedger::new(n),
            zero_noise: false,
        })
    }

    /// Test hook: every subsequent noise draw is replaced by zero.
    pub fn force_zero_noise(&mut self) {
        self.zero_noise = true;
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn answered(&self) -> usize {
        self.answered
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.answered
    }

    pub fn ledger(&self) -> &StabilityLedger {
        &self.ledger
    }

    fn gaussian(&mut self) -> f64 {
        if self.zero_noise {
            0.0
        } else {
            self.rng.sample(StandardNormal)
        }
    }

    /// Answers one query and records its stability cost.
    pub fn answer<Q>(&mut self, query: &Q) -> Result<f64>
    where
        Q: StatisticalQuery<R> + ?Sized,
    {
        if self.answered >= self.budget {
            return Err(Error::BudgetExhausted {
                budget: self.budget,
            });
        }
        let values = query_values(self.dataset.records(), query)?;
        let stats = QueryStats::from_values(&values)?;
        let n = values.len();
        let constant = values.iter().all(|&v| v == values[0]);
        let point_mass_cost = if constant { 0.0 } else { f64::INFINITY };

        let (answer, exact, cap) = match self.kind {
            MechanismKind::Calibrated(p) => {
                let sd = p.noise_variance(stats.variance).sqrt();
                let xi = self.gaussian();
                let exact = alkl_from_stats(&stats, p.variance_divisor, p.inverse_floor)?;
                (stats.mean + xi * sd, exact, p.per_answer_cap())
            }
            MechanismKind::Empirical => (stats.mean, point_mass_cost, f64::INFINITY),
            MechanismKind::FixedGaussian { sd } if sd == 0.0 => {
                (stats.mean, point_mass_cost, f64::INFINITY)
            }
            MechanismKind::FixedGaussian { sd } => {
                let xi = self.gaussian();
                let shift: f64 = stats
                    .loo_means
                    .iter()
                    .map(|m| (stats.mean - m) * (stats.mean - m))
                    .sum::<f64>()
                    / n as f64;
                let denom = 2.0 * sd * sd;
                // Worst case of the average squared shift is 1 / (4 (n-1)^2).
                let m1 = (n - 1) as f64;
                (stats.mean + xi * sd, shift / denom, 1.0 / (4.0 * m1 * m1 * denom))
            }
            MechanismKind::Split => {
                let j = self.answered;
                let lo = j * n / self.budget;
                let hi = (j + 1) * n / self.budget;
                let chunk = &values[lo..hi];
                let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
                (mean, point_mass_cost, f64::INFINITY)
            }
        };
        self.ledger.record(exact, cap)?;
        self.answered += 1;
        Ok(answer)
    }
}

/// Seeds that determine an interaction besides the dataset itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub analyst: Option<u64>,
    pub mechanism: u64,
}

/// Ordered record of one interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript<Q> {
    pub queries: Vec<Q>,
    pub answers: Vec<f64>,
    pub seeds: SeedRecord,
    /// Protocol error that aborted the interaction, if any.
    pub error: Option<String>,
}

impl<Q> Transcript<Q> {
    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    /// Answers clipped to `[0, 1]`.
    pub fn clamped_answers(&self) -> Vec<f64> {
        self.answers.iter().map(|a| a.clamp(0.0, 1.0)).collect()
    }
}

/// An adaptive data analyst.
///
/// The next query may depend only on the answers received so far and on the
/// analyst's own seeded randomness.
pub trait Analyst<R> {
    type Query: StatisticalQuery<R> + Clone;

    fn next_query(&mut self, history: &[f64]) -> Result<Self::Query>;

    fn seed(&self) -> Option<u64> {
        None
    }
}

/// Replays a fixed list of queries.
#[derive(Debug, Clone)]
pub struct ScriptedAnalyst<Q> {
    queries: Vec<Q>,
    next: usize,
}

impl<Q> ScriptedAnalyst<Q> {
    pub fn new(queries: Vec<Q>) -> Self {
        Self { queries, next: 0 }
    }
}

impl<R, Q> Analyst<R> for ScriptedAnalyst<Q>
where
    Q: StatisticalQuery<R> + Clone,
{
    type Query = Q;

    fn next_query(&mut self, _history: &[f64]) -> Result<Q> {
        let q = self.queries.get(self.next).cloned().ok_or_else(|| {
            Error::Protocol(format!("scripted analyst exhausted after {} queries", self.next))
        })?;
        self.next += 1;
        Ok(q)
    }
}

/// Runs `k` rounds of query/answer alternation.
///
/// An analyst failure or an invalid query is recorded in the transcript and
/// ends the interaction early; the failing query is not recorded.
pub fn run_interaction<R, A>(
    analyst: &mut A,
    mechanism: &mut Mechanism<'_, R>,
    k: usize,
) -> Result<Transcript<A::Query>>
where
    A: Analyst<R> + ?Sized,
{
    if mechanism.remaining() < k {
        return Err(Error::Config(format!(
            "mechanism has {} answers left but the interaction needs {k}",
            mechanism.remaining()
        )));
    }
    let mut transcript = Transcript {
        queries: Vec::with_capacity(k),
        answers: Vec::with_capacity(k),
        seeds: SeedRecord {
            analyst: analyst.seed(),
            mechanism: mechanism.seed(),
        },
        error: None,
    };
    for _ in 0..k {
        let step = analyst
            .next_query(&transcript.answers)
            .and_then(|q| mechanism.answer(&q).map(|a| (q, a)));
        match step {
            Ok((q, a)) => {
                transcript.queries.push(q);
                transcript.answers.push(a);
            }
            Err(e) => {
                transcript.error = Some(e.to_string());
                break;
            }
        }
    }
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FnQuery;

    fn identity() -> FnQuery<f64> {
        FnQuery::new("id", |x: &f64| *x)
    }

    #[test]
    fn theorem_params_examples() {
        let (p, tau) = params_from_main_theorem(100, 20).unwrap();
        assert!((p.inverse_floor - 500.0).abs() < 1e-12);
        assert!((p.variance_divisor - 60.736).abs() < 1e-3);
        assert!((tau - 0.348_529).abs() < 1e-6);
        assert!(p.in_stability_regime());

        let (p4, tau4) = params_from_main_theorem(400, 20).unwrap();
        assert!((p4.inverse_floor - 8000.0).abs() < 1e-9);
        assert!((p4.variance_divisor - 242.94).abs() < 1e-2);
        assert!((tau4 - tau / 2.0).abs() < 1e-12);

        let (p20, tau20) = params_from_main_theorem(20, 20).unwrap();
        assert!(p20.in_stability_regime());
        assert!((p20.theorem_budget() - tau20 * tau20).abs() < 1e-12);
    }

    #[test]
    fn theorem_params_reject_small() {
        match params_from_main_theorem(19, 50) {
            Err(Error::Regime(msg)) => assert!(msg.contains("n = 19")),
            other => panic!("{other:?}"),
        }
        match params_from_main_theorem(50, 3) {
            Err(Error::Regime(msg)) => assert!(msg.contains("k = 3")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_query_zero_noise_returns_constant() {
        let ds = Dataset::new(vec![0.1, 0.5, 0.8]).unwrap();
        let p = CalibrationParams::new(3, 2, 2.0, 5.0).unwrap();
        let mut m = Mechanism::new(&ds, MechanismKind::Calibrated(p), 2, 1).unwrap();
        m.force_zero_noise();
        assert_eq!(m.answer(&FnQuery::constant(0.25)).unwrap(), 0.25);
        assert_eq!(m.ledger().per_answer_alkl(), &[0.0]);
    }

    #[test]
    fn noise_sd_examples() {
        let p = CalibrationParams::new(2, 1, 1.0, 1.0).unwrap();
        assert_eq!(p.noise_variance(0.25).sqrt(), 1.0);

        let (p, _) = params_from_main_theorem(100, 20).unwrap();
        let sd = p.noise_variance(0.16).sqrt();
        assert!((sd - 0.05132).abs() < 1e-4);
        assert!((p.noise_variance(0.16) - 0.16 / p.variance_divisor).abs() < 1e-15);
    }

    #[test]
    fn calibrated_answer_is_reproducible_and_floored() {
        let ds = Dataset::new((0..100).map(|i| (i % 5) as f64 / 4.0).collect()).unwrap();
        let (p, _) = params_from_main_theorem(100, 20).unwrap();
        let run = |seed| {
            let mut m = Mechanism::new(&ds, MechanismKind::Calibrated(p), 20, seed).unwrap();
            (0..20).map(|_| m.answer(&identity()).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
        assert!(p.noise_variance(0.0) >= 1.0 / p.inverse_floor);
    }

    #[test]
    fn budget_is_enforced() {
        let ds = Dataset::new(vec![0.0, 1.0]).unwrap();
        let mut m = Mechanism::new(&ds, MechanismKind::Empirical, 1, 0).unwrap();
        m.answer(&identity()).unwrap();
        assert!(matches!(
            m.answer(&identity()),
            Err(Error::BudgetExhausted { budget: 1 })
        ));
        assert_eq!(m.ledger().len(), 1);
    }

    #[test]
    fn baselines() {
        let ds = Dataset::new(vec![0.0, 1.0]).unwrap();
        let mut m = Mechanism::new(&ds, MechanismKind::Empirical, 1, 0).unwrap();
        assert_eq!(m.answer(&identity()).unwrap(), 0.5);
        assert!(m.ledger().epsilon_total().is_infinite());

        let mut g = Mechanism::new(&ds, MechanismKind::FixedGaussian { sd: 0.0 }, 1, 3).unwrap();
        assert_eq!(g.answer(&identity()).unwrap(), 0.5);

        let ds4 = Dataset::new(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let mut s = Mechanism::new(&ds4, MechanismKind::Split, 2, 0).unwrap();
        assert_eq!(s.answer(&identity()).unwrap(), 0.0);
        assert_eq!(s.answer(&identity()).unwrap(), 1.0);

        assert!(matches!(
            Mechanism::new(&ds, MechanismKind::Split, 3, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fixed_gaussian_ledger_matches_shift_formula() {
        let vals = vec![0.1, 0.9, 0.3, 0.35, 0.7];
        let ds = Dataset::new(vals.clone()).unwrap();
        let sd = 0.2;
        let mut g = Mechanism::new(&ds, MechanismKind::FixedGaussian { sd }, 1, 3).unwrap();
        g.answer(&identity()).unwrap();
        let s = QueryStats::from_values(&vals).unwrap();
        let expected = s.variance / (2.0 * sd * sd * 16.0);
        assert!((g.ledger().epsilon_total() - expected).abs() < 1e-14);
        assert!(g.ledger().epsilon_total() <= g.ledger().cap_total());
    }

    #[test]
    fn zero_noise_calibrated_equals_empirical() {
        let vals: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let ds = Dataset::new(vals).unwrap();
        let p = CalibrationParams::new(30, 3, 4.0, 9.0).unwrap();
        let mut c = Mechanism::new(&ds, MechanismKind::Calibrated(p), 3, 5).unwrap();
        c.force_zero_noise();
        let mut e = Mechanism::new(&ds, MechanismKind::Empirical, 3, 5).unwrap();
        for _ in 0..3 {
            assert_eq!(c.answer(&identity()).unwrap(), e.answer(&identity()).unwrap());
        }
    }

    #[test]
    fn interaction_protocol() {
        let ds = Dataset::new(vec![0.2, 0.4, 0.9, 0.5]).unwrap();
        let mut m = Mechanism::new(&ds, MechanismKind::Empirical, 3, 0).unwrap();
        let mut a = ScriptedAnalyst::new(vec![
            identity(),
            FnQuery::new("sq", |x: &f64| x * x),
            FnQuery::constant(0.7),
        ]);
        let t = run_interaction(&mut a, &mut m, 3).unwrap();
        assert!(t.error.is_none());
        assert_eq!(t.len(), 3);
        assert!((t.answers[0] - 0.5).abs() < 1e-15);
        assert!((t.answers[1] - 0.315).abs() < 1e-15);
        assert!((t.answers[2] - 0.7).abs() < 1e-15);

        let mut m0 = Mechanism::new(&ds, MechanismKind::Empirical, 0, 0).unwrap();
        let mut a0 = ScriptedAnalyst::<FnQuery<f64>>::new(vec![]);
        assert!(run_interaction(&mut a0, &mut m0, 0).unwrap().is_empty());
    }

    #[test]
    fn invalid_query_aborts_interaction() {
        let ds = Dataset::new(vec![0.2, 0.4]).unwrap();
        let mut m = Mechanism::new(&ds, MechanismKind::Empirical, 3, 0).unwrap();
        let mut a = ScriptedAnalyst::new(vec![identity(), FnQuery::new("big", |x: &f64| x + 1.0)]);
        let t = run_interaction(&mut a, &mut m, 3).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.queries.len(), 1);
        assert!(t.error.unwrap().contains("big"));

        let mut short = ScriptedAnalyst::new(vec![identity()]);
        let mut m2 = Mechanism::new(&ds, MechanismKind::Empirical, 2, 0).unwrap();
        let t = run_interaction(&mut short, &mut m2, 2).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.error.unwrap().contains("exhausted"));
    }

    #[test]
    fn clamp_is_a_separate_transform() {
        let t: Transcript<()> = Transcript {
            queries: vec![(), (), ()],
            answers: vec![-0.2, 0.5, 1.3],
            seeds: SeedRecord {
                analyst: None,
                mechanism: 0,
            },
            error: None,
        };
        assert_eq!(t.clamped_answers(), vec![0.0, 0.5, 1.0]);
        assert_eq!(t.answers[0], -0.2);
    }
}
