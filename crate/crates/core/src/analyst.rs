//! Bit-vector domains with closed-form truth, adaptive analysts, and the
//! worst-query monitor.
//!
//! Records are `d` attribute bits followed by one label bit. Under a
//! [`ProductBernoulli`] truth model every coordinate is independent, so the
//! true mean and standard deviation of each [`BitQuery`] is available in
//! closed form and scaled errors can be measured exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, StatisticalQuery};
use crate::error::{param, Error, Result};
use crate::mechanism::{Analyst, Transcript};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitRecord(pub Vec<bool>);

impl BitRecord {
    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }
}

/// Queries over [`BitRecord`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitQuery {
    Constant(f64),
    /// `x_a`.
    Attribute(usize),
    /// `1{x_attr == x_label}`.
    Agreement { attr: usize, label: usize },
    /// `x_a AND x_b`.
    Conjunction(usize, usize),
    /// Weighted vote predicting the label bit. A vote `(j, true)` predicts
    /// `x_j`, a vote `(j, false)` predicts `!x_j`. Scores 1 when the majority
    /// is right, 0 when wrong and 1/2 on a tie.
    Majority {
        votes: Vec<(usize, bool)>,
        label: usize,
    },
    /// `1 - psi`.
    Complement(Box<BitQuery>),
}

impl BitQuery {
    pub fn complement(self) -> Self {
        match self {
            BitQuery::Complement(inner) => *inner,
            other => BitQuery::Complement(Box::new(other)),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coordinate(&self) -> Option<usize> {
        match self {
            BitQuery::Constant(_) => None,
            BitQuery::Attribute(a) => Some(*a),
            BitQuery::Agreement { attr, label } => Some(*attr.max(label)),
            BitQuery::Conjunction(a, b) => Some(*a.max(b)),
            BitQuery::Majority { votes, label } => {
                Some(votes.iter().map(|v| v.0).fold(*label, usize::max))
            }
            BitQuery::Complement(q) => q.max_coordinate(),
        }
    }
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl StatisticalQuery<BitRecord> for BitQuery {
    fn id(&self) -> String {
        match self {
            BitQuery::Constant(c) => format!("const({c})"),
            BitQuery::Attribute(a) => format!("x{a}"),
            BitQuery::Agreement { attr, label } => format!("x{attr}==x{label}"),
            BitQuery::Conjunction(a, b) => format!("x{a}&x{b}"),
            BitQuery::Majority { votes, label } => format!("maj[{}]->x{label}", votes.len()),
            BitQuery::Complement(q) => format!("1-({})", q.id()),
        }
    }

    fn eval(&self, r: &BitRecord) -> f64 {
        match self {
            BitQuery::Constant(c) => *c,
            BitQuery::Attribute(a) => bit(r.bit(*a)),
            BitQuery::Agreement { attr, label } => bit(r.bit(*attr) == r.bit(*label)),
            BitQuery::Conjunction(a, b) => bit(r.bit(*a) && r.bit(*b)),
            BitQuery::Majority { votes, label } => {
                let y = r.bit(*label);
                let right = votes.iter().filter(|(j, s)| (r.bit(*j) == *s) == y).count();
                let wrong = votes.len() - right;
                match right.cmp(&wrong) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                }
            }
            BitQuery::Complement(q) => 1.0 - q.eval(r),
        }
    }
}

/// Independent Bernoulli coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBernoulli {
    probs: Vec<f64>,
}

impl ProductBernoulli {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(param("p", p, "coordinate probabilities must lie in [0, 1]"));
        }
        Ok(Self { probs })
    }

    /// Every coordinate a fair coin.
    pub fn uniform(width: usize) -> Self {
        Self {
            probs: vec![0.5; width],
        }
    }

    pub fn constant(width: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; width])
    }

    pub fn width(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn p(&self, i: usize) -> Result<f64> {
        self.probs.get(i).copied().ok_or_else(|| {
            Error::Truth(format!(
                "coordinate {i} outside a model of width {}",
                self.probs.len()
            ))
        })
    }

    pub fn sample_record<G: Rng + ?Sized>(&self, rng: &mut G) -> BitRecord {
        BitRecord(self.probs.iter().map(|&p| rng.random_bool(p)).collect())
    }

    pub fn sample_dataset<G: Rng + ?Sized>(&self, n: usize, rng: &mut G) -> Result<Dataset<BitRecord>> {
        Dataset::new((0..n).map(|_| self.sample_record(rng)).collect())
    }

    /// `(P[psi], sd(psi))` under this model.
    pub fn moments(&self, q: &BitQuery) -> Result<(f64, f64)> {
        let (first, second) = self.raw_moments(q)?;
        Ok((first, (second - first * first).max(0.0).sqrt()))
    }

    pub fn true_mean(&self, q: &BitQuery) -> Result<f64> {
        Ok(self.raw_moments(q)?.0)
    }

    pub fn true_sd(&self, q: &BitQuery) -> Result<f64> {
        Ok(self.moments(q)?.1)
    }

    /// `(E[psi], E[psi^2])`.
    fn raw_moments(&self, q: &BitQuery) -> Result<(f64, f64)> {
        Ok(match q {
            BitQuery::Constant(c) => (*c, c * c),
            BitQuery::Attribute(a) => {
                let p = self.p(*a)?;
                (p, p)
            }
            BitQuery::Agreement { attr, label } => {
                let (pa, pl) = (self.p(*attr)?, self.p(*label)?);
                let m = if attr == label {
                    1.0
                } else {
                    pa * pl + (1.0 - pa) * (1.0 - pl)
                };
                (m, m)
            }
            BitQuery::Conjunction(a, b) => {
                let (pa, pb) = (self.p(*a)?, self.p(*b)?);
                let m = if a == b { pa } else { pa * pb };
                (m, m)
            }
            BitQuery::Majority { votes, label } => self.majority_moments(votes, *label)?,
            BitQuery::Complement(inner) => {
                let (m1, m2) = self.raw_moments(inner)?;
                // E[(1 - X)^2] = 1 - 2 E[X] + E[X^2]
                (1.0 - m1, 1.0 - 2.0 * m1 + m2)
            }
        })
    }

    fn majority_moments(&self, votes: &[(usize, bool)], label: usize) -> Result<(f64, f64)> {
        let mut seen = vec![false; self.probs.len()];
        for &(j, _) in votes {
            self.p(j)?;
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::Truth(format!("coordinate {j} votes twice")));
            }
        }
        let pl = self.p(label)?;
        let m = votes.len();
        let (mut first, mut second) = (0.0, 0.0);
        for (y, py) in [(true, pl), (false, 1.0 - pl)] {
            if py == 0.0 {
                continue;
            }
            // dist[c] = P[c correct votes | label = y]
            let mut dist = vec![0.0; m + 1];
            dist[0] = 1.0;
            for (used, &(j, s)) in votes.iter().enumerate() {
                let right = if j == label {
                    bit(s)
                } else {
                    let pj = self.probs[j];
                    let p_pred_true = if s { pj } else { 1.0 - pj };
                    if y {
                        p_pred_true
                    } else {
                        1.0 - p_pred_true
                    }
                };
                for c in (0..=used + 1).rev() {
                    let stay = dist[c] * (1.0 - right);
                    let step = if c > 0 { dist[c - 1] * right } else { 0.0 };
                    dist[c] = stay + step;
                }
            }
            let (mut win, mut tie) = (0.0, 0.0);
            for (c, &pc) in dist.iter().enumerate() {
                match (2 * c).cmp(&m) {
                    std::cmp::Ordering::Greater => win += pc,
                    std::cmp::Ordering::Equal => tie += pc,
                    std::cmp::Ordering::Less => {}
                }
            }
            first += py * (win + 0.5 * tie);
            second += py * (win + 0.25 * tie);
        }
        Ok((first, second))
    }
}

/// Query-choosing strategy of a [`BitAnalyst`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Scripted { queries: Vec<BitQuery> },
    /// Each query is a uniformly drawn attribute among the first `d`.
    RandomQueries { d: usize },
    /// Agreement queries between attribute `j` and the label for the first
    /// `k - 1` rounds, then a majority vote over the attributes whose
    /// answered agreement deviates from 1/2 by more than `threshold`.
    CorrelationAttack { d: usize, threshold: f64 },
    /// First half: random attributes. Second half: conjunctions of the two
    /// attributes with the largest answers so far.
    LowVariance { d: usize, p0: f64 },
}

impl Strategy {
    /// Coordinates in each record the strategy needs.
    pub fn width(&self) -> usize {
        match self {
            Strategy::Scripted { queries } => queries
                .iter()
                .filter_map(BitQuery::max_coordinate)
                .max()
                .map_or(0, |m| m + 1),
            Strategy::RandomQueries { d } | Strategy::LowVariance { d, .. } => *d,
            Strategy::CorrelationAttack { d, .. } => d + 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BitAnalyst {
    strategy: Strategy,
    k: usize,
    seed: u64,
    rng: ChaCha8Rng,
    /// Attribute behind each answered query, where there is one.
    asked: Vec<Option<usize>>,
}

impl BitAnalyst {
    pub fn new(strategy: Strategy, k: usize, seed: u64) -> Result<Self> {
        match &strategy {
            Strategy::Scripted { .. } => {}
            Strategy::RandomQueries { d } => {
                if *d == 0 {
                    return Err(Error::Config("random_queries needs d >= 1".into()));
                }
            }
            Strategy::CorrelationAttack { d, threshold } => {
                if k > 0 && *d < k - 1 {
                    return Err(Error::Config(format!(
                        "correlation_attack needs d >= k - 1, got d = {d}, k = {k}"
                    )));
                }
                if !(*threshold >= 0.0) {
                    return Err(param("threshold", *threshold, "must be nonnegative"));
                }
            }
            Strategy::LowVariance { d, p0 } => {
                if *d < 2 {
                    return Err(Error::Config("low_variance needs d >= 2".into()));
                }
                if !(0.0..=1.0).contains(p0) {
                    return Err(param("p0", *p0, "must lie in [0, 1]"));
                }
            }
        }
        Ok(Self {
            strategy,
            k,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            asked: Vec::new(),
        })
    }

    pub fn scripted(queries: Vec<BitQuery>) -> Self {
        let k = queries.len();
        Self::new(Strategy::Scripted { queries }, k, 0).expect("scripted strategies are always valid")
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    fn correlation_final(&self, d: usize, threshold: f64, history: &[f64]) -> BitQuery {
        let votes: Vec<(usize, bool)> = history
            .iter()
            .enumerate()
            .filter(|(_, a)| (**a - 0.5).abs() > threshold)
            .map(|(j, a)| (j, *a > 0.5))
            .collect();
        if votes.is_empty() {
            BitQuery::Constant(0.5)
        } else {
            BitQuery::Majority { votes, label: d }
        }
    }

    fn top_two(&self, history: &[f64]) -> Option<(usize, usize)> {
        let mut best: Vec<(f64, usize)> = Vec::new();
        for (a, attr) in history.iter().zip(&self.asked) {
            if let Some(attr) = *attr {
                match best.iter_mut().find(|(_, b)| *b == attr) {
                    Some(entry) => entry.0 = entry.0.max(*a),
                    None => best.push((*a, attr)),
                }
            }
        }
        // Stable sort keeps the earliest attribute first on ties.
        best.sort_by(|x, y| y.0.total_cmp(&x.0));
        match best.as_slice() {
            [first, second, ..] => Some((first.1, second.1)),
            _ => None,
        }
    }
}

impl Analyst<BitRecord> for BitAnalyst {
    type Query = BitQuery;

    fn next_query(&mut self, history: &[f64]) -> Result<BitQuery> {
        let j = self.asked.len();
        if history.len() != j {
            return Err(Error::Protocol(format!(
                "analyst asked {j} queries but received {} answers",
                history.len()
            )));
        }
        if j >= self.k {
            return Err(Error::Protocol(format!("analyst exhausted after {j} queries")));
        }
        let (q, attr) = match &self.strategy {
            Strategy::Scripted { queries } => match queries.get(j) {
                Some(q) => (q.clone(), None),
                None => {
                    return Err(Error::Protocol(format!(
                        "scripted analyst exhausted after {j} queries"
                    )))
                }
            },
            Strategy::RandomQueries { d } => {
                let a = self.rng.random_range(0..*d);
                (BitQuery::Attribute(a), Some(a))
            }
            Strategy::CorrelationAttack { d, threshold } => {
                if j + 1 < self.k {
                    (BitQuery::Agreement { attr: j, label: *d }, None)
                } else {
                    (self.correlation_final(*d, *threshold, history), None)
                }
            }
            Strategy::LowVariance { d, .. } => {
                let explore = self.k.div_ceil(2);
                let pair = if j < explore { None } else { self.top_two(history) };
                match pair {
                    Some((a, b)) => (BitQuery::Conjunction(a, b), None),
                    None => {
                        let a = self.rng.random_range(0..*d);
                        (BitQuery::Attribute(a), Some(a))
                    }
                }
            }
        };
        self.asked.push(attr);
        Ok(q)
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }
}

/// Index of the answer with the worst error in units of `max(sd, tau)`,
/// and that query oriented so the answer overshoots its true mean.
///
/// Ties go to the lowest index.
pub fn monitor_select(
    transcript: &Transcript<BitQuery>,
    truth: &ProductBernoulli,
    tau: f64,
) -> Result<(usize, BitQuery)> {
    if transcript.is_empty() {
        return Err(Error::Protocol("cannot select from an empty transcript".into()));
    }
    if !(tau > 0.0) {
        return Err(param("tau", tau, "must be positive"));
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for (j, (q, &v)) in transcript.queries.iter().zip(&transcript.answers).enumerate() {
        let (mean, sd) = truth.moments(q)?;
        let score = (v - mean).abs() / sd.max(tau);
        if best.is_none_or(|(_, s, _)| score > s) {
            best = Some((j, score, v - mean));
        }
    }
    let (j, _, signed) = best.expect("transcript is nonempty");
    let q = transcript.queries[j].clone();
    Ok((j, if signed < 0.0 { q.complement() } else { q }))
}
