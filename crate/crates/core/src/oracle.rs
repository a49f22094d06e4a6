//! Exact enumeration over tiny discrete mechanisms.
//!
//! Inputs are tuples over `{0, .., d-1}` of length `n` (and `n - 1` for the
//! leave-one-out kernels), encoded little-endian in base `d`. Everything here
//! is computed by direct summation, with no estimators, so it can serve as
//! ground truth for the stability accounting.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::divergence::{kl_probs, DiscreteDistribution, MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::stability::{event_prob_bound, pac_bayes_bound};

/// Largest joint table (inputs times outputs) any enumeration may build.
pub const CELL_LIMIT: u128 = 1_000_000;

/// Violations smaller than this are treated as rounding.
pub const CHAIN_TOLERANCE: f64 = 1e-9;

/// Joint tables up to this many cells have every event enumerated.
pub const FULL_EVENT_CELLS: usize = 16;

fn guard(domain: usize, n: usize, outputs: usize) -> Result<usize> {
    let cells = (domain as u128)
        .checked_pow(n as u32)
        .and_then(|c| c.checked_mul(outputs as u128))
        .unwrap_or(u128::MAX);
    if cells > CELL_LIMIT {
        return Err(Error::SizeGuard {
            cells,
            limit: CELL_LIMIT,
        });
    }
    Ok(domain.pow(n as u32))
}

/// Tuple with code `code`, length `len`.
pub fn decode(code: usize, domain: usize, len: usize) -> Vec<usize> {
    let mut c = code;
    (0..len)
        .map(|_| {
            let x = c % domain;
            c /= domain;
            x
        })
        .collect()
}

pub fn encode(tuple: &[usize], domain: usize) -> usize {
    tuple.iter().rev().fold(0, |acc, &x| acc * domain + x)
}

fn check_row(row: &[f64], outputs: usize, what: &str) -> Result<()> {
    if row.len() != outputs {
        return Err(Error::Distribution(format!(
            "{what}: row has {} entries, expected {outputs}",
            row.len()
        )));
    }
    if row.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Distribution(format!("{what}: negative or NaN mass")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE * outputs as f64 {
        return Err(Error::Distribution(format!("{what}: row sums to {total}")));
    }
    Ok(())
}

/// Output distributions for every input of length `n` and `n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMechanism {
    domain: usize,
    n: usize,
    outputs: usize,
    full: Vec<Vec<f64>>,
    loo: Vec<Vec<f64>>,
}

impl DiscreteMechanism {
    /// Builds both kernel tables from one function of the input tuple,
    /// which is called with tuples of length `n` and `n - 1`.
    pub fn new<F>(domain: usize, n: usize, outputs: usize, kernel: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> Vec<f64>,
    {
        Self::check_shape(domain, n, outputs)?;
        let rows = guard(domain, n, outputs)?;
        let full = (0..rows).map(|c| kernel(&decode(c, domain, n))).collect();
        let loo = (0..rows / domain)
            .map(|c| kernel(&decode(c, domain, n - 1)))
            .collect();
        Self::from_tables(domain, n, outputs, full, loo)
    }

    pub fn from_tables(
        domain: usize,
        n: usize,
        outputs: usize,
        full: Vec<Vec<f64>>,
        loo: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::check_shape(domain, n, outputs)?;
        let rows = guard(domain, n, outputs)?;
        if full.len() != rows || loo.len() != rows / domain {
            return Err(Error::Distribution(format!(
                "expected {rows} full and {} leave-one-out rows, got {} and {}",
                rows / domain,
                full.len(),
                loo.len()
            )));
        }
        for (c, row) in full.iter().enumerate() {
            check_row(row, outputs, &format!("input {:?}", decode(c, domain, n)))?;
        }
        for (c, row) in loo.iter().enumerate() {
            check_row(row, outputs, &format!("input {:?}", decode(c, domain, n - 1)))?;
        }
        Ok(Self {
            domain,
            n,
            outputs,
            full,
            loo,
        })
    }

    /// Independent random rows; each entry is zeroed with probability
    /// `sparsity`, keeping at least one positive entry per row.
    pub fn random<G: Rng + ?Sized>(
        domain: usize,
        n: usize,
        outputs: usize,
        sparsity: f64,
        rng: &mut G,
    ) -> Result<Self> {
        Self::check_shape(domain, n, outputs)?;
        let rows = guard(domain, n, outputs)?;
        let row = |rng: &mut G| {
            let keep = rng.random_range(0..outputs);
            let mut w: Vec<f64> = (0..outputs)
                .map(|o| {
                    let x: f64 = rng.sample(Exp1);
                    if o != keep && rng.random_bool(sparsity) {
                        0.0
                    } else {
                        x
                    }
                })
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            w
        };
        let full = (0..rows).map(|_| row(rng)).collect();
        let loo = (0..rows / domain).map(|_| row(rng)).collect();
        Self::from_tables(domain, n, outputs, full, loo)
    }

    fn check_shape(domain: usize, n: usize, outputs: usize) -> Result<()> {
        if domain == 0 || n == 0 || outputs == 0 {
            return Err(Error::Config(format!(
                "domain, n and outputs must be positive, got {domain}, {n}, {outputs}"
            )));
        }
        Ok(())
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.full.len()
    }

    pub fn row(&self, code: usize) -> &[f64] {
        &self.full[code]
    }

    /// Output distribution on the input with code `code` after removing
    /// position `i`.
    pub fn loo_row(&self, code: usize, i: usize) -> &[f64] {
        let mut t = decode(code, self.domain, self.n);
        t.remove(i);
        &self.loo[encode(&t, self.domain)]
    }

    /// `(1/n) sum_i D(M(s) || M(s_{-i}))` for one input.
    pub fn alkl_at(&self, code: usize) -> f64 {
        (0..self.n)
            .map(|i| kl_probs(&self.full[code], self.loo_row(code, i)))
            .sum::<f64>()
            / self.n as f64
    }
}

/// Independent, not necessarily identical, coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPrior {
    marginals: Vec<Vec<f64>>,
}

impl ProductPrior {
    pub fn new(marginals: Vec<Vec<f64>>) -> Result<Self> {
        let Some(domain) = marginals.first().map(Vec::len) else {
            return Err(Error::Distribution("prior needs at least one coordinate".into()));
        };
        for (i, m) in marginals.iter().enumerate() {
            check_row(m, domain, &format!("marginal {i}"))?;
        }
        Ok(Self { marginals })
    }

    pub fn uniform(domain: usize, n: usize) -> Self {
        Self {
            marginals: vec![vec![1.0 / domain as f64; domain]; n],
        }
    }

    /// Every coordinate drawn with the same marginal.
    pub fn iid(marginal: Vec<f64>, n: usize) -> Result<Self> {
        Self::new(vec![marginal; n])
    }

    pub fn random<G: Rng + ?Sized>(domain: usize, n: usize, rng: &mut G) -> Self {
        let marginals = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..domain).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect()
            })
            .collect();
        Self { marginals }
    }

    pub fn n(&self) -> usize {
        self.marginals.len()
    }

    pub fn domain(&self) -> usize {
        self.marginals[0].len()
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn prob(&self, tuple: &[usize]) -> f64 {
        tuple.iter().zip(&self.marginals).map(|(&x, m)| m[x]).product()
    }

    /// Probability of every tuple, by code.
    pub fn joint(&self) -> Result<DiscreteDistribution> {
        let (d, n) = (self.domain(), self.n());
        let rows = guard(d, n, 1)?;
        DiscreteDistribution::from_probs((0..rows).map(|c| self.prob(&decode(c, d, n))).collect())
    }
}

fn check_compatible(prior: &ProductPrior, mech: &DiscreteMechanism) -> Result<()> {
    if prior.n() != mech.n || prior.domain() != mech.domain {
        return Err(Error::Config(format!(
            "prior over {}^{} does not match mechanism inputs {}^{}",
            prior.domain(),
            prior.n(),
            mech.domain,
            mech.n
        )));
    }
    Ok(())
}

fn output_marginal(prior: &[f64], mech: &DiscreteMechanism) -> Vec<f64> {
    let mut py = vec![0.0; mech.outputs];
    for (ps, row) in prior.iter().zip(&mech.full) {
        for (acc, m) in py.iter_mut().zip(row) {
            *acc += ps * m;
        }
    }
    py
}

/// `I(S; M(S))` for an arbitrary prior over input codes.
pub fn exact_mutual_information(prior: &DiscreteDistribution, mech: &DiscreteMechanism) -> Result<f64> {
    if prior.len() != mech.inputs() {
        return Err(Error::Config(format!(
            "prior has {} atoms, mechanism has {} inputs",
            prior.len(),
            mech.inputs()
        )));
    }
    let py = output_marginal(prior.probs(), mech);
    Ok(prior
        .probs()
        .iter()
        .zip(&mech.full)
        .filter(|(ps, _)| **ps > 0.0)
        .map(|(ps, row)| ps * kl_probs(row, &py))
        .sum::<f64>()
        .max(0.0))
}

/// Worst-case ALKL over every input; may be infinite.
pub fn exact_alkl(mech: &DiscreteMechanism) -> f64 {
    (0..mech.inputs())
        .map(|c| mech.alkl_at(c))
        .fold(0.0, f64::max)
}

/// `I(M(S); S_i | S_{-i})` under a product prior.
pub fn conditional_mutual_information(
    prior: &ProductPrior,
    mech: &DiscreteMechanism,
    i: usize,
) -> Result<f64> {
    check_compatible(prior, mech)?;
    if i >= mech.n {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: mech.n,
        });
    }
    let (d, n) = (mech.domain, mech.n);
    let pi = &prior.marginals[i];
    let mut total = 0.0;
    for rest in 0..mech.inputs() / d {
        let mut others = decode(rest, d, n - 1);
        let p_rest: f64 = others
            .iter()
            .enumerate()
            .map(|(j, &x)| prior.marginals[if j < i { j } else { j + 1 }][x])
            .product();
        if p_rest == 0.0 {
            continue;
        }
        others.insert(i, 0);
        let codes: Vec<usize> = (0..d)
            .map(|x| {
                others[i] = x;
                encode(&others, d)
            })
            .collect();
        let mut mix = vec![0.0; mech.outputs];
        for (&c, &px) in codes.iter().zip(pi) {
            for (acc, m) in mix.iter_mut().zip(&mech.full[c]) {
                *acc += px * m;
            }
        }
        let inner: f64 = codes
            .iter()
            .zip(pi)
            .filter(|(_, px)| **px > 0.0)
            .map(|(&c, &px)| px * kl_probs(&mech.full[c], &mix))
            .sum();
        total += p_rest * inner;
    }
    Ok(total.max(0.0))
}

pub fn average_conditional_mutual_information(prior: &ProductPrior, mech: &DiscreteMechanism) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..mech.n {
        acc += conditional_mutual_information(prior, mech, i)?;
    }
    Ok(acc / mech.n as f64)
}

/// Outcome of event checks on one joint table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub checked: usize,
    pub violations: usize,
    /// Largest `P[(S, M(S)) in E] - bound` seen.
    pub worst_gap: f64,
}

/// Compares `P[(S, M(S)) in E]` with the bound implied by `mi` at
/// `delta = P[(S', M(S)) in E]`, for every event when the table is small
/// and otherwise for likelihood-ratio upper sets plus `samples` random
/// events.
pub fn check_events<G: Rng + ?Sized>(
    prior: &DiscreteDistribution,
    mech: &DiscreteMechanism,
    mi: f64,
    samples: usize,
    rng: &mut G,
) -> Result<EventCheck> {
    if prior.len() != mech.inputs() {
        return Err(Error::Config("prior does not match mechanism inputs".into()));
    }
    let py = output_marginal(prior.probs(), mech);
    let mut joint = Vec::new();
    let mut indep = Vec::new();
    for (ps, row) in prior.probs().iter().zip(&mech.full) {
        for (m, q) in row.iter().zip(&py) {
            joint.push(ps * m);
            indep.push(ps * q);
        }
    }
    let cells = joint.len();
    let mut out = EventCheck {
        worst_gap: f64::NEG_INFINITY,
        ..EventCheck::default()
    };
    let mut check = |p: f64, q: f64| -> Result<()> {
        if q > 0.0 && q < 1.0 {
            let bound = event_prob_bound(mi, q)?;
            out.checked += 1;
            out.worst_gap = out.worst_gap.max(p - bound);
            if p > bound + CHAIN_TOLERANCE {
                out.violations += 1;
            }
        }
        Ok(())
    };
    if cells <= FULL_EVENT_CELLS {
        for mask in 1u32..(1u32 << cells) {
            let (mut p, mut q) = (0.0, 0.0);
            for c in 0..cells {
                if mask >> c & 1 == 1 {
                    p += joint[c];
                    q += indep[c];
                }
            }
            check(p, q)?;
        }
    } else {
        let mut order: Vec<usize> = (0..cells).collect();
        let ratio = |c: usize| {
            if indep[c] > 0.0 {
                joint[c] / indep[c]
            } else {
                0.0
            }
        };
        order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)));
        let (mut p, mut q) = (0.0, 0.0);
        for &c in &order {
            p += joint[c];
            q += indep[c];
            check(p, q)?;
        }
        for _ in 0..samples {
            let (mut p, mut q) = (0.0, 0.0);
            for c in 0..cells {
                if rng.random_bool(0.5) {
                    p += joint[c];
                    q += indep[c];
                }
            }
            check(p, q)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainInstance {
    pub prior: ProductPrior,
    /// `(1/n) sum_i I(M(S); S_i | S_{-i})`.
    pub avg_conditional_mi: f64,
    /// `I(M(S); S)`.
    pub mutual_information: f64,
    pub events: EventCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    /// Worst-case ALKL of the mechanism; `None` when infinite.
    pub alkl: Option<f64>,
    pub instances: Vec<ChainInstance>,
    pub violations: Vec<String>,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, for `trials` random product priors, that
///
/// ```text
/// I(M(S); S) <= sum_i I(M(S); S_i | S_{-i}) <= n * ALKL
/// ```
///
/// and that the event bound from `I(M(S); S)` holds.
pub fn verify_stability_chain<G: Rng + ?Sized>(
    mech: &DiscreteMechanism,
    trials: usize,
    rng: &mut G,
) -> Result<ChainReport> {
    let alkl = exact_alkl(mech);
    let n = mech.n as f64;
    let mut instances = Vec::with_capacity(trials);
    let mut violations = Vec::new();
    for trial in 0..trials {
        let prior = if trial == 0 {
            ProductPrior::uniform(mech.domain, mech.n)
        } else {
            ProductPrior::random(mech.domain, mech.n, rng)
        };
        let joint = prior.joint()?;
        let avg_cmi = average_conditional_mutual_information(&prior, mech)?;
        let mi = exact_mutual_information(&joint, mech)?;
        if avg_cmi > alkl + CHAIN_TOLERANCE {
            violations.push(format!(
                "trial {trial}: average conditional MI {avg_cmi} exceeds ALKL {alkl}"
            ));
        }
        if mi > n * avg_cmi + CHAIN_TOLERANCE {
            violations.push(format!(
                "trial {trial}: MI {mi} exceeds n times average conditional MI {}",
                n * avg_cmi
            ));
        }
        let events = check_events(&joint, mech, mi, 256, rng)?;
        if events.violations > 0 {
            violations.push(format!(
                "trial {trial}: {} of {} events exceed the MI event bound",
                events.violations, events.checked
            ));
        }
        instances.push(ChainInstance {
            prior,
            avg_conditional_mi: avg_cmi,
            mutual_information: mi,
            events,
        });
    }
    Ok(ChainReport {
        alkl: alkl.is_finite().then_some(alkl),
        instances,
        violations,
    })
}

/// Expected true and empirical means of the query selected by the
/// mechanism, for i.i.d. inputs with marginal `marginal`. Output `y`
/// selects the query `table[y]`, a map from the domain into `[0, 1]`.
pub fn selected_query_means(
    marginal: &[f64],
    mech: &DiscreteMechanism,
    table: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if table.len() != mech.outputs || table.iter().any(|q| q.len() != mech.domain) {
        return Err(Error::Config("query table does not match mechanism shape".into()));
    }
    if table.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Config("query table values must lie in [0, 1]".into()));
    }
    let prior = ProductPrior::iid(marginal.to_vec(), mech.n)?;
    let truth: Vec<f64> = table
        .iter()
        .map(|q| q.iter().zip(marginal).map(|(v, p)| v * p).sum())
        .collect();
    let (mut true_mean, mut emp_mean) = (0.0, 0.0);
    for c in 0..mech.inputs() {
        let s = decode(c, mech.domain, mech.n);
        let ps = prior.prob(&s);
        for (y, &m) in mech.full[c].iter().enumerate() {
            let w = ps * m;
            true_mean += w * truth[y];
            emp_mean += w * s.iter().map(|&x| table[y][x]).sum::<f64>() / mech.n as f64;
        }
    }
    Ok((true_mean, emp_mean))
}

/// PAC-Bayes bound on the expected true mean of the selected query, with
/// the exact mutual information plugged in.
pub fn pac_bayes_for_selection(
    marginal: &[f64],
    mech: &DiscreteMechanism,
    table: &[Vec<f64>],
    lambda: f64,
) -> Result<(f64, f64)> {
    let (true_mean, emp_mean) = selected_query_means(marginal, mech, table)?;
    let prior = ProductPrior::iid(marginal.to_vec(), mech.n)?;
    let mi = exact_mutual_information(&prior.joint()?, mech)?;
    Ok((true_mean, pac_bayes_bound(emp_mean, mi, mech.n, lambda)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn first_element(n: usize) -> DiscreteMechanism {
        DiscreteMechanism::new(2, n, 2, |s| {
            let mut row = vec![0.0; 2];
            row[s.first().copied().unwrap_or(0)] = 1.0;
            row
        })
        .unwrap()
    }

    fn constant(n: usize) -> DiscreteMechanism {
        DiscreteMechanism::new(2, n, 3, |_| vec![0.2, 0.5, 0.3]).unwrap()
    }

    fn randomized_response(flip: f64) -> DiscreteMechanism {
        DiscreteMechanism::new(2, 1, 2, move |s| match s.first() {
            Some(0) => vec![1.0 - flip, flip],
            Some(_) => vec![flip, 1.0 - flip],
            None => vec![0.5, 0.5],
        })
        .unwrap()
    }

    #[test]
    fn codes_round_trip() {
        for c in 0..27 {
            assert_eq!(encode(&decode(c, 3, 3), 3), c);
        }
        assert_eq!(decode(5, 2, 3), vec![1, 0, 1]);
    }

    #[test]
    fn identity_on_fair_bit_has_ln2() {
        let prior = DiscreteDistribution::uniform(2).unwrap();
        let mi = exact_mutual_information(&prior, &first_element(1)).unwrap();
        assert!((mi - LN_2).abs() < 1e-15);
    }

    #[test]
    fn constant_mechanism_is_zero_everywhere() {
        let m = constant(3);
        assert_eq!(exact_alkl(&m), 0.0);
        let joint = ProductPrior::uniform(2, 3).joint().unwrap();
        assert!(exact_mutual_information(&joint, &m).unwrap() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = verify_stability_chain(&m, 3, &mut rng).unwrap();
        assert!(r.holds());
        assert_eq!(r.alkl, Some(0.0));
        assert!(r
            .instances
            .iter()
            .all(|i| i.avg_conditional_mi < 1e-15 && i.mutual_information < 1e-15));
    }

    #[test]
    fn randomized_response_mi_matches_joint() {
        let m = randomized_response(0.25);
        let prior = DiscreteDistribution::uniform(2).unwrap();
        let mi = exact_mutual_information(&prior, &m).unwrap();
        // Joint (3/8, 1/8; 1/8, 3/8) against the uniform product.
        let joint = DiscreteDistribution::from_probs(vec![0.375, 0.125, 0.125, 0.375]).unwrap();
        let product = DiscreteDistribution::uniform(4).unwrap();
        let expected = crate::divergence::kl_discrete(&joint, &product).unwrap();
        assert!((mi - expected).abs() < 1e-15);
        assert!((mi - (LN_2 + 0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn first_element_alkl_is_infinite() {
        let m = first_element(2);
        assert!(exact_alkl(&m).is_infinite());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = verify_stability_chain(&m, 2, &mut rng).unwrap();
        assert_eq!(r.alkl, None);
        assert!(r.holds());
    }

    #[test]
    fn noisy_majority_is_finite() {
        let m = DiscreteMechanism::new(2, 3, 2, |s| {
            let ones = s.iter().filter(|&&x| x == 1).count();
            let maj = usize::from(2 * ones > s.len());
            let mut row = vec![0.3; 2];
            row[maj] = 0.7;
            row
        })
        .unwrap();
        let a = exact_alkl(&m);
        assert!(a.is_finite() && a > 0.0);
    }

    #[test]
    fn relabeling_outputs_keeps_mi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DiscreteMechanism::random(2, 3, 3, 0.2, &mut rng).unwrap();
        let perm = [2usize, 0, 1];
        let relabel = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| perm.iter().map(|&o| r[o]).collect())
                .collect()
        };
        let p = DiscreteMechanism::from_tables(2, 3, 3, relabel(&m.full), relabel(&m.loo)).unwrap();
        let joint = ProductPrior::random(2, 3, &mut rng).joint().unwrap();
        let a = exact_mutual_information(&joint, &m).unwrap();
        let b = exact_mutual_information(&joint, &p).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn size_guard() {
        assert!(matches!(
            DiscreteMechanism::random(10, 6, 2, 0.0, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn bad_rows_rejected() {
        let r = DiscreteMechanism::from_tables(2, 1, 2, vec![vec![0.5, 0.6], vec![1.0, 0.0]], vec![vec![1.0, 0.0]]);
        assert!(matches!(r, Err(Error::Distribution(_))));
    }

    #[test]
    fn pac_bayes_dominates_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = DiscreteMechanism::random(3, 2, 2, 0.1, &mut rng).unwrap();
            let marginal = ProductPrior::random(3, 1, &mut rng).marginals()[0].clone();
            let table: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect();
            for &lambda in &[0.6, 1.0, 2.0, 10.0] {
                let (truth, bound) = pac_bayes_for_selection(&marginal, &m, &table, lambda).unwrap();
                assert!(truth <= bound + 1e-12);
            }
        }
    }
}
