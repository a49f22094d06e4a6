mod common;

use adaptive_sq::analyst::{monitor_select, BitAnalyst, BitQuery, BitRecord, ProductBernoulli, Strategy};
use adaptive_sq::data::{leave_one_out_stats, Dataset, FnQuery, QueryStats, StatisticalQuery};
use adaptive_sq::mechanism::{Analyst, CalibrationParams, SeedRecord, Transcript};
use adaptive_sq::stability::{
    alkl_bound_formula, alkl_one_answer_exact, compose, emp_variance_bound, event_prob_bound,
    gen_expectation_bound, pac_bayes_bound, tail_bound_bernstein, StabilityLedger,
};
use proptest::prelude::*;

fn values(max_n: usize) -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0],
        2..=max_n,
    )
}

fn identity() -> FnQuery<f64> {
    FnQuery::new("id", |x: &f64| *x)
}

proptest! {
    #[test]
    fn leave_one_out_identities(vals in values(200)) {
        let n = vals.len();
        let nf = n as f64;
        let s = QueryStats::from_values(&vals).unwrap();
        let (mean, var) = common::welford(&vals);
        prop_assert!((s.mean - mean).abs() < 1e-12);
        prop_assert!((s.variance - var).abs() < 1e-12);
        let mut shift2 = 0.0;
        let mut drop2 = 0.0;
        for i in 0..n {
            let mut rest = vals.clone();
            rest.remove(i);
            let (m, v) = common::welford(&rest);
            prop_assert!((s.loo_means[i] - m).abs() < 1e-10);
            prop_assert!((s.loo_variances[i] - v).abs() < 1e-10);
            let drop = var - v;
            prop_assert!(drop.abs() <= nf / ((nf - 1.0) * (nf - 1.0)) + 1e-10);
            shift2 += (mean - m) * (mean - m);
            drop2 += drop * drop;
        }
        prop_assert!((shift2 / nf - var / ((nf - 1.0) * (nf - 1.0))).abs() < 1e-10);
        prop_assert!(drop2 / nf <= var * nf * nf / (nf - 1.0).powi(4) + 1e-10);
    }

    #[test]
    fn recomputation_agrees_with_closed_form(vals in values(60)) {
        let ds = Dataset::new(vals.clone()).unwrap();
        let s = QueryStats::from_values(&vals).unwrap();
        for i in 0..vals.len() {
            let (m, v) = leave_one_out_stats(&ds, &identity(), i).unwrap();
            prop_assert!((m - s.loo_means[i]).abs() < 1e-12);
            prop_assert!((v - s.loo_variances[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_alkl_within_formula(
        vals in values(120),
        t in 0.01f64..1e4,
        big_t in 0.01f64..1e6,
    ) {
        let n = vals.len();
        let ds = Dataset::new(vals).unwrap();
        let exact = alkl_one_answer_exact(&ds, &identity(), t, big_t).unwrap();
        let bound = alkl_bound_formula(n, t, big_t).unwrap();
        prop_assert!(exact >= 0.0);
        prop_assert!(exact <= bound * (1.0 + 1e-12), "{exact} > {bound}");
        let p = CalibrationParams::new(n, 1, t, big_t).unwrap();
        if p.in_stability_regime() {
            prop_assert!(bound <= t.max(big_t / t) / (n * n) as f64 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn composition_total_is_order_free(entries in prop::collection::vec(0.0f64..1.0, 0..20)) {
        let fold = |xs: &[f64]| xs.iter().try_fold(StabilityLedger::new(10), |l, &e| compose(l, e)).unwrap();
        let forward = fold(&entries);
        let mut rev = entries.clone();
        rev.reverse();
        let backward = fold(&rev);
        let sum: f64 = entries.iter().sum();
        prop_assert!((forward.epsilon_total() - sum).abs() < 1e-12);
        prop_assert!((forward.epsilon_total() - backward.epsilon_total()).abs() < 1e-12);
        prop_assert_eq!(forward.len(), entries.len());
    }

    #[test]
    fn calculators_are_monotone(
        eps in 0.0f64..5.0,
        bump in 1e-6f64..1.0,
        tau in 0.01f64..2.0,
        mi in 0.0f64..20.0,
        delta in 1e-6f64..0.5,
        thr in 0.01f64..10.0,
        n in 1usize..1000,
    ) {
        prop_assert!(gen_expectation_bound(eps + bump, tau).unwrap() >= gen_expectation_bound(eps, tau).unwrap());
        prop_assert!(emp_variance_bound(eps + bump, tau).unwrap() >= emp_variance_bound(eps, tau).unwrap());
        prop_assert!(emp_variance_bound(eps, tau + bump).unwrap() <= emp_variance_bound(eps, tau).unwrap());
        prop_assert!(event_prob_bound(mi + bump, delta).unwrap() >= event_prob_bound(mi, delta).unwrap());
        prop_assert!(event_prob_bound(mi, delta * 0.5).unwrap() <= event_prob_bound(mi, delta).unwrap());
        prop_assert!(pac_bayes_bound(0.3, mi + bump, n, 1.0).unwrap() >= pac_bayes_bound(0.3, mi, n, 1.0).unwrap());
        let e = eps + bump;
        prop_assert!(tail_bound_bernstein(e, n, tau, thr + bump).unwrap() < tail_bound_bernstein(e, n, tau, thr).unwrap());
        prop_assert!(tail_bound_bernstein(e + bump, n, tau, thr).unwrap() > tail_bound_bernstein(e, n, tau, thr).unwrap());
    }

    #[test]
    fn monitor_ignores_common_rescaling(
        answers in prop::collection::vec(0.0f64..1.0, 1..10),
        tau in 0.05f64..0.5,
    ) {
        let k = answers.len();
        let probs: Vec<f64> = (0..k).map(|j| 0.1 + 0.8 * j as f64 / k as f64).collect();
        let truth = ProductBernoulli::new(probs).unwrap();
        let t = Transcript {
            queries: (0..k).map(BitQuery::Attribute).collect(),
            answers: answers.clone(),
            seeds: SeedRecord { analyst: None, mechanism: 0 },
            error: None,
        };
        let (j, oriented) = monitor_select(&t, &truth, tau).unwrap();
        let scores: Vec<f64> = (0..k)
            .map(|i| {
                let (m, sd) = truth.moments(&BitQuery::Attribute(i)).unwrap();
                (answers[i] - m).abs() / sd.max(tau)
            })
            .collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(scores.iter().position(|&s| s == best).unwrap(), j);
        let (m, _) = truth.moments(&oriented).unwrap();
        let oriented_answer = if matches!(oriented, BitQuery::Complement(_)) { 1.0 - answers[j] } else { answers[j] };
        prop_assert!(oriented_answer - m >= 0.0);
    }

    #[test]
    fn correlation_final_query_is_valid(
        answers in prop::collection::vec(0.0f64..1.0, 1..30),
        threshold in 0.0f64..0.5,
        record_bits in prop::collection::vec(any::<bool>(), 31),
    ) {
        let k = answers.len() + 1;
        let d = k - 1;
        let mut a = BitAnalyst::new(Strategy::CorrelationAttack { d, threshold }, k, 0).unwrap();
        for j in 0..d {
            a.next_query(&answers[..j]).unwrap();
        }
        let last = a.next_query(&answers).unwrap();
        let record = BitRecord(record_bits[..=d].to_vec());
        let v = last.eval(&record);
        prop_assert!((0.0..=1.0).contains(&v));
        let (m, sd) = ProductBernoulli::uniform(d + 1).moments(&last).unwrap();
        prop_assert!((0.0..=1.0).contains(&m) && sd >= 0.0);
    }

    #[test]
    fn analysts_replay(seed in any::<u64>(), answers in prop::collection::vec(0.0f64..1.0, 20)) {
        for strategy in [
            Strategy::RandomQueries { d: 15 },
            Strategy::LowVariance { d: 15, p0: 0.02 },
            Strategy::CorrelationAttack { d: 19, threshold: 0.05 },
        ] {
            let run = || {
                let mut a = BitAnalyst::new(strategy.clone(), 20, seed).unwrap();
                (0..20).map(|j| a.next_query(&answers[..j]).unwrap()).collect::<Vec<_>>()
            };
            prop_assert_eq!(run(), run());
        }
    }

    #[test]
    fn noise_never_below_floor(var in 0.0f64..0.25, t in 0.01f64..1e3, big_t in 0.01f64..1e3) {
        let p = CalibrationParams::new(10, 1, t, big_t).unwrap();
        prop_assert!(p.noise_variance(var) >= 1.0 / big_t);
    }
}
