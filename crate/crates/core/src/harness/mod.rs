//! Seeded Monte Carlo experiments over the bit-vector domain.
//!
//! Every trial derives its seed from `(base seed, trial index)` alone, and
//! from it one independent seed per role (dataset sampling, analyst,
//! mechanism noise). Parallel and serial schedules therefore produce the
//! same report, byte for byte.

mod config;
mod report;

pub use config::{ExperimentConfig, MechanismConfig, Setup, TruthConfig};
pub use report::{
    emit_report, ExperimentReport, MeanEstimate, QueryError, QueryQuantiles, ReportFormat,
    TrialResult,
};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analyst::BitAnalyst;
use crate::data::scaled_error;
use crate::error::Result;
use crate::mechanism::{run_interaction, Mechanism};
use crate::stability::BoundReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Parallel,
    Serial,
}

/// Seeds of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub data: u64,
    pub analyst: u64,
    pub mechanism: u64,
}

impl TrialSeeds {
    pub fn derive(base: u64, trial: usize) -> Self {
        let mut stream = ChaCha8Rng::seed_from_u64(base);
        stream.set_stream(trial as u64);
        let trial_seed = stream.next_u64();
        let mut roles = ChaCha8Rng::seed_from_u64(trial_seed);
        Self {
            trial: trial_seed,
            data: roles.next_u64(),
            analyst: roles.next_u64(),
            mechanism: roles.next_u64(),
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Runs one trial of `config`.
pub fn run_trial(config: &ExperimentConfig, setup: &Setup, trial: usize) -> Result<TrialResult> {
    let seeds = TrialSeeds::derive(config.seed, trial);
    let dataset = setup
        .truth
        .sample_dataset(config.n, &mut ChaCha8Rng::seed_from_u64(seeds.data))?;
    let mut analyst = BitAnalyst::new(config.analyst.clone(), config.k, seeds.analyst)?;
    let mut mechanism = Mechanism::new(&dataset, setup.kind, config.k, seeds.mechanism)?;
    let transcript = run_interaction(&mut analyst, &mut mechanism, config.k)?;

    let mut queries = Vec::with_capacity(transcript.len());
    for (j, (q, &v)) in transcript.queries.iter().zip(&transcript.answers).enumerate() {
        let (mean, sd) = setup.truth.moments(q)?;
        let e = scaled_error(v, mean, sd, setup.tau)?;
        queries.push(QueryError {
            j,
            raw_error: e.raw_error,
            true_sd: sd,
            scaled_error: e.scaled,
        });
    }
    let ledger = mechanism.ledger();
    Ok(TrialResult {
        trial,
        seed: seeds.trial,
        max_scaled_error: queries.iter().map(|q| q.scaled_error).reduce(f64::max),
        final_scaled_error: queries.last().map(|q| q.scaled_error),
        epsilon: finite(ledger.epsilon_total()),
        epsilon_cap: finite(ledger.cap_total()),
        queries,
        aborted: transcript.error,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, Schedule::default())
}

pub fn run_experiment_with(config: &ExperimentConfig, schedule: Schedule) -> Result<ExperimentReport> {
    let setup = config.setup()?;
    let trials: Vec<TrialResult> = match schedule {
        Schedule::Parallel => (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, &setup, i))
            .collect::<Result<_>>()?,
        Schedule::Serial => (0..config.trials)
            .map(|i| run_trial(config, &setup, i))
            .collect::<Result<_>>()?,
    };

    let maxima: Vec<f64> = trials.iter().filter_map(|t| t.max_scaled_error).collect();
    let finals: Vec<f64> = trials.iter().filter_map(|t| t.final_scaled_error).collect();
    let epsilon_exact_max = trials
        .iter()
        .map(|t| t.epsilon)
        .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)));
    let bounds = match setup.epsilon_theoretical {
        Some(eps) if setup.tau > 0.0 => Some(BoundReport::compute(
            eps,
            config.n,
            config.k,
            setup.tau,
            &BoundReport::DEFAULT_BETAS,
        )?),
        _ => None,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        params: setup.params,
        tau: setup.tau,
        regime: setup.regime,
        epsilon_theoretical: setup.epsilon_theoretical,
        epsilon_exact_max,
        bounds,
        max_scaled_error: MeanEstimate::from_samples(&maxima),
        final_scaled_error: MeanEstimate::from_samples(&finals),
        per_query: report::per_query_quantiles(&trials, config.k),
        trials,
    })
}
