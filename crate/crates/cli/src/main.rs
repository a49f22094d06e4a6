use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_sq::harness::{emit_report, run_experiment_with, ExperimentConfig, ReportFormat, Schedule};
use adaptive_sq::mechanism::params_from_main_theorem;
use adaptive_sq::oracle::{verify_stability_chain, DiscreteMechanism};
use adaptive_sq::stability::{
    alkl_bound_formula, emp_variance_bound, event_prob_bound, gauss_max_bound,
    gen_expectation_bound, in_stability_regime, mi_from_alkl, pac_bayes_bound, tail_bound_bernstein,
    tail_level,
};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "adaptive-sq", version, about = "Adaptive statistical query experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; falls back to the config's `out`, then `./out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: ReportFormat,
        /// Run trials on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Exact enumeration sweeps over random discrete mechanisms.
    Verify {
        #[arg(long, default_value_t = 100)]
        mechanisms: usize,
        /// Random priors per mechanism.
        #[arg(long, default_value_t = 3)]
        priors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print every bound for the given parameters.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Variance divisor; derived from n and k when omitted.
        #[arg(long)]
        t: Option<f64>,
        /// Inverse noise floor; derived from n and k when omitted.
        #[arg(long = "T")]
        big_t: Option<f64>,
        /// Total ALKL; defaults to k t / n^2 for derived parameters and to
        /// k times the per-answer cap otherwise.
        #[arg(long)]
        eps: Option<f64>,
        /// Error scale; defaults to sqrt(eps) or the derived value.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Expected empirical mean for the PAC-Bayes line.
        #[arg(long, default_value_t = 0.0)]
        emp_mean: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse().map_err(|e: adaptive_sq::Error| e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            out,
            format,
            serial,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| "out".into());
            let schedule = if serial { Schedule::Serial } else { Schedule::Parallel };
            let report = run_experiment_with(&cfg, schedule)
                .with_context(|| format!("running {}", config.display()))?;
            for path in emit_report(&report, format, &dir)? {
                println!("wrote {}", path.display());
            }
            if let Some(m) = report.max_scaled_error {
                println!(
                    "max scaled error: {:.4} +/- {:.4} over {} trials (tau = {:.6})",
                    m.mean, m.std_error, m.samples, report.tau
                );
            }
            match report.epsilon_exact_max {
                Some(e) => println!("largest exact ALKL total: {e:.6}"),
                None => println!("largest exact ALKL total: unbounded"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            mechanisms,
            priors,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut failures = 0;
            let mut events = 0;
            for m in 0..mechanisms {
                let n = rng.random_range(1..=3);
                let outputs = if n == 3 { 2 } else { rng.random_range(2..=4) };
                let mech = DiscreteMechanism::random(2, n, outputs, 0.15, &mut rng)?;
                let report = verify_stability_chain(&mech, priors, &mut rng)?;
                events += report.instances.iter().map(|i| i.events.checked).sum::<usize>();
                for v in &report.violations {
                    failures += 1;
                    println!("mechanism {m} (n = {n}, outputs = {outputs}): {v}");
                }
            }
            println!(
                "{mechanisms} mechanisms, {} priors, {events} events: {failures} violations",
                mechanisms * priors
            );
            Ok(if failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Bounds {
            n,
            k,
            t,
            big_t,
            eps,
            tau,
            delta,
            emp_mean,
            lambda,
        } => {
            let (t, big_t, theorem) = match (t, big_t) {
                (Some(t), Some(b)) => (t, b, None),
                (None, None) => {
                    let (p, tau) = params_from_main_theorem(n, k)?;
                    (p.variance_divisor, p.inverse_floor, Some((p.theorem_budget(), tau)))
                }
                _ => bail!("give both --t and --T or neither"),
            };
            let per_answer = alkl_bound_formula(n, t, big_t)?;
            let eps = eps.unwrap_or(theorem.map_or(k as f64 * per_answer, |th| th.0));
            let tau = tau.unwrap_or(theorem.map_or(eps.sqrt(), |th| th.1));
            let mi = mi_from_alkl(eps, n)?;
            println!("n = {n}, k = {k}, t = {t}, T = {big_t}");
            println!("stability regime: {}", in_stability_regime(n, t, big_t));
            println!("per-answer ALKL cap: {per_answer}");
            println!("k t / n^2: {}", k as f64 * t / (n as f64 * n as f64));
            println!("epsilon: {eps}");
            println!("tau: {tau}");
            println!("mutual information bound: {mi}");
            println!("expected scaled generalization error: {}", gen_expectation_bound(eps, tau)?);
            println!("empirical variance factor: {}", emp_variance_bound(eps, tau)?);
            println!("event probability at delta = {delta}: {}", event_prob_bound(mi, delta)?);
            println!(
                "PAC-Bayes mean bound (empirical {emp_mean}, lambda {lambda}): {}",
                pac_bayes_bound(emp_mean, mi, n, lambda)?
            );
            if eps > 0.0 {
                for beta in [0.5, 0.1, 0.01] {
                    let level = tail_level(eps, n, tau, beta)?;
                    let at = tail_bound_bernstein(eps, n, tau, 3.0 * tau / beta)?;
                    println!("tail beta = {beta}: level {level}, bound at 3 tau / beta {at}");
                }
            }
            if k > 0 {
                println!("expected max squared standard normal: {}", gauss_max_bound(k)?);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
