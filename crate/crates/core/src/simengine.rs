//! Seeded Monte Carlo over scenario chains.
//!
//! Each trial draws one probability per step (in chain order, from that
//! trial's own counter-derived stream; see [`crate::rng`]) and multiplies
//! them. Fixed-value steps contribute their constant and consume nothing.

use std::num::NonZeroUsize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distfit::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::riskmodel::{
    risk_delta, ChainMap, ChainStep, Probability, RiskResult, Scenario, ScenarioPair,
    ScenarioVariant, StepModel,
};
use crate::rng::{scenario_key, Stream};
use crate::stats::{self, BoxSummary};

pub const DEFAULT_TRIALS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_trials: usize,
    pub master_seed: u64,
    /// Worker threads to use; `None` uses the global pool. Never affects results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism_hint: Option<NonZeroUsize>,
}

impl SimulationConfig {
    pub fn new(n_trials: usize, master_seed: u64) -> Result<Self> {
        let config = SimulationConfig {
            n_trials,
            master_seed,
            parallelism_hint: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_parallelism(mut self, threads: Option<NonZeroUsize>) -> Self {
        self.parallelism_hint = threads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_trials: DEFAULT_TRIALS,
            master_seed: 0,
            parallelism_hint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResults {
    pub scenario_id: String,
    pub variant: ScenarioVariant,
    /// One row per trial, columns in chain order.
    pub per_step_samples: Vec<[f64; 5]>,
    pub overall: Vec<f64>,
    pub config: SimulationConfig,
}

/// Mean, spread and box summaries of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_trials: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub overall: BoxSummary,
    pub per_step: ChainMap<BoxSummary>,
}

impl TrialResults {
    pub fn mean_overall(&self) -> f64 {
        stats::mean(&self.overall)
    }

    pub fn step_samples(&self, step: ChainStep) -> Vec<f64> {
        self.per_step_samples.iter().map(|row| row[step.index()]).collect()
    }

    pub fn summary(&self) -> Result<SimulationSummary> {
        let variance = stats::sample_variance(&self.overall);
        let std_dev = variance.sqrt();
        Ok(SimulationSummary {
            n_trials: self.overall.len(),
            mean: self.mean_overall(),
            variance,
            std_dev,
            std_error: std_dev / (self.overall.len() as f64).sqrt(),
            overall: stats::summarize(&self.overall)?,
            per_step: ChainMap::try_from_fn(|step| stats::summarize(&self.step_samples(step)))?,
        })
    }
}

enum Sampler<'a> {
    Fixed(f64),
    Empirical(&'a EmpiricalDistribution),
}

fn resolve_samplers(scenario: &Scenario) -> Result<[Sampler<'_>; 5]> {
    let mut out = Vec::with_capacity(ChainStep::COUNT);
    for (step, model) in scenario.steps.iter() {
        out.push(match model {
            StepModel::Fixed(p) => Sampler::Fixed(p.get()),
            StepModel::Empirical(d) => Sampler::Empirical(d),
            StepModel::Dataset(r) => {
                return Err(Error::Config(format!(
                    "scenario '{}' step '{step}': dataset reference '{}' ({}) is unresolved",
                    scenario.id, r.id, r.cohort
                )))
            }
        });
    }
    Ok(out.try_into().ok().expect("five steps"))
}

fn run_trial(samplers: &[Sampler<'_>; 5], key: u64, trial: u64) -> [f64; 5] {
    let mut stream = Stream::for_trial(key, trial);
    samplers.each_ref().map(|s| match s {
        Sampler::Fixed(p) => *p,
        Sampler::Empirical(d) => d.sample(&mut stream),
    })
}

fn product(row: &[f64; 5]) -> f64 {
    row.iter().fold(1.0, |acc, p| acc * p)
}

pub fn simulate(scenario: &Scenario, config: &SimulationConfig) -> Result<TrialResults> {
    config.validate()?;
    scenario.validate()?;
    let samplers = resolve_samplers(scenario)?;
    let key = scenario_key(config.master_seed, &scenario.id);
    let n = config.n_trials as u64;

    let per_step_samples: Vec<[f64; 5]> = match config.parallelism_hint.map(NonZeroUsize::get) {
        Some(1) => (0..n).map(|t| run_trial(&samplers, key, t)).collect(),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| {
                (0..n)
                    .into_par_iter()
                    .map(|t| run_trial(&samplers, key, t))
                    .collect()
            })
        }
        None => (0..n)
            .into_par_iter()
            .map(|t| run_trial(&samplers, key, t))
            .collect(),
    };
    let overall = per_step_samples.iter().map(product).collect();

    Ok(TrialResults {
        scenario_id: scenario.id.clone(),
        variant: scenario.variant,
        per_step_samples,
        overall,
        config: config.clone(),
    })
}

/// Product of per-step means: the expected overall probability when steps
/// are independent.
pub fn analytic_mean(scenario: &Scenario) -> Result<f64> {
    let samplers = resolve_samplers(scenario)?;
    Ok(samplers.iter().fold(1.0, |acc, s| {
        acc * match s {
            Sampler::Fixed(p) => *p,
            Sampler::Empirical(d) => d.mean(),
        }
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub baseline: TrialResults,
    pub ai: TrialResults,
    pub baseline_risk: RiskResult,
    pub ai_risk: RiskResult,
    /// `ai_risk.risk - baseline_risk.risk`.
    pub delta: f64,
}

fn risk_from_trials(trials: &TrialResults, scenario: &Scenario) -> Result<RiskResult> {
    // Compensated summation can overshoot by an ulp when every trial is 1.
    let mean = trials.mean_overall().clamp(0.0, 1.0);
    RiskResult::new(trials.variant, Probability::new(mean)?, &scenario.consequence)
}

/// Runs both variants under one master seed. Streams are keyed by scenario
/// id, so distinct ids give independent draws.
pub fn simulate_pair(pair: &ScenarioPair, config: &SimulationConfig) -> Result<PairOutcome> {
    pair.validate()?;
    let baseline = simulate(&pair.baseline, config)?;
    let ai = simulate(&pair.ai, config)?;
    let baseline_risk = risk_from_trials(&baseline, &pair.baseline)?;
    let ai_risk = risk_from_trials(&ai, &pair.ai)?;
    let delta = risk_delta(&baseline_risk, &ai_risk)?;
    Ok(PairOutcome {
        baseline,
        ai,
        baseline_risk,
        ai_risk,
        delta,
    })
}
