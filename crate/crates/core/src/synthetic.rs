//! The bundled synthetic score dataset and demo project.
//!
//! The dataset is SYNTHETIC. It has the shape of a two-cohort uplift study
//! (50 participants per cohort, one 0-10 accuracy score per participant per
//! step) but every score is generated here from fixed per-step target rates
//! and a fixed seed. It is not, and does not approximate, any real study's
//! data.
//!
//! Generation, per participant `i` (0-based across both cohorts) and step `s`:
//!
//! 1. `skill = 0.2 * u0 - 0.1` where `u0` is the first uniform of the stream
//!    `Stream::for_trial(scenario_key(seed, "participant"), i)`.
//! 2. `rate = clamp(target[cohort][s] + skill, 0.02, 0.98)`.
//! 3. The score is the number of successes among ten Bernoulli(`rate`) draws
//!    taken from `Stream::for_trial(scenario_key(seed, "score/<step>"), i)`.
//!
//! Regenerate the committed files with
//! `cargo run -p riskchain-core --example gen_synthetic -- data`.

use serde::{Deserialize, Serialize};

use crate::distfit::{Cohort, ScoreSample};
use crate::error::Result;
use crate::ingest::{NamedProfileTable, PairSpec, Project, ScoreDataset};
use crate::qualitative::{default_profile_table, AssessmentWorkflow, ConcernAssessment, Level};
use crate::riskmodel::{
    ChainMap, ChainStep, ConsequenceModel, DatasetRef, Scenario, ScenarioVariant, StepModel,
};
use crate::rng::{scenario_key, Stream};
use crate::stats;

pub const SYNTHETIC_SEED: u64 = 20_240_131;
pub const PARTICIPANTS_PER_COHORT: usize = 50;
pub const DATASET_ID: &str = "synthetic";
pub const NOTIONAL_CONSEQUENCE: f64 = 100_000.0;

/// Per-step success rates the generator aims at, in chain order.
pub fn target_rates(cohort: Cohort) -> [f64; 5] {
    match cohort {
        Cohort::InternetOnly => [0.45, 0.30, 0.30, 0.35, 0.40],
        Cohort::InternetPlusLlm => [0.55, 0.40, 0.38, 0.42, 0.50],
    }
}

fn cohort_of(participant: usize) -> Cohort {
    if participant < PARTICIPANTS_PER_COHORT {
        Cohort::InternetOnly
    } else {
        Cohort::InternetPlusLlm
    }
}

pub fn generate_scores(seed: u64) -> Vec<ScoreSample> {
    let skill_key = scenario_key(seed, "participant");
    let mut out = Vec::new();
    for i in 0..2 * PARTICIPANTS_PER_COHORT {
        let cohort = cohort_of(i);
        let skill = 0.2 * Stream::for_trial(skill_key, i as u64).next_uniform() - 0.1;
        for step in ChainStep::ALL {
            let rate = (target_rates(cohort)[step.index()] + skill).clamp(0.02, 0.98);
            let mut stream = Stream::for_trial(scenario_key(seed, &format!("score/{step}")), i as u64);
            let successes = (0..10).filter(|_| stream.next_uniform() <= rate).count();
            out.push(ScoreSample {
                participant_id: format!("p{:03}", i + 1),
                cohort,
                step,
                score: successes as f64,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub cohort: Cohort,
    pub participants: usize,
    pub target_rates: ChainMap<f64>,
    /// Mean score divided by 10, per step.
    pub mean_probability: ChainMap<f64>,
    /// Product of the per-step means: the expected overall probability under
    /// independent sampling.
    pub product_of_means: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub description: String,
    pub seed: u64,
    pub scale_max: f64,
    pub cohorts: Vec<CohortManifest>,
}

pub fn manifest(seed: u64, samples: &[ScoreSample]) -> SyntheticManifest {
    let cohorts = Cohort::ALL
        .into_iter()
        .map(|cohort| {
            let mean_probability = ChainMap::from_fn(|step| {
                let scores: Vec<f64> = samples
                    .iter()
                    .filter(|s| s.cohort == cohort && s.step == step)
                    .map(|s| s.score)
                    .collect();
                stats::mean(&scores) / 10.0
            });
            let product_of_means = mean_probability.values().product();
            CohortManifest {
                cohort,
                participants: samples
                    .iter()
                    .filter(|s| s.cohort == cohort && s.step == ChainStep::Ideation)
                    .count(),
                target_rates: ChainMap::from_fn(|step| target_rates(cohort)[step.index()]),
                mean_probability,
                product_of_means,
            }
        })
        .collect();
    SyntheticManifest {
        description: "SYNTHETIC accuracy scores generated with a fixed seed; not real study data".into(),
        seed,
        scale_max: 10.0,
        cohorts,
    }
}

fn fixed_chain(first: f64) -> ChainMap<StepModel> {
    ChainMap::from_fn(|step| {
        let p = if step == ChainStep::Ideation { first } else { 1.0 };
        StepModel::fixed(p).expect("constant in range")
    })
}

/// The demo project: the synthetic dataset, a dataset-backed pair `main`, a
/// fixed-probability pair `notional` whose overall probabilities are 0.005 and
/// 0.017, the default requirement tables and a small assessment workflow.
pub fn demo_project() -> Result<Project> {
    let samples = generate_scores(SYNTHETIC_SEED);
    let mut project = Project::new("demo");
    project.datasets.push(ScoreDataset {
        id: DATASET_ID.into(),
        description: "SYNTHETIC scores, 50 participants per cohort; not real study data".into(),
        synthetic: true,
        scale_max: 10.0,
        samples,
    });

    let consequence = || ConsequenceModel::new(NOTIONAL_CONSEQUENCE);
    let dataset_chain = |cohort| {
        ChainMap::from_fn(|_| StepModel::Dataset(DatasetRef { id: DATASET_ID.into(), cohort }))
    };
    project.scenarios.push(
        Scenario::new("baseline", ScenarioVariant::Baseline, dataset_chain(Cohort::InternetOnly), consequence()?)?
            .with_description("internet-only cohort scores as step probabilities"),
    );
    project.scenarios.push(
        Scenario::new("ai", ScenarioVariant::AiAugmented, dataset_chain(Cohort::InternetPlusLlm), consequence()?)?
            .with_description("internet plus chatbot cohort scores as step probabilities"),
    );
    project.scenarios.push(
        Scenario::new("notional_baseline", ScenarioVariant::Baseline, fixed_chain(0.005), consequence()?)?
            .with_description("fixed overall probability 0.005"),
    );
    project.scenarios.push(
        Scenario::new("notional_ai", ScenarioVariant::AiAugmented, fixed_chain(0.017), consequence()?)?
            .with_description("fixed overall probability 0.017"),
    );

    project.profiles.push(NamedProfileTable {
        id: "default".into(),
        description: "notional requirement levels for an unskilled actor".into(),
        table: default_profile_table(),
    });
    project.profiles.push(NamedProfileTable {
        id: "default_ai".into(),
        description: "AI-variant copy of the default table, to be edited by assessors".into(),
        table: default_profile_table(),
    });

    project.pairs.push(PairSpec {
        id: "main".into(),
        baseline: "baseline".into(),
        ai: "ai".into(),
        equal_consequence: true,
        baseline_profile: Some("default".into()),
        ai_profile: Some("default_ai".into()),
    });
    project.pairs.push(PairSpec {
        id: "notional".into(),
        baseline: "notional_baseline".into(),
        ai: "notional_ai".into(),
        equal_consequence: true,
        baseline_profile: None,
        ai_profile: None,
    });

    let mut workflow = AssessmentWorkflow::new("review");
    workflow.register_organism("organism-a")?;
    workflow.register_tool("design-tool-x", "literature search")?;
    workflow.register_capability("capability-1", Level::Med)?;
    let mut evaluation = ConcernAssessment::new("organism-a", "design-tool-x")
        .with_categories(Level::Med, Level::Low, Level::Med, Level::Med);
    evaluation.tool_reference = "example reference".into();
    evaluation
        .subcomponent_notes
        .insert("ease of use".into(), "requires substantial expertise".into());
    evaluation.set_overall_concern(Level::Med)?;
    evaluation.rationale = "illustrative entry".into();
    workflow.record_assessment_at(evaluation, 1_700_000_000_000)?;
    workflow.update_concern("capability-1", Level::Med, "illustrative review; level unchanged")?;
    project.workflows.push(workflow);

    project.validate()?;
    Ok(project)
}
