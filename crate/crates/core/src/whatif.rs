//! What-if evaluation: re-run a stored pair with step, consequence and
//! requirement-level overrides applied to a private copy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Project;
use crate::qualitative::{diff_profiles, flag_transition, Level, ProfileDiffRow, RequirementField, TransitionFlag};
use crate::report::RiskTable;
use crate::riskmodel::{ChainStep, DatasetRef, RiskResult, ScenarioVariant, StepModel};
use crate::simengine::{simulate_pair, SimulationConfig, SimulationSummary, DEFAULT_TRIALS};

/// Replacement for one step's probability model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOverride {
    /// Constant probability; validated after parsing.
    Fixed(f64),
    /// Additive shift of every support point, clamped to [0, 1].
    Shift(f64),
    /// Refit from another dataset/cohort.
    Dataset(DatasetRef),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepOverrideEntry {
    pub variant: ScenarioVariant,
    pub step: ChainStep,
    pub model: StepOverride,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelOverride {
    pub variant: ScenarioVariant,
    pub step: ChainStep,
    pub field: RequirementField,
    pub level: Level,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub pair_id: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub overrides: Vec<StepOverrideEntry>,
    /// Applied to both scenarios, keeping their units.
    #[serde(default)]
    pub consequence: Option<f64>,
    #[serde(default)]
    pub level_overrides: Vec<LevelOverride>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

impl WhatIfRequest {
    pub fn new(pair_id: impl Into<String>, seed: u64, n_trials: usize) -> Self {
        WhatIfRequest {
            pair_id: pair_id.into(),
            seed,
            n_trials,
            overrides: Vec::new(),
            consequence: None,
            level_overrides: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub step: ChainStep,
    pub baseline: Level,
    pub ai: Level,
    pub flag: TransitionFlag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummaries {
    pub baseline: SimulationSummary,
    pub ai: SimulationSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WhatIfResponse {
    pub risk_table: RiskTable,
    pub baseline: RiskResult,
    pub ai: RiskResult,
    pub summaries: VariantSummaries,
    pub profile_diffs: Vec<ProfileDiffRow>,
    /// Relative-probability transition per step.
    pub transitions: Vec<TransitionRow>,
}

fn shifted(model: &StepModel, delta: f64) -> Result<StepModel> {
    match model {
        StepModel::Fixed(p) => StepModel::fixed((p.get() + delta).clamp(0.0, 1.0)),
        StepModel::Empirical(e) => Ok(StepModel::Empirical(e.shifted(delta)?)),
        StepModel::Dataset(_) => Err(Error::Config("dataset step was not resolved".into())),
    }
}

/// Evaluates `request` against `project` without modifying it.
pub fn evaluate(project: &Project, request: &WhatIfRequest) -> Result<WhatIfResponse> {
    let config = SimulationConfig::new(request.n_trials, request.seed)
        .map_err(|e| Error::invalid("n_trials", e.to_string()))?;
    let mut pair = project.resolve_pair(&request.pair_id)?;

    for (i, entry) in request.overrides.iter().enumerate() {
        let scenario = match entry.variant {
            ScenarioVariant::Baseline => &mut pair.baseline,
            ScenarioVariant::AiAugmented => &mut pair.ai,
        };
        let slot = scenario.steps.get_mut(entry.step);
        let replaced = match &entry.model {
            StepOverride::Fixed(p) => StepModel::fixed(*p)
                .map_err(|e| Error::invalid(format!("overrides[{i}].model.fixed"), e.to_string())),
            StepOverride::Shift(d) if !d.is_finite() => Err(Error::invalid(
                format!("overrides[{i}].model.shift"),
                "shift must be finite",
            )),
            StepOverride::Shift(d) => shifted(slot, *d),
            StepOverride::Dataset(r) => {
                let dataset = project.dataset(&r.id).ok_or_else(|| {
                    Error::invalid(
                        format!("overrides[{i}].model.dataset.id"),
                        format!("unknown dataset id '{}'", r.id),
                    )
                })?;
                dataset.fit(r.cohort, entry.step).map(StepModel::Empirical)
            }
        }?;
        *slot = replaced;
    }

    if let Some(c) = request.consequence {
        for scenario in [&mut pair.baseline, &mut pair.ai] {
            scenario.consequence.value = c;
            scenario
                .consequence
                .validate()
                .map_err(|e| Error::invalid("consequence", e.to_string()))?;
        }
    }

    let (mut base_table, mut ai_table) = project.pair_profiles(&request.pair_id)?;
    for o in &request.level_overrides {
        let table = match o.variant {
            ScenarioVariant::Baseline => &mut base_table,
            ScenarioVariant::AiAugmented => &mut ai_table,
        };
        table.get_mut(o.step).set_level(o.field, o.level);
    }

    let outcome = simulate_pair(&pair, &config)?;
    let transitions = ChainStep::ALL
        .into_iter()
        .map(|step| {
            let (b, a) = (base_table.get(step).relative_p, ai_table.get(step).relative_p);
            TransitionRow {
                step,
                baseline: b,
                ai: a,
                flag: flag_transition(b, a),
            }
        })
        .collect();
    Ok(WhatIfResponse {
        risk_table: RiskTable::new(&request.pair_id, &outcome, &config),
        summaries: VariantSummaries {
            baseline: outcome.baseline.summary()?,
            ai: outcome.ai.summary()?,
        },
        baseline: outcome.baseline_risk,
        ai: outcome.ai_risk,
        profile_diffs: diff_profiles(&base_table, &ai_table),
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::to_canonical_string;
    use crate::synthetic::demo_project;

    #[test]
    fn no_overrides_matches_plain_pair_run() {
        let project = demo_project().unwrap();
        let config = SimulationConfig::new(3000, 9).unwrap();
        let plain = simulate_pair(&project.resolve_pair("main").unwrap(), &config).unwrap();
        let r = evaluate(&project, &WhatIfRequest::new("main", 9, 3000)).unwrap();
        assert_eq!(r.baseline, plain.baseline_risk);
        assert_eq!(r.ai, plain.ai_risk);
        assert_eq!(r.risk_table.delta, plain.delta);
        assert!(r.profile_diffs.is_empty());
        assert!(r.transitions.iter().all(|t| t.flag == TransitionFlag::NotConcerning));
    }

    #[test]
    fn zeroing_a_step_zeroes_ai_risk() {
        let project = demo_project().unwrap();
        let before = to_canonical_string(&project).unwrap();
        let mut req = WhatIfRequest::new("main", 1, 2000);
        req.overrides.push(StepOverrideEntry {
            variant: ScenarioVariant::AiAugmented,
            step: ChainStep::Acquisition,
            model: StepOverride::Fixed(0.0),
        });
        let r = evaluate(&project, &req).unwrap();
        assert_eq!(r.ai.risk, 0.0);
        assert_eq!(r.risk_table.delta, -r.baseline.risk);
        assert_eq!(to_canonical_string(&project).unwrap(), before);
    }

    #[test]
    fn consequence_and_levels() {
        let project = demo_project().unwrap();
        let mut req = WhatIfRequest::new("notional", 0, 10);
        req.consequence = Some(1000.0);
        req.level_overrides.push(LevelOverride {
            variant: ScenarioVariant::AiAugmented,
            step: ChainStep::Acquisition,
            field: RequirementField::RelativeP,
            level: Level::Med,
        });
        let r = evaluate(&project, &req).unwrap();
        assert_eq!((r.baseline.risk, r.ai.risk, r.risk_table.delta), (5.0, 17.0, 12.0));
        assert_eq!(r.transitions[1].flag, TransitionFlag::Concerning);
        assert_eq!(r.profile_diffs.len(), 1);
    }

    #[test]
    fn bad_values_name_their_path() {
        let project = demo_project().unwrap();
        let mut req = WhatIfRequest::new("main", 0, 10);
        req.overrides.push(StepOverrideEntry {
            variant: ScenarioVariant::Baseline,
            step: ChainStep::Production,
            model: StepOverride::Fixed(1.3),
        });
        match evaluate(&project, &req) {
            Err(Error::Invalid { path, .. }) => assert_eq!(path, "overrides[0].model.fixed"),
            other => panic!("{other:?}"),
        }
        let mut req = WhatIfRequest::new("main", 0, 0);
        assert!(matches!(evaluate(&project, &req), Err(Error::Invalid { .. })));
        req.n_trials = 10;
        req.consequence = Some(-1.0);
        assert!(matches!(evaluate(&project, &req), Err(Error::Invalid { .. })));
        req.pair_id = "nope".into();
        req.consequence = None;
        assert!(matches!(evaluate(&project, &req), Err(Error::NotFound(_))));
    }

    #[test]
    fn shift_moves_the_mean() {
        let project = demo_project().unwrap();
        let mut req = WhatIfRequest::new("main", 4, 4000);
        let base = evaluate(&project, &req).unwrap();
        req.overrides.push(StepOverrideEntry {
            variant: ScenarioVariant::AiAugmented,
            step: ChainStep::Production,
            model: StepOverride::Shift(0.2),
        });
        let up = evaluate(&project, &req).unwrap();
        assert!(up.ai.risk > base.ai.risk);
        assert_eq!(up.baseline, base.baseline);
    }
}
