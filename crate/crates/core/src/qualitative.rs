//! Ordinal requirement profiles per chain step and an append-only
//! concern-assessment workflow.
//!
//! Levels are ordinal only. Nothing in this module converts a [`Level`] to a
//! number or combines levels arithmetically.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskmodel::{ChainMap, ChainStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    Med,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Med, Level::High];

    pub fn token(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Med => "med",
            Level::High => "high",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Level::Low => "Low",
            Level::Med => "Med",
            Level::High => "High",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Level::ALL
            .into_iter()
            .find(|l| l.token() == s)
            .ok_or_else(|| Error::validation(format!("unknown level '{s}'")))
    }
}

/// A column of the requirement table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementField {
    Time,
    Cost,
    Knowledge,
    Resources,
    Safeguard,
    RelativeP,
}

impl RequirementField {
    pub const ALL: [RequirementField; 6] = [
        RequirementField::Time,
        RequirementField::Cost,
        RequirementField::Knowledge,
        RequirementField::Resources,
        RequirementField::Safeguard,
        RequirementField::RelativeP,
    ];

    pub fn token(self) -> &'static str {
        match self {
            RequirementField::Time => "time",
            RequirementField::Cost => "cost",
            RequirementField::Knowledge => "knowledge",
            RequirementField::Resources => "resources",
            RequirementField::Safeguard => "safeguard",
            RequirementField::RelativeP => "relative_p",
        }
    }
}

impl fmt::Display for RequirementField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.token())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRequirementProfile {
    pub step: ChainStep,
    pub time: Level,
    pub cost: Level,
    pub knowledge: Level,
    pub resources: Level,
    pub safeguard: Level,
    /// Expert judgment of the step's relative success probability. Recorded,
    /// never derived from the requirement columns.
    pub relative_p: Level,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub assessor: String,
}

impl StepRequirementProfile {
    pub fn level(&self, field: RequirementField) -> Level {
        match field {
            RequirementField::Time => self.time,
            RequirementField::Cost => self.cost,
            RequirementField::Knowledge => self.knowledge,
            RequirementField::Resources => self.resources,
            RequirementField::Safeguard => self.safeguard,
            RequirementField::RelativeP => self.relative_p,
        }
    }

    pub fn set_level(&mut self, field: RequirementField, level: Level) {
        let slot = match field {
            RequirementField::Time => &mut self.time,
            RequirementField::Cost => &mut self.cost,
            RequirementField::Knowledge => &mut self.knowledge,
            RequirementField::Resources => &mut self.resources,
            RequirementField::Safeguard => &mut self.safeguard,
            RequirementField::RelativeP => &mut self.relative_p,
        };
        *slot = level;
    }
}

/// Requirement profiles for all five steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainMap<StepRequirementProfile>", into = "ChainMap<StepRequirementProfile>")]
pub struct ProfileTable(ChainMap<StepRequirementProfile>);

impl TryFrom<ChainMap<StepRequirementProfile>> for ProfileTable {
    type Error = Error;

    fn try_from(rows: ChainMap<StepRequirementProfile>) -> Result<Self> {
        for (step, row) in rows.iter() {
            if row.step != step {
                return Err(Error::validation(format!(
                    "profile row keyed '{step}' declares step '{}'",
                    row.step
                )));
            }
        }
        Ok(ProfileTable(rows))
    }
}

impl From<ProfileTable> for ChainMap<StepRequirementProfile> {
    fn from(t: ProfileTable) -> Self {
        t.0
    }
}

impl ProfileTable {
    /// Builds a table from a step-keyed map; every step must be present.
    pub fn from_map(map: BTreeMap<ChainStep, StepRequirementProfile>) -> Result<Self> {
        ChainMap::from_entries(map)?.try_into()
    }

    pub fn get(&self, step: ChainStep) -> &StepRequirementProfile {
        self.0.get(step)
    }

    pub fn get_mut(&mut self, step: ChainStep) -> &mut StepRequirementProfile {
        self.0.get_mut(step)
    }

    pub fn rows(&self) -> impl Iterator<Item = &StepRequirementProfile> {
        self.0.values()
    }
}

/// The notional requirement table shipped as editable defaults. These are one
/// author's judgments for an unskilled actor, not ground truth.
pub fn default_profile_table() -> ProfileTable {
    use Level::*;
    // time, cost, knowledge, resources, safeguard, relative p
    let rows: [(ChainStep, [Level; 6]); 5] = [
        (ChainStep::Ideation, [Low, Low, Low, Low, Low, High]),
        (ChainStep::Acquisition, [Low, Low, Low, Low, Med, Low]),
        (ChainStep::Production, [High, High, High, High, High, Low]),
        (ChainStep::Weaponization, [High, High, High, High, High, Low]),
        (ChainStep::DeployDelivery, [Low, High, High, Med, High, Med]),
    ];
    let map = ChainMap::from_fn(|step| {
        let [time, cost, knowledge, resources, safeguard, relative_p] = rows[step.index()].1;
        StepRequirementProfile {
            step,
            time,
            cost,
            knowledge,
            resources,
            safeguard,
            relative_p,
            rationale: "notional default".to_string(),
            assessor: "default table".to_string(),
        }
    });
    ProfileTable(map)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionFlag {
    Concerning,
    NotConcerning,
}

/// A move of a step's relative probability is concerning exactly when the AI
/// level is above the baseline level (low to med, low to high, med to high).
pub fn flag_transition(baseline: Level, ai: Level) -> TransitionFlag {
    if ai > baseline {
        TransitionFlag::Concerning
    } else {
        TransitionFlag::NotConcerning
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    Concerning,
    NotConcerning,
    /// A requirement column dropped: the step got easier to access.
    BarrierReduced,
    BarrierRaised,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDiffRow {
    pub step: ChainStep,
    pub field: RequirementField,
    pub baseline: Level,
    pub ai: Level,
    pub kind: DiffKind,
}

/// One row per changed cell, in chain order then column order.
pub fn diff_profiles(baseline: &ProfileTable, ai: &ProfileTable) -> Vec<ProfileDiffRow> {
    let mut rows = Vec::new();
    for step in ChainStep::ALL {
        let (b, a) = (baseline.get(step), ai.get(step));
        for field in RequirementField::ALL {
            let (bl, al) = (b.level(field), a.level(field));
            if bl == al {
                continue;
            }
            let kind = match field {
                RequirementField::RelativeP => match flag_transition(bl, al) {
                    TransitionFlag::Concerning => DiffKind::Concerning,
                    TransitionFlag::NotConcerning => DiffKind::NotConcerning,
                },
                _ if al < bl => DiffKind::BarrierReduced,
                _ => DiffKind::BarrierRaised,
            };
            rows.push(ProfileDiffRow {
                step,
                field,
                baseline: bl,
                ai: al,
                kind,
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolRecord {
    pub name: String,
    /// Where the tool was found (literature, web search, interview, ...).
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityRecord {
    pub name: String,
    pub initial_level: Level,
}

/// An evaluation of one tool against one organism on the four concern
/// categories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcernAssessment {
    pub organism: String,
    pub ai_tool: String,
    #[serde(default)]
    pub tool_reference: String,
    pub usability_of_technology: Option<Level>,
    pub usability_as_weapon: Option<Level>,
    pub requirements_of_actors: Option<Level>,
    pub potential_for_mitigation: Option<Level>,
    #[serde(default)]
    pub subcomponent_notes: BTreeMap<String, String>,
    overall_concern: Option<Level>,
    #[serde(default)]
    pub rationale: String,
    /// Milliseconds since the Unix epoch, assigned when recorded. Unique and
    /// strictly increasing within a workflow.
    #[serde(default)]
    pub recorded_at_ms: u64,
}

impl ConcernAssessment {
    pub fn new(organism: impl Into<String>, ai_tool: impl Into<String>) -> Self {
        ConcernAssessment {
            organism: organism.into(),
            ai_tool: ai_tool.into(),
            tool_reference: String::new(),
            usability_of_technology: None,
            usability_as_weapon: None,
            requirements_of_actors: None,
            potential_for_mitigation: None,
            subcomponent_notes: BTreeMap::new(),
            overall_concern: None,
            rationale: String::new(),
            recorded_at_ms: 0,
        }
    }

    pub fn with_categories(
        mut self,
        usability_of_technology: Level,
        usability_as_weapon: Level,
        requirements_of_actors: Level,
        potential_for_mitigation: Level,
    ) -> Self {
        self.usability_of_technology = Some(usability_of_technology);
        self.usability_as_weapon = Some(usability_as_weapon);
        self.requirements_of_actors = Some(requirements_of_actors);
        self.potential_for_mitigation = Some(potential_for_mitigation);
        self
    }

    fn missing_category(&self) -> Option<&'static str> {
        [
            ("usability_of_technology", self.usability_of_technology),
            ("usability_as_weapon", self.usability_as_weapon),
            ("requirements_of_actors", self.requirements_of_actors),
            ("potential_for_mitigation", self.potential_for_mitigation),
        ]
        .into_iter()
        .find(|(_, level)| level.is_none())
        .map(|(name, _)| name)
    }

    /// The expert's overall judgment; allowed only once all four categories
    /// have levels.
    pub fn set_overall_concern(&mut self, level: Level) -> Result<()> {
        if let Some(missing) = self.missing_category() {
            return Err(Error::validation(format!(
                "cannot set overall concern before '{missing}' is assessed"
            )));
        }
        self.overall_concern = Some(level);
        Ok(())
    }

    pub fn overall_concern(&self) -> Option<Level> {
        self.overall_concern
    }

    pub fn validate(&self) -> Result<()> {
        if self.overall_concern.is_some() {
            if let Some(missing) = self.missing_category() {
                return Err(Error::validation(format!(
                    "overall concern is set but '{missing}' is not assessed"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcernChange {
    Raised,
    Lowered,
    NoChange,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcernUpdate {
    pub capability: String,
    pub old_level: Level,
    pub new_level: Level,
    pub change: ConcernChange,
    pub rationale: String,
    /// Indices into the workflow's evaluations that were on record.
    pub supporting_evaluations: Vec<usize>,
}

/// Organisms, tools, evaluations and concern updates, in that order of the
/// process. Every list is append-only.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentWorkflow {
    pub id: String,
    #[serde(default)]
    pub organisms: Vec<String>,
    #[serde(default)]
    pub tools: Vec<ToolRecord>,
    #[serde(default)]
    pub capabilities: Vec<CapabilityRecord>,
    #[serde(default)]
    pub evaluations: Vec<ConcernAssessment>,
    #[serde(default)]
    pub concern_updates: Vec<ConcernUpdate>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl AssessmentWorkflow {
    pub fn new(id: impl Into<String>) -> Self {
        AssessmentWorkflow {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn register_organism(&mut self, name: impl Into<String>) -> Result<()> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::validation("organism label must not be empty"));
        }
        if !self.organisms.contains(&name) {
            self.organisms.push(name);
        }
        Ok(())
    }

    pub fn register_tool(&mut self, name: impl Into<String>, source: impl Into<String>) -> Result<()> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::validation("tool name must not be empty"));
        }
        if !self.tools.iter().any(|t| t.name == name) {
            self.tools.push(ToolRecord {
                name,
                source: source.into(),
            });
        }
        Ok(())
    }

    pub fn register_capability(&mut self, name: impl Into<String>, initial_level: Level) -> Result<()> {
        let name = name.into();
        if self.capabilities.iter().any(|c| c.name == name) {
            return Err(Error::validation(format!("capability '{name}' already registered")));
        }
        self.capabilities.push(CapabilityRecord { name, initial_level });
        Ok(())
    }

    pub fn current_level(&self, capability: &str) -> Option<Level> {
        self.concern_updates
            .iter()
            .rev()
            .find(|u| u.capability == capability)
            .map(|u| u.new_level)
            .or_else(|| {
                self.capabilities
                    .iter()
                    .find(|c| c.name == capability)
                    .map(|c| c.initial_level)
            })
    }

    /// Appends an evaluation, stamping it with the wall clock.
    pub fn record_assessment(&mut self, evaluation: ConcernAssessment) -> Result<()> {
        self.record_assessment_at(evaluation, now_ms())
    }

    /// Appends an evaluation with an explicit clock reading. The stored
    /// timestamp is bumped past the previous one if needed.
    pub fn record_assessment_at(&mut self, mut evaluation: ConcernAssessment, clock_ms: u64) -> Result<()> {
        if !self.organisms.contains(&evaluation.organism) {
            return Err(Error::validation(format!(
                "organism '{}' is not registered",
                evaluation.organism
            )));
        }
        if !self.tools.iter().any(|t| t.name == evaluation.ai_tool) {
            return Err(Error::validation(format!(
                "tool '{}' is not registered",
                evaluation.ai_tool
            )));
        }
        evaluation.validate()?;
        let floor = self.evaluations.last().map_or(0, |e| e.recorded_at_ms + 1);
        evaluation.recorded_at_ms = clock_ms.max(floor);
        self.evaluations.push(evaluation);
        Ok(())
    }

    pub fn update_concern(&mut self, capability: &str, new_level: Level, rationale: &str) -> Result<()> {
        if rationale.trim().is_empty() {
            return Err(Error::validation("a concern update needs a rationale"));
        }
        if self.evaluations.is_empty() {
            return Err(Error::validation(
                "a concern update needs at least one recorded evaluation",
            ));
        }
        let old_level = self
            .current_level(capability)
            .ok_or_else(|| Error::validation(format!("capability '{capability}' is not registered")))?;
        let change = match new_level.cmp(&old_level) {
            std::cmp::Ordering::Greater => ConcernChange::Raised,
            std::cmp::Ordering::Less => ConcernChange::Lowered,
            std::cmp::Ordering::Equal => ConcernChange::NoChange,
        };
        self.concern_updates.push(ConcernUpdate {
            capability: capability.to_string(),
            old_level,
            new_level,
            change,
            rationale: rationale.to_string(),
            supporting_evaluations: (0..self.evaluations.len()).collect(),
        });
        Ok(())
    }

    /// Every referential invariant, as `(path, message)` pairs.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, e) in self.evaluations.iter().enumerate() {
            let path = format!("evaluations[{i}]");
            if !self.organisms.contains(&e.organism) {
                out.push((path.clone(), format!("organism '{}' is not registered", e.organism)));
            }
            if !self.tools.iter().any(|t| t.name == e.ai_tool) {
                out.push((path.clone(), format!("tool '{}' is not registered", e.ai_tool)));
            }
            if let Err(err) = e.validate() {
                out.push((path, err.to_string()));
            }
        }
        for (i, u) in self.concern_updates.iter().enumerate() {
            let path = format!("concern_updates[{i}]");
            if u.supporting_evaluations.is_empty() {
                out.push((path.clone(), "references no evaluation".to_string()));
            }
            if let Some(bad) = u.supporting_evaluations.iter().find(|&&k| k >= self.evaluations.len()) {
                out.push((path.clone(), format!("references missing evaluation {bad}")));
            }
            if !self.capabilities.iter().any(|c| c.name == u.capability) {
                out.push((path, format!("capability '{}' is not registered", u.capability)));
            }
        }
        out
    }
}
