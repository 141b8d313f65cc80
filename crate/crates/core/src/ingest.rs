//! Score CSV parsing and the single-document project store.
//!
//! Project files are pretty-printed JSON. Struct fields serialize in
//! declaration order and every map is step- or key-ordered, so saving the same
//! project always yields the same bytes.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distfit::{Cohort, EmpiricalDistribution, ScoreSample, DEFAULT_SCALE_MAX};
use crate::error::{Error, Result, Violation};
use crate::qualitative::{default_profile_table, AssessmentWorkflow, ProfileTable};
use crate::riskmodel::{ChainStep, Scenario, ScenarioPair, ScenarioVariant, StepModel};

pub const SCHEMA_VERSION: u64 = 1;

pub const CSV_HEADER: [&str; 4] = ["participant_id", "cohort", "step", "score"];

/// Parses a score file with header `participant_id,cohort,step,score`.
///
/// Every data row must parse; nothing is skipped.
pub fn parse_score_csv(bytes: &[u8]) -> Result<Vec<ScoreSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::None)
        .from_reader(bytes);

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
    }
    if let Some(extra) = headers.iter().find(|h| !CSV_HEADER.contains(h)) {
        return Err(Error::Schema(format!("unexpected column '{extra}'")));
    }
    if headers.len() != CSV_HEADER.len() {
        return Err(Error::Schema("duplicate column in header".into()));
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Csv {
                line,
                message: match e.kind() {
                    csv::ErrorKind::UnequalLengths { len, .. } => {
                        format!("expected {} fields, found {len}", CSV_HEADER.len())
                    }
                    _ => e.to_string(),
                },
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| &record[columns[i]];
        let bad = |message: String| Error::Csv { line, message };

        let participant_id = field(0);
        if participant_id.is_empty() {
            return Err(bad("empty participant_id".into()));
        }
        let cohort: Cohort = field(1)
            .parse()
            .map_err(|_| bad(format!("unknown cohort '{}'", field(1))))?;
        let step: ChainStep = field(2)
            .parse()
            .map_err(|_| bad(format!("unknown step '{}'", field(2))))?;
        let score: f64 = field(3)
            .parse()
            .map_err(|_| bad(format!("score '{}' is not a number", field(3))))?;
        if !(score.is_finite() && (0.0..=DEFAULT_SCALE_MAX).contains(&score)) {
            return Err(bad("score out of range".into()));
        }
        out.push(ScoreSample {
            participant_id: participant_id.to_string(),
            cohort,
            step,
            score,
        });
    }
    Ok(out)
}

/// Writes samples in the canonical score-file layout (LF line endings).
pub fn write_score_csv(samples: &[ScoreSample]) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{},{},{}\n", s.participant_id, s.cohort, s.step, s.score));
    }
    out
}

fn default_scale_max() -> f64 {
    DEFAULT_SCALE_MAX
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDataset {
    pub id: String,
    #[serde(default)]
    pub description: String,
    /// True for generated data that stands in for unpublished scores.
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default = "default_scale_max")]
    pub scale_max: f64,
    pub samples: Vec<ScoreSample>,
}

impl ScoreDataset {
    pub fn scores_for(&self, cohort: Cohort, step: ChainStep) -> Vec<ScoreSample> {
        self.samples
            .iter()
            .filter(|s| s.cohort == cohort && s.step == step)
            .cloned()
            .collect()
    }

    pub fn fit(&self, cohort: Cohort, step: ChainStep) -> Result<EmpiricalDistribution> {
        let scores = self.scores_for(cohort, step);
        if scores.is_empty() {
            return Err(Error::InsufficientData(format!(
                "dataset '{}' has no scores for cohort {cohort}, step {step}",
                self.id
            )));
        }
        Ok(EmpiricalDistribution::from_scores(&scores, self.scale_max)?
            .with_provenance(format!(
                "dataset '{}', cohort {cohort}, step {step}, {} scores",
                self.id,
                scores.len()
            )))
    }
}

/// A scenario pair as stored: scenario ids plus optional profile-table ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub id: String,
    pub baseline: String,
    pub ai: String,
    #[serde(default)]
    pub equal_consequence: bool,
    /// Requirement tables; the default table is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ai_profile: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedProfileTable {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub table: ProfileTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub schema_version: u64,
    pub name: String,
    /// Bumped on every persisted write; used to detect conflicting writers.
    #[serde(default)]
    pub revision: u64,
    #[serde(default)]
    pub datasets: Vec<ScoreDataset>,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    #[serde(default)]
    pub profiles: Vec<NamedProfileTable>,
    #[serde(default)]
    pub workflows: Vec<AssessmentWorkflow>,
}

fn v(path: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        path: path.into(),
        message: message.into(),
    }
}

fn duplicate_ids<'a>(
    section: &str,
    ids: impl Iterator<Item = &'a str>,
    out: &mut Vec<Violation>,
) {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if id.trim().is_empty() {
            out.push(v(format!("{section}[{i}].id"), "id must not be empty"));
        } else if !seen.insert(id) {
            out.push(v(format!("{section}[{i}].id"), format!("duplicate id '{id}'")));
        }
    }
}

impl Project {
    pub fn new(name: impl Into<String>) -> Self {
        Project {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            revision: 0,
            datasets: Vec::new(),
            scenarios: Vec::new(),
            pairs: Vec::new(),
            profiles: Vec::new(),
            workflows: Vec::new(),
        }
    }

    pub fn dataset(&self, id: &str) -> Option<&ScoreDataset> {
        self.datasets.iter().find(|d| d.id == id)
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn pair(&self, id: &str) -> Option<&PairSpec> {
        self.pairs.iter().find(|p| p.id == id)
    }

    pub fn profile(&self, id: &str) -> Option<&NamedProfileTable> {
        self.profiles.iter().find(|p| p.id == id)
    }

    pub fn workflow(&self, id: &str) -> Option<&AssessmentWorkflow> {
        self.workflows.iter().find(|w| w.id == id)
    }

    /// Every broken invariant in the project, with element paths.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(v(
                "schema_version",
                format!("unsupported version {} (supported: {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        duplicate_ids("datasets", self.datasets.iter().map(|d| d.id.as_str()), &mut out);
        duplicate_ids("scenarios", self.scenarios.iter().map(|s| s.id.as_str()), &mut out);
        duplicate_ids("pairs", self.pairs.iter().map(|p| p.id.as_str()), &mut out);
        duplicate_ids("profiles", self.profiles.iter().map(|p| p.id.as_str()), &mut out);
        duplicate_ids("workflows", self.workflows.iter().map(|w| w.id.as_str()), &mut out);

        for (i, d) in self.datasets.iter().enumerate() {
            if !(d.scale_max.is_finite() && d.scale_max > 0.0) {
                out.push(v(format!("datasets[{i}].scale_max"), "must be positive"));
            }
            for (j, s) in d.samples.iter().enumerate() {
                if !(s.score.is_finite() && (0.0..=d.scale_max).contains(&s.score)) {
                    out.push(v(
                        format!("datasets[{i}].samples[{j}].score"),
                        format!("score {} is outside [0, {}]", s.score, d.scale_max),
                    ));
                }
            }
        }

        for (i, s) in self.scenarios.iter().enumerate() {
            if let Err(e) = s.validate() {
                out.push(v(format!("scenarios[{i}]"), e.to_string()));
            }
            for (step, model) in s.steps.iter() {
                let StepModel::Dataset(r) = model else { continue };
                let path = format!("scenarios[{i}].steps.{step}");
                match self.dataset(&r.id) {
                    None => out.push(v(path, format!("unknown dataset id '{}'", r.id))),
                    Some(d) if !d.samples.iter().any(|x| x.cohort == r.cohort && x.step == step) => {
                        out.push(v(
                            path,
                            format!("dataset '{}' has no scores for cohort {}, step {step}", r.id, r.cohort),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }

        for (i, p) in self.pairs.iter().enumerate() {
            let base = self.scenario(&p.baseline);
            let ai = self.scenario(&p.ai);
            if base.is_none() {
                out.push(v(format!("pairs[{i}].baseline"), format!("unknown scenario id '{}'", p.baseline)));
            }
            if ai.is_none() {
                out.push(v(format!("pairs[{i}].ai"), format!("unknown scenario id '{}'", p.ai)));
            }
            if let (Some(b), Some(a)) = (base, ai) {
                let pair = ScenarioPair {
                    baseline: b.clone(),
                    ai: a.clone(),
                    equal_consequence: p.equal_consequence,
                };
                if let Err(e) = pair.validate() {
                    out.push(v(format!("pairs[{i}]"), e.to_string()));
                }
            }
            for (field, id) in [("baseline_profile", &p.baseline_profile), ("ai_profile", &p.ai_profile)] {
                if let Some(id) = id {
                    if self.profile(id).is_none() {
                        out.push(v(format!("pairs[{i}].{field}"), format!("unknown profile id '{id}'")));
                    }
                }
            }
        }

        for (i, w) in self.workflows.iter().enumerate() {
            for (path, message) in w.violations() {
                out.push(v(format!("workflows[{i}].{path}"), message));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Violations(violations))
        }
    }

    /// The scenario with every dataset reference replaced by its fitted
    /// empirical distribution.
    pub fn resolve_scenario(&self, id: &str) -> Result<Scenario> {
        let scenario = self
            .scenario(id)
            .ok_or_else(|| Error::NotFound(format!("unknown scenario id '{id}'")))?;
        let mut resolved = scenario.clone();
        for step in ChainStep::ALL {
            let model = resolved.steps.get_mut(step);
            if let StepModel::Dataset(r) = model {
                let dataset = self.dataset(&r.id).ok_or_else(|| {
                    Error::Config(format!(
                        "scenario '{id}' step '{step}': unknown dataset id '{}'",
                        r.id
                    ))
                })?;
                *model = StepModel::Empirical(dataset.fit(r.cohort, step)?);
            }
        }
        Ok(resolved)
    }

    pub fn resolve_pair(&self, id: &str) -> Result<ScenarioPair> {
        let spec = self
            .pair(id)
            .ok_or_else(|| Error::NotFound(format!("unknown pair id '{id}'")))?;
        ScenarioPair::new(
            self.resolve_scenario(&spec.baseline)?,
            self.resolve_scenario(&spec.ai)?,
            spec.equal_consequence,
        )
    }

    /// Baseline and AI requirement tables for a pair.
    pub fn pair_profiles(&self, id: &str) -> Result<(ProfileTable, ProfileTable)> {
        let spec = self
            .pair(id)
            .ok_or_else(|| Error::NotFound(format!("unknown pair id '{id}'")))?;
        let lookup = |pid: &Option<String>| -> Result<ProfileTable> {
            match pid {
                None => Ok(default_profile_table()),
                Some(pid) => self
                    .profile(pid)
                    .map(|p| p.table.clone())
                    .ok_or_else(|| Error::NotFound(format!("unknown profile id '{pid}'"))),
            }
        };
        Ok((lookup(&spec.baseline_profile)?, lookup(&spec.ai_profile)?))
    }

    /// Scenario ids of the given variant.
    pub fn scenario_ids(&self, variant: ScenarioVariant) -> impl Iterator<Item = &str> {
        self.scenarios
            .iter()
            .filter(move |s| s.variant == variant)
            .map(|s| s.id.as_str())
    }
}

/// Canonical text form: pretty JSON with a trailing newline.
pub fn to_canonical_string(project: &Project) -> Result<String> {
    let mut text = serde_json::to_string_pretty(project)
        .map_err(|e| Error::invalid("$", format!("cannot serialize project: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Parses and fully validates a project document.
pub fn parse_project(text: &str) -> Result<Project> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::invalid("$", format!("malformed project file: {e}")))?;
    match value.get("schema_version") {
        None => return Err(Error::invalid("schema_version", "missing field")),
        Some(found) => match found.as_u64() {
            Some(SCHEMA_VERSION) => {}
            Some(other) => {
                return Err(Error::Version {
                    found: other,
                    supported: SCHEMA_VERSION,
                })
            }
            None => return Err(Error::invalid("schema_version", "must be a non-negative integer")),
        },
    }
    let project: Project = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::invalid(if path.is_empty() { "$".to_string() } else { path }, e.into_inner().to_string())
    })?;
    project.validate()?;
    Ok(project)
}

pub fn load_project(path: impl AsRef<Path>) -> Result<Project> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_project(&text)
}

/// Validates and writes the canonical form, replacing the file atomically.
pub fn save_project(project: &Project, path: impl AsRef<Path>) -> Result<()> {
    project.validate()?;
    let path = path.as_ref();
    let text = to_canonical_string(project)?;
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
