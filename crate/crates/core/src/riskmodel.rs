//! Scenario / probability / consequence triplets over a fixed five-step
//! misuse chain, and the closed-form risk arithmetic on top of them.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decimal;
use crate::distfit::{Cohort, EmpiricalDistribution};
use crate::error::{Error, Result};

/// Attached to every serialized [`RiskResult`]. Steps are multiplied as if
/// independent even though nothing guarantees that they are.
pub const INDEPENDENCE_DISCLAIMER: &str = "step probabilities are combined assuming independence; \
     probability and consequence terms are not independent in reality";

pub const DEFAULT_CONSEQUENCE_UNITS: &str = "deaths";

/// One of the five steps of a misuse chain, in fixed chain order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainStep {
    Ideation,
    Acquisition,
    Production,
    Weaponization,
    #[serde(rename = "deploy")]
    DeployDelivery,
}

impl ChainStep {
    pub const COUNT: usize = 5;

    pub const ALL: [ChainStep; 5] = [
        ChainStep::Ideation,
        ChainStep::Acquisition,
        ChainStep::Production,
        ChainStep::Weaponization,
        ChainStep::DeployDelivery,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// File token, as used in score CSVs and project files.
    pub fn token(self) -> &'static str {
        match self {
            ChainStep::Ideation => "ideation",
            ChainStep::Acquisition => "acquisition",
            ChainStep::Production => "production",
            ChainStep::Weaponization => "weaponization",
            ChainStep::DeployDelivery => "deploy",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ChainStep::Ideation => "Ideation",
            ChainStep::Acquisition => "Acquisition",
            ChainStep::Production => "Production",
            ChainStep::Weaponization => "Weaponization",
            ChainStep::DeployDelivery => "Deploy/Delivery",
        }
    }
}

impl fmt::Display for ChainStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.token())
    }
}

impl FromStr for ChainStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChainStep::ALL
            .into_iter()
            .find(|step| step.token() == s)
            .ok_or_else(|| Error::validation(format!("unknown step token '{s}'")))
    }
}

/// A value for every chain step. Serialized as a map keyed by step token, in
/// chain order; deserialization requires each of the five keys exactly once.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMap<T>([T; 5]);

impl<T> ChainMap<T> {
    pub fn from_fn(mut f: impl FnMut(ChainStep) -> T) -> Self {
        ChainMap(ChainStep::ALL.map(&mut f))
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(ChainStep) -> Result<T, E>) -> Result<Self, E> {
        let mut out = Vec::with_capacity(ChainStep::COUNT);
        for step in ChainStep::ALL {
            out.push(f(step)?);
        }
        Ok(ChainMap(vec_to_array(out)))
    }

    pub fn get(&self, step: ChainStep) -> &T {
        &self.0[step.index()]
    }

    pub fn get_mut(&mut self, step: ChainStep) -> &mut T {
        &mut self.0[step.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChainStep, &T)> {
        ChainStep::ALL.into_iter().zip(self.0.iter())
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.0.iter()
    }

    pub fn map<U>(&self, mut f: impl FnMut(ChainStep, &T) -> U) -> ChainMap<U> {
        ChainMap::from_fn(|step| f(step, self.get(step)))
    }

    /// Builds a map from `(step, value)` entries, rejecting missing or repeated steps.
    pub fn from_entries(entries: impl IntoIterator<Item = (ChainStep, T)>) -> Result<Self> {
        let mut slots: [Option<T>; 5] = Default::default();
        for (step, value) in entries {
            let slot = &mut slots[step.index()];
            if slot.is_some() {
                return Err(Error::validation(format!("step '{step}' given more than once")));
            }
            *slot = Some(value);
        }
        let mut out = Vec::with_capacity(ChainStep::COUNT);
        for (step, slot) in ChainStep::ALL.into_iter().zip(slots) {
            out.push(slot.ok_or_else(|| Error::validation(format!("missing step '{step}'")))?);
        }
        Ok(ChainMap(vec_to_array(out)))
    }
}

fn vec_to_array<T>(v: Vec<T>) -> [T; 5] {
    match v.try_into() {
        Ok(arr) => arr,
        Err(_) => unreachable!("chain maps always hold five entries"),
    }
}

impl<T: Serialize> Serialize for ChainMap<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(ChainStep::COUNT))?;
        for (step, value) in self.iter() {
            map.serialize_entry(step.token(), value)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for ChainMap<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ChainMapVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for ChainMapVisitor<T> {
            type Value = ChainMap<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map with exactly the five chain steps as keys")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::with_capacity(ChainStep::COUNT);
                while let Some(step) = access.next_key::<ChainStep>()? {
                    entries.push((step, access.next_value::<T>()?));
                }
                ChainMap::from_entries(entries).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_map(ChainMapVisitor(std::marker::PhantomData))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioVariant {
    Baseline,
    AiAugmented,
}

impl ScenarioVariant {
    pub fn token(self) -> &'static str {
        match self {
            ScenarioVariant::Baseline => "baseline",
            ScenarioVariant::AiAugmented => "ai_augmented",
        }
    }
}

impl fmt::Display for ScenarioVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.token())
    }
}

/// A finite real in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::validation(format!("probability {value} is outside [0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Point-valued consequence of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsequenceModel {
    pub value: f64,
    #[serde(default = "default_units")]
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty_note: Option<String>,
}

fn default_units() -> String {
    DEFAULT_CONSEQUENCE_UNITS.to_string()
}

impl ConsequenceModel {
    pub fn new(value: f64) -> Result<Self> {
        let model = ConsequenceModel {
            value,
            units: default_units(),
            uncertainty_note: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value.is_finite() && self.value >= 0.0) {
            return Err(Error::validation(format!(
                "consequence value {} must be a finite non-negative number",
                self.value
            )));
        }
        if self.units.trim().is_empty() {
            return Err(Error::validation("consequence units must not be empty"));
        }
        Ok(())
    }
}

/// Reference to the scores of one cohort inside a named dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub id: String,
    pub cohort: Cohort,
}

/// How a step's success probability is drawn in each trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepModel {
    /// Constant probability; consumes no randomness.
    Fixed(Probability),
    Empirical(EmpiricalDistribution),
    /// Unresolved reference to a score dataset; see `Project::resolve_scenario`.
    Dataset(DatasetRef),
}

impl StepModel {
    pub fn fixed(p: f64) -> Result<Self> {
        Ok(StepModel::Fixed(Probability::new(p)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub variant: ScenarioVariant,
    #[serde(default)]
    pub description: String,
    pub steps: ChainMap<StepModel>,
    pub consequence: ConsequenceModel,
}

impl Scenario {
    pub fn new(
        id: impl Into<String>,
        variant: ScenarioVariant,
        steps: ChainMap<StepModel>,
        consequence: ConsequenceModel,
    ) -> Result<Self> {
        let scenario = Scenario {
            id: id.into(),
            variant,
            description: String::new(),
            steps,
            consequence,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::validation("scenario id must not be empty"));
        }
        self.consequence
            .validate()
            .map_err(|e| Error::validation(format!("scenario '{}': {e}", self.id)))
    }
}

/// A baseline scenario and its AI-augmented counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPair {
    pub baseline: Scenario,
    pub ai: Scenario,
    /// Both variants are assumed to share one consequence.
    pub equal_consequence: bool,
}

impl ScenarioPair {
    pub fn new(baseline: Scenario, ai: Scenario, equal_consequence: bool) -> Result<Self> {
        let pair = ScenarioPair {
            baseline,
            ai,
            equal_consequence,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.baseline.validate()?;
        self.ai.validate()?;
        if self.baseline.variant != ScenarioVariant::Baseline {
            return Err(Error::validation(format!(
                "pair baseline '{}' has variant {}",
                self.baseline.id, self.baseline.variant
            )));
        }
        if self.ai.variant != ScenarioVariant::AiAugmented {
            return Err(Error::validation(format!(
                "pair ai scenario '{}' has variant {}",
                self.ai.id, self.ai.variant
            )));
        }
        if self.equal_consequence && self.baseline.consequence.value != self.ai.consequence.value {
            return Err(Error::validation(format!(
                "equal_consequence is set but consequences differ ({} vs {})",
                self.baseline.consequence.value, self.ai.consequence.value
            )));
        }
        if self.baseline.consequence.units != self.ai.consequence.units {
            return Err(Error::validation(format!(
                "consequence units differ ('{}' vs '{}')",
                self.baseline.consequence.units, self.ai.consequence.units
            )));
        }
        Ok(())
    }
}

/// Probability, consequence and their product for one scenario variant.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct RiskResult {
    pub variant: ScenarioVariant,
    pub overall_probability: Probability,
    pub consequence: f64,
    pub units: String,
    pub risk: f64,
}

impl RiskResult {
    pub fn new(
        variant: ScenarioVariant,
        overall_probability: Probability,
        consequence: &ConsequenceModel,
    ) -> Result<Self> {
        let risk = expected_risk(overall_probability.get(), consequence.value)?;
        Ok(RiskResult {
            variant,
            overall_probability,
            consequence: consequence.value,
            units: consequence.units.clone(),
            risk,
        })
    }

    /// Recomputes `overall_probability * consequence` from the stored fields.
    pub fn recomputed_risk(&self) -> f64 {
        decimal::product(self.overall_probability.get(), self.consequence)
    }
}

impl Serialize for RiskResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("RiskResult", 6)?;
        s.serialize_field("variant", &self.variant)?;
        s.serialize_field("overall_probability", &self.overall_probability)?;
        s.serialize_field("consequence", &self.consequence)?;
        s.serialize_field("units", &self.units)?;
        s.serialize_field("risk", &self.risk)?;
        s.serialize_field("disclaimer", INDEPENDENCE_DISCLAIMER)?;
        s.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskChange {
    Increased,
    Decreased,
    Unchanged,
}

/// Product of the five step probabilities, in chain order.
pub fn overall_probability(step_probs: &[f64]) -> Result<f64> {
    if step_probs.len() != ChainStep::COUNT {
        return Err(Error::validation(format!(
            "expected {} step probabilities, got {}",
            ChainStep::COUNT,
            step_probs.len()
        )));
    }
    let mut product = 1.0;
    for (step, &p) in ChainStep::ALL.iter().zip(step_probs) {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(Error::validation(format!(
                "step '{step}' probability {p} is outside [0, 1]"
            )));
        }
        product *= p;
    }
    Ok(product)
}

/// `overall_p * consequence`, multiplied on the decimal forms of both
/// operands so that e.g. 0.017 x 100000 is exactly 1700.
pub fn expected_risk(overall_p: f64, consequence: f64) -> Result<f64> {
    let p = Probability::new(overall_p)?;
    if !(consequence.is_finite() && consequence >= 0.0) {
        return Err(Error::validation(format!(
            "consequence {consequence} must be a finite non-negative number"
        )));
    }
    Ok(decimal::product(p.get(), consequence))
}

/// `ai.risk - baseline.risk`; positive means the AI variant carries more risk.
pub fn risk_delta(baseline: &RiskResult, ai: &RiskResult) -> Result<f64> {
    if baseline.units != ai.units {
        return Err(Error::validation(format!(
            "consequence units differ ('{}' vs '{}')",
            baseline.units, ai.units
        )));
    }
    Ok(decimal::difference(ai.risk, baseline.risk))
}

/// Negative tolerances are treated as zero.
pub fn classify_risk_change(delta: f64, tolerance: f64) -> RiskChange {
    let tolerance = tolerance.max(0.0);
    if delta > tolerance {
        RiskChange::Increased
    } else if delta < -tolerance {
        RiskChange::Decreased
    } else {
        RiskChange::Unchanged
    }
}
