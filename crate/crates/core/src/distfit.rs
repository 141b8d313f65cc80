//! Discrete empirical distributions on `[0, 1]` built from 0-10 expert scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskmodel::ChainStep;
use crate::rng::Stream;

pub const DEFAULT_SCALE_MAX: f64 = 10.0;

/// Weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Which tool access a participant had.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cohort {
    #[serde(rename = "internet")]
    InternetOnly,
    #[serde(rename = "internet_llm")]
    InternetPlusLlm,
}

impl Cohort {
    pub const ALL: [Cohort; 2] = [Cohort::InternetOnly, Cohort::InternetPlusLlm];

    pub fn token(self) -> &'static str {
        match self {
            Cohort::InternetOnly => "internet",
            Cohort::InternetPlusLlm => "internet_llm",
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.token())
    }
}

impl FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Cohort::ALL
            .into_iter()
            .find(|c| c.token() == s)
            .ok_or_else(|| Error::validation(format!("unknown cohort token '{s}'")))
    }
}

/// One expert accuracy score for one participant on one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub participant_id: String,
    pub cohort: Cohort,
    pub step: ChainStep,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub value: f64,
    pub weight: f64,
}

/// A finite distribution over probabilities.
///
/// The support is kept canonical: sorted strictly ascending, no duplicates,
/// every weight positive. Two distributions fitted from the same multiset of
/// scores are therefore structurally equal.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct EmpiricalDistribution {
    support: Vec<SupportPoint>,
    #[serde(default)]
    provenance: String,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<SupportPoint>,
    #[serde(default)]
    provenance: String,
}

impl TryFrom<RawDistribution> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        EmpiricalDistribution::new(raw.support, raw.provenance)
    }
}

impl PartialEq for EmpiricalDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.support == other.support && self.provenance == other.provenance
    }
}

impl EmpiricalDistribution {
    /// Builds a distribution from weighted points. Repeated values are merged
    /// by summing weights; the weights must already sum to one.
    pub fn new(points: Vec<SupportPoint>, provenance: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData("distribution has no support points".into()));
        }
        for p in &points {
            if !(p.value.is_finite() && (0.0..=1.0).contains(&p.value)) {
                return Err(Error::validation(format!(
                    "support value {} is outside [0, 1]",
                    p.value
                )));
            }
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(Error::validation(format!(
                    "support weight {} must be positive",
                    p.weight
                )));
            }
        }
        let mut points = points;
        points.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut support: Vec<SupportPoint> = Vec::with_capacity(points.len());
        for p in points {
            match support.last_mut() {
                Some(last) if last.value == p.value => last.weight += p.weight,
                _ => support.push(p),
            }
        }
        let total: f64 = support.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation(format!(
                "support weights sum to {total}, expected 1"
            )));
        }
        Ok(Self::from_canonical(support, provenance.into()))
    }

    fn from_canonical(support: Vec<SupportPoint>, provenance: String) -> Self {
        let mut cumulative = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for p in &support {
            acc += p.weight;
            cumulative.push(acc);
        }
        // The last cumulative weight is pinned to one so that every uniform
        // draw in (0, 1] lands on a support point.
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        EmpiricalDistribution {
            support,
            provenance,
            cumulative,
        }
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(vec![SupportPoint { value, weight: 1.0 }], "point mass")
    }

    /// Fits the relative-frequency distribution of `score / scale_max` over
    /// samples that all share one cohort and one step.
    pub fn from_scores(scores: &[ScoreSample], scale_max: f64) -> Result<Self> {
        if !(scale_max.is_finite() && scale_max > 0.0) {
            return Err(Error::validation(format!("scale_max {scale_max} must be positive")));
        }
        let first = scores
            .first()
            .ok_or_else(|| Error::InsufficientData("no scores to fit".into()))?;
        let mut values = Vec::with_capacity(scores.len());
        for s in scores {
            if s.cohort != first.cohort || s.step != first.step {
                return Err(Error::validation(format!(
                    "mixed samples: expected {}/{}, found {}/{} for participant '{}'",
                    first.cohort, first.step, s.cohort, s.step, s.participant_id
                )));
            }
            if !(s.score.is_finite() && (0.0..=scale_max).contains(&s.score)) {
                return Err(Error::validation(format!(
                    "score {} for participant '{}' is outside [0, {scale_max}]",
                    s.score, s.participant_id
                )));
            }
            values.push(s.score);
        }
        values.sort_by(f64::total_cmp);

        let n = values.len() as f64;
        let mut support: Vec<SupportPoint> = Vec::new();
        let mut i = 0;
        while i < values.len() {
            let score = values[i];
            let run = values[i..].iter().take_while(|&&v| v == score).count();
            support.push(SupportPoint {
                value: score / scale_max,
                weight: run as f64 / n,
            });
            i += run;
        }
        let provenance = format!(
            "{} scores, cohort {}, step {}, scale 0-{scale_max}",
            values.len(),
            first.cohort,
            first.step
        );
        Ok(Self::from_canonical(support, provenance))
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn cumulative_weights(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|p| p.value * p.weight).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.support.last().map_or(0.0, |p| p.value)
    }

    /// Maps a uniform draw in `(0, 1]` to the smallest support value whose
    /// cumulative weight is at least `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.support[idx.min(self.support.len() - 1)].value
    }

    /// Draws one value, consuming exactly one uniform from `stream`.
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        self.quantile(stream.next_uniform())
    }

    /// Moves every support value by `delta`, clamping to `[0, 1]` and merging
    /// points that collide.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::validation(format!("shift {delta} is not finite")));
        }
        let points = self
            .support
            .iter()
            .map(|p| SupportPoint {
                value: (p.value + delta).clamp(0.0, 1.0),
                weight: p.weight,
            })
            .collect();
        let mut shifted = Self::new(points, self.provenance.clone())?;
        shifted.provenance = format!("{} shifted by {delta}", self.provenance);
        Ok(shifted)
    }
}
