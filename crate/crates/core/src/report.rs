//! Risk tables, report bundles and the SVG box plot.
//!
//! The JSON bundle is the contract; the SVG is drawn purely from its
//! [`BoxSummary`] fields.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::Project;
use crate::qualitative::{diff_profiles, ProfileDiffRow};
use crate::riskmodel::{
    classify_risk_change, ChainMap, ChainStep, RiskChange, RiskResult, Scenario, ScenarioVariant,
    StepModel, INDEPENDENCE_DISCLAIMER,
};
use crate::simengine::{simulate_pair, PairOutcome, SimulationConfig, TrialResults};
use crate::stats::{rank_sum_test, summarize, BoxSummary, RankSumResult, QUANTILE_METHOD};
use crate::NOTIONAL_DISCLAIMER;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub scenario: String,
    pub variant: ScenarioVariant,
    pub mean_p: f64,
    pub consequence: f64,
    pub units: String,
    pub risk: f64,
}

impl RiskRow {
    fn new(scenario: &str, risk: &RiskResult) -> Self {
        RiskRow {
            scenario: scenario.to_string(),
            variant: risk.variant,
            mean_p: risk.overall_probability.get(),
            consequence: risk.consequence,
            units: risk.units.clone(),
            risk: risk.risk,
        }
    }
}

/// Two-row risk table plus the signed delta between the rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub disclaimer: String,
    pub independence_note: String,
    pub pair_id: String,
    pub seed: u64,
    pub n_trials: usize,
    pub rows: Vec<RiskRow>,
    pub delta: f64,
    pub units: String,
    pub change: RiskChange,
}

impl RiskTable {
    pub fn new(pair_id: &str, outcome: &PairOutcome, config: &SimulationConfig) -> Self {
        RiskTable {
            disclaimer: NOTIONAL_DISCLAIMER.to_string(),
            independence_note: INDEPENDENCE_DISCLAIMER.to_string(),
            pair_id: pair_id.to_string(),
            seed: config.master_seed,
            n_trials: config.n_trials,
            rows: vec![
                RiskRow::new(&outcome.baseline.scenario_id, &outcome.baseline_risk),
                RiskRow::new(&outcome.ai.scenario_id, &outcome.ai_risk),
            ],
            delta: outcome.delta,
            units: outcome.ai_risk.units.clone(),
            change: classify_risk_change(outcome.delta, 0.0),
        }
    }

    /// Plain-text rendering; every risk figure carries its units.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.disclaimer);
        let _ = writeln!(out, "pair {} (seed {}, {} trials)", self.pair_id, self.seed, self.n_trials);
        let _ = writeln!(
            out,
            "{:<20} {:<13} {:<24} {:<20} risk",
            "scenario", "variant", "mean_p", "consequence"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<20} {:<13} {:<24} {:<20} {} {}",
                row.scenario,
                row.variant.token(),
                row.mean_p,
                format!("{} {}", row.consequence, row.units),
                row.risk,
                row.units
            );
        }
        let sign = if self.delta > 0.0 { "+" } else { "" };
        let change = match self.change {
            RiskChange::Increased => "increased",
            RiskChange::Decreased => "decreased",
            RiskChange::Unchanged => "unchanged",
        };
        let _ = writeln!(out, "delta: {sign}{} {} ({change})", self.delta, self.units);
        let _ = writeln!(out, "note: {}", self.independence_note);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantBoxes {
    pub scenario: String,
    pub per_step: ChainMap<BoxSummary>,
    pub overall: BoxSummary,
}

impl VariantBoxes {
    pub fn from_trials(trials: &TrialResults) -> Result<Self> {
        Ok(VariantBoxes {
            scenario: trials.scenario_id.clone(),
            per_step: ChainMap::try_from_fn(|step| summarize(&trials.step_samples(step)))?,
            overall: summarize(&trials.overall)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPanels {
    pub baseline: VariantBoxes,
    pub ai: VariantBoxes,
}

/// Rank-sum comparison of the raw cohort scores behind one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTest {
    pub step: ChainStep,
    pub baseline_source: String,
    pub ai_source: String,
    pub result: RankSumResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub quantile_method: String,
    pub risk_table: RiskTable,
    pub box_summaries: BoxPanels,
    pub test_results: Vec<StepTest>,
    pub qualitative_diffs: Vec<ProfileDiffRow>,
}

fn raw_scores(project: &Project, scenario: &Scenario, step: ChainStep) -> Option<(String, Vec<f64>)> {
    let StepModel::Dataset(r) = scenario.steps.get(step) else {
        return None;
    };
    let dataset = project.dataset(&r.id)?;
    let scores = dataset.scores_for(r.cohort, step).iter().map(|s| s.score).collect();
    Some((format!("{}/{}", r.id, r.cohort), scores))
}

/// Simulates a stored pair and gathers everything a report needs.
pub fn build_report(project: &Project, pair_id: &str, config: &SimulationConfig) -> Result<ReportBundle> {
    let pair = project.resolve_pair(pair_id)?;
    let outcome = simulate_pair(&pair, config)?;
    let spec = project.pair(pair_id).expect("resolved above");
    let (base_raw, ai_raw) = (
        project.scenario(&spec.baseline).expect("resolved above"),
        project.scenario(&spec.ai).expect("resolved above"),
    );

    let mut test_results = Vec::new();
    for step in ChainStep::ALL {
        if let (Some((bs, b)), Some((as_, a))) =
            (raw_scores(project, base_raw, step), raw_scores(project, ai_raw, step))
        {
            test_results.push(StepTest {
                step,
                baseline_source: bs,
                ai_source: as_,
                result: rank_sum_test(&b, &a)?,
            });
        }
    }

    let (base_profile, ai_profile) = project.pair_profiles(pair_id)?;
    Ok(ReportBundle {
        quantile_method: QUANTILE_METHOD.to_string(),
        risk_table: RiskTable::new(pair_id, &outcome, config),
        box_summaries: BoxPanels {
            baseline: VariantBoxes::from_trials(&outcome.baseline)?,
            ai: VariantBoxes::from_trials(&outcome.ai)?,
        },
        test_results,
        qualitative_diffs: diff_profiles(&base_profile, &ai_profile),
    })
}

pub const SVG_WIDTH: f64 = 760.0;
pub const SVG_HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_TOP: f64 = 30.0;
const PLOT_HEIGHT: f64 = 300.0;
const GROUP_WIDTH: f64 = 110.0;
const BOX_WIDTH: f64 = 34.0;
const BASELINE_COLOR: &str = "#1f77b4";
const AI_COLOR: &str = "#ff7f0e";

/// Vertical pixel coordinate of a probability (linear axis, 0 at the bottom).
pub fn y_of(value: f64) -> f64 {
    MARGIN_TOP + (1.0 - value) * PLOT_HEIGHT
}

/// Left edge of the box for group `g` (0..=5) and side 0 (baseline) or 1 (AI).
pub fn box_left(group: usize, side: usize) -> f64 {
    MARGIN_LEFT + group as f64 * GROUP_WIDTH + 14.0 + side as f64 * (BOX_WIDTH + 8.0)
}

fn draw_box(svg: &mut String, s: &BoxSummary, left: f64, color: &str) {
    let mid = left + BOX_WIDTH / 2.0;
    let right = left + BOX_WIDTH;
    let _ = writeln!(
        svg,
        r#"<line x1="{mid:.3}" y1="{:.3}" x2="{mid:.3}" y2="{:.3}" stroke="{color}"/>"#,
        y_of(s.whisker_high),
        y_of(s.whisker_low)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.3}" y="{:.3}" width="{BOX_WIDTH:.3}" height="{:.3}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
        y_of(s.q3),
        y_of(s.q1) - y_of(s.q3)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left:.3}" y1="{y:.3}" x2="{right:.3}" y2="{y:.3}" stroke="black" stroke-width="2"/>"#,
        y = y_of(s.median)
    );
    let mut drawn: Vec<f64> = Vec::new();
    for &o in &s.outliers {
        if drawn.last() == Some(&o) {
            continue;
        }
        drawn.push(o);
        let y = y_of(o);
        let _ = writeln!(
            svg,
            r#"<path d="M{mid:.3} {:.3} L{:.3} {y:.3} L{mid:.3} {:.3} L{:.3} {y:.3} Z" fill="{color}"/>"#,
            y - 3.0,
            mid + 3.0,
            y + 3.0,
            mid - 3.0
        );
    }
}

/// Side-by-side box plots per step plus overall, baseline left and AI right.
pub fn render_svg(bundle: &ReportBundle) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", NOTIONAL_DISCLAIMER);
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + 6.0 * GROUP_WIDTH
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{v:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let panels = &bundle.box_summaries;
    let groups = ChainStep::ALL
        .iter()
        .map(|&step| {
            (
                step.label(),
                panels.baseline.per_step.get(step),
                panels.ai.per_step.get(step),
            )
        })
        .chain(std::iter::once(("Overall", &panels.baseline.overall, &panels.ai.overall)));
    for (g, (label, base, ai)) in groups.enumerate() {
        draw_box(&mut svg, base, box_left(g, 0), BASELINE_COLOR);
        draw_box(&mut svg, ai, box_left(g, 1), AI_COLOR);
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{label}</text>"#,
            MARGIN_LEFT + g as f64 * GROUP_WIDTH + GROUP_WIDTH / 2.0,
            MARGIN_TOP + PLOT_HEIGHT + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN_LEFT}" y="{:.3}" fill="{BASELINE_COLOR}">{}</text>"#,
        SVG_HEIGHT - 20.0,
        panels.baseline.scenario
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" fill="{AI_COLOR}">{}</text>"#,
        MARGIN_LEFT + 200.0,
        SVG_HEIGHT - 20.0,
        panels.ai.scenario
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
        SVG_WIDTH - 10.0,
        SVG_HEIGHT - 20.0,
        NOTIONAL_DISCLAIMER
    );
    svg.push_str("</svg>\n");
    svg
}
