//! Risk triplets for paired baseline / AI-augmented misuse scenarios.
//!
//! A scenario is a five-step chain. Each step's success probability is either
//! fixed or drawn from an empirical distribution fitted from 0-10 expert
//! scores; a seeded Monte Carlo multiplies the steps per trial, and the mean
//! overall probability times the consequence gives the scenario's risk.
//! Ordinal requirement tables and an assessment log cover the qualitative side.

pub mod decimal;
pub mod distfit;
pub mod error;
pub mod ingest;
pub mod qualitative;
pub mod report;
pub mod riskmodel;
pub mod rng;
pub mod simengine;
pub mod stats;
pub mod synthetic;
pub mod whatif;

pub use distfit::{Cohort, EmpiricalDistribution, ScoreSample, SupportPoint};
pub use error::{Error, Result, Violation};
pub use ingest::{load_project, parse_score_csv, save_project, PairSpec, Project};
pub use qualitative::{
    default_profile_table, diff_profiles, flag_transition, AssessmentWorkflow, ConcernAssessment,
    Level, ProfileTable, TransitionFlag,
};
pub use riskmodel::{
    classify_risk_change, expected_risk, overall_probability, risk_delta, ChainMap, ChainStep,
    ConsequenceModel, Probability, RiskChange, RiskResult, Scenario, ScenarioPair, ScenarioVariant,
    StepModel,
};
pub use report::{build_report, render_svg, ReportBundle, RiskTable};
pub use simengine::{analytic_mean, simulate, simulate_pair, SimulationConfig, TrialResults};
pub use stats::{rank_sum_test, summarize, BoxSummary, RankSumResult};
pub use whatif::{evaluate as evaluate_whatif, WhatIfRequest, WhatIfResponse};

/// Printed on every risk report.
pub const NOTIONAL_DISCLAIMER: &str = "notional scenario; illustrative only";
