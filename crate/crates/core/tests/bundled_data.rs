use std::path::PathBuf;

use riskchain_core::ingest::{load_project, parse_score_csv, to_canonical_string, write_score_csv};
use riskchain_core::synthetic::{demo_project, generate_scores, manifest, SYNTHETIC_SEED};
use riskchain_core::{analytic_mean, Cohort, ScenarioVariant};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(data_dir().join(name)).unwrap()
}

#[test]
fn committed_csv_matches_generator() {
    let samples = generate_scores(SYNTHETIC_SEED);
    assert_eq!(read("synthetic_scores.csv"), write_score_csv(&samples));
    assert_eq!(parse_score_csv(read("synthetic_scores.csv").as_bytes()).unwrap(), samples);
}

#[test]
fn committed_manifest_matches_generator() {
    let samples = generate_scores(SYNTHETIC_SEED);
    let mut expected = serde_json::to_string_pretty(&manifest(SYNTHETIC_SEED, &samples)).unwrap();
    expected.push('\n');
    assert_eq!(read("synthetic_manifest.json"), expected);
}

#[test]
fn committed_project_matches_generator() {
    let text = read("demo_project.json");
    assert_eq!(text, to_canonical_string(&demo_project().unwrap()).unwrap());
    let loaded = load_project(data_dir().join("demo_project.json")).unwrap();
    assert_eq!(loaded, demo_project().unwrap());
}

#[test]
fn manifest_means_match_fitted_scenarios() {
    let project = demo_project().unwrap();
    let m = manifest(SYNTHETIC_SEED, &generate_scores(SYNTHETIC_SEED));
    for (id, cohort) in [("baseline", Cohort::InternetOnly), ("ai", Cohort::InternetPlusLlm)] {
        let scenario = project.resolve_scenario(id).unwrap();
        let entry = m.cohorts.iter().find(|c| c.cohort == cohort).unwrap();
        let analytic = analytic_mean(&scenario).unwrap();
        assert!((analytic - entry.product_of_means).abs() < 1e-15, "{analytic} vs {}", entry.product_of_means);
    }
    assert_eq!(project.scenario_ids(ScenarioVariant::Baseline).count(), 2);
}
