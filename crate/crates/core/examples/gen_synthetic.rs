//! Writes the bundled synthetic dataset, its manifest and the demo project.
//!
//! Usage: `gen_synthetic [OUT_DIR]` (default `data`).

use std::path::PathBuf;

use riskchain_core::ingest::{to_canonical_string, write_score_csv};
use riskchain_core::synthetic::{demo_project, generate_scores, manifest, SYNTHETIC_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let samples = generate_scores(SYNTHETIC_SEED);
    std::fs::write(dir.join("synthetic_scores.csv"), write_score_csv(&samples))?;
    let mut text = serde_json::to_string_pretty(&manifest(SYNTHETIC_SEED, &samples))?;
    text.push('\n');
    std::fs::write(dir.join("synthetic_manifest.json"), text)?;
    std::fs::write(dir.join("demo_project.json"), to_canonical_string(&demo_project()?)?)?;
    println!("wrote {}", dir.display());
    Ok(())
}
