//! `riskchain` command-line tool.
//!
//! Exit status: 0 on success, 1 on a domain error (invalid input, unknown
//! id, failed validation), 2 on a usage error.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use riskchain_core::distfit::Cohort;
use riskchain_core::ingest::{parse_project, parse_score_csv, save_project, ScoreDataset};
use riskchain_core::qualitative::{ProfileTable, RequirementField};
use riskchain_core::report::RiskTable;
use riskchain_core::riskmodel::INDEPENDENCE_DISCLAIMER;
use riskchain_core::simengine::{SimulationSummary, DEFAULT_TRIALS};
use riskchain_core::synthetic::demo_project;
use riskchain_core::{
    build_report, flag_transition, render_svg, simulate, simulate_pair, BoxSummary, ChainStep,
    EmpiricalDistribution, Probability, Project, RiskResult, SimulationConfig, NOTIONAL_DISCLAIMER,
};

#[derive(Parser)]
#[command(name = "riskchain", version, about = "Scenario risk chains: fit, simulate, compare, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Project file; the built-in demo project is used when omitted.
    #[arg(long, env = "RISKCHAIN_PROJECT")]
    project: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Sim {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<NonZeroUsize>,
}

impl Sim {
    fn config(&self) -> Result<SimulationConfig> {
        Ok(SimulationConfig::new(self.trials, self.seed)?.with_parallelism(self.threads))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a project file or score CSV and list every problem found.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Fit empirical step distributions from scores.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Score CSV; otherwise a dataset of the project is used.
        #[arg(long, conflicts_with = "dataset")]
        csv: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        scale_max: f64,
        #[arg(long)]
        cohort: Option<Cohort>,
        #[arg(long)]
        step: Option<ChainStep>,
    },
    /// Monte Carlo one scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: Sim,
        #[arg(long)]
        scenario: String,
    },
    /// Baseline vs AI risk table for a pair.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: Sim,
        #[arg(long, default_value = "main")]
        pair: String,
    },
    /// Requirement-level tables and transition flags for a pair.
    Qual {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "main")]
        pair: String,
    },
    /// Write report.json, report.txt and boxplot.svg for a pair.
    Report {
        /// Project file; the built-in demo project is used when omitted.
        #[arg(long, env = "RISKCHAIN_PROJECT")]
        project: Option<PathBuf>,
        #[command(flatten)]
        sim: Sim,
        #[arg(long, default_value = "main")]
        pair: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the demo project to a file.
    Init {
        path: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Serve the JSON API for a project.
    Serve {
        #[arg(long, env = "RISKCHAIN_PROJECT")]
        project: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8787")]
        addr: SocketAddr,
    },
}

fn load(path: Option<&Path>) -> Result<Project> {
    match path {
        None => Ok(demo_project()?),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            Ok(parse_project(&text).with_context(|| format!("invalid project {}", p.display()))?)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn box_line(out: &mut String, label: &str, s: &BoxSummary) {
    let _ = writeln!(
        out,
        "{label:<14} {:<22} {:<22} {:<22} {:<22} {:<22} {:<22} {}",
        s.mean,
        s.median,
        s.q1,
        s.q3,
        s.whisker_low,
        s.whisker_high,
        s.outliers.len()
    );
}

fn summary_text(out: &mut String, summary: &SimulationSummary) {
    let _ = writeln!(
        out,
        "{:<14} {:<22} {:<22} {:<22} {:<22} {:<22} {:<22} outliers",
        "step", "mean", "median", "q1", "q3", "whisker_low", "whisker_high"
    );
    for (step, s) in summary.per_step.iter() {
        box_line(out, step.token(), s);
    }
    box_line(out, "overall", &summary.overall);
}

fn risk_line(risk: &RiskResult) -> String {
    format!(
        "risk: {} {} (P = {}, C = {} {})",
        risk.risk,
        risk.units,
        risk.overall_probability.get(),
        risk.consequence,
        risk.units
    )
}

fn fit_command(
    common: &Common,
    csv: Option<&Path>,
    dataset: Option<&str>,
    scale_max: f64,
    cohort: Option<Cohort>,
    step: Option<ChainStep>,
) -> Result<()> {
    let data = match csv {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
            ScoreDataset {
                id: p.display().to_string(),
                description: String::new(),
                synthetic: false,
                scale_max,
                samples: parse_score_csv(&bytes).with_context(|| format!("invalid score file {}", p.display()))?,
            }
        }
        None => {
            let project = load(common.project.as_deref())?;
            let id = match dataset {
                Some(id) => id.to_string(),
                None => match project.datasets.as_slice() {
                    [only] => only.id.clone(),
                    [] => bail!("project has no datasets"),
                    _ => bail!("project has several datasets; pick one with --dataset"),
                },
            };
            project
                .dataset(&id)
                .cloned()
                .with_context(|| format!("unknown dataset id '{id}'"))?
        }
    };
    let mut fits: Vec<(Cohort, ChainStep, EmpiricalDistribution)> = Vec::new();
    for c in Cohort::ALL.into_iter().filter(|c| cohort.is_none_or(|x| x == *c)) {
        for s in ChainStep::ALL.into_iter().filter(|s| step.is_none_or(|x| x == *s)) {
            if data.scores_for(c, s).is_empty() {
                continue;
            }
            fits.push((c, s, data.fit(c, s)?));
        }
    }
    if fits.is_empty() {
        bail!("no scores match the requested cohort and step");
    }
    let text = match common.format {
        Format::Json => to_json(
            &fits
                .iter()
                .map(|(c, s, d)| json!({ "cohort": c, "step": s, "mean": d.mean(), "distribution": d }))
                .collect::<Vec<_>>(),
        )?,
        Format::Text => {
            let mut out = String::new();
            for (c, s, d) in &fits {
                let _ = write!(out, "{c:<13} {s:<14} mean {:<20} support", d.mean());
                for p in d.support() {
                    let _ = write!(out, " {}:{}", p.value, p.weight);
                }
                out.push('\n');
            }
            out
        }
    };
    emit(common.out.as_deref(), &text)
}

fn simulate_command(common: &Common, sim: &Sim, scenario_id: &str) -> Result<()> {
    let project = load(common.project.as_deref())?;
    let config = sim.config()?;
    let scenario = project.resolve_scenario(scenario_id)?;
    let trials = simulate(&scenario, &config)?;
    let summary = trials.summary()?;
    let risk = RiskResult::new(
        scenario.variant,
        Probability::new(trials.mean_overall().clamp(0.0, 1.0))?,
        &scenario.consequence,
    )?;
    let text = match common.format {
        Format::Json => to_json(&json!({
            "disclaimer": NOTIONAL_DISCLAIMER,
            "scenario_id": scenario.id,
            "variant": scenario.variant,
            "seed": config.master_seed,
            "n_trials": config.n_trials,
            "risk": risk,
            "summary": summary,
        }))?,
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "{NOTIONAL_DISCLAIMER}");
            let _ = writeln!(
                out,
                "scenario {} ({}), seed {}, {} trials",
                scenario.id,
                scenario.variant.token(),
                config.master_seed,
                config.n_trials
            );
            summary_text(&mut out, &summary);
            let _ = writeln!(
                out,
                "mean overall probability: {} (std error {})",
                summary.mean, summary.std_error
            );
            let _ = writeln!(out, "{}", risk_line(&risk));
            let _ = writeln!(out, "note: {INDEPENDENCE_DISCLAIMER}");
            out
        }
    };
    emit(common.out.as_deref(), &text)
}

fn compare_command(common: &Common, sim: &Sim, pair_id: &str) -> Result<()> {
    let project = load(common.project.as_deref())?;
    let config = sim.config()?;
    let outcome = simulate_pair(&project.resolve_pair(pair_id)?, &config)?;
    let table = RiskTable::new(pair_id, &outcome, &config);
    let text = match common.format {
        Format::Json => to_json(&table)?,
        Format::Text => table.to_text(),
    };
    emit(common.out.as_deref(), &text)
}

fn profile_text(out: &mut String, title: &str, table: &ProfileTable) {
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:<14}", "step");
    for f in RequirementField::ALL {
        let _ = write!(out, " {:<10}", f.token());
    }
    out.push('\n');
    for row in table.rows() {
        let _ = write!(out, "{:<14}", row.step.token());
        for f in RequirementField::ALL {
            let _ = write!(out, " {:<10}", row.level(f));
        }
        out.push('\n');
    }
}

fn qual_command(common: &Common, pair_id: &str) -> Result<()> {
    let project = load(common.project.as_deref())?;
    let (base, ai) = project.pair_profiles(pair_id)?;
    let transitions: Vec<_> = ChainStep::ALL
        .into_iter()
        .map(|step| {
            let (b, a) = (base.get(step).relative_p, ai.get(step).relative_p);
            (step, b, a, flag_transition(b, a))
        })
        .collect();
    let diffs = riskchain_core::diff_profiles(&base, &ai);
    let text = match common.format {
        Format::Json => to_json(&json!({
            "pair_id": pair_id,
            "baseline": base,
            "ai": ai,
            "transitions": transitions
                .iter()
                .map(|(s, b, a, f)| json!({ "step": s, "baseline": b, "ai": a, "flag": f }))
                .collect::<Vec<_>>(),
            "diffs": diffs,
        }))?,
        Format::Text => {
            let mut out = String::new();
            profile_text(&mut out, "baseline requirements", &base);
            out.push('\n');
            profile_text(&mut out, "ai requirements", &ai);
            out.push('\n');
            let _ = writeln!(out, "relative probability transitions");
            for (s, b, a, f) in &transitions {
                let _ = writeln!(out, "{:<14} {b} -> {a} {}", s.token(), serde_json::to_value(f)?.as_str().unwrap_or(""));
            }
            if !diffs.is_empty() {
                out.push('\n');
                let _ = writeln!(out, "changed cells");
                for d in &diffs {
                    let _ = writeln!(
                        out,
                        "{:<14} {:<10} {} -> {} {}",
                        d.step.token(),
                        d.field.token(),
                        d.baseline,
                        d.ai,
                        serde_json::to_value(d.kind)?.as_str().unwrap_or("")
                    );
                }
            }
            out
        }
    };
    emit(common.out.as_deref(), &text)
}

fn report_command(project: Option<&Path>, sim: &Sim, pair_id: &str, out: &Path) -> Result<()> {
    let project = load(project)?;
    let bundle = build_report(&project, pair_id, &sim.config()?)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    std::fs::write(out.join("report.json"), to_json(&bundle)?)?;
    std::fs::write(out.join("boxplot.svg"), render_svg(&bundle))?;

    let mut text = bundle.risk_table.to_text();
    for (label, boxes) in [("baseline", &bundle.box_summaries.baseline), ("ai", &bundle.box_summaries.ai)] {
        let _ = writeln!(text, "\n{label} ({}) step probabilities, {}", boxes.scenario, bundle.quantile_method);
        let _ = writeln!(
            text,
            "{:<14} {:<22} {:<22} {:<22} {:<22} {:<22} {:<22} outliers",
            "step", "mean", "median", "q1", "q3", "whisker_low", "whisker_high"
        );
        for (step, s) in boxes.per_step.iter() {
            box_line(&mut text, step.token(), s);
        }
        box_line(&mut text, "overall", &boxes.overall);
    }
    if !bundle.test_results.is_empty() {
        let _ = writeln!(text, "\nrank-sum tests on raw scores (baseline vs ai)");
        for t in &bundle.test_results {
            let _ = writeln!(
                text,
                "{:<14} U={} z={} p={}",
                t.step.token(),
                t.result.u_a,
                t.result.z,
                t.result.p_value
            );
        }
    }
    if !bundle.qualitative_diffs.is_empty() {
        let _ = writeln!(text, "\nrequirement level changes");
        for d in &bundle.qualitative_diffs {
            let _ = writeln!(text, "{:<14} {:<10} {} -> {}", d.step.token(), d.field.token(), d.baseline, d.ai);
        }
    }
    std::fs::write(out.join("report.txt"), &text)?;
    print!("{}", bundle.risk_table.to_text());
    Ok(())
}

fn validate_command(file: &Path, format: Format) -> Result<bool> {
    let bytes = std::fs::read(file).with_context(|| format!("cannot read {}", file.display()))?;
    let is_csv = file.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let outcome = if is_csv {
        parse_score_csv(&bytes).map(|s| format!("{} score rows", s.len()))
    } else {
        parse_project(&String::from_utf8_lossy(&bytes)).map(|p| {
            format!(
                "project '{}' revision {}: {} datasets, {} scenarios, {} pairs",
                p.name,
                p.revision,
                p.datasets.len(),
                p.scenarios.len(),
                p.pairs.len()
            )
        })
    };
    let problems: Vec<String> = match &outcome {
        Ok(_) => Vec::new(),
        Err(riskchain_core::Error::Violations(vs)) => vs.iter().map(ToString::to_string).collect(),
        Err(e) => vec![e.to_string()],
    };
    match format {
        Format::Json => print!(
            "{}",
            to_json(&json!({
                "file": file.display().to_string(),
                "valid": problems.is_empty(),
                "problems": problems,
            }))?
        ),
        Format::Text => match &outcome {
            Ok(summary) => println!("ok: {summary}"),
            Err(_) => {
                for p in &problems {
                    println!("{}: {p}", file.display());
                }
            }
        },
    }
    Ok(problems.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { file, format } => return validate_command(&file, format),
        Command::Fit { common, csv, dataset, scale_max, cohort, step } => {
            fit_command(&common, csv.as_deref(), dataset.as_deref(), scale_max, cohort, step)?
        }
        Command::Simulate { common, sim, scenario } => simulate_command(&common, &sim, &scenario)?,
        Command::Compare { common, sim, pair } => compare_command(&common, &sim, &pair)?,
        Command::Qual { common, pair } => qual_command(&common, &pair)?,
        Command::Report { project, sim, pair, out } => report_command(project.as_deref(), &sim, &pair, &out)?,
        Command::Init { path, force } => {
            if path.exists() && !force {
                bail!("{} exists; pass --force to overwrite", path.display());
            }
            save_project(&demo_project()?, &path)?;
            println!("wrote {}", path.display());
        }
        Command::Serve { project, addr } => {
            let loaded = load(project.as_deref())?;
            let state = riskchain_service::state(loaded, project);
            tokio::runtime::Runtime::new()?.block_on(riskchain_service::serve(state, addr))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
