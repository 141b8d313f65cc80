//! Acceptance checks, one PASS/FAIL line each. Exits non-zero if any fail.

use std::process::Command;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::json;
use tower::ServiceExt;

use riskchain_core::distfit::EmpiricalDistribution;
use riskchain_core::ingest::{load_project, parse_project, save_project, to_canonical_string};
use riskchain_core::qualitative::{default_profile_table, flag_transition, Level, ProfileTable, TransitionFlag};
use riskchain_core::rng::{scenario_key, Stream};
use riskchain_core::riskmodel::{
    expected_risk, risk_delta, ChainMap, ChainStep, ConsequenceModel, Probability, RiskResult, Scenario,
    ScenarioVariant, StepModel,
};
use riskchain_core::simengine::{analytic_mean, simulate, SimulationConfig};
use riskchain_core::stats::{rank_sum_test, summarize};
use riskchain_core::synthetic::demo_project;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn notional_risk_arithmetic() -> Check {
    let c = ConsequenceModel::new(100_000.0).map_err(|e| e.to_string())?;
    let base = expected_risk(0.005, 100_000.0).map_err(|e| e.to_string())?;
    let ai = expected_risk(0.017, 100_000.0).map_err(|e| e.to_string())?;
    ensure(base == 500.0, || format!("baseline risk {base}"))?;
    ensure(ai == 1700.0, || format!("ai risk {ai}"))?;
    let rb = RiskResult::new(ScenarioVariant::Baseline, Probability::new(0.005).unwrap(), &c).unwrap();
    let ra = RiskResult::new(ScenarioVariant::AiAugmented, Probability::new(0.017).unwrap(), &c).unwrap();
    let delta = risk_delta(&rb, &ra).map_err(|e| e.to_string())?;
    ensure(delta == 1200.0, || format!("delta {delta}"))?;
    ensure(ra.units == "deaths", || format!("units {}", ra.units))?;
    Ok(format!("500 / 1700 deaths, delta +{delta} deaths"))
}

fn monte_carlo_vs_analytic() -> Check {
    let project = demo_project().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut detail = Vec::new();
    for id in ["baseline", "ai"] {
        let scenario = project.resolve_scenario(id).map_err(|e| e.to_string())?;
        let analytic = analytic_mean(&scenario).map_err(|e| e.to_string())?;
        let mut within = 0;
        for seed in 0..100u64 {
            let config = SimulationConfig::new(10_000, 1_000 + seed).unwrap();
            let trials = simulate(&scenario, &config).map_err(|e| e.to_string())?;
            let s = trials.summary().map_err(|e| e.to_string())?;
            if (s.mean - analytic).abs() <= 3.0 * s.std_error {
                within += 1;
            }
        }
        ensure(within >= 99, || format!("{id}: only {within}/100 seeds within 3 SE of {analytic}"))?;
        detail.push(format!("{id} {within}/100"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("{} within 3 SE, {elapsed:.2}s", detail.join(", ")))
}

fn run_compare(extra: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_riskchain"))
        .args(["compare", "--seed", "42"])
        .args(extra)
        .env_remove("RISKCHAIN_PROJECT")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    Ok(out.stdout)
}

fn determinism() -> Check {
    let first = run_compare(&[])?;
    let second = run_compare(&[])?;
    ensure(first == second, || "two runs differ".into())?;
    for threads in ["1", "2", "8"] {
        let other = run_compare(&["--threads", threads])?;
        ensure(other == first, || format!("--threads {threads} differs"))?;
    }
    let json1 = run_compare(&["--format", "json", "--threads", "1"])?;
    let json8 = run_compare(&["--format", "json", "--threads", "8"])?;
    ensure(json1 == json8, || "json output differs across threads".into())?;
    Ok(format!("{} bytes identical across reruns and 1/2/8 threads", first.len()))
}

fn chain_of(models: impl FnMut(ChainStep) -> StepModel, id: &str) -> Scenario {
    let c = ConsequenceModel::new(1.0).unwrap();
    Scenario::new(id, ScenarioVariant::Baseline, ChainMap::from_fn(models), c).unwrap()
}

fn chain_identities() -> Check {
    let config = SimulationConfig::new(10_000, 5).unwrap();
    let ones = EmpiricalDistribution::point_mass(1.0).unwrap();
    let all_ones = chain_of(|_| StepModel::Empirical(ones.clone()), "ones");
    let t = simulate(&all_ones, &config).map_err(|e| e.to_string())?;
    ensure(t.overall.iter().all(|&p| p == 1.0), || "all-ones chain gave p != 1".into())?;
    let fixed_ones = chain_of(|_| StepModel::fixed(1.0).unwrap(), "fixed_ones");
    let t = simulate(&fixed_ones, &config).map_err(|e| e.to_string())?;
    ensure(t.overall.iter().all(|&p| p == 1.0), || "fixed all-ones chain gave p != 1".into())?;

    let project = demo_project().map_err(|e| e.to_string())?;
    let fitted = project.resolve_scenario("ai").map_err(|e| e.to_string())?;
    for zero in ChainStep::ALL {
        let mut s = fitted.clone();
        *s.steps.get_mut(zero) = StepModel::Empirical(EmpiricalDistribution::point_mass(0.0).unwrap());
        let t = simulate(&s, &config).map_err(|e| e.to_string())?;
        ensure(t.overall.iter().all(|&p| p == 0.0), || format!("zero at {zero} gave p != 0"))?;
    }

    let t = simulate(&fitted, &config).map_err(|e| e.to_string())?;
    for (i, (steps, &overall)) in t.per_step_samples.iter().zip(&t.overall).enumerate() {
        let min = steps.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(overall <= min, || format!("trial {i}: overall {overall} > min step {min}"))?;
    }
    Ok("ones -> 1, any zero -> 0, overall <= min step on 10000 trials".into())
}

/// Type-7 quantile by scanning for the segment that contains the target rank.
fn oracle_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    for j in 0..n - 1 {
        let (lo, hi) = (j as f64, (j + 1) as f64);
        if h >= lo && h <= hi {
            return sorted[j] + (h - lo) * (sorted[j + 1] - sorted[j]);
        }
    }
    sorted[n - 1]
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn random_array(stream: &mut Stream) -> Vec<f64> {
    let n = 1 + (stream.next_u64() % 50) as usize;
    let coarse = stream.next_uniform() < 0.3;
    (0..n)
        .map(|_| {
            let u = stream.next_uniform();
            if coarse {
                (u * 8.0).floor()
            } else {
                // Occasional far points so fences are exercised.
                let x = u * 100.0 - 50.0;
                if stream.next_uniform() < 0.05 {
                    x * 40.0
                } else {
                    x
                }
            }
        })
        .collect()
}

fn box_oracle() -> Check {
    let key = scenario_key(7, "box-oracle");
    let mut with_outliers = 0;
    for case in 0..1000u64 {
        let mut stream = Stream::for_trial(key, case);
        let data = random_array(&mut stream);
        let s = summarize(&data).map_err(|e| e.to_string())?;
        let mut sorted = data.clone();
        sorted.sort_by(f64::total_cmp);
        let (q1, med, q3) = (
            oracle_quantile(&sorted, 0.25),
            oracle_quantile(&sorted, 0.5),
            oracle_quantile(&sorted, 0.75),
        );
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let outliers: Vec<f64> = sorted.iter().cloned().filter(|&x| x < lo || x > hi).collect();
        let inside: Vec<f64> = sorted.iter().cloned().filter(|&x| x >= lo && x <= hi).collect();
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let fail = |what: &str, got: f64, want: f64| format!("case {case} (n={}): {what} {got} != {want}", data.len());
        for (what, got, want) in [
            ("q1", s.q1, q1),
            ("median", s.median, med),
            ("q3", s.q3, q3),
            ("iqr", s.iqr, iqr),
            ("fence_low", s.fence_low, lo),
            ("fence_high", s.fence_high, hi),
            ("whisker_low", s.whisker_low, inside[0]),
            ("whisker_high", s.whisker_high, *inside.last().unwrap()),
            ("mean", s.mean, mean),
        ] {
            ensure(close(got, want), || fail(what, got, want))?;
        }
        ensure(s.n == data.len(), || format!("case {case}: n"))?;
        ensure(s.outliers == outliers, || {
            format!("case {case}: outliers {:?} != {:?}", s.outliers, outliers)
        })?;
        if !outliers.is_empty() {
            with_outliers += 1;
        }
    }
    ensure(with_outliers > 50, || format!("only {with_outliers} cases had outliers"))?;
    Ok(format!("1000 arrays agree at 1e-12 ({with_outliers} with outliers)"))
}

fn rank_sum_identities() -> Check {
    let key = scenario_key(11, "rank-sum");
    for case in 0..1000u64 {
        let mut stream = Stream::for_trial(key, case);
        let mut draw = |n: u64| -> Vec<f64> {
            let len = 1 + (stream.next_u64() % n) as usize;
            (0..len).map(|_| (stream.next_uniform() * 12.0).floor()).collect()
        };
        let (a, b) = (draw(30), draw(30));
        let r = rank_sum_test(&a, &b).map_err(|e| e.to_string())?;
        let nanb = (a.len() * b.len()) as f64;
        ensure(r.u_a + r.u_b == nanb, || format!("case {case}: {} + {} != {nanb}", r.u_a, r.u_b))?;
        // Brute-force U: pairs won by a, ties counted half.
        let brute: f64 = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
            .sum();
        ensure(r.u_a == brute, || format!("case {case}: U_a {} != {brute}", r.u_a))?;
    }
    let mut min_identical = 1.0f64;
    for case in 0..200u64 {
        let mut stream = Stream::for_trial(key ^ 1, case);
        let len = 2 + (stream.next_u64() % 40) as usize;
        let a: Vec<f64> = (0..len).map(|_| stream.next_uniform()).collect();
        let p = rank_sum_test(&a, &a).map_err(|e| e.to_string())?.p_value;
        min_identical = min_identical.min(p);
    }
    ensure(min_identical >= 0.99, || format!("identical samples p = {min_identical}"))?;
    let a: Vec<f64> = (1..=10).map(f64::from).collect();
    let b: Vec<f64> = (100..=110).map(f64::from).collect();
    let p = rank_sum_test(&a, &b).map_err(|e| e.to_string())?.p_value;
    ensure(p < 0.001, || format!("disjoint samples p = {p}"))?;
    Ok(format!("U_a + U_b = n_a n_b on 1000 pairs, identical p >= {min_identical:.4}, disjoint p = {p:.2e}"))
}

fn requirement_table_fidelity() -> Check {
    use Level::{High as H, Low as L, Med as M};
    // time, cost, knowledge, resources, safeguard, relative p
    let published = [
        (ChainStep::Ideation, [L, L, L, L, L, H]),
        (ChainStep::Acquisition, [L, L, L, L, M, L]),
        (ChainStep::Production, [H, H, H, H, H, L]),
        (ChainStep::Weaponization, [H, H, H, H, H, L]),
        (ChainStep::DeployDelivery, [L, H, H, M, H, M]),
    ];
    let table = default_profile_table();
    let mut cells = 0;
    for (step, row) in published {
        let r = table.get(step);
        let got = [r.time, r.cost, r.knowledge, r.resources, r.safeguard, r.relative_p];
        for (i, (g, w)) in got.iter().zip(row.iter()).enumerate() {
            ensure(g == w, || format!("{step} column {i}: {g} != {w}"))?;
            cells += 1;
        }
    }
    let text = serde_json::to_string_pretty(&table).map_err(|e| e.to_string())?;
    let back: ProfileTable = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(back == table, || "round-trip changed the table".into())?;
    let again = serde_json::to_string_pretty(&back).map_err(|e| e.to_string())?;
    ensure(again == text, || "re-serialization differs".into())?;
    Ok(format!("{cells} cells match, round-trip bit-exact"))
}

fn transition_rule() -> Check {
    let mut concerning = Vec::new();
    for b in Level::ALL {
        for a in Level::ALL {
            let flag = flag_transition(b, a);
            ensure((flag == TransitionFlag::Concerning) == (a > b), || format!("{b} -> {a}: {flag:?}"))?;
            if flag == TransitionFlag::Concerning {
                concerning.push((b, a));
            }
        }
    }
    let expected = vec![(Level::Low, Level::Med), (Level::Low, Level::High), (Level::Med, Level::High)];
    ensure(concerning == expected, || format!("concerning set {concerning:?}"))?;
    Ok("9 pairs; concerning = {Low->Med, Low->High, Med->High}".into())
}

fn project_round_trip() -> Check {
    let project = demo_project().map_err(|e| e.to_string())?;
    ensure(
        !project.pairs.is_empty()
            && !project.datasets.is_empty()
            && !project.profiles.is_empty()
            && !project.workflows.is_empty(),
        || "fixture is missing a section".into(),
    )?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("project.json");
    save_project(&project, &path).map_err(|e| e.to_string())?;
    let loaded = load_project(&path).map_err(|e| e.to_string())?;
    ensure(loaded == project, || "loaded project differs".into())?;
    let first = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    save_project(&loaded, &path).map_err(|e| e.to_string())?;
    let second = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    ensure(first == second, || "canonical form changed on re-save".into())?;
    let reparsed = parse_project(&first).map_err(|e| e.to_string())?;
    ensure(to_canonical_string(&reparsed).unwrap() == first, || "parse/print not identity".into())?;
    Ok(format!("{} bytes, save(load(x)) == x", first.len()))
}

fn whatif_purity() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("project.json");
    save_project(&demo_project().unwrap(), &path).map_err(|e| e.to_string())?;
    let before = std::fs::read(&path).map_err(|e| e.to_string())?;
    let state = riskchain_service::state(load_project(&path).unwrap(), Some(path.clone()));
    let memory_before = to_canonical_string(&state.read().unwrap().project).unwrap();

    let steps = ["ideation", "acquisition", "production", "weaponization", "deploy"];
    let variants = ["baseline", "ai_augmented"];
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    let (mut ok, mut rejected) = (0, 0);
    for i in 0..50usize {
        let step = steps[i % 5];
        let variant = variants[i % 2];
        let model = match i % 5 {
            0 => json!({ "fixed": (i as f64) / 50.0 }),
            1 => json!({ "shift": 0.1 }),
            2 => json!({ "shift": -0.3 }),
            3 => json!({ "dataset": { "id": "synthetic", "cohort": "internet_llm" } }),
            _ => json!({ "fixed": 1.3 }),
        };
        let body = json!({
            "pair_id": if i % 7 == 0 { "notional" } else { "main" },
            "seed": i,
            "n_trials": 500,
            "consequence": if i % 3 == 0 { json!(1000.0) } else { json!(null) },
            "overrides": [{ "variant": variant, "step": step, "model": model }],
            "level_overrides": [{ "variant": variant, "step": step, "field": "relative_p", "level": "high" }],
        });
        let request = Request::builder()
            .method(Method::POST)
            .uri("/api/whatif")
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let router = riskchain_service::router(state.clone());
        let (status, bytes) = rt.block_on(async {
            let response = router.oneshot(request).await.unwrap();
            let status = response.status();
            (status, response.into_body().collect().await.unwrap().to_bytes())
        });
        match status {
            StatusCode::OK => ok += 1,
            StatusCode::UNPROCESSABLE_ENTITY => rejected += 1,
            other => return Err(format!("call {i}: {other} {}", String::from_utf8_lossy(&bytes))),
        }
    }
    let after = std::fs::read(&path).map_err(|e| e.to_string())?;
    ensure(after == before, || "project file changed".into())?;
    let memory_after = to_canonical_string(&state.read().unwrap().project).unwrap();
    ensure(memory_after == memory_before, || "in-memory project changed".into())?;
    Ok(format!("50 calls ({ok} ok, {rejected} rejected), file and store byte-identical"))
}

fn main() {
    let checks: [Criterion; 10] = [
        ("notional-risk-arithmetic", notional_risk_arithmetic),
        ("monte-carlo-vs-analytic", monte_carlo_vs_analytic),
        ("determinism", determinism),
        ("chain-identities", chain_identities),
        ("box-statistics-oracle", box_oracle),
        ("rank-sum-identities", rank_sum_identities),
        ("requirement-table-fidelity", requirement_table_fidelity),
        ("transition-rule", transition_rule),
        ("project-round-trip", project_round_trip),
        ("whatif-purity", whatif_purity),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
