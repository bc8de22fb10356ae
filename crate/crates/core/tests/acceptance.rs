//! Acceptance suite: each criterion runs at its stated tolerance and time budget and
//! prints one PASS/FAIL line. Runs without the test harness so the lines are never captured.

use std::time::{Duration, Instant};

use serde_json::Value;
use weyl_lab_core::catalog::{catalog_list, lookup};
use weyl_lab_core::numdiff::StencilConfig;
use weyl_lab_core::verify::{
    check_curvature_identities, check_electric_evolution, check_extremal, check_foliation_relations,
    check_magnetic_synthetic, check_oracle_values, check_region_entropy, check_s_crit_table, monotonicity_cases,
    SuiteOptions, VerificationCase,
};

const SEED: u64 = 20240607;

struct Outcome {
    name: &'static str,
    pass: bool,
    elapsed: Duration,
    budget: Duration,
    detail: String,
}

fn summarize(cases: &[VerificationCase]) -> (bool, String) {
    let pass = cases.iter().all(|c| c.pass);
    let worst = cases.iter().fold(0.0f64, |m, c| m.max(c.max_residual));
    let failing: Vec<String> = cases
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            let w = c
                .witnesses
                .first()
                .map(|w| format!(" at {} ({}: {:e})", w.point, w.detail, w.residual))
                .unwrap_or_default();
            format!("{}[{}]{}", c.case, c.metric, w)
        })
        .collect();
    let detail = if failing.is_empty() { format!("max residual {worst:e}") } else { failing.join("; ") };
    (pass, detail)
}

fn run(name: &'static str, budget_s: u64, f: impl FnOnce() -> Vec<VerificationCase>) -> Outcome {
    let start = Instant::now();
    let cases = f();
    let elapsed = start.elapsed();
    let (pass, detail) = summarize(&cases);
    let budget = Duration::from_secs(budget_s);
    Outcome { name, pass: pass && elapsed <= budget, elapsed, budget, detail }
}

fn main() {
    let cfg = StencilConfig::default();
    let named = |n: &str| lookup(n, &Value::Null).expect("catalog metric");
    let outcomes = vec![
        run("1 curvature identities", 30, || {
            catalog_list().iter().map(|m| check_curvature_identities(m, 20, SEED, &cfg, 1e-8)).collect()
        }),
        run("2 slicing relations and constraints", 30, || {
            catalog_list().iter().map(|m| check_foliation_relations(m, 20, SEED, &cfg, 1e-5)).collect()
        }),
        run("3 closed-form oracle values", 10, || {
            vec![check_oracle_values(20, SEED, &cfg, 1e-6).expect("oracle metrics")]
        }),
        run("4 electric evolution formulas", 60, || {
            vec![
                check_electric_evolution(&named("ltb"), 5, SEED, &cfg, 1e-4),
                check_electric_evolution(&named("kasner"), 5, SEED, &cfg, 1e-4),
            ]
        }),
        run("5 monotonicity and equality cases", 60, || {
            monotonicity_cases(&SuiteOptions { seed: SEED, ..SuiteOptions::default() }).expect("scan runs")
        }),
        run("6 magnetic formula", 5, || vec![check_magnetic_synthetic(100, SEED, 1e-12).expect("synthetic data")]),
        run("7 region entropy", 30, || vec![check_region_entropy(&cfg, 1e-6).expect("regions")]),
        run("8 extremal classification", 10, || vec![check_extremal(&cfg, 1e-6).expect("regions")]),
        run("9 s_crit table", 1, || vec![check_s_crit_table()]),
    ];
    for o in &outcomes {
        println!(
            "criterion {}: {} ({:.2} s of {} s) {}",
            o.name,
            if o.pass { "PASS" } else { "FAIL" },
            o.elapsed.as_secs_f64(),
            o.budget.as_secs(),
            o.detail
        );
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
