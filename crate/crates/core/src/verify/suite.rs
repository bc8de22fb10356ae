//! Batch runner over the catalog.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_classification, check_conformal_class, check_curvature_identities, check_electric_evolution,
    check_exact_channels, check_extremal, check_foliation_relations, check_magnetic_synthetic, check_mass_evolution,
    check_monotonicity_electric, check_oracle_values, check_region_entropy, check_s_crit_table,
    check_weyl_derivative_identities, check_weyl_evolution_magnetic, VerificationCase,
};
use crate::catalog::{catalog_list, lookup, MetricSpec};
use crate::error::{Error, Result};
use crate::numdiff::StencilConfig;
use crate::point::Point;
use crate::quadrature::{RegionShape, RegionSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "camelCase")]
pub struct SuiteOptions {
    pub seed: u64,
    /// Seeded points per metric for the pointwise checks.
    pub points: usize,
    /// Classification tolerance.
    pub tol: f64,
    pub stencil: StencilConfig,
    /// Groups to run; empty means all of [`default_suite`].
    pub only: Vec<String>,
    /// Metrics for the per-metric groups; `None` means the whole catalog.
    #[serde(skip)]
    pub metrics: Option<Vec<MetricSpec>>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 1, points: 20, tol: 1e-6, stencil: StencilConfig::default(), only: Vec::new(), metrics: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub cases: Vec<VerificationCase>,
}

/// Check groups in execution order.
pub fn default_suite() -> Vec<&'static str> {
    vec![
        "curvature-identities",
        "foliation-relations",
        "oracle-values",
        "exact-channels",
        "classification",
        "weyl-derivatives",
        "conformal-class",
        "mass-evolution",
        "electric-evolution",
        "monotonicity",
        "magnetic",
        "region-entropy",
        "extremal",
        "s-crit-table",
    ]
}

fn per_metric<F>(metrics: &[MetricSpec], f: F) -> Vec<VerificationCase>
where
    F: Fn(&MetricSpec) -> Vec<VerificationCase> + Sync,
{
    metrics.par_iter().flat_map_iter(|m| f(m)).collect()
}

fn or_fail(name: &str, r: Result<VerificationCase>) -> VerificationCase {
    r.unwrap_or_else(|e| {
        let mut c = VerificationCase::new(name, "-", 0.0);
        c.fail(Point::new(0.0, [0.0; 3]), e.to_string());
        c
    })
}

fn named(name: &str) -> Result<MetricSpec> {
    lookup(name, &serde_json::Value::Null)
}

/// Monotonicity scan over an LTB box and 8 time slices, plus the equality biconditional
/// on an EdS ball and a Schwarzschild box.
pub fn monotonicity_cases(opts: &SuiteOptions) -> Result<Vec<VerificationCase>> {
    let cfg = &opts.stencil;
    let ltb = named("ltb")?;
    let region =
        RegionSpec { order: 3, ..RegionSpec::new(RegionShape::Box { lo: [1.0, 1.2, 0.0], hi: [1.5, 1.9, 0.7] }) };
    let times: Vec<f64> = (0..8).map(|i| 0.8 + 0.2 * i as f64).collect();
    let mut out =
        vec![check_monotonicity_electric(&ltb, &region, &times, None, cfg, opts.tol, 1e-5)?.to_case("monotonicity")];
    let eds = named("eds")?;
    let ball = RegionSpec { order: 2, ..RegionSpec::ball([0.0; 3], 1.0) };
    out.push(
        check_monotonicity_electric(&eds, &ball, &[0.8, 1.2, 1.6], None, cfg, opts.tol, 1e-5)?
            .to_case("monotonicity-equality"),
    );
    let schw = named("schwarzschild")?;
    let sbox =
        RegionSpec { order: 2, ..RegionSpec::new(RegionShape::Box { lo: [4.0, 1.0, 0.0], hi: [5.0, 2.0, 1.0] }) };
    out.push(
        check_monotonicity_electric(&schw, &sbox, &[0.5, 1.0], None, cfg, opts.tol, 1e-5)?
            .to_case("monotonicity-equality"),
    );
    Ok(out)
}

fn run_group(group: &str, metrics: &[MetricSpec], opts: &SuiteOptions) -> Result<Vec<VerificationCase>> {
    let cfg = &opts.stencil;
    let (n, seed, tol) = (opts.points, opts.seed, opts.tol);
    Ok(match group {
        "curvature-identities" => per_metric(metrics, |m| vec![check_curvature_identities(m, n, seed, cfg, 1e-8)]),
        "foliation-relations" => per_metric(metrics, |m| vec![check_foliation_relations(m, n, seed, cfg, 1e-5)]),
        "oracle-values" => vec![or_fail("oracle-values", check_oracle_values(n, seed, cfg, 1e-6))],
        "exact-channels" => per_metric(metrics, |m| vec![check_exact_channels(m, n, seed, cfg, 1e-6)]),
        "classification" => {
            per_metric(metrics, |m| vec![or_fail("classification", check_classification(m, n, seed, cfg, tol))])
        }
        "weyl-derivatives" => per_metric(metrics, |m| {
            let pts = m.sample_points(n.min(4), seed);
            check_weyl_derivative_identities(m, &pts, cfg, 1e-4, 1)
        }),
        "conformal-class" => {
            let specs: Vec<&MetricSpec> = metrics.iter().filter(|m| m.name == "conformal").collect();
            let conf = if specs.is_empty() { vec![named("conformal")?] } else { specs.into_iter().cloned().collect() };
            per_metric(&conf, |m| vec![check_conformal_class(m, &m.sample_points(n.min(6), seed), cfg, tol)])
        }
        "mass-evolution" => per_metric(metrics, |m| {
            if m.fluid.is_some() {
                vec![check_mass_evolution(m, &m.sample_points(n.min(5), seed), cfg, 1e-4)]
            } else {
                Vec::new()
            }
        }),
        "electric-evolution" => {
            let specs = [named("ltb")?, named("kasner")?];
            per_metric(&specs, |m| vec![check_electric_evolution(m, 5, seed, cfg, 1e-4)])
        }
        "monotonicity" => monotonicity_cases(opts)?,
        "magnetic" => {
            let mut c = or_fail("magnetic-synthetic", check_magnetic_synthetic(100, seed, 1e-12));
            let mut metric_case = VerificationCase::new("magnetic-metric", "catalog", 1e-4);
            for m in metrics {
                for p in m.sample_points(n.min(3), seed) {
                    match check_weyl_evolution_magnetic(m, &p, cfg, tol) {
                        Ok(r) => metric_case.record(p, r.residual, "magnetic Weyl evolution"),
                        Err(Error::Precondition(_)) => {}
                        Err(e) => metric_case.fail(p, e.to_string()),
                    }
                }
            }
            if metric_case.witnesses.is_empty() && metric_case.max_residual == 0.0 {
                c.note("no pure-magnetic metric point available: not exercised on a metric");
            }
            vec![c, metric_case]
        }
        "region-entropy" => vec![or_fail("region-entropy", check_region_entropy(cfg, tol))],
        "extremal" => vec![or_fail("extremal-classification", check_extremal(cfg, tol))],
        "s-crit-table" => vec![check_s_crit_table()],
        other => return Err(Error::InvalidParameter(format!("unknown check group `{other}`"))),
    })
}

/// Runs the selected groups; groups run in parallel and cases keep the group order.
pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let groups: Vec<String> =
        if opts.only.is_empty() { default_suite().into_iter().map(String::from).collect() } else { opts.only.clone() };
    let all = default_suite();
    if let Some(bad) = groups.iter().find(|g| !all.contains(&g.as_str())) {
        return Err(Error::InvalidParameter(format!("unknown check group `{bad}`")));
    }
    let metrics = opts.metrics.clone().unwrap_or_else(catalog_list);
    let results: Vec<Result<Vec<VerificationCase>>> = groups.par_iter().map(|g| run_group(g, &metrics, opts)).collect();
    let mut cases = Vec::new();
    for r in results {
        cases.extend(r?);
    }
    let pass = cases.iter().all(|c| c.pass);
    Ok(SuiteReport { pass, cases })
}
