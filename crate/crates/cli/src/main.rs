//! weyl-lab: pointwise reports, region-entropy series, monotonicity scans and the
//! verification suite on analytic 3+1 spacetimes.

mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use weyl_lab_core::catalog::{catalog_list, MetricSpec};
use weyl_lab_core::entropy::{area_vol_monotonicity, entropy_point, region_entropy, RegionEntropy};
use weyl_lab_core::foliation::{classify, point_report, PointReport, Snapshot};
use weyl_lab_core::point::Point;
use weyl_lab_core::verify::{check_monotonicity_electric, run_suite, SuiteOptions};
use weyl_lab_core::Error as CoreError;

use config::{ConfigError, Flags, RunConfig};
use output::{csv_row, num, opt_num, Table};

#[derive(Parser)]
#[command(name = "weyl-lab", version, about = "Curvature, foliation and Weyl-entropy checks on analytic spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise classification, slicing residuals and entropy densities.
    Report(Flags),
    /// Region entropy, D_T S^pf and classification per time slice.
    Scan(Flags),
    /// Run the verification suite.
    Verify(Flags),
    /// Region entropy time series.
    EntropyRegion(Flags),
    /// List catalog metrics with parameters and declared classes.
    Catalog(Flags),
}

/// Outcome of a command: the rendered table and whether every check passed.
struct Outcome {
    table: Table,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("WEYL_LAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let (flags, run): (&Flags, fn(&RunConfig) -> anyhow::Result<Outcome>) = match &cli.command {
        Command::Report(f) => (f, cmd_report),
        Command::Scan(f) => (f, cmd_scan),
        Command::Verify(f) => (f, cmd_verify),
        Command::EntropyRegion(f) => (f, cmd_entropy_region),
        Command::Catalog(f) => (f, cmd_catalog),
    };
    let result = RunConfig::resolve(flags).and_then(|cfg| {
        let outcome = run(&cfg)?;
        outcome.table.write(cfg.format, cfg.out.as_deref())?;
        Ok(outcome.pass)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<CoreError>() {
        Some(
            CoreError::InvalidParameter(_)
            | CoreError::UnknownMetric(_)
            | CoreError::UnknownQuantity(_)
            | CoreError::Expression { .. },
        ) => 2,
        _ => 1,
    }
}

fn point_fields(p: &Point) -> Vec<String> {
    vec![num(p.t), num(p.x[0]), num(p.x[1]), num(p.x[2])]
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReportRow {
    #[serde(flatten)]
    report: PointReport,
    s: f64,
    #[serde(rename = "S")]
    density: f64,
    #[serde(rename = "Spf")]
    density_pf: f64,
    s_crit: Option<f64>,
}

fn cmd_report(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let spec = cfg.metric()?;
    let points = cfg.points.clone().unwrap_or_else(|| spec.sample_points(cfg.samples, cfg.seed));
    let opts = cfg.entropy_options();
    let rows: Vec<(Point, Result<ReportRow, CoreError>)> = points
        .par_iter()
        .map(|p| {
            let row = point_report(&spec, p, &cfg.stencil, cfg.tol).and_then(|report| {
                let e = entropy_point(&spec, p, cfg.fluid, &opts)?;
                Ok(ReportRow { report, s: e.s, density: e.density, density_pf: e.density_pf, s_crit: e.s_crit })
            });
            (*p, row)
        })
        .collect();
    let header = "t,x1,x2,x3,class,alphaMax,s,S,Spf,sCrit,gauss,codazzi,normal,hamiltonian,momentum,error";
    let mut table = Table::new(header);
    let mut pass = true;
    for (p, row) in rows {
        match row {
            Ok(r) => {
                let res = &r.report.residuals;
                let class: Vec<String> = r.report.class.iter().map(|c| format!("{c:?}")).collect();
                let mut f = point_fields(&p);
                f.extend([
                    class.join("|"),
                    opt_num(r.report.alpha_max),
                    num(r.s),
                    num(r.density),
                    num(r.density_pf),
                    opt_num(r.s_crit),
                    num(res.gauss),
                    num(res.codazzi),
                    num(res.normal),
                    num(res.hamiltonian),
                    num(res.momentum),
                    String::new(),
                ]);
                table.push(serde_json::to_value(&r)?, csv_row(&f));
            }
            Err(e) => {
                pass = false;
                let mut f = point_fields(&p);
                f.extend(std::iter::repeat_n(String::new(), 11));
                f.push(e.to_string());
                table.push(json!({ "point": p, "error": e.to_string() }), csv_row(&f));
            }
        }
    }
    Ok(Outcome { table, pass })
}

fn entropy_fields(r: &RegionEntropy) -> Vec<String> {
    vec![num(r.t), num(r.s_u), num(r.spf_u), num(r.area), num(r.vol), num(r.bound), num(r.quad_error)]
}

fn region_series(cfg: &RunConfig, spec: &MetricSpec) -> anyhow::Result<Vec<(f64, Result<RegionEntropy, CoreError>)>> {
    let region = cfg.region()?;
    let times = cfg.times()?;
    let opts = cfg.entropy_options();
    Ok(times.par_iter().map(|&t| (t, region_entropy(spec, &region, t, cfg.fluid, &opts))).collect())
}

fn cmd_entropy_region(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let spec = cfg.metric()?;
    let mut table = Table::new("t,S_U,Spf_U,area,vol,bound,quadError");
    let mut pass = true;
    for (t, row) in region_series(cfg, &spec)? {
        match row {
            Ok(r) => {
                pass &= r.bound_holds && r.area_bound_holds;
                table.push(serde_json::to_value(r)?, csv_row(&entropy_fields(&r)));
            }
            Err(e) => {
                pass = false;
                eprintln!("t = {t}: {e}");
                table.push_json(json!({ "t": t, "error": e.to_string() }));
            }
        }
    }
    Ok(Outcome { table, pass })
}

fn cmd_scan(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let spec = cfg.metric()?;
    let region = cfg.region()?;
    let times = cfg.times()?;
    let opts = cfg.entropy_options();
    let series = region_series(cfg, &spec)?;
    let fixed = match cfg.fluid {
        weyl_lab_core::entropy::FluidChoice::Fixed(f) => Some(f),
        _ => None,
    };
    let mono = check_monotonicity_electric(&spec, &region, &times, fixed, &cfg.stencil, cfg.tol, 1e-5)
        .map_err(|e| anyhow::anyhow!(e))?;
    let mut hypotheses_fail: Vec<Point> = mono.precondition_failures.iter().map(|w| w.point).collect();
    hypotheses_fail.dedup();
    let extra: Vec<(Option<f64>, Option<String>)> = times
        .par_iter()
        .map(|&t| {
            let trend = area_vol_monotonicity(&spec, &region, t, &opts).ok().map(|tr| tr.d_t_ratio);
            let centre = Point::new(t, region.center());
            let class = Snapshot::compute(&spec, &centre, &cfg.stencil)
                .and_then(|s| classify(&s.bundle, &s.frame, cfg.tol))
                .map(|c| c.labels.iter().map(|l| format!("{l:?}")).collect::<Vec<_>>().join("|"))
                .ok();
            (trend, class)
        })
        .collect();
    let mut table = Table::new("t,S_U,Spf_U,area,vol,bound,quadError,minDtSpf,dtAreaVol,class,error");
    let mut pass = mono.equality_mismatches.is_empty();
    for ((t, row), (trend, class)) in series.into_iter().zip(extra) {
        let slice: Vec<_> = mono.points.iter().filter(|sp| sp.point.t == t).collect();
        let min_dt = slice
            .iter()
            .map(|sp| sp.dt_spf_formula.map_or(sp.dt_spf, |f| f.min(sp.dt_spf)))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
        let violated = mono.violations.iter().any(|w| w.point.t == t && !hypotheses_fail.contains(&w.point));
        pass &= !violated;
        let (mut fields, mut obj) = match &row {
            Ok(r) => {
                pass &= r.bound_holds;
                (entropy_fields(r), serde_json::to_value(r)?)
            }
            Err(e) => {
                pass = false;
                let mut f = vec![num(t)];
                f.extend(std::iter::repeat_n(String::new(), 6));
                (f, json!({ "t": t, "error": e.to_string() }))
            }
        };
        fields.extend([
            opt_num(min_dt),
            opt_num(trend),
            class.clone().unwrap_or_default(),
            row.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
        ]);
        if let Value::Object(m) = &mut obj {
            m.insert("minDtSpf".into(), json!(min_dt));
            m.insert("dtAreaVol".into(), json!(trend));
            m.insert("class".into(), json!(class));
            m.insert("monotone".into(), json!(!violated));
        }
        table.push(obj, csv_row(&fields));
    }
    table.set_json_meta(json!({
        "alpha": mono.alpha,
        "minDtSpf": mono.min_dt_spf,
        "hypothesisFailures": mono.precondition_failures.len(),
        "equalityMismatches": mono.equality_mismatches,
        "secondBranchBinding": mono.second_branch_binding,
    }));
    Ok(Outcome { table, pass })
}

fn cmd_verify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let metrics = match &cfg.metric_name {
        Some(_) => Some(vec![cfg.metric()?]),
        None => None,
    };
    let opts = SuiteOptions {
        seed: cfg.seed,
        points: cfg.verify.points.unwrap_or(20),
        tol: cfg.tol,
        stencil: cfg.stencil,
        only: cfg.verify.only.clone(),
        metrics,
    };
    let report = run_suite(&opts).map_err(|e| match e {
        CoreError::InvalidParameter(m) => anyhow::Error::new(ConfigError(m)),
        other => anyhow::Error::new(other),
    })?;
    let mut table = Table::new("case,metric,maxResidual,tol,pass,witnesses");
    for c in &report.cases {
        table.push(
            serde_json::to_value(c)?,
            csv_row(&[
                c.case.clone(),
                c.metric.clone(),
                num(c.max_residual),
                num(c.tol),
                c.pass.to_string(),
                c.witnesses.len().to_string(),
            ]),
        );
    }
    table.set_json_meta(json!({ "pass": report.pass }));
    Ok(Outcome { table, pass: report.pass })
}

fn cmd_catalog(_cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let mut table = Table::new("name,params,declared,description");
    for m in catalog_list() {
        let declared: Vec<String> = m.declared.iter().map(|d| format!("{d:?}")).collect();
        let params: Vec<String> = m.params.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
        table.push(
            json!({
                "name": m.name,
                "description": m.description,
                "params": m.params,
                "declared": m.declared,
                "chart": m.chart,
                "sampleBox": m.sample_box,
            }),
            csv_row(&[m.name.clone(), params.join("|"), declared.join("|"), m.description.clone()]),
        );
    }
    Ok(Outcome { table, pass: true })
}
