//! Pure-electric evolution formulas and the monotonicity scan.

use rayon::prelude::*;
use serde::Serialize;

use super::{relative_residual, time_rate, time_rate_of_field, EvolutionReport, VerificationCase, Witness};
use crate::catalog::{FluidParams, MetricSpec};
use crate::entropy::{entropy_from_snapshot, s_crit, EntropyOptions, FluidChoice};
use crate::error::{Error, Result};
use crate::foliation::{alpha_expansion, classify, FrameData, RegionClass, Snapshot};
use crate::numdiff::StencilConfig;
use crate::point::Point;
use crate::quadrature::RegionSpec;
use crate::tensor::{Mat3, MetricChoice};

/// Residual floor: differences below 1e-7 pass a 1e-4 relative tolerance.
const FLOOR: f64 = 1e-3;

/// Frame contractions of h with E: (|E|^2, h_jl E_ij E_il, h_ij E_ij) using g^{-1}.
fn contractions(frame: &FrameData, h: &Mat3, e: &Mat3) -> (f64, f64, f64) {
    let hm = frame.g_inv * h;
    let em = frame.g_inv * e;
    ((em * em).trace(), (hm * em * em).trace(), (hm * em).trace())
}

fn electric_precondition(snap: &Snapshot, tol: f64) -> Result<bool> {
    let c = classify(&snap.bundle, &snap.frame, tol)?;
    if c.has(RegionClass::PureElectric) {
        Ok(true)
    } else if c.has(RegionClass::ConformallyFlat) {
        Ok(false)
    } else {
        Err(Error::Precondition(format!("point {} is not pure electric: {:?}", snap.frame.point, c.labels)))
    }
}

/// One half of D_T|W|^2 against 16H|E|^2 - 24 h_jl E_ij E_il + 4(M+P) h_ij E_ij.
pub fn check_weyl_evolution_electric(
    spec: &MetricSpec,
    p: &Point,
    cfg: &StencilConfig,
    tol: f64,
) -> Result<EvolutionReport> {
    let snap = Snapshot::compute(spec, p, cfg)?;
    electric_precondition(&snap, tol)?;
    let lhs = 0.5
        * time_rate(spec, p, cfg, |s| Ok(vec![s.bundle.weyl.norm_sq(&s.bundle.metrics, MetricChoice::Lorentzian)]))?[0];
    let eb = snap.weyl_eb()?;
    let f = &snap.frame;
    let (e2, hee, he) = contractions(f, &f.h, &eb.electric);
    let fluid = snap.bundle.fluid();
    let mp = fluid.density + fluid.pressure;
    let rhs = 16.0 * f.mean_curvature * e2 - 24.0 * hee + 4.0 * mp * he;
    Ok(EvolutionReport {
        point: *p,
        lhs,
        rhs,
        residual: relative_residual(lhs, rhs, FLOOR),
        monotone: rhs >= -tol,
        extra: vec![("perfectFluid".into(), if fluid.is_perfect_fluid { 1.0 } else { 0.0 })],
        skipped: None,
    })
}

/// Closed-form D_T S on a pure-electric k-fluid point with |W|, |A| > 0.
/// `hee` and `he` are the traceless contractions h°_jl E_ij E_il and h°_ij E_ij.
#[allow(clippy::too_many_arguments)]
pub fn entropy_evolution_formula(
    w: f64,
    a: f64,
    r: f64,
    h_mean: f64,
    k: f64,
    k_prime: f64,
    density: f64,
    hee: f64,
    he: f64,
    sqrtg: f64,
) -> f64 {
    let bracket = -k * h_mean - h_mean * w * w / (a * a) - 24.0 * hee / (w * w) + 4.0 * k * density * he / (w * w)
        - h_mean * k_prime * (3.0 * k - 2.0) * density * density / (a * a);
    w * a * a / r.powi(3) * bracket * sqrtg
}

/// k and k' at a point: explicit parameters, else the metric's fluid data, else the stress tensor.
fn fluid_k(
    spec: &MetricSpec,
    snap: &Snapshot,
    cfg: &StencilConfig,
    fluid: Option<FluidParams>,
    tol: f64,
) -> Result<Option<(f64, f64)>> {
    if let Some(f) = fluid {
        return Ok(Some((f.k, f.k_prime)));
    }
    let p = snap.frame.point;
    let h = snap.frame.mean_curvature;
    if let Some(meta) = &spec.fluid {
        let k = meta.eos_k.value(&p)?;
        let dk = time_rate_of_field(spec, &p, cfg, |q| meta.eos_k.value(q))?;
        let k_prime = if h.abs() <= tol { 0.0 } else { dk / h };
        return Ok(Some((k, k_prime)));
    }
    let f = snap.bundle.fluid();
    Ok(if f.is_perfect_fluid && !f.is_vacuum { f.k.map(|k| (k, 0.0)) } else { None })
}

fn entropy_opts(cfg: &StencilConfig, tol: f64) -> EntropyOptions {
    EntropyOptions { tol, zeta: 1.0, stencil: *cfg }
}

/// D_T S by finite differences against the closed form, including the A = 0 branch -H sqrt(g).
pub fn check_entropy_evolution_electric(
    spec: &MetricSpec,
    p: &Point,
    cfg: &StencilConfig,
    fluid: Option<FluidParams>,
    tol: f64,
) -> Result<EvolutionReport> {
    let snap = Snapshot::compute(spec, p, cfg)?;
    let opts = entropy_opts(cfg, tol);
    let ep = entropy_from_snapshot(spec, &snap, FluidChoice::Absent, &opts)?;
    let f = &snap.frame;
    let sqrtg = f.sqrtg;
    let mut report = EvolutionReport {
        point: *p,
        lhs: 0.0,
        rhs: 0.0,
        residual: 0.0,
        monotone: true,
        extra: Vec::new(),
        skipped: None,
    };
    if !electric_precondition(&snap, tol)? || ep.s == 0.0 {
        report.skipped = Some("|W| vanishes: the formula divides by |W|".into());
        return Ok(report);
    }
    let lhs =
        time_rate(spec, p, cfg, |s| Ok(vec![entropy_from_snapshot(spec, s, FluidChoice::Absent, &opts)?.density]))?[0];
    let rhs = if ep.s == 1.0 {
        report.extra.push(("branchAZero".into(), 1.0));
        -f.mean_curvature * sqrtg
    } else {
        let Some((k, k_prime)) = fluid_k(spec, &snap, cfg, fluid, tol)? else {
            return Err(Error::Precondition(format!("no perfect fluid at {p}")));
        };
        let eb = snap.weyl_eb()?;
        let (_, hee, he) = contractions(f, &f.h_traceless, &eb.electric);
        let density = snap.bundle.fluid().density;
        report.extra.push(("k".into(), k));
        report.extra.push(("kPrime".into(), k_prime));
        entropy_evolution_formula(
            ep.weyl_norm_bar,
            ep.a_norm_bar,
            ep.riemann_norm_bar,
            f.mean_curvature,
            k,
            k_prime,
            density,
            hee,
            he,
            sqrtg,
        )
    };
    report.lhs = lhs;
    report.rhs = rhs;
    report.residual = relative_residual(lhs, rhs, FLOOR);
    report.monotone = rhs >= -tol;
    Ok(report)
}

/// One node of a monotonicity scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanPoint {
    pub point: Point,
    pub alpha_max: Option<f64>,
    pub k: Option<f64>,
    pub s: f64,
    pub s_crit: Option<f64>,
    /// D_T S^pf by finite differences in t.
    pub dt_spf: f64,
    /// D_T S^pf from the closed form (absent where |W| vanishes without |A| vanishing).
    pub dt_spf_formula: Option<f64>,
    /// |h| in the spatial metric.
    pub h_norm: f64,
    /// |W|_bar / |R|_bar.
    pub weyl_ratio: f64,
    pub parameters_ok: bool,
    /// D_T S^pf vanishes at tolerance.
    pub equality: bool,
    /// h = 0, or |W| = 0 with alpha = 1/3 and s_crit = 0.
    pub characterization: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityReport {
    pub metric: String,
    /// Scan-wide alpha (explicit or the minimum alphaMax over the grid).
    pub alpha: Option<f64>,
    pub min_dt_spf: f64,
    pub tol: f64,
    pub precondition_failures: Vec<Witness>,
    pub violations: Vec<Witness>,
    pub equality_mismatches: Vec<Witness>,
    /// Nodes where the second branch of the min in the parameter inequality binds.
    pub second_branch_binding: usize,
    pub points: Vec<ScanPoint>,
    pub pass: bool,
}

fn param_rate(k: f64, alpha: f64, k_prime: f64, alpha_prime: f64, h_mean: f64) -> f64 {
    // D_T s_crit = (ds/dk k' + ds/dalpha alpha') H by central differences of the closed form.
    let e = 1e-6;
    let dk = (s_crit(k + e, alpha) - s_crit(k - e, alpha)) / (2.0 * e);
    let da = if alpha + e <= 1.0 / 3.0 && alpha >= e {
        (s_crit(k, alpha + e) - s_crit(k, alpha - e)) / (2.0 * e)
    } else {
        0.0
    };
    (dk * k_prime + da * alpha_prime) * h_mean
}

/// Scans D_T S^pf over region nodes and times. Without explicit parameters, alpha is the
/// minimum alphaMax over the scan (so alpha' = 0) and k comes from the metric.
pub fn check_monotonicity_electric(
    spec: &MetricSpec,
    region: &RegionSpec,
    times: &[f64],
    fluid: Option<FluidParams>,
    cfg: &StencilConfig,
    tol: f64,
    min_tol: f64,
) -> Result<MonotonicityReport> {
    region.validate()?;
    let nodes = region.volume_nodes(region.panels);
    let pts: Vec<Point> = times.iter().flat_map(|&t| nodes.iter().map(move |n| Point::new(t, n.x))).collect();
    let frames: Vec<FrameData> = pts.par_iter().map(|p| FrameData::compute(spec, p, cfg)).collect::<Result<_>>()?;
    let mut precondition_failures = Vec::new();
    let mut alpha_min = f64::INFINITY;
    for f in &frames {
        match alpha_expansion(f, tol)?.alpha_max {
            Some(a) => alpha_min = alpha_min.min(a),
            None => precondition_failures.push(Witness {
                point: f.point,
                residual: f64::INFINITY,
                detail: "not alpha-expanding".into(),
            }),
        }
    }
    let alpha = fluid.map(|f| f.alpha).or(alpha_min.is_finite().then_some(alpha_min));
    let opts = entropy_opts(cfg, tol);
    let rows: Vec<Result<ScanPoint>> = pts
        .par_iter()
        .zip(&frames)
        .map(|(p, frame)| -> Result<ScanPoint> {
            let snap = Snapshot::compute(spec, p, cfg)?;
            let ep = entropy_from_snapshot(spec, &snap, FluidChoice::Absent, &opts)?;
            let kk = fluid_k(spec, &snap, cfg, fluid, tol)?;
            let params = match (kk, alpha) {
                (Some((k, k_prime)), Some(a)) => {
                    Some(FluidParams { k, alpha: a, k_prime, alpha_prime: fluid.map_or(0.0, |f| f.alpha_prime) })
                }
                _ => None,
            };
            let parameters_ok = params.map_or(true, |f| {
                f.validate().is_ok() && f.at_mean_curvature(frame.mean_curvature, tol).evolution_inequalities_hold(tol)
            });
            let crit = params.map(|f| s_crit(f.k, f.alpha));
            let spf_at = |s: &Snapshot| -> Result<Vec<f64>> {
                let e = entropy_from_snapshot(spec, s, FluidChoice::Absent, &opts)?;
                let c = match (params, &spec.fluid, fluid) {
                    (Some(f), Some(meta), None) => s_crit(meta.eos_k.value(&s.frame.point)?, f.alpha),
                    (Some(f), _, _) => s_crit(f.k, f.alpha),
                    (None, _, _) => 0.0,
                };
                Ok(vec![(e.s + c) * s.frame.sqrtg])
            };
            let dt_spf = time_rate(spec, p, cfg, spf_at)?[0];
            let h_mean = frame.mean_curvature;
            let sqrtg = frame.sqrtg;
            let crit_rate = params.map_or(0.0, |f| {
                let c = s_crit(f.k, f.alpha);
                param_rate(f.k, f.alpha, f.k_prime, f.alpha_prime, h_mean) * sqrtg - h_mean * c * sqrtg
            });
            let formula = if ep.s == 1.0 {
                Some(-h_mean * sqrtg + crit_rate)
            } else if ep.s == 0.0 {
                None
            } else {
                match params {
                    Some(f) => {
                        let eb = snap.weyl_eb()?;
                        let (_, hee, he) = contractions(frame, &frame.h_traceless, &eb.electric);
                        let density = snap.bundle.fluid().density;
                        Some(
                            entropy_evolution_formula(
                                ep.weyl_norm_bar,
                                ep.a_norm_bar,
                                ep.riemann_norm_bar,
                                h_mean,
                                f.k,
                                f.k_prime,
                                density,
                                hee,
                                he,
                                sqrtg,
                            ) + crit_rate,
                        )
                    }
                    None => None,
                }
            };
            let h_norm = frame.h_norm_sq().max(0.0).sqrt();
            let weyl_ratio = if ep.riemann_norm_bar > 0.0 { ep.weyl_norm_bar / ep.riemann_norm_bar } else { 0.0 };
            let eq_scale = tol * sqrtg * h_mean.abs().max(1.0);
            let equality = dt_spf.abs() <= eq_scale;
            let umbilic = alpha.map_or(false, |a| 1.0 / 3.0 - a <= tol);
            let characterization = h_norm <= tol || (ep.s == 0.0 && umbilic && crit.map_or(true, |c| c == 0.0));
            Ok(ScanPoint {
                point: *p,
                alpha_max: alpha_expansion(frame, tol)?.alpha_max,
                k: kk.map(|k| k.0),
                s: ep.s,
                s_crit: crit,
                dt_spf,
                dt_spf_formula: formula,
                h_norm,
                weyl_ratio,
                parameters_ok,
                equality,
                characterization,
            })
        })
        .collect();
    let mut points = Vec::with_capacity(rows.len());
    let mut violations = Vec::new();
    let mut equality_mismatches = Vec::new();
    let mut min_dt = f64::INFINITY;
    for (row, p) in rows.into_iter().zip(&pts) {
        let sp = match row {
            Ok(sp) => sp,
            Err(e) => {
                precondition_failures.push(Witness { point: *p, residual: f64::INFINITY, detail: e.to_string() });
                continue;
            }
        };
        if !sp.parameters_ok {
            precondition_failures.push(Witness {
                point: sp.point,
                residual: f64::INFINITY,
                detail: "fluid parameter inequalities fail".into(),
            });
        }
        let low = sp.dt_spf_formula.map_or(sp.dt_spf, |f| f.min(sp.dt_spf));
        min_dt = min_dt.min(low);
        if low < -min_tol {
            violations.push(Witness { point: sp.point, residual: low, detail: "D_T S^pf below tolerance".into() });
        }
        if sp.equality != sp.characterization {
            equality_mismatches.push(Witness {
                point: sp.point,
                residual: sp.dt_spf,
                detail: format!("equality {} but characterization {}", sp.equality, sp.characterization),
            });
        }
        points.push(sp);
    }
    let second_branch_binding = match fluid {
        Some(f) if f.alpha < 1.0 / 3.0 => {
            usize::from(9.0 * f.alpha_prime / (4.0 * (1.0 - 3.0 * f.alpha)) > 1.0) * points.len()
        }
        _ => 0,
    };
    let pass = precondition_failures.is_empty() && violations.is_empty() && equality_mismatches.is_empty();
    Ok(MonotonicityReport {
        metric: spec.name.clone(),
        alpha,
        min_dt_spf: min_dt,
        tol: min_tol,
        precondition_failures,
        violations,
        equality_mismatches,
        second_branch_binding,
        points,
        pass,
    })
}

impl MonotonicityReport {
    /// Summary as a verification case: violations, precondition failures and equality mismatches.
    pub fn to_case(&self, name: &str) -> VerificationCase {
        let mut case = VerificationCase::new(name, &self.metric, self.tol);
        for w in &self.precondition_failures {
            case.fail(w.point, format!("hypothesis: {}", w.detail));
        }
        for w in &self.violations {
            case.record(w.point, -w.residual, w.detail.clone());
        }
        for w in &self.equality_mismatches {
            case.fail(w.point, w.detail.clone());
        }
        case.max_residual = case.max_residual.max((-self.min_dt_spf).max(0.0));
        case.note(format!("min D_T S^pf = {:e} over {} nodes", self.min_dt_spf, self.points.len()));
        if let Some(a) = self.alpha {
            case.note(format!("alpha = {a}"));
        }
        case.note(format!("second branch of the parameter bound binding at {} nodes", self.second_branch_binding));
        case
    }
}

/// Weyl and entropy evolution formulas at `n` seeded points; the A = 0 branch is held to 1e-8
/// absolute, everything else to `tol` relative.
pub fn check_electric_evolution(
    spec: &MetricSpec,
    n: usize,
    seed: u64,
    cfg: &StencilConfig,
    tol: f64,
) -> VerificationCase {
    let mut case = VerificationCase::new("electric-evolution", &spec.name, tol);
    let points = spec.sample_points(n, seed);
    let rows: Vec<_> = points
        .par_iter()
        .map(|p| {
            (
                *p,
                check_weyl_evolution_electric(spec, p, cfg, 1e-6),
                check_entropy_evolution_electric(spec, p, cfg, None, 1e-6),
            )
        })
        .collect();
    for (p, weyl, entropy) in rows {
        match weyl {
            Ok(r) => case.record(p, r.residual, "Weyl evolution"),
            Err(e) => case.fail(p, format!("Weyl evolution: {e}")),
        }
        match entropy {
            Ok(r) if r.skipped.is_some() => case.skip(format!("{p}: {}", r.skipped.unwrap_or_default())),
            Ok(r) if r.extra.iter().any(|(k, _)| k == "branchAZero") => {
                let d = (r.lhs - r.rhs).abs();
                case.require(p, d <= 1e-8, format!("entropy evolution, A = 0 branch: |lhs - rhs| = {d:e}"))
            }
            Ok(r) => case.record(p, r.residual, "entropy evolution"),
            Err(e) => case.fail(p, format!("entropy evolution: {e}")),
        }
    }
    case
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use serde_json::Value;

    #[test]
    fn kasner_weyl_evolution() {
        let spec = lookup("kasner", &Value::Null).unwrap();
        let r =
            check_weyl_evolution_electric(&spec, &Point::new(1.3, [0.1, 0.2, 0.3]), &StencilConfig::default(), 1e-6)
                .unwrap();
        assert!(r.residual < 1e-4, "{r:?}");
    }

    #[test]
    fn kasner_entropy_branch() {
        let spec = lookup("kasner", &Value::Null).unwrap();
        let p = Point::new(1.3, [0.0; 3]);
        let r = check_entropy_evolution_electric(&spec, &p, &StencilConfig::default(), None, 1e-6).unwrap();
        // sqrt(g) = t and H = -1/t, so both sides equal 1.
        assert!((r.rhs - 1.0).abs() < 1e-8 && (r.lhs - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn ltb_entropy_evolution() {
        let spec = lookup("ltb", &Value::Null).unwrap();
        let p = Point::new(1.5, [1.0, 1.2, 0.3]);
        let r = check_weyl_evolution_electric(&spec, &p, &StencilConfig::default(), 1e-6).unwrap();
        assert!(r.residual < 1e-4, "{r:?}");
        let r = check_entropy_evolution_electric(&spec, &p, &StencilConfig::default(), None, 1e-6).unwrap();
        assert!(r.residual < 1e-4, "{r:?}");
    }
}
