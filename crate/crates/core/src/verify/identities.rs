//! Algebraic identities, slicing relations, closed-form oracles and region checks.

use rayon::prelude::*;

use super::{relative_residual, time_rate, time_rate_of_field, VerificationCase};
use crate::catalog::{lookup, DeclaredClass, MetricSpec, Quantity};
use crate::curvature::{cotton_from_derivative, foliated_christoffels, CurvatureBundle};
use crate::entropy::{
    classify_extremal, entropy_from_snapshot, region_entropy, s_crit, EntropyOptions, ExtremalClass, FluidChoice,
};
use crate::error::{Error, Result};
use crate::foliation::{
    alpha_expansion, classify, constraint_residuals, gauss_codazzi_residuals, volume_evolution, FrameData, RegionClass,
    Snapshot,
};
use crate::numdiff::{partial_vec, StencilConfig};
use crate::point::Point;
use crate::quadrature::{RegionShape, RegionSpec};
use crate::tensor::{Mat3, MetricChoice, Tensor4};

/// Residual floor for finite-difference comparisons: 1e-7 absolute at 1e-4 relative.
const FD_FLOOR: f64 = 1e-3;

/// Largest absolute difference over the largest magnitude (zero when both vanish).
#[derive(Default)]
struct MaxDiff {
    diff: f64,
    scale: f64,
}

impl MaxDiff {
    fn push(&mut self, lhs: f64, rhs: f64) {
        self.diff = self.diff.max((lhs - rhs).abs());
        self.scale = self.scale.max(lhs.abs()).max(rhs.abs());
    }

    fn relative(&self) -> f64 {
        if self.diff == 0.0 {
            0.0
        } else {
            self.diff / self.scale
        }
    }

    fn relative_floor(&self, floor: f64) -> f64 {
        if self.diff == 0.0 {
            0.0
        } else {
            self.diff / self.scale.max(floor)
        }
    }
}

fn rel(lhs: f64, rhs: f64) -> f64 {
    let d = (lhs - rhs).abs();
    if d == 0.0 {
        0.0
    } else {
        d / lhs.abs().max(rhs.abs())
    }
}

/// E_ij against g^{kl} W_kilj and the spatial Weyl block against its E reconstruction,
/// relative to the larger of the Weyl and Riemann component scales.
fn electric_trace_and_reconstruction(bundle: &CurvatureBundle, frame: &FrameData, e: &Mat3) -> (f64, f64) {
    let w = &bundle.weyl;
    let (g, gi) = (frame.g, frame.g_inv);
    let mut trace = MaxDiff::default();
    let mut recon = MaxDiff::default();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += gi[(k, l)] * w.at4(k + 1, i + 1, l + 1, j + 1);
                }
            }
            trace.push(e[(i, j)], s);
            for k in 0..3 {
                for l in 0..3 {
                    let r =
                        e[(i, k)] * g[(j, l)] - e[(i, l)] * g[(j, k)] + e[(j, l)] * g[(i, k)] - e[(j, k)] * g[(i, l)];
                    recon.push(w.at4(i + 1, j + 1, k + 1, l + 1), r);
                }
            }
        }
    }
    let floor = bundle.riemann.max_abs();
    (trace.relative_floor(floor), recon.relative_floor(floor))
}

fn on_points<F>(case: &mut VerificationCase, points: &[Point], f: F)
where
    F: Fn(&Point) -> Result<Vec<(f64, String)>> + Sync,
{
    let rows: Vec<_> = points.par_iter().map(|p| (*p, f(p))).collect();
    for (p, row) in rows {
        match row {
            Ok(items) => {
                for (r, d) in items {
                    case.record(p, r, d);
                }
            }
            Err(Error::Precondition(msg)) => case.skip(format!("{p}: {msg}")),
            Err(e) => case.fail(p, e.to_string()),
        }
    }
}

/// Norm identities and the electric trace/reconstruction at `n` seeded points.
pub fn check_curvature_identities(
    spec: &MetricSpec,
    n: usize,
    seed: u64,
    cfg: &StencilConfig,
    tol: f64,
) -> VerificationCase {
    let mut case = VerificationCase::new("curvature-identities", &spec.name, tol);
    let points = spec.sample_points(n, seed);
    on_points(&mut case, &points, |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let b = &snap.bundle;
        let [split, split_bar, a_norm] = b.norm_identity_residuals();
        let norms = b.norms();
        let eb = snap.weyl_eb()?;
        let rb = snap.frame.block_norms(&b.riemann)?;
        let wb = &eb.block_norms;
        let (trace, recon) = electric_trace_and_reconstruction(b, &snap.frame, &eb.electric);
        let scale_l = norms.riemann.abs().max(norms.weyl.abs());
        let blocks =
            |v: f64, w: f64, s: f64| if (v - w).abs() == 0.0 { 0.0 } else { (v - w).abs() / s.max(f64::MIN_POSITIVE) };
        Ok(vec![
            (split, "Riemann norm split".into()),
            (split_bar, "companion-metric split".into()),
            (a_norm, "A-tensor norm".into()),
            (
                blocks(norms.weyl, eb.lorentzian_norm_sq(), scale_l.max(norms.weyl_bar)),
                "Weyl norm from E and W_Tijk".into(),
            ),
            (blocks(norms.riemann, rb.lorentzian(), norms.riemann_bar), "Riemann block norms, Lorentzian".into()),
            (rel(norms.riemann_bar, rb.riemannian()), "Riemann block norms, companion".into()),
            (
                blocks(norms.weyl, wb.lorentzian(), norms.weyl_bar.max(norms.riemann_bar)),
                "Weyl block norms, Lorentzian".into(),
            ),
            (blocks(norms.weyl_bar, wb.riemannian(), norms.riemann_bar), "Weyl block norms, companion".into()),
            (trace, "E as trace of spatial Weyl".into()),
            (recon, "spatial Weyl from E".into()),
        ])
    });
    case
}

/// Gauss, Codazzi, normal relation, both constraints and D_T sqrt(g) = -H sqrt(g).
pub fn check_foliation_relations(
    spec: &MetricSpec,
    n: usize,
    seed: u64,
    cfg: &StencilConfig,
    tol: f64,
) -> VerificationCase {
    let mut case = VerificationCase::new("foliation-relations", &spec.name, tol);
    let points = spec.sample_points(n, seed);
    on_points(&mut case, &points, |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let gc = gauss_codazzi_residuals(&snap)?;
        let c = constraint_residuals(&snap)?;
        let (lhs, rhs) = volume_evolution(spec, p, cfg)?;
        let momentum = c.momentum.iter().fold(0.0f64, |m, v| m.max(*v));
        Ok(vec![
            (gc.gauss, "Gauss".into()),
            (gc.codazzi, "Codazzi".into()),
            (gc.normal, "normal-normal".into()),
            (c.hamiltonian, "Hamiltonian constraint".into()),
            (momentum, "momentum constraint".into()),
            (rel(lhs, rhs), "volume evolution".into()),
        ])
    });
    case
}

/// Computed value of a catalog quantity at a point.
fn computed_quantity(spec: &MetricSpec, snap: &Snapshot, q: Quantity, tol: f64) -> Result<Option<f64>> {
    let b = &snap.bundle;
    let f = &snap.frame;
    let fluid = b.fluid();
    Ok(match q {
        Quantity::Lapse => Some(f.lapse),
        Quantity::SqrtDet => Some(f.sqrtg),
        Quantity::MeanCurvature => Some(f.mean_curvature),
        Quantity::Density => Some(fluid.density),
        Quantity::Pressure => Some(fluid.pressure),
        Quantity::EosK => fluid.k,
        Quantity::SchoutenNormSq => Some(b.a_tensor.norm_sq(&b.metrics, MetricChoice::Lorentzian)),
        Quantity::WeylNormSq => Some(b.weyl.norm_sq(&b.metrics, MetricChoice::Lorentzian)),
        Quantity::Kretschmann => Some(b.riemann.norm_sq(&b.metrics, MetricChoice::Lorentzian)),
        Quantity::EntropyDensity => {
            let opts = EntropyOptions { tol, zeta: 1.0, stencil: StencilConfig::default() };
            Some(entropy_from_snapshot(spec, snap, FluidChoice::Absent, &opts)?.s)
        }
        Quantity::AlphaMax => alpha_expansion(f, tol)?.alpha_max,
    })
}

/// Closed-form values: Schwarzschild Kretschmann 48 m^2 / r^6, EdS density 4 / (3 t^2)
/// with |A|^2 = (5/3) M^2, and k = 0 on de Sitter; then every exact channel of the catalog.
pub fn check_oracle_values(n: usize, seed: u64, cfg: &StencilConfig, tol: f64) -> Result<VerificationCase> {
    let mut case = VerificationCase::new("oracle-values", "catalog", tol);
    let schw = lookup("schwarzschild", &serde_json::json!({ "m": 1.0 }))?;
    on_points(&mut case, &schw.sample_points(n, seed), |p| {
        let b = CurvatureBundle::compute(&schw, p, cfg)?;
        let r = p.x[0];
        let k = b.riemann.norm_sq(&b.metrics, MetricChoice::Lorentzian);
        Ok(vec![(rel(k, 48.0 / r.powi(6)), "Schwarzschild Kretschmann".into())])
    });
    let eds = lookup("eds", &serde_json::Value::Null)?;
    on_points(&mut case, &eds.sample_points(n, seed), |p| {
        let b = CurvatureBundle::compute(&eds, p, cfg)?;
        let m = 4.0 / (3.0 * p.t * p.t);
        let f = b.fluid();
        let a2 = b.a_tensor.norm_sq(&b.metrics, MetricChoice::Lorentzian);
        Ok(vec![
            (rel(f.density, m), "EdS density".into()),
            (rel(a2, 5.0 / 3.0 * m * m), "EdS |A|^2".into()),
            (f.pressure.abs() / m, "EdS pressure".into()),
        ])
    });
    let ds = lookup("desitter", &serde_json::Value::Null)?;
    on_points(&mut case, &ds.sample_points(n, seed), |p| {
        let f = CurvatureBundle::compute(&ds, p, cfg)?.fluid();
        let k = f.k.ok_or_else(|| Error::Inconsistent("de Sitter density vanishes".into()))?;
        Ok(vec![(k.abs(), "de Sitter k = 0".into())])
    });
    Ok(case)
}

/// Every closed-form channel of a metric against the computed value.
pub fn check_exact_channels(spec: &MetricSpec, n: usize, seed: u64, cfg: &StencilConfig, tol: f64) -> VerificationCase {
    let mut case = VerificationCase::new("exact-channels", &spec.name, tol);
    on_points(&mut case, &spec.sample_points(n, seed), |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let scale = snap.bundle.riemann.norm_sq(&snap.bundle.metrics, MetricChoice::Riemannian).abs();
        let mut out = Vec::new();
        for q in Quantity::ALL {
            let Some(exact) = spec.exact_value(q, p) else { continue };
            let Some(value) = computed_quantity(spec, &snap, q, 1e-6)? else {
                out.push((f64::INFINITY, format!("{} not computable", q.name())));
                continue;
            };
            // Relative above magnitude 1 and absolute below; curvature norms vanish only up to
            // finite-difference noise of the curvature scale.
            let floor = match q {
                Quantity::SchoutenNormSq | Quantity::WeylNormSq | Quantity::Kretschmann => scale.max(1.0) * 1e-6,
                _ => 1.0,
            };
            out.push((relative_residual(value, exact, floor), q.name().to_string()));
        }
        Ok(out)
    });
    case
}

fn spatial(t: &Tensor4, i: usize, j: usize) -> f64 {
    t.at2(i + 1, j + 1)
}

/// Covariant derivatives of the Weyl and Schouten fields from one shared sampler.
fn weyl_and_schouten_derivatives(
    spec: &MetricSpec,
    p: &Point,
    cfg: &StencilConfig,
    centre: &CurvatureBundle,
) -> Result<([Tensor4; 4], [Tensor4; 4])> {
    let nw = centre.weyl.components().len();
    let sampler = |q: &Point| -> Result<Vec<f64>> {
        let b = CurvatureBundle::compute(spec, q, cfg)?;
        let mut v = b.weyl.components().to_vec();
        v.extend_from_slice(b.schouten.components());
        Ok(v)
    };
    let coarse = cfg.coarse();
    let mut dw: [Tensor4; 4] = std::array::from_fn(|_| centre.weyl.clone());
    let mut da: [Tensor4; 4] = std::array::from_fn(|_| centre.schouten.clone());
    for c in 0..4 {
        let v = partial_vec(&sampler, p, &[c], &coarse)?;
        dw[c] = Tensor4::from_components(centre.weyl.variance(), v[..nw].to_vec())?;
        da[c] = Tensor4::from_components(centre.schouten.variance(), v[nw..].to_vec())?;
    }
    Ok((centre.covariant_derivative_of(&centre.weyl, &dw), centre.covariant_derivative_of(&centre.schouten, &da)))
}

/// Weyl decomposition and derivative identities: trace/reconstruction, block norms, foliated
/// Christoffels, E from the slice Ricci tensor, derivative formulas for W on pure-electric
/// points, the Cotton form of the Weyl evolution and the Weyl second Bianchi identity (on
/// the first `bianchi_points`).
pub fn check_weyl_derivative_identities(
    spec: &MetricSpec,
    points: &[Point],
    cfg: &StencilConfig,
    tol: f64,
    bianchi_points: usize,
) -> Vec<VerificationCase> {
    let name = &spec.name;
    let mut algebra = VerificationCase::new("trace-reconstruction", name, 1e-8);
    let mut chr = VerificationCase::new("foliated-christoffels", name, 1e-8);
    let mut wt = VerificationCase::new("electric-from-ricci", name, 1e-5);
    on_points(&mut algebra, points, |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let eb = snap.weyl_eb()?;
        let (trace, recon) = electric_trace_and_reconstruction(&snap.bundle, &snap.frame, &eb.electric);
        Ok(vec![(trace, "trace".into()), (recon, "reconstruction".into())])
    });
    on_points(&mut chr, points, |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let fol = foliated_christoffels(&snap.jet)?;
        let mut d = MaxDiff::default();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    d.push(snap.bundle.christoffel[a][b][c], fol[a][b][c]);
                }
            }
        }
        Ok(vec![(d.relative(), "Christoffel symbols".into())])
    });
    on_points(&mut wt, points, |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let s = snap.slice()?;
        let f = &snap.frame;
        let b = &snap.bundle;
        let e = snap.weyl_eb()?.electric;
        let (h, g, gi) = (f.h, f.g, f.g_inv);
        let hm = f.mean_curvature;
        let trace = b.stress_trace;
        let mut d = MaxDiff::default();
        let hh = h * gi * h;
        for i in 0..3 {
            for j in 0..3 {
                let rhs = s.ricci[(i, j)]
                    - 0.5 * spatial(&b.stress, i, j)
                    - (3.0 * s.scalar - 2.0 * trace) / 12.0 * g[(i, j)]
                    - (hm * hm - f.h_norm_sq()) / 4.0 * g[(i, j)]
                    + hm * h[(i, j)]
                    - hh[(i, j)];
                d.push(e[(i, j)], rhs);
            }
        }
        Ok(vec![(d.relative_floor(1e-2 * s.scalar.abs().max(hm * hm).max(f.h_norm_sq())), "E from slice Ricci".into())])
    });

    let mut normal = VerificationCase::new("weyl-normal-derivative", name, tol);
    let mut normal_alt = VerificationCase::new("weyl-normal-derivative-alt", name, tol);
    let mut tangential = VerificationCase::new("weyl-spatial-derivative", name, tol);
    let mut cotton_form = VerificationCase::new("weyl-evolution-cotton", name, tol);
    let mut bianchi = VerificationCase::new("weyl-bianchi", name, tol);
    let rows: Vec<(Point, Result<DerivativeResiduals>)> = points
        .par_iter()
        .enumerate()
        .map(|(idx, p)| (*p, derivative_residuals(spec, p, cfg, 1e-6, idx < bianchi_points)))
        .collect();
    for (p, row) in rows {
        match row {
            Ok(r) => {
                if let Some((a, b, c, d)) = r.electric {
                    normal.record(p, a, "D_T W_TiTj");
                    normal_alt.record(p, b, "D_T W_TiTj, spatial Weyl form");
                    tangential.record(p, c, "D_l W_ijkT");
                    cotton_form.record(p, d, "Weyl evolution with Cotton term");
                } else {
                    for case in [&mut normal, &mut normal_alt, &mut tangential, &mut cotton_form] {
                        case.skip(format!("{p}: not pure electric"));
                    }
                }
                if let Some(v) = r.bianchi {
                    bianchi.record(p, v, "Weyl second Bianchi");
                }
            }
            Err(e) => {
                for case in [&mut normal, &mut normal_alt, &mut tangential, &mut cotton_form, &mut bianchi] {
                    case.fail(p, e.to_string());
                }
            }
        }
    }
    vec![algebra, chr, wt, normal, normal_alt, tangential, cotton_form, bianchi]
}

struct DerivativeResiduals {
    electric: Option<(f64, f64, f64, f64)>,
    bianchi: Option<f64>,
}

fn derivative_residuals(
    spec: &MetricSpec,
    p: &Point,
    cfg: &StencilConfig,
    tol: f64,
    with_bianchi: bool,
) -> Result<DerivativeResiduals> {
    let snap = Snapshot::compute(spec, p, cfg)?;
    let class = classify(&snap.bundle, &snap.frame, tol)?;
    let electric = class.has(RegionClass::PureElectric);
    if !electric && !with_bianchi {
        return Ok(DerivativeResiduals { electric: None, bianchi: None });
    }
    let b = &snap.bundle;
    let (dw, da) = weyl_and_schouten_derivatives(spec, p, cfg, b)?;
    let cotton = cotton_from_derivative(&da);
    let f = &snap.frame;
    let n = f.lapse;
    let (h, g, gi) = (f.h, f.g, f.g_inv);
    let hm = f.mean_curvature;
    let e = snap.weyl_eb()?.electric;
    let c_t = Mat3::from_fn(|i, j| cotton.at3(i + 1, j + 1, 0) / n);
    let electric_res = if electric {
        let he = h * gi * e;
        let eh = e * gi * h;
        let hup = gi * h * gi;
        let h_dot_e = f.inner(&h, &e);
        let mut d_normal = MaxDiff::default();
        let mut d_alt = MaxDiff::default();
        for i in 0..3 {
            for j in 0..3 {
                let lhs = dw[0].at4(0, i + 1, 0, j + 1) / n.powi(3);
                let rhs =
                    2.0 * hm * e[(i, j)] - 2.0 * he[(i, j)] - eh[(i, j)] + h_dot_e * g[(i, j)] - 0.5 * c_t[(i, j)];
                d_normal.push(lhs, rhs);
                let mut hw = 0.0;
                for k in 0..3 {
                    for q in 0..3 {
                        hw += hup[(k, q)] * b.weyl.at4(k + 1, i + 1, q + 1, j + 1);
                    }
                }
                let alt = hm * e[(i, j)] - he[(i, j)] + hw - 0.5 * c_t[(i, j)];
                d_alt.push(lhs, alt);
            }
        }
        let mut d_tan = MaxDiff::default();
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let lhs = dw[l + 1].at4(i + 1, j + 1, k + 1, 0) / n;
                        let rhs = 2.0 * (h[(j, l)] * e[(i, k)] - h[(i, l)] * e[(j, k)]) + he[(l, j)] * g[(i, k)]
                            - he[(l, i)] * g[(j, k)];
                        d_tan.push(lhs, rhs);
                    }
                }
            }
        }
        let lhs = 0.5
            * time_rate(spec, p, cfg, |s| {
                Ok(vec![s.bundle.weyl.norm_sq(&s.bundle.metrics, MetricChoice::Lorentzian)])
            })?[0];
        let em = gi * e;
        let hmix = gi * h;
        let rhs = 16.0 * hm * (em * em).trace() - 24.0 * (hmix * em * em).trace() - 4.0 * f.inner(&c_t, &e);
        Some((
            d_normal.relative_floor(FD_FLOOR),
            d_alt.relative_floor(FD_FLOOR),
            d_tan.relative_floor(FD_FLOOR),
            relative_residual(lhs, rhs, FD_FLOOR),
        ))
    } else {
        None
    };
    let bianchi = with_bianchi.then(|| {
        let gm = b.metrics.gamma;
        let c = |a: usize, b: usize, c: usize| cotton.at3(a, b, c);
        let mut d = MaxDiff::default();
        for al in 0..4 {
            for be in 0..4 {
                for ga in 0..4 {
                    for de in 0..4 {
                        for et in 0..4 {
                            let lhs =
                                dw[et].at4(al, be, ga, de) + dw[ga].at4(al, be, de, et) + dw[de].at4(al, be, et, ga);
                            let rhs = 0.5
                                * (c(al, de, et) * gm[(be, ga)]
                                    + c(al, et, ga) * gm[(be, de)]
                                    + c(al, ga, de) * gm[(be, et)])
                                - 0.5
                                    * (c(be, de, et) * gm[(al, ga)]
                                        + c(be, et, ga) * gm[(al, de)]
                                        + c(be, ga, de) * gm[(al, et)]);
                            d.push(lhs, rhs);
                        }
                    }
                }
            }
        }
        d.relative_floor(FD_FLOOR)
    });
    Ok(DerivativeResiduals { electric: electric_res, bianchi })
}

/// Conformally flat slices g = e^{2 sigma} delta: umbilical, constant mean curvature in space,
/// and D_T S >= -tol wherever the stress is a perfect fluid.
pub fn check_conformal_class(spec: &MetricSpec, points: &[Point], cfg: &StencilConfig, tol: f64) -> VerificationCase {
    let mut case = VerificationCase::new("conformal-class", &spec.name, tol);
    let opts = EntropyOptions { tol, zeta: 1.0, stencil: *cfg };
    let rows: Vec<_> = points
        .par_iter()
        .map(|p| -> (Point, Result<(f64, f64, Option<f64>)>) {
            let run = || -> Result<(f64, f64, Option<f64>)> {
                let snap = Snapshot::compute(spec, p, cfg)?;
                let f = &snap.frame;
                let scale = f.mean_curvature.abs().max(1.0);
                let umbilic = f.traceless_norm() / scale;
                let sampler =
                    |q: &Point| -> Result<Vec<f64>> { Ok(vec![FrameData::compute(spec, q, cfg)?.mean_curvature]) };
                let mut grad = [0.0; 3];
                for (a, g) in grad.iter_mut().enumerate() {
                    *g = partial_vec(&sampler, p, &[a + 1], &cfg.coarse())?[0];
                }
                let grad_norm = {
                    let gvec = nalgebra::Vector3::from(grad);
                    (gvec.transpose() * f.g_inv * gvec)[(0, 0)].max(0.0).sqrt() / scale
                };
                let rate = if snap.bundle.fluid().is_perfect_fluid {
                    Some(
                        time_rate(spec, p, cfg, |s| {
                            Ok(vec![entropy_from_snapshot(spec, s, FluidChoice::Absent, &opts)?.density])
                        })?[0],
                    )
                } else {
                    None
                };
                Ok((umbilic, grad_norm, rate))
            };
            (*p, run())
        })
        .collect();
    for (p, row) in rows {
        match row {
            Ok((umbilic, grad, rate)) => {
                case.record(p, umbilic, "traceless h");
                case.record(p, grad, "spatial gradient of H");
                match rate {
                    Some(r) => case.require(p, r >= -tol, format!("D_T S = {r:e}")),
                    None => case.skip(format!("{p}: stress is not a perfect fluid, D_T S sign not asserted")),
                }
            }
            Err(e) => case.fail(p, e.to_string()),
        }
    }
    case
}

/// Declared classes confirmed at seeded points, and labels unchanged under x -> 2x.
pub fn check_classification(
    spec: &MetricSpec,
    n: usize,
    seed: u64,
    cfg: &StencilConfig,
    tol: f64,
) -> Result<VerificationCase> {
    let mut case = VerificationCase::new("classification", &spec.name, 0.0);
    let scaled = spec.rescaled(2.0)?;
    on_points(&mut case, &spec.sample_points(n, seed), |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let c = classify(&snap.bundle, &snap.frame, tol)?;
        let mut out = Vec::new();
        let mut need =
            |ok: bool, what: &str| out.push((if ok { 0.0 } else { f64::INFINITY }, format!("{what}: {:?}", c.labels)));
        for d in &spec.declared {
            match d {
                DeclaredClass::Flat => need(c.has(RegionClass::Flat), "declared flat"),
                DeclaredClass::Vacuum => need(c.has(RegionClass::Vacuum), "declared vacuum"),
                DeclaredClass::ConformallyFlat => {
                    need(c.has(RegionClass::ConformallyFlat), "declared conformally flat")
                }
                DeclaredClass::PureElectric => need(
                    c.has(RegionClass::PureElectric) || c.has(RegionClass::ConformallyFlat),
                    "declared pure electric",
                ),
                DeclaredClass::Static => {
                    let f = &snap.frame;
                    need(f.h_norm_sq().max(0.0).sqrt() <= tol, "declared static (h = 0)")
                }
            }
        }
        let q = Point::new(p.t, p.x.map(|v| 2.0 * v));
        let s2 = Snapshot::compute(&scaled, &q, cfg)?;
        let c2 = classify(&s2.bundle, &s2.frame, tol)?;
        need(c2.labels == c.labels, "labels under x -> 2x");
        Ok(out)
    });
    Ok(case)
}

fn record_region(case: &mut VerificationCase, p: Point, what: &str, r: Result<f64>) {
    match r {
        Ok(v) => case.record(p, v, what),
        Err(e) => case.fail(p, format!("{what}: {e}")),
    }
}

/// Region entropies: Minkowski unit cube, FLRW ball, Schwarzschild box and an LTB box,
/// with the upper bound checked on each.
pub fn check_region_entropy(cfg: &StencilConfig, tol: f64) -> Result<VerificationCase> {
    let mut case = VerificationCase::new("region-entropy", "catalog", 1e-6);
    let opts = EntropyOptions { tol, zeta: 1.0, stencil: *cfg };
    let mink = lookup("minkowski", &serde_json::Value::Null)?;
    let cube = RegionSpec { threshold: 1e-10, ..RegionSpec::unit_cube() };
    let origin = Point::new(0.0, [0.5; 3]);
    record_region(
        &mut case,
        origin,
        "Minkowski cube S_U = 6",
        (|| {
            let r = region_entropy(&mink, &cube, 0.0, FluidChoice::Auto, &opts)?;
            let bound = if r.bound_holds && r.area_bound_holds { 0.0 } else { f64::INFINITY };
            Ok(((r.s_u - 6.0).abs() + bound).max(r.quad_error * 1e4))
        })(),
    );
    let eds = lookup("eds", &serde_json::Value::Null)?;
    let ball = RegionSpec { order: 6, ..RegionSpec::ball([0.0; 3], 1.0) };
    record_region(
        &mut case,
        Point::new(1.0, [0.0; 3]),
        "FLRW ball S_U = 0",
        (|| {
            let r = region_entropy(&eds, &ball, 1.0, FluidChoice::Auto, &opts)?;
            let bound = if r.bound_holds { 0.0 } else { f64::INFINITY };
            Ok(r.s_u.abs() + bound)
        })(),
    );
    let schw = lookup("schwarzschild", &serde_json::Value::Null)?;
    let sbox =
        RegionSpec { order: 8, ..RegionSpec::new(RegionShape::Box { lo: [4.0, 1.0, 0.0], hi: [5.0, 2.0, 1.0] }) };
    record_region(
        &mut case,
        Point::new(0.5, sbox.center()),
        "Schwarzschild box S_U = Area",
        (|| {
            let r = region_entropy(&schw, &sbox, 0.5, FluidChoice::Auto, &opts)?;
            let bound = if r.bound_holds { 0.0 } else { f64::INFINITY };
            Ok(rel(r.s_u, r.area) + bound)
        })(),
    );
    let ltb = lookup("ltb", &serde_json::Value::Null)?;
    let lbox =
        RegionSpec { order: 6, ..RegionSpec::new(RegionShape::Box { lo: [1.0, 1.2, 0.0], hi: [1.5, 1.9, 0.7] }) };
    for t in [1.0, 1.5, 2.0] {
        record_region(
            &mut case,
            Point::new(t, lbox.center()),
            "LTB box bound",
            (|| {
                let r = region_entropy(&ltb, &lbox, t, FluidChoice::Auto, &opts)?;
                Ok(if r.bound_holds && r.area_bound_holds { 0.0 } else { f64::INFINITY })
            })(),
        );
    }
    Ok(case)
}

/// Extremal classes: Schwarzschild box is maximal static vacuum, FLRW ball is minimal.
pub fn check_extremal(cfg: &StencilConfig, tol: f64) -> Result<VerificationCase> {
    let mut case = VerificationCase::new("extremal-classification", "catalog", 1e-5);
    let opts = EntropyOptions { tol, zeta: 1.0, stencil: *cfg };
    let schw = lookup("schwarzschild", &serde_json::Value::Null)?;
    let sbox = RegionSpec::new(RegionShape::Box { lo: [4.0, 1.0, 0.0], hi: [5.0, 2.0, 1.0] });
    let p = Point::new(0.5, sbox.center());
    match classify_extremal(&schw, &sbox, 0.5, tol, &opts) {
        Ok(r) => {
            case.require(
                p,
                r.class == ExtremalClass::MaximalStaticVacuumCandidate,
                format!("Schwarzschild class {:?}", r.class),
            );
            case.record(p, r.static_system, "static system");
            case.record(p, r.laplacian, "lapse Laplacian");
            case.record(p, r.second_fundamental_form, "second fundamental form");
        }
        Err(e) => case.fail(p, e.to_string()),
    }
    let eds = lookup("eds", &serde_json::Value::Null)?;
    let ball = RegionSpec::ball([0.0; 3], 1.0);
    let p = Point::new(1.0, [0.0; 3]);
    match classify_extremal(&eds, &ball, 1.0, tol, &opts) {
        Ok(r) => case.require(p, r.class == ExtremalClass::MinimalFLRWCandidate, format!("FLRW class {:?}", r.class)),
        Err(e) => case.fail(p, e.to_string()),
    }
    Ok(case)
}

/// s_crit at alpha = 0 for k in {4/3, 1, 0}, and s_crit = 0 at alpha = 1/3.
pub fn check_s_crit_table() -> VerificationCase {
    let mut case = VerificationCase::new("s-crit-table", "arithmetic", 1e-12);
    let origin = Point::new(0.0, [0.0; 3]);
    let r2 = 2f64.sqrt();
    for (k, want) in [(4.0 / 3.0, 11.0 * r2 / 12.0), (1.0, r2 / 4.0 + 2.0 / 5f64.sqrt()), (0.0, r2 / 4.0)] {
        case.record(origin, (s_crit(k, 0.0) - want).abs(), format!("k = {k}"));
    }
    for k in [0.0, 0.5, 1.0, 4.0 / 3.0] {
        case.require(origin, s_crit(k, 1.0 / 3.0) == 0.0, format!("alpha = 1/3, k = {k}"));
    }
    case
}

/// D_T M = k H M on fluid metrics, with k from the stress tensor.
pub fn check_mass_evolution(spec: &MetricSpec, points: &[Point], cfg: &StencilConfig, tol: f64) -> VerificationCase {
    let mut case = VerificationCase::new("mass-evolution", &spec.name, tol);
    on_points(&mut case, points, |p| {
        let snap = Snapshot::compute(spec, p, cfg)?;
        let f = snap.bundle.fluid();
        let Some(k) = f.k else { return Err(Error::Precondition("density vanishes".into())) };
        if !f.is_perfect_fluid {
            return Err(Error::Precondition("stress is not a perfect fluid".into()));
        }
        let lhs = time_rate_of_field(spec, p, &cfg.coarse(), |q| {
            Ok(CurvatureBundle::compute(spec, q, cfg)?.fluid().density)
        })?;
        let rhs = k * snap.frame.mean_curvature * f.density;
        Ok(vec![(relative_residual(lhs, rhs, FD_FLOOR), "D_T M = k H M".into())])
    });
    case
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn s_crit_table_passes() {
        assert!(check_s_crit_table().pass);
    }

    #[test]
    fn kasner_identities() {
        let spec = lookup("kasner", &Value::Null).unwrap();
        let case = check_curvature_identities(&spec, 5, 1, &StencilConfig::default(), 1e-8);
        assert!(case.pass, "{case:?}");
    }

    #[test]
    fn ltb_weyl_derivative_identities() {
        let spec = lookup("ltb", &Value::Null).unwrap();
        let pts = spec.sample_points(2, 3);
        for c in check_weyl_derivative_identities(&spec, &pts, &StencilConfig::default(), 1e-4, 1) {
            eprintln!("{} {} {:e} {:?}", c.case, c.pass, c.max_residual, c.witnesses.first());
        }
    }
}
