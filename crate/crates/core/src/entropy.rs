//! Weyl entropy densities, region entropies and extremal-region classifiers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{FluidParams, MetricSpec};
use crate::error::{Error, Result};
use crate::foliation::{alpha_expansion, classify, RegionClass, Snapshot};
use crate::numdiff::{partial_vec, StencilConfig};
use crate::point::Point;
use crate::quadrature::{measures, pairwise_sum, RegionSpec};
use crate::tensor::{scaled_tol, MetricChoice};

/// Critical density sqrt(1-3a) (sqrt2/4 + 2k sqrt((1-3a)/(9k^2-12k+8))).
pub fn s_crit(k: f64, alpha: f64) -> f64 {
    let c = 1.0 - 3.0 * alpha;
    if c <= 0.0 {
        return 0.0;
    }
    c.sqrt() * (2f64.sqrt() / 4.0 + 2.0 * k * (c / (9.0 * k * k - 12.0 * k + 8.0)).sqrt())
}

/// |A|^2 of a k-perfect fluid with density M: (9k^2 - 12k + 8) M^2 / 3.
pub fn fluid_a_norm_sq(k: f64, density: f64) -> f64 {
    (9.0 * k * k - 12.0 * k + 8.0) * density * density / 3.0
}

/// How fluid parameters for s_crit are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluidChoice {
    /// k from the metric's fluid data or the stress tensor, alpha from the local expansion.
    Auto,
    Fixed(FluidParams),
    /// No fluid: s_crit is not applicable.
    Absent,
}

/// Tolerance and normalization knobs shared by all entropy computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyOptions {
    /// Threshold below which curvature norms count as zero (relative to |R|).
    pub tol: f64,
    /// Multiplicative constant in front of the region entropy.
    pub zeta: f64,
    pub stencil: StencilConfig,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self { tol: 1e-6, zeta: 1.0, stencil: StencilConfig::default() }
    }
}

/// Pointwise entropy data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EntropyPoint {
    pub point: Point,
    pub s: f64,
    /// |W|/|A| in the companion metric; absent where |A| vanishes.
    pub s_bar: Option<f64>,
    /// |A| = 0 while |W| does not.
    pub s_bar_infinite: bool,
    /// Absent where no fluid applies.
    pub s_crit: Option<f64>,
    /// s sqrt(g).
    #[serde(rename = "S")]
    pub density: f64,
    /// (s + s_crit) sqrt(g), equal to `density` without a fluid.
    #[serde(rename = "Spf")]
    pub density_pf: f64,
    /// sigma |W|_bar with sigma = -1 on magnetic points and +1 otherwise.
    pub signed_w: f64,
    pub weyl_norm_bar: f64,
    pub a_norm_bar: f64,
    pub riemann_norm_bar: f64,
    pub sqrtg: f64,
    pub lapse: f64,
    pub mean_curvature: f64,
    pub fluid: Option<FluidParams>,
}

pub fn entropy_point(spec: &MetricSpec, p: &Point, fluid: FluidChoice, opts: &EntropyOptions) -> Result<EntropyPoint> {
    let snap = Snapshot::compute(spec, p, &opts.stencil)?;
    entropy_from_snapshot(spec, &snap, fluid, opts)
}

/// Fluid parameters at a point under the `Auto` rule.
pub fn auto_fluid(spec: &MetricSpec, snap: &Snapshot, tol: f64) -> Result<Option<FluidParams>> {
    let k = match &spec.fluid {
        Some(meta) => Some(meta.eos_k.value(&snap.frame.point)?),
        None => {
            let f = snap.bundle.fluid();
            if f.is_perfect_fluid && !f.is_vacuum {
                f.k
            } else {
                None
            }
        }
    };
    let Some(k) = k else { return Ok(None) };
    let exp = alpha_expansion(&snap.frame, tol)?;
    Ok(exp.alpha_max.map(|alpha| FluidParams::constant(k, alpha)))
}

pub fn entropy_from_snapshot(
    spec: &MetricSpec,
    snap: &Snapshot,
    fluid: FluidChoice,
    opts: &EntropyOptions,
) -> Result<EntropyPoint> {
    let b = &snap.bundle;
    let r = MetricChoice::Riemannian;
    let riemann = b.riemann.norm_sq(&b.metrics, r).max(0.0).sqrt();
    let weyl = b.weyl.norm_sq(&b.metrics, r).max(0.0).sqrt();
    let a_norm = b.a_tensor.norm_sq(&b.metrics, r).max(0.0).sqrt();
    let tol = opts.tol;
    let rel = scaled_tol(tol, riemann);
    let weyl_zero = weyl < rel;
    let a_zero = a_norm < rel;
    let p = snap.frame.point;
    let s = if riemann < tol {
        if weyl >= tol {
            return Err(Error::Inconsistent(format!("|R| = {riemann:e} below tolerance while |W| = {weyl:e} at {p}")));
        }
        1.0
    } else if a_zero {
        1.0
    } else if weyl_zero {
        0.0
    } else {
        (weyl / riemann).clamp(0.0, 1.0)
    };
    let (s_bar, s_bar_infinite) = match (weyl_zero || riemann < tol, a_zero || riemann < tol) {
        (_, false) => (Some(if weyl_zero { 0.0 } else { weyl / a_norm }), false),
        (false, true) => (None, true),
        (true, true) => (None, false),
    };
    let params = match fluid {
        FluidChoice::Auto => auto_fluid(spec, snap, tol)?,
        FluidChoice::Fixed(f) => Some(f),
        FluidChoice::Absent => None,
    };
    let crit = params.map(|f| s_crit(f.k, f.alpha));
    let sqrtg = snap.frame.sqrtg;
    let class = classify(b, &snap.frame, tol)?;
    let sigma = if class.has(RegionClass::PureMagnetic) { -1.0 } else { 1.0 };
    Ok(EntropyPoint {
        point: p,
        s,
        s_bar,
        s_bar_infinite,
        s_crit: crit,
        density: s * sqrtg,
        density_pf: (s + crit.unwrap_or(0.0)) * sqrtg,
        signed_w: sigma * weyl,
        weyl_norm_bar: weyl,
        a_norm_bar: a_norm,
        riemann_norm_bar: riemann,
        sqrtg,
        lapse: snap.frame.lapse,
        mean_curvature: snap.frame.mean_curvature,
        fluid: params,
    })
}

/// Region entropies at one time with their refinement error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RegionEntropy {
    pub t: f64,
    #[serde(rename = "S_U")]
    pub s_u: f64,
    #[serde(rename = "Spf_U")]
    pub spf_u: f64,
    pub area: f64,
    pub vol: f64,
    /// zeta Area (1 + sup s_crit).
    pub bound: f64,
    /// Largest change of S_U, Spf_U, area or vol between the coarse and fine rules.
    pub quad_error: f64,
    pub sup_s_crit: Option<f64>,
    pub min_boundary_lapse: f64,
    /// The lapse approaches zero somewhere on the boundary.
    pub boundary_lapse_vanishes: bool,
    /// S_U <= zeta Area within the quadrature error.
    pub area_bound_holds: bool,
    /// Spf_U <= bound within the quadrature error.
    pub bound_holds: bool,
}

struct Sums {
    s: f64,
    spf: f64,
    sup_crit: Option<f64>,
}

fn integrate(
    spec: &MetricSpec,
    region: &RegionSpec,
    t: f64,
    panels: usize,
    fluid: FluidChoice,
    opts: &EntropyOptions,
) -> Result<Sums> {
    let nodes = region.volume_nodes(panels);
    let pts: Vec<EntropyPoint> =
        nodes.par_iter().map(|n| entropy_point(spec, &Point::new(t, n.x), fluid, opts)).collect::<Result<_>>()?;
    let s: Vec<f64> = nodes.iter().zip(&pts).map(|(n, e)| n.weight * e.density).collect();
    let spf: Vec<f64> = nodes.iter().zip(&pts).map(|(n, e)| n.weight * e.density_pf).collect();
    let sup_crit = pts.iter().filter_map(|e| e.s_crit).fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))));
    Ok(Sums { s: pairwise_sum(&s), spf: pairwise_sum(&spf), sup_crit })
}

/// Averaged region entropy zeta (Area/Vol) times the integral of the density.
pub fn region_entropy(
    spec: &MetricSpec,
    region: &RegionSpec,
    t: f64,
    fluid: FluidChoice,
    opts: &EntropyOptions,
) -> Result<RegionEntropy> {
    region.validate()?;
    let (n0, n1) = (region.panels, 2 * region.panels);
    let m0 = measures(spec, region, t, n0)?;
    let m1 = measures(spec, region, t, n1)?;
    let c = integrate(spec, region, t, n0, fluid, opts)?;
    let f = integrate(spec, region, t, n1, fluid, opts)?;
    let z = opts.zeta;
    let value = |m: &crate::quadrature::Measures, s: f64| z * m.area / m.vol * s;
    let (s_u, spf_u) = (value(&m1, f.s), value(&m1, f.spf));
    let diffs = [
        (s_u - value(&m0, c.s)).abs() / s_u.abs().max(1.0),
        (spf_u - value(&m0, c.spf)).abs() / spf_u.abs().max(1.0),
        (m1.area - m0.area).abs() / m1.area.abs().max(1.0),
        (m1.vol - m0.vol).abs() / m1.vol.abs().max(1.0),
    ];
    let quad_error = diffs.iter().fold(0.0f64, |a, b| a.max(*b));
    if quad_error > region.threshold {
        return Err(Error::QuadratureNotConverged { estimate: quad_error, threshold: region.threshold });
    }
    let bound = z * m1.area * (1.0 + f.sup_crit.unwrap_or(0.0));
    let slack = quad_error * spf_u.abs().max(1.0) + opts.tol * bound.abs().max(1.0);
    let min_lapse = m1.min_boundary_lapse.min(m0.min_boundary_lapse);
    Ok(RegionEntropy {
        t,
        s_u,
        spf_u,
        area: m1.area,
        vol: m1.vol,
        bound,
        quad_error,
        sup_s_crit: f.sup_crit,
        min_boundary_lapse: min_lapse,
        boundary_lapse_vanishes: min_lapse < opts.tol,
        area_bound_holds: s_u <= z * m1.area + slack,
        bound_holds: spf_u <= bound + slack,
    })
}

/// D_T(Area/Vol) of the region, with D_T = N^{-1} d_t and N taken at the region's centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AreaVolumeTrend {
    pub ratio: f64,
    pub d_t_ratio: f64,
    /// Whether D_T(Area/Vol) >= -tol, the hypothesis needed for monotonicity in the region.
    pub non_decreasing: bool,
}

pub fn area_vol_monotonicity(
    spec: &MetricSpec,
    region: &RegionSpec,
    t: f64,
    opts: &EntropyOptions,
) -> Result<AreaVolumeTrend> {
    region.validate()?;
    let panels = 2 * region.panels;
    let ratio_at = |q: &Point| -> Result<Vec<f64>> {
        let m = measures(spec, region, q.t, panels)?;
        Ok(vec![m.area / m.vol])
    };
    let centre = Point::new(t, region.center());
    let ratio = ratio_at(&centre)?[0];
    let lapse = spec.lapse_at(&centre)?;
    let d = partial_vec(&ratio_at, &centre, &[0], &opts.stencil)?[0] / lapse;
    Ok(AreaVolumeTrend { ratio, d_t_ratio: d, non_decreasing: d >= -opts.tol })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtremalClass {
    MaximalStaticVacuumCandidate,
    MinimalFLRWCandidate,
    Interior,
}

/// Largest residuals over the sample grid that decide the extremal class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtremalReport {
    pub class: ExtremalClass,
    /// |Ric|_bar / |R|_bar.
    pub ricci: f64,
    /// |h| relative to the spatial curvature scale.
    pub second_fundamental_form: f64,
    /// N R_ij - nabla_i nabla_j N relative to its terms.
    pub static_system: f64,
    /// Laplacian of N relative to |nabla nabla N|.
    pub laplacian: f64,
    /// |W|_bar / |R|_bar.
    pub weyl: f64,
    /// 1/3 - alphaMax (infinite where the slice is not expanding).
    pub umbilic_gap: f64,
    pub samples: usize,
}

/// Classifies a region at time t as a candidate for maximal or minimal entropy,
/// sampling the coarse volume nodes.
pub fn classify_extremal(
    spec: &MetricSpec,
    region: &RegionSpec,
    t: f64,
    tol: f64,
    opts: &EntropyOptions,
) -> Result<ExtremalReport> {
    region.validate()?;
    let nodes = region.volume_nodes(region.panels);
    let rows: Vec<[f64; 6]> = nodes
        .par_iter()
        .map(|n| {
            let snap = Snapshot::compute(spec, &Point::new(t, n.x), &opts.stencil)?;
            let b = &snap.bundle;
            let f = &snap.frame;
            let r = MetricChoice::Riemannian;
            let riemann = b.riemann.norm_sq(&b.metrics, r).max(0.0).sqrt();
            let scale = riemann.max(tol);
            let ricci = b.ricci.norm_sq(&b.metrics, r).max(0.0).sqrt() / scale;
            let weyl = b.weyl.norm_sq(&b.metrics, r).max(0.0).sqrt() / scale;
            let slice = snap.slice()?;
            let h = f.h_norm_sq().max(0.0).sqrt() / scale.sqrt().max(tol);
            let nr = slice.ricci * f.lapse;
            let diff = nr - slice.lapse_hessian;
            let st_scale = f.norm_sq(&nr).sqrt().max(f.norm_sq(&slice.lapse_hessian).sqrt()).max(tol);
            let static_system = f.norm_sq(&diff).max(0.0).sqrt() / st_scale;
            let lap = (f.g_inv * slice.lapse_hessian).trace().abs() / f.norm_sq(&slice.lapse_hessian).sqrt().max(tol);
            let gap = alpha_expansion(f, tol)?.alpha_max.map_or(f64::INFINITY, |a| 1.0 / 3.0 - a);
            Ok([ricci, h, static_system, lap, weyl, gap])
        })
        .collect::<Result<_>>()?;
    let worst = |i: usize| rows.iter().fold(0.0f64, |m, r| m.max(r[i]));
    let (ricci, h, st, lap, weyl, gap) = (worst(0), worst(1), worst(2), worst(3), worst(4), worst(5));
    let class = if ricci < tol && h < tol && st < tol && lap < tol {
        ExtremalClass::MaximalStaticVacuumCandidate
    } else if weyl < tol && gap < tol {
        ExtremalClass::MinimalFLRWCandidate
    } else {
        ExtremalClass::Interior
    };
    Ok(ExtremalReport {
        class,
        ricci,
        second_fundamental_form: h,
        static_system: st,
        laplacian: lap,
        weyl,
        umbilic_gap: gap,
        samples: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use crate::quadrature::RegionShape;
    use serde_json::Value;

    #[test]
    fn s_crit_table() {
        assert!((s_crit(4.0 / 3.0, 0.0) - 11.0 * 2f64.sqrt() / 12.0).abs() < 1e-12);
        assert!((s_crit(1.0, 0.0) - (2f64.sqrt() / 4.0 + 2.0 / 5f64.sqrt())).abs() < 1e-12);
        assert!((s_crit(0.0, 0.0) - 2f64.sqrt() / 4.0).abs() < 1e-12);
        assert_eq!(s_crit(1.0, 1.0 / 3.0), 0.0);
    }

    #[test]
    fn catalog_entropy_points() {
        let opts = EntropyOptions::default();
        let eds = lookup("eds", &Value::Null).unwrap();
        let e = entropy_point(&eds, &Point::new(1.0, [0.1, 0.2, 0.3]), FluidChoice::Auto, &opts).unwrap();
        assert_eq!((e.s, e.s_crit, e.density_pf), (0.0, Some(0.0), 0.0));
        assert_eq!(e.s_bar, Some(0.0));
        let schw = lookup("schwarzschild", &Value::Null).unwrap();
        let e = entropy_point(&schw, &Point::new(0.0, [4.0, 1.0, 0.3]), FluidChoice::Auto, &opts).unwrap();
        assert_eq!(e.s, 1.0);
        assert!(e.s_bar_infinite && e.s_crit.is_none());
        assert_eq!(e.density_pf, e.density);
        let mink = lookup("minkowski", &Value::Null).unwrap();
        let e = entropy_point(&mink, &Point::new(0.0, [0.0; 3]), FluidChoice::Auto, &opts).unwrap();
        assert_eq!(e.s, 1.0);
        assert!(e.s_bar.is_none() && !e.s_bar_infinite);
    }

    #[test]
    fn ltb_entropy_relation() {
        let ltb = lookup("ltb", &Value::Null).unwrap();
        let e = entropy_point(&ltb, &Point::new(1.5, [1.0, 1.2, 0.4]), FluidChoice::Auto, &EntropyOptions::default())
            .unwrap();
        let sb = e.s_bar.unwrap();
        assert!(e.s > 0.0 && e.s < 1.0);
        assert!((e.s * e.s * (sb * sb + 1.0) - sb * sb).abs() < 1e-12);
        let f = e.fluid.unwrap();
        assert!((f.k - 1.0).abs() < 1e-12 && f.alpha > 0.0 && f.alpha < 1.0 / 3.0);
    }

    #[test]
    fn minkowski_cube_entropy() {
        let mink = lookup("minkowski", &Value::Null).unwrap();
        let r = region_entropy(&mink, &RegionSpec::unit_cube(), 0.0, FluidChoice::Auto, &EntropyOptions::default())
            .unwrap();
        assert!((r.s_u - 6.0).abs() < 1e-10 && r.quad_error < 1e-10, "{r:?}");
        assert!(r.area_bound_holds && r.bound_holds);
    }

    #[test]
    fn static_trend_is_zero() {
        let schw = lookup("schwarzschild", &Value::Null).unwrap();
        let region = RegionSpec::new(RegionShape::Box { lo: [4.0, 1.0, 0.0], hi: [5.0, 2.0, 1.0] });
        let tr = area_vol_monotonicity(&schw, &region, 0.5, &EntropyOptions::default()).unwrap();
        assert_eq!(tr.d_t_ratio, 0.0);
        assert!(tr.non_decreasing);
    }

    #[test]
    fn eds_ball_trend_decreases() {
        let eds = lookup("eds", &Value::Null).unwrap();
        let region = RegionSpec { order: 6, ..RegionSpec::ball([0.0; 3], 1.0) };
        let tr = area_vol_monotonicity(&eds, &region, 1.0, &EntropyOptions::default()).unwrap();
        // d_t (3 / (t^{2/3} r0)) at t = 1.
        assert!((tr.ratio - 3.0).abs() < 1e-9);
        assert!((tr.d_t_ratio + 2.0).abs() < 1e-6, "{tr:?}");
        assert!(!tr.non_decreasing);
    }
}
