//! ADM data of the t = const slicing and the electric/magnetic Weyl split.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::catalog::MetricSpec;
use crate::curvature::{spatial_christoffels, CurvatureBundle};
use crate::error::{Error, Result};
use crate::jet::MetricJet;
use crate::numdiff::{partial_vec, StencilConfig};
use crate::point::Point;
use crate::tensor::{block_norms, scaled_tol, BlockNorms, Mat3, MetricChoice, Tensor4};

/// Pointwise slicing data: lapse, spatial metric and second fundamental form
/// h_ij = -(1/2N) d_t g_ij.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameData {
    pub point: Point,
    pub lapse: f64,
    pub g: Mat3,
    pub g_inv: Mat3,
    pub sqrtg: f64,
    pub h: Mat3,
    pub mean_curvature: f64,
    pub h_traceless: Mat3,
}

impl FrameData {
    pub fn from_jet(jet: &MetricJet) -> Result<Self> {
        let g = jet.g;
        let g_inv = g.try_inverse().ok_or(Error::SingularMetric(jet.point))?;
        let det = g.determinant();
        if !(det > 0.0) {
            return Err(Error::SingularMetric(jet.point));
        }
        let h = -jet.dg[0] / (2.0 * jet.lapse);
        let mean_curvature = (g_inv * h).trace();
        let h_traceless = h - g * (mean_curvature / 3.0);
        Ok(Self { point: jet.point, lapse: jet.lapse, g, g_inv, sqrtg: det.sqrt(), h, mean_curvature, h_traceless })
    }

    pub fn compute(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<Self> {
        Self::from_jet(&MetricJet::compute(spec, p, cfg)?)
    }

    /// |S|^2 = g^{ik} g^{jl} S_ij S_kl for a spatial 2-tensor.
    pub fn norm_sq(&self, s: &Mat3) -> f64 {
        (self.g_inv * s * self.g_inv).component_mul(s).sum()
    }

    /// g^{ik} g^{jl} a_ij b_kl.
    pub fn inner(&self, a: &Mat3, b: &Mat3) -> f64 {
        (self.g_inv * a * self.g_inv).component_mul(b).sum()
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.norm_sq(&self.h)
    }

    pub fn traceless_norm(&self) -> f64 {
        self.norm_sq(&self.h_traceless).max(0.0).sqrt()
    }

    pub fn block_norms(&self, t: &Tensor4) -> Result<BlockNorms> {
        block_norms(t, self.lapse, &self.g_inv)
    }

    /// Eigenvalues of h relative to g (of the mixed tensor h^i_j), ascending.
    pub fn relative_eigenvalues(&self) -> Result<[f64; 3]> {
        let chol = self.g.cholesky().ok_or(Error::SingularMetric(self.point))?;
        let l_inv = chol.l().try_inverse().ok_or(Error::SingularMetric(self.point))?;
        let m = l_inv * self.h * l_inv.transpose();
        let sym = (m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok([ev[0], ev[1], ev[2]])
    }
}

/// Everything computed at one point: jet, curvature and slicing data.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub jet: MetricJet,
    pub bundle: CurvatureBundle,
    pub frame: FrameData,
}

impl Snapshot {
    pub fn compute(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<Self> {
        let jet = MetricJet::compute(spec, p, cfg)?;
        let bundle = CurvatureBundle::from_jet(&jet)?;
        let frame = FrameData::from_jet(&jet)?;
        Ok(Self { jet, bundle, frame })
    }

    pub fn weyl_eb(&self) -> Result<WeylEB> {
        WeylEB::new(&self.bundle, &self.frame)
    }

    pub fn slice(&self) -> Result<SliceGeometry> {
        SliceGeometry::from_jet(&self.jet, &self.frame)
    }
}

/// Intrinsic and extrinsic derivatives of the slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGeometry {
    /// Spatial Christoffels, upper index first.
    pub christoffel: [[[f64; 3]; 3]; 3],
    /// All-lower spatial Riemann tensor R_ijkl.
    pub riemann: [[[[f64; 3]; 3]; 3]; 3],
    pub ricci: Mat3,
    pub scalar: f64,
    /// `dh_dt` = partial_t h_ij.
    pub dh_dt: Mat3,
    /// `cov_h[k]` = nabla_k h_ij.
    pub cov_h: [Mat3; 3],
    /// nabla_i nabla_j N.
    pub lapse_hessian: Mat3,
}

impl SliceGeometry {
    pub fn from_jet(jet: &MetricJet, frame: &FrameData) -> Result<Self> {
        let gi = frame.g_inv;
        let g = frame.g;
        let n = jet.lapse;
        let chr = spatial_christoffels(&gi, &jet.dg);
        let mut riemann = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        let dd = |x: usize, y: usize, i: usize, j: usize| jet.ddg[x + 1][y + 1][(i, j)];
                        let second = 0.5 * (dd(b, c, a, d) + dd(a, d, b, c) - dd(a, c, b, d) - dd(b, d, a, c));
                        let mut quad = 0.0;
                        for e in 0..3 {
                            for f in 0..3 {
                                quad += g[(e, f)] * (chr[e][b][c] * chr[f][a][d] - chr[e][b][d] * chr[f][a][c]);
                            }
                        }
                        riemann[a][b][c][d] = second + quad;
                    }
                }
            }
        }
        let ricci = Mat3::from_fn(|b, d| {
            let mut s = 0.0;
            for a in 0..3 {
                for c in 0..3 {
                    s += gi[(a, c)] * riemann[a][b][c][d];
                }
            }
            s
        });
        let scalar = (gi * ricci).trace();
        // partial_c h_ij = -(1/2N) d_c d_t g_ij + (d_c N / 2N^2) d_t g_ij
        let dh: [Mat3; 4] =
            std::array::from_fn(|c| -jet.ddg[c][0] / (2.0 * n) + jet.dg[0] * (jet.d_lapse[c] / (2.0 * n * n)));
        let h = frame.h;
        let cov_h: [Mat3; 3] = std::array::from_fn(|k| {
            Mat3::from_fn(|i, j| {
                let mut v = dh[k + 1][(i, j)];
                for e in 0..3 {
                    v -= chr[e][k][i] * h[(e, j)] + chr[e][k][j] * h[(i, e)];
                }
                v
            })
        });
        let lapse_hessian = Mat3::from_fn(|i, j| {
            let mut v = jet.dd_lapse[i + 1][j + 1];
            for k in 0..3 {
                v -= chr[k][i][j] * jet.d_lapse[k + 1];
            }
            v
        });
        Ok(Self { christoffel: chr, riemann, ricci, scalar, dh_dt: dh[0], cov_h, lapse_hessian })
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff.abs() / scaled_tol(1.0, scale)
}

/// Residuals of the Gauss, Codazzi and normal-normal (Ricci) relations, relative
/// to the size of the terms involved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussCodazzi {
    pub gauss: f64,
    pub codazzi: f64,
    pub normal: f64,
}

pub fn gauss_codazzi_residuals(snap: &Snapshot) -> Result<GaussCodazzi> {
    let s = snap.slice()?;
    let f = &snap.frame;
    let r = &snap.bundle.riemann;
    let n = f.lapse;
    let (h, gi) = (f.h, f.g_inv);
    let hh = h * gi * h;
    let (mut gauss, mut gscale) = (0.0f64, 0.0f64);
    let (mut codazzi, mut cscale) = (0.0f64, 0.0f64);
    let (mut normal, mut nscale) = (0.0f64, 0.0f64);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let lhs = r.at4(i + 1, j + 1, k + 1, l + 1);
                    let rhs = s.riemann[i][j][k][l] + h[(i, k)] * h[(j, l)] - h[(i, l)] * h[(j, k)];
                    gauss = gauss.max((lhs - rhs).abs());
                    gscale = gscale.max(lhs.abs()).max(rhs.abs());
                }
                let lhs = r.at4(0, i + 1, j + 1, k + 1) / n;
                let rhs = s.cov_h[j][(i, k)] - s.cov_h[k][(i, j)];
                codazzi = codazzi.max((lhs - rhs).abs());
                cscale = cscale.max(lhs.abs()).max(rhs.abs());
            }
            let lhs = r.at4(0, i + 1, 0, j + 1) / n;
            let rhs = s.dh_dt[(i, j)] + n * hh[(i, j)] + s.lapse_hessian[(i, j)];
            normal = normal.max((lhs - rhs).abs());
            nscale = nscale.max(lhs.abs()).max(rhs.abs());
        }
    }
    Ok(GaussCodazzi { gauss: rel(gauss, gscale), codazzi: rel(codazzi, cscale), normal: rel(normal, nscale) })
}

/// Residuals of the Hamiltonian and momentum constraints (relative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constraints {
    pub hamiltonian: f64,
    pub momentum: [f64; 3],
}

pub fn constraint_residuals(snap: &Snapshot) -> Result<Constraints> {
    let s = snap.slice()?;
    let f = &snap.frame;
    let stress = &snap.bundle.stress;
    let n = f.lapse;
    let h2 = f.h_norm_sq();
    let hm = f.mean_curvature;
    let energy = stress.at2(0, 0) / (n * n);
    let ham = s.scalar + hm * hm - h2 - 2.0 * energy;
    let ham_scale = s.scalar.abs().max(hm * hm).max(h2).max(2.0 * energy.abs());
    let gi = f.g_inv;
    let momentum = std::array::from_fn(|j| {
        let grad_h: f64 = (0..3).map(|i| (0..3).map(|k| gi[(i, k)] * s.cov_h[j][(i, k)]).sum::<f64>()).sum();
        let div_h: f64 = (0..3).map(|k| (0..3).map(|l| gi[(k, l)] * s.cov_h[l][(j, k)]).sum::<f64>()).sum();
        let flux = stress.at2(0, j + 1) / n;
        rel(grad_h - div_h - flux, grad_h.abs().max(div_h.abs()).max(flux.abs()))
    });
    Ok(Constraints { hamiltonian: rel(ham, ham_scale), momentum })
}

/// Electric part E_ij = W_TiTj, magnetic part B_ij and the spatial block norms of W.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylEB {
    pub electric: Mat3,
    pub magnetic: Mat3,
    /// W_Tijk with the time slot already converted to the unit normal.
    #[serde(skip)]
    pub w_tijk: [[[f64; 3]; 3]; 3],
    pub block_norms: BlockNorms,
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl WeylEB {
    pub fn new(bundle: &CurvatureBundle, frame: &FrameData) -> Result<Self> {
        let w = &bundle.weyl;
        let n = frame.lapse;
        let gi = frame.g_inv;
        let electric = Mat3::from_fn(|i, j| w.at4(0, i + 1, 0, j + 1) / (n * n));
        let w_tijk: [[[f64; 3]; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| std::array::from_fn(|k| w.at4(0, i + 1, j + 1, k + 1) / n))
        });
        // B_ij = (1/2) sqrt(g) [ikl] W_Tj^{kl}
        let magnetic = Mat3::from_fn(|i, j| {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    let e = levi_civita(i, k, l);
                    if e == 0.0 {
                        continue;
                    }
                    let mut raised = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            raised += gi[(k, a)] * gi[(l, b)] * w_tijk[j][a][b];
                        }
                    }
                    s += e * raised;
                }
            }
            0.5 * frame.sqrtg * s
        });
        let block_norms = frame.block_norms(w)?;
        Ok(Self { electric, magnetic, w_tijk, block_norms })
    }

    /// |W|^2 in the Lorentzian metric from the blocks: -4|W_Tijk|^2 + 8|E|^2.
    pub fn lorentzian_norm_sq(&self) -> f64 {
        -4.0 * self.block_norms.tijk + 8.0 * self.block_norms.titj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RegionClass {
    Flat,
    ConformallyFlat,
    Vacuum,
    PureElectric,
    PureMagnetic,
    Mixed,
}

/// Set of labels plus the norms they were decided from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub labels: BTreeSet<RegionClass>,
    pub riemann_norm_bar: f64,
    pub weyl_norm_bar: f64,
    pub ricci_norm_bar: f64,
    pub block_norms: BlockNorms,
}

impl Classification {
    pub fn has(&self, c: RegionClass) -> bool {
        self.labels.contains(&c)
    }
}

/// Labels a point by which curvature pieces vanish. Weyl blocks are compared
/// relative to |W|, so conformally flat points never read as electric and magnetic.
pub fn classify(bundle: &CurvatureBundle, frame: &FrameData, tol: f64) -> Result<Classification> {
    let riemann = bundle.riemann.norm_sq(&bundle.metrics, MetricChoice::Riemannian).max(0.0).sqrt();
    let weyl = bundle.weyl.norm_sq(&bundle.metrics, MetricChoice::Riemannian).max(0.0).sqrt();
    let ricci = bundle.ricci.norm_sq(&bundle.metrics, MetricChoice::Riemannian).max(0.0).sqrt();
    let blocks = frame.block_norms(&bundle.weyl)?;
    let mut labels = BTreeSet::new();
    if riemann < tol {
        labels.insert(RegionClass::Flat);
    }
    if ricci < scaled_tol(tol, riemann) {
        labels.insert(RegionClass::Vacuum);
    }
    if weyl < scaled_tol(tol, riemann) {
        labels.insert(RegionClass::ConformallyFlat);
    } else {
        let magnetic = (4.0 * blocks.tijk).max(0.0).sqrt();
        let electric = (4.0 * blocks.titj).max(0.0).sqrt();
        if magnetic < tol * weyl {
            labels.insert(RegionClass::PureElectric);
        } else if electric < tol * weyl {
            labels.insert(RegionClass::PureMagnetic);
        } else {
            labels.insert(RegionClass::Mixed);
        }
    }
    Ok(Classification {
        labels,
        riemann_norm_bar: riemann,
        weyl_norm_bar: weyl,
        ricci_norm_bar: ricci,
        block_norms: blocks,
    })
}

/// Outcome of the alpha-expansion test h_ij <= alpha H g_ij <= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaExpansion {
    pub is_expanding: bool,
    /// Largest admissible alpha (capped at 1/3); absent when the test fails.
    pub alpha_max: Option<f64>,
    pub eigenvalues: [f64; 3],
}

pub fn alpha_expansion(frame: &FrameData, tol: f64) -> Result<AlphaExpansion> {
    let ev = frame.relative_eigenvalues()?;
    let hm = frame.mean_curvature;
    let scale = ev.iter().fold(hm.abs(), |m, v| m.max(v.abs()));
    let eps = scaled_tol(tol, scale);
    let not = AlphaExpansion { is_expanding: false, alpha_max: None, eigenvalues: ev };
    if hm.abs() <= eps {
        // With H = 0 the condition forces h = 0.
        return Ok(if ev.iter().all(|v| v.abs() <= eps) {
            AlphaExpansion { is_expanding: true, alpha_max: Some(1.0 / 3.0), eigenvalues: ev }
        } else {
            not
        });
    }
    if hm > 0.0 || ev.iter().any(|&v| v > eps) {
        return Ok(not);
    }
    let alpha = if frame.traceless_norm() <= tol * hm.abs() {
        1.0 / 3.0
    } else {
        (ev.iter().fold(f64::INFINITY, |m, &v| m.min(v / hm))).clamp(0.0, 1.0 / 3.0)
    };
    Ok(AlphaExpansion { is_expanding: true, alpha_max: Some(alpha), eigenvalues: ev })
}

/// D_T sqrt(g) by finite differences in t, paired with -H sqrt(g).
pub fn volume_evolution(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<(f64, f64)> {
    let frame = FrameData::compute(spec, p, cfg)?;
    let sampler = |q: &Point| -> Result<Vec<f64>> { Ok(vec![spec.spatial_metric(q)?.determinant().sqrt()]) };
    let dt = partial_vec(&sampler, p, &[0], cfg)?[0];
    Ok((dt / frame.lapse, -frame.mean_curvature * frame.sqrtg))
}

/// Serializable per-point report.
#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub point: Point,
    pub class: Vec<RegionClass>,
    #[serde(rename = "blockNorms")]
    pub block_norms: BlockNorms,
    #[serde(rename = "alphaMax")]
    pub alpha_max: Option<f64>,
    pub residuals: ReportResiduals,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReportResiduals {
    pub gauss: f64,
    pub codazzi: f64,
    pub normal: f64,
    pub hamiltonian: f64,
    pub momentum: f64,
}

pub fn point_report(spec: &MetricSpec, p: &Point, cfg: &StencilConfig, tol: f64) -> Result<PointReport> {
    let snap = Snapshot::compute(spec, p, cfg)?;
    let class = classify(&snap.bundle, &snap.frame, tol)?;
    let gc = gauss_codazzi_residuals(&snap)?;
    let cons = constraint_residuals(&snap)?;
    let alpha = alpha_expansion(&snap.frame, tol)?;
    Ok(PointReport {
        point: *p,
        class: class.labels.iter().copied().collect(),
        block_norms: class.block_norms,
        alpha_max: alpha.alpha_max,
        residuals: ReportResiduals {
            gauss: gc.gauss,
            codazzi: gc.codazzi,
            normal: gc.normal,
            hamiltonian: cons.hamiltonian,
            momentum: cons.momentum.iter().fold(0.0, |m, v| m.max(*v)),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use serde_json::{json, Value};

    fn cfg() -> StencilConfig {
        StencilConfig::default()
    }

    fn generic() -> MetricSpec {
        lookup(
            "custom",
            &json!({
                "lapse": "1 + 0.2*x1*t + 0.1*x2^2",
                "g": {"11": "1 + 0.3*t*x2", "12": "0.1*sin(t + x3)", "13": "0.05*x1*t", "22": "exp(0.2*t*x1)", "23": "0.02*t*x1", "33": "1 + t*x3^2"},
                "domain": {"t": [0.5, 2.0], "x1": [-1.0, 1.0], "x2": [-1.0, 1.0], "x3": [-1.0, 1.0]}
            }),
        )
        .unwrap()
    }

    #[test]
    fn eds_frame() {
        let spec = lookup("eds", &Value::Null).unwrap();
        let f = FrameData::compute(&spec, &Point::new(1.0, [0.0; 3]), &cfg()).unwrap();
        assert!((f.mean_curvature + 2.0).abs() < 1e-9);
        let mixed = f.g_inv * f.h;
        assert!((mixed - Mat3::identity() * (-2.0 / 3.0)).norm() < 1e-9);
        assert!(f.traceless_norm() < 1e-10);
        let a = alpha_expansion(&f, 1e-9).unwrap();
        assert!(a.is_expanding);
        assert_eq!(a.alpha_max, Some(1.0 / 3.0));
    }

    #[test]
    fn kasner_frame_and_expansion() {
        let spec = lookup("kasner", &Value::Null).unwrap();
        let f = FrameData::compute(&spec, &Point::new(1.0, [0.0; 3]), &cfg()).unwrap();
        assert!((f.mean_curvature + 1.0).abs() < 1e-9);
        let a = alpha_expansion(&f, 1e-9).unwrap();
        assert!(!a.is_expanding);
        assert!((a.eigenvalues[2] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn schwarzschild_is_static_and_trivially_expanding() {
        let spec = lookup("schwarzschild", &Value::Null).unwrap();
        let f = FrameData::compute(&spec, &Point::new(0.0, [4.0, 1.0, 0.5]), &cfg()).unwrap();
        assert_eq!(f.h, Mat3::zeros());
        let a = alpha_expansion(&f, 1e-9).unwrap();
        assert!(a.is_expanding && a.alpha_max == Some(1.0 / 3.0));
    }

    #[test]
    fn gauss_codazzi_on_generic_metric() {
        let spec = generic();
        for p in spec.sample_points(5, 3) {
            let snap = Snapshot::compute(&spec, &p, &cfg()).unwrap();
            let gc = gauss_codazzi_residuals(&snap).unwrap();
            assert!(gc.gauss < 1e-7 && gc.codazzi < 1e-7 && gc.normal < 1e-7, "{gc:?} at {p}");
            let c = constraint_residuals(&snap).unwrap();
            assert!(c.hamiltonian < 1e-7 && c.momentum.iter().all(|m| *m < 1e-7), "{c:?}");
        }
    }

    #[test]
    fn volume_element_evolves_with_mean_curvature() {
        let spec = generic();
        let p = Point::new(1.2, [0.1, 0.2, -0.3]);
        let (lhs, rhs) = volume_evolution(&spec, &p, &cfg()).unwrap();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} {rhs}");
    }

    #[test]
    fn weyl_blocks_reproduce_norms() {
        let spec = generic();
        let p = Point::new(1.2, [0.1, 0.2, -0.3]);
        let snap = Snapshot::compute(&spec, &p, &cfg()).unwrap();
        let eb = snap.weyl_eb().unwrap();
        let b = &snap.bundle;
        let wl = b.weyl.norm_sq(&b.metrics, MetricChoice::Lorentzian);
        let wr = b.weyl.norm_sq(&b.metrics, MetricChoice::Riemannian);
        assert!((eb.lorentzian_norm_sq() - wl).abs() < 1e-10 * wl.abs().max(1.0));
        let blocks_bar = 4.0 * eb.block_norms.tijk + 8.0 * eb.block_norms.titj;
        assert!((blocks_bar - wr).abs() < 1e-10 * wr.max(1.0));
        assert!((snap.frame.g_inv * eb.electric).trace().abs() < 1e-10);
        // |B|^2 is half the magnetic block norm.
        let b2 = snap.frame.norm_sq(&eb.magnetic);
        assert!((b2 - 0.5 * eb.block_norms.tijk).abs() < 1e-10 * b2.max(1e-3));
    }

    #[test]
    fn classification_of_catalog() {
        let kasner = lookup("kasner", &Value::Null).unwrap();
        let snap = Snapshot::compute(&kasner, &Point::new(1.3, [0.0; 3]), &cfg()).unwrap();
        let c = classify(&snap.bundle, &snap.frame, 1e-9).unwrap();
        assert!(c.has(RegionClass::PureElectric) && c.has(RegionClass::Vacuum), "{c:?}");
        let eds = lookup("eds", &Value::Null).unwrap();
        let snap = Snapshot::compute(&eds, &Point::new(1.3, [0.0; 3]), &cfg()).unwrap();
        let c = classify(&snap.bundle, &snap.frame, 1e-6).unwrap();
        assert!(c.has(RegionClass::ConformallyFlat) && !c.has(RegionClass::PureElectric), "{c:?}");
    }
}
