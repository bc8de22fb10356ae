//! Four-dimensional curvature family assembled from the metric jet.

use serde::Serialize;

use crate::catalog::MetricSpec;
use crate::error::{Error, Result};
use crate::jet::MetricJet;
use crate::numdiff::{partial_vec, StencilConfig};
use crate::point::Point;
use crate::tensor::{scaled_tol, Mat3, Mat4, MetricChoice, MetricPair, Tensor4, Variance};

/// `c[a][b][c]` is the Christoffel symbol with upper index `a` and lower pair (b, c).
pub type Christoffel = [[[f64; 4]; 4]; 4];

/// Pointwise curvature data. All tensors are all-lower in the coordinate basis.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub point: Point,
    pub metrics: MetricPair,
    pub christoffel: Christoffel,
    pub riemann: Tensor4,
    pub ricci: Tensor4,
    pub scalar: f64,
    pub weyl: Tensor4,
    /// A_ab = R_ab - (R/6) gamma_ab.
    pub schouten: Tensor4,
    /// Kulkarni-Nomizu extension of the Schouten tensor, so that Riemann = Weyl + this.
    pub a_tensor: Tensor4,
    /// Einstein tensor, read as the stress-energy tensor.
    pub stress: Tensor4,
    pub stress_trace: f64,
}

pub fn christoffels_from_jet(jet: &MetricJet, metrics: &MetricPair) -> Christoffel {
    let dg = jet.d_gamma();
    let gi = metrics.gamma_inv;
    let mut lowered = [[[0.0; 4]; 4]; 4];
    for e in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                lowered[e][b][c] = 0.5 * (dg[c][(e, b)] + dg[b][(e, c)] - dg[e][(b, c)]);
            }
        }
    }
    let mut out = [[[0.0; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in b..4 {
                let v: f64 = (0..4).map(|e| gi[(a, e)] * lowered[e][b][c]).sum();
                out[a][b][c] = v;
                out[a][c][b] = v;
            }
        }
    }
    out
}

pub fn christoffels(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<Christoffel> {
    let jet = MetricJet::compute(spec, p, cfg)?;
    let metrics = MetricPair::from_adm(jet.lapse, &jet.g).map_err(|_| Error::SingularMetric(*p))?;
    Ok(christoffels_from_jet(&jet, &metrics))
}

/// Christoffel symbols written through lapse, second fundamental form and the
/// spatial connection. Used only as an independent cross-check.
pub fn foliated_christoffels(jet: &MetricJet) -> Result<Christoffel> {
    let n = jet.lapse;
    let gi = jet.g.try_inverse().ok_or(Error::SingularMetric(jet.point))?;
    let h = -jet.dg[0] / (2.0 * n);
    let spatial = spatial_christoffels(&gi, &jet.dg);
    let mut c = [[[0.0; 4]; 4]; 4];
    c[0][0][0] = jet.d_lapse[0] / n;
    for i in 0..3 {
        let di_n = jet.d_lapse[i + 1];
        c[0][0][i + 1] = di_n / n;
        c[0][i + 1][0] = di_n / n;
        c[i + 1][0][0] = n * (0..3).map(|k| gi[(i, k)] * jet.d_lapse[k + 1]).sum::<f64>();
        for j in 0..3 {
            // Gamma^j_ti = -N h^j_i
            let mixed: f64 = -n * (0..3).map(|k| gi[(j, k)] * h[(k, i)]).sum::<f64>();
            c[j + 1][0][i + 1] = mixed;
            c[j + 1][i + 1][0] = mixed;
            c[0][i + 1][j + 1] = -h[(i, j)] / n;
            for k in 0..3 {
                c[k + 1][i + 1][j + 1] = spatial[k][i][j];
            }
        }
    }
    Ok(c)
}

/// Spatial Christoffels from g^{-1} and the spatial derivatives `dg[1..4]`.
pub(crate) fn spatial_christoffels(gi: &Mat3, dg: &[Mat3; 4]) -> [[[f64; 3]; 3]; 3] {
    let mut lowered = [[[0.0; 3]; 3]; 3];
    for e in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                lowered[e][i][j] = 0.5 * (dg[j + 1][(e, i)] + dg[i + 1][(e, j)] - dg[e + 1][(i, j)]);
            }
        }
    }
    let mut out = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                out[k][i][j] = (0..3).map(|e| gi[(k, e)] * lowered[e][i][j]).sum();
            }
        }
    }
    out
}

/// All-lower Riemann tensor from second derivatives of the metric and Christoffels.
/// This grouping has the pair and antisymmetries exactly, term by term.
pub fn riemann_from_jet(jet: &MetricJet, metrics: &MetricPair, gamma: &Christoffel) -> Tensor4 {
    let ddg = jet.dd_gamma();
    let g = metrics.gamma;
    let mut r = Tensor4::covariant(4);
    let comps = r.components_mut();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let second = 0.5 * (ddg[b][c][(a, d)] + ddg[a][d][(b, c)] - ddg[a][c][(b, d)] - ddg[b][d][(a, c)]);
                    let mut quad = 0.0;
                    for e in 0..4 {
                        for f in 0..4 {
                            let ge = g[(e, f)];
                            if ge != 0.0 {
                                quad += ge * (gamma[e][b][c] * gamma[f][a][d] - gamma[e][b][d] * gamma[f][a][c]);
                            }
                        }
                    }
                    comps[64 * a + 16 * b + 4 * c + d] = second + quad;
                }
            }
        }
    }
    r
}

/// Half the Kulkarni-Nomizu product of a symmetric 2-tensor with the metric:
/// (1/2)(s_ac g_bd - s_ad g_bc + s_bd g_ac - s_bc g_ad).
pub fn kulkarni_nomizu_half(s: &Tensor4, g: &Mat4) -> Tensor4 {
    let mut out = Tensor4::covariant(4);
    let comps = out.components_mut();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    comps[64 * a + 16 * b + 4 * c + d] = 0.5
                        * (s.at2(a, c) * g[(b, d)] - s.at2(a, d) * g[(b, c)] + s.at2(b, d) * g[(a, c)]
                            - s.at2(b, c) * g[(a, d)]);
                }
            }
        }
    }
    out
}

impl CurvatureBundle {
    pub fn compute(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<Self> {
        Self::from_jet(&MetricJet::compute(spec, p, cfg)?)
    }

    pub fn from_jet(jet: &MetricJet) -> Result<Self> {
        let metrics = MetricPair::from_adm(jet.lapse, &jet.g).map_err(|_| Error::SingularMetric(jet.point))?;
        let christoffel = christoffels_from_jet(jet, &metrics);
        let riemann = riemann_from_jet(jet, &metrics, &christoffel);
        let residual = riemann.riemann_symmetry_residual();
        if residual > 1e-6 * riemann.max_abs().max(1.0) {
            return Err(Error::Asymmetric(residual));
        }
        let ricci = riemann.contract(0, 2, &metrics, MetricChoice::Lorentzian)?;
        let scalar = ricci.contract(0, 1, &metrics, MetricChoice::Lorentzian)?.components()[0];
        let g = metrics.gamma;
        let schouten =
            Tensor4::from_fn(&[Variance::Lower; 2], |i| ricci.at2(i[0], i[1]) - scalar / 6.0 * g[(i[0], i[1])])?;
        let a_tensor = kulkarni_nomizu_half(&schouten, &g);
        let weyl = &riemann - &a_tensor;
        let stress =
            Tensor4::from_fn(&[Variance::Lower; 2], |i| ricci.at2(i[0], i[1]) - 0.5 * scalar * g[(i[0], i[1])])?;
        Ok(Self {
            point: jet.point,
            metrics,
            christoffel,
            riemann,
            ricci,
            scalar,
            weyl,
            schouten,
            a_tensor,
            stress,
            stress_trace: -scalar,
        })
    }

    pub fn lapse(&self) -> f64 {
        self.metrics.lapse
    }

    pub fn spatial_metric(&self) -> Mat3 {
        self.metrics.gamma.fixed_view::<3, 3>(1, 1).into_owned()
    }

    /// Perfect-fluid reading of the stress tensor in the unit-normal frame.
    pub fn fluid(&self) -> FluidExtraction {
        FluidExtraction::from_stress(&self.stress, self.lapse(), &self.spatial_metric())
    }

    /// Covariant derivative with the index order (tensor slots..., derivative slot)
    /// moved into an array indexed by the derivative direction.
    pub fn covariant_derivative_of(&self, t: &Tensor4, partials: &[Tensor4; 4]) -> [Tensor4; 4] {
        let rank = t.rank();
        std::array::from_fn(|c| {
            let mut out = partials[c].clone();
            let mut idx = [0usize; 4];
            for flat in 0..out.components().len() {
                let mut rest = flat;
                for s in (0..rank).rev() {
                    idx[s] = rest & 3;
                    rest >>= 2;
                }
                let mut corr = 0.0;
                for s in 0..rank {
                    for e in 0..4 {
                        let gam = self.christoffel[e][c][idx[s]];
                        if gam != 0.0 {
                            let mut j = idx;
                            j[s] = e;
                            corr += gam * t.get(&j[..rank]);
                        }
                    }
                }
                out.components_mut()[flat] -= corr;
            }
            out
        })
    }
}

/// Coordinate partial derivatives of a bundle-derived tensor field, by finite
/// differences of the field itself at the coarse step.
pub fn field_partials<F>(spec: &MetricSpec, p: &Point, cfg: &StencilConfig, field: F) -> Result<[Tensor4; 4]>
where
    F: Fn(&CurvatureBundle) -> Tensor4,
{
    let centre = CurvatureBundle::compute(spec, p, cfg)?;
    let template = field(&centre);
    let sampler = |q: &Point| -> Result<Vec<f64>> {
        let b = CurvatureBundle::compute(spec, q, cfg)?;
        Ok(field(&b).components().to_vec())
    };
    let coarse = cfg.coarse();
    let mut out: [Tensor4; 4] = std::array::from_fn(|_| template.clone());
    for (c, slot) in out.iter_mut().enumerate() {
        let vals = partial_vec(&sampler, p, &[c], &coarse)?;
        *slot = Tensor4::from_components(template.variance(), vals)?;
    }
    Ok(out)
}

/// Covariant derivative of a bundle-derived field: element c is nabla_c of the field.
pub fn covariant_derivative<F>(spec: &MetricSpec, p: &Point, cfg: &StencilConfig, field: F) -> Result<[Tensor4; 4]>
where
    F: Fn(&CurvatureBundle) -> Tensor4,
{
    let centre = CurvatureBundle::compute(spec, p, cfg)?;
    let t = field(&centre);
    let partials = field_partials(spec, p, cfg, &field)?;
    Ok(centre.covariant_derivative_of(&t, &partials))
}

/// C_abc = nabla_c A_ab - nabla_b A_ac, with the Schouten field differentiated numerically.
pub fn cotton(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<Tensor4> {
    let d = covariant_derivative(spec, p, cfg, |b| b.schouten.clone())?;
    Ok(cotton_from_derivative(&d))
}

pub fn cotton_from_derivative(d_schouten: &[Tensor4; 4]) -> Tensor4 {
    Tensor4::from_fn(&[Variance::Lower; 3], |i| {
        let (a, b, c) = (i[0], i[1], i[2]);
        d_schouten[c].at2(a, b) - d_schouten[b].at2(a, c)
    })
    .expect("rank 3")
}

/// Divergence gamma^{ac} nabla_c T_ab of the stress tensor.
pub fn stress_divergence(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<[f64; 4]> {
    let centre = CurvatureBundle::compute(spec, p, cfg)?;
    let d = covariant_derivative(spec, p, cfg, |b| b.stress.clone())?;
    let gi = centre.metrics.gamma_inv;
    Ok(std::array::from_fn(|b| {
        let mut s = 0.0;
        for a in 0..4 {
            for c in 0..4 {
                s += gi[(a, c)] * d[c].at2(a, b);
            }
        }
        s
    }))
}

/// Energy density, pressure and equation-of-state parameter read off the stress tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluidExtraction {
    pub density: f64,
    pub pressure: f64,
    /// k = P/M + 1; absent where M vanishes.
    pub k: Option<f64>,
    /// |T_Ti| in the spatial metric.
    pub momentum_flux: f64,
    /// |T_ij - P g_ij| in the spatial metric.
    pub anisotropy: f64,
    pub is_perfect_fluid: bool,
    pub is_vacuum: bool,
    /// M vanishes while P does not, so k is undefined.
    pub k_undefined: bool,
}

impl FluidExtraction {
    pub fn from_stress(stress: &Tensor4, lapse: f64, g: &Mat3) -> Self {
        let gi = g.try_inverse().unwrap_or_else(Mat3::zeros);
        let density = stress.at2(0, 0) / (lapse * lapse);
        let flux: [f64; 3] = std::array::from_fn(|i| stress.at2(0, i + 1) / lapse);
        let spatial = Mat3::from_fn(|i, j| stress.at2(i + 1, j + 1));
        let pressure = (gi * spatial).trace() / 3.0;
        let mut momentum_flux = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                momentum_flux += gi[(i, j)] * flux[i] * flux[j];
            }
        }
        let aniso = spatial - g * pressure;
        let anisotropy = (gi * aniso * gi).component_mul(&aniso).sum().max(0.0).sqrt();
        let momentum_flux = momentum_flux.max(0.0).sqrt();
        let tol = 1e-6 * (1.0 + density.abs());
        let is_perfect_fluid = momentum_flux < tol && anisotropy < tol;
        let zero_density = density.abs() < tol;
        let is_vacuum = is_perfect_fluid && zero_density && pressure.abs() < tol;
        let k_undefined = zero_density && pressure.abs() >= tol;
        let k = (!zero_density).then(|| pressure / density + 1.0);
        Self { density, pressure, k, momentum_flux, anisotropy, is_perfect_fluid, is_vacuum, k_undefined }
    }
}

/// Norms used by the identity suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureNorms {
    pub riemann: f64,
    pub riemann_bar: f64,
    pub weyl: f64,
    pub weyl_bar: f64,
    pub ricci: f64,
    pub a_tensor: f64,
    pub a_tensor_bar: f64,
    pub stress: f64,
}

impl CurvatureBundle {
    pub fn norms(&self) -> CurvatureNorms {
        let l = MetricChoice::Lorentzian;
        let r = MetricChoice::Riemannian;
        CurvatureNorms {
            riemann: self.riemann.norm_sq(&self.metrics, l),
            riemann_bar: self.riemann.norm_sq(&self.metrics, r),
            weyl: self.weyl.norm_sq(&self.metrics, l),
            weyl_bar: self.weyl.norm_sq(&self.metrics, r),
            ricci: self.ricci.norm_sq(&self.metrics, l),
            a_tensor: self.a_tensor.norm_sq(&self.metrics, l),
            a_tensor_bar: self.a_tensor.norm_sq(&self.metrics, r),
            stress: self.stress.norm_sq(&self.metrics, l),
        }
    }

    /// Relative residuals of the algebraic identities linking the norms:
    /// Riemann norm split, companion-metric split and the A-tensor norm.
    pub fn norm_identity_residuals(&self) -> [f64; 3] {
        let n = self.norms();
        let r2 = self.scalar * self.scalar;
        let split = n.riemann - (n.weyl + 2.0 * n.ricci - r2 / 3.0);
        let split_bar = n.riemann_bar - (n.weyl_bar + n.a_tensor_bar);
        let a_norm = n.a_tensor - (2.0 * n.stress - self.stress_trace.powi(2) / 3.0);
        let scale = |x: f64| scaled_tol(1.0, x);
        [
            split.abs() / scale(n.riemann.abs().max(n.weyl.abs()).max(n.ricci)),
            split_bar.abs() / scale(n.riemann_bar),
            a_norm.abs() / scale(n.a_tensor.abs().max(n.stress)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use serde_json::{json, Value};

    fn cfg() -> StencilConfig {
        StencilConfig::default()
    }

    #[test]
    fn minkowski_curvature_vanishes() {
        let spec = lookup("minkowski", &Value::Null).unwrap();
        let b = CurvatureBundle::compute(&spec, &Point::new(0.2, [0.1, 0.4, -0.3]), &cfg()).unwrap();
        assert_eq!(b.riemann.max_abs(), 0.0);
        assert_eq!(b.christoffel, [[[0.0; 4]; 4]; 4]);
        let c = cotton(&spec, &Point::new(0.2, [0.1, 0.4, -0.3]), &cfg()).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn eds_christoffel_and_dust() {
        let spec = lookup("eds", &Value::Null).unwrap();
        let p = Point::new(1.0, [0.0; 3]);
        let g = christoffels(&spec, &p, &cfg()).unwrap();
        assert!((g[0][1][1] - 2.0 / 3.0).abs() < 1e-10, "{}", g[0][1][1]);
        let b = CurvatureBundle::compute(&spec, &p, &cfg()).unwrap();
        let f = b.fluid();
        assert!((f.density - 4.0 / 3.0).abs() < 1e-8, "{f:?}");
        assert!(f.pressure.abs() < 1e-8);
        assert!(f.is_perfect_fluid);
        assert!((f.k.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn schwarzschild_christoffel_and_kretschmann() {
        let spec = lookup("schwarzschild", &json!({"m": 1.0})).unwrap();
        let p = Point::new(0.0, [4.0, 1.1, 0.3]);
        let g = christoffels(&spec, &p, &cfg()).unwrap();
        assert!((g[1][0][0] - 0.03125).abs() < 1e-10, "{}", g[1][0][0]);
        let b = CurvatureBundle::compute(&spec, &p, &cfg()).unwrap();
        let k = b.riemann.norm_sq(&b.metrics, MetricChoice::Lorentzian);
        assert!((k / 0.01171875 - 1.0).abs() < 1e-6, "{k}");
        assert!(b.ricci.max_abs() < 1e-8);
        let tr = b.ricci.contract(0, 1, &b.metrics, MetricChoice::Lorentzian).unwrap();
        assert!(tr.components()[0].abs() < 1e-9);
    }

    #[test]
    fn foliated_christoffels_agree_with_generic_assembly() {
        let desc = json!({
            "lapse": "1 + 0.2*x1*t + 0.1*x2^2",
            "g": {"11": "1 + 0.3*t*x2", "12": "0.1*sin(t + x3)", "13": "0.05*x1", "22": "exp(0.2*t)", "23": "0.02*t*x1", "33": "1 + x3^2"},
            "domain": {"t": [0.5, 2.0], "x1": [-1.0, 1.0], "x2": [-1.0, 1.0], "x3": [-1.0, 1.0]}
        });
        let spec = lookup("custom", &desc).unwrap();
        let p = Point::new(1.1, [0.3, -0.2, 0.4]);
        let jet = MetricJet::compute(&spec, &p, &cfg()).unwrap();
        let metrics = MetricPair::from_adm(jet.lapse, &jet.g).unwrap();
        let generic = christoffels_from_jet(&jet, &metrics);
        let foliated = foliated_christoffels(&jet).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    assert!((generic[a][b][c] - foliated[a][b][c]).abs() < 1e-12, "{a}{b}{c}");
                }
            }
        }
    }

    #[test]
    fn desitter_is_vacuum_energy() {
        let spec = lookup("desitter", &json!({"lambda": 1.0})).unwrap();
        let b = CurvatureBundle::compute(&spec, &Point::new(0.1, [0.0; 3]), &cfg()).unwrap();
        let f = b.fluid();
        assert!((f.pressure + f.density).abs() < 1e-7);
        assert!(f.k.unwrap().abs() < 1e-7);
    }

    #[test]
    fn kasner_is_vacuum() {
        let spec = lookup("kasner", &Value::Null).unwrap();
        let b = CurvatureBundle::compute(&spec, &Point::new(1.2, [0.0; 3]), &cfg()).unwrap();
        let f = b.fluid();
        assert!(f.is_vacuum && f.k.is_none(), "{f:?}");
    }
}
