//! Gauss–Legendre rules, coordinate regions in a t = const slice and their
//! volume and boundary-area quadrature.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::MetricSpec;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::tensor::Mat3;

/// Nodes and weights of the q-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        // Chebyshev-type initial guess, then Newton on P_q.
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for n in 2..=q {
                let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 0 {
                1.0
            } else if q == 1 {
                x
            } else {
                p1
            };
            let pq1 = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (x * pq - pq1) / (x * x - 1.0);
            let dx = pq / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[q - 1 - i] = x;
        weights[q - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite rule: `panels` equal panels on [a, b], `order` nodes each.
pub fn composite(a: f64, b: f64, order: usize, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(order * panels);
    for k in 0..panels {
        let lo = a + k as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * width * (xi + 1.0), 0.5 * width * wi));
        }
    }
    out
}

/// Deterministic pairwise sum, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Region shape in the spatial coordinates of the chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionShape {
    Box { lo: [f64; 3], hi: [f64; 3] },
    Ball { center: [f64; 3], radius: f64 },
}

/// Region plus the quadrature used on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub shape: RegionShape,
    /// Gauss–Legendre nodes per panel.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Panels per axis of the coarse rule; the fine rule doubles them.
    #[serde(default = "default_panels")]
    pub panels: usize,
    /// Largest accepted relative refinement difference.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_order() -> usize {
    5
}

fn default_panels() -> usize {
    1
}

fn default_threshold() -> f64 {
    1e-6
}

/// One quadrature node: position and weight including the coordinate Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: [f64; 3],
    pub weight: f64,
}

/// One boundary node: position, tangent vectors and the parameter weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceNode {
    pub x: [f64; 3],
    pub tangents: [[f64; 3]; 2],
    pub weight: f64,
}

impl RegionSpec {
    pub fn new(shape: RegionShape) -> Self {
        Self { shape, order: default_order(), panels: default_panels(), threshold: default_threshold() }
    }

    pub fn unit_cube() -> Self {
        Self::new(RegionShape::Box { lo: [0.0; 3], hi: [1.0; 3] })
    }

    pub fn ball(center: [f64; 3], radius: f64) -> Self {
        Self::new(RegionShape::Ball { center, radius })
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > 64 || self.panels == 0 || !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "region quadrature needs order in 1..=64, panels >= 1, threshold > 0".into(),
            ));
        }
        match self.shape {
            RegionShape::Box { lo, hi } => {
                if (0..3).any(|a| !(lo[a] < hi[a])) {
                    return Err(Error::InvalidParameter("box needs lo < hi on every axis".into()));
                }
            }
            RegionShape::Ball { radius, center } => {
                if !(radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParameter("ball needs a positive radius".into()));
                }
            }
        }
        Ok(())
    }

    pub fn center(&self) -> [f64; 3] {
        match self.shape {
            RegionShape::Box { lo, hi } => std::array::from_fn(|a| 0.5 * (lo[a] + hi[a])),
            RegionShape::Ball { center, .. } => center,
        }
    }

    /// Volume nodes with `panels` panels per axis.
    pub fn volume_nodes(&self, panels: usize) -> Vec<Node> {
        let q = self.order;
        let mut out = Vec::new();
        match self.shape {
            RegionShape::Box { lo, hi } => {
                let axes: Vec<Vec<(f64, f64)>> = (0..3).map(|a| composite(lo[a], hi[a], q, panels)).collect();
                for &(x, wx) in &axes[0] {
                    for &(y, wy) in &axes[1] {
                        for &(z, wz) in &axes[2] {
                            out.push(Node { x: [x, y, z], weight: wx * wy * wz });
                        }
                    }
                }
            }
            RegionShape::Ball { center, radius } => {
                let rho = composite(0.0, radius, q, panels);
                let theta = composite(0.0, PI, q, panels);
                let phi = composite(0.0, 2.0 * PI, q, panels);
                for &(r, wr) in &rho {
                    for &(th, wt) in &theta {
                        for &(ph, wp) in &phi {
                            let d = direction(th, ph);
                            out.push(Node {
                                x: std::array::from_fn(|a| center[a] + r * d[a]),
                                weight: wr * wt * wp * r * r * th.sin(),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Boundary nodes with `panels` panels per parameter axis.
    pub fn surface_nodes(&self, panels: usize) -> Vec<SurfaceNode> {
        let q = self.order;
        let mut out = Vec::new();
        match self.shape {
            RegionShape::Box { lo, hi } => {
                for normal in 0..3 {
                    let (a, b) = ((normal + 1) % 3, (normal + 2) % 3);
                    let ua = composite(lo[a], hi[a], q, panels);
                    let ub = composite(lo[b], hi[b], q, panels);
                    let mut ea = [0.0; 3];
                    ea[a] = 1.0;
                    let mut eb = [0.0; 3];
                    eb[b] = 1.0;
                    for side in [lo[normal], hi[normal]] {
                        for &(u, wu) in &ua {
                            for &(v, wv) in &ub {
                                let mut x = [0.0; 3];
                                x[normal] = side;
                                x[a] = u;
                                x[b] = v;
                                out.push(SurfaceNode { x, tangents: [ea, eb], weight: wu * wv });
                            }
                        }
                    }
                }
            }
            RegionShape::Ball { center, radius } => {
                let theta = composite(0.0, PI, q, panels);
                let phi = composite(0.0, 2.0 * PI, q, panels);
                for &(th, wt) in &theta {
                    for &(ph, wp) in &phi {
                        let d = direction(th, ph);
                        let d_th = [th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()];
                        let d_ph = [-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0];
                        out.push(SurfaceNode {
                            x: std::array::from_fn(|a| center[a] + radius * d[a]),
                            tangents: [d_th.map(|c| c * radius), d_ph.map(|c| c * radius)],
                            weight: wt * wp,
                        });
                    }
                }
            }
        }
        out
    }
}

fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Induced area element sqrt(det(J^T g J)) for tangents J.
pub fn area_element(g: &Mat3, tangents: &[[f64; 3]; 2]) -> f64 {
    let gram = |u: &[f64; 3], v: &[f64; 3]| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += u[i] * g[(i, j)] * v[j];
            }
        }
        s
    };
    let (a, b) = (&tangents[0], &tangents[1]);
    let det = gram(a, a) * gram(b, b) - gram(a, b).powi(2);
    det.max(0.0).sqrt()
}

/// Area of the boundary and volume of the region at time t, with the boundary
/// minimum of the lapse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measures {
    pub area: f64,
    pub vol: f64,
    #[serde(rename = "minBoundaryLapse")]
    pub min_boundary_lapse: f64,
}

pub fn measures(spec: &MetricSpec, region: &RegionSpec, t: f64, panels: usize) -> Result<Measures> {
    let vol_terms: Vec<f64> = region
        .volume_nodes(panels)
        .par_iter()
        .map(|n| Ok(n.weight * spec.spatial_metric(&Point::new(t, n.x))?.determinant().sqrt()))
        .collect::<Result<_>>()?;
    let surf: Vec<(f64, f64)> = region
        .surface_nodes(panels)
        .par_iter()
        .map(|n| {
            let p = Point::new(t, n.x);
            let g = boundary_metric(spec, &p)?;
            let lapse = spec.lapse.raw(&p);
            Ok((n.weight * area_element(&g, &n.tangents), lapse))
        })
        .collect::<Result<_>>()?;
    let areas: Vec<f64> = surf.iter().map(|s| s.0).collect();
    let min_lapse = surf.iter().fold(f64::INFINITY, |m, s| m.min(s.1));
    Ok(Measures { area: pairwise_sum(&areas), vol: pairwise_sum(&vol_terms), min_boundary_lapse: min_lapse })
}

/// Spatial metric on the closed boundary; falls back to the raw components where
/// the open-domain guard excludes the point (e.g. a lapse vanishing on the boundary).
fn boundary_metric(spec: &MetricSpec, p: &Point) -> Result<Mat3> {
    match spec.spatial_metric(p) {
        Ok(g) => Ok(g),
        Err(Error::OutsideDomain(_)) => {
            let g = spec.raw_spatial_metric(p);
            if g.iter().all(|v| v.is_finite()) {
                Ok(g)
            } else {
                Err(Error::OutsideDomain(*p))
            }
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use serde_json::Value;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for q in 1..=12 {
            let (x, w) = gauss_legendre(q);
            assert!(w.iter().all(|w| *w > 0.0));
            for deg in 0..2 * q {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "q={q} deg={deg}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn pairwise_sum_matches_plain_sum() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }

    #[test]
    fn flat_measures() {
        let mink = lookup("minkowski", &Value::Null).unwrap();
        let m = measures(&mink, &RegionSpec::unit_cube(), 0.0, 1).unwrap();
        assert!((m.area - 6.0).abs() < 1e-13 && (m.vol - 1.0).abs() < 1e-13);
        let ball = RegionSpec { order: 8, ..RegionSpec::ball([0.0; 3], 0.5) };
        let m = measures(&mink, &ball, 0.0, 2).unwrap();
        assert!((m.area - PI).abs() < 1e-10, "{}", m.area);
        assert!((m.vol - PI / 6.0).abs() < 1e-10, "{}", m.vol);
        assert_eq!(m.min_boundary_lapse, 1.0);
    }

    #[test]
    fn eds_ball_ratio() {
        let eds = lookup("eds", &Value::Null).unwrap();
        let ball = RegionSpec { order: 8, ..RegionSpec::ball([0.0; 3], 1.0) };
        let m = measures(&eds, &ball, 1.0, 2).unwrap();
        assert!((m.area / m.vol - 3.0).abs() < 1e-10);
    }
}
