//! Value, gradient and Hessian of the lapse and spatial metric at a point.

use crate::catalog::{spatial_slot, MetricSpec};
use crate::error::{Error, Result};
use crate::numdiff::{partial_vec, StencilConfig};
use crate::point::Point;
use crate::tensor::{Mat3, Mat4};

/// Second-order Taylor data of (N, g_ij) in the adapted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub point: Point,
    pub lapse: f64,
    pub d_lapse: [f64; 4],
    pub dd_lapse: [[f64; 4]; 4],
    pub g: Mat3,
    /// `dg[c]` holds the partial derivative of g_ij along coordinate c.
    pub dg: [Mat3; 4],
    pub ddg: [[Mat3; 4]; 4],
}

fn sample(spec: &MetricSpec, q: &Point) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(7);
    v.push(spec.lapse.value(q)?);
    for f in &spec.spatial {
        v.push(f.value(q)?);
    }
    Ok(v)
}

fn unpack(v: &[f64]) -> (f64, Mat3) {
    let mut g = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            g[(i, j)] = v[1 + spatial_slot(i, j)];
        }
    }
    (v[0], g)
}

impl MetricJet {
    pub fn compute(spec: &MetricSpec, p: &Point, cfg: &StencilConfig) -> Result<Self> {
        if !spec.contains(p) {
            return Err(Error::OutsideDomain(*p));
        }
        let lapse = spec.lapse_at(p)?;
        let g = spec.spatial_metric(p)?;
        let sampler = |q: &Point| sample(spec, q);
        let mut d_lapse = [0.0; 4];
        let mut dg = [Mat3::zeros(); 4];
        for c in 0..4 {
            let (n, m) = unpack(&partial_vec(&sampler, p, &[c], cfg)?);
            d_lapse[c] = n;
            dg[c] = m;
        }
        let mut dd_lapse = [[0.0; 4]; 4];
        let mut ddg = [[Mat3::zeros(); 4]; 4];
        for c in 0..4 {
            for d in c..4 {
                let (n, m) = unpack(&partial_vec(&sampler, p, &[c, d], cfg)?);
                dd_lapse[c][d] = n;
                dd_lapse[d][c] = n;
                ddg[c][d] = m;
                ddg[d][c] = m;
            }
        }
        Ok(Self { point: *p, lapse, d_lapse, dd_lapse, g, dg, ddg })
    }

    pub fn gamma(&self) -> Mat4 {
        let mut m = Mat4::zeros();
        m[(0, 0)] = -self.lapse * self.lapse;
        for i in 0..3 {
            for j in 0..3 {
                m[(i + 1, j + 1)] = self.g[(i, j)];
            }
        }
        m
    }

    /// First derivatives of the spacetime metric, indexed by the derivative direction.
    pub fn d_gamma(&self) -> [Mat4; 4] {
        std::array::from_fn(|c| {
            let mut m = Mat4::zeros();
            m[(0, 0)] = -2.0 * self.lapse * self.d_lapse[c];
            for i in 0..3 {
                for j in 0..3 {
                    m[(i + 1, j + 1)] = self.dg[c][(i, j)];
                }
            }
            m
        })
    }

    pub fn dd_gamma(&self) -> [[Mat4; 4]; 4] {
        std::array::from_fn(|c| {
            std::array::from_fn(|d| {
                let mut m = Mat4::zeros();
                m[(0, 0)] = -2.0 * (self.d_lapse[c] * self.d_lapse[d] + self.lapse * self.dd_lapse[c][d]);
                for i in 0..3 {
                    for j in 0..3 {
                        m[(i + 1, j + 1)] = self.ddg[c][d][(i, j)];
                    }
                }
                m
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use serde_json::Value;

    #[test]
    fn eds_jet_matches_closed_form() {
        let spec = lookup("eds", &Value::Null).unwrap();
        let t: f64 = 1.3;
        let jet = MetricJet::compute(&spec, &Point::new(t, [0.2, 0.1, -0.4]), &StencilConfig::default()).unwrap();
        let a2 = t.powf(4.0 / 3.0);
        assert!((jet.g[(1, 1)] - a2).abs() < 1e-14);
        assert!((jet.dg[0][(1, 1)] - 4.0 / 3.0 * t.powf(1.0 / 3.0)).abs() < 1e-10);
        assert!((jet.ddg[0][0][(2, 2)] - 4.0 / 9.0 * t.powf(-2.0 / 3.0)).abs() < 1e-8);
        assert_eq!(jet.dg[1], Mat3::zeros());
        assert_eq!(jet.d_lapse, [0.0; 4]);
    }
}
