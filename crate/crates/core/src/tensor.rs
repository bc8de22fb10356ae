//! Dense tensors over the four adapted coordinate directions (index 0 is time).

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

pub const DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variance {
    Upper,
    Lower,
}

/// Which metric closes a contraction or norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricChoice {
    /// The spacetime metric gamma (signature -,+,+,+).
    Lorentzian,
    /// The companion gamma-bar = N^2 dt^2 + g.
    Riemannian,
    /// Plain index summation.
    Kronecker,
}

/// The spacetime metric together with its Riemannian companion and both inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPair {
    pub lapse: f64,
    pub gamma: Mat4,
    pub gamma_inv: Mat4,
    pub gamma_bar: Mat4,
    pub gamma_bar_inv: Mat4,
}

impl MetricPair {
    /// Builds the pair from lapse and spatial metric for a zero-shift slicing.
    pub fn from_adm(lapse: f64, g: &Mat3) -> Result<Self> {
        if !(lapse > 0.0) || !lapse.is_finite() {
            return Err(Error::InvalidParameter(format!("lapse must be positive, got {lapse}")));
        }
        let mut gamma = Mat4::zeros();
        gamma[(0, 0)] = -lapse * lapse;
        for i in 0..3 {
            for j in 0..3 {
                gamma[(i + 1, j + 1)] = g[(i, j)];
            }
        }
        Self::from_lorentzian(gamma)
    }

    /// Accepts any Lorentzian metric in adapted coordinates; the lapse comes from gamma^{tt}.
    pub fn from_lorentzian(gamma: Mat4) -> Result<Self> {
        let gamma_inv = gamma.try_inverse().ok_or_else(|| Error::ShapeMismatch("singular spacetime metric".into()))?;
        let gtt = gamma_inv[(0, 0)];
        if !(gtt < 0.0) {
            return Err(Error::ShapeMismatch("t is not a time function (gamma^tt >= 0)".into()));
        }
        let lapse_sq = -1.0 / gtt;
        // Adding 2 N^2 dt (x) dt flips the sign of the normal direction only.
        let mut gamma_bar = gamma;
        gamma_bar[(0, 0)] += 2.0 * lapse_sq;
        let gamma_bar_inv =
            gamma_bar.try_inverse().ok_or_else(|| Error::ShapeMismatch("singular Riemannian companion".into()))?;
        Ok(Self { lapse: lapse_sq.sqrt(), gamma, gamma_inv, gamma_bar, gamma_bar_inv })
    }

    pub fn metric(&self, choice: MetricChoice) -> Mat4 {
        match choice {
            MetricChoice::Lorentzian => self.gamma,
            MetricChoice::Riemannian => self.gamma_bar,
            MetricChoice::Kronecker => Mat4::identity(),
        }
    }

    pub fn inverse(&self, choice: MetricChoice) -> Mat4 {
        match choice {
            MetricChoice::Lorentzian => self.gamma_inv,
            MetricChoice::Riemannian => self.gamma_bar_inv,
            MetricChoice::Kronecker => Mat4::identity(),
        }
    }
}

/// Dense tensor of rank 0..=4 with 4^rank components in row-major slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    variance: Vec<Variance>,
    comps: Vec<f64>,
}

fn pow4(rank: usize) -> usize {
    1usize << (2 * rank)
}

impl Tensor4 {
    pub fn zeros(variance: &[Variance]) -> Result<Self> {
        if variance.len() > 4 {
            return Err(Error::ShapeMismatch(format!("rank {} exceeds 4", variance.len())));
        }
        Ok(Self { variance: variance.to_vec(), comps: vec![0.0; pow4(variance.len())] })
    }

    /// All-lower tensor of the given rank.
    pub fn covariant(rank: usize) -> Self {
        assert!(rank <= 4, "rank {rank} exceeds 4");
        Self { variance: vec![Variance::Lower; rank], comps: vec![0.0; pow4(rank)] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { variance: Vec::new(), comps: vec![value] }
    }

    pub fn from_fn(variance: &[Variance], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(variance)?;
        let rank = t.rank();
        let mut idx = [0usize; 4];
        for flat in 0..t.comps.len() {
            decode(flat, rank, &mut idx);
            t.comps[flat] = f(&idx[..rank]);
        }
        Ok(t)
    }

    pub fn from_components(variance: &[Variance], comps: Vec<f64>) -> Result<Self> {
        if variance.len() > 4 || comps.len() != pow4(variance.len()) {
            return Err(Error::ShapeMismatch(format!("{} components for rank {}", comps.len(), variance.len())));
        }
        Ok(Self { variance: variance.to_vec(), comps })
    }

    pub fn from_matrix(m: &Mat4, variance: [Variance; 2]) -> Self {
        Self::from_fn(&variance, |i| m[(i[0], i[1])]).expect("rank 2")
    }

    pub fn to_matrix(&self) -> Result<Mat4> {
        if self.rank() != 2 {
            return Err(Error::ShapeMismatch(format!("rank {} is not a matrix", self.rank())));
        }
        Ok(Mat4::from_fn(|a, b| self.comps[4 * a + b]))
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn components(&self) -> &[f64] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [f64] {
        &mut self.comps
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.comps[encode(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let k = encode(idx);
        self.comps[k] = value;
    }

    #[inline]
    pub fn at2(&self, a: usize, b: usize) -> f64 {
        self.comps[4 * a + b]
    }

    #[inline]
    pub fn at3(&self, a: usize, b: usize, c: usize) -> f64 {
        self.comps[16 * a + 4 * b + c]
    }

    #[inline]
    pub fn at4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.comps[64 * a + 16 * b + 4 * c + d]
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.rank() {
            return Err(Error::SlotOutOfRange { slot, rank: self.rank() });
        }
        Ok(())
    }

    /// Applies `m` to one slot: out[..a..] = sum_b m[a][b] t[..b..].
    fn transform_slot(&self, slot: usize, m: &Mat4, variance: Variance) -> Self {
        let rank = self.rank();
        let stride = pow4(rank - 1 - slot);
        let mut out = self.clone();
        out.variance[slot] = variance;
        let mut idx = [0usize; 4];
        for flat in 0..self.comps.len() {
            decode(flat, rank, &mut idx);
            let a = idx[slot];
            let base = flat - a * stride;
            let mut acc = 0.0;
            for b in 0..DIM {
                acc += m[(a, b)] * self.comps[base + b * stride];
            }
            out.comps[flat] = acc;
        }
        out
    }

    pub fn raise(&self, slot: usize, metrics: &MetricPair, choice: MetricChoice) -> Result<Self> {
        self.check_slot(slot)?;
        if self.variance[slot] == Variance::Upper {
            return Ok(self.clone());
        }
        Ok(self.transform_slot(slot, &metrics.inverse(choice), Variance::Upper))
    }

    pub fn lower(&self, slot: usize, metrics: &MetricPair, choice: MetricChoice) -> Result<Self> {
        self.check_slot(slot)?;
        if self.variance[slot] == Variance::Lower {
            return Ok(self.clone());
        }
        Ok(self.transform_slot(slot, &metrics.metric(choice), Variance::Lower))
    }

    /// Trace over two slots. Mixed variance is a Kronecker trace; equal variance
    /// is closed with the chosen metric (or its inverse for two lower slots).
    pub fn contract(&self, a: usize, b: usize, metrics: &MetricPair, choice: MetricChoice) -> Result<Self> {
        if self.rank() < 2 || a == b {
            return Err(Error::RankTooLow(self.rank()));
        }
        self.check_slot(a)?;
        self.check_slot(b)?;
        let (va, vb) = (self.variance[a], self.variance[b]);
        let closing = match (va, vb) {
            (Variance::Lower, Variance::Lower) => metrics.inverse(choice),
            (Variance::Upper, Variance::Upper) => metrics.metric(choice),
            _ => Mat4::identity(),
        };
        let rank = self.rank();
        let rest: Vec<Variance> =
            self.variance.iter().enumerate().filter(|(s, _)| *s != a && *s != b).map(|(_, v)| *v).collect();
        let mut out = Self::zeros(&rest)?;
        let mut idx = [0usize; 4];
        for flat in 0..self.comps.len() {
            decode(flat, rank, &mut idx);
            let w = closing[(idx[a], idx[b])];
            if w == 0.0 {
                continue;
            }
            let mut o = 0usize;
            for (s, &i) in idx[..rank].iter().enumerate() {
                if s != a && s != b {
                    o = 4 * o + i;
                }
            }
            out.comps[o] += w * self.comps[flat];
        }
        Ok(out)
    }

    /// Full self-contraction |t|^2 with the chosen metric.
    pub fn norm_sq(&self, metrics: &MetricPair, choice: MetricChoice) -> f64 {
        let mut lowered = self.clone();
        for s in 0..self.rank() {
            lowered = lowered.lower(s, metrics, choice).expect("slot in range");
        }
        let mut raised = lowered.clone();
        for s in 0..self.rank() {
            raised = raised.raise(s, metrics, choice).expect("slot in range");
        }
        lowered.comps.iter().zip(&raised.comps).map(|(x, y)| x * y).sum()
    }

    /// Largest violation of the pair/antisymmetries and first Bianchi identity.
    pub fn riemann_symmetry_residual(&self) -> f64 {
        if self.rank() != 4 {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let v = self.at4(a, b, c, d);
                        worst = worst
                            .max((v + self.at4(b, a, c, d)).abs())
                            .max((v + self.at4(a, b, d, c)).abs())
                            .max((v - self.at4(c, d, a, b)).abs())
                            .max((v + self.at4(a, c, d, b) + self.at4(a, d, b, c)).abs());
                    }
                }
            }
        }
        worst
    }
}

fn encode(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| 4 * acc + i)
}

fn decode(mut flat: usize, rank: usize, idx: &mut [usize; 4]) {
    for s in (0..rank).rev() {
        idx[s] = flat & 3;
        flat >>= 2;
    }
}

impl Add for &Tensor4 {
    type Output = Tensor4;
    fn add(self, rhs: &Tensor4) -> Tensor4 {
        assert_eq!(self.rank(), rhs.rank(), "rank mismatch");
        let comps = self.comps.iter().zip(&rhs.comps).map(|(a, b)| a + b).collect();
        Tensor4 { variance: self.variance.clone(), comps }
    }
}

impl Sub for &Tensor4 {
    type Output = Tensor4;
    fn sub(self, rhs: &Tensor4) -> Tensor4 {
        assert_eq!(self.rank(), rhs.rank(), "rank mismatch");
        let comps = self.comps.iter().zip(&rhs.comps).map(|(a, b)| a - b).collect();
        Tensor4 { variance: self.variance.clone(), comps }
    }
}

impl Mul<f64> for &Tensor4 {
    type Output = Tensor4;
    fn mul(self, s: f64) -> Tensor4 {
        Tensor4 { variance: self.variance.clone(), comps: self.comps.iter().map(|v| v * s).collect() }
    }
}

/// Squared norms of the three spatial blocks of a curvature-type tensor in the
/// unit-normal frame: |t_Tijk|^2, |t_TiTj|^2, |t_ijkl|^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockNorms {
    pub tijk: f64,
    pub titj: f64,
    pub ijkl: f64,
}

impl BlockNorms {
    pub fn lorentzian(&self) -> f64 {
        -4.0 * self.tijk + 4.0 * self.titj + self.ijkl
    }

    pub fn riemannian(&self) -> f64 {
        4.0 * self.tijk + 4.0 * self.titj + self.ijkl
    }
}

/// Block norms of an all-lower rank-4 tensor with curvature symmetries.
/// T-indexed components are the coordinate ones divided by the lapse per time slot.
pub fn block_norms(t: &Tensor4, lapse: f64, g_inv: &Mat3) -> Result<BlockNorms> {
    if t.rank() != 4 || t.variance().iter().any(|v| *v != Variance::Lower) {
        return Err(Error::ShapeMismatch("block norms need an all-lower rank-4 tensor".into()));
    }
    let residual = t.riemann_symmetry_residual();
    if residual > 1e-8 * t.max_abs().max(1.0) {
        return Err(Error::Asymmetric(residual));
    }
    let mut tijk = [[[0.0; 3]; 3]; 3];
    let mut titj = [[0.0; 3]; 3];
    let mut ijkl = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            titj[i][j] = t.at4(0, i + 1, 0, j + 1) / (lapse * lapse);
            for k in 0..3 {
                tijk[i][j][k] = t.at4(0, i + 1, j + 1, k + 1) / lapse;
                for l in 0..3 {
                    ijkl[i][j][k][l] = t.at4(i + 1, j + 1, k + 1, l + 1);
                }
            }
        }
    }
    Ok(BlockNorms {
        tijk: spatial_norm3(&tijk, g_inv),
        titj: spatial_norm2(&titj, g_inv),
        ijkl: spatial_norm4(&ijkl, g_inv),
    })
}

pub(crate) fn spatial_norm2(a: &[[f64; 3]; 3], gi: &Mat3) -> f64 {
    let m = Mat3::from_fn(|i, j| a[i][j]);
    let raised = gi * m * gi;
    m.component_mul(&raised).sum()
}

pub(crate) fn spatial_norm3(a: &[[[f64; 3]; 3]; 3], gi: &Mat3) -> f64 {
    let mut raised = *a;
    for slot in 0..3 {
        let src = raised;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut acc = 0.0;
                    for m in 0..3 {
                        let v = match slot {
                            0 => gi[(i, m)] * src[m][j][k],
                            1 => gi[(j, m)] * src[i][m][k],
                            _ => gi[(k, m)] * src[i][j][m],
                        };
                        acc += v;
                    }
                    raised[i][j][k] = acc;
                }
            }
        }
    }
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                s += a[i][j][k] * raised[i][j][k];
            }
        }
    }
    s
}

pub(crate) fn spatial_norm4(a: &[[[[f64; 3]; 3]; 3]; 3], gi: &Mat3) -> f64 {
    let mut raised = *a;
    for slot in 0..4 {
        let src = raised;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut acc = 0.0;
                        for m in 0..3 {
                            acc += match slot {
                                0 => gi[(i, m)] * src[m][j][k][l],
                                1 => gi[(j, m)] * src[i][m][k][l],
                                2 => gi[(k, m)] * src[i][j][m][l],
                                _ => gi[(l, m)] * src[i][j][k][m],
                            };
                        }
                        raised[i][j][k][l] = acc;
                    }
                }
            }
        }
    }
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    s += a[i][j][k][l] * raised[i][j][k][l];
                }
            }
        }
    }
    s
}

/// Scale-aware tolerance: relative above unit magnitude, absolute below.
pub fn scaled_tol(tol: f64, magnitude: f64) -> f64 {
    tol * magnitude.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minkowski() -> MetricPair {
        MetricPair::from_adm(1.0, &Mat3::identity()).unwrap()
    }

    #[test]
    fn identity_trace_is_four() {
        let delta = Tensor4::from_fn(&[Variance::Upper, Variance::Lower], |i| (i[0] == i[1]) as u8 as f64).unwrap();
        let tr = delta.contract(0, 1, &minkowski(), MetricChoice::Lorentzian).unwrap();
        assert_eq!(tr.components(), &[4.0]);
    }

    #[test]
    fn metric_contracted_with_inverse_is_four() {
        let m = minkowski();
        let g = Tensor4::from_matrix(&m.gamma, [Variance::Lower, Variance::Lower]);
        let tr = g.contract(0, 1, &m, MetricChoice::Lorentzian).unwrap();
        assert!((tr.components()[0] - 4.0).abs() < 1e-15);
        assert!((g.norm_sq(&m, MetricChoice::Lorentzian) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn contraction_errors() {
        let m = minkowski();
        let v = Tensor4::covariant(1);
        assert!(matches!(v.contract(0, 1, &m, MetricChoice::Lorentzian), Err(Error::RankTooLow(1))));
        let t = Tensor4::covariant(3);
        assert!(matches!(
            t.contract(0, 5, &m, MetricChoice::Lorentzian),
            Err(Error::SlotOutOfRange { slot: 5, rank: 3 })
        ));
    }

    #[test]
    fn companion_metric_flips_time_sign() {
        let g = Mat3::new(2.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 1.0);
        let m = MetricPair::from_adm(0.7, &g).unwrap();
        assert!((m.gamma_bar[(0, 0)] - 0.49).abs() < 1e-15);
        assert!((m.lapse - 0.7).abs() < 1e-15);
        assert!(((m.gamma * m.gamma_inv) - Mat4::identity()).norm() < 1e-13);
        assert!(m.gamma_bar.cholesky().is_some());
    }

    #[test]
    fn vector_norm_signs() {
        let m = minkowski();
        let mut v = Tensor4::covariant(1);
        v.set(&[0], 1.0);
        assert!((v.norm_sq(&m, MetricChoice::Lorentzian) + 1.0).abs() < 1e-15);
        assert!((v.norm_sq(&m, MetricChoice::Riemannian) - 1.0).abs() < 1e-15);
    }
}
