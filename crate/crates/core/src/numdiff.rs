//! Central finite differences with Richardson extrapolation.
//!
//! Every derivative is a tensor product of one-dimensional central stencils.
//! Axes are sorted before the product is formed, so mixed partials evaluate the
//! same points in the same order regardless of how the caller lists the axes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

type ScalarEval = dyn Fn(&Point) -> f64 + Send + Sync;
type GradientEval = dyn Fn(&Point) -> [f64; 4] + Send + Sync;
type Guard = dyn Fn(&Point) -> bool + Send + Sync;

/// Number of times a stencil step is halved when it pokes outside the domain.
const MAX_SHRINKS: usize = 10;

/// A scalar field on spacetime with an optional exact gradient and domain guard.
#[derive(Clone)]
pub struct FieldFn {
    eval: Arc<ScalarEval>,
    gradient: Option<Arc<GradientEval>>,
    guard: Option<Arc<Guard>>,
}

impl fmt::Debug for FieldFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldFn")
            .field("exact_gradient", &self.gradient.is_some())
            .field("guarded", &self.guard.is_some())
            .finish()
    }
}

impl FieldFn {
    pub fn new(eval: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), gradient: None, guard: None }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |_| value)
    }

    pub fn with_gradient(mut self, grad: impl Fn(&Point) -> [f64; 4] + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(grad));
        self
    }

    pub fn with_guard(mut self, guard: impl Fn(&Point) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Some(Arc::new(guard));
        self
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.guard.as_ref().map_or(true, |g| g(p))
    }

    pub fn value(&self, p: &Point) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutsideDomain(*p));
        }
        let v = (self.eval)(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(*p))
        }
    }

    /// Evaluates without the guard or the finiteness check.
    pub fn raw(&self, p: &Point) -> f64 {
        (self.eval)(p)
    }

    pub fn exact_gradient(&self, p: &Point) -> Option<[f64; 4]> {
        self.gradient.as_ref().map(|g| g(p))
    }

    pub fn has_exact_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Compares the exact gradient against finite differences; returns the worst
    /// relative mismatch, or an error if it exceeds 1e-6.
    pub fn self_check(&self, points: &[Point], cfg: &StencilConfig) -> Result<f64> {
        let Some(grad) = &self.gradient else { return Ok(0.0) };
        let mut worst: f64 = 0.0;
        for p in points {
            let exact = grad(p);
            let sampler = |q: &Point| self.value(q).map(|v| vec![v]);
            for (axis, e) in exact.iter().enumerate() {
                let fd = partial_vec(&sampler, p, &[axis], cfg)?[0];
                worst = worst.max((fd - e).abs() / e.abs().max(1.0));
            }
        }
        if worst > 1e-6 {
            return Err(Error::Inconsistent(format!("exact gradient disagrees with finite differences by {worst:e}")));
        }
        Ok(worst)
    }
}

/// Step size, accuracy order and extrapolation depth of the stencils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StencilConfig {
    /// Base step for first and second derivatives, scaled by max(1, |coordinate|).
    pub step: f64,
    /// Base step for third derivatives and for differentiating derived fields.
    pub third_step: f64,
    /// Accuracy order of the base stencil, 2 or 4.
    pub order: u8,
    /// Number of step halvings combined by Richardson extrapolation.
    pub richardson_levels: usize,
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self { step: 1e-3, third_step: 1e-2, order: 4, richardson_levels: 2 }
    }
}

impl StencilConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) || !(self.third_step > 0.0 && self.third_step.is_finite()) {
            return Err(Error::InvalidParameter("stencil steps must be positive".into()));
        }
        if self.order != 2 && self.order != 4 {
            return Err(Error::InvalidParameter(format!("stencil order must be 2 or 4, got {}", self.order)));
        }
        if self.richardson_levels == 0 {
            return Err(Error::InvalidParameter("richardson_levels must be at least 1".into()));
        }
        Ok(())
    }

    /// Configuration for differentiating a field that is itself built from
    /// finite differences: the coarse step keeps rounding noise in check.
    pub fn coarse(&self) -> Self {
        Self { step: self.third_step, ..*self }
    }
}

/// Derivative estimate together with the Richardson error estimate, if one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub values: Vec<f64>,
    pub error: Option<f64>,
}

fn stencil(derivative: usize, order: u8) -> (&'static [i32], &'static [f64]) {
    match (derivative, order) {
        (1, 2) => (&[-1, 1], &[-0.5, 0.5]),
        (1, _) => (&[-2, -1, 1, 2], &[1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0]),
        (2, 2) => (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
        (2, _) => (&[-2, -1, 0, 1, 2], &[-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0]),
        (3, 2) => (&[-2, -1, 1, 2], &[-0.5, 1.0, -1.0, 0.5]),
        (3, _) => (&[-3, -2, -1, 1, 2, 3], &[0.125, -1.0, 1.625, -1.625, 1.0, -0.125]),
        _ => unreachable!("derivative order {derivative} unsupported"),
    }
}

/// One tensor-product stencil application at a fixed scale.
fn apply_stencil<F>(f: &F, p: &Point, groups: &[(usize, usize)], steps: &[f64; 4], order: u8) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> Result<Vec<f64>> + ?Sized,
{
    let tables: Vec<_> = groups.iter().map(|&(_, m)| stencil(m, order)).collect();
    // Every stencil's weights sum to zero, so subtracting the centre value is free
    // and makes constant fields differentiate to exactly zero.
    let centre = f(p)?;
    let mut counters = vec![0usize; groups.len()];
    let mut acc: Option<Vec<f64>> = None;
    loop {
        let mut weight = 1.0;
        let mut q = *p;
        for (g, &(axis, _)) in groups.iter().enumerate() {
            let (offs, ws) = tables[g];
            weight *= ws[counters[g]];
            q = q.shifted(axis, offs[counters[g]] as f64 * steps[axis]);
        }
        let vals = f(&q)?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(q));
        }
        match acc.as_mut() {
            _ if vals.len() != centre.len() => {
                return Err(Error::ShapeMismatch("sampler changed output length".into()))
            }
            None => acc = Some(vals.iter().zip(&centre).map(|(v, c)| weight * (v - c)).collect()),
            Some(a) => {
                for ((x, v), c) in a.iter_mut().zip(&vals).zip(&centre) {
                    *x += weight * (v - c);
                }
            }
        }
        // Odometer over the stencil tables, last group fastest.
        let mut g = groups.len();
        loop {
            if g == 0 {
                let mut out = acc.expect("non-empty stencil");
                let mut scale = 1.0;
                for &(axis, m) in groups {
                    scale *= steps[axis].powi(m as i32);
                }
                for x in out.iter_mut() {
                    *x /= scale;
                }
                return Ok(out);
            }
            g -= 1;
            counters[g] += 1;
            if counters[g] < tables[g].0.len() {
                break;
            }
            counters[g] = 0;
        }
    }
}

fn group_axes(axes: &[usize]) -> Vec<(usize, usize)> {
    let mut sorted = axes.to_vec();
    sorted.sort_unstable();
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for a in sorted {
        match groups.last_mut() {
            Some((axis, m)) if *axis == a => *m += 1,
            _ => groups.push((a, 1)),
        }
    }
    groups
}

/// Mixed partial derivative of a vector-valued sampler along `axes` (one entry per
/// differentiation), with Richardson extrapolation and automatic step shrinking
/// when a stencil point leaves the domain.
pub fn partial_vec_estimate<F>(f: &F, p: &Point, axes: &[usize], cfg: &StencilConfig) -> Result<Estimate>
where
    F: Fn(&Point) -> Result<Vec<f64>> + ?Sized,
{
    cfg.validate()?;
    if axes.is_empty() || axes.len() > 3 || axes.iter().any(|&a| a > 3) {
        return Err(Error::InvalidParameter(format!("unsupported derivative axes {axes:?}")));
    }
    let groups = group_axes(axes);
    let base = if axes.len() == 3 { cfg.third_step } else { cfg.step };
    let mut h = base;
    for _ in 0..=MAX_SHRINKS {
        match richardson(f, p, &groups, h, cfg) {
            Err(Error::OutsideDomain(_)) => h *= 0.5,
            other => return other,
        }
    }
    Err(Error::StencilOutOfDomain { point: *p, step: h })
}

fn richardson<F>(f: &F, p: &Point, groups: &[(usize, usize)], h: f64, cfg: &StencilConfig) -> Result<Estimate>
where
    F: Fn(&Point) -> Result<Vec<f64>> + ?Sized,
{
    let coords = p.coords();
    let levels = cfg.richardson_levels;
    let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(levels);
    for i in 0..levels {
        let scale = h / (1u64 << i) as f64;
        let steps = [0, 1, 2, 3].map(|a| scale * coords[a].abs().max(1.0));
        let mut row = vec![apply_stencil(f, p, groups, &steps, cfg.order)?];
        for j in 1..=i {
            let factor = 4f64.powi(cfg.order as i32 / 2 + j as i32 - 1) - 1.0;
            let prev = &table[i - 1][j - 1];
            let cur = &row[j - 1];
            let next: Vec<f64> = cur.iter().zip(prev).map(|(c, q)| c + (c - q) / factor).collect();
            row.push(next);
        }
        table.push(row);
    }
    let last = table.last().expect("levels >= 1");
    let best = last.last().expect("row non-empty").clone();
    let error = (levels > 1).then(|| {
        let second = &last[last.len() - 2];
        best.iter().zip(second).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    });
    Ok(Estimate { values: best, error })
}

pub fn partial_vec<F>(f: &F, p: &Point, axes: &[usize], cfg: &StencilConfig) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> Result<Vec<f64>> + ?Sized,
{
    partial_vec_estimate(f, p, axes, cfg).map(|e| e.values)
}

fn scalar_partial(f: &FieldFn, p: &Point, axes: &[usize], cfg: &StencilConfig) -> Result<f64> {
    if !f.contains(p) {
        return Err(Error::OutsideDomain(*p));
    }
    let sampler = |q: &Point| f.value(q).map(|v| vec![v]);
    Ok(partial_vec(&sampler, p, axes, cfg)?[0])
}

/// First partial derivative; uses the exact gradient when one is attached.
pub fn d1(f: &FieldFn, p: &Point, axis: usize, cfg: &StencilConfig) -> Result<f64> {
    if axis > 3 {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    if let Some(g) = f.exact_gradient(p) {
        if !f.contains(p) {
            return Err(Error::OutsideDomain(*p));
        }
        return Ok(g[axis]);
    }
    scalar_partial(f, p, &[axis], cfg)
}

pub fn d2(f: &FieldFn, p: &Point, a: usize, b: usize, cfg: &StencilConfig) -> Result<f64> {
    scalar_partial(f, p, &[a, b], cfg)
}

pub fn d3(f: &FieldFn, p: &Point, a: usize, b: usize, c: usize, cfg: &StencilConfig) -> Result<f64> {
    scalar_partial(f, p, &[a, b, c], cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: f64, x: [f64; 3]) -> Point {
        Point::new(t, x)
    }

    #[test]
    fn first_derivative_of_square() {
        let f = FieldFn::new(|p| p.t * p.t);
        let v = d1(&f, &pt(3.0, [0.0; 3]), 0, &StencilConfig::default()).unwrap();
        assert!((v - 6.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn second_derivative_of_sine() {
        let f = FieldFn::new(|p| p.x[0].sin());
        let v = d2(&f, &pt(0.0, [0.7, 0.0, 0.0]), 1, 1, &StencilConfig::default()).unwrap();
        assert!((v + 0.7f64.sin()).abs() < 1e-7, "{v}");
    }

    #[test]
    fn mixed_third_derivative() {
        let f = FieldFn::new(|p| p.x[0] * p.x[1] * p.x[2]);
        let v = d3(&f, &pt(0.0, [0.3, -1.2, 2.0]), 1, 2, 3, &StencilConfig::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn mixed_partials_are_bitwise_symmetric() {
        let f = FieldFn::new(|p| (p.t * p.x[0]).sin() * (p.x[1] + 2.0 * p.x[2]).exp());
        let p = pt(0.4, [0.9, -0.3, 0.2]);
        let cfg = StencilConfig::default();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(d2(&f, &p, a, b, &cfg).unwrap(), d2(&f, &p, b, a, &cfg).unwrap());
            }
        }
        assert_eq!(d3(&f, &p, 0, 1, 2, &cfg).unwrap(), d3(&f, &p, 2, 0, 1, &cfg).unwrap());
    }

    #[test]
    fn order_two_error_quarters_when_step_halves() {
        let f = FieldFn::new(|p| p.x[0].sin());
        let p = pt(0.0, [0.7, 0.0, 0.0]);
        let exact = 0.7f64.cos();
        let cfg = |h| StencilConfig { step: h, third_step: h, order: 2, richardson_levels: 1 };
        let e1 = (d1(&f, &p, 1, &cfg(0.1)).unwrap() - exact).abs();
        let e2 = (d1(&f, &p, 1, &cfg(0.05)).unwrap() - exact).abs();
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn step_shrinks_near_domain_edge() {
        let f = FieldFn::new(|p| p.x[0].ln()).with_guard(|p| p.x[0] > 0.0);
        let x = 1.5e-3;
        let v = d1(&f, &pt(0.0, [x, 0.0, 0.0]), 1, &StencilConfig::default()).unwrap();
        assert!((v * x - 1.0).abs() < 1e-3, "{v}");
        let outside = d1(&f, &pt(0.0, [-1.0, 0.0, 0.0]), 1, &StencilConfig::default());
        assert!(matches!(outside, Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn stencil_that_never_fits_is_rejected() {
        let f = FieldFn::new(|p| p.x[0]).with_guard(|p| p.x[0] >= 0.0);
        let r = d1(&f, &pt(0.0, [0.0, 0.0, 0.0]), 1, &StencilConfig::default());
        assert!(matches!(r, Err(Error::StencilOutOfDomain { .. })));
    }

    #[test]
    fn non_finite_values_are_errors() {
        let f = FieldFn::new(|p| p.x[0].sqrt());
        let r = d1(&f, &pt(0.0, [0.0, 0.0, 0.0]), 1, &StencilConfig::default());
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn exact_gradient_self_check() {
        let good = FieldFn::new(|p| p.t * p.x[1]).with_gradient(|p| [p.x[1], 0.0, p.t, 0.0]);
        let pts = [pt(1.0, [0.0, 2.0, 0.0]), pt(-0.5, [1.0, 1.0, 1.0])];
        assert!(good.self_check(&pts, &StencilConfig::default()).unwrap() < 1e-9);
        let bad = FieldFn::new(|p| p.t * p.x[1]).with_gradient(|_| [1.0, 0.0, 0.0, 0.0]);
        assert!(bad.self_check(&pts, &StencilConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(StencilConfig { order: 3, ..Default::default() }.validate().is_err());
        assert!(StencilConfig { richardson_levels: 0, ..Default::default() }.validate().is_err());
        assert!(StencilConfig { step: 0.0, ..Default::default() }.validate().is_err());
    }
}
