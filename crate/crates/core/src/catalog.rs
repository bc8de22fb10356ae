//! Analytic zero-shift spacetimes with closed-form reference values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::numdiff::FieldFn;
use crate::point::Point;
use crate::tensor::Mat3;

/// Structural labels a metric is known to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeclaredClass {
    Flat,
    Vacuum,
    PureElectric,
    ConformallyFlat,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Cartesian,
    /// Spatial coordinates (r, theta, phi).
    Spherical,
}

/// Closed-form quantities available for oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    Lapse,
    SqrtDet,
    MeanCurvature,
    Density,
    Pressure,
    EosK,
    /// |A_abcd|^2 (equal in both metrics).
    SchoutenNormSq,
    /// |W|^2 in the Lorentzian metric.
    WeylNormSq,
    /// |Riemann|^2 in the Lorentzian metric.
    Kretschmann,
    EntropyDensity,
    AlphaMax,
}

impl Quantity {
    pub const ALL: [Quantity; 11] = [
        Quantity::Lapse,
        Quantity::SqrtDet,
        Quantity::MeanCurvature,
        Quantity::Density,
        Quantity::Pressure,
        Quantity::EosK,
        Quantity::SchoutenNormSq,
        Quantity::WeylNormSq,
        Quantity::Kretschmann,
        Quantity::EntropyDensity,
        Quantity::AlphaMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Lapse => "N",
            Quantity::SqrtDet => "sqrtg",
            Quantity::MeanCurvature => "H",
            Quantity::Density => "M",
            Quantity::Pressure => "P",
            Quantity::EosK => "k",
            Quantity::SchoutenNormSq => "A2",
            Quantity::WeylNormSq => "W2",
            Quantity::Kretschmann => "kretschmann",
            Quantity::EntropyDensity => "s",
            Quantity::AlphaMax => "alpha_max",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|q| q.name() == name).ok_or_else(|| Error::UnknownQuantity(name.to_string()))
    }
}

/// Energy density M, pressure P and equation-of-state parameter k = P/M + 1.
#[derive(Clone, Debug)]
pub struct FluidMetadata {
    pub density: FieldFn,
    pub pressure: FieldFn,
    pub eos_k: FieldFn,
}

/// Fluid parameters entering s_crit and the evolution inequalities.
/// `k_prime` and `alpha_prime` are defined through D_T u = u' H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub k: f64,
    pub alpha: f64,
    pub k_prime: f64,
    pub alpha_prime: f64,
}

impl FluidParams {
    pub fn constant(k: f64, alpha: f64) -> Self {
        Self { k, alpha, k_prime: 0.0, alpha_prime: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let fin = [self.k, self.alpha, self.k_prime, self.alpha_prime].iter().all(|v| v.is_finite());
        if !fin || !(0.0..=4.0 / 3.0).contains(&self.k) || !(0.0..=1.0 / 3.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "fluid parameters need k in [0, 4/3] and alpha in [0, 1/3], got k={} alpha={}",
                self.k, self.alpha
            )));
        }
        Ok(())
    }

    /// The primed rates are zero by convention where the mean curvature vanishes.
    pub fn at_mean_curvature(&self, h_mean: f64, tol: f64) -> Self {
        if h_mean.abs() <= tol {
            Self { k_prime: 0.0, alpha_prime: 0.0, ..*self }
        } else {
            *self
        }
    }

    /// Whether the evolution inequalities on (k', alpha') hold.
    pub fn evolution_inequalities_hold(&self, tol: f64) -> bool {
        let (k, a) = (self.k, self.alpha);
        if self.alpha_prime < -tol || self.k_prime < -tol {
            return false;
        }
        if (4.0 - 3.0 * k).abs() < 1e-15 {
            // k = 4/3 makes the bound infinite.
            return true;
        }
        let lead = k * (9.0 * k * k - 12.0 * k + 8.0) / (3.0 * (4.0 - 3.0 * k));
        let ratio =
            if 1.0 - 3.0 * a <= 0.0 { 1.0 } else { (9.0 * self.alpha_prime / (4.0 * (1.0 - 3.0 * a))).min(1.0) };
        self.k_prime <= lead * ratio + tol
    }
}

type DomainFn = dyn Fn(&Point) -> bool + Send + Sync;
type ExactFn = dyn Fn(Quantity, &Point) -> Option<f64> + Send + Sync;

/// A zero-shift spacetime: lapse, spatial metric, domain and metadata.
#[derive(Clone)]
pub struct MetricSpec {
    pub name: String,
    pub description: String,
    pub params: BTreeMap<String, f64>,
    pub lapse: FieldFn,
    /// Components g11, g12, g13, g22, g23, g33.
    pub spatial: [FieldFn; 6],
    pub fluid: Option<FluidMetadata>,
    pub declared: Vec<DeclaredClass>,
    pub chart: Chart,
    /// Per-coordinate ranges [t, x1, x2, x3] used for seeded sample points.
    pub sample_box: [[f64; 2]; 4],
    domain: Arc<DomainFn>,
    exact: Option<Arc<ExactFn>>,
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSpec")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("declared", &self.declared)
            .field("chart", &self.chart)
            .finish()
    }
}

/// Index of the stored component for spatial slots (i, j).
pub fn spatial_slot(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

impl MetricSpec {
    fn build(
        name: &str,
        description: &str,
        params: BTreeMap<String, f64>,
        domain: Arc<DomainFn>,
        lapse: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        spatial: [Box<dyn Fn(&Point) -> f64 + Send + Sync>; 6],
    ) -> Self {
        let guard = |d: &Arc<DomainFn>| {
            let d = d.clone();
            move |p: &Point| d(p)
        };
        let lapse = FieldFn::new(lapse).with_guard(guard(&domain));
        let spatial = spatial.map(|f| FieldFn::new(move |p| f(p)).with_guard(guard(&domain)));
        Self {
            name: name.to_string(),
            description: description.to_string(),
            params,
            lapse,
            spatial,
            fluid: None,
            declared: Vec::new(),
            chart: Chart::Cartesian,
            sample_box: [[1.0, 2.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
            domain,
            exact: None,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.is_finite() && (self.domain)(p)
    }

    pub fn lapse_at(&self, p: &Point) -> Result<f64> {
        let n = self.lapse.value(p)?;
        if n <= 0.0 {
            return Err(Error::SingularMetric(*p));
        }
        Ok(n)
    }

    pub fn spatial_metric(&self, p: &Point) -> Result<Mat3> {
        let mut g = Mat3::zeros();
        for i in 0..3 {
            for j in i..3 {
                let v = self.spatial[spatial_slot(i, j)].value(p)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        if g.cholesky().is_none() {
            return Err(Error::SingularMetric(*p));
        }
        Ok(g)
    }

    /// Spatial metric components without domain or definiteness checks.
    pub fn raw_spatial_metric(&self, p: &Point) -> Mat3 {
        Mat3::from_fn(|i, j| self.spatial[spatial_slot(i, j)].raw(p))
    }

    pub fn is_declared(&self, class: DeclaredClass) -> bool {
        self.declared.contains(&class)
    }

    /// Closed-form value of a named quantity; `Ok(None)` when this metric has no formula for it.
    pub fn exact_reference(&self, quantity: &str, p: &Point) -> Result<Option<f64>> {
        let q = Quantity::from_name(quantity)?;
        Ok(self.exact_value(q, p))
    }

    pub fn exact_value(&self, q: Quantity, p: &Point) -> Option<f64> {
        if !self.contains(p) {
            return None;
        }
        self.exact.as_ref().and_then(|f| f(q, p))
    }

    /// Seeded, reproducible points inside the sample box (rejecting points outside the domain).
    pub fn sample_points(&self, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(self.name.as_bytes()));
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n && attempts < 1000 * n.max(1) {
            attempts += 1;
            let c = [0, 1, 2, 3].map(|a| {
                let [lo, hi] = self.sample_box[a];
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            });
            let p = Point::from_coords(c);
            if self.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Same geometry in spatial coordinates scaled by `factor` (x' = factor x).
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidParameter("rescale factor must be positive".into()));
        }
        let back = move |p: &Point| Point::new(p.t, p.x.map(|v| v / factor));
        let old = self.clone();
        let domain = old.domain.clone();
        let mut spec = self.clone();
        spec.name = format!("{}@x{}", self.name, factor);
        spec.domain = Arc::new(move |p| domain(&back(p)));
        let d2 = spec.domain.clone();
        let lapse = old.lapse.clone();
        spec.lapse = FieldFn::new(move |p| lapse.value(&back(p)).unwrap_or(f64::NAN)).with_guard(move |p| d2(p));
        for k in 0..6 {
            let f = old.spatial[k].clone();
            let d = spec.domain.clone();
            let s = factor * factor;
            spec.spatial[k] =
                FieldFn::new(move |p| f.value(&back(p)).unwrap_or(f64::NAN) / s).with_guard(move |p| d(p));
        }
        if let Some(fl) = &old.fluid {
            let wrap = |f: &FieldFn| {
                let f = f.clone();
                FieldFn::new(move |p| f.value(&back(p)).unwrap_or(f64::NAN))
            };
            spec.fluid = Some(FluidMetadata {
                density: wrap(&fl.density),
                pressure: wrap(&fl.pressure),
                eos_k: wrap(&fl.eos_k),
            });
        }
        for a in 1..4 {
            spec.sample_box[a] = [self.sample_box[a][0] * factor, self.sample_box[a][1] * factor];
        }
        // Scalars are chart independent; densities are not, so only keep the former.
        spec.exact = old.exact.clone().map(|f| {
            Arc::new(move |q: Quantity, p: &Point| match q {
                Quantity::SqrtDet => None,
                _ => f(q, &back(p)),
            }) as Arc<ExactFn>
        });
        Ok(spec)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn constant_fluid(density: impl Fn(&Point) -> f64 + Send + Sync + Clone + 'static, k: f64) -> FluidMetadata {
    let d = density.clone();
    FluidMetadata {
        density: FieldFn::new(density),
        pressure: FieldFn::new(move |p| (k - 1.0) * d(p)),
        eos_k: FieldFn::constant(k),
    }
}

fn zero() -> Box<dyn Fn(&Point) -> f64 + Send + Sync> {
    Box::new(|_| 0.0)
}

fn away_from_poles(theta: f64) -> bool {
    theta > 0.01 && theta < PI - 0.01
}

/// Parameter block accessor that rejects unknown keys and non-numeric values.
struct Params<'a> {
    name: &'a str,
    obj: serde_json::Map<String, Value>,
    out: BTreeMap<String, f64>,
}

impl<'a> Params<'a> {
    fn new(name: &'a str, v: &Value) -> Result<Self> {
        let obj = match v {
            Value::Null => serde_json::Map::new(),
            Value::Object(m) => m.clone(),
            other => {
                return Err(Error::InvalidParameter(format!("parameters for `{name}` must be an object, got {other}")))
            }
        };
        Ok(Self { name, obj, out: BTreeMap::new() })
    }

    fn num(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = match self.obj.remove(key) {
            None => default,
            Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            Some(other) => {
                return Err(Error::InvalidParameter(format!("`{}.{key}` must be a number, got {other}", self.name)))
            }
        };
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("`{}.{key}` is not finite", self.name)));
        }
        self.out.insert(key.to_string(), v);
        Ok(v)
    }

    fn text(&mut self, key: &str, default: &str) -> Result<String> {
        match self.obj.remove(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s),
            Some(other) => Err(Error::InvalidParameter(format!("`{}.{key}` must be a string, got {other}", self.name))),
        }
    }

    fn finish(self) -> Result<BTreeMap<String, f64>> {
        if let Some(k) = self.obj.keys().next() {
            return Err(Error::InvalidParameter(format!("unknown parameter `{k}` for `{}`", self.name)));
        }
        Ok(self.out)
    }
}

pub fn minkowski() -> MetricSpec {
    let mut s = MetricSpec::build(
        "minkowski",
        "flat spacetime in Cartesian coordinates",
        BTreeMap::new(),
        Arc::new(|_| true),
        |_| 1.0,
        [Box::new(|_| 1.0), zero(), zero(), Box::new(|_| 1.0), zero(), Box::new(|_| 1.0)],
    );
    s.declared =
        vec![DeclaredClass::Flat, DeclaredClass::Vacuum, DeclaredClass::ConformallyFlat, DeclaredClass::Static];
    s.sample_box = [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]];
    s.exact = Some(Arc::new(|q, _| match q {
        Quantity::Lapse | Quantity::SqrtDet | Quantity::EntropyDensity => Some(1.0),
        Quantity::AlphaMax => Some(1.0 / 3.0),
        Quantity::EosK => None,
        _ => Some(0.0),
    }));
    s
}

pub fn schwarzschild(mass: f64) -> Result<MetricSpec> {
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("schwarzschild mass must be positive, got {mass}")));
    }
    let m = mass;
    let f = move |p: &Point| 1.0 - 2.0 * m / p.x[0];
    let mut s = MetricSpec::build(
        "schwarzschild",
        "Schwarzschild exterior in static coordinates (r, theta, phi)",
        BTreeMap::from([("m".to_string(), m)]),
        Arc::new(move |p| p.x[0] >= 2.0 * m * (1.0 + 1e-2) && away_from_poles(p.x[1])),
        move |p| f(p).sqrt(),
        [
            Box::new(move |p| 1.0 / f(p)),
            zero(),
            zero(),
            Box::new(|p| p.x[0] * p.x[0]),
            zero(),
            Box::new(|p| (p.x[0] * p.x[1].sin()).powi(2)),
        ],
    );
    s.chart = Chart::Spherical;
    s.declared = vec![DeclaredClass::Vacuum, DeclaredClass::Static];
    s.sample_box = [[0.0, 1.0], [3.0 * m, 8.0 * m], [0.6, 2.5], [0.0, 2.0 * PI]];
    s.exact = Some(Arc::new(move |q, p| {
        let r = p.x[0];
        Some(match q {
            Quantity::Lapse => f(p).sqrt(),
            Quantity::SqrtDet => r * r * p.x[1].sin() / f(p).sqrt(),
            Quantity::WeylNormSq | Quantity::Kretschmann => 48.0 * m * m / r.powi(6),
            Quantity::EntropyDensity => 1.0,
            Quantity::AlphaMax => 1.0 / 3.0,
            Quantity::EosK => return None,
            _ => 0.0,
        })
    }));
    Ok(s)
}

/// Spatially flat FLRW in Cartesian coordinates with unit lapse.
fn flat_flrw(
    name: &str,
    description: &str,
    params: BTreeMap<String, f64>,
    domain: Arc<DomainFn>,
    scale: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static,
) -> MetricSpec {
    let a2 = move |p: &Point| scale(p.t).powi(2);
    let (x, y, z) = (a2.clone(), a2.clone(), a2);
    let mut s = MetricSpec::build(
        name,
        description,
        params,
        domain,
        |_| 1.0,
        [Box::new(x), zero(), zero(), Box::new(y), zero(), Box::new(z)],
    );
    s.declared = vec![DeclaredClass::ConformallyFlat];
    s
}

pub fn einstein_de_sitter() -> MetricSpec {
    let mut s = flat_flrw(
        "eds",
        "Einstein-de Sitter dust universe, a(t) = t^(2/3)",
        BTreeMap::new(),
        Arc::new(|p| p.t > 0.05),
        |t| t.powf(2.0 / 3.0),
    );
    let density = |p: &Point| 4.0 / (3.0 * p.t * p.t);
    s.fluid = Some(constant_fluid(density, 1.0));
    s.sample_box = [[0.8, 2.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]];
    s.exact = Some(Arc::new(move |q, p| {
        let t = p.t;
        let m = density(p);
        Some(match q {
            Quantity::Lapse => 1.0,
            Quantity::SqrtDet => t * t,
            Quantity::MeanCurvature => -2.0 / t,
            Quantity::Density => m,
            Quantity::Pressure => 0.0,
            Quantity::EosK => 1.0,
            Quantity::SchoutenNormSq | Quantity::Kretschmann => 5.0 / 3.0 * m * m,
            Quantity::WeylNormSq | Quantity::EntropyDensity => 0.0,
            Quantity::AlphaMax => 1.0 / 3.0,
        })
    }));
    s
}

pub fn de_sitter(lambda: f64) -> Result<MetricSpec> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("de Sitter rate must be positive, got {lambda}")));
    }
    let mut s = flat_flrw(
        "desitter",
        "de Sitter vacuum-energy universe, a(t) = exp(lambda t)",
        BTreeMap::from([("lambda".to_string(), lambda)]),
        Arc::new(|p| p.t.abs() < 50.0),
        move |t| (lambda * t).exp(),
    );
    let m = 3.0 * lambda * lambda;
    s.fluid = Some(constant_fluid(move |_| m, 0.0));
    s.sample_box = [[-0.5, 0.5], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]];
    s.exact = Some(Arc::new(move |q, p| {
        Some(match q {
            Quantity::Lapse => 1.0,
            Quantity::SqrtDet => (3.0 * lambda * p.t).exp(),
            Quantity::MeanCurvature => -3.0 * lambda,
            Quantity::Density => m,
            Quantity::Pressure => -m,
            Quantity::EosK => 0.0,
            Quantity::SchoutenNormSq | Quantity::Kretschmann => 8.0 / 3.0 * m * m,
            Quantity::WeylNormSq | Quantity::EntropyDensity => 0.0,
            Quantity::AlphaMax => 1.0 / 3.0,
        })
    }));
    Ok(s)
}

pub fn kasner(p1: f64, p2: f64, p3: f64) -> MetricSpec {
    let ps = [p1, p2, p3];
    let sum: f64 = ps.iter().sum();
    let sum_sq: f64 = ps.iter().map(|p| p * p).sum();
    let vacuum = (sum - 1.0).abs() < 1e-12 && (sum_sq - 1.0).abs() < 1e-12;
    let comp = |e: f64| -> Box<dyn Fn(&Point) -> f64 + Send + Sync> { Box::new(move |p: &Point| p.t.powf(2.0 * e)) };
    let mut s = MetricSpec::build(
        "kasner",
        "Kasner / diagonal Bianchi I, g = diag(t^(2 p1), t^(2 p2), t^(2 p3))",
        BTreeMap::from([("p1".to_string(), p1), ("p2".to_string(), p2), ("p3".to_string(), p3)]),
        Arc::new(|p| p.t > 0.05),
        |_| 1.0,
        [comp(p1), zero(), zero(), comp(p2), zero(), comp(p3)],
    );
    s.declared = if vacuum {
        vec![DeclaredClass::Vacuum, DeclaredClass::PureElectric]
    } else {
        vec![DeclaredClass::PureElectric]
    };
    s.sample_box = [[0.8, 2.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]];
    s.exact = Some(Arc::new(move |q, p| {
        let t = p.t;
        let expanding = ps.iter().all(|&v| v >= 0.0);
        Some(match q {
            Quantity::Lapse => 1.0,
            Quantity::SqrtDet => t.powf(sum),
            Quantity::MeanCurvature => -sum / t,
            Quantity::Density => (sum * sum - sum_sq) / (2.0 * t * t),
            Quantity::WeylNormSq | Quantity::Kretschmann if vacuum => -16.0 * p1 * p2 * p3 / t.powi(4),
            Quantity::EntropyDensity if vacuum => 1.0,
            Quantity::Pressure | Quantity::SchoutenNormSq if vacuum => 0.0,
            Quantity::AlphaMax if expanding && sum > 0.0 => ps.iter().fold(1.0f64 / 3.0, |m, &v| m.min(v / sum)),
            _ => return None,
        })
    }));
    s
}

/// Marginally bound LTB dust with areal radius R = r (t - t_B(r))^(2/3),
/// bang time t_B = -b r^2 / (1 + r^2) and mass function m(r) = 2 r^3 / 9.
pub fn ltb(bang: f64) -> Result<MetricSpec> {
    if !(0.0..=2.0).contains(&bang) {
        return Err(Error::InvalidParameter(format!("ltb bang amplitude must lie in [0, 2], got {bang}")));
    }
    let b = bang;
    // tau = t - t_B(r) and its radial derivative.
    let tau = move |t: f64, r: f64| t + b * r * r / (1.0 + r * r);
    let tau_r = move |r: f64| 2.0 * b * r / (1.0 + r * r).powi(2);
    let areal = move |p: &Point| p.x[0] * tau(p.t, p.x[0]).powf(2.0 / 3.0);
    let areal_r = move |p: &Point| {
        let (r, tt) = (p.x[0], tau(p.t, p.x[0]));
        tt.powf(2.0 / 3.0) + 2.0 / 3.0 * r * tt.powf(-1.0 / 3.0) * tau_r(r)
    };
    let mut s = MetricSpec::build(
        "ltb",
        "marginally bound Lemaitre-Tolman-Bondi dust with inhomogeneous bang time, coordinates (r, theta, phi)",
        BTreeMap::from([("b".to_string(), b)]),
        Arc::new(move |p| p.t > 0.05 && p.x[0] > 0.05 && away_from_poles(p.x[1])),
        |_| 1.0,
        [
            Box::new(move |p| areal_r(p).powi(2)),
            zero(),
            zero(),
            Box::new(move |p| areal(p).powi(2)),
            zero(),
            Box::new(move |p| (areal(p) * p.x[1].sin()).powi(2)),
        ],
    );
    let density = move |p: &Point| 4.0 / 3.0 * p.x[0] * p.x[0] / (areal(p).powi(2) * areal_r(p));
    s.fluid = Some(constant_fluid(density, 1.0));
    s.chart = Chart::Spherical;
    s.declared = vec![DeclaredClass::PureElectric];
    s.sample_box = [[1.0, 2.0], [0.6, 1.4], [0.6, 2.5], [0.0, 2.0 * PI]];
    s.exact = Some(Arc::new(move |q, p| {
        let (r, tt) = (p.x[0], tau(p.t, p.x[0]));
        let rr = areal(p);
        let rr_r = areal_r(p);
        let rr_t = 2.0 / 3.0 * r * tt.powf(-1.0 / 3.0);
        let rr_tr = 2.0 / 3.0 * tt.powf(-1.0 / 3.0) - 2.0 / 9.0 * r * tt.powf(-4.0 / 3.0) * tau_r(r);
        let m = density(p);
        Some(match q {
            Quantity::Lapse => 1.0,
            Quantity::SqrtDet => rr_r * rr * rr * p.x[1].sin(),
            Quantity::MeanCurvature => -(rr_tr / rr_r + 2.0 * rr_t / rr),
            Quantity::Density => m,
            Quantity::Pressure => 0.0,
            Quantity::EosK => 1.0,
            Quantity::SchoutenNormSq => 5.0 / 3.0 * m * m,
            _ => return None,
        })
    }));
    Ok(s)
}

/// g = exp(2 sigma) delta with a user-given sigma(t, x) and lapse N(t, x).
pub fn conformal(sigma: &str, lapse: &str, params: &BTreeMap<String, f64>) -> Result<MetricSpec> {
    let sigma = Expr::parse_with(sigma, params)?;
    let lapse = Expr::parse_with(lapse, params)?;
    let description = format!("conformally rescaled flat slices, sigma = {sigma}, N = {lapse}");
    let e2s = {
        let s = sigma.clone();
        move |p: &Point| (2.0 * s.eval(p)).exp()
    };
    let l2 = lapse.clone();
    let (a, b, c) = (e2s.clone(), e2s.clone(), e2s);
    let mut s = MetricSpec::build(
        "conformal",
        &description,
        params.clone(),
        Arc::new(move |p| l2.eval(p) > 0.0),
        move |p| lapse.eval(p),
        [Box::new(a), zero(), zero(), Box::new(b), zero(), Box::new(c)],
    );
    s.declared = vec![DeclaredClass::PureElectric];
    Ok(s)
}

/// JSON description of a user metric.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomMetric {
    #[serde(default = "custom_name")]
    pub name: String,
    #[serde(default = "one")]
    pub lapse: String,
    /// Keys "11", "12", "13", "22", "23", "33"; missing off-diagonals are zero.
    pub g: BTreeMap<String, String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Open coordinate intervals keyed by "t", "x1", "x2", "x3".
    #[serde(default)]
    pub domain: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub sample_box: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub declared: Vec<DeclaredClass>,
}

fn custom_name() -> String {
    "custom".into()
}

fn one() -> String {
    "1".into()
}

const AXES: [&str; 4] = ["t", "x1", "x2", "x3"];

pub fn custom(desc: &CustomMetric) -> Result<MetricSpec> {
    let mut comps: Vec<Box<dyn Fn(&Point) -> f64 + Send + Sync>> = Vec::new();
    for key in ["11", "12", "13", "22", "23", "33"] {
        match desc.g.get(key) {
            Some(src) => {
                let e = Expr::parse_with(src, &desc.params)?;
                comps.push(Box::new(move |p| e.eval(p)));
            }
            None if key.as_bytes()[0] == key.as_bytes()[1] => {
                return Err(Error::InvalidParameter(format!("custom metric is missing g{key}")))
            }
            None => comps.push(zero()),
        }
    }
    for key in desc.g.keys().chain(desc.domain.keys()).chain(desc.sample_box.keys()) {
        let known = ["11", "12", "13", "22", "23", "33"].contains(&key.as_str()) || AXES.contains(&key.as_str());
        if !known {
            return Err(Error::InvalidParameter(format!("unknown key `{key}` in custom metric")));
        }
    }
    let mut bounds = [[f64::NEG_INFINITY, f64::INFINITY]; 4];
    for (a, name) in AXES.iter().enumerate() {
        if let Some(r) = desc.domain.get(*name) {
            if !(r[0] < r[1]) {
                return Err(Error::InvalidParameter(format!("empty domain interval for {name}")));
            }
            bounds[a] = *r;
        }
    }
    let lapse = Expr::parse_with(&desc.lapse, &desc.params)?;
    let l2 = lapse.clone();
    let domain: Arc<DomainFn> = Arc::new(move |p| {
        let c = p.coords();
        (0..4).all(|a| c[a] > bounds[a][0] && c[a] < bounds[a][1]) && l2.eval(p) > 0.0
    });
    let comps: [Box<dyn Fn(&Point) -> f64 + Send + Sync>; 6] =
        comps.try_into().unwrap_or_else(|_| unreachable!("six components"));
    let mut s = MetricSpec::build(
        &desc.name,
        "user metric from a JSON description",
        desc.params.clone(),
        domain,
        move |p| lapse.eval(p),
        comps,
    );
    for (a, name) in AXES.iter().enumerate() {
        let default = if a == 0 { [1.0, 2.0] } else { [-1.0, 1.0] };
        let r = desc.sample_box.get(*name).copied().unwrap_or(default);
        let lo = r[0].max(bounds[a][0]);
        let hi = r[1].min(bounds[a][1]);
        if !(lo <= hi) {
            return Err(Error::InvalidParameter(format!("sample box for {name} misses the domain")));
        }
        s.sample_box[a] = [lo, hi];
    }
    s.declared = desc.declared.clone();
    Ok(s)
}

/// Names accepted by [`lookup`].
pub const CATALOG_NAMES: [&str; 7] = ["minkowski", "schwarzschild", "eds", "desitter", "kasner", "ltb", "conformal"];

/// Builds a catalog metric from its name and a JSON parameter object (or null).
/// The name `custom` takes a full [`CustomMetric`] description instead.
pub fn lookup(name: &str, params: &Value) -> Result<MetricSpec> {
    if name == "custom" {
        let desc: CustomMetric = serde_json::from_value(params.clone())
            .map_err(|e| Error::InvalidParameter(format!("custom metric: {e}")))?;
        return custom(&desc);
    }
    let mut p = Params::new(name, params)?;
    let spec = match name {
        "minkowski" => {
            p.finish()?;
            minkowski()
        }
        "schwarzschild" => {
            let m = p.num("m", 1.0)?;
            p.finish()?;
            schwarzschild(m)?
        }
        "eds" => {
            p.finish()?;
            einstein_de_sitter()
        }
        "desitter" => {
            let l = p.num("lambda", 1.0)?;
            p.finish()?;
            de_sitter(l)?
        }
        "kasner" => {
            let p1 = p.num("p1", 2.0 / 3.0)?;
            let p2 = p.num("p2", 2.0 / 3.0)?;
            let p3 = p.num("p3", -1.0 / 3.0)?;
            p.finish()?;
            kasner(p1, p2, p3)
        }
        "ltb" => {
            let b = p.num("b", 0.3)?;
            p.finish()?;
            ltb(b)?
        }
        "conformal" => {
            let sigma = p.text("sigma", "t + 0.1*sin(x1)")?;
            let lapse = p.text("lapse", "1")?;
            let rest = std::mem::take(&mut p.obj);
            let mut consts = BTreeMap::new();
            for (k, v) in rest {
                let x =
                    v.as_f64().ok_or_else(|| Error::InvalidParameter(format!("`conformal.{k}` must be a number")))?;
                consts.insert(k, x);
            }
            conformal(&sigma, &lapse, &consts)?
        }
        other => return Err(Error::UnknownMetric(other.to_string())),
    };
    Ok(spec)
}

/// Every catalog metric with default parameters.
pub fn catalog_list() -> Vec<MetricSpec> {
    CATALOG_NAMES.iter().map(|n| lookup(n, &Value::Null).expect("default parameters are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn minkowski_is_unit() {
        let s = lookup("minkowski", &Value::Null).unwrap();
        let p = Point::new(0.3, [1.0, -2.0, 0.5]);
        assert_eq!(s.lapse_at(&p).unwrap(), 1.0);
        assert_eq!(s.spatial_metric(&p).unwrap(), Mat3::identity());
        assert_eq!(s.exact_reference("s", &p).unwrap(), Some(1.0));
        assert_eq!(s.exact_reference("M", &p).unwrap(), Some(0.0));
    }

    #[test]
    fn schwarzschild_lapse_at_three() {
        let s = lookup("schwarzschild", &json!({"m": 1.0})).unwrap();
        let p = Point::new(0.0, [3.0, 1.0, 0.0]);
        assert!((s.lapse_at(&p).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(!s.contains(&Point::new(0.0, [2.01, 1.0, 0.0])));
        assert!(s.contains(&Point::new(0.0, [2.03, 1.0, 0.0])));
    }

    #[test]
    fn eds_reference_values() {
        let s = lookup("eds", &Value::Null).unwrap();
        let p = Point::new(1.0, [0.0; 3]);
        assert_eq!(s.exact_reference("H", &p).unwrap(), Some(-2.0));
        let a2 = s.exact_reference("A2", &p).unwrap().unwrap();
        assert!((a2 - 80.0 / 27.0).abs() < 1e-14);
        assert!((s.exact_reference("M", &p).unwrap().unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_names_are_errors() {
        let s = minkowski();
        let p = Point::new(0.0, [0.0; 3]);
        assert!(matches!(s.exact_reference("entropy?", &p), Err(Error::UnknownQuantity(_))));
        assert!(matches!(lookup("godel", &Value::Null), Err(Error::UnknownMetric(_))));
        assert!(lookup("schwarzschild", &json!({"mass": 1.0})).is_err());
        assert!(lookup("schwarzschild", &json!({"m": -1.0})).is_err());
        assert!(lookup("schwarzschild", &json!({"m": "one"})).is_err());
    }

    #[test]
    fn fluid_equation_of_state_holds() {
        for spec in catalog_list() {
            let Some(fl) = &spec.fluid else { continue };
            for p in spec.sample_points(10, 7) {
                let (m, pr, k) =
                    (fl.density.value(&p).unwrap(), fl.pressure.value(&p).unwrap(), fl.eos_k.value(&p).unwrap());
                assert!((pr - (k - 1.0) * m).abs() < 1e-14, "{}", spec.name);
            }
        }
    }

    #[test]
    fn catalog_metrics_are_lorentzian_on_samples() {
        for spec in catalog_list() {
            let pts = spec.sample_points(20, 1);
            assert_eq!(pts.len(), 20, "{}", spec.name);
            for p in pts {
                assert!(spec.lapse_at(&p).unwrap() > 0.0);
                assert!(spec.spatial_metric(&p).is_ok());
            }
        }
    }

    #[test]
    fn sample_points_are_reproducible() {
        let s = kasner(2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0);
        assert_eq!(s.sample_points(5, 42), s.sample_points(5, 42));
        assert_ne!(s.sample_points(5, 42), s.sample_points(5, 43));
    }

    #[test]
    fn custom_metric_parses() {
        let desc = json!({
            "name": "wavy",
            "lapse": "1 + 0.1*x1*t",
            "g": {"11": "1 + a*t", "12": "0.1*sin(x2)", "22": "exp(t)", "33": "1"},
            "params": {"a": 0.5},
            "domain": {"t": [0.5, 3.0]}
        });
        let s = lookup("custom", &desc).unwrap();
        let p = Point::new(1.0, [0.2, 0.4, 0.0]);
        let g = s.spatial_metric(&p).unwrap();
        assert!((g[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((g[(1, 0)] - 0.1 * 0.4f64.sin()).abs() < 1e-15);
        assert!((s.lapse_at(&p).unwrap() - 1.02).abs() < 1e-15);
        assert!(!s.contains(&Point::new(0.1, [0.0; 3])));
        let missing = json!({"g": {"11": "1", "22": "1"}});
        assert!(lookup("custom", &missing).is_err());
    }

    #[test]
    fn conformal_sigma_is_user_defined() {
        let s = lookup("conformal", &json!({"sigma": "2/3*ln(t)"})).unwrap();
        let p = Point::new(2.0, [0.0; 3]);
        assert!((s.spatial_metric(&p).unwrap()[(2, 2)] - 2f64.powf(4.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn fluid_param_conventions() {
        let f = FluidParams { k: 1.0, alpha: 0.2, k_prime: 0.5, alpha_prime: 0.1 };
        assert!(f.validate().is_ok());
        let z = f.at_mean_curvature(0.0, 1e-12);
        assert_eq!((z.k_prime, z.alpha_prime), (0.0, 0.0));
        assert!(FluidParams::constant(1.5, 0.0).validate().is_err());
        assert!(FluidParams::constant(1.0, 0.3).evolution_inequalities_hold(0.0));
        let too_fast = FluidParams { k: 1.0, alpha: 0.2, k_prime: 10.0, alpha_prime: 1.0 };
        assert!(!too_fast.evolution_inequalities_hold(1e-12));
    }
}
