//! Identity and theorem harness: closed-form displays evaluated from the curvature
//! bundle against independent finite-difference oracles.

mod electric;
mod identities;
mod magnetic;
mod suite;

pub use electric::{
    check_electric_evolution, check_entropy_evolution_electric, check_monotonicity_electric,
    check_weyl_evolution_electric, entropy_evolution_formula, MonotonicityReport, ScanPoint,
};
pub use identities::{
    check_classification, check_conformal_class, check_curvature_identities, check_exact_channels, check_extremal,
    check_foliation_relations, check_mass_evolution, check_oracle_values, check_region_entropy, check_s_crit_table,
    check_weyl_derivative_identities,
};
pub use magnetic::{
    check_magnetic_synthetic, check_weyl_evolution_magnetic, magnetic_entropy_rates, magnetic_rhs,
    magnetic_rhs_orthonormal, synthetic_magnetic, MagneticEntropyRates, MagneticSample,
};
pub use suite::{default_suite, monotonicity_cases, run_suite, SuiteOptions, SuiteReport};

use serde::Serialize;

use crate::catalog::MetricSpec;
use crate::error::Result;
use crate::foliation::Snapshot;
use crate::numdiff::{partial_vec, StencilConfig};
use crate::point::Point;

/// A point where a check failed, with its residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Point,
    pub residual: f64,
    pub detail: String,
}

/// Outcome of one named check over a set of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationCase {
    pub case: String,
    pub metric: String,
    #[serde(rename = "maxResidual")]
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
    /// Points or sub-checks that were not applicable, with the reason.
    pub skipped: Vec<String>,
    pub notes: Vec<String>,
}

impl VerificationCase {
    pub fn new(case: impl Into<String>, metric: impl Into<String>, tol: f64) -> Self {
        Self {
            case: case.into(),
            metric: metric.into(),
            max_residual: 0.0,
            tol,
            pass: true,
            witnesses: Vec::new(),
            skipped: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records a residual; values above the tolerance (or NaN) fail the case.
    pub fn record(&mut self, point: Point, residual: f64, detail: impl Into<String>) {
        let bad = !(residual <= self.tol);
        if residual > self.max_residual || residual.is_nan() {
            self.max_residual = residual;
        }
        if bad {
            self.pass = false;
            self.witnesses.push(Witness { point, residual, detail: detail.into() });
        }
    }

    /// Records a boolean requirement as residual 0 or infinity.
    pub fn require(&mut self, point: Point, ok: bool, detail: impl Into<String>) {
        self.record(point, if ok { 0.0 } else { f64::INFINITY }, detail);
    }

    /// Records an error as a failure at the point.
    pub fn fail(&mut self, point: Point, detail: impl Into<String>) {
        self.pass = false;
        self.max_residual = f64::INFINITY;
        self.witnesses.push(Witness { point, residual: f64::INFINITY, detail: detail.into() });
    }

    pub fn skip(&mut self, reason: impl Into<String>) {
        self.skipped.push(reason.into());
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

/// Comparison of a time derivative from finite differences against a closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionReport {
    pub point: Point,
    /// D_T of the quantity by finite differences in t.
    pub lhs: f64,
    /// The closed-form expression.
    pub rhs: f64,
    /// |lhs - rhs| / max(|lhs|, |rhs|, floor).
    pub residual: f64,
    /// rhs >= -tol.
    pub monotone: bool,
    /// Named auxiliary values (alternative forms, predicates).
    pub extra: Vec<(String, f64)>,
    /// Set when the formula is not applicable at the point.
    pub skipped: Option<String>,
}

/// Relative residual with an absolute floor: below `floor` both sides count as zero-sized.
pub fn relative_residual(lhs: f64, rhs: f64, floor: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(floor)
}

/// Absolute floor so that `relative_residual <= rel` also accepts differences below `abs`.
pub fn residual_floor(rel: f64, abs: f64) -> f64 {
    abs / rel
}

/// D_T = N^{-1} d_t of snapshot-derived scalars, by finite differences in t at the coarse step.
pub fn time_rate<F>(spec: &MetricSpec, p: &Point, cfg: &StencilConfig, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Snapshot) -> Result<Vec<f64>>,
{
    let sampler = |q: &Point| -> Result<Vec<f64>> { f(&Snapshot::compute(spec, q, cfg)?) };
    let lapse = spec.lapse_at(p)?;
    let coarse = cfg.coarse();
    Ok(partial_vec(&sampler, p, &[0], &coarse)?.into_iter().map(|v| v / lapse).collect())
}

/// D_T of a plain field of the metric (no curvature), at the fine step.
pub fn time_rate_of_field<F>(spec: &MetricSpec, p: &Point, cfg: &StencilConfig, f: F) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64>,
{
    let sampler = |q: &Point| -> Result<Vec<f64>> { Ok(vec![f(q)?]) };
    Ok(partial_vec(&sampler, p, &[0], cfg)?[0] / spec.lapse_at(p)?)
}
