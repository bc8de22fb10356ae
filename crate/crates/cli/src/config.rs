//! Run configuration: JSON file merged under command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use weyl_lab_core::catalog::{lookup, FluidParams, MetricSpec};
use weyl_lab_core::entropy::{EntropyOptions, FluidChoice};
use weyl_lab_core::numdiff::StencilConfig;
use weyl_lab_core::point::Point;
use weyl_lab_core::quadrature::RegionSpec;

/// Problems with the configuration; these exit with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.t0];
        }
        (0..self.steps).map(|i| self.t0 + (self.t1 - self.t0) * i as f64 / (self.steps - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluidSetting {
    Auto,
    Absent,
    #[serde(untagged)]
    Fixed(FluidParams),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub only: Vec<String>,
    pub points: Option<usize>,
}

/// The JSON document accepted by `--config`. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub metric: Option<String>,
    /// Parameter block for the metric (the full description for `custom`).
    pub params: Option<Value>,
    pub region: Option<RegionSpec>,
    pub times: Option<TimeGrid>,
    /// Explicit points [t, x1, x2, x3] for `report`.
    pub points: Option<Vec<[f64; 4]>>,
    /// Number of seeded points for `report` when `points` is absent.
    pub samples: Option<usize>,
    pub fd: Option<StencilConfig>,
    pub tol: Option<f64>,
    pub zeta: Option<f64>,
    pub seed: Option<u64>,
    pub fluid: Option<FluidSetting>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub verify: Option<VerifySection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Catalog metric name (or `custom` with a description under `params`).
    #[arg(long)]
    pub metric: Option<String>,
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Zero tolerance for classification and entropy snapping.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Fully resolved settings: flag > file > default.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub metric_name: Option<String>,
    pub params: Value,
    pub region: Option<RegionSpec>,
    pub times: Option<TimeGrid>,
    pub points: Option<Vec<Point>>,
    pub samples: usize,
    pub stencil: StencilConfig,
    pub tol: f64,
    pub zeta: f64,
    pub seed: u64,
    pub fluid: FluidChoice,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub verify: VerifySection,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> anyhow::Result<Self> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let stencil = file.fd.unwrap_or_default();
        stencil.validate().map_err(|e| err(format!("fd: {e}")))?;
        let tol = flags.tol.or(file.tol).unwrap_or(1e-6);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(err(format!("tol must be positive, got {tol}")));
        }
        let zeta = file.zeta.unwrap_or(1.0);
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(err(format!("zeta must be positive, got {zeta}")));
        }
        if let Some(g) = &file.times {
            if g.steps < 2 || !(g.t1 > g.t0) {
                return Err(err("times needs t1 > t0 and steps >= 2"));
            }
        }
        if let Some(r) = &file.region {
            r.validate().map_err(|e| err(format!("region: {e}")))?;
        }
        let fluid = match file.fluid {
            None | Some(FluidSetting::Auto) => FluidChoice::Auto,
            Some(FluidSetting::Absent) => FluidChoice::Absent,
            Some(FluidSetting::Fixed(f)) => {
                f.validate().map_err(|e| err(format!("fluid: {e}")))?;
                FluidChoice::Fixed(f)
            }
        };
        Ok(Self {
            metric_name: flags.metric.clone().or(file.metric),
            params: file.params.unwrap_or(Value::Null),
            region: file.region,
            times: file.times,
            points: file.points.map(|v| v.into_iter().map(Point::from_coords).collect()),
            samples: file.samples.unwrap_or(20),
            stencil,
            tol,
            zeta,
            seed: flags.seed.or(file.seed).unwrap_or(1),
            fluid,
            out: flags.out.clone().or(file.out),
            format: flags.format.or(file.format).unwrap_or(Format::Json),
            verify: file.verify.unwrap_or_default(),
        })
    }

    pub fn metric(&self) -> anyhow::Result<MetricSpec> {
        let name =
            self.metric_name.as_deref().ok_or_else(|| err("no metric given (use --metric or the `metric` key)"))?;
        lookup(name, &self.params).map_err(|e| err(e.to_string()))
    }

    pub fn region(&self) -> anyhow::Result<RegionSpec> {
        self.region.ok_or_else(|| err("this command needs a `region` in the config"))
    }

    pub fn times(&self) -> anyhow::Result<Vec<f64>> {
        self.times
            .as_ref()
            .map(TimeGrid::times)
            .ok_or_else(|| err("this command needs `times` {t0, t1, steps} in the config"))
    }

    pub fn entropy_options(&self) -> EntropyOptions {
        EntropyOptions { tol: self.tol, zeta: self.zeta, stencil: self.stencil }
    }
}
