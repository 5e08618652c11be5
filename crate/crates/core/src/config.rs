//! Experiment configuration files.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! checks = ["bochner", "lemma21", "theorem11", "harnack"]
//! output_dir = "runs"
//!
//! [space]
//! kind = "euclidean"        # euclidean | hyperbolic | gaussian_soliton | custom
//! dimension = 3
//!
//! [grid]
//! r_max = 8.0
//! n = 129
//!
//! [time]
//! t0 = 2.0
//! T = 1.0
//! dt = 1e-3
//!
//! [pde]
//! alpha = 1.0
//! q = { kind = "constant", value = 0.0 }
//!
//! [initial]
//! kind = "gaussian"
//! amplitude = 0.0179587122
//! width = 2.0
//!
//! [estimate]
//! R = 2.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discretization::{RadialGrid, MIN_NODES};
use crate::error::{Error, Result};
use crate::estimates::DEFAULT_CUTOFF_EXPONENT;
use crate::geometry::{ModelSpace, WarpTable};
use crate::solver::{InitialProfile, PdeProblem, SourceTerm, TimeScheme, DEFAULT_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Comparison,
    Bochner,
    Ode,
    Theorem11,
    Harnack,
    Lemma21,
    LiouvilleSweep,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::Comparison,
        CheckKind::Bochner,
        CheckKind::Ode,
        CheckKind::Theorem11,
        CheckKind::Harnack,
        CheckKind::Lemma21,
        CheckKind::LiouvilleSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Comparison => "comparison",
            CheckKind::Bochner => "bochner",
            CheckKind::Ode => "ode",
            CheckKind::Theorem11 => "theorem11",
            CheckKind::Harnack => "harnack",
            CheckKind::Lemma21 => "lemma21",
            CheckKind::LiouvilleSweep => "liouville_sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// True when the check reads the time-dependent solution.
    pub fn needs_solution(self) -> bool {
        matches!(
            self,
            CheckKind::Theorem11
                | CheckKind::Harnack
                | CheckKind::Lemma21
                | CheckKind::LiouvilleSweep
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceName {
    Euclidean,
    Hyperbolic,
    GaussianSoliton,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceName,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Warp table for `custom`, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: f64,
    pub n: usize,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub scheme: TimeScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub alpha: f64,
    #[serde(default = "SourceTerm::zero")]
    pub q: SourceTerm,
}

fn default_cutoff_a() -> f64 {
    DEFAULT_CUTOFF_EXPONENT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(
        rename = "D_override",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub d_override: Option<f64>,
    #[serde(default = "default_cutoff_a")]
    pub cutoff_a: f64,
    /// Constant used by the gradient and Harnack checks instead of the fitted one.
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Times of the Harnack check; default `t0 - T/2`, `t0 - T/4`, `t0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harnack_times: Option<Vec<f64>>,
    /// Radii of the decay sweep; default `R, 2R, 4R, 8R`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub liouville_radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    pub q_tilde: f64,
    pub alpha: f64,
    pub u0: f64,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub checks: Vec<CheckKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub space: SpaceConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub pde: PdeConfig,
    pub initial: InitialProfile,
    pub estimate: EstimateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeConfig>,
}

/// Reads a configuration file into a raw TOML table.
pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::config(path.display().to_string(), e.message().to_string()))
}

fn table_path(key: &str, index: Option<usize>) -> String {
    match index {
        Some(i) => format!("{key}[{i}]"),
        None => key.to_string(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let table = read_table(path)?;
        Self::from_table(table, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| Error::config("<config>", e.message().to_string()))?;
        Self::from_table(table, base_dir)
    }

    /// Deserializes and validates a raw table. Relative warp-table paths are resolved
    /// against `base_dir`.
    pub fn from_table(table: toml::Table, base_dir: &Path) -> Result<Self> {
        if let Some(toml::Value::Array(items)) = table.get("checks") {
            for (i, item) in items.iter().enumerate() {
                let known = item.as_str().and_then(CheckKind::from_name).is_some();
                if !known {
                    return Err(Error::config(
                        table_path("checks", Some(i)),
                        format!(
                            "unknown check {item}; expected one of {}",
                            CheckKind::ALL.map(CheckKind::name).join(", ")
                        ),
                    ));
                }
            }
        }
        let mut config: ExperimentConfig =
            serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
                Error::config(e.path().to_string(), e.inner().message().trim().to_string())
            })?;
        if let Some(path) = &config.space.warp_table {
            if path.is_relative() {
                config.space.warp_table = Some(base_dir.join(path));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, message: String| Err(Error::config(path, message));
        if self.space.dimension < 2 {
            return fail(
                "space.dimension",
                format!("must be >= 2, got {}", self.space.dimension),
            );
        }
        match self.space.kind {
            SpaceName::Hyperbolic if !self.space.curvature.is_some_and(|k| k > 0.0) => {
                return fail(
                    "space.curvature",
                    "hyperbolic spaces need curvature > 0".into(),
                );
            }
            SpaceName::GaussianSoliton if !self.space.lambda.is_some_and(|l| l.is_finite()) => {
                return fail(
                    "space.lambda",
                    "gaussian_soliton needs a finite lambda".into(),
                );
            }
            SpaceName::Custom if self.space.warp_table.is_none() => {
                return fail("space.warp_table", "custom spaces need a warp table".into());
            }
            _ => {}
        }
        if !(self.grid.r_max > 0.0) || !self.grid.r_max.is_finite() {
            return fail(
                "grid.r_max",
                format!("must be positive, got {}", self.grid.r_max),
            );
        }
        if self.grid.n < MIN_NODES {
            return fail(
                "grid.n",
                format!("must be >= {MIN_NODES}, got {}", self.grid.n),
            );
        }
        if !self.time.t0.is_finite() {
            return fail("time.t0", "must be finite".into());
        }
        if !(self.time.horizon > 0.0) || !self.time.horizon.is_finite() {
            return fail(
                "time.T",
                format!("must be positive, got {}", self.time.horizon),
            );
        }
        if !(self.time.dt > 0.0) {
            return fail("time.dt", format!("must be positive, got {}", self.time.dt));
        }
        if self.time.dt > self.time.horizon {
            return fail(
                "time.dt",
                format!("must not exceed T = {}", self.time.horizon),
            );
        }
        if !self.pde.alpha.is_finite() {
            return fail("pde.alpha", "must be finite".into());
        }
        self.pde
            .q
            .validate()
            .or_else(|e| fail("pde.q", e.to_string()))?;
        let r = self.estimate.radius;
        if !(r > 0.0) || r > self.grid.r_max / 2.0 {
            return fail(
                "estimate.R",
                format!(
                    "must lie in (0, r_max/2 = {}], got {r}",
                    self.grid.r_max / 2.0
                ),
            );
        }
        if self.estimate.d_override.is_some_and(|d| !(d > 0.0)) {
            return fail("estimate.D_override", "must be positive".into());
        }
        if !(self.estimate.cutoff_a > 0.0 && self.estimate.cutoff_a < 1.0) {
            return fail(
                "estimate.cutoff_a",
                format!("must lie in (0, 1), got {}", self.estimate.cutoff_a),
            );
        }
        if self.estimate.constant.is_some_and(|c| !(c >= 0.0)) {
            return fail("estimate.C", "must be nonnegative".into());
        }
        if let Some(times) = &self.estimate.harnack_times {
            let start = self.time.t0 - self.time.horizon;
            if let Some(i) = times
                .iter()
                .position(|&t| !(t > start && t <= self.time.t0))
            {
                return fail(
                    &table_path("estimate.harnack_times", Some(i)),
                    format!("must lie in ({start}, {}]", self.time.t0),
                );
            }
        }
        if let Some(radii) = &self.estimate.liouville_radii {
            if let Some(i) = radii
                .iter()
                .position(|&x| !(x > 0.0) || x > self.grid.r_max / 2.0)
            {
                return fail(
                    &table_path("estimate.liouville_radii", Some(i)),
                    format!("must lie in (0, r_max/2 = {}]", self.grid.r_max / 2.0),
                );
            }
        }
        if self.checks.contains(&CheckKind::Ode) && self.ode.is_none() {
            return fail("ode", "the ode check needs an [ode] section".into());
        }
        if self.checks.contains(&CheckKind::Comparison) && r < 2.0 {
            return fail("estimate.R", "the comparison check needs R >= 2".into());
        }
        Ok(())
    }

    pub fn build_space(&self) -> Result<ModelSpace> {
        let s = &self.space;
        let space = match s.kind {
            SpaceName::Euclidean => ModelSpace::euclidean(s.dimension),
            SpaceName::Hyperbolic => {
                ModelSpace::hyperbolic(s.dimension, s.curvature.unwrap_or(1.0))
            }
            SpaceName::GaussianSoliton => {
                ModelSpace::gaussian_soliton(s.dimension, s.lambda.unwrap_or(0.0))
            }
            SpaceName::Custom => {
                let path = s
                    .warp_table
                    .as_ref()
                    .ok_or_else(|| Error::config("space.warp_table", "missing"))?;
                ModelSpace::custom(s.dimension, WarpTable::load(path)?)
            }
        };
        space.map_err(|e| Error::config("space", e.to_string()))
    }

    pub fn build_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.r_max, self.grid.n)
            .map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn build_problem(&self) -> Result<PdeProblem> {
        let space = self.build_space()?;
        let grid = self.build_grid()?;
        let initial = self
            .initial
            .sample(&grid)
            .map_err(|e| Error::config("initial", e.to_string()))?;
        PdeProblem::new(
            space,
            grid,
            self.pde.alpha,
            self.pde.q.clone(),
            initial,
            self.time.t0,
            self.time.horizon,
            self.time.dt,
        )
        .map(|p| p.with_scheme(self.time.scheme))
        .map_err(|e| Error::config("initial", e.to_string()))
    }

    pub fn harnack_times(&self) -> Vec<f64> {
        let (t0, horizon) = (self.time.t0, self.time.horizon);
        self.estimate
            .harnack_times
            .clone()
            .unwrap_or_else(|| vec![t0 - horizon / 2.0, t0 - horizon / 4.0, t0])
    }

    pub fn liouville_radii(&self) -> Vec<f64> {
        let r = self.estimate.radius;
        self.estimate
            .liouville_radii
            .clone()
            .unwrap_or_else(|| vec![r, 2.0 * r, 4.0 * r, 8.0 * r])
    }

    /// Checks in configuration order without repeats.
    pub fn unique_checks(&self) -> Vec<CheckKind> {
        let mut out: Vec<CheckKind> = Vec::new();
        for &c in &self.checks {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// Canonical TOML text; `output_dir` is excluded so that the run identity does not
    /// depend on where reports are written.
    pub fn canonical_text(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.output_dir = None;
        toml::to_string(&copy).map_err(|e| Error::config("<config>", e.to_string()))
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn content_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_text()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}

/// Sets the numeric field at a dotted path. Integer fields stay integers.
pub fn set_numeric(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(path, "empty key in parameter path"));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut current = table;
    for key in parents {
        current = match current.get_mut(*key) {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::config(path, format!("`{key}` is not a section"))),
            None => return Err(Error::config(path, format!("no section `{key}`"))),
        };
    }
    let value = match current.get(*last) {
        Some(toml::Value::Integer(_)) => raw
            .trim()
            .parse::<i64>()
            .map(toml::Value::Integer)
            .map_err(|_| Error::config(path, format!("expected an integer, got `{raw}`")))?,
        Some(toml::Value::Float(_)) | None => raw
            .trim()
            .parse::<f64>()
            .map(toml::Value::Float)
            .map_err(|_| Error::config(path, format!("expected a number, got `{raw}`")))?,
        Some(other) => {
            return Err(Error::config(
                path,
                format!(
                    "parameter must address a numeric field, found {}",
                    other.type_str()
                ),
            ))
        }
    };
    current.insert(last.to_string(), value);
    Ok(())
}
