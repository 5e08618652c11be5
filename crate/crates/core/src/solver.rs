//! Time integration of `∂u/∂t = Δ_f u + q u^α` on a radial grid.
//!
//! Each step treats the diffusion implicitly and the reaction explicitly:
//!
//! ```text
//! (I - θ dt L) u^{k+1} = u^k + (1 - θ) dt L u^k + dt q(·, t_k) (u^k)^α
//! ```
//!
//! solved in increment form `(I - θ dt L) δ = dt L u^k + dt q (u^k)^α`, with `L` the
//! zero-flux weighted Laplacian, so both ends carry a homogeneous Neumann condition.
//! `θ = 1` (backward Euler) is the default: `I - dt L` is an M-matrix and the
//! pure-diffusion update obeys the discrete maximum principle for every `dt`.
//! `θ = 1/2` (Crank-Nicolson) is second order in time but is only monotone for small
//! `dt/Δr²`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discretization::{Field, RadialGrid, WeightedLaplacian};
use crate::error::{Error, Result};
use crate::geometry::{ModelSpace, SpaceKind};

/// Maximum number of times a step is retried with a halved `dt` after positivity loss.
pub const MAX_HALVINGS: u32 = 10;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    BackwardEuler,
    CrankNicolson,
}

impl TimeScheme {
    fn theta(self) -> f64 {
        match self {
            TimeScheme::BackwardEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }
}

/// Radial factor `a(r)` of a separable source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialFactor {
    Constant {
        value: f64,
    },
    GaussianBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl RadialFactor {
    fn eval(&self, r: f64) -> (f64, f64) {
        match *self {
            RadialFactor::Constant { value } => (value, 0.0),
            RadialFactor::GaussianBump {
                amplitude,
                center,
                width,
            } => bump(amplitude, center, width, r),
        }
    }
}

/// Temporal factor `b(t)` of a separable source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemporalFactor {
    Constant {
        value: f64,
    },
    Exponential {
        rate: f64,
    },
    Oscillating {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl TemporalFactor {
    fn eval(&self, t: f64) -> f64 {
        match *self {
            TemporalFactor::Constant { value } => value,
            TemporalFactor::Exponential { rate } => (rate * t).exp(),
            TemporalFactor::Oscillating {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (frequency * t).sin(),
        }
    }
}

fn bump(amplitude: f64, center: f64, width: f64, r: f64) -> (f64, f64) {
    let z = (r - center) / width;
    let value = amplitude * (-z * z).exp();
    (value, -2.0 * z / width * value)
}

/// The reaction coefficient `q(r, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceTerm {
    Constant {
        value: f64,
    },
    /// `amplitude · exp(-((r - center)/width)²)`
    GaussianBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Separable {
        radial: RadialFactor,
        temporal: TemporalFactor,
    },
    /// Time-independent table, linear between nodes and constant beyond the ends.
    Tabulated {
        radii: Vec<f64>,
        values: Vec<f64>,
    },
}

impl SourceTerm {
    pub fn zero() -> Self {
        SourceTerm::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourceTerm::Constant { value } if !value.is_finite() => {
                Err(Error::Domain("source constant must be finite".into()))
            }
            SourceTerm::GaussianBump { width, .. }
            | SourceTerm::Separable {
                radial: RadialFactor::GaussianBump { width, .. },
                ..
            } if !(*width > 0.0) => Err(Error::Domain(format!(
                "bump width must be positive, got {width}"
            ))),
            SourceTerm::Tabulated { radii, values } => {
                if radii.len() < 2 || radii.len() != values.len() {
                    return Err(Error::Domain(
                        "tabulated source needs at least two (r, q) pairs of equal length".into(),
                    ));
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Domain(
                        "tabulated source radii must strictly increase".into(),
                    ));
                }
                if values.iter().chain(radii).any(|v| !v.is_finite()) {
                    return Err(Error::Domain(
                        "tabulated source has non-finite entries".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// True when `q ≡ 0` identically.
    pub fn is_zero(&self) -> bool {
        match self {
            SourceTerm::Constant { value } => *value == 0.0,
            SourceTerm::GaussianBump { amplitude, .. } => *amplitude == 0.0,
            SourceTerm::Separable { radial, temporal } => {
                matches!(radial, RadialFactor::Constant { value } if *value == 0.0)
                    || matches!(radial, RadialFactor::GaussianBump { amplitude, .. } if *amplitude == 0.0)
                    || matches!(temporal, TemporalFactor::Constant { value } if *value == 0.0)
            }
            SourceTerm::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// True when `q` does not depend on `r`.
    pub fn is_spatially_constant(&self) -> bool {
        match self {
            SourceTerm::Constant { .. } => true,
            SourceTerm::Separable {
                radial: RadialFactor::Constant { .. },
                ..
            } => true,
            _ => self.is_zero(),
        }
    }

    pub fn value(&self, r: f64, t: f64) -> f64 {
        self.eval(r, t).0
    }

    /// `∂q/∂r`, analytic except for tables (centered differences of the nodes).
    pub fn radial_derivative(&self, r: f64, t: f64) -> f64 {
        self.eval(r, t).1
    }

    fn eval(&self, r: f64, t: f64) -> (f64, f64) {
        match self {
            SourceTerm::Constant { value } => (*value, 0.0),
            SourceTerm::GaussianBump {
                amplitude,
                center,
                width,
            } => bump(*amplitude, *center, *width, r),
            SourceTerm::Separable { radial, temporal } => {
                let (a, da) = radial.eval(r);
                let b = temporal.eval(t);
                (a * b, da * b)
            }
            SourceTerm::Tabulated { radii, values } => tabulated(radii, values, r),
        }
    }

    /// The source multiplied by a constant factor.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            SourceTerm::Constant { value } => SourceTerm::Constant {
                value: value * factor,
            },
            SourceTerm::GaussianBump {
                amplitude,
                center,
                width,
            } => SourceTerm::GaussianBump {
                amplitude: amplitude * factor,
                center: *center,
                width: *width,
            },
            SourceTerm::Separable { radial, temporal } => SourceTerm::Separable {
                radial: match *radial {
                    RadialFactor::Constant { value } => RadialFactor::Constant {
                        value: value * factor,
                    },
                    RadialFactor::GaussianBump {
                        amplitude,
                        center,
                        width,
                    } => RadialFactor::GaussianBump {
                        amplitude: amplitude * factor,
                        center,
                        width,
                    },
                },
                temporal: *temporal,
            },
            SourceTerm::Tabulated { radii, values } => SourceTerm::Tabulated {
                radii: radii.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }
}

fn tabulated(radii: &[f64], values: &[f64], r: f64) -> (f64, f64) {
    let n = radii.len();
    let slope = |i: usize| {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i + 1 == n {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        (values[b] - values[a]) / (radii[b] - radii[a])
    };
    if r <= radii[0] {
        return (values[0], slope(0));
    }
    if r >= radii[n - 1] {
        return (values[n - 1], slope(n - 1));
    }
    let i = radii.partition_point(|&x| x <= r) - 1;
    let s = (r - radii[i]) / (radii[i + 1] - radii[i]);
    (
        values[i] + s * (values[i + 1] - values[i]),
        slope(i) + s * (slope(i + 1) - slope(i)),
    )
}

/// Initial profiles used by experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Constant {
        value: f64,
    },
    /// `amplitude · exp(-(r/width)²)`
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// `base + amplitude · exp(-(r/width)²)`
    BumpPlusConstant {
        base: f64,
        amplitude: f64,
        width: f64,
    },
}

impl InitialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            InitialProfile::Constant { value } => value,
            InitialProfile::Gaussian { amplitude, width } => {
                amplitude * (-(r / width).powi(2)).exp()
            }
            InitialProfile::BumpPlusConstant {
                base,
                amplitude,
                width,
            } => base + amplitude * (-(r / width).powi(2)).exp(),
        }
    }

    pub fn sample(&self, grid: &RadialGrid) -> Result<Field> {
        Field::from_fn(grid, |r| self.eval(r))
    }
}

/// Euclidean heat kernel `(4πt)^{-N/2} e^{-r²/4t}`.
pub fn heat_kernel(dimension: usize, r: f64, t: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).powf(-(dimension as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

/// The equation, its data, and the time lattice. The cylinder clock runs over
/// `[t0 - horizon, t0]`.
#[derive(Debug, Clone)]
pub struct PdeProblem {
    pub space: ModelSpace,
    pub grid: RadialGrid,
    pub alpha: f64,
    pub source: SourceTerm,
    pub initial: Field,
    pub t0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub scheme: TimeScheme,
}

impl PdeProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        space: ModelSpace,
        grid: RadialGrid,
        alpha: f64,
        source: SourceTerm,
        initial: Field,
        t0: f64,
        horizon: f64,
        dt: f64,
    ) -> Result<Self> {
        let problem = Self {
            space,
            grid,
            alpha,
            source,
            initial,
            t0,
            horizon,
            dt,
            scheme: TimeScheme::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial.len() != self.grid.len() {
            return Err(Error::Shape {
                expected: self.grid.len(),
                actual: self.initial.len(),
            });
        }
        if let Some(i) = self.initial.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!(
                "initial data must be strictly positive; u0 = {} at r = {}",
                self.initial[i],
                self.grid.radius(i)
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Domain("alpha must be finite".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Domain(format!(
                "horizon T must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "dt must satisfy 0 < dt <= T, got dt = {} with T = {}",
                self.dt, self.horizon
            )));
        }
        if !self.t0.is_finite() {
            return Err(Error::Domain("t0 must be finite".into()));
        }
        self.source.validate()
    }

    /// `t0 - T`, the bottom of the space-time cylinder.
    pub fn start_time(&self) -> f64 {
        self.t0 - self.horizon
    }

    /// Number of steps `⌈T/dt⌉`; the last step is shortened to land on `t0`.
    pub fn step_count(&self) -> usize {
        ((self.horizon / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn time_lattice(&self) -> Vec<f64> {
        let steps = self.step_count();
        let start = self.start_time();
        (0..=steps)
            .map(|k| {
                if k == steps {
                    self.t0
                } else {
                    start + self.dt * k as f64
                }
            })
            .collect()
    }
}

/// `I - θ dt L` in factored tridiagonal form.
#[derive(Debug, Clone)]
struct ImplicitSystem {
    dt: f64,
    sub: Vec<f64>,
    upper_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl ImplicitSystem {
    fn new(op: &WeightedLaplacian, dt: f64, theta: f64) -> Result<Self> {
        let (lower, diag, upper) = op.diagonals();
        let n = diag.len();
        let sub: Vec<f64> = lower.iter().map(|a| -theta * dt * a).collect();
        let main: Vec<f64> = diag.iter().map(|d| 1.0 - theta * dt * d).collect();
        let sup: Vec<f64> = upper.iter().map(|c| -theta * dt * c).collect();
        let mut upper_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let d = if i == 0 {
                main[0]
            } else {
                main[i] - sub[i] * upper_prime[i - 1]
            };
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "singular tridiagonal system at row {i}"
                )));
            }
            denom[i] = d;
            upper_prime[i] = sup[i] / d;
        }
        Ok(Self {
            dt,
            sub,
            upper_prime,
            denom,
        })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_prime[i] * rhs[i + 1];
        }
    }
}

/// Reusable integrator for one problem; caches the operator and factorizations.
struct Stepper<'a> {
    problem: &'a PdeProblem,
    op: WeightedLaplacian,
    radii: Vec<f64>,
    systems: Vec<ImplicitSystem>,
}

impl<'a> Stepper<'a> {
    fn new(problem: &'a PdeProblem) -> Result<Self> {
        let op = WeightedLaplacian::new(&problem.space, &problem.grid)?;
        Ok(Self {
            problem,
            op,
            radii: problem.grid.radii().collect(),
            systems: Vec::new(),
        })
    }

    fn system(&mut self, dt: f64) -> Result<&ImplicitSystem> {
        if let Some(i) = self.systems.iter().position(|s| s.dt == dt) {
            return Ok(&self.systems[i]);
        }
        let system = ImplicitSystem::new(&self.op, dt, self.problem.scheme.theta())?;
        self.systems.push(system);
        Ok(self.systems.last().expect("just pushed"))
    }

    fn advance(&mut self, u: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
        let alpha = self.problem.alpha;
        let source = &self.problem.source;
        // solve for the increment so that states with L u = 0 are reproduced exactly
        let mut rhs: Vec<f64> = self.op.apply_neumann(u)?.iter().map(|l| dt * l).collect();
        if !source.is_zero() {
            for ((v, &ui), &r) in rhs.iter_mut().zip(u).zip(&self.radii) {
                *v += dt * source.value(r, t) * ui.powf(alpha);
            }
        }
        // constants span the kernel of L, so a flat increment solves the system exactly
        if rhs.iter().any(|&v| v != rhs[0]) {
            self.system(dt)?.solve(&mut rhs);
        }
        for (v, &ui) in rhs.iter_mut().zip(u) {
            *v += ui;
        }
        if let Some(i) = rhs.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::PositivityLoss {
                time: t + dt,
                radius: self.radii[i],
                value: rhs[i],
            });
        }
        Ok(rhs)
    }
}

/// One IMEX step of length `problem.dt` from time `t`. Fails instead of clamping when
/// the update leaves the positive cone.
pub fn step(problem: &PdeProblem, u: &Field, t: f64) -> Result<Field> {
    problem.validate()?;
    if u.len() != problem.grid.len() {
        return Err(Error::Shape {
            expected: problem.grid.len(),
            actual: u.len(),
        });
    }
    if let Some(i) = u.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "step requires u > 0; u = {} at node {i}",
            u[i]
        )));
    }
    let mut stepper = Stepper::new(problem)?;
    Field::new(stepper.advance(u, t, problem.dt)?)
}

/// A run of steps that all used the same internal step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtSegment {
    pub first_step: usize,
    pub steps: usize,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct SpaceTimeSolution {
    times: Vec<f64>,
    frames: Vec<Field>,
    problem: PdeProblem,
    dt_history: Vec<DtSegment>,
}

impl SpaceTimeSolution {
    /// Wraps externally produced frames (synthetic or closed-form data).
    pub fn from_frames(problem: PdeProblem, times: Vec<f64>, frames: Vec<Field>) -> Result<Self> {
        if times.len() != frames.len() || times.len() < 2 {
            return Err(Error::Domain(format!(
                "need at least two frames with matching times, got {} times and {} frames",
                times.len(),
                frames.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("frame times must strictly increase".into()));
        }
        for (frame, &t) in frames.iter().zip(&times) {
            if frame.len() != problem.grid.len() {
                return Err(Error::Shape {
                    expected: problem.grid.len(),
                    actual: frame.len(),
                });
            }
            if let Some(i) = frame.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::PositivityLoss {
                    time: t,
                    radius: problem.grid.radius(i),
                    value: frame[i],
                });
            }
        }
        Ok(Self {
            times,
            frames,
            problem,
            dt_history: Vec::new(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn problem(&self) -> &PdeProblem {
        &self.problem
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.problem.grid
    }

    pub fn dt_history(&self) -> &[DtSegment] {
        &self.dt_history
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last(&self) -> &Field {
        self.frames
            .last()
            .expect("solutions hold at least two frames")
    }

    /// Index of the frame at time `t` (to rounding of the lattice).
    pub fn frame_index(&self, t: f64) -> Option<usize> {
        let scale = self.problem.dt.min(1.0) * 1e-6;
        self.times.iter().position(|&s| (s - t).abs() <= scale)
    }

    pub fn min(&self) -> f64 {
        self.frames
            .iter()
            .map(Field::min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.frames
            .iter()
            .map(Field::max)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Integrates the problem over `[t0 - T, t0]`, recording every frame.
///
/// A step that loses positivity is retried with `dt/2, dt/4, ...` sub-steps, at most
/// [`MAX_HALVINGS`] times, before the error is returned.
pub fn solve(problem: &PdeProblem) -> Result<SpaceTimeSolution> {
    problem.validate()?;
    let mut stepper = Stepper::new(problem)?;
    let times = problem.time_lattice();
    let mut frames = Vec::with_capacity(times.len());
    frames.push(problem.initial.clone());
    let mut history: Vec<DtSegment> = Vec::new();
    let mut u = problem.initial.values().to_vec();

    for k in 0..times.len() - 1 {
        let t = times[k];
        let span = times[k + 1] - t;
        let mut halvings = 0;
        let (next, used) = loop {
            let substeps = 1usize << halvings;
            let h = span / substeps as f64;
            let attempt = (0..substeps).try_fold(u.clone(), |state, j| {
                stepper.advance(&state, t + h * j as f64, h)
            });
            match attempt {
                Ok(next) => break (next, h),
                Err(Error::PositivityLoss { .. }) if halvings < MAX_HALVINGS => halvings += 1,
                Err(e) => return Err(e),
            }
        };
        match history.last_mut() {
            Some(seg) if seg.dt == used => seg.steps += 1,
            _ => history.push(DtSegment {
                first_step: k,
                steps: 1,
                dt: used,
            }),
        }
        u = next;
        frames.push(Field::new(u.clone())?);
    }

    Ok(SpaceTimeSolution {
        times,
        frames,
        problem: problem.clone(),
        dt_history: history,
    })
}

/// Max over interior space-time points of `|Δ_f u - ∂_t u + q u^α|` with centered time
/// differences. The outer node (one-sided diagnostic stencil) and the first and last
/// frames are skipped.
pub fn pde_residual(solution: &SpaceTimeSolution) -> Result<f64> {
    if solution.len() < 3 {
        return Err(Error::Domain("residual needs at least three frames".into()));
    }
    let problem = solution.problem();
    let op = WeightedLaplacian::new(&problem.space, &problem.grid)?;
    let radii: Vec<f64> = problem.grid.radii().collect();
    let n = radii.len();
    let times = solution.times();
    let frames = solution.frames();
    let mut worst: f64 = 0.0;
    for k in 1..frames.len() - 1 {
        let lu = op.apply(&frames[k])?;
        let span = times[k + 1] - times[k - 1];
        for i in 0..n - 1 {
            let ut = (frames[k + 1][i] - frames[k - 1][i]) / span;
            let reaction =
                problem.source.value(radii[i], times[k]) * frames[k][i].powf(problem.alpha);
            worst = worst.max((lu[i] - ut + reaction).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub space: SpaceKind,
    pub dimension: usize,
    pub r_max: f64,
    pub n: usize,
    pub alpha: f64,
    pub source: SourceTerm,
    pub t0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub scheme: TimeScheme,
}

impl From<&PdeProblem> for ProblemSummary {
    fn from(p: &PdeProblem) -> Self {
        Self {
            space: p.space.kind(),
            dimension: p.space.dimension(),
            r_max: p.grid.r_max(),
            n: p.grid.len(),
            alpha: p.alpha,
            source: p.source.clone(),
            t0: p.t0,
            horizon: p.horizon,
            dt: p.dt,
            scheme: p.scheme,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub problem: ProblemSummary,
    pub times: Vec<f64>,
    pub frames: Vec<String>,
    pub dt_history: Vec<DtSegment>,
    pub residual: Option<f64>,
    pub min: f64,
    pub max: f64,
}

/// Writes one `r,value` CSV per frame plus `manifest.json` into `dir`.
pub fn write_archive(solution: &SpaceTimeSolution, dir: &Path) -> Result<ArchiveManifest> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(solution.len());
    for (k, frame) in solution.frames().iter().enumerate() {
        let name = format!("frame_{k:06}.csv");
        let file = fs::File::create(dir.join(&name))?;
        frame.write_csv(solution.grid(), std::io::BufWriter::new(file))?;
        names.push(name);
    }
    let residual = if solution.len() >= 3 {
        Some(pde_residual(solution)?)
    } else {
        None
    };
    let manifest = ArchiveManifest {
        problem: solution.problem().into(),
        times: solution.times().to_vec(),
        frames: names,
        dt_history: solution.dt_history().to_vec(),
        residual,
        min: solution.min(),
        max: solution.max(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_problem(source: SourceTerm, alpha: f64, c: f64, horizon: f64, dt: f64) -> PdeProblem {
        let grid = RadialGrid::new(4.0, 33).unwrap();
        let initial = Field::constant(&grid, c).unwrap();
        PdeProblem::new(
            ModelSpace::euclidean(3).unwrap(),
            grid,
            alpha,
            source,
            initial,
            horizon,
            horizon,
            dt,
        )
        .unwrap()
    }

    #[test]
    fn constant_state_is_fixed_by_pure_diffusion() {
        let p = flat_problem(SourceTerm::zero(), 1.0, 2.5, 1.0, 1e-2);
        let next = step(&p, &p.initial, 0.0).unwrap();
        assert!(next.iter().all(|&v| (v - 2.5).abs() <= 1e-13));
        let sol = solve(&p).unwrap();
        assert!(sol
            .frames()
            .iter()
            .all(|f| f.iter().all(|&v| (v - 2.5).abs() <= 1e-12)));
        assert!(pde_residual(&sol).unwrap() <= 1e-12);
    }

    #[test]
    fn explicit_reaction_on_flat_state() {
        let p = flat_problem(SourceTerm::Constant { value: 0.3 }, 1.0, 2.0, 1.0, 1e-2);
        let next = step(&p, &p.initial, 0.0).unwrap();
        for v in next.iter() {
            assert!((v - 2.0 * (1.0 + 0.3 * 1e-2)).abs() <= 1e-14);
        }
    }

    #[test]
    fn one_step_of_heat_kernel() {
        let grid = RadialGrid::new(8.0, 257).unwrap();
        let initial = Field::from_fn(&grid, |r| heat_kernel(3, r, 1.0)).unwrap();
        let p = PdeProblem::new(
            ModelSpace::euclidean(3).unwrap(),
            grid,
            1.0,
            SourceTerm::zero(),
            initial,
            1.001,
            0.001,
            1e-3,
        )
        .unwrap();
        let next = step(&p, &p.initial, 1.0).unwrap();
        let worst = grid
            .radii()
            .zip(next.iter())
            .take(grid.nodes_within(4.0))
            .map(|(r, v)| (v / heat_kernel(3, r, 1.001) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn closed_form_quadratic_reaction() {
        let (c, q, dt) = (1.0, 0.5, 1e-4);
        let p = flat_problem(SourceTerm::Constant { value: q }, 2.0, c, 0.25, dt);
        let sol = solve(&p).unwrap();
        let worst = sol
            .times()
            .iter()
            .zip(sol.frames())
            .map(|(&t, f)| {
                let s = t - p.start_time();
                let exact = 1.0 / (1.0 / c - q * s);
                (f[0] / exact - 1.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-5, "{worst}");
    }

    #[test]
    fn soliton_bump_respects_maximum_principle() {
        let grid = RadialGrid::new(6.0, 129).unwrap();
        let initial = Field::from_fn(&grid, |r| 2.0 + (-r * r).exp()).unwrap();
        let p = PdeProblem::new(
            ModelSpace::gaussian_soliton(3, 0.5).unwrap(),
            grid,
            1.0,
            SourceTerm::zero(),
            initial,
            1.0,
            1.0,
            1e-3,
        )
        .unwrap();
        let sol = solve(&p).unwrap();
        let mut oscillation = f64::INFINITY;
        for f in sol.frames() {
            assert!(f.min() >= 2.0 - 1e-10 && f.max() <= 3.0 + 1e-10);
            let osc = f.max() - f.min();
            assert!(osc <= oscillation + 1e-15);
            oscillation = osc;
        }
    }

    #[test]
    fn blow_up_reports_positivity_loss() {
        // u' = -10/u reaches zero at t = 0.05
        let p = flat_problem(SourceTerm::Constant { value: -10.0 }, -1.0, 1.0, 1.0, 0.1);
        match solve(&p) {
            Err(Error::PositivityLoss { time, .. }) => assert!(time > 0.0 && time <= 1.0),
            other => panic!("expected positivity loss, got {other:?}"),
        }
    }

    #[test]
    fn halving_recovers_a_too_large_step() {
        // u' = -20 u^2 stays positive, but a full explicit step of 0.1 overshoots to -1
        let p = flat_problem(SourceTerm::Constant { value: -20.0 }, 2.0, 1.0, 0.1, 0.1);
        let sol = solve(&p).unwrap();
        let exact = 1.0 / (1.0 + 20.0 * 0.1);
        assert_eq!(sol.dt_history()[0].dt, 0.025);
        assert!((sol.last()[0] - exact).abs() < 0.2);
    }

    #[test]
    fn rejects_invalid_problems() {
        let grid = RadialGrid::new(1.0, 16).unwrap();
        let bad = Field::constant(&grid, 0.0).unwrap();
        let space = ModelSpace::euclidean(3).unwrap();
        assert!(PdeProblem::new(
            space.clone(),
            grid,
            1.0,
            SourceTerm::zero(),
            bad,
            1.0,
            1.0,
            0.1
        )
        .is_err());
        let ok = Field::constant(&grid, 1.0).unwrap();
        assert!(PdeProblem::new(
            space.clone(),
            grid,
            1.0,
            SourceTerm::zero(),
            ok.clone(),
            1.0,
            1.0,
            2.0
        )
        .is_err());
        assert!(PdeProblem::new(space, grid, 1.0, SourceTerm::zero(), ok, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn time_lattice_lands_on_t0() {
        let p = flat_problem(SourceTerm::zero(), 1.0, 1.0, 1.0, 0.3);
        let times = p.time_lattice();
        assert_eq!(times.len(), 5);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert_eq!(times[0], 0.0);
    }

    #[test]
    fn source_derivatives_match_finite_differences() {
        let sources = [
            SourceTerm::GaussianBump {
                amplitude: 0.7,
                center: 0.5,
                width: 1.3,
            },
            SourceTerm::Separable {
                radial: RadialFactor::GaussianBump {
                    amplitude: 2.0,
                    center: 0.0,
                    width: 0.8,
                },
                temporal: TemporalFactor::Oscillating {
                    mean: 1.0,
                    amplitude: 0.5,
                    frequency: 3.0,
                },
            },
        ];
        for q in &sources {
            for r in [0.2, 1.0, 2.5] {
                let h = 1e-6;
                let fd = (q.value(r + h, 0.3) - q.value(r - h, 0.3)) / (2.0 * h);
                assert!((q.radial_derivative(r, 0.3) - fd).abs() < 1e-8);
            }
        }
        let table = SourceTerm::Tabulated {
            radii: vec![0.0, 1.0, 2.0, 3.0],
            values: vec![0.0, 1.0, 4.0, 9.0],
        };
        assert_eq!(table.value(1.5, 0.0), 2.5);
        assert_eq!(table.radial_derivative(1.0, 0.0), 2.0);
        assert_eq!(table.value(5.0, 0.0), 9.0);
    }

    #[test]
    fn archive_writes_frames_and_manifest() {
        let p = flat_problem(SourceTerm::zero(), 1.0, 1.5, 0.3, 0.1);
        let sol = solve(&p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_archive(&sol, dir.path()).unwrap();
        assert_eq!(manifest.frames.len(), 4);
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["problem"]["T"], 0.3);
        assert!(dir.path().join("frame_000003.csv").exists());
    }
}
