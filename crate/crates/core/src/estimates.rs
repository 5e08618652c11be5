//! Quantities of the local gradient estimate and the Harnack inequality.
//!
//! Everything is evaluated on the space-time cylinder `Q_{R,T} = B(R) × [t0 - T, t0]`
//! centred at the pole. `h = ln(u/D) ≤ 0` is the log transform, `β = sup_{Q_{R/2,T}} |h| + 1`,
//! and the fitted constant is the smallest `C` for which
//!
//! ```text
//! |∇u|/u ≤ C · bracket(t) · (β + ln(D/u))
//! ```
//!
//! holds at every grid point of `Q_{R/2,T}` after the initial frame.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{radial_derivative, Field, RadialGrid, WeightedLaplacian};
use crate::error::{Error, Result};
use crate::report::{EstimateReport, GridInfo, WorstPoint};
use crate::solver::SpaceTimeSolution;

/// Default `D` is this factor times the maximum of `u` over the cylinder.
pub const DEFAULT_D_FACTOR: f64 = 1.05;
pub const DEFAULT_CUTOFF_EXPONENT: f64 = 0.75;
/// Tolerance on the worst Harnack margin, in log units.
pub const HARNACK_TOLERANCE: f64 = 1e-8;

/// The three regimes of the nonlinearity exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateCase {
    #[serde(rename = "alpha>=1")]
    Superlinear,
    #[serde(rename = "0<alpha<1")]
    Sublinear,
    #[serde(rename = "alpha<=0")]
    NonPositive,
}

impl EstimateCase {
    pub fn from_alpha(alpha: f64) -> Self {
        if alpha >= 1.0 {
            EstimateCase::Superlinear
        } else if alpha > 0.0 {
            EstimateCase::Sublinear
        } else {
            EstimateCase::NonPositive
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EstimateCase::Superlinear => "alpha>=1",
            EstimateCase::Sublinear => "0<alpha<1",
            EstimateCase::NonPositive => "alpha<=0",
        }
    }
}

impl fmt::Display for EstimateCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Scalars entering the estimates for one cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderStats {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "M_inf")]
    pub m_inf: f64,
    pub beta: f64,
    pub q_plus_norm: f64,
    pub grad_q_norm: f64,
    pub mu: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub t0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub alpha: f64,
}

impl CylinderStats {
    pub fn start_time(&self) -> f64 {
        self.t0 - self.horizon
    }

    pub fn case(&self) -> EstimateCase {
        EstimateCase::from_alpha(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_inf > 0.0) || self.m_inf > self.d {
            return Err(Error::StatsInconsistency(format!(
                "need 0 < M_inf <= D, got M_inf = {}, D = {}",
                self.m_inf, self.d
            )));
        }
        if !(self.beta >= 1.0) {
            return Err(Error::StatsInconsistency(format!(
                "beta = {} < 1",
                self.beta
            )));
        }
        if self.q_plus_norm < 0.0 || self.grad_q_norm < 0.0 || self.k < 0.0 {
            return Err(Error::StatsInconsistency(
                "norms and K must be nonnegative".into(),
            ));
        }
        if !(self.radius > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::StatsInconsistency("R and T must be positive".into()));
        }
        Ok(())
    }

    /// Elapsed time `t - (t0 - T)`; the estimates are undefined at the cylinder start.
    pub fn elapsed(&self, t: f64) -> Result<f64> {
        let s = t - self.start_time();
        if s <= 1e-12 * self.t0.abs().max(1.0) {
            return Err(Error::Clock {
                time: t,
                start: self.start_time(),
            });
        }
        Ok(s)
    }

    /// The source contributions `(A, B)` of the bracket for the given case.
    pub fn source_terms(&self, case: EstimateCase) -> Result<(f64, f64)> {
        if case != self.case() {
            return Err(Error::Domain(format!(
                "case {case} is inconsistent with alpha = {}",
                self.alpha
            )));
        }
        let a = self.alpha;
        let (base, root_alpha) = match case {
            EstimateCase::Superlinear => (self.d, a.sqrt()),
            EstimateCase::Sublinear => (self.m_inf, a.sqrt()),
            EstimateCase::NonPositive => (self.m_inf, 1.0),
        };
        let big_a = root_alpha * base.powf((a - 1.0) / 2.0) * self.q_plus_norm.sqrt();
        let big_b = base.powf((a - 1.0) / 3.0) * self.grad_q_norm.cbrt();
        Ok((big_a, big_b))
    }

    /// `λ = max(A, B)`.
    pub fn lambda(&self) -> Result<f64> {
        let (a, b) = self.source_terms(self.case())?;
        Ok(a.max(b))
    }
}

fn check_radius(solution: &SpaceTimeSolution, radius: f64) -> Result<usize> {
    let r_max = solution.grid().r_max();
    if !(radius > 0.0) || radius > r_max / 2.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "R = {radius} must lie in (0, r_max/2] with r_max = {r_max}"
        )));
    }
    Ok(solution.grid().nodes_within(radius))
}

/// Assembles `D, 𝕄, β`, the source norms, `μ` and `K` for `Q_{R,T}`.
pub fn cylinder_stats(
    solution: &SpaceTimeSolution,
    radius: f64,
    d_override: Option<f64>,
) -> Result<CylinderStats> {
    let outer = check_radius(solution, radius)?;
    let inner = solution.grid().nodes_within(radius / 2.0);
    let problem = solution.problem();
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut argmax = (0.0, 0.0);
    for (frame, &t) in solution.frames().iter().zip(solution.times()) {
        for i in 0..outer {
            if frame[i] > max {
                max = frame[i];
                argmax = (solution.grid().radius(i), t);
            }
            min = min.min(frame[i]);
        }
    }
    let d = match d_override {
        Some(d) if d < max => {
            return Err(Error::Hypothesis {
                radius: argmax.0,
                time: argmax.1,
                message: format!("u = {max} exceeds D = {d}"),
            })
        }
        Some(d) => d,
        None => DEFAULT_D_FACTOR * max,
    };
    let sup_h = solution
        .frames()
        .iter()
        .flat_map(|f| f[..inner].iter())
        .map(|&u| (u / d).ln().abs())
        .fold(0.0, f64::max);
    let mut q_plus: f64 = 0.0;
    let mut grad_q: f64 = 0.0;
    for &t in solution.times() {
        for r in solution.grid().radii().take(outer) {
            q_plus = q_plus.max(problem.source.value(r, t).max(0.0));
            grad_q = grad_q.max(problem.source.radial_derivative(r, t).abs());
        }
    }
    let stats = CylinderStats {
        d,
        m_inf: min,
        beta: sup_h + 1.0,
        q_plus_norm: q_plus,
        grad_q_norm: grad_q,
        mu: problem.space.mu()?,
        k: problem.space.ricci_lower_bound(radius)?,
        radius,
        t0: problem.t0,
        horizon: problem.horizon,
        alpha: problem.alpha,
    };
    stats.validate()?;
    Ok(stats)
}

fn log_frame(frame: &Field, d: f64) -> Vec<f64> {
    frame.iter().map(|&u| (u / d).ln()).collect()
}

fn require_below(solution: &SpaceTimeSolution, d: f64, nodes: usize) -> Result<()> {
    for (frame, &t) in solution.frames().iter().zip(solution.times()) {
        if let Some(i) = frame[..nodes].iter().position(|&u| u > d) {
            return Err(Error::Hypothesis {
                radius: solution.grid().radius(i),
                time: t,
                message: format!("u = {} exceeds D = {d}", frame[i]),
            });
        }
    }
    Ok(())
}

/// `h = ln(u/D)` frame by frame; requires `u ≤ D` on the whole domain.
pub fn log_transform(solution: &SpaceTimeSolution, d: f64) -> Result<Vec<Field>> {
    require_below(solution, d, solution.grid().len())?;
    solution
        .frames()
        .iter()
        .map(|f| Field::new(log_frame(f, d)))
        .collect()
}

/// Max of `|Δ_f h - ∂_t h + |∇h|² + q (D e^h)^{α-1}|` over interior points, with centered
/// time differences. The outer node and the first and last frames are skipped.
pub fn transformed_residual(solution: &SpaceTimeSolution, d: f64) -> Result<f64> {
    if solution.len() < 3 {
        return Err(Error::Domain("residual needs at least three frames".into()));
    }
    let h = log_transform(solution, d)?;
    let problem = solution.problem();
    let grid = solution.grid();
    let op = WeightedLaplacian::new(&problem.space, grid)?;
    let radii: Vec<f64> = grid.radii().collect();
    let times = solution.times();
    let n = grid.len();
    let mut worst: f64 = 0.0;
    for k in 1..h.len() - 1 {
        let lh = op.apply(&h[k])?;
        let dh = radial_derivative(grid, &h[k])?;
        let span = times[k + 1] - times[k - 1];
        for i in 0..n - 1 {
            let ht = (h[k + 1][i] - h[k - 1][i]) / span;
            let reaction = problem.source.value(radii[i], times[k])
                * (d * h[k][i].exp()).powf(problem.alpha - 1.0);
            worst = worst.max((lh[i] - ht + dh[i] * dh[i] + reaction).abs());
        }
    }
    Ok(worst)
}

/// `w = |∇h|²/(β - h)²` for each frame of `h`.
pub fn compute_w(grid: &RadialGrid, h: &[Field], beta: f64) -> Result<Vec<Field>> {
    h.iter()
        .map(|frame| {
            if let Some(i) = frame.iter().position(|&v| beta - v < 1.0 - 1e-12) {
                return Err(Error::StatsInconsistency(format!(
                    "beta - h = {} < 1 at r = {}",
                    beta - frame[i],
                    grid.radius(i)
                )));
            }
            let dh = radial_derivative(grid, frame)?;
            Field::new(
                frame
                    .iter()
                    .zip(dh.iter())
                    .map(|(&v, &g)| (g / (beta - v)).powi(2))
                    .collect(),
            )
        })
        .collect()
}

/// The bracket of the gradient estimate at time `t`, without the constant.
pub fn estimate_bracket(case: EstimateCase, stats: &CylinderStats, t: f64) -> Result<f64> {
    let s = stats.elapsed(t)?;
    let (a, b) = stats.source_terms(case)?;
    Ok(((1.0 + stats.mu.abs()) / stats.radius).sqrt() + 1.0 / s.sqrt() + stats.k.sqrt() + a + b)
}

/// A fitted constant and the point attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFit {
    pub value: f64,
    pub worst_point: WorstPoint,
}

/// Running maximum over `Q_{R/2,T}` (first frame excluded) of `ratio(u, |u'|, h, t)`.
fn fit_over_inner_cylinder(
    solution: &SpaceTimeSolution,
    stats: &CylinderStats,
    ratio: impl Fn(f64, f64, f64, f64) -> Result<f64>,
) -> Result<ConstantFit> {
    check_radius(solution, stats.radius)?;
    let grid = solution.grid();
    let inner = grid.nodes_within(stats.radius / 2.0);
    require_below(solution, stats.d, inner)?;
    let mut best = ConstantFit {
        value: 0.0,
        worst_point: WorstPoint::Point { r: 0.0, t: None },
    };
    for (frame, &t) in solution.frames().iter().zip(solution.times()).skip(1) {
        let du = radial_derivative(grid, frame)?;
        for i in 0..inner {
            let u = frame[i];
            let value = ratio(u, du[i].abs(), (u / stats.d).ln(), t)?;
            if value > best.value || matches!(best.worst_point, WorstPoint::Point { t: None, .. }) {
                best = ConstantFit {
                    value,
                    worst_point: WorstPoint::Point {
                        r: grid.radius(i),
                        t: Some(t),
                    },
                };
            }
        }
    }
    Ok(best)
}

/// Smallest `C` with `|∇u|/u ≤ C · bracket(t) · (β - h)` on `Q_{R/2,T}` minus the first frame.
pub fn fit_constant(
    solution: &SpaceTimeSolution,
    stats: &CylinderStats,
    case: EstimateCase,
) -> Result<ConstantFit> {
    fit_over_inner_cylinder(solution, stats, |u, grad, h, t| {
        Ok(grad / u / (estimate_bracket(case, stats, t)? * (stats.beta - h)))
    })
}

/// Smallest `C` with `|∇ ln(1 - h)| ≤ C (1/√s + √K + λ)` on `Q_{R/2,T}` minus the first
/// frame, where `|∇ ln(1 - h)| = |∇u|/(u(1 - h))` is measured by difference quotients over
/// the grid cells. Summing the cell bounds along a segment (through the pole if needed)
/// gives the discrete Harnack inequality with the same `C`.
pub fn fit_harnack_constant(
    solution: &SpaceTimeSolution,
    stats: &CylinderStats,
) -> Result<ConstantFit> {
    check_radius(solution, stats.radius)?;
    let grid = solution.grid();
    let inner = grid.nodes_within(stats.radius / 2.0);
    require_below(solution, stats.d, inner)?;
    let lambda = stats.lambda()?;
    let h = grid.spacing();
    let mut best = ConstantFit {
        value: 0.0,
        worst_point: WorstPoint::Point { r: 0.0, t: None },
    };
    for (frame, &t) in solution.frames().iter().zip(solution.times()).skip(1) {
        let rate = 1.0 / stats.elapsed(t)?.sqrt() + stats.k.sqrt() + lambda;
        let g: Vec<f64> = frame[..inner]
            .iter()
            .map(|&u| (1.0 - (u / stats.d).ln()).ln())
            .collect();
        for i in 0..inner.saturating_sub(1) {
            let value = (g[i + 1] - g[i]).abs() / h / rate;
            if value > best.value || matches!(best.worst_point, WorstPoint::Point { t: None, .. }) {
                best = ConstantFit {
                    value,
                    worst_point: WorstPoint::Point {
                        r: grid.radius(i) + 0.5 * h,
                        t: Some(t),
                    },
                };
            }
        }
    }
    Ok(best)
}

fn grid_info(solution: &SpaceTimeSolution) -> GridInfo {
    GridInfo {
        n: solution.grid().len(),
        dt: Some(solution.problem().dt),
    }
}

fn with_stats(report: EstimateReport, stats: &CylinderStats) -> EstimateReport {
    report
        .with_detail("D", stats.d)
        .with_detail("M_inf", stats.m_inf)
        .with_detail("beta", stats.beta)
        .with_detail("q_plus_norm", stats.q_plus_norm)
        .with_detail("grad_q_norm", stats.grad_q_norm)
        .with_detail("mu", stats.mu)
        .with_detail("K", stats.k)
        .with_detail("R", stats.radius)
}

/// Gradient-estimate report. With `c = None` the constant is fitted and the check passes
/// by construction; with `c = Some(C)` the margin is `C - C_fit`.
pub fn theorem11_check(
    solution: &SpaceTimeSolution,
    stats: &CylinderStats,
    c: Option<f64>,
) -> Result<EstimateReport> {
    let case = stats.case();
    let fit = fit_constant(solution, stats, case)?;
    let (margin, pass) = match c {
        Some(c) => (c - fit.value, c - fit.value >= -1e-12),
        None => (0.0, fit.value.is_finite()),
    };
    let mut report = EstimateReport::new("theorem11", margin, fit.worst_point, pass)
        .with_tolerance("margin", 1e-12);
    report.case = Some(case.label().into());
    report.c_fit = Some(fit.value);
    report.c_used = c;
    report.grid = Some(grid_info(solution));
    Ok(with_stats(report, stats))
}

/// `Γ = exp(-C (1/√s + √K + λ) r)`.
pub fn harnack_gamma(r: f64, t: f64, stats: &CylinderStats, c: f64) -> Result<f64> {
    if !(r >= 0.0) || !(c >= 0.0) {
        return Err(Error::Domain(format!(
            "need r >= 0 and C >= 0, got r = {r}, C = {c}"
        )));
    }
    let s = stats.elapsed(t)?;
    Ok((-c * (1.0 / s.sqrt() + stats.k.sqrt() + stats.lambda()?) * r).exp())
}

/// Checks `u(y,t) ≤ u(x,t)^Γ (De)^{1-Γ}` for all node pairs in `B(R/2)` at time `t`, on a
/// common ray (`|r_x - r_y|`) and across the pole (`r_x + r_y`). The margin is taken in
/// log form: `Γ ln u(x) + (1 - Γ)(ln D + 1) - ln u(y)`.
pub fn harnack_check(
    solution: &SpaceTimeSolution,
    stats: &CylinderStats,
    c: f64,
    t: f64,
) -> Result<EstimateReport> {
    check_radius(solution, stats.radius)?;
    let k = solution
        .frame_index(t)
        .ok_or_else(|| Error::Domain(format!("no frame at t = {t}")))?;
    let frame = &solution.frames()[k];
    let grid = solution.grid();
    let nodes = grid.nodes_within(stats.radius / 2.0);
    if let Some(i) = frame[..nodes].iter().position(|&u| u > stats.d) {
        return Err(Error::Hypothesis {
            radius: grid.radius(i),
            time: t,
            message: format!("u = {} exceeds D = {}", frame[i], stats.d),
        });
    }
    let rate = {
        let s = stats.elapsed(t)?;
        c * (1.0 / s.sqrt() + stats.k.sqrt() + stats.lambda()?)
    };
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("C must be nonnegative, got {c}")));
    }
    let ln_u: Vec<f64> = frame[..nodes].iter().map(|u| u.ln()).collect();
    let top = stats.d.ln() + 1.0;
    let radii: Vec<f64> = grid.radii().take(nodes).collect();
    let per_x: Vec<(f64, usize, usize)> = (0..nodes)
        .into_par_iter()
        .map(|x| {
            let mut worst = (f64::INFINITY, x, x);
            for y in 0..nodes {
                for dist in [(radii[x] - radii[y]).abs(), radii[x] + radii[y]] {
                    let gamma = (-rate * dist).exp();
                    let margin = gamma * ln_u[x] + (1.0 - gamma) * top - ln_u[y];
                    if margin < worst.0 {
                        worst = (margin, x, y);
                    }
                }
            }
            worst
        })
        .collect();
    let (margin, x, y) =
        per_x.into_iter().fold(
            (f64::INFINITY, 0, 0),
            |acc, w| if w.0 < acc.0 { w } else { acc },
        );
    let point = WorstPoint::Pair {
        rx: radii[x],
        ry: radii[y],
        t,
    };
    let mut report = EstimateReport::new("harnack", margin, point, margin >= -HARNACK_TOLERANCE)
        .with_tolerance("margin", HARNACK_TOLERANCE)
        .with_detail("t", t);
    report.case = Some(stats.case().label().into());
    report.c_used = Some(c);
    report.grid = Some(grid_info(solution));
    Ok(with_stats(report, stats))
}

/// C^∞ step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, `1/(1 + exp(1/x - 1/(1-x)))` in between.
/// Returns the value and first two derivatives.
fn smooth_step(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let l = 1.0 / x - 1.0 / (1.0 - x);
    let (s, sc) = if l > 0.0 {
        let e = (-l).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = l.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    };
    let m = 1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x));
    let dm = -2.0 / x.powi(3) + 2.0 / (1.0 - x).powi(3);
    let d1 = s * sc * m;
    let d2 = (sc - s) * d1 * m + s * sc * dm;
    (s, d1, d2)
}

/// Separable cutoff `ψ(r,t) = η(r) ξ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFunction {
    radius: f64,
    horizon: f64,
    t0: f64,
    tau: f64,
    exponent: f64,
}

/// Samples of `ψ` with the lemma's properties and measured constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffAudit {
    pub bounded: bool,
    pub one_on_inner_cylinder: bool,
    pub radially_nonincreasing: bool,
    pub flat_on_inner_ball: bool,
    pub vanishes_at_start: bool,
    /// `max(sup |ψ_r|/ψ^a · R, sup |ψ_rr|/ψ^a · R²)`
    pub c_a: f64,
    /// `sup |ψ_t|/ψ^{1/2} · (τ - (t0 - T))`
    pub c_time: f64,
}

impl CutoffAudit {
    pub fn exact_properties_hold(&self) -> bool {
        self.bounded
            && self.one_on_inner_cylinder
            && self.radially_nonincreasing
            && self.flat_on_inner_ball
            && self.vanishes_at_start
    }
}

/// Builds the cutoff for `Q_{R,T}` ending at `t0`, with derivative exponent `a ∈ (0,1)`.
pub fn build_cutoff(
    radius: f64,
    horizon: f64,
    t0: f64,
    tau: f64,
    exponent: f64,
) -> Result<CutoffFunction> {
    if !(radius >= 2.0) || !radius.is_finite() {
        return Err(Error::Domain(format!(
            "cutoff radius must be >= 2, got {radius}"
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!(
            "cutoff horizon must be positive, got {horizon}"
        )));
    }
    if !(tau > t0 - horizon && tau <= t0) {
        return Err(Error::Domain(format!(
            "tau = {tau} must lie in ({}, {t0}]",
            t0 - horizon
        )));
    }
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(Error::Domain(format!(
            "cutoff exponent must lie in (0, 1), got {exponent}"
        )));
    }
    Ok(CutoffFunction {
        radius,
        horizon,
        t0,
        tau,
        exponent,
    })
}

impl CutoffFunction {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    fn start(&self) -> f64 {
        self.t0 - self.horizon
    }

    /// End of the time ramp: `ξ = 1` from here on.
    fn rise_end(&self) -> f64 {
        self.tau.min(self.t0 - self.horizon / 2.0)
    }

    fn eta(&self, r: f64) -> (f64, f64, f64) {
        let (s, d1, d2) = smooth_step(2.0 - 2.0 * r / self.radius);
        let k = -2.0 / self.radius;
        (s, d1 * k, d2 * k * k)
    }

    fn xi(&self, t: f64) -> (f64, f64) {
        let width = self.rise_end() - self.start();
        let (s, d1, _) = smooth_step((t - self.start()) / width);
        (s, d1 / width)
    }

    pub fn value(&self, r: f64, t: f64) -> f64 {
        self.eta(r).0 * self.xi(t).0
    }

    pub fn dr(&self, r: f64, t: f64) -> f64 {
        self.eta(r).1 * self.xi(t).0
    }

    pub fn drr(&self, r: f64, t: f64) -> f64 {
        self.eta(r).2 * self.xi(t).0
    }

    pub fn dt(&self, t_r: f64, t: f64) -> f64 {
        self.eta(t_r).0 * self.xi(t).1
    }

    /// Evaluates the four properties of the cutoff on a `samples × samples` lattice of
    /// `[0, 3R/2] × [t0 - T, t0]`.
    pub fn audit(&self, samples: usize) -> Result<CutoffAudit> {
        if samples < 2 {
            return Err(Error::Domain(
                "cutoff audit needs at least two samples per axis".into(),
            ));
        }
        let r_top = 1.5 * self.radius;
        let mut audit = CutoffAudit {
            bounded: true,
            one_on_inner_cylinder: true,
            radially_nonincreasing: true,
            flat_on_inner_ball: true,
            vanishes_at_start: true,
            c_a: 0.0,
            c_time: 0.0,
        };
        let a = self.exponent;
        let ramp = self.tau - self.start();
        for j in 0..samples {
            let t = self.start() + self.horizon * j as f64 / (samples - 1) as f64;
            let mut previous = f64::INFINITY;
            for i in 0..samples {
                let r = r_top * i as f64 / (samples - 1) as f64;
                let psi = self.value(r, t);
                let (dr, drr, dt) = (self.dr(r, t), self.drr(r, t), self.dt(r, t));
                audit.bounded &= (0.0..=1.0).contains(&psi);
                if r <= self.radius / 2.0 && t >= self.t0 - self.horizon / 2.0 {
                    audit.one_on_inner_cylinder &= psi == 1.0;
                }
                if r <= self.radius / 2.0 {
                    audit.flat_on_inner_ball &= dr == 0.0;
                }
                audit.radially_nonincreasing &= psi <= previous && dr <= 0.0;
                previous = psi;
                if j == 0 {
                    audit.vanishes_at_start &= psi == 0.0;
                }
                if psi > 0.0 {
                    let pa = psi.powf(a);
                    audit.c_a = audit
                        .c_a
                        .max(dr.abs() / pa * self.radius)
                        .max(drr.abs() / pa * self.radius * self.radius);
                    audit.c_time = audit.c_time.max(dt.abs() / psi.sqrt() * ramp);
                }
            }
        }
        Ok(audit)
    }
}
