//! Identity and inequality audits: the weighted Bochner formula, the differential
//! inequality satisfied by `w`, the ODE reduction behind the Liouville theorem and the
//! decay of the gradient bound as the ball grows.

use serde::{Deserialize, Serialize};

use crate::discretization::{
    radial_derivative, second_derivative, Field, RadialGrid, WeightedLaplacian,
};
use crate::error::{Error, Result};
use crate::estimates::{cylinder_stats, estimate_bracket, CylinderStats};
use crate::geometry::ModelSpace;
use crate::report::{EstimateReport, GapReport, GridInfo, Location, WorstPoint};
use crate::solver::{solve, PdeProblem, SpaceTimeSolution};

/// Slack factor in the gap tolerance `c₁ (Δr² + dt) · scale`.
pub const GAP_SLACK: f64 = 10.0;
pub const ODE_TOLERANCE: f64 = 1e-8;
/// Accepted range for the fitted decay exponent of the bound.
pub const DECAY_EXPONENT_RANGE: (f64, f64) = (-0.6, -0.4);

/// Max over nodes `2..n-2` of
/// `|½Δ_f|∇u|² - |∇²u|² - ⟨∇Δ_f u, ∇u⟩ - Ric_f(∇u, ∇u)|` for radial `u`.
pub fn bochner_residual(space: &ModelSpace, grid: &RadialGrid, u: &Field) -> Result<f64> {
    Ok(bochner_terms(space, grid, u)?.0)
}

/// Residual and the largest sum of term magnitudes over the same nodes.
fn bochner_terms(space: &ModelSpace, grid: &RadialGrid, u: &Field) -> Result<(f64, f64, f64)> {
    if u.len() != grid.len() {
        return Err(Error::Shape {
            expected: grid.len(),
            actual: u.len(),
        });
    }
    let op = WeightedLaplacian::new(space, grid)?;
    let du = radial_derivative(grid, u)?;
    let ddu = second_derivative(grid, u)?;
    let grad_sq: Vec<f64> = du.iter().map(|g| g * g).collect();
    let half_lap = op.apply(&grad_sq)?;
    let lap_u = op.apply(u)?;
    let grad_lap = radial_derivative(grid, &lap_u)?;
    let n = grid.len();
    let n1 = (space.dimension() - 1) as f64;
    let (mut worst, mut at, mut scale) = (0.0f64, 0.0, 0.0f64);
    for i in 2..n - 2 {
        let r = grid.radius(i);
        let warp = space.warp(r)?;
        let hessian = ddu[i].powi(2) + n1 * (warp.d1 / warp.value * du[i]).powi(2);
        let cross = grad_lap[i] * du[i];
        let ricci = space.bakry_emery_eigenvalues(r)?.radial * grad_sq[i];
        let residual = (0.5 * half_lap[i] - hessian - cross - ricci).abs();
        scale = scale.max((0.5 * half_lap[i]).abs() + hessian + cross.abs() + ricci.abs());
        if residual > worst {
            worst = residual;
            at = r;
        }
    }
    Ok((worst, at, scale))
}

/// Bochner residual as a report, with tolerance `c₁ Δr² · scale`.
pub fn bochner_check(space: &ModelSpace, grid: &RadialGrid, u: &Field) -> Result<EstimateReport> {
    let (residual, r, scale) = bochner_terms(space, grid, u)?;
    let tolerance = GAP_SLACK * grid.spacing().powi(2) * scale;
    let mut report = EstimateReport::new(
        "bochner",
        tolerance - residual,
        WorstPoint::Point { r, t: None },
        residual <= tolerance,
    )
    .with_tolerance("residual", tolerance)
    .with_detail("residual", residual)
    .with_detail("scale", scale);
    report.grid = Some(GridInfo {
        n: grid.len(),
        dt: None,
    });
    Ok(report)
}

fn log_frames(
    solution: &SpaceTimeSolution,
    stats: &CylinderStats,
    nodes: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(solution.len());
    for (frame, &t) in solution.frames().iter().zip(solution.times()) {
        if let Some(i) = frame[..nodes].iter().position(|&u| u > stats.d) {
            return Err(Error::Hypothesis {
                radius: solution.grid().radius(i),
                time: t,
                message: format!("u = {} exceeds D = {}", frame[i], stats.d),
            });
        }
        out.push(frame.iter().map(|&u| (u / stats.d).ln()).collect());
    }
    Ok(out)
}

/// Audits `(Δ_f - ∂_t) w ≥ RHS` on `Q_{R,T}`, skipping two nodes at each spatial end
/// and one frame at each end of the clock.
pub fn lemma21_gap(solution: &SpaceTimeSolution, stats: &CylinderStats) -> Result<GapReport> {
    if solution.len() < 3 {
        return Err(Error::Domain(
            "the gap audit needs at least three frames".into(),
        ));
    }
    let problem = solution.problem();
    let grid = solution.grid();
    let n = grid.len();
    let region = grid.nodes_within(stats.radius);
    let h = log_frames(solution, stats, region)?;
    let beta = stats.beta;
    let mut w = Vec::with_capacity(h.len());
    let mut dh = Vec::with_capacity(h.len());
    for frame in &h {
        let d = radial_derivative(grid, frame)?;
        w.push(
            frame
                .iter()
                .zip(d.iter())
                .map(|(&v, &g)| (g / (beta - v)).powi(2))
                .collect::<Vec<f64>>(),
        );
        dh.push(d);
    }
    let op = WeightedLaplacian::new(&problem.space, grid)?;
    let times = solution.times();
    let n1 = (problem.space.dimension() - 1) as f64;
    let alpha = problem.alpha;
    let upper = region.min(n - 2);

    let mut values = Vec::new();
    let mut scale: f64 = 0.0;
    for k in 1..h.len() - 1 {
        let lw = op.apply(&w[k])?;
        let dw = radial_derivative(grid, &w[k])?;
        let t = times[k];
        let span = times[k + 1] - times[k - 1];
        for i in 2..upper {
            let r = grid.radius(i);
            let (hv, hp, wv, wp) = (h[k][i], dh[k][i], w[k][i], dw[i]);
            let gap = beta - hv;
            let u_pow = solution.frames()[k][i].powf(alpha - 1.0);
            let q = problem.source.value(r, t);
            let qp = problem.source.radial_derivative(r, t);
            let lhs = lw[i] - (w[k + 1][i] - w[k - 1][i]) / span;
            let rhs = 2.0 * (hv + 1.0 - beta) / gap * hp * wp + 2.0 * gap * wv * wv
                - 2.0 * n1 * stats.k * wv
                - 2.0 * (alpha + hv / gap + (1.0 - beta) / gap) * u_pow * q * wv
                - 2.0 / (gap * gap) * u_pow * hp * qp;
            scale = scale.max(lhs.abs() + rhs.abs());
            values.push((lhs - rhs, r, t));
        }
    }
    let dt = problem.dt;
    let tolerance = GAP_SLACK * (grid.spacing().powi(2) + dt) * scale;
    let (min_gap, r, t) = values
        .iter()
        .copied()
        .fold((f64::INFINITY, 0.0, times[0]), |acc, v| {
            if v.0 < acc.0 {
                v
            } else {
                acc
            }
        });
    let checked = values.len();
    let min_gap = if checked == 0 { 0.0 } else { min_gap };
    let mut details = std::collections::BTreeMap::new();
    details.insert("scale".to_string(), scale);
    details.insert("beta".to_string(), beta);
    details.insert("K".to_string(), stats.k);
    details.insert("R".to_string(), stats.radius);
    Ok(GapReport {
        check: "lemma21".into(),
        min_gap,
        location: Location { r, t },
        tolerance,
        checked,
        skipped: region * solution.len() - checked,
        pass: min_gap >= -tolerance,
        grid: Some(GridInfo { n, dt: Some(dt) }),
        details,
    })
}

/// Comparison of an adaptive RK4 integration with the closed form of `u' = q̃ u^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeReport {
    pub q_tilde: f64,
    pub alpha: f64,
    pub u0: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub max_deviation: f64,
    pub steps: usize,
    /// Time at which `u^{1-α}` reaches zero, when it exists.
    pub singular_time: Option<f64>,
    pub pass: bool,
}

fn ode_closed_form(q: f64, alpha: f64, u0: f64, elapsed: f64) -> f64 {
    if alpha == 1.0 {
        u0 * (q * elapsed).exp()
    } else {
        (u0.powf(1.0 - alpha) + (1.0 - alpha) * q * elapsed).powf(1.0 / (1.0 - alpha))
    }
}

fn rk4(q: f64, alpha: f64, u: f64, h: f64) -> f64 {
    let f = |v: f64| q * v.powf(alpha);
    let k1 = f(u);
    let k2 = f(u + 0.5 * h * k1);
    let k3 = f(u + 0.5 * h * k2);
    let k4 = f(u + h * k3);
    u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates `u' = q̃ u^α`, `u(t_start) = u0`, with step-doubling RK4 and reports the
/// worst relative deviation from the closed form.
pub fn ode_ancient_check(
    q_tilde: f64,
    alpha: f64,
    u0: f64,
    t_span: (f64, f64),
) -> Result<OdeReport> {
    let (t_start, t_end) = t_span;
    if !(u0 > 0.0) || !q_tilde.is_finite() || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "need u0 > 0 and finite data, got u0 = {u0}"
        )));
    }
    if !(t_end > t_start) {
        return Err(Error::Domain(format!(
            "empty time span [{t_start}, {t_end}]"
        )));
    }
    let singular_time = (alpha != 1.0 && q_tilde != 0.0)
        .then(|| t_start - u0.powf(1.0 - alpha) / ((1.0 - alpha) * q_tilde));
    if let Some(ts) = singular_time {
        if ts > t_start && ts <= t_end {
            return Err(Error::Domain(format!(
                "closed form is singular at t* = {ts} inside [{t_start}, {t_end}]"
            )));
        }
    }
    let local_tolerance = 1e-13;
    let mut t = t_start;
    let mut u = u0;
    let mut h = (t_end - t_start) / 64.0;
    let mut steps = 0;
    let mut max_deviation: f64 = 0.0;
    while t < t_end {
        h = h.min(t_end - t);
        let full = rk4(q_tilde, alpha, u, h);
        let half = rk4(q_tilde, alpha, rk4(q_tilde, alpha, u, 0.5 * h), 0.5 * h);
        let error = (half - full).abs() / 15.0;
        if error <= local_tolerance * half.abs() || h < 1e-12 {
            t = if h == t_end - t { t_end } else { t + h };
            u = half + (half - full) / 15.0;
            steps += 1;
            let exact = ode_closed_form(q_tilde, alpha, u0, t - t_start);
            max_deviation = max_deviation.max((u / exact - 1.0).abs());
            if error < 0.01 * local_tolerance * half.abs() {
                h *= 2.0;
            }
        } else {
            h *= 0.5;
        }
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::Numerical(format!(
                "integration left the positive cone at t = {t}"
            )));
        }
    }
    Ok(OdeReport {
        q_tilde,
        alpha,
        u0,
        t_start,
        t_end,
        max_deviation,
        steps,
        singular_time,
        pass: max_deviation <= ODE_TOLERANCE,
    })
}

/// One row of the decay table: the gradient bound at the centre of `Q_{R,T}` at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    #[serde(rename = "R")]
    pub radius: f64,
    /// `|∇u|/u` at the centre.
    pub lhs: f64,
    /// `bracket(t0) · (β + ln(D/u))` with unit constant.
    pub bound: f64,
    /// `√((1+|μ|)/R) · (β + ln(D/u))`, the part that carries the decay in `R`.
    pub spatial_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `ln spatial_term` against `ln R`.
    pub fitted_exponent: f64,
    pub decreasing: bool,
    pub pass: bool,
}

impl DecayTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,lhs,bound,spatial_term\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                row.radius, row.lhs, row.bound, row.spatial_term
            ));
        }
        out
    }
}

/// Evaluates the gradient bound at the cylinder centre for each `R`, from a single solve
/// of the template. This checks the mechanism of the Liouville argument (the bound
/// vanishes as `R → ∞`), not the theorem itself.
pub fn liouville_decay_sweep(template: &PdeProblem, radii: &[f64]) -> Result<DecayTable> {
    check_decay_hypotheses(template, radii)?;
    let solution = solve(template)?;
    decay_table(&solution, radii)
}

/// The sweep needs `q ≡ 0`, `K = 0` up to the largest radius and at least two radii.
pub fn check_decay_hypotheses(problem: &PdeProblem, radii: &[f64]) -> Result<()> {
    if radii.len() < 2 {
        return Err(Error::Domain(
            "the decay sweep needs at least two radii".into(),
        ));
    }
    if !problem.source.is_zero() {
        return Err(Error::Domain("the decay sweep requires q = 0".into()));
    }
    let largest = radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = problem.space.ricci_lower_bound(largest)?;
    if k > 0.0 {
        return Err(Error::Hypothesis {
            radius: largest,
            time: problem.t0,
            message: format!("Ric_f lower bound requires K = 0, got K = {k}"),
        });
    }
    Ok(())
}

/// The decay table of an existing solution.
pub fn decay_table(solution: &SpaceTimeSolution, radii: &[f64]) -> Result<DecayTable> {
    let t0 = solution.problem().t0;
    let last = solution.last();
    let du = radial_derivative(solution.grid(), last)?;
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let stats = cylinder_stats(solution, radius, None)?;
        let factor = stats.beta + (stats.d / last[0]).ln();
        rows.push(DecayRow {
            radius,
            lhs: du[0].abs() / last[0],
            bound: estimate_bracket(stats.case(), &stats, t0)? * factor,
            spatial_term: ((1.0 + stats.mu.abs()) / radius).sqrt() * factor,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.radius.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.spatial_term.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("the decay sweep needs distinct radii".into()));
    }
    let fitted_exponent = sxy / sxx;
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    let decreasing = sorted.windows(2).all(|w| w[1].bound < w[0].bound);
    let (lo, hi) = DECAY_EXPONENT_RANGE;
    Ok(DecayTable {
        pass: decreasing
            && (lo..=hi).contains(&fitted_exponent)
            && rows.iter().all(|r| r.lhs <= r.bound),
        rows,
        fitted_exponent,
        decreasing,
    })
}
