//! Rotationally symmetric smooth metric measure spaces.
//!
//! A model space is the warped product `dr² + φ(r)² g_{S^{N-1}}` carrying the weighted
//! measure `e^{-f(r)} dv`. Curvature of such a space is determined by the warp `φ` and
//! the radial weight `f`, so every quantity below is evaluated in closed form.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{EstimateReport, WorstPoint};

/// Tolerance on the worst margin of [`ModelSpace::comparison_check`].
pub const COMPARISON_TOLERANCE: f64 = 1e-12;

const POLE_TOLERANCE: f64 = 1e-9;
const CURVATURE_SAMPLES: usize = 2048;

/// Value and first two derivatives of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean,
    Hyperbolic { curvature: f64 },
    GaussianSoliton { lambda: f64 },
    Custom,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceKind::Euclidean => write!(f, "euclidean"),
            SpaceKind::Hyperbolic { curvature } => write!(f, "hyperbolic({curvature})"),
            SpaceKind::GaussianSoliton { lambda } => write!(f, "gaussian_soliton({lambda})"),
            SpaceKind::Custom => write!(f, "custom"),
        }
    }
}

/// The two eigenvalues of `Ric_f = Ric + ∇²f` on a warped product with radial weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciEigenvalues {
    pub radial: f64,
    pub tangential: f64,
}

impl RicciEigenvalues {
    pub fn min(&self) -> f64 {
        self.radial.min(self.tangential)
    }
}

#[derive(Debug, Clone)]
enum Warp {
    Linear,
    Sinh { sqrt_k: f64 },
    Table(Arc<WarpTable>),
}

impl Warp {
    fn profile(&self, r: f64) -> Result<Profile> {
        match self {
            Warp::Linear => Ok(Profile {
                value: r,
                d1: 1.0,
                d2: 0.0,
            }),
            Warp::Sinh { sqrt_k } => {
                let x = sqrt_k * r;
                Ok(Profile {
                    value: x.sinh() / sqrt_k,
                    d1: x.cosh(),
                    d2: sqrt_k * x.sinh(),
                })
            }
            Warp::Table(table) => table.profile(r),
        }
    }

    /// `φ''/φ`, exact for the closed-form warps.
    fn second_ratio(&self, p: &Profile) -> f64 {
        match self {
            Warp::Linear => 0.0,
            Warp::Sinh { sqrt_k } => sqrt_k * sqrt_k,
            Warp::Table(_) => p.d2 / p.value,
        }
    }

    /// `(1 - φ'²)/φ²`, the sectional curvature of the spheres' tangent planes.
    fn tangential_term(&self, p: &Profile) -> f64 {
        match self {
            Warp::Linear => 0.0,
            Warp::Sinh { sqrt_k } => -sqrt_k * sqrt_k,
            Warp::Table(_) => (1.0 - p.d1 * p.d1) / (p.value * p.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Weight {
    Flat,
    Quadratic { lambda: f64 },
}

impl Weight {
    fn profile(&self, r: f64) -> Profile {
        match *self {
            Weight::Flat => Profile {
                value: 0.0,
                d1: 0.0,
                d2: 0.0,
            },
            Weight::Quadratic { lambda } => Profile {
                value: 0.5 * lambda * r * r,
                d1: lambda * r,
                d2: lambda,
            },
        }
    }
}

/// A rotationally symmetric smooth metric measure space `(M^N, dr² + φ² g_S, e^{-f} dv)`.
///
/// Immutable after construction; cheap to clone (custom tables are shared).
#[derive(Debug, Clone)]
pub struct ModelSpace {
    dimension: usize,
    kind: SpaceKind,
    warp: Warp,
    weight: Weight,
}

impl ModelSpace {
    fn check_dimension(dimension: usize) -> Result<()> {
        if dimension < 2 {
            return Err(Error::InvalidSpace(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        Ok(())
    }

    pub fn euclidean(dimension: usize) -> Result<Self> {
        Self::check_dimension(dimension)?;
        Ok(Self {
            dimension,
            kind: SpaceKind::Euclidean,
            warp: Warp::Linear,
            weight: Weight::Flat,
        })
    }

    /// Space form of constant sectional curvature `-curvature`.
    pub fn hyperbolic(dimension: usize, curvature: f64) -> Result<Self> {
        Self::check_dimension(dimension)?;
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(Error::InvalidSpace(format!(
                "hyperbolic curvature must be positive and finite, got {curvature}"
            )));
        }
        Ok(Self {
            dimension,
            kind: SpaceKind::Hyperbolic { curvature },
            warp: Warp::Sinh {
                sqrt_k: curvature.sqrt(),
            },
            weight: Weight::Flat,
        })
    }

    /// Flat space with weight `f = λr²/2`, a gradient Ricci soliton with `Ric_f = λg`.
    pub fn gaussian_soliton(dimension: usize, lambda: f64) -> Result<Self> {
        Self::check_dimension(dimension)?;
        if !lambda.is_finite() {
            return Err(Error::InvalidSpace(format!(
                "soliton constant must be finite, got {lambda}"
            )));
        }
        Ok(Self {
            dimension,
            kind: SpaceKind::GaussianSoliton { lambda },
            warp: Warp::Linear,
            weight: Weight::Quadratic { lambda },
        })
    }

    /// Unweighted space whose warp is interpolated from a coefficient table.
    pub fn custom(dimension: usize, table: WarpTable) -> Result<Self> {
        Self::check_dimension(dimension)?;
        Ok(Self {
            dimension,
            kind: SpaceKind::Custom,
            warp: Warp::Table(Arc::new(table)),
            weight: Weight::Flat,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Largest radius at which the warp is defined (`None` for closed-form warps).
    pub fn max_radius(&self) -> Option<f64> {
        match &self.warp {
            Warp::Table(table) => Some(table.max_radius()),
            _ => None,
        }
    }

    pub fn warp(&self, r: f64) -> Result<Profile> {
        if r < 0.0 || !r.is_finite() {
            return Err(Error::Domain(format!(
                "radius must be finite and nonnegative, got {r}"
            )));
        }
        self.warp.profile(r)
    }

    pub fn weight(&self, r: f64) -> Profile {
        self.weight.profile(r)
    }

    /// Radial density `e^{-f(r)} φ(r)^{N-1}` of the weighted measure, sphere area omitted.
    pub fn density(&self, r: f64) -> Result<f64> {
        let phi = self.warp(r)?.value;
        let f = self.weight.profile(r).value;
        Ok((-f).exp() * phi.powi(self.dimension as i32 - 1))
    }

    fn positive_profile(&self, r: f64) -> Result<Profile> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!(
                "radius must be positive (the coefficient is singular at the pole), got {r}"
            )));
        }
        let p = self.warp.profile(r)?;
        if !(p.value > 0.0) {
            return Err(Error::InvalidSpace(format!(
                "warp φ({r}) = {} is not positive",
                p.value
            )));
        }
        Ok(p)
    }

    /// `Δ_f r = (N-1)φ'/φ - f'`, the weighted Laplacian of the distance from the pole.
    pub fn drift_coefficient(&self, r: f64) -> Result<f64> {
        let p = self.positive_profile(r)?;
        let n1 = (self.dimension - 1) as f64;
        Ok(n1 * p.d1 / p.value - self.weight.profile(r).d1)
    }

    pub fn bakry_emery_eigenvalues(&self, r: f64) -> Result<RicciEigenvalues> {
        let p = self.positive_profile(r)?;
        let w = self.weight.profile(r);
        let n = self.dimension as f64;
        let second = self.warp.second_ratio(&p);
        let radial = -(n - 1.0) * second + w.d2;
        let tangential =
            -second + (n - 2.0) * self.warp.tangential_term(&p) + w.d1 * p.d1 / p.value;
        Ok(RicciEigenvalues { radial, tangential })
    }

    fn min_eigenvalue(&self, r: f64) -> Result<f64> {
        Ok(self.bakry_emery_eigenvalues(r)?.min())
    }

    /// Smallest `K >= 0` with `Ric_f >= -(N-1)K` on the ball of radius `radius`.
    ///
    /// The minimum eigenvalue is sampled on a uniform mesh of `(0, radius]` and every
    /// discrete local minimum is refined by golden-section search.
    pub fn ricci_lower_bound(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if let Some(max) = self.max_radius() {
            if radius > max {
                return Err(Error::Domain(format!(
                    "ball radius {radius} exceeds the warp table range {max}"
                )));
            }
        }
        let m = CURVATURE_SAMPLES;
        let step = radius / m as f64;
        let radii: Vec<f64> = (1..=m)
            .map(|i| if i == m { radius } else { step * i as f64 })
            .collect();
        let values = radii
            .iter()
            .map(|&r| self.min_eigenvalue(r))
            .collect::<Result<Vec<_>>>()?;

        let mut best = values.iter().copied().fold(f64::INFINITY, f64::min);
        for i in 0..m {
            let left_ok = i == 0 || values[i] <= values[i - 1];
            let right_ok = i + 1 == m || values[i] <= values[i + 1];
            if !(left_ok && right_ok) {
                continue;
            }
            let lo = if i == 0 { 0.5 * radii[0] } else { radii[i - 1] };
            let hi = if i + 1 == m { radius } else { radii[i + 1] };
            best = best.min(self.golden_minimum(lo, hi)?);
        }
        let k = -best / (self.dimension - 1) as f64;
        Ok(if k > 0.0 { k } else { 0.0 })
    }

    fn golden_minimum(&self, mut lo: f64, mut hi: f64) -> Result<f64> {
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = hi - ratio * (hi - lo);
        let mut b = lo + ratio * (hi - lo);
        let mut fa = self.min_eigenvalue(a)?;
        let mut fb = self.min_eigenvalue(b)?;
        let mut best = fa.min(fb).min(self.min_eigenvalue(hi)?);
        for _ in 0..80 {
            if hi - lo <= 1e-13 * hi.max(1.0) {
                break;
            }
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - ratio * (hi - lo);
                fa = self.min_eigenvalue(a)?;
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + ratio * (hi - lo);
                fb = self.min_eigenvalue(b)?;
            }
            best = best.min(fa).min(fb);
        }
        Ok(best)
    }

    /// `μ`: the weighted Laplacian of the distance function on the unit sphere about the pole.
    pub fn mu(&self) -> Result<f64> {
        self.drift_coefficient(1.0)
    }

    /// Checks the weighted Laplacian comparison `Δ_f r <= μ + (N-1)K(R-1)` on `[1, R]`.
    pub fn comparison_check(&self, radius: f64, samples: usize) -> Result<EstimateReport> {
        if !(radius >= 2.0) {
            return Err(Error::Domain(format!(
                "comparison radius must be at least 2, got {radius}"
            )));
        }
        if samples < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let mu = self.mu()?;
        let k = self.ricci_lower_bound(radius)?;
        let bound = mu + (self.dimension - 1) as f64 * k * (radius - 1.0);
        let mut worst = (f64::INFINITY, 1.0);
        for j in 0..samples {
            let r = 1.0 + (radius - 1.0) * j as f64 / (samples - 1) as f64;
            let margin = bound - self.drift_coefficient(r)?;
            if margin < worst.0 {
                worst = (margin, r);
            }
        }
        Ok(EstimateReport::new(
            "comparison",
            worst.0,
            WorstPoint::Point {
                r: worst.1,
                t: None,
            },
            worst.0 >= -COMPARISON_TOLERANCE,
        )
        .with_tolerance("margin", COMPARISON_TOLERANCE)
        .with_detail("mu", mu)
        .with_detail("K", k)
        .with_detail("bound", bound)
        .with_detail("R", radius))
    }
}

/// Tabulated warp `(r, φ, φ', φ'')` with cubic Hermite interpolation between nodes.
///
/// `φ` is interpolated from `(φ, φ')` and `φ'` from `(φ', φ'')`; `φ''` is the derivative
/// of the latter interpolant, so it is continuous and matches the table at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpTable {
    r: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    ddphi: Vec<f64>,
}

pub const WARP_TABLE_HEADER: &str = "# warp-table v1";

impl WarpTable {
    /// Builds a table from rows `(r, φ, φ', φ'')`, validating the pole conditions.
    pub fn new(rows: Vec<[f64; 4]>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidSpace(
                "warp table needs at least two rows".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "row {i} has a non-finite entry"
                )));
            }
            if i > 0 {
                if !(row[0] > rows[i - 1][0]) {
                    return Err(Error::InvalidSpace(format!(
                        "radii must strictly increase at row {i}"
                    )));
                }
                if !(row[1] > 0.0) {
                    return Err(Error::InvalidSpace(format!(
                        "φ must be positive away from the pole (row {i})"
                    )));
                }
            }
        }
        let first = rows[0];
        if first[0].abs() > POLE_TOLERANCE {
            return Err(Error::InvalidSpace(format!(
                "first row must sit at r = 0, got {}",
                first[0]
            )));
        }
        if first[1].abs() > POLE_TOLERANCE {
            return Err(Error::InvalidSpace(format!(
                "φ(0) must be 0, got {}",
                first[1]
            )));
        }
        if (first[2] - 1.0).abs() > POLE_TOLERANCE {
            return Err(Error::InvalidSpace(format!(
                "φ'(0) must be 1, got {}",
                first[2]
            )));
        }
        Ok(Self {
            r: rows.iter().map(|row| row[0]).collect(),
            phi: rows.iter().map(|row| row[1]).collect(),
            dphi: rows.iter().map(|row| row[2]).collect(),
            ddphi: rows.iter().map(|row| row[3]).collect(),
        })
    }

    /// Samples an analytic warp on a uniform mesh of `[0, r_max]`.
    pub fn from_fn(r_max: f64, nodes: usize, warp: impl Fn(f64) -> Profile) -> Result<Self> {
        if nodes < 2 || !(r_max > 0.0) {
            return Err(Error::InvalidSpace(
                "table needs r_max > 0 and at least two nodes".into(),
            ));
        }
        let rows = (0..nodes)
            .map(|i| {
                let r = r_max * i as f64 / (nodes - 1) as f64;
                let p = warp(r);
                [r, p.value, p.d1, p.d2]
            })
            .collect();
        Self::new(rows)
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header_ok = lines
            .next()
            .map(|(_, l)| l.trim() == WARP_TABLE_HEADER)
            .unwrap_or(false);
        if !header_ok {
            return Err(Error::Parse {
                source_name: source_name.into(),
                line: 1,
                message: format!("expected header `{WARP_TABLE_HEADER}`"),
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    source_name: source_name.into(),
                    line: i + 1,
                    message: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let mut row = [0.0; 4];
            for (slot, field) in row.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|_| Error::Parse {
                    source_name: source_name.into(),
                    line: i + 1,
                    message: format!("`{field}` is not a decimal number"),
                })?;
            }
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(WARP_TABLE_HEADER);
        out.push('\n');
        for i in 0..self.r.len() {
            out.push_str(&format!(
                "{:.17e} {:.17e} {:.17e} {:.17e}\n",
                self.r[i], self.phi[i], self.dphi[i], self.ddphi[i]
            ));
        }
        out
    }

    pub fn max_radius(&self) -> f64 {
        *self.r.last().expect("table has rows")
    }

    fn profile(&self, r: f64) -> Result<Profile> {
        let last = self.r.len() - 1;
        if r > self.r[last] * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "radius {r} is outside the warp table range [0, {}]",
                self.r[last]
            )));
        }
        let i = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            k => (k - 1).min(last - 1),
        };
        let h = self.r[i + 1] - self.r[i];
        let s = ((r - self.r[i]) / h).clamp(0.0, 1.0);
        let (value, _) = hermite(
            s,
            h,
            self.phi[i],
            self.dphi[i],
            self.phi[i + 1],
            self.dphi[i + 1],
        );
        let (d1, d2) = hermite(
            s,
            h,
            self.dphi[i],
            self.ddphi[i],
            self.dphi[i + 1],
            self.ddphi[i + 1],
        );
        Ok(Profile { value, d1, d2 })
    }
}

/// Cubic Hermite interpolant on a cell of width `h`; returns value and derivative.
fn hermite(s: f64, h: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
    let dh00 = 6.0 * s2 - 6.0 * s;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = -6.0 * s2 + 6.0 * s;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let slope = (dh00 * y0 + dh01 * y1) / h + dh10 * m0 + dh11 * m1;
    (value, slope)
}
