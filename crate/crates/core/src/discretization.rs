//! Radial grids and a conservative second-order weighted Laplacian.
//!
//! For a radial function the weighted Laplacian is `Δ_f u = ρ⁻¹(ρ u')'` with
//! `ρ = e^{-f} φ^{N-1}`. It is discretized in flux form on the dual cells
//! `[r_i - Δr/2, r_i + Δr/2] ∩ [0, r_max]`:
//!
//! ```text
//! (L u)_i = [ρ_{i+1/2}(u_{i+1} - u_i) - ρ_{i-1/2}(u_i - u_{i-1})] / (Δr V_i)
//! ```
//!
//! where `V_i` is the exact weighted volume of the dual cell. No flux crosses the pole,
//! which gives the limit `N u''(0)` there. The operator is exactly symmetric for the
//! inner product `Σ V_i u_i v_i`, and it is exact on `r²` in flat space.

use std::io::{BufRead, Write};
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::geometry::ModelSpace;

/// Smallest admissible node count (room for the one-sided four-point stencils).
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::Domain(format!(
                "r_max must be positive and finite, got {r_max}"
            )));
        }
        if n < MIN_NODES {
            return Err(Error::Domain(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        Ok(Self { r_max, n })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.r_max / (self.n - 1) as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.r_max
        } else {
            self.spacing() * i as f64
        }
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.radius(i))
    }

    /// Number of nodes with `r_i <= radius` (up to rounding of the node positions).
    pub fn nodes_within(&self, radius: f64) -> usize {
        let h = self.spacing();
        let k = ((radius / h) * (1.0 + 1e-12) + 1e-12).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize + 1).min(self.n)
        }
    }
}

/// One scalar per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "field value at node {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.radii().map(f).collect())
    }

    pub fn constant(grid: &RadialGrid, value: f64) -> Result<Self> {
        Self::new(vec![value; grid.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes the `r,value` snapshot format.
    pub fn write_csv<W: Write>(&self, grid: &RadialGrid, mut out: W) -> Result<()> {
        check_len(grid, self)?;
        writeln!(out, "r,value")?;
        for (r, v) in grid.radii().zip(&self.0) {
            writeln!(out, "{r:.17e},{v:.17e}")?;
        }
        Ok(())
    }

    /// Reads an `r,value` snapshot; returns the node radii alongside the field.
    pub fn read_csv<R: BufRead>(input: R, source_name: &str) -> Result<(Vec<f64>, Self)> {
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "r,value" {
                    return Err(Error::Parse {
                        source_name: source_name.into(),
                        line: 1,
                        message: "expected header `r,value`".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    source_name: source_name.into(),
                    line: i + 1,
                    message: format!("`{s}` is not a number"),
                })
            };
            let (r, v) = line.split_once(',').ok_or_else(|| Error::Parse {
                source_name: source_name.into(),
                line: i + 1,
                message: "expected two comma-separated fields".into(),
            })?;
            radii.push(parse(r)?);
            values.push(parse(v)?);
        }
        Ok((radii, Self::new(values)?))
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(grid: &RadialGrid, u: &[f64]) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::Shape {
            expected: grid.len(),
            actual: u.len(),
        });
    }
    Ok(())
}

// Five-point Gauss-Legendre rule on [-1, 1].
const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn integrate(a: f64, b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
        sum += w * f(mid + half * x)?;
    }
    Ok(half * sum)
}

/// Precomputed flux-form weighted Laplacian on a grid.
#[derive(Debug, Clone)]
pub struct WeightedLaplacian {
    grid: RadialGrid,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    volumes: Vec<f64>,
    outer_drift: f64,
}

impl WeightedLaplacian {
    pub fn new(space: &ModelSpace, grid: &RadialGrid) -> Result<Self> {
        if let Some(max) = space.max_radius() {
            if grid.r_max() > max * (1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "grid extends to {} beyond the warp table range {max}",
                    grid.r_max()
                )));
            }
        }
        let n = grid.len();
        let h = grid.spacing();
        let density = |r: f64| space.density(r);
        let faces = (0..n - 1)
            .map(|i| density(grid.radius(i) + 0.5 * h))
            .collect::<Result<Vec<_>>>()?;
        let volumes = (0..n)
            .map(|i| {
                let r = grid.radius(i);
                let a = (r - 0.5 * h).max(0.0);
                let b = (r + 0.5 * h).min(grid.r_max());
                integrate(a, b, density)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(i) = volumes.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Numerical(format!(
                "weighted cell volume at node {i} is not positive (density underflow)"
            )));
        }

        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                lower[i] = faces[i - 1] / (h * volumes[i]);
            }
            if i + 1 < n {
                upper[i] = faces[i] / (h * volumes[i]);
            }
            diag[i] = -(lower[i] + upper[i]);
        }
        Ok(Self {
            grid: *grid,
            lower,
            diag,
            upper,
            volumes,
            outer_drift: space.drift_coefficient(grid.r_max())?,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Weighted volumes of the dual cells (quadrature weights of the inner product).
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Sub-, main and super-diagonal of the zero-flux operator.
    pub fn diagonals(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.lower, &self.diag, &self.upper)
    }

    fn flux_row(&self, u: &[f64], i: usize) -> f64 {
        let mut value = 0.0;
        if i > 0 {
            value += self.lower[i] * (u[i - 1] - u[i]);
        }
        if i + 1 < u.len() {
            value += self.upper[i] * (u[i + 1] - u[i]);
        }
        value
    }

    /// Operator with the zero-flux closure at the outer wall (the solver's operator).
    pub fn apply_neumann(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(&self.grid, u)?;
        Ok((0..u.len()).map(|i| self.flux_row(u, i)).collect())
    }

    /// Diagnostic operator: flux form at the pole and interior nodes, one-sided
    /// second-order `u'' + (Δ_f r) u'` at the outer node.
    pub fn apply(&self, u: &[f64]) -> Result<Field> {
        check_len(&self.grid, u)?;
        let n = u.len();
        let h = self.grid.spacing();
        let mut out: Vec<f64> = (0..n - 1).map(|i| self.flux_row(u, i)).collect();
        let d2 = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / (h * h);
        let d1 = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
        out.push(d2 + self.outer_drift * d1);
        Field::new(out)
    }

    pub fn inner_product(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_len(&self.grid, u)?;
        check_len(&self.grid, v)?;
        Ok(self
            .volumes
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }
}

pub fn apply_weighted_laplacian(space: &ModelSpace, grid: &RadialGrid, u: &Field) -> Result<Field> {
    WeightedLaplacian::new(space, grid)?.apply(u)
}

/// `∫ u v e^{-f} φ^{N-1} dr` over `[0, r_max]`; the sphere area factor is omitted.
pub fn weighted_inner_product(
    space: &ModelSpace,
    grid: &RadialGrid,
    u: &Field,
    v: &Field,
) -> Result<f64> {
    WeightedLaplacian::new(space, grid)?.inner_product(u, v)
}

/// Signed radial derivative: centered inside, `u'(0) = 0` at the pole, one-sided
/// second order at the outer node.
pub fn radial_derivative(grid: &RadialGrid, u: &[f64]) -> Result<Field> {
    check_len(grid, u)?;
    let n = u.len();
    let h = grid.spacing();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    Field::new(out)
}

/// `u''` with the even reflection `u(-Δr) = u(Δr)` at the pole.
pub fn second_derivative(grid: &RadialGrid, u: &[f64]) -> Result<Field> {
    check_len(grid, u)?;
    let n = u.len();
    let h2 = grid.spacing().powi(2);
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (u[1] - u[0]) / h2;
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    }
    out[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    Field::new(out)
}

/// `|∇u| = |u'|` for a radial function.
pub fn gradient_magnitude(grid: &RadialGrid, u: &Field) -> Result<Field> {
    let d = radial_derivative(grid, u)?;
    Field::new(d.iter().map(|v| v.abs()).collect())
}
