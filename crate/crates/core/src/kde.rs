//! Two-dimensional Gaussian kernel density estimate on a regular grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

#[derive(Debug, Error, PartialEq)]
pub enum KdeError {
    #[error("no points to estimate a density from")]
    EmptyInput,
    #[error("grid needs at least 2 nodes per axis, got {0}")]
    GridTooSmall(usize),
    #[error("non-finite point coordinate")]
    NonFinite,
}

/// Density values on a regular grid. `density[j][i]` is the value at
/// `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    pub bandwidth: [f64; 2],
}

impl DensityGrid {
    pub fn cell_area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }

    /// Riemann sum of the density over the grid.
    pub fn total_mass(&self) -> f64 {
        self.density.iter().flatten().sum::<f64>() * self.cell_area()
    }

    /// Fraction of grid nodes with density strictly below `value`.
    pub fn quantile_of(&self, value: f64) -> f64 {
        let all: Vec<f64> = self.density.iter().flatten().copied().collect();
        all.iter().filter(|d| **d < value).count() as f64 / all.len() as f64
    }
}

/// Scott's rule in d = 2: `σ n^(-1/6)` per axis. A degenerate axis falls
/// back to `σ = 1`.
pub fn scott_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sigma = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    sigma * n.powf(-1.0 / 6.0)
}

/// Kernel density at `q` with per-axis bandwidths `h`.
pub fn density_at(points: &[[f64; 2]], h: [f64; 2], q: [f64; 2]) -> f64 {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * h[0] * h[1] * points.len() as f64);
    points
        .iter()
        .map(|p| {
            let u = (q[0] - p[0]) / h[0];
            let v = (q[1] - p[1]) / h[1];
            (-0.5 * (u * u + v * v)).exp()
        })
        .sum::<f64>()
        * norm
}

/// Evaluates the estimate on `n × n` nodes spanning the data plus three
/// bandwidths on every side.
pub fn gaussian_kde_grid(points: &[[f64; 2]], n: usize) -> Result<DensityGrid, KdeError> {
    if points.is_empty() {
        return Err(KdeError::EmptyInput);
    }
    if n < 2 {
        return Err(KdeError::GridTooSmall(n));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(KdeError::NonFinite);
    }
    let axis = |k: usize| -> (Vec<f64>, f64) {
        let vals: Vec<f64> = points.iter().map(|p| p[k]).collect();
        let h = scott_bandwidth(&vals);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
        let step = (hi - lo) / (n - 1) as f64;
        ((0..n).map(|i| lo + step * i as f64).collect(), h)
    };
    let (x, hx) = axis(0);
    let (y, hy) = axis(1);
    let h = [hx, hy];
    let density = par::map(&y, |&yj| {
        x.iter()
            .map(|&xi| density_at(points, h, [xi, yj]))
            .collect()
    });
    Ok(DensityGrid {
        x,
        y,
        density,
        bandwidth: h,
    })
}
