//! Uniform reconstruction grid on `[-pi, pi)`.

use crate::{Result, VbjsError};

/// Uniform spatial grid paired with a Fourier half-bandwidth.
///
/// Grid points are `x_j = -pi + 2*pi*j/n_x` for `j = 0..n_x-1` (left endpoint
/// included, right excluded). The default resolution is `n_x = 2N`, which
/// matches one reconstruction cell per acquired frequency pair.
#[derive(Debug, Clone)]
pub struct Grid1D {
    /// Fourier half-bandwidth: coefficients are indexed `k = -N..=N`.
    pub n: usize,
    /// Number of spatial points.
    pub n_x: usize,
    /// Grid points, length `n_x`.
    pub x: Vec<f64>,
    /// Spacing `2*pi/n_x`.
    pub dx: f64,
}

impl Grid1D {
    pub fn new(n: usize, n_x: usize) -> Result<Self> {
        if n == 0 || n_x == 0 {
            return Err(VbjsError::InvalidParam(
                "grid sizes must be positive".into(),
            ));
        }
        let dx = 2.0 * std::f64::consts::PI / n_x as f64;
        let x = (0..n_x)
            .map(|j| -std::f64::consts::PI + dx * j as f64)
            .collect();
        Ok(Grid1D { n, n_x, x, dx })
    }

    /// Grid with the default resolution `n_x = 2N`.
    pub fn standard(n: usize) -> Self {
        Self::new(n, 2 * n).expect("n > 0")
    }

    /// Index of the grid point nearest to `x_star`.
    pub fn nearest(&self, x_star: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (j, &xj) in self.x.iter().enumerate() {
            let d = (xj - x_star).abs();
            if d < dist {
                dist = d;
                best = j;
            }
        }
        best
    }
}
