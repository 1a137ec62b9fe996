//! Polynomial annihilation (PA) sparsifying transform on a uniform periodic
//! grid.
//!
//! The order-`m` operator annihilates polynomials of degree `m - 1` exactly;
//! applied to a piecewise-smooth vector it leaves spikes at the jump cells,
//! which is what the weighted solvers penalize. Only the periodic circulant
//! construction is provided; each row carries the same `m + 1`-point stencil.

use crate::{Result, VbjsError};

/// Banded circulant operator representation: one stencil, applied cyclically.
#[derive(Debug, Clone)]
pub struct PaOperator {
    /// Annihilation order.
    pub m: usize,
    /// Grid size.
    pub n_x: usize,
    /// Column offsets of the stencil relative to the row index.
    pub offsets: Vec<i64>,
    /// Stencil values, one per offset, after row normalization.
    pub stencil: Vec<f64>,
    /// Periodic wraparound (the only supported boundary treatment).
    pub periodic: bool,
}

/// Raw annihilation coefficients `c_j = m! / (prod_{k != j} (j - k) * dx)`,
/// for `j = 1..=m+1` over a uniform stencil of spacing `dx`.
pub fn uniform_pa_coeffs(m: usize, dx: f64) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(VbjsError::InvalidParam("PA order must be >= 1".into()));
    }
    if dx <= 0.0 {
        return Err(VbjsError::InvalidParam("dx must be positive".into()));
    }
    let mfact: f64 = (1..=m).map(|v| v as f64).product();
    let mut out = Vec::with_capacity(m + 1);
    for j in 1..=(m as i64 + 1) {
        let mut prod = 1.0;
        for k in 1..=(m as i64 + 1) {
            if k != j {
                prod *= (j - k) as f64;
            }
        }
        out.push(mfact / (prod * dx));
    }
    Ok(out)
}

impl PaOperator {
    /// Build the periodic order-`m` operator on `n_x` points.
    ///
    /// The stencil is centered: offsets run `-(m-1)/2 ..= (m+1)/2` for odd
    /// `m` and `-m/2 ..= m/2` for even `m`. Rows are normalized by the sum of
    /// raw coefficients at non-positive offsets, which reproduces the
    /// conventional signs (order 1 gives `(1, -1)`, order 2 gives
    /// `(-1, 2, -1)`).
    pub fn build(m: usize, n_x: usize) -> Result<Self> {
        if n_x <= m + 1 {
            return Err(VbjsError::InvalidParam(format!(
                "grid size {n_x} too small for PA order {m}"
            )));
        }
        let raw = uniform_pa_coeffs(m, 1.0)?;
        let lo: i64 = if m % 2 == 1 {
            -((m as i64 - 1) / 2)
        } else {
            -(m as i64 / 2)
        };
        let offsets: Vec<i64> = (lo..=lo + m as i64).collect();
        let q: f64 = raw
            .iter()
            .zip(&offsets)
            .filter(|(_, &o)| o <= 0)
            .map(|(&c, _)| c)
            .sum();
        let stencil = raw.iter().map(|&c| c / q).collect();
        Ok(PaOperator {
            m,
            n_x,
            offsets,
            stencil,
            periodic: true,
        })
    }

    /// Banded circulant multiply, `O(m * n_x)`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n_x {
            return Err(VbjsError::DimensionMismatch(format!(
                "vector length {} != operator size {}",
                f.len(),
                self.n_x
            )));
        }
        let n = self.n_x as i64;
        let mut out = vec![0.0; self.n_x];
        for (r, or) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
                let col = (r as i64 + off).rem_euclid(n) as usize;
                acc += c * f[col];
            }
            *or = acc;
        }
        Ok(out)
    }

    /// Transpose multiply (the adjoint of a circulant is the reversed
    /// circulant).
    pub fn apply_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.n_x {
            return Err(VbjsError::DimensionMismatch(format!(
                "vector length {} != operator size {}",
                g.len(),
                self.n_x
            )));
        }
        let n = self.n_x as i64;
        let mut out = vec![0.0; self.n_x];
        for (r, &gr) in g.iter().enumerate() {
            for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
                let col = (r as i64 + off).rem_euclid(n) as usize;
                out[col] += c * gr;
            }
        }
        Ok(out)
    }

    /// First column of the circulant (the generator used by FFT-based
    /// solvers): entry `r` is the coefficient multiplying `f[0]` in row `r`.
    pub fn first_column(&self) -> Vec<f64> {
        let n = self.n_x as i64;
        let mut col = vec![0.0; self.n_x];
        for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
            // row r touches column (r + off) mod n; column 0 is touched by
            // rows r = (-off) mod n
            let r = (-off).rem_euclid(n) as usize;
            col[r] += c;
        }
        col
    }

    /// Dense form, for small sizes and debug dumps.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_x as i64;
        let mut rows = vec![vec![0.0; self.n_x]; self.n_x];
        for (r, row) in rows.iter_mut().enumerate() {
            for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
                row[(r as i64 + off).rem_euclid(n) as usize] += c;
            }
        }
        rows
    }

    /// Apply along the first axis of a row-major `rows x cols` matrix
    /// (each column transformed independently).
    pub fn apply_cols(&self, a: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
        if rows != self.n_x || a.len() != rows * cols {
            return Err(VbjsError::DimensionMismatch(
                "matrix shape does not match operator".into(),
            ));
        }
        let n = rows as i64;
        let mut out = vec![0.0; a.len()];
        for r in 0..rows {
            for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
                let src = (r as i64 + off).rem_euclid(n) as usize;
                for j in 0..cols {
                    out[r * cols + j] += c * a[src * cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Transpose-apply along the first axis of a row-major matrix.
    pub fn apply_transpose_cols(&self, a: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
        if rows != self.n_x || a.len() != rows * cols {
            return Err(VbjsError::DimensionMismatch(
                "matrix shape does not match operator".into(),
            ));
        }
        let n = rows as i64;
        let mut out = vec![0.0; a.len()];
        for r in 0..rows {
            for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
                let dst = (r as i64 + off).rem_euclid(n) as usize;
                for j in 0..cols {
                    out[dst * cols + j] += c * a[r * cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Transpose-apply along the second axis (right-multiplication by the
    /// operator).
    pub fn apply_transpose_rows(&self, a: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
        if cols != self.n_x || a.len() != rows * cols {
            return Err(VbjsError::DimensionMismatch(
                "matrix shape does not match operator".into(),
            ));
        }
        let n = cols as i64;
        let mut out = vec![0.0; a.len()];
        for r in 0..rows {
            for j in 0..cols {
                let a_rj = a[r * cols + j];
                for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
                    let dst = (j as i64 + off).rem_euclid(n) as usize;
                    out[r * cols + dst] += c * a_rj;
                }
            }
        }
        Ok(out)
    }

    /// Apply along the second axis (each row transformed independently),
    /// i.e. the matrix product with the operator transposed on the right.
    pub fn apply_rows(&self, a: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
        if cols != self.n_x || a.len() != rows * cols {
            return Err(VbjsError::DimensionMismatch(
                "matrix shape does not match operator".into(),
            ));
        }
        let n = cols as i64;
        let mut out = vec![0.0; a.len()];
        for r in 0..rows {
            for j in 0..cols {
                let mut acc = 0.0;
                for (&off, &c) in self.offsets.iter().zip(&self.stencil) {
                    let src = (j as i64 + off).rem_euclid(n) as usize;
                    acc += c * a[r * cols + src];
                }
                out[r * cols + j] = acc;
            }
        }
        Ok(out)
    }
}
