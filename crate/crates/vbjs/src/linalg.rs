//! Minimal dense linear algebra: just enough for the interior-point normal
//! equations and for dense test oracles. Matrices are row-major `Vec<f64>`
//! with explicit dimensions.

use crate::{Result, VbjsError};

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(VbjsError::DimensionMismatch(format!(
            "matrix buffer {} for size {n}",
            a.len()
        )));
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(VbjsError::SolverFailure(format!(
                        "non-positive pivot {s:.3e} at row {i}"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve `L L^T x = b` given the lower factor.
pub fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Factor-and-solve convenience for one right-hand side.
pub fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a, n)?;
    Ok(chol_solve(&l, n, b))
}

/// `y = A x` for row-major `rows x cols`.
pub fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; rows];
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        y[r] = row.iter().zip(x).map(|(&m, &v)| m * v).sum();
    }
    y
}

/// `y = A^T x` for row-major `rows x cols`.
pub fn mat_t_vec(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; cols];
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        for (yc, &m) in y.iter_mut().zip(row) {
            *yc += m * x[r];
        }
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_spd() {
        // A = [[4,2,0],[2,5,2],[0,2,5]]
        let a = vec![4.0, 2.0, 0.0, 2.0, 5.0, 2.0, 0.0, 2.0, 5.0];
        let l = cholesky(&a, 3).unwrap();
        // reconstruct A = L L^T
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += l[i * 3 + k] * l[j * 3 + k];
                }
                assert!((s - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        let b = vec![2.0, -1.0, 3.0];
        let x = chol_solve(&l, 3, &b);
        let ax = mat_vec(&a, 3, 3, &x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalues 3, -1
        assert!(cholesky(&a, 2).is_err());
    }

    #[test]
    fn rectangular_products() {
        // A is 2x3
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = vec![1.0, 0.5, -1.0];
        let y = mat_vec(&a, 2, 3, &x);
        assert_eq!(y, vec![1.0 + 1.0 - 3.0, 4.0 + 2.5 - 6.0]);
        let z = mat_t_vec(&a, 2, 3, &[2.0, -1.0]);
        assert_eq!(z, vec![2.0 - 4.0, 4.0 - 5.0, 6.0 - 6.0]);
        assert_eq!(dot(&x, &x), 1.0 + 0.25 + 1.0);
        assert!((norm2(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
    }
}
