//! Reconstruction error metrics.
//!
//! Errors are reported three ways: relative l2 over the whole grid or a
//! region mask, absolute error at a single grid point, and a pointwise
//! log10 error map for banded comparisons.

use crate::grid::Grid1D;
use crate::{Result, VbjsError};

/// Relative l2 error `||f_star - f_true|| / ||f_true||`, optionally
/// restricted to the entries where `region[i]` is true.
pub fn rel_error(f_star: &[f64], f_true: &[f64], region: Option<&[bool]>) -> Result<f64> {
    if f_star.len() != f_true.len() {
        return Err(VbjsError::DimensionMismatch(format!(
            "length {} vs {}",
            f_star.len(),
            f_true.len()
        )));
    }
    if let Some(r) = region {
        if r.len() != f_true.len() {
            return Err(VbjsError::DimensionMismatch(
                "region mask length mismatch".into(),
            ));
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..f_true.len() {
        if region.map_or(true, |r| r[i]) {
            num += (f_star[i] - f_true[i]).powi(2);
            den += f_true[i].powi(2);
        }
    }
    if den == 0.0 {
        return Err(VbjsError::InvalidParam(
            "reference vanishes on the requested region".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Absolute error at the grid point nearest `x_star`.
pub fn abs_error_at(f_star: &[f64], f_true: &[f64], grid: &Grid1D, x_star: f64) -> Result<f64> {
    if f_star.len() != grid.n_x || f_true.len() != grid.n_x {
        return Err(VbjsError::DimensionMismatch(
            "vector length does not match grid".into(),
        ));
    }
    let i = grid.nearest(x_star);
    Ok((f_star[i] - f_true[i]).abs())
}

/// Pointwise `log10 |f_star - f_true|`, clamped below at -16 so exact
/// matches stay plottable.
pub fn pointwise_log(f_star: &[f64], f_true: &[f64]) -> Result<Vec<f64>> {
    if f_star.len() != f_true.len() {
        return Err(VbjsError::DimensionMismatch(format!(
            "length {} vs {}",
            f_star.len(),
            f_true.len()
        )));
    }
    Ok(f_star
        .iter()
        .zip(f_true)
        .map(|(&a, &b)| (a - b).abs().log10().max(-16.0))
        .collect())
}

/// Region mask selecting the smooth flanks `1 <= |x| <= pi` of the standard
/// test signal (everything at least one unit away from its interior jump).
pub fn smooth_flank_mask(grid: &Grid1D) -> Vec<bool> {
    grid.x.iter().map(|&x| x.abs() >= 1.0).collect()
}

/// Region mask for the left plateau `x <= -1`, used by masked-error sweeps.
pub fn left_plateau_mask(grid: &Grid1D) -> Vec<bool> {
    grid.x.iter().map(|&x| x <= -1.0).collect()
}

/// Summary bundle produced by the experiment runners.
#[derive(Debug, Clone, Default)]
pub struct ErrorReport {
    pub total: f64,
    pub smooth: f64,
    pub point: f64,
}
