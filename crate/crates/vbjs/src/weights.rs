//! Variance-based joint-sparsity weights.
//!
//! Several measurements of the same signal yield several edge maps. Cells
//! where the maps agree on a large response are probable jumps; cells where
//! they disagree are probably noise. The weight vector encodes that: flagged
//! cells get the flag count `c`, the rest get `1 - T` where `T` is the
//! normalized agreement score, so smooth cells are penalized near 1 and the
//! flagged set is penalized uniformly.

use crate::{Result, VbjsError};

/// Weights plus the bookkeeping the pipelines report.
#[derive(Debug, Clone)]
pub struct WeightVector {
    /// Per-cell penalty weights.
    pub w: Vec<f64>,
    /// Number of flagged cells (`T >= tau`).
    pub c: usize,
    /// Flagging threshold used to build `w`.
    pub tau: f64,
}

/// Minmod limiter over one cell's values across measurements: zero if any
/// entry is zero or the signs disagree, otherwise the common sign times the
/// smallest magnitude.
pub fn minmod(vals: &[f64]) -> f64 {
    if vals.is_empty() || vals.iter().any(|&v| v == 0.0) {
        return 0.0;
    }
    let s = vals[0].signum();
    if vals.iter().any(|&v| v.signum() != s) {
        return 0.0;
    }
    s * vals.iter().fold(f64::INFINITY, |a, &v| a.min(v.abs()))
}

fn check_maps(maps: &[Vec<f64>]) -> Result<usize> {
    if maps.is_empty() {
        return Err(VbjsError::InvalidParam("no edge maps given".into()));
    }
    let n = maps[0].len();
    if n == 0 || maps.iter().any(|m| m.len() != n) {
        return Err(VbjsError::DimensionMismatch(
            "edge maps must share a nonzero length".into(),
        ));
    }
    Ok(n)
}

/// Per-cell minmod across maps.
pub fn build_s(maps: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_maps(maps)?;
    let mut s = Vec::with_capacity(n);
    let mut row = vec![0.0; maps.len()];
    for i in 0..n {
        for (j, m) in maps.iter().enumerate() {
            row[j] = m[i];
        }
        s.push(minmod(&row));
    }
    Ok(s)
}

/// Per-cell population variance across maps (divisor = number of maps).
pub fn variance_vector(maps: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_maps(maps)?;
    let j = maps.len() as f64;
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let mean: f64 = maps.iter().map(|m| m[i]).sum::<f64>() / j;
        let var: f64 = maps.iter().map(|m| (m[i] - mean).powi(2)).sum::<f64>() / j;
        v.push(var);
    }
    Ok(v)
}

/// Build the weight vector from `J` edge maps at flagging threshold `tau`.
///
/// `T_i = |S_i v_i| / max_i |S_i v_i|`; cells with `T_i >= tau` are flagged
/// and weighted by the flag count, the rest get `1 - T_i`. If every score is
/// zero there is nothing to flag and the weights are uniform 1.
pub fn build_weights(maps: &[Vec<f64>], tau: f64) -> Result<WeightVector> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(VbjsError::InvalidParam(format!(
            "tau must lie in (0, 1], got {tau}"
        )));
    }
    let n = check_maps(maps)?;
    let s = build_s(maps)?;
    let v = variance_vector(maps)?;
    let sv: Vec<f64> = s.iter().zip(&v).map(|(&a, &b)| (a * b).abs()).collect();
    let mx = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if mx == 0.0 {
        return Ok(WeightVector {
            w: vec![1.0; n],
            c: 0,
            tau,
        });
    }
    let t: Vec<f64> = sv.iter().map(|&a| a / mx).collect();
    let c = t.iter().filter(|&&ti| ti >= tau).count();
    let w = t
        .iter()
        .map(|&ti| if ti >= tau { c as f64 } else { 1.0 - ti })
        .collect();
    Ok(WeightVector { w, c, tau })
}

/// Collapse weights to a 0/1 vector: 1 where `w_i >= tau_tilde`, 0 elsewhere.
/// The zeros drop mid-scale cells out of the penalty entirely.
pub fn build_mask(w: &WeightVector, tau_tilde: f64) -> Vec<f64> {
    w.w.iter()
        .map(|&wi| if wi >= tau_tilde { 1.0 } else { 0.0 })
        .collect()
}

/// Combine per-direction weight fields by elementwise minimum, so a cell
/// flagged as an edge in either direction keeps the smaller penalty.
pub fn combine_2d(wx: &[f64], wy: &[f64]) -> Result<Vec<f64>> {
    if wx.len() != wy.len() {
        return Err(VbjsError::DimensionMismatch(
            "directional weights differ in length".into(),
        ));
    }
    Ok(wx.iter().zip(wy).map(|(&a, &b)| a.min(b)).collect())
}

/// Pick the most central map: pairwise l2 distances `D_ij`, then the index
/// with the smallest column sum (first index on ties).
pub fn select_best(maps: &[Vec<f64>]) -> Result<usize> {
    check_maps(maps)?;
    let j = maps.len();
    let mut sums = vec![0.0; j];
    for a in 0..j {
        for b in (a + 1)..j {
            let d: f64 = maps[a]
                .iter()
                .zip(&maps[b])
                .map(|(&x, &y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            sums[a] += d;
            sums[b] += d;
        }
    }
    let mut best = 0;
    for i in 1..j {
        if sums[i] < sums[best] {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmod_cases() {
        assert_eq!(minmod(&[0.0, 2.0]), 0.0);
        assert_eq!(minmod(&[-1.0, 1.0]), 0.0);
        assert_eq!(minmod(&[2.0, 4.0]), 2.0);
        assert_eq!(minmod(&[-3.0, -5.0, -4.0]), -3.0);
        assert_eq!(minmod(&[]), 0.0);
    }

    #[test]
    fn worked_example() {
        // two maps, four cells; rows across maps are
        // (0,0), (2,4), (-1,1), (3,3)
        let maps = vec![vec![0.0, 2.0, -1.0, 3.0], vec![0.0, 4.0, 1.0, 3.0]];
        let s = build_s(&maps).unwrap();
        assert_eq!(s, vec![0.0, 2.0, 0.0, 3.0]);
        let v = variance_vector(&maps).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 1.0, 0.0]);
        let wv = build_weights(&maps, 0.1).unwrap();
        assert_eq!(wv.c, 1);
        assert_eq!(wv.w, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn multi_flag_weights() {
        // rows: (2,4) -> score 2, (-3,-5) -> 3, (1,2) -> 0.25, (0,1) -> 0
        let maps = vec![vec![2.0, -3.0, 1.0, 0.0], vec![4.0, -5.0, 2.0, 1.0]];
        let wv = build_weights(&maps, 0.5).unwrap();
        assert_eq!(wv.c, 2);
        assert_eq!(wv.w[0], 2.0);
        assert_eq!(wv.w[1], 2.0);
        assert!((wv.w[2] - (1.0 - 0.25 / 3.0)).abs() < 1e-15);
        assert_eq!(wv.w[3], 1.0);
    }

    #[test]
    fn degenerate_scores_give_uniform_weights() {
        let maps = vec![vec![0.0, 1.0, -1.0], vec![0.0, -1.0, 1.0]];
        // every cell minmods to zero
        let wv = build_weights(&maps, 0.2).unwrap();
        assert_eq!(wv.c, 0);
        assert_eq!(wv.w, vec![1.0; 3]);
    }

    #[test]
    fn weight_entries_are_count_or_near_one() {
        let maps = vec![
            vec![0.5, -2.0, 3.0, 0.0, 1.0, 1.0],
            vec![0.7, -2.5, 2.0, 0.3, 1.4, 1.0],
            vec![0.4, -1.5, 4.0, -0.1, 0.9, 1.0],
        ];
        let tau = 0.3;
        let wv = build_weights(&maps, tau).unwrap();
        for &wi in &wv.w {
            let flagged = wi == wv.c as f64;
            let smooth = wi > 1.0 - tau && wi <= 1.0;
            assert!(flagged || smooth, "weight {wi} violates the split");
        }
    }

    #[test]
    fn scores_are_scale_invariant() {
        let base = vec![vec![1.0, -2.0, 0.5, 3.0], vec![1.5, -2.5, 0.4, 2.0]];
        let scaled: Vec<Vec<f64>> = base
            .iter()
            .map(|m| m.iter().map(|&v| 7.3 * v).collect())
            .collect();
        let a = build_weights(&base, 0.4).unwrap();
        let b = build_weights(&scaled, 0.4).unwrap();
        assert_eq!(a.c, b.c);
        for (x, y) in a.w.iter().zip(&b.w) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mask_thresholds_weights() {
        let wv = WeightVector {
            w: vec![2.0, 0.3, 1.0, 0.99],
            c: 1,
            tau: 0.5,
        };
        assert_eq!(build_mask(&wv, 1.0), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn combine_takes_minimum() {
        let w = combine_2d(&[1.0, 0.2, 3.0], &[0.5, 0.9, 3.0]).unwrap();
        assert_eq!(w, vec![0.5, 0.2, 3.0]);
        assert!(combine_2d(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn select_best_prefers_central_map() {
        let maps = vec![
            vec![1.0, 0.0],
            vec![1.1, 0.05],
            vec![5.0, 4.0], // outlier
        ];
        assert_eq!(select_best(&maps).unwrap(), 1);
        // identical maps tie; first index wins
        let same = vec![vec![1.0, 2.0]; 4];
        assert_eq!(select_best(&same).unwrap(), 0);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(build_weights(&[], 0.5).is_err());
        assert!(build_weights(&[vec![1.0], vec![1.0, 2.0]], 0.5).is_err());
        assert!(build_weights(&[vec![1.0, 2.0]], 0.0).is_err());
        assert!(build_weights(&[vec![1.0, 2.0]], 1.5).is_err());
    }
}
