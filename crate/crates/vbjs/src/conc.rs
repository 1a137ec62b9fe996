//! Concentration-factor edge detection.
//!
//! A concentration factor sigma reshapes the conjugate partial Fourier sum so
//! it converges to the jump function of the signal instead of the signal
//! itself. Missing coefficients simply drop out of the sum, which is what
//! makes the method usable on band-deficient data.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::fourier::FourierData;
use crate::grid::Grid1D;
use crate::scene::{fold_ifft2, FourierData2D};
use crate::{Result, VbjsError};

/// How a factor was produced; designed factors trade admissibility for
/// robustness to missing bands.
#[derive(Debug, Clone, PartialEq)]
pub enum CfKind {
    Exponential { alpha: f64 },
    Designed,
}

/// Factor values on the positive modes `k = 1..=n`.
#[derive(Debug, Clone)]
pub struct ConcentrationFactor {
    pub n: usize,
    pub values: Vec<f64>,
    pub kind: CfKind,
}

impl ConcentrationFactor {
    /// Write as `k,sigma_k` rows. The kind is not stored; factors read back
    /// are treated as designed.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,sigma_k")?;
        for (i, &v) in self.values.iter().enumerate() {
            writeln!(out, "{},{:.17e}", i + 1, v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(input: R) -> Result<ConcentrationFactor> {
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header
            }
            let mut parts = line.splitn(2, ',');
            let k: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| VbjsError::InvalidParam(format!("bad factor row: {line}")))?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| VbjsError::InvalidParam(format!("bad factor row: {line}")))?;
            if k != values.len() + 1 {
                return Err(VbjsError::InvalidParam(format!(
                    "factor rows out of order at k={k}"
                )));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(VbjsError::InvalidParam("empty factor file".into()));
        }
        Ok(ConcentrationFactor {
            n: values.len(),
            values,
            kind: CfKind::Designed,
        })
    }
}

/// Edge map samples plus the largest imaginary part discarded when taking
/// the real part; it stays at rounding level for conjugate-symmetric data.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub values: Vec<f64>,
    pub imag_residual: f64,
}

/// Samples of the order-`q` response kernel on a grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub q: u32,
    pub values: Vec<f64>,
}

/// Diagnostics for the classical admissibility conditions.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    /// The response kernel is an odd function.
    pub odd_kernel: bool,
    /// Trapezoid estimate of `int sigma(eta)/eta deta`; should be `pi`.
    pub normalization: f64,
    /// Largest second difference of `sigma(eta)/eta` on the mode grid, a
    /// crude smoothness indicator (reported, not thresholded).
    pub smoothness_proxy: f64,
    /// Exponential-family factor passing the kernel and normalization
    /// checks. Designed factors are reported non-admissible by construction.
    pub admissible: bool,
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) & !1; // even subinterval count
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Exponential concentration factor of order `alpha` on bandwidth `n`.
///
/// `sigma(eta) = C eta exp(1/(alpha eta (eta - 1)))` on `0 < eta < 1`, zero
/// at the band edge, with `C` fixed so the normalization integral equals
/// `pi` (composite Simpson on `[1/n, 1 - 1/n]`).
pub fn exponential_cf(n: usize, alpha: f64) -> Result<ConcentrationFactor> {
    if n < 3 {
        return Err(VbjsError::InvalidParam(format!(
            "bandwidth {n} too small for an exponential factor"
        )));
    }
    if alpha <= 0.0 {
        return Err(VbjsError::InvalidParam("alpha must be positive".into()));
    }
    let g = |t: f64| (1.0 / (alpha * t * (t - 1.0))).exp();
    let lo = 1.0 / n as f64;
    let integral = simpson(g, lo, 1.0 - lo, 2048);
    let c = PI / integral;
    let values = (1..=n)
        .map(|k| {
            let eta = k as f64 / n as f64;
            if eta >= 1.0 {
                0.0
            } else {
                c * eta * g(eta)
            }
        })
        .collect();
    Ok(ConcentrationFactor {
        n,
        values,
        kind: CfKind::Exponential { alpha },
    })
}

/// Signed multiplier `sgn(k) sigma(|k|)` for mode `k`.
fn signed_factor(cf: &ConcentrationFactor, k: i64) -> f64 {
    match k.cmp(&0) {
        std::cmp::Ordering::Greater => cf.values[k as usize - 1],
        std::cmp::Ordering::Less => -cf.values[(-k) as usize - 1],
        std::cmp::Ordering::Equal => 0.0,
    }
}

fn edge_direct(data: &FourierData, cf: &ConcentrationFactor, grid: &Grid1D) -> EdgeMap {
    let n = data.n as i64;
    let mut values = Vec::with_capacity(grid.n_x);
    let mut resid = 0.0f64;
    for &xj in &grid.x {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in -n..=n {
            let idx = (k + n) as usize;
            if !data.known[idx] || k == 0 {
                continue;
            }
            let m = Complex64::i() * data.coeffs[idx] * signed_factor(cf, k);
            acc += m * Complex64::from_polar(1.0, k as f64 * xj);
        }
        values.push(acc.re);
        resid = resid.max(acc.im.abs());
    }
    EdgeMap {
        values,
        imag_residual: resid,
    }
}

fn edge_fft(data: &FourierData, cf: &ConcentrationFactor, n_x: usize) -> EdgeMap {
    let n = data.n as i64;
    let mut bins = vec![Complex64::new(0.0, 0.0); n_x];
    for k in -n..=n {
        let idx = (k + n) as usize;
        if !data.known[idx] || k == 0 {
            continue;
        }
        // e^{ikx_j} = (-1)^k e^{2 pi i k j / n_x} on the shifted grid
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let m = Complex64::i() * data.coeffs[idx] * (signed_factor(cf, k) * sign);
        bins[k.rem_euclid(n_x as i64) as usize] += m;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n_x).process(&mut bins);
    let mut resid = 0.0f64;
    let values = bins
        .iter()
        .map(|z| {
            resid = resid.max(z.im.abs());
            z.re
        })
        .collect();
    EdgeMap {
        values,
        imag_residual: resid,
    }
}

/// Edge map `Re(i sum_k fhat_k sgn(k) sigma(|k|/n) e^{i k x})` on the grid;
/// unknown coefficients contribute nothing. Uses an FFT fast path on the
/// standard grid and the direct sum otherwise.
pub fn concentration_edge(
    data: &FourierData,
    cf: &ConcentrationFactor,
    grid: &Grid1D,
) -> Result<EdgeMap> {
    if cf.n != data.n {
        return Err(VbjsError::BandwidthMismatch {
            expected: data.n,
            got: cf.n,
        });
    }
    if grid.n_x == 2 * data.n {
        Ok(edge_fft(data, cf, grid.n_x))
    } else {
        Ok(edge_direct(data, cf, grid))
    }
}

/// Directional edge maps of a 2D coefficient grid, row-major `n_x * n_x`,
/// with the factor applied along the x modes and the y modes respectively.
pub fn edge_maps_2d(
    data: &FourierData2D,
    cf: &ConcentrationFactor,
    n_x: usize,
) -> Result<(EdgeMap, EdgeMap)> {
    if cf.n != data.n {
        return Err(VbjsError::BandwidthMismatch {
            expected: data.n,
            got: cf.n,
        });
    }
    let n = data.n as i64;
    let side = (2 * data.n + 1) as i64;
    let mut mx = vec![Complex64::new(0.0, 0.0); (side * side) as usize];
    let mut my = mx.clone();
    for a in 0..side {
        let ka = a - n;
        for b in 0..side {
            let kb = b - n;
            let idx = (a * side + b) as usize;
            if !data.known[idx] {
                continue;
            }
            let base = Complex64::i() * data.coeffs[idx];
            mx[idx] = base * signed_factor(cf, ka);
            my[idx] = base * signed_factor(cf, kb);
        }
    }
    let gx = fold_ifft2(&mx, data.n, n_x);
    let gy = fold_ifft2(&my, data.n, n_x);
    let take_real = |v: Vec<Complex64>| {
        let mut resid = 0.0f64;
        let values = v
            .iter()
            .map(|z| {
                resid = resid.max(z.im.abs());
                z.re
            })
            .collect();
        EdgeMap {
            values,
            imag_residual: resid,
        }
    };
    Ok((take_real(gx), take_real(gy)))
}

/// Order-`q` response kernel
/// `W_q(x) = Re[(2 pi i^q)^{-1} sum_k sgn(k) k^{-(q+1)} sigma(|k|) e^{ikx}]`.
/// `W_0` is the factor's response to a unit jump at the origin.
pub fn w_kernel(cf: &ConcentrationFactor, q: u32, grid: &Grid1D) -> KernelTable {
    let n = cf.n as i64;
    let scale = (Complex64::new(0.0, 1.0).powu(q) * 2.0 * PI).inv();
    let values = grid
        .x
        .iter()
        .map(|&xj| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 1..=n {
                let s = cf.values[k as usize - 1] / (k as f64).powi(q as i32 + 1);
                acc += Complex64::from_polar(1.0, k as f64 * xj) * s;
                let neg = if q % 2 == 0 { 1.0 } else { -1.0 };
                acc += Complex64::from_polar(1.0, -(k as f64) * xj) * (s * neg);
            }
            (scale * acc).re
        })
        .collect();
    KernelTable { q, values }
}

/// Check the classical admissibility conditions on a factor.
pub fn admissibility_report(cf: &ConcentrationFactor) -> AdmissibilityReport {
    let n = cf.n;
    // s_k = sigma(eta_k)/eta_k on the mode grid eta_k = k/n
    let s: Vec<f64> = (1..=n)
        .map(|k| cf.values[k - 1] * n as f64 / k as f64)
        .collect();
    // trapezoid with spacing 1/n
    let mut norm = 0.0;
    for k in 1..n {
        norm += 0.5 * (s[k - 1] + s[k]) / n as f64;
    }
    let mut proxy = 0.0f64;
    for k in 1..n.saturating_sub(1) {
        proxy = proxy.max((s[k + 1] - 2.0 * s[k] + s[k - 1]).abs());
    }
    // oddness of the response: probe W_0 shifted sums directly via the sine
    // kernel K(x) = sum sigma_k sin(kx); it is odd iff K(x) + K(-x) = 0
    let probes = 17;
    let mut odd = true;
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for p in 0..probes {
        let x = -PI + 2.0 * PI * (p as f64 + 0.37) / probes as f64;
        let kx = |x: f64| -> f64 {
            (1..=n)
                .map(|k| cf.values[k - 1] * (k as f64 * x).sin())
                .sum()
        };
        let a = kx(x);
        let b = kx(-x);
        scale = scale.max(a.abs());
        worst = worst.max((a + b).abs());
    }
    if worst > 1e-10 * scale.max(1.0) {
        odd = false;
    }
    let admissible = matches!(cf.kind, CfKind::Exponential { .. })
        && odd
        && (norm - PI).abs() <= 0.02 * PI;
    AdmissibilityReport {
        odd_kernel: odd,
        normalization: norm,
        smoothness_proxy: proxy,
        admissible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{ramp_exact_coeffs, sample_ramp};

    fn ramp_data(n: usize) -> FourierData {
        ramp_exact_coeffs(n)
    }

    #[test]
    fn exponential_factor_shape() {
        let cf = exponential_cf(64, 4.0).unwrap();
        assert_eq!(cf.values.len(), 64);
        assert_eq!(cf.values[63], 0.0);
        for k in 1..63 {
            assert!(cf.values[k] > 0.0, "sigma at k={} not positive", k + 1);
        }
        assert!(exponential_cf(2, 4.0).is_err());
        assert!(exponential_cf(64, 0.0).is_err());
    }

    #[test]
    fn normalization_close_to_pi() {
        for &alpha in &[2.0, 4.0, 8.0, 20.0] {
            let cf = exponential_cf(64, alpha).unwrap();
            let rep = admissibility_report(&cf);
            assert!(
                (rep.normalization - PI).abs() <= 0.02 * PI,
                "alpha={alpha}: norm={}",
                rep.normalization
            );
            assert!(rep.odd_kernel);
            assert!(rep.admissible);
            assert!(rep.smoothness_proxy.is_finite() && rep.smoothness_proxy >= 0.0);
        }
    }

    #[test]
    fn designed_kind_not_admissible() {
        let mut cf = exponential_cf(32, 4.0).unwrap();
        cf.kind = CfKind::Designed;
        let rep = admissibility_report(&cf);
        assert!(!rep.admissible);
        // the numbers themselves are still reported
        assert!((rep.normalization - PI).abs() <= 0.02 * PI);
    }

    #[test]
    fn quadrature_agrees_with_independent_estimate() {
        // Simpson inside exponential_cf vs a fine trapezoid here
        let n = 64;
        let alpha = 6.0;
        let g = |t: f64| (1.0f64 / (alpha * t * (t - 1.0))).exp();
        let lo = 1.0 / n as f64;
        let m = 200_000;
        let h = (1.0 - 2.0 * lo) / m as f64;
        let mut trap = 0.5 * (g(lo) + g(1.0 - lo));
        for i in 1..m {
            trap += g(lo + i as f64 * h);
        }
        trap *= h;
        let cf = exponential_cf(n, alpha).unwrap();
        // recover C from sigma_1 and compare against pi / trapezoid
        let eta = 1.0 / n as f64;
        let c_impl = cf.values[0] / (eta * g(eta));
        assert!((c_impl - PI / trap).abs() < 1e-9 * (PI / trap));
    }

    #[test]
    fn ramp_map_matches_cosine_series_and_kernel() {
        let n = 32;
        let grid = Grid1D::standard(n);
        let cf = exponential_cf(n, 4.0).unwrap();
        let data = ramp_data(n);
        let map = concentration_edge(&data, &cf, &grid).unwrap();
        let k0 = w_kernel(&cf, 0, &grid);
        for j in 0..grid.n_x {
            let series: f64 = (1..=n)
                .map(|k| cf.values[k - 1] * (k as f64 * grid.x[j]).cos() / k as f64)
                .sum::<f64>()
                / PI;
            assert!((map.values[j] - series).abs() < 1e-12, "cell {j}");
            assert!((map.values[j] - k0.values[j]).abs() < 1e-12, "kernel {j}");
        }
    }

    #[test]
    fn jump_response_concentrates() {
        let grid64 = Grid1D::standard(64);
        let cf64 = exponential_cf(64, 8.0).unwrap();
        let m64 = concentration_edge(&ramp_data(64), &cf64, &grid64).unwrap();
        let at_jump = m64.values[grid64.nearest(0.0)];
        assert!((at_jump - 1.0).abs() < 0.1, "jump response {at_jump}");
        // response decays away from the jump
        for j in 0..grid64.n_x {
            if grid64.x[j].abs() >= 1.0 && grid64.x[j].abs() <= PI - 0.5 {
                assert!(m64.values[j].abs() < 0.2, "cell {j}: {}", m64.values[j]);
            }
        }
        // and sharpens with bandwidth
        let grid128 = Grid1D::standard(128);
        let cf128 = exponential_cf(128, 8.0).unwrap();
        let m128 = concentration_edge(&ramp_data(128), &cf128, &grid128).unwrap();
        let e64 = (at_jump - 1.0).abs();
        let e128 = (m128.values[grid128.nearest(0.0)] - 1.0).abs();
        assert!(e128 < e64);
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let n = 24;
        let grid = Grid1D::standard(n);
        let mut data = ramp_data(n);
        // hide a band so the mask handling is exercised too
        for k in 7..=13i64 {
            data.set_unknown(k);
            data.set_unknown(-k);
        }
        let cf = exponential_cf(n, 2.0).unwrap();
        let fast = edge_fft(&data, &cf, grid.n_x);
        let slow = edge_direct(&data, &cf, &grid);
        for j in 0..grid.n_x {
            assert!((fast.values[j] - slow.values[j]).abs() < 1e-10);
        }
        assert!(fast.imag_residual < 1e-10);
        assert!(slow.imag_residual < 1e-10);
    }

    #[test]
    fn unknown_modes_contribute_nothing() {
        let n = 16;
        let grid = Grid1D::standard(n);
        let cf = exponential_cf(n, 4.0).unwrap();
        let mut masked = ramp_data(n);
        let mut zeroed = ramp_data(n);
        for k in 5..=9i64 {
            masked.set_unknown(k);
            masked.set_unknown(-k);
            zeroed.set(k, Complex64::new(0.0, 0.0));
            zeroed.set(-k, Complex64::new(0.0, 0.0));
        }
        let a = concentration_edge(&masked, &cf, &grid).unwrap();
        let b = concentration_edge(&zeroed, &cf, &grid).unwrap();
        for j in 0..grid.n_x {
            assert!((a.values[j] - b.values[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn map_is_linear_in_the_data() {
        let n = 12;
        let grid = Grid1D::standard(n);
        let cf = exponential_cf(n, 4.0).unwrap();
        let f = ramp_data(n);
        let mut g = FourierData::zeros(n);
        for k in -(n as i64)..=(n as i64) {
            let t = k as f64;
            g.set(k, Complex64::new(0.3 * (t * 0.2).cos(), 0.1 * t.sin()));
        }
        let mut combo = FourierData::zeros(n);
        for k in -(n as i64)..=(n as i64) {
            combo.set(k, 2.0 * f.get(k).unwrap() - 0.5 * g.get(k).unwrap());
        }
        let ef = concentration_edge(&f, &cf, &grid).unwrap();
        let eg = concentration_edge(&g, &cf, &grid).unwrap();
        let ec = concentration_edge(&combo, &cf, &grid).unwrap();
        for j in 0..grid.n_x {
            let want = 2.0 * ef.values[j] - 0.5 * eg.values[j];
            assert!((ec.values[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_covariance_on_the_grid() {
        let n = 16;
        let grid = Grid1D::standard(n);
        let cf = exponential_cf(n, 4.0).unwrap();
        let f = ramp_data(n);
        // shift by 3 grid cells: fhat_k -> fhat_k e^{-ik s}
        let cells = 3usize;
        let s = cells as f64 * grid.dx;
        let mut shifted = FourierData::zeros(n);
        for k in -(n as i64)..=(n as i64) {
            let ph = Complex64::from_polar(1.0, -(k as f64) * s);
            shifted.set(k, f.get(k).unwrap() * ph);
        }
        let base = concentration_edge(&f, &cf, &grid).unwrap();
        let shft = concentration_edge(&shifted, &cf, &grid).unwrap();
        for j in 0..grid.n_x {
            let src = (j + grid.n_x - cells) % grid.n_x;
            assert!(
                (shft.values[j] - base.values[src]).abs() < 1e-10,
                "cell {j}"
            );
        }
    }

    #[test]
    fn kernel_parity_by_order() {
        let n = 20;
        let grid = Grid1D::standard(n);
        let cf = exponential_cf(n, 4.0).unwrap();
        let k0 = w_kernel(&cf, 0, &grid);
        let k1 = w_kernel(&cf, 1, &grid);
        for j in 0..grid.n_x {
            let mirror = (grid.n_x - j) % grid.n_x;
            assert!((k0.values[j] - k0.values[mirror]).abs() < 1e-12);
            assert!((k1.values[j] + k1.values[mirror]).abs() < 1e-12);
        }
    }

    #[test]
    fn bandwidth_mismatch_rejected() {
        let grid = Grid1D::standard(16);
        let cf = exponential_cf(8, 4.0).unwrap();
        let data = ramp_data(16);
        assert!(matches!(
            concentration_edge(&data, &cf, &grid),
            Err(VbjsError::BandwidthMismatch {
                expected: 16,
                got: 8
            })
        ));
    }

    #[test]
    fn ramp_identity_on_nonstandard_grid() {
        // direct path: N_x != 2N
        let n = 16;
        let grid = Grid1D::new(n, 40).unwrap();
        let cf = exponential_cf(n, 4.0).unwrap();
        let map = concentration_edge(&ramp_data(n), &cf, &grid).unwrap();
        for j in 0..grid.n_x {
            let series: f64 = (1..=n)
                .map(|k| cf.values[k - 1] * (k as f64 * grid.x[j]).cos() / k as f64)
                .sum::<f64>()
                / PI;
            assert!((map.values[j] - series).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_csv_round_trip() {
        let cf = exponential_cf(12, 6.0).unwrap();
        let mut buf = Vec::new();
        cf.write_csv(&mut buf).unwrap();
        let back = ConcentrationFactor::read_csv(&buf[..]).unwrap();
        assert_eq!(back.n, 12);
        assert_eq!(back.values, cf.values);
        assert_eq!(back.kind, CfKind::Designed);
        assert!(ConcentrationFactor::read_csv(&b"k,sigma_k\n"[..]).is_err());
        assert!(ConcentrationFactor::read_csv(&b"k,sigma_k\n2,0.5\n"[..]).is_err());
    }
}
