//! 2D test scene and grid transforms on the square `[-1, 1]^2`.
//!
//! The scene is a radial two-cosine profile with a circular jump at
//! `r = 1/2`. Its Fourier samples are computed by midpoint quadrature on a
//! fine grid, pushed through an FFT, so the coefficients carry genuine
//! quadrature accuracy rather than a closed form.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use crate::{Result, VbjsError};

/// Sample the scene at a point: inner cosine inside the disc `r <= 1/2`,
/// a slower outer cosine beyond it.
pub fn scene_value(x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    if r <= 0.5 {
        10.0 * (1.5 * PI * r).cos()
    } else {
        10.0 * (0.5 * PI * r).cos()
    }
}

/// Scene sampled on the reconstruction grid `x_j = -1 + 2j/n_x`, row-major
/// with rows indexing x and columns indexing y.
#[derive(Debug, Clone)]
pub struct Scene2D {
    pub n_x: usize,
    pub values: Vec<f64>,
}

pub fn scene_grid(n_x: usize) -> Scene2D {
    let mut values = Vec::with_capacity(n_x * n_x);
    for j in 0..n_x {
        let x = -1.0 + 2.0 * j as f64 / n_x as f64;
        for l in 0..n_x {
            let y = -1.0 + 2.0 * l as f64 / n_x as f64;
            values.push(scene_value(x, y));
        }
    }
    Scene2D { n_x, values }
}

/// Square grid of 2D Fourier samples for modes `|kx|, |ky| <= n`, row-major
/// over `(kx, ky)` with `kx` on rows.
#[derive(Debug, Clone)]
pub struct FourierData2D {
    pub coeffs: Vec<Complex64>,
    pub known: Vec<bool>,
    pub n: usize,
}

impl FourierData2D {
    pub fn zeros(n: usize) -> Self {
        let side = 2 * n + 1;
        FourierData2D {
            coeffs: vec![Complex64::new(0.0, 0.0); side * side],
            known: vec![true; side * side],
            n,
        }
    }

    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn idx(&self, kx: i64, ky: i64) -> Result<usize> {
        let n = self.n as i64;
        if kx.abs() > n || ky.abs() > n {
            return Err(VbjsError::InvalidParam(format!(
                "mode ({kx},{ky}) outside band {n}"
            )));
        }
        Ok(((kx + n) as usize) * self.side() + (ky + n) as usize)
    }

    pub fn get(&self, kx: i64, ky: i64) -> Result<Complex64> {
        Ok(self.coeffs[self.idx(kx, ky)?])
    }

    pub fn set(&mut self, kx: i64, ky: i64, v: Complex64) -> Result<()> {
        let i = self.idx(kx, ky)?;
        self.coeffs[i] = v;
        self.known[i] = true;
        Ok(())
    }

    pub fn set_unknown(&mut self, kx: i64, ky: i64) -> Result<()> {
        let i = self.idx(kx, ky)?;
        self.known[i] = false;
        Ok(())
    }

    pub fn mean_known_magnitude(&self) -> f64 {
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for (c, &k) in self.coeffs.iter().zip(&self.known) {
            if k {
                acc += c.norm();
                cnt += 1;
            }
        }
        if cnt == 0 {
            0.0
        } else {
            acc / cnt as f64
        }
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::from("kx,ky,re,im,known\n");
        let n = self.n as i64;
        for kx in -n..=n {
            for ky in -n..=n {
                let i = ((kx + n) as usize) * self.side() + (ky + n) as usize;
                let c = self.coeffs[i];
                out.push_str(&format!(
                    "{},{},{:e},{:e},{}\n",
                    kx, ky, c.re, c.im, self.known[i] as u8
                ));
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| VbjsError::Config {
            line: 1,
            msg: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let pos = |name: &str| -> Result<usize> {
            cols.iter()
                .position(|&c| c == name)
                .ok_or_else(|| VbjsError::Config {
                    line: 1,
                    msg: format!("missing column '{name}'"),
                })
        };
        let (ix, iy, ire, iim, ikn) =
            (pos("kx")?, pos("ky")?, pos("re")?, pos("im")?, pos("known")?);
        let mut rows = Vec::new();
        let mut max_k = 0i64;
        for (no, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let need = ix.max(iy).max(ire).max(iim).max(ikn);
            if f.len() <= need {
                return Err(VbjsError::Config {
                    line: no + 1,
                    msg: "too few fields".into(),
                });
            }
            let parse_i = |s: &str| -> Result<i64> {
                s.parse().map_err(|_| VbjsError::Config {
                    line: no + 1,
                    msg: format!("bad integer '{s}'"),
                })
            };
            let parse_f = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| VbjsError::Config {
                    line: no + 1,
                    msg: format!("bad number '{s}'"),
                })
            };
            let kx = parse_i(f[ix])?;
            let ky = parse_i(f[iy])?;
            let re = parse_f(f[ire])?;
            let im = parse_f(f[iim])?;
            let kn = f[ikn] != "0";
            max_k = max_k.max(kx.abs()).max(ky.abs());
            rows.push((kx, ky, Complex64::new(re, im), kn));
        }
        let n = max_k as usize;
        let side = 2 * n + 1;
        if rows.len() != side * side {
            return Err(VbjsError::Config {
                line: 1,
                msg: format!("expected {} rows for band {n}, found {}", side * side, rows.len()),
            });
        }
        let mut data = FourierData2D::zeros(n);
        for (kx, ky, c, kn) in rows {
            let i = data.idx(kx, ky)?;
            data.coeffs[i] = c;
            data.known[i] = kn;
        }
        Ok(data)
    }
}

/// In-place 2D FFT of a row-major `n_x * n_x` complex buffer.
pub(crate) fn fft2(buf: &mut [Complex64], n_x: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(n_x)
    } else {
        planner.plan_fft_forward(n_x)
    };
    fft2_with(buf, n_x, &plan);
}

/// Same as `fft2` with a pre-planned transform, for hot loops.
pub(crate) fn fft2_with(buf: &mut [Complex64], n_x: usize, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n_x) {
        plan.process_with_scratch(row, &mut scratch);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n_x];
    for c in 0..n_x {
        for r in 0..n_x {
            col[r] = buf[r * n_x + c];
        }
        plan.process_with_scratch(&mut col, &mut scratch);
        for r in 0..n_x {
            buf[r * n_x + c] = col[r];
        }
    }
}

/// Evaluate `sum_k vals(kx,ky) e^{i pi (kx x_j + ky x_l)}` on the grid
/// `x_j = -1 + 2j/n_x` by aliased binning and one unnormalized inverse FFT.
/// Modes sharing a bin mod `n_x` accumulate, which is exactly the aliasing
/// the shifted grid induces.
pub(crate) fn fold_ifft2(vals: &[Complex64], n: usize, n_x: usize) -> Vec<Complex64> {
    let inv = FftPlanner::new().plan_fft_inverse(n_x);
    fold_ifft2_with(vals, n, n_x, &inv)
}

/// Same as `fold_ifft2` with a pre-planned inverse transform.
pub(crate) fn fold_ifft2_with(
    vals: &[Complex64],
    n: usize,
    n_x: usize,
    inv: &std::sync::Arc<dyn rustfft::Fft<f64>>,
) -> Vec<Complex64> {
    let side = 2 * n + 1;
    debug_assert_eq!(vals.len(), side * side);
    let m = n_x as i64;
    let mut bins = vec![Complex64::new(0.0, 0.0); n_x * n_x];
    for a in 0..side {
        let ka = a as i64 - n as i64;
        let pa = ka.rem_euclid(m) as usize;
        let sa = if ka.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        for b in 0..side {
            let kb = b as i64 - n as i64;
            let pb = kb.rem_euclid(m) as usize;
            let sb = if kb.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            bins[pa * n_x + pb] += vals[a * side + b] * (sa * sb);
        }
    }
    fft2_with(&mut bins, n_x, inv);
    bins
}

/// Quadrature-sampled scene coefficients
/// `(1/4) integral f(x,y) e^{-i pi (kx x + ky y)} dx dy` on a midpoint grid
/// of `m` points per axis.
pub(crate) fn scene_coeffs(n: usize, m: usize) -> Result<FourierData2D> {
    if m <= 2 * n {
        return Err(VbjsError::InvalidParam(format!(
            "quadrature grid {m} too coarse for band {n}"
        )));
    }
    let mut f = vec![Complex64::new(0.0, 0.0); m * m];
    for a in 0..m {
        let xa = -1.0 + 2.0 * (a as f64 + 0.5) / m as f64;
        for b in 0..m {
            let xb = -1.0 + 2.0 * (b as f64 + 0.5) / m as f64;
            f[a * m + b] = Complex64::new(scene_value(xa, xb), 0.0);
        }
    }
    fft2(&mut f, m, false);
    // e^{-i pi k x_a} = e^{i pi k} e^{-i pi k / m} e^{-2 pi i k a / m}
    let ph = |k: i64| -> Complex64 {
        let sgn = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Complex64::from_polar(sgn, -PI * k as f64 / m as f64)
    };
    let mut data = FourierData2D::zeros(n);
    let side = 2 * n + 1;
    let scale = 1.0 / (m as f64 * m as f64);
    for a in 0..side {
        let kx = a as i64 - n as i64;
        for b in 0..side {
            let ky = b as i64 - n as i64;
            let g = f[(kx.rem_euclid(m as i64) as usize) * m + ky.rem_euclid(m as i64) as usize];
            data.coeffs[a * side + b] = g * scale * ph(kx) * ph(ky);
        }
    }
    Ok(data)
}

/// Scene coefficients at the production quadrature resolution.
pub fn sample_scene2d(n: usize) -> Result<FourierData2D> {
    scene_coeffs(n, 1024)
}

/// Forward map from grid values to Fourier samples:
/// `fhat(kx,ky) = n_x^{-2} sum_{j,l} q[j,l] e^{-i pi (kx x_j + ky x_l)}`.
pub fn forward_apply_2d(q: &[f64], n: usize, n_x: usize) -> Result<FourierData2D> {
    if q.len() != n_x * n_x {
        return Err(VbjsError::DimensionMismatch(format!(
            "grid vector has {} entries, expected {}",
            q.len(),
            n_x * n_x
        )));
    }
    if n_x <= 2 * n {
        return Err(VbjsError::InvalidParam(
            "grid must oversample the band".into(),
        ));
    }
    let mut buf: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, n_x, false);
    let mut data = FourierData2D::zeros(n);
    let side = 2 * n + 1;
    let m = n_x as i64;
    let scale = 1.0 / (n_x as f64 * n_x as f64);
    for a in 0..side {
        let kx = a as i64 - n as i64;
        let sa = if kx.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        for b in 0..side {
            let ky = b as i64 - n as i64;
            let sb = if ky.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let g = buf[(kx.rem_euclid(m) as usize) * n_x + ky.rem_euclid(m) as usize];
            data.coeffs[a * side + b] = g * (sa * sb * scale);
        }
    }
    Ok(data)
}

/// Add complex white noise at the given amplitude SNR (dB) to every known
/// coefficient; infinite SNR returns the data unchanged.
pub fn add_noise_2d(data: &FourierData2D, snr_db: f64, seed: u64) -> FourierData2D {
    let mut out = data.clone();
    if snr_db.is_infinite() && snr_db > 0.0 {
        return out;
    }
    let sigma = data.mean_known_magnitude() * 10f64.powf(-snr_db / 10.0);
    if sigma == 0.0 {
        return out;
    }
    let comp = Normal::new(0.0, sigma / 2f64.sqrt()).expect("finite std dev");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..out.coeffs.len() {
        if out.known[i] {
            let re = comp.sample(&mut rng);
            let im = comp.sample(&mut rng);
            out.coeffs[i] += Complex64::new(re, im);
        }
    }
    out
}

/// Filtered partial Fourier sum: a separable squared-cosine taper on the
/// known coefficients, evaluated on the reconstruction grid. The classical
/// linear baseline the variance-weighted solvers are compared against.
pub fn filtered_ifft(data: &FourierData2D, n_x: usize) -> Vec<f64> {
    let n = data.n;
    let side = 2 * n + 1;
    let filt = |k: i64| -> f64 {
        let t = PI * k.abs() as f64 / (2.0 * (n as f64 + 1.0));
        t.cos().powi(2)
    };
    let mut vals = vec![Complex64::new(0.0, 0.0); side * side];
    for a in 0..side {
        let kx = a as i64 - n as i64;
        for b in 0..side {
            let ky = b as i64 - n as i64;
            let i = a * side + b;
            if data.known[i] {
                vals[i] = data.coeffs[i] * filt(kx) * filt(ky);
            }
        }
    }
    fold_ifft2(&vals, n, n_x).iter().map(|z| z.re).collect()
}

/// Extract the column `col` (fixed y) of a row-major `n_x * n_x` map.
pub fn cross_section_col(map: &[f64], n_x: usize, col: usize) -> Result<Vec<f64>> {
    if map.len() != n_x * n_x || col >= n_x {
        return Err(VbjsError::DimensionMismatch(
            "cross section outside the map".into(),
        ));
    }
    Ok((0..n_x).map(|r| map[r * n_x + col]).collect())
}
