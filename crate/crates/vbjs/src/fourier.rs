//! 1D Fourier data model: coefficient vectors with missing-band flags, the
//! discrete forward operator, test signals, and noise injection.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::grid::Grid1D;
use crate::{Result, VbjsError};

/// Fourier coefficients `f_hat_k` for `k = -N..=N` with a per-coefficient
/// availability flag. Masked entries are stored as exact zero and flagged
/// unknown; the forward-operator rows for those frequencies are treated as
/// zero everywhere downstream.
#[derive(Debug, Clone)]
pub struct FourierData {
    /// Coefficients indexed by `k + N` (so index 0 holds `k = -N`).
    pub coeffs: Vec<Complex64>,
    /// Availability flags, same indexing.
    pub known: Vec<bool>,
    /// Half-bandwidth `N`.
    pub n: usize,
}

impl FourierData {
    pub fn zeros(n: usize) -> Self {
        FourierData {
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * n + 1],
            known: vec![true; 2 * n + 1],
            n,
        }
    }

    /// Number of coefficients, `2N + 1`.
    pub fn len(&self) -> usize {
        2 * self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false // always holds 2N+1 >= 1 entries
    }

    /// Vector index of frequency `k`.
    pub fn idx(&self, k: i64) -> usize {
        (k + self.n as i64) as usize
    }

    /// Frequency of vector index `i`.
    pub fn k_of(&self, i: usize) -> i64 {
        i as i64 - self.n as i64
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.coeffs[self.idx(k)]
    }

    pub fn set(&mut self, k: i64, v: Complex64) {
        let i = self.idx(k);
        self.coeffs[i] = v;
    }

    /// Zero the coefficient at `k` and flag it unknown.
    pub fn set_unknown(&mut self, k: i64) {
        let i = self.idx(k);
        self.coeffs[i] = Complex64::new(0.0, 0.0);
        self.known[i] = false;
    }

    /// Mean coefficient magnitude over the known entries.
    pub fn mean_known_magnitude(&self) -> f64 {
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for (c, &kn) in self.coeffs.iter().zip(&self.known) {
            if kn {
                sum += c.norm();
                cnt += 1;
            }
        }
        if cnt == 0 {
            0.0
        } else {
            sum / cnt as f64
        }
    }

    /// Write as CSV with columns `k,re,im,known`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,re,im,known")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.k_of(i),
                self.coeffs[i].re,
                self.coeffs[i].im,
                u8::from(self.known[i])
            )?;
        }
        Ok(())
    }

    /// Read CSV produced by [`FourierData::write_csv`]. Columns are located
    /// by name, so column order is free; all four must be present.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| VbjsError::InvalidParam("empty CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').map(|s| s.trim()).collect();
        let col = |name: &str| -> Result<usize> {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| VbjsError::InvalidParam(format!("CSV is missing column '{name}'")))
        };
        let (ck, cre, cim, ckn) = (col("k")?, col("re")?, col("im")?, col("known")?);
        let mut rows: Vec<(i64, f64, f64, bool)> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
            let parse = |idx: usize, what: &str| -> Result<&str> {
                fields.get(idx).copied().ok_or_else(|| {
                    VbjsError::InvalidParam(format!(
                        "CSV line {}: missing field '{}'",
                        lineno + 2,
                        what
                    ))
                })
            };
            let bad = |what: &str| {
                VbjsError::InvalidParam(format!("CSV line {}: bad value for '{}'", lineno + 2, what))
            };
            let k: i64 = parse(ck, "k")?.parse().map_err(|_| bad("k"))?;
            let re: f64 = parse(cre, "re")?.parse().map_err(|_| bad("re"))?;
            let im: f64 = parse(cim, "im")?.parse().map_err(|_| bad("im"))?;
            let kn: u8 = parse(ckn, "known")?.parse().map_err(|_| bad("known"))?;
            rows.push((k, re, im, kn != 0));
        }
        if rows.is_empty() {
            return Err(VbjsError::InvalidParam("CSV has no data rows".into()));
        }
        let n = rows.iter().map(|r| r.0.unsigned_abs()).max().unwrap() as usize;
        if rows.len() != 2 * n + 1 {
            return Err(VbjsError::InvalidParam(format!(
                "CSV has {} rows but max |k| = {} implies {}",
                rows.len(),
                n,
                2 * n + 1
            )));
        }
        let mut out = FourierData::zeros(n);
        for (k, re, im, kn) in rows {
            let i = out.idx(k);
            out.coeffs[i] = Complex64::new(re, im);
            out.known[i] = kn;
        }
        Ok(out)
    }
}

/// An ordered collection of measurements of one scene, sharing a bandwidth.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub members: Vec<FourierData>,
}

impl MeasurementSet {
    pub fn new(members: Vec<FourierData>) -> Result<Self> {
        if members.is_empty() {
            return Err(VbjsError::InvalidParam(
                "measurement set needs at least one member".into(),
            ));
        }
        let n = members[0].n;
        for m in &members {
            if m.n != n {
                return Err(VbjsError::BandwidthMismatch {
                    expected: n,
                    got: m.n,
                });
            }
        }
        Ok(MeasurementSet { members })
    }

    pub fn j(&self) -> usize {
        self.members.len()
    }

    pub fn n(&self) -> usize {
        self.members[0].n
    }
}

/// A piecewise-smooth test signal: a point sampler plus its jump list
/// (location, height).
pub struct PiecewiseSignal {
    sampler: fn(f64) -> f64,
    pub jumps: Vec<(f64, f64)>,
}

impl PiecewiseSignal {
    /// The ramp with a single unit jump at `x = 0`:
    /// `r(x) = (-x - pi)/(2 pi)` on `[-pi, 0]`, `(pi - x)/(2 pi)` on `(0, pi]`.
    pub fn ramp() -> Self {
        fn r(x: f64) -> f64 {
            if x <= 0.0 {
                (-x - PI) / (2.0 * PI)
            } else {
                (PI - x) / (2.0 * PI)
            }
        }
        PiecewiseSignal {
            sampler: r,
            jumps: vec![(0.0, 1.0)],
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.sampler)(x)
    }

    pub fn sample(&self, grid: &Grid1D) -> Vec<f64> {
        grid.x.iter().map(|&x| self.value(x)).collect()
    }
}

/// Ramp samples on the grid (convenience for the common test signal).
pub fn sample_ramp(grid: &Grid1D) -> Vec<f64> {
    PiecewiseSignal::ramp().sample(grid)
}

/// Exact Fourier coefficients of the ramp: `r_hat_k = 1/(2 pi i k)`, zero at
/// `k = 0`. All entries flagged known.
pub fn ramp_exact_coeffs(n: usize) -> FourierData {
    let mut data = FourierData::zeros(n);
    for i in 0..data.len() {
        let k = data.k_of(i);
        if k != 0 {
            // 1/(2 pi i k) = -i/(2 pi k)
            data.coeffs[i] = Complex64::new(0.0, -1.0 / (2.0 * PI * k as f64));
        }
    }
    data
}

/// Apply the discrete forward operator: `(F f)_k = (1/N_x) sum_j f_j e^{-i k x_j}`.
pub fn forward_apply(f: &[f64], grid: &Grid1D) -> Result<Vec<Complex64>> {
    if f.len() != grid.n_x {
        return Err(VbjsError::DimensionMismatch(format!(
            "signal length {} != grid size {}",
            f.len(),
            grid.n_x
        )));
    }
    let n = grid.n as i64;
    let scale = 1.0 / grid.n_x as f64;
    let mut out = Vec::with_capacity(2 * grid.n + 1);
    for k in -n..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &fj) in f.iter().enumerate() {
            let phase = -(k as f64) * grid.x[j];
            acc += fj * Complex64::new(phase.cos(), phase.sin());
        }
        out.push(acc * scale);
    }
    Ok(out)
}

/// Apply the adjoint `F^H` to a coefficient vector, skipping unknown entries:
/// `(F^H c)_j = (1/N_x) sum_{known k} c_k e^{+i k x_j}`.
pub fn adjoint_apply(coeffs: &[Complex64], known: &[bool], grid: &Grid1D) -> Vec<Complex64> {
    let n = grid.n as i64;
    let scale = 1.0 / grid.n_x as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_x];
    for (i, k) in (-n..=n).enumerate() {
        if !known[i] {
            continue;
        }
        let c = coeffs[i];
        for (j, oj) in out.iter_mut().enumerate() {
            let phase = (k as f64) * grid.x[j];
            *oj += c * Complex64::new(phase.cos(), phase.sin());
        }
    }
    for oj in &mut out {
        *oj *= scale;
    }
    out
}

/// Real part of the adjoint applied to a data vector (the right-hand side of
/// the normal equations for a real-valued reconstruction).
pub fn adjoint_real(data: &FourierData, grid: &Grid1D) -> Vec<f64> {
    adjoint_apply(&data.coeffs, &data.known, grid)
        .into_iter()
        .map(|c| c.re)
        .collect()
}

/// Add complex Gaussian noise at the given SNR (dB) to the known entries.
///
/// The noise scale is `sigma = E * 10^(-snr_db/10)` with `E` the mean
/// magnitude over known coefficients; real and imaginary parts each get
/// standard deviation `sigma/sqrt(2)`. `snr_db = +inf` returns the data
/// unchanged. Deterministic for a fixed seed.
pub fn add_noise(data: &FourierData, snr_db: f64, seed: u64) -> FourierData {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return data.clone();
    }
    let sigma = data.mean_known_magnitude() * 10f64.powf(-snr_db / 10.0);
    let sd = sigma / 2f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("sd is finite and nonnegative");
    let mut out = data.clone();
    for i in 0..out.len() {
        if out.known[i] {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            out.coeffs[i] += Complex64::new(re, im);
        }
    }
    out
}

/// Remove the banded frequency set `{k : 10j <= |k| <= 10j + 20}` (clipped to
/// the bandwidth), the missing-band pattern of the four-measurement example.
pub fn apply_missing_band(data: &FourierData, j: usize) -> Result<FourierData> {
    if j < 1 {
        return Err(VbjsError::InvalidParam("band index must be >= 1".into()));
    }
    let lo = 10 * j;
    let hi = 10 * j + 20;
    let mut out = data.clone();
    for i in 0..out.len() {
        let a = out.k_of(i).unsigned_abs() as usize;
        if a >= lo && a <= hi {
            out.coeffs[i] = Complex64::new(0.0, 0.0);
            out.known[i] = false;
        }
    }
    Ok(out)
}

/// Randomly remove a fraction `gamma` of the `2N+1` coefficients in symmetric
/// `+-k` pairs, grouped into runs of up to `bandwidth` consecutive `|k|`
/// values. `k = -N, 0, N` are never removed. Deterministic for a fixed seed.
pub fn remove_random_bands(
    data: &FourierData,
    gamma: f64,
    bandwidth: usize,
    seed: u64,
) -> Result<FourierData> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(VbjsError::InvalidParam(format!(
            "gamma = {gamma} outside [0, 1]"
        )));
    }
    if bandwidth == 0 {
        return Err(VbjsError::InvalidParam("bandwidth must be >= 1".into()));
    }
    let n = data.n;
    let want = (gamma * (2 * n + 1) as f64 / 2.0).round() as usize;
    let mut out = data.clone();
    if want == 0 || n < 2 {
        return Ok(out);
    }
    // Flags per |k|; indices 0 and N stay protected throughout.
    let mut removed = vec![false; n + 1];
    let count = |removed: &[bool]| removed[1..n].iter().filter(|&&b| b).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut guard = 0;
    while count(&removed) < want && guard < 10_000 {
        guard += 1;
        let s = rng.gen_range(1..n);
        for flag in removed.iter_mut().take((s + bandwidth).min(n)).skip(s) {
            *flag = true;
        }
    }
    // The last run may overshoot; give back randomly chosen |k| values.
    while count(&removed) > want {
        let idx: Vec<usize> = (1..n).filter(|&a| removed[a]).collect();
        removed[idx[rng.gen_range(0..idx.len())]] = false;
    }
    for (a, &gone) in removed.iter().enumerate().take(n).skip(1) {
        if gone {
            out.set_unknown(a as i64);
            out.set_unknown(-(a as i64));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_of_ones_is_delta_at_zero() {
        let grid = Grid1D::standard(8);
        let f = vec![1.0; grid.n_x];
        let c = forward_apply(&f, &grid).unwrap();
        let k0 = 8;
        assert!((c[k0].re - 1.0).abs() < 1e-12 && c[k0].im.abs() < 1e-12);
        for (i, v) in c.iter().enumerate() {
            if i != k0 {
                assert!(v.norm() < 1e-12, "k = {} leaked {}", i as i64 - 8, v.norm());
            }
        }
    }

    #[test]
    fn forward_of_first_unit_vector() {
        // N_x = 8: the indicator of the first grid point (x = -pi) maps to
        // (1/8) e^{i k pi}.
        let grid = Grid1D::new(4, 8).unwrap();
        let mut f = vec![0.0; 8];
        f[0] = 1.0;
        let c = forward_apply(&f, &grid).unwrap();
        for (i, v) in c.iter().enumerate() {
            let k = i as i64 - 4;
            let expect = Complex64::new((k as f64 * PI).cos(), (k as f64 * PI).sin()) / 8.0;
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_of_zero_is_zero() {
        let grid = Grid1D::standard(4);
        let c = forward_apply(&vec![0.0; 8], &grid).unwrap();
        assert!(c.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let grid = Grid1D::standard(4);
        assert!(forward_apply(&[1.0, 2.0], &grid).is_err());
    }

    #[test]
    fn ramp_coeff_values() {
        let data = ramp_exact_coeffs(4);
        assert_eq!(data.get(0), Complex64::new(0.0, 0.0));
        let want1 = Complex64::new(0.0, -1.0 / (2.0 * PI));
        assert!((data.get(1) - want1).norm() < 1e-15);
        let want_m2 = Complex64::new(0.0, 1.0 / (4.0 * PI));
        assert!((data.get(-2) - want_m2).norm() < 1e-15);
    }

    #[test]
    fn ramp_coeffs_conjugate_symmetric() {
        let data = ramp_exact_coeffs(16);
        for k in 1..=16 {
            assert_eq!(data.get(-k), data.get(k).conj());
        }
    }

    #[test]
    fn ramp_sample_values() {
        let sig = PiecewiseSignal::ramp();
        assert!((sig.value(-PI)).abs() < 1e-15);
        assert!((sig.value(PI / 2.0) - 0.25).abs() < 1e-15);
        assert!((sig.value(0.0) + 0.5).abs() < 1e-15); // left branch at the jump
        assert_eq!(sig.jumps, vec![(0.0, 1.0)]);
    }

    #[test]
    fn normal_operator_is_nearly_scaled_identity() {
        // || F^H F q - c q || <= 2/N_x with c = (2N+1)/N_x^2 for unit q.
        let grid = Grid1D::standard(16);
        let n_x = grid.n_x;
        let c = (2 * grid.n + 1) as f64 / (n_x as f64 * n_x as f64);
        let known = vec![true; 2 * grid.n + 1];
        for probe in [0usize, 5, n_x - 1] {
            let mut q = vec![0.0; n_x];
            q[probe] = 1.0;
            let fq = forward_apply(&q, &grid).unwrap();
            let back = adjoint_apply(&fq, &known, &grid);
            let err: f64 = back
                .iter()
                .zip(&q)
                .map(|(b, &qi)| (b - c * qi).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err <= 2.0 / n_x as f64, "err = {err}");
        }
    }

    #[test]
    fn noise_infinite_snr_is_identity() {
        let data = ramp_exact_coeffs(8);
        let noisy = add_noise(&data, f64::INFINITY, 7);
        for i in 0..data.len() {
            assert_eq!(data.coeffs[i], noisy.coeffs[i]);
        }
    }

    #[test]
    fn noise_same_seed_bit_identical() {
        let data = ramp_exact_coeffs(16);
        let a = add_noise(&data, 5.0, 123);
        let b = add_noise(&data, 5.0, 123);
        for i in 0..a.len() {
            assert_eq!(a.coeffs[i], b.coeffs[i]);
        }
        let c = add_noise(&data, 5.0, 124);
        assert!((0..a.len()).any(|i| a.coeffs[i] != c.coeffs[i]));
    }

    #[test]
    fn noise_scale_matches_snr_definition() {
        // At SNR = 0 dB the complex noise magnitude should have second moment
        // sigma^2 with sigma = mean |r_hat|. Monte-Carlo over many draws.
        let data = ramp_exact_coeffs(16);
        let sigma = data.mean_known_magnitude();
        let draws = 400;
        let mut sq = 0.0;
        let mut cnt = 0usize;
        for seed in 0..draws {
            let noisy = add_noise(&data, 0.0, seed);
            for i in 0..data.len() {
                sq += (noisy.coeffs[i] - data.coeffs[i]).norm_sqr();
                cnt += 1;
            }
        }
        let rms = (sq / cnt as f64).sqrt();
        assert!(
            (rms - sigma).abs() / sigma < 0.15,
            "rms {rms} vs sigma {sigma}"
        );
    }

    #[test]
    fn missing_band_pattern() {
        let data = ramp_exact_coeffs(64);
        let m1 = apply_missing_band(&data, 1).unwrap();
        let unknown: Vec<i64> = (0..m1.len())
            .filter(|&i| !m1.known[i])
            .map(|i| m1.k_of(i))
            .collect();
        assert_eq!(unknown.len(), 42);
        assert!(unknown.iter().all(|&k| (10..=30).contains(&k.abs())));
        let m4 = apply_missing_band(&data, 4).unwrap();
        for i in 0..m4.len() {
            let a = m4.k_of(i).abs();
            assert_eq!(!m4.known[i], (40..=60).contains(&a));
            if !m4.known[i] {
                assert_eq!(m4.coeffs[i], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn random_band_removal_counts_and_protection() {
        let data = ramp_exact_coeffs(64);
        let out = remove_random_bands(&data, 0.3, 8, 42).unwrap();
        let removed = out.known.iter().filter(|&&b| !b).count();
        // round(0.3 * 129 / 2) = 19 |k| values, each a +-k pair
        assert_eq!(removed, 38);
        assert!(out.known[out.idx(0)]);
        assert!(out.known[out.idx(64)]);
        assert!(out.known[out.idx(-64)]);
        // symmetry of the removal
        for k in 1..=64i64 {
            assert_eq!(out.known[out.idx(k)], out.known[out.idx(-k)]);
        }
        // gamma = 0 leaves the data untouched
        let same = remove_random_bands(&data, 0.0, 8, 1).unwrap();
        assert!(same.known.iter().all(|&b| b));
        assert!(remove_random_bands(&data, 1.5, 8, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let data = apply_missing_band(&ramp_exact_coeffs(8), 1).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = FourierData::read_csv(&buf[..]).unwrap();
        assert_eq!(back.n, data.n);
        for i in 0..data.len() {
            assert_eq!(back.coeffs[i], data.coeffs[i]);
            assert_eq!(back.known[i], data.known[i]);
        }
    }

    #[test]
    fn csv_missing_column_named() {
        let text = "k,re,im\n0,1.0,0.0\n";
        let err = FourierData::read_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("known"));
    }
}
