//! Seeded, reproducible experiment harness.
//!
//! Every preset is a pure function of its configuration and a base seed.
//! Per-trial generators are ChaCha8 streams keyed by an FNV-1a hash of
//! `preset|sweep|trial|seed`, so a rerun (at any worker count) produces
//! byte-identical CSV bodies. Floats are written in a fixed `1.234567e-05`
//! form and every table starts with a comment carrying the hash of the
//! fully resolved configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::f64::consts::PI;

use crate::fourier::{
    add_noise, apply_missing_band, ramp_exact_coeffs, remove_random_bands, sample_ramp,
    FourierData, MeasurementSet,
};
use crate::grid::Grid1D;
use crate::metrics::{
    abs_error_at, left_plateau_mask, pointwise_log, rel_error, smooth_flank_mask, ErrorReport,
};
use crate::pa::PaOperator;
use crate::pipelines::{
    run_cf_vbjs_2d, run_cf_vbjs_mmv, run_cf_vbjs_smv, run_vbjs_baseline, CfMode, PipelineOpts,
};
use crate::scene::{add_noise_2d, cross_section_col, filtered_ifft, sample_scene2d, scene_grid};
use crate::solvers::{solve_weighted_l1, solve_weighted_l2};
use crate::weights::build_mask;
use crate::{Result, VbjsError};

// ---- configuration ----

/// Flat key = value configuration. Lines starting with `#` and blank lines
/// are ignored; keys may not repeat. The hash covers the sorted pairs, so
/// key order in the file does not matter.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: Vec<(String, String)>,
    /// 1-based source line per entry, 0 for values set programmatically.
    lines: Vec<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let Some((k, v)) = s.split_once('=') else {
                return Err(VbjsError::Config {
                    line,
                    msg: format!("expected key = value, got {s:?}"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(VbjsError::Config {
                    line,
                    msg: "empty key".into(),
                });
            }
            if cfg.get(k).is_some() {
                return Err(VbjsError::Config {
                    line,
                    msg: format!("duplicate key {k}"),
                });
            }
            cfg.entries.push((k.to_string(), v.to_string()));
            cfg.lines.push(line);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Set or replace a value (used for command-line overrides).
    pub fn set(&mut self, key: &str, value: &str) {
        if let Some(pos) = self.entries.iter().position(|(k, _)| k == key) {
            self.entries[pos].1 = value.to_string();
        } else {
            self.entries.push((key.to_string(), value.to_string()));
            self.lines.push(0);
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .position(|(k, _)| k == key)
            .map_or(0, |i| self.lines[i])
    }

    fn bad(&self, key: &str, what: &str) -> VbjsError {
        VbjsError::Config {
            line: self.line_of(key),
            msg: format!("{key}: expected {what}, got {:?}", self.get(key).unwrap_or("")),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.bad(key, "a number")),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.bad(key, "a nonnegative integer")),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.bad(key, "a nonnegative integer")),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(_) => Err(self.bad(key, "true or false")),
        }
    }

    pub fn get_str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    /// Comma-separated list of numbers.
    pub fn get_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| self.bad(key, "a comma-separated number list")),
        }
    }

    /// Reject keys outside the preset's vocabulary, pointing at the line.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (i, (k, _)) in self.entries.iter().enumerate() {
            if !allowed.contains(&k.as_str()) {
                return Err(VbjsError::Config {
                    line: self.lines[i],
                    msg: format!("unknown key {k}"),
                });
            }
        }
        Ok(())
    }

    /// FNV-1a over the canonical (sorted) serialization.
    pub fn hash(&self) -> u64 {
        let mut pairs = self.entries.clone();
        pairs.sort();
        let mut s = String::new();
        for (k, v) in &pairs {
            let _ = writeln!(s, "{k}={v}");
        }
        fnv1a(s.as_bytes())
    }
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike the std
/// hasher, which is why the config hash and seed streams are built on it.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Stream seed for one trial of one sweep point, independent of execution
/// order and worker count.
pub fn trial_seed(preset: &str, sweep: u64, trial: u64, base: u64) -> u64 {
    fnv1a(format!("{preset}|{sweep}|{trial}|{base}").as_bytes())
}

// ---- output tables ----

/// Fixed-width scientific float, `-1.234567e-05` style, for stable CSV
/// bodies.
pub fn fmt_e(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.6e}");
    let (m, e) = s.split_once('e').expect("exponent present");
    match e.strip_prefix('-') {
        Some(d) => format!("{m}e-{d:0>2}"),
        None => format!("{m}e+{e:0>2}"),
    }
}

/// One CSV file: a header row plus data rows, written with a leading
/// `# config <hash>` comment.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, header: &[&str]) -> CsvTable {
        CsvTable {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, config_hash: u64) -> Result<PathBuf> {
        let mut s = String::new();
        let _ = writeln!(s, "# config {config_hash:016x}");
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, s)?;
        Ok(path)
    }
}

// ---- plots ----

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

/// Standalone SVG line plot of named series over a shared x vector. Log
/// axes plot log10 of the data; nonpositive entries are dropped from that
/// axis. Purely a convenience view of the CSVs next to it.
pub fn svg_line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[(String, Vec<f64>)],
    log_x: bool,
    log_y: bool,
) -> String {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 160.0;
    const MT: f64 = 42.0;
    const MB: f64 = 56.0;
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::with_capacity(series.len());
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, ys) in series {
        let mut line = Vec::new();
        for (&xv, &yv) in x.iter().zip(ys) {
            let (a, b) = (tx(xv), ty(yv));
            if a.is_finite() && b.is_finite() {
                x0 = x0.min(a);
                x1 = x1.max(a);
                y0 = y0.min(b);
                y1 = y1.max(b);
                line.push((a, b));
            }
        }
        pts.push(line);
    }
    if !x0.is_finite() {
        // nothing plottable; emit an empty frame
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.04 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let sx = |t: f64| ML + (t - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |t: f64| H - MB - (t - y0) / (y1 - y0) * (H - MT - MB);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>",
        (ML + W - MR) / 2.0
    );
    let _ = writeln!(
        s,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        W - ML - MR,
        H - MT - MB
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let gx = x0 + f * (x1 - x0);
        let gy = y0 + f * (y1 - y0);
        let lx = if log_x { 10f64.powf(gx) } else { gx };
        let ly = if log_y { 10f64.powf(gy) } else { gy };
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>\
             <text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\">{4}</text>",
            sx(gx),
            H - MB,
            H - MB + 5.0,
            H - MB + 20.0,
            fmt_tick(lx)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#333\"/>\
             <text x=\"{3}\" y=\"{4}\" text-anchor=\"end\">{5}</text>",
            sy(gy),
            ML - 5.0,
            ML,
            ML - 8.0,
            sy(gy) + 4.0,
            fmt_tick(ly)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>",
        (ML + W - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    for (i, ((name, _), line)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !line.is_empty() {
            let path: Vec<String> = line
                .iter()
                .map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b)))
                .collect();
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.join(" ")
            );
        }
        let ly = MT + 14.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{2}\" y=\"{3}\">{name}</text>",
            W - MR + 8.0,
            W - MR + 30.0,
            W - MR + 36.0,
            ly + 4.0
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

// ---- trial scheduling ----

/// Run `n` independent jobs on up to `workers` threads and return the
/// results in job order. Jobs must be pure functions of their index (all
/// seeding flows through [`trial_seed`]), so the worker count cannot change
/// any output.
pub fn run_trials<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if n == 0 {
        return Vec::new();
    }
    if workers <= 1 || n == 1 {
        return (0..n).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = (n + workers - 1) / workers;
    std::thread::scope(|scope| {
        for (w, block) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (i, slot) in block.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk + i));
                }
            });
        }
    });
    out.into_iter().map(|o| o.expect("worker filled slot")).collect()
}

// ---- shared pieces ----

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("comparable errors"));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median_report(reports: &[ErrorReport]) -> ErrorReport {
    ErrorReport {
        total: median(&reports.iter().map(|r| r.total).collect::<Vec<_>>()),
        smooth: median(&reports.iter().map(|r| r.smooth).collect::<Vec<_>>()),
        point: median(&reports.iter().map(|r| r.point).collect::<Vec<_>>()),
    }
}

/// Default data-fidelity scale for the 1D solves on an `n_x` grid.
pub fn default_mu(n_x: usize, m: usize) -> f64 {
    (n_x as f64 / (2.0 * PI)).powi(m as i32)
}

fn ramp_report(q: &[f64], f_true: &[f64], grid: &Grid1D, smooth: &[bool]) -> Result<ErrorReport> {
    Ok(ErrorReport {
        total: rel_error(q, f_true, None)?,
        smooth: rel_error(q, f_true, Some(smooth))?,
        point: abs_error_at(q, f_true, grid, -0.1)?,
    })
}

/// Labels for the eight method variants of the noisy 1D sweeps, in the
/// column order the sweep tables use.
pub const SWEEP_METHODS: [&str; 8] = [
    "mmv-p1",
    "mmv-p2",
    "smv-p1",
    "smv-p2",
    "masked-p1",
    "masked-p2",
    "baseline-p1",
    "baseline-p2",
];

/// One noisy trial of the eight-method comparison: a single draw feeds the
/// single-measurement flow and its masked variant, ten further draws feed
/// the multi-measurement flow and the baseline. Each p = 1 run reuses its
/// weights for the p = 2 solve, like the flows themselves do. Returns the
/// total relative errors in [`SWEEP_METHODS`] order.
fn sweep_trial(
    base: &FourierData,
    grid: &Grid1D,
    op: &PaOperator,
    f_true: &[f64],
    snr_db: f64,
    seed: u64,
) -> Result<[f64; 8]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let smv_data = add_noise(base, snr_db, rng.gen());
    let draws: Vec<FourierData> = (0..10).map(|_| add_noise(base, snr_db, rng.gen())).collect();
    let ms = MeasurementSet::new(draws)?;

    let mut opts = PipelineOpts::new(CfMode::Exponential { alphas: vec![8.0] });
    opts.p = 1;
    opts.tau = 1.0;
    opts.solver.mu = default_mu(grid.n_x, opts.m);

    let mmv = run_cf_vbjs_mmv(&ms, grid, &opts)?;
    let sel = &ms.members[mmv.j_star.expect("selection step present")];
    let mmv2 = solve_weighted_l2(sel, grid, op, &mmv.used_weights, &opts.solver)?;

    let smv_alphas: Vec<f64> = (1..=10).map(|j| 2.0 * j as f64).collect();
    let smv = run_cf_vbjs_smv(&smv_data, &smv_alphas, grid, &opts)?;
    let smv2 = solve_weighted_l2(&smv_data, grid, op, &smv.used_weights, &opts.solver)?;

    let mask = build_mask(&smv.weights, 1.0);
    let m1 = solve_weighted_l1(&smv_data, grid, op, &mask, &opts.solver)?;
    let m2 = solve_weighted_l2(&smv_data, grid, op, &mask, &opts.solver)?;

    let bl = run_vbjs_baseline(&ms, grid, &opts)?;
    let bsel = &ms.members[bl.j_star.expect("selection step present")];
    let bl2 = solve_weighted_l2(bsel, grid, op, &bl.used_weights, &opts.solver)?;

    let tot = |q: &[f64]| rel_error(q, f_true, None);
    Ok([
        tot(&mmv.q)?,
        tot(&mmv2.q)?,
        tot(&smv.q)?,
        tot(&smv2.q)?,
        tot(&m1.q)?,
        tot(&m2.q)?,
        tot(&bl.q)?,
        tot(&bl2.q)?,
    ])
}

// ---- preset computations ----

/// One labeled error row of a summary table.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    pub report: ErrorReport,
}

/// Deterministic four-method comparison on banded noiseless data: the 1D
/// test signal with one missing frequency band per measurement, exponential
/// versus designed factors, p in {1, 2}.
pub fn table1_rows() -> Result<Vec<MethodReport>> {
    let n = 64;
    let grid = Grid1D::standard(n);
    let base = ramp_exact_coeffs(n);
    let members: Vec<FourierData> = (1..=4)
        .map(|j| apply_missing_band(&base, j))
        .collect::<Result<_>>()?;
    let ms = MeasurementSet::new(members)?;
    let f_true = sample_ramp(&grid);
    let smooth = smooth_flank_mask(&grid);
    let op = PaOperator::build(2, grid.n_x)?;
    let alphas = vec![2.0, 4.0, 6.0, 8.0];
    let mut rows = Vec::new();
    for (tag, cf) in [
        ("cf", CfMode::Exponential { alphas: alphas.clone() }),
        ("icf", CfMode::Designed { fallback_alphas: alphas.clone() }),
    ] {
        let mut opts = PipelineOpts::new(cf);
        opts.p = 1;
        opts.tau = 1.0 / n as f64;
        opts.edge_abs = true;
        opts.solver.mu = default_mu(grid.n_x, opts.m);
        let r1 = run_cf_vbjs_mmv(&ms, &grid, &opts)?;
        let sel = &ms.members[r1.j_star.expect("selection step present")];
        let r2 = solve_weighted_l2(sel, &grid, &op, &r1.used_weights, &opts.solver)?;
        rows.push(MethodReport {
            method: format!("{tag}-p1"),
            report: ramp_report(&r1.q, &f_true, &grid, &smooth)?,
        });
        rows.push(MethodReport {
            method: format!("{tag}-p2"),
            report: ramp_report(&r2.q, &f_true, &grid, &smooth)?,
        });
    }
    Ok(rows)
}

/// Per-size medians of the eight-method sweep.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n_x: usize,
    /// Median total relative error per method, [`SWEEP_METHODS`] order.
    pub medians: [f64; 8],
}

/// Noisy convergence sweep over grid sizes: median total error of each
/// method over `trials` seeded trials at each size.
pub fn convergence_rows(
    sizes: &[usize],
    trials: usize,
    snr_db: f64,
    seed: u64,
    workers: usize,
) -> Result<Vec<ConvergenceRow>> {
    let mut out = Vec::with_capacity(sizes.len());
    for &n_x in sizes {
        if n_x < 8 || n_x % 2 != 0 {
            return Err(VbjsError::InvalidParam(format!(
                "sweep size {n_x} must be an even grid of at least 8 cells"
            )));
        }
        let n = n_x / 2;
        let grid = Grid1D::new(n, n_x)?;
        let base = ramp_exact_coeffs(n);
        let f_true = sample_ramp(&grid);
        let op = PaOperator::build(2, n_x)?;
        let errs = run_trials(trials, workers, |t| {
            sweep_trial(
                &base,
                &grid,
                &op,
                &f_true,
                snr_db,
                trial_seed("convergence", n_x as u64, t as u64, seed),
            )
        })
        .into_iter()
        .collect::<Result<Vec<[f64; 8]>>>()?;
        let mut medians = [0.0; 8];
        for (k, m) in medians.iter_mut().enumerate() {
            *m = median(&errs.iter().map(|e| e[k]).collect::<Vec<_>>());
        }
        out.push(ConvergenceRow { n_x, medians });
    }
    Ok(out)
}

/// Per-level means of the eight-method sweep at a fixed grid size.
#[derive(Debug, Clone)]
pub struct SnrRow {
    pub snr_db: f64,
    /// Mean total relative error per method, [`SWEEP_METHODS`] order.
    pub means: [f64; 8],
}

/// Noise-robustness sweep: mean total error of each method as the noise
/// level rises, on a fixed grid.
pub fn snr_rows(
    n_x: usize,
    levels: &[f64],
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<SnrRow>> {
    if n_x < 8 || n_x % 2 != 0 {
        return Err(VbjsError::InvalidParam(format!(
            "grid size {n_x} must be an even grid of at least 8 cells"
        )));
    }
    let n = n_x / 2;
    let grid = Grid1D::new(n, n_x)?;
    let base = ramp_exact_coeffs(n);
    let f_true = sample_ramp(&grid);
    let op = PaOperator::build(2, n_x)?;
    let mut out = Vec::with_capacity(levels.len());
    for (li, &snr_db) in levels.iter().enumerate() {
        let errs = run_trials(trials, workers, |t| {
            sweep_trial(
                &base,
                &grid,
                &op,
                &f_true,
                snr_db,
                trial_seed("snr_sweep", li as u64, t as u64, seed),
            )
        })
        .into_iter()
        .collect::<Result<Vec<[f64; 8]>>>()?;
        let mut means = [0.0; 8];
        for (k, m) in means.iter_mut().enumerate() {
            *m = mean(&errs.iter().map(|e| e[k]).collect::<Vec<_>>());
        }
        out.push(SnrRow { snr_db, means });
    }
    Ok(out)
}

/// Full error triple plus the reconstruction it came from, for the
/// deterministic band-width sweep.
#[derive(Debug, Clone)]
pub struct BandWidthResult {
    pub width: usize,
    pub method: String,
    pub report: ErrorReport,
    pub q: Vec<f64>,
}

/// Deterministic sweep over the width of the missing bands: four evenly
/// spread bands of `width` consecutive mode magnitudes are removed (one per
/// measurement), then the four-method comparison runs as in [`table1_rows`].
pub fn missing_band_rows(widths: &[usize]) -> Result<Vec<BandWidthResult>> {
    let n = 64usize;
    let j_total = 4usize;
    let grid = Grid1D::standard(n);
    let base = ramp_exact_coeffs(n);
    let f_true = sample_ramp(&grid);
    let smooth = smooth_flank_mask(&grid);
    let op = PaOperator::build(2, grid.n_x)?;
    let alphas = vec![2.0, 4.0, 6.0, 8.0];
    let mut out = Vec::new();
    for &width in widths {
        if width == 0 || width >= n {
            return Err(VbjsError::InvalidParam(format!(
                "band width {width} outside 1..{n}"
            )));
        }
        let mut members = Vec::with_capacity(j_total);
        for j in 1..=j_total {
            let start = ((j * (n - width)) as f64 / (j_total + 1) as f64).round() as usize;
            let start = start.max(1).min(n - width);
            let mut d = base.clone();
            for k in start..start + width {
                d.set_unknown(k as i64);
                d.set_unknown(-(k as i64));
            }
            members.push(d);
        }
        let ms = MeasurementSet::new(members)?;
        for (tag, cf) in [
            ("cf", CfMode::Exponential { alphas: alphas.clone() }),
            ("icf", CfMode::Designed { fallback_alphas: alphas.clone() }),
        ] {
            let mut opts = PipelineOpts::new(cf);
            opts.p = 1;
            opts.tau = 1.0 / n as f64;
            opts.edge_abs = true;
            opts.solver.mu = default_mu(grid.n_x, opts.m);
            let r1 = run_cf_vbjs_mmv(&ms, &grid, &opts)?;
            let sel = &ms.members[r1.j_star.expect("selection step present")];
            let r2 = solve_weighted_l2(sel, &grid, &op, &r1.used_weights, &opts.solver)?;
            out.push(BandWidthResult {
                width,
                method: format!("{tag}-p1"),
                report: ramp_report(&r1.q, &f_true, &grid, &smooth)?,
                q: r1.q,
            });
            out.push(BandWidthResult {
                width,
                method: format!("{tag}-p2"),
                report: ramp_report(&r2.q, &f_true, &grid, &smooth)?,
                q: r2.q,
            });
        }
    }
    Ok(out)
}

/// Labels for the four methods of the random-band-removal sweep.
pub const BAND_FRACTION_METHODS: [&str; 4] = ["cf-p1", "cf-p2", "icf-p1", "icf-p2"];

/// Per-fraction medians of the random-band-removal sweep.
#[derive(Debug, Clone)]
pub struct BandFractionRow {
    pub gamma: f64,
    /// Median error triples, [`BAND_FRACTION_METHODS`] order. The smooth
    /// entry is measured on the left plateau `x <= -1`.
    pub medians: [ErrorReport; 4],
    /// Fraction of factor designs that fell back to exponential factors.
    pub fallback_fraction: f64,
}

/// Stochastic sweep over the fraction of coefficients removed in random
/// symmetric bands: exponential versus designed factors on noiseless data,
/// medians over seeded trials.
pub fn band_fraction_rows(
    gammas: &[f64],
    trials: usize,
    bandwidth: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<BandFractionRow>> {
    let n = 64usize;
    let j_total = 4usize;
    let grid = Grid1D::standard(n);
    let base = ramp_exact_coeffs(n);
    let f_true = sample_ramp(&grid);
    let smooth = left_plateau_mask(&grid);
    let op = PaOperator::build(2, grid.n_x)?;
    let alphas = vec![2.0, 4.0, 6.0, 8.0];
    let mut out = Vec::with_capacity(gammas.len());
    for (gi, &gamma) in gammas.iter().enumerate() {
        let results = run_trials(trials, workers, |t| -> Result<([ErrorReport; 4], usize)> {
            let mut rng =
                ChaCha8Rng::seed_from_u64(trial_seed("band_fraction", gi as u64, t as u64, seed));
            let members: Vec<FourierData> = (0..j_total)
                .map(|_| remove_random_bands(&base, gamma, bandwidth, rng.gen()))
                .collect::<Result<_>>()?;
            let ms = MeasurementSet::new(members)?;
            let mut reports: [ErrorReport; 4] = Default::default();
            let mut fallbacks = 0;
            for (arm, cf) in [
                CfMode::Exponential { alphas: alphas.clone() },
                CfMode::Designed { fallback_alphas: alphas.clone() },
            ]
            .into_iter()
            .enumerate()
            {
                let mut opts = PipelineOpts::new(cf);
                opts.p = 1;
                opts.tau = 1.0 / n as f64;
                opts.edge_abs = true;
                opts.solver.mu = default_mu(grid.n_x, opts.m);
                let r1 = run_cf_vbjs_mmv(&ms, &grid, &opts)?;
                let sel = &ms.members[r1.j_star.expect("selection step present")];
                let r2 = solve_weighted_l2(sel, &grid, &op, &r1.used_weights, &opts.solver)?;
                reports[2 * arm] = ramp_report(&r1.q, &f_true, &grid, &smooth)?;
                reports[2 * arm + 1] = ramp_report(&r2.q, &f_true, &grid, &smooth)?;
                if arm == 1 {
                    fallbacks = r1.fallbacks;
                }
            }
            Ok((reports, fallbacks))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut medians: [ErrorReport; 4] = Default::default();
        for (k, med) in medians.iter_mut().enumerate() {
            let col: Vec<ErrorReport> = results.iter().map(|(r, _)| r[k].clone()).collect();
            *med = median_report(&col);
        }
        let fallback_fraction = results.iter().map(|&(_, f)| f).sum::<usize>() as f64
            / (j_total * trials) as f64;
        out.push(BandFractionRow {
            gamma,
            medians,
            fallback_fraction,
        });
    }
    Ok(out)
}

/// Labels for the timed flows, in the column order of the timing tables.
pub const EFFICIENCY_METHODS: [&str; 4] = ["mmv-p1", "smv-p1", "smv-p2", "baseline-p1"];

/// Wall-clock seconds (median over repetitions) per flow at one sweep point.
#[derive(Debug, Clone)]
pub struct TimingRow {
    pub key: usize,
    /// Seconds per method, [`EFFICIENCY_METHODS`] order.
    pub seconds: [f64; 4],
}

fn time_median<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<f64> {
    let mut ts = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        f()?;
        ts.push(t0.elapsed().as_secs_f64());
    }
    Ok(median(&ts))
}

/// Time the four flows on noiseless full data: `j` identical copies for the
/// multi-measurement flows, `j` factor orders for the single-measurement
/// flow. Only the pipeline call is timed (setup and I/O excluded).
pub fn efficiency_point(n_x: usize, j: usize, reps: usize) -> Result<TimingRow> {
    if n_x < 8 || n_x % 2 != 0 {
        return Err(VbjsError::InvalidParam(format!(
            "grid size {n_x} must be an even grid of at least 8 cells"
        )));
    }
    if j < 2 {
        return Err(VbjsError::InvalidParam(
            "timing sweep needs at least 2 measurements".into(),
        ));
    }
    let n = n_x / 2;
    let grid = Grid1D::new(n, n_x)?;
    let base = ramp_exact_coeffs(n);
    let ms = MeasurementSet::new(vec![base.clone(); j])?;
    let alphas: Vec<f64> = (1..=j).map(|a| 2.0 * a as f64).collect();
    let mut opts = PipelineOpts::new(CfMode::Exponential { alphas: vec![8.0] });
    opts.p = 1;
    opts.tau = 1.0 / n as f64;
    opts.edge_abs = true;
    opts.solver.mu = default_mu(n_x, opts.m);
    let mut seconds = [0.0; 4];
    seconds[0] = time_median(reps, || run_cf_vbjs_mmv(&ms, &grid, &opts).map(|_| ()))?;
    seconds[1] = time_median(reps, || {
        run_cf_vbjs_smv(&base, &alphas, &grid, &opts).map(|_| ())
    })?;
    let mut opts2 = opts.clone();
    opts2.p = 2;
    seconds[2] = time_median(reps, || {
        run_cf_vbjs_smv(&base, &alphas, &grid, &opts2).map(|_| ())
    })?;
    seconds[3] = time_median(reps, || run_vbjs_baseline(&ms, &grid, &opts).map(|_| ()))?;
    Ok(TimingRow { key: n_x, seconds })
}

/// Timing sweep over grid sizes at a fixed measurement count.
pub fn efficiency_nx_rows(sizes: &[usize], j: usize, reps: usize) -> Result<Vec<TimingRow>> {
    sizes.iter().map(|&n_x| efficiency_point(n_x, j, reps)).collect()
}

/// Timing sweep over the measurement count at a fixed grid size.
pub fn efficiency_j_rows(js: &[usize], n_x: usize, reps: usize) -> Result<Vec<TimingRow>> {
    js.iter()
        .map(|&j| efficiency_point(n_x, j, reps).map(|r| TimingRow { key: j, ..r }))
        .collect()
}

/// Cross-section error triples of one 2D trial.
#[derive(Debug, Clone)]
pub struct Table2Trial {
    pub vbjs: ErrorReport,
    pub ifft: ErrorReport,
}

fn cross_report(cross: &[f64], truth: &[f64], xs: &[f64]) -> Result<ErrorReport> {
    let mask: Vec<bool> = xs.iter().map(|&x| x.abs() < 0.2).collect();
    let istar = xs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 + 0.57)
                .abs()
                .partial_cmp(&(b.1 + 0.57).abs())
                .expect("finite grid")
        })
        .map(|(i, _)| i)
        .expect("nonempty grid");
    Ok(ErrorReport {
        total: rel_error(cross, truth, None)?,
        smooth: rel_error(cross, truth, Some(&mask))?,
        point: (cross[istar] - truth[istar]).abs(),
    })
}

/// Stochastic 2D comparison: ten noisy draws of the test scene feed the
/// joint-sparsity flow; the classical filtered partial sum of the selected
/// draw is the baseline. Errors are measured along the vertical midline.
pub fn table2_trials(
    trials: usize,
    snr_db: f64,
    seed: u64,
    workers: usize,
) -> Result<Vec<Table2Trial>> {
    let n = 64usize;
    let n_x = 128usize;
    let coeffs = sample_scene2d(n)?;
    let scene = scene_grid(n_x);
    let col = n_x / 2; // y = 0 lies on the midline column
    let truth: Vec<f64> = (0..n_x).map(|r| scene.values[r * n_x + col]).collect();
    let xs: Vec<f64> = (0..n_x).map(|r| -1.0 + 2.0 * r as f64 / n_x as f64).collect();
    run_trials(trials, workers, |t| -> Result<Table2Trial> {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed("table2", 0, t as u64, seed));
        let draws: Vec<_> = (0..10).map(|_| add_noise_2d(&coeffs, snr_db, rng.gen())).collect();
        let mut opts = PipelineOpts::new(CfMode::Exponential { alphas: vec![8.0] });
        opts.p = 1;
        opts.tau = 1.0 / n as f64;
        opts.solver.mu = 1000.0;
        let r = run_cf_vbjs_2d(&draws, n_x, &opts)?;
        let vb = cross_section_col(&r.q, n_x, col)?;
        let base = filtered_ifft(&draws[r.j_star], n_x);
        let bl = cross_section_col(&base, n_x, col)?;
        Ok(Table2Trial {
            vbjs: cross_report(&vb, &truth, &xs)?,
            ifft: cross_report(&bl, &truth, &xs)?,
        })
    })
    .into_iter()
    .collect()
}

// ---- presets ----

/// Named experiment presets the CLI can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Table1,
    Table2,
    Convergence,
    SnrSweep,
    MissingBandSweep,
    BandFraction,
    Efficiency,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Table1,
        Preset::Table2,
        Preset::Convergence,
        Preset::SnrSweep,
        Preset::MissingBandSweep,
        Preset::BandFraction,
        Preset::Efficiency,
        Preset::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Convergence => "convergence",
            Preset::SnrSweep => "snr_sweep",
            Preset::MissingBandSweep => "missing_band_sweep",
            Preset::BandFraction => "band_fraction",
            Preset::Efficiency => "efficiency",
            Preset::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| VbjsError::Config {
                line: 0,
                msg: format!(
                    "unknown experiment {name:?}; expected one of {}",
                    Preset::ALL.map(|p| p.name()).join(", ")
                ),
            })
    }
}

/// Run a preset, writing its CSV tables (and plots where meaningful) into
/// `out_dir`. Returns the written paths.
pub fn run_preset(
    preset: Preset,
    cfg: &Config,
    out_dir: &Path,
    workers: usize,
) -> Result<Vec<PathBuf>> {
    if let Some(named) = cfg.get("preset") {
        if named != preset.name() {
            return Err(VbjsError::Config {
                line: cfg.line_of("preset"),
                msg: format!("config is for preset {named:?}, not {:?}", preset.name()),
            });
        }
    }
    fs::create_dir_all(out_dir)?;
    let workers = workers.max(1);
    match preset {
        Preset::Table1 => preset_table1(cfg, out_dir),
        Preset::Table2 => preset_table2(cfg, out_dir, workers),
        Preset::Convergence => preset_convergence(cfg, out_dir, workers),
        Preset::SnrSweep => preset_snr_sweep(cfg, out_dir, workers),
        Preset::MissingBandSweep => preset_missing_band(cfg, out_dir),
        Preset::BandFraction => preset_band_fraction(cfg, out_dir, workers),
        Preset::Efficiency => preset_efficiency(cfg, out_dir),
        Preset::Custom => preset_custom(cfg, out_dir),
    }
}

fn resolved(preset: &str, pairs: &[(&str, String)]) -> Config {
    let mut c = Config::default();
    c.set("preset", preset);
    for (k, v) in pairs {
        c.set(k, v);
    }
    c
}

fn doubling_sizes(lo: usize, hi: usize) -> Result<Vec<usize>> {
    if lo < 8 || lo > hi {
        return Err(VbjsError::InvalidParam(format!(
            "size range {lo}..{hi} must start at 8 or more"
        )));
    }
    let mut v = Vec::new();
    let mut s = lo;
    while s <= hi {
        v.push(s);
        s *= 2;
    }
    Ok(v)
}

fn triple_strings(r: &ErrorReport) -> [String; 3] {
    [fmt_e(r.total), fmt_e(r.smooth), fmt_e(r.point)]
}

fn preset_table1(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&["preset"])?;
    let hash = resolved("table1", &[]).hash();
    let rows = table1_rows()?;
    let mut table = CsvTable::new("table1", &["method", "total", "smooth", "point"]);
    for row in &rows {
        let [t, s, p] = triple_strings(&row.report);
        table.push(vec![row.method.clone(), t, s, p]);
    }
    Ok(vec![table.write(out, hash)?])
}

fn preset_convergence(cfg: &Config, out: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&["preset", "seed", "trials", "snr_db", "n_x_min", "n_x_max", "svg"])?;
    let seed = cfg.get_u64("seed", 0)?;
    let trials = cfg.get_usize("trials", 50)?;
    let snr_db = cfg.get_f64("snr_db", 5.0)?;
    let lo = cfg.get_usize("n_x_min", 8)?;
    let hi = cfg.get_usize("n_x_max", 1024)?;
    let svg = cfg.get_bool("svg", true)?;
    let sizes = doubling_sizes(lo, hi)?;
    let hash = resolved(
        "convergence",
        &[
            ("seed", seed.to_string()),
            ("trials", trials.to_string()),
            ("snr_db", fmt_e(snr_db)),
            ("n_x_min", lo.to_string()),
            ("n_x_max", hi.to_string()),
        ],
    )
    .hash();
    let rows = convergence_rows(&sizes, trials, snr_db, seed, workers)?;
    let mut header = vec!["n_x"];
    header.extend(SWEEP_METHODS);
    let mut table = CsvTable::new("convergence", &header);
    for row in &rows {
        let mut cells = vec![row.n_x.to_string()];
        cells.extend(row.medians.iter().map(|&v| fmt_e(v)));
        table.push(cells);
    }
    let mut files = vec![table.write(out, hash)?];
    if svg {
        let x: Vec<f64> = rows.iter().map(|r| r.n_x as f64).collect();
        let series: Vec<(String, Vec<f64>)> = SWEEP_METHODS
            .iter()
            .enumerate()
            .map(|(k, m)| (m.to_string(), rows.iter().map(|r| r.medians[k]).collect()))
            .collect();
        let plot = svg_line_plot(
            "median total error vs grid size",
            "n_x",
            "median relative error",
            &x,
            &series,
            true,
            true,
        );
        let path = out.join("convergence.svg");
        fs::write(&path, plot)?;
        files.push(path);
    }
    Ok(files)
}

fn preset_snr_sweep(cfg: &Config, out: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&[
        "preset", "seed", "trials", "n_x", "snr_min", "snr_max", "snr_step", "svg",
    ])?;
    let seed = cfg.get_u64("seed", 0)?;
    let trials = cfg.get_usize("trials", 50)?;
    let n_x = cfg.get_usize("n_x", 128)?;
    let snr_min = cfg.get_f64("snr_min", -10.0)?;
    let snr_max = cfg.get_f64("snr_max", 10.0)?;
    let step = cfg.get_f64("snr_step", 0.1)?;
    let svg = cfg.get_bool("svg", true)?;
    if step <= 0.0 || snr_max < snr_min {
        return Err(VbjsError::InvalidParam(
            "noise sweep needs snr_min <= snr_max and a positive step".into(),
        ));
    }
    let mut levels = Vec::new();
    let mut i = 0usize;
    loop {
        let s = snr_max - i as f64 * step;
        if s < snr_min - 1e-9 {
            break;
        }
        levels.push(s);
        i += 1;
    }
    let hash = resolved(
        "snr_sweep",
        &[
            ("seed", seed.to_string()),
            ("trials", trials.to_string()),
            ("n_x", n_x.to_string()),
            ("snr_min", fmt_e(snr_min)),
            ("snr_max", fmt_e(snr_max)),
            ("snr_step", fmt_e(step)),
        ],
    )
    .hash();
    let rows = snr_rows(n_x, &levels, trials, seed, workers)?;
    let mut header = vec!["snr_db"];
    header.extend(SWEEP_METHODS);
    let mut table = CsvTable::new("snr_sweep", &header);
    for row in &rows {
        let mut cells = vec![fmt_e(row.snr_db)];
        cells.extend(row.means.iter().map(|&v| fmt_e(v)));
        table.push(cells);
    }
    let mut files = vec![table.write(out, hash)?];
    if svg {
        let x: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
        let series: Vec<(String, Vec<f64>)> = SWEEP_METHODS
            .iter()
            .enumerate()
            .map(|(k, m)| (m.to_string(), rows.iter().map(|r| r.means[k]).collect()))
            .collect();
        let plot = svg_line_plot(
            "mean total error vs noise level",
            "SNR (dB)",
            "mean relative error",
            &x,
            &series,
            false,
            true,
        );
        let path = out.join("snr_sweep.svg");
        fs::write(&path, plot)?;
        files.push(path);
    }
    Ok(files)
}

fn preset_missing_band(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&["preset", "width_min", "width_max", "width_step"])?;
    let lo = cfg.get_usize("width_min", 2)?;
    let hi = cfg.get_usize("width_max", 16)?;
    let step = cfg.get_usize("width_step", 2)?;
    if step == 0 || lo == 0 || hi < lo {
        return Err(VbjsError::InvalidParam(
            "band width sweep needs width_min <= width_max and a positive step".into(),
        ));
    }
    let widths: Vec<usize> = (lo..=hi).step_by(step).collect();
    let hash = resolved(
        "missing_band_sweep",
        &[
            ("width_min", lo.to_string()),
            ("width_max", hi.to_string()),
            ("width_step", step.to_string()),
        ],
    )
    .hash();
    let results = missing_band_rows(&widths)?;
    let grid = Grid1D::standard(64);
    let f_true = sample_ramp(&grid);
    let mut summary = CsvTable::new(
        "missing_band_summary",
        &["width", "method", "total", "smooth", "point"],
    );
    let mut pointwise = CsvTable::new(
        "missing_band_pointwise",
        &["width", "method", "x", "log10_error"],
    );
    for r in &results {
        let [t, s, p] = triple_strings(&r.report);
        summary.push(vec![r.width.to_string(), r.method.clone(), t, s, p]);
        for (x, lg) in grid.x.iter().zip(pointwise_log(&r.q, &f_true)?) {
            pointwise.push(vec![
                r.width.to_string(),
                r.method.clone(),
                fmt_e(*x),
                fmt_e(lg),
            ]);
        }
    }
    Ok(vec![summary.write(out, hash)?, pointwise.write(out, hash)?])
}

fn preset_band_fraction(cfg: &Config, out: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&[
        "preset",
        "seed",
        "trials",
        "bandwidth",
        "gamma_min",
        "gamma_max",
        "gamma_step",
        "svg",
    ])?;
    let seed = cfg.get_u64("seed", 0)?;
    let trials = cfg.get_usize("trials", 20)?;
    let bandwidth = cfg.get_usize("bandwidth", 16)?;
    let g_lo = cfg.get_f64("gamma_min", 0.05)?;
    let g_hi = cfg.get_f64("gamma_max", 0.95)?;
    let g_step = cfg.get_f64("gamma_step", 0.05)?;
    let svg = cfg.get_bool("svg", true)?;
    if g_step <= 0.0 || g_hi < g_lo {
        return Err(VbjsError::InvalidParam(
            "fraction sweep needs gamma_min <= gamma_max and a positive step".into(),
        ));
    }
    let mut gammas = Vec::new();
    let mut i = 0usize;
    loop {
        let g = g_lo + i as f64 * g_step;
        if g > g_hi + 1e-9 {
            break;
        }
        gammas.push(g);
        i += 1;
    }
    let hash = resolved(
        "band_fraction",
        &[
            ("seed", seed.to_string()),
            ("trials", trials.to_string()),
            ("bandwidth", bandwidth.to_string()),
            ("gamma_min", fmt_e(g_lo)),
            ("gamma_max", fmt_e(g_hi)),
            ("gamma_step", fmt_e(g_step)),
        ],
    )
    .hash();
    let rows = band_fraction_rows(&gammas, trials, bandwidth, seed, workers)?;
    let mut table = CsvTable::new(
        "band_fraction",
        &["gamma", "method", "total", "smooth", "point", "fallback_fraction"],
    );
    for row in &rows {
        for (k, name) in BAND_FRACTION_METHODS.iter().enumerate() {
            let [t, s, p] = triple_strings(&row.medians[k]);
            let fb = if name.starts_with("icf") {
                fmt_e(row.fallback_fraction)
            } else {
                fmt_e(0.0)
            };
            table.push(vec![fmt_e(row.gamma), name.to_string(), t, s, p, fb]);
        }
    }
    let mut files = vec![table.write(out, hash)?];
    if svg {
        let x: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
        let series: Vec<(String, Vec<f64>)> = BAND_FRACTION_METHODS
            .iter()
            .enumerate()
            .map(|(k, m)| {
                (
                    m.to_string(),
                    rows.iter().map(|r| r.medians[k].total).collect(),
                )
            })
            .collect();
        let plot = svg_line_plot(
            "median total error vs removed fraction",
            "fraction of coefficients removed",
            "median relative error",
            &x,
            &series,
            false,
            true,
        );
        let path = out.join("band_fraction.svg");
        fs::write(&path, plot)?;
        files.push(path);
    }
    Ok(files)
}

fn preset_efficiency(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&[
        "preset", "reps", "j", "n_x", "n_x_min", "n_x_max", "j_min", "j_max", "j_step", "svg",
    ])?;
    let reps = cfg.get_usize("reps", 5)?.max(1);
    let j = cfg.get_usize("j", 10)?;
    let n_x = cfg.get_usize("n_x", 128)?;
    let lo = cfg.get_usize("n_x_min", 8)?;
    let hi = cfg.get_usize("n_x_max", 1024)?;
    let j_lo = cfg.get_usize("j_min", 2)?;
    let j_hi = cfg.get_usize("j_max", 20)?;
    let j_step = cfg.get_usize("j_step", 2)?.max(1);
    let svg = cfg.get_bool("svg", true)?;
    let sizes = doubling_sizes(lo, hi)?;
    let js: Vec<usize> = (j_lo..=j_hi).step_by(j_step).collect();
    let hash = resolved(
        "efficiency",
        &[
            ("reps", reps.to_string()),
            ("j", j.to_string()),
            ("n_x", n_x.to_string()),
            ("n_x_min", lo.to_string()),
            ("n_x_max", hi.to_string()),
            ("j_min", j_lo.to_string()),
            ("j_max", j_hi.to_string()),
            ("j_step", j_step.to_string()),
        ],
    )
    .hash();
    let grid_rows = efficiency_nx_rows(&sizes, j, reps)?;
    let j_rows = efficiency_j_rows(&js, n_x, reps)?;
    let mut files = Vec::new();
    for (name, key, rows) in [
        ("efficiency_grid", "n_x", &grid_rows),
        ("efficiency_measurements", "j", &j_rows),
    ] {
        let mut header = vec![key];
        header.extend(EFFICIENCY_METHODS);
        let mut table = CsvTable::new(name, &header);
        for row in rows {
            let mut cells = vec![row.key.to_string()];
            cells.extend(row.seconds.iter().map(|&v| fmt_e(v)));
            table.push(cells);
        }
        files.push(table.write(out, hash)?);
        if svg {
            let x: Vec<f64> = rows.iter().map(|r| r.key as f64).collect();
            let series: Vec<(String, Vec<f64>)> = EFFICIENCY_METHODS
                .iter()
                .enumerate()
                .map(|(k, m)| (m.to_string(), rows.iter().map(|r| r.seconds[k]).collect()))
                .collect();
            let plot = svg_line_plot(
                &format!("wall time vs {key}"),
                key,
                "seconds",
                &x,
                &series,
                name == "efficiency_grid",
                true,
            );
            let path = out.join(format!("{name}.svg"));
            fs::write(&path, plot)?;
            files.push(path);
        }
    }
    Ok(files)
}

fn preset_table2(cfg: &Config, out: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&["preset", "seed", "trials", "snr_db"])?;
    let seed = cfg.get_u64("seed", 0)?;
    let trials = cfg.get_usize("trials", 20)?;
    let snr_db = cfg.get_f64("snr_db", -10.0)?;
    let hash = resolved(
        "table2",
        &[
            ("seed", seed.to_string()),
            ("trials", trials.to_string()),
            ("snr_db", fmt_e(snr_db)),
        ],
    )
    .hash();
    let results = table2_trials(trials, snr_db, seed, workers)?;
    let mut per_trial = CsvTable::new(
        "table2_trials",
        &[
            "trial",
            "vbjs_total",
            "vbjs_smooth",
            "vbjs_point",
            "ifft_total",
            "ifft_smooth",
            "ifft_point",
        ],
    );
    for (t, r) in results.iter().enumerate() {
        let [vt, vs, vp] = triple_strings(&r.vbjs);
        let [it, is, ip] = triple_strings(&r.ifft);
        per_trial.push(vec![t.to_string(), vt, vs, vp, it, is, ip]);
    }
    let vb: Vec<ErrorReport> = results.iter().map(|r| r.vbjs.clone()).collect();
    let ff: Vec<ErrorReport> = results.iter().map(|r| r.ifft.clone()).collect();
    let vb_med = median_report(&vb);
    let ff_med = median_report(&ff);
    let beat = results
        .iter()
        .filter(|r| r.vbjs.total < r.ifft.total)
        .count() as f64
        / results.len().max(1) as f64;
    let mut summary = CsvTable::new("table2_summary", &["quantity", "value"]);
    for (k, v) in [
        ("vbjs_median_total", vb_med.total),
        ("vbjs_median_smooth", vb_med.smooth),
        ("vbjs_median_point", vb_med.point),
        ("ifft_median_total", ff_med.total),
        ("ifft_median_smooth", ff_med.smooth),
        ("ifft_median_point", ff_med.point),
        ("vbjs_beats_ifft_fraction", beat),
    ] {
        summary.push(vec![k.to_string(), fmt_e(v)]);
    }
    Ok(vec![per_trial.write(out, hash)?, summary.write(out, hash)?])
}

const CUSTOM_KEYS: [&str; 20] = [
    "preset", "flow", "n", "n_x", "j", "snr_db", "masks", "gamma", "bandwidth", "designed",
    "alpha", "p", "m", "tau", "tau_tilde", "masked", "edge_abs", "mu", "rho", "seed",
];

/// Single configurable reconstruction: one flow, one seed, full output
/// bundle (reconstruction, weights, metrics).
fn preset_custom(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.check_keys(&CUSTOM_KEYS)?;
    let flow = cfg.get_str("flow", "mmv").to_string();
    let n = cfg.get_usize("n", 64)?;
    let n_x = cfg.get_usize("n_x", 2 * n)?;
    let j = cfg.get_usize("j", 4)?;
    let snr_db = match cfg.get("snr_db") {
        None => None,
        Some(_) => Some(cfg.get_f64("snr_db", 0.0)?),
    };
    let masks = cfg.get_str("masks", "bands").to_string();
    let gamma = cfg.get_f64("gamma", 0.25)?;
    let bandwidth = cfg.get_usize("bandwidth", 16)?;
    let designed = cfg.get_bool("designed", false)?;
    let m = cfg.get_usize("m", 2)?;
    let p = cfg.get_usize("p", 1)? as u32;
    let noisy = snr_db.is_some();
    let tau = cfg.get_f64("tau", if noisy { 1.0 } else { 1.0 / n as f64 })?;
    let tau_tilde = cfg.get_f64("tau_tilde", 1.0)?;
    let masked = cfg.get_bool("masked", false)?;
    let edge_abs = cfg.get_bool("edge_abs", !noisy)?;
    let mu = cfg.get_f64("mu", default_mu(n_x, m))?;
    let rho = cfg.get_f64("rho", 1.0)?;
    let seed = cfg.get_u64("seed", 0)?;
    let default_alphas: Vec<f64> = if flow == "smv" {
        (1..=10).map(|a| 2.0 * a as f64).collect()
    } else {
        (1..=j).map(|a| 2.0 * a as f64).collect()
    };
    let alphas = cfg.get_list("alpha", &default_alphas)?;

    let grid = Grid1D::new(n, n_x)?;
    let base = ramp_exact_coeffs(n);
    let f_true = sample_ramp(&grid);
    let smooth = smooth_flank_mask(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed("custom", 0, 0, seed));
    let count = if flow == "smv" { 1 } else { j };
    let mut members = Vec::with_capacity(count);
    for idx in 0..count {
        let mut d = match masks.as_str() {
            "bands" => apply_missing_band(&base, idx + 1)?,
            "random" => remove_random_bands(&base, gamma, bandwidth, rng.gen())?,
            "none" => base.clone(),
            other => {
                return Err(VbjsError::Config {
                    line: cfg.line_of("masks"),
                    msg: format!("masks must be bands, random, or none, got {other:?}"),
                })
            }
        };
        if let Some(db) = snr_db {
            d = add_noise(&d, db, rng.gen());
        }
        members.push(d);
    }

    let cf = if designed {
        CfMode::Designed { fallback_alphas: alphas.clone() }
    } else {
        CfMode::Exponential { alphas: alphas.clone() }
    };
    let mut opts = PipelineOpts::new(cf);
    opts.m = m;
    opts.p = p;
    opts.tau = tau;
    opts.tau_tilde = tau_tilde;
    opts.masked = masked;
    opts.edge_abs = edge_abs;
    opts.solver.mu = mu;
    opts.solver.rho = rho;

    let result = match flow.as_str() {
        "smv" => run_cf_vbjs_smv(&members[0], &alphas, &grid, &opts)?,
        "mmv" => run_cf_vbjs_mmv(&MeasurementSet::new(members.clone())?, &grid, &opts)?,
        "baseline" => run_vbjs_baseline(&MeasurementSet::new(members.clone())?, &grid, &opts)?,
        other => {
            return Err(VbjsError::Config {
                line: cfg.line_of("flow"),
                msg: format!("flow must be smv, mmv, or baseline, got {other:?}"),
            })
        }
    };

    let mut pairs: Vec<(&str, String)> = vec![
        ("flow", flow.clone()),
        ("n", n.to_string()),
        ("n_x", n_x.to_string()),
        ("j", count.to_string()),
        ("masks", masks.clone()),
        ("designed", designed.to_string()),
        ("alpha", alphas.iter().map(|a| fmt_e(*a)).collect::<Vec<_>>().join(",")),
        ("p", p.to_string()),
        ("m", m.to_string()),
        ("tau", fmt_e(tau)),
        ("tau_tilde", fmt_e(tau_tilde)),
        ("masked", masked.to_string()),
        ("edge_abs", edge_abs.to_string()),
        ("mu", fmt_e(mu)),
        ("rho", fmt_e(rho)),
        ("seed", seed.to_string()),
    ];
    if let Some(db) = snr_db {
        pairs.push(("snr_db", fmt_e(db)));
    }
    if masks == "random" {
        pairs.push(("gamma", fmt_e(gamma)));
        pairs.push(("bandwidth", bandwidth.to_string()));
    }
    let hash = resolved("custom", &pairs).hash();

    let mut recon = CsvTable::new("reconstruction", &["x", "f_true", "f_recon"]);
    for i in 0..n_x {
        recon.push(vec![fmt_e(grid.x[i]), fmt_e(f_true[i]), fmt_e(result.q[i])]);
    }
    let mut wtab = CsvTable::new("weights", &["x", "w", "used"]);
    for i in 0..n_x {
        wtab.push(vec![
            fmt_e(grid.x[i]),
            fmt_e(result.weights.w[i]),
            fmt_e(result.used_weights[i]),
        ]);
    }
    let report = ramp_report(&result.q, &f_true, &grid, &smooth)?;
    let mut metrics = CsvTable::new("metrics", &["metric", "value"]);
    metrics.push(vec!["total".into(), fmt_e(report.total)]);
    metrics.push(vec!["smooth".into(), fmt_e(report.smooth)]);
    metrics.push(vec!["point".into(), fmt_e(report.point)]);
    metrics.push(vec!["iterations".into(), result.info.iterations.to_string()]);
    metrics.push(vec![
        "converged".into(),
        (result.info.converged as u8).to_string(),
    ]);
    metrics.push(vec!["fallbacks".into(), result.fallbacks.to_string()]);
    if let Some(js) = result.j_star {
        metrics.push(vec!["j_star".into(), js.to_string()]);
    }
    Ok(vec![
        recon.write(out, hash)?,
        wtab.write(out, hash)?,
        metrics.write(out, hash)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a_reference_vectors() {
        // standard FNV-1a test values
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn fmt_e_is_fixed_width_scientific() {
        assert_eq!(fmt_e(0.2927), "2.927000e-01");
        assert_eq!(fmt_e(-414.87), "-4.148700e+02");
        assert_eq!(fmt_e(0.0), "0.000000e+00");
        assert_eq!(fmt_e(1e-12), "1.000000e-12");
        assert_eq!(fmt_e(f64::INFINITY), "inf");
    }

    #[test]
    fn config_parses_and_hashes_canonically() {
        let a = Config::parse("# comment\nseed = 7\ntrials=3\n\n").unwrap();
        assert_eq!(a.get("seed"), Some("7"));
        assert_eq!(a.get_usize("trials", 0).unwrap(), 3);
        assert_eq!(a.get_usize("missing", 9).unwrap(), 9);
        let b = Config::parse("trials = 3\nseed = 7").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Config::parse("trials = 4\nseed = 7").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let e = Config::parse("seed = 1\nnot a pair\n").unwrap_err();
        match e {
            VbjsError::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let e = Config::parse("seed = 1\nseed = 2").unwrap_err();
        match e {
            VbjsError::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let cfg = Config::parse("seed = 1\nmystery = 2").unwrap();
        match cfg.check_keys(&["seed"]).unwrap_err() {
            VbjsError::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("mystery"));
            }
            other => panic!("unexpected error {other:?}"),
        }
        let cfg = Config::parse("trials = many").unwrap();
        assert!(matches!(
            cfg.get_usize("trials", 1),
            Err(VbjsError::Config { line: 1, .. })
        ));
    }

    #[test]
    fn trial_seeds_separate_streams() {
        let a = trial_seed("convergence", 128, 0, 0);
        assert_ne!(a, trial_seed("convergence", 128, 1, 0));
        assert_ne!(a, trial_seed("convergence", 256, 0, 0));
        assert_ne!(a, trial_seed("snr_sweep", 128, 0, 0));
        assert_ne!(a, trial_seed("convergence", 128, 0, 1));
        assert_eq!(a, trial_seed("convergence", 128, 0, 0));
    }

    #[test]
    fn run_trials_order_is_worker_independent() {
        let serial = run_trials(17, 1, |i| i * i);
        let threaded = run_trials(17, 4, |i| i * i);
        assert_eq!(serial, threaded);
        assert!(run_trials(0, 4, |i| i).is_empty());
    }

    #[test]
    fn median_of_even_and_odd_counts() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_bodies_are_byte_identical_across_reruns() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = CsvTable::new("demo", &["a", "b"]);
        t.push(vec![fmt_e(1.0), fmt_e(0.5)]);
        let p1 = t.write(dir.path(), 0xdead_beef).unwrap();
        let first = fs::read(&p1).unwrap();
        let p2 = t.write(dir.path(), 0xdead_beef).unwrap();
        assert_eq!(first, fs::read(&p2).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("# config 00000000deadbeef\n"));
        assert!(text.contains("a,b\n"));
    }

    #[test]
    fn svg_plot_has_polylines_and_legend() {
        let s = svg_line_plot(
            "demo",
            "x",
            "y",
            &[1.0, 2.0, 4.0],
            &[("one".to_string(), vec![0.1, 0.2, 0.4])],
            true,
            true,
        );
        assert!(s.contains("<polyline"));
        assert!(s.contains(">one<"));
        assert!(s.contains("</svg>"));
    }

    #[test]
    fn sweep_trial_is_deterministic_and_worker_independent() {
        let sizes = [8usize];
        let a = convergence_rows(&sizes, 2, 5.0, 9, 1).unwrap();
        let b = convergence_rows(&sizes, 2, 5.0, 9, 3).unwrap();
        assert_eq!(a.len(), 1);
        for (x, y) in a[0].medians.iter().zip(&b[0].medians) {
            assert_eq!(x, y, "medians must not depend on the worker count");
            assert!(x.is_finite());
        }
    }

    #[test]
    fn band_fraction_smoke() {
        let rows = band_fraction_rows(&[0.2], 1, 16, 3, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((0.0..=1.0).contains(&rows[0].fallback_fraction));
        for r in &rows[0].medians {
            assert!(r.total.is_finite() && r.total > 0.0);
        }
    }

    #[test]
    fn missing_band_sweep_is_deterministic() {
        let a = missing_band_rows(&[4]).unwrap();
        let b = missing_band_rows(&[4]).unwrap();
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.report.total, y.report.total);
        }
        // designed factors should not lose to the plain ones on the flanks
        let smooth = |m: &str| {
            a.iter()
                .find(|r| r.method == m)
                .map(|r| r.report.smooth)
                .unwrap()
        };
        assert!(smooth("icf-p1") <= smooth("cf-p1") + 1e-12);
    }

    #[test]
    fn custom_preset_writes_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::parse("flow = mmv\nn = 16\nn_x = 32\nj = 2\nmasks = none\nalpha = 4,8")
            .unwrap();
        let files = run_preset(Preset::Custom, &cfg, dir.path(), 1).unwrap();
        assert_eq!(files.len(), 3);
        for f in &files {
            let text = fs::read_to_string(f).unwrap();
            assert!(text.starts_with("# config "));
        }
        let again = run_preset(Preset::Custom, &cfg, dir.path(), 1).unwrap();
        for (f, g) in files.iter().zip(&again) {
            assert_eq!(fs::read(f).unwrap(), fs::read(g).unwrap());
        }
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()).unwrap(), p);
        }
        assert!(Preset::from_name("frequency").is_err());
        let cfg = Config::parse("preset = table2").unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_preset(Preset::Table1, &cfg, dir.path(), 1),
            Err(VbjsError::Config { .. })
        ));
    }
}
