//! Weighted lp inversion of banded Fourier data.
//!
//! Both solvers exploit the same structure: on the uniform shifted grid the
//! real normal operator of the (masked) forward map is circulant, as is the
//! annihilation operator, so the quadratic subproblems diagonalize in
//! Fourier space. The l2 path runs matrix-free conjugate gradients; the l1
//! path is an ADMM split with a soft-threshold shrinkage step.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::fourier::{adjoint_real, FourierData};
use crate::grid::Grid1D;
use crate::pa::PaOperator;
use crate::scene::{fft2_with, fold_ifft2, fold_ifft2_with, FourierData2D};
use crate::{Result, VbjsError};

/// Knobs shared by the iterative solvers.
#[derive(Debug, Clone)]
pub struct SolverOpts {
    /// ADMM penalty parameter.
    pub rho: f64,
    /// ADMM primal/dual residual tolerance (scaled by sqrt of problem size).
    pub tol: f64,
    /// ADMM iteration cap.
    pub max_iter: usize,
    /// Conjugate-gradient relative residual tolerance.
    pub cg_tol: f64,
    /// Fidelity weight on the data term.
    pub mu: f64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            rho: 1.0,
            tol: 1e-6,
            max_iter: 500,
            cg_tol: 1e-10,
            mu: 1.0,
        }
    }
}

impl SolverOpts {
    pub fn validate(&self) -> Result<()> {
        if self.rho <= 0.0
            || self.tol <= 0.0
            || self.max_iter == 0
            || self.cg_tol <= 0.0
            || self.mu <= 0.0
        {
            return Err(VbjsError::InvalidParam(
                "solver options must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Convergence bookkeeping returned with every solution.
#[derive(Debug, Clone)]
pub struct SolveInfo {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub q: Vec<f64>,
    pub info: SolveInfo,
}

/// Eigenvalues of `Re(F_known^H F_known)` on the shifted uniform grid.
///
/// The masked normal operator is circulant for any mask because the grid and
/// mode set are both uniform; its first column only counts how many known
/// modes alias into each frequency bin.
pub fn normal_op_eigenvalues(known: &[bool], n: usize, n_x: usize) -> Vec<f64> {
    let mut cnt = vec![0.0f64; n_x];
    for k in -(n as i64)..=(n as i64) {
        if known[(k + n as i64) as usize] {
            cnt[k.rem_euclid(n_x as i64) as usize] += 1.0;
        }
    }
    (0..n_x)
        .map(|m| (cnt[m] + cnt[(n_x - m) % n_x]) / (2.0 * n_x as f64))
        .collect()
}

/// Eigenvalues of `L^T L` for a circulant operator.
pub fn gram_eigenvalues(op: &PaOperator) -> Vec<f64> {
    let mut buf: Vec<Complex64> = op
        .first_column()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(op.n_x)
        .process(&mut buf);
    buf.iter().map(|z| z.norm_sqr()).collect()
}

/// Pre-planned forward/inverse FFT pair of one fixed size. Planning costs
/// more than a transform, so hot loops hold one.
struct FftPair {
    n: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl FftPair {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Apply a symmetric circulant operator given its (real) eigenvalues.
    fn circ_apply(&self, lam: &[f64], x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (b, &l) in buf.iter_mut().zip(lam) {
            *b *= l;
        }
        self.inv.process(&mut buf);
        buf.iter().map(|z| z.re / self.n as f64).collect()
    }

    /// Solve a symmetric circulant system given strictly positive eigenvalues.
    fn circ_solve(&self, lam: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (b, &l) in buf.iter_mut().zip(lam) {
            *b /= l;
        }
        self.inv.process(&mut buf);
        buf.iter().map(|z| z.re / self.n as f64).collect()
    }
}

#[cfg(test)]
fn circ_apply(lam: &[f64], x: &[f64]) -> Vec<f64> {
    FftPair::new(x.len()).circ_apply(lam, x)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|&a| a * a).sum::<f64>().sqrt()
}

fn data_norm(data: &FourierData) -> f64 {
    data.coeffs
        .iter()
        .zip(&data.known)
        .filter(|(_, &k)| k)
        .map(|(c, _)| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Conjugate gradients on a matrix-free SPD operator; absolute residual
/// target, hard iteration cap.
fn cg<A: Fn(&[f64]) -> Vec<f64>>(
    apply: A,
    b: &[f64],
    target: f64,
    cap: usize,
) -> (Vec<f64>, usize, f64) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|&v| v * v).sum();
    let mut it = 0;
    while rs.sqrt() > target && it < cap {
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(&a, &c)| a * c).sum();
        if pap <= 0.0 {
            break; // numerically lost positive definiteness
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|&v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        it += 1;
    }
    (x, it, rs.sqrt())
}

/// Minimize `1/2 ||W L q||^2 + mu/2 ||F q - fhat||^2` through its normal
/// equations `(L^T W^2 L + mu Re F^H F) q = mu Re(F^H fhat)` by matrix-free
/// conjugate gradients. The returned gradient norm is at most
/// `1e-8 max(1, mu) ||fhat||`, else the solve reports failure.
pub fn solve_weighted_l2(
    data: &FourierData,
    grid: &Grid1D,
    op: &PaOperator,
    w: &[f64],
    opts: &SolverOpts,
) -> Result<Solution> {
    opts.validate()?;
    check_shapes(data, grid, op, w)?;
    let lam_f = normal_op_eigenvalues(&data.known, data.n, grid.n_x);
    let fft = FftPair::new(grid.n_x);
    let w2: Vec<f64> = w.iter().map(|&v| v * v).collect();
    let apply = |q: &[f64]| -> Vec<f64> {
        let lq = op.apply(q).expect("shape checked");
        let wlq: Vec<f64> = lq.iter().zip(&w2).map(|(&a, &b)| a * b).collect();
        let mut out = op.apply_transpose(&wlq).expect("shape checked");
        let fhf = fft.circ_apply(&lam_f, q);
        for i in 0..out.len() {
            out[i] += opts.mu * fhf[i];
        }
        out
    };
    let b: Vec<f64> = adjoint_real(data, grid)
        .into_iter()
        .map(|v| opts.mu * v)
        .collect();
    let grad_limit = 1e-8 * opts.mu.max(1.0) * data_norm(data);
    let target = (opts.cg_tol * norm(&b)).min(grad_limit.max(f64::MIN_POSITIVE));
    let cap = 10 * grid.n_x;
    let (q, iters, resid) = cg(&apply, &b, target, cap);
    // the CG residual is exactly the gradient of the quadratic objective
    let grad: Vec<f64> = apply(&q)
        .iter()
        .zip(&b)
        .map(|(&aq, &bi)| aq - bi)
        .collect();
    let gn = norm(&grad);
    if gn > grad_limit.max(target) {
        return Err(VbjsError::SolverFailure(format!(
            "cg stalled after {iters} iterations, residual {resid:.3e}, gradient {gn:.3e}"
        )));
    }
    Ok(Solution {
        q,
        info: SolveInfo {
            iterations: iters,
            converged: true,
            primal_residual: gn,
            dual_residual: 0.0,
        },
    })
}

fn check_shapes(data: &FourierData, grid: &Grid1D, op: &PaOperator, w: &[f64]) -> Result<()> {
    if grid.n != data.n {
        return Err(VbjsError::BandwidthMismatch {
            expected: grid.n,
            got: data.n,
        });
    }
    if op.n_x != grid.n_x || w.len() != grid.n_x {
        return Err(VbjsError::DimensionMismatch(format!(
            "operator size {} / weight length {} vs grid {}",
            op.n_x,
            w.len(),
            grid.n_x
        )));
    }
    if w.iter().any(|&v| v < 0.0) {
        return Err(VbjsError::InvalidParam("weights must be nonnegative".into()));
    }
    Ok(())
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimize `||W L q||_1 + mu/2 ||F q - fhat||^2` by ADMM on the split
/// `z = L q`. The quadratic update diagonalizes over the circulant pair; the
/// split converges when both residuals drop below `tol sqrt(n_x)`. Hitting
/// the iteration cap returns the last iterate with `converged = false`.
pub fn solve_weighted_l1(
    data: &FourierData,
    grid: &Grid1D,
    op: &PaOperator,
    w: &[f64],
    opts: &SolverOpts,
) -> Result<Solution> {
    opts.validate()?;
    check_shapes(data, grid, op, w)?;
    let n_x = grid.n_x;
    let lam_f = normal_op_eigenvalues(&data.known, data.n, n_x);
    let lam_ltl = gram_eigenvalues(op);
    let denom: Vec<f64> = lam_ltl
        .iter()
        .zip(&lam_f)
        .map(|(&l, &f)| opts.rho * l + opts.mu * f)
        .collect();
    if denom.iter().any(|&d| d <= 1e-14) {
        return Err(VbjsError::SolverFailure(
            "quadratic update is singular: missing dc coverage".into(),
        ));
    }
    let bt: Vec<f64> = adjoint_real(data, grid)
        .into_iter()
        .map(|v| opts.mu * v)
        .collect();
    let thr: Vec<f64> = w.iter().map(|&v| v / opts.rho).collect();
    let fft = FftPair::new(n_x);
    let stop = opts.tol * (n_x as f64).sqrt();
    let mut q = vec![0.0; n_x];
    let mut z = vec![0.0; n_x];
    let mut u = vec![0.0; n_x];
    let mut info = SolveInfo {
        iterations: 0,
        converged: false,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
    };
    for it in 0..opts.max_iter {
        info.iterations = it + 1;
        let mut rhs = vec![0.0; n_x];
        for i in 0..n_x {
            rhs[i] = z[i] - u[i];
        }
        let ltzu = op.apply_transpose(&rhs).expect("shape checked");
        for i in 0..n_x {
            rhs[i] = bt[i] + opts.rho * ltzu[i];
        }
        q = fft.circ_solve(&denom, &rhs);
        let lq = op.apply(&q).expect("shape checked");
        let z_old = z.clone();
        for i in 0..n_x {
            z[i] = soft(lq[i] + u[i], thr[i]);
            u[i] += lq[i] - z[i];
        }
        let r = lq
            .iter()
            .zip(&z)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dz: Vec<f64> = z.iter().zip(&z_old).map(|(&a, &b)| a - b).collect();
        let s = opts.rho * norm(&op.apply_transpose(&dz).expect("shape checked"));
        info.primal_residual = r;
        info.dual_residual = s;
        if r <= stop && s <= stop {
            info.converged = true;
            break;
        }
    }
    Ok(Solution { q, info })
}

/// Classic l1 inversion: one scalar regularization weight everywhere.
pub fn solve_classic_l1(
    data: &FourierData,
    grid: &Grid1D,
    op: &PaOperator,
    lambda: f64,
    opts: &SolverOpts,
) -> Result<Solution> {
    if lambda < 0.0 {
        return Err(VbjsError::InvalidParam(
            "regularization weight must be nonnegative".into(),
        ));
    }
    solve_weighted_l1(data, grid, op, &vec![lambda; grid.n_x], opts)
}

// ---- 2D ----

fn known_all(data: &FourierData2D) -> bool {
    data.known.iter().all(|&k| k)
}

/// `mu Re(F^H fhat)` on the grid for masked 2D data.
fn rhs_data_2d(data: &FourierData2D, n_x: usize, mu: f64) -> Vec<f64> {
    let side = 2 * data.n + 1;
    let mut masked = data.coeffs.clone();
    for i in 0..side * side {
        if !data.known[i] {
            masked[i] = Complex64::new(0.0, 0.0);
        }
    }
    let scale = mu / (n_x as f64 * n_x as f64);
    fold_ifft2(&masked, data.n, n_x)
        .iter()
        .map(|z| z.re * scale)
        .collect()
}

/// `Re(F^H M F) q` for the masked 2D forward map, exact for any mask.
fn apply_fhf_2d(q: &[f64], known: &[bool], n: usize, n_x: usize, fft: &FftPair) -> Vec<f64> {
    let side = 2 * n + 1;
    let mut buf: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_with(&mut buf, n_x, &fft.fwd);
    let m = n_x as i64;
    let scale = 1.0 / (n_x as f64 * n_x as f64);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); side * side];
    for a in 0..side {
        let kx = a as i64 - n as i64;
        let sa = if kx.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        for b in 0..side {
            let ky = b as i64 - n as i64;
            if !known[a * side + b] {
                continue;
            }
            let sb = if ky.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let g = buf[(kx.rem_euclid(m) as usize) * n_x + ky.rem_euclid(m) as usize];
            coeffs[a * side + b] = g * (sa * sb * scale);
        }
    }
    let back = fold_ifft2_with(&coeffs, n, n_x, &fft.inv);
    let s2 = 1.0 / (n_x as f64 * n_x as f64);
    back.iter().map(|z| z.re * s2).collect()
}

struct Quad2D<'a> {
    op: &'a PaOperator,
    n_x: usize,
    mu: f64,
    rho: f64,
    /// separable eigenvalues when the mask is full, None otherwise
    denom: Option<Vec<f64>>,
    known: &'a [bool],
    n: usize,
    cg_tol: f64,
    fft: FftPair,
}

impl<'a> Quad2D<'a> {
    fn new(data: &'a FourierData2D, op: &'a PaOperator, opts: &SolverOpts, n_x: usize) -> Self {
        let denom = if known_all(data) {
            let lam_f = {
                // per-axis eigenvalues of the full-band normal operator
                let known1 = vec![true; 2 * data.n + 1];
                normal_op_eigenvalues(&known1, data.n, n_x)
                    .iter()
                    .map(|&v| v * n_x as f64) // per-axis factor (1/n_x each)
                    .collect::<Vec<f64>>()
            };
            let lam_ltl = gram_eigenvalues(op);
            let mut d = vec![0.0; n_x * n_x];
            for r in 0..n_x {
                for c in 0..n_x {
                    d[r * n_x + c] = opts.mu * lam_f[r] * lam_f[c]
                        / (n_x as f64 * n_x as f64)
                        + opts.rho * (lam_ltl[r] + lam_ltl[c]);
                }
            }
            Some(d)
        } else {
            None
        };
        Quad2D {
            op,
            n_x,
            mu: opts.mu,
            rho: opts.rho,
            denom,
            known: &data.known,
            n: data.n,
            cg_tol: opts.cg_tol,
            fft: FftPair::new(n_x),
        }
    }

    /// Solve `(mu Re F^H F + rho (LtL (x) I + I (x) LtL)) q = rhs`.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if let Some(denom) = &self.denom {
            if denom.iter().any(|&d| d <= 1e-14) {
                return Err(VbjsError::SolverFailure(
                    "quadratic update is singular".into(),
                ));
            }
            let n_x = self.n_x;
            let mut buf: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft2_with(&mut buf, n_x, &self.fft.fwd);
            for (b, &d) in buf.iter_mut().zip(denom) {
                *b /= d;
            }
            fft2_with(&mut buf, n_x, &self.fft.inv);
            let s = 1.0 / (n_x as f64 * n_x as f64);
            Ok(buf.iter().map(|z| z.re * s).collect())
        } else {
            let apply = |q: &[f64]| -> Vec<f64> {
                let mut out = apply_fhf_2d(q, self.known, self.n, self.n_x, &self.fft);
                let lt_l_x = self
                    .op
                    .apply_transpose_cols(
                        &self.op.apply_cols(q, self.n_x, self.n_x).unwrap(),
                        self.n_x,
                        self.n_x,
                    )
                    .unwrap();
                let lt_l_y = self
                    .op
                    .apply_transpose_rows(
                        &self.op.apply_rows(q, self.n_x, self.n_x).unwrap(),
                        self.n_x,
                        self.n_x,
                    )
                    .unwrap();
                for i in 0..out.len() {
                    out[i] = self.mu * out[i] + self.rho * (lt_l_x[i] + lt_l_y[i]);
                }
                out
            };
            let target = self.cg_tol * norm(rhs);
            let cap = 20 * self.n_x;
            let (x, _it, resid) = cg(apply, rhs, target, cap);
            if resid > (10.0 * target).max(1e-12 * norm(rhs).max(1.0)) {
                return Err(VbjsError::SolverFailure(format!(
                    "masked quadratic update stalled at residual {resid:.3e}"
                )));
            }
            Ok(x)
        }
    }
}

/// Weighted lp inversion on the 2D grid with directional annihilation
/// penalties sharing one weight field. `p = 1` runs a two-split ADMM,
/// `p = 2` solves the normal equations by conjugate gradients.
pub fn solve_weighted_2d(
    data: &FourierData2D,
    op: &PaOperator,
    w: &[f64],
    p: u32,
    opts: &SolverOpts,
    n_x: usize,
) -> Result<Solution> {
    opts.validate()?;
    if op.n_x != n_x || w.len() != n_x * n_x {
        return Err(VbjsError::DimensionMismatch(format!(
            "operator {} / weights {} vs grid {n_x}",
            op.n_x,
            w.len()
        )));
    }
    if n_x <= 2 * data.n {
        return Err(VbjsError::InvalidParam(
            "grid must oversample the band".into(),
        ));
    }
    if w.iter().any(|&v| v < 0.0) {
        return Err(VbjsError::InvalidParam("weights must be nonnegative".into()));
    }
    match p {
        1 => solve_2d_l1(data, op, w, opts, n_x),
        2 => solve_2d_l2(data, op, w, opts, n_x),
        _ => Err(VbjsError::InvalidParam(format!("p must be 1 or 2, got {p}"))),
    }
}

fn solve_2d_l1(
    data: &FourierData2D,
    op: &PaOperator,
    w: &[f64],
    opts: &SolverOpts,
    n_x: usize,
) -> Result<Solution> {
    let quad = Quad2D::new(data, op, opts, n_x);
    let rhs_data = rhs_data_2d(data, n_x, opts.mu);
    let cells = n_x * n_x;
    let thr: Vec<f64> = w.iter().map(|&v| v / opts.rho).collect();
    let stop = opts.tol * n_x as f64; // sqrt of cell count
    let mut q = vec![0.0; cells];
    let (mut zx, mut zy) = (vec![0.0; cells], vec![0.0; cells]);
    let (mut ux, mut uy) = (vec![0.0; cells], vec![0.0; cells]);
    let mut info = SolveInfo {
        iterations: 0,
        converged: false,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
    };
    for it in 0..opts.max_iter {
        info.iterations = it + 1;
        let mut ax = vec![0.0; cells];
        let mut ay = vec![0.0; cells];
        for i in 0..cells {
            ax[i] = zx[i] - ux[i];
            ay[i] = zy[i] - uy[i];
        }
        let tx = op.apply_transpose_cols(&ax, n_x, n_x)?;
        let ty = op.apply_transpose_rows(&ay, n_x, n_x)?;
        let mut rhs = vec![0.0; cells];
        for i in 0..cells {
            rhs[i] = rhs_data[i] + opts.rho * (tx[i] + ty[i]);
        }
        q = quad.solve(&rhs)?;
        let lx = op.apply_cols(&q, n_x, n_x)?;
        let ly = op.apply_rows(&q, n_x, n_x)?;
        let (zx_old, zy_old) = (zx.clone(), zy.clone());
        for i in 0..cells {
            zx[i] = soft(lx[i] + ux[i], thr[i]);
            ux[i] += lx[i] - zx[i];
            zy[i] = soft(ly[i] + uy[i], thr[i]);
            uy[i] += ly[i] - zy[i];
        }
        let r = (0..cells)
            .map(|i| (lx[i] - zx[i]).powi(2) + (ly[i] - zy[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let dzx: Vec<f64> = zx.iter().zip(&zx_old).map(|(&a, &b)| a - b).collect();
        let dzy: Vec<f64> = zy.iter().zip(&zy_old).map(|(&a, &b)| a - b).collect();
        let sx = op.apply_transpose_cols(&dzx, n_x, n_x)?;
        let sy = op.apply_transpose_rows(&dzy, n_x, n_x)?;
        let s = opts.rho
            * (0..cells)
                .map(|i| sx[i].powi(2) + sy[i].powi(2))
                .sum::<f64>()
                .sqrt();
        info.primal_residual = r;
        info.dual_residual = s;
        if r <= stop && s <= stop {
            info.converged = true;
            break;
        }
    }
    Ok(Solution { q, info })
}

fn solve_2d_l2(
    data: &FourierData2D,
    op: &PaOperator,
    w: &[f64],
    opts: &SolverOpts,
    n_x: usize,
) -> Result<Solution> {
    let w2: Vec<f64> = w.iter().map(|&v| v * v).collect();
    let fft = FftPair::new(n_x);
    let apply = |q: &[f64]| -> Vec<f64> {
        let mut out = apply_fhf_2d(q, &data.known, data.n, n_x, &fft);
        let mut lx = op.apply_cols(q, n_x, n_x).unwrap();
        for (v, &s) in lx.iter_mut().zip(&w2) {
            *v *= s;
        }
        let tx = op.apply_transpose_cols(&lx, n_x, n_x).unwrap();
        let mut ly = op.apply_rows(q, n_x, n_x).unwrap();
        for (v, &s) in ly.iter_mut().zip(&w2) {
            *v *= s;
        }
        let ty = op.apply_transpose_rows(&ly, n_x, n_x).unwrap();
        for i in 0..out.len() {
            out[i] = opts.mu * out[i] + tx[i] + ty[i];
        }
        out
    };
    let b = rhs_data_2d(data, n_x, opts.mu);
    let dn = data
        .coeffs
        .iter()
        .zip(&data.known)
        .filter(|(_, &k)| k)
        .map(|(c, _)| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let grad_limit = 1e-8 * opts.mu.max(1.0) * dn;
    let target = (opts.cg_tol * norm(&b)).min(grad_limit.max(f64::MIN_POSITIVE));
    let (q, iters, resid) = cg(&apply, &b, target, 20 * n_x);
    let grad: Vec<f64> = apply(&q).iter().zip(&b).map(|(&a, &c)| a - c).collect();
    let gn = norm(&grad);
    if gn > grad_limit.max(target) {
        return Err(VbjsError::SolverFailure(format!(
            "2d cg stalled after {iters} iterations, residual {resid:.3e}"
        )));
    }
    Ok(Solution {
        q,
        info: SolveInfo {
            iterations: iters,
            converged: true,
            primal_residual: gn,
            dual_residual: 0.0,
        },
    })
}
