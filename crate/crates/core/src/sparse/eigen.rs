//! Operator 2-norms by power iteration and eigenvalues near a shift by
//! shift-invert Arnoldi iteration.

use crate::error::{Error, Result};
use crate::sparse::lu::{lu_factorize, lu_factorize_shifted_complex, GenericLu};
use crate::sparse::matrix::SparseMatrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

/// Result of a power-iteration norm estimate.
#[derive(Debug, Clone, Copy)]
pub struct Norm2Estimate {
    pub value: f64,
    /// False when some restart hit the iteration cap before the tolerance;
    /// the value is then a lower-bound estimate.
    pub converged: bool,
    pub iterations: usize,
}

/// Largest singular value of a (possibly rectangular) operator given by its
/// action and transpose action, via power iteration on `A^T A` with
/// randomized starts and three restarts.
pub fn operator_norm_2(
    apply: impl Fn(&[f64], &mut [f64]),
    apply_transpose: impl Fn(&[f64], &mut [f64]),
    n_in: usize,
    n_out: usize,
    tol: f64,
) -> Norm2Estimate {
    let tol = if tol > 0.0 { tol } else { 1e-8 };
    let max_iter = 20_000;
    let mut best = 0.0f64;
    let mut all_converged = true;
    let mut total_iter = 0usize;
    let mut w = vec![0.0; n_out];
    let mut z = vec![0.0; n_in];
    for restart in 0..3u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0000 + restart);
        let mut v: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0f64)).collect();
        normalize(&mut v);
        let mut sigma_prev = -1.0f64;
        let mut converged = false;
        for _ in 0..max_iter {
            total_iter += 1;
            apply(&v, &mut w);
            let sigma = norm(&w);
            if sigma == 0.0 {
                // this start lies in the kernel; try another
                converged = true;
                break;
            }
            apply_transpose(&w, &mut z);
            let nz = norm(&z);
            if nz == 0.0 {
                best = best.max(sigma);
                converged = true;
                break;
            }
            for (vi, zi) in v.iter_mut().zip(&z) {
                *vi = zi / nz;
            }
            if (sigma - sigma_prev).abs() <= tol * sigma.max(f64::MIN_POSITIVE) {
                best = best.max(sigma);
                converged = true;
                break;
            }
            sigma_prev = sigma;
            best = best.max(sigma);
        }
        all_converged &= converged;
    }
    Norm2Estimate { value: best, converged: all_converged, iterations: total_iter }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Eigenvalues of a dense real matrix as complex numbers: Householder
/// reduction to Hessenberg form followed by Francis double-shift QR with
/// exceptional shifts and an iteration cap. Matrices with exactly repeated
/// eigenvalue pairs cycle some QR implementations without exceptional
/// shifts, which is why this path is self-contained.
pub fn dense_complex_eigenvalues(d: &DMatrix<f64>) -> Vec<Complex64> {
    let n = d.nrows();
    assert_eq!(n, d.ncols());
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex64::new(d[(0, 0)], 0.0)];
    }
    let mut h = d.clone().hessenberg().unpack_h();
    hqr_eigenvalues(&mut h).expect("QR iteration exceeded the iteration cap")
}

/// Eigenvalues of a real upper-Hessenberg matrix by the classical
/// double-shift QR sweep (EISPACK HQR lineage), eigenvalues only.
fn hqr_eigenvalues(h: &mut DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let mut eigs: Vec<Complex64> = Vec::with_capacity(n);
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0f64;
    'outer: while nn >= 0 {
        let mut its = 0usize;
        loop {
            // deflation scan for a negligible subdiagonal
            let mut l = nn;
            while l >= 1 {
                let s = h[(l as usize - 1, l as usize - 1)].abs() + h[(l as usize, l as usize)].abs();
                let s = if s == 0.0 { anorm } else { s };
                if h[(l as usize, l as usize - 1)].abs() <= eps * s {
                    h[(l as usize, l as usize - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[(nn as usize, nn as usize)];
            if l == nn {
                eigs.push(Complex64::new(x + t, 0.0));
                nn -= 1;
                continue 'outer;
            }
            let mut y = h[(nn as usize - 1, nn as usize - 1)];
            let mut w = h[(nn as usize, nn as usize - 1)] * h[(nn as usize - 1, nn as usize)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let xt = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    eigs.push(Complex64::new(xt + z, 0.0));
                    let second = if z != 0.0 { xt - w / z } else { xt + z };
                    eigs.push(Complex64::new(second, 0.0));
                } else {
                    eigs.push(Complex64::new(xt + p, z));
                    eigs.push(Complex64::new(xt + p, -z));
                }
                nn -= 2;
                continue 'outer;
            }
            if its == 40 {
                return Err(Error::EigsNoConvergence(
                    "dense QR iteration exceeded 40 sweeps per eigenvalue".into(),
                ));
            }
            if its == 10 || its == 20 || its == 30 {
                // exceptional shift breaks cycling on symmetric spectra
                t += x;
                for i in 0..=nn as usize {
                    h[(i, i)] -= x;
                }
                let s = h[(nn as usize, nn as usize - 1)].abs()
                    + h[(nn as usize - 1, nn as usize - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // two consecutive small subdiagonals locate the bulge start
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[(m as usize, m as usize)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(m as usize + 1, m as usize)] + h[(m as usize, m as usize + 1)];
                q = h[(m as usize + 1, m as usize + 1)] - z - rr - ss;
                r = h[(m as usize + 2, m as usize + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[(m as usize, m as usize - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (h[(m as usize - 1, m as usize - 1)].abs()
                        + z.abs()
                        + h[(m as usize + 1, m as usize + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                h[(i as usize, i as usize - 2)] = 0.0;
                if i != m + 2 {
                    h[(i as usize, i as usize - 3)] = 0.0;
                }
            }
            // double QR sweep over rows l..nn
            for k in m..=(nn - 1) {
                if k != m {
                    p = h[(k as usize, k as usize - 1)];
                    q = h[(k as usize + 1, k as usize - 1)];
                    r = if k != nn - 1 { h[(k as usize + 2, k as usize - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        let v = h[(k as usize, k as usize - 1)];
                        h[(k as usize, k as usize - 1)] = -v;
                    }
                } else {
                    h[(k as usize, k as usize - 1)] = -s * x;
                }
                p += s;
                let xx = p / s;
                let yy = q / s;
                let zz = r / s;
                q /= p;
                r /= p;
                for j in (k as usize)..=(nn as usize) {
                    let mut pp = h[(k as usize, j)] + q * h[(k as usize + 1, j)];
                    if k != nn - 1 {
                        pp += r * h[(k as usize + 2, j)];
                        h[(k as usize + 2, j)] -= pp * zz;
                    }
                    h[(k as usize + 1, j)] -= pp * yy;
                    h[(k as usize, j)] -= pp * xx;
                }
                let mmin = if nn < k + 3 { nn as usize } else { k as usize + 3 };
                for i in (l as usize)..=mmin {
                    let mut pp = xx * h[(i, k as usize)] + yy * h[(i, k as usize + 1)];
                    if k != nn - 1 {
                        pp += zz * h[(i, k as usize + 2)];
                        h[(i, k as usize + 2)] -= pp * r;
                    }
                    h[(i, k as usize + 1)] -= pp * q;
                    h[(i, k as usize)] -= pp;
                }
            }
        }
    }
    Ok(eigs)
}

/// The `n_eigs` eigenvalues of `A` closest to `shift`, by Arnoldi iteration
/// on the shift-inverted operator. Every returned eigenvalue carries a
/// directly verified residual `||A v - lambda v|| <= tol * ||A||_1`.
///
/// A factorization failure at the shift is retried at slightly perturbed
/// shifts; an Arnoldi breakdown restarts with a fresh random direction.
pub fn eigs_shift_invert(
    a: &SparseMatrix,
    shift: Complex64,
    n_eigs: usize,
    tol: f64,
) -> Result<Vec<Complex64>> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::ShapeMismatch("eigensolver needs a square matrix".into()));
    }
    let n = a.n_rows();
    if n_eigs == 0 || n_eigs > n {
        return Err(Error::InvalidParams(format!(
            "n_eigs = {n_eigs} out of range for size {n}"
        )));
    }
    let a_norm1 = a.norm_1();
    let resid_limit = tol.max(1e-14) * a_norm1.max(f64::MIN_POSITIVE);

    // perturbed-shift ladder for factorization failures
    let scale = (a_norm1 * 1e-8).max(1e-12);
    let candidates = [
        shift,
        shift + Complex64::new(scale, 0.0),
        shift - Complex64::new(scale, 0.0),
        shift + Complex64::new(100.0 * scale, 0.0),
        shift - Complex64::new(100.0 * scale, 0.0),
        shift + Complex64::new(0.0, 100.0 * scale),
    ];
    let mut factored: Option<(Complex64, ShiftedSolver)> = None;
    let mut last_err = None;
    for &sigma in &candidates {
        match ShiftedSolver::new(a, sigma) {
            Ok(s) => {
                factored = Some((sigma, s));
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((sigma, solver)) = factored else {
        return Err(last_err.unwrap_or_else(|| Error::EigsNoConvergence("no usable shift".into())));
    };

    let mut m = (2 * n_eigs + 10).max(40).min(n);
    for attempt in 0..4u64 {
        let ritz = arnoldi_ritz(&solver, n, m, sigma, 2 * n_eigs + 8, attempt)?;
        // verify residuals in the original problem, nearest-to-shift first
        let mut verified: Vec<(f64, Complex64)> = Vec::new();
        for (lambda, y) in ritz {
            let v = y; // already in original space, normalized
            let r = eig_residual(a, lambda, &v);
            if r <= resid_limit {
                verified.push(((lambda - shift).norm(), lambda));
            }
        }
        verified.sort_by(|a, b| a.0.total_cmp(&b.0));
        verified.dedup_by(|a, b| (a.1 - b.1).norm() <= 1e-12 * (1.0 + b.1.norm()));
        if verified.len() >= n_eigs {
            return Ok(verified.into_iter().take(n_eigs).map(|(_, l)| l).collect());
        }
        m = (2 * m).min(n);
    }
    Err(Error::EigsNoConvergence(format!(
        "could not verify {n_eigs} eigenvalues at residual {resid_limit:e}"
    )))
}

/// Complex factorization of `A - sigma I`, applied as the shift-inverted
/// operator.
struct ShiftedSolver {
    lu: GenericLu<Complex64>,
    real_factors: Option<crate::sparse::lu::LuFactors>,
}

impl ShiftedSolver {
    fn new(a: &SparseMatrix, sigma: Complex64) -> Result<Self> {
        if sigma.im == 0.0 {
            // keep a real factorization for faster applies
            let f = lu_factorize(&a.shifted(sigma.re))?;
            if f.stats().min_pivot < 1e-12 * a.norm_max().max(f64::MIN_POSITIVE) {
                return Err(Error::Singular {
                    col: 0,
                    pivot: f.stats().min_pivot,
                    threshold: 1e-12 * a.norm_max(),
                });
            }
            let lu = lu_factorize_shifted_complex(a, sigma)?;
            return Ok(ShiftedSolver { lu, real_factors: Some(f) });
        }
        let lu = lu_factorize_shifted_complex(a, sigma)?;
        if lu.stats.min_pivot < 1e-12 * a.norm_max().max(f64::MIN_POSITIVE) {
            return Err(Error::Singular {
                col: 0,
                pivot: lu.stats.min_pivot,
                threshold: 1e-12 * a.norm_max(),
            });
        }
        Ok(ShiftedSolver { lu, real_factors: None })
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        if let Some(f) = &self.real_factors {
            let re: Vec<f64> = v.iter().map(|c| c.re).collect();
            let im: Vec<f64> = v.iter().map(|c| c.im).collect();
            let xr = f.solve(&re).expect("sizes match").x;
            let xi = f.solve(&im).expect("sizes match").x;
            xr.into_iter().zip(xi).map(|(r, i)| Complex64::new(r, i)).collect()
        } else {
            self.lu.solve(v).0
        }
    }
}

/// Run `m` Arnoldi steps on the inverted operator and return Ritz pairs
/// `(lambda, v)` mapped back to the original problem, `v` normalized. Only
/// the `want` Ritz values of largest inverted magnitude (nearest the shift)
/// get their eigenvectors extracted.
fn arnoldi_ritz(
    solver: &ShiftedSolver,
    n: usize,
    m: usize,
    sigma: Complex64,
    want: usize,
    seed: u64,
) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    let mut rng = ChaCha12Rng::seed_from_u64(0xa12d_0000 + seed);
    let mut vs: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let mut h = DMatrix::<Complex64>::zeros(m + 1, m);

    let mut v0: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    cnormalize(&mut v0);
    vs.push(v0);

    let mut steps = 0;
    for j in 0..m {
        let mut w = solver.apply(&vs[j]);
        // modified Gram-Schmidt with one re-orthogonalization pass
        for pass in 0..2 {
            for i in 0..=j {
                let hij = cdot(&vs[i], &w);
                if pass == 0 {
                    h[(i, j)] = hij;
                } else {
                    h[(i, j)] += hij;
                }
                for (wk, vk) in w.iter_mut().zip(&vs[i]) {
                    *wk -= hij * vk;
                }
            }
        }
        let nw = cnorm(&w);
        steps = j + 1;
        if nw <= 1e-12 {
            // invariant subspace: continue with a random orthogonal direction
            h[(j + 1, j)] = Complex64::new(0.0, 0.0);
            if j + 1 < m {
                let mut r: Vec<Complex64> = (0..n)
                    .map(|_| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                    .collect();
                for i in 0..=j {
                    let c = cdot(&vs[i], &r);
                    for (rk, vk) in r.iter_mut().zip(&vs[i]) {
                        *rk -= c * vk;
                    }
                }
                cnormalize(&mut r);
                vs.push(r);
            } else {
                vs.push(vec![Complex64::new(0.0, 0.0); n]);
            }
            continue;
        }
        h[(j + 1, j)] = Complex64::new(nw, 0.0);
        for wk in w.iter_mut() {
            *wk /= nw;
        }
        vs.push(w);
    }

    let hm = h.view((0, 0), (steps, steps)).into_owned();
    let mut thetas = complex_matrix_eigenvalues(&hm);
    thetas.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    thetas.truncate(want);
    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
    for theta in thetas {
        if theta.norm() == 0.0 {
            continue;
        }
        let y = hess_eigvec(&hm, theta);
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for (i, vi) in vs.iter().take(steps).enumerate() {
            let yi = y[i];
            for (vk, bk) in v.iter_mut().zip(vi) {
                *vk += yi * bk;
            }
        }
        cnormalize(&mut v);
        let lambda = sigma + Complex64::new(1.0, 0.0) / theta;
        pairs.push((lambda, v));
    }
    Ok(pairs)
}

/// Eigenvalues of a small complex matrix. Real matrices go through the real
/// Schur form directly; genuinely complex ones through the real embedding
/// `[[X, -Y], [Y, X]]`, whose spectrum is the union of the spectrum of
/// `X + iY` and its conjugate, filtered by a residual test.
fn complex_matrix_eigenvalues(h: &DMatrix<Complex64>) -> Vec<Complex64> {
    let m = h.nrows();
    let max_im = h.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let scale = h.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if max_im <= 1e-300 * scale {
        let hr = DMatrix::<f64>::from_fn(m, m, |i, j| h[(i, j)].re);
        return dense_complex_eigenvalues(&hr);
    }
    let mut e = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            e[(i, j)] = h[(i, j)].re;
            e[(i + m, j + m)] = h[(i, j)].re;
            e[(i, j + m)] = -h[(i, j)].im;
            e[(i + m, j)] = h[(i, j)].im;
        }
    }
    let candidates = dense_complex_eigenvalues(&e);
    let mut out: Vec<Complex64> = Vec::new();
    for mu in candidates {
        let y = hess_eigvec(h, mu);
        // Rayleigh-quotient refinement and residual filter
        let hy = h * &y;
        let rho = y.dotc(&hy);
        let mut res = 0.0f64;
        for i in 0..m {
            res += (hy[i] - rho * y[i]).norm_sqr();
        }
        if res.sqrt() <= 1e-8 * scale {
            if !out.iter().any(|&l| (l - rho).norm() <= 1e-8 * scale) {
                out.push(rho);
            }
        }
    }
    out
}

/// Approximate eigenvector of a small complex matrix by two steps of inverse
/// iteration at a slightly displaced shift.
fn hess_eigvec(h: &DMatrix<Complex64>, theta: Complex64) -> DVector<Complex64> {
    let m = h.nrows();
    let jitter = Complex64::new(1e-10 * (1.0 + theta.norm()), 1e-12);
    let mut shifted = h.clone();
    for i in 0..m {
        shifted[(i, i)] -= theta + jitter;
    }
    let lu = shifted.lu();
    let mut y = DVector::<Complex64>::from_element(m, Complex64::new(1.0, 0.0));
    y /= Complex64::new((m as f64).sqrt(), 0.0);
    for _ in 0..2 {
        if let Some(sol) = lu.solve(&y) {
            let nrm = sol.norm();
            if nrm.is_finite() && nrm > 0.0 {
                y = sol / Complex64::new(nrm, 0.0);
            }
        }
    }
    y
}

fn eig_residual(a: &SparseMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = a.n_rows();
    let re: Vec<f64> = v.iter().map(|c| c.re).collect();
    let im: Vec<f64> = v.iter().map(|c| c.im).collect();
    let mut are = vec![0.0; n];
    let mut aim = vec![0.0; n];
    a.matvec(&re, &mut are);
    a.matvec(&im, &mut aim);
    let mut r = 0.0f64;
    for i in 0..n {
        let av = Complex64::new(are[i], aim[i]);
        r += (av - lambda * v[i]).norm_sqr();
    }
    r.sqrt()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn cnormalize(v: &mut [Complex64]) {
    let n = cnorm(v);
    if n > 0.0 {
        for c in v.iter_mut() {
            *c /= n;
        }
    }
}
