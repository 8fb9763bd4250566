//! Truncation certificates and spectral-gap estimation.
//!
//! Everything here quantifies how the finite tensor basis perturbs the
//! generator: tail masses of the constant function, the norm of the
//! generator applied to the projected constant, the rank-two boundary
//! operator picking up the derivative overflow at the Fourier truncation
//! edge, the off-block norm `||(1 - Pi) L Pi||` with its closed-form bound,
//! the regularized condition norm `||(A + A*) L^{+-}||`, the explicit
//! spectral-gap correction term, and the spectral gap itself.

use crate::assembly::{build_q_n, build_rigidity_n};
use crate::error::{Error, Result};
use crate::model::{Model, ModelParams};
use crate::sparse::{
    dense_complex_eigenvalues, eigs_shift_invert, lu_factorize, operator_norm_2, SparseMatrix,
};
use num_complex::Complex64;
use serde::Serialize;

/// A computed quantity next to its closed-form bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundPair {
    pub computed: f64,
    pub bound: f64,
}

/// Tail mass `||(1 - Pi_{K'}^q) 1||` of the constant function, from the
/// coefficient sequence computed with a margin of at least four extra modes.
pub fn tail_mass_one(model: &Model, k_prime: usize) -> Result<f64> {
    let k_big = (k_prime + 4).max(model.params().k_modes);
    let g = model.fourier_coefficients_of_one_n(2 * k_big - 1)?;
    let partial: f64 = g[..2 * k_prime - 1].iter().map(|x| x * x).sum();
    let tail_sq = 1.0 - partial;
    if tail_sq < -1e-12 {
        return Err(Error::Assembly(format!(
            "negative tail mass {tail_sq:e}: quadrature inconsistent"
        )));
    }
    Ok(tail_sq.max(0.0).sqrt())
}

/// Norm of the generator applied to the normalized projected constant,
/// with its tail-mass bound. The four boundary coefficients of the
/// derivative give
/// `||d/dq Pi_K 1||^2 = (beta^2/16)(g_{2K}^2 + g_{2K-1}^2 + g_{2K-2}^2 + g_{2K-3}^2)`.
pub fn norm_l_u(model: &Model) -> Result<BoundPair> {
    let p = model.params();
    let k = p.k_modes;
    let beta = p.beta;
    let g = model.fourier_coefficients_of_one_n(2 * (k + 2) - 1)?;
    let edge: f64 = [2 * k, 2 * k - 1, 2 * k - 2, 2 * k - 3]
        .iter()
        .map(|&j| g[j] * g[j])
        .sum();
    let dq_norm_sq = beta * beta / 16.0 * edge;
    let proj_sq: f64 = g[..2 * k - 1].iter().map(|x| x * x).sum();
    let computed = (beta * dq_norm_sq / proj_sq).sqrt();

    let tail_km1 = tail_mass_one(model, k - 1)?;
    let tail_k = tail_mass_one(model, k)?;
    let bound =
        (beta.powi(3) / 16.0 * tail_km1.powi(2) / (1.0 - tail_k.powi(2))).sqrt();
    Ok(BoundPair { computed, bound })
}

/// Rank-two boundary operator: the part of `d/dq` that leaves the retained
/// Fourier range,
/// `D phi = (beta/4) (<phi, G_{2K-2}> G_{2K-1} - <phi, G_{2K-3}> G_{2K})`.
/// Input and output live on at least `2K + 1` position coefficients.
pub fn apply_dpm(k: usize, beta: f64, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() < 2 * k + 1 {
        return Err(Error::ShapeMismatch(format!(
            "need at least {} coefficients, got {}",
            2 * k + 1,
            phi.len()
        )));
    }
    let mut out = vec![0.0; phi.len()];
    out[2 * k - 1] = beta / 4.0 * phi[2 * k - 2];
    if 2 * k >= 3 {
        out[2 * k] = -beta / 4.0 * phi[2 * k - 3];
    }
    Ok(out)
}

/// Index split of an extended tensor basis `(n_q_ext, l_ext)` into the
/// retained block `(2K-1, L)` and its complement.
fn split_indices(
    n_q: usize,
    l_modes: usize,
    n_q_ext: usize,
    l_ext: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut retained = Vec::with_capacity(n_q * l_modes);
    let mut complement = Vec::with_capacity(n_q_ext * l_ext - n_q * l_modes);
    for l in 0..l_ext {
        for k in 0..n_q_ext {
            let idx = k + n_q_ext * l;
            if k < n_q && l < l_modes {
                retained.push(idx);
            } else {
                complement.push(idx);
            }
        }
    }
    (retained, complement)
}

/// Off-block operator `(1 - Pi_{KL}) L Pi_{KL}` represented on an extended
/// basis, as a sparse rectangular matrix from the retained block to its
/// complement.
fn off_block(model: &Model, k_ext: usize, l_ext: usize) -> Result<(SparseMatrix, Vec<usize>, Vec<usize>)> {
    let p = model.params();
    if k_ext < p.k_modes + 2 || l_ext < p.l_modes + 2 {
        return Err(Error::ExtensionTooSmall(format!(
            "need K_ext >= K+2 and L_ext >= L+2, got ({k_ext}, {l_ext}) for ({}, {})",
            p.k_modes, p.l_modes
        )));
    }
    let n_q_ext = 2 * k_ext - 1;
    let rig = build_rigidity_n(model, n_q_ext, l_ext)?;
    let (retained, complement) = split_indices(p.n_q_modes(), p.l_modes, n_q_ext, l_ext);
    let block = rig.restrict(&complement, &retained);
    Ok((block, retained, complement))
}

/// Norm of the off-block `||(1 - Pi_{KL}) L Pi_{KL}||` next to the bound
/// `sqrt(L/beta) (K - 1 + beta)`. The image of the off-block fits inside the
/// default extension `(K+2, L+2)`, so the represented norm is exact.
pub fn norm_l_offblock_at(model: &Model, k_ext: usize, l_ext: usize) -> Result<BoundPair> {
    let p = model.params();
    let (block, _, _) = off_block(model, k_ext, l_ext)?;
    let est = operator_norm_2(
        |x, y| block.matvec(x, y),
        |x, y| block.matvec_transpose(x, y),
        block.n_cols(),
        block.n_rows(),
        1e-9,
    );
    if !est.converged {
        return Err(Error::EigsNoConvergence("off-block norm power iteration".into()));
    }
    let bound = (p.l_modes as f64 / p.beta).sqrt() * (p.k_modes as f64 - 1.0 + p.beta);
    Ok(BoundPair { computed: est.value, bound })
}

/// [`norm_l_offblock_at`] at the default extension `(K+2, L+2)`.
pub fn norm_l_offblock(model: &Model) -> Result<BoundPair> {
    let p = model.params();
    norm_l_offblock_at(model, p.k_modes + 2, p.l_modes + 2)
}

/// Band representation of `1 - L_ovd` (the shifted overdamped generator) on
/// `2 K_ext - 1` weighted Fourier modes: entries
/// `delta_{jk} + (1/beta) <G_j', G_k'>`, a width-4 band.
pub fn build_one_minus_lovd(model: &Model, k_ext: usize) -> Result<SparseMatrix> {
    let n = 2 * k_ext - 1;
    let beta = model.params().beta;
    // derivative images reach four modes past the edge
    let q = build_q_n(model, n + 4)?;
    let qt = q.transpose(); // rows of qt are derivative coefficient vectors
    let mut t = Vec::new();
    for j in 0..n {
        for k in j.saturating_sub(4)..(j + 5).min(n) {
            let (cj, vj) = qt.row(j);
            let (ck, vk) = qt.row(k);
            let mut dot = 0.0;
            let mut a = 0;
            let mut b = 0;
            while a < cj.len() && b < ck.len() {
                match cj[a].cmp(&ck[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        dot += vj[a] * vk[b];
                        a += 1;
                        b += 1;
                    }
                }
            }
            let mut v = dot / beta;
            if j == k {
                v += 1.0;
            }
            if v != 0.0 {
                t.push((j, k, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t)
}

/// Condition norm `||(A + A*) (1 - Pi_{KL}) L Pi_{KL}||` on a truncated
/// extended basis, next to the bound `(1 + sqrt 2) beta / (2K)`.
///
/// `A = (1/beta) (1 - L_ovd)^{-1} d/dq* Pi_p d/dp`; on tensor coefficients
/// its action reads the Hermite-1 slice and writes the Hermite-0 slice
/// through `M^{-1} Q^T`, scaled by `1/sqrt(beta)`. The computed value is a
/// truncation of an infinite-dimensional operator norm: `(1 - L_ovd)^{-1}`
/// is compressed to the extended position range, so callers should confirm
/// stability under extension growth (see [`hypo_condition_norm`]).
pub fn hypo_condition_norm_at(model: &Model, k_ext: usize, l_ext: usize) -> Result<BoundPair> {
    let p = model.params();
    if k_ext < 2 * p.k_modes || l_ext < p.l_modes + 2 {
        return Err(Error::ExtensionTooSmall(format!(
            "need K_ext >= 2K and L_ext >= L+2, got ({k_ext}, {l_ext}) for ({}, {})",
            p.k_modes, p.l_modes
        )));
    }
    let beta = p.beta;
    let n_q_ext = 2 * k_ext - 1;
    let (block, _retained, complement) = off_block(model, k_ext, l_ext)?;
    let m = build_one_minus_lovd(model, k_ext)?;
    let m_factors = lu_factorize(&m)?;
    let q_ext = build_q_n(model, n_q_ext)?;

    let ext_len = n_q_ext * l_ext;
    let scatter = complement.clone();
    let sb_inv = 1.0 / beta.sqrt();

    // (A + A*) acting on a full extended coefficient vector: reads the
    // Hermite-0/1 slices, writes them back through M^{-1} and Q.
    let apply_a_plus_astar = |full: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        let slice0: Vec<f64> = (0..n_q_ext).map(|k| full[k]).collect();
        let slice1: Vec<f64> = (0..n_q_ext).map(|k| full[k + n_q_ext]).collect();
        // A: 1/sqrt(beta) M^{-1} Q^T slice1 -> level 0
        let mut qt_s1 = vec![0.0; n_q_ext];
        q_ext.matvec_transpose(&slice1, &mut qt_s1);
        let a_part = m_factors.solve(&qt_s1).expect("M is SPD").x;
        // A*: 1/sqrt(beta) Q M^{-1} slice0 -> level 1
        let m_s0 = m_factors.solve(&slice0).expect("M is SPD").x;
        let mut astar_part = vec![0.0; n_q_ext];
        q_ext.matvec(&m_s0, &mut astar_part);
        for k in 0..n_q_ext {
            out[k] = sb_inv * a_part[k];
            out[k + n_q_ext] = sb_inv * astar_part[k];
        }
    };

    let n_in = block.n_cols();
    let n_compl = block.n_rows();
    let apply = |x: &[f64], out: &mut [f64]| {
        let mut y = vec![0.0; n_compl];
        block.matvec(x, &mut y);
        let mut f = vec![0.0; ext_len];
        for (pos, &idx) in scatter.iter().enumerate() {
            f[idx] = y[pos];
        }
        apply_a_plus_astar(&f, out);
    };
    let apply_t = |z: &[f64], out: &mut [f64]| {
        // (A + A*) is symmetric as a matrix, so the transpose is B^T (A + A*)
        let mut fo = vec![0.0; ext_len];
        apply_a_plus_astar(z, &mut fo);
        let mut y = vec![0.0; n_compl];
        for (pos, &idx) in scatter.iter().enumerate() {
            y[pos] = fo[idx];
        }
        block.matvec_transpose(&y, out);
    };
    let est = operator_norm_2(apply, apply_t, n_in, ext_len, 1e-9);
    if !est.converged {
        return Err(Error::EigsNoConvergence("condition norm power iteration".into()));
    }
    let bound = (1.0 + 2.0f64.sqrt()) * beta / (2.0 * p.k_modes as f64);
    Ok(BoundPair { computed: est.value, bound })
}

/// [`hypo_condition_norm_at`] at the default extension `(2K, L+4)`, with a
/// convergence check: the value recomputed at `(2K+4, L+8)` must agree to a
/// relative `1e-3`.
pub fn hypo_condition_norm(model: &Model) -> Result<BoundPair> {
    let p = model.params();
    let first = hypo_condition_norm_at(model, 2 * p.k_modes, p.l_modes + 4)?;
    let second = hypo_condition_norm_at(model, 2 * p.k_modes + 4, p.l_modes + 8)?;
    let rel = (first.computed - second.computed).abs() / first.computed.max(f64::MIN_POSITIVE);
    if rel > 1e-3 {
        return Err(Error::ExtensionTooSmall(format!(
            "condition norm moved by {rel:e} under extension growth"
        )));
    }
    Ok(first)
}

/// Explicit spectral-gap correction
/// `eps/(1+eps) [ (1+sqrt2) beta / (2K) + (beta^3/16) t_{K-1}^2 / (1 - t_K^2) ]`
/// with `t_K` the tail mass of the constant.
pub fn gap_correction_term(model: &Model, epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParams(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    let p = model.params();
    let k = p.k_modes;
    let beta = p.beta;
    let t_km1 = tail_mass_one(model, k - 1)?;
    let t_k = tail_mass_one(model, k)?;
    let bracket = (1.0 + 2.0f64.sqrt()) * beta / (2.0 * k as f64)
        + beta.powi(3) / 16.0 * t_km1.powi(2) / (1.0 - t_k.powi(2));
    Ok(epsilon / (1.0 + epsilon) * bracket)
}

/// Weight applied to the user-level epsilon: the modified-norm parameter
/// scales as `min(gamma, 1/gamma)`.
pub const EPSILON_BAR_DEFAULT: f64 = 0.1;

/// Spectral-gap report for one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub gap: f64,
    /// Near-zero eigenvalues discarded as the spurious mean mode, as
    /// `(re, im)` pairs.
    pub dropped: Vec<(f64, f64)>,
    /// Retained eigenvalues nearest zero, as `(re, im)` pairs.
    pub retained: Vec<(f64, f64)>,
    /// Explicit correction term at `epsilon = 0.1 min(gamma, 1/gamma)`.
    pub correction: f64,
    pub drop_tol: f64,
    /// Gap recomputed by the dense path when the matrix is small enough.
    pub dense_gap: Option<f64>,
    pub k_modes: usize,
    pub l_modes: usize,
    pub beta: f64,
    pub gamma: f64,
}

/// Size limit for the dense cross-check of the spectral gap.
const DENSE_CHECK_LIMIT: usize = 2000;

/// Spectral gap of the discretized generator: eigenvalues of the unaugmented
/// rigidity matrix nearest zero via shift-invert Arnoldi, with eigenvalues of
/// modulus below `drop_tol` discarded as the spurious mean mode. The shift
/// sits slightly left of the spectrum so the exactly singular matrix still
/// factorizes.
pub fn spectral_gap(model: &Model, drop_tol: Option<f64>) -> Result<GapReport> {
    let p = model.params().clone();
    let rig = build_rigidity_n(model, p.n_q_modes(), p.l_modes)?;
    let drop_tol = drop_tol.unwrap_or(1e-8 * rig.norm_1());
    let n = rig.n_rows();
    let shift = Complex64::new(-0.01 * p.gamma.min(1.0 / p.gamma), 0.0);

    let mut n_eigs = 8.min(n - 1).max(2);
    let mut report = None;
    for _ in 0..4 {
        let eigs = eigs_shift_invert(&rig, shift, n_eigs, 1e-10)?;
        let (dropped, retained): (Vec<Complex64>, Vec<Complex64>) =
            eigs.into_iter().partition(|l| l.norm() <= drop_tol);
        if retained.is_empty() {
            return Err(Error::EigsNoConvergence(format!(
                "no eigenvalue survived the drop threshold {drop_tol:e}"
            )));
        }
        let gap = retained.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);

        let dense_gap = if n <= DENSE_CHECK_LIMIT {
            let all = dense_complex_eigenvalues(&rig.to_dense());
            let g = all
                .iter()
                .filter(|l| l.norm() > drop_tol)
                .map(|l| l.re)
                .fold(f64::INFINITY, f64::min);
            Some(g)
        } else {
            None
        };

        let correction =
            gap_correction_term(model, EPSILON_BAR_DEFAULT * p.gamma.min(1.0 / p.gamma))?;
        let rep = GapReport {
            gap,
            dropped: dropped.iter().map(|l| (l.re, l.im)).collect(),
            retained: retained.iter().map(|l| (l.re, l.im)).collect(),
            correction,
            drop_tol,
            dense_gap,
            k_modes: p.k_modes,
            l_modes: p.l_modes,
            beta: p.beta,
            gamma: p.gamma,
        };
        // the Krylov window may miss a small-real-part eigenvalue of large
        // modulus; widen and retry when the dense path disagrees
        if let Some(dg) = dense_gap {
            if (gap - dg).abs() > 1e-6 * dg.abs().max(1e-300) && n_eigs < n - 1 {
                n_eigs = (2 * n_eigs).min(n - 1);
                report = Some(rep);
                continue;
            }
        }
        return Ok(rep);
    }
    match report {
        Some(rep) => Err(Error::EigsNoConvergence(format!(
            "Arnoldi gap {} disagrees with dense gap {:?}",
            rep.gap, rep.dense_gap
        ))),
        None => Err(Error::EigsNoConvergence("spectral gap did not stabilize".into())),
    }
}

/// Full certificate report for one parameter set, emitted as one JSON record
/// per `(K, L, gamma)`.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub k_modes: usize,
    pub l_modes: usize,
    pub beta: f64,
    pub gamma: f64,
    pub tail_mass: f64,
    pub norm_l_u: BoundPair,
    pub off_block_norm: BoundPair,
    pub condition_norm: BoundPair,
    pub gap_correction: f64,
    pub gap: Option<GapReport>,
}

pub fn full_report(params: &ModelParams, with_gap: bool) -> Result<DiagnosticsReport> {
    let model = Model::new(params.clone())?;
    let p = model.params();
    let gap = if with_gap { Some(spectral_gap(&model, None)?) } else { None };
    Ok(DiagnosticsReport {
        k_modes: p.k_modes,
        l_modes: p.l_modes,
        beta: p.beta,
        gamma: p.gamma,
        tail_mass: tail_mass_one(&model, p.k_modes)?,
        norm_l_u: norm_l_u(&model)?,
        off_block_norm: norm_l_offblock(&model)?,
        condition_norm: hypo_condition_norm(&model)?,
        gap_correction: gap_correction_term(
            &model,
            EPSILON_BAR_DEFAULT * p.gamma.min(1.0 / p.gamma),
        )?,
        gap,
    })
}
