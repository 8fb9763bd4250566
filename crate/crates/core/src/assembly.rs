//! Galerkin assembly: derivative matrices `Q` and `P`, the Hermite number
//! operator `N`, the rigidity matrix of the generator, the normalized
//! mean-one vector and the bordered saddle-point matrix, plus the observable
//! coefficient vectors.

use crate::error::{Error, Result};
use crate::model::{mode_frequency, CoefficientVector, Model};
use crate::sparse::SparseMatrix;

/// Position-derivative matrix `Q_{k,k'} = <G_k, d/dq G_{k'}>_nu` on `n_modes`
/// modes. The cosine well has closed-form couplings; any other trigonometric
/// polynomial is assembled by quadrature with a structural frequency band.
pub fn build_q_n(model: &Model, n_modes: usize) -> Result<SparseMatrix> {
    if model.params().potential.is_cosine_well() {
        build_q_cosine_well(model, n_modes)
    } else {
        build_q_quadrature(model, n_modes)
    }
}

pub fn build_q(model: &Model) -> Result<SparseMatrix> {
    build_q_n(model, model.params().n_q_modes())
}

/// Closed-form derivative couplings for `V' = sin q`:
/// the first Fourier pair mixes with the constant mode at `beta / (2 sqrt 2)`
/// and all other couplings sit at offsets 1 and 3 with weights `k` and
/// `beta / 4`.
fn build_q_cosine_well(model: &Model, n_modes: usize) -> Result<SparseMatrix> {
    let beta = model.params().beta;
    let c = beta / (2.0 * 2.0f64.sqrt());
    let b4 = beta / 4.0;
    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    let mut push = |i: i64, j: usize, v: f64| {
        if i >= 0 && (i as usize) < n_modes {
            t.push((i as usize, j, v));
        }
    };
    for j in 0..n_modes {
        if j == 0 {
            push(1, j, c);
        } else if j == 1 {
            push(0, j, c);
            push(2, j, 1.0);
            push(4, j, -b4);
        } else if j % 2 == 0 {
            let k = (j / 2) as i64;
            push(2 * k - 3, j, -b4);
            push(2 * k - 1, j, -(k as f64));
            push(2 * k + 1, j, b4);
        } else {
            let k = ((j + 1) / 2) as i64;
            push(2 * k - 2, j, b4);
            push(2 * k, j, k as f64);
            push(2 * k + 2, j, -b4);
        }
    }
    SparseMatrix::from_triplets(n_modes, n_modes, &t)
}

/// Quadrature assembly of `Q`, valid for any trigonometric-polynomial
/// potential. Entries outside the frequency band `|freq_i - freq_j| <= deg V`
/// vanish analytically and are dropped after a magnitude sanity check.
pub fn build_q_quadrature(model: &Model, n_modes: usize) -> Result<SparseMatrix> {
    let deg = model.params().potential.max_degree().max(1);
    let g = model.g_table(n_modes);
    let dg = model.g_deriv_table(n_modes);
    let w = model.nu_weights();
    let mut t = Vec::new();
    let mut max_dropped = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n_modes {
        for j in 0..n_modes {
            let mut acc = 0.0;
            for (idx, &wi) in w.iter().enumerate() {
                acc += wi * g[i][idx] * dg[j][idx];
            }
            scale = scale.max(acc.abs());
            let in_band = mode_frequency(i).abs_diff(mode_frequency(j)) <= deg;
            if in_band {
                if acc != 0.0 {
                    t.push((i, j, acc));
                }
            } else {
                max_dropped = max_dropped.max(acc.abs());
            }
        }
    }
    if max_dropped > 1e-10 * scale.max(1.0) {
        return Err(Error::Assembly(format!(
            "quadrature Q has out-of-band magnitude {max_dropped:e}; quadrature under-resolved"
        )));
    }
    SparseMatrix::from_triplets(n_modes, n_modes, &t)
}

/// Momentum-derivative matrix `P_{l,l'} = sqrt(beta l') delta_{l,l'-1}`.
pub fn build_p(l_modes: usize, beta: f64) -> SparseMatrix {
    let t: Vec<(usize, usize, f64)> = (1..l_modes)
        .map(|l| (l - 1, l, (beta * l as f64).sqrt()))
        .collect();
    SparseMatrix::from_triplets(l_modes, l_modes, &t).expect("valid P triplets")
}

/// Hermite number operator diagonal `N_{ll} = l`.
pub fn build_n(l_modes: usize) -> Vec<f64> {
    (0..l_modes).map(|l| l as f64).collect()
}

/// Rigidity matrix of `-L` on the tensor basis, flattened by
/// `zeta(k, l) = k + (2K-1) l`:
/// `L_{kl,k'l'} = -1/beta Q_{k,k'} P_{l',l} + 1/beta Q_{k',k} P_{l,l'}
///  + gamma I_{k,k'} N_{l,l'}`.
pub fn build_rigidity_n(model: &Model, n_q_modes: usize, l_modes: usize) -> Result<SparseMatrix> {
    let beta = model.params().beta;
    let gamma = model.params().gamma;
    let q = build_q_n(model, n_q_modes)?;
    let size = n_q_modes * l_modes;
    let zeta = |k: usize, l: usize| k + n_q_modes * l;
    let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(q.nnz() * 2 * l_modes + size);
    for l in 0..l_modes {
        // fluctuation-dissipation diagonal
        if l > 0 {
            let gl = gamma * l as f64;
            for k in 0..n_q_modes {
                t.push((zeta(k, l), zeta(k, l), gl));
            }
        }
        // Hamiltonian couplings to l-1 and l+1; both signs share the same
        // primitive so the symmetric part cancels exactly in floating point
        if l > 0 {
            let c = (beta * l as f64).sqrt() / beta;
            for (a, b, v) in q.triplets() {
                t.push((zeta(a, l), zeta(b, l - 1), -c * v));
            }
        }
        if l + 1 < l_modes {
            let c = (beta * (l + 1) as f64).sqrt() / beta;
            for (a, b, v) in q.triplets() {
                t.push((zeta(b, l), zeta(a, l + 1), c * v));
            }
        }
    }
    SparseMatrix::from_triplets(size, size, &t)
}

/// Normalized coefficient vector of the projected constant function:
/// `U_{zeta(k,0)} = g_k / ||g||`, zero on all higher Hermite levels.
pub fn build_u(model: &Model) -> Result<Vec<f64>> {
    let g = model.fourier_coefficients_of_one()?;
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm > 0.0, "projected constant cannot vanish for K >= 1");
    let p = model.params();
    let mut u = vec![0.0; p.basis_size()];
    for (k, &gk) in g.iter().enumerate() {
        u[k] = gk / norm;
    }
    Ok(u)
}

/// Bordered saddle-point matrix `[[L, U], [U^T, 0]]`.
pub fn build_augmented(rigidity: &SparseMatrix, u: &[f64]) -> Result<SparseMatrix> {
    let m = rigidity.n_rows();
    if rigidity.n_cols() != m || u.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "rigidity {}x{} vs border length {}",
            rigidity.n_rows(),
            rigidity.n_cols(),
            u.len()
        )));
    }
    let mut t: Vec<(usize, usize, f64)> = rigidity.triplets().collect();
    for (i, &ui) in u.iter().enumerate() {
        if ui != 0.0 {
            t.push((i, m, ui));
            t.push((m, i, ui));
        }
    }
    SparseMatrix::from_triplets(m + 1, m + 1, &t)
}

/// Assembled Galerkin system: matrices, border vector and index hashing for
/// one parameter set.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    model: Model,
    q: SparseMatrix,
    p: SparseMatrix,
    n_diag: Vec<f64>,
    rigidity: SparseMatrix,
    u: Vec<f64>,
    augmented: SparseMatrix,
}

impl GalerkinSystem {
    pub fn assemble(model: Model) -> Result<Self> {
        let params = model.params().clone();
        let q = build_q(&model)?;
        let p = build_p(params.l_modes, params.beta);
        let n_diag = build_n(params.l_modes);
        let rigidity = build_rigidity_n(&model, params.n_q_modes(), params.l_modes)?;
        let u = build_u(&model)?;
        let augmented = build_augmented(&rigidity, &u)?;
        Ok(GalerkinSystem { model, q, p, n_diag, rigidity, u, augmented })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &crate::model::ModelParams {
        self.model.params()
    }

    pub fn q(&self) -> &SparseMatrix {
        &self.q
    }

    pub fn p(&self) -> &SparseMatrix {
        &self.p
    }

    pub fn n_diag(&self) -> &[f64] {
        &self.n_diag
    }

    pub fn rigidity(&self) -> &SparseMatrix {
        &self.rigidity
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn augmented(&self) -> &SparseMatrix {
        &self.augmented
    }

    pub fn zeta(&self, k: usize, l: usize) -> usize {
        k + self.params().n_q_modes() * l
    }

    /// Velocity observable `R(q, p) = p`: since `p = H_1 / sqrt(beta)` and
    /// the position factor is the projected constant, the coefficients are
    /// `Y_{zeta(k,1)} = g_k / sqrt(beta)`.
    pub fn observable_velocity(&self) -> Result<CoefficientVector> {
        let p = self.params();
        let g = self.model.fourier_coefficients_of_one()?;
        let mut y = CoefficientVector::zeros(p.k_modes, p.l_modes);
        let sb = p.beta.sqrt();
        for (k, &gk) in g.iter().enumerate() {
            y.set(k, 1, gk / sb);
        }
        Ok(y)
    }

    /// Rough observable with coefficients
    /// `r_{kl} = max(1,k)^{-5/2} max(1,l)^{-3/2}` on the basis indices.
    pub fn observable_sobolev(&self) -> CoefficientVector {
        let p = self.params();
        let mut y = CoefficientVector::zeros(p.k_modes, p.l_modes);
        for l in 0..p.l_modes {
            for k in 0..p.n_q_modes() {
                let rk = (k.max(1) as f64).powf(-2.5);
                let rl = (l.max(1) as f64).powf(-1.5);
                y.set(k, l, rk * rl);
            }
        }
        y
    }
}
