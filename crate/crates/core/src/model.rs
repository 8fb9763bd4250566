//! Physical model and tensor basis: trigonometric-polynomial potentials, the
//! weighted Fourier modes `G_k` orthonormal in `L^2(nu)`, the Hermite modes
//! `H_l` orthonormal in `L^2(kappa)`, and the quadratures used to assemble
//! inner products against the marginal measures.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Potential `V(q) = c0 + sum_n a_n cos(n q) + b_n sin(n q)` on the torus.
///
/// Restricting to trigonometric polynomials keeps the position-derivative
/// matrix banded; smooth non-polynomial potentials would make it dense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPotential {
    pub c0: f64,
    /// Cosine coefficients `a_n`, index 0 holding `a_1`.
    pub a: Vec<f64>,
    /// Sine coefficients `b_n`, index 0 holding `b_1`.
    pub b: Vec<f64>,
}

impl Default for TrigPotential {
    /// The cosine well `V(q) = 1 - cos(q)`.
    fn default() -> Self {
        TrigPotential { c0: 1.0, a: vec![-1.0], b: vec![] }
    }
}

impl TrigPotential {
    pub fn zero() -> Self {
        TrigPotential { c0: 0.0, a: vec![], b: vec![] }
    }

    pub fn eval(&self, q: f64) -> f64 {
        let mut v = self.c0;
        for (i, &an) in self.a.iter().enumerate() {
            v += an * (((i + 1) as f64) * q).cos();
        }
        for (i, &bn) in self.b.iter().enumerate() {
            v += bn * (((i + 1) as f64) * q).sin();
        }
        v
    }

    pub fn eval_deriv(&self, q: f64) -> f64 {
        let mut v = 0.0;
        for (i, &an) in self.a.iter().enumerate() {
            let n = (i + 1) as f64;
            v -= an * n * (n * q).sin();
        }
        for (i, &bn) in self.b.iter().enumerate() {
            let n = (i + 1) as f64;
            v += bn * n * (n * q).cos();
        }
        v
    }

    /// Largest harmonic with a nonzero coefficient.
    pub fn max_degree(&self) -> usize {
        let da = self.a.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
        let db = self.b.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
        da.max(db)
    }

    /// True when `V'(q) = sin(q)`, the case with closed-form derivative
    /// couplings between the weighted Fourier modes.
    pub fn is_cosine_well(&self) -> bool {
        self.a.len() == 1
            && self.a[0] == -1.0
            && self.b.iter().all(|&x| x == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.a.iter().all(|&x| x == 0.0) && self.b.iter().all(|&x| x == 0.0)
    }
}

/// Physical and discretization parameters.
///
/// `K` counts half the Fourier modes (the basis holds `2K-1` position modes);
/// `L` counts Hermite modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub gamma: f64,
    pub potential: TrigPotential,
    pub k_modes: usize,
    pub l_modes: usize,
    pub n_quad_q: usize,
}

pub const DEFAULT_N_QUAD_Q: usize = 1024;

impl ModelParams {
    pub fn new(beta: f64, gamma: f64, potential: TrigPotential, k_modes: usize, l_modes: usize) -> Result<Self> {
        let n_quad_q = DEFAULT_N_QUAD_Q.max(8 * (k_modes + potential.max_degree()));
        let p = ModelParams { beta, gamma, potential, k_modes, l_modes, n_quad_q };
        p.validate()?;
        Ok(p)
    }

    pub fn with_n_quad(mut self, n_quad_q: usize) -> Result<Self> {
        self.n_quad_q = n_quad_q;
        self.validate()?;
        Ok(self)
    }

    /// Same physics at a different basis size.
    pub fn resized(&self, k_modes: usize, l_modes: usize) -> Result<Self> {
        let mut p = self.clone();
        p.k_modes = k_modes;
        p.l_modes = l_modes;
        p.n_quad_q = p.n_quad_q.max(8 * (k_modes + p.potential.max_degree()));
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.k_modes < 1 {
            return Err(Error::InvalidParams("K must be at least 1".into()));
        }
        if self.l_modes < 2 {
            return Err(Error::InvalidParams("L must be at least 2".into()));
        }
        let min_quad = 8 * (self.k_modes + self.potential.max_degree());
        if self.n_quad_q < min_quad {
            return Err(Error::InvalidParams(format!(
                "n_quad_q = {} is below the resolution floor 8*(K + deg V) = {}",
                self.n_quad_q, min_quad
            )));
        }
        Ok(())
    }

    /// Number of position modes, `2K - 1`.
    pub fn n_q_modes(&self) -> usize {
        2 * self.k_modes - 1
    }

    /// Total basis size `(2K - 1) L`.
    pub fn basis_size(&self) -> usize {
        self.n_q_modes() * self.l_modes
    }
}

/// Fourier frequency of basis index `j`: `G_0` is constant, `G_{2k}` is the
/// cosine mode and `G_{2k-1}` the sine mode of frequency `k`.
pub fn mode_frequency(j: usize) -> usize {
    (j + 1) / 2
}

/// A function of `(q, p)` represented by coefficients on the `G_k (x) H_l`
/// tensor basis, flattened by `zeta(k, l) = k + (2K-1) l`.
///
/// Basis orthonormality makes the Euclidean norm of the coefficients equal to
/// the `L^2(mu)` norm of the represented function.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    k_modes: usize,
    l_modes: usize,
    data: Vec<f64>,
}

impl CoefficientVector {
    pub fn zeros(k_modes: usize, l_modes: usize) -> Self {
        CoefficientVector { k_modes, l_modes, data: vec![0.0; (2 * k_modes - 1) * l_modes] }
    }

    pub fn from_data(k_modes: usize, l_modes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (2 * k_modes - 1) * l_modes {
            return Err(Error::ShapeMismatch(format!(
                "coefficient data length {} does not match (2K-1)L = {}",
                data.len(),
                (2 * k_modes - 1) * l_modes
            )));
        }
        Ok(CoefficientVector { k_modes, l_modes, data })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k_modes, self.l_modes)
    }

    pub fn n_q_modes(&self) -> usize {
        2 * self.k_modes - 1
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flattening index `zeta(k, l) = k + (2K-1) l`, position index fastest.
    pub fn zeta(&self, k: usize, l: usize) -> usize {
        debug_assert!(k < self.n_q_modes() && l < self.l_modes);
        k + self.n_q_modes() * l
    }

    /// Inverse of `zeta`.
    pub fn unzeta(&self, i: usize) -> (usize, usize) {
        (i % self.n_q_modes(), i / self.n_q_modes())
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[self.zeta(k, l)]
    }

    pub fn set(&mut self, k: usize, l: usize, value: f64) {
        let i = self.zeta(k, l);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CoefficientVector) -> f64 {
        assert_eq!(self.shape(), other.shape(), "coefficient shapes differ");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Orthogonal projection onto the nested `(K', L')` basis: coefficients
    /// outside the retained mode range are dropped.
    pub fn truncate(&self, k_modes: usize, l_modes: usize) -> Result<CoefficientVector> {
        if k_modes > self.k_modes || l_modes > self.l_modes {
            return Err(Error::ShapeMismatch(format!(
                "truncation target ({k_modes}, {l_modes}) exceeds shape ({}, {})",
                self.k_modes, self.l_modes
            )));
        }
        let mut out = CoefficientVector::zeros(k_modes, l_modes);
        for l in 0..l_modes {
            for k in 0..(2 * k_modes - 1) {
                out.set(k, l, self.get(k, l));
            }
        }
        Ok(out)
    }

    /// Zero-padding embedding into a larger `(K', L')` basis.
    pub fn embed(&self, k_modes: usize, l_modes: usize) -> Result<CoefficientVector> {
        if k_modes < self.k_modes || l_modes < self.l_modes {
            return Err(Error::ShapeMismatch(format!(
                "embedding target ({k_modes}, {l_modes}) is smaller than shape ({}, {})",
                self.k_modes, self.l_modes
            )));
        }
        let mut out = CoefficientVector::zeros(k_modes, l_modes);
        for l in 0..self.l_modes {
            for k in 0..self.n_q_modes() {
                out.set(k, l, self.get(k, l));
            }
        }
        Ok(out)
    }
}

/// Gauss-Hermite rule matched to the momentum marginal `kappa`.
///
/// `sum_i w_i f(p_i)` integrates `f` against the Gaussian of variance
/// `1/beta`; the rule is exact for polynomials of degree `2n - 1`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch construction from the Jacobi matrix of the probabilists'
    /// Hermite recurrence, with Newton-polished nodes and Christoffel-function
    /// weights. Eigenvector-based weights lose absolute accuracy at extreme
    /// nodes, which matters for high-order identities checked to 1e-10.
    pub fn new(n: usize, beta: f64) -> Self {
        assert!(n >= 1);
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let off = (i as f64).sqrt();
            jac[(i - 1, i)] = off;
            jac[(i, i - 1)] = off;
        }
        let eig = jac.symmetric_eigen();
        let mut ys: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ys.sort_by(|a, b| a.total_cmp(b));
        let mut weights = Vec::with_capacity(n);
        for y in ys.iter_mut() {
            for _ in 0..3 {
                let (h, dh) = hermite_value_and_deriv_y(n, *y);
                let step = h / dh;
                if step.is_finite() {
                    *y -= step;
                }
            }
            // Gauss weight through the Christoffel function:
            // w = 1 / sum_{m<n} h_m(y)^2.
            let mut sum = 1.0;
            let mut h_prev = 1.0;
            let mut h = *y;
            if n > 1 {
                sum += h * h;
            }
            for m in 1..n.saturating_sub(1) {
                let next = (*y * h - (m as f64).sqrt() * h_prev) / ((m + 1) as f64).sqrt();
                h_prev = h;
                h = next;
                sum += h * h;
            }
            weights.push(1.0 / sum);
        }
        GaussHermite {
            nodes: ys.iter().map(|y| y / beta.sqrt()).collect(),
            weights,
        }
    }
}

/// Immutable model: parameters plus the quadrature-derived normalization of
/// the position marginal. All evaluation methods are pure.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    z_nu: f64,
    /// Uniform torus nodes.
    quad_nodes: Vec<f64>,
    /// `w e^{-beta V(q_i)} / Z_nu`: quadrature weights of the probability
    /// measure nu.
    nu_weights: Vec<f64>,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_quad_q;
        let w = 2.0 * PI / n as f64;
        let quad_nodes: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let mut z_nu = 0.0;
        for &q in &quad_nodes {
            z_nu += w * (-params.beta * params.potential.eval(q)).exp();
        }
        if !z_nu.is_finite() || z_nu <= 0.0 {
            return Err(Error::InvalidParams(format!("partition function Z_nu = {z_nu} is not usable")));
        }
        let nu_weights = quad_nodes
            .iter()
            .map(|&q| w * (-params.beta * params.potential.eval(q)).exp() / z_nu)
            .collect();
        Ok(Model { params, z_nu, quad_nodes, nu_weights })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Partition function `Z_nu = int_0^{2pi} e^{-beta V}` of the position
    /// marginal, by periodic trapezoidal quadrature.
    pub fn partition_function_nu(&self) -> f64 {
        self.z_nu
    }

    pub fn eval_potential(&self, q: f64) -> f64 {
        self.params.potential.eval(q)
    }

    /// Weighted Fourier mode `G_j(q)`, orthonormal in `L^2(nu)`.
    pub fn eval_g(&self, j: usize, q: f64) -> f64 {
        let weight = (0.5 * self.params.beta * self.params.potential.eval(q)).exp();
        let k = mode_frequency(j) as f64;
        if j == 0 {
            (self.z_nu / (2.0 * PI)).sqrt() * weight
        } else if j % 2 == 0 {
            (self.z_nu / PI).sqrt() * (k * q).cos() * weight
        } else {
            (self.z_nu / PI).sqrt() * (k * q).sin() * weight
        }
    }

    /// Pointwise derivative `d/dq G_j(q)`, used by the quadrature assembly
    /// path and cross-checks.
    pub fn eval_g_deriv(&self, j: usize, q: f64) -> f64 {
        let beta = self.params.beta;
        let weight = (0.5 * beta * self.params.potential.eval(q)).exp();
        let dv = self.params.potential.eval_deriv(q);
        let k = mode_frequency(j) as f64;
        let (trig, trig_d) = if j == 0 {
            (1.0, 0.0)
        } else if j % 2 == 0 {
            ((k * q).cos(), -k * (k * q).sin())
        } else {
            ((k * q).sin(), k * (k * q).cos())
        };
        let norm = if j == 0 { (self.z_nu / (2.0 * PI)).sqrt() } else { (self.z_nu / PI).sqrt() };
        norm * weight * (trig_d + 0.5 * beta * dv * trig)
    }

    /// Hermite mode `H_l(p) = (1/sqrt(l!)) Htilde_l(sqrt(beta) p)`, evaluated
    /// through the normalized three-term recurrence. Stable for l up to 1000;
    /// never touches factorials.
    pub fn eval_h(&self, l: usize, p: f64) -> f64 {
        eval_hermite(l, p, self.params.beta)
    }

    /// Derivative `d/dp H_l(p)` through the differentiated recurrence.
    pub fn eval_h_deriv(&self, l: usize, p: f64) -> f64 {
        eval_hermite_deriv(l, p, self.params.beta)
    }

    /// Inner product against the position marginal `nu`, by the periodic
    /// trapezoidal rule.
    pub fn inner_product_nu(&self, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&q, &w) in self.quad_nodes.iter().zip(&self.nu_weights) {
            let v = f(q) * g(q);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: q });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Inner product against the momentum marginal `kappa`, by Gauss-Hermite
    /// quadrature with at least `2L + 8` nodes.
    pub fn inner_product_kappa(&self, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        let rule = GaussHermite::new(2 * self.params.l_modes + 8, self.params.beta);
        let mut acc = 0.0;
        for (&p, &w) in rule.nodes.iter().zip(&rule.weights) {
            let v = f(p) * g(p);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: p });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    pub fn nu_weights(&self) -> &[f64] {
        &self.nu_weights
    }

    /// Table `G_j(q_i)` for `j < n_modes` at the torus quadrature nodes.
    pub fn g_table(&self, n_modes: usize) -> Vec<Vec<f64>> {
        (0..n_modes)
            .map(|j| self.quad_nodes.iter().map(|&q| self.eval_g(j, q)).collect())
            .collect()
    }

    /// Table `G_j'(q_i)` for `j < n_modes`.
    pub fn g_deriv_table(&self, n_modes: usize) -> Vec<Vec<f64>> {
        (0..n_modes)
            .map(|j| self.quad_nodes.iter().map(|&q| self.eval_g_deriv(j, q)).collect())
            .collect()
    }

    /// Coefficients `g_j = <1, G_j>_nu` of the constant function on the
    /// `2K - 1` retained modes.
    pub fn fourier_coefficients_of_one(&self) -> Result<Vec<f64>> {
        self.fourier_coefficients_of_one_n(self.params.n_q_modes())
    }

    /// Same as [`Self::fourier_coefficients_of_one`] for an arbitrary number
    /// of modes (tail diagnostics need a margin beyond the working basis).
    pub fn fourier_coefficients_of_one_n(&self, n_modes: usize) -> Result<Vec<f64>> {
        let mut g = Vec::with_capacity(n_modes);
        for j in 0..n_modes {
            g.push(self.inner_product_nu(|_| 1.0, |q| self.eval_g(j, q))?);
        }
        let sq: f64 = g.iter().map(|x| x * x).sum();
        if sq > 1.0 + 1e-10 {
            return Err(Error::Assembly(format!(
                "Bessel inequality violated: sum g_j^2 = {sq} > 1; quadrature under-resolved"
            )));
        }
        Ok(g)
    }
}

/// Value and derivative of the orthonormal probabilists' Hermite polynomial
/// `h_n` at `y`, for the Newton polish of quadrature nodes.
fn hermite_value_and_deriv_y(n: usize, y: f64) -> (f64, f64) {
    let mut h_prev = 1.0;
    let mut d_prev = 0.0;
    if n == 0 {
        return (h_prev, d_prev);
    }
    let mut h = y;
    let mut d = 1.0;
    for m in 1..n {
        let s = ((m + 1) as f64).sqrt();
        let r = (m as f64).sqrt();
        let next = (y * h - r * h_prev) / s;
        let dnext = (h + y * d - r * d_prev) / s;
        h_prev = h;
        d_prev = d;
        h = next;
        d = dnext;
    }
    (h, d)
}

/// Orthonormal probabilists' Hermite value `h_l(sqrt(beta) p)`.
fn eval_hermite(l: usize, p: f64, beta: f64) -> f64 {
    let y = beta.sqrt() * p;
    let mut h_prev = 1.0; // h_0
    if l == 0 {
        return h_prev;
    }
    let mut h = y; // h_1
    for m in 1..l {
        let next = (y * h - (m as f64).sqrt() * h_prev) / ((m + 1) as f64).sqrt();
        h_prev = h;
        h = next;
    }
    h
}

fn eval_hermite_deriv(l: usize, p: f64, beta: f64) -> f64 {
    let sb = beta.sqrt();
    let y = sb * p;
    let mut h_prev = 1.0;
    let mut d_prev = 0.0;
    if l == 0 {
        return 0.0;
    }
    let mut h = y;
    let mut d = 1.0;
    for m in 1..l {
        let s = ((m + 1) as f64).sqrt();
        let next = (y * h - (m as f64).sqrt() * h_prev) / s;
        let dnext = (h + y * d - (m as f64).sqrt() * d_prev) / s;
        h_prev = h;
        d_prev = d;
        h = next;
        d = dnext;
    }
    sb * d
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Modified Bessel function `I_n(x)` by its power series; test oracle for
    /// the cosine-potential integrals.
    fn bessel_i(n: usize, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut term = 1.0;
        for m in 1..=n {
            term *= half / m as f64;
        }
        let mut sum = term;
        let x2 = half * half;
        for m in 1..200 {
            term *= x2 / (m as f64 * (m + n) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    fn default_model(k: usize, l: usize) -> Model {
        Model::new(ModelParams::new(1.0, 1.0, TrigPotential::default(), k, l).unwrap()).unwrap()
    }

    fn flat_model(k: usize, l: usize) -> Model {
        Model::new(ModelParams::new(1.0, 1.0, TrigPotential::zero(), k, l).unwrap()).unwrap()
    }

    #[test]
    fn potential_values() {
        let m = default_model(4, 4);
        assert_eq!(m.eval_potential(0.0), 0.0);
        assert!((m.eval_potential(PI) - 2.0).abs() < 1e-15);
        assert!((m.eval_potential(PI / 2.0) - 1.0).abs() < 1e-15);
        // 2 pi periodic
        assert!((m.eval_potential(1.3) - m.eval_potential(1.3 + 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(-1.0, 1.0, TrigPotential::default(), 4, 4).is_err());
        assert!(ModelParams::new(1.0, 0.0, TrigPotential::default(), 4, 4).is_err());
        assert!(ModelParams::new(1.0, 1.0, TrigPotential::default(), 0, 4).is_err());
        assert!(ModelParams::new(1.0, 1.0, TrigPotential::default(), 4, 1).is_err());
        let p = ModelParams::new(1.0, 1.0, TrigPotential::default(), 4, 4).unwrap();
        assert!(p.clone().with_n_quad(8).is_err());
        assert!(p.with_n_quad(64).is_ok());
    }

    #[test]
    fn partition_function_flat() {
        let m = flat_model(4, 4);
        assert!((m.partition_function_nu() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn partition_function_bessel_oracle() {
        // Z = 2 pi e^{-beta} I_0(beta) for V = 1 - cos q.
        let m1 = default_model(4, 4);
        let expect1 = 2.0 * PI * (-1.0f64).exp() * bessel_i(0, 1.0);
        assert!((m1.partition_function_nu() - expect1).abs() < 1e-12 * expect1);
        assert!((expect1 - 2.926).abs() < 1e-3);

        let m2 = Model::new(ModelParams::new(2.0, 1.0, TrigPotential::default(), 4, 4).unwrap()).unwrap();
        let expect2 = 2.0 * PI * (-2.0f64).exp() * bessel_i(0, 2.0);
        assert!((m2.partition_function_nu() - expect2).abs() < 1e-12 * expect2);
    }

    #[test]
    fn g_mode_flat_constant() {
        let m = flat_model(3, 4);
        for q in [0.0, 1.0, 4.2] {
            assert!((m.eval_g(0, q) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn g_modes_orthonormal_by_quadrature() {
        let m = default_model(6, 4);
        for j in 0..=10usize {
            for k in j..=10usize {
                let ip = m.inner_product_nu(|q| m.eval_g(j, q), |q| m.eval_g(k, q)).unwrap();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-12, "<G_{j}, G_{k}> = {ip}");
            }
        }
    }

    #[test]
    fn hermite_values() {
        let m = default_model(3, 6);
        assert_eq!(m.eval_h(0, 1.7), 1.0);
        // Htilde_1(y) = y, so H_1(p) = sqrt(beta) p.
        assert!((m.eval_h(1, 2.0) - 2.0).abs() < 1e-14);
        // Htilde_2(y) = y^2 - 1 over sqrt(2).
        let y = 1.3f64;
        assert!((m.eval_h(2, y) - (y * y - 1.0) / 2.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hermite_orthonormal_by_quadrature() {
        let m = default_model(3, 10);
        for l in 0..=8usize {
            for k in l..=8usize {
                let ip = m.inner_product_kappa(|p| m.eval_h(l, p), |p| m.eval_h(k, p)).unwrap();
                let expect = if l == k { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-12, "<H_{l}, H_{k}> = {ip}");
            }
        }
    }

    #[test]
    fn hermite_large_order_stable() {
        let m = default_model(3, 4);
        let v = m.eval_h(1000, 0.7);
        assert!(v.is_finite());
    }

    #[test]
    fn hermite_derivative_identity() {
        // <H_{l-1}, d/dp H_l>_kappa = sqrt(beta l), derivative from the
        // differentiated recurrence (independent of the lowering identity).
        for beta in [1.0, 2.5] {
            let m = Model::new(ModelParams::new(beta, 1.0, TrigPotential::default(), 3, 40).unwrap()).unwrap();
            for l in 1..=30usize {
                let ip = m
                    .inner_product_kappa(|p| m.eval_h(l - 1, p), |p| m.eval_h_deriv(l, p))
                    .unwrap();
                let expect = (beta * l as f64).sqrt();
                assert!((ip - expect).abs() < 1e-10, "l = {l}: {ip} vs {expect}");
            }
        }
    }

    #[test]
    fn momentum_second_moment() {
        let m = default_model(3, 6);
        let ip = m.inner_product_kappa(|p| p, |p| p).unwrap();
        assert!((ip - 1.0).abs() < 1e-13);
        let one = m.inner_product_nu(|_| 1.0, |_| 1.0).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
        let ip02 = m.inner_product_nu(|q| m.eval_g(0, q), |q| m.eval_g(2, q)).unwrap();
        assert!(ip02.abs() < 1e-13);
    }

    #[test]
    fn non_finite_integrand_reported() {
        let m = default_model(3, 4);
        let r = m.inner_product_nu(|q| 1.0 / (q - m.quad_nodes()[3]), |_| 1.0);
        assert!(matches!(r, Err(Error::NonFiniteIntegrand { .. })));
    }

    #[test]
    fn coefficients_of_one_flat() {
        let m = flat_model(5, 4);
        let g = m.fourier_coefficients_of_one().unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[0] - 1.0).abs() < 1e-13);
        for j in 1..g.len() {
            assert!(g[j].abs() < 1e-13, "g[{j}] = {}", g[j]);
        }
    }

    #[test]
    fn coefficients_of_one_bessel_oracle() {
        let m = default_model(6, 4);
        let g = m.fourier_coefficients_of_one().unwrap();
        let z = m.partition_function_nu();
        // g_0 = sqrt(2 pi / Z) e^{-beta/2} I_0(beta/2)
        let expect0 = (2.0 * PI / z).sqrt() * (-0.5f64).exp() * bessel_i(0, 0.5);
        assert!((g[0] - expect0).abs() < 1e-12, "{} vs {expect0}", g[0]);
        assert!((expect0 - 0.945).abs() < 1e-3);
        // sine modes vanish for even potentials
        for k in (1..g.len()).step_by(2) {
            assert!(g[k].abs() < 1e-13);
        }
        // cosine modes: g_{2k} = sqrt(4 pi / Z) e^{-beta/2} I_k(beta/2) with
        // a sign from a_1 = -1: e^{-beta V / 2} has e^{+(beta/2) cos q}.
        for k in 1..=4usize {
            let expect = (4.0 * PI / z).sqrt() * (-0.5f64).exp() * bessel_i(k, 0.5);
            assert!((g[2 * k] - expect).abs() < 1e-12, "k={k}: {} vs {expect}", g[2 * k]);
        }
        // Bessel inequality
        let sq: f64 = g.iter().map(|x| x * x).sum();
        assert!(sq <= 1.0 && sq > 0.99);
    }

    #[test]
    fn tail_of_one_decays_fast() {
        // 1 - sum g_j^2 times K^8 must decrease while the tail sits above the
        // f64 rounding floor of the partial sums; past that it is pure noise.
        let m = default_model(20, 4);
        let g = m.fourier_coefficients_of_one_n(43).unwrap();
        let mut prev = f64::INFINITY;
        for k in [2usize, 3, 4, 5] {
            let partial: f64 = g[..2 * k - 1].iter().map(|x| x * x).sum();
            let tail = (1.0 - partial).max(0.0);
            assert!(tail > 1e-12, "tail at K={k} already at rounding floor");
            let scaled = tail * (k as f64).powi(8);
            assert!(scaled < prev, "K={k}: tail*K^8 = {scaled} not decreasing");
            prev = scaled;
        }
        let partial6: f64 = g[..11].iter().map(|x| x * x).sum();
        assert!((1.0 - partial6).max(0.0) < 1e-11);
    }

    #[test]
    fn parseval_partial_sums_monotone() {
        let m = default_model(16, 4);
        let phi = |q: f64| (q.cos()).exp();
        let norm2 = m.inner_product_nu(phi, phi).unwrap();
        let mut partial = 0.0;
        let mut prev = 0.0;
        for j in 0..31 {
            let c = m.inner_product_nu(phi, |q| m.eval_g(j, q)).unwrap();
            partial += c * c;
            assert!(partial >= prev - 1e-15);
            assert!(partial <= norm2 + 1e-12);
            prev = partial;
        }
        assert!((norm2 - partial).abs() < 1e-10, "tail {}", norm2 - partial);
    }

    #[test]
    fn coefficient_vector_roundtrip() {
        let mut v = CoefficientVector::zeros(3, 4);
        assert_eq!(v.len(), 20);
        v.set(2, 3, 1.5);
        assert_eq!(v.get(2, 3), 1.5);
        let i = v.zeta(2, 3);
        assert_eq!(v.unzeta(i), (2, 3));
        assert!((v.norm() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn truncate_embed_parseval() {
        let mut v = CoefficientVector::zeros(4, 5);
        for l in 0..5 {
            for k in 0..7 {
                v.set(k, l, (k as f64 + 1.0) * 0.1 - (l as f64) * 0.07);
            }
        }
        let same = v.truncate(4, 5).unwrap();
        assert_eq!(same, v);
        let t = v.truncate(2, 3).unwrap();
        assert!(t.norm() <= v.norm());
        let kept2 = t.norm().powi(2);
        let dropped2: f64 = v.norm().powi(2) - kept2;
        let e = t.embed(4, 5).unwrap();
        let mut diff2 = 0.0;
        for (a, b) in e.as_slice().iter().zip(v.as_slice()) {
            diff2 += (a - b) * (a - b);
        }
        assert!((diff2 - dropped2).abs() < 1e-12);
        assert!(v.truncate(5, 3).is_err());
        assert!(t.embed(1, 1).is_err());
    }
}
