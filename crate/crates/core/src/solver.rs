//! Saddle-point Poisson solver and high-resolution reference solutions.
//!
//! The bordered system `[[L, U], [U^T, 0]] (X, alpha) = (Y, 0)` is factorized
//! as a whole; the Lagrange multiplier absorbs any mean component of the
//! right-hand side. Every accepted solve is checked against the residual and
//! mean-constraint contracts. Reference solutions are persisted in a
//! self-describing binary cache so parameter sweeps reuse one factorization.

use crate::assembly::GalerkinSystem;
use crate::error::{Error, Result};
use crate::model::{CoefficientVector, Model, ModelParams};
use crate::sparse::lu::{lu_factorize, LuFactors, LuStats};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// Relative residual ceiling for an accepted solve.
pub const RESIDUAL_LIMIT: f64 = 1e-10;
/// Ceiling on `|<X, U>|` for an accepted solve.
pub const CONSTRAINT_LIMIT: f64 = 1e-10;

/// Observable selector: built-in velocity and rough observables, or explicit
/// coefficients supplied by the caller.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableSpec {
    Velocity,
    Sobolev,
    Custom(CoefficientVector),
}

impl ObservableSpec {
    /// Stable tag used in cache keys and output metadata.
    pub fn tag(&self) -> String {
        match self {
            ObservableSpec::Velocity => "velocity".to_string(),
            ObservableSpec::Sobolev => "sobolev".to_string(),
            ObservableSpec::Custom(c) => {
                let mut bytes = Vec::with_capacity(c.len() * 8 + 16);
                let (k, l) = c.shape();
                bytes.extend_from_slice(&(k as u64).to_le_bytes());
                bytes.extend_from_slice(&(l as u64).to_le_bytes());
                for v in c.as_slice() {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                format!("custom-{:016x}", fnv1a(&bytes))
            }
        }
    }

    /// Coefficients of the observable on the system's basis: nested shapes
    /// embed by zero-padding or project by truncation.
    pub fn build(&self, system: &GalerkinSystem) -> Result<CoefficientVector> {
        let (k, l) = (system.params().k_modes, system.params().l_modes);
        match self {
            ObservableSpec::Velocity => system.observable_velocity(),
            ObservableSpec::Sobolev => Ok(system.observable_sobolev()),
            ObservableSpec::Custom(c) => {
                let (ck, cl) = c.shape();
                if ck <= k && cl <= l {
                    c.embed(k, l)
                } else if ck >= k && cl >= l {
                    c.truncate(k, l)
                } else {
                    Err(Error::ShapeMismatch(format!(
                        "custom observable shape ({ck}, {cl}) incomparable with system ({k}, {l})"
                    )))
                }
            }
        }
    }
}

/// Solution of one saddle-point problem.
#[derive(Debug)]
pub struct SolveResult {
    /// Spectral coefficients of the solution.
    pub coefficients: CoefficientVector,
    /// Lagrange multiplier absorbing the mean of the right-hand side.
    pub alpha: f64,
    /// Relative residual of the augmented system, constraint row included.
    pub residual: f64,
    /// Achieved `<X, U>`.
    pub mean_constraint: f64,
    pub factor_stats: LuStats,
}

/// Reusable factorization of the augmented system.
pub struct PoissonSolver {
    system: GalerkinSystem,
    factors: LuFactors,
}

impl PoissonSolver {
    pub fn new(system: GalerkinSystem) -> Result<Self> {
        let factors = lu_factorize(system.augmented()).map_err(|e| match e {
            Error::Singular { col, pivot, threshold } => {
                let p = system.params();
                Error::Assembly(format!(
                    "augmented matrix singular at K={}, L={}, gamma={}: column {col}, pivot {pivot:e} (threshold {threshold:e})",
                    p.k_modes, p.l_modes, p.gamma
                ))
            }
            other => other,
        })?;
        Ok(PoissonSolver { system, factors })
    }

    pub fn system(&self) -> &GalerkinSystem {
        &self.system
    }

    pub fn factor_stats(&self) -> &LuStats {
        self.factors.stats()
    }

    pub fn solve(&self, y: &CoefficientVector) -> Result<SolveResult> {
        let p = self.system.params();
        if y.shape() != (p.k_modes, p.l_modes) {
            return Err(Error::ShapeMismatch(format!(
                "observable shape {:?} does not match system ({}, {})",
                y.shape(),
                p.k_modes,
                p.l_modes
            )));
        }
        let m = p.basis_size();
        let mut rhs = Vec::with_capacity(m + 1);
        rhs.extend_from_slice(y.as_slice());
        rhs.push(0.0);
        let sol = self.factors.solve(&rhs)?;
        if sol.rel_residual > RESIDUAL_LIMIT {
            return Err(Error::ResidualTooLarge { residual: sol.rel_residual, limit: RESIDUAL_LIMIT });
        }
        let alpha = sol.x[m];
        let coefficients = CoefficientVector::from_data(p.k_modes, p.l_modes, sol.x[..m].to_vec())?;
        let mean: f64 = coefficients.as_slice().iter().zip(self.system.u()).map(|(a, b)| a * b).sum();
        if mean.abs() > CONSTRAINT_LIMIT {
            return Err(Error::ConstraintViolation { value: mean.abs(), limit: CONSTRAINT_LIMIT });
        }
        Ok(SolveResult {
            coefficients,
            alpha,
            residual: sol.rel_residual,
            mean_constraint: mean,
            factor_stats: self.factors.stats().clone(),
        })
    }
}

/// One-shot convenience: assemble the factorization, solve, drop the factors.
pub fn solve_poisson(system: &GalerkinSystem, y: &CoefficientVector) -> Result<SolveResult> {
    let solver = PoissonSolver::new(system.clone())?;
    solver.solve(y)
}

/// A persisted high-resolution solution used as the reference in error
/// studies.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub coefficients: CoefficientVector,
    pub residual: f64,
    pub cond_estimate: f64,
    pub min_pivot: f64,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheKey {
    beta_bits: u64,
    gamma_bits: u64,
    pot_c0_bits: u64,
    pot_a_bits: Vec<u64>,
    pot_b_bits: Vec<u64>,
    observable: String,
    k_modes: usize,
    l_modes: usize,
    n_quad_q: usize,
}

impl CacheKey {
    fn new(params: &ModelParams, observable: &ObservableSpec) -> Self {
        CacheKey {
            beta_bits: params.beta.to_bits(),
            gamma_bits: params.gamma.to_bits(),
            pot_c0_bits: params.potential.c0.to_bits(),
            pot_a_bits: params.potential.a.iter().map(|x| x.to_bits()).collect(),
            pot_b_bits: params.potential.b.iter().map(|x| x.to_bits()).collect(),
            observable: observable.tag(),
            k_modes: params.k_modes,
            l_modes: params.l_modes,
            n_quad_q: params.n_quad_q,
        }
    }

    fn file_name(&self) -> String {
        let blob = serde_json::to_vec(self).expect("key serializes");
        format!("ref-{:016x}.bin", fnv1a(&blob))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheHeader {
    key: CacheKey,
    residual: f64,
    cond_estimate: f64,
    min_pivot: f64,
    checksum: u64,
}

const CACHE_MAGIC: &[u8; 8] = b"LSREF001";

/// Solve the Poisson problem at the reference sizes `(K_ref, L_ref)`,
/// reusing a cached solution when the key matches bit-exactly.
pub fn reference_solution(
    params: &ModelParams,
    k_ref: usize,
    l_ref: usize,
    observable: &ObservableSpec,
    cache_dir: Option<&Path>,
) -> Result<ReferenceSolution> {
    let ref_params = params.resized(k_ref, l_ref)?;
    let key = CacheKey::new(&ref_params, observable);
    if let Some(dir) = cache_dir {
        match load_cached(&dir.join(key.file_name()), &key, k_ref, l_ref) {
            Ok(Some(hit)) => return Ok(hit),
            Ok(None) => {}
            Err(_) => {} // corrupt cache entries are recomputed
        }
    }

    let model = Model::new(ref_params)?;
    let system = GalerkinSystem::assemble(model)?;
    let y = observable.build(&system)?;
    let solver = PoissonSolver::new(system)?;
    let result = solver.solve(&y)?;
    let reference = ReferenceSolution {
        coefficients: result.coefficients,
        residual: result.residual,
        cond_estimate: result.factor_stats.cond_estimate,
        min_pivot: result.factor_stats.min_pivot,
        from_cache: false,
    };
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
        store_cached(&dir.join(key.file_name()), &key, &reference)?;
    }
    Ok(reference)
}

fn load_cached(
    path: &Path,
    key: &CacheKey,
    k_ref: usize,
    l_ref: usize,
) -> Result<Option<ReferenceSolution>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let mut len_bytes = [0u8; 4];
    f.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    f.read_exact(&mut header_bytes)?;
    let header: CacheHeader =
        serde_json::from_slice(&header_bytes).map_err(|e| Error::Cache(format!("bad header: {e}")))?;
    if &header.key != key {
        return Ok(None);
    }
    let n = (2 * k_ref - 1) * l_ref;
    let mut data = vec![0u8; n * 8];
    f.read_exact(&mut data)?;
    if fnv1a(&data) != header.checksum {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    let coeffs: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Some(ReferenceSolution {
        coefficients: CoefficientVector::from_data(k_ref, l_ref, coeffs)?,
        residual: header.residual,
        cond_estimate: header.cond_estimate,
        min_pivot: header.min_pivot,
        from_cache: true,
    }))
}

fn store_cached(path: &Path, key: &CacheKey, reference: &ReferenceSolution) -> Result<()> {
    let mut data = Vec::with_capacity(reference.coefficients.len() * 8);
    for v in reference.coefficients.as_slice() {
        data.extend_from_slice(&v.to_le_bytes());
    }
    let header = CacheHeader {
        key: key.clone(),
        residual: reference.residual,
        cond_estimate: reference.cond_estimate,
        min_pivot: reference.min_pivot,
        checksum: fnv1a(&data),
    };
    let header_bytes = serde_json::to_vec(&header).map_err(|e| Error::Cache(e.to_string()))?;
    let tmp: PathBuf = path.with_extension("tmp");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        f.write_all(CACHE_MAGIC)?;
        f.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
        f.write_all(&header_bytes)?;
        f.write_all(&data)?;
        f.flush()?;
    }
    // atomic publish so concurrent readers never see a torn file
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Write coefficients as `k,l,value` CSV rows.
pub fn write_coefficients_csv(w: &mut impl Write, c: &CoefficientVector) -> Result<()> {
    writeln!(w, "k,l,value")?;
    let (_, l_modes) = c.shape();
    for l in 0..l_modes {
        for k in 0..c.n_q_modes() {
            writeln!(w, "{},{},{:e}", k, l, c.get(k, l))?;
        }
    }
    Ok(())
}

/// Read a `k,l,value` CSV into a coefficient vector; the shape is the
/// smallest one containing every listed index.
pub fn read_coefficients_csv(r: impl Read) -> Result<CoefficientVector> {
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let content = std::io::read_to_string(r)?;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with('k')) {
            continue;
        }
        let mut it = line.split(',');
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
        let k: usize = it.next().ok_or_else(|| bad("k"))?.trim().parse().map_err(|_| bad("k"))?;
        let l: usize = it.next().ok_or_else(|| bad("l"))?.trim().parse().map_err(|_| bad("l"))?;
        let v: f64 =
            it.next().ok_or_else(|| bad("value"))?.trim().parse().map_err(|_| bad("value"))?;
        entries.push((k, l, v));
    }
    if entries.is_empty() {
        return Err(Error::Parse("no coefficient rows".into()));
    }
    let max_k = entries.iter().map(|e| e.0).max().unwrap();
    let max_l = entries.iter().map(|e| e.1).max().unwrap();
    let k_modes = max_k / 2 + 1;
    let mut c = CoefficientVector::zeros(k_modes, max_l + 1);
    for (k, l, v) in entries {
        c.set(k, l, v);
    }
    Ok(c)
}
