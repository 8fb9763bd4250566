//! Error decompositions against reference solutions, convergence sweeps,
//! slope fitting and the self-diffusion coefficient.

use crate::assembly::GalerkinSystem;
use crate::diagnostics::spectral_gap;
use crate::error::{Error, Result};
use crate::model::{CoefficientVector, Model, ModelParams};
use crate::solver::{ObservableSpec, PoissonSolver, ReferenceSolution, SolveResult};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;

/// Version tag carried by the row output schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Which projection of the reference defines the reported errors: the plain
/// nested-basis truncation, or the additional mean-zero correction. The two
/// differ by a component that decays faster than any polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorConvention {
    PlainProjection,
    MeanZeroProjection,
}

/// Error decomposition of one solve against a higher-resolution reference.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub k_modes: usize,
    pub l_modes: usize,
    pub beta: f64,
    pub gamma: f64,
    pub observable: String,
    /// `||(1 - Pi_{KL}) Phi_ref||`
    pub approx_err: f64,
    /// `||X - Pi_{KL} Phi_ref||`
    pub consist_err: f64,
    /// `||embed(X) - Phi_ref||`
    pub total_err: f64,
}

/// Decompose the error of `solution` (at the system's shape) against a
/// reference at a finer shape. The two terms are not orthogonal; only the
/// triangle inequality `total <= approx + consist` is guaranteed.
pub fn error_record(
    system: &GalerkinSystem,
    reference: &CoefficientVector,
    solution: &CoefficientVector,
    observable: &ObservableSpec,
    convention: ErrorConvention,
) -> Result<ErrorRecord> {
    let p = system.params();
    let (k, l) = (p.k_modes, p.l_modes);
    let (k_ref, l_ref) = reference.shape();
    if k > k_ref || l > l_ref {
        return Err(Error::ShapeMismatch(format!(
            "solution shape ({k}, {l}) exceeds reference ({k_ref}, {l_ref})"
        )));
    }
    if solution.shape() != (k, l) {
        return Err(Error::ShapeMismatch("solution shape differs from system".into()));
    }
    let mut proj = reference.truncate(k, l)?;
    if convention == ErrorConvention::MeanZeroProjection {
        let mean: f64 = proj.as_slice().iter().zip(system.u()).map(|(a, b)| a * b).sum();
        for (x, u) in proj.as_mut_slice().iter_mut().zip(system.u()) {
            *x -= mean * u;
        }
    }
    let proj_big = proj.embed(k_ref, l_ref)?;
    let approx_err = norm_diff(reference.as_slice(), proj_big.as_slice());
    let consist_err = norm_diff(solution.as_slice(), proj.as_slice());
    let sol_big = solution.embed(k_ref, l_ref)?;
    let total_err = norm_diff(sol_big.as_slice(), reference.as_slice());
    Ok(ErrorRecord {
        k_modes: k,
        l_modes: l,
        beta: p.beta,
        gamma: p.gamma,
        observable: observable.tag(),
        approx_err,
        consist_err,
        total_err,
    })
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Transport coefficient from the coefficient pairing: on an orthonormal
/// basis `<-L^{-1} R, R> = X . Y`.
pub fn self_diffusion(result: &SolveResult, observable: &CoefficientVector) -> f64 {
    result.coefficients.dot(observable)
}

/// Least-squares fit of `log(err)` against `log(x)` (power law) or against
/// `x` in decimal logs (exponential law).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_used: usize,
    /// Points dropped for non-positive values or floor contamination.
    pub n_excluded: usize,
}

fn fit_line(points: &[(f64, f64)]) -> Result<FitResult> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidParams(format!(
            "slope fit needs at least 3 usable points, got {n}"
        )));
    }
    let nf = n as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = nf * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InvalidParams("degenerate abscissae in slope fit".into()));
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;
    let mean_y = sy / nf;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 =
        points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult { slope, intercept, r_squared, n_used: n, n_excluded: 0 })
}

/// Power-law fit `err ~ C x^slope` on positive data, excluding values at or
/// below `floor`.
pub fn fit_loglog_slope(points: &[(f64, f64)], floor: f64) -> Result<FitResult> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, e)| *x > 0.0 && *e > floor && e.is_finite())
        .map(|&(x, e)| (x.ln(), e.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    let mut fit = fit_line(&usable)?;
    fit.n_excluded = excluded;
    Ok(fit)
}

/// Exponential-law fit `err ~ C 10^(slope x)` on positive data.
pub fn fit_semilog_slope(points: &[(f64, f64)], floor: f64) -> Result<FitResult> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > floor && e.is_finite())
        .map(|&(x, e)| (x, e.log10()))
        .collect();
    let excluded = points.len() - usable.len();
    let mut fit = fit_line(&usable)?;
    fit.n_excluded = excluded;
    Ok(fit)
}

/// Sweep axis: basis sizes or friction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    K,
    L,
    Gamma,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::K => "K",
            SweepAxis::L => "L",
            SweepAxis::Gamma => "gamma",
        }
    }
}

/// Sweep configuration: one axis, a sorted grid, optional reference sizes
/// for error decompositions, optional gap and diffusion columns.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub observable: ObservableSpec,
    pub reference: Option<(usize, usize)>,
    pub with_gap: bool,
    pub with_diffusion: bool,
    pub convention: ErrorConvention,
    pub cache_dir: Option<PathBuf>,
}

/// One row of sweep output; optional fields stay empty in the CSV when not
/// applicable, and per-point failures are recorded without aborting the
/// sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub k_modes: usize,
    pub l_modes: usize,
    pub beta: f64,
    pub gamma: f64,
    pub observable: String,
    pub approx_err: Option<f64>,
    pub consist_err: Option<f64>,
    pub total_err: Option<f64>,
    pub gap: Option<f64>,
    pub diffusion: Option<f64>,
    pub residual: Option<f64>,
    pub alpha: Option<f64>,
    pub error: Option<String>,
}

fn params_at(base: &ModelParams, axis: SweepAxis, value: f64) -> Result<ModelParams> {
    match axis {
        SweepAxis::K => {
            let k = value as usize;
            if k as f64 != value || k == 0 {
                return Err(Error::InvalidParams(format!("K grid value {value} is not a positive integer")));
            }
            base.resized(k, base.l_modes)
        }
        SweepAxis::L => {
            let l = value as usize;
            if l as f64 != value || l < 2 {
                return Err(Error::InvalidParams(format!("L grid value {value} is not an integer >= 2")));
            }
            base.resized(base.k_modes, l)
        }
        SweepAxis::Gamma => {
            let mut p = base.clone();
            p.gamma = value;
            p.validate()?;
            Ok(p)
        }
    }
}

fn sweep_point(
    base: &ModelParams,
    cfg: &SweepConfig,
    value: f64,
    reference: Option<&ReferenceSolution>,
) -> Result<SweepRow> {
    let params = params_at(base, cfg.axis, value)?;
    let model = Model::new(params.clone())?;
    let system = GalerkinSystem::assemble(model)?;
    let y = cfg.observable.build(&system)?;
    let solver = PoissonSolver::new(system)?;
    let result = solver.solve(&y)?;

    let mut row = SweepRow {
        axis: cfg.axis.label().to_string(),
        value,
        k_modes: params.k_modes,
        l_modes: params.l_modes,
        beta: params.beta,
        gamma: params.gamma,
        observable: cfg.observable.tag(),
        approx_err: None,
        consist_err: None,
        total_err: None,
        gap: None,
        diffusion: None,
        residual: Some(result.residual),
        alpha: Some(result.alpha),
        error: None,
    };
    if cfg.with_diffusion {
        row.diffusion = Some(self_diffusion(&result, &y));
    }
    let local_ref;
    let reference = match (reference, cfg.reference) {
        (Some(r), _) => Some(r),
        (None, Some((k_ref, l_ref))) => {
            // gamma-dependent references cannot be shared across the grid
            local_ref = crate::solver::reference_solution(
                &params,
                k_ref,
                l_ref,
                &cfg.observable,
                cfg.cache_dir.as_deref(),
            )?;
            Some(&local_ref)
        }
        (None, None) => None,
    };
    if let Some(r) = reference {
        let rec = error_record(
            solver.system(),
            &r.coefficients,
            &result.coefficients,
            &cfg.observable,
            cfg.convention,
        )?;
        row.approx_err = Some(rec.approx_err);
        row.consist_err = Some(rec.consist_err);
        row.total_err = Some(rec.total_err);
    }
    if cfg.with_gap {
        let rep = spectral_gap(solver.system().model(), None)?;
        row.gap = Some(rep.gap);
    }
    Ok(row)
}

/// Run a sweep: the reference (when requested and gamma-independent) is
/// computed once and shared read-only across the grid; points run in the
/// ambient rayon pool; rows keep grid order.
pub fn sweep(base: &ModelParams, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let mut grid = cfg.grid.clone();
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty sweep grid".into()));
    }
    grid.sort_by(|a, b| a.total_cmp(b));

    let shared_ref = match (cfg.reference, cfg.axis) {
        (Some((k_ref, l_ref)), SweepAxis::K | SweepAxis::L) => Some(crate::solver::reference_solution(
            base,
            k_ref,
            l_ref,
            &cfg.observable,
            cfg.cache_dir.as_deref(),
        )?),
        _ => None,
    };

    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&value| {
            sweep_point(base, cfg, value, shared_ref.as_ref()).unwrap_or_else(|e| SweepRow {
                axis: cfg.axis.label().to_string(),
                value,
                k_modes: base.k_modes,
                l_modes: base.l_modes,
                beta: base.beta,
                gamma: base.gamma,
                observable: cfg.observable.tag(),
                approx_err: None,
                consist_err: None,
                total_err: None,
                gap: None,
                diffusion: None,
                residual: None,
                alpha: None,
                error: Some(e.to_string()),
            })
        })
        .collect();
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Fixed CSV schema
/// `axis,value,approx_err,consist_err,total_err,gap,diffusion,residual,alpha`.
pub fn write_sweep_csv(w: &mut impl Write, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "axis,value,approx_err,consist_err,total_err,gap,diffusion,residual,alpha")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            opt(r.approx_err),
            opt(r.consist_err),
            opt(r.total_err),
            opt(r.gap),
            opt(r.diffusion),
            opt(r.residual),
            opt(r.alpha),
        )?;
    }
    Ok(())
}

/// JSON mirror of the sweep rows with the schema version.
pub fn write_sweep_json(w: &mut impl Write, rows: &[SweepRow]) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a> {
        schema_version: u32,
        rows: &'a [SweepRow],
    }
    serde_json::to_writer_pretty(w, &Doc { schema_version: SCHEMA_VERSION, rows })
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrigPotential;
    use crate::solver::reference_solution;

    fn base(k: usize, l: usize) -> ModelParams {
        ModelParams::new(1.0, 1.0, TrigPotential::default(), k, l).unwrap()
    }

    fn assembled(p: &ModelParams) -> GalerkinSystem {
        GalerkinSystem::assemble(Model::new(p.clone()).unwrap()).unwrap()
    }

    #[test]
    fn error_record_degenerate_cases() {
        let p = base(4, 6);
        let sys = assembled(&p);
        let obs = ObservableSpec::Sobolev;
        let reference = reference_solution(&p, 8, 12, &obs, None).unwrap();

        // solution equal to the truncated reference has zero consistency
        let trunc = reference.coefficients.truncate(4, 6).unwrap();
        let rec = error_record(&sys, &reference.coefficients, &trunc, &obs, ErrorConvention::PlainProjection).unwrap();
        assert_eq!(rec.consist_err, 0.0);
        assert!(rec.approx_err > 0.0);
        assert!((rec.total_err - rec.approx_err).abs() < 1e-14);

        // reference fully supported inside (K, L) has zero approximation
        let inside = trunc.embed(8, 12).unwrap();
        let rec2 = error_record(&sys, &inside, &trunc, &obs, ErrorConvention::PlainProjection).unwrap();
        assert_eq!(rec2.approx_err, 0.0);
    }

    #[test]
    fn error_record_triangle_inequality() {
        let p = base(5, 10);
        let sys = assembled(&p);
        let obs = ObservableSpec::Sobolev;
        let reference = reference_solution(&p, 12, 30, &obs, None).unwrap();
        let y = obs.build(&sys).unwrap();
        let result = crate::solver::solve_poisson(&sys, &y).unwrap();
        for conv in [ErrorConvention::PlainProjection, ErrorConvention::MeanZeroProjection] {
            let rec =
                error_record(&sys, &reference.coefficients, &result.coefficients, &obs, conv).unwrap();
            assert!(
                rec.total_err <= rec.approx_err + rec.consist_err + 1e-12,
                "triangle violated: {} > {} + {}",
                rec.total_err,
                rec.approx_err,
                rec.consist_err
            );
            assert!(rec.approx_err > 0.0 && rec.consist_err > 0.0);
        }
    }

    #[test]
    fn conventions_differ_by_superpolynomial_term() {
        let p = base(6, 10);
        let sys = assembled(&p);
        let obs = ObservableSpec::Sobolev;
        let reference = reference_solution(&p, 12, 20, &obs, None).unwrap();
        let y = obs.build(&sys).unwrap();
        let result = crate::solver::solve_poisson(&sys, &y).unwrap();
        let r1 = error_record(&sys, &reference.coefficients, &result.coefficients, &obs, ErrorConvention::PlainProjection).unwrap();
        let r2 = error_record(&sys, &reference.coefficients, &result.coefficients, &obs, ErrorConvention::MeanZeroProjection).unwrap();
        assert!((r1.approx_err - r2.approx_err).abs() < 1e-8);
        assert!((r1.consist_err - r2.consist_err).abs() < 1e-8);
    }

    #[test]
    fn consistency_smaller_than_approximation() {
        // moderate-size version of the rough-observable comparison
        let p = base(8, 50);
        let sys = assembled(&p);
        let obs = ObservableSpec::Sobolev;
        let reference = reference_solution(&p, 40, 200, &obs, None).unwrap();
        let y = obs.build(&sys).unwrap();
        let result = crate::solver::solve_poisson(&sys, &y).unwrap();
        let rec = error_record(&sys, &reference.coefficients, &result.coefficients, &obs, ErrorConvention::PlainProjection).unwrap();
        assert!(
            rec.consist_err < rec.approx_err,
            "consistency {} should sit below approximation {}",
            rec.consist_err,
            rec.approx_err
        );
    }

    #[test]
    fn diffusion_flat_closed_form() {
        for gamma in [0.5, 2.0] {
            let p = ModelParams::new(1.0, gamma, TrigPotential::zero(), 3, 8).unwrap();
            let sys = assembled(&p);
            let y = sys.observable_velocity().unwrap();
            let result = crate::solver::solve_poisson(&sys, &y).unwrap();
            let d = self_diffusion(&result, &y);
            assert!((d - 1.0 / gamma).abs() < 1e-8);
        }
    }

    #[test]
    fn fit_exact_laws() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, (i as f64).powi(-3))).collect();
        let fit = fit_loglog_slope(&pts, 0.0).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 10f64.powf(-1.25 * i as f64))).collect();
        let fit = fit_semilog_slope(&pts, 0.0).unwrap();
        assert!((fit.slope + 1.25).abs() < 1e-12);

        // floor exclusion
        let mut pts: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, (i as f64).powi(-2))).collect();
        pts.push((6.0, 1e-15));
        let fit = fit_loglog_slope(&pts, 1e-12).unwrap();
        assert_eq!(fit.n_excluded, 1);
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!(fit_loglog_slope(&pts[..2], 0.0).is_err());
    }

    #[test]
    fn single_point_sweep_matches_direct_call() {
        let p = base(4, 8);
        let cfg = SweepConfig {
            axis: SweepAxis::K,
            grid: vec![4.0],
            observable: ObservableSpec::Velocity,
            reference: None,
            with_gap: false,
            with_diffusion: true,
            convention: ErrorConvention::PlainProjection,
            cache_dir: None,
        };
        let rows = sweep(&p, &cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let sys = assembled(&p);
        let y = sys.observable_velocity().unwrap();
        let direct = crate::solver::solve_poisson(&sys, &y).unwrap();
        let d = self_diffusion(&direct, &y);
        assert!((rows[0].diffusion.unwrap() - d).abs() < 1e-14);
        assert!(rows[0].error.is_none());
    }

    #[test]
    fn k_sweep_approximation_monotone() {
        let p = base(4, 20);
        let cfg = SweepConfig {
            axis: SweepAxis::K,
            grid: vec![4.0, 8.0, 16.0],
            observable: ObservableSpec::Sobolev,
            reference: Some((24, 40)),
            with_gap: false,
            with_diffusion: false,
            convention: ErrorConvention::PlainProjection,
            cache_dir: None,
        };
        let rows = sweep(&p, &cfg).unwrap();
        assert_eq!(rows.len(), 3);
        let errs: Vec<f64> = rows.iter().map(|r| r.approx_err.unwrap()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn gamma_sweep_diffusion_decreasing() {
        let p = ModelParams::new(1.0, 1.0, TrigPotential::default(), 6, 24).unwrap();
        let cfg = SweepConfig {
            axis: SweepAxis::Gamma,
            grid: vec![0.1, 1.0, 10.0],
            observable: ObservableSpec::Velocity,
            reference: None,
            with_gap: false,
            with_diffusion: true,
            convention: ErrorConvention::PlainProjection,
            cache_dir: None,
        };
        let rows = sweep(&p, &cfg).unwrap();
        let d: Vec<f64> = rows.iter().map(|r| r.diffusion.unwrap()).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn sweep_records_individual_failures() {
        let p = base(4, 8);
        let cfg = SweepConfig {
            axis: SweepAxis::K,
            grid: vec![4.0, 3.5],
            observable: ObservableSpec::Velocity,
            reference: None,
            with_gap: false,
            with_diffusion: false,
            convention: ErrorConvention::PlainProjection,
            cache_dir: None,
        };
        let rows = sweep(&p, &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_some(), "fractional K must fail");
        assert!(rows[1].error.is_none());
    }

    #[test]
    fn csv_schema_and_empties() {
        let p = base(4, 8);
        let cfg = SweepConfig {
            axis: SweepAxis::K,
            grid: vec![4.0],
            observable: ObservableSpec::Velocity,
            reference: None,
            with_gap: false,
            with_diffusion: false,
            convention: ErrorConvention::PlainProjection,
            cache_dir: None,
        };
        let rows = sweep(&p, &cfg).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "axis,value,approx_err,consist_err,total_err,gap,diffusion,residual,alpha"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("K,4,,,,,,"), "{row}");

        let mut jbuf = Vec::new();
        write_sweep_json(&mut jbuf, &rows).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&jbuf).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert!(doc["rows"][0]["residual"].is_number());
    }
}
