//! Batch command-line entry point: flag parsing with optional `key=value`
//! defaults files, subcommand dispatch, output-file and manifest management.
//!
//! Exit codes: 0 on success, 1 on computation errors, 2 on configuration
//! errors.

use crate::analysis::{
    self, ErrorConvention, SweepAxis, SweepConfig,
};
use crate::assembly::GalerkinSystem;
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::mc::{estimate_diffusion, McConfig};
use crate::model::{Model, ModelParams, TrigPotential, DEFAULT_N_QUAD_Q};
use crate::solver::{self, ObservableSpec, PoissonSolver};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Fully resolved run configuration, persisted in the manifest and
/// reparseable from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub beta: f64,
    pub gamma: f64,
    pub potential: TrigPotential,
    pub k_modes: usize,
    pub l_modes: usize,
    pub n_quad_q: usize,
    pub observable: String,
    pub out_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_l: Option<usize>,
    #[serde(default)]
    pub with_gap: bool,
    #[serde(default)]
    pub with_diffusion: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_corr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Run manifest written next to every output set. Timings and the timestamp
/// live here and only here, keeping the data files byte-reproducible.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub version: String,
    pub timings_ms: BTreeMap<String, u128>,
    pub unix_timestamp: u64,
}

#[derive(Parser, Debug)]
#[command(name = "langevin-spectral", version, about = "Spectral solver for Poisson equations of Langevin dynamics on the torus")]
struct CliArgs {
    /// key=value defaults file; explicit flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// worker threads for sweeps and Monte Carlo (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct ModelFlags {
    /// inverse temperature
    #[arg(long)]
    beta: Option<f64>,
    /// friction coefficient
    #[arg(long)]
    gamma: Option<f64>,
    /// half Fourier mode count (basis holds 2K-1 position modes)
    #[arg(long = "K")]
    k: Option<usize>,
    /// Hermite mode count
    #[arg(long = "L")]
    l: Option<usize>,
    /// torus quadrature nodes
    #[arg(long)]
    n_quad: Option<usize>,
    /// potential: "cosine" (1 - cos q), "zero", or "c0=..;a=..,..;b=..,.."
    #[arg(long)]
    potential: Option<String>,
    /// output directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve one Poisson problem and write the solution coefficients
    Solve {
        #[command(flatten)]
        model: ModelFlags,
        /// velocity | sobolev | coeffs:<csv path>
        #[arg(long)]
        observable: Option<String>,
    },
    /// Convergence or friction sweep producing the fixed CSV schema
    Sweep {
        #[command(flatten)]
        model: ModelFlags,
        /// K | L | gamma
        #[arg(long)]
        axis: Option<String>,
        /// comma-separated grid values
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        observable: Option<String>,
        /// reference K for error columns
        #[arg(long = "ref-K")]
        ref_k: Option<usize>,
        /// reference L for error columns
        #[arg(long = "ref-L")]
        ref_l: Option<usize>,
        #[arg(long, default_value_t = false)]
        with_gap: bool,
        #[arg(long, default_value_t = false)]
        with_diffusion: bool,
        /// plain | mean-zero
        #[arg(long)]
        convention: Option<String>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Spectral gap of the discretized generator
    Gap {
        #[command(flatten)]
        model: ModelFlags,
        /// modulus threshold for discarding the spurious mean mode
        #[arg(long)]
        drop_tol: Option<f64>,
    },
    /// Self-diffusion coefficient from the velocity observable
    Diffusion {
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Truncation certificates and gap report as one JSON record
    Diagnose {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, default_value_t = false)]
        skip_gap: bool,
    },
    /// Cross-validate the spectral diffusion against the Green-Kubo
    /// Monte Carlo estimate
    McValidate {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_corr: Option<f64>,
        #[arg(long)]
        n_traj: Option<usize>,
    },
    /// Write an assembled matrix in MatrixMarket coordinate format
    ExportMatrix {
        #[command(flatten)]
        model: ModelFlags,
        /// rigidity | augmented | q | p | one-minus-lovd
        #[arg(long)]
        matrix: Option<String>,
    },
}

/// key=value defaults file: one pair per line, `#` comments.
struct FileDefaults(BTreeMap<String, String>);

impl FileDefaults {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!("{}:{}: expected key=value", path.display(), i + 1))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(FileDefaults(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value for {key}: {s}"))),
        }
    }
}

/// Explicit flags take precedence over the defaults file.
fn or_file<T: std::str::FromStr>(
    cli: Option<T>,
    file: &FileDefaults,
    key: &str,
) -> Result<Option<T>> {
    if cli.is_some() {
        return Ok(cli);
    }
    file.get(key)
}

fn parse_potential(s: &str) -> Result<TrigPotential> {
    match s.trim() {
        "cosine" | "default" => Ok(TrigPotential::default()),
        "zero" | "flat" => Ok(TrigPotential::zero()),
        spec => {
            let mut c0 = 0.0;
            let mut a = Vec::new();
            let mut b = Vec::new();
            for part in spec.split(';') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let (key, val) = part
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("bad potential component: {part}")))?;
                let parse_list = |v: &str| -> Result<Vec<f64>> {
                    if v.trim().is_empty() {
                        return Ok(vec![]);
                    }
                    v.split(',')
                        .map(|x| {
                            x.trim()
                                .parse()
                                .map_err(|_| Error::Config(format!("bad potential number: {x}")))
                        })
                        .collect()
                };
                match key.trim() {
                    "c0" => c0 = val.trim().parse().map_err(|_| Error::Config(format!("bad c0: {val}")))?,
                    "a" => a = parse_list(val)?,
                    "b" => b = parse_list(val)?,
                    other => return Err(Error::Config(format!("unknown potential key: {other}"))),
                }
            }
            Ok(TrigPotential { c0, a, b })
        }
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad grid value: {x}")))
        })
        .collect()
}

fn parse_observable(tag: &str) -> Result<ObservableSpec> {
    match tag {
        "velocity" => Ok(ObservableSpec::Velocity),
        "sobolev" => Ok(ObservableSpec::Sobolev),
        other => {
            if let Some(path) = other.strip_prefix("coeffs:") {
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open {path}: {e}")))?;
                Ok(ObservableSpec::Custom(solver::read_coefficients_csv(f)?))
            } else {
                Err(Error::Config(format!(
                    "unknown observable {other}; expected velocity, sobolev or coeffs:<path>"
                )))
            }
        }
    }
}

struct Resolved {
    params: ModelParams,
    out_dir: PathBuf,
    observable_tag: String,
}

fn resolve_model(
    flags: &ModelFlags,
    file: &FileDefaults,
    observable: Option<&str>,
) -> Result<Resolved> {
    let beta = or_file(flags.beta, file, "beta")?.unwrap_or(1.0);
    let gamma = or_file(flags.gamma, file, "gamma")?.unwrap_or(1.0);
    let k = or_file(flags.k, file, "K")?.unwrap_or(10);
    let l = or_file(flags.l, file, "L")?.unwrap_or(40);
    let pot_str =
        or_file(flags.potential.clone(), file, "potential")?.unwrap_or_else(|| "cosine".to_string());
    let potential = parse_potential(&pot_str)?;
    let n_quad = or_file(flags.n_quad, file, "n-quad")?.unwrap_or(0);
    let mut params = ModelParams::new(beta, gamma, potential, k, l).map_err(config_err)?;
    if n_quad > 0 {
        params = params.with_n_quad(n_quad).map_err(config_err)?;
    } else {
        params.n_quad_q = params.n_quad_q.max(DEFAULT_N_QUAD_Q);
    }
    let out_dir = or_file(flags.out_dir.clone(), file, "out-dir")?.unwrap_or_else(|| PathBuf::from("."));
    let observable_tag = or_file(observable.map(str::to_string), file, "observable")?
        .unwrap_or_else(|| "velocity".to_string());
    Ok(Resolved { params, out_dir, observable_tag })
}

fn config_err(e: Error) -> Error {
    Error::Config(e.to_string())
}

fn base_config(cmd: &str, r: &Resolved) -> RunConfig {
    RunConfig {
        command: cmd.to_string(),
        beta: r.params.beta,
        gamma: r.params.gamma,
        potential: r.params.potential.clone(),
        k_modes: r.params.k_modes,
        l_modes: r.params.l_modes,
        n_quad_q: r.params.n_quad_q,
        observable: r.observable_tag.clone(),
        out_dir: r.out_dir.display().to_string(),
        axis: None,
        grid: None,
        ref_k: None,
        ref_l: None,
        with_gap: false,
        with_diffusion: false,
        convention: None,
        cache_dir: None,
        seed: None,
        dt: None,
        t_max: None,
        t_corr: None,
        n_traj: None,
        matrix: None,
        drop_tol: None,
        threads: None,
    }
}

fn write_manifest(out_dir: &Path, config: &RunConfig, timings: BTreeMap<String, u128>) -> Result<()> {
    let manifest = Manifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timings_ms: timings,
        unix_timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let f = std::fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &manifest)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Parse `argv` and execute. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            // clap renders help/version as "errors" with success status
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    let file = match FileDefaults::load(args.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return 2;
        }
    };
    let threads = args
        .threads
        .or_else(|| file.get("threads").ok().flatten());
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("configuration error: cannot build thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&args.cmd, &file, threads)) {
        Ok(()) => 0,
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: &Cmd, file: &FileDefaults, threads: Option<usize>) -> Result<()> {
    match cmd {
        Cmd::Solve { model, observable } => {
            let r = resolve_model(model, file, observable.as_deref())?;
            std::fs::create_dir_all(&r.out_dir)?;
            let spec = parse_observable(&r.observable_tag)?;
            let mut timings = BTreeMap::new();
            let t0 = Instant::now();
            let system = GalerkinSystem::assemble(Model::new(r.params.clone())?)?;
            timings.insert("assemble".into(), t0.elapsed().as_millis());
            let t1 = Instant::now();
            let y = spec.build(&system)?;
            let solver = PoissonSolver::new(system)?;
            let result = solver.solve(&y)?;
            timings.insert("solve".into(), t1.elapsed().as_millis());
            let d = analysis::self_diffusion(&result, &y);
            let mut f = std::io::BufWriter::new(std::fs::File::create(r.out_dir.join("solution.csv"))?);
            solver::write_coefficients_csv(&mut f, &result.coefficients)?;
            let mut config = base_config("solve", &r);
            config.threads = threads;
            write_manifest(&r.out_dir, &config, timings)?;
            println!(
                "solve: K={} L={} gamma={} observable={} D={:e} alpha={:e} residual={:e}",
                r.params.k_modes, r.params.l_modes, r.params.gamma, r.observable_tag, d, result.alpha, result.residual
            );
            Ok(())
        }
        Cmd::Sweep {
            model,
            axis,
            grid,
            observable,
            ref_k,
            ref_l,
            with_gap,
            with_diffusion,
            convention,
            cache_dir,
        } => {
            let r = resolve_model(model, file, observable.as_deref())?;
            std::fs::create_dir_all(&r.out_dir)?;
            let axis_str: String = or_file(axis.clone(), file, "axis")?
                .ok_or_else(|| Error::Config("missing --axis".into()))?;
            let axis_val = match axis_str.as_str() {
                "K" | "k" => SweepAxis::K,
                "L" | "l" => SweepAxis::L,
                "gamma" => SweepAxis::Gamma,
                other => return Err(Error::Config(format!("unknown axis {other}"))),
            };
            let grid_str: String = or_file(grid.clone(), file, "grid")?
                .ok_or_else(|| Error::Config("missing --grid".into()))?;
            let grid_vals = parse_grid(&grid_str)?;
            if grid_vals.is_empty() {
                return Err(Error::Config("empty grid".into()));
            }
            let ref_k = or_file(*ref_k, file, "ref-K")?;
            let ref_l = or_file(*ref_l, file, "ref-L")?;
            let reference = match (ref_k, ref_l) {
                (Some(k), Some(l)) => Some((k, l)),
                (None, None) => None,
                _ => return Err(Error::Config("--ref-K and --ref-L go together".into())),
            };
            let conv_str: Option<String> = or_file(convention.clone(), file, "convention")?;
            let conv = match conv_str.as_deref() {
                None | Some("plain") => ErrorConvention::PlainProjection,
                Some("mean-zero") => ErrorConvention::MeanZeroProjection,
                Some(other) => return Err(Error::Config(format!("unknown convention {other}"))),
            };
            let cache: Option<PathBuf> = cache_dir
                .clone()
                .or_else(|| file.get::<String>("cache-dir").ok().flatten().map(PathBuf::from));
            let spec = parse_observable(&r.observable_tag)?;
            let cfg = SweepConfig {
                axis: axis_val,
                grid: grid_vals.clone(),
                observable: spec,
                reference,
                with_gap: *with_gap,
                with_diffusion: *with_diffusion,
                convention: conv,
                cache_dir: cache.clone(),
            };
            let mut timings = BTreeMap::new();
            let t0 = Instant::now();
            let rows = analysis::sweep(&r.params, &cfg)?;
            timings.insert("sweep".into(), t0.elapsed().as_millis());
            let mut f = std::io::BufWriter::new(std::fs::File::create(r.out_dir.join("sweep.csv"))?);
            analysis::write_sweep_csv(&mut f, &rows)?;
            let mut jf = std::io::BufWriter::new(std::fs::File::create(r.out_dir.join("sweep.json"))?);
            analysis::write_sweep_json(&mut jf, &rows)?;
            let mut config = base_config("sweep", &r);
            config.axis = Some(axis_str);
            config.grid = Some(grid_vals);
            config.ref_k = reference.map(|x| x.0);
            config.ref_l = reference.map(|x| x.1);
            config.with_gap = *with_gap;
            config.with_diffusion = *with_diffusion;
            config.convention = conv_str;
            config.cache_dir = cache.map(|p| p.display().to_string());
            config.threads = threads;
            write_manifest(&r.out_dir, &config, timings)?;
            let failures = rows.iter().filter(|row| row.error.is_some()).count();
            println!("sweep: {} points, {} failures -> sweep.csv", rows.len(), failures);
            Ok(())
        }
        Cmd::Gap { model, drop_tol } => {
            let r = resolve_model(model, file, None)?;
            std::fs::create_dir_all(&r.out_dir)?;
            let drop_tol = or_file(*drop_tol, file, "drop-tol")?;
            let mut timings = BTreeMap::new();
            let t0 = Instant::now();
            let rep = diagnostics::spectral_gap(&Model::new(r.params.clone())?, drop_tol)?;
            timings.insert("gap".into(), t0.elapsed().as_millis());
            write_json(&r.out_dir.join("gap.json"), &rep)?;
            let mut config = base_config("gap", &r);
            config.drop_tol = drop_tol;
            config.threads = threads;
            write_manifest(&r.out_dir, &config, timings)?;
            println!(
                "gap: K={} L={} gamma={} gap={:e} dropped={}",
                r.params.k_modes,
                r.params.l_modes,
                r.params.gamma,
                rep.gap,
                rep.dropped.len()
            );
            Ok(())
        }
        Cmd::Diffusion { model } => {
            let r = resolve_model(model, file, Some("velocity"))?;
            std::fs::create_dir_all(&r.out_dir)?;
            let mut timings = BTreeMap::new();
            let t0 = Instant::now();
            let system = GalerkinSystem::assemble(Model::new(r.params.clone())?)?;
            let y = system.observable_velocity()?;
            let solver = PoissonSolver::new(system)?;
            let result = solver.solve(&y)?;
            let d = analysis::self_diffusion(&result, &y);
            timings.insert("solve".into(), t0.elapsed().as_millis());
            #[derive(Serialize)]
            struct DiffusionOut {
                diffusion: f64,
                alpha: f64,
                residual: f64,
                gamma: f64,
                beta: f64,
                k_modes: usize,
                l_modes: usize,
            }
            write_json(
                &r.out_dir.join("diffusion.json"),
                &DiffusionOut {
                    diffusion: d,
                    alpha: result.alpha,
                    residual: result.residual,
                    gamma: r.params.gamma,
                    beta: r.params.beta,
                    k_modes: r.params.k_modes,
                    l_modes: r.params.l_modes,
                },
            )?;
            let mut config = base_config("diffusion", &r);
            config.threads = threads;
            write_manifest(&r.out_dir, &config, timings)?;
            println!("diffusion: gamma={} D={:e}", r.params.gamma, d);
            Ok(())
        }
        Cmd::Diagnose { model, skip_gap } => {
            let r = resolve_model(model, file, None)?;
            std::fs::create_dir_all(&r.out_dir)?;
            let mut timings = BTreeMap::new();
            let t0 = Instant::now();
            let rep = diagnostics::full_report(&r.params, !*skip_gap)?;
            timings.insert("diagnose".into(), t0.elapsed().as_millis());
            write_json(&r.out_dir.join("diagnostics.json"), &rep)?;
            let mut config = base_config("diagnose", &r);
            config.threads = threads;
            write_manifest(&r.out_dir, &config, timings)?;
            println!(
                "diagnose: K={} L={} off-block {:.3e} <= {:.3e}, condition {:.3e} <= {:.3e}",
                r.params.k_modes,
                r.params.l_modes,
                rep.off_block_norm.computed,
                rep.off_block_norm.bound,
                rep.condition_norm.computed,
                rep.condition_norm.bound
            );
            Ok(())
        }
        Cmd::McValidate { model, seed, dt, t_max, t_corr, n_traj } => {
            let r = resolve_model(model, file, Some("velocity"))?;
            std::fs::create_dir_all(&r.out_dir)?;
            let seed = or_file(*seed, file, "seed")?.unwrap_or(0);
            let mut mc_cfg = McConfig::defaults(r.params.gamma, seed);
            if let Some(v) = or_file(*dt, file, "dt")? {
                mc_cfg.dt = v;
            }
            if let Some(v) = or_file(*t_max, file, "t-max")? {
                mc_cfg.t_max = v;
            }
            if let Some(v) = or_file(*t_corr, file, "t-corr")? {
                mc_cfg.t_corr = v;
            }
            if let Some(v) = or_file(*n_traj, file, "n-traj")? {
                mc_cfg.n_traj = v;
            }
            let mut timings = BTreeMap::new();
            let t0 = Instant::now();
            let system = GalerkinSystem::assemble(Model::new(r.params.clone())?)?;
            let y = system.observable_velocity()?;
            let solver = PoissonSolver::new(system)?;
            let result = solver.solve(&y)?;
            let d_spectral = analysis::self_diffusion(&result, &y);
            timings.insert("spectral".into(), t0.elapsed().as_millis());
            let t1 = Instant::now();
            let est = estimate_diffusion(&r.params, &mc_cfg)?;
            timings.insert("monte_carlo".into(), t1.elapsed().as_millis());
            let agree = (d_spectral - est.value).abs() <= 3.0 * est.stderr;
            #[derive(Serialize)]
            struct McValidateOut {
                d_spectral: f64,
                d_monte_carlo: f64,
                stderr: f64,
                agree_within_3_sigma: bool,
                estimate: McEstimateOut,
            }
            #[derive(Serialize)]
            struct McEstimateOut {
                n_traj: usize,
                dt: f64,
                t_max: f64,
                t_corr: f64,
                rng_seed: u64,
                rng: String,
                t_corr_warning: bool,
            }
            write_json(
                &r.out_dir.join("mc_validate.json"),
                &McValidateOut {
                    d_spectral,
                    d_monte_carlo: est.value,
                    stderr: est.stderr,
                    agree_within_3_sigma: agree,
                    estimate: McEstimateOut {
                        n_traj: est.n_traj,
                        dt: est.dt,
                        t_max: est.t_max,
                        t_corr: est.t_corr,
                        rng_seed: est.rng_seed,
                        rng: est.rng.clone(),
                        t_corr_warning: est.t_corr_warning,
                    },
                },
            )?;
            let mut config = base_config("mc-validate", &r);
            config.seed = Some(seed);
            config.dt = Some(mc_cfg.dt);
            config.t_max = Some(mc_cfg.t_max);
            config.t_corr = Some(mc_cfg.t_corr);
            config.n_traj = Some(mc_cfg.n_traj);
            config.threads = threads;
            write_manifest(&r.out_dir, &config, timings)?;
            println!(
                "mc-validate: spectral D={:e}, MC D={:e} +- {:e}, agree={}",
                d_spectral, est.value, est.stderr, agree
            );
            Ok(())
        }
        Cmd::ExportMatrix { model, matrix } => {
            let r = resolve_model(model, file, None)?;
            std::fs::create_dir_all(&r.out_dir)?;
            let which: String =
                or_file(matrix.clone(), file, "matrix")?.unwrap_or_else(|| "rigidity".to_string());
            let modelv = Model::new(r.params.clone())?;
            let system = GalerkinSystem::assemble(modelv.clone())?;
            let (name, m) = match which.as_str() {
                "rigidity" => ("rigidity", system.rigidity().clone()),
                "augmented" => ("augmented", system.augmented().clone()),
                "q" => ("q", system.q().clone()),
                "p" => ("p", system.p().clone()),
                "one-minus-lovd" => (
                    "one_minus_lovd",
                    diagnostics::build_one_minus_lovd(&modelv, r.params.k_modes)?,
                ),
                other => return Err(Error::Config(format!("unknown matrix {other}"))),
            };
            let path = r.out_dir.join(format!("{name}.mtx"));
            m.write_matrix_market_path(&path)?;
            let mut config = base_config("export-matrix", &r);
            config.matrix = Some(which);
            config.threads = threads;
            write_manifest(&r.out_dir, &config, BTreeMap::new())?;
            println!("export-matrix: wrote {} ({} x {}, {} nonzeros)", path.display(), m.n_rows(), m.n_cols(), m.nnz());
            Ok(())
        }
    }
}
