//! Stochastic cross-validation: BAOAB integration of the Langevin dynamics
//! and a Green-Kubo estimate of the self-diffusion coefficient from the
//! velocity autocorrelation.

use crate::error::{Error, Result};
use crate::model::{ModelParams, TrigPotential};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;

/// One BAOAB step: half kick, half drift, exact Ornstein-Uhlenbeck momentum
/// refresh with factor `e^{-gamma dt}` and variance `(1 - e^{-2 gamma dt})/beta`,
/// half drift, half kick. Positions wrap to `[0, 2 pi)`.
pub fn baoab_step(
    q: f64,
    p: f64,
    dt: f64,
    beta: f64,
    gamma: f64,
    potential: &TrigPotential,
    rng: &mut impl Rng,
) -> (f64, f64) {
    debug_assert!(dt > 0.0);
    let mut p = p - 0.5 * dt * potential.eval_deriv(q);
    let mut q = q + 0.5 * dt * p;
    let c = (-gamma * dt).exp();
    let noise: f64 = rng.sample(StandardNormal);
    p = c * p + ((1.0 - c * c) / beta).sqrt() * noise;
    q += 0.5 * dt * p;
    p -= 0.5 * dt * potential.eval_deriv(q);
    (q.rem_euclid(2.0 * PI), p)
}

/// Monte Carlo run configuration. Defaults follow the time scales of the
/// friction: correlation window `50 / min(gamma, 1/gamma)` and burn-in
/// `10 / min(gamma, 1/gamma)`.
#[derive(Debug, Clone, Serialize)]
pub struct McConfig {
    pub dt: f64,
    pub t_max: f64,
    pub t_corr: f64,
    pub n_traj: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn defaults(gamma: f64, seed: u64) -> Self {
        let rate = gamma.min(1.0 / gamma);
        McConfig { dt: 1e-2, t_max: 1e4, t_corr: 50.0 / rate, n_traj: 64, seed }
    }
}

/// Green-Kubo estimate with run metadata sufficient to reproduce it exactly.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_traj: usize,
    pub dt: f64,
    pub t_max: f64,
    pub t_corr: f64,
    pub rng_seed: u64,
    /// Generator identifier: trajectory `i` draws from stream `i` of this
    /// counter-based generator.
    pub rng: String,
    /// Set when the averaged autocorrelation has not decayed below its noise
    /// level at the cutoff.
    pub t_corr_warning: bool,
}

/// Velocity autocorrelation `sum_j p_j p_{j+k}` for lags `0..=max_lag`, by
/// zero-padded FFT, normalized per origin count.
fn autocorrelation(p: &[f64], max_lag: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = p.len();
    let size = (2 * n).next_power_of_two();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex64> = p
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    fft.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex64::new(c.norm_sqr(), 0.0);
    }
    ifft.process(&mut buf);
    (0..=max_lag)
        .map(|k| buf[k].re / size as f64 / (n - k) as f64)
        .collect()
}

/// Estimate the self-diffusion `D = int_0^inf E(p_t p_0) dt` by averaging
/// the velocity autocorrelation over all time origins and independent
/// trajectories, trapezoid-integrated up to `t_corr`. The standard error
/// comes from batch means over trajectories.
pub fn estimate_diffusion(params: &ModelParams, cfg: &McConfig) -> Result<McEstimate> {
    params.validate()?;
    if cfg.dt <= 0.0 || cfg.t_max <= 0.0 || cfg.n_traj < 2 {
        return Err(Error::InvalidParams("need dt > 0, t_max > 0, n_traj >= 2".into()));
    }
    if cfg.t_corr > cfg.t_max / 2.0 {
        return Err(Error::InvalidParams(format!(
            "correlation window {} too long for t_max {}",
            cfg.t_corr, cfg.t_max
        )));
    }
    let beta = params.beta;
    let gamma = params.gamma;
    let n_steps = (cfg.t_max / cfg.dt).round() as usize;
    let max_lag = (cfg.t_corr / cfg.dt).round() as usize;
    let burn_steps = (10.0 / gamma.min(1.0 / gamma) / cfg.dt).ceil() as usize;

    let per_traj: Vec<(f64, f64)> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|traj| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(traj as u64 + 1);
            let mut q: f64 = rng.random_range(0.0..2.0 * PI);
            let mut p: f64 = rng.sample::<f64, _>(StandardNormal) / beta.sqrt();
            for _ in 0..burn_steps {
                (q, p) = baoab_step(q, p, cfg.dt, beta, gamma, &params.potential, &mut rng);
            }
            let mut ps = Vec::with_capacity(n_steps);
            for _ in 0..n_steps {
                (q, p) = baoab_step(q, p, cfg.dt, beta, gamma, &params.potential, &mut rng);
                ps.push(p);
            }
            let mut planner = FftPlanner::new();
            let corr = autocorrelation(&ps, max_lag, &mut planner);
            // trapezoid in time
            let mut d = 0.5 * (corr[0] + corr[max_lag]);
            for c in &corr[1..max_lag] {
                d += c;
            }
            d *= cfg.dt;
            // decay check: average of the last 5% of the window
            let tail_start = max_lag - (max_lag / 20).max(1);
            let tail_mean =
                corr[tail_start..].iter().sum::<f64>() / (max_lag - tail_start + 1) as f64;
            (d, tail_mean)
        })
        .collect();

    let n = cfg.n_traj as f64;
    let value = per_traj.iter().map(|x| x.0).sum::<f64>() / n;
    let var = per_traj.iter().map(|x| (x.0 - value).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();

    let tail_mean = per_traj.iter().map(|x| x.1).sum::<f64>() / n;
    let tail_var =
        per_traj.iter().map(|x| (x.1 - tail_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let tail_noise = (tail_var / n).sqrt();
    let t_corr_warning = tail_mean.abs() > 3.0 * tail_noise.max(1e-300);

    Ok(McEstimate {
        value,
        stderr,
        n_traj: cfg.n_traj,
        dt: cfg.dt,
        t_max: cfg.t_max,
        t_corr: cfg.t_corr,
        rng_seed: cfg.seed,
        rng: "chacha12-streams/standard-normal".to_string(),
        t_corr_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(gamma: f64) -> ModelParams {
        ModelParams::new(1.0, gamma, TrigPotential::zero(), 3, 4).unwrap()
    }

    fn cosine(gamma: f64) -> ModelParams {
        ModelParams::new(1.0, gamma, TrigPotential::default(), 3, 4).unwrap()
    }

    #[test]
    fn overdamped_limit_refreshes_momentum() {
        // with e^{-gamma dt} underflowing to zero the new momentum is the
        // fresh Gaussian draw, independent of the old one
        let pot = TrigPotential::zero();
        let mut rng1 = ChaCha12Rng::seed_from_u64(3);
        let mut rng2 = ChaCha12Rng::seed_from_u64(3);
        let (_, p1) = baoab_step(1.0, 5.0, 1.0, 1.0, 1e9, &pot, &mut rng1);
        let (_, p2) = baoab_step(1.0, -17.0, 1.0, 1.0, 1e9, &pot, &mut rng2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn free_flight_without_friction() {
        let pot = TrigPotential::zero();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (q, p) = baoab_step(1.0, 0.7, 0.25, 1.0, 0.0, &pot, &mut rng);
        assert!((q - (1.0 + 0.7 * 0.25)).abs() < 1e-15);
        assert_eq!(p, 0.7);
        // wrapping
        let (q2, _) = baoab_step(6.2, 1.0, 0.5, 1.0, 0.0, &pot, &mut rng);
        assert!((0.0..2.0 * PI).contains(&q2));
    }

    #[test]
    fn equilibrium_momentum_variance() {
        // long single trajectory at the cosine potential: Var(p) ~ 1/beta
        let params = cosine(1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let (mut q, mut p) = (0.5, 0.0);
        let dt = 0.01;
        for _ in 0..2000 {
            (q, p) = baoab_step(q, p, dt, 1.0, 1.0, &params.potential, &mut rng);
        }
        let n = 400_000;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            (q, p) = baoab_step(q, p, dt, 1.0, 1.0, &params.potential, &mut rng);
            s += p;
            s2 += p * p;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        // ~ sqrt(2 tau_corr / T) relative error on the variance
        assert!((var - 1.0).abs() < 0.03, "Var(p) = {var}");
        assert!(mean.abs() < 0.03, "mean p = {mean}");
    }

    #[test]
    fn flat_potential_diffusion_matches_exact() {
        let params = flat(1.0);
        let cfg = McConfig { dt: 0.01, t_max: 2000.0, t_corr: 40.0, n_traj: 16, seed: 42 };
        let est = estimate_diffusion(&params, &cfg).unwrap();
        assert!(
            (est.value - 1.0).abs() <= 3.0 * est.stderr,
            "D = {} +- {}",
            est.value,
            est.stderr
        );
        assert!(est.stderr > 0.0 && est.stderr < 0.1);
        assert!(!est.t_corr_warning, "correlation window should suffice");
    }

    #[test]
    fn seeded_determinism() {
        let params = cosine(1.0);
        let cfg = McConfig { dt: 0.01, t_max: 200.0, t_corr: 20.0, n_traj: 4, seed: 7 };
        let a = estimate_diffusion(&params, &cfg).unwrap();
        let b = estimate_diffusion(&params, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let cfg2 = McConfig { seed: 8, ..cfg };
        let c = estimate_diffusion(&params, &cfg2).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn stderr_shrinks_with_trajectories() {
        let params = flat(1.0);
        let small = McConfig { dt: 0.01, t_max: 500.0, t_corr: 30.0, n_traj: 16, seed: 5 };
        let large = McConfig { n_traj: 64, ..small.clone() };
        let a = estimate_diffusion(&params, &small).unwrap();
        let b = estimate_diffusion(&params, &large).unwrap();
        let ratio = a.stderr / b.stderr;
        // fourfold trajectories halve the error, within sampling noise
        assert!(ratio > 1.3 && ratio < 3.2, "stderr ratio {ratio}");
    }

    #[test]
    fn weak_order_step_halving() {
        let params = cosine(1.0);
        let coarse = McConfig { dt: 0.02, t_max: 1500.0, t_corr: 30.0, n_traj: 16, seed: 13 };
        let fine = McConfig { dt: 0.01, ..coarse.clone() };
        let a = estimate_diffusion(&params, &coarse).unwrap();
        let b = estimate_diffusion(&params, &fine).unwrap();
        let stat = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(
            (a.value - b.value).abs() <= 3.0 * stat,
            "dt bias {} vs stat {}",
            (a.value - b.value).abs(),
            stat
        );
    }

    #[test]
    fn short_window_flagged() {
        // gamma = 0.05 decorrelates over ~1/gamma = 20, so a window of 2 is
        // far too short and must be flagged
        let params = flat(0.05);
        let cfg = McConfig { dt: 0.01, t_max: 400.0, t_corr: 2.0, n_traj: 8, seed: 3 };
        let est = estimate_diffusion(&params, &cfg).unwrap();
        assert!(est.t_corr_warning);
    }

    #[test]
    fn config_validation() {
        let params = flat(1.0);
        let bad = McConfig { dt: 0.01, t_max: 100.0, t_corr: 90.0, n_traj: 8, seed: 1 };
        assert!(estimate_diffusion(&params, &bad).is_err());
        let defaults = McConfig::defaults(0.1, 1);
        assert_eq!(defaults.t_corr, 500.0);
    }
}
