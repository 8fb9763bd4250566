// scratch calibration of acceptance grids; removed before delivery
use langevin_spectral::analysis::*;
use langevin_spectral::assembly::GalerkinSystem;
use langevin_spectral::diagnostics::*;
use langevin_spectral::model::{Model, ModelParams, TrigPotential};
use langevin_spectral::solver::*;
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let cache = std::path::PathBuf::from("target/accept-cache");
    std::fs::create_dir_all(&cache).unwrap();

    if which == "ref" || which == "all" {
        // (100, 1000) rough reference
        let params = ModelParams::new(1.0, 1.0, TrigPotential::default(), 10, 40).unwrap();
        let t0 = Instant::now();
        let r = reference_solution(&params, 100, 1000, &ObservableSpec::Sobolev, Some(&cache)).unwrap();
        println!(
            "ref(100,1000): {:?} len={} residual={:e} cond={:e} min_pivot={:e} cache={}",
            t0.elapsed(),
            r.coefficients.len(),
            r.residual,
            r.cond_estimate,
            r.min_pivot,
            r.from_cache
        );
    }

    if which == "fig1k" || which == "all" {
        let params = ModelParams::new(1.0, 1.0, TrigPotential::default(), 10, 500).unwrap();
        let cfg = SweepConfig {
            axis: SweepAxis::K,
            grid: vec![5., 7., 10., 14., 20., 28., 40.],
            observable: ObservableSpec::Sobolev,
            reference: Some((100, 1000)),
            with_gap: false,
            with_diffusion: false,
            convention: ErrorConvention::PlainProjection,
            cache_dir: Some(cache.clone()),
        };
        let t0 = Instant::now();
        let rows = sweep(&params, &cfg).unwrap();
        for r in &rows {
            println!(
                "fig1 K={} approx={:e} consist={:e} total={:e} err={:?}",
                r.value,
                r.approx_err.unwrap_or(f64::NAN),
                r.consist_err.unwrap_or(f64::NAN),
                r.total_err.unwrap_or(f64::NAN),
                r.error
            );
        }
        let ap: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, r.approx_err.unwrap())).collect();
        let co: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, r.consist_err.unwrap())).collect();
        println!(
            "fig1 K-sweep ({:?}): approx slope {:?}, consist slope {:?}",
            t0.elapsed(),
            fit_loglog_slope(&ap, 0.0).map(|f| (f.slope, f.r_squared)),
            fit_loglog_slope(&co, 0.0).map(|f| (f.slope, f.r_squared))
        );
    }

    if which == "fig1l" || which == "all" {
        let params = ModelParams::new(1.0, 1.0, TrigPotential::default(), 50, 10).unwrap();
        let cfg = SweepConfig {
            axis: SweepAxis::L,
            grid: vec![10., 14., 20., 28., 40., 56., 80.],
            observable: ObservableSpec::Sobolev,
            reference: Some((100, 1000)),
            with_gap: false,
            with_diffusion: false,
            convention: ErrorConvention::PlainProjection,
            cache_dir: Some(cache.clone()),
        };
        let rows = sweep(&params, &cfg).unwrap();
        for r in &rows {
            println!(
                "fig1 L={} approx={:e} consist={:e} err={:?}",
                r.value,
                r.approx_err.unwrap_or(f64::NAN),
                r.consist_err.unwrap_or(f64::NAN),
                r.error
            );
        }
        let ap: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, r.approx_err.unwrap())).collect();
        println!("fig1 L-sweep: approx slope {:?}", fit_loglog_slope(&ap, 0.0).map(|f| (f.slope, f.r_squared)));
    }

    if which == "fig2" || which == "all" {
        // velocity observable, gamma = 1, reference (50, 100)
        let params = ModelParams::new(1.0, 1.0, TrigPotential::default(), 5, 100).unwrap();
        let reference = reference_solution(&params, 50, 100, &ObservableSpec::Velocity, Some(&cache)).unwrap();
        println!("fig2 ref residual {:e}", reference.residual);
        let yref_sys = GalerkinSystem::assemble(
            Model::new(params.resized(50, 100).unwrap()).unwrap(),
        )
        .unwrap();
        let yref = yref_sys.observable_velocity().unwrap();
        let d_ref: f64 = reference.coefficients.dot(&yref);
        println!("fig2 D_ref = {d_ref:.15}");
        let mut approx_pts = Vec::new();
        let mut mob_pts = Vec::new();
        for k in [1usize, 2, 3, 4, 5, 6, 7, 8] {
            let p = params.resized(k, 100).unwrap();
            let sys = GalerkinSystem::assemble(Model::new(p).unwrap()).unwrap();
            let y = sys.observable_velocity().unwrap();
            let res = solve_poisson(&sys, &y).unwrap();
            let rec = error_record(&sys, &reference.coefficients, &res.coefficients, &ObservableSpec::Velocity, ErrorConvention::PlainProjection).unwrap();
            let d = self_diffusion(&res, &y);
            approx_pts.push((k as f64, rec.approx_err));
            mob_pts.push((k as f64, (d - d_ref).abs()));
            println!(
                "fig2 K={k} approx={:e} consist={:e} |dD|={:e}",
                rec.approx_err,
                rec.consist_err,
                (d - d_ref).abs()
            );
        }
        println!(
            "fig2 K semilog approx slope {:?} mobility slope {:?}",
            fit_semilog_slope(&approx_pts, 1e-8).map(|f| (f.slope, f.n_used)),
            fit_semilog_slope(&mob_pts, 1e-8).map(|f| (f.slope, f.n_used))
        );
        let mut lpts = Vec::new();
        for l in [4usize, 8, 12, 16, 20, 24, 28, 32, 36, 40] {
            let p = params.resized(25, l).unwrap();
            let sys = GalerkinSystem::assemble(Model::new(p).unwrap()).unwrap();
            let y = sys.observable_velocity().unwrap();
            let res = solve_poisson(&sys, &y).unwrap();
            let rec = error_record(&sys, &reference.coefficients, &res.coefficients, &ObservableSpec::Velocity, ErrorConvention::PlainProjection).unwrap();
            lpts.push((l as f64, rec.approx_err));
            println!("fig2 L={l} approx={:e}", rec.approx_err);
        }
        println!("fig2 L semilog approx slope {:?}", fit_semilog_slope(&lpts, 1e-8).map(|f| (f.slope, f.n_used)));
    }

    if which == "fig3" || which == "all" {
        for gamma in [1e-2, 1e2] {
            let p = ModelParams::new(1.0, gamma, TrigPotential::default(), 50, 100).unwrap();
            let t0 = Instant::now();
            let sys = GalerkinSystem::assemble(Model::new(p).unwrap()).unwrap();
            let y = sys.observable_velocity().unwrap();
            let res = solve_poisson(&sys, &y).unwrap();
            let d = self_diffusion(&res, &y);
            println!(
                "fig3 gamma={gamma}: D={d:e}, D*gamma={}, residual={:e} ({:?})",
                d * gamma,
                res.residual,
                t0.elapsed()
            );
        }
    }

    if which == "gaps" || which == "all" {
        for (k, l) in [(7usize, 30usize), (9, 40)] {
            let p = ModelParams::new(1.0, 1.0, TrigPotential::default(), k, l).unwrap();
            let t0 = Instant::now();
            let rep = spectral_gap(&Model::new(p).unwrap(), None).unwrap();
            println!(
                "gap (K={k},L={l}) gamma=1: {} (dense {:?}, dropped {:?}) in {:?}",
                rep.gap, rep.dense_gap, rep.dropped, t0.elapsed()
            );
        }
        for gamma in [0.1, 10.0] {
            for (k, l) in [(7usize, 30usize), (9, 40)] {
                let p = ModelParams::new(1.0, gamma, TrigPotential::default(), k, l).unwrap();
                match spectral_gap(&Model::new(p).unwrap(), None) {
                    Ok(rep) => println!(
                        "gap (K={k},L={l}) gamma={gamma}: {} vs min(g,1/g)={} (dense {:?})",
                        rep.gap,
                        gamma.min(1.0 / gamma),
                        rep.dense_gap
                    ),
                    Err(e) => println!("gap (K={k},L={l}) gamma={gamma}: ERROR {e}"),
                }
            }
        }
    }

    if which == "cert" || which == "all" {
        for (k, l) in [(4usize, 6usize), (8, 12), (16, 24)] {
            let p = ModelParams::new(1.0, 1.0, TrigPotential::default(), k, l).unwrap();
            let m = Model::new(p).unwrap();
            let t0 = Instant::now();
            let off = norm_l_offblock(&m).unwrap();
            let cond = hypo_condition_norm(&m).unwrap();
            let nlu = norm_l_u(&m).unwrap();
            println!(
                "cert ({k},{l}): off {:.6e} <= {:.6e} | cond {:.6e} <= {:.6e} | lu {:.3e} <= {:.3e} ({:?})",
                off.computed, off.bound, cond.computed, cond.bound, nlu.computed, nlu.bound, t0.elapsed()
            );
        }
    }
}
