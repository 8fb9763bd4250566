//! End-to-end exercises of the command-line interface through `cli::run`.

use langevin_spectral::cli::{run, Manifest};
use langevin_spectral::solver::read_coefficients_csv;
use langevin_spectral::sparse::SparseMatrix;

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("langevin-spectral")
        .chain(list.iter().copied())
        .map(String::from)
        .collect()
}

#[test]
fn solve_smoke_writes_coefficients_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(args(&[
        "solve",
        "--observable",
        "velocity",
        "--K",
        "10",
        "--L",
        "40",
        "--gamma",
        "1",
        "--out-dir",
        out,
    ]));
    assert_eq!(code, 0);
    let coeffs =
        read_coefficients_csv(std::fs::File::open(dir.path().join("solution.csv")).unwrap())
            .unwrap();
    assert_eq!(coeffs.len(), 19 * 40);
    let manifest: Manifest =
        serde_json::from_reader(std::fs::File::open(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.config.command, "solve");
    assert_eq!(manifest.config.k_modes, 10);
    assert_eq!(manifest.config.observable, "velocity");
}

#[test]
fn sweep_csv_matches_module_call() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(args(&[
        "sweep",
        "--axis",
        "K",
        "--grid",
        "4,6,8",
        "--L",
        "16",
        "--observable",
        "sobolev",
        "--ref-K",
        "12",
        "--ref-L",
        "24",
        "--out-dir",
        out,
    ]));
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "axis,value,approx_err,consist_err,total_err,gap,diffusion,residual,alpha"
    );

    // against a direct module-level sweep
    use langevin_spectral::analysis::{sweep, ErrorConvention, SweepAxis, SweepConfig};
    use langevin_spectral::model::{ModelParams, TrigPotential};
    use langevin_spectral::solver::ObservableSpec;
    let params = ModelParams::new(1.0, 1.0, TrigPotential::default(), 4, 16).unwrap();
    let rows = sweep(
        &params,
        &SweepConfig {
            axis: SweepAxis::K,
            grid: vec![4.0, 6.0, 8.0],
            observable: ObservableSpec::Sobolev,
            reference: Some((12, 24)),
            with_gap: false,
            with_diffusion: false,
            convention: ErrorConvention::PlainProjection,
            cache_dir: None,
        },
    )
    .unwrap();
    for (line, row) in lines[1..].iter().zip(&rows) {
        let cells: Vec<&str> = line.split(',').collect();
        let approx: f64 = cells[2].parse().unwrap();
        assert_eq!(approx, row.approx_err.unwrap());
    }
    // JSON mirror exists and carries the same row count
    let doc: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("sweep.json")).unwrap())
            .unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn identical_config_gives_byte_identical_outputs() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let code = run(args(&[
            "sweep",
            "--axis",
            "gamma",
            "--grid",
            "0.5,1,2",
            "--K",
            "5",
            "--L",
            "12",
            "--with-diffusion",
            "--out-dir",
            d.path().to_str().unwrap(),
        ]));
        assert_eq!(code, 0);
    }
    let a = std::fs::read(d1.path().join("sweep.csv")).unwrap();
    let b = std::fs::read(d2.path().join("sweep.csv")).unwrap();
    assert_eq!(a, b);
    let ja = std::fs::read(d1.path().join("sweep.json")).unwrap();
    let jb = std::fs::read(d2.path().join("sweep.json")).unwrap();
    assert_eq!(ja, jb);
    // manifests agree on everything but timings/timestamp
    let ma: Manifest =
        serde_json::from_reader(std::fs::File::open(d1.path().join("manifest.json")).unwrap())
            .unwrap();
    let mut mb: Manifest =
        serde_json::from_reader(std::fs::File::open(d2.path().join("manifest.json")).unwrap())
            .unwrap();
    mb.config.out_dir = ma.config.out_dir.clone();
    assert_eq!(ma.config, mb.config);
}

#[test]
fn manifest_config_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(&[
        "diffusion",
        "--K",
        "6",
        "--L",
        "16",
        "--gamma",
        "2.5",
        "--potential",
        "cosine",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let m1: Manifest = serde_json::from_str(&text).unwrap();
    let text2 = serde_json::to_string(&m1).unwrap();
    let m2: Manifest = serde_json::from_str(&text2).unwrap();
    assert_eq!(m1.config, m2.config);
    assert_eq!(m1.config.gamma, 2.5);
}

#[test]
fn config_file_defaults_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, "K = 5\nL = 14\ngamma = 4.0\nobservable = velocity\n# comment\n")
        .unwrap();
    let out = dir.path().join("out");
    let code = run(args(&[
        "solve",
        "--config",
        cfg_path.to_str().unwrap(),
        "--gamma",
        "1.5",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let m: Manifest =
        serde_json::from_reader(std::fs::File::open(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.config.k_modes, 5); // from file
    assert_eq!(m.config.l_modes, 14); // from file
    assert_eq!(m.config.gamma, 1.5); // flag overrides file
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(args(&["solve", "--no-such-flag"])), 2);
    assert_eq!(run(args(&["no-such-command"])), 2);
    // bad axis is a configuration error as well
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(args(&[
            "sweep",
            "--axis",
            "bogus",
            "--grid",
            "1,2",
            "--out-dir",
            dir.path().to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn computation_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // correlation window longer than half the run is rejected by the
    // estimator after configuration parsing succeeded
    let code = run(args(&[
        "mc-validate",
        "--K",
        "3",
        "--L",
        "8",
        "--t-max",
        "10",
        "--t-corr",
        "9",
        "--n-traj",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 1);
}

#[test]
fn mc_validate_writes_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(&[
        "mc-validate",
        "--K",
        "6",
        "--L",
        "16",
        "--gamma",
        "1",
        "--seed",
        "7",
        "--dt",
        "0.01",
        "--t-max",
        "400",
        "--t-corr",
        "30",
        "--n-traj",
        "8",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let doc: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("mc_validate.json")).unwrap())
            .unwrap();
    assert!(doc["d_spectral"].is_number());
    assert!(doc["d_monte_carlo"].is_number());
    assert!(doc["agree_within_3_sigma"].is_boolean());
    assert_eq!(doc["estimate"]["rng_seed"], 7);
}

#[test]
fn export_matrix_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(&[
        "export-matrix",
        "--matrix",
        "rigidity",
        "--K",
        "4",
        "--L",
        "6",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let m = SparseMatrix::read_matrix_market_path(&dir.path().join("rigidity.mtx")).unwrap();
    use langevin_spectral::assembly::GalerkinSystem;
    use langevin_spectral::model::{Model, ModelParams, TrigPotential};
    let sys = GalerkinSystem::assemble(
        Model::new(ModelParams::new(1.0, 1.0, TrigPotential::default(), 4, 6).unwrap()).unwrap(),
    )
    .unwrap();
    assert_eq!(&m, sys.rigidity());
}

#[test]
fn gap_and_diagnose_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(&[
        "gap",
        "--K",
        "4",
        "--L",
        "10",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let doc: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("gap.json")).unwrap()).unwrap();
    assert!(doc["gap"].as_f64().unwrap() > 0.0);

    let dir2 = tempfile::tempdir().unwrap();
    let code = run(args(&[
        "diagnose",
        "--K",
        "4",
        "--L",
        "8",
        "--skip-gap",
        "--out-dir",
        dir2.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let doc: serde_json::Value = serde_json::from_reader(
        std::fs::File::open(dir2.path().join("diagnostics.json")).unwrap(),
    )
    .unwrap();
    assert!(doc["off_block_norm"]["computed"].as_f64().unwrap() > 0.0);
    assert!(doc["condition_norm"]["bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn threads_flag_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(&[
        "--threads",
        "1",
        "diffusion",
        "--K",
        "4",
        "--L",
        "10",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
}
