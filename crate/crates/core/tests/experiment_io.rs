use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coverage_lab::experiment::{emit, ks_distance, median_recenter, read_curves, run_campaign, ExperimentConfig, Report};
use coverage_lab::limits::CdfModel;

const TORUS: &str = r#"{"domain": {"a": {"kind": "torus", "d": 2, "side": 1.0}}, "k": 1, "tau": 1.0,
    "mode": "binomial", "n_values": [1000], "replicates": 300, "seed": 5,
    "beta_grid": {"min": -4, "max": 8, "step": 0.05}}"#;

fn run(json: &str, threads: usize) -> Report {
    run_campaign(&ExperimentConfig::from_json(json).unwrap(), threads).unwrap().remove(0)
}

#[test]
fn emitted_files_round_trip() {
    let report = run(TORUS, 0);
    let dir = tempfile::tempdir().unwrap();
    emit(&report, dir.path()).unwrap();
    let curves = read_curves(&dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves, report.curves);
    assert_eq!(curves.len(), report.config.beta_grid.len());

    let samples: Vec<f64> = std::fs::read_to_string(dir.path().join("samples.csv"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(samples, report.samples);

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    let echoed: ExperimentConfig = serde_json::from_value(meta["config"].clone()).unwrap();
    assert_eq!(echoed, ExperimentConfig::from_json(TORUS).unwrap());
    assert_eq!(meta["failed_replicates"], 0);
    assert_eq!(meta["ks_limit"].as_f64().unwrap(), report.ks_limit);
    assert!(dir.path().join("plot.gp").exists());
}

#[test]
fn emit_reports_unwritable_path() {
    let report = run(TORUS, 0);
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit(&report, &blocker.join("sub")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("sub"));
}

#[test]
fn worker_count_does_not_change_samples() {
    let one = run(TORUS, 1);
    for threads in [4, 16] {
        let other = run(TORUS, threads);
        assert_eq!(one.samples.iter().map(|s| s.to_bits()).collect::<Vec<_>>(), other.samples.iter().map(|s| s.to_bits()).collect::<Vec<_>>());
        assert_eq!(one.curves, other.curves);
    }
}

#[test]
fn torus_single_coverage_correction_is_inert() {
    let report = run(TORUS, 0);
    assert_eq!(report.ks_limit, report.ks_corrected);
}

#[test]
fn recentred_curves_pass_through_half() {
    let centred = median_recenter(&run(TORUS, 0)).unwrap();
    let at_zero = centred.curves.iter().find(|r| r.beta.abs() < 1e-9).unwrap();
    assert!((at_zero.limit - 0.5).abs() < 1e-9);
    assert!((at_zero.corrected - 0.5).abs() < 1e-9);
    assert!((at_zero.empirical - 0.5).abs() <= 1.0 / 300.0 + 1e-12);
}

#[test]
fn gumbel_draws_pass_the_ks_critical_value() {
    let model = CdfModel::gumbel(0.0, 1.0);
    let n = 10_000;
    let critical = 1.63 / (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut below = 0;
    for _ in 0..100 {
        let mut xs: Vec<f64> = (0..n).map(|_| -(-(rng.random::<f64>()).ln()).ln()).collect();
        xs.sort_by(f64::total_cmp);
        if ks_distance(&xs, &model).unwrap() < critical {
            below += 1;
        }
    }
    assert!(below >= 95, "{below} of 100 below the 1% critical value");
}
