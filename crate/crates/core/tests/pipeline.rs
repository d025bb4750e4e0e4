//! End-to-end checks through the public library API.

use std::path::Path;

use cdadam::harness::{read_csv, read_json, run_experiment, RunConfig};
use cdadam::problems::{read_libsvm, synthesize, Batch, LogisticProblem, Problem};
use cdadam::ModelVector;

fn fixture() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/sample50.libsvm"))
}

#[test]
fn full_gradient_is_the_mean_of_local_gradients() {
    let data = synthesize(120, 7, 0.1, 3).unwrap();
    let problem = LogisticProblem::new(data, 0.1, 6, Some(3)).unwrap();
    let x = ModelVector::new(vec![0.2, -0.4, 0.1, 0.0, 0.7, -0.3, 0.5]).unwrap();
    let mut mean = [0.0; 7];
    for w in 0..6 {
        assert_eq!(problem.worker_samples(w), 20);
        let g = problem.local_gradient(w, &x, &Batch::Full).unwrap();
        for (m, gj) in mean.iter_mut().zip(g.iter()) {
            *m += gj / 6.0;
        }
    }
    let full = problem.gradient(&x);
    for (a, b) in mean.iter().zip(full.iter()) {
        assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
    }
}

#[test]
fn fixture_parses_with_expected_shape() {
    let data = read_libsvm(fixture(), None).unwrap();
    assert_eq!((data.len(), data.dim()), (50, 8));
    assert_eq!(data.labels().iter().filter(|&&y| y > 0.0).count(), 22);
    assert!(data.labels().iter().all(|&y| y == 1.0 || y == -1.0));
    let nnz: usize = (0..50).map(|i| data.row(i).iter().filter(|v| **v != 0.0).count()).sum();
    assert_eq!(nnz, 261);
}

#[test]
fn compressed_uplink_bits_follow_the_closed_form() {
    // n = 20 workers, d = 100, T = 1000 with scaled sign: 20 * 1000 * (32 + 100).
    let cfg = RunConfig::parse(
        "algorithm = cdadam\ncompressor = scaled_sign\nworkers = 20\nalpha = 0.001\n\
         iterations = 1000\nn_samples = 200\ndim = 100\nlog_interval = 500\n",
    )
    .unwrap();
    let out = run_experiment(&cfg).unwrap();
    let last = out.rows.last().unwrap();
    assert_eq!(last.iter, 1000);
    assert_eq!(last.bits_up, 2_640_000);
    assert_eq!(last.bits_down, 132_000);
}

#[test]
fn run_writes_csv_and_json_from_a_libsvm_config() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fixture.csv");
    let mut cfg = RunConfig::parse("algorithm = onebit_adam\ncompressor = scaled_sign\nworkers = 5\n").unwrap();
    cfg.set("libsvm", fixture().to_str().unwrap()).unwrap();
    cfg.set("iterations", "40").unwrap();
    cfg.set("log_interval", "10").unwrap();
    cfg.set("output", csv.to_str().unwrap()).unwrap();
    cfg.validate().unwrap();
    run_experiment(&cfg).unwrap();

    let rows = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), [0, 10, 20, 30, 40]);
    assert!(rows.windows(2).all(|w| w[1].bits_up > w[0].bits_up));
    let record = read_json(&csv.with_extension("json")).unwrap();
    assert_eq!(record.summary.status, "ok");
    assert_eq!(record.rows, rows);
    assert_eq!(record.config, cfg);
}
