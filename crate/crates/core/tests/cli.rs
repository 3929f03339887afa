//! Integration tests for the command-line surface: formats, flag
//! validation, exit codes and emitted documents.

use std::path::Path;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_matpursuit")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.display().to_string()
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).unwrap()
}

#[test]
fn factorize_svd_matches_reference_costs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let y = DMatrix::from_fn(20, 15, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut csv = String::new();
    for r in 0..20 {
        let row: Vec<String> = (0..15).map(|c| format!("{}", y[(r, c)])).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let input = write(dir.path(), "y.csv", &csv);

    let output = run(&[
        "factorize", &input, "--mode", "svd", "--rank", "5", "--power-iters", "500", "--seed",
        "7",
    ]);
    let report = stdout_json(&output);

    let reference = matpursuit::oracle::svd_reference(&y, 5).unwrap();
    let trace = report["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 5);
    for (row, expected) in trace.iter().zip(&reference) {
        let cost = row["cost"].as_f64().unwrap();
        assert!(((cost - expected) / expected).abs() <= 1e-4);
    }
    // Reconstruction error is the unscaled residual norm.
    let cost = report["metrics"]["cost"].as_f64().unwrap();
    let recon = report["metrics"]["reconstruction_error"].as_f64().unwrap();
    assert!((recon - (2.0 * cost).sqrt()).abs() <= 1e-12);
}

#[test]
fn factorize_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "y.csv", "1,2\n3,4\n");

    for args in [
        vec!["factorize", &input, "--rank", "0"],
        vec!["factorize", &input, "--rank", "1", "--mode", "sparse-pca"], // missing k
        vec![
            "factorize", &input, "--rank", "1", "--mode", "sparse-pca", "--sparsity-u", "5",
        ], // k > dim
        vec!["factorize", &input, "--rank", "1", "--mode", "no-such-mode"],
        vec!["factorize", &input, "--rank", "1", "--format", "no-such-format"],
        vec!["factorize", &input, "--rank", "1", "--delta", "1.5"],
        vec!["factorize", &input, "--rank", "1", "--restarts", "0"],
    ] {
        let output = run(&args);
        assert_eq!(
            output.status.code(),
            Some(2),
            "expected usage error for {args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
}

#[test]
fn parse_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = write(dir.path(), "ragged.csv", "1,2\n3\n");
    let bad_mm = write(
        dir.path(),
        "bad.mtx",
        "%%MatrixMarket matrix array real general\n2 2\n1.0\n",
    );
    for args in [
        vec!["factorize", "/nonexistent/input.csv", "--rank", "1"],
        vec!["factorize", ragged.as_str(), "--rank", "1"],
        vec![
            "factorize",
            bad_mm.as_str(),
            "--rank",
            "1",
            "--format",
            "matrix-market",
        ],
    ] {
        let output = run(&args);
        assert_eq!(output.status.code(), Some(3), "expected parse error for {args:?}");
    }
}

#[test]
fn zero_target_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "zero.csv", "0,0\n0,0\n");
    let output = run(&["factorize", &input, "--rank", "2"]);
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn symmetric_flag_rejects_asymmetric_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "y.csv", "1,2\n3,4\n");
    let output = run(&["factorize", &input, "--rank", "1", "--symmetric"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sparse_pca_implies_symmetric_and_respects_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    // A symmetric covariance-like matrix.
    let input = write(
        dir.path(),
        "cov.csv",
        "4,1,0,0\n1,3,0,0\n0,0,2,0.5\n0,0,0.5,1\n",
    );
    let output = run(&[
        "factorize", &input, "--mode", "sparse-pca", "--sparsity-u", "2", "--rank", "2",
        "--seed", "3",
    ]);
    let report = stdout_json(&output);
    assert_eq!(report["config"]["symmetric"], serde_json::Value::Bool(true));
    assert_eq!(
        report["config"]["spec_u"]["constraint"]["Sparse"],
        serde_json::json!(2)
    );
}

#[test]
fn complete_reports_split_metrics_and_selected_rank() {
    let dir = tempfile::tempdir().unwrap();
    // Planted rank-2 ratings on a 30x20 grid, ~60% observed.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = DMatrix::from_fn(30, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(2, 20, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = a * b;
    let mut triples = String::new();
    for u in 0..30 {
        for i in 0..20 {
            if rng.gen::<f64>() < 0.6 {
                triples.push_str(&format!("{} {} {}\n", u + 1, i + 1, y[(u, i)]));
            }
        }
    }
    let input = write(dir.path(), "ratings.dat", &triples);
    let output = run(&[
        "complete", &input, "--rank", "6", "--seed", "5", "--corrections", "1",
    ]);
    let report = stdout_json(&output);

    let selected = report["metrics"]["selected_rank"].as_u64().unwrap();
    assert!(selected >= 1 && selected <= 6);
    for key in ["rmse_train", "rmse_validation", "rmse_test"] {
        assert!(report["metrics"][key].as_f64().unwrap().is_finite());
    }
    // A planted low-rank target generalizes: test RMSE far below the rating scale.
    assert!(report["metrics"]["rmse_test"].as_f64().unwrap() < 1.0);
    let sizes = report["dataset"]["split_sizes"].as_array().unwrap();
    let total: u64 = sizes.iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, report["dataset"]["observed"].as_u64().unwrap());
}

#[test]
fn complete_rejects_degenerate_splits() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "r.dat", "1 1 1.0\n1 2 2.0\n2 1 3.0\n2 2 4.0\n");
    let output = run(&["complete", &input, "--rank", "1", "--split", "1.0,0,0"]);
    assert_eq!(output.status.code(), Some(2));
    let output = run(&["complete", &input, "--rank", "1", "--split", "0.5,0.2,0.2"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn complete_sparse_mode_defaults_right_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    let mut triples = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for u in 1..=20usize {
        for i in 1..=10usize {
            if rng.gen::<f64>() < 0.8 {
                triples.push_str(&format!("{u}::{i}::{}\n", 1 + (u * i) % 5));
            }
        }
    }
    let input = write(dir.path(), "r.dat", &triples);
    let output = run(&["complete", &input, "--rank", "2", "--mode", "sparse"]);
    let report = stdout_json(&output);
    // ceil(0.6 * 10) = 6
    assert_eq!(
        report["config"]["spec_v"]["constraint"]["Sparse"],
        serde_json::json!(6)
    );
}

#[test]
fn triples_duplicate_warning_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "dup.dat",
        "1 1 1.0\n1 1 2.0\n1 2 3.0\n2 1 4.0\n2 2 5.0\n3 1 1.0\n3 2 2.0\n",
    );
    let output = run(&["complete", &input, "--rank", "1", "--split", "0.5,0.25,0.25"]);
    assert!(output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("duplicate"), "stderr: {stderr}");
}

#[test]
fn matrix_market_input_works_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut mm = String::from("%%MatrixMarket matrix coordinate real general\n");
    mm.push_str("4 3 6\n1 1 2.0\n1 2 -1.0\n2 2 3.0\n3 3 1.5\n4 1 0.5\n4 3 -2.0\n");
    let input = write(dir.path(), "y.mtx", &mm);
    let output = run(&["factorize", &input, "--rank", "2", "--format", "matrix-market"]);
    let report = stdout_json(&output);
    assert_eq!(report["dataset"]["shape"], serde_json::json!([4, 3]));
    assert_eq!(report["dataset"]["observed"], serde_json::json!(6));
}

#[test]
fn coherence_identity_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "dict.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let output = run(&["coherence", &input]);
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,mu,rate_bound"));
    // mu = 0 everywhere, bound = 1 - 1/m.
    assert_eq!(lines.next(), Some("1,0,0"));
    assert_eq!(lines.next(), Some("2,0,0.5"));
    assert_eq!(lines.next(), None);
}

#[test]
fn coherence_two_atom_angle() {
    let dir = tempfile::tempdir().unwrap();
    let theta: f64 = 0.9;
    let input = write(
        dir.path(),
        "dict.csv",
        &format!("1,0\n{},{}\n", theta.cos(), theta.sin()),
    );
    let output = run(&["coherence", &input]);
    let text = String::from_utf8(output.stdout).unwrap();
    let mu: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((mu - theta.cos().abs()).abs() <= 1e-12);
}

#[test]
fn coherence_normalizes_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "dict.csv", "2,0\n0,3\n");
    let output = run(&["coherence", &input]);
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("normalized"));
    let text = String::from_utf8(output.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("1,0,0"));
}

#[test]
fn coherence_m_range_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "dict.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let output = run(&["coherence", &input, "--m-max", "5"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn out_directory_receives_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "y.csv", "3,1\n1,2\n");
    let out = dir.path().join("results");
    let output = run(&[
        "factorize", &input, "--rank", "2", "--symmetric", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
    for name in ["report.json", "model.json", "trace.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,cost,residual_norm,lmo_value,lmo_gap,corrections"));

    // The factor file reloads into a model with the reported cost.
    let factors = matpursuit::cli::report::FactorFile::load(&out.join("model.json")).unwrap();
    let model = factors.to_model().unwrap();
    assert_eq!(model.rank(), 2);
    assert!(factors.symmetric);
}

#[test]
fn delta_flag_is_echoed_and_applied() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "y.csv", "5,0,0\n0,3,0\n0,0,1\n");
    let output = run(&["factorize", &input, "--rank", "3", "--delta", "0.5", "--seed", "2"]);
    let report = stdout_json(&output);
    assert_eq!(report["config"]["delta"], serde_json::json!(0.5));
    // Still converges on a tiny diagonal target.
    let final_cost = report["trace"].as_array().unwrap().last().unwrap()["cost"]
        .as_f64()
        .unwrap();
    assert!(final_cost < 0.5);
}
