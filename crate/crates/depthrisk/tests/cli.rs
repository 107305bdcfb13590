use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_depthrisk"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const STANDARD_MODEL: &str = r#"{"mu": [0.0, 0.0], "sigma": [[1.0, 0.0], [0.0, 1.0]]}"#;

#[test]
fn depth_at_the_center_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", STANDARD_MODEL);
    let points = write(dir.path(), "points.csv", "x,y\n0,0\n1,0\n");
    let out = ok(&[
        "depth",
        "--model",
        &model,
        "--points",
        &points,
        "--output-dir",
        dir.path().to_str().unwrap(),
        "--json",
    ]);
    let rows = &stdout_json(&out)["rows"];
    assert_eq!(rows[0]["depth"], 1.0);
    assert_eq!(rows[0]["gradient"], serde_json::json!([0.0, 0.0]));
    assert_eq!(rows[1]["depth"], 0.5);
    let csv = fs::read_to_string(dir.path().join("depth.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x0,x1,depth,grad0,grad1");
    assert_eq!(csv.lines().nth(1).unwrap(), "0,0,1,0,0");
    assert_eq!(csv.lines().nth(2).unwrap(), "1,0,0.5,-0.5,0");
}

#[test]
fn grid_request_gives_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", STANDARD_MODEL);
    let out = ok(&[
        "depth",
        "--model",
        &model,
        "--grid",
        "-1:1:3,-1:1:3",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.stdout.is_empty(), "stdout must stay empty without --json");
    let csv = fs::read_to_string(dir.path().join("depth.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(!csv.contains('\r'));
}

#[test]
fn column_count_mismatch_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.json", STANDARD_MODEL);
    let points = write(dir.path(), "points.csv", "0,0\n1,1\n2,2,2\n");
    let out = run(&[
        "depth",
        "--model",
        &model,
        "--points",
        &points,
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("points.csv:3"), "{err}");
    assert!(err.contains("3 columns"), "{err}");
    assert!(!dir.path().join("depth.csv").exists());
}

#[test]
fn depth_from_a_fitted_sample() {
    let dir = tempfile::tempdir().unwrap();
    let sample = write(dir.path(), "sample.csv", "1,0\n-1,0\n0,1\n0,-1\n");
    let out = ok(&[
        "depth",
        "--fit",
        &sample,
        "--grid",
        "0:0:1,0:0:1",
        "--output-dir",
        dir.path().to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(stdout_json(&out)["rows"][0]["depth"], 1.0);
}

#[test]
fn smoke_experiment_recovers_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("gaussian_smoke.json");
    let out = ok(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
        "--json",
    ]);
    let summary = stdout_json(&out);
    for cell in summary["cells"].as_array().unwrap() {
        assert!((cell["truth"].as_f64().unwrap() - 3.0).abs() < 0.01);
        assert!((cell["mean"].as_f64().unwrap() - 3.0).abs() < 0.2);
    }
    let table = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "n,alpha,truth,truth_se,mean,sigma_hat,rmae,degenerate_count"
    );
    assert_eq!(table.lines().count(), 3);
    let rates = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 1 + 2 * 3);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 1);
    assert_eq!(manifest["config"]["replications"], 20);
    assert!(manifest["version"].is_string());
    assert!(manifest["wall_clock_seconds"].is_number());
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let cfg = configs().join("gaussian_smoke.json");
    let cfg = cfg.to_str().unwrap();
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "3", "1"]) {
        ok(&[
            "experiment",
            "--config",
            cfg,
            "--output-dir",
            dir.path().to_str().unwrap(),
            "--threads",
            threads,
        ]);
    }
    for name in ["summary.csv", "rates.csv"] {
        let first = fs::read(dirs[0].path().join(name)).unwrap();
        for dir in &dirs[1..] {
            assert_eq!(first, fs::read(dir.path().join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let cfg = configs().join("gaussian_smoke.json");
    let cfg = cfg.to_str().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&[
        "experiment",
        "--config",
        cfg,
        "--output-dir",
        a.path().to_str().unwrap(),
        "--seed",
        "99",
        "--replications",
        "5",
    ]);
    ok(&[
        "experiment",
        "--config",
        cfg,
        "--output-dir",
        b.path().to_str().unwrap(),
        "--replications",
        "5",
    ]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 99);
    assert_eq!(manifest["config"]["replications"], 5);
    assert_ne!(
        fs::read(a.path().join("summary.csv")).unwrap(),
        fs::read(b.path().join("summary.csv")).unwrap()
    );
}

#[test]
fn missing_theta_is_named_with_every_other_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{
          "data": {"kind": "frank_gumbel", "marginals": [{"mu": 0, "beta": -1}, {"mu": 0, "beta": 0.25}], "noise_var": 0.005},
          "n_values": [100], "alpha_values": [0.5], "delta_values": [], "truth_n_mc": 100000, "master_seed": 1,
          "colour": "blue"
        }"#,
    );
    let out = run(&[
        "experiment",
        "--config",
        &cfg,
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["data.theta: missing", "replications: missing", "colour: unknown field"] {
        assert!(err.contains(needle), "{needle:?} not in {err}");
    }
    assert!(!dir.path().join("summary.csv").exists());
}

#[test]
fn semantic_problems_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{
          "data": {"kind": "frank_gumbel", "theta": 0, "marginals": [{"mu": 0, "beta": -1}, {"mu": 0, "beta": 0.25}], "noise_var": 0.005},
          "n_values": [100], "alpha_values": [1.5], "replications": 1, "delta_values": [], "truth_n_mc": 100000, "master_seed": 1
        }"#,
    );
    let out = run(&["experiment", "--config", &cfg]);
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["data.theta", "data.marginals[0].beta", "alpha_values", "replications"] {
        assert!(err.contains(needle), "{needle:?} not in {err}");
    }
}

#[test]
fn convergence_with_one_size_reports_na_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "conv.json",
        r#"{
          "data": {"kind": "gaussian", "mu": [0, 0], "sigma": [[1, 0], [0, 1]], "noise_var": 0},
          "n_values": [300], "seeds": 1, "alpha": 0.5, "master_seed": 3, "sym_diff_n_mc": 5000
        }"#,
    );
    ok(&[
        "convergence",
        "--config",
        &cfg,
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    let table = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<Vec<&str>> = table.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0][0], "n");
    let row = &lines[1];
    for k in 0..4 {
        // With one seed the quartiles collapse onto the median.
        assert_eq!(row[1 + 3 * k], row[2 + 3 * k]);
        assert_eq!(row[1 + 3 * k], row[3 + 3 * k]);
    }
    assert_eq!(lines[2][0], "slope");
    assert!(lines[2][1..].iter().all(|v| *v == "NA"));
}

#[test]
fn ccte_from_csv_files_and_from_a_sampling_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let level = write(dir.path(), "level.csv", "x,y\n1,0\n-1,0\n0,1\n0,-1\n");
    let cost = write(dir.path(), "cost.csv", "x,y,cost\n0,0,1\n3,0,5\n0,3,8\n");
    let out = ok(&[
        "ccte",
        "--level",
        &level,
        "--cost",
        &cost,
        "--alpha",
        "0.5",
        "--output-dir",
        out_dir,
        "--json",
    ]);
    let est = stdout_json(&out);
    assert_eq!(est["value"], 6.5);
    assert_eq!(est["hits"], 2);
    assert_eq!(est["degenerate"], false);
    let saved: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
    assert_eq!(saved, est);

    let cfg = configs().join("frank_gumbel_sampling.json");
    let cfg = cfg.to_str().unwrap();
    let a = stdout_json(&ok(&[
        "ccte",
        "--config",
        cfg,
        "--n",
        "500",
        "--alpha",
        "0.5",
        "--output-dir",
        out_dir,
        "--json",
    ]));
    let b = stdout_json(&ok(&[
        "ccte",
        "--config",
        cfg,
        "--n",
        "500",
        "--alpha",
        "0.5",
        "--output-dir",
        out_dir,
        "--json",
    ]));
    let c = stdout_json(&ok(&[
        "ccte",
        "--config",
        cfg,
        "--n",
        "500",
        "--alpha",
        "0.5",
        "--seed",
        "1",
        "--output-dir",
        out_dir,
        "--json",
    ]));
    assert_eq!(a, b);
    assert_ne!(a["value"], c["value"]);
    assert_eq!(a["n1"], 500);

    let mut theta_missing: Value = serde_json::from_str(&fs::read_to_string(cfg).unwrap()).unwrap();
    theta_missing.as_object_mut().unwrap().remove("theta");
    let bad = write(dir.path(), "sampling.json", &theta_missing.to_string());
    let out = run(&[
        "ccte",
        "--config",
        &bad,
        "--n",
        "500",
        "--alpha",
        "0.5",
        "--output-dir",
        out_dir,
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));
}

#[test]
fn levelset_writes_boundary_and_distances() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", STANDARD_MODEL);
    let b = write(dir.path(), "b.json", r#"{"mu": [0, 0], "sigma": [[4, 0], [0, 4]]}"#);
    let out = ok(&[
        "levelset",
        "--model",
        &a,
        "--reference",
        &b,
        "--alpha",
        "0.5",
        "--boundary-points",
        "512",
        "--output-dir",
        dir.path().to_str().unwrap(),
        "--json",
    ]);
    let summary = stdout_json(&out);
    // Radii 1 and 2: Hausdorff 1, annulus area 3π.
    assert!((summary["hausdorff"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let sd = summary["sym_diff_volume"].as_f64().unwrap();
    assert!((sd - 3.0 * std::f64::consts::PI).abs() < 4.0 * summary["sym_diff_std_error"].as_f64().unwrap());
    // |1/(1+r²) − 1/(1+r²/4)| peaks at r² = 2.
    assert!((summary["sup_norm"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-4);
    let boundary = fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    assert_eq!(boundary.lines().count(), 513);
}

#[test]
fn bad_usage_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["ccte", "--alpha", "0.5", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let out = run(&["experiment", "--config", "/nonexistent/config.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/config.json"));
}
