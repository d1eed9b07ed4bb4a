use std::path::Path;
use std::process::{Command, Output};

use dips_core::perm::{enumerate_all, evaluate_dips, exact_expectation};
use dips_core::{gen, RngSeed, Tensor4};
use serde_json::Value;
use tempfile::TempDir;

fn dips(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dips")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_tensor(dir: &Path, name: &str, t: &Tensor4) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(&t.to_json_value().unwrap()).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn write_file(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn decompose_degenerate_fixture_has_zero_linear_part() {
    let dir = TempDir::new().unwrap();
    let d = gen::degenerate_tensor(&mut RngSeed::new(1).rng(), 5);
    let input = write_tensor(dir.path(), "d.json", &d);
    let v = stdout_json(&dips(&["decompose", "--input", &input]));
    assert!(v["linear_max_abs"].as_f64().unwrap() < 1e-12);
    assert!(v["constant"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn decompose_constant_fixture() {
    let dir = TempDir::new().unwrap();
    let input = write_tensor(dir.path(), "c.json", &Tensor4::constant(4, 1.5).unwrap());
    let v = stdout_json(&dips(&["decompose", "--input", &input]));
    assert!((v["constant"].as_f64().unwrap() - 16.0 * 1.5).abs() < 1e-12);
    assert!(v["degenerate_max_abs"].as_f64().unwrap() < 1e-12);
}

#[test]
fn decompose_round_trip_at_random_permutations() {
    let dir = TempDir::new().unwrap();
    let t = gen::dense_tensor(&mut RngSeed::new(2).rng(), 6);
    let input = write_tensor(dir.path(), "t.json", &t);
    let out = dir.path().join("dec");
    let v = stdout_json(&dips(&["decompose", "--input", &input, "--output", &s(&out), "--seed", "9"]));
    let rows = v["reconstruction"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let (a, b) = (r["statistic"].as_f64().unwrap(), r["reconstruction"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
    for f in ["linear.json", "degenerate.json", "summary.json"] {
        assert!(out.join(f).exists());
    }
}

#[test]
fn bound_curve_starts_at_one_is_monotone_and_matches_constants() {
    let dir = TempDir::new().unwrap();
    let d = gen::degenerate_tensor(&mut RngSeed::new(3).rng(), 5);
    let input = write_tensor(dir.path(), "d.json", &d);
    let prefix = dir.path().join("curve");
    let out = dips(&[
        "bound",
        "--input",
        &input,
        "--theorem",
        "main",
        "--grid",
        "0:50:11",
        "--seed",
        "4",
        "--output",
        &s(&prefix),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve: Value = serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    let bound: Vec<f64> = serde_json::from_value(curve["bound"].clone()).unwrap();
    assert_eq!(bound[0], 1.0);
    assert!(bound.windows(2).all(|w| w[1] <= w[0]));
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    assert!(csv.starts_with("t,bound,raw\n"));
    assert_eq!(csv.lines().count(), 12);

    let consts = stdout_json(&dips(&["constants", "--input", &input, "--seed", "4"]));
    assert_eq!(consts["kind"], "degenerate");
    assert_eq!(consts["constants"], curve["constants"]);
}

#[test]
fn bound_variants_need_their_inputs() {
    let dir = TempDir::new().unwrap();
    let d = gen::degenerate_tensor(&mut RngSeed::new(5).rng(), 4);
    let input = write_tensor(dir.path(), "d.json", &d);
    assert_eq!(dips(&["bound", "--input", &input, "--theorem", "corollary", "--grid", "0:1:3"]).status.code(), Some(1));
    assert_eq!(dips(&["bound", "--input", &input, "--theorem", "bennett", "--grid", "0:1:3"]).status.code(), Some(1));
    let v =
        stdout_json(&dips(&["bound", "--input", &input, "--theorem", "corollary", "--grid", "0:1:3", "--k", "0.5"]));
    assert_eq!(v["bound"][0], 1.0);

    let mut rng = RngSeed::new(6).rng();
    let c = gen::centered_zero_diagonal(&mut rng, 6);
    let a = gen::uniform_matrix(&mut rng, 6, 6);
    let p = write_tensor(dir.path(), "p.json", &Tensor4::product(c, a).unwrap());
    let v = stdout_json(&dips(&["bound", "--input", &p, "--theorem", "bennett", "--grid", "0:4:5"]));
    assert_eq!(v["label"], "bennett");
    let v =
        stdout_json(&dips(&["bound", "--input", &p, "--theorem", "hanson-wright", "--grid", "0:4:5", "--k", "0.1"]));
    assert_eq!(v["constants"]["variant"]["variant"], "general");
}

#[test]
fn simulate_exact_matches_enumeration() {
    let dir = TempDir::new().unwrap();
    let t = gen::dense_tensor(&mut RngSeed::new(7).rng(), 5);
    let input = write_tensor(dir.path(), "t.json", &t);
    let v = stdout_json(&dips(&[
        "simulate",
        "--input",
        &input,
        "--include-diagonal",
        "false",
        "--mode",
        "exact",
        "--grid",
        "0:2:9",
    ]));
    let mean = exact_expectation(&t, false).unwrap();
    let devs: Vec<f64> = enumerate_all(5).unwrap().map(|p| evaluate_dips(&t, &p, false).unwrap() - mean).collect();
    let grid: Vec<f64> = serde_json::from_value(v["grid"].clone()).unwrap();
    let surv: Vec<f64> = serde_json::from_value(v["survival"].clone()).unwrap();
    for (t, s) in grid.iter().zip(&surv) {
        let count = devs.iter().filter(|&&d| d >= t - 1e-10 * mean.abs().max(1.0)).count();
        assert_eq!(*s, count as f64 / 120.0);
    }
    assert_eq!(v["mode"], "exact");
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let t = gen::dense_tensor(&mut RngSeed::new(8).rng(), 9);
    let input = write_tensor(dir.path(), "t.json", &t);
    let run = |seed: &str| {
        let out = dips(&[
            "simulate",
            "--input",
            &input,
            "--include-diagonal",
            "true",
            "--mode",
            "mc",
            "--seed",
            seed,
            "--replicates",
            "2000",
        ]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("11"), run("11"));
    assert_ne!(run("11"), run("12"));
}

#[test]
fn verify_clean_and_mutated_decomposition() {
    let dir = TempDir::new().unwrap();
    let t = gen::dense_tensor(&mut RngSeed::new(9).rng(), 5);
    let input = write_tensor(dir.path(), "t.json", &t);
    let out = dips(&["verify", "--input", &input, "--check", "decomposition,decoupling,dominance", "--grid", "0:4:6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);

    let dec = dir.path().join("dec");
    assert!(dips(&["decompose", "--input", &input, "--output", &s(&dec)]).status.success());
    let flipped = Tensor4::load(dec.join("degenerate.json")).unwrap().scale(-1.0).unwrap();
    write_tensor(&dec, "degenerate.json", &flipped);
    let out = dips(&["verify", "--input", &input, "--check", "decomposition", "--decomposition", &s(&dec)]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "fail");
    assert_eq!(report["witness"]["permutation"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_statistic_needs_k() {
    let dir = TempDir::new().unwrap();
    let csv = write_file(dir.path(), "s.csv", "x,y\n1,3\n2,1\n3,4\n4,2\n5,5\n");
    let base = ["verify", "--check", "statistic", "--statistic", "chatterjee", "--input", &csv, "--grid", "0:1:5"];
    assert_eq!(dips(&base).status.code(), Some(1));
    let mut with_k = base.to_vec();
    with_k.extend(["--k", "1e-9"]);
    let out = dips(&with_k);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["details"]["conditional_on"].as_str().unwrap().contains("K"));
}

#[test]
fn stats_hand_values() {
    let dir = TempDir::new().unwrap();
    let concordant = write_file(dir.path(), "c.csv", "x,y\n1,10\n2,20\n3,30\n4,40\n");
    let v = stdout_json(&dips(&["stats", "--statistic", "kendall", "--input", &concordant]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let three = write_file(dir.path(), "t.csv", "x,y\n1,1\n2,2\n3,3\n");
    let v = stdout_json(&dips(&["stats", "--statistic", "chatterjee", "--input", &three]));
    assert!((v["value"].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let mww = write_file(dir.path(), "m.json", r#"{"first": [1, 2, 3], "second": [10, 11, 12, 13]}"#);
    let v = stdout_json(&dips(&["stats", "--statistic", "mww", "--input", &mww, "--grid", "0:5:3", "--k", "0.1"]));
    assert_eq!(v["value"].as_f64().unwrap(), 12.0);
    assert_eq!(v["bound"]["bound"][0], 1.0);
}

#[test]
fn stats_graph_and_regression() {
    let dir = TempDir::new().unwrap();
    let g1 = write_file(dir.path(), "g1.json", r#"{"n": 4, "edges": [[1, 2], [2, 3], [3, 4], [4, 1]]}"#);
    let g2 = write_file(dir.path(), "g2.json", r#"{"n": 4, "edges": [[1, 2], [2, 3]]}"#);
    let v = stdout_json(&dips(&["stats", "--statistic", "graph", "--input", &g1, "--input2", &g2]));
    assert_eq!(v["value"].as_f64().unwrap(), 2.0);
    assert!((v["null_mean"].as_f64().unwrap() - 4.0 * 2.0 / 12.0).abs() < 1e-12);

    let reg = write_file(
        dir.path(),
        "r.json",
        r#"{"x": [[-1.5], [-0.5], [0.5], [1.5]], "e": [0.5, -1.5, 1.5, -0.5], "treated": 2}"#,
    );
    let v = stdout_json(&dips(&["stats", "--statistic", "regression", "--input", &reg]));
    assert_eq!(v["n"], 4);
    assert!(v["constants"]["q_frob_sq"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(dips(&["--help"]).status.code(), Some(0));
    assert_eq!(dips(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(dips(&["decompose"]).status.code(), Some(1));
    assert_eq!(dips(&["decompose", "--input", "/nonexistent/t.json"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let bad = write_file(dir.path(), "bad.json", r#"{"n": 2, "form": "dense", "data": [1.0]}"#);
    assert_eq!(dips(&["decompose", "--input", &bad]).status.code(), Some(2));
    assert_eq!(dips(&["simulate", "--input", &bad, "--mode", "mc"]).status.code(), Some(1));
}

#[test]
fn config_file_fills_flags_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let t = gen::dense_tensor(&mut RngSeed::new(10).rng(), 4);
    let input = write_tensor(dir.path(), "t.json", &t);
    let cfg = write_file(
        dir.path(),
        "cfg.json",
        &format!(r#"{{"input": {input:?}, "include_diagonal": true, "mode": "exact", "grid": "0:1:3"}}"#),
    );
    let v = stdout_json(&dips(&["simulate", "--config", &cfg]));
    assert_eq!(v["grid"].as_array().unwrap().len(), 3);
    let v = stdout_json(&dips(&["simulate", "--config", &cfg, "--grid", "0:1:5"]));
    assert_eq!(v["grid"].as_array().unwrap().len(), 5);
    let typo = write_file(dir.path(), "typo.json", r#"{"inptu": "x"}"#);
    assert_eq!(dips(&["simulate", "--config", &typo]).status.code(), Some(2));
}
