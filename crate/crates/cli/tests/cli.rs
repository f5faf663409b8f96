use std::fs;
use std::path::Path;

use serde_json::Value;
use signsieve_cli::run_from;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["signsieve".to_string(), "--out-dir".into(), dir.display().to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    run_from(full)
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn block_design(dir: &Path) -> std::path::PathBuf {
    let code = run(dir, &["construct", "--objective", "block", "--n", "16", "--k", "8", "--k1", "4"]);
    assert_eq!(code, 0);
    dir.join("design.csv")
}

#[test]
fn block_construction_outputs() {
    let dir = TempDir::new().unwrap();
    let design = block_design(dir.path());
    let text = fs::read_to_string(&design).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.split(',').count() == 8));
    let report = json(&dir.path().join("construct.json"));
    for x in report["xi"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() - 0.1575).abs() < 5e-4);
    }
    for b in report["bound_constants"].as_array().unwrap() {
        assert!((b.as_f64().unwrap() - 53.92).abs() < 0.05);
    }
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "construct");
}

#[test]
fn design_file_round_trips_through_eval() {
    let dir = TempDir::new().unwrap();
    let design = block_design(dir.path());
    let before = fs::read(&design).unwrap();
    let out = dir.path().join("eval");
    let code = run(
        &out,
        &["eval", "--design", design.to_str().unwrap(), "--k", "8", "--beta", "1", "--lambda", "0.5", "--curve"],
    );
    assert_eq!(code, 0);
    assert_eq!(fs::read(&design).unwrap(), before);
    let result = json(&out.join("criterion.json"));
    assert_eq!(result["diagnostics"]["n"], 16);
    assert_eq!(result["diagnostics"]["p"], 8);
    assert_eq!(result["p_i"].as_f64(), Some(1.0));
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 2);
}

#[test]
fn padded_design_has_certain_inactive_event() {
    let dir = TempDir::new().unwrap();
    let code = run(dir.path(), &["construct", "--objective", "block", "--n", "8", "--p", "10", "--k", "4", "--k1", "2"]);
    assert_eq!(code, 0);
    let design = dir.path().join("design.csv");
    let text = fs::read_to_string(&design).unwrap();
    assert!(text.lines().all(|r| r.split(',').count() == 10 && r.ends_with("1,1,1,1,1,1")));
    let out = dir.path().join("eval");
    let code = run(
        &out,
        &["eval", "--design", design.to_str().unwrap(), "--k", "4", "--beta", "1", "--supports", "0,1,2,3", "--lambda", "0.4"],
    );
    assert_eq!(code, 0);
    let result = json(&out.join("criterion.json"));
    assert_eq!(result["p_i"].as_f64(), Some(1.0));
    assert_eq!(result["value"], result["p_s"]);
}

#[test]
fn reruns_are_byte_identical_and_replay_matches() {
    let dir = TempDir::new().unwrap();
    let design = block_design(dir.path());
    let args = || {
        vec![
            "--seed",
            "7",
            "--budget",
            "256",
            "eval",
            "--design",
            design.to_str().unwrap(),
            "--k",
            "2",
            "--beta",
            "1.5",
            "--supports",
            "0,1;2,5;3,7",
            "--sign-mode",
            "all",
            "--summary",
            "max",
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&a, &args()), 0);
    assert_eq!(run(&b, &args()), 0);
    let first = fs::read(a.join("criterion.json")).unwrap();
    assert_eq!(first, fs::read(b.join("criterion.json")).unwrap());

    let c = dir.path().join("c");
    assert_eq!(run(&c, &["replay", a.join("manifest.json").to_str().unwrap()]), 0);
    assert_eq!(first, fs::read(c.join("criterion.json")).unwrap());

    // a changed design no longer matches the recorded digest
    let text = fs::read_to_string(&design).unwrap();
    let flipped = match text.strip_prefix("-1") {
        Some(rest) => format!("1{rest}"),
        None => format!("-{text}"),
    };
    fs::write(&design, flipped).unwrap();
    let d = dir.path().join("d");
    assert_eq!(run(&d, &["replay", a.join("manifest.json").to_str().unwrap()]), 2);
}

#[test]
fn sym_contour_has_resolution_squared_rows() {
    let dir = TempDir::new().unwrap();
    let code = run(
        dir.path(),
        &[
            "--budget", "256", "sym", "--n", "10", "--k", "4", "--p", "10", "--beta", "2", "--no-optimize",
            "--resolution", "4", "--summary", "fixed", "--lambda", "1",
        ],
    );
    assert_eq!(code, 0);
    let contour = fs::read_to_string(dir.path().join("contour.csv")).unwrap();
    assert_eq!(contour.lines().count(), 1 + 16);
    let report = json(&dir.path().join("sym.json"));
    let threshold = report["sign_condition_threshold"].as_f64().unwrap();
    assert!((threshold + 22.763).abs() < 0.05);
}

#[test]
fn simulate_agrees_with_analytic() {
    let dir = TempDir::new().unwrap();
    let design = block_design(dir.path());
    let code = run(
        dir.path(),
        &[
            "simulate", "--design", design.to_str().unwrap(), "--support", "0,1,2,3,4,5,6,7", "--beta", "1",
            "--lambda", "0.3", "--reps", "2000",
        ],
    );
    assert_eq!(code, 0);
    let r = json(&dir.path().join("simulate.json"));
    assert_eq!(r["replications"], 2000);
    assert_eq!(r["agree"], true);
}

#[test]
fn config_overlay_and_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sym.json");
    fs::write(&cfg, r#"{"n": 10, "k": 4, "q": 6, "beta": 2.0, "optimize": false, "resolution": 2}"#).unwrap();
    let out = dir.path().join("out");
    let code = run(
        &out,
        &["--budget", "256", "sym", "--config", cfg.to_str().unwrap(), "--resolution", "3", "--summary", "fixed", "--lambda", "1"],
    );
    assert_eq!(code, 0);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["resolution"], 3);
    assert_eq!(manifest["config"]["n"], 10);
    assert_eq!(manifest["inputs"][0]["role"], "config");
    assert_eq!(fs::read_to_string(out.join("contour.csv")).unwrap().lines().count(), 10);

    fs::write(&cfg, r#"{"n": 10, "bogus": 1}"#).unwrap();
    assert_eq!(run(&out, &["sym", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,0,1\n1,1,1\n").unwrap();
    assert_eq!(run(dir.path(), &["eval", "--design", bad.to_str().unwrap(), "--k", "1", "--beta", "1", "--lambda", "1"]), 2);
    assert_eq!(run(dir.path(), &["eval", "--design", "/nonexistent/design.csv", "--k", "1", "--beta", "1"]), 2);
    assert_eq!(run(dir.path(), &["construct", "--objective", "block", "--n", "7", "--k", "3", "--k1", "1"]), 2);

    // every pair of these columns is collinear after centering
    let collinear = dir.path().join("collinear.csv");
    fs::write(&collinear, "1,1\n-1,-1\n1,1\n-1,-1\n").unwrap();
    let code = run(
        dir.path(),
        &["eval", "--design", collinear.to_str().unwrap(), "--k", "2", "--beta", "1", "--lambda", "0.5"],
    );
    assert_eq!(code, 3);
}

#[test]
fn small_hils_run() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("hils-config.json");
    fs::write(
        &cfg,
        r#"{"n": 9, "p": 10, "k": 2, "beta": 3.0, "m_v": 2, "m_u": 2, "m_v_star": 1, "m_u_star": 1,
            "supports": {"nbibd": {"blocks": 6}},
            "curve": {"log_lambda_lower": -3.0, "step": 0.25, "epsilon": 1e-6, "log_lambda_cap": 3.0}}"#,
    )
    .unwrap();
    let code = run(dir.path(), &["--budget", "256", "hils", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let winner = fs::read_to_string(dir.path().join("winner.csv")).unwrap();
    let rows: Vec<&str> = winner.lines().collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.split(',').all(|t| t == "1" || t == "-1") && r.split(',').count() == 10));
    let report = json(&dir.path().join("hils.json"));
    assert!(!report["candidates"].as_array().unwrap().is_empty());
}
