//! End-to-end CLI contract tests, driving the command dispatcher in-process.

use std::fs;

use oscint::cli;

fn run(args: &[&str]) -> i32 {
    cli::run(args.iter().map(|s| s.to_string()))
}

#[test]
fn run_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("wind_eit.json");
    let out = dir.path().join("series.csv");
    fs::write(
        &config,
        r#"{
            "problem": {"name": "wind", "r": 1.0, "eps": 1e-4},
            "method": "EI-T",
            "h": 0.5,
            "T": 50.0,
            "sampling": {"mode": "stride", "stride": 10}
        }"#,
    )
    .unwrap();
    let code = run(&[
        "oscint",
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,H,K,relerr_H,relerr_K");
    assert_eq!(lines.count(), 11); // t = 0, 5, 10, ..., 50
}

#[test]
fn config_output_field_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    let out = dir.path().join("from_config.csv");
    fs::write(
        &config,
        format!(
            r#"{{
                "problem": {{"name": "harmonic", "omega": 100.0}},
                "method": "EI-O1",
                "h": 0.1,
                "T": 1.0,
                "output": {:?}
            }}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    assert_eq!(
        run(&["oscint", "run", "--config", config.to_str().unwrap()]),
        0
    );
    assert!(out.exists());
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(
        &config,
        r#"{
            "problem": {"name": "wind", "r": 1.0, "eps": 1e-4},
            "method": "EI-T",
            "h": 0.5,
            "T": 50.0,
            "stride": 10
        }"#,
    )
    .unwrap();
    assert_eq!(
        run(&["oscint", "run", "--config", config.to_str().unwrap()]),
        1
    );
}

#[test]
fn missing_config_file_is_config_error() {
    assert_eq!(
        run(&["oscint", "run", "--config", "/nonexistent/cfg.json"]),
        1
    );
}

#[test]
fn unknown_method_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(
        &config,
        r#"{
            "problem": {"name": "wind", "r": 1.0, "eps": 1e-4},
            "method": "EI-O7",
            "h": 0.5,
            "T": 50.0
        }"#,
    )
    .unwrap();
    assert_eq!(
        run(&["oscint", "run", "--config", config.to_str().unwrap()]),
        1
    );
}

#[test]
fn divergent_run_is_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("diverge.json");
    fs::write(
        &config,
        r#"{
            "problem": {"name": "wind", "r": 1.0, "eps": 1.0, "y0": [5.0, 5.0]},
            "method": "EI-T",
            "h": 10.0,
            "T": 10.0
        }"#,
    )
    .unwrap();
    assert_eq!(
        run(&["oscint", "run", "--config", config.to_str().unwrap()]),
        2
    );
}

#[test]
fn check_reports_rev_cond_for_eio2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("check.json");
    let code = run(&[
        "oscint",
        "check",
        "--method",
        "EI-O2",
        "--problem",
        "wind",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["symplectic_rev_cond"], serde_json::json!(false));
    assert_eq!(report["method"], "EI-O2");
    assert!(report["assumptions"]["stepsize_ok"].as_bool().unwrap());
}

#[test]
fn check_reports_rev_cond_for_eio1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("check.json");
    let code = run(&[
        "oscint",
        "check",
        "--method",
        "EI-O1",
        "--problem",
        "wind",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["symplectic_rev_cond"], serde_json::json!(true));
    assert!(report["symmetric_numeric"].as_bool().unwrap());
}

#[test]
fn sweep_writes_per_run_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let summary = dir.path().join("summary.json");
    fs::write(
        &config,
        format!(
            r#"[
                {{
                    "problem": {{"name": "wind", "r": 1.0, "eps": 1e-4}},
                    "method": "EI-T", "h": 0.5, "T": 50.0,
                    "output": {:?}
                }},
                {{
                    "problem": {{"name": "wind", "r": 1.0, "eps": 1e-4}},
                    "method": "EI-O1", "h": 0.5, "T": 50.0,
                    "output": {:?}
                }}
            ]"#,
            out_a.to_str().unwrap(),
            out_b.to_str().unwrap()
        ),
    )
    .unwrap();
    let code = run(&[
        "oscint",
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out_a.exists() && out_b.exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
    assert_eq!(summary[0]["meta"]["method"], "EI-T");
    assert_eq!(summary[1]["meta"]["method"], "EI-O1");
}

#[test]
fn sweep_with_diverging_run_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    let good = dir.path().join("good.csv");
    let bad = dir.path().join("bad.csv");
    let summary = dir.path().join("summary.json");
    fs::write(
        &config,
        format!(
            r#"[
                {{
                    "problem": {{"name": "wind", "r": 1.0, "eps": 1e-4}},
                    "method": "EI-T", "h": 0.5, "T": 10.0,
                    "output": {:?}
                }},
                {{
                    "problem": {{"name": "wind", "r": 1.0, "eps": 1.0, "y0": [5.0, 5.0]}},
                    "method": "EI-T", "h": 10.0, "T": 10.0,
                    "output": {:?}
                }}
            ]"#,
            good.to_str().unwrap(),
            bad.to_str().unwrap()
        ),
    )
    .unwrap();
    let code = run(&[
        "oscint",
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    // The healthy run still produced its CSV and appears in the summary.
    assert!(good.exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 1);
}

#[test]
fn converge_emits_fitted_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("converge.json");
    let code = run(&[
        "oscint",
        "converge",
        "--method",
        "EI-T",
        "--problem",
        "wind",
        "--eps",
        "1e-2",
        "--h",
        "0.01,0.005,0.0025",
        "--T",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let study: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let order = study["order"].as_f64().unwrap();
    assert!((order - 2.0).abs() <= 0.2, "fitted order {order}");
}

#[test]
fn fit_modes_reports_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("modes.json");
    let code = run(&[
        "oscint",
        "fit-modes",
        "--problem",
        "wind",
        "--h",
        "1e-5",
        "--T",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["hierarchy_nonincreasing"].as_bool().unwrap());
    let orders = report["amplitude_by_order"].as_array().unwrap();
    assert_eq!(orders.len(), 3);
    assert!(orders[0].as_f64().unwrap() > 10.0 * orders[1].as_f64().unwrap());
}

#[test]
fn bad_flags_exit_one_help_exits_zero() {
    assert_eq!(run(&["oscint", "run"]), 1); // missing --config
    assert_eq!(run(&["oscint", "--help"]), 0);
    assert_eq!(run(&["oscint", "no-such-command"]), 1);
}
