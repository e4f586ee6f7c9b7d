//! End-to-end CLI checks: exit-code classes, artifact shapes, and the golden
//! backtest on the bundled synthetic panel.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covreg"))
        .current_dir(data_dir())
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_out(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("covreg-cli-test-{}-{name}", std::process::id()))
}

#[test]
fn fit_on_bundled_panel_writes_finite_fit() {
    let out = tmp_out("fit.json");
    let result = run(&[
        "fit",
        "--panel",
        "returns.csv",
        "--covariates",
        "covariates.csv",
        "--labels",
        "labels.csv",
        "--edges",
        "edges.txt",
        "--penalty",
        "scad",
        "--lambda",
        "0.05",
        "--standardize",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let beta = parsed["beta"].as_array().unwrap();
    assert_eq!(beta.len(), 7); // identity + 2 covariates x 2 + labels + edges
    assert!(beta.iter().all(|v| v.as_f64().unwrap().is_finite()));
    assert!(parsed["converged"].as_bool().unwrap());
    std::fs::remove_file(out).ok();
}

#[test]
fn fit_standard_errors_on_identity_basis() {
    // with the identity-only basis the plug-in covariance is a positive
    // multiple of I, so the sandwich standard errors are defined
    let out = tmp_out("fit-se.json");
    let result = run(&[
        "fit",
        "--panel",
        "returns.csv",
        "--lambda",
        "0.01",
        "--se",
        "--mu4",
        "estimate",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let ses = parsed["standard_errors"].as_array().unwrap();
    assert_eq!(ses.len(), 1);
    assert!(ses[0].as_f64().unwrap() > 0.0);
    std::fs::remove_file(out).ok();
}

#[test]
fn header_only_panel_is_a_data_error() {
    let path = tmp_out("empty.csv");
    std::fs::write(&path, "a,b\n").unwrap();
    let result = run(&["fit", "--panel", path.to_str().unwrap(), "--lambda", "0.1"]);
    assert_eq!(result.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&result.stderr);
    assert!(msg.contains("no data rows"), "{msg}");
    std::fs::remove_file(path).ok();
}

#[test]
fn non_numeric_cell_reports_its_location() {
    let result = run(&["fit", "--panel", "bad.csv", "--lambda", "0.1"]);
    assert_eq!(result.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&result.stderr);
    assert!(msg.contains("row 3") && msg.contains("column 2"), "{msg}");
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let result = run(&["frobnicate"]);
    assert_eq!(result.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&result.stderr);
    assert!(msg.to_lowercase().contains("usage"), "{msg}");
}

#[test]
fn missing_lambda_for_fit_is_a_data_error() {
    let result = run(&["fit", "--panel", "returns.csv"]);
    assert_eq!(result.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&result.stderr);
    assert!(msg.contains("--lambda") || msg.contains("tune"), "{msg}");
}

#[test]
fn non_pd_plugin_covariance_is_refused_as_numerical_error() {
    // the fitted covariance on the full basis is indefinite here; standard
    // errors refuse it rather than repairing
    let result = run(&[
        "fit",
        "--panel",
        "returns.csv",
        "--covariates",
        "covariates.csv",
        "--labels",
        "labels.csv",
        "--edges",
        "edges.txt",
        "--lambda",
        "0.05",
        "--standardize",
        "--se",
    ]);
    assert_eq!(result.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&result.stderr);
    assert!(msg.contains("positive definite"), "{msg}");
}

#[test]
fn tune_emits_score_table_with_resolved_config() {
    let out = tmp_out("tune.csv");
    let result = run(&[
        "tune",
        "--panel",
        "returns.csv",
        "--covariates",
        "covariates.csv",
        "--standardize",
        "--penalty",
        "mcp",
        "--n-lambda",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# penalty.family = mcp"));
    assert!(text.contains("# penalty.gamma = 1.5"));
    assert!(text.contains("# best_lambda = "));
    assert!(text.contains("lambda,df,rss,bic"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 8);
    std::fs::remove_file(out).ok();
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let config = tmp_out("config.toml");
    std::fs::write(
        &config,
        "[penalty]\nfamily = \"mcp\"\ngamma = 2.5\nlambda = 0.07\n",
    )
    .unwrap();
    let out = tmp_out("fit-config.json");
    let result = run(&[
        "fit",
        "--panel",
        "returns.csv",
        "--config",
        config.to_str().unwrap(),
        "--standardize",
        "--lambda",
        "0.02",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    // the flag overrode the config lambda; the config family stuck
    assert_eq!(parsed["selected_lambda"].as_f64().unwrap(), 0.02);
    let config_entries: Vec<(String, String)> =
        serde_json::from_value(parsed["config"].clone()).unwrap();
    assert!(config_entries
        .iter()
        .any(|(k, v)| k == "penalty.family" && v == "mcp"));
    assert!(config_entries
        .iter()
        .any(|(k, v)| k == "penalty.gamma" && v == "2.5"));
    std::fs::remove_file(config).ok();
    std::fs::remove_file(out).ok();
}

#[test]
fn backtest_matches_golden_report() {
    let out = tmp_out("backtest.csv");
    let result = run(&[
        "backtest",
        "--panel",
        "returns.csv",
        "--method",
        "scr,sample",
        "--covariates",
        "covariates.csv",
        "--labels",
        "labels.csv",
        "--edges",
        "edges.txt",
        "--marketcap",
        "marketcap.csv",
        "--window",
        "12",
        "--n-lambda",
        "10",
        "--seed",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let got = std::fs::read(&out).unwrap();
    let golden = std::fs::read(data_dir().join("golden_backtest.csv")).unwrap();
    assert_eq!(
        got,
        golden,
        "backtest report deviates from the golden file"
    );
    std::fs::remove_file(out).ok();
}

#[test]
fn backtest_factor_methods_and_returns_out() {
    let out = tmp_out("bt2.csv");
    let rets = tmp_out("bt2-returns.csv");
    let result = run(&[
        "backtest",
        "--panel",
        "returns.csv",
        "--method",
        "factor,factor+scr,lw",
        "--factors",
        "factors.csv",
        "--covariates",
        "covariates.csv",
        "--window",
        "12",
        "--n-lambda",
        "6",
        "--out",
        out.to_str().unwrap(),
        "--returns-out",
        rets.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let text = std::fs::read_to_string(&rets).unwrap();
    let data_rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, 1 + 12); // header + one row per out-of-sample period
    std::fs::remove_file(out).ok();
    std::fs::remove_file(rets).ok();
}

#[test]
fn portfolio_weights_sum_to_one() {
    let out = tmp_out("weights.csv");
    let result = run(&[
        "portfolio",
        "--panel",
        "returns.csv",
        "--method",
        "lw",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let total: f64 = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("asset"))
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-10, "weights sum to {total}");
    std::fs::remove_file(out).ok();
}
