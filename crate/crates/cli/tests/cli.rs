use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const HAWTHORNE: &str = "1483,-5.13,24.56;1532,-5.64,21.77;1565,-4.79,25.17";

fn noninf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noninf")).args(args).output().unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = noninf(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn num(v: &Value, key: &str) -> f64 {
    v["results"][key].as_f64().unwrap_or_else(|| panic!("no {key} in {v}"))
}

#[test]
fn reports_share_one_envelope() {
    let reports = [
        json_ok(&["test", "anova", "--summaries", HAWTHORNE, "--delta", "0.01"]),
        json_ok(&["power", "--n", "100", "--k", "2", "--delta", "0.1"]),
        json_ok(&["bf", "--r2", "0.1", "--n", "50", "--k", "1"]),
    ];
    for r in &reports {
        for key in ["command", "version", "inputs", "results", "warnings"] {
            assert!(r.get(key).is_some(), "missing {key} in {r}");
        }
    }
}

#[test]
fn hawthorne_summaries_and_r_squared_agree_on_the_decision() {
    let anova = json_ok(&["test", "anova", "--summaries", HAWTHORNE, "--delta", "0.01"]);
    let reg = json_ok(&["test", "regression", "--r2", "0.000216", "--n", "4580", "--k", "2", "--delta", "0.01"]);
    for r in [&anova, &reg] {
        let p = num(r, "p_noninf");
        assert!((p - 1.13e-9).abs() / 1.13e-9 < 0.05, "{p}");
        assert!((num(r, "p_nhst") - 0.61).abs() < 0.01);
        assert_eq!(r["results"]["decision"]["label"], "Negative");
    }
    assert_eq!(anova["inputs"]["delta"], 0.01);
}

#[test]
fn welch_variant_reports_f_prime() {
    let r = json_ok(&["test", "anova", "--summaries", HAWTHORNE, "--delta", "0.01", "--variant", "welch"]);
    let welch = &r["results"]["welch"];
    assert_eq!(num(&r, "f_stat"), welch["f_prime"].as_f64().unwrap());
    assert_eq!(num(&r, "df2"), welch["df_prime"].as_f64().unwrap());
    assert_eq!(r["results"]["tests"][1]["test_kind"], "AnovaNonInfWelch");
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}

#[test]
fn raw_data_and_summaries_give_the_same_anova() {
    let groups: Vec<(&str, Vec<f64>)> = vec![
        ("a", vec![1.2, 0.4, 2.2, 1.9, 0.8, 1.1]),
        ("b", vec![2.5, 3.1, 1.7, 2.9, 2.2]),
        ("c", vec![0.3, -0.6, 0.9, 0.2, 1.4, -0.1, 0.5]),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let mut text = String::from("score,arm\n");
    for (label, values) in &groups {
        for v in values {
            text.push_str(&format!("{v},{label}\n"));
        }
    }
    std::fs::write(&path, text).unwrap();
    let summaries: Vec<String> = groups
        .iter()
        .map(|(_, v)| {
            let (m, s) = mean_sd(v);
            format!("{},{m:?},{s:?}", v.len())
        })
        .collect();
    for variant in ["hom", "welch"] {
        let raw = json_ok(&[
            "test", "anova", "--input", path.to_str().unwrap(), "--y", "score", "--group", "arm",
            "--delta", "0.2", "--variant", variant,
        ]);
        let summ = json_ok(&["test", "anova", "--summaries", &summaries.join(";"), "--delta", "0.2", "--variant", variant]);
        for key in ["f_stat", "df2", "p_nhst", "p_noninf", "eta_sq_upper", "eta_sq_hat"] {
            let (a, b) = (num(&raw, key), num(&summ, key));
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{variant} {key}: {a} vs {b}");
        }
        assert_eq!(raw["results"]["levels"], serde_json::json!(["a", "b", "c"]));
    }
}

#[test]
fn raw_regression_matches_r_squared_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reg.csv");
    let mut text = String::from("y,x1,x2\n");
    for i in 0..40 {
        let x1 = (i as f64 * 0.37).sin();
        let x2 = ((i * 7 % 11) as f64) / 11.0;
        let y = 0.4 * x1 - 0.3 * x2 + ((i * 13 % 17) as f64 / 17.0 - 0.5);
        text.push_str(&format!("{y:?},{x1:?},{x2:?}\n"));
    }
    std::fs::write(&path, text).unwrap();
    let raw = json_ok(&["test", "regression", "--input", path.to_str().unwrap(), "--y", "y", "--x", "x1,x2", "--delta", "0.3"]);
    let r2 = num(&raw, "r_squared");
    let flags = json_ok(&["test", "regression", "--r2", &format!("{r2:?}"), "--n", "40", "--k", "2", "--delta", "0.3"]);
    for key in ["f_stat", "p_nhst", "p_noninf", "p_squared_upper"] {
        let (a, b) = (num(&raw, key), num(&flags, key));
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{key}: {a} vs {b}");
    }
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let header_only = dir.path().join("header.csv");
    std::fs::write(&header_only, "y,g\n").unwrap();
    let holes = dir.path().join("holes.csv");
    std::fs::write(&holes, "y,g\n1,a\n,b\n3,a\n4,\n").unwrap();

    for file in [&empty, &header_only] {
        let out = noninf(&["test", "anova", "--input", file.to_str().unwrap(), "--y", "y", "--group", "g", "--delta", "0.1"]);
        assert_eq!(code(&out), 2);
        assert!(!out.stderr.is_empty());
    }
    let out = noninf(&["test", "anova", "--input", holes.to_str().unwrap(), "--y", "y", "--group", "g", "--delta", "0.1"]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("rows 2"), "{msg}");

    // margin has no default
    assert_eq!(code(&noninf(&["test", "anova", "--summaries", HAWTHORNE])), 2);
    assert_eq!(code(&noninf(&["test", "anova", "--summaries", HAWTHORNE, "--delta", "1.5"])), 2);
    assert_eq!(code(&noninf(&["test", "anova", "--summaries", "10,1,1", "--delta", "0.1"])), 2);
    assert_eq!(code(&noninf(&["bf", "--r2", "0.1", "--n", "50", "--k", "1", "--rscale", "huge"])), 2);
    assert_eq!(code(&noninf(&["power", "--n", "100", "--delta", "0.1"])), 2);
    assert_eq!(code(&noninf(&["simulate", "no-such-config.cfg"])), 2);
}

#[test]
fn power_is_near_alpha_for_a_tiny_margin_and_grows_with_n() {
    let r = json_ok(&["power", "--n", "1000", "--k", "2", "--delta", "0.001", "--alpha", "0.05"]);
    let p = num(&r, "power");
    assert!(p > 0.05 && p < 0.2, "{p}");
    let table = json_ok(&["power", "--n", "50,100,183,184,400", "--k", "5", "--delta", "0.1"]);
    let powers: Vec<f64> = table["results"]["table"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row["power"].as_f64().unwrap())
        .collect();
    assert!(powers.windows(2).all(|w| w[1] >= w[0]), "{powers:?}");
    assert!(powers[2] < 0.95 && powers[3] >= 0.95);
    let anova = json_ok(&["power", "--n", "90", "--j", "3", "--delta", "0.1"]);
    assert!(num(&anova, "power") > 0.05);
}

#[test]
fn bayes_factor_command() {
    let r = json_ok(&["bf", "--r2", "0.000216", "--n", "4580", "--k", "2", "--threshold", "3"]);
    assert!((num(&r, "bf10") - 0.00284).abs() / 0.00284 < 0.02);
    assert_eq!(r["results"]["decision"], "Negative");
    let zero = json_ok(&["bf", "--r2", "0", "--n", "100", "--k", "3"]);
    assert!(num(&zero, "bf10") < 1.0);
    let wide = json_ok(&["bf", "--r2", "0.3", "--n", "60", "--k", "2", "--rscale", "wide"]);
    assert_eq!(wide["results"]["rscale"], 0.5);
    assert_eq!(wide["results"]["decision"], "Positive");
}

#[test]
fn human_output_uses_three_significant_figures() {
    let out = noninf(&["test", "regression", "--r2", "0.000216", "--n", "4580", "--k", "2", "--delta", "0.01", "--format", "human"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("p_noninf: 1.13e-9"), "{text}");
    assert!(text.contains("decision.label: Negative"));
}

const SMALL_CONFIG: &str = r#"
name = "small"
seed = 7
replicates = 120
alpha = 0.05
n_obs = [40, 90]
delta_grid = [0.05, 0.10]
boundary_delta = false
bf_thresholds = [3.0, 10.0]
rscale = "medium"

[[designs]]
k = 2
beta = [0.0, 0.3, 0.2]
sigma_sq = [1.0]
"#;

fn simulate(config: &Path, out: &Path, threads: &str) -> Value {
    json_ok(&[
        "simulate", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads, "--quiet",
    ])
}

#[test]
fn simulate_is_reproducible_and_feeds_agree() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.cfg");
    std::fs::write(&config, SMALL_CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let report = simulate(&config, &a, "1");
    simulate(&config, &b, "4");
    assert_eq!(report["results"]["scenarios"], 2);
    assert_eq!(report["results"]["failures"], 0);
    let csv_a = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("results.csv")).unwrap());
    // 2 scenarios x 2 margins x 2 thresholds
    assert_eq!(String::from_utf8_lossy(&csv_a).lines().count(), 1 + 8);
    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenarios"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["threads"], 1);

    let results = a.join("results.csv");
    let agree = json_ok(&["agree", "--results", results.to_str().unwrap(), "--delta", "0.10", "--threshold", "10"]);
    assert_eq!(agree["results"]["cells"], 2);
    assert_eq!(agree["results"]["replicates"], 240);
    let rate = num(&agree, "agreement");
    assert!((0.0..=1.0).contains(&rate));
    let missing = noninf(&["agree", "--results", results.to_str().unwrap(), "--delta", "0.2", "--threshold", "10"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn thread_count_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.cfg");
    std::fs::write(&config, SMALL_CONFIG).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_noninf"))
        .args(["simulate", config.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "-q", "--replicates", "20"])
        .env("NONINF_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"]["threads"], 2);
    assert_eq!(v["results"]["replicates"], 20);
}

#[test]
fn figure1_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig");
    let r = json_ok(&["figure1", "--out", out.to_str().unwrap(), "--k", "1"]);
    let map = std::fs::read_to_string(out.join("decision_map.csv")).unwrap();
    let contours = std::fs::read_to_string(out.join("bf_contours.csv")).unwrap();
    assert_eq!(map.lines().count() as u64, 1 + r["results"]["map_rows"].as_u64().unwrap());
    assert!(map.starts_with("k,n_obs,r_squared,p_nhst,p_noninf,cet"));
    assert_eq!(contours.lines().count() as u64, 1 + r["results"]["contour_rows"].as_u64().unwrap());
}
