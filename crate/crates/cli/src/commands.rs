use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use noninf::bayes::{bf_decide, jzs_bf_regression, rscale};
use noninf::inference::{
    cet_decide, eta_sq_upper_ci, nhst_anova, nhst_anova_welch, nhst_regression, noninf_anova_hom,
    noninf_anova_welch, noninf_regression, power_noninf, PowerKind, TestResult,
};
use noninf::model_fit::{anova_from_groups, anova_from_summaries, fit_regression, AnovaSummary, RegressionSummary, WelchStatus};
use noninf::simulation::{
    bf_contours, decision_map, load_config, run_scenario, write_results_csv, MapGrid, ScenarioResult,
    SimulationManifest,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::input::{parse_summaries, Table};
use crate::report::Report;
use crate::{AgreeArgs, AnovaArgs, BfArgs, Figure1Args, PowerArgs, RegressionArgs, SimulateArgs, Variant};

fn parse_rscale(text: &str) -> anyhow::Result<f64> {
    rscale::parse(text).with_context(|| format!("unknown prior scale {text:?} (medium, wide, ultrawide or a positive number)"))
}

fn test_warnings(tests: &[&TestResult], warnings: &mut Vec<String>) {
    for t in tests {
        if t.p_underflow {
            warnings.push(format!("{:?} p-value underflowed; reported as an upper bound", t.test_kind));
        }
    }
}

fn decision(nhst: &TestResult, noninf: &TestResult, alpha: f64, warnings: &mut Vec<String>) -> Value {
    let d = cet_decide(nhst.p_value, noninf.p_value, alpha);
    if d.significant_yet_not_meaningful {
        warnings.push("effect is significantly non-zero but also significantly below the margin".into());
    }
    json!(d)
}

pub fn test_regression(args: &RegressionArgs) -> anyhow::Result<Report> {
    let summary_flags = args.r2.is_some() || args.n.is_some() || args.k.is_some();
    let s: RegressionSummary = match (&args.input, summary_flags) {
        (Some(_), true) => bail!("give either --input or --r2/--n/--k, not both"),
        (Some(path), false) => {
            let y_name = args.y.as_deref().context("--input needs --y")?;
            if args.x.is_empty() {
                bail!("--input needs --x with at least one covariate");
            }
            let table = Table::read(path)?;
            let y = table.numeric(y_name)?;
            let xs = args.x.iter().map(|c| table.numeric(c)).collect::<anyhow::Result<Vec<_>>>()?;
            fit_regression(&y, &xs)?
        }
        (None, true) => {
            let (Some(r2), Some(n), Some(k)) = (args.r2, args.n, args.k) else {
                bail!("--r2, --n and --k must be given together");
            };
            RegressionSummary::from_r_squared(n, k, r2)?
        }
        (None, false) => bail!("give --input with --y/--x, or --r2/--n/--k"),
    };
    let nhst = nhst_regression(&s, args.alpha)?;
    let noninf = noninf_regression(&s, args.delta, args.alpha)?;
    let upper = eta_sq_upper_ci(s.f_stat, s.df1(), s.df2(), s.n_obs, args.alpha)?;
    let mut warnings = Vec::new();
    if s.perfect_fit {
        warnings.push("perfect fit (R² = 1); F is infinite".into());
    }
    test_warnings(&[&nhst, &noninf], &mut warnings);
    let decision = decision(&nhst, &noninf, args.alpha, &mut warnings);
    let inputs = json!({
        "input": args.input, "y": args.y, "x": args.x, "r2": args.r2, "n": args.n, "k": args.k,
        "delta": args.delta, "alpha": args.alpha,
    });
    let results = json!({
        "n_obs": s.n_obs,
        "k": s.n_predictors,
        "r_squared": s.r_squared,
        "f_stat": s.f_stat,
        "df1": s.df1(),
        "df2": s.df2(),
        "ncp": noninf.ncp_used,
        "p_nhst": nhst.p_value,
        "p_noninf": noninf.p_value,
        "p_squared_upper": upper,
        "decision": decision,
        "tests": [nhst, noninf],
    });
    Ok(Report::new("test regression", inputs, results, warnings))
}

pub fn test_anova(args: &AnovaArgs) -> anyhow::Result<Report> {
    let (labels, a): (Option<Vec<String>>, AnovaSummary) = match (&args.summaries, &args.input) {
        (Some(_), Some(_)) => bail!("give either --summaries or --input, not both"),
        (Some(text), None) => (None, anova_from_summaries(&parse_summaries(text)?)?),
        (None, Some(path)) => {
            let y = args.y.as_deref().context("--input needs --y")?;
            let group = args.group.as_deref().context("--input needs --group")?;
            let (levels, groups) = Table::read(path)?.grouped(y, group)?;
            (Some(levels), anova_from_groups(&groups)?)
        }
        (None, None) => bail!("give --summaries or --input with --y/--group"),
    };
    let mut warnings = Vec::new();
    let (nhst, noninf, statistic, df2) = match args.variant {
        Variant::Hom => (
            nhst_anova(&a, args.alpha)?,
            noninf_anova_hom(&a, args.delta, args.alpha)?,
            a.f_stat,
            a.df_within(),
        ),
        Variant::Welch => {
            let w = a.welch.stats()?;
            (
                nhst_anova_welch(&a, args.alpha)?,
                noninf_anova_welch(&a, args.delta, args.alpha)?,
                w.f_prime,
                w.df_prime,
            )
        }
    };
    if a.negative_estimate {
        warnings.push("a bias-corrected effect size estimate is negative".into());
    }
    if let (Variant::Hom, WelchStatus::Unavailable(why)) = (args.variant, &a.welch) {
        warnings.push(format!("Welch statistics unavailable: {why}"));
    }
    test_warnings(&[&nhst, &noninf], &mut warnings);
    let upper = eta_sq_upper_ci(statistic, a.df_between(), df2, a.n_obs, args.alpha)?;
    let decision = decision(&nhst, &noninf, args.alpha, &mut warnings);
    let inputs = json!({
        "summaries": args.summaries, "input": args.input, "y": args.y, "group": args.group,
        "delta": args.delta, "alpha": args.alpha, "variant": format!("{:?}", args.variant).to_lowercase(),
    });
    let results = json!({
        "n_obs": a.n_obs,
        "groups": a.groups,
        "levels": labels,
        "f_stat": statistic,
        "df1": a.df_between(),
        "df2": df2,
        "ncp": noninf.ncp_used,
        "p_nhst": nhst.p_value,
        "p_noninf": noninf.p_value,
        "eta_sq_upper": upper,
        "eta_sq_hat": a.eta_sq_hat,
        "epsilon_sq_hat": a.epsilon_sq_hat,
        "omega_sq_hat": a.omega_sq_hat,
        "homogeneous_f": a.f_stat,
        "welch": a.welch.stats().ok(),
        "decision": decision,
        "tests": [nhst, noninf],
    });
    Ok(Report::new("test anova", inputs, results, warnings))
}

pub fn power(args: &PowerArgs) -> anyhow::Result<Report> {
    let (kind, size) = match (args.k, args.j) {
        (Some(k), None) => (PowerKind::Regression, k),
        (None, Some(j)) => (PowerKind::Anova, j),
        _ => bail!("give exactly one of --k (regression) or --j (ANOVA groups)"),
    };
    let rows = args
        .n
        .iter()
        .map(|&n| Ok(json!({"n": n, "power": power_noninf(n, size, args.delta, args.alpha, kind)?})))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let inputs = json!({"n": args.n, "k": args.k, "j": args.j, "delta": args.delta, "alpha": args.alpha});
    let results = if rows.len() == 1 {
        rows[0].clone()
    } else {
        json!({ "table": rows })
    };
    Ok(Report::new("power", inputs, results, Vec::new()))
}

pub fn bf(args: &BfArgs) -> anyhow::Result<Report> {
    let scale = parse_rscale(&args.rscale)?;
    let s = RegressionSummary::from_r_squared(args.n, args.k, args.r2)?;
    let b = jzs_bf_regression(&s, scale, args.threshold)?;
    let d = bf_decide(&b);
    let inputs = json!({"r2": args.r2, "n": args.n, "k": args.k, "rscale": args.rscale, "threshold": args.threshold});
    let results = json!({
        "bf10": b.bf10,
        "bf01": 1.0 / b.bf10,
        "log_bf10": b.log_bf10,
        "rscale": b.rscale,
        "decision": d.label,
    });
    Ok(Report::new("bf", inputs, results, Vec::new()))
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<Report> {
    let config = load_config(&args.config)?;
    let replicates = match (args.replicates, args.full) {
        (Some(r), _) => r,
        (None, true) => config.full_replicates.context("config has no full_replicates")?,
        (None, false) => config.replicates,
    };
    let scenarios = config.scenarios(Some(replicates))?;
    let threads = match args.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let total = scenarios.len();
    let results: Vec<ScenarioResult> = pool.install(|| {
        scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if !args.quiet {
                    eprintln!("[{}/{total}] N = {}, K = {}, sigma^2 = {}", i + 1, s.n_obs, s.design.k(), s.sigma_sq);
                }
                run_scenario(s)
            })
            .collect::<Result<_, _>>()
    })?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join("results.csv");
    let manifest_path = args.out.join("manifest.json");
    write_results_csv(&results, BufWriter::new(create(&csv_path)?))?;
    let manifest = SimulationManifest::new(&config, replicates, threads, &results);
    serde_json::to_writer_pretty(BufWriter::new(create(&manifest_path)?), &manifest)?;

    let failures: u64 = results.iter().map(|r| r.failures).sum();
    let mut warnings = Vec::new();
    for (i, r) in results.iter().enumerate().filter(|(_, r)| r.failures > 0) {
        warnings.push(format!(
            "scenario {i}: {} of {} replicates failed ({})",
            r.failures,
            r.scenario.replicates,
            r.first_failure.as_deref().unwrap_or("unknown")
        ));
    }
    let inputs = json!({
        "config": args.config, "replicates": args.replicates, "full": args.full,
        "out": args.out, "threads": args.threads,
    });
    let results = json!({
        "name": config.name,
        "scenarios": total,
        "replicates": replicates,
        "threads": threads,
        "failures": failures,
        "results_csv": csv_path,
        "manifest": manifest_path,
    });
    Ok(Report::new("simulate", inputs, results, warnings))
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

#[derive(Deserialize)]
struct CsvCell {
    completed: u64,
    delta: f64,
    threshold: Option<f64>,
    agreement: Option<f64>,
    contradiction: Option<f64>,
}

pub fn agree(args: &AgreeArgs) -> anyhow::Result<Report> {
    let mut reader = csv::Reader::from_path(&args.results).with_context(|| format!("reading {}", args.results.display()))?;
    let (mut agree, mut contra, mut total, mut cells) = (0.0, 0.0, 0u64, 0usize);
    for (row, record) in reader.deserialize::<CsvCell>().enumerate() {
        let cell = record.with_context(|| format!("row {} of {}", row + 1, args.results.display()))?;
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        if !same(cell.delta, args.delta) || !cell.threshold.is_some_and(|t| same(t, args.threshold)) {
            continue;
        }
        let (Some(a), Some(c)) = (cell.agreement, cell.contradiction) else {
            bail!("row {} lacks agreement columns", row + 1);
        };
        agree += a * cell.completed as f64;
        contra += c * cell.completed as f64;
        total += cell.completed;
        cells += 1;
    }
    if cells == 0 {
        bail!("no rows with delta = {} and threshold = {} in {}", args.delta, args.threshold, args.results.display());
    }
    let inputs = json!({"results": args.results, "delta": args.delta, "threshold": args.threshold});
    let results = json!({
        "cells": cells,
        "replicates": total,
        "agreement": agree / total as f64,
        "contradiction": contra / total as f64,
    });
    Ok(Report::new("agree", inputs, results, Vec::new()))
}

pub fn figure1(args: &Figure1Args) -> anyhow::Result<Report> {
    let grid = MapGrid {
        ks: args.k.clone(),
        delta: args.delta,
        alpha: args.alpha,
        threshold: args.threshold,
        rscale: parse_rscale(&args.rscale)?,
        ..MapGrid::default()
    };
    let rows = decision_map(&grid)?;
    let levels = [1.0 / args.threshold, args.threshold];
    let contours = bf_contours(&grid.ks, &grid.ns, &levels, grid.rscale)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let map_path: PathBuf = args.out.join("decision_map.csv");
    let contour_path: PathBuf = args.out.join("bf_contours.csv");
    let mut w = csv::Writer::from_writer(create(&map_path)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(create(&contour_path)?);
    for c in &contours {
        w.serialize(c)?;
    }
    w.flush()?;
    let inputs = json!({
        "out": args.out, "k": args.k, "delta": args.delta, "alpha": args.alpha,
        "threshold": args.threshold, "rscale": args.rscale,
    });
    let results = json!({
        "decision_map": map_path,
        "map_rows": rows.len(),
        "bf_contours": contour_path,
        "contour_rows": contours.len(),
    });
    Ok(Report::new("figure1", inputs, results, Vec::new()))
}
