//! Tidy CSV of result cells and the run manifest.

use std::io::{self, Write};

use serde::Serialize;

use super::{config::SimConfig, mc_se, ScenarioResult};
use crate::inference::{power_noninf, PowerKind};

pub const CSV_HEADER: &str = "scenario,seed,n_obs,k,sigma_sq,true_p_squared,closed_form_p_squared,\
replicates,completed,failures,mean_r_squared,delta,boundary,threshold,power_approx,\
noninf_rate,noninf_mc_se,nhst_rate,cet_positive,cet_negative,cet_inconclusive,\
bf_positive,bf_negative,bf_inconclusive,agreement,contradiction";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (scenario, Δ, threshold); scenarios without thresholds get
/// one row per Δ with the Bayes-factor columns left empty.
pub fn write_results_csv<W: Write>(results: &[ScenarioResult], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (index, r) in results.iter().enumerate() {
        let s = &r.scenario;
        let k = s.design.k();
        let thresholds: Vec<Option<usize>> = if s.bf_thresholds.is_empty() {
            vec![None]
        } else {
            (0..s.bf_thresholds.len()).map(Some).collect()
        };
        for (d, &delta) in r.deltas.iter().enumerate() {
            let power = power_noninf(s.n_obs, k, delta, s.alpha, PowerKind::Regression).ok();
            let rate = r.rejection_rate(d);
            let (cp, cn, ci) = r.cet[d].rates();
            for t in &thresholds {
                let (threshold, bf, agree, contra) = match *t {
                    Some(t) => (
                        Some(s.bf_thresholds[t]),
                        Some(r.bf[t].rates()),
                        Some(r.agreement(d, t)),
                        Some(r.contradiction(d, t)),
                    ),
                    None => (None, None, None, None),
                };
                writeln!(
                    out,
                    "{index},{},{},{k},{},{},{},{},{},{},{},{delta},{},{},{},{rate},{},{},{cp},{cn},{ci},{},{},{},{},{}",
                    s.seed,
                    s.n_obs,
                    s.sigma_sq,
                    r.true_p_squared,
                    r.closed_form_p_squared,
                    s.replicates,
                    r.completed,
                    r.failures,
                    r.mean_r_squared,
                    r.boundary_index == Some(d),
                    opt(threshold),
                    opt(power),
                    mc_se(rate, r.completed),
                    r.nhst_rate(),
                    opt(bf.map(|b| b.0)),
                    opt(bf.map(|b| b.1)),
                    opt(bf.map(|b| b.2)),
                    opt(agree),
                    opt(contra),
                )?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioManifest {
    pub index: usize,
    pub seed: u64,
    pub n_obs: usize,
    pub k: usize,
    pub beta: Vec<f64>,
    pub sigma_sq: f64,
    pub true_p_squared: f64,
    pub closed_form_p_squared: f64,
    pub completed: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub csv_schema: &'static str,
    pub config: SimConfig,
    pub replicates: usize,
    pub threads: usize,
    pub scenarios: Vec<ScenarioManifest>,
}

impl SimulationManifest {
    pub fn new(config: &SimConfig, replicates: usize, threads: usize, results: &[ScenarioResult]) -> Self {
        Self {
            tool: "noninf",
            version: env!("CARGO_PKG_VERSION"),
            csv_schema: "1",
            config: config.clone(),
            replicates,
            threads,
            scenarios: results
                .iter()
                .enumerate()
                .map(|(index, r)| ScenarioManifest {
                    index,
                    seed: r.scenario.seed,
                    n_obs: r.scenario.n_obs,
                    k: r.scenario.design.k(),
                    beta: r.scenario.beta.clone(),
                    sigma_sq: r.scenario.sigma_sq,
                    true_p_squared: r.true_p_squared,
                    closed_form_p_squared: r.closed_form_p_squared,
                    completed: r.completed,
                    failures: r.failures,
                    first_failure: r.first_failure.clone(),
                })
                .collect(),
        }
    }
}
