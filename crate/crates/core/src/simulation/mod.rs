//! Monte Carlo engine for the operating characteristics of the non-inferiority
//! test, CET and the JZS Bayes factor under fixed binary designs.

mod anova;
mod config;
mod figures;
mod output;

pub use anova::{simulate_groups, AnovaDesign, AnovaDesignError};
pub use config::{load_config, parse_config, preset, ConfigError, SimConfig};
pub use figures::{bf_contours, decision_map, BfContourPoint, DecisionMapRow, MapError, MapGrid};
pub use output::{write_results_csv, ScenarioManifest, SimulationManifest, CSV_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{bf_decide, jzs_bf_regression, BayesError};
use crate::distributions::{ncf_cdf, ncf_sf, NcfParams};
use crate::inference::{cet_decide, margin_ncp, DecisionLabel, TestError};
use crate::model_fit::{DesignMatrix, FitError};

/// Replicates handled per parallel work item. Fixed so the reduction order
/// never depends on the worker count.
const CHUNK: usize = 250;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Test(#[from] TestError),
    #[error("no result cell for delta = {delta}, threshold = {threshold}")]
    MissingCell { delta: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// `K` binary covariates over the `2^K` full-factorial cells.
    BinaryOrthogonalBalanced { k: usize },
}

impl Design {
    pub fn k(&self) -> usize {
        match *self {
            Design::BinaryOrthogonalBalanced { k } => k,
        }
    }

    pub fn n_cells(&self) -> usize {
        1 << self.k()
    }

    /// Cell order used when filling rows: even-parity cells, then odd-parity
    /// cells, each in increasing index. Any run of `2^K` consecutive rows is a
    /// full replicate of the factorial; a leftover half-run is a regular
    /// half-fraction.
    fn cell_order(&self) -> Vec<usize> {
        let n = self.n_cells();
        let even = (0..n).filter(|c| c.count_ones() % 2 == 0);
        let odd = (0..n).filter(|c| c.count_ones() % 2 == 1);
        even.chain(odd).collect()
    }

    /// Covariate columns (without intercept) for `n_obs` rows.
    pub fn columns(&self, n_obs: usize) -> Vec<Vec<f64>> {
        let k = self.k();
        let order = self.cell_order();
        (0..k)
            .map(|j| {
                (0..n_obs)
                    .map(|i| ((order[i % order.len()] >> j) & 1) as f64)
                    .collect()
            })
            .collect()
    }
}

/// Population P² of a balanced 0/1 factorial: each covariate has variance
/// 1/4 and they are uncorrelated.
pub fn true_p_squared(beta: &[f64], design: Design, sigma_sq: f64) -> Result<f64, SimError> {
    if beta.len() != design.k() + 1 {
        return Err(SimError::InvalidScenario(format!(
            "beta has {} entries, expected K + 1 = {}",
            beta.len(),
            design.k() + 1
        )));
    }
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(SimError::InvalidScenario(format!(
            "sigma_sq must be positive, got {sigma_sq}"
        )));
    }
    let explained: f64 = beta[1..].iter().map(|b| b * b).sum::<f64>() / 4.0;
    Ok(explained / (explained + sigma_sq))
}

/// P² of the realized design: explained variance of `Xβ` over the rows
/// (divisor N) against σ². Equals [`true_p_squared`] when N is a multiple
/// of `2^K`.
pub fn realized_p_squared(columns: &[Vec<f64>], beta: &[f64], sigma_sq: f64) -> f64 {
    let mu = linear_predictor(columns, beta);
    let n = mu.len() as f64;
    let mean = mu.iter().sum::<f64>() / n;
    let var = mu.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
    var / (var + sigma_sq)
}

fn linear_predictor(columns: &[Vec<f64>], beta: &[f64]) -> Vec<f64> {
    let n = columns.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| beta[0] + columns.iter().zip(&beta[1..]).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_obs: usize,
    pub design: Design,
    /// Intercept first.
    pub beta: Vec<f64>,
    pub sigma_sq: f64,
    pub delta_grid: Vec<f64>,
    /// Also test at Δ = realized P² (skipped when P² = 0).
    pub boundary_delta: bool,
    pub alpha: f64,
    pub bf_thresholds: Vec<f64>,
    pub rscale: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        let k = self.design.k();
        if k == 0 || k > 20 {
            return bad(format!("K must be between 1 and 20, got {k}"));
        }
        true_p_squared(&self.beta, self.design, self.sigma_sq)?;
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite".into());
        }
        if self.n_obs <= self.design.n_cells().max(k + 1) {
            return bad(format!(
                "N = {} must exceed the {} design cells",
                self.n_obs,
                self.design.n_cells()
            ));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(d) = self.delta_grid.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return bad(format!("delta must lie in (0, 1), got {d}"));
        }
        if let Some(t) = self.bf_thresholds.iter().find(|t| !(**t > 1.0)) {
            return bad(format!("BF threshold must exceed 1, got {t}"));
        }
        if !self.bf_thresholds.is_empty() && !(self.rscale > 0.0 && self.rscale.is_finite()) {
            return bad(format!("rscale must be positive, got {}", self.rscale));
        }
        Ok(())
    }
}

/// Deterministic dataset for one replicate: the fixed design columns and
/// `y ~ Normal(Xβ, σ²)`.
pub fn simulate_dataset(
    scenario: &Scenario,
    replicate_index: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), SimError> {
    scenario.validate()?;
    let columns = scenario.design.columns(scenario.n_obs);
    let mu = linear_predictor(&columns, &scenario.beta);
    let y = draw_outcome(&mu, scenario.sigma_sq.sqrt(), scenario.seed, replicate_index);
    Ok((y, columns))
}

fn replicate_rng(seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate_index);
    rng
}

fn draw_outcome(mu: &[f64], sigma: f64, seed: u64, replicate_index: u64) -> Vec<f64> {
    let mut rng = replicate_rng(seed, replicate_index);
    mu.iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(&mut rng);
            m + sigma * z
        })
        .collect()
}

/// Positive / negative / inconclusive counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub positive: u64,
    pub negative: u64,
    pub inconclusive: u64,
}

impl OutcomeCounts {
    fn add(&mut self, label: DecisionLabel) {
        match label {
            DecisionLabel::Positive => self.positive += 1,
            DecisionLabel::Negative => self.negative += 1,
            DecisionLabel::Inconclusive => self.inconclusive += 1,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.positive += other.positive;
        self.negative += other.negative;
        self.inconclusive += other.inconclusive;
    }

    pub fn total(&self) -> u64 {
        self.positive + self.negative + self.inconclusive
    }

    /// (positive, negative, inconclusive) proportions.
    pub fn rates(&self) -> (f64, f64, f64) {
        let n = self.total().max(1) as f64;
        (
            self.positive as f64 / n,
            self.negative as f64 / n,
            self.inconclusive as f64 / n,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// P² of the realized design, which sets the boundary Δ.
    pub true_p_squared: f64,
    pub closed_form_p_squared: f64,
    /// Sorted Δ values actually tested (grid plus boundary).
    pub deltas: Vec<f64>,
    pub boundary_index: Option<usize>,
    pub completed: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
    pub mean_r_squared: f64,
    pub nhst_rejections: u64,
    pub noninf_rejections: Vec<u64>,
    pub cet: Vec<OutcomeCounts>,
    pub bf: Vec<OutcomeCounts>,
    /// Row-major over (Δ, threshold).
    pub agreements: Vec<u64>,
    pub contradictions: Vec<u64>,
}

/// Monte Carlo standard error of a proportion.
pub fn mc_se(p: f64, replicates: u64) -> f64 {
    (p * (1.0 - p) / replicates.max(1) as f64).sqrt()
}

impl ScenarioResult {
    fn rate(&self, count: u64) -> f64 {
        count as f64 / self.completed.max(1) as f64
    }

    pub fn nhst_rate(&self) -> f64 {
        self.rate(self.nhst_rejections)
    }

    pub fn rejection_rate(&self, delta_index: usize) -> f64 {
        self.rate(self.noninf_rejections[delta_index])
    }

    pub fn rejection_mc_se(&self, delta_index: usize) -> f64 {
        mc_se(self.rejection_rate(delta_index), self.completed)
    }

    pub fn delta_index(&self, delta: f64) -> Option<usize> {
        self.deltas.iter().position(|d| (d - delta).abs() <= 1e-12)
    }

    pub fn threshold_index(&self, threshold: f64) -> Option<usize> {
        self.scenario
            .bf_thresholds
            .iter()
            .position(|t| (t - threshold).abs() <= 1e-12)
    }

    fn cell(&self, delta_index: usize, threshold_index: usize) -> usize {
        delta_index * self.scenario.bf_thresholds.len() + threshold_index
    }

    pub fn agreement(&self, delta_index: usize, threshold_index: usize) -> f64 {
        self.rate(self.agreements[self.cell(delta_index, threshold_index)])
    }

    pub fn contradiction(&self, delta_index: usize, threshold_index: usize) -> f64 {
        self.rate(self.contradictions[self.cell(delta_index, threshold_index)])
    }
}

/// Everything fixed across replicates of one scenario.
struct Prepared {
    design: DesignMatrix,
    mu: Vec<f64>,
    sigma: f64,
    nhst: NcfParams,
    noninf: Vec<NcfParams>,
}

#[derive(Debug, Clone)]
struct Tally {
    completed: u64,
    failures: u64,
    first_failure: Option<String>,
    r2_sum: f64,
    nhst: u64,
    noninf: Vec<u64>,
    cet: Vec<OutcomeCounts>,
    bf: Vec<OutcomeCounts>,
    agree: Vec<u64>,
    contra: Vec<u64>,
}

impl Tally {
    fn new(n_delta: usize, n_threshold: usize) -> Self {
        Self {
            completed: 0,
            failures: 0,
            first_failure: None,
            r2_sum: 0.0,
            nhst: 0,
            noninf: vec![0; n_delta],
            cet: vec![OutcomeCounts::default(); n_delta],
            bf: vec![OutcomeCounts::default(); n_threshold],
            agree: vec![0; n_delta * n_threshold],
            contra: vec![0; n_delta * n_threshold],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.completed += other.completed;
        self.failures += other.failures;
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
        self.r2_sum += other.r2_sum;
        self.nhst += other.nhst;
        for (a, b) in self.noninf.iter_mut().zip(&other.noninf) {
            *a += b;
        }
        for (a, b) in self.cet.iter_mut().zip(&other.cet) {
            a.merge(b);
        }
        for (a, b) in self.bf.iter_mut().zip(&other.bf) {
            a.merge(b);
        }
        for (a, b) in self.agree.iter_mut().zip(&other.agree) {
            *a += b;
        }
        for (a, b) in self.contra.iter_mut().zip(&other.contra) {
            *a += b;
        }
        self
    }
}

struct Replicate {
    r2: f64,
    p_nhst: f64,
    p_noninf: Vec<f64>,
    bf_labels: Vec<DecisionLabel>,
}

fn run_replicate(
    scenario: &Scenario,
    prep: &Prepared,
    index: u64,
) -> Result<Replicate, String> {
    let y = draw_outcome(&prep.mu, prep.sigma, scenario.seed, index);
    let summary = prep.design.summarize(&y).map_err(|e| e.to_string())?;
    let p_nhst = ncf_sf(summary.f_stat, &prep.nhst).map_err(|e| e.to_string())?;
    let p_noninf = prep
        .noninf
        .iter()
        .map(|params| ncf_cdf(summary.f_stat, params))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let bf_labels = if let Some(&first) = scenario.bf_thresholds.first() {
        let bf = jzs_bf_regression(&summary, scenario.rscale, first)
            .map_err(|e: BayesError| e.to_string())?;
        scenario
            .bf_thresholds
            .iter()
            .map(|&threshold| bf_decide(&crate::bayes::BfResult { threshold, ..bf }).label)
            .collect()
    } else {
        Vec::new()
    };
    Ok(Replicate {
        r2: summary.r_squared,
        p_nhst,
        p_noninf,
        bf_labels,
    })
}

fn tally_chunk(scenario: &Scenario, prep: &Prepared, range: std::ops::Range<u64>) -> Tally {
    let n_threshold = scenario.bf_thresholds.len();
    let mut tally = Tally::new(prep.noninf.len(), n_threshold);
    for index in range {
        let rep = match run_replicate(scenario, prep, index) {
            Ok(rep) => rep,
            Err(msg) => {
                tally.failures += 1;
                if tally.first_failure.is_none() {
                    tally.first_failure = Some(format!("replicate {index}: {msg}"));
                }
                continue;
            }
        };
        tally.completed += 1;
        tally.r2_sum += rep.r2;
        if rep.p_nhst < scenario.alpha {
            tally.nhst += 1;
        }
        for (t, label) in rep.bf_labels.iter().enumerate() {
            tally.bf[t].add(*label);
        }
        for (d, &p) in rep.p_noninf.iter().enumerate() {
            if p < scenario.alpha {
                tally.noninf[d] += 1;
            }
            let cet = cet_decide(rep.p_nhst, p, scenario.alpha).label;
            tally.cet[d].add(cet);
            for (t, &bf) in rep.bf_labels.iter().enumerate() {
                let cell = d * n_threshold + t;
                if bf == cet {
                    tally.agree[cell] += 1;
                }
                let opposite = matches!(
                    (bf, cet),
                    (DecisionLabel::Positive, DecisionLabel::Negative)
                        | (DecisionLabel::Negative, DecisionLabel::Positive)
                );
                if opposite {
                    tally.contra[cell] += 1;
                }
            }
        }
    }
    tally
}

/// Runs every replicate of a scenario on the current rayon pool.
///
/// Replicates are split into fixed chunks whose tallies are reduced in chunk
/// order, so the result is bit-identical for any number of worker threads.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult, SimError> {
    scenario.validate()?;
    let k = scenario.design.k();
    let columns = scenario.design.columns(scenario.n_obs);
    let closed_form = true_p_squared(&scenario.beta, scenario.design, scenario.sigma_sq)?;
    let realized = realized_p_squared(&columns, &scenario.beta, scenario.sigma_sq);

    let mut deltas = scenario.delta_grid.clone();
    if scenario.boundary_delta && realized > 0.0 {
        deltas.push(realized);
    }
    deltas.sort_by(f64::total_cmp);
    deltas.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let boundary_index = if scenario.boundary_delta && realized > 0.0 {
        deltas.iter().position(|d| (d - realized).abs() <= 1e-12)
    } else {
        None
    };

    let df1 = k as f64;
    let df2 = (scenario.n_obs - k - 1) as f64;
    let nhst = NcfParams::central(df1, df2).map_err(TestError::from)?;
    let noninf = deltas
        .iter()
        .map(|&d| NcfParams::new(df1, df2, margin_ncp(scenario.n_obs, d)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(TestError::from)?;
    let prep = Prepared {
        design: DesignMatrix::new(&columns)?,
        mu: linear_predictor(&columns, &scenario.beta),
        sigma: scenario.sigma_sq.sqrt(),
        nhst,
        noninf,
    };

    let reps = scenario.replicates as u64;
    let chunks: Vec<std::ops::Range<u64>> = (0..reps)
        .step_by(CHUNK)
        .map(|start| start..(start + CHUNK as u64).min(reps))
        .collect();
    let partials: Vec<Tally> = chunks
        .into_par_iter()
        .map(|range| tally_chunk(scenario, &prep, range))
        .collect();
    let tally = partials
        .into_iter()
        .fold(Tally::new(deltas.len(), scenario.bf_thresholds.len()), Tally::merge);

    Ok(ScenarioResult {
        scenario: scenario.clone(),
        true_p_squared: realized,
        closed_form_p_squared: closed_form,
        deltas,
        boundary_index,
        completed: tally.completed,
        failures: tally.failures,
        first_failure: tally.first_failure,
        mean_r_squared: tally.r2_sum / tally.completed.max(1) as f64,
        nhst_rejections: tally.nhst,
        noninf_rejections: tally.noninf,
        cet: tally.cet,
        bf: tally.bf,
        agreements: tally.agree,
        contradictions: tally.contra,
    })
}

/// Replicate-weighted (agreement, contradiction) rates across scenarios.
pub fn agreement_summary(
    results: &[ScenarioResult],
    delta: f64,
    threshold: f64,
) -> Result<(f64, f64), SimError> {
    let missing = || SimError::MissingCell { delta, threshold };
    if results.is_empty() {
        return Err(missing());
    }
    let (mut agree, mut contra, mut total) = (0u64, 0u64, 0u64);
    for r in results {
        let d = r.delta_index(delta).ok_or_else(missing)?;
        let t = r.threshold_index(threshold).ok_or_else(missing)?;
        let cell = r.cell(d, t);
        agree += r.agreements[cell];
        contra += r.contradictions[cell];
        total += r.completed;
    }
    let total = total.max(1) as f64;
    Ok((agree as f64 / total, contra as f64 / total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(n_obs: usize, k: usize, beta: Vec<f64>, sigma_sq: f64) -> Scenario {
        Scenario {
            n_obs,
            design: Design::BinaryOrthogonalBalanced { k },
            beta,
            sigma_sq,
            delta_grid: vec![0.05, 0.1],
            boundary_delta: true,
            alpha: 0.05,
            bf_thresholds: vec![3.0],
            rscale: crate::bayes::rscale::MEDIUM,
            replicates: 40,
            seed: 7,
        }
    }

    #[test]
    fn closed_form_p_squared_values() {
        let d2 = Design::BinaryOrthogonalBalanced { k: 2 };
        let d4 = Design::BinaryOrthogonalBalanced { k: 4 };
        let b2 = [0.0, 0.2, 0.3];
        let b4 = [0.0, 0.2, 0.2, -0.1, -0.2];
        let round3 = |x: f64| (x * 1000.0).round() / 1000.0;
        for (sigma_sq, want) in [(1.0, 0.031), (0.5, 0.061), (0.4, 0.075)] {
            assert_eq!(round3(true_p_squared(&b2, d2, sigma_sq).unwrap()), want);
            assert_eq!(round3(true_p_squared(&b4, d4, sigma_sq).unwrap()), want);
        }
        assert_eq!(round3(true_p_squared(&b4, d4, 9.0).unwrap()), 0.004);
        assert_eq!(true_p_squared(&[0.0; 3], d2, 2.0).unwrap(), 0.0);
        assert!(true_p_squared(&b2, d4, 1.0).is_err());
    }

    #[test]
    fn balanced_design_matches_closed_form() {
        let design = Design::BinaryOrthogonalBalanced { k: 4 };
        let beta = [0.0, 0.2, 0.2, -0.1, -0.2];
        let cols = design.columns(160);
        let realized = realized_p_squared(&cols, &beta, 1.0);
        assert!((realized - true_p_squared(&beta, design, 1.0).unwrap()).abs() < 1e-15);
        // leftover rows still leave a full-rank design
        for n in [20, 30, 42, 60, 88] {
            assert!(DesignMatrix::new(&design.columns(n)).is_ok(), "N = {n}");
        }
    }

    #[test]
    fn datasets_are_reproducible() {
        let s = scenario(60, 2, vec![0.0, 0.2, 0.3], 1.0);
        let (a, xa) = simulate_dataset(&s, 3).unwrap();
        let (b, xb) = simulate_dataset(&s, 3).unwrap();
        let (c, _) = simulate_dataset(&s, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(xa, xb);
        assert_ne!(a, c);
    }

    #[test]
    fn outcome_triples_partition() {
        let s = scenario(60, 4, vec![0.0, 0.2, 0.2, -0.1, -0.2], 1.0);
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.completed + r.failures, 40);
        assert!(r.boundary_index.is_some());
        assert_eq!(r.deltas.len(), 3);
        for c in r.cet.iter().chain(&r.bf) {
            assert_eq!(c.total(), r.completed);
        }
        for d in 0..r.deltas.len() {
            assert_eq!(r.cet[d].positive, r.nhst_rejections);
            assert!(r.agreement(d, 0) + r.contradiction(d, 0) <= 1.0);
        }
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut s = scenario(60, 2, vec![0.0, 0.2, 0.3], 1.0);
        s.delta_grid = vec![0.0];
        assert!(run_scenario(&s).is_err());
        let mut s = scenario(4, 2, vec![0.0, 0.2, 0.3], 1.0);
        s.delta_grid = vec![0.1];
        assert!(run_scenario(&s).is_err());
    }
}
