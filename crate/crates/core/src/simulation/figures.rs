//! Curve-point tables for the (R², N) decision map: CET and Bayes-factor
//! conclusions over a grid, and the R² values where BF₁₀ crosses 1/t and t.

use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::{bf_decide, jzs_bf_regression, BayesError};
use crate::inference::{cet_decide, nhst_regression, noninf_regression, DecisionLabel, TestError};
use crate::model_fit::RegressionSummary;

#[derive(Debug, Clone, PartialEq)]
pub struct MapGrid {
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    pub r_squared: Vec<f64>,
    pub delta: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub rscale: f64,
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

impl Default for MapGrid {
    /// K ∈ {1, 5, 12}; 76 sample sizes from 30 to 1000 on a log scale; R²
    /// from 1e-4 to 0.9 on a log scale; Δ = 0.10, α = 0.05, threshold 3.
    fn default() -> Self {
        let mut ns: Vec<usize> = log_spaced(30.0, 1000.0, 76)
            .into_iter()
            .map(|n| n.round() as usize)
            .collect();
        ns.dedup();
        Self {
            ks: vec![1, 5, 12],
            ns,
            r_squared: log_spaced(1e-4, 0.9, 121),
            delta: 0.10,
            alpha: 0.05,
            threshold: 3.0,
            rscale: crate::bayes::rscale::MEDIUM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionMapRow {
    pub k: usize,
    pub n_obs: usize,
    pub r_squared: f64,
    pub p_nhst: f64,
    pub p_noninf: f64,
    pub cet: DecisionLabel,
    pub significant_yet_not_meaningful: bool,
    pub bf10: f64,
    pub bf: DecisionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BfContourPoint {
    pub k: usize,
    pub n_obs: usize,
    pub bf_level: f64,
    /// `None` when BF₁₀ stays on one side of the level for every R².
    pub r_squared: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error(transparent)]
    Test(#[from] TestError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Fit(#[from] crate::model_fit::FitError),
}

fn pairs(ks: &[usize], ns: &[usize]) -> Vec<(usize, usize)> {
    ks.iter()
        .flat_map(|&k| ns.iter().filter(move |&&n| n > k + 1).map(move |&n| (k, n)))
        .collect()
}

/// CET and BF conclusions at every (K, N, R²) grid point, in grid order.
pub fn decision_map(grid: &MapGrid) -> Result<Vec<DecisionMapRow>, MapError> {
    let rows: Vec<Vec<DecisionMapRow>> = pairs(&grid.ks, &grid.ns)
        .into_par_iter()
        .map(|(k, n)| {
            grid.r_squared
                .iter()
                .map(|&r2| {
                    let s = RegressionSummary::from_r_squared(n, k, r2)?;
                    let p1 = nhst_regression(&s, grid.alpha)?.p_value;
                    let p2 = noninf_regression(&s, grid.delta, grid.alpha)?.p_value;
                    let cet = cet_decide(p1, p2, grid.alpha);
                    let bf = jzs_bf_regression(&s, grid.rscale, grid.threshold)?;
                    Ok(DecisionMapRow {
                        k,
                        n_obs: n,
                        r_squared: r2,
                        p_nhst: p1,
                        p_noninf: p2,
                        cet: cet.label,
                        significant_yet_not_meaningful: cet.significant_yet_not_meaningful,
                        bf10: bf.bf10,
                        bf: bf_decide(&bf).label,
                    })
                })
                .collect::<Result<Vec<_>, MapError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn log_bf(n: usize, k: usize, r2: f64, rscale: f64) -> Result<f64, MapError> {
    let s = RegressionSummary::from_r_squared(n, k, r2)?;
    Ok(jzs_bf_regression(&s, rscale, 2.0)?.log_bf10)
}

/// R² at which BF₁₀ equals each level, for every (K, N). BF₁₀ increases with
/// R², so the crossing is found by bisection on log R².
pub fn bf_contours(
    ks: &[usize],
    ns: &[usize],
    levels: &[f64],
    rscale: f64,
) -> Result<Vec<BfContourPoint>, MapError> {
    let rows: Vec<Vec<BfContourPoint>> = pairs(ks, ns)
        .into_par_iter()
        .map(|(k, n)| {
            levels
                .iter()
                .map(|&level| {
                    let target = level.ln();
                    let (mut lo, mut hi) = (1e-12f64.ln(), (1.0 - 1e-9f64).ln());
                    let r_squared = if log_bf(n, k, lo.exp(), rscale)? > target
                        || log_bf(n, k, hi.exp(), rscale)? < target
                    {
                        None
                    } else {
                        for _ in 0..100 {
                            let mid = 0.5 * (lo + hi);
                            if log_bf(n, k, mid.exp(), rscale)? < target {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                            if hi - lo < 1e-10 {
                                break;
                            }
                        }
                        Some((0.5 * (lo + hi)).exp())
                    };
                    Ok(BfContourPoint {
                        k,
                        n_obs: n,
                        bf_level: level,
                        r_squared,
                    })
                })
                .collect::<Result<Vec<_>, MapError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let g = MapGrid::default();
        assert_eq!(g.ns.first(), Some(&30));
        assert_eq!(g.ns.last(), Some(&1000));
        assert!(g.ns.len() >= 70);
        assert!((g.r_squared[120] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn contour_brackets_the_level() {
        let pts = bf_contours(&[2], &[100], &[3.0], crate::bayes::rscale::MEDIUM).unwrap();
        let r2 = pts[0].r_squared.unwrap();
        let b = log_bf(100, 2, r2, crate::bayes::rscale::MEDIUM).unwrap();
        assert!((b - 3f64.ln()).abs() < 1e-6);
    }
}
