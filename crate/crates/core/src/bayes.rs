//! Default (JZS) Bayes factor for a linear regression against the
//! intercept-only model, computed from R², N and K.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{DecisionLabel, DecisionOutcome};
use crate::model_fit::RegressionSummary;

/// Named prior scales on the standardized effect size.
pub mod rscale {
    /// "medium". Cross-checked by solving for the scale that gives
    /// BF₁₀ = 0.00284 at R² = 0.000216, N = 4580, K = 2: the root lies within
    /// 1% of √2/4, and √2/4 itself gives 0.002842.
    pub const MEDIUM: f64 = std::f64::consts::SQRT_2 / 4.0;
    pub const WIDE: f64 = 0.5;
    pub const ULTRAWIDE: f64 = std::f64::consts::SQRT_2 / 2.0;

    /// Resolves a scale name or a positive number.
    pub fn parse(text: &str) -> Option<f64> {
        match text.trim().to_ascii_lowercase().as_str() {
            "medium" => Some(MEDIUM),
            "wide" => Some(WIDE),
            "ultrawide" => Some(ULTRAWIDE),
            other => other.parse::<f64>().ok().filter(|r| *r > 0.0 && r.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("Bayes factor undefined for a perfect fit (R² = 1)")]
    PerfectFit,
    #[error("prior scale must be positive and finite, got {0}")]
    InvalidRscale(f64),
    #[error("evidence threshold must exceed 1, got {0}")]
    InvalidThreshold(f64),
    #[error("quadrature did not converge after {intervals} subintervals")]
    NoConvergence { intervals: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfResult {
    pub bf10: f64,
    pub log_bf10: f64,
    pub rscale: f64,
    pub threshold: f64,
}

const QUAD_REL_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;
/// Breakpoints are placed where the log-integrand has fallen this far below its peak.
const LOG_DROP: f64 = 40.0;

/// Log of the integrand in `u = ln g`, up to the constant `ln sqrt(b/π)`
/// which the caller adds back. Working in `u` keeps the peak resolvable even
/// when it sits at `g ~ 1e12` (R² within 1e-9 of 1).
struct LogIntegrand {
    half_n_minus_k_minus_1: f64,
    half_n_minus_1: f64,
    one_minus_r2: f64,
    b: f64,
}

impl LogIntegrand {
    fn eval(&self, u: f64) -> f64 {
        let g = u.exp();
        self.half_n_minus_k_minus_1 * g.ln_1p() - self.half_n_minus_1 * (self.one_minus_r2 * g).ln_1p()
            - 0.5 * u
            - self.b * (-u).exp()
    }
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7K15 panel of `exp(ln f - shift)` over `[a, b]`: (Kronrod, |K - G|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let pair = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive integration over the given breakpoints.
fn integrate<F: Fn(f64) -> f64>(f: &F, breaks: &[f64]) -> Result<f64, BayesError> {
    let mut panels: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= QUAD_REL_TOL * total.abs() || err == 0.0 {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(BayesError::NoConvergence {
                intervals: panels.len(),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (a, b, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Err(BayesError::NoConvergence {
                intervals: panels.len(),
            });
        }
        for (lo, hi) in [(a, m), (m, b)] {
            let (v, e) = gk15(f, lo, hi);
            panels.push((lo, hi, v, e));
        }
    }
}

/// JZS Bayes factor BF₁₀ of the K-predictor model against the null model.
pub fn jzs_bf_regression(
    s: &RegressionSummary,
    rscale: f64,
    threshold: f64,
) -> Result<BfResult, BayesError> {
    if !(rscale > 0.0 && rscale.is_finite()) {
        return Err(BayesError::InvalidRscale(rscale));
    }
    if !(threshold > 1.0) {
        return Err(BayesError::InvalidThreshold(threshold));
    }
    if s.r_squared >= 1.0 {
        return Err(BayesError::PerfectFit);
    }
    let n = s.n_obs as f64;
    let k = s.n_predictors as f64;
    let b = 0.5 * n * rscale * rscale;
    let integrand = LogIntegrand {
        half_n_minus_k_minus_1: 0.5 * (n - k - 1.0),
        half_n_minus_1: 0.5 * (n - 1.0),
        one_minus_r2: 1.0 - s.r_squared,
        b,
    };

    // Peak search on a grid in u. Past the peak the log-integrand falls at
    // least (K + 1)/2 per unit of u, so 100 is far enough for any R² < 1.
    const GRID: usize = 6001;
    let (u_lo, u_hi) = (-50.0, 100.0);
    let step = (u_hi - u_lo) / (GRID - 1) as f64;
    let values: Vec<(f64, f64)> = (0..GRID)
        .map(|i| {
            let u = u_lo + step * i as f64;
            (u, integrand.eval(u))
        })
        .collect();
    let (peak_idx, &(u_peak, peak)) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.1.is_finite())
        .max_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .expect("finite integrand somewhere");
    let left = values[..peak_idx]
        .iter()
        .rev()
        .find(|v| v.1 < peak - LOG_DROP)
        .map_or(u_lo, |v| v.0);
    let right = values[peak_idx + 1..]
        .iter()
        .find(|v| v.1 < peak - LOG_DROP)
        .map_or(u_hi, |v| v.0);
    let mut breaks = vec![left];
    if peak_idx > 0 {
        breaks.push(values[peak_idx - 1].0);
    }
    breaks.push(u_peak);
    if peak_idx + 1 < GRID {
        breaks.push(values[peak_idx + 1].0);
    }
    breaks.push(right);
    breaks.dedup();

    let scaled = |u: f64| (integrand.eval(u) - peak).exp();
    let area = integrate(&scaled, &breaks)?;
    let log_bf10 = peak + area.ln() + 0.5 * (b / std::f64::consts::PI).ln();
    Ok(BfResult {
        bf10: log_bf10.exp(),
        log_bf10,
        rscale,
        threshold,
    })
}

/// Inclusive three-way decision at the result's threshold.
pub fn bf_decide(b: &BfResult) -> DecisionOutcome {
    let label = if b.bf10 >= b.threshold {
        DecisionLabel::Positive
    } else if b.bf10 <= 1.0 / b.threshold {
        DecisionLabel::Negative
    } else {
        DecisionLabel::Inconclusive
    };
    DecisionOutcome::plain(label)
}
