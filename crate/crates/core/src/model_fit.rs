//! Sufficient statistics for the regression and ANOVA tests: R² and F from raw
//! data, and one-way ANOVA quantities (homogeneous and Welch) from per-group
//! summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need N > K + 1 observations (N = {n_obs}, K = {n_predictors})")]
    TooFewObservations { n_obs: usize, n_predictors: usize },
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("column {column} has length {found}, expected {expected}")]
    LengthMismatch {
        column: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("R² must lie in [0, 1], got {0}")]
    RSquaredOutOfRange(f64),
    #[error("group {index}: {reason}")]
    InvalidGroup { index: usize, reason: String },
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("need more observations than groups (N = {n_obs}, J = {groups})")]
    NoWithinDf { n_obs: usize, groups: usize },
    #[error("Welch statistics unavailable: {0}")]
    Welch(WelchUnavailable),
}

/// Why the Welch statistic could not be formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum WelchUnavailable {
    #[error("group {group} has fewer than two observations")]
    SmallGroup { group: usize },
    #[error("group {group} has zero sample variance")]
    ZeroVariance { group: usize },
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// F statistic of the overall regression test for a given R².
///
/// Returns `+inf` when R² = 1.
pub fn f_from_r_squared(r_squared: f64, n_obs: usize, n_predictors: usize) -> f64 {
    if r_squared >= 1.0 {
        return f64::INFINITY;
    }
    let df2 = (n_obs - n_predictors - 1) as f64;
    (r_squared / n_predictors as f64) / ((1.0 - r_squared) / df2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub n_obs: usize,
    pub n_predictors: usize,
    pub r_squared: f64,
    /// `+inf` when the fit is perfect.
    pub f_stat: f64,
    pub perfect_fit: bool,
}

impl RegressionSummary {
    pub fn from_r_squared(n_obs: usize, n_predictors: usize, r_squared: f64) -> Result<Self, FitError> {
        if n_predictors == 0 || n_obs <= n_predictors + 1 {
            return Err(FitError::TooFewObservations {
                n_obs,
                n_predictors,
            });
        }
        if !r_squared.is_finite() {
            return Err(FitError::NonFinite("R²"));
        }
        if !(0.0..=1.0).contains(&r_squared) {
            return Err(FitError::RSquaredOutOfRange(r_squared));
        }
        Ok(Self {
            n_obs,
            n_predictors,
            r_squared,
            f_stat: f_from_r_squared(r_squared, n_obs, n_predictors),
            perfect_fit: r_squared == 1.0,
        })
    }

    pub fn df1(&self) -> f64 {
        self.n_predictors as f64
    }

    pub fn df2(&self) -> f64 {
        (self.n_obs - self.n_predictors - 1) as f64
    }
}

/// A fixed design (intercept plus `K` covariate columns) factored once by
/// twice-iterated modified Gram–Schmidt, so repeated fits against new outcome
/// vectors cost `O(N·K)`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    n_obs: usize,
    n_cols: usize,
    /// Orthonormal basis, column-major, `n_obs * n_cols`. Column 0 spans the intercept.
    q: Vec<f64>,
    /// Upper-triangular factor, row-major `n_cols * n_cols`.
    r: Vec<f64>,
}

/// Least-squares fit of one outcome vector against a [`DesignMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub ss_residual: f64,
    pub ss_regression: f64,
    pub ss_total: f64,
}

impl LeastSquares {
    pub fn r_squared(&self) -> f64 {
        if self.ss_total <= 0.0 {
            return 0.0;
        }
        // Use whichever piece is smaller to avoid cancellation at either end.
        let r2 = if self.ss_regression < self.ss_residual {
            self.ss_regression / self.ss_total
        } else {
            1.0 - self.ss_residual / self.ss_total
        };
        r2.clamp(0.0, 1.0)
    }
}

const RANK_TOL: f64 = 1e-9;

impl DesignMatrix {
    /// Builds the design from covariate columns; the intercept is added here.
    pub fn new(covariates: &[Vec<f64>]) -> Result<Self, FitError> {
        let n_obs = covariates.first().map_or(0, Vec::len);
        for (i, col) in covariates.iter().enumerate() {
            if col.len() != n_obs {
                return Err(FitError::LengthMismatch {
                    column: i + 1,
                    expected: n_obs,
                    found: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(FitError::NonFinite("covariates"));
            }
        }
        let cols: Vec<&[f64]> = covariates.iter().map(Vec::as_slice).collect();
        Self::from_columns(n_obs, &cols)
    }

    pub(crate) fn from_columns(n_obs: usize, covariates: &[&[f64]]) -> Result<Self, FitError> {
        let n_cols = covariates.len() + 1;
        if n_cols < 2 || n_obs <= n_cols {
            return Err(FitError::TooFewObservations {
                n_obs,
                n_predictors: n_cols - 1,
            });
        }
        let mut q = Vec::with_capacity(n_obs * n_cols);
        let mut r = vec![0.0; n_cols * n_cols];
        let intercept = vec![1.0; n_obs];
        let mut columns: Vec<&[f64]> = Vec::with_capacity(n_cols);
        columns.push(&intercept);
        columns.extend_from_slice(covariates);
        for (c, col) in columns.into_iter().enumerate() {
            let mut v = col.to_vec();
            let original = norm(&v);
            for _pass in 0..2 {
                for i in 0..c {
                    let qi = &q[i * n_obs..(i + 1) * n_obs];
                    let proj = dot(qi, &v);
                    for (vk, qk) in v.iter_mut().zip(qi) {
                        *vk -= proj * qk;
                    }
                    r[i * n_cols + c] += proj;
                }
            }
            let len = norm(&v);
            if original == 0.0 || len <= RANK_TOL * original {
                return Err(FitError::RankDeficient { column: c });
            }
            r[c * n_cols + c] = len;
            q.extend(v.iter().map(|x| x / len));
        }
        Ok(Self {
            n_obs,
            n_cols,
            q,
            r,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_predictors(&self) -> usize {
        self.n_cols - 1
    }

    fn basis(&self, c: usize) -> &[f64] {
        &self.q[c * self.n_obs..(c + 1) * self.n_obs]
    }

    /// Fitted values `X β` for given coefficients (intercept first), using the
    /// factored representation `X = Q R`.
    pub fn predict(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.n_cols, "coefficient length");
        let mut out = vec![0.0; self.n_obs];
        for c in 0..self.n_cols {
            // (R β)_c
            let rb: f64 = (c..self.n_cols).map(|j| self.r[c * self.n_cols + j] * beta[j]).sum();
            for (o, q) in out.iter_mut().zip(self.basis(c)) {
                *o += rb * q;
            }
        }
        out
    }

    pub fn fit(&self, y: &[f64]) -> Result<LeastSquares, FitError> {
        if y.len() != self.n_obs {
            return Err(FitError::LengthMismatch {
                column: 0,
                expected: self.n_obs,
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite("outcome"));
        }
        let y_bar = mean(y);
        let ss_total = compensated_sum(y.iter().map(|v| (v - y_bar) * (v - y_bar)));

        let mut resid = y.to_vec();
        let mut qty = vec![0.0; self.n_cols];
        for _pass in 0..2 {
            for (c, coef) in qty.iter_mut().enumerate() {
                let qc = self.basis(c);
                let proj = dot(qc, &resid);
                for (rk, qk) in resid.iter_mut().zip(qc) {
                    *rk -= proj * qk;
                }
                *coef += proj;
            }
        }
        let ss_residual = compensated_sum(resid.iter().map(|v| v * v));
        let ss_regression = compensated_sum(qty[1..].iter().map(|v| v * v));

        let mut coefficients = vec![0.0; self.n_cols];
        for c in (0..self.n_cols).rev() {
            let tail: f64 = ((c + 1)..self.n_cols)
                .map(|j| self.r[c * self.n_cols + j] * coefficients[j])
                .sum();
            coefficients[c] = (qty[c] - tail) / self.r[c * self.n_cols + c];
        }
        Ok(LeastSquares {
            coefficients,
            ss_residual,
            ss_regression,
            ss_total,
        })
    }

    pub fn summarize(&self, y: &[f64]) -> Result<RegressionSummary, FitError> {
        let fit = self.fit(y)?;
        let k = self.n_predictors();
        let r_squared = fit.r_squared();
        let mut summary = RegressionSummary::from_r_squared(self.n_obs, k, r_squared)?;
        if r_squared < 1.0 && fit.ss_residual > 0.0 && fit.ss_regression < fit.ss_residual {
            let df2 = (self.n_obs - k - 1) as f64;
            summary.f_stat = (fit.ss_regression / k as f64) / (fit.ss_residual / df2);
        }
        Ok(summary)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Ordinary least squares of `y` on the covariate columns plus an intercept.
pub fn fit_regression(y: &[f64], covariates: &[Vec<f64>]) -> Result<RegressionSummary, FitError> {
    if covariates.is_empty() || y.len() <= covariates.len() + 1 {
        return Err(FitError::TooFewObservations {
            n_obs: y.len(),
            n_predictors: covariates.len(),
        });
    }
    for (i, col) in covariates.iter().enumerate() {
        if col.len() != y.len() {
            return Err(FitError::LengthMismatch {
                column: i + 1,
                expected: y.len(),
                found: col.len(),
            });
        }
    }
    DesignMatrix::new(covariates)?.summarize(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupSummary {
    pub fn new(n: usize, mean: f64, sd: f64) -> Result<Self, FitError> {
        let invalid = |reason: &str| FitError::InvalidGroup {
            index: 0,
            reason: reason.to_string(),
        };
        if n == 0 {
            return Err(invalid("group size must be at least 1"));
        }
        if !mean.is_finite() || !sd.is_finite() {
            return Err(invalid("mean and sd must be finite"));
        }
        if sd < 0.0 {
            return Err(invalid("sd must be non-negative"));
        }
        if n == 1 && sd > 0.0 {
            return Err(invalid("a standard deviation needs at least two observations"));
        }
        Ok(Self { n, mean, sd })
    }

    /// Two-pass mean and sample standard deviation.
    pub fn from_values(values: &[f64]) -> Result<Self, FitError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite("group values"));
        }
        if values.is_empty() {
            return Self::new(0, 0.0, 0.0);
        }
        let m = mean(values);
        let sd = if values.len() > 1 {
            let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
            (ss / (values.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self::new(values.len(), m, sd)
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchStats {
    pub f_prime: f64,
    pub df_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WelchStatus {
    Available(WelchStats),
    Unavailable(WelchUnavailable),
}

impl WelchStatus {
    pub fn stats(&self) -> Result<WelchStats, FitError> {
        match *self {
            WelchStatus::Available(s) => Ok(s),
            WelchStatus::Unavailable(why) => Err(FitError::Welch(why)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaSummary {
    pub groups: Vec<GroupSummary>,
    pub n_obs: usize,
    pub grand_mean: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub ms_within: f64,
    pub f_stat: f64,
    pub eta_sq_hat: f64,
    pub epsilon_sq_hat: f64,
    pub omega_sq_hat: f64,
    /// Set when ε̂² or ω̂² came out negative; they are reported unclamped.
    pub negative_estimate: bool,
    pub welch: WelchStatus,
}

impl AnovaSummary {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn df_between(&self) -> f64 {
        (self.groups.len() - 1) as f64
    }

    pub fn df_within(&self) -> f64 {
        (self.n_obs - self.groups.len()) as f64
    }

    /// The same data seen as a regression on `J - 1` dummy columns.
    pub fn as_regression(&self) -> RegressionSummary {
        RegressionSummary {
            n_obs: self.n_obs,
            n_predictors: self.groups.len() - 1,
            r_squared: self.eta_sq_hat,
            f_stat: self.f_stat,
            perfect_fit: self.eta_sq_hat == 1.0,
        }
    }
}

fn check_groups(groups: &[GroupSummary]) -> Result<(), FitError> {
    if groups.len() < 2 {
        return Err(FitError::TooFewGroups(groups.len()));
    }
    for (index, g) in groups.iter().enumerate() {
        GroupSummary::new(g.n, g.mean, g.sd).map_err(|e| match e {
            FitError::InvalidGroup { reason, .. } => FitError::InvalidGroup { index, reason },
            other => other,
        })?;
    }
    Ok(())
}

/// One-way ANOVA from group sizes, means and standard deviations.
///
/// Welch quantities are attached when every group has `n >= 2` and a positive
/// variance; otherwise `welch` carries the reason they are missing.
pub fn anova_from_summaries(groups: &[GroupSummary]) -> Result<AnovaSummary, FitError> {
    check_groups(groups)?;
    let n_obs: usize = groups.iter().map(|g| g.n).sum();
    let j = groups.len();
    if n_obs <= j {
        return Err(FitError::NoWithinDf { n_obs, groups: j });
    }
    let grand_mean = compensated_sum(groups.iter().map(|g| g.n as f64 * g.mean)) / n_obs as f64;
    let ss_between = compensated_sum(groups.iter().map(|g| {
        let d = g.mean - grand_mean;
        g.n as f64 * d * d
    }));
    let ss_within = compensated_sum(groups.iter().map(|g| (g.n as f64 - 1.0) * g.variance()));
    let ss_total = ss_between + ss_within;
    let df_b = (j - 1) as f64;
    let df_w = (n_obs - j) as f64;
    let ms_within = ss_within / df_w;

    let f_stat = if ss_between == 0.0 {
        0.0
    } else if ss_within == 0.0 {
        f64::INFINITY
    } else {
        (ss_between / df_b) / ms_within
    };
    let (eta_sq_hat, epsilon_sq_hat, omega_sq_hat) = if ss_total > 0.0 {
        let adj = ss_between - df_b * ms_within;
        (
            ss_between / ss_total,
            adj / ss_total,
            adj / (ss_total + ms_within),
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let welch = match welch_f(groups) {
        Ok(stats) => WelchStatus::Available(stats),
        Err(FitError::Welch(why)) => WelchStatus::Unavailable(why),
        Err(other) => return Err(other),
    };
    Ok(AnovaSummary {
        groups: groups.to_vec(),
        n_obs,
        grand_mean,
        ss_between,
        ss_within,
        ss_total,
        ms_within,
        f_stat,
        eta_sq_hat,
        epsilon_sq_hat,
        omega_sq_hat,
        negative_estimate: epsilon_sq_hat < 0.0 || omega_sq_hat < 0.0,
        welch,
    })
}

/// One-way ANOVA from raw observations grouped by level.
pub fn anova_from_groups(groups: &[Vec<f64>]) -> Result<AnovaSummary, FitError> {
    let summaries = groups
        .iter()
        .enumerate()
        .map(|(index, values)| {
            GroupSummary::from_values(values).map_err(|e| match e {
                FitError::InvalidGroup { reason, .. } => FitError::InvalidGroup { index, reason },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    anova_from_summaries(&summaries)
}

/// Welch's heteroscedastic F′ and its denominator degrees of freedom df′.
pub fn welch_f(groups: &[GroupSummary]) -> Result<WelchStats, FitError> {
    check_groups(groups)?;
    for (group, g) in groups.iter().enumerate() {
        if g.n < 2 {
            return Err(FitError::Welch(WelchUnavailable::SmallGroup { group }));
        }
        if g.sd == 0.0 {
            return Err(FitError::Welch(WelchUnavailable::ZeroVariance { group }));
        }
    }
    let j = groups.len() as f64;
    let weights: Vec<f64> = groups.iter().map(|g| g.n as f64 / g.variance()).collect();
    let total_weight = compensated_sum(weights.iter().copied());
    let weighted_mean =
        compensated_sum(groups.iter().zip(&weights).map(|(g, w)| w * g.mean)) / total_weight;
    let between = compensated_sum(groups.iter().zip(&weights).map(|(g, w)| {
        let d = g.mean - weighted_mean;
        w * d * d
    })) / (j - 1.0);
    let lambda = compensated_sum(groups.iter().zip(&weights).map(|(g, w)| {
        let h = 1.0 - w / total_weight;
        h * h / (g.n as f64 - 1.0)
    }));
    let denom = 1.0 + 2.0 * (j - 2.0) / (j * j - 1.0) * lambda;
    Ok(WelchStats {
        f_prime: between / denom,
        df_prime: (j * j - 1.0) / (3.0 * lambda),
    })
}
