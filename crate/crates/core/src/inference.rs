//! Frequentist tests: the overall F test against zero, the non-inferiority
//! test of P² (or η²) against a margin Δ, power, the upper confidence limit for
//! η², and the conditional equivalence testing (CET) decision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{invert_ncp, ncf_cdf, ncf_quantile, ncf_sf, DistError, NcfParams};
use crate::model_fit::{AnovaSummary, FitError, RegressionSummary};

/// p-values below this are reported as zero with [`TestResult::p_underflow`] set.
pub const P_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TestError {
    #[error("margin must lie strictly between 0 and 1, got {0}")]
    InvalidDelta(f64),
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("need N > df + 1 (N = {n_obs}, df = {df})")]
    TooFewObservations { n_obs: usize, df: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    RegressionNHST,
    RegressionNonInf,
    AnovaNHST,
    AnovaNonInfHom,
    AnovaNonInfWelch,
}

impl TestKind {
    pub fn is_non_inferiority(self) -> bool {
        matches!(
            self,
            TestKind::RegressionNonInf | TestKind::AnovaNonInfHom | TestKind::AnovaNonInfWelch
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_kind: TestKind,
    /// F, or F′ for the Welch variant.
    pub statistic: f64,
    pub df1: f64,
    pub df2: f64,
    pub ncp_used: f64,
    pub p_value: f64,
    pub p_underflow: bool,
    /// Present exactly for the non-inferiority kinds.
    pub delta: Option<f64>,
    pub alpha: f64,
    pub rejected: bool,
}

/// Effect size family for [`power_noninf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerKind {
    Regression,
    Anova,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionLabel {
    Positive,
    Negative,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub label: DecisionLabel,
    pub significant_yet_not_meaningful: bool,
}

impl DecisionOutcome {
    pub fn plain(label: DecisionLabel) -> Self {
        Self {
            label,
            significant_yet_not_meaningful: false,
        }
    }
}

pub fn check_delta(delta: f64) -> Result<(), TestError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(TestError::InvalidDelta(delta))
    }
}

pub fn check_alpha(alpha: f64) -> Result<(), TestError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(TestError::InvalidAlpha(alpha))
    }
}

/// Non-centrality implied by an effect of size `delta` with `n_obs` observations.
pub fn margin_ncp(n_obs: usize, delta: f64) -> f64 {
    n_obs as f64 * delta / (1.0 - delta)
}

fn finish(
    test_kind: TestKind,
    statistic: f64,
    params: NcfParams,
    p_value: f64,
    delta: Option<f64>,
    alpha: f64,
) -> TestResult {
    let p_underflow = p_value < P_UNDERFLOW;
    let p_value = if p_underflow { 0.0 } else { p_value.clamp(0.0, 1.0) };
    TestResult {
        test_kind,
        statistic,
        df1: params.df1(),
        df2: params.df2(),
        ncp_used: params.ncp(),
        p_value,
        p_underflow,
        delta,
        alpha,
        rejected: p_value < alpha,
    }
}

fn nhst(kind: TestKind, f: f64, df1: f64, df2: f64, alpha: f64) -> Result<TestResult, TestError> {
    check_alpha(alpha)?;
    let params = NcfParams::central(df1, df2)?;
    let p = ncf_sf(f, &params)?;
    Ok(finish(kind, f, params, p, None, alpha))
}

#[allow(clippy::too_many_arguments)]
fn noninf(
    kind: TestKind,
    f: f64,
    df1: f64,
    df2: f64,
    n_obs: usize,
    delta: f64,
    alpha: f64,
) -> Result<TestResult, TestError> {
    check_delta(delta)?;
    check_alpha(alpha)?;
    let params = NcfParams::new(df1, df2, margin_ncp(n_obs, delta))?;
    let p = ncf_cdf(f, &params)?;
    Ok(finish(kind, f, params, p, Some(delta), alpha))
}

/// Test of H₀: P² = 0.
pub fn nhst_regression(s: &RegressionSummary, alpha: f64) -> Result<TestResult, TestError> {
    nhst(TestKind::RegressionNHST, s.f_stat, s.df1(), s.df2(), alpha)
}

/// Test of H₀: η² = 0 with the homogeneous-variance F.
pub fn nhst_anova(a: &AnovaSummary, alpha: f64) -> Result<TestResult, TestError> {
    nhst(TestKind::AnovaNHST, a.f_stat, a.df_between(), a.df_within(), alpha)
}

/// Test of H₀: η² = 0 with Welch's F′.
pub fn nhst_anova_welch(a: &AnovaSummary, alpha: f64) -> Result<TestResult, TestError> {
    let w = a.welch.stats()?;
    nhst(TestKind::AnovaNHST, w.f_prime, a.df_between(), w.df_prime, alpha)
}

/// Non-inferiority test of H₀: P² ≥ Δ against H₁: P² < Δ.
pub fn noninf_regression(
    s: &RegressionSummary,
    delta: f64,
    alpha: f64,
) -> Result<TestResult, TestError> {
    noninf(
        TestKind::RegressionNonInf,
        s.f_stat,
        s.df1(),
        s.df2(),
        s.n_obs,
        delta,
        alpha,
    )
}

/// Non-inferiority test of H₀: η² ≥ Δ assuming equal group variances.
pub fn noninf_anova_hom(a: &AnovaSummary, delta: f64, alpha: f64) -> Result<TestResult, TestError> {
    noninf(
        TestKind::AnovaNonInfHom,
        a.f_stat,
        a.df_between(),
        a.df_within(),
        a.n_obs,
        delta,
        alpha,
    )
}

/// Non-inferiority test of H₀: η²′ ≥ Δ using Welch's F′ and df′.
pub fn noninf_anova_welch(
    a: &AnovaSummary,
    delta: f64,
    alpha: f64,
) -> Result<TestResult, TestError> {
    let w = a.welch.stats()?;
    noninf(
        TestKind::AnovaNonInfWelch,
        w.f_prime,
        a.df_between(),
        w.df_prime,
        a.n_obs,
        delta,
        alpha,
    )
}

/// Approximate power of the non-inferiority test when the true effect is zero.
///
/// `k_or_j` is the number of predictors for regression and the number of
/// groups for ANOVA.
pub fn power_noninf(
    n_obs: usize,
    k_or_j: usize,
    delta: f64,
    alpha: f64,
    kind: PowerKind,
) -> Result<f64, TestError> {
    check_delta(delta)?;
    check_alpha(alpha)?;
    let (df1, df2) = match kind {
        PowerKind::Regression if k_or_j >= 1 && n_obs > k_or_j + 1 => (k_or_j, n_obs - k_or_j - 1),
        PowerKind::Anova if k_or_j >= 2 && n_obs > k_or_j => (k_or_j - 1, n_obs - k_or_j),
        _ => {
            return Err(TestError::TooFewObservations {
                n_obs,
                df: k_or_j,
            })
        }
    };
    let alt = NcfParams::new(df1 as f64, df2 as f64, margin_ncp(n_obs, delta))?;
    let critical = ncf_quantile(alpha, &alt)?;
    Ok(ncf_cdf(critical, &NcfParams::central(df1 as f64, df2 as f64)?)?)
}

/// Upper limit of the one-sided `1 - alpha` confidence interval `[0, η²ᵤ]`.
///
/// A perfect fit (`F = +inf`) returns 1.
pub fn eta_sq_upper_ci(
    f_stat: f64,
    df1: f64,
    df2: f64,
    n_obs: usize,
    alpha: f64,
) -> Result<f64, TestError> {
    check_alpha(alpha)?;
    NcfParams::central(df1, df2)?;
    if f_stat == f64::INFINITY {
        return Ok(1.0);
    }
    if f_stat == 0.0 {
        return Ok(0.0);
    }
    let lambda = invert_ncp(f_stat, df1, df2, alpha)?;
    Ok(lambda / (lambda + n_obs as f64))
}

/// CET: the NHST comes first; only when it fails to reject is the
/// non-inferiority test consulted.
pub fn cet_decide(p_nhst: f64, p_noninf: f64, alpha: f64) -> DecisionOutcome {
    if p_nhst < alpha {
        DecisionOutcome {
            label: DecisionLabel::Positive,
            significant_yet_not_meaningful: p_noninf < alpha,
        }
    } else if p_noninf < alpha {
        DecisionOutcome::plain(DecisionLabel::Negative)
    } else {
        DecisionOutcome::plain(DecisionLabel::Inconclusive)
    }
}
