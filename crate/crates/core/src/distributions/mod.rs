//! Non-central F distribution: CDF, survival function, quantile, and
//! inversion over the non-centrality parameter.
//!
//! The CDF is the Poisson(ncp/2) mixture of regularized incomplete beta
//! functions,
//!
//! ```text
//!   P(F <= x) = Σ_j  Pois(j; ncp/2) · I_y(df1/2 + j, df2/2),   y = df1·x / (df1·x + df2)
//! ```
//!
//! evaluated outward from the modal Poisson index. Only the modal beta term is
//! computed directly; neighbours follow from the recurrence
//! `I_y(a+1, b) = I_y(a, b) - y^a (1-y)^b / (a B(a, b))`, carried in log space.
//! Summation stops once the Poisson mass left on a side, times a bound on the
//! beta factor, drops below `1e-16` of the running sum.

pub(crate) mod solve;
pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use special::{inc_beta, inc_beta_pair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{routine} did not converge after {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },
    #[error("{routine}: root not bracketed")]
    NotBracketed { routine: &'static str },
}

impl DistError {
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            DistError::NoConvergence { .. } | DistError::NotBracketed { .. }
        )
    }
}

/// Parameters of a non-central F distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NcfParams {
    df1: f64,
    df2: f64,
    ncp: f64,
}

impl NcfParams {
    pub fn new(df1: f64, df2: f64, ncp: f64) -> Result<Self, DistError> {
        if !(df1 > 0.0 && df1.is_finite()) {
            return Err(DistError::Domain(format!("df1 must be positive and finite, got {df1}")));
        }
        if !(df2 > 0.0 && df2.is_finite()) {
            return Err(DistError::Domain(format!("df2 must be positive and finite, got {df2}")));
        }
        if !(ncp >= 0.0 && ncp.is_finite()) {
            return Err(DistError::Domain(format!(
                "ncp must be non-negative and finite, got {ncp}"
            )));
        }
        Ok(Self { df1, df2, ncp })
    }

    pub fn central(df1: f64, df2: f64) -> Result<Self, DistError> {
        Self::new(df1, df2, 0.0)
    }

    pub fn df1(&self) -> f64 {
        self.df1
    }

    pub fn df2(&self) -> f64 {
        self.df2
    }

    pub fn ncp(&self) -> f64 {
        self.ncp
    }

    pub fn with_ncp(&self, ncp: f64) -> Result<Self, DistError> {
        Self::new(self.df1, self.df2, ncp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tail {
    Lower,
    Upper,
}

const SUM_REL_EPS: f64 = 1e-16;
const MAX_TERMS: u64 = 10_000_000;

fn check_x(x: f64) -> Result<(), DistError> {
    if x.is_nan() || x < 0.0 {
        return Err(DistError::Domain(format!(
            "F quantile must be non-negative, got {x}"
        )));
    }
    Ok(())
}

fn ncf_tail(x: f64, params: &NcfParams, tail: Tail) -> Result<f64, DistError> {
    check_x(x)?;
    let (lower_at_bound, upper_at_bound) = if x == 0.0 {
        (0.0, 1.0)
    } else if x == f64::INFINITY {
        (1.0, 0.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    if !lower_at_bound.is_nan() {
        return Ok(match tail {
            Tail::Lower => lower_at_bound,
            Tail::Upper => upper_at_bound,
        });
    }

    let NcfParams { df1, df2, ncp } = *params;
    let denom = df1 * x + df2;
    let y = df1 * x / denom;
    let yc = df2 / denom;
    let a0 = 0.5 * df1;
    let b = 0.5 * df2;

    let lambda = 0.5 * ncp;
    if lambda == 0.0 {
        let (lo, up) = inc_beta_pair(a0, b, y, yc)?;
        return Ok(match tail {
            Tail::Lower => lo,
            Tail::Upper => up,
        });
    }

    let mode = lambda.floor() as u64;
    let a_mode = a0 + mode as f64;
    let (i_mode, j_mode) = inc_beta_pair(a_mode, b, y, yc)?;
    let ln_t_mode = special::ln_beta_prefactor(a_mode, b, y, yc) - a_mode.ln();
    let w_mode = special::ln_poisson_pmf(mode, lambda).exp();
    let ln_y = y.ln();

    let pick = |i: f64, j: f64| match tail {
        Tail::Lower => i,
        Tail::Upper => j,
    };
    let mut sum = w_mode * pick(i_mode, j_mode);

    // Downward: I grows, J shrinks.
    {
        let (mut i_cur, mut j_cur) = (i_mode, j_mode);
        let mut ln_t = ln_t_mode;
        let mut w = w_mode;
        let mut j = mode;
        while j > 0 {
            // ln T_{j-1} from ln T_j, with a_j = a0 + j.
            let a_j = a0 + j as f64;
            ln_t += (a_j / (a_j - 1.0 + b)).ln() - ln_y;
            let t = ln_t.exp();
            i_cur = (i_cur + t).min(1.0);
            j_cur = (j_cur - t).max(0.0);
            w *= j as f64 / lambda;
            j -= 1;
            let val = pick(i_cur, j_cur);
            sum += w * val;
            let ratio = j as f64 / lambda;
            let mass_left = if ratio < 1.0 {
                w * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            let val_bound = match tail {
                Tail::Lower => 1.0,
                Tail::Upper => j_cur,
            };
            let rest = mass_left * val_bound;
            if rest <= SUM_REL_EPS * sum || rest < 1e-320 {
                break;
            }
        }
    }

    // Upward: I shrinks, J grows.
    {
        let (mut i_cur, mut j_cur) = (i_mode, j_mode);
        let mut ln_t = ln_t_mode;
        let mut w = w_mode;
        let mut j = mode;
        loop {
            let t = ln_t.exp();
            let a_j = a0 + j as f64;
            i_cur = (i_cur - t).max(0.0);
            j_cur = (j_cur + t).min(1.0);
            ln_t += ln_y + ((a_j + b) / (a_j + 1.0)).ln();
            j += 1;
            w *= lambda / j as f64;
            let val = pick(i_cur, j_cur);
            sum += w * val;
            let ratio = lambda / (j as f64 + 1.0);
            let mass_left = w * ratio / (1.0 - ratio);
            let val_bound = match tail {
                Tail::Lower => i_cur,
                Tail::Upper => 1.0,
            };
            let rest = mass_left * val_bound;
            if rest <= SUM_REL_EPS * sum || rest < 1e-320 {
                break;
            }
            if j - mode > MAX_TERMS {
                return Err(DistError::NoConvergence {
                    routine: "non-central F Poisson mixture",
                    iterations: MAX_TERMS as usize,
                });
            }
        }
    }

    Ok(sum.clamp(0.0, 1.0))
}

/// `P(F <= x)` for `F ~ F(df1, df2, ncp)`.
pub fn ncf_cdf(x: f64, params: &NcfParams) -> Result<f64, DistError> {
    ncf_tail(x, params, Tail::Lower)
}

/// `P(F > x)`, computed without forming `1 - cdf`.
pub fn ncf_sf(x: f64, params: &NcfParams) -> Result<f64, DistError> {
    ncf_tail(x, params, Tail::Upper)
}

fn check_probability(p: f64, what: &str) -> Result<(), DistError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DistError::Domain(format!("{what} must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// The `x` with `ncf_cdf(x) = p`.
pub fn ncf_quantile(p: f64, params: &NcfParams) -> Result<f64, DistError> {
    check_probability(p, "probability")?;
    let f = |x: f64| ncf_cdf(x, params).map(|c| c - p);

    let mut lo = 0.0;
    let mut f_lo = -p;
    let mut hi = if params.df2 > 2.0 {
        (params.df2 * (params.df1 + params.ncp) / (params.df1 * (params.df2 - 2.0))).max(1.0)
    } else {
        1.0
    };
    let mut f_hi = f(hi)?;
    let mut expansions = 0;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 1100 || !hi.is_finite() {
            return Err(DistError::NoConvergence {
                routine: "non-central F quantile bracket",
                iterations: expansions,
            });
        }
        f_hi = f(hi)?;
    }
    // Tighten the lower end of the bracket geometrically as well.
    if lo == 0.0 {
        let mut probe = hi * 0.5;
        for _ in 0..1100 {
            let fp = f(probe)?;
            if fp < 0.0 {
                lo = probe;
                f_lo = fp;
                break;
            }
            hi = probe;
            f_hi = fp;
            probe *= 0.5;
            if probe == 0.0 {
                break;
            }
        }
    }
    solve::brent(f, lo, hi, f_lo, f_hi, 1e-15, 0.0, "non-central F quantile")
}

/// Upper pivot for the non-centrality parameter: the `ncp` solving
/// `ncf_cdf(x; df1, df2, ncp) = target_p`.
///
/// When even the central distribution has `cdf(x) <= target_p` the one-sided
/// interval collapses to `[0, 0]` and `0` is returned.
pub fn invert_ncp(x: f64, df1: f64, df2: f64, target_p: f64) -> Result<f64, DistError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(DistError::Domain(format!(
            "statistic must be positive and finite, got {x}"
        )));
    }
    check_probability(target_p, "target probability")?;
    let central = NcfParams::central(df1, df2)?;
    let f = |ncp: f64| {
        let params = central.with_ncp(ncp)?;
        ncf_cdf(x, &params).map(|c| c - target_p)
    };
    let f0 = f(0.0)?;
    if f0 <= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut f_lo = f0;
    let mut hi = (df1 * x).max(1.0);
    let mut f_hi = f(hi)?;
    let mut expansions = 0;
    while f_hi > 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(DistError::NoConvergence {
                routine: "non-centrality inversion bracket",
                iterations: expansions,
            });
        }
        f_hi = f(hi)?;
    }
    solve::brent(f, lo, hi, f_lo, f_hi, 1e-15, 1e-300, "non-centrality inversion")
}
