//! Log-gamma corrections, log-Poisson weights and the regularized incomplete
//! beta function used by the non-central F kernel.

use statrs::function::gamma::ln_gamma;

use super::DistError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Below this, the continued fraction modified-Lentz denominators are reset.
const TINY: f64 = 1e-300;
const CF_EPS: f64 = 1e-16;
const CF_MAX_ITER: usize = 200_000;

/// `ln(1 + t) - t` without cancellation for small `t`.
pub(crate) fn log1pmx(t: f64) -> f64 {
    if (-0.5..=1.0).contains(&t) {
        // ln(1+t) = 2 atanh(u) with u = t/(2+t), and t - 2u = t*u.
        let u = t / (2.0 + t);
        let u2 = u * u;
        let mut pow = u * u2;
        let mut series = 0.0;
        let mut k = 3.0;
        loop {
            let term = pow / k;
            series += term;
            if term.abs() <= 1e-17 * series.abs() {
                break;
            }
            pow *= u2;
            k += 2.0;
        }
        2.0 * series - t * u
    } else {
        t.ln_1p() - t
    }
}

/// Remainder of Stirling's approximation:
/// `ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)]`.
pub(crate) fn stirling_correction(x: f64) -> f64 {
    if x >= 10.0 {
        const C: [f64; 8] = [
            1.0 / 12.0,
            -1.0 / 360.0,
            1.0 / 1260.0,
            -1.0 / 1680.0,
            1.0 / 1188.0,
            -691.0 / 360_360.0,
            1.0 / 156.0,
            -3617.0 / 122_400.0,
        ];
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let mut acc = 0.0;
        for c in C.iter().rev() {
            acc = acc * inv2 + c;
        }
        acc * inv
    } else {
        ln_gamma(x) - ((x - 0.5) * x.ln() - x + LN_SQRT_2PI)
    }
}

/// Saddle-point deviance `k ln(k/λ) + λ - k`.
fn poisson_deviance(k: f64, lambda: f64) -> f64 {
    let t = (k - lambda) / lambda;
    if t.abs() <= 0.5 {
        lambda * ((1.0 + t) * log1pmx(t) + t * t)
    } else {
        k * (k / lambda).ln() + lambda - k
    }
}

/// Log of the Poisson(λ) probability mass at integer `k`.
pub(crate) fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return -lambda;
    }
    let kf = k as f64;
    // ln Γ(k+1) correction equals the Stirling remainder at k.
    -stirling_correction(kf) - poisson_deviance(kf, lambda) - 0.5 * (LN_2PI + kf.ln())
}

/// `ln B(a, b)` for a small argument `s < 10` and a large one `l >= 10`.
fn ln_beta_small_large(s: f64, l: f64) -> f64 {
    // ln Γ(l) - ln Γ(l+s) through the Stirling form, keeping the cancelling
    // (l - 1/2) ln(1 + s/l) piece in log1p.
    let ratio = stirling_correction(l) - stirling_correction(l + s) - (l - 0.5) * (s / l).ln_1p()
        - s * (l + s).ln()
        + s;
    ln_gamma(s) + ratio
}

/// `ln[x^a (1-x)^b / B(a, b)]`, with `y = 1 - x` supplied by the caller.
pub(crate) fn ln_beta_prefactor(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if a >= 10.0 && b >= 10.0 {
        let total = a + b;
        let (u, v) = if x * total <= a {
            let u = (x * total - a) / a;
            (u, -a * u / b)
        } else {
            let v = (y * total - b) / b;
            (-b * v / a, v)
        };
        0.5 * (a * b / (total * std::f64::consts::TAU)).ln()
            + a * log1pmx(u)
            + b * log1pmx(v)
            + stirling_correction(total)
            - stirling_correction(a)
            - stirling_correction(b)
    } else {
        let ln_b = if a < 10.0 && b < 10.0 {
            ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
        } else if a < 10.0 {
            ln_beta_small_large(a, b)
        } else {
            ln_beta_small_large(b, a)
        };
        a * x.ln() + b * y.ln() - ln_b
    }
}

/// Continued fraction for `I_x(a, b)` divided by the prefactor, times `a`.
/// Converges quickly for `x < (a + 1)/(a + b + 2)`.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64, DistError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= CF_EPS {
            return Ok(h);
        }
    }
    Err(DistError::NoConvergence {
        routine: "incomplete beta continued fraction",
        iterations: CF_MAX_ITER,
    })
}

/// Regularized incomplete beta `I_x(a, b)` and its complement `1 - I_x(a, b)`.
///
/// `y` must equal `1 - x`; passing it separately keeps precision when `x` is
/// close to one.
pub fn inc_beta_pair(a: f64, b: f64, x: f64, y: f64) -> Result<(f64, f64), DistError> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(DistError::Domain(format!(
            "incomplete beta shape parameters must be positive and finite (a={a}, b={b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(DistError::Domain(format!(
            "incomplete beta argument outside [0,1] (x={x})"
        )));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if y == 0.0 {
        return Ok((1.0, 0.0));
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        let (w, wc) = inc_beta_pair(b, a, y, x)?;
        return Ok((wc, w));
    }
    let ln_pre = ln_beta_prefactor(a, b, x, y);
    let w = if ln_pre < -745.0 {
        0.0
    } else {
        (ln_pre.exp() * beta_continued_fraction(a, b, x)? / a).min(1.0)
    };
    Ok((w, 1.0 - w))
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> Result<f64, DistError> {
    inc_beta_pair(a, b, x, 1.0 - x).map(|(w, _)| w)
}
