//! Cross-checks against independently coded reference computations.

use noninf::bayes::{jzs_bf_regression, rscale};
use noninf::distributions::{ncf_cdf, NcfParams};
use noninf::inference::{
    nhst_anova, nhst_regression, noninf_anova_hom, noninf_anova_welch, noninf_regression,
    power_noninf, PowerKind,
};
use noninf::model_fit::{
    anova_from_groups, anova_from_summaries, fit_regression, welch_f, GroupSummary,
    RegressionSummary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// R² from the normal equations solved by Gaussian elimination.
fn r_squared_normal_equations(y: &[f64], covariates: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let p = covariates.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { covariates[j - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..n).map(|i| x(i, r) * x(i, c)).sum();
        }
        a[r][p] = (0..n).map(|i| x(i, r) * y[i]).sum();
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|r| a[r][p] / a[r][r]).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let (mut ssr, mut sst) = (0.0, 0.0);
    for i in 0..n {
        let fit: f64 = (0..p).map(|j| x(i, j) * beta[j]).sum();
        ssr += (y[i] - fit).powi(2);
        sst += (y[i] - mean).powi(2);
    }
    1.0 - ssr / sst
}

#[test]
fn r_squared_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(n, k) in &[(12usize, 1usize), (40, 3), (200, 6)] {
        let covariates: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.3 * covariates[0][i] + z
            })
            .collect();
        let s = fit_regression(&y, &covariates).unwrap();
        let want = r_squared_normal_equations(&y, &covariates);
        assert!((s.r_squared - want).abs() < 1e-10, "{} vs {want}", s.r_squared);
        let f = (want / k as f64) / ((1.0 - want) / (n - k - 1) as f64);
        assert!((s.f_stat - f).abs() < 1e-8 * f.max(1.0));
    }
}

fn dummy_code(groups: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let y: Vec<f64> = groups.iter().flatten().copied().collect();
    let covariates = (1..groups.len())
        .map(|level| {
            groups
                .iter()
                .enumerate()
                .flat_map(|(g, values)| std::iter::repeat_n(if g == level { 1.0 } else { 0.0 }, values.len()))
                .collect()
        })
        .collect();
    (y, covariates)
}

#[test]
fn dummy_coded_regression_equals_anova() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sizes in [vec![5usize, 7, 9], vec![30, 30, 30, 30], vec![3, 50]] {
        let groups: Vec<Vec<f64>> = sizes
            .iter()
            .enumerate()
            .map(|(g, &n)| {
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        0.2 * g as f64 + z
                    })
                    .collect()
            })
            .collect();
        let a = anova_from_groups(&groups).unwrap();
        let (y, x) = dummy_code(&groups);
        let s = fit_regression(&y, &x).unwrap();
        assert!((s.r_squared - a.eta_sq_hat).abs() < 1e-12);
        assert!((s.f_stat - a.f_stat).abs() < 1e-10 * a.f_stat.max(1.0));
        for delta in [0.01, 0.05, 0.2] {
            let pr = noninf_regression(&s, delta, 0.05).unwrap().p_value;
            let pa = noninf_anova_hom(&a, delta, 0.05).unwrap().p_value;
            assert!((pr - pa).abs() < 1e-10, "{pr} vs {pa}");
        }
        let pr = nhst_regression(&s, 0.05).unwrap().p_value;
        let pa = nhst_anova(&a, 0.05).unwrap().p_value;
        assert!((pr - pa).abs() < 1e-10);
    }
}

#[test]
fn two_group_welch_is_squared_welch_t() {
    let a = GroupSummary::new(13, 2.4, 1.1).unwrap();
    let b = GroupSummary::new(29, 1.7, 2.6).unwrap();
    let (va, vb) = (a.sd * a.sd / 13.0, b.sd * b.sd / 29.0);
    let t = (a.mean - b.mean) / (va + vb).sqrt();
    let ws = (va + vb).powi(2) / (va * va / 12.0 + vb * vb / 28.0);
    let w = welch_f(&[a, b]).unwrap();
    assert!((w.f_prime - t * t).abs() < 1e-9 * t * t);
    assert!((w.df_prime - ws).abs() < 1e-9 * ws);
}

fn noncentral_f_draw(rng: &mut ChaCha8Rng, df1: f64, df2: f64, ncp: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let num = (z + ncp.sqrt()).powi(2)
        + if df1 > 1.0 { ChiSquared::new(df1 - 1.0).unwrap().sample(rng) } else { 0.0 };
    let den = ChiSquared::new(df2).unwrap().sample(rng);
    (num / df1) / (den / df2)
}

/// P(F <= f) under a non-central F law, by direct simulation.
fn monte_carlo_cdf(f: f64, df1: f64, df2: f64, ncp: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..draws).filter(|_| noncentral_f_draw(&mut rng, df1, df2, ncp) <= f).count();
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

#[test]
fn noninferiority_p_matches_boundary_simulation() {
    // Sampling distribution of F when P² sits on the margin.
    let s = RegressionSummary::from_r_squared(100, 5, 0.05).unwrap();
    let r = noninf_regression(&s, 0.10, 0.05).unwrap();
    let (mc, se) = monte_carlo_cdf(s.f_stat, 5.0, 94.0, 100.0 * 0.1 / 0.9, 200_000, 17);
    assert!((r.p_value - mc).abs() < 4.0 * se, "{} vs {mc} ± {se}", r.p_value);
}

#[test]
fn welch_p_matches_levy_simulation() {
    let groups = [
        GroupSummary::new(20, 0.0, 1.0).unwrap(),
        GroupSummary::new(20, 0.3, 2.0).unwrap(),
        GroupSummary::new(20, 0.6, 3.0).unwrap(),
    ];
    let a = anova_from_summaries(&groups).unwrap();
    let w = a.welch.stats().unwrap();
    let r = noninf_anova_welch(&a, 0.10, 0.05).unwrap();
    let (mc, se) = monte_carlo_cdf(w.f_prime, 2.0, w.df_prime, 60.0 * 0.1 / 0.9, 200_000, 23);
    assert!((r.p_value - mc).abs() < 4.0 * se, "{} vs {mc} ± {se}", r.p_value);

    // Identical means give F′ = 0 and the smallest possible p-value.
    let flat = [
        GroupSummary::new(40, 0.0, 1.0).unwrap(),
        GroupSummary::new(40, 0.0, 2.0).unwrap(),
        GroupSummary::new(40, 0.0, 3.0).unwrap(),
    ];
    let a = anova_from_summaries(&flat).unwrap();
    assert!(noninf_anova_welch(&a, 0.01, 0.05).unwrap().p_value < 0.05);
}

#[test]
fn welch_tracks_homogeneous_test_with_equal_variances() {
    let groups = [
        GroupSummary::new(500, 0.00, 1.0).unwrap(),
        GroupSummary::new(500, 0.08, 1.0).unwrap(),
        GroupSummary::new(500, 0.05, 1.0).unwrap(),
    ];
    let a = anova_from_summaries(&groups).unwrap();
    for delta in [0.01, 0.02, 0.05] {
        let hom = noninf_anova_hom(&a, delta, 0.05).unwrap().p_value;
        let welch = noninf_anova_welch(&a, delta, 0.05).unwrap().p_value;
        assert!((hom - welch).abs() < 1e-2, "Δ={delta}: {hom} vs {welch}");
    }
}

/// BF₁₀ by trapezoidal integration over s = ln g on a fine uniform grid.
fn bf_reference(r2: f64, n: f64, k: f64, r: f64) -> f64 {
    let b = n * r * r / 2.0;
    let log_f = |s: f64| {
        let g = s.exp();
        0.5 * (n - k - 1.0) * g.ln_1p() - 0.5 * (n - 1.0) * (g * (1.0 - r2)).ln_1p()
            + 0.5 * b.ln()
            - 0.5 * std::f64::consts::PI.ln()
            - 1.5 * s
            - b / g
            + s
    };
    let (lo, hi, steps) = (-40.0, 40.0, 400_000);
    let h = (hi - lo) / steps as f64;
    let vals: Vec<f64> = (0..=steps).map(|i| log_f(lo + h * i as f64)).collect();
    let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = vals
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i == steps { 0.5 } else { 1.0 } * (v - peak).exp())
        .sum();
    (peak + (sum * h).ln()).exp()
}

#[test]
fn bayes_factor_matches_reference_integration() {
    for &(r2, n, k) in &[(0.000216, 4580usize, 2usize), (0.3, 30, 3), (0.05, 200, 1), (0.7, 50, 12)] {
        let s = RegressionSummary::from_r_squared(n, k, r2).unwrap();
        let got = jzs_bf_regression(&s, rscale::MEDIUM, 3.0).unwrap().bf10;
        let want = bf_reference(r2, n as f64, k as f64, rscale::MEDIUM);
        assert!((got - want).abs() < 1e-6 * want, "{r2} {n} {k}: {got} vs {want}");
    }
}

#[test]
fn medium_scale_calibration() {
    // Solve BF₁₀(r) = 0.00284 at the anchor by bisection; BF falls as r grows here.
    let s = RegressionSummary::from_r_squared(4580, 2, 0.000216).unwrap();
    let bf = |r: f64| jzs_bf_regression(&s, r, 3.0).unwrap().bf10;
    let (mut lo, mut hi) = (0.1, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bf(mid) > 0.00284 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    assert!((r - rscale::MEDIUM).abs() / rscale::MEDIUM < 0.01, "calibrated r = {r}");
}

#[test]
fn bayes_factor_properties() {
    let mut last = 0.0;
    for r2 in [0.0, 0.01, 0.05, 0.1, 0.3] {
        let s = RegressionSummary::from_r_squared(80, 3, r2).unwrap();
        let bf = jzs_bf_regression(&s, rscale::MEDIUM, 3.0).unwrap().bf10;
        assert!(bf > last);
        last = bf;
    }
    for n in [5usize, 20, 300, 5000] {
        let s = RegressionSummary::from_r_squared(n, 2, 0.0).unwrap();
        assert!(jzs_bf_regression(&s, rscale::MEDIUM, 3.0).unwrap().bf10 < 1.0);
    }
}

#[test]
fn no_inconclusive_region_past_crossover() {
    let p183 = power_noninf(183, 5, 0.10, 0.05, PowerKind::Regression).unwrap();
    let p184 = power_noninf(184, 5, 0.10, 0.05, PowerKind::Regression).unwrap();
    let p185 = power_noninf(185, 5, 0.10, 0.05, PowerKind::Regression).unwrap();
    assert!(p183 < 0.95 && p184 >= 0.95 && p185 > p184, "{p183} {p184} {p185}");

    // With power ≥ 1 − α the NHST critical value lies below the
    // non-inferiority critical value, so every F rejects at least one test.
    let central = NcfParams::central(5.0, 179.0).unwrap();
    let alt = NcfParams::new(5.0, 179.0, 185.0 * 0.1 / 0.9).unwrap();
    let nhst_crit = noninf::distributions::ncf_quantile(0.95, &central).unwrap();
    let noninf_crit = noninf::distributions::ncf_quantile(0.05, &alt).unwrap();
    assert!(noninf_crit > nhst_crit);
    assert!(ncf_cdf(nhst_crit, &alt).unwrap() < 0.05);
}
