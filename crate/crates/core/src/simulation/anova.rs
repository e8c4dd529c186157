//! One-way layouts with possibly unequal group variances.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::replicate_rng;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid ANOVA design: {0}")]
pub struct AnovaDesignError(String);

/// Group sizes, population means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaDesign {
    pub sizes: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl AnovaDesign {
    pub fn new(sizes: Vec<usize>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self, AnovaDesignError> {
        if sizes.len() < 2 || sizes.len() != means.len() || sizes.len() != sds.len() {
            return Err(AnovaDesignError(
                "need at least two groups with matching sizes, means and sds".into(),
            ));
        }
        if sizes.iter().any(|&n| n < 2) {
            return Err(AnovaDesignError("every group needs at least two observations".into()));
        }
        if sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || means.iter().any(|m| !m.is_finite())
        {
            return Err(AnovaDesignError("means must be finite and sds positive".into()));
        }
        Ok(Self { sizes, means, sds })
    }

    pub fn n_obs(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Λ′ = Σ w_j (μ_j − μ̄′)² with w_j = n_j / σ_j².
    pub fn lambda_prime(&self) -> f64 {
        let w: Vec<f64> = self
            .sizes
            .iter()
            .zip(&self.sds)
            .map(|(&n, s)| n as f64 / (s * s))
            .collect();
        let total: f64 = w.iter().sum();
        let centre = w.iter().zip(&self.means).map(|(w, m)| w * m).sum::<f64>() / total;
        w.iter()
            .zip(&self.means)
            .map(|(w, m)| w * (m - centre) * (m - centre))
            .sum()
    }

    /// η²′ = Λ′ / (Λ′ + N); the usual η² when variances are equal.
    pub fn eta_sq_prime(&self) -> f64 {
        let l = self.lambda_prime();
        l / (l + self.n_obs() as f64)
    }
}

/// Draws every group's observations for one replicate.
pub fn simulate_groups(design: &AnovaDesign, seed: u64, replicate_index: u64) -> Vec<Vec<f64>> {
    let mut rng = replicate_rng(seed, replicate_index);
    design
        .sizes
        .iter()
        .zip(design.means.iter().zip(&design.sds))
        .map(|(&n, (&m, &s))| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_variances_reduce_to_eta_squared() {
        // η² = Σ n_j (μ_j − μ̄)² / (Σ n_j (μ_j − μ̄)² + N σ²)
        let d = AnovaDesign::new(vec![10, 10, 10], vec![0.0, 0.5, 1.0], vec![2.0; 3]).unwrap();
        let between = 10.0 * (0.25 + 0.0 + 0.25);
        let want = between / (between + 30.0 * 4.0);
        assert!((d.eta_sq_prime() - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_designs() {
        assert!(AnovaDesign::new(vec![5], vec![0.0], vec![1.0]).is_err());
        assert!(AnovaDesign::new(vec![5, 1], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(AnovaDesign::new(vec![5, 5], vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }
}
