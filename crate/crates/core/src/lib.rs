//! Omnibus non-inferiority testing for the regression coefficient of
//! determination (P²) and the one-way ANOVA effect size (η²).

pub mod distributions;
pub mod model_fit;
pub mod inference;
pub mod bayes;
pub mod simulation;
