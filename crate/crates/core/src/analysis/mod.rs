//! Experiment statistics and closed-form heuristics for noisy descent.

mod heuristics;
mod polya;
mod stats;

pub use heuristics::{
    critical_noise, linear_model_convergence_time, linear_model_critical_noise,
    linear_model_mean_loss, optimal_shots, qntk_convergence_time, qntk_residual_variance,
    simulate_linear_sgd, CriticalNoiseModel, QntkEstimate, QntkParams, DEFAULT_C_EPS,
};
pub use polya::{bessel_i0_scaled, polya_constant, polya_constant_with_tol, return_probability};
pub use stats::{
    escape_probability, escaped, fit_power_law, performance_metric, spearman, wilson_interval,
    EscapeStats, PowerLawFit,
};
