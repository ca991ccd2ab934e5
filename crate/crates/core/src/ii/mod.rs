//! Indirect inference on a constrained auxiliary model.
//!
//! Score variants match simulated scores (ours: recentred by the FUNC step,
//! CFS: by the observed score). Wald variants match `beta_hat` against a
//! simulated counterpart in the `J W J` metric.

mod estimate;
pub mod grid;
mod moments;
pub mod polish;
mod variance;

pub use estimate::{
    estimate, estimate_score_ii, estimate_wald_c, estimate_wald_cfs, estimate_with, objective, IIConfig, IIEstimate, SearchMetric,
    Variant,
};
pub use polish::{levenberg_marquardt, PolishOptions, PolishResult};
pub use grid::{grid_minimize, GridResult, GridSpec, ThetaBounds, TraceEntry};
pub use moments::{
    beta_tilde_c, beta_tilde_cfs, beta_tilde_func_demo, m_bar, m_cfs, ObservedAux, SimulatedCriterion,
};
pub use variance::{
    asymptotic_variance, d_l_d_theta, estimate_info_matrices, newey_west, newey_west_bandwidth, optimal_weighting,
    AsymptoticVariance, InfoMatrices,
};
