//! Selection-matrix design for auxiliary parameters defined by more
//! restrictions than parameters: `A g(beta) = 0` with `A` of size
//! `d_beta x q`, the implied variances, and the choice of `A` that is
//! efficient for the structural parameters rather than for `beta`.

mod algebra;
mod estimate;
mod systems;

pub use algebra::{
    avar_beta, binding_slope, ii_avar_theta, ii_information, ii_information_projection, naive_optimal_a,
    optimal_a_for_theta, SelectionMatrix,
};
pub use estimate::{
    binding_function, monte_carlo_variance, solve_selected, wald_ii_overid, OverIdEstimate, OverIdMonteCarlo,
};
pub use systems::{MomentSystem, Sample, SystemKind, SystemModel};
