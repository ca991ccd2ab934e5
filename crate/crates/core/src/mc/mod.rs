//! Monte Carlo replication of the SV/GARCH designs, the dynamic-probit score
//! test and I-I study, and the selection-matrix comparison.

mod density;
mod design;
mod output;
mod run;
mod summary;

pub use density::{kernel_density, silverman_bandwidth, Density, DENSITY_GRID_POINTS};
pub use design::{CriterionId, DesignKind, McDesign, PROBIT_THETA1};
pub use output::{write_outputs, SCHEMA_VERSION};
pub use run::{run_design, VIOLATION_TOL, EstimateRecord, McRun, RepRecord, ScoreTestRecord};
pub use summary::{summarize, summarize_params, BindingRow, EstimatorSummary, McSummary, ParamSummary, ScoreTestSummary};

/// Replication failures above this fraction invalidate a run.
pub const MAX_FAILURE_FRACTION: f64 = 0.02;
