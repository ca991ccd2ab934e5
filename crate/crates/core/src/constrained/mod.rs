//! Constrained fitting with Kuhn-Tucker multipliers, the FUNC one-step
//! estimator, the projection diagnostic and the score test.

mod fit;
mod func;
mod lemma1;
pub mod qp;

pub use fit::{maximize_constrained, maximize_constrained_with, ConstrainedFit, FitMethod, FitOptions};
pub use func::{func_estimator, func_from_eval, score_test, FuncEstimate, ScoreTest, COND_LIMIT, RIDGE_REL};
pub use lemma1::{lemma1_decomposition, Lemma1Diagnostic};
