//! Indirect inference with constrained auxiliary models.
//!
//! The crate covers structural simulation with frozen innovation banks
//! ([`sim`]), auxiliary criteria with analytic derivatives ([`aux`]),
//! constrained fitting with Kuhn-Tucker multipliers, the one-step FUNC
//! estimator and the score test ([`constrained`]), the indirect-inference
//! estimators ([`ii`]), selection-matrix design for overidentified auxiliary
//! systems ([`overid`]) and a Monte Carlo harness ([`mc`]).

pub mod aux;
pub mod cli;
pub mod constrained;
pub mod error;
pub mod ii;
pub mod linalg;
pub mod mc;
pub mod overid;
pub mod rng;
pub mod sim;

pub use error::{IndiiError, Result};
