//! Target-value Bayesian optimization with monotonicity hints.
//!
//! The search looks for inputs whose response hits a target value. Besides
//! plain GP-LCB on the distance to target, two variants exploit a declared
//! monotone direction of the response: one turns the declarations into
//! derivative signs on the distance directly, the other fits a monotone GP
//! on the response and feeds its predictions back as virtual observations
//! of the distance.
//!
//! [`engine::BoState`] holds one optimization run; [`engine::suggest`]
//! proposes the next input and [`benchmarks`] runs seeded comparisons on
//! the built-in test functions.

pub mod acquisition;
pub mod benchmarks;
pub mod bounds;
pub mod engine;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod mg;
pub mod monotonic;
pub mod normal;
pub mod sampling;
pub mod slice;
pub mod target;

pub use bounds::Bounds;
pub use error::{Error, Result};
