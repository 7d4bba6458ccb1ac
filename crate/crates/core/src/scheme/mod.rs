//! Tamed explicit recursions for both driver types.
//!
//! Both integrators advance the difference variable `X - neutral(X_delayed)`
//! and add the neutral term of the next delayed state back afterwards, so the
//! neutral telescoping identity holds step by step. The drift is tamed once
//! per run with the grid's step size; everything else is evaluated exactly as
//! written in the recursion, which keeps a single step reproducible from the
//! stored path values.

pub mod brownian;
pub mod jump;

pub use brownian::{simulate_bm, simulate_untamed, step_bm};
pub use jump::{simulate_jump, step_jump};
