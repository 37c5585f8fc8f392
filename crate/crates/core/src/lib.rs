//! Numerical laboratory for multiple ergodic averages along integer parts of
//! sublinear and linear iterate functions.
//!
//! * [`expr`]: function DSL, symbolic derivatives and numeric inverses.
//! * [`funclass`]: grid-based membership verdicts for the sublinear function
//!   classes (SL, Fejér, T, D_k, M_k, S).
//! * [`systems`]: circle rotations, finite cycles, products and the suspension
//!   flow, with exact powers and closed-form conditional expectations.
//! * [`engine`]: floor iterates, deterministic multiple averages, occupancy
//!   tables and invariance defects of the empirical measures.
//! * [`limits`]: closed-form predicted limits and the sliding-window oracle.

pub mod dd;
pub mod engine;
pub mod expr;
pub mod funclass;
pub mod limits;
pub mod systems;

pub use num_complex::Complex64;
