//! Numerical audit toolkit for a parametric closed-form description of
//! incompressible viscous flow.
//!
//! The crate is organised bottom-up:
//!
//! * [`fields`]: uniform-grid fields and finite-difference operators.
//! * [`analytic`]: closed-form flows and structural laws.
//! * [`density`]: linear/surface density structure of streamtubes.
//! * [`solution`]: the parametric velocity formula and its regimes.
//! * [`solver`]: a small 2D projection solver used as a reference.
//! * [`audit`]: claim experiments, verdicts and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod audit;
pub mod config;
pub mod density;
pub mod fields;
pub mod solution;
pub mod solver;
