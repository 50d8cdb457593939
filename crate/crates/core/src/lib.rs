//! Generalized Dirichlet diffusions on the probability simplex: densities and
//! moments, the coefficient/parameter map, drift and diffusion with the
//! potential-condition residual, an Euler-Maruyama ensemble integrator, related
//! processes, and ensemble statistics.

// Index loops mirror the component formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod distributions;
pub mod integrator;
pub mod kernel;
pub mod param_map;
pub mod related;
pub mod rng;
pub mod run;
pub mod scalar;
pub mod simplex;
pub mod stats;
