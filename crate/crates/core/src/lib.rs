// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod distributions;
pub mod fixedpoint;
pub mod meanfield;
pub mod metrics;
pub mod numerics;
pub mod phasetype;
pub mod simulator;
