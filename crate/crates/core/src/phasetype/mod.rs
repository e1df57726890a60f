//! Phase-type service: representation algebra and the three closed-form
//! fixed-point families for PH service.

mod methods;
mod representation;

pub use methods::{
    fixed_point_ph, method3_recursion_check, residual_matrices, stationary_residuals, theta_ph,
    Method, PhFixedPoint, RecursionCheck, ResidualReport,
};
pub use representation::PhRepresentation;

use thiserror::Error;

use crate::numerics::QuadratureError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseTypeError {
    #[error("invalid phase-type representation: {0}")]
    InvalidRepresentation(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error(transparent)]
    NonConvergence(#[from] QuadratureError),
    #[error("unstable: rho = {rho} must be < 1")]
    Unstable { rho: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("level masses of method {method} do not decrease (theta*rho^d = {ratio} >= 1)")]
    NonMonotone { method: u8, ratio: f64 },
}

/// Entrywise power `v^{⊙p}`; exact zeros stay zero for every `p > 0`.
pub fn hadamard_power(v: &[f64], p: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| if x == 0.0 { 0.0 } else { x.max(0.0).powf(p) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squares_entries() {
        assert_eq!(hadamard_power(&[0.25, 0.25], 2.0), vec![0.0625, 0.0625]);
    }

    #[test]
    fn fractional_power_keeps_zeros() {
        assert_eq!(hadamard_power(&[1.0, 0.0, 0.0], 0.5), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_vector_power_sum() {
        for (m, d) in [(2usize, 2i32), (5, 3), (7, 4)] {
            let v = vec![1.0 / m as f64; m];
            let s: f64 = hadamard_power(&v, d as f64).iter().sum();
            assert!((s - (m as f64).powi(1 - d)).abs() < 1e-15);
        }
    }
}
