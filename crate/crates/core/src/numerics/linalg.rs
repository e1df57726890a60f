//! Small dense linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Tolerance on generator row sums, relative to the largest rate.
const ROW_SUM_TOL: f64 = 1e-10;

/// Stationary distribution `ω` of an irreducible generator: `ωQ = 0`, `ωe = 1`.
pub fn stationary_vector(q: &DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
    let m = q.nrows();
    if m == 0 || q.ncols() != m {
        return Err(LinalgError::Dimension(format!(
            "generator must be square and non-empty, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let scale = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for i in 0..m {
        let row_sum: f64 = q.row(i).iter().sum();
        if row_sum.abs() > ROW_SUM_TOL * scale {
            return Err(LinalgError::SingularSystem(format!(
                "row {i} sums to {row_sum:e}, not a generator"
            )));
        }
        for j in 0..m {
            if i != j && q[(i, j)] < 0.0 {
                return Err(LinalgError::SingularSystem(format!(
                    "negative off-diagonal rate at ({i}, {j})"
                )));
            }
        }
    }
    if m == 1 {
        return Ok(vec![1.0]);
    }

    // Solve Qᵀ ωᵀ = 0 with the last equation swapped for the normalization.
    let mut a = q.transpose();
    let mut b = DVector::zeros(m);
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    b[m - 1] = 1.0;
    let omega = a
        .lu()
        .solve(&b)
        .ok_or_else(|| LinalgError::SingularSystem("generator is reducible".into()))?;

    if omega.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(LinalgError::SingularSystem(
            "stationary vector has non-positive entries; generator is reducible".into(),
        ));
    }
    let total: f64 = omega.iter().sum();
    Ok(omega.iter().map(|v| v / total).collect())
}

/// `v · M` for a row vector `v`.
pub fn row_times(v: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    debug_assert_eq!(v.len(), m.nrows());
    (0..m.ncols())
        .map(|j| v.iter().enumerate().map(|(i, vi)| vi * m[(i, j)]).sum())
        .collect()
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::Dimension("inverse of a non-square matrix".into()));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| LinalgError::SingularSystem("matrix is not invertible".into()))
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyclic_erlang(m: usize, eta: f64) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(m, m);
        for i in 0..m {
            q[(i, i)] = -eta;
            q[(i, (i + 1) % m)] += eta;
        }
        q
    }

    #[test]
    fn cyclic_chain_is_uniform() {
        for m in [2, 3, 7] {
            let w = stationary_vector(&cyclic_erlang(m, 1.7)).unwrap();
            for v in w {
                assert!((v - 1.0 / m as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn one_by_one() {
        assert_eq!(stationary_vector(&DMatrix::zeros(1, 1)).unwrap(), vec![1.0]);
    }

    #[test]
    fn random_generator_residual() {
        let q = DMatrix::from_row_slice(3, 3, &[-3.0, 1.0, 2.0, 0.5, -0.75, 0.25, 4.0, 0.1, -4.1]);
        let w = stationary_vector(&q).unwrap();
        let res = row_times(&w, &q);
        assert!(max_abs(&res) < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reducible_generator_is_rejected() {
        // State 2 is absorbing.
        let q = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.5, 0.5, -1.0, 0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(stationary_vector(&q), Err(LinalgError::SingularSystem(_))));
    }

    #[test]
    fn malformed_generator_is_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -1.0]);
        assert!(stationary_vector(&q).is_err());
    }
}
