//! Action of a sub-generator exponential, `α·exp(Tx)`, by uniformization.
//!
//! With `Λ ≥ max |t_ii|` and `P = I + T/Λ` (substochastic, non-negative),
//! `α exp(Tx) = Σ_n Pois(n; Λx)·α Pⁿ`. Every term is non-negative, so the
//! survival mass stays in `[0, 1]` up to rounding. Long horizons are split so
//! each chunk has `Λh ≤ MAX_CHUNK`, keeping the Poisson weights representable.

use nalgebra::DMatrix;
use thiserror::Error;

const MAX_CHUNK: f64 = 20.0;
const POISSON_TAIL: f64 = 1e-17;
const VALIDATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UniformizationError {
    #[error("invalid phase-type representation: {0}")]
    InvalidRepresentation(String),
    #[error("time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
}

/// Checks `(α, T)` for shape, sign pattern, and substochasticity.
pub fn check_representation(alpha: &[f64], t: &DMatrix<f64>) -> Result<(), UniformizationError> {
    let m = alpha.len();
    let invalid = |msg: String| Err(UniformizationError::InvalidRepresentation(msg));
    if m == 0 {
        return invalid("empty initial vector".into());
    }
    if t.nrows() != m || t.ncols() != m {
        return invalid(format!(
            "T is {}x{} but alpha has {m} entries",
            t.nrows(),
            t.ncols()
        ));
    }
    if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return invalid("alpha entries must be finite and non-negative".into());
    }
    let mass: f64 = alpha.iter().sum();
    if mass > 1.0 + VALIDATION_TOL {
        return invalid(format!("alpha sums to {mass} > 1"));
    }
    for i in 0..m {
        if !(t[(i, i)] < 0.0) {
            return invalid(format!("diagonal entry T[{i}][{i}] = {} must be negative", t[(i, i)]));
        }
        let mut row = 0.0;
        for j in 0..m {
            let v = t[(i, j)];
            if !v.is_finite() {
                return invalid(format!("T[{i}][{j}] is not finite"));
            }
            if i != j && v < 0.0 {
                return invalid(format!("off-diagonal entry T[{i}][{j}] = {v} is negative"));
            }
            row += v;
        }
        if row > VALIDATION_TOL * t[(i, i)].abs() {
            return invalid(format!("row {i} of T sums to {row} > 0"));
        }
    }
    Ok(())
}

/// Row vector `α·exp(Tx)`.
pub fn ph_action(alpha: &[f64], t: &DMatrix<f64>, x: f64) -> Result<Vec<f64>, UniformizationError> {
    check_representation(alpha, t)?;
    if !x.is_finite() || x < 0.0 {
        return Err(UniformizationError::InvalidTime(x));
    }
    Ok(ph_action_unchecked(alpha, t, x))
}

/// As [`ph_action`] without validation; callers must have checked `(α, T)`.
pub fn ph_action_unchecked(alpha: &[f64], t: &DMatrix<f64>, x: f64) -> Vec<f64> {
    let m = alpha.len();
    let rate = (0..m).fold(0.0f64, |acc, i| acc.max(-t[(i, i)]));
    let mut p = t / rate;
    for i in 0..m {
        p[(i, i)] += 1.0;
    }

    let total = rate * x;
    let chunks = (total / MAX_CHUNK).ceil().max(1.0) as usize;
    let lambda_h = total / chunks as f64;

    let mut v = alpha.to_vec();
    let mut term = vec![0.0; m];
    let mut next = vec![0.0; m];
    for _ in 0..chunks {
        let mut weight = (-lambda_h).exp();
        term.copy_from_slice(&v);
        let mut acc: Vec<f64> = term.iter().map(|a| a * weight).collect();
        let mut n = 0usize;
        // Past n = 2Λh successive weights at least halve, so the dropped
        // mass is below twice the last weight.
        while (n as f64) < 2.0 * lambda_h || weight > POISSON_TAIL {
            n += 1;
            for (j, out) in next.iter_mut().enumerate() {
                *out = (0..m).map(|i| term[i] * p[(i, j)]).sum();
            }
            std::mem::swap(&mut term, &mut next);
            weight *= lambda_h / n as f64;
            for j in 0..m {
                acc[j] += weight * term[j];
            }
            if term.iter().all(|&a| a == 0.0) {
                break;
            }
        }
        v = acc;
    }
    v
}

/// `Ḡ(x) = α·exp(Tx)·e`, clamped to `[0, 1]`.
pub fn survival_ph(alpha: &[f64], t: &DMatrix<f64>, x: f64) -> Result<f64, UniformizationError> {
    let v = ph_action(alpha, t, x)?;
    Ok(v.iter().sum::<f64>().clamp(0.0, 1.0))
}
