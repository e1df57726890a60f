//! Bracketed root finding for monotone scalar functions.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("root is not bracketed: f({lo}) = {f_lo:e}, f({hi}) = {f_hi:e}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function is not finite at x = {0}")]
    NonFinite(f64),
}

/// Bisection on `[lo, hi]` for a sign change of `f`, to absolute width `x_tol`.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64, RootError>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if !f_lo.is_finite() {
        return Err(RootError::NonFinite(lo));
    }
    if !f_hi.is_finite() {
        return Err(RootError::NonFinite(hi));
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(RootError::NotBracketed { lo, hi, f_lo, f_hi });
    }
    // 200 halvings exhaust f64 resolution on any finite bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if !f_mid.is_finite() {
            return Err(RootError::NonFinite(mid));
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `g(x) = target` for non-increasing `g` on `[lo, ∞)`, doubling the
/// upper end until the root is bracketed.
pub fn solve_decreasing<G>(g: G, target: f64, lo: f64, initial_hi: f64, rel_tol: f64) -> Result<f64, RootError>
where
    G: Fn(f64) -> f64,
{
    let f = |x: f64| g(x) - target;
    let mut hi = initial_hi.max(lo + f64::MIN_POSITIVE);
    for _ in 0..1100 {
        let v = f(hi);
        if !v.is_finite() {
            return Err(RootError::NonFinite(hi));
        }
        if v <= 0.0 {
            return bisect(f, lo, hi, rel_tol * hi.max(1e-300));
        }
        hi *= 2.0;
    }
    Err(RootError::NotBracketed {
        lo,
        hi,
        f_lo: f(lo),
        f_hi: f(hi),
    })
}
