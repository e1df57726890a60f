//! Residual service time and expected sojourn time at the fixed point.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{DistributionError, ServiceDistribution};
use crate::fixedpoint::{level_exponents, FixedPointError, FixedPointFamily};
use crate::numerics::quadrature::{integrate, QuadratureError};

/// Relative agreement required between the two forms of `E[X_R]`.
pub const RESIDUAL_AGREEMENT: f64 = 1e-6;
/// Series terms below this are dropped.
pub const SERIES_CUTOFF: f64 = 1e-15;
/// Differences above this between the two series forms are flagged.
pub const SERIES_MISMATCH: f64 = 1e-12;
const MAX_TERMS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
    #[error("residual mean forms disagree: moment {moment}, double integral {integral}")]
    ResidualMismatch { moment: f64, integral: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualMean {
    /// `μE[X²]/2`, the returned value.
    pub moment: f64,
    /// `∫₀^∞∫_x^∞ μḠ(y) dy dx` by nested quadrature.
    pub integral: f64,
}

/// `E[X_R]`, cross-checked against the nested double integral.
pub fn residual_mean(dist: &ServiceDistribution) -> Result<ResidualMean, MetricsError> {
    let moment = residual_mean_moment(dist)?;
    let mu = dist.rate();
    let spec = dist.quadrature_spec();
    let integral = integrate(
        |x| integrate(|y| mu * dist.survival(y), x, f64::INFINITY, &spec).unwrap_or(f64::NAN),
        0.0,
        f64::INFINITY,
        &spec,
    )?;
    if ((integral - moment) / moment).abs() > RESIDUAL_AGREEMENT {
        return Err(MetricsError::ResidualMismatch { moment, integral });
    }
    Ok(ResidualMean { moment, integral })
}

/// `E[X_R] = μE[X²]/2` without the quadrature cross-check.
pub fn residual_mean_moment(dist: &ServiceDistribution) -> Result<f64, MetricsError> {
    Ok(dist.rate() * dist.second_moment()? / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SojournReport {
    pub e_x: f64,
    pub e_xr: f64,
    /// `(E[X_R] − E[X])J_1 + E[X](1 + Σ_{k≥1} J_k)` with `J_k = θu_k^d`.
    pub e_td: f64,
    /// Zero when the series is summed in closed form (`d = 1`).
    pub series_terms_used: usize,
    pub truncation_error_bound: f64,
    /// The alternative sum `θρ^d(E[X_R] − E[X]) + E[X]Σ_{k≥1} θ^{(d^k−1)/(d−1)}ρ^{(d^k−d)/(d−1)}`.
    pub printed_sum: f64,
    /// `|e_td − printed_sum| > SERIES_MISMATCH`.
    pub printed_sum_mismatch: bool,
}

/// `ln J_k = B(k) ln θ + (B(k+1) − 1) ln ρ`, with `B(k) = (d^k − 1)/(d − 1)`.
fn log_busy_term(fp: &FixedPointFamily, k: usize) -> f64 {
    let (_, b) = level_exponents(fp.d, k);
    let (_, b_next) = level_exponents(fp.d, k + 1);
    b * fp.theta.ln() + (b_next - 1.0) * fp.rho.ln()
}

/// `ln(θ^{B(k)} ρ^{B(k)−1})`, the printed summand.
fn log_printed_term(fp: &FixedPointFamily, k: usize) -> f64 {
    let (_, b) = level_exponents(fp.d, k);
    b * fp.theta.ln() + (b - 1.0) * fp.rho.ln()
}

/// Sums `exp(log_term(k))` for `k ≥ 1` until the next term drops below the cutoff.
/// Returns `(sum, terms, remainder bound)`; the bound assumes non-increasing
/// term ratios, which holds because `θρ^d < 1`.
fn sum_series(log_term: impl Fn(usize) -> f64) -> (f64, usize, f64) {
    let mut sum = 0.0f64;
    let mut k = 1;
    while k <= MAX_TERMS {
        let term = log_term(k).exp();
        if term < SERIES_CUTOFF * sum.max(1.0) {
            break;
        }
        sum += term;
        k += 1;
    }
    let next = log_term(k).exp();
    let q = (log_term(k + 1) - log_term(k)).exp();
    let bound = if q < 1.0 { next / (1.0 - q) } else { f64::INFINITY };
    (sum, k - 1, bound)
}

pub fn expected_sojourn(fp: &FixedPointFamily) -> Result<SojournReport, MetricsError> {
    let e_x = fp.dist.mean();
    let e_xr = residual_mean_moment(&fp.dist)?;
    let j1 = fp.theta * fp.rho.powi(fp.d as i32);

    let (busy, printed, terms, bound) = if fp.d == 1 {
        // Both sums are geometric in θρ.
        let q = fp.theta * fp.rho;
        (q / (1.0 - q), fp.theta / (1.0 - q), 0, 0.0)
    } else {
        let (busy, terms, bound) = sum_series(|k| log_busy_term(fp, k));
        let (printed, _, _) = sum_series(|k| log_printed_term(fp, k));
        (busy, printed, terms, bound)
    };

    let e_td = (e_xr - e_x) * j1 + e_x * (1.0 + busy);
    let printed_sum = (e_xr - e_x) * j1 + e_x * printed;
    Ok(SojournReport {
        e_x,
        e_xr,
        e_td,
        series_terms_used: terms,
        truncation_error_bound: e_x * bound,
        printed_sum,
        printed_sum_mismatch: (e_td - printed_sum).abs() > SERIES_MISMATCH,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SojournBound {
    pub value: f64,
    /// The bound holds up to an `o(1)` term as `n → ∞`.
    pub asymptotic: bool,
}

pub fn sojourn_upper_bound(fp: &FixedPointFamily) -> Result<SojournBound, MetricsError> {
    Ok(SojournBound {
        value: expected_sojourn(fp)?.e_td,
        asymptotic: true,
    })
}
