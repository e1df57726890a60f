//! The doubly exponential fixed point for general service times.
//!
//! Level `k` has tail mass `u_k = θ^{A(k)} ρ^{B(k)}` with
//! `A(k) = (d^{k−1}−1)/(d−1)` and `B(k) = (d^k−1)/(d−1)` (limits `k−1` and
//! `k` when `d = 1`), and density `π_k(x) = u_k·μḠ(x)`.

mod theta;

pub use theta::{theta, ThetaError, ThetaMode, ThetaValue};

use serde::Serialize;
use thiserror::Error;

use crate::distributions::ServiceDistribution;

/// Hard cap on levels; beyond it every tail is far below `f64` resolution.
pub const MAX_LEVEL: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixedPointError {
    #[error("unstable: rho = {rho} must be in (0, 1)")]
    Unstable { rho: f64 },
    #[error("tails are not decreasing: theta*rho^d = {ratio} >= 1")]
    NonMonotone { ratio: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Theta(#[from] ThetaError),
}

/// `(A(k), B(k))` for `k ≥ 1`.
pub fn level_exponents(d: u32, k: usize) -> (f64, f64) {
    assert!(k >= 1, "exponents are defined for k >= 1");
    if d == 1 {
        return ((k - 1) as f64, k as f64);
    }
    let df = d as f64;
    let pow = |j: usize| df.powi(j as i32);
    ((pow(k - 1) - 1.0) / (df - 1.0), (pow(k) - 1.0) / (df - 1.0))
}

/// `ln u_k = A(k) ln θ + B(k) ln ρ`, with `ln u_0 = 0`.
pub fn log_level(theta: f64, rho: f64, d: u32, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let (a, b) = level_exponents(d, k);
    // Skip zero factors so infinite exponents never meet ln 1 = 0.
    let theta_part = if theta == 1.0 || a == 0.0 { 0.0 } else { a * theta.ln() };
    let rho_part = if rho == 1.0 { 0.0 } else { b * rho.ln() };
    theta_part + rho_part
}

/// Residuals of the x-integrated stationary system for a tail profile
/// `u = (u_0 = 1, u_1, …, u_K)` under `π_k(x) = u_k μḠ(x)`.
///
/// Entry 0 is `−λ + μu_1`; entry 1 is `λ − λθu_1^d − μu_1 + μu_2`; entry
/// `k ≥ 2` is `λθu_{k−1}^d − λθu_k^d − μu_k + μu_{k+1}`. Levels past `K`
/// are zero, so the last entry is `K − 1`.
pub fn scalar_system_residual(lambda: f64, mu: f64, theta: f64, d: u32, u: &[f64]) -> Vec<f64> {
    let at = |k: usize| u.get(k).copied().unwrap_or(0.0);
    let j = |k: usize| theta * at(k).powi(d as i32);
    let levels = u.len().saturating_sub(1);
    (0..levels)
        .map(|k| match k {
            0 => -lambda + mu * at(1),
            1 => lambda - lambda * j(1) - mu * at(1) + mu * at(2),
            _ => lambda * j(k - 1) - lambda * j(k) - mu * at(k) + mu * at(k + 1),
        })
        .collect()
}

/// One member of the fixed-point family: `(λ, d, G)` plus the derived `μ, ρ, θ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointFamily {
    pub lambda: f64,
    pub d: u32,
    #[serde(serialize_with = "serialize_display")]
    pub dist: ServiceDistribution,
    pub mu: f64,
    pub rho: f64,
    pub theta: f64,
    pub theta_tilde: f64,
}

fn serialize_display<S: serde::Serializer>(v: &ServiceDistribution, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl FixedPointFamily {
    /// Uses the quadrature definition of `θ`.
    pub fn new(lambda: f64, d: u32, dist: ServiceDistribution) -> Result<Self, FixedPointError> {
        Self::with_mode(lambda, d, dist, ThetaMode::Generic)
    }

    pub fn with_mode(lambda: f64, d: u32, dist: ServiceDistribution, mode: ThetaMode) -> Result<Self, FixedPointError> {
        if d == 0 {
            return Err(FixedPointError::InvalidArgument("d must be at least 1".into()));
        }
        let value = theta(&dist, d, mode)?;
        Self::with_theta(lambda, d, dist, value.theta)
    }

    /// Family with an externally supplied `θ`, e.g. the classical `θ = 1`.
    pub fn with_theta(lambda: f64, d: u32, dist: ServiceDistribution, theta: f64) -> Result<Self, FixedPointError> {
        if d == 0 {
            return Err(FixedPointError::InvalidArgument("d must be at least 1".into()));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(FixedPointError::InvalidArgument(format!(
                "theta must be finite and positive, got {theta}"
            )));
        }
        let mu = dist.rate();
        let rho = lambda / mu;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(FixedPointError::Unstable { rho });
        }
        // u_{k+1}/u_k = (θρ^d)^{d^{k−1}} for k ≥ 1.
        let ratio = theta * rho.powi(d as i32);
        if ratio >= 1.0 {
            return Err(FixedPointError::NonMonotone { ratio });
        }
        Ok(Self {
            lambda,
            d,
            dist,
            mu,
            rho,
            theta,
            theta_tilde: theta / mu.powi(d as i32),
        })
    }

    pub fn log_tail(&self, k: usize) -> f64 {
        log_level(self.theta, self.rho, self.d, k)
    }

    pub fn tail(&self, k: usize) -> f64 {
        self.log_tail(k).exp()
    }

    /// `log10 u_k`, finite even where `u_k` underflows.
    pub fn log10_tail(&self, k: usize) -> f64 {
        self.log_tail(k) / std::f64::consts::LN_10
    }

    /// `(u_0, …, u_K)`.
    pub fn tails(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max).map(|k| self.tail(k)).collect()
    }

    /// `π_k(x) = u_k μḠ(x)`.
    pub fn density(&self, k: usize, x: f64) -> f64 {
        assert!(k >= 1, "densities are defined for k >= 1");
        self.tail(k) * self.mu * self.dist.survival(x)
    }

    /// `(λ^{B(k)}, θ̃^{A(k)}Ḡ(x))`, whose product is `π_k(x)`.
    pub fn product_form(&self, k: usize, x: f64) -> (f64, f64) {
        let (a, b) = level_exponents(self.d, k);
        let arrival = (b * self.lambda.ln()).exp();
        let service = (a * self.theta_tilde.ln()).exp() * self.dist.survival(x);
        (arrival, service)
    }

    /// `ρ^{A(k)} λ^{d^{k−1}}/μ`, a bound on `u_k` from `θ < μ^{d−1}`:
    /// `u_k < μ^{d^{k−1}−1} ρ^{B(k)} = ρ^{A(k)} λ^{d^{k−1}}/μ`, with equality at `k = 1`.
    pub fn upper_bound(&self, k: usize) -> f64 {
        let (a, _) = level_exponents(self.d, k);
        let pow = (self.d as f64).powi(k as i32 - 1);
        (a * self.rho.ln() + pow * self.lambda.ln() - self.mu.ln()).exp()
    }

    /// `ρ^{A(k)} λ^{d^k}/μ`. Kept for comparison: it is not a bound when `λ < 1`.
    pub fn unit_shift_upper_bound(&self, k: usize) -> f64 {
        let (a, _) = level_exponents(self.d, k);
        let pow = (self.d as f64).powi(k as i32);
        (a * self.rho.ln() + pow * self.lambda.ln() - self.mu.ln()).exp()
    }

    /// Smallest `K ≥ 1` with `u_K ≤ eps`, capped at [`MAX_LEVEL`].
    pub fn truncation_level(&self, eps: f64) -> usize {
        let log_eps = eps.ln();
        (1..=MAX_LEVEL)
            .find(|&k| self.log_tail(k) <= log_eps)
            .unwrap_or(MAX_LEVEL)
    }

    /// Residuals of the x-integrated stationary system at levels `0..K−1`.
    pub fn system_residual(&self, k_max: usize) -> Vec<f64> {
        scalar_system_residual(self.lambda, self.mu, self.theta, self.d, &self.tails(k_max))
    }

    /// `J_k = ∫π_k^d dx = θ u_k^d`, the chance that all `d` sampled queues hold at least `k`.
    pub fn all_busy_mass(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        (self.theta.ln() + self.d as f64 * self.log_tail(k)).exp()
    }
}
