//! The key parameter `θ = ∫(μḠ)^d = ∫Ḡ^d / (∫Ḡ)^d`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::distributions::{DistributionError, ServiceDistribution};
use crate::numerics::quadrature::{integrate, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThetaError {
    #[error("no closed form for the {0} family")]
    NoClosedForm(&'static str),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("d must be at least 1")]
    InvalidD,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaMode {
    /// Quadrature of `∫Ḡ^d` scaled by `μ^d`. Authoritative.
    Generic,
    /// Family-specific formula.
    ClosedForm,
    /// The alternative Erlang table convention: `(η/m)^d ∫e^{−ηdx}[Σ_{k=0}^{m}(ηx)^k/k!]^d dx`.
    PaperTable,
}

impl FromStr for ThetaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generic" => Ok(Self::Generic),
            "closed-form" => Ok(Self::ClosedForm),
            "paper-table" => Ok(Self::PaperTable),
            other => Err(format!("mode must be generic, closed-form or paper-table, got '{other}'")),
        }
    }
}

impl fmt::Display for ThetaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Generic => "generic",
            Self::ClosedForm => "closed-form",
            Self::PaperTable => "paper-table",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaValue {
    pub theta: f64,
    /// `θ̃ = ∫Ḡ^d`, so that `θ = μ^d θ̃`.
    pub theta_tilde: f64,
    pub mode: ThetaMode,
    /// The power-law value `μ^{d−1}` that follows from assuming `∫Ḡ = 1/μ`;
    /// it disagrees with the integral and is reported only for comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law_unit_mean_claim: Option<f64>,
}

pub fn theta(dist: &ServiceDistribution, d: u32, mode: ThetaMode) -> Result<ThetaValue, ThetaError> {
    if d == 0 {
        return Err(ThetaError::InvalidD);
    }
    let mu = dist.rate();
    let df = d as f64;
    let scale = mu.powi(d as i32);
    let from_theta = |theta: f64| ThetaValue {
        theta,
        theta_tilde: theta / scale,
        mode,
        power_law_unit_mean_claim: None,
    };

    // ∫Ḡ / ∫Ḡ: exactly one, whatever the family.
    if d == 1 && mode != ThetaMode::PaperTable {
        return Ok(from_theta(1.0));
    }

    match mode {
        ThetaMode::Generic => {
            let theta_tilde = integrate(
                |x| dist.survival(x).powi(d as i32),
                0.0,
                f64::INFINITY,
                &dist.quadrature_spec(),
            )?;
            Ok(ThetaValue {
                theta: scale * theta_tilde,
                theta_tilde,
                mode,
                power_law_unit_mean_claim: None,
            })
        }
        ThetaMode::ClosedForm => match *dist {
            ServiceDistribution::Exponential { rate } => Ok(from_theta(rate.powi(d as i32 - 1) / df)),
            ServiceDistribution::Weibull { shape, scale: s } => {
                let g = gamma(1.0 + 1.0 / shape);
                Ok(from_theta(s.powi(d as i32 - 1) / (df.powf(1.0 / shape) * g.powi(d as i32 - 1))))
            }
            ServiceDistribution::PowerLaw { shift, exponent } => {
                // ∫(μ+x)^{−αd} = μ^{1−αd}/(αd−1), divided by the d-th power of the mean.
                let theta = shift.powf(1.0 - df) * (exponent - 1.0).powi(d as i32) / (exponent * df - 1.0);
                let mut v = from_theta(theta);
                v.power_law_unit_mean_claim = Some(shift.powi(d as i32 - 1));
                Ok(v)
            }
            ServiceDistribution::Erlang { phases, rate } => {
                let theta_tilde = erlang_power_integral(phases as usize - 1, d, rate);
                Ok(ThetaValue {
                    theta: scale * theta_tilde,
                    theta_tilde,
                    mode,
                    power_law_unit_mean_claim: None,
                })
            }
            _ => Err(ThetaError::NoClosedForm(dist.family())),
        },
        ThetaMode::PaperTable => match *dist {
            ServiceDistribution::Erlang { phases, rate } => {
                let theta_tilde = erlang_power_integral(phases as usize, d, rate);
                let theta = (rate / phases as f64).powi(d as i32) * theta_tilde;
                Ok(ThetaValue {
                    theta,
                    theta_tilde,
                    mode,
                    power_law_unit_mean_claim: None,
                })
            }
            _ => Err(ThetaError::Unsupported(format!(
                "paper-table mode is defined for Erlang only, not {}",
                dist.family()
            ))),
        },
    }
}

/// `∫₀^∞ e^{−ηdx} [Σ_{k=0}^{n} (ηx)^k/k!]^d dx`, exactly.
///
/// Writes `p(y)^d = Σ_j c_j y^j` and uses `∫e^{−ηdx}(ηx)^j dx = j!/(η d^{j+1})`.
/// The coefficients are carried as `a_j = c_j j!/d^j ∈ [0, 1]`; multiplying in
/// one more factor of `p` turns `a` into a binomial average, which keeps every
/// intermediate bounded regardless of `n` and `d`.
pub(crate) fn erlang_power_integral(n: usize, d: u32, eta: f64) -> f64 {
    // After r factors: a^{(r)}_j = c^{(r)}_j j!/r^j.
    let mut a: Vec<f64> = vec![1.0; n + 1];
    for r in 1..d as usize {
        let rf = r as f64;
        let p = rf / (rf + 1.0);
        let degree = (r + 1) * n;
        let mut next = vec![0.0; degree + 1];
        for (j, slot) in next.iter_mut().enumerate() {
            // c^{(r+1)}_j = Σ_{k≤n} c^{(r)}_{j−k}/k!, rescaled to the a-form.
            let mut acc = 0.0;
            for k in 0..=n.min(j) {
                if j - k > r * n {
                    continue;
                }
                let log_w = ln_binomial(j as u64, k as u64)
                    + (j - k) as f64 * p.ln()
                    + k as f64 * (1.0 - p).ln();
                acc += log_w.exp() * a[j - k];
            }
            *slot = acc;
        }
        a = next;
    }
    a.iter().sum::<f64>() / (eta * d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_closed_form_boundary() {
        let e = ServiceDistribution::exponential(2.0).unwrap();
        let v = theta(&e, 2, ThetaMode::ClosedForm).unwrap();
        assert_eq!(v.theta, 1.0);
        let g = theta(&e, 2, ThetaMode::Generic).unwrap();
        assert!((g.theta - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weibull_closed_form_example() {
        let w = ServiceDistribution::weibull(0.2, 5.0).unwrap();
        let v = theta(&w, 2, ThetaMode::ClosedForm).unwrap();
        // 5/(2^5 Γ(6)) = 5/3840.
        assert!((v.theta - 5.0 / 3840.0).abs() < 1e-15);
    }

    #[test]
    fn paper_table_erlang_two_two() {
        let e = ServiceDistribution::erlang(2, 1.0).unwrap();
        let v = theta(&e, 2, ThetaMode::PaperTable).unwrap();
        assert!((v.theta - 0.515625).abs() < 1e-14);
        assert!((v.theta_tilde - 2.0625).abs() < 1e-14);
    }

    #[test]
    fn erlang_polynomial_matches_quadrature() {
        for (m, d, eta) in [(1u32, 3u32, 1.0), (2, 2, 1.0), (5, 5, 2.0), (10, 10, 1.0), (3, 7, 0.5)] {
            let dist = ServiceDistribution::erlang(m, eta).unwrap();
            let closed = theta(&dist, d, ThetaMode::ClosedForm).unwrap().theta;
            let generic = theta(&dist, d, ThetaMode::Generic).unwrap().theta;
            assert!(((closed - generic) / generic).abs() < 1e-9, "m={m} d={d}: {closed} vs {generic}");
        }
    }

    #[test]
    fn paper_table_matches_quadrature() {
        let (m, d, eta) = (5u32, 5u32, 1.0);
        let dist = ServiceDistribution::erlang(m, eta).unwrap();
        let table = theta(&dist, d, ThetaMode::PaperTable).unwrap();
        let q = integrate(
            |x: f64| {
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..=m {
                    term *= eta * x / k as f64;
                    sum += term;
                }
                ((-eta * x).exp() * sum).powi(d as i32)
            },
            0.0,
            f64::INFINITY,
            &dist.quadrature_spec(),
        )
        .unwrap();
        assert!(((table.theta_tilde - q) / q).abs() < 1e-10);
    }

    #[test]
    fn power_law_reports_both_values() {
        let p = ServiceDistribution::power_law(2.0, 3.0).unwrap();
        let v = theta(&p, 2, ThetaMode::ClosedForm).unwrap();
        let expected = 2f64.powf(-1.0) * 4.0 / 5.0;
        assert!((v.theta - expected).abs() < 1e-15);
        assert_eq!(v.power_law_unit_mean_claim, Some(2.0));
        let g = theta(&p, 2, ThetaMode::Generic).unwrap();
        assert!(((g.theta - expected) / expected).abs() < 1e-8);
    }

    #[test]
    fn modes_are_validated() {
        let a = ServiceDistribution::almost_exponential(2.0).unwrap();
        assert!(matches!(theta(&a, 2, ThetaMode::ClosedForm), Err(ThetaError::NoClosedForm(_))));
        assert!(matches!(theta(&a, 2, ThetaMode::PaperTable), Err(ThetaError::Unsupported(_))));
        assert!(matches!(theta(&a, 0, ThetaMode::Generic), Err(ThetaError::InvalidD)));
    }

    #[test]
    fn d_one_gives_unity() {
        for dist in [
            ServiceDistribution::weibull(0.5, 5.0).unwrap(),
            ServiceDistribution::erlang(3, 2.0).unwrap(),
            ServiceDistribution::power_law(1.0, 2.5).unwrap(),
        ] {
            let v = theta(&dist, 1, ThetaMode::Generic).unwrap();
            assert!((v.theta - 1.0).abs() < 1e-9, "{dist}");
        }
    }
}
