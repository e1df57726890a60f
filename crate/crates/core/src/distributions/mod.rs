//! Service-time laws: survival, hazard, moments, and sampling.

mod spec;

pub use spec::parse_distribution;

use std::fmt;

use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::numerics::quadrature::{integrate, QuadratureError, QuadratureSpec};
use crate::phasetype::{PhRepresentation, PhaseTypeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infinite moment: {0}")]
    InfiniteMoment(String),
    #[error("survival is zero at x = {x}; hazard undefined")]
    ZeroSurvival { x: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    PhaseType(#[from] PhaseTypeError),
    #[error("invalid distribution spec '{spec}': {message}")]
    Parse { spec: String, message: String },
}

/// A service-time law. Build through the checked constructors.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceDistribution {
    /// `Ḡ(x) = e^{−μx}`.
    Exponential { rate: f64 },
    /// Sum of `phases` exponentials of rate `rate`.
    Erlang { phases: u32, rate: f64 },
    /// `Ḡ(x) = exp{−(μx)^τ}`.
    Weibull { shape: f64, scale: f64 },
    /// `Ḡ(x) = (μ + x)^{−α}`. With `μ ≠ 1` this is not a proper survival
    /// function at 0: `μ > 1` leaves an atom of mass `1 − μ^{−α}` at zero,
    /// `μ < 1` exceeds 1 near the origin and is evaluation-only.
    PowerLaw { shift: f64, exponent: f64 },
    /// `Ḡ(x) = exp{−x |ln x|^{−α}}`, non-monotone across `x = 1`;
    /// evaluation-only. `mean` is cached from quadrature.
    AlmostExponential { exponent: f64, mean: f64 },
    PhaseType(PhRepresentation),
}

fn positive(name: &str, v: f64) -> Result<f64, DistributionError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(DistributionError::InvalidParameter(format!(
            "{name} must be finite and positive, got {v}"
        )))
    }
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        Ok(Self::Exponential {
            rate: positive("rate", rate)?,
        })
    }

    pub fn erlang(phases: u32, rate: f64) -> Result<Self, DistributionError> {
        if phases == 0 {
            return Err(DistributionError::InvalidParameter("Erlang needs m >= 1".into()));
        }
        Ok(Self::Erlang {
            phases,
            rate: positive("rate", rate)?,
        })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self, DistributionError> {
        Ok(Self::Weibull {
            shape: positive("shape tau", shape)?,
            scale: positive("scale mu", scale)?,
        })
    }

    /// Weibull with shape `τ` and the scale that gives the requested mean.
    pub fn weibull_with_mean(shape: f64, mean: f64) -> Result<Self, DistributionError> {
        let shape = positive("shape tau", shape)?;
        let mean = positive("mean", mean)?;
        Self::weibull(shape, gamma(1.0 + 1.0 / shape) / mean)
    }

    pub fn power_law(shift: f64, exponent: f64) -> Result<Self, DistributionError> {
        let shift = positive("shift mu", shift)?;
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(DistributionError::InvalidParameter(format!(
                "power-law exponent alpha must exceed 1 for a finite mean, got {exponent}"
            )));
        }
        Ok(Self::PowerLaw { shift, exponent })
    }

    pub fn almost_exponential(exponent: f64) -> Result<Self, DistributionError> {
        let exponent = positive("exponent alpha", exponent)?;
        let probe = Self::AlmostExponential { exponent, mean: f64::NAN };
        let mean = integrate(|x| probe.survival(x), 0.0, f64::INFINITY, &probe.quadrature_spec())?;
        Ok(Self::AlmostExponential {
            exponent,
            mean: positive("mean", mean)?,
        })
    }

    pub fn phase_type(rep: PhRepresentation) -> Self {
        Self::PhaseType(rep)
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Erlang { .. } => "erlang",
            Self::Weibull { .. } => "weibull",
            Self::PowerLaw { .. } => "powerlaw",
            Self::AlmostExponential { .. } => "almostexp",
            Self::PhaseType(_) => "ph",
        }
    }

    /// Quadrature settings suited to integrals of `Ḡ` and its powers.
    pub fn quadrature_spec(&self) -> QuadratureSpec {
        let width = match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Erlang { phases, rate } => *phases as f64 / rate,
            Self::Weibull { scale, .. } => 1.0 / scale,
            Self::PowerLaw { shift, .. } => shift.max(1.0),
            Self::AlmostExponential { .. } => 1.0,
            Self::PhaseType(rep) => rep.mean(),
        };
        let spec = QuadratureSpec::default().with_tail_width(width);
        match self {
            Self::AlmostExponential { .. } => spec.with_split_points(vec![1.0]),
            _ => spec,
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Erlang { phases, rate } => {
                let t = rate * x;
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..phases {
                    term *= t / k as f64;
                    sum += term;
                }
                ((-t).exp() * sum).min(1.0)
            }
            Self::Weibull { shape, scale } => (-(scale * x).powf(shape)).exp(),
            Self::PowerLaw { shift, exponent } => (shift + x).powf(-exponent),
            Self::AlmostExponential { exponent, .. } => {
                if x == 0.0 {
                    1.0
                } else if x == 1.0 {
                    0.0
                } else {
                    (-x * x.ln().abs().powf(-exponent)).exp()
                }
            }
            Self::PhaseType(ref rep) => rep.survival(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// Density `−Ḡ'(x)`.
    pub fn density(&self, x: f64) -> Result<f64, DistributionError> {
        match self {
            Self::PhaseType(rep) => Ok(rep.density(x.max(0.0))),
            Self::AlmostExponential { .. } => Err(DistributionError::Unsupported(
                "the almost-exponential law has no valid density".into(),
            )),
            _ => {
                let s = self.survival(x);
                if s == 0.0 {
                    return Ok(0.0);
                }
                Ok(self.hazard(x)? * s)
            }
        }
    }

    pub fn hazard(&self, x: f64) -> Result<f64, DistributionError> {
        let x = x.max(0.0);
        match *self {
            Self::Exponential { rate } => Ok(rate),
            Self::Erlang { phases, rate } => {
                // η t^{m−1}/(m−1)! over Σ_{k<m} t^k/k!, divided through by the
                // leading term so large t cannot overflow.
                let t = rate * x;
                let m = phases as usize;
                let mut denom = 1.0;
                let mut factor = 1.0;
                for j in 1..m {
                    factor *= (m - j) as f64 / t;
                    if !factor.is_finite() {
                        return Ok(0.0);
                    }
                    denom += factor;
                }
                Ok(rate / denom)
            }
            Self::Weibull { shape, scale } => {
                if x == 0.0 {
                    return Ok(match shape {
                        s if s < 1.0 => f64::INFINITY,
                        1.0 => scale,
                        _ => 0.0,
                    });
                }
                Ok(shape * scale * (scale * x).powf(shape - 1.0))
            }
            Self::PowerLaw { shift, exponent } => Ok(exponent / (shift + x)),
            Self::AlmostExponential { .. } => Err(DistributionError::Unsupported(
                "the almost-exponential law is non-monotone and has no hazard".into(),
            )),
            Self::PhaseType(ref rep) => rep.hazard(x).ok_or(DistributionError::ZeroSurvival { x }),
        }
    }

    /// `E[X] = ∫Ḡ`.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Erlang { phases, rate } => phases as f64 / rate,
            Self::Weibull { shape, scale } => gamma(1.0 + 1.0 / shape) / scale,
            Self::PowerLaw { shift, exponent } => shift.powf(1.0 - exponent) / (exponent - 1.0),
            Self::AlmostExponential { mean, .. } => mean,
            Self::PhaseType(ref rep) => rep.mean(),
        }
    }

    /// Service rate `μ = 1/E[X]`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    /// `E[X²] = 2∫x Ḡ(x) dx`.
    pub fn second_moment(&self) -> Result<f64, DistributionError> {
        match *self {
            Self::Exponential { rate } => Ok(2.0 / (rate * rate)),
            Self::Erlang { phases, rate } => {
                let m = phases as f64;
                Ok(m * (m + 1.0) / (rate * rate))
            }
            Self::Weibull { shape, scale } => Ok(gamma(1.0 + 2.0 / shape) / (scale * scale)),
            Self::PowerLaw { shift, exponent } => {
                if exponent <= 2.0 {
                    return Err(DistributionError::InfiniteMoment(format!(
                        "power-law second moment needs alpha > 2, got {exponent}"
                    )));
                }
                Ok(2.0 * shift.powf(2.0 - exponent) / ((exponent - 1.0) * (exponent - 2.0)))
            }
            Self::AlmostExponential { .. } => Ok(2.0 * integrate(
                |x| x * self.survival(x),
                0.0,
                f64::INFINITY,
                &self.quadrature_spec(),
            )?),
            Self::PhaseType(ref rep) => Ok(rep.second_moment()),
        }
    }

    /// Whether [`sample`](Self::sample) is available.
    pub fn is_samplable(&self) -> bool {
        match *self {
            Self::AlmostExponential { .. } => false,
            Self::PowerLaw { shift, .. } => shift >= 1.0,
            _ => true,
        }
    }

    /// Closed-form `Ḡ⁻¹(u)` for `u ∈ (0, 1]`.
    pub fn inverse_survival(&self, u: f64) -> Result<f64, DistributionError> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(DistributionError::InvalidParameter(format!("u = {u} is not in (0, 1]")));
        }
        match *self {
            Self::Exponential { rate } => Ok(-u.ln() / rate),
            Self::Weibull { shape, scale } => Ok((-u.ln()).powf(1.0 / shape) / scale),
            Self::PowerLaw { shift, exponent } if shift >= 1.0 => {
                // Values of u above Ḡ(0) fall in the atom at zero.
                Ok((u.powf(-1.0 / exponent) - shift).max(0.0))
            }
            _ => Err(DistributionError::Unsupported(format!(
                "no closed-form inverse survival for {}",
                self.family()
            ))),
        }
    }

    /// Draws one service time from a stream of uniforms on `(0, 1]`.
    ///
    /// Closed-form families consume exactly one uniform; Erlang and PH walk
    /// their phases and consume a variable number.
    pub fn sample<U: FnMut() -> f64>(&self, uniform: &mut U) -> Result<f64, DistributionError> {
        match *self {
            Self::Erlang { phases, rate } => {
                let log_sum: f64 = (0..phases).map(|_| uniform().ln()).sum();
                Ok(-log_sum / rate)
            }
            Self::PhaseType(ref rep) => Ok(rep.sample_walk(uniform)),
            Self::AlmostExponential { .. } => Err(DistributionError::Unsupported(
                "the almost-exponential law cannot be sampled".into(),
            )),
            Self::PowerLaw { shift, .. } if shift < 1.0 => Err(DistributionError::Unsupported(
                "power law with mu < 1 has survival above 1 near zero; evaluation only".into(),
            )),
            _ => self.inverse_survival(uniform()),
        }
    }

    /// Phase-type form of the law, when it has one.
    pub fn to_phase_type(&self) -> Option<PhRepresentation> {
        match *self {
            Self::Exponential { rate } => PhRepresentation::exponential(rate).ok(),
            Self::Erlang { phases, rate } => PhRepresentation::erlang(phases as usize, rate).ok(),
            Self::PhaseType(ref rep) => Some(rep.clone()),
            _ => None,
        }
    }
}

impl fmt::Display for ServiceDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exponential:mu={rate}"),
            Self::Erlang { phases, rate } => write!(f, "erlang:m={phases},eta={rate}"),
            Self::Weibull { shape, scale } => write!(f, "weibull:tau={shape},mu={scale}"),
            Self::PowerLaw { shift, exponent } => write!(f, "powerlaw:mu={shift},alpha={exponent}"),
            Self::AlmostExponential { exponent, .. } => write!(f, "almostexp:alpha={exponent}"),
            Self::PhaseType(rep) => write!(f, "{rep}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<ServiceDistribution> {
        vec![
            ServiceDistribution::exponential(1.0).unwrap(),
            ServiceDistribution::exponential(2.5).unwrap(),
            ServiceDistribution::erlang(1, 0.5).unwrap(),
            ServiceDistribution::erlang(2, 1.0).unwrap(),
            ServiceDistribution::erlang(7, 3.0).unwrap(),
            ServiceDistribution::weibull(0.5, 5.0).unwrap(),
            ServiceDistribution::weibull(0.2, 5.0).unwrap(),
            ServiceDistribution::weibull(1.7, 0.8).unwrap(),
            ServiceDistribution::power_law(1.0, 3.0).unwrap(),
            ServiceDistribution::power_law(2.0, 2.5).unwrap(),
            ServiceDistribution::power_law(0.5, 4.0).unwrap(),
            ServiceDistribution::phase_type(PhRepresentation::erlang(3, 2.0).unwrap()),
        ]
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(ServiceDistribution::exponential(1.0).unwrap().survival(0.0), 1.0);
        assert_eq!(ServiceDistribution::power_law(1.0, 2.0).unwrap().survival(1.0), 0.25);
        let w = ServiceDistribution::weibull(0.5, 5.0).unwrap();
        // exp(-sqrt(0.2)), evaluated independently at high precision.
        assert!((w.survival(0.04) - 0.6394073191618971).abs() < 1e-15);
        assert!((w.mean() - 0.4).abs() < 1e-14);
        assert!((ServiceDistribution::exponential(2.0).unwrap().mean() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hazard_examples() {
        let e = ServiceDistribution::exponential(1.3).unwrap();
        assert_eq!(e.hazard(4.0).unwrap(), 1.3);
        let erl = ServiceDistribution::erlang(2, 1.0).unwrap();
        assert!((erl.hazard(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((erl.hazard(1e6).unwrap() - 1.0).abs() < 1e-5);
        let p = ServiceDistribution::power_law(1.0, 2.0).unwrap();
        assert_eq!(p.hazard(0.0).unwrap(), 2.0);
        let ph = ServiceDistribution::phase_type(PhRepresentation::erlang(2, 1.0).unwrap());
        assert!((ph.hazard(1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_survival_examples() {
        let u = (-1.0f64).exp();
        let e = ServiceDistribution::exponential(1.0).unwrap();
        assert!((e.inverse_survival(u).unwrap() - 1.0).abs() < 1e-15);
        let w = ServiceDistribution::weibull(0.5, 5.0).unwrap();
        assert!((w.inverse_survival(u).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn moments_of_erlang_two_phase_type() {
        let ph = ServiceDistribution::phase_type(PhRepresentation::erlang(2, 1.0).unwrap());
        assert!((ph.mean() - 2.0).abs() < 1e-14);
        assert!((ph.second_moment().unwrap() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn power_law_second_moment_needs_alpha_above_two() {
        let p = ServiceDistribution::power_law(1.0, 2.0).unwrap();
        assert!(matches!(p.second_moment(), Err(DistributionError::InfiniteMoment(_))));
        assert!(ServiceDistribution::power_law(1.0, 1.0).is_err());
    }

    #[test]
    fn almost_exponential_is_evaluation_only() {
        let a = ServiceDistribution::almost_exponential(2.0).unwrap();
        assert!(a.mean() > 0.0);
        assert_eq!(a.survival(1.0), 0.0);
        assert!(a.survival(2.0) > a.survival(1.1));
        let mut u = || 0.5;
        assert!(matches!(a.sample(&mut u), Err(DistributionError::Unsupported(_))));
        assert!(a.hazard(0.5).is_err());
    }

    #[test]
    fn quadrature_of_survival_matches_mean() {
        for dist in families() {
            let spec = dist.quadrature_spec();
            let q = integrate(|x| dist.survival(x), 0.0, f64::INFINITY, &spec).unwrap();
            let mean = dist.mean();
            assert!(((q - mean) / mean).abs() < 1e-8, "{dist}: {q} vs {mean}");
        }
    }

    #[test]
    fn quadrature_of_second_moment() {
        for dist in families() {
            let Ok(m2) = dist.second_moment() else { continue };
            let spec = dist.quadrature_spec();
            let q = 2.0 * integrate(|x| x * dist.survival(x), 0.0, f64::INFINITY, &spec).unwrap();
            assert!(((q - m2) / m2).abs() < 1e-6, "{dist}: {q} vs {m2}");
        }
    }

    #[test]
    fn cumulative_hazard_recovers_survival() {
        for dist in families() {
            // Hazards singular at the origin need a split just past it.
            if matches!(dist, ServiceDistribution::Weibull { shape, .. } if shape < 1.0) {
                continue;
            }
            let s0 = dist.survival(0.0);
            let spec = QuadratureSpec::default().with_relative_tolerance(1e-12);
            for x in [0.1, 0.7, 2.0] {
                let h = integrate(|y| dist.hazard(y).unwrap(), 0.0, x, &spec).unwrap();
                let s = s0 * (-h).exp();
                assert!((s - dist.survival(x)).abs() < 1e-6, "{dist} at {x}");
            }
        }
    }

    fn ks_distance(dist: &ServiceDistribution, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || 1.0 - rng.random::<f64>();
        let mut xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut u).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let mut worst = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let f = dist.cdf(x);
            worst = worst.max((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64);
        }
        worst
    }

    #[test]
    fn samples_pass_kolmogorov_smirnov() {
        let n = 100_000;
        // 1% critical value of the one-sample statistic.
        let critical = 1.628 / (n as f64).sqrt();
        for (i, dist) in families().into_iter().filter(|d| d.is_samplable()).enumerate() {
            let dist = match dist {
                ServiceDistribution::PowerLaw { shift, exponent } if shift > 1.0 => {
                    // Atom at zero makes the continuous KS bound inapplicable.
                    ServiceDistribution::power_law(1.0, exponent).unwrap()
                }
                d => d,
            };
            let dn = ks_distance(&dist, n, 1000 + i as u64);
            assert!(dn < critical, "{dist}: D = {dn} >= {critical}");
        }
    }

    #[test]
    fn power_law_sample_mean() {
        let dist = ServiceDistribution::power_law(1.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut u = || 1.0 - rng.random::<f64>();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut u).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn weibull_with_mean_normalizes() {
        let w = ServiceDistribution::weibull_with_mean(0.5, 1.0).unwrap();
        assert!((w.mean() - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn survival_is_non_increasing(tau in 0.2f64..3.0, mu in 0.1f64..10.0, m in 1u32..12, x in 0.0f64..20.0, dx in 0.0f64..5.0) {
            for dist in [
                ServiceDistribution::weibull(tau, mu).unwrap(),
                ServiceDistribution::erlang(m, mu).unwrap(),
                ServiceDistribution::power_law(mu.max(1.0), 1.0 + tau).unwrap(),
            ] {
                let a = dist.survival(x);
                let b = dist.survival(x + dx);
                prop_assert!(b <= a);
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }
}
