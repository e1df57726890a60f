//! Potential-function diagnostics for convergence to the fixed point.
//!
//! States and fixed points are level masses `(u_0, u_1, …, u_K)`; entry 0 is
//! ignored. PH states should be reduced with `System::level_masses` first.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::ode::Trajectory;

/// Gaps at or below this are treated as zero by [`ratios`].
pub const ZERO_GAP: f64 = 1e-14;
/// States may exceed the fixed point by this much before [`potential`] errors.
pub const NEGATIVE_GAP_TOL: f64 = 1e-9;
/// Smallest fixed-point tail used by [`potential_series_adaptive`].
pub const ADAPTIVE_MIN_TAIL: f64 = 1e-12;
/// Minimum number of samples for [`fit_decay`].
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvergenceError {
    #[error("state meets the fixed point at level {k} (gap {gap:e})")]
    ZeroGap { k: usize, gap: f64 },
    #[error("c_{k} = 0; evaluate the weights at a positive time")]
    DegenerateRatio { k: usize },
    #[error("state exceeds the fixed point at level {k} by {excess:e}")]
    NegativeGap { k: usize, excess: f64 },
    #[error("need at least {MIN_FIT_POINTS} samples in the window, found {found}")]
    InsufficientPoints { found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ratios {
    /// `c_k = u_k^d / (π_k − u_k)`, index 0 holding level 1.
    pub c: Vec<f64>,
    /// `d_k = μu_k / (π_k − u_k)`, same indexing.
    pub d: Vec<f64>,
}

fn check_lengths(state: &[f64], fixed_point: &[f64]) -> Result<(), ConvergenceError> {
    if state.len() != fixed_point.len() || state.len() < 2 {
        return Err(ConvergenceError::InvalidArgument(format!(
            "state has {} levels, fixed point has {}",
            state.len(),
            fixed_point.len()
        )));
    }
    Ok(())
}

/// Exponential-service ratios for levels `1..=K`.
pub fn ratios(state: &[f64], fixed_point: &[f64], mu: f64, d: u32) -> Result<Ratios, ConvergenceError> {
    check_lengths(state, fixed_point)?;
    let mut out = Ratios {
        c: Vec::with_capacity(state.len() - 1),
        d: Vec::with_capacity(state.len() - 1),
    };
    for k in 1..state.len() {
        let gap = fixed_point[k] - state[k];
        if gap <= ZERO_GAP {
            return Err(ConvergenceError::ZeroGap { k, gap });
        }
        out.c.push(state[k].powi(d as i32) / gap);
        out.d.push(mu * state[k] / gap);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSequence {
    pub delta: f64,
    /// `w_1, …, w_K`.
    pub weights: Vec<f64>,
}

impl WeightSequence {
    /// `w ≡ 1` over `k` levels.
    pub fn constant(k: usize) -> Self {
        Self {
            delta: 0.0,
            weights: vec![1.0; k],
        }
    }
}

/// Default `δ` for [`weights`].
pub fn default_delta(lambda: f64) -> f64 {
    0.01 * lambda
}

/// `w_1 = 1`, `w_2 = 1 + δ/(λc_1)`,
/// `w_k = w_{k−1} + (δw_{k−1} + (w_{k−1} − w_{k−2})d_{k−1})/(λc_{k−1})`.
///
/// `c` and `d` are indexed from level 1; `K = c.len() + 1` weights are returned
/// when `d` covers levels `1..K−1` as well.
pub fn weights(delta: f64, lambda: f64, c: &[f64], d: &[f64]) -> Result<WeightSequence, ConvergenceError> {
    if !(delta > 0.0) || !(lambda > 0.0) {
        return Err(ConvergenceError::InvalidArgument("delta and lambda must be positive".into()));
    }
    if d.len() < c.len() {
        return Err(ConvergenceError::InvalidArgument("d must cover every level of c".into()));
    }
    let mut w = vec![1.0];
    for (i, &ci) in c.iter().enumerate() {
        let k = i + 1;
        if !(ci > 0.0) {
            return Err(ConvergenceError::DegenerateRatio { k });
        }
        let prev = w[i];
        let prev2 = if i == 0 { prev } else { w[i - 1] };
        w.push(prev + (delta * prev + (prev - prev2) * d[i]) / (lambda * ci));
    }
    Ok(WeightSequence { delta, weights: w })
}

/// `Φ = Σ_{k≥1} w_k (π_k − u_k)`, truncated to the shorter of the weights and levels.
pub fn potential(state: &[f64], fixed_point: &[f64], w: &WeightSequence) -> Result<f64, ConvergenceError> {
    check_lengths(state, fixed_point)?;
    let mut phi = 0.0;
    for (k, wk) in (1..state.len()).zip(&w.weights) {
        let gap = fixed_point[k] - state[k];
        if gap < -NEGATIVE_GAP_TOL {
            return Err(ConvergenceError::NegativeGap { k, excess: -gap });
        }
        phi += wk * gap.max(0.0);
    }
    Ok(phi)
}

/// `Φ(t)` along a trajectory with fixed weights, as `(t, Φ)` pairs.
pub fn potential_series(
    traj: &Trajectory,
    fixed_point: &[f64],
    w: &WeightSequence,
) -> Result<Vec<(f64, f64)>, ConvergenceError> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| potential(s, fixed_point, w).map(|phi| (*t, phi)))
        .collect()
}

/// `Φ(t)` with the weights recomputed from `c_k(t)`, `d_k(t)` at every sample.
///
/// Only levels whose fixed-point tail exceeds [`ADAPTIVE_MIN_TAIL`] take part, since
/// deeper gaps vanish in floating point. Samples where some ratio is degenerate
/// (the empty start) are skipped.
pub fn potential_series_adaptive(
    traj: &Trajectory,
    fixed_point: &[f64],
    lambda: f64,
    mu: f64,
    d: u32,
    delta: f64,
) -> Result<Vec<(f64, f64)>, ConvergenceError> {
    let levels = fixed_point.iter().take_while(|p| **p > ADAPTIVE_MIN_TAIL).count();
    if levels < 2 {
        return Err(ConvergenceError::InvalidArgument("fixed point has no resolvable levels".into()));
    }
    let fixed_point = &fixed_point[..levels];
    let mut out = Vec::with_capacity(traj.len());
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let s = &s[..levels];
        let r = match ratios(s, fixed_point, mu, d) {
            Ok(r) => r,
            Err(ConvergenceError::ZeroGap { .. }) => continue,
            Err(e) => return Err(e),
        };
        let levels = r.c.len();
        let w = match weights(delta, lambda, &r.c[..levels - 1], &r.d) {
            Ok(w) => w,
            Err(ConvergenceError::DegenerateRatio { .. }) => continue,
            Err(e) => return Err(e),
        };
        out.push((*t, potential(s, fixed_point, &w)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c0: f64,
    pub delta: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through `(t, ln Φ)` for samples with `t_lo ≤ t ≤ t_hi`
/// and `Φ > 0`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, ConvergenceError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, phi)| *t >= window.0 && *t <= window.1 && *phi > 0.0)
        .map(|(t, phi)| (*t, phi.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(ConvergenceError::InsufficientPoints { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return Err(ConvergenceError::InvalidArgument("window holds a single time".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    // A flat series is fitted exactly by a zero slope.
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        (sty * sty) / (stt * syy)
    };
    Ok(DecayFit {
        c0: intercept.exp(),
        delta: if slope == 0.0 { 0.0 } else { -slope },
        r_squared,
        points: pts.len(),
    })
}

/// Largest `‖F(y) − F(z)‖_∞ / ‖y − z‖_∞` over the pairs; identical pairs are skipped.
pub fn lipschitz_estimate<F>(drift: F, samples: &[(Vec<f64>, Vec<f64>)]) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    samples
        .iter()
        .filter_map(|(y, z)| {
            let dist = sup(y, z);
            (dist > 0.0).then(|| sup(&drift(y), &drift(z)) / dist)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{drift_exponential, integrate_meanfield, InitialState, MeanFieldConfig, System};
    use crate::numerics::ode::OdeSettings;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tails(rho: f64, k_max: usize) -> Vec<f64> {
        (0..=k_max).map(|k| rho.powi((1 << k) - 1)).collect()
    }

    #[test]
    fn ratio_examples() {
        let fp = tails(0.5, 3);
        let r = ratios(&[1.0, 0.25, 0.0, 0.0], &fp, 2.0, 2).unwrap();
        assert!((r.c[0] - 0.25).abs() < 1e-15);
        assert!((r.d[0] - 2.0).abs() < 1e-15);
        let empty = ratios(&[1.0, 0.0, 0.0, 0.0], &fp, 2.0, 2).unwrap();
        assert!(empty.c.iter().chain(&empty.d).all(|v| *v == 0.0));
        assert!(matches!(ratios(&fp, &fp, 2.0, 2), Err(ConvergenceError::ZeroGap { k: 1, .. })));
    }

    #[test]
    fn weight_examples() {
        let w = weights(0.1, 1.0, &[0.5, 0.4], &[0.7, 0.3]).unwrap();
        assert_eq!(w.weights[0], 1.0);
        assert!((w.weights[1] - 1.2).abs() < 1e-15);
        assert!((w.weights[2] - 1.65).abs() < 1e-14);
        assert!(matches!(
            weights(0.1, 1.0, &[0.5, 0.0], &[0.1, 0.1]),
            Err(ConvergenceError::DegenerateRatio { k: 2 })
        ));
    }

    #[test]
    fn weights_increase_for_positive_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c: Vec<f64> = (0..8).map(|_| rng.random::<f64>() + 1e-3).collect();
            let d: Vec<f64> = (0..8).map(|_| rng.random::<f64>() + 1e-3).collect();
            let w = weights(0.05, 0.7, &c, &d).unwrap();
            assert!(w.weights.windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn potential_examples() {
        let fp = tails(0.5, 12);
        let one = WeightSequence::constant(12);
        assert_eq!(potential(&fp, &fp, &one).unwrap(), 0.0);
        let mut empty = vec![0.0; 13];
        empty[0] = 1.0;
        let phi = potential(&empty, &fp, &one).unwrap();
        // 0.5 + 0.125 + 0.0078125 + 0.000030517578125 + …
        assert!((phi - 0.632_843_018_043_786_3).abs() < 1e-12, "{phi}");
        let mut over = fp.clone();
        over[2] += 1e-6;
        assert!(matches!(potential(&over, &fp, &one), Err(ConvergenceError::NegativeGap { k: 2, .. })));
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| {
            let t = i as f64 * 0.5;
            (t, 2.0 * (-0.3 * t).exp())
        }).collect();
        let fit = fit_decay(&series, (0.0, 100.0)).unwrap();
        assert!((fit.c0 - 2.0).abs() < 1e-9);
        assert!((fit.delta - 0.3).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);

        let flat: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.7)).collect();
        let fit = fit_decay(&flat, (0.0, 100.0)).unwrap();
        assert_eq!(fit.delta, 0.0);
        assert!(matches!(
            fit_decay(&series[..5], (0.0, 100.0)),
            Err(ConvergenceError::InsufficientPoints { found: 5 })
        ));
    }

    #[test]
    fn empty_start_potential_decays() {
        let config = MeanFieldConfig {
            system: System::Exponential { lambda: 1.0, mu: 2.0, d: 2 },
            initial: InitialState::Empty,
            k_max: 10,
            settings: OdeSettings::new(40.0, 1e-2).with_output_every(10),
        };
        let traj = integrate_meanfield(&config).unwrap();
        let fp = tails(0.5, 10);
        let series = potential_series(&traj, &fp, &WeightSequence::constant(10)).unwrap();
        assert!(series.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-15));
        let fit = fit_decay(&series, (5.0, 40.0)).unwrap();
        assert!(fit.delta > 0.0 && fit.r_squared > 0.98, "{fit:?}");

        let adaptive = potential_series_adaptive(&traj, &fp, 1.0, 2.0, 2, default_delta(1.0)).unwrap();
        assert!(!adaptive.is_empty() && adaptive.iter().all(|(_, phi)| *phi >= 0.0));
    }

    #[test]
    fn lipschitz_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let random_state = |rng: &mut ChaCha8Rng| {
            let mut u = vec![1.0];
            for _ in 0..8 {
                let last = *u.last().unwrap();
                u.push(last * rng.random::<f64>());
            }
            u
        };
        let pairs: Vec<_> = (0..10_000).map(|_| (random_state(&mut rng), random_state(&mut rng))).collect();
        let (lambda, mu) = (0.9, 1.0);
        let linear = lipschitz_estimate(|u| drift_exponential(u, lambda, mu, 1), &pairs);
        assert!(linear <= 2.0 * lambda + 2.0 * mu + 1e-12 && linear > 0.0);
        let d = 3;
        let nonlinear = lipschitz_estimate(|u| drift_exponential(u, lambda, mu, d), &pairs);
        assert!(nonlinear <= d as f64 * lambda * 2.0 + 2.0 * mu + 1e-12);
        let same = vec![(pairs[0].0.clone(), pairs[0].0.clone())];
        assert_eq!(lipschitz_estimate(|u| drift_exponential(u, lambda, mu, d), &same), 0.0);
    }
}
