//! Classical fixed-step Runge–Kutta integration on the unit box.
//!
//! States represent fractions, so every component must stay in `[0, 1]`.
//! Overshoot within [`BOX_SLACK`] is clamped; anything larger aborts the run,
//! which in practice means the step is too coarse for the field.

use serde::Serialize;
use thiserror::Error;

/// Overshoot beyond `[0, 1]` that is silently clamped.
pub const BOX_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("state left the unit box at t = {t}: component {index} = {value:e}; reduce the step")]
    Instability { t: f64, index: usize, value: f64 },
    #[error("invalid ODE settings: {0}")]
    InvalidSettings(String),
    #[error("initial state component {index} = {value} is outside [0, 1]")]
    InvalidInitial { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSettings {
    pub t_end: f64,
    /// Requested step; the effective step divides `t_end` evenly and never exceeds it.
    pub step: f64,
    /// Record every `output_every`-th step (the final state is always kept).
    pub output_every: usize,
}

impl OdeSettings {
    pub fn new(t_end: f64, step: f64) -> Self {
        Self {
            t_end,
            step,
            output_every: 1,
        }
    }

    pub fn with_output_every(mut self, every: usize) -> Self {
        self.output_every = every;
        self
    }

    fn validate(&self) -> Result<(), OdeError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(OdeError::InvalidSettings(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(OdeError::InvalidSettings(format!(
                "t_end must be finite and non-negative, got {}",
                self.t_end
            )));
        }
        if self.output_every == 0 {
            return Err(OdeError::InvalidSettings("output_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the effective step length.
    pub fn grid(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, 0.0);
        }
        let n = (self.t_end / self.step - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub metadata: OdeSettings,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        let t = *self.times.last()?;
        Some((t, self.states.last()?.as_slice()))
    }

    /// State at the recorded time closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&[f64]> {
        let i = self.times.partition_point(|&s| s < t);
        let candidates = [i.checked_sub(1), (i < self.times.len()).then_some(i)];
        candidates
            .into_iter()
            .flatten()
            .min_by(|&a, &b| {
                (self.times[a] - t)
                    .abs()
                    .total_cmp(&(self.times[b] - t).abs())
            })
            .map(|i| self.states[i].as_slice())
    }
}

/// Integrates `y' = field(y)` from `y0` over `[0, t_end]` with RK4.
///
/// `field(y, dy)` writes the derivative at `y` into `dy`.
pub fn solve_ode<F>(field: F, y0: &[f64], settings: &OdeSettings) -> Result<Trajectory, OdeError>
where
    F: Fn(&[f64], &mut [f64]),
{
    settings.validate()?;
    for (index, &value) in y0.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(OdeError::InvalidInitial { index, value });
        }
    }

    let (steps, h) = settings.grid();
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let mut times = vec![0.0];
    let mut states = vec![y.clone()];

    for i in 1..=steps {
        field(&y, &mut k1);
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        field(&tmp, &mut k2);
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        field(&tmp, &mut k3);
        for j in 0..dim {
            tmp[j] = y[j] + h * k3[j];
        }
        field(&tmp, &mut k4);

        let t = i as f64 * h;
        for j in 0..dim {
            let next = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            if !(-BOX_SLACK..=1.0 + BOX_SLACK).contains(&next) {
                return Err(OdeError::Instability {
                    t,
                    index: j,
                    value: next,
                });
            }
            y[j] = next.clamp(0.0, 1.0);
        }

        if i % settings.output_every == 0 || i == steps {
            times.push(t);
            states.push(y.clone());
        }
    }

    Ok(Trajectory {
        times,
        states,
        metadata: settings.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(y: &[f64], dy: &mut [f64]) {
        dy[0] = -y[0];
    }

    #[test]
    fn zero_field_is_constant() {
        let y0 = [0.3, 0.7, 1.0];
        let traj = solve_ode(|_, dy| dy.fill(0.0), &y0, &OdeSettings::new(2.0, 0.1)).unwrap();
        assert_eq!(traj.times.len(), traj.states.len());
        assert!(traj.states.iter().all(|s| s == &y0));
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let traj = solve_ode(decay, &[1.0], &OdeSettings::new(1.0, 1e-3)).unwrap();
        let (t, y) = traj.last().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_error_scaling() {
        let err = |h: f64| {
            let traj = solve_ode(decay, &[1.0], &OdeSettings::new(1.0, h)).unwrap();
            (traj.last().unwrap().1[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn overshoot_is_an_error() {
        let err = solve_ode(|_, dy| dy[0] = 5.0, &[0.9], &OdeSettings::new(1.0, 0.1)).unwrap_err();
        assert!(matches!(err, OdeError::Instability { index: 0, .. }));
    }

    #[test]
    fn output_stride_keeps_final_state() {
        let traj = solve_ode(decay, &[1.0], &OdeSettings::new(1.0, 0.1).with_output_every(3)).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert!((traj.times.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(solve_ode(decay, &[1.0], &OdeSettings::new(1.0, 0.0)).is_err());
        assert!(solve_ode(decay, &[1.5], &OdeSettings::new(1.0, 0.1)).is_err());
    }

    #[test]
    fn nearest_picks_closest_sample() {
        let traj = solve_ode(decay, &[1.0], &OdeSettings::new(1.0, 0.25)).unwrap();
        let y = traj.nearest(0.3).unwrap();
        assert_eq!(y, traj.states[1].as_slice());
    }
}
