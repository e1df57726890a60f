//! Truncated mean-field dynamics of the supermarket model.
//!
//! Exponential service uses one scalar tail fraction per level; PH service
//! splits each level over phases. States are flat vectors that start with the
//! constant level 0: `[u_0 = 1, u_1, …, u_K]` or `[1, S_1 (m entries), …, S_K]`.
//! Level `K + 1` is closed as identically zero.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::ode::{solve_ode, OdeError, OdeSettings, Trajectory};
use crate::phasetype::{hadamard_power, PhRepresentation};

/// Slack allowed in the level-ordering check.
const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("level ordering violated at t = {t}: level {k} exceeds level {prev}", prev = k - 1)]
    OrderingViolated { t: f64, k: usize },
    #[error("invalid mean-field configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Exponential { lambda: f64, mu: f64, d: u32 },
    PhaseType { lambda: f64, rep: PhRepresentation, d: u32 },
}

impl System {
    pub fn lambda(&self) -> f64 {
        match self {
            Self::Exponential { lambda, .. } | Self::PhaseType { lambda, .. } => *lambda,
        }
    }

    pub fn d(&self) -> u32 {
        match self {
            Self::Exponential { d, .. } | Self::PhaseType { d, .. } => *d,
        }
    }

    /// Entries per level (1 for exponential service, `m` for PH).
    pub fn phases(&self) -> usize {
        match self {
            Self::Exponential { .. } => 1,
            Self::PhaseType { rep, .. } => rep.order(),
        }
    }

    /// Length of the flat state for truncation level `K`.
    pub fn state_len(&self, k_max: usize) -> usize {
        1 + k_max * self.phases()
    }

    /// Truncation level encoded by a flat state.
    pub fn levels(&self, state: &[f64]) -> usize {
        (state.len() - 1) / self.phases()
    }

    pub fn empty_state(&self, k_max: usize) -> Vec<f64> {
        let mut s = vec![0.0; self.state_len(k_max)];
        s[0] = 1.0;
        s
    }

    /// Tail masses `(u_0, …, u_K)`, summing phases for PH states.
    pub fn level_masses(&self, state: &[f64]) -> Vec<f64> {
        let m = self.phases();
        std::iter::once(state[0])
            .chain(state[1..].chunks(m).map(|c| c.iter().sum()))
            .collect()
    }

    pub fn drift_into(&self, state: &[f64], out: &mut [f64]) {
        match self {
            Self::Exponential { lambda, mu, d } => drift_exponential_into(state, *lambda, *mu, *d, out),
            Self::PhaseType { lambda, rep, d } => drift_ph_into(state, *lambda, rep, *d, out),
        }
    }

    pub fn drift(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; state.len()];
        self.drift_into(state, &mut out);
        out
    }

    pub fn decomposition(&self, state: &[f64]) -> DriftSpec {
        match self {
            Self::Exponential { lambda, mu, d } => drift_decomposition_exponential(state, *lambda, *mu, *d),
            Self::PhaseType { lambda, rep, d } => drift_decomposition_ph(state, *lambda, rep, *d),
        }
    }
}

/// `du_k/dt = λ(u_{k−1}^d − u_k^d) − μ(u_k − u_{k+1})` for `1 ≤ k ≤ K`; `du_0/dt = 0`.
pub fn drift_exponential(u: &[f64], lambda: f64, mu: f64, d: u32) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    drift_exponential_into(u, lambda, mu, d, &mut out);
    out
}

fn drift_exponential_into(u: &[f64], lambda: f64, mu: f64, d: u32, out: &mut [f64]) {
    let k_max = u.len() - 1;
    out[0] = 0.0;
    let mut prev_pow = u[0].powi(d as i32);
    for k in 1..=k_max {
        let pow = u[k].powi(d as i32);
        let next = if k < k_max { u[k + 1] } else { 0.0 };
        out[k] = lambda * (prev_pow - pow) - mu * (u[k] - next);
        prev_pow = pow;
    }
}

/// `dS_k/dt = λS_{k−1}^{⊙d} − λS_k^{⊙d} + S_kT + S_{k+1}T⁰α`, with the level-1
/// inflow `λαS_0^d`; `S_0 ≡ 1`.
pub fn drift_ph(state: &[f64], lambda: f64, rep: &PhRepresentation, d: u32) -> Vec<f64> {
    let mut out = vec![0.0; state.len()];
    drift_ph_into(state, lambda, rep, d, &mut out);
    out
}

fn drift_ph_into(state: &[f64], lambda: f64, rep: &PhRepresentation, d: u32, out: &mut [f64]) {
    let spec = drift_decomposition_ph(state, lambda, rep, d);
    out[0] = 0.0;
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        *o = spec.a * spec.beta_a[i] + spec.b * spec.beta_b[i];
    }
}

/// Arrival and service parts of the drift, `F = aβ_a + bβ_b`, per state entry.
///
/// For `k ≥ 1` the combination reproduces the drift exactly. Entry 0 holds the
/// level-0 balance `β_a = −λ`, `β_b = ` departures from level 1; the ODE keeps
/// `u_0` fixed at 1, so this balance vanishes only at a fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSpec {
    pub beta_a: Vec<f64>,
    pub beta_b: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl DriftSpec {
    pub fn combined(&self) -> Vec<f64> {
        self.beta_a
            .iter()
            .zip(&self.beta_b)
            .map(|(x, y)| self.a * x + self.b * y)
            .collect()
    }
}

pub fn drift_decomposition_exponential(u: &[f64], lambda: f64, mu: f64, d: u32) -> DriftSpec {
    let k_max = u.len() - 1;
    let at = |k: usize| if k <= k_max { u[k] } else { 0.0 };
    let mut beta_a = vec![-lambda];
    let mut beta_b = vec![mu * at(1)];
    for k in 1..=k_max {
        beta_a.push(lambda * (at(k - 1).powi(d as i32) - at(k).powi(d as i32)));
        beta_b.push(-mu * (at(k) - at(k + 1)));
    }
    DriftSpec {
        beta_a,
        beta_b,
        a: 1.0,
        b: 1.0,
    }
}

pub fn drift_decomposition_ph(state: &[f64], lambda: f64, rep: &PhRepresentation, d: u32) -> DriftSpec {
    let m = rep.order();
    let k_max = (state.len() - 1) / m;
    let exit = rep.exit_vector();
    let alpha = rep.alpha();
    let t = rep.t();
    let df = d as f64;
    let level = |k: usize| -> &[f64] { &state[1 + (k - 1) * m..1 + k * m] };
    let exit_flow = |k: usize| -> f64 {
        if k > k_max {
            0.0
        } else {
            level(k).iter().zip(exit).map(|(a, b)| a * b).sum()
        }
    };

    let mut beta_a = vec![-lambda * state[0].powi(d as i32)];
    let mut beta_b = vec![exit_flow(1)];
    let mut prev_pow: Vec<f64> = Vec::new();
    for k in 1..=k_max {
        let s = level(k);
        let pow = hadamard_power(s, df);
        let restart = exit_flow(k + 1);
        for j in 0..m {
            let inflow = if k == 1 {
                alpha[j] * state[0].powi(d as i32)
            } else {
                prev_pow[j]
            };
            beta_a.push(lambda * (inflow - pow[j]));
            let within: f64 = (0..m).map(|i| s[i] * t[(i, j)]).sum();
            beta_b.push(within + restart * alpha[j]);
        }
        prev_pow = pow;
    }
    DriftSpec {
        beta_a,
        beta_b,
        a: 1.0,
        b: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Empty,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldConfig {
    pub system: System,
    pub initial: InitialState,
    pub k_max: usize,
    pub settings: OdeSettings,
}

/// Checks level 0 is 1 and levels are ordered within [`ORDER_TOL`]; PH states are
/// compared entrywise, since each phase's fraction is a nested subset too.
pub fn check_ordering(system: &System, state: &[f64]) -> Result<(), usize> {
    if (state[0] - 1.0).abs() > ORDER_TOL {
        return Err(0);
    }
    let m = system.phases();
    let masses = system.level_masses(state);
    for k in 1..masses.len() {
        if masses[k] > masses[k - 1] + ORDER_TOL || masses[k] > 1.0 + ORDER_TOL {
            return Err(k);
        }
        if k >= 2 {
            let hi = &state[1 + (k - 2) * m..1 + (k - 1) * m];
            let lo = &state[1 + (k - 1) * m..1 + k * m];
            if lo.iter().zip(hi).any(|(l, h)| *l > *h + ORDER_TOL) {
                return Err(k);
            }
        }
    }
    Ok(())
}

pub fn integrate_meanfield(config: &MeanFieldConfig) -> Result<Trajectory, MeanFieldError> {
    let system = &config.system;
    if config.k_max == 0 {
        return Err(MeanFieldError::InvalidConfig("K must be at least 1".into()));
    }
    let y0 = match &config.initial {
        InitialState::Empty => system.empty_state(config.k_max),
        InitialState::Given(v) => {
            if v.len() != system.state_len(config.k_max) {
                return Err(MeanFieldError::InvalidConfig(format!(
                    "initial state has {} entries, expected {}",
                    v.len(),
                    system.state_len(config.k_max)
                )));
            }
            v.clone()
        }
    };
    check_ordering(system, &y0).map_err(|k| MeanFieldError::InvalidConfig(format!("initial state is not ordered at level {k}")))?;

    let traj = solve_ode(|y, dy| system.drift_into(y, dy), &y0, &config.settings)?;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        check_ordering(system, state).map_err(|k| MeanFieldError::OrderingViolated { t: *t, k })?;
    }
    Ok(traj)
}
