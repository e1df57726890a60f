//! Discrete-event simulation of the finite-`n` supermarket model.
//!
//! Arrivals form one Poisson(`nλ`) stream. Each arrival samples `d` queues,
//! joins a shortest one (ties broken uniformly) and is served FCFS. Service
//! times are drawn when service starts.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::distributions::{DistributionError, ServiceDistribution};

/// Horizon in mean service times when none is given.
pub const DEFAULT_HORIZON_SERVICES: f64 = 2e4;
/// Warmup as a fraction of the horizon when none is given.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.2;
/// Equal-width bins over `[warmup, horizon]` for the backlog record.
pub const BACKLOG_BINS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unstable load rho = {rho}; need lambda * E[X] < 1")]
    Unstable { rho: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiceMode {
    WithReplacement,
    /// `d` distinct queues; the default.
    #[default]
    WithoutReplacement,
}

impl FromStr for ChoiceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "with-replacement" => Ok(Self::WithReplacement),
            "without-replacement" => Ok(Self::WithoutReplacement),
            other => Err(format!("choice mode must be with-replacement or without-replacement, got '{other}'")),
        }
    }
}

impl fmt::Display for ChoiceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WithReplacement => "with-replacement",
            Self::WithoutReplacement => "without-replacement",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    /// Per-queue arrival rate.
    pub lambda: f64,
    pub d: usize,
    #[serde(serialize_with = "serialize_display")]
    pub dist: ServiceDistribution,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub choice_mode: ChoiceMode,
    pub replications: usize,
}

fn serialize_display<S: serde::Serializer>(v: &ServiceDistribution, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl SimConfig {
    /// One replication with the default horizon, warmup and choice mode.
    pub fn new(n: usize, lambda: f64, d: usize, dist: ServiceDistribution, seed: u64) -> Self {
        let horizon = DEFAULT_HORIZON_SERVICES * dist.mean();
        Self {
            n,
            lambda,
            d,
            dist,
            horizon,
            warmup: DEFAULT_WARMUP_FRACTION * horizon,
            seed,
            choice_mode: ChoiceMode::default(),
            replications: 1,
        }
    }

    /// Sets the horizon and rescales the warmup to the default fraction.
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self.warmup = DEFAULT_WARMUP_FRACTION * horizon;
        self
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_choice_mode(mut self, mode: ChoiceMode) -> Self {
        self.choice_mode = mode;
        self
    }

    pub fn rho(&self) -> f64 {
        self.lambda * self.dist.mean()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.choice_mode == ChoiceMode::WithoutReplacement && self.d > self.n {
            return bad(format!("d = {} exceeds n = {} without replacement", self.d, self.n));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return bad(format!("warmup {} must lie in [0, horizon)", self.warmup));
        }
        if self.replications == 0 {
            return bad("at least one replication is needed".into());
        }
        if !self.dist.is_samplable() {
            return Err(SimError::Unsupported(format!("{} service cannot be sampled", self.dist)));
        }
        let rho = self.rho();
        if rho >= 1.0 {
            return Err(SimError::Unstable { rho });
        }
        Ok(())
    }

    /// Seed of replication `index`.
    pub fn replication_seed(&self, index: usize) -> u64 {
        split_seed(self.seed, index as u64)
    }

    /// Whether sojourn confidence intervals may be unreliable (power law with `α ≤ 3`).
    pub fn heavy_tail_caveat(&self) -> bool {
        matches!(self.dist, ServiceDistribution::PowerLaw { exponent, .. } if exponent <= 3.0)
    }
}

/// SplitMix64 applied to `seed + (index + 1)·γ`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    /// Student-t 95% half-width across replications; infinite for one replication.
    pub ci_half_width: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self {
                estimate: mean,
                ci_half_width: f64::INFINITY,
            };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Self {
            estimate: mean,
            ci_half_width: t * (var / n as f64).sqrt(),
        }
    }

    /// `|estimate − target| ≤ widths · ci_half_width`.
    pub fn covers(&self, target: f64, widths: f64) -> bool {
        (self.estimate - target).abs() <= widths * self.ci_half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub k: usize,
    #[serde(flatten)]
    pub value: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub seed: u64,
    /// Time-averaged fraction of queues with at least `k` customers, from `k = 0`.
    pub tails: Vec<f64>,
    pub sojourn_mean: f64,
    pub sojourn_count: u64,
    /// Time-averaged customers per queue.
    pub mean_queue_length: f64,
    /// Observed arrivals per queue per unit time in the window.
    pub arrival_rate: f64,
    /// `L / (λ_obs W)`.
    pub littles_ratio: f64,
    /// Time-averaged total customers in equal bins over `[warmup, horizon]`.
    pub backlog: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub tails: Vec<TailEstimate>,
    pub sojourn_mean: Estimate,
    pub mean_queue_length: Estimate,
    pub littles_check: Estimate,
    pub replication_seeds: Vec<u64>,
    pub heavy_tail_caveat: bool,
    pub replications: Vec<ReplicationSummary>,
}

impl SimResult {
    pub fn tail(&self, k: usize) -> f64 {
        self.tails.get(k).map_or(0.0, |t| t.value.estimate)
    }

    pub fn tail_estimates(&self) -> Vec<f64> {
        self.tails.iter().map(|t| t.value.estimate).collect()
    }
}

pub fn run(config: &SimConfig) -> Result<SimResult, SimError> {
    config.validate()?;
    let reps: Vec<ReplicationSummary> = (0..config.replications)
        .into_par_iter()
        .map(|i| run_replication(config, config.replication_seed(i)))
        .collect::<Result<_, _>>()?;

    let levels = reps.iter().map(|r| r.tails.len()).max().unwrap_or(1);
    let tails = (0..levels)
        .map(|k| {
            let xs: Vec<f64> = reps.iter().map(|r| r.tails.get(k).copied().unwrap_or(0.0)).collect();
            TailEstimate {
                k,
                value: Estimate::from_samples(&xs),
            }
        })
        .collect();
    let collect = |f: fn(&ReplicationSummary) -> f64| Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>());
    Ok(SimResult {
        config: config.clone(),
        tails,
        sojourn_mean: collect(|r| r.sojourn_mean),
        mean_queue_length: collect(|r| r.mean_queue_length),
        littles_check: collect(|r| r.littles_ratio),
        replication_seeds: reps.iter().map(|r| r.seed).collect(),
        heavy_tail_caveat: config.heavy_tail_caveat(),
        replications: reps,
    })
}

fn run_replication(config: &SimConfig, seed: u64) -> Result<ReplicationSummary, SimError> {
    let mut engine = Engine::new(config, seed, &InitialTails::Empty)?;
    engine.run_until(config.horizon)?;
    engine.drain()?;

    let window = config.horizon - config.warmup;
    let n = config.n as f64;
    let tails: Vec<f64> = std::iter::once(1.0)
        .chain(engine.census.area[1..].iter().map(|a| a / (n * window)))
        .collect();
    let mean_queue_length = engine.census.total_area / (n * window);
    let arrival_rate = engine.window_arrivals as f64 / (n * window);
    let sojourn_mean = engine.sojourn_sum / engine.sojourn_count as f64;
    Ok(ReplicationSummary {
        seed,
        tails,
        sojourn_mean,
        sojourn_count: engine.sojourn_count,
        mean_queue_length,
        arrival_rate,
        littles_ratio: mean_queue_length / (arrival_rate * sojourn_mean),
        backlog: engine.census.backlog.iter().map(|b| b / (window / BACKLOG_BINS as f64)).collect(),
    })
}

/// Starting configuration for trajectory runs.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialTails {
    Empty,
    /// Target fractions `(u_0, u_1, …)`; `round(n·u_k)` queues start with at least `k` customers.
    Given(Vec<f64>),
}

/// Tail fractions `(u_0, …, u_K)` at each of `times` from one replication.
/// Customers present at time 0 start fresh services.
pub fn run_trajectory(
    config: &SimConfig,
    replication: usize,
    initial: &InitialTails,
    times: &[f64],
    k_max: usize,
) -> Result<Vec<Vec<f64>>, SimError> {
    config.validate()?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(SimError::InvalidConfig("sample times must be non-negative and sorted".into()));
    }
    let mut engine = Engine::new(config, config.replication_seed(replication), initial)?;
    let n = config.n as f64;
    let snapshot = |census: &Census| -> Vec<f64> {
        (0..=k_max)
            .map(|k| if k == 0 { 1.0 } else { census.count.get(k).map_or(0.0, |c| *c as f64 / n) })
            .collect()
    };
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        engine.run_until(t)?;
        out.push(snapshot(&engine.census));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KurtzPoint {
    pub n: usize,
    /// Mean over replications of `sup_t max_k |u_k^{(n)}(t) − u_k(t)|`.
    pub error: f64,
    pub replications: usize,
}

/// Gap between finite-`n` trajectories and a mean-field oracle sampled at `times`
/// (`oracle[i]` holds the level masses at `times[i]`). Every size reuses the
/// base seed, so replication `i` has the same seed for all `n`.
pub fn kurtz_experiment(
    base: &SimConfig,
    sizes: &[usize],
    initial: &InitialTails,
    times: &[f64],
    oracle: &[Vec<f64>],
) -> Result<Vec<KurtzPoint>, SimError> {
    if times.len() != oracle.len() || times.is_empty() {
        return Err(SimError::InvalidConfig("oracle must hold one state per sample time".into()));
    }
    let k_max = oracle.iter().map(|s| s.len()).min().unwrap_or(1) - 1;
    let horizon = times[times.len() - 1].max(f64::MIN_POSITIVE);
    sizes
        .iter()
        .map(|&n| {
            let mut config = base.clone();
            config.n = n;
            config.horizon = horizon;
            config.warmup = 0.0;
            let errors: Vec<f64> = (0..config.replications)
                .into_par_iter()
                .map(|i| {
                    let path = run_trajectory(&config, i, initial, times, k_max)?;
                    Ok(path
                        .iter()
                        .zip(oracle)
                        .flat_map(|(emp, ode)| emp.iter().zip(ode).map(|(a, b)| (a - b).abs()))
                        .fold(0.0, f64::max))
                })
                .collect::<Result<_, SimError>>()?;
            Ok(KurtzPoint {
                n,
                error: errors.iter().sum::<f64>() / errors.len() as f64,
                replications: errors.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDistance {
    pub name: String,
    /// `max_k |tails[k] − candidate[k]|` over the shared levels `k ≥ 1`.
    pub distance: f64,
    pub levels: usize,
}

/// Candidates ranked by distance to the simulated tails, closest first.
pub fn compare_fixed_points(result: &SimResult, candidates: &[(String, Vec<f64>)]) -> Vec<CandidateDistance> {
    let sim = result.tail_estimates();
    let mut out: Vec<CandidateDistance> = candidates
        .iter()
        .map(|(name, cand)| {
            let levels = cand.len().max(sim.len());
            let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
            let distance = (1..levels).map(|k| (at(&sim, k) - at(cand, k)).abs()).fold(0.0, f64::max);
            CandidateDistance {
                name: name.clone(),
                distance,
                levels: levels.saturating_sub(1),
            }
        })
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Departure {
    time: f64,
    seq: u64,
    queue: usize,
}

impl Eq for Departure {}

impl Ord for Departure {
    // Reversed so that `BinaryHeap` pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Incrementally maintained counts of queues with at least `k` customers,
/// with their time integrals over the measurement window.
struct Census {
    warmup: f64,
    horizon: f64,
    /// `count[k]` queues hold at least `k` customers; index 0 is unused.
    count: Vec<u32>,
    last: Vec<f64>,
    area: Vec<f64>,
    total: u64,
    total_last: f64,
    total_area: f64,
    backlog: Vec<f64>,
}

impl Census {
    fn new(warmup: f64, horizon: f64) -> Self {
        Self {
            warmup,
            horizon,
            count: vec![0],
            last: vec![0.0],
            area: vec![0.0],
            total: 0,
            total_last: 0.0,
            total_area: 0.0,
            backlog: vec![0.0; BACKLOG_BINS],
        }
    }

    fn overlap(&self, from: f64, to: f64) -> f64 {
        (to.min(self.horizon) - from.max(self.warmup)).max(0.0)
    }

    fn shift(&mut self, k: usize, now: f64, up: bool) {
        if k == self.count.len() {
            self.count.push(0);
            self.last.push(now);
            self.area.push(0.0);
        }
        self.area[k] += self.count[k] as f64 * self.overlap(self.last[k], now);
        self.last[k] = now;
        if up {
            self.count[k] += 1;
        } else {
            self.count[k] -= 1;
        }
        self.advance_total(now);
        if up {
            self.total += 1;
        } else {
            self.total -= 1;
        }
    }

    fn advance_total(&mut self, now: f64) {
        let from = self.total_last.max(self.warmup);
        let to = now.min(self.horizon);
        if to > from && self.total > 0 {
            let width = (self.horizon - self.warmup) / BACKLOG_BINS as f64;
            let n = self.total as f64;
            self.total_area += n * (to - from);
            let mut t = from;
            while t < to {
                let bin = (((t - self.warmup) / width) as usize).min(BACKLOG_BINS - 1);
                let end = (self.warmup + (bin + 1) as f64 * width).min(to);
                let end = if bin == BACKLOG_BINS - 1 { to } else { end };
                self.backlog[bin] += n * (end - t);
                t = end;
            }
        }
        self.total_last = now;
    }

    fn close(&mut self, now: f64) {
        for k in 1..self.count.len() {
            self.area[k] += self.count[k] as f64 * self.overlap(self.last[k], now);
            self.last[k] = now;
        }
        self.advance_total(now);
    }
}

struct Engine<'a> {
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    queues: Vec<VecDeque<f64>>,
    departures: BinaryHeap<Departure>,
    seq: u64,
    now: f64,
    next_arrival: f64,
    arrival_rate: f64,
    census: Census,
    choices: Vec<usize>,
    window_arrivals: u64,
    sojourn_sum: f64,
    sojourn_count: u64,
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig, seed: u64, initial: &InitialTails) -> Result<Self, SimError> {
        let arrival_rate = config.n as f64 * config.lambda;
        let mut engine = Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queues: vec![VecDeque::new(); config.n],
            departures: BinaryHeap::with_capacity(config.n),
            seq: 0,
            now: 0.0,
            next_arrival: 0.0,
            arrival_rate,
            census: Census::new(config.warmup, config.horizon),
            choices: Vec::with_capacity(config.d),
            window_arrivals: 0,
            sojourn_sum: 0.0,
            sojourn_count: 0,
        };
        if let InitialTails::Given(u) = initial {
            engine.populate(u)?;
        }
        engine.next_arrival = engine.exp_draw(arrival_rate);
        Ok(engine)
    }

    fn populate(&mut self, u: &[f64]) -> Result<(), SimError> {
        let n = self.config.n;
        let mut prev = n;
        for (k, &frac) in u.iter().enumerate().skip(1) {
            if !(0.0..=1.0).contains(&frac) {
                return Err(SimError::InvalidConfig(format!("initial u_{k} = {frac} is outside [0, 1]")));
            }
            let target = ((frac * n as f64).round() as usize).min(prev);
            for q in 0..target {
                self.queues[q].push_back(0.0);
                self.census.shift(k, 0.0, true);
                if k == 1 {
                    self.start_service(q)?;
                }
            }
            prev = target;
        }
        Ok(())
    }

    fn uniform(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    fn exp_draw(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    fn start_service(&mut self, queue: usize) -> Result<(), SimError> {
        let rng = &mut self.rng;
        let service = self.config.dist.sample(&mut || 1.0 - rng.random::<f64>())?;
        self.seq += 1;
        self.departures.push(Departure {
            time: self.now + service,
            seq: self.seq,
            queue,
        });
        Ok(())
    }

    fn choose_queue(&mut self) -> usize {
        let n = self.config.n;
        let d = self.config.d;
        self.choices.clear();
        match self.config.choice_mode {
            ChoiceMode::WithReplacement => {
                for _ in 0..d {
                    let q = self.rng.random_range(0..n);
                    self.choices.push(q);
                }
            }
            ChoiceMode::WithoutReplacement => {
                // Floyd's algorithm: d distinct indices with d draws.
                for j in n - d..n {
                    let t = self.rng.random_range(0..=j);
                    let pick = if self.choices.contains(&t) { j } else { t };
                    self.choices.push(pick);
                }
            }
        }
        let mut best = self.choices[0];
        let mut best_len = self.queues[best].len();
        let mut ties = 1u32;
        for i in 1..self.choices.len() {
            let q = self.choices[i];
            let len = self.queues[q].len();
            if len < best_len {
                best = q;
                best_len = len;
                ties = 1;
            } else if len == best_len {
                ties += 1;
                if self.rng.random_range(0..ties) == 0 {
                    best = q;
                }
            }
        }
        best
    }

    fn arrive(&mut self) -> Result<(), SimError> {
        let q = self.choose_queue();
        let now = self.now;
        if now >= self.config.warmup && now <= self.config.horizon {
            self.window_arrivals += 1;
        }
        self.queues[q].push_back(now);
        let len = self.queues[q].len();
        self.census.shift(len, now, true);
        if len == 1 {
            self.start_service(q)?;
        }
        Ok(())
    }

    fn depart(&mut self, q: usize) -> Result<(), SimError> {
        let now = self.now;
        let len = self.queues[q].len();
        let arrived = self.queues[q].pop_front().expect("departure from a busy queue");
        self.census.shift(len, now, false);
        if arrived >= self.config.warmup && arrived <= self.config.horizon {
            self.sojourn_sum += now - arrived;
            self.sojourn_count += 1;
        }
        if !self.queues[q].is_empty() {
            self.start_service(q)?;
        }
        Ok(())
    }

    /// Processes every event up to `until`.
    fn run_until(&mut self, until: f64) -> Result<(), SimError> {
        loop {
            let next_departure = self.departures.peek().map_or(f64::INFINITY, |e| e.time);
            let t = next_departure.min(self.next_arrival);
            if t > until {
                break;
            }
            self.now = t;
            if next_departure <= self.next_arrival {
                let ev = self.departures.pop().expect("peeked");
                self.depart(ev.queue)?;
            } else {
                self.arrive()?;
                self.next_arrival = self.now + self.exp_draw(self.arrival_rate);
            }
        }
        self.now = until;
        Ok(())
    }

    /// Closes the window at the horizon, then serves everyone still present.
    /// Later arrivals cannot affect an FCFS customer's sojourn, so none are generated.
    fn drain(&mut self) -> Result<(), SimError> {
        self.census.close(self.config.horizon);
        while let Some(ev) = self.departures.pop() {
            self.now = ev.time;
            self.depart(ev.queue)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(mu: f64) -> ServiceDistribution {
        ServiceDistribution::exponential(mu).unwrap()
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(matches!(SimConfig::new(10, 1.0, 2, exp(1.0), 1).validate(), Err(SimError::Unstable { .. })));
        let a = ServiceDistribution::almost_exponential(2.0).unwrap();
        assert!(matches!(SimConfig::new(10, 0.5, 2, a, 1).validate(), Err(SimError::Unsupported(_))));
        assert!(matches!(SimConfig::new(2, 0.5, 3, exp(1.0), 1).validate(), Err(SimError::InvalidConfig(_))));
        let ok = SimConfig::new(2, 0.5, 3, exp(1.0), 1).with_choice_mode(ChoiceMode::WithReplacement);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn split_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| split_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn deterministic_given_seed() {
        let config = SimConfig::new(50, 0.8, 2, exp(1.0), 42).with_horizon(500.0).with_replications(3);
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a, b);
        let c = run(&SimConfig { seed: 43, ..config }).unwrap();
        assert_ne!(a.tails, c.tails);
    }

    #[test]
    fn tails_are_ordered() {
        let config = SimConfig::new(100, 0.9, 2, exp(1.0), 5).with_horizon(2000.0).with_replications(2);
        let r = run(&config).unwrap();
        assert_eq!(r.tail(0), 1.0);
        assert!(r.tails.windows(2).all(|w| w[1].value.estimate <= w[0].value.estimate));
    }

    #[test]
    fn independent_queues_match_mm1() {
        let config = SimConfig::new(100, 0.5, 1, exp(1.0), 9).with_horizon(4000.0).with_replications(4);
        let r = run(&config).unwrap();
        assert!((r.sojourn_mean.estimate - 2.0).abs() < 0.1, "{:?}", r.sojourn_mean);
        for k in 1..=4 {
            assert!((r.tail(k) - 0.5f64.powi(k as i32)).abs() < 0.02);
        }
        assert!(r.littles_check.covers(1.0, 3.0), "{:?}", r.littles_check);
    }

    #[test]
    fn choice_modes_agree_for_large_n() {
        let base = SimConfig::new(500, 0.8, 2, exp(1.0), 3).with_horizon(1000.0).with_replications(4);
        let a = run(&base).unwrap();
        let b = run(&base.clone().with_choice_mode(ChoiceMode::WithReplacement)).unwrap();
        for k in 1..=3 {
            let (x, y) = (&a.tails[k].value, &b.tails[k].value);
            let slack = 3.0 * (x.ci_half_width.powi(2) + y.ci_half_width.powi(2)).sqrt() + 2e-3;
            assert!((x.estimate - y.estimate).abs() <= slack, "k={k}: {x:?} vs {y:?}");
        }
    }

    #[test]
    fn backlog_does_not_trend_upward() {
        let config = SimConfig::new(200, 0.9, 2, exp(1.0), 17).with_horizon(4000.0);
        let r = run(&config).unwrap();
        let b = &r.replications[0].backlog;
        let half = &b[b.len() / 2..];
        let n = half.len() as f64;
        let mx = (n - 1.0) / 2.0;
        let my = half.iter().sum::<f64>() / n;
        let slope = half.iter().enumerate().map(|(i, y)| (i as f64 - mx) * (y - my)).sum::<f64>()
            / half.iter().enumerate().map(|(i, _)| (i as f64 - mx).powi(2)).sum::<f64>();
        // Drift over the half window stays within 10% of the mean backlog.
        assert!(slope * n < 0.1 * my, "slope {slope}, mean {my}");
    }

    #[test]
    fn trajectory_from_empty_and_given_state() {
        let config = SimConfig::new(400, 1.0, 2, exp(2.0), 1);
        let times = [0.0, 1.0, 5.0];
        let path = run_trajectory(&config, 0, &InitialTails::Empty, &times, 3).unwrap();
        assert_eq!(path[0], vec![1.0, 0.0, 0.0, 0.0]);
        assert!(path[2][1] > 0.3);
        let given = InitialTails::Given(vec![1.0, 0.5, 0.125]);
        let path = run_trajectory(&config, 0, &given, &[0.0], 2).unwrap();
        assert_eq!(path[0], vec![1.0, 0.5, 0.125]);
    }

    #[test]
    fn kurtz_single_queue_error_is_bounded() {
        let base = SimConfig::new(1, 1.0, 1, exp(2.0), 4);
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let oracle = vec![vec![1.0, 0.5, 0.25]; times.len()];
        let pts = kurtz_experiment(&base, &[1], &InitialTails::Empty, &times, &oracle).unwrap();
        assert!(pts[0].error <= 1.0);
    }

    #[test]
    fn candidate_ranking() {
        let config = SimConfig::new(50, 0.5, 2, exp(1.0), 2).with_horizon(200.0);
        let r = run(&config).unwrap();
        let own = r.tail_estimates();
        let ranked = compare_fixed_points(&r, &[("far".into(), vec![1.0, 0.9, 0.9]), ("own".into(), own)]);
        assert_eq!(ranked[0].name, "own");
        assert_eq!(ranked[0].distance, 0.0);
        assert!(ranked[1].distance > 0.0);
    }
}
