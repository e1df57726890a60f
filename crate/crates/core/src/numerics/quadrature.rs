//! Adaptive Gauss–Kronrod quadrature on finite and semi-infinite intervals.
//!
//! Finite pieces are refined by global adaptive bisection with a 21-point
//! Kronrod panel (error estimated against the embedded 10-point Gauss rule).
//! A semi-infinite tail `[U, ∞)` is covered by geometrically widening panels;
//! extension stops once the ratio-extrapolated remainder of an eventually
//! decreasing integrand falls below tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} > tolerance {tolerance:e}")]
    NonConvergence {
        value: f64,
        error: f64,
        tolerance: f64,
    },
    #[error("empty or reversed domain [{lower}, {upper}]")]
    DomainError { lower: f64, upper: f64 },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

/// How `[U, ∞)` is covered: panels `[U, U + w]`, `[U + w, U + w + g·w]`, ...
#[derive(Debug, Clone, PartialEq)]
pub struct TailPolicy {
    pub initial_width: f64,
    pub growth: f64,
    pub max_panels: usize,
}

impl Default for TailPolicy {
    fn default() -> Self {
        Self {
            initial_width: 1.0,
            growth: 2.0,
            max_panels: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Points where the integrand is singular or kinked; never evaluated.
    pub split_points: Vec<f64>,
    pub tail: TailPolicy,
    /// Bisection budget per finite piece or tail panel.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-10,
            absolute_tolerance: 1e-14,
            split_points: Vec::new(),
            tail: TailPolicy::default(),
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_split_points(mut self, points: impl Into<Vec<f64>>) -> Self {
        self.split_points = points.into();
        self
    }

    pub fn with_relative_tolerance(mut self, tol: f64) -> Self {
        self.relative_tolerance = tol;
        self
    }

    pub fn with_tail_width(mut self, width: f64) -> Self {
        self.tail.initial_width = width;
        self
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.relative_tolerance > 0.0) || !(self.absolute_tolerance > 0.0) {
            return Err(QuadratureError::InvalidSpec(
                "tolerances must be strictly positive".into(),
            ));
        }
        if self.split_points.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(QuadratureError::InvalidSpec(
                "split points must be finite and non-negative".into(),
            ));
        }
        if self.split_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QuadratureError::InvalidSpec(
                "split points must be strictly increasing".into(),
            ));
        }
        if !(self.tail.initial_width > 0.0) || !(self.tail.growth >= 1.0) {
            return Err(QuadratureError::InvalidSpec(
                "tail panels need positive width and growth >= 1".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(QuadratureError::InvalidSpec(
                "subdivision budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Integral value together with its accumulated error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Integrates `f` over `[lower, upper]`; `upper` may be `f64::INFINITY`.
pub fn integrate<F>(f: F, lower: f64, upper: f64, spec: &QuadratureSpec) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    integrate_estimate(f, lower, upper, spec).map(|e| e.value)
}

pub fn integrate_estimate<F>(
    f: F,
    lower: f64,
    upper: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureEstimate, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if !lower.is_finite() || upper.is_nan() || lower >= upper {
        return Err(QuadratureError::DomainError { lower, upper });
    }

    let mut breaks = vec![lower];
    breaks.extend(
        spec.split_points
            .iter()
            .copied()
            .filter(|&p| p > lower && p < upper),
    );
    if upper.is_finite() {
        breaks.push(upper);
    }

    let mut total = QuadratureEstimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    // Each piece is refined to its own tolerance; the sum of those is the
    // budget the combined estimate is held to.
    let mut allowance = 0.0;
    for w in breaks.windows(2) {
        let piece = adaptive(&f, w[0], w[1], spec)?;
        allowance += tolerance(spec, piece.value);
        accumulate(&mut total, piece);
    }

    if upper.is_infinite() {
        let start = *breaks.last().expect("at least the lower bound");
        let (tail, tail_allowance) = semi_infinite(&f, start, spec)?;
        allowance += tail_allowance;
        accumulate(&mut total, tail);
    }

    if total.error > allowance.max(tolerance(spec, total.value)) {
        return Err(QuadratureError::NonConvergence {
            value: total.value,
            error: total.error,
            tolerance: allowance,
        });
    }
    Ok(total)
}

fn accumulate(total: &mut QuadratureEstimate, piece: QuadratureEstimate) {
    total.value += piece.value;
    total.error += piece.error;
    total.evaluations += piece.evaluations;
}

fn tolerance(spec: &QuadratureSpec, value: f64) -> f64 {
    (spec.relative_tolerance * value.abs()).max(spec.absolute_tolerance)
}

fn semi_infinite<F>(
    f: &F,
    start: f64,
    spec: &QuadratureSpec,
) -> Result<(QuadratureEstimate, f64), QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let policy = &spec.tail;
    let mut allowance = 0.0;
    let mut total = QuadratureEstimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let mut a = start;
    let mut width = policy.initial_width.max(start.abs() * 1e-12);
    let mut previous: Option<f64> = None;

    for _ in 0..policy.max_panels {
        let b = a + width;
        if !b.is_finite() {
            break;
        }
        let panel = adaptive(f, a, b, spec)?;
        allowance += tolerance(spec, panel.value);
        accumulate(&mut total, panel);

        let current = panel.value.abs();
        let tol = tolerance(spec, total.value);
        if let Some(prev) = previous {
            if current == 0.0 && prev == 0.0 {
                return Ok((total, allowance));
            }
            if prev > 0.0 && current < prev {
                let ratio = current / prev;
                let remainder = current * ratio / (1.0 - ratio);
                if remainder < 0.5 * tol && current < tol {
                    total.error += remainder;
                    return Ok((total, allowance + 0.5 * tol));
                }
            }
        }
        previous = Some(current);
        a = b;
        width *= policy.growth;
    }

    Err(QuadratureError::NonConvergence {
        value: total.value,
        error: f64::INFINITY,
        tolerance: tolerance(spec, total.value),
    })
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn adaptive<F>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureEstimate, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let mut evaluations = 0;
    let first = kronrod21(f, a, b, &mut evaluations)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    let mut splits = 0;
    while error > tolerance(spec, value) {
        if splits >= spec.max_subdivisions {
            return Err(QuadratureError::NonConvergence {
                value,
                error,
                tolerance: tolerance(spec, value),
            });
        }
        let worst = heap.pop().expect("heap holds every live segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; accept it as is.
            heap.push(Segment {
                error: 0.0,
                ..worst
            });
            error -= worst.error;
            continue;
        }
        let left = kronrod21(f, worst.a, mid, &mut evaluations)?;
        let right = kronrod21(f, mid, worst.b, &mut evaluations)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        splits += 1;

        // Re-sum occasionally so running totals do not drift.
        if splits % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(QuadratureEstimate {
        value,
        error,
        evaluations,
    })
}

#[allow(clippy::excessive_precision)]
const KRONROD_NODES: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const GAUSS_WEIGHTS: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const KRONROD_WEIGHTS: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

fn kronrod21<F>(f: &F, a: f64, b: f64, evaluations: &mut usize) -> Result<Segment, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, QuadratureError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite { x })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * KRONROD_WEIGHTS[10];
    let mut gauss = 0.0;
    for (j, &node) in KRONROD_NODES[..10].iter().enumerate() {
        let dx = half * node;
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod += KRONROD_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * pair;
        }
    }
    *evaluations += 21;

    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok(Segment { a, b, value, error })
}
