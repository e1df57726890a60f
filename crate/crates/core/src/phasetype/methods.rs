use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use super::{hadamard_power, PhRepresentation, PhaseTypeError};
use crate::fixedpoint::{log_level, scalar_system_residual, MAX_LEVEL};
use crate::numerics::linalg::{self, max_abs, row_times};
use crate::numerics::quadrature::{integrate, QuadratureSpec};

/// Level mass below which the default truncation stops.
const DEFAULT_LEVEL_EPS: f64 = 1e-15;

/// Which closed-form family a PH fixed point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// `θ = ∫(μḠ)^d`, levels in density form `u_k·μḠ(x)`.
    Density,
    /// `θ = ω^{⊙d}e` with `ω` stationary for `T + T⁰α`.
    Stationary,
    /// `θ = 1/(α^{⊙1/d}e)`.
    InitialVector,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Density, Method::Stationary, Method::InitialVector];

    pub fn number(self) -> u8 {
        match self {
            Method::Density => 1,
            Method::Stationary => 2,
            Method::InitialVector => 3,
        }
    }
}

impl TryFrom<u8> for Method {
    type Error = PhaseTypeError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Method::Density),
            2 => Ok(Method::Stationary),
            3 => Ok(Method::InitialVector),
            _ => Err(PhaseTypeError::InvalidArgument(format!("method must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl FromStr for Method {
    type Err = PhaseTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| PhaseTypeError::InvalidArgument(format!("method must be 1, 2 or 3, got '{s}'")))?
            .try_into()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

/// Levels `π_1..π_K` (row vectors over phases) of one fixed-point family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhFixedPoint {
    pub method: Method,
    pub theta: f64,
    pub lambda: f64,
    pub d: u32,
    pub rho: f64,
    pub pi0: f64,
    pub levels: Vec<Vec<f64>>,
    /// `π_k e` for each level.
    pub masses: Vec<f64>,
}

impl PhFixedPoint {
    pub fn k_max(&self) -> usize {
        self.levels.len()
    }

    /// `π_k` for `k ≥ 1`; zero beyond the truncation level.
    pub fn level(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1, "levels start at 1");
        self.levels
            .get(k - 1)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.levels.first().map_or(0, Vec::len)])
    }
}

pub fn theta_ph(rep: &PhRepresentation, d: u32, method: Method) -> Result<f64, PhaseTypeError> {
    if d == 0 {
        return Err(PhaseTypeError::InvalidArgument("d must be at least 1".into()));
    }
    let df = d as f64;
    match method {
        Method::Density => {
            let mu = rep.rate();
            let spec = QuadratureSpec::default().with_tail_width(rep.mean());
            Ok(integrate(|x| (mu * rep.survival(x)).powi(d as i32), 0.0, f64::INFINITY, &spec)?)
        }
        Method::Stationary => Ok(hadamard_power(rep.omega(), df).iter().sum()),
        Method::InitialVector => Ok(1.0 / hadamard_power(rep.alpha(), 1.0 / df).iter().sum::<f64>()),
    }
}

/// Levels `1..=K` of the chosen family; `k_max = None` truncates at the first
/// level with mass below `1e-15` (at most 64 levels).
pub fn fixed_point_ph(
    rep: &PhRepresentation,
    lambda: f64,
    d: u32,
    method: Method,
    k_max: Option<usize>,
) -> Result<PhFixedPoint, PhaseTypeError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(PhaseTypeError::InvalidArgument(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let rho = lambda / rep.rate();
    if rho >= 1.0 {
        return Err(PhaseTypeError::Unstable { rho });
    }
    if k_max == Some(0) {
        return Err(PhaseTypeError::InvalidArgument("K must be at least 1".into()));
    }
    let theta = theta_ph(rep, d, method)?;
    let df = d as f64;

    // Per-phase shape and the log-mass of level k.
    let (shape, log_mass): (Vec<f64>, Box<dyn Fn(usize) -> f64>) = match method {
        Method::Density | Method::Stationary => {
            let ratio = theta * rho.powi(d as i32);
            if ratio >= 1.0 {
                return Err(PhaseTypeError::NonMonotone { method: method.number(), ratio });
            }
            (rep.omega().to_vec(), Box::new(move |k| log_level(theta, rho, d, k)))
        }
        Method::InitialVector => {
            let ratio = theta * rho;
            if ratio >= 1.0 {
                return Err(PhaseTypeError::NonMonotone { method: 3, ratio });
            }
            let shape = hadamard_power(rep.alpha(), 1.0 / df);
            // (θρ)^{B(k)} = θ^{B(k)}ρ^{B(k)}; log_level(1, θρ, ..) gives exactly that.
            (shape, Box::new(move |k| log_level(1.0, theta * rho, d, k)))
        }
    };
    let shape_mass: f64 = shape.iter().sum();

    let mut levels = Vec::new();
    let mut masses = Vec::new();
    for k in 1..=k_max.unwrap_or(MAX_LEVEL) {
        let scale = log_mass(k).exp();
        let level: Vec<f64> = shape.iter().map(|s| scale * s).collect();
        let mass = scale * shape_mass;
        levels.push(level);
        masses.push(mass);
        if k_max.is_none() && mass < DEFAULT_LEVEL_EPS {
            break;
        }
    }

    Ok(PhFixedPoint {
        method,
        theta,
        lambda,
        d,
        rho,
        pi0: 1.0,
        levels,
        masses,
    })
}

/// `(R, V)` with `R = λ(−I + eα)(−T)⁻¹` and `V = λ(−T)⁻¹`.
pub fn residual_matrices(rep: &PhRepresentation, lambda: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = rep.order();
    let neg_inv = linalg::inverse(&(-rep.t())).expect("T is invertible for a valid representation");
    let v = &neg_inv * lambda;
    let alpha = rep.alpha();
    let restart = DMatrix::from_fn(m, m, |i, j| if i == j { alpha[j] - 1.0 } else { alpha[j] });
    let r = restart * &v;
    (r, v)
}

/// Residuals of the stationary level equations, evaluated at levels `0..K−1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub method: Method,
    /// `"vector"` for the per-phase equations, `"scalar"` for the
    /// x-integrated system used by the density-form family.
    pub system: &'static str,
    /// Max-abs residual of each level equation, entrywise.
    pub per_level: Vec<f64>,
    /// Residual of each level equation after summing over phases.
    pub per_level_projected: Vec<f64>,
    pub max: f64,
    pub max_projected: f64,
}

/// Substitutes a fixed point into its native stationary system.
///
/// Level 0 is the balance `−λ + π_1 T⁰`; level 1 carries the `λα` inflow;
/// levels `k ≥ 2` the generic form `λπ_{k−1}^{⊙d} − λπ_k^{⊙d} + π_k T + π_{k+1} T⁰α`.
pub fn stationary_residuals(rep: &PhRepresentation, fp: &PhFixedPoint) -> ResidualReport {
    let k_max = fp.k_max();
    let (per_level, per_level_projected, system) = match fp.method {
        Method::Density => {
            let mut u = vec![1.0];
            u.extend(&fp.masses);
            let res = scalar_system_residual(fp.lambda, rep.rate(), fp.theta, fp.d, &u);
            let abs: Vec<f64> = res.iter().map(|r| r.abs()).collect();
            (abs.clone(), abs, "scalar")
        }
        Method::Stationary | Method::InitialVector => {
            let mut vector = Vec::with_capacity(k_max);
            let mut projected = Vec::with_capacity(k_max);
            for k in 0..k_max {
                let r = vector_equation(rep, fp, k);
                vector.push(max_abs(&r));
                projected.push(r.iter().sum::<f64>().abs());
            }
            (vector, projected, "vector")
        }
    };
    let max = per_level.iter().copied().fold(0.0, f64::max);
    let max_projected = per_level_projected.iter().copied().fold(0.0, f64::max);
    ResidualReport {
        method: fp.method,
        system,
        per_level,
        per_level_projected,
        max,
        max_projected,
    }
}

fn vector_equation(rep: &PhRepresentation, fp: &PhFixedPoint, k: usize) -> Vec<f64> {
    let lambda = fp.lambda;
    let d = fp.d as f64;
    let exit = rep.exit_vector();
    if k == 0 {
        let flow: f64 = fp.level(1).iter().zip(exit).map(|(a, b)| a * b).sum();
        return vec![flow - lambda];
    }
    let pk = fp.level(k);
    let next = fp.level(k + 1);
    let inflow: Vec<f64> = if k == 1 {
        rep.alpha().iter().map(|a| lambda * a).collect()
    } else {
        hadamard_power(&fp.level(k - 1), d).iter().map(|v| lambda * v).collect()
    };
    let outflow = hadamard_power(&pk, d);
    let within = row_times(&pk, rep.t());
    let restart: f64 = next.iter().zip(exit).map(|(a, b)| a * b).sum();
    (0..rep.order())
        .map(|j| inflow[j] - lambda * outflow[j] + within[j] + restart * rep.alpha()[j])
        .collect()
}

/// How closely levels follow `π_1 = λα(−T)⁻¹`, `π_k = π_{k−1}^{⊙d} V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionCheck {
    /// Entrywise max-abs defect over levels `1..K`.
    pub vector_max: f64,
    /// Defect after summing over phases.
    pub projected_max: f64,
}

pub fn method3_recursion_check(rep: &PhRepresentation, fp: &PhFixedPoint) -> RecursionCheck {
    let (_, v) = residual_matrices(rep, fp.lambda);
    let d = fp.d as f64;
    let mut vector_max = 0.0f64;
    let mut projected_max = 0.0f64;
    for k in 1..=fp.k_max() {
        let predicted = if k == 1 {
            row_times(rep.alpha(), &v)
        } else {
            row_times(&hadamard_power(&fp.level(k - 1), d), &v)
        };
        let actual = fp.level(k);
        let defect: Vec<f64> = actual.iter().zip(&predicted).map(|(a, p)| a - p).collect();
        vector_max = vector_max.max(max_abs(&defect));
        projected_max = projected_max.max(defect.iter().sum::<f64>().abs());
    }
    RecursionCheck {
        vector_max,
        projected_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn erlang(m: usize) -> PhRepresentation {
        PhRepresentation::erlang(m, 1.0).unwrap()
    }

    #[test]
    fn method3_theta_is_one_for_erlang() {
        for m in [1, 2, 5] {
            for d in [1, 2, 3] {
                assert_eq!(theta_ph(&erlang(m), d, Method::InitialVector).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn method2_theta_is_power_of_m() {
        let t = theta_ph(&erlang(2), 2, Method::Stationary).unwrap();
        assert!((t - 0.5).abs() < 1e-15);
        let t = theta_ph(&erlang(5), 3, Method::Stationary).unwrap();
        assert!((t - 5f64.powi(-2)).abs() < 1e-15);
    }

    #[test]
    fn method1_single_phase_matches_exponential_theta() {
        for (mu, d) in [(1.0, 2u32), (2.0, 2), (0.7, 3)] {
            let rep = PhRepresentation::exponential(mu).unwrap();
            let t = theta_ph(&rep, d, Method::Density).unwrap();
            let exact = mu.powi(d as i32 - 1) / d as f64;
            assert!(((t - exact) / exact).abs() < 1e-9, "{t} vs {exact}");
        }
    }

    #[test]
    fn method3_levels_for_erlang() {
        let rep = erlang(3);
        let lambda = 0.2;
        let rho = lambda * 3.0;
        let fp = fixed_point_ph(&rep, lambda, 2, Method::InitialVector, Some(5)).unwrap();
        for k in 1..=5 {
            let expected = rho.powi(2i32.pow(k as u32) - 1);
            let level = fp.level(k);
            assert!((level[0] - expected).abs() <= 1e-13 * expected);
            assert_eq!(&level[1..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn method2_levels_for_erlang() {
        let m = 2usize;
        let rep = erlang(m);
        let lambda = 0.3;
        let rho = lambda * m as f64;
        let fp = fixed_point_ph(&rep, lambda, 2, Method::Stationary, Some(4)).unwrap();
        for k in 1..=4u32 {
            let expected = rho.powi(2i32.pow(k) - 1) * (m as f64).powf(-(2f64.powi(k as i32 - 1)));
            for v in fp.level(k as usize) {
                assert!(((v - expected) / expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_arrivals_give_empty_levels() {
        for method in Method::ALL {
            let fp = fixed_point_ph(&erlang(2), 0.0, 2, method, Some(3)).unwrap();
            assert!(fp.levels.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn default_truncation_stops_below_threshold() {
        let fp = fixed_point_ph(&erlang(2), 0.25, 2, Method::Stationary, None).unwrap();
        let last = *fp.masses.last().unwrap();
        assert!(last < 1e-15);
        assert!(fp.masses[fp.masses.len() - 2] >= 1e-15);
    }

    #[test]
    fn unstable_load_is_rejected() {
        let err = fixed_point_ph(&erlang(2), 0.5, 2, Method::Stationary, None).unwrap_err();
        assert!(matches!(err, PhaseTypeError::Unstable { .. }));
    }

    #[test]
    fn single_phase_residual_matrices() {
        let rep = PhRepresentation::exponential(2.0).unwrap();
        let (r, v) = residual_matrices(&rep, 0.5);
        assert_eq!(r[(0, 0)], 0.0);
        assert!((v[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn erlang_two_residual_matrices() {
        let eta = 1.5;
        let lambda = 0.4;
        let rep = PhRepresentation::erlang(2, eta).unwrap();
        let (r, v) = residual_matrices(&rep, lambda);
        let expected = lambda / eta;
        assert!((v[(0, 0)] - expected).abs() < 1e-15);
        assert!((v[(0, 1)] - expected).abs() < 1e-15);
        assert_eq!(v[(1, 0)], 0.0);
        assert!((v[(1, 1)] - expected).abs() < 1e-15);
        // α R = 0, so any multiple of α is annihilated.
        let ar = row_times(rep.alpha(), &r);
        assert!(max_abs(&ar) < 1e-15);
    }

    #[test]
    fn projected_residuals_vanish_for_methods_two_and_three() {
        for m in [2usize, 5] {
            for d in [2u32, 3] {
                let rep = erlang(m);
                let lambda = 0.5 / m as f64;
                for method in [Method::Stationary, Method::InitialVector] {
                    let fp = fixed_point_ph(&rep, lambda, d, method, Some(6)).unwrap();
                    let report = stationary_residuals(&rep, &fp);
                    assert_eq!(report.per_level.len(), 6);
                    if method == Method::Stationary {
                        assert!(report.max_projected < 1e-12, "{report:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_phase_families_solve_vector_system() {
        // For m = 1 the vector equations are scalar, so the classical tail
        // (θ = 1, shared by methods 2 and 3) must be exact.
        let rep = PhRepresentation::exponential(1.0).unwrap();
        for method in [Method::Stationary, Method::InitialVector] {
            let fp = fixed_point_ph(&rep, 0.7, 2, method, Some(8)).unwrap();
            let report = stationary_residuals(&rep, &fp);
            assert!(report.max < 1e-14, "{report:?}");
        }
    }

    #[test]
    fn density_family_solves_scalar_system() {
        let t = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 0.5, -1.0]);
        let rep = PhRepresentation::new(vec![0.6, 0.4], t).unwrap();
        let fp = fixed_point_ph(&rep, 0.8 * rep.rate(), 2, Method::Density, Some(8)).unwrap();
        let report = stationary_residuals(&rep, &fp);
        assert_eq!(report.system, "scalar");
        assert!(report.max < 1e-10, "{report:?}");
    }

    #[test]
    fn method3_scalar_recursion_is_exact() {
        for m in [2usize, 5] {
            let rep = erlang(m);
            let fp = fixed_point_ph(&rep, 0.3 / m as f64, 2, Method::InitialVector, Some(6)).unwrap();
            let check = method3_recursion_check(&rep, &fp);
            assert!(check.projected_max < 1e-15, "{check:?}");
        }
    }

    #[test]
    fn erlang_families_are_distinct() {
        let rep = erlang(3);
        let lambda = 0.2;
        let level1: Vec<Vec<f64>> = Method::ALL
            .iter()
            .map(|&m| fixed_point_ph(&rep, lambda, 2, m, Some(3)).unwrap().level(1))
            .collect();
        for i in 0..3 {
            for j in i + 1..3 {
                let gap = level1[i].iter().zip(&level1[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                // Methods 1 and 2 share level 1 (ρω) and differ from level 2 on.
                if (i, j) != (0, 1) {
                    assert!(gap > 1e-3, "methods {i} and {j}");
                }
            }
        }
        let l2: Vec<Vec<f64>> = [Method::Density, Method::Stationary]
            .iter()
            .map(|&m| fixed_point_ph(&rep, lambda, 2, m, Some(3)).unwrap().level(2))
            .collect();
        assert!((l2[0][0] - l2[1][0]).abs() > 1e-6);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("2".parse::<Method>().unwrap(), Method::Stationary);
        assert!("4".parse::<Method>().is_err());
        assert!("x".parse::<Method>().is_err());
    }
}
