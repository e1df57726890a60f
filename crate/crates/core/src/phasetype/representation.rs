use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::PhaseTypeError;
use crate::numerics::linalg::{self, row_times};
use crate::numerics::uniformization::{check_representation, ph_action_unchecked};

/// Tolerance for `αe = 1`.
const MASS_TOL: f64 = 1e-9;

/// A phase-type law: absorption time of a CTMC started in `α` with
/// transient sub-generator `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhRepresentation {
    alpha: Vec<f64>,
    t: DMatrix<f64>,
    exit: Vec<f64>,
    mean: f64,
    second_moment: f64,
    omega: Vec<f64>,
}

impl PhRepresentation {
    pub fn new(alpha: Vec<f64>, t: DMatrix<f64>) -> Result<Self, PhaseTypeError> {
        check_representation(&alpha, &t).map_err(|e| PhaseTypeError::InvalidRepresentation(e.to_string()))?;
        let mass: f64 = alpha.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(PhaseTypeError::InvalidRepresentation(format!(
                "alpha must sum to 1, got {mass}"
            )));
        }
        let m = alpha.len();
        let exit: Vec<f64> = (0..m).map(|i| -t.row(i).sum()).collect();

        let neg_inv = linalg::inverse(&(-&t))
            .map_err(|_| PhaseTypeError::InvalidRepresentation("T is singular".into()))?;
        let a = DVector::from_column_slice(&alpha);
        let ones = DVector::from_element(m, 1.0);
        // E[X] = α(−T)⁻¹e, E[X²] = 2α(−T)⁻²e.
        let first = &neg_inv * &ones;
        let mean = a.dot(&first);
        let second_moment = 2.0 * a.dot(&(&neg_inv * &first));
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(PhaseTypeError::InvalidRepresentation(format!(
                "mean {mean} is not finite and positive"
            )));
        }

        let mut generator = t.clone();
        for i in 0..m {
            for j in 0..m {
                generator[(i, j)] += exit[i] * alpha[j];
            }
        }
        let omega = linalg::stationary_vector(&generator).map_err(|e| {
            PhaseTypeError::InvalidRepresentation(format!("T + T0*alpha is not irreducible ({e})"))
        })?;

        Ok(Self {
            alpha,
            t,
            exit,
            mean,
            second_moment,
            omega,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self, PhaseTypeError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(PhaseTypeError::InvalidRepresentation(format!(
                "rate must be positive, got {rate}"
            )));
        }
        Self::new(vec![1.0], DMatrix::from_element(1, 1, -rate))
    }

    /// `m` sequential phases, each left at rate `eta`.
    pub fn erlang(m: usize, eta: f64) -> Result<Self, PhaseTypeError> {
        if m == 0 {
            return Err(PhaseTypeError::InvalidRepresentation("Erlang needs at least one phase".into()));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(PhaseTypeError::InvalidRepresentation(format!(
                "rate must be positive, got {eta}"
            )));
        }
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = -eta;
            if i + 1 < m {
                t[(i, i + 1)] = eta;
            }
        }
        let mut alpha = vec![0.0; m];
        alpha[0] = 1.0;
        Self::new(alpha, t)
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    /// Exit-rate column `T⁰ = −Te`.
    pub fn exit_vector(&self) -> &[f64] {
        &self.exit
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Service rate `μ = 1/E[X]`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Stationary vector of the restart generator `T + T⁰α`.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn restart_generator(&self) -> DMatrix<f64> {
        let m = self.order();
        DMatrix::from_fn(m, m, |i, j| self.t[(i, j)] + self.exit[i] * self.alpha[j])
    }

    /// `α·exp(Tx)`, the unnormalized phase distribution at age `x`.
    pub fn phase_vector(&self, x: f64) -> Vec<f64> {
        ph_action_unchecked(&self.alpha, &self.t, x.max(0.0))
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        self.phase_vector(x).iter().sum::<f64>().clamp(0.0, 1.0)
    }

    /// Returns `None` when the survival has underflowed to zero.
    pub fn hazard(&self, x: f64) -> Option<f64> {
        let v = self.phase_vector(x);
        let mass: f64 = v.iter().sum();
        if mass <= 0.0 {
            return None;
        }
        let out: f64 = v.iter().zip(&self.exit).map(|(a, b)| a * b).sum();
        Some(out / mass)
    }

    pub fn density(&self, x: f64) -> f64 {
        let v = self.phase_vector(x);
        v.iter().zip(&self.exit).map(|(a, b)| a * b).sum()
    }

    /// `α(−T)⁻¹`, which normalized by `μ` equals the stationary vector `ω`.
    pub fn occupation(&self) -> Vec<f64> {
        let neg_inv = linalg::inverse(&(-&self.t)).expect("checked at construction");
        row_times(&self.alpha, &neg_inv)
    }

    /// Draws an absorption time by walking the phase chain.
    ///
    /// `uniform` must yield values in `(0, 1]`.
    pub fn sample_walk<U: FnMut() -> f64>(&self, uniform: &mut U) -> f64 {
        let m = self.order();
        let mut phase = pick(&self.alpha, uniform());
        let mut elapsed = 0.0;
        while let Some(i) = phase {
            let out_rate = -self.t[(i, i)];
            elapsed += -uniform().ln() / out_rate;
            let u = uniform() * out_rate;
            let mut acc = 0.0;
            let mut next = None;
            for j in 0..m {
                if j != i {
                    acc += self.t[(i, j)];
                    if u <= acc {
                        next = Some(j);
                        break;
                    }
                }
            }
            phase = next;
        }
        elapsed
    }

    /// Two-part text format: line 1 holds `α`, each following line a row of `T`.
    pub fn from_text(text: &str) -> Result<Self, PhaseTypeError> {
        let rows: Vec<(usize, Vec<f64>)> = text
            .lines()
            .enumerate()
            .map(|(i, line)| (i + 1, line.split('#').next().unwrap_or("").trim()))
            .filter(|(_, line)| !line.is_empty())
            .map(|(no, line)| parse_row(no, line).map(|r| (no, r)))
            .collect::<Result<_, _>>()?;
        let Some(((_, alpha), rest)) = rows.split_first() else {
            return Err(PhaseTypeError::Parse { line: 0, message: "empty input".into() });
        };
        let m = alpha.len();
        if rest.len() != m {
            return Err(PhaseTypeError::Parse {
                line: rest.last().map_or(1, |r| r.0),
                message: format!("alpha has {m} entries but T has {} rows", rest.len()),
            });
        }
        let mut t = DMatrix::zeros(m, m);
        for (i, (line, row)) in rest.iter().enumerate() {
            if row.len() != m {
                return Err(PhaseTypeError::Parse {
                    line: *line,
                    message: format!("expected {m} entries, found {}", row.len()),
                });
            }
            for (j, v) in row.iter().enumerate() {
                t[(i, j)] = *v;
            }
        }
        Self::new(alpha.clone(), t)
    }

    pub fn from_file(path: &Path) -> Result<Self, PhaseTypeError> {
        let text = std::fs::read_to_string(path).map_err(|e| PhaseTypeError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = join_row(&self.alpha);
        for i in 0..self.order() {
            out.push('\n');
            out.push_str(&join_row(&self.t.row(i).iter().copied().collect::<Vec<_>>()));
        }
        out.push('\n');
        out
    }
}

impl fmt::Display for PhRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ph(alpha=[{}], T=[", join_row(&self.alpha))?;
        for i in 0..self.order() {
            if i > 0 {
                f.write_str("; ")?;
            }
            f.write_str(&join_row(&self.t.row(i).iter().copied().collect::<Vec<_>>()))?;
        }
        f.write_str("])")
    }
}

fn join_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn parse_row(line_no: usize, line: &str) -> Result<Vec<f64>, PhaseTypeError> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PhaseTypeError::Parse {
                    line: line_no,
                    message: format!("'{tok}' is not a finite number"),
                })
        })
        .collect()
}

/// Index drawn from the (possibly defective) probability vector `p`.
fn pick(p: &[f64], u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u <= acc {
            return Some(i);
        }
    }
    // Rounding can leave the total a hair below 1.
    p.iter().rposition(|&w| w > 0.0).filter(|_| u <= acc + 1e-12)
}
