//! Numerical kernels shared by every model module.

pub mod linalg;
pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod uniformization;

pub use linalg::{stationary_vector, LinalgError};
pub use ode::{solve_ode, OdeError, OdeSettings, Trajectory};
pub use quadrature::{integrate, integrate_estimate, QuadratureError, QuadratureSpec, TailPolicy};
pub use roots::{bisect, solve_decreasing, RootError};
pub use uniformization::{ph_action, survival_ph, UniformizationError};
