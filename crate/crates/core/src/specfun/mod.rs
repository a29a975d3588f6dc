//! Special functions and quadrature used by the pendulum model.

mod elliptic;
mod quadrature;

pub use elliptic::{elliptic_e, elliptic_k, elliptic_ke, EllipticParameter};
pub use quadrature::{integrate, integrate_with_endpoint_singularity, QuadratureResult, MAX_PANELS};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SpecfunError {
    #[error("elliptic parameter m = {m} is outside [0, 1]")]
    OutOfDomain { m: f64 },
    #[error("K(m) diverges at m = {m}")]
    Divergent { m: f64 },
    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    NoConvergence { estimate: f64, error_bound: f64 },
    #[error("integrand is not finite at mapped abscissa {x}")]
    NonFiniteIntegrand { x: f64 },
    #[error("integration interval [{a}, {b}] must be finite")]
    InvalidInterval { a: f64, b: f64 },
    #[error("quadrature tolerance must be positive, got {tol}")]
    InvalidTolerance { tol: f64 },
}
