//! Complete elliptic integrals of the first and second kind.
//!
//! **Argument convention: the parameter `m`, not the modulus `k`.**
//! `K(m) = ∫₀^{π/2} dθ / √(1 − m sin²θ)` and
//! `E(m) = ∫₀^{π/2} √(1 − m sin²θ) dθ`, with `m = k²`. This matches
//! `scipy.special.ellipk` / `ellipe`. Passing a modulus where a parameter is
//! expected silently corrupts every pendulum formula downstream.
//!
//! Both integrals are evaluated with the arithmetic–geometric mean, which
//! converges quadratically and needs no coefficient tables.

use std::f64::consts::FRAC_PI_2;

use super::SpecfunError;

const AGM_MAX_ITER: usize = 64;

/// Validated elliptic parameter `m ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EllipticParameter(f64);

impl EllipticParameter {
    pub fn new(m: f64) -> Result<Self, SpecfunError> {
        if !(0.0..=1.0).contains(&m) {
            return Err(SpecfunError::OutOfDomain { m });
        }
        Ok(Self(m))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `K(m)`; fails at `m = 1` where the integral diverges.
    pub fn k(self) -> Result<f64, SpecfunError> {
        elliptic_k(self.0)
    }

    pub fn e(self) -> f64 {
        // Domain already validated.
        agm_pair(self.0).1
    }
}

impl TryFrom<f64> for EllipticParameter {
    type Error = SpecfunError;

    fn try_from(m: f64) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

/// Runs the AGM for `(1, √(1−m))` and returns `(K(m), E(m))`.
///
/// `m` must lie in `[0, 1)`; the caller handles `m = 1`.
fn agm_pair(m: f64) -> (f64, f64) {
    if m == 1.0 {
        return (f64::INFINITY, 1.0);
    }
    let mut a = 1.0_f64;
    let mut b = (1.0 - m).sqrt();
    // Σ 2^{n−1} c_n², starting with c₀² = m.
    let mut sum = 0.5 * m;
    let mut pow = 0.5;
    for _ in 0..AGM_MAX_ITER {
        let c = 0.5 * (a - b);
        let a_next = 0.5 * (a + b);
        let b_next = (a * b).sqrt();
        pow *= 2.0;
        sum += pow * c * c;
        a = a_next;
        b = b_next;
        if c.abs() <= f64::EPSILON * a {
            break;
        }
    }
    let k = FRAC_PI_2 / a;
    (k, k * (1.0 - sum))
}

/// Complete elliptic integral of the first kind, `K(m)` for `0 ≤ m < 1`.
///
/// Diverges like `½ ln(16 / (1 − m))` as `m → 1⁻`.
pub fn elliptic_k(m: f64) -> Result<f64, SpecfunError> {
    if m.is_nan() || m < 0.0 || m > 1.0 {
        return Err(SpecfunError::OutOfDomain { m });
    }
    if m == 1.0 {
        return Err(SpecfunError::Divergent { m });
    }
    Ok(agm_pair(m).0)
}

/// Complete elliptic integral of the second kind, `E(m)` for `0 ≤ m ≤ 1`.
pub fn elliptic_e(m: f64) -> Result<f64, SpecfunError> {
    if m.is_nan() || m < 0.0 || m > 1.0 {
        return Err(SpecfunError::OutOfDomain { m });
    }
    Ok(agm_pair(m).1)
}

/// Both integrals from a single AGM run. `m` must be in `[0, 1)`.
pub fn elliptic_ke(m: f64) -> Result<(f64, f64), SpecfunError> {
    if m.is_nan() || m < 0.0 || m > 1.0 {
        return Err(SpecfunError::OutOfDomain { m });
    }
    if m == 1.0 {
        return Err(SpecfunError::Divergent { m });
    }
    Ok(agm_pair(m))
}
