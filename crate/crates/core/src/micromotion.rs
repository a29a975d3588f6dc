//! Excess micromotion of ions displaced from the rf null.
//!
//! An ion sitting a distance `r0` from the rf-free line along an axis with
//! Mathieu parameter `q` is driven at `Ω_rf` with amplitude `A = r0·q/2`,
//! kinetic energy `E = ¼·M·Ω_rf²·A²` and equivalent temperature `2E/kB`.
//! Along the trap axis the effective parameter `q′z = (q_rad/4)²` applies
//! unless an explicit axial `q` is configured.

use crate::constants::BOLTZMANN;
use crate::crystal::CrystalState;
use crate::params::{IonSpecies, ParamError, TrapConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MicromotionError {
    #[error("{what} = {value} is invalid")]
    Domain { what: &'static str, value: f64 },
    #[error("secular frequency {omega_secular:e} rad/s is not below half the drive {omega_rf:e} rad/s")]
    Unstable { omega_secular: f64, omega_rf: f64 },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// `(q_rad/4)²`.
pub fn effective_axial_q(q_radial: f64) -> Result<f64, MicromotionError> {
    if !(q_radial >= 0.0 && q_radial.is_finite()) {
        return Err(MicromotionError::Domain { what: "q_radial", value: q_radial });
    }
    Ok((0.25 * q_radial).powi(2))
}

/// Factor `1 + q²/8` on the secular position variance.
pub fn variance_broadening(q: f64) -> Result<f64, MicromotionError> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(MicromotionError::Domain { what: "q", value: q });
    }
    Ok(1.0 + q * q / 8.0)
}

/// Lowest-order pseudo-potential relation `q = 2√2·ω/Ω_rf` (no dc term).
pub fn q_from_secular_frequency(omega_secular: f64, omega_rf: f64) -> Result<f64, MicromotionError> {
    if !(omega_rf > 0.0 && omega_rf.is_finite()) {
        return Err(MicromotionError::Domain { what: "omega_rf", value: omega_rf });
    }
    if !(omega_secular >= 0.0) {
        return Err(MicromotionError::Domain { what: "omega_secular", value: omega_secular });
    }
    if omega_secular >= 0.5 * omega_rf {
        return Err(MicromotionError::Unstable { omega_secular, omega_rf });
    }
    Ok(2.0 * std::f64::consts::SQRT_2 * omega_secular / omega_rf)
}

/// `¼·M·Ω²·A²`, J.
pub fn kinetic_energy(amplitude: f64, omega_rf: f64, mass: f64) -> f64 {
    0.25 * mass * omega_rf * omega_rf * amplitude * amplitude
}

/// `2E/kB`, K.
pub fn equivalent_temperature(energy: f64) -> f64 {
    2.0 * energy / BOLTZMANN
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonMicromotion {
    /// Amplitude along x, y, z, m.
    pub amplitude: [f64; 3],
    /// J
    pub kinetic_energy: [f64; 3],
    /// K
    pub equivalent_temperature: [f64; 3],
}

impl IonMicromotion {
    /// `T_x + T_y`.
    pub fn radial_temperature(&self) -> f64 {
        self.equivalent_temperature[0] + self.equivalent_temperature[1]
    }

    pub fn radial_amplitude(&self) -> f64 {
        self.amplitude[0].hypot(self.amplitude[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicromotionReport {
    pub ions: Vec<IonMicromotion>,
    /// Mathieu `q` used along x, y and z.
    pub q: [f64; 3],
    /// `q′z` from the mean radial `q`.
    pub effective_q_axial: f64,
    /// `1 + q²/8` per axis.
    pub variance_broadening_factor: [f64; 3],
}

impl MicromotionReport {
    /// Largest radial equivalent temperature in the crystal, K.
    pub fn max_radial_temperature(&self) -> f64 {
        self.ions.iter().map(IonMicromotion::radial_temperature).fold(0.0, f64::max)
    }
}

pub fn excess_micromotion(
    state: &CrystalState,
    trap: &TrapConfig,
    species: &IonSpecies,
) -> Result<MicromotionReport, MicromotionError> {
    trap.validate()?;
    species.validate()?;
    let (qx, qy) = trap.q_xy();
    let effective_q_axial = effective_axial_q(trap.q_radial_mean())?;
    let q = [qx, qy, trap.q_axial.unwrap_or(effective_q_axial)];
    let ions = state
        .positions
        .iter()
        .map(|p| {
            let amplitude = [0, 1, 2].map(|u| 0.5 * p[u].abs() * q[u]);
            let kinetic_energy = amplitude.map(|a| kinetic_energy(a, trap.omega_rf, species.mass));
            IonMicromotion { amplitude, kinetic_energy, equivalent_temperature: kinetic_energy.map(equivalent_temperature) }
        })
        .collect();
    let variance_broadening_factor = [variance_broadening(q[0])?, variance_broadening(q[1])?, variance_broadening(q[2])?];
    Ok(MicromotionReport { ions, q, effective_q_axial, variance_broadening_factor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn effective_q_values() {
        assert!((effective_axial_q(0.14).unwrap() - 1.225e-3).abs() < 1e-15);
        assert_eq!(effective_axial_q(0.0).unwrap(), 0.0);
        assert!((effective_axial_q(0.4).unwrap() - 0.01).abs() < 1e-16);
        assert!(effective_axial_q(-0.1).is_err());
    }

    #[test]
    fn broadening_values() {
        assert_eq!(variance_broadening(0.0).unwrap(), 1.0);
        assert!((variance_broadening(5e-4).unwrap() - 1.0 - 3.125e-8).abs() < 1e-16);
        assert!((variance_broadening(0.14).unwrap() - 1.00245).abs() < 1e-12);
    }

    #[test]
    fn q_from_frequencies() {
        assert_eq!(q_from_secular_frequency(0.0, TAU * 3.98e6).unwrap(), 0.0);
        assert!((q_from_secular_frequency(TAU * 170e3, TAU * 3.98e6).unwrap() - 0.121).abs() < 5e-4);
        assert!((q_from_secular_frequency(TAU * 190e3, TAU * 3.98e6).unwrap() - 0.135).abs() < 5e-4);
        assert!(matches!(
            q_from_secular_frequency(TAU * 2.0e6, TAU * 3.98e6),
            Err(MicromotionError::Unstable { .. })
        ));
    }

    #[test]
    fn temperature_energy_identity() {
        let m = IonSpecies::calcium40().mass;
        for a in [0.0, 1e-8, 3e-7] {
            let e = kinetic_energy(a, TAU * 3.98e6, m);
            assert!((equivalent_temperature(e) * BOLTZMANN / 2.0 - e).abs() <= 1e-15 * e);
        }
    }
}
