//! Configuration values shared by every model: ion species, trap, lattice
//! and the depth schedule of the lattice ramp.
//!
//! All quantities are SI. Angular frequencies are rad/s; plain frequencies
//! (suffix `_hz`) are Hz.

use std::f64::consts::{PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, ELECTRON_MASS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid parameter `{name}`: {reason}")]
pub struct ParamError {
    pub name: &'static str,
    pub reason: String,
}

impl ParamError {
    pub(crate) fn new(name: &'static str, reason: impl Into<String>) -> Self {
        Self { name, reason: reason.into() }
    }
}

fn require(cond: bool, name: &'static str, reason: &str) -> Result<(), ParamError> {
    if cond {
        Ok(())
    } else {
        Err(ParamError::new(name, reason))
    }
}

/// Mass and optical constants of the trapped ion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// Wavelength of the transition driven by the lattice light, m.
    pub lattice_transition_wavelength: f64,
    /// Wavelength of the detected fluorescence, m.
    pub detection_wavelength: f64,
    /// Total decay rate of the excited state, 1/s.
    pub gamma_p_total: f64,
    /// Partial decay rate into the detected channel, 1/s.
    pub gamma_397: f64,
    /// Probability of leaving the lattice-coupled state per scattering event.
    pub branching_leave: f64,
    /// Fine-structure splitting to the upper excited level, rad/s.
    pub fine_structure_splitting: Option<f64>,
}

impl IonSpecies {
    /// ⁴⁰Ca⁺ with literature defaults: P1/2 linewidth 2π·22.4 MHz, 94 % decay to
    /// S1/2, 97 % probability of leaving the pumped D3/2 sublevel, and the
    /// 6.7 THz P1/2–P3/2 splitting.
    pub fn calcium40() -> Self {
        let gamma = TAU * 22.4e6;
        Self {
            mass: 39.962_590_863 * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            lattice_transition_wavelength: 866.214e-9,
            detection_wavelength: 396.959e-9,
            gamma_p_total: gamma,
            gamma_397: 0.94 * gamma,
            branching_leave: 0.97,
            fine_structure_splitting: Some(TAU * 6.7e12),
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require(self.mass > 0.0, "mass", "must be positive")?;
        require(self.lattice_transition_wavelength > 0.0, "lattice_transition_wavelength", "must be positive")?;
        require(self.detection_wavelength > 0.0, "detection_wavelength", "must be positive")?;
        require(self.gamma_p_total > 0.0, "gamma_p_total", "must be positive")?;
        require(
            self.gamma_397 > 0.0 && self.gamma_397 <= self.gamma_p_total,
            "gamma_397",
            "must lie in (0, gamma_p_total]",
        )?;
        require((0.0..=1.0).contains(&self.branching_leave), "branching_leave", "must lie in [0, 1]")?;
        Ok(())
    }

    /// Wavevector of light on the lattice transition, 1/m.
    pub fn lattice_wavevector(&self) -> f64 {
        TAU / self.lattice_transition_wavelength
    }
}

/// Pseudo-potential of the linear rf trap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    /// rf drive angular frequency Ω_rf.
    pub omega_rf: f64,
    /// Radial Mathieu q; derived from the secular frequencies when absent.
    pub q_radial: Option<f64>,
    /// Axial Mathieu q (parasitic axial rf), used for ions in a string.
    pub q_axial: Option<f64>,
}

impl TrapConfig {
    /// Builds a trap from frequencies in Hz. The radial frequencies are split
    /// symmetrically around `radial_hz` by the relative `asymmetry`
    /// (`ω_x = ω_r(1 + a/2)`, `ω_y = ω_r(1 − a/2)`).
    pub fn from_hz(axial_hz: f64, radial_hz: f64, asymmetry: f64, rf_hz: f64) -> Self {
        Self {
            omega_x: TAU * radial_hz * (1.0 + 0.5 * asymmetry),
            omega_y: TAU * radial_hz * (1.0 - 0.5 * asymmetry),
            omega_z: TAU * axial_hz,
            omega_rf: TAU * rf_hz,
            q_radial: None,
            q_axial: None,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require(self.omega_x > 0.0, "omega_x", "must be positive")?;
        require(self.omega_y > 0.0, "omega_y", "must be positive")?;
        require(self.omega_z > 0.0, "omega_z", "must be positive")?;
        require(self.omega_rf > 0.0, "omega_rf", "must be positive")?;
        for (name, q) in [("q_radial", self.q_radial), ("q_axial", self.q_axial)] {
            if let Some(q) = q {
                require((0.0..=0.908).contains(&q), name, "outside the first stability region [0, 0.908]")?;
            }
        }
        Ok(())
    }

    /// `(ω_x/ω_z)², (ω_y/ω_z)²`: radial stiffness in axial units.
    pub fn radial_stiffness(&self) -> (f64, f64) {
        ((self.omega_x / self.omega_z).powi(2), (self.omega_y / self.omega_z).powi(2))
    }

    /// Mathieu q along x and y. An explicit `q_radial` applies to both axes;
    /// otherwise each axis uses the lowest-order relation `q = 2√2 ω/Ω_rf`.
    pub fn q_xy(&self) -> (f64, f64) {
        match self.q_radial {
            Some(q) => (q, q),
            None => (
                2.0 * SQRT_2 * self.omega_x / self.omega_rf,
                2.0 * SQRT_2 * self.omega_y / self.omega_rf,
            ),
        }
    }

    /// Mean radial q, used for the effective axial parameter of 2-D/3-D crystals.
    pub fn q_radial_mean(&self) -> f64 {
        let (qx, qy) = self.q_xy();
        0.5 * (qx + qy)
    }
}

/// Standing-wave potential `U(z) = U0 sin²(kz − φ)` along the trap axis.
///
/// `depth > 0` is a blue-detuned lattice (minima at the intensity nodes),
/// `depth < 0` a red-detuned one (minima at the antinodes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// U0, J (signed).
    pub depth: f64,
    /// k, 1/m.
    pub wavevector: f64,
    /// Δ_latt, rad/s. Positive is blue.
    pub detuning: f64,
    /// Antinode intensity at full depth, W/m². Optional.
    pub antinode_intensity: Option<f64>,
    /// Effective scattering cross-section, m². Only used together with
    /// `antinode_intensity`.
    pub cross_section_397: Option<f64>,
    /// Relative strength of a second far-detuned channel to the upper
    /// fine-structure level (0 disables it).
    pub upper_level_coupling: f64,
    /// Phase `φ` of the standing wave; 0 puts a node at the trap centre.
    #[serde(default)]
    pub phase: f64,
}

impl LatticeConfig {
    /// Lattice of the given depth temperature `|U0|/kB`; the sign of
    /// `detuning` selects blue (node) or red (antinode) pinning.
    pub fn from_temperature(t_latt: f64, wavelength: f64, detuning: f64) -> Self {
        let sign = if detuning < 0.0 { -1.0 } else { 1.0 };
        Self {
            depth: sign * t_latt * BOLTZMANN,
            wavevector: TAU / wavelength,
            detuning,
            antinode_intensity: None,
            cross_section_397: None,
            upper_level_coupling: 0.0,
            phase: 0.0,
        }
    }

    /// Lattice whose small-oscillation frequency is `nu_hz` for mass `mass`.
    pub fn from_vibrational_frequency(nu_hz: f64, mass: f64, wavelength: f64, detuning: f64) -> Self {
        let mut cfg = Self::from_temperature(0.0, wavelength, detuning);
        let sign = if detuning < 0.0 { -1.0 } else { 1.0 };
        cfg.depth = sign * depth_for_frequency(nu_hz, mass, cfg.wavevector);
        cfg
    }

    /// Same lattice at another depth. A configured antinode intensity is
    /// rescaled in proportion, as the depth is linear in intensity (left
    /// unchanged when the current depth is zero).
    pub fn with_depth(&self, depth: f64) -> Self {
        let antinode_intensity = match self.antinode_intensity {
            Some(i) if self.depth != 0.0 => Some(i * (depth / self.depth).abs()),
            other => other,
        };
        Self { depth, antinode_intensity, ..self.clone() }
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        Self { phase, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require(self.depth.is_finite(), "depth", "must be finite")?;
        require(self.wavevector > 0.0, "wavevector", "must be positive")?;
        require(self.detuning != 0.0 && self.detuning.is_finite(), "detuning", "must be finite and non-zero")?;
        if let Some(i) = self.antinode_intensity {
            require(i >= 0.0, "antinode_intensity", "must be non-negative")?;
        }
        if let Some(s) = self.cross_section_397 {
            require(s > 0.0, "cross_section_397", "must be positive")?;
        }
        require(self.upper_level_coupling >= 0.0, "upper_level_coupling", "must be non-negative")?;
        require(self.phase.is_finite(), "phase", "must be finite")?;
        Ok(())
    }

    /// Depth in temperature units, `T_latt = |U0|/kB`.
    pub fn temperature(&self) -> f64 {
        self.depth.abs() / BOLTZMANN
    }

    /// Small-oscillation frequency at the bottom of a well, Hz.
    pub fn vibrational_frequency(&self, mass: f64) -> f64 {
        self.wavevector / TAU * (2.0 * self.depth.abs() / mass).sqrt()
    }

    pub fn is_red(&self) -> bool {
        self.depth < 0.0
    }

    /// Spatial period of the potential, π/k.
    pub fn period(&self) -> f64 {
        PI / self.wavevector
    }
}

/// `|U0|` giving a small-oscillation frequency `nu_hz`.
pub fn depth_for_frequency(nu_hz: f64, mass: f64, wavevector: f64) -> f64 {
    let v = TAU * nu_hz / wavevector;
    0.5 * mass * v * v
}

/// How the depth rises during the ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RampShape {
    /// Depth grows linearly in time.
    Linear,
    /// Piecewise-linear fraction of full depth at the given fractions of the
    /// ramp duration, both in `[0, 1]` and starting at `(0, 0)`.
    Piecewise(Vec<(f64, f64)>),
}

/// Depth schedule: ramp from zero to full depth, then hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampProfile {
    pub ramp_duration: f64,
    pub hold_duration: f64,
    pub shape: RampShape,
}

impl RampProfile {
    pub fn linear(ramp_duration: f64, hold_duration: f64) -> Self {
        Self { ramp_duration, hold_duration, shape: RampShape::Linear }
    }

    /// 2 µs linear ramp followed by a 1 µs hold.
    pub fn experiment() -> Self {
        Self::linear(2e-6, 1e-6)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require(self.ramp_duration >= 0.0, "ramp_duration", "must be non-negative")?;
        require(self.hold_duration >= 0.0, "hold_duration", "must be non-negative")?;
        require(self.duration() > 0.0, "ramp", "total duration must be positive")?;
        if let RampShape::Piecewise(pts) = &self.shape {
            require(pts.len() >= 2, "shape", "piecewise ramp needs at least two points")?;
            require(pts[0] == (0.0, 0.0), "shape", "piecewise ramp must start at (0, 0)")?;
            require(
                pts.last().map(|p| p.0 == 1.0).unwrap_or(false),
                "shape",
                "piecewise ramp must end at time fraction 1",
            )?;
            for w in pts.windows(2) {
                require(w[1].0 > w[0].0, "shape", "time fractions must increase")?;
                require(w[1].1 >= w[0].1, "shape", "depth must be non-decreasing during the ramp")?;
            }
            require(
                pts.iter().all(|p| (0.0..=1.0).contains(&p.0) && (0.0..=1.0).contains(&p.1)),
                "shape",
                "points must lie in [0, 1]²",
            )?;
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.ramp_duration + self.hold_duration
    }

    /// Fraction of full depth at time `t` (0 before, held value after the end).
    pub fn fraction(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.ramp_duration {
            return match &self.shape {
                RampShape::Linear => 1.0,
                RampShape::Piecewise(pts) => pts.last().map(|p| p.1).unwrap_or(1.0),
            };
        }
        let u = t / self.ramp_duration;
        match &self.shape {
            RampShape::Linear => u,
            RampShape::Piecewise(pts) => {
                let i = pts.partition_point(|p| p.0 <= u).clamp(1, pts.len() - 1);
                let (t0, f0) = pts[i - 1];
                let (t1, f1) = pts[i];
                f0 + (f1 - f0) * (u - t0) / (t1 - t0)
            }
        }
    }

    /// Times where the schedule has a kink, inside `(0, duration)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let RampShape::Piecewise(pts) = &self.shape {
            out.extend(pts.iter().map(|p| p.0 * self.ramp_duration).filter(|&t| t > 0.0 && t < self.ramp_duration));
        }
        if self.ramp_duration > 0.0 && self.hold_duration > 0.0 {
            out.push(self.ramp_duration);
        }
        out
    }
}
