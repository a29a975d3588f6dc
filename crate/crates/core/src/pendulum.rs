//! Single-ion pendulum model of lattice pinning under an adiabatic ramp.
//!
//! While the depth `U0` rises slowly, the action of each trajectory in the
//! potential `U0 sin²(kz)` is conserved. The action distribution therefore
//! stays that of the initial thermal gas at `T0`, and the energy, position
//! and scattering statistics at any depth follow from it.
//!
//! Most functions exist in two flavours: an SI one (`E`, `U0` in J, `T0` in
//! K) and a dimensionless one taking `x = E/U0` or `θ = kB·T0/U0`.
//!
//! Energies above the barrier (`x > 1`) use the period
//! `τ(x) = (2/π)·√(1/x)·K(1/x)`. This is the derivative of the action
//! `s(x) = (4/π)·√x·E(1/x)` with respect to `x`, reduces to the free-flight
//! value `1/√x` far above the barrier, and normalizes the position density
//! over one lattice period.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::constants::{BOLTZMANN, HBAR, SPEED_OF_LIGHT};
use crate::params::{IonSpecies, LatticeConfig, ParamError, RampProfile};
use crate::specfun::{elliptic_e, elliptic_ke, integrate_with_endpoint_singularity, SpecfunError};

/// Absolute tolerance for energy averages (quantities of order one).
pub const ENERGY_AVERAGE_TOL: f64 = 1e-11;
/// Absolute tolerance for the time integral of the scattering rate.
pub const TIME_INTEGRAL_TOL: f64 = 1e-11;
/// Tail cut of the action distribution: `exp(−CUT)` is dropped.
const TAIL_EXPONENT: f64 = 60.0;
/// Ramps shorter than this many small-oscillation periods trigger a warning.
pub const ADIABATIC_PERIODS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PendulumError {
    #[error("{what} = {value} is outside the model domain")]
    Domain { what: &'static str, value: f64 },
    #[error("the period diverges on the separatrix E = U0")]
    Separatrix,
    #[error("kz = {kz} lies beyond the turning point for E/U0 = {energy_ratio}; the density is zero there")]
    BeyondTurningPoint { kz: f64, energy_ratio: f64 },
    #[error(transparent)]
    Quadrature(#[from] SpecfunError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

fn domain(what: &'static str, value: f64) -> PendulumError {
    PendulumError::Domain { what, value }
}

/// Small-oscillation frequency (Hz) of a well of depth `T_latt` (K).
pub fn lattice_frequency(t_latt: f64, species: &IonSpecies, k: f64) -> Result<f64, PendulumError> {
    if !(t_latt >= 0.0) {
        return Err(domain("T_latt", t_latt));
    }
    Ok(k / (2.0 * PI) * (2.0 * BOLTZMANN * t_latt / species.mass).sqrt())
}

/// Density of the dimensionless action `s = (ν_latt/U0)·S`, a half-Gaussian
/// fixed by the initial temperature.
pub fn action_density(s: f64, t0: f64, u0: f64) -> Result<f64, PendulumError> {
    if !(s >= 0.0) {
        return Err(domain("s", s));
    }
    let theta = thermal_ratio(t0, u0)?;
    Ok(action_density_ratio(s, theta))
}

fn action_density_ratio(s: f64, theta: f64) -> f64 {
    (-s * s / (4.0 * theta)).exp() / (PI * theta).sqrt()
}

/// `θ = kB·T0/|U0|`.
pub fn thermal_ratio(t0: f64, u0: f64) -> Result<f64, PendulumError> {
    if !(t0 > 0.0) {
        return Err(domain("T0", t0));
    }
    if !(u0.abs() > 0.0) || !u0.is_finite() {
        return Err(domain("U0", u0));
    }
    Ok(BOLTZMANN * t0 / u0.abs())
}

fn energy_ratio(e: f64, u0: f64) -> Result<f64, PendulumError> {
    if !(e >= 0.0) || !e.is_finite() {
        return Err(domain("E", e));
    }
    if !(u0 > 0.0) || !u0.is_finite() {
        return Err(domain("U0", u0));
    }
    Ok(e / u0)
}

/// Dimensionless action `s(E)`.
pub fn dimensionless_action(e: f64, u0: f64) -> Result<f64, PendulumError> {
    action_ratio(energy_ratio(e, u0)?)
}

/// `s(x)` for `x = E/U0 ≥ 0`; continuous at the separatrix with value `4/π`.
pub fn action_ratio(x: f64) -> Result<f64, PendulumError> {
    if !(x >= 0.0) {
        return Err(domain("E/U0", x));
    }
    Ok(action_ratio_unchecked(x))
}

fn action_ratio_unchecked(x: f64) -> f64 {
    if x == 1.0 {
        4.0 / PI
    } else if x < 1.0 {
        let (k, e) = elliptic_ke(x).expect("x in [0, 1)");
        4.0 / PI * (e - k * (1.0 - x))
    } else {
        4.0 / PI * x.sqrt() * elliptic_e(1.0 / x).expect("1/x in (0, 1)")
    }
}

/// Period normalized to the small-oscillation period, `τ(E)`.
pub fn normalized_period(e: f64, u0: f64) -> Result<f64, PendulumError> {
    period_ratio(energy_ratio(e, u0)?)
}

/// `τ(x)`; fails on the separatrix `x = 1`.
pub fn period_ratio(x: f64) -> Result<f64, PendulumError> {
    if !(x >= 0.0) {
        return Err(domain("E/U0", x));
    }
    if x == 1.0 {
        return Err(PendulumError::Separatrix);
    }
    Ok(period_ratio_unchecked(x))
}

fn period_ratio_unchecked(x: f64) -> f64 {
    // Quadrature maps can land a hair from the separatrix; nudge off it.
    let x = if x == 1.0 { 1.0 - f64::EPSILON } else { x };
    if x < 1.0 {
        2.0 / PI * elliptic_ke(x).expect("x in [0, 1)").0
    } else {
        let m = 1.0 / x;
        2.0 / PI * m.sqrt() * elliptic_ke(m).expect("1/x in (0, 1)").0
    }
}

/// Energy density `P(E)` in 1/J.
pub fn energy_density(e: f64, t0: f64, u0: f64) -> Result<f64, PendulumError> {
    let x = energy_ratio(e, u0)?;
    let theta = thermal_ratio(t0, u0)?;
    Ok(energy_density_ratio(x, theta)? / u0)
}

/// Density of `x = E/U0` for thermal ratio `θ`.
pub fn energy_density_ratio(x: f64, theta: f64) -> Result<f64, PendulumError> {
    let tau = period_ratio(x)?;
    Ok(action_density_ratio(action_ratio_unchecked(x), theta) * tau)
}

/// Position density `P(kz | E)` over one lattice well `kz ∈ [−π/2, π/2]`.
/// `kz` outside that window is folded back by the lattice period.
pub fn position_density_given_energy(kz: f64, e: f64, u0: f64) -> Result<f64, PendulumError> {
    let x = energy_ratio(e, u0)?;
    if !kz.is_finite() {
        return Err(domain("kz", kz));
    }
    let folded = kz - PI * (kz / PI).round();
    let s2 = folded.sin().powi(2);
    if x <= 1.0 && s2 >= x {
        return Err(PendulumError::BeyondTurningPoint { kz, energy_ratio: x });
    }
    let tau = period_ratio(x)?;
    Ok(1.0 / (PI * tau * (x - s2).sqrt()))
}

/// `⟨sin²(kz)⟩` along a trajectory of energy `E`.
pub fn bunching_given_energy(e: f64, u0: f64) -> Result<f64, PendulumError> {
    bunching_ratio(energy_ratio(e, u0)?)
}

/// `⟨sin²(kz)⟩(x)`; 0 at the bottom, 1 on the separatrix, → 1/2 far above.
pub fn bunching_ratio(x: f64) -> Result<f64, PendulumError> {
    if !(x >= 0.0) {
        return Err(domain("E/U0", x));
    }
    Ok(bunching_ratio_unchecked(x))
}

fn bunching_ratio_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x == 1.0 {
        1.0
    } else if x < 1.0 {
        let (k, e) = elliptic_ke(x).expect("x in (0, 1)");
        1.0 - e / k
    } else {
        let (k, e) = elliptic_ke(1.0 / x).expect("1/x in (0, 1)");
        x * (1.0 - e / k)
    }
}

/// Average of `g(x)` over the energy distribution at thermal ratio `θ`.
///
/// The integral is split at the separatrix, which is declared singular.
pub fn energy_average<G: Fn(f64) -> f64>(theta: f64, g: G) -> Result<f64, PendulumError> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(domain("kB T0/U0", theta));
    }
    let s_cut = (4.0 * theta * TAIL_EXPONENT).sqrt();
    let integrand = |x: f64| {
        action_density_ratio(action_ratio_unchecked(x), theta) * period_ratio_unchecked(x) * g(x)
    };
    // s(x) ≥ x below the separatrix and s(x) ≥ (4/π)√x above it.
    if s_cut < 1.0 {
        let r = integrate_with_endpoint_singularity(integrand, 0.0, s_cut, &[], ENERGY_AVERAGE_TOL)?;
        return Ok(r.value);
    }
    let x_cut = (PI * s_cut / 4.0).powi(2).max(2.0);
    let r = integrate_with_endpoint_singularity(integrand, 0.0, x_cut, &[1.0], ENERGY_AVERAGE_TOL)?;
    Ok(r.value)
}

/// Bunching parameter `B = ⟨sin²(kz)⟩` of an initially thermal ion at `T0`
/// after an adiabatic ramp to depth `|U0|`.
pub fn bunching(t0: f64, u0: f64) -> Result<f64, PendulumError> {
    if !(t0 > 0.0) {
        return Err(domain("T0", t0));
    }
    if u0 == 0.0 {
        return Ok(0.5);
    }
    bunching_dimensionless(thermal_ratio(t0, u0)?)
}

/// `B(θ)` with `θ = kB·T0/|U0|`.
pub fn bunching_dimensionless(theta: f64) -> Result<f64, PendulumError> {
    energy_average(theta, bunching_ratio_unchecked)
}

/// Mean `sin²(kz)` seen by the ion: `B` for a blue lattice (pinned at the
/// nodes), `1 − B` for a red one (pinned at the antinodes).
pub fn intensity_overlap(t0: f64, u0_signed: f64) -> Result<f64, PendulumError> {
    let b = bunching(t0, u0_signed.abs())?;
    Ok(if u0_signed < 0.0 { 1.0 - b } else { b })
}

/// Rabi frequency of the lattice light, `Ω = √(4|Δ||U0|/ħ)`.
pub fn rabi_frequency(config: &LatticeConfig) -> f64 {
    (4.0 * config.detuning.abs() * config.depth.abs() / HBAR).sqrt()
}

/// Steady-state two-level scattering rate into the detected channel at
/// phase `kz` of the standing wave.
pub fn scattering_rate(kz: f64, rabi: f64, config: &LatticeConfig, species: &IonSpecies) -> f64 {
    let drive = 0.5 * (rabi * kz.sin()).powi(2);
    let denom = 0.25 * species.gamma_p_total.powi(2) + drive + config.detuning.powi(2);
    0.5 * species.gamma_397 * drive / denom
}

/// Far-detuned scattering rate of an ion sitting at an antinode, for a
/// lattice of depth `|U0| = fraction·|config.depth|`.
///
/// Without intensity data this is `Γ_397·Ω²/(4Δ²) = Γ_397·|U0|/(ħ|Δ|)`. When
/// both the antinode intensity and a cross-section are configured, the
/// photon-flux form `I·σ/(ħω)` with the optical angular frequency `ω = ck`
/// is used instead. An optional second channel to the upper fine-structure
/// level adds `coupling·(Δ/(Δ − Δ_fs))²` times the primary rate.
pub fn antinode_rate(fraction: f64, config: &LatticeConfig, species: &IonSpecies) -> f64 {
    let u0 = fraction * config.depth.abs();
    let base = match (config.antinode_intensity, config.cross_section_397) {
        (Some(i), Some(sigma)) => {
            let omega_light = SPEED_OF_LIGHT * config.wavevector;
            fraction * i * sigma / (HBAR * omega_light)
        }
        _ => species.gamma_397 * u0 / (HBAR * config.detuning.abs()),
    };
    let upper = match species.fine_structure_splitting {
        Some(fs) if config.upper_level_coupling > 0.0 => {
            let ratio = config.detuning / (config.detuning - fs);
            config.upper_level_coupling * ratio * ratio
        }
        _ => 0.0,
    };
    base * (1.0 + upper)
}

/// Position-averaged scattering rate at time `t` of the ramp.
pub fn mean_scattering_rate(
    t: f64,
    t0: f64,
    ramp: &RampProfile,
    config: &LatticeConfig,
    species: &IonSpecies,
) -> Result<f64, PendulumError> {
    let fraction = ramp.fraction(t);
    if fraction == 0.0 || config.depth == 0.0 {
        return Ok(0.0);
    }
    let overlap = intensity_overlap(t0, fraction * config.depth)?;
    Ok(antinode_rate(fraction, config, species) * overlap)
}

/// `∫₀^{t_end} ⟨Γ_sc⟩(t) dt`.
pub fn integrated_rate(
    t_end: f64,
    t0: f64,
    ramp: &RampProfile,
    config: &LatticeConfig,
    species: &IonSpecies,
) -> Result<f64, PendulumError> {
    if !(t_end >= 0.0) {
        return Err(domain("t0", t_end));
    }
    if !(t0 > 0.0) {
        return Err(domain("T0", t0));
    }
    ramp.validate()?;
    if t_end == 0.0 || config.depth == 0.0 {
        return Ok(0.0);
    }
    let knots: Vec<f64> = ramp.breakpoints().into_iter().filter(|&b| b < t_end).collect();
    let mut edges = vec![0.0];
    edges.extend(knots);
    edges.push(t_end);

    let mut total = 0.0;
    for w in edges.windows(2) {
        let failure = RefCell::new(None);
        let r = integrate_with_endpoint_singularity(
            |t| match mean_scattering_rate(t, t0, ramp, config, species) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            w[0],
            w[1],
            &[],
            TIME_INTEGRAL_TOL,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        total += r?.value;
    }
    Ok(total)
}

/// Probability of having scattered a photon by time `t_end`,
/// `1 − exp(−∫⟨Γ_sc⟩dt)`, for an ion initially in the addressed state.
pub fn scattering_probability(
    t_end: f64,
    t0: f64,
    ramp: &RampProfile,
    config: &LatticeConfig,
    species: &IonSpecies,
) -> Result<f64, PendulumError> {
    if let Some(ratio) = adiabaticity_shortfall(ramp, config, species) {
        log::warn!(
            "lattice ramp spans only {ratio:.2} small-oscillation periods (< {ADIABATIC_PERIODS}); \
             the adiabatic model may not apply"
        );
    }
    scattering_probability_quiet(t_end, t0, ramp, config, species, 1.0)
}

/// As [`scattering_probability`] with initial occupancy `P(0)` and no
/// adiabaticity warning.
pub fn scattering_probability_quiet(
    t_end: f64,
    t0: f64,
    ramp: &RampProfile,
    config: &LatticeConfig,
    species: &IonSpecies,
    initial_occupancy: f64,
) -> Result<f64, PendulumError> {
    if !(0.0..=1.0).contains(&initial_occupancy) {
        return Err(domain("P(0)", initial_occupancy));
    }
    let optical_depth = integrated_rate(t_end, t0, ramp, config, species)?;
    Ok(-initial_occupancy * (-optical_depth).exp_m1())
}

/// Number of small-oscillation periods in the ramp when it is below
/// [`ADIABATIC_PERIODS`], `None` otherwise.
pub fn adiabaticity_shortfall(ramp: &RampProfile, config: &LatticeConfig, species: &IonSpecies) -> Option<f64> {
    let nu = config.vibrational_frequency(species.mass);
    let periods = ramp.ramp_duration * nu;
    (nu > 0.0 && periods < ADIABATIC_PERIODS).then_some(periods)
}

/// Phase window of one lattice well, `[−π/2, π/2]`.
pub const WELL: (f64, f64) = (-FRAC_PI_2, FRAC_PI_2);
