//! Multi-ion scattering statistics.
//!
//! Every ion is treated as an independent pendulum whose lattice depth is
//! reduced by the Gaussian beam profile at its radial position. The number of
//! ions that scatter in a sequence is then binomial.

use std::io::Write;

use crate::crystal::CrystalState;
use crate::format;
use crate::params::{IonSpecies, LatticeConfig, ParamError, RampProfile};
use crate::pendulum::{self, PendulumError};
use crate::specfun::integrate_with_endpoint_singularity;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("{what} = {value} is invalid")]
    Domain { what: &'static str, value: f64 },
    #[error("depth grid must be non-empty and ascending")]
    Grid,
    #[error(transparent)]
    Pendulum(#[from] PendulumError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("writing CSV: {0}")]
    Io(String),
}

fn domain(what: &'static str, value: f64) -> EnsembleError {
    EnsembleError::Domain { what, value }
}

/// Gaussian lattice beam propagating along the trap axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProfile {
    /// 1/e² intensity radius, m.
    pub waist_radius: f64,
}

impl BeamProfile {
    pub fn new(waist_radius: f64) -> Result<Self, EnsembleError> {
        if !(waist_radius > 0.0 && waist_radius.is_finite()) {
            return Err(domain("waist_radius", waist_radius));
        }
        Ok(Self { waist_radius })
    }

    /// 37 µm waist.
    pub fn experiment() -> Self {
        Self { waist_radius: 37e-6 }
    }

    /// Relative depth `exp(−2r²/w²)` at radial distance `r`.
    pub fn depth_factor(&self, r: f64) -> f64 {
        (-2.0 * r * r / (self.waist_radius * self.waist_radius)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringScenario {
    pub crystal: CrystalState,
    pub species: IonSpecies,
    /// Lattice at full depth on the beam axis.
    pub lattice: LatticeConfig,
    pub ramp: RampProfile,
    /// Initial temperature, K.
    pub t0: f64,
    /// Probability that an ion starts in the lattice-coupled state.
    pub pumping_efficiency: f64,
}

impl ScatteringScenario {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        self.species.validate()?;
        self.lattice.validate()?;
        self.ramp.validate()?;
        if !(self.t0 > 0.0) {
            return Err(domain("T0", self.t0));
        }
        if !(0.0..=1.0).contains(&self.pumping_efficiency) {
            return Err(domain("pumping_efficiency", self.pumping_efficiency));
        }
        Ok(())
    }
}

/// Signed per-ion depths `U0·exp(−2(x²+y²)/w²)`.
pub fn per_ion_depths(crystal: &CrystalState, lattice: &LatticeConfig, beam: &BeamProfile) -> Vec<f64> {
    crystal.positions.iter().map(|p| lattice.depth * beam.depth_factor(p[0].hypot(p[1]))).collect()
}

/// Distinct depths with their multiplicities, so identical ions are
/// evaluated once.
fn grouped(depths: &[f64]) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &d in depths {
        match out.iter_mut().find(|(v, _)| *v == d) {
            Some(e) => e.1 += 1,
            None => out.push((d, 1)),
        }
    }
    out
}

fn warn_if_fast(scenario: &ScatteringScenario) {
    if let Some(periods) = pendulum::adiabaticity_shortfall(&scenario.ramp, &scenario.lattice, &scenario.species) {
        log::warn!(
            "lattice ramp spans only {periods:.2} small-oscillation periods; the adiabatic model may not apply"
        );
    }
}

fn probability_at(scenario: &ScatteringScenario, depth: f64) -> Result<f64, EnsembleError> {
    if depth == 0.0 {
        return Ok(0.0);
    }
    let cfg = scenario.lattice.with_depth(depth);
    Ok(pendulum::scattering_probability_quiet(
        scenario.ramp.duration(),
        scenario.t0,
        &scenario.ramp,
        &cfg,
        &scenario.species,
        scenario.pumping_efficiency,
    )?)
}

fn mean_over_ions(
    depths: &[f64],
    mut f: impl FnMut(f64) -> Result<f64, EnsembleError>,
) -> Result<f64, EnsembleError> {
    let mut total = 0.0;
    for (d, count) in grouped(depths) {
        total += count as f64 * f(d)?;
    }
    Ok(total / depths.len() as f64)
}

/// Ion-averaged probability of scattering at least one photon during the
/// full ramp and hold.
pub fn mean_scattering_probability_per_ion(
    scenario: &ScatteringScenario,
    beam: &BeamProfile,
) -> Result<f64, EnsembleError> {
    scenario.validate()?;
    warn_if_fast(scenario);
    let depths = per_ion_depths(&scenario.crystal, &scenario.lattice, beam);
    mean_over_ions(&depths, |d| probability_at(scenario, d))
}

/// Binomial distribution of the number of scattering ions, indices `0..=N`.
pub fn scatter_count_pmf(n: usize, p: f64) -> Result<Vec<f64>, EnsembleError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p));
    }
    let mut pmf = vec![0.0; n + 1];
    if p == 0.0 {
        pmf[0] = 1.0;
        return Ok(pmf);
    }
    if p == 1.0 {
        pmf[n] = 1.0;
        return Ok(pmf);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut log_choose = 0.0;
    for (k, v) in pmf.iter_mut().enumerate() {
        if k > 0 {
            log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        *v = (log_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
    }
    Ok(pmf)
}

/// Share of photons that are not the first one of the sequence,
/// `f = 1 − (1 − (1−p)^N)/(N·p)`.
pub fn subsequent_fraction(n: usize, p: f64) -> Result<f64, EnsembleError> {
    if n == 0 {
        return Err(domain("N", 0.0));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p));
    }
    if p == 0.0 || n == 1 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let any = -(nf * (-p).ln_1p()).exp_m1();
    Ok(1.0 - any / (nf * p))
}

/// One row of [`scan_depth`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    /// On-axis `|U0|`, J.
    pub depth: f64,
    /// Small-oscillation frequency at that depth, Hz.
    pub nu_latt: f64,
    pub p_per_ion: f64,
    pub subsequent_fraction: f64,
    /// Ion-averaged bunching at full depth.
    pub bunching: f64,
    /// Same sequence for ions that stay delocalized (`B = 1/2`).
    pub p_delocalized: f64,
}

/// Evaluates the scenario at each on-axis depth magnitude of `depth_grid`
/// (J); the sign follows the scenario's detuning.
pub fn scan_depth(
    scenario: &ScatteringScenario,
    beam: &BeamProfile,
    depth_grid: &[f64],
) -> Result<Vec<ScanRow>, EnsembleError> {
    scenario.validate()?;
    if depth_grid.is_empty() || depth_grid.windows(2).any(|w| !(w[1] > w[0])) || !(depth_grid[0] >= 0.0) {
        return Err(EnsembleError::Grid);
    }
    let sign = if scenario.lattice.detuning < 0.0 { -1.0 } else { 1.0 };
    let n = scenario.crystal.n();
    let ramp_area = ramp_area(&scenario.ramp)?;
    // The shallowest non-zero depth is the least adiabatic.
    if let Some(&d) = depth_grid.iter().find(|&&d| d > 0.0) {
        warn_if_fast(&ScatteringScenario { lattice: scenario.lattice.with_depth(sign * d), ..scenario.clone() });
    }
    let mut rows = Vec::with_capacity(depth_grid.len());
    for &depth in depth_grid {
        let s = ScatteringScenario { lattice: scenario.lattice.with_depth(sign * depth), ..scenario.clone() };
        let depths = per_ion_depths(&s.crystal, &s.lattice, beam);
        let p = mean_over_ions(&depths, |d| probability_at(&s, d))?;
        let bunching = mean_over_ions(&depths, |d| {
            if d == 0.0 {
                Ok(0.5)
            } else {
                Ok(pendulum::bunching(s.t0, d.abs())?)
            }
        })?;
        let p_delocalized = mean_over_ions(&depths, |d| {
            let rate = pendulum::antinode_rate(1.0, &s.lattice.with_depth(d), &s.species);
            Ok(-s.pumping_efficiency * (-0.5 * rate * ramp_area).exp_m1())
        })?;
        rows.push(ScanRow {
            depth,
            nu_latt: s.lattice.vibrational_frequency(s.species.mass),
            p_per_ion: p,
            subsequent_fraction: subsequent_fraction(n, p)?,
            bunching,
            p_delocalized,
        });
    }
    Ok(rows)
}

/// `∫ U0(t)/U0 dt` over ramp and hold, s.
fn ramp_area(ramp: &RampProfile) -> Result<f64, EnsembleError> {
    let mut edges = vec![0.0];
    edges.extend(ramp.breakpoints().into_iter().filter(|&b| b > 0.0 && b < ramp.duration()));
    edges.push(ramp.duration());
    let mut total = 0.0;
    for w in edges.windows(2) {
        let r = integrate_with_endpoint_singularity(|t| ramp.fraction(t), w[0], w[1], &[], 1e-16)
            .map_err(PendulumError::from)?;
        total += r.value;
    }
    Ok(total)
}

pub const SCAN_HEADER: [&str; 5] = ["depth_mK", "nu_latt_MHz", "p_per_ion", "subsequent_fraction", "bunching"];

/// Writes the scan as CSV with nine significant digits.
pub fn write_scan_csv<W: Write>(mut w: W, rows: &[ScanRow]) -> Result<(), EnsembleError> {
    let io = |e: std::io::Error| EnsembleError::Io(e.to_string());
    writeln!(w, "{}", SCAN_HEADER.join(",")).map_err(io)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            format::csv(r.depth / crate::constants::BOLTZMANN * 1e3),
            format::csv(r.nu_latt * 1e-6),
            format::csv(r.p_per_ion),
            format::csv(r.subsequent_fraction),
            format::csv(r.bunching),
        )
        .map_err(io)?;
    }
    Ok(())
}
