//! Crystal temperature from fluorescence spot widths.
//!
//! Each ion's image, integrated along the orthogonal direction, is a Gaussian
//! whose variance is the thermal position variance convolved with the
//! imaging resolution: `σ² = (kB·T/(M·ωz²))·γ² + σ_res²`. Spot widths are
//! obtained by [`fit_gaussian`] and combined into a single `T` by weighted
//! least squares.

mod fit;
mod io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::constants::BOLTZMANN;
use crate::crystal::{CrystalError, CrystalState, GammaTable, ModeDecomposition};
use crate::params::{IonSpecies, ParamError, TrapConfig};

pub use fit::{fit_gaussian, GaussianFit, GaussianParams, MIN_SIGMA_PX, Z95};
pub use io::{read_spot_profiles, write_spot_profiles, SpotProfile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThermometryError {
    #[error("profile has {got} samples; at least 5 are needed")]
    TooFewSamples { got: usize },
    #[error("profile is constant")]
    ConstantProfile,
    #[error("profile contains non-finite values")]
    NonFinite,
    #[error("fitted width {sigma:.3} px is below a quarter pixel")]
    DegenerateFit { sigma: f64 },
    #[error("Gaussian fit did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize, best: GaussianParams },
    #[error("profile spans {span:.2} px, less than 4σ = {four_sigma:.2} px")]
    NarrowProfile { span: f64, four_sigma: f64 },
    #[error("no spots to analyse")]
    NoSpots,
    #[error("no γ entry for ion {ion}")]
    MissingGamma { ion: usize },
    #[error("thermal variance is negative: every spot is narrower than the resolution (deficits {deficits:?} m²)")]
    NegativeThermalVariance { deficits: Vec<f64> },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{what} = {value} is invalid")]
    Domain { what: &'static str, value: f64 },
    #[error("spots CSV line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error(transparent)]
    Crystal(#[from] CrystalError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Imaging resolution and camera sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingConfig {
    /// Point-spread standard deviation along the trap axis, m.
    pub sigma_res_axial: f64,
    /// Point-spread standard deviation along the radial view, m.
    pub sigma_res_radial: f64,
    /// Object-plane size of one pixel, m.
    pub pixel_pitch: f64,
}

impl ImagingConfig {
    /// 2.23 µm / 2.09 µm resolution, 0.92 µm pixels.
    pub fn experiment() -> Self {
        Self { sigma_res_axial: 2.23e-6, sigma_res_radial: 2.09e-6, pixel_pitch: 0.92e-6 }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("sigma_res_axial", self.sigma_res_axial),
            ("sigma_res_radial", self.sigma_res_radial),
            ("pixel_pitch", self.pixel_pitch),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new(name, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn sigma_res(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Axial => self.sigma_res_axial,
            Axis::Radial => self.sigma_res_radial,
        }
    }
}

/// Image direction of a spot profile. `Radial` is the 45° projection of the
/// two radial axes seen by the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Axial,
    Radial,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Axial => "axial",
            Axis::Radial => "radial",
        }
    }
}

/// A fitted spot profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotMeasurement {
    pub ion_index: usize,
    pub axis: Axis,
    /// `(pixel, counts)`.
    pub profile: Vec<(f64, f64)>,
    /// m
    pub fitted_center: f64,
    /// m
    pub fitted_sigma: f64,
    /// 95 % half-width on `fitted_sigma`, m.
    pub sigma_ci95: f64,
    /// Another ion lies within 2σ along this axis.
    pub overlapping: bool,
}

impl SpotMeasurement {
    /// Fits `profile` and checks that it spans at least 4σ.
    pub fn fit(
        ion_index: usize,
        axis: Axis,
        profile: Vec<(f64, f64)>,
        imaging: &ImagingConfig,
    ) -> Result<Self, ThermometryError> {
        let f = fit_gaussian(&profile)?;
        let (lo, hi) = profile.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.0), h.max(p.0)));
        if hi - lo < 4.0 * f.params.sigma {
            return Err(ThermometryError::NarrowProfile { span: hi - lo, four_sigma: 4.0 * f.params.sigma });
        }
        let px = imaging.pixel_pitch;
        Ok(Self {
            ion_index,
            axis,
            profile,
            fitted_center: f.params.center * px,
            fitted_sigma: f.params.sigma * px,
            sigma_ci95: f.ci95.sigma * px,
            overlapping: false,
        })
    }
}

/// Fits every profile with [`SpotMeasurement::fit`].
pub fn fit_spots(profiles: Vec<SpotProfile>, imaging: &ImagingConfig) -> Result<Vec<SpotMeasurement>, ThermometryError> {
    profiles.into_iter().map(|p| SpotMeasurement::fit(p.ion_index, p.axis, p.profile, imaging)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureEstimate {
    /// K
    pub t: f64,
    /// 95 % half-width, K.
    pub ci95: f64,
    /// Measured minus modelled variance per analysed spot, m².
    pub per_ion_residuals: Vec<f64>,
    /// Spots that entered the fit, as `(ion_index, axis)`.
    pub used: Vec<(usize, Axis)>,
}

fn gamma_for(gamma: &GammaTable, ion: usize, axis: Axis) -> Result<f64, ThermometryError> {
    let g = match axis {
        Axis::Axial => gamma.gamma.get(ion).map(|g| g[2]),
        Axis::Radial => gamma.gamma_radial_projected.get(ion).copied(),
    };
    g.ok_or(ThermometryError::MissingGamma { ion })
}

/// Thermal variance per kelvin for `γ = 1`, `kB/(M·ωz²)` in m²/K.
pub fn variance_per_kelvin(trap: &TrapConfig, species: &IonSpecies) -> f64 {
    BOLTZMANN / (species.mass * trap.omega_z * trap.omega_z)
}

/// Single-parameter weighted fit of `T` to the axial spots.
pub fn estimate_temperature(
    spots: &[SpotMeasurement],
    gamma: &GammaTable,
    trap: &TrapConfig,
    species: &IonSpecies,
    imaging: &ImagingConfig,
) -> Result<TemperatureEstimate, ThermometryError> {
    estimate_temperature_axes(spots, gamma, trap, species, imaging, &[Axis::Axial])
}

/// As [`estimate_temperature`] over the listed axes. Each spot is weighted
/// by the inverse square of the 95 % half-width of its variance.
pub fn estimate_temperature_axes(
    spots: &[SpotMeasurement],
    gamma: &GammaTable,
    trap: &TrapConfig,
    species: &IonSpecies,
    imaging: &ImagingConfig,
    axes: &[Axis],
) -> Result<TemperatureEstimate, ThermometryError> {
    imaging.validate()?;
    let a = variance_per_kelvin(trap, species);
    let mut rows = Vec::new();
    for s in spots.iter().filter(|s| axes.contains(&s.axis)) {
        let g = gamma_for(gamma, s.ion_index, s.axis)?;
        let res2 = imaging.sigma_res(s.axis).powi(2);
        let v = s.fitted_sigma * s.fitted_sigma;
        let v_ci = 2.0 * s.fitted_sigma * s.sigma_ci95;
        let w = if v_ci > 0.0 { 1.0 / (v_ci * v_ci) } else { f64::INFINITY };
        rows.push((s, a * g * g, v - res2, w, res2));
    }
    if rows.is_empty() {
        return Err(ThermometryError::NoSpots);
    }
    // Exact spots (zero CI) dominate; fall back to equal weights among them.
    let exact = rows.iter().any(|r| r.3.is_infinite());
    let weight = |w: f64| if exact { if w.is_infinite() { 1.0 } else { 0.0 } } else { w };

    let narrow = |r: &(&SpotMeasurement, f64, f64, f64, f64)| r.2 < -1e-9 * r.4;
    if rows.iter().all(narrow) {
        return Err(ThermometryError::NegativeThermalVariance { deficits: rows.iter().map(|r| -r.2).collect() });
    }
    let sxx: f64 = rows.iter().map(|r| weight(r.3) * r.1 * r.1).sum();
    let sxy: f64 = rows.iter().map(|r| weight(r.3) * r.1 * r.2).sum();
    if !(sxx > 0.0) {
        return Err(ThermometryError::Domain { what: "Σ w·(aγ²)²", value: sxx });
    }
    let t = (sxy / sxx).max(0.0);
    let residuals: Vec<f64> = rows.iter().map(|r| r.2 - r.1 * t).collect();
    let ci95 = if exact {
        0.0
    } else {
        let n = rows.iter().filter(|r| r.3 > 0.0).count();
        let chi2: f64 = rows.iter().zip(&residuals).map(|(r, e)| r.3 * (Z95 * e).powi(2)).sum();
        let inflate = if n > 1 { (chi2 / (n - 1) as f64).max(1.0) } else { 1.0 };
        // Weights are in 95 % units already.
        (inflate / sxx).sqrt()
    };
    Ok(TemperatureEstimate {
        t,
        ci95,
        per_ion_residuals: residuals,
        used: rows.iter().map(|r| (r.0.ion_index, r.0.axis)).collect(),
    })
}

/// Controls for [`synthesize_spots`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpotSynthesis {
    /// Expected detected photons per spot.
    pub photon_budget: f64,
    /// Expected background counts per pixel.
    pub background: f64,
    /// Apply Poisson noise; otherwise profiles are the exact expectation.
    pub poisson: bool,
    pub seed: u64,
    pub axes: Vec<Axis>,
}

impl Default for SpotSynthesis {
    fn default() -> Self {
        Self { photon_budget: 1e4, background: 5.0, poisson: true, seed: 0, axes: vec![Axis::Axial, Axis::Radial] }
    }
}

/// Synthetic spot profiles for a crystal at temperature `T`.
///
/// The expected counts are the Gaussian of [`crate::crystal::spot_variance_model`]
/// evaluated at pixel centres (point sampling). Each spot window spans ±6σ
/// around the ion. The returned measurements carry the fit of the sampled
/// profile.
pub fn synthesize_spots(
    t: f64,
    state: &CrystalState,
    gamma: &GammaTable,
    trap: &TrapConfig,
    species: &IonSpecies,
    imaging: &ImagingConfig,
    opts: &SpotSynthesis,
) -> Result<Vec<SpotMeasurement>, ThermometryError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(ThermometryError::Domain { what: "T", value: t });
    }
    if !(opts.photon_budget > 0.0) {
        return Err(ThermometryError::Domain { what: "photon_budget", value: opts.photon_budget });
    }
    if !(opts.background >= 0.0) {
        return Err(ThermometryError::Domain { what: "background", value: opts.background });
    }
    imaging.validate()?;
    let px = imaging.pixel_pitch;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut spots = Vec::new();
    for &axis in &opts.axes {
        let coord = |p: &[f64; 3]| match axis {
            Axis::Axial => p[2],
            Axis::Radial => (p[0] + p[1]) / std::f64::consts::SQRT_2,
        };
        let sigmas: Vec<f64> = (0..state.n())
            .map(|i| {
                let g = gamma_for(gamma, i, axis)?;
                Ok(crate::crystal::spot_variance_model(t, g, trap, species, imaging.sigma_res(axis))?.sqrt())
            })
            .collect::<Result<_, ThermometryError>>()?;
        for (i, p) in state.positions.iter().enumerate() {
            let c = coord(p);
            let sigma = sigmas[i];
            let overlapping = state.positions.iter().enumerate().any(|(j, q)| {
                j != i && (coord(q) - c).abs() < 2.0 * sigma.max(sigmas[j])
            });
            let amplitude = opts.photon_budget * px / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
            let lo = ((c - 6.0 * sigma) / px).floor() as i64;
            let hi = ((c + 6.0 * sigma) / px).ceil() as i64;
            let mut profile = Vec::with_capacity((hi - lo + 1) as usize);
            for k in lo..=hi {
                let u = (k as f64 * px - c) / sigma;
                let mean = amplitude * (-0.5 * u * u).exp() + opts.background;
                let counts = if opts.poisson && mean > 0.0 {
                    Poisson::new(mean).map_err(|_| ThermometryError::Domain { what: "mean counts", value: mean })?.sample(&mut rng)
                } else {
                    mean
                };
                profile.push((k as f64, counts));
            }
            let mut s = SpotMeasurement::fit(i, axis, profile, imaging)?;
            s.overlapping = overlapping;
            spots.push(s);
        }
    }
    Ok(spots)
}

/// Per-ion, per-axis temperatures `T_{m,u} = Σ_p (b_{u,m}^p)²·T_p`.
pub fn ion_temperature_from_mode_temperatures(
    modes: &ModeDecomposition,
    mode_temperatures: &[f64],
) -> Result<Vec<[f64; 3]>, ThermometryError> {
    let dim = modes.eigenvalues.len();
    if mode_temperatures.len() != dim {
        return Err(ThermometryError::LengthMismatch { expected: dim, got: mode_temperatures.len() });
    }
    let n = modes.n();
    let b = &modes.coordinates;
    let mut out = vec![[0.0; 3]; n];
    for (p, &tp) in mode_temperatures.iter().enumerate() {
        for (m, row) in out.iter_mut().enumerate() {
            for (u, t) in row.iter_mut().enumerate() {
                *t += b[(u * n + m, p)].powi(2) * tp;
            }
        }
    }
    Ok(out)
}
