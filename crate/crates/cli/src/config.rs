//! Run configuration: TOML (or JSON with the same schema), every physical
//! quantity written with a unit and converted to SI on load.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use ion_lattice::constants::BOLTZMANN;
use ion_lattice::crystal::ContinuationOptions;
use ion_lattice::ensemble::BeamProfile;
use ion_lattice::params::depth_for_frequency;
use ion_lattice::thermometry::{Axis, ImagingConfig};
use ion_lattice::{IonSpecies, LatticeConfig, RampProfile, TrapConfig};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::units::{parse, Kind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default)]
    species: RawSpecies,
    trap: RawTrap,
    lattice: Option<RawLattice>,
    ramp: Option<RawRamp>,
    crystal: RawCrystal,
    modes: Option<RawModes>,
    scatter: Option<RawScatter>,
    thermometry: Option<RawThermometry>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecies {
    preset: Option<String>,
    mass: Option<String>,
    /// Total linewidth Γ/2π of the excited state.
    linewidth: Option<String>,
    /// Fraction of decays into the detected channel.
    detected_branching: Option<f64>,
    branching_leave: Option<f64>,
    lattice_transition_wavelength: Option<String>,
    detection_wavelength: Option<String>,
    fine_structure_splitting: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    axial: String,
    radial: String,
    #[serde(default)]
    asymmetry: f64,
    rf: String,
    q_radial: Option<f64>,
    q_axial: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    wavelength: Option<String>,
    /// Signed Δ/2π; positive is blue.
    detuning: String,
    max_depth: Option<String>,
    max_frequency: Option<String>,
    waist: Option<String>,
    phase: Option<String>,
    upper_level_coupling: Option<f64>,
    antinode_intensity: Option<String>,
    cross_section: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRamp {
    duration: String,
    hold: String,
    shape: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrystal {
    ions: usize,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModes {
    steps: Option<usize>,
    min_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScatter {
    initial_temperature: String,
    pumping_efficiency: Option<f64>,
    steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThermometry {
    sigma_res_axial: Option<String>,
    sigma_res_radial: Option<String>,
    pixel_pitch: Option<String>,
    axes: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    format: Option<String>,
}

/// Lattice settings in SI, at full depth.
#[derive(Debug, Clone)]
pub struct LatticeSettings {
    pub config: LatticeConfig,
    pub beam: BeamProfile,
}

#[derive(Debug, Clone)]
pub struct ScatterSettings {
    pub initial_temperature: f64,
    pub pumping_efficiency: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct Config {
    /// sha256 of the file bytes, hex.
    pub hash: String,
    pub species: IonSpecies,
    pub trap: TrapConfig,
    pub lattice: Option<LatticeSettings>,
    pub ramp: RampProfile,
    pub ions: usize,
    pub seed: u64,
    pub modes: ContinuationOptions,
    pub scatter: Option<ScatterSettings>,
    pub imaging: ImagingConfig,
    pub thermometry_axes: Vec<Axis>,
    pub output_dir: Option<PathBuf>,
}

impl Config {
    pub fn lattice(&self) -> Result<&LatticeSettings, CliError> {
        self.lattice.as_ref().ok_or_else(|| CliError::config("this command needs a [lattice] section"))
    }

    pub fn scatter(&self) -> Result<&ScatterSettings, CliError> {
        self.scatter.as_ref().ok_or_else(|| CliError::config("this command needs a [scatter] section"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::config(format!("{}: not UTF-8", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let raw: RawConfig = if is_json {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    };
    resolve(raw, sha256_hex(&bytes))
}

fn opt(key: &str, v: &Option<String>, kind: Kind) -> Result<Option<f64>, CliError> {
    v.as_deref().map(|t| parse(key, t, kind)).transpose()
}

fn param<T>(r: Result<T, ion_lattice::ParamError>, section: &str) -> Result<T, CliError> {
    r.map_err(|e| CliError::config(format!("{section}.{e}")))
}

fn resolve(raw: RawConfig, hash: String) -> Result<Config, CliError> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "schema_version: {} is not supported (expected {SCHEMA_VERSION})",
            raw.schema_version
        )));
    }

    let s = &raw.species;
    let mut species = match s.preset.as_deref().unwrap_or("ca40") {
        "ca40" => IonSpecies::calcium40(),
        other => return Err(CliError::config(format!("species.preset: unknown preset `{other}` (known: ca40)"))),
    };
    if let Some(m) = opt("species.mass", &s.mass, Kind::Mass)? {
        species.mass = m;
    }
    let branching = s.detected_branching.unwrap_or(species.gamma_397 / species.gamma_p_total);
    if let Some(lw) = opt("species.linewidth", &s.linewidth, Kind::Frequency)? {
        species.gamma_p_total = TAU * lw;
    }
    species.gamma_397 = branching * species.gamma_p_total;
    if let Some(b) = s.branching_leave {
        species.branching_leave = b;
    }
    if let Some(w) = opt("species.lattice_transition_wavelength", &s.lattice_transition_wavelength, Kind::Length)? {
        species.lattice_transition_wavelength = w;
    }
    if let Some(w) = opt("species.detection_wavelength", &s.detection_wavelength, Kind::Length)? {
        species.detection_wavelength = w;
    }
    if let Some(f) = opt("species.fine_structure_splitting", &s.fine_structure_splitting, Kind::Frequency)? {
        species.fine_structure_splitting = Some(TAU * f);
    }
    param(species.validate(), "species")?;

    let t = &raw.trap;
    let mut trap = TrapConfig::from_hz(
        parse("trap.axial", &t.axial, Kind::Frequency)?,
        parse("trap.radial", &t.radial, Kind::Frequency)?,
        t.asymmetry,
        parse("trap.rf", &t.rf, Kind::Frequency)?,
    );
    trap.q_radial = t.q_radial;
    trap.q_axial = t.q_axial;
    param(trap.validate(), "trap")?;

    let lattice = raw.lattice.as_ref().map(|l| resolve_lattice(l, &species)).transpose()?;

    let ramp = match &raw.ramp {
        None => RampProfile::experiment(),
        Some(r) => {
            match r.shape.as_deref().unwrap_or("linear") {
                "linear" => {}
                other => return Err(CliError::config(format!("ramp.shape: `{other}` is not supported (linear)"))),
            }
            RampProfile::linear(parse("ramp.duration", &r.duration, Kind::Time)?, parse("ramp.hold", &r.hold, Kind::Time)?)
        }
    };
    param(ramp.validate(), "ramp")?;

    if raw.crystal.ions == 0 {
        return Err(CliError::config("crystal.ions: must be at least 1"));
    }
    let seed = raw.crystal.seed.ok_or_else(|| CliError::config("crystal.seed: a seed is required"))?;

    let mut modes = ContinuationOptions { seed, ..Default::default() };
    if let Some(m) = &raw.modes {
        if let Some(steps) = m.steps {
            if steps < 2 {
                return Err(CliError::config("modes.steps: must be at least 2"));
            }
            modes.steps = steps;
        }
        if let Some(f) = m.min_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::config("modes.min_fraction: must lie in (0, 1)"));
            }
            modes.min_fraction = f;
        }
    }

    let scatter = raw
        .scatter
        .as_ref()
        .map(|s| -> Result<ScatterSettings, CliError> {
            let t0 = parse("scatter.initial_temperature", &s.initial_temperature, Kind::Temperature)?;
            if !(t0 > 0.0) {
                return Err(CliError::config("scatter.initial_temperature: must be positive"));
            }
            let eff = s.pumping_efficiency.unwrap_or(1.0);
            if !(0.0..=1.0).contains(&eff) {
                return Err(CliError::config("scatter.pumping_efficiency: must lie in [0, 1]"));
            }
            let steps = s.steps.unwrap_or(26);
            if steps == 0 {
                return Err(CliError::config("scatter.steps: must be at least 1"));
            }
            Ok(ScatterSettings { initial_temperature: t0, pumping_efficiency: eff, steps })
        })
        .transpose()?;

    let mut imaging = ImagingConfig::experiment();
    let mut thermometry_axes = vec![Axis::Axial];
    if let Some(th) = &raw.thermometry {
        if let Some(v) = opt("thermometry.sigma_res_axial", &th.sigma_res_axial, Kind::Length)? {
            imaging.sigma_res_axial = v;
        }
        if let Some(v) = opt("thermometry.sigma_res_radial", &th.sigma_res_radial, Kind::Length)? {
            imaging.sigma_res_radial = v;
        }
        if let Some(v) = opt("thermometry.pixel_pitch", &th.pixel_pitch, Kind::Length)? {
            imaging.pixel_pitch = v;
        }
        if let Some(axes) = &th.axes {
            thermometry_axes = axes
                .iter()
                .map(|a| match a.as_str() {
                    "axial" => Ok(Axis::Axial),
                    "radial" => Ok(Axis::Radial),
                    other => Err(CliError::config(format!("thermometry.axes: `{other}` is neither axial nor radial"))),
                })
                .collect::<Result<_, _>>()?;
            if thermometry_axes.is_empty() {
                return Err(CliError::config("thermometry.axes: list at least one axis"));
            }
        }
    }
    param(imaging.validate(), "thermometry")?;

    let output_dir = match &raw.output {
        Some(o) => {
            if let Some(f) = &o.format {
                if f != "csv" {
                    return Err(CliError::config(format!("output.format: `{f}` is not supported (csv)")));
                }
            }
            o.directory.as_ref().map(PathBuf::from)
        }
        None => None,
    };

    Ok(Config {
        hash,
        species,
        trap,
        lattice,
        ramp,
        ions: raw.crystal.ions,
        seed,
        modes,
        scatter,
        imaging,
        thermometry_axes,
        output_dir,
    })
}

fn resolve_lattice(l: &RawLattice, species: &IonSpecies) -> Result<LatticeSettings, CliError> {
    let wavelength =
        opt("lattice.wavelength", &l.wavelength, Kind::Length)?.unwrap_or(species.lattice_transition_wavelength);
    let detuning = TAU * parse("lattice.detuning", &l.detuning, Kind::Frequency)?;
    if detuning == 0.0 {
        return Err(CliError::config("lattice.detuning: must be non-zero (its sign selects blue or red)"));
    }
    let mut config = LatticeConfig::from_temperature(0.0, wavelength, detuning);
    let magnitude = match (&l.max_depth, &l.max_frequency) {
        (Some(d), None) => parse("lattice.max_depth", d, Kind::Temperature)? * BOLTZMANN,
        (None, Some(f)) => depth_for_frequency(parse("lattice.max_frequency", f, Kind::Frequency)?, species.mass, config.wavevector),
        _ => return Err(CliError::config("lattice: give exactly one of max_depth and max_frequency")),
    };
    if !(magnitude >= 0.0) {
        return Err(CliError::config("lattice: the maximum depth must be non-negative"));
    }
    config.depth = detuning.signum() * magnitude;
    config.phase = opt("lattice.phase", &l.phase, Kind::Angle)?.unwrap_or(0.0);
    config.upper_level_coupling = l.upper_level_coupling.unwrap_or(0.0);
    config.antinode_intensity = opt("lattice.antinode_intensity", &l.antinode_intensity, Kind::Intensity)?;
    config.cross_section_397 = opt("lattice.cross_section", &l.cross_section, Kind::Area)?;
    param(config.validate(), "lattice")?;
    let waist = opt("lattice.waist", &l.waist, Kind::Length)?.unwrap_or(BeamProfile::experiment().waist_radius);
    let beam = BeamProfile::new(waist).map_err(|_| CliError::config("lattice.waist: must be positive"))?;
    Ok(LatticeSettings { config, beam })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[trap]
axial = "70 kHz"
radial = "350 kHz"
rf = "3.98 MHz"
[crystal]
ions = 2
seed = 1
"#;

    fn from_str(s: &str) -> Result<Config, CliError> {
        resolve(toml::from_str(s).map_err(|e| CliError::config(e.to_string()))?, sha256_hex(s.as_bytes()))
    }

    #[test]
    fn minimal_config() {
        let c = from_str(MINIMAL).unwrap();
        assert!((c.trap.omega_z - TAU * 70e3).abs() < 1e-9);
        assert_eq!(c.ions, 2);
        assert!(c.lattice.is_none());
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn seed_is_mandatory() {
        let e = from_str(&MINIMAL.replace("seed = 1\n", "")).unwrap_err().to_string();
        assert!(e.contains("crystal.seed"), "{e}");
    }

    #[test]
    fn unknown_and_unitless_keys_are_named() {
        let e = from_str(&MINIMAL.replace("ions = 2", "ions = 2\ncolour = 3")).unwrap_err().to_string();
        assert!(e.contains("colour"), "{e}");
        let e = from_str(&MINIMAL.replace("\"70 kHz\"", "\"70\"")).unwrap_err().to_string();
        assert!(e.contains("trap.axial"), "{e}");
    }

    #[test]
    fn lattice_depth_or_frequency() {
        let base = format!("{MINIMAL}[lattice]\ndetuning = \"-0.76 THz\"\n");
        let c = from_str(&format!("{base}max_depth = \"25 mK\"\n")).unwrap();
        let l = c.lattice.unwrap().config;
        assert!(l.depth < 0.0 && (l.temperature() - 25e-3).abs() < 1e-15);
        let c = from_str(&format!("{base}max_frequency = \"5 MHz\"\n")).unwrap();
        let l = c.lattice.unwrap().config;
        assert!((l.vibrational_frequency(c.species.mass) / 5e6 - 1.0).abs() < 1e-12);
        assert!(from_str(&base).is_err());
    }
}
