//! The five verbs. Each writes its artifacts into `out` and returns the
//! paths written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ion_lattice::constants::BOLTZMANN;
use ion_lattice::crystal::{
    classify, continuation_on_grid, default_nu_grid, equilibrium_seeded, gamma_parameters, normal_modes, CrystalState,
    GammaTable, Structure,
};
use ion_lattice::ensemble::{scan_depth, write_scan_csv, ScatteringScenario};
use ion_lattice::format::csv;
use ion_lattice::micromotion::excess_micromotion;
use ion_lattice::thermometry::{
    estimate_temperature_axes, fit_spots, read_spot_profiles, Axis, SpotMeasurement, ThermometryError,
};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::CliError;
use crate::grid::parse_grid;
use crate::units::Kind;

fn versions() -> Value {
    json!({ "ion-lattice": ion_lattice::VERSION, "ion-lattice-cli": env!("CARGO_PKG_VERSION") })
}

fn structure_name(s: Structure) -> String {
    match s {
        Structure::Single => "single".into(),
        Structure::Linear => "linear".into(),
        Structure::Planar => "planar".into(),
        Structure::ThreeDimensional { out_of_plane } => format!("three-dimensional ({out_of_plane} out of plane)"),
    }
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn write_json(path: PathBuf, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Seeded ground state, under the full-depth lattice when `with_lattice`.
fn crystal(cfg: &Config, with_lattice: bool) -> Result<CrystalState, CliError> {
    let lattice = if with_lattice { Some(&cfg.lattice()?.config) } else { None };
    equilibrium_seeded(cfg.ions, &cfg.trap, lattice, &cfg.species, None, cfg.seed)
        .map_err(|e| CliError::solver(format!("equilibrium: {e}")))
}

fn ground_state(cfg: &Config) -> Result<CrystalState, CliError> {
    crystal(cfg, false)
}

pub fn equilibrium(cfg: &Config, out: &Path, with_lattice: bool) -> Result<Vec<PathBuf>, CliError> {
    let state = crystal(cfg, with_lattice)?;
    if state.saddle {
        log::warn!("equilibrium is a saddle (lowest Hessian eigenvalue {:e})", state.min_hessian_eigenvalue);
    }
    // Coordinates below the solver resolution are written as zero.
    let floor = 1e-10 * state.length_scale;
    let um = |c: f64| csv(if c.abs() < floor { 0.0 } else { c * 1e6 });
    let mut text = String::from("ion,x_um,y_um,z_um\n");
    for (i, p) in state.positions.iter().enumerate() {
        writeln!(text, "{i},{},{},{}", um(p[0]), um(p[1]), um(p[2])).unwrap();
    }
    let meta = json!({
        "config_sha256": cfg.hash,
        "versions": versions(),
        "seed": cfg.seed,
        "ions": cfg.ions,
        "lattice_depth_mK": state.lattice_depth / BOLTZMANN * 1e3,
        "structure": structure_name(classify(&state.positions)),
        "saddle": state.saddle,
        "potential_energy_J": state.potential_value,
        "length_scale_um": state.length_scale * 1e6,
    });
    Ok(vec![
        write_file(out.join("positions.csv"), text.as_bytes())?,
        write_json(out.join("positions.meta.json"), &meta)?,
    ])
}

pub fn modes(cfg: &Config, out: &Path, grid: Option<&str>) -> Result<Vec<PathBuf>, CliError> {
    let lattice = &cfg.lattice()?.config;
    let nu_grid = match grid {
        Some(spec) => parse_grid(spec, Kind::Frequency, "MHz")?,
        None => default_nu_grid(lattice.vibrational_frequency(cfg.species.mass), cfg.modes.steps, cfg.modes.min_fraction),
    };
    let result = continuation_on_grid(cfg.ions, &cfg.trap, lattice, &cfg.species, &nu_grid, &cfg.modes)
        .map_err(|e| CliError::solver(format!("continuation: {e}")))?;

    let mut text = String::from("nu_latt_MHz,branch_id,freq_kHz,plane_weight,axial_weight\n");
    for (i, nu) in result.nu_grid.iter().enumerate() {
        for (b, branch) in result.branches.iter().enumerate() {
            writeln!(
                text,
                "{},{},{},{},{}",
                csv(nu * 1e-6),
                b + 1,
                csv(branch.frequencies[i] * 1e-3),
                csv(branch.plane_weight[i]),
                csv(branch.axial_weight[i]),
            )
            .unwrap();
        }
    }
    let crossings: Vec<Value> = result
        .crossings
        .iter()
        .map(|c| {
            json!({
                "nu_latt_MHz": result.nu_grid[c.grid_index] * 1e-6,
                "grid_index": c.grid_index,
                "kind": format!("{:?}", c.kind),
                "branch_ids": [c.branches.0 + 1, c.branches.1 + 1],
                "overlaps": [c.overlaps.0, c.overlaps.1],
            })
        })
        .collect();
    for c in &crossings {
        log::warn!("unresolved mode crossing: {c}");
    }
    let start = &result.equilibrium_trajectory[0];
    let end = result.equilibrium_trajectory.last().unwrap();
    let meta = json!({
        "config_sha256": cfg.hash,
        "versions": versions(),
        "seed": cfg.seed,
        "ions": cfg.ions,
        "points": result.nu_grid.len(),
        "nu_latt_max_MHz": result.nu_grid.last().unwrap() * 1e-6,
        "detuning": if lattice.is_red() { "red" } else { "blue" },
        "structure_start": structure_name(classify(start)),
        "structure_end": structure_name(classify(end)),
    });
    let warnings = json!({
        "config_sha256": cfg.hash,
        "refinements": result.refinements,
        "flagged_crossings": crossings,
    });
    Ok(vec![
        write_file(out.join("modes.csv"), text.as_bytes())?,
        write_json(out.join("modes.meta.json"), &meta)?,
        write_json(out.join("modes_warnings.json"), &warnings)?,
    ])
}

pub fn scatter(cfg: &Config, out: &Path, grid: Option<&str>) -> Result<Vec<PathBuf>, CliError> {
    let lattice = cfg.lattice()?;
    let settings = cfg.scatter()?;
    let depths_k = match grid {
        Some(spec) => parse_grid(spec, Kind::Temperature, "mK")?,
        None => {
            let max = lattice.config.temperature();
            let m = settings.steps;
            if m == 1 {
                vec![max]
            } else {
                (0..m).map(|i| if i + 1 == m { max } else { max * i as f64 / (m - 1) as f64 }).collect()
            }
        }
    };
    let grid_j: Vec<f64> = depths_k.iter().map(|t| t * BOLTZMANN).collect();
    let scenario = ScatteringScenario {
        crystal: ground_state(cfg)?,
        species: cfg.species.clone(),
        lattice: lattice.config.clone(),
        ramp: cfg.ramp.clone(),
        t0: settings.initial_temperature,
        pumping_efficiency: settings.pumping_efficiency,
    };
    let rows = scan_depth(&scenario, &lattice.beam, &grid_j).map_err(|e| CliError::solver(format!("scatter: {e}")))?;
    let mut table = Vec::new();
    write_scan_csv(&mut table, &rows).map_err(CliError::solver)?;
    let meta = json!({
        "config_sha256": cfg.hash,
        "versions": versions(),
        "seed": cfg.seed,
        "ions": cfg.ions,
        "initial_temperature_mK": settings.initial_temperature * 1e3,
        "pumping_efficiency": settings.pumping_efficiency,
        "waist_um": lattice.beam.waist_radius * 1e6,
        "detuning": if lattice.config.is_red() { "red" } else { "blue" },
        "depth_grid_mK": depths_k.iter().map(|t| t * 1e3).collect::<Vec<_>>(),
        "p_delocalized": rows.iter().map(|r| r.p_delocalized).collect::<Vec<_>>(),
    });
    Ok(vec![
        write_file(out.join("scatter.csv"), &table)?,
        write_json(out.join("scatter.meta.json"), &meta)?,
    ])
}

fn gamma_json(gamma: &GammaTable) -> Value {
    Value::Array(
        gamma
            .gamma
            .iter()
            .zip(&gamma.gamma_radial_projected)
            .enumerate()
            .map(|(i, (g, r))| json!({ "ion": i, "gamma_x": g[0], "gamma_y": g[1], "gamma_z": g[2], "gamma_radial": r }))
            .collect(),
    )
}

fn spot_json(s: &SpotMeasurement) -> Value {
    json!({
        "ion": s.ion_index,
        "axis": s.axis.name(),
        "center_um": s.fitted_center * 1e6,
        "sigma_um": s.fitted_sigma * 1e6,
        "sigma_ci95_um": s.sigma_ci95 * 1e6,
    })
}

pub fn thermometry(cfg: &Config, out: &Path, spots: &Path, radial: bool) -> Result<Vec<PathBuf>, CliError> {
    let file = fs::File::open(spots).map_err(|e| CliError::io(spots, e))?;
    let profiles = read_spot_profiles(std::io::BufReader::new(file)).map_err(|e| CliError::io(spots, e))?;

    let state = ground_state(cfg)?;
    let gamma = normal_modes(&state, &cfg.trap, None, &cfg.species)
        .and_then(|m| gamma_parameters(&m))
        .map_err(|e| CliError::solver(format!("normal modes: {e}")))?;
    let mut axes = cfg.thermometry_axes.clone();
    if radial && !axes.contains(&Axis::Radial) {
        axes.push(Axis::Radial);
    }
    let fitted = fit_spots(profiles, &cfg.imaging).map_err(|e| CliError::solver(format!("spot fit: {e}")))?;
    let estimate =
        estimate_temperature_axes(&fitted, &gamma, &cfg.trap, &cfg.species, &cfg.imaging, &axes).map_err(|e| match e {
            ThermometryError::NegativeThermalVariance { .. } => CliError::solver(format!(
                "{e}; the imaging resolution in the config may be too large for these spots"
            )),
            ThermometryError::MissingGamma { ion } => {
                CliError::config(format!("spots refer to ion {ion}, but the crystal has {} ions", cfg.ions))
            }
            other => CliError::solver(format!("temperature: {other}")),
        })?;
    let report = json!({
        "config_sha256": cfg.hash,
        "versions": versions(),
        "seed": cfg.seed,
        "T_mK": estimate.t * 1e3,
        "ci95_mK": estimate.ci95 * 1e3,
        "axes": axes.iter().map(|a| a.name()).collect::<Vec<_>>(),
        "residuals": estimate
            .used
            .iter()
            .zip(&estimate.per_ion_residuals)
            .map(|((ion, axis), r)| json!({ "ion": ion, "axis": axis.name(), "variance_residual_um2": r * 1e12 }))
            .collect::<Vec<_>>(),
        "gamma": gamma_json(&gamma),
        "spots": fitted.iter().map(spot_json).collect::<Vec<_>>(),
        "sigma_res_axial_um": cfg.imaging.sigma_res_axial * 1e6,
        "sigma_res_radial_um": cfg.imaging.sigma_res_radial * 1e6,
        "pixel_pitch_um": cfg.imaging.pixel_pitch * 1e6,
    });
    Ok(vec![write_json(out.join("temperature.json"), &report)?])
}

pub fn micromotion(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let state = ground_state(cfg)?;
    let report =
        excess_micromotion(&state, &cfg.trap, &cfg.species).map_err(|e| CliError::solver(format!("micromotion: {e}")))?;
    let ions: Vec<Value> = report
        .ions
        .iter()
        .enumerate()
        .map(|(i, m)| {
            json!({
                "ion": i,
                "amplitude_nm": m.amplitude.map(|a| a * 1e9),
                "kinetic_energy_J": m.kinetic_energy,
                "equivalent_temperature_mK": m.equivalent_temperature.map(|t| t * 1e3),
                "radial_temperature_mK": m.radial_temperature() * 1e3,
            })
        })
        .collect();
    let doc = json!({
        "config_sha256": cfg.hash,
        "versions": versions(),
        "seed": cfg.seed,
        "structure": structure_name(classify(&state.positions)),
        "q": report.q,
        "effective_q_axial": report.effective_q_axial,
        "variance_broadening": report.variance_broadening_factor,
        "max_radial_temperature_mK": report.max_radial_temperature() * 1e3,
        "ions": ions,
    });
    Ok(vec![write_json(out.join("micromotion.json"), &doc)?])
}
