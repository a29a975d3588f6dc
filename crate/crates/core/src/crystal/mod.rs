//! Coulomb crystals in a linear Paul trap pseudo-potential, optionally with
//! a standing-wave lattice along the trap axis.
//!
//! The lattice potential is `U0·sin²(k·z − φ)`; with the default `φ = 0` a
//! node sits at the trap centre.
//! Internally everything is dimensionless: lengths in the Coulomb length
//! [`length_scale`] `ℓ`, frequencies in `ωz` and energies in `M·ωz²·ℓ²`.
//! Mode coordinates are indexed `l = axis·N + ion` (x-block, y-block,
//! z-block).

pub mod continuation;
pub mod minimize;
pub mod potential;
pub mod structure;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constants::{coulomb_e2, BOLTZMANN};
use crate::params::{IonSpecies, LatticeConfig, ParamError, TrapConfig};
use minimize::{minimize, MinimizeOptions};
use potential::{stack, unstack, Potential};

pub use continuation::{
    continuation, continuation_on_grid, default_nu_grid, Branch, ContinuationOptions, ContinuationResult,
    FlaggedCrossing,
};
pub use structure::{classify, critical_aspect_ratio, plane_normal, Structure};

/// Hessian eigenvalues below `−SADDLE_TOLERANCE` mark an unstable point.
pub const SADDLE_TOLERANCE: f64 = 1e-8;
/// Seed of the depth-zero multistart when none is given.
pub const DEFAULT_SEED: u64 = 20_190_226;
const MULTISTARTS: usize = 8;
const ESCAPE_ATTEMPTS: usize = 4;
/// Kick along an unstable direction, in units of `ℓ`.
const ESCAPE_STEP: f64 = 1e-3;
/// Eigenvalues at or below this count as a zero mode.
const SOFT_MODE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrystalError {
    #[error("ions {i} and {j} coincide")]
    CoincidentIons { i: usize, j: usize },
    #[error("minimizer stopped after {iterations} iterations with gradient max-norm {grad_max:e}")]
    NoConvergence { grad_max: f64, iterations: usize, last: Vec<f64> },
    #[error("configuration is unstable: Hessian eigenvalue {min_eigenvalue:e}")]
    Unstable { min_eigenvalue: f64 },
    #[error("mode {mode} has eigenvalue {eigenvalue:e}; its thermal excursion diverges")]
    SoftMode { mode: usize, eigenvalue: f64 },
    #[error("{what} = {value} is invalid")]
    Domain { what: &'static str, value: f64 },
    #[error("initial guess has {got} ions, expected {expected}")]
    GuessShape { expected: usize, got: usize },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Equilibrium configuration of an N-ion crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalState {
    /// Positions in metres, one `[x, y, z]` per ion.
    pub positions: Vec<[f64; 3]>,
    /// Total potential energy in joules.
    pub potential_value: f64,
    /// Signed lattice depth in joules; 0 without lattice.
    pub lattice_depth: f64,
    pub length_scale: f64,
    /// Gradient max-norm at the solution (dimensionless).
    pub grad_max: f64,
    pub min_hessian_eigenvalue: f64,
    /// Set when the solution is a saddle rather than a minimum.
    pub saddle: bool,
}

impl CrystalState {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Positions in units of `ℓ`.
    pub fn scaled_positions(&self) -> Vec<[f64; 3]> {
        self.positions.iter().map(|p| p.map(|c| c / self.length_scale)).collect()
    }
}

/// Normal modes at an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecomposition {
    /// `λ_p`, ascending; Hessian eigenvalues in units of `M·ωz²`.
    pub eigenvalues: Vec<f64>,
    /// `ω_p = ωz·√λ_p` in rad/s.
    pub frequencies: Vec<f64>,
    /// Column `p` holds `b_l^p`.
    pub coordinates: DMatrix<f64>,
    pub omega_z: f64,
}

impl ModeDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len() / 3
    }

    /// `Σ_m (b_{z,m}^p)²`.
    pub fn axial_weight(&self, p: usize) -> f64 {
        let n = self.n();
        self.coordinates.column(p).rows(2 * n, n).norm_squared()
    }
}

/// Per-ion thermal excursion factors relative to a single ion.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTable {
    /// `γ_{m,u}` for `u ∈ {x, y, z}`.
    pub gamma: Vec<[f64; 3]>,
    /// `γ_{m,rad}` along `(x + y)/√2`.
    pub gamma_radial_projected: Vec<f64>,
}

/// Coulomb length `ℓ = (e²/(4πε0·M·ωz²))^{1/3}`.
pub fn length_scale(trap: &TrapConfig, species: &IonSpecies) -> f64 {
    (coulomb_e2() / (species.mass * trap.omega_z * trap.omega_z)).cbrt()
}

/// Energy unit `M·ωz²·ℓ²`.
fn energy_unit(trap: &TrapConfig, species: &IonSpecies) -> f64 {
    let l = length_scale(trap, species);
    species.mass * trap.omega_z * trap.omega_z * l * l
}

pub(crate) fn dimensionless_potential(
    n: usize,
    trap: &TrapConfig,
    lattice: Option<&LatticeConfig>,
    species: &IonSpecies,
) -> Potential {
    let l = length_scale(trap, species);
    let wz2 = trap.omega_z * trap.omega_z;
    let (kappa, u0, phase) = match lattice {
        Some(lat) => (lat.wavevector * l, lat.depth / energy_unit(trap, species), lat.phase),
        None => (0.0, 0.0, 0.0),
    };
    Potential {
        n,
        alpha: [trap.omega_x * trap.omega_x / wz2, trap.omega_y * trap.omega_y / wz2, 1.0],
        kappa,
        u0,
        phase,
    }
}

fn validate(trap: &TrapConfig, lattice: Option<&LatticeConfig>, species: &IonSpecies) -> Result<(), CrystalError> {
    trap.validate()?;
    species.validate()?;
    if let Some(lat) = lattice {
        lat.validate()?;
    }
    Ok(())
}

/// Total potential energy in joules of ions at `positions` (metres).
pub fn total_potential(
    positions: &[[f64; 3]],
    trap: &TrapConfig,
    lattice: Option<&LatticeConfig>,
    species: &IonSpecies,
) -> Result<f64, CrystalError> {
    validate(trap, lattice, species)?;
    let l = length_scale(trap, species);
    let pot = dimensionless_potential(positions.len(), trap, lattice, species);
    let scaled: Vec<[f64; 3]> = positions.iter().map(|p| p.map(|c| c / l)).collect();
    Ok(pot.energy(&stack(&scaled))? * energy_unit(trap, species))
}

fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.min()
}

fn minimize_options(pot: &Potential) -> MinimizeOptions {
    let mut opts = MinimizeOptions::default();
    if pot.u0 != 0.0 && pot.kappa > 0.0 {
        // A quarter of a lattice period.
        opts.max_step = opts.max_step.min(0.25 * std::f64::consts::PI / pot.kappa);
    }
    opts
}

/// Random starting configuration: a jittered axial string.
fn random_guess(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            let mut g = || -> f64 { rng.sample(StandardNormal) };
            let z0 = 0.8 * (i as f64 - 0.5 * (n as f64 - 1.0));
            [0.3 * g(), 0.3 * g(), z0 + 0.2 * g()]
        })
        .collect()
}

fn canonical_order(q: &[f64]) -> Vec<f64> {
    let mut ions = unstack(q);
    ions.sort_by(|a, b| a[2].total_cmp(&b[2]).then(a[1].total_cmp(&b[1])).then(a[0].total_cmp(&b[0])));
    stack(&ions)
}

struct Solved {
    q: Vec<f64>,
    energy: f64,
    grad_max: f64,
    min_eig: f64,
}

fn solve_from(pot: &Potential, q0: &[f64]) -> Result<Solved, CrystalError> {
    let m = minimize(pot, q0, &minimize_options(pot))?;
    let min_eig = min_eigenvalue(&pot.hessian(&m.q)?);
    Ok(Solved { q: m.q, energy: m.energy, grad_max: m.grad_max, min_eig })
}

/// As [`solve_from`], but a converged saddle is pushed off along its most
/// unstable direction and re-minimized.
fn solve_stable_from(pot: &Potential, q0: &[f64]) -> Result<Solved, CrystalError> {
    let mut s = solve_from(pot, q0)?;
    for _ in 0..ESCAPE_ATTEMPTS {
        if s.min_eig >= -SADDLE_TOLERANCE {
            break;
        }
        let eig = SymmetricEigen::new(pot.hessian(&s.q)?);
        let v = eig.eigenvectors.column(eig.eigenvalues.imin()).clone_owned();
        let mut best: Option<Solved> = None;
        for sign in [1.0, -1.0] {
            let start: Vec<f64> = s.q.iter().zip(v.iter()).map(|(q, d)| q + sign * ESCAPE_STEP * d).collect();
            if let Ok(c) = solve_from(pot, &start) {
                if best.as_ref().is_none_or(|b| c.energy < b.energy) {
                    best = Some(c);
                }
            }
        }
        match best {
            Some(b) if b.energy < s.energy => {
                log::debug!("left a saddle (eigenvalue {:e})", s.min_eig);
                s = b;
            }
            _ => break,
        }
    }
    Ok(s)
}

fn multistart(pot: &Potential, seed: u64) -> Result<Solved, CrystalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Solved> = None;
    let mut last_err = None;
    for _ in 0..MULTISTARTS {
        let guess = stack(&random_guess(pot.n, &mut rng));
        match solve_from(pot, &guess) {
            Ok(s) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (sb, ss) = (b.min_eig < -SADDLE_TOLERANCE, s.min_eig < -SADDLE_TOLERANCE);
                        (sb && !ss) || (sb == ss && s.energy < b.energy - 1e-9 * b.energy.abs().max(1.0))
                    }
                };
                if better {
                    best = Some(s);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(Solved { q: canonical_order(&b.q), ..b }),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one start"),
    }
}

fn into_state(s: Solved, pot: &Potential, trap: &TrapConfig, species: &IonSpecies, depth: f64) -> CrystalState {
    let l = length_scale(trap, species);
    let _ = pot;
    CrystalState {
        positions: unstack(&s.q).into_iter().map(|p| p.map(|c| c * l)).collect(),
        potential_value: s.energy * energy_unit(trap, species),
        lattice_depth: depth,
        length_scale: l,
        grad_max: s.grad_max,
        min_hessian_eigenvalue: s.min_eig,
        saddle: s.min_eig < -SADDLE_TOLERANCE,
    }
}

/// Equilibrium of `n` ions using [`DEFAULT_SEED`] for the multistart.
pub fn equilibrium(
    n: usize,
    trap: &TrapConfig,
    lattice: Option<&LatticeConfig>,
    species: &IonSpecies,
    initial_guess: Option<&[[f64; 3]]>,
) -> Result<CrystalState, CrystalError> {
    equilibrium_seeded(n, trap, lattice, species, initial_guess, DEFAULT_SEED)
}

/// Local minimum of the total potential.
///
/// With an initial guess (metres) the minimizer starts there and keeps the
/// ion order. Without one, a seeded multistart finds the lattice-free ground
/// state, ions are ordered by z then y then x, and that solution seeds the
/// lattice solve. A converged saddle is returned with `saddle` set.
pub fn equilibrium_seeded(
    n: usize,
    trap: &TrapConfig,
    lattice: Option<&LatticeConfig>,
    species: &IonSpecies,
    initial_guess: Option<&[[f64; 3]]>,
    seed: u64,
) -> Result<CrystalState, CrystalError> {
    if n == 0 {
        return Err(CrystalError::Domain { what: "N", value: 0.0 });
    }
    validate(trap, lattice, species)?;
    let pot = dimensionless_potential(n, trap, lattice, species);
    let depth = lattice.map_or(0.0, |l| l.depth);
    let solved = match initial_guess {
        Some(guess) => {
            if guess.len() != n {
                return Err(CrystalError::GuessShape { expected: n, got: guess.len() });
            }
            let l = length_scale(trap, species);
            let scaled: Vec<[f64; 3]> = guess.iter().map(|p| p.map(|c| c / l)).collect();
            solve_from(&pot, &stack(&scaled))?
        }
        None => {
            let free = Potential { u0: 0.0, ..pot };
            let ground = multistart(&free, seed)?;
            if pot.u0 == 0.0 { ground } else { solve_stable_from(&pot, &ground.q)? }
        }
    };
    Ok(into_state(solved, &pot, trap, species, depth))
}

/// Eigen-decomposition of a dimensionless Hessian, ascending, with each
/// eigenvector's largest component made positive.
pub(crate) fn decompose(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h);
    let dim = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vecs = DMatrix::zeros(dim, dim);
    let mut vals = Vec::with_capacity(dim);
    for (col, &p) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(p).clone_owned();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        vecs.set_column(col, &v);
        vals.push(eig.eigenvalues[p]);
    }
    (vals, vecs)
}

pub(crate) fn modes_from_hessian(h: DMatrix<f64>, omega_z: f64) -> Result<ModeDecomposition, CrystalError> {
    let (eigenvalues, coordinates) = decompose(h);
    let min = eigenvalues[0];
    if min < -SADDLE_TOLERANCE {
        return Err(CrystalError::Unstable { min_eigenvalue: min });
    }
    let frequencies = eigenvalues.iter().map(|&l| omega_z * l.max(0.0).sqrt()).collect();
    Ok(ModeDecomposition { eigenvalues, frequencies, coordinates, omega_z })
}

/// The 3N normal modes at `state`.
pub fn normal_modes(
    state: &CrystalState,
    trap: &TrapConfig,
    lattice: Option<&LatticeConfig>,
    species: &IonSpecies,
) -> Result<ModeDecomposition, CrystalError> {
    validate(trap, lattice, species)?;
    let pot = dimensionless_potential(state.n(), trap, lattice, species);
    let l = length_scale(trap, species);
    let scaled: Vec<[f64; 3]> = state.positions.iter().map(|p| p.map(|c| c / l)).collect();
    modes_from_hessian(pot.hessian(&stack(&scaled))?, trap.omega_z)
}

/// `γ²_{m,u} = Σ_p (b_{u,m}^p)²/λ_p` and the 45° radial projection
/// `γ²_{m,rad} = Σ_p (b_{x,m}^p + b_{y,m}^p)²/(2λ_p)`.
pub fn gamma_parameters(modes: &ModeDecomposition) -> Result<GammaTable, CrystalError> {
    if let Some((p, &l)) = modes.eigenvalues.iter().enumerate().find(|(_, &l)| l <= SOFT_MODE) {
        return Err(CrystalError::SoftMode { mode: p, eigenvalue: l });
    }
    let n = modes.n();
    let b = &modes.coordinates;
    let mut gamma = vec![[0.0; 3]; n];
    let mut radial = vec![0.0; n];
    for (p, &lambda) in modes.eigenvalues.iter().enumerate() {
        for m in 0..n {
            for u in 0..3 {
                gamma[m][u] += b[(u * n + m, p)].powi(2) / lambda;
            }
            radial[m] += (b[(m, p)] + b[(n + m, p)]).powi(2) / (2.0 * lambda);
        }
    }
    Ok(GammaTable {
        gamma: gamma.into_iter().map(|g| g.map(f64::sqrt)).collect(),
        gamma_radial_projected: radial.into_iter().map(f64::sqrt).collect(),
    })
}

/// Expected spot variance `(kB·T/(M·ωz²))·γ² + σ_res²` in m².
pub fn spot_variance_model(
    t: f64,
    gamma: f64,
    trap: &TrapConfig,
    species: &IonSpecies,
    sigma_res: f64,
) -> Result<f64, CrystalError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(CrystalError::Domain { what: "T", value: t });
    }
    if !(gamma >= 0.0) {
        return Err(CrystalError::Domain { what: "gamma", value: gamma });
    }
    Ok(BOLTZMANN * t / (species.mass * trap.omega_z * trap.omega_z) * gamma * gamma + sigma_res * sigma_res)
}
