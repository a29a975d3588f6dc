//! Mode branches followed through a lattice-depth sweep.
//!
//! Each grid point re-converges the equilibrium from the previous one and
//! matches the new eigenvectors to the previous branches by maximal absolute
//! overlap. When a match is weak the step is halved; if halving runs out the
//! step is accepted and flagged.

use nalgebra::{DMatrix, DVector};

use super::potential::unstack;
use super::structure::plane_normal;
use super::{dimensionless_potential, length_scale, modes_from_hessian, multistart, solve_stable_from, CrystalError};
use crate::params::{depth_for_frequency, IonSpecies, LatticeConfig, TrapConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    /// Grid points including `ν = 0`.
    pub steps: usize,
    /// First nonzero grid point as a fraction of the maximum `ν_latt`.
    pub min_fraction: f64,
    pub overlap_threshold: f64,
    /// Two overlaps closer than this make an assignment ambiguous.
    pub ambiguity: f64,
    pub max_halvings: u32,
    pub seed: u64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            steps: 200,
            min_fraction: 1e-3,
            overlap_threshold: 0.5,
            ambiguity: 1e-3,
            max_halvings: 12,
            seed: super::DEFAULT_SEED,
        }
    }
}

/// One tracked mode. Index `i` of every field refers to grid point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Hz.
    pub frequencies: Vec<f64>,
    pub coordinates: Vec<DVector<f64>>,
    /// Share of the mode vector lying in the crystal plane.
    pub plane_weight: Vec<f64>,
    /// Share of the mode vector along the trap axis.
    pub axial_weight: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// Two candidate overlaps within the ambiguity margin.
    Ambiguous,
    /// Best overlap stayed below the threshold.
    WeakOverlap,
}

/// A step where tracking could not be resolved by refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedCrossing {
    /// Grid point at the end of the step.
    pub grid_index: usize,
    pub kind: CrossingKind,
    pub branches: (usize, usize),
    pub overlaps: (f64, f64),
    /// Mode index assigned to each branch, and the swapped alternative.
    pub assignment: Vec<usize>,
    pub alternative: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationResult {
    /// `ν_latt` in Hz.
    pub nu_grid: Vec<f64>,
    /// Signed depth in J.
    pub depth_grid: Vec<f64>,
    /// Branch `b` starts as mode `b` (ascending frequency) at the first point.
    pub branches: Vec<Branch>,
    /// Positions in metres at every grid point.
    pub equilibrium_trajectory: Vec<Vec<[f64; 3]>>,
    pub crossings: Vec<FlaggedCrossing>,
    /// Number of inserted half-steps.
    pub refinements: usize,
}

impl ContinuationResult {
    /// Branches whose plane weight at the first grid point exceeds
    /// `threshold`, in ascending order of their first frequency.
    pub fn in_plane_branches(&self, threshold: f64) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.branches.len()).filter(|&b| self.branches[b].plane_weight[0] > threshold).collect();
        ids.sort_by(|&a, &b| self.branches[a].frequencies[0].total_cmp(&self.branches[b].frequencies[0]));
        ids
    }

    /// Every `ν_latt` at which the axial weights of branches `a` and `b`
    /// cross, linearly interpolated between grid points.
    pub fn axial_weight_crossings(&self, a: usize, b: usize) -> Vec<f64> {
        let (wa, wb) = (&self.branches[a].axial_weight, &self.branches[b].axial_weight);
        let mut out = Vec::new();
        for i in 1..self.nu_grid.len() {
            let (d0, d1) = (wa[i - 1] - wb[i - 1], wa[i] - wb[i]);
            if d0 == 0.0 {
                out.push(self.nu_grid[i - 1]);
            } else if d0 * d1 < 0.0 {
                let t = d0 / (d0 - d1);
                out.push(self.nu_grid[i - 1] + t * (self.nu_grid[i] - self.nu_grid[i - 1]));
            }
        }
        out
    }
}

/// `ν = 0` followed by `steps − 1` geometric points up to `nu_max`.
pub fn default_nu_grid(nu_max: f64, steps: usize, min_fraction: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    if steps < 2 {
        return grid;
    }
    let m = steps - 1;
    let lo = nu_max * min_fraction;
    for i in 0..m {
        let f = if m == 1 { 1.0 } else { i as f64 / (m - 1) as f64 };
        grid.push(if i + 1 == m { nu_max } else { lo * (nu_max / lo).powf(f) });
    }
    grid
}

/// Continuation from zero to `lattice_max` on the default grid.
pub fn continuation(
    n: usize,
    trap: &TrapConfig,
    lattice_max: &LatticeConfig,
    species: &IonSpecies,
    steps: usize,
) -> Result<ContinuationResult, CrystalError> {
    if steps < 2 {
        return Err(CrystalError::Domain { what: "steps", value: steps as f64 });
    }
    let opts = ContinuationOptions { steps, ..Default::default() };
    let nu_max = lattice_max.vibrational_frequency(species.mass);
    let grid = default_nu_grid(nu_max, steps, opts.min_fraction);
    continuation_on_grid(n, trap, lattice_max, species, &grid, &opts)
}

struct Snapshot {
    q: Vec<f64>,
    /// Column `b` is branch `b`.
    vectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

enum Match {
    Clean(Vec<usize>),
    Flagged(Vec<usize>, FlaggedCrossing),
}

/// Aligns each cluster of (numerically) degenerate modes with the previous
/// branches spanning it.
fn align_degenerate(prev: &DMatrix<f64>, vals: &[f64], vecs: &mut DMatrix<f64>) {
    let dim = vals.len();
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && (vals[end] - vals[end - 1]).abs() <= 1e-9 * vals[end - 1].abs().max(1.0) {
            end += 1;
        }
        let k = end - start;
        if k > 1 {
            let c = vecs.columns(start, k).clone_owned();
            let proj = c.transpose() * prev;
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| proj.column(b).norm().total_cmp(&proj.column(a).norm()));
            let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
            for &b in &order {
                if basis.len() == k {
                    break;
                }
                let mut w = &c * proj.column(b);
                for e in &basis {
                    let d = e.dot(&w);
                    w -= e * d;
                }
                let norm = w.norm();
                if norm > 1e-6 {
                    basis.push(w / norm);
                }
            }
            if basis.len() == k {
                for (i, v) in basis.into_iter().enumerate() {
                    vecs.set_column(start + i, &v);
                }
            }
        }
        start = end;
    }
}

fn match_modes(prev: &DMatrix<f64>, vecs: &DMatrix<f64>, opts: &ContinuationOptions) -> Match {
    let dim = prev.ncols();
    let overlap = (prev.transpose() * vecs).map(f64::abs);
    let mut pairs: Vec<(usize, usize)> = (0..dim).flat_map(|b| (0..dim).map(move |p| (b, p))).collect();
    pairs.sort_by(|&(b1, p1), &(b2, p2)| overlap[(b2, p2)].total_cmp(&overlap[(b1, p1)]));
    let mut assign = vec![usize::MAX; dim];
    let mut taken = vec![false; dim];
    for (b, p) in pairs {
        if assign[b] == usize::MAX && !taken[p] {
            assign[b] = p;
            taken[p] = true;
        }
    }

    for b in 0..dim {
        let best = overlap[(b, assign[b])];
        // Strongest competitor for this branch.
        let (rival_p, rival) = (0..dim)
            .filter(|&p| p != assign[b])
            .map(|p| (p, overlap[(b, p)]))
            .max_by(|a, c| a.1.total_cmp(&c.1))
            .unwrap_or((assign[b], 0.0));
        let kind = if best < opts.overlap_threshold {
            Some(CrossingKind::WeakOverlap)
        } else if best - rival <= opts.ambiguity {
            Some(CrossingKind::Ambiguous)
        } else {
            None
        };
        if let Some(kind) = kind {
            let other = assign.iter().position(|&p| p == rival_p).unwrap_or(b);
            let mut alternative = assign.clone();
            alternative.swap(b, other);
            let flag = FlaggedCrossing {
                grid_index: 0,
                kind,
                branches: (b, other),
                overlaps: (best, rival),
                assignment: assign.clone(),
                alternative,
            };
            return Match::Flagged(assign, flag);
        }
    }
    Match::Clean(assign)
}

fn reorder(assign: &[usize], prev: &DMatrix<f64>, vals: &[f64], vecs: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let dim = assign.len();
    let mut out = DMatrix::zeros(dim, dim);
    let mut ev = vec![0.0; dim];
    for (b, &p) in assign.iter().enumerate() {
        let mut v = vecs.column(p).clone_owned();
        if v.dot(&prev.column(b)) < 0.0 {
            v.neg_mut();
        }
        out.set_column(b, &v);
        ev[b] = vals[p];
    }
    (out, ev)
}

struct Sweep<'a> {
    n: usize,
    trap: &'a TrapConfig,
    lattice: &'a LatticeConfig,
    species: &'a IonSpecies,
    sign: f64,
    opts: &'a ContinuationOptions,
    refinements: usize,
}

impl Sweep<'_> {
    fn depth(&self, nu: f64) -> f64 {
        self.sign * depth_for_frequency(nu, self.species.mass, self.lattice.wavevector)
    }

    fn solve(&self, nu: f64, q0: &[f64]) -> Result<(Vec<f64>, Vec<f64>, DMatrix<f64>), CrystalError> {
        let lat = self.lattice.with_depth(self.depth(nu));
        let pot = dimensionless_potential(self.n, self.trap, Some(&lat), self.species);
        let s = solve_stable_from(&pot, q0)?;
        let m = modes_from_hessian(pot.hessian(&s.q)?, self.trap.omega_z)?;
        Ok((s.q, m.eigenvalues, m.coordinates))
    }

    fn advance(&mut self, nu_a: f64, nu_b: f64, prev: &Snapshot, level: u32) -> Result<(Snapshot, Vec<FlaggedCrossing>), CrystalError> {
        let (q, vals, mut vecs) = self.solve(nu_b, &prev.q)?;
        align_degenerate(&prev.vectors, &vals, &mut vecs);
        match match_modes(&prev.vectors, &vecs, self.opts) {
            Match::Clean(assign) => {
                let (vectors, eigenvalues) = reorder(&assign, &prev.vectors, &vals, &vecs);
                Ok((Snapshot { q, vectors, eigenvalues }, Vec::new()))
            }
            Match::Flagged(assign, flag) => {
                if level < self.opts.max_halvings {
                    self.refinements += 1;
                    let mid = 0.5 * (nu_a + nu_b);
                    let (half, mut f1) = self.advance(nu_a, mid, prev, level + 1)?;
                    let (full, f2) = self.advance(mid, nu_b, &half, level + 1)?;
                    f1.extend(f2);
                    return Ok((full, f1));
                }
                log::warn!(
                    "mode tracking unresolved near ν_latt = {nu_b:.6e} Hz ({:?}, branches {:?})",
                    flag.kind,
                    flag.branches
                );
                let (vectors, eigenvalues) = reorder(&assign, &prev.vectors, &vals, &vecs);
                Ok((Snapshot { q, vectors, eigenvalues }, vec![flag]))
            }
        }
    }
}

/// Continuation over an explicit, non-decreasing `ν_latt` grid (Hz).
///
/// `lattice` supplies the wavevector, detuning and the sign of the depth;
/// its magnitude is replaced by the grid values.
pub fn continuation_on_grid(
    n: usize,
    trap: &TrapConfig,
    lattice: &LatticeConfig,
    species: &IonSpecies,
    nu_grid: &[f64],
    opts: &ContinuationOptions,
) -> Result<ContinuationResult, CrystalError> {
    if n == 0 {
        return Err(CrystalError::Domain { what: "N", value: 0.0 });
    }
    if nu_grid.is_empty() {
        return Err(CrystalError::Domain { what: "grid length", value: 0.0 });
    }
    if let Some(w) = nu_grid.windows(2).find(|w| !(w[1] >= w[0])) {
        return Err(CrystalError::Domain { what: "ν_latt grid (must be non-decreasing)", value: w[1] });
    }
    if !(nu_grid[0] >= 0.0) {
        return Err(CrystalError::Domain { what: "ν_latt", value: nu_grid[0] });
    }
    trap.validate()?;
    species.validate()?;
    let sign = if lattice.depth != 0.0 { lattice.depth.signum() } else { lattice.detuning.signum() };
    let mut sweep = Sweep { n, trap, lattice, species, sign, opts, refinements: 0 };

    let free = dimensionless_potential(n, trap, None, species);
    let ground = multistart(&free, opts.seed)?;
    let (q, eigenvalues, vectors) = sweep.solve(nu_grid[0], &ground.q)?;
    let mut snap = Snapshot { q, vectors, eigenvalues };

    let l = length_scale(trap, species);
    let dim = 3 * n;
    let mut branches: Vec<Branch> = (0..dim)
        .map(|_| Branch {
            frequencies: Vec::with_capacity(nu_grid.len()),
            coordinates: Vec::with_capacity(nu_grid.len()),
            plane_weight: Vec::with_capacity(nu_grid.len()),
            axial_weight: Vec::with_capacity(nu_grid.len()),
        })
        .collect();
    let mut trajectory = Vec::with_capacity(nu_grid.len());
    let mut crossings = Vec::new();

    let record = |snap: &Snapshot, branches: &mut Vec<Branch>, trajectory: &mut Vec<Vec<[f64; 3]>>| {
        let ions = unstack(&snap.q);
        let normal = plane_normal(&ions, trap);
        for (b, br) in branches.iter_mut().enumerate() {
            let v = snap.vectors.column(b);
            let out: f64 = (0..n).map(|i| (normal[0] * v[i] + normal[1] * v[n + i] + normal[2] * v[2 * n + i]).powi(2)).sum();
            br.frequencies.push(trap.omega_z * snap.eigenvalues[b].max(0.0).sqrt() / (2.0 * std::f64::consts::PI));
            br.coordinates.push(v.clone_owned());
            br.plane_weight.push(1.0 - out);
            br.axial_weight.push(v.rows(2 * n, n).norm_squared());
        }
        trajectory.push(ions.into_iter().map(|p| p.map(|c| c * l)).collect());
    };

    record(&snap, &mut branches, &mut trajectory);
    for (i, w) in nu_grid.windows(2).enumerate() {
        let (next, flags) = sweep.advance(w[0], w[1], &snap, 0)?;
        crossings.extend(flags.into_iter().map(|mut f| {
            f.grid_index = i + 1;
            f
        }));
        snap = next;
        record(&snap, &mut branches, &mut trajectory);
    }

    Ok(ContinuationResult {
        nu_grid: nu_grid.to_vec(),
        depth_grid: nu_grid.iter().map(|&nu| sweep.depth(nu)).collect(),
        branches,
        equilibrium_trajectory: trajectory,
        crossings,
        refinements: sweep.refinements,
    })
}
