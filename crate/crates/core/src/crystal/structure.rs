//! Geometry of an equilibrium: dimensionality, crystal plane and the
//! linear-to-zigzag threshold.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::minimize::{minimize, MinimizeOptions};
use super::potential::{stack, Potential};
use super::CrystalError;
use crate::params::TrapConfig;

/// Distances below this fraction of the crystal extent count as zero.
const GEOMETRY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Single,
    Linear,
    Planar,
    /// Three-dimensional; `out_of_plane` ions lie off the best-populated plane.
    ThreeDimensional { out_of_plane: usize },
}

fn extent(ps: &[Vector3<f64>]) -> f64 {
    let mut m: f64 = 0.0;
    for a in ps {
        for b in ps {
            m = m.max((a - b).norm());
        }
    }
    m
}

fn collinear(ps: &[Vector3<f64>], tol: f64) -> bool {
    let Some(far) = ps.iter().skip(1).max_by(|a, b| (*a - ps[0]).norm().total_cmp(&(*b - ps[0]).norm())) else {
        return true;
    };
    let dir = (far - ps[0]).normalize();
    ps.iter().all(|p| {
        let d = p - ps[0];
        (d - dir * d.dot(&dir)).norm() <= tol
    })
}

/// Largest number of ions lying on one plane.
fn max_coplanar(ps: &[Vector3<f64>], tol: f64) -> usize {
    let n = ps.len();
    let mut best = n.min(3);
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let normal = (ps[j] - ps[i]).cross(&(ps[k] - ps[i]));
                let norm = normal.norm();
                if norm <= tol * tol {
                    continue;
                }
                let normal = normal / norm;
                let count = ps.iter().filter(|p| (*p - ps[i]).dot(&normal).abs() <= tol).count();
                best = best.max(count);
            }
        }
    }
    best
}

/// Classifies a configuration given in any length unit.
pub fn classify(positions: &[[f64; 3]]) -> Structure {
    let ps: Vec<Vector3<f64>> = positions.iter().map(|p| Vector3::from(*p)).collect();
    if ps.len() < 2 {
        return Structure::Single;
    }
    let tol = GEOMETRY_TOL * extent(&ps);
    if collinear(&ps, tol) {
        return Structure::Linear;
    }
    let on_plane = max_coplanar(&ps, tol);
    if on_plane == ps.len() {
        Structure::Planar
    } else {
        Structure::ThreeDimensional { out_of_plane: ps.len() - on_plane }
    }
}

/// Unit normal of the crystal plane: the least-spread principal axis of the
/// positions. For strings and single ions, the stiffer radial trap axis.
pub fn plane_normal(positions: &[[f64; 3]], trap: &TrapConfig) -> [f64; 3] {
    let stiff = if trap.omega_x >= trap.omega_y { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let n = positions.len();
    if n < 2 {
        return stiff;
    }
    let mean: Vector3<f64> = positions.iter().map(|p| Vector3::from(*p)).sum::<Vector3<f64>>() / n as f64;
    let mut cov = Matrix3::zeros();
    for p in positions {
        let d = Vector3::from(*p) - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[idx[2]];
    if eig.eigenvalues[idx[1]] <= (GEOMETRY_TOL * GEOMETRY_TOL) * largest {
        return stiff;
    }
    let v = eig.eigenvectors.column(idx[0]);
    [v[0], v[1], v[2]]
}

/// Smallest eigenvalue of the radial Hessian of the axial string at radial
/// stiffness `alpha = (ωr/ωz)²` (isotropic radial trap).
fn string_radial_margin(n: usize, alpha: f64) -> Result<f64, CrystalError> {
    let pot = Potential { n, alpha: [alpha, alpha, 1.0], kappa: 0.0, u0: 0.0, phase: 0.0 };
    let guess: Vec<[f64; 3]> = (0..n).map(|i| [0.0, 0.0, i as f64 - 0.5 * (n as f64 - 1.0)]).collect();
    let m = minimize(&pot, &stack(&guess), &MinimizeOptions::default())?;
    let h = pot.hessian(&m.q)?;
    let radial = h.view((0, 0), (n, n)).clone_owned();
    Ok(SymmetricEigen::new(radial).eigenvalues.min())
}

/// Critical `ωr/ωz` below which an N-ion string buckles, bracketed by
/// bisection to relative width `tol`.
pub fn critical_aspect_ratio(n: usize, tol: f64) -> Result<f64, CrystalError> {
    if n < 3 {
        return Err(CrystalError::Domain { what: "N", value: n as f64 });
    }
    if !(tol > 0.0) {
        return Err(CrystalError::Domain { what: "tol", value: tol });
    }
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    while string_radial_margin(n, hi * hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if string_radial_margin(n, mid * mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
