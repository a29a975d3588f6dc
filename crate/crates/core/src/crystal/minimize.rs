//! Quasi-Newton minimization of the dimensionless crystal potential.
//!
//! BFGS with an Armijo backtracking line search does the global descent;
//! once the gradient is small a few Newton steps on the analytic Hessian
//! polish it down to the target tolerance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::potential::Potential;
use super::CrystalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Convergence target on the gradient max-norm.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Largest coordinate change of a single step. Keeps ions from tunnelling
    /// through neighbours or lattice wells.
    pub max_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-10, max_iter: 20_000, max_step: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub q: Vec<f64>,
    pub energy: f64,
    pub grad_max: f64,
    pub iterations: usize,
    /// Energy after every accepted step, starting with the initial point.
    pub energy_trace: Vec<f64>,
}

/// Gradient max-norm below which BFGS hands over to Newton.
const POLISH_THRESHOLD: f64 = 1e-6;
const ARMIJO_C1: f64 = 1e-4;
const MAX_NEWTON: usize = 50;
const MAX_ROUNDS: usize = 8;

fn max_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

fn step_cap(d: &DVector<f64>, max_step: f64) -> f64 {
    let m = d.amax();
    if m > max_step { max_step / m } else { 1.0 }
}

pub fn minimize(pot: &Potential, q0: &[f64], opts: &MinimizeOptions) -> Result<Minimum, CrystalError> {
    let mut q = DVector::from_column_slice(q0);
    let mut e = pot.energy(q.as_slice())?;
    let mut g = pot.gradient_vector(q.as_slice())?;
    let mut trace = vec![e];
    let mut iterations = 0;
    for _ in 0..MAX_ROUNDS {
        iterations += bfgs(pot, &mut q, &mut e, &mut g, &mut trace, opts)?;
        let (steps, done) = newton(pot, &mut q, &mut e, &mut g, &mut trace, opts)?;
        iterations += steps;
        if done || iterations >= opts.max_iter {
            break;
        }
    }
    let grad_max = max_norm(&g);
    if grad_max > opts.grad_tol {
        return Err(CrystalError::NoConvergence { grad_max, iterations, last: q.as_slice().to_vec() });
    }
    Ok(Minimum { q: q.as_slice().to_vec(), energy: e, grad_max, iterations, energy_trace: trace })
}

/// Energy changes below this are indistinguishable from roundoff.
fn noise(e: f64) -> f64 {
    16.0 * f64::EPSILON * e.abs().max(1.0)
}

fn bfgs(
    pot: &Potential,
    q: &mut DVector<f64>,
    e: &mut f64,
    g: &mut DVector<f64>,
    trace: &mut Vec<f64>,
    opts: &MinimizeOptions,
) -> Result<usize, CrystalError> {
    let dim = q.len();
    let mut hinv = DMatrix::<f64>::identity(dim, dim);
    let mut iter = 0;
    while max_norm(g) > POLISH_THRESHOLD.max(opts.grad_tol) && iter < opts.max_iter {
        iter += 1;
        let mut d = -(&hinv * &*g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            hinv.fill_with_identity();
            d = -g.clone();
            slope = g.dot(&d);
        }
        let mut t = step_cap(&d, opts.max_step);
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &*q + t * &d;
            match pot.energy(trial.as_slice()) {
                Ok(et) if et <= *e + ARMIJO_C1 * t * slope => {
                    accepted = Some((trial, et));
                    break;
                }
                _ => t *= 0.5,
            }
        }
        let Some((q_new, e_new)) = accepted else {
            // Line search exhausted: the gradient is dominated by roundoff.
            break;
        };
        let g_new = pot.gradient_vector(q_new.as_slice())?;
        let s = &q_new - &*q;
        let y = &g_new - &*g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if iter == 1 {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (rho * rho * yhy + rho) * (&s * s.transpose()) - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        *q = q_new;
        *e = e_new;
        *g = g_new;
        trace.push(*e);
    }
    Ok(iter)
}

/// Newton steps with the Hessian eigenvalues replaced by their magnitudes,
/// so negative curvature pushes away from saddles. Returns the step count and
/// whether the tolerance was met.
fn newton(
    pot: &Potential,
    q: &mut DVector<f64>,
    e: &mut f64,
    g: &mut DVector<f64>,
    trace: &mut Vec<f64>,
    opts: &MinimizeOptions,
) -> Result<(usize, bool), CrystalError> {
    let mut steps = 0;
    while max_norm(g) > opts.grad_tol {
        if steps == MAX_NEWTON {
            return Ok((steps, false));
        }
        steps += 1;
        let eig = SymmetricEigen::new(pot.hessian(q.as_slice())?);
        let scale = eig.eigenvalues.amax().max(1.0);
        let lowest = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(lowest);
        let along = v.dot(g);
        if eig.eigenvalues[lowest] < -1e-8 * scale && along != 0.0 {
            // Negative curvature with a gradient component: roll off the saddle.
            let d = v * -along.signum();
            let mut t = opts.max_step;
            for _ in 0..40 {
                let trial = &*q + t * &d;
                if let Ok(et) = pot.energy(trial.as_slice()) {
                    if et < *e - noise(*e) {
                        *g = pot.gradient_vector(trial.as_slice())?;
                        *q = trial;
                        *e = et;
                        trace.push(et);
                        return Ok((steps, false));
                    }
                }
                t *= 0.5;
            }
        }
        let mut d = DVector::zeros(q.len());
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(i);
            d -= v * (v.dot(g) / lam.abs().max(1e-12 * scale));
        }
        let mut t = step_cap(&d, opts.max_step);
        let gnorm = g.norm();
        let mut accepted = None;
        for _ in 0..40 {
            let trial = &*q + t * &d;
            if let (Ok(et), Ok(gt)) = (pot.energy(trial.as_slice()), pot.gradient_vector(trial.as_slice())) {
                if et <= *e + noise(*e) {
                    let improved = gt.norm() < gnorm;
                    accepted = Some((trial, et, gt, improved));
                    if improved {
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((q_new, e_new, g_new, improved)) => {
                *q = q_new;
                *e = e_new.min(*e);
                *g = g_new;
                trace.push(*e);
                if !improved {
                    // Descending away from a saddle: hand back to BFGS.
                    return Ok((steps, false));
                }
            }
            None => return Ok((steps, false)),
        }
    }
    Ok((steps, true))
}
