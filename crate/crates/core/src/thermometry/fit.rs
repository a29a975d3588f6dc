//! Gaussian peak fit `A·exp(−(x−c)²/(2σ²)) + B` to a photon-count profile.
//!
//! Levenberg–Marquardt on the weighted residuals with an analytic Jacobian.
//! Counts are treated as Poisson: the weights are the inverse model value
//! (floored at one count) and are refreshed from the current model until the
//! parameters stop moving.

use nalgebra::{Matrix4, Vector4};

use super::ThermometryError;

/// 1.96: two-sided 95 % quantile of the normal distribution.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Fits narrower than this (in pixels) are rejected.
pub const MIN_SIGMA_PX: f64 = 0.25;
const MAX_LM_ITER: usize = 500;
const MAX_REWEIGHT: usize = 30;

/// Fitted parameters in the units of the profile abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub offset: f64,
}

impl GaussianParams {
    fn from_vector(v: &Vector4<f64>) -> Self {
        Self { amplitude: v[0], center: v[1], sigma: v[2].abs(), offset: v[3] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.sigma;
        self.amplitude * (-0.5 * u * u).exp() + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub params: GaussianParams,
    /// 95 % half-widths from the linearized covariance.
    pub ci95: GaussianParams,
    /// Weighted χ² per degree of freedom.
    pub reduced_chi2: f64,
    pub iterations: usize,
}

fn model_and_jacobian(p: &Vector4<f64>, x: f64) -> (f64, Vector4<f64>) {
    let (a, c, s) = (p[0], p[1], p[2]);
    let d = x - c;
    let e = (-0.5 * d * d / (s * s)).exp();
    let f = a * e + p[3];
    (f, Vector4::new(e, a * e * d / (s * s), a * e * d * d / (s * s * s), 1.0))
}

fn poisson_weights(p: &Vector4<f64>, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| 1.0 / model_and_jacobian(p, x).0.max(1.0)).collect()
}

fn cost(p: &Vector4<f64>, xs: &[f64], ys: &[f64], w: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(w)
        .map(|((&x, &y), &w)| {
            let r = y - model_and_jacobian(p, x).0;
            w * r * r
        })
        .sum()
}

fn normal_equations(p: &Vector4<f64>, xs: &[f64], ys: &[f64], w: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(w) {
        let (f, j) = model_and_jacobian(p, x);
        jtj += w * j * j.transpose();
        jtr += w * (y - f) * j;
    }
    (jtj, jtr)
}

/// Moment-based starting point.
fn initial_guess(xs: &[f64], ys: &[f64]) -> Vector4<f64> {
    let (imax, &ymax) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let mut sorted = ys.to_vec();
    sorted.sort_by(f64::total_cmp);
    let offset = sorted[..(sorted.len() / 4).max(1)].iter().sum::<f64>() / (sorted.len() / 4).max(1) as f64;
    let amplitude = ymax - offset;
    let spacing = (xs[xs.len() - 1] - xs[0]).abs() / (xs.len() - 1) as f64;
    let above = ys.iter().filter(|&&y| y - offset > 0.5 * amplitude).count() as f64;
    let sigma = (above * spacing / 2.354_820_045).max(spacing);
    Vector4::new(amplitude, xs[imax], sigma, offset)
}

fn levenberg_marquardt(
    mut p: Vector4<f64>,
    xs: &[f64],
    ys: &[f64],
    w: &[f64],
    sigma_floor: f64,
) -> Result<(Vector4<f64>, usize), ThermometryError> {
    let mut lambda = 1e-3;
    let mut c = cost(&p, xs, ys, w);
    for iter in 1..=MAX_LM_ITER {
        let (jtj, jtr) = normal_equations(&p, xs, ys, w);
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let ct = cost(&trial, xs, ys, w);
            if ct.is_finite() && ct <= c {
                let scale = Vector4::new(p[0].abs(), p[2].abs(), p[2].abs(), p[0].abs());
                let small = (0..4).all(|i| step[i].abs() <= 1e-13 * scale[i].max(f64::MIN_POSITIVE));
                let flat = c - ct <= 1e-15 * c;
                p = trial;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if small || flat || p[2].abs() < sigma_floor {
                    return Ok((p, iter));
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // No downhill step at any damping: at the optimum to roundoff.
            return Ok((p, iter));
        }
    }
    Err(ThermometryError::NoConvergence { iterations: MAX_LM_ITER, best: GaussianParams::from_vector(&p) })
}

/// Fits a Gaussian plus constant background to `(pixel, counts)` samples.
pub fn fit_gaussian(profile: &[(f64, f64)]) -> Result<GaussianFit, ThermometryError> {
    if profile.len() < 5 {
        return Err(ThermometryError::TooFewSamples { got: profile.len() });
    }
    let mut sorted = profile.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = sorted.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = sorted.iter().map(|s| s.1).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(ThermometryError::NonFinite);
    }
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
    if hi == lo {
        return Err(ThermometryError::ConstantProfile);
    }

    let mut p = initial_guess(&xs, &ys);
    let mut w = vec![1.0; xs.len()];
    let mut iterations = 0;
    for _ in 0..MAX_REWEIGHT {
        let (next, it) = levenberg_marquardt(p, &xs, &ys, &w, 0.1 * MIN_SIGMA_PX)?;
        iterations += it;
        let moved = (next - p).abs();
        p = next;
        let settled = moved[1] <= 1e-10 * p[2].abs() && moved[2] <= 1e-10 * p[2].abs();
        w = poisson_weights(&p, &xs);
        if p[2].abs() < MIN_SIGMA_PX {
            break;
        }
        if settled && iterations > it {
            break;
        }
    }
    let params = GaussianParams::from_vector(&p);
    if params.sigma < MIN_SIGMA_PX {
        return Err(ThermometryError::DegenerateFit { sigma: params.sigma });
    }

    let dof = xs.len().saturating_sub(4).max(1) as f64;
    let reduced_chi2 = cost(&p, &xs, &ys, &w) / dof;
    let (jtj, _) = normal_equations(&p, &xs, &ys, &w);
    let cov = jtj.try_inverse().ok_or(ThermometryError::DegenerateFit { sigma: params.sigma })?;
    let inflate = reduced_chi2.max(1.0);
    let half = |i: usize| Z95 * (cov[(i, i)].max(0.0) * inflate).sqrt();
    let ci95 = GaussianParams { amplitude: half(0), center: half(1), sigma: half(2), offset: half(3) };
    Ok(GaussianFit { params, ci95, reduced_chi2, iterations })
}
