//! Dimensionless crystal potential with analytic gradient and Hessian.
//!
//! Lengths are in units of `ℓ`, energies in `M·ωz²·ℓ²`. Coordinates are
//! stacked by axis: `q = [x₀ … x_{N−1}, y₀ … y_{N−1}, z₀ … z_{N−1}]`.

use nalgebra::{DMatrix, DVector};

use super::CrystalError;

/// Closest allowed ion separation (in `ℓ`) before the configuration is
/// treated as singular.
const MIN_SEPARATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub n: usize,
    /// `(ωx/ωz)², (ωy/ωz)², 1`.
    pub alpha: [f64; 3],
    /// Lattice wavevector `k·ℓ`.
    pub kappa: f64,
    /// Signed lattice depth `U0/(M·ωz²·ℓ²)`; positive puts minima at the nodes.
    pub u0: f64,
    /// Lattice phase: the potential is `u0·sin²(κz − phase)`.
    pub phase: f64,
}

impl Potential {
    #[inline]
    fn at(q: &[f64], n: usize, i: usize) -> [f64; 3] {
        [q[i], q[n + i], q[2 * n + i]]
    }

    fn check_len(&self, q: &[f64]) {
        assert_eq!(q.len(), 3 * self.n, "coordinate vector must have 3N entries");
    }

    pub fn energy(&self, q: &[f64]) -> Result<f64, CrystalError> {
        self.check_len(q);
        let n = self.n;
        let mut e = 0.0;
        for i in 0..n {
            let p = Self::at(q, n, i);
            e += 0.5 * (self.alpha[0] * p[0] * p[0] + self.alpha[1] * p[1] * p[1] + self.alpha[2] * p[2] * p[2]);
            if self.u0 != 0.0 {
                e += self.u0 * (self.kappa * p[2] - self.phase).sin().powi(2);
            }
            for j in (i + 1)..n {
                e += 1.0 / self.separation(q, i, j)?;
            }
        }
        Ok(e)
    }

    fn separation(&self, q: &[f64], i: usize, j: usize) -> Result<f64, CrystalError> {
        let (a, b) = (Self::at(q, self.n, i), Self::at(q, self.n, j));
        let r = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        if !(r > MIN_SEPARATION) {
            return Err(CrystalError::CoincidentIons { i, j });
        }
        Ok(r)
    }

    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>, CrystalError> {
        self.check_len(q);
        let n = self.n;
        let mut g = vec![0.0; 3 * n];
        for i in 0..n {
            let p = Self::at(q, n, i);
            for a in 0..3 {
                g[a * n + i] += self.alpha[a] * p[a];
            }
            if self.u0 != 0.0 {
                g[2 * n + i] += self.u0 * self.kappa * (2.0 * (self.kappa * p[2] - self.phase)).sin();
            }
            for j in (i + 1)..n {
                let r = self.separation(q, i, j)?;
                let pj = Self::at(q, n, j);
                let r3 = r * r * r;
                for a in 0..3 {
                    let f = (p[a] - pj[a]) / r3;
                    g[a * n + i] -= f;
                    g[a * n + j] += f;
                }
            }
        }
        Ok(g)
    }

    pub fn hessian(&self, q: &[f64]) -> Result<DMatrix<f64>, CrystalError> {
        self.check_len(q);
        let n = self.n;
        let mut h = DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            for a in 0..3 {
                h[(a * n + i, a * n + i)] += self.alpha[a];
            }
            if self.u0 != 0.0 {
                let z = q[2 * n + i];
                h[(2 * n + i, 2 * n + i)] += 2.0 * self.kappa * self.kappa * self.u0 * (2.0 * (self.kappa * z - self.phase)).cos();
            }
            for j in (i + 1)..n {
                let r = self.separation(q, i, j)?;
                let (pi, pj) = (Self::at(q, n, i), Self::at(q, n, j));
                let d = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
                let r3 = r * r * r;
                let r5 = r3 * r * r;
                for a in 0..3 {
                    for b in 0..3 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        let self_term = -delta / r3 + 3.0 * d[a] * d[b] / r5;
                        h[(a * n + i, b * n + i)] += self_term;
                        h[(a * n + j, b * n + j)] += self_term;
                        h[(a * n + i, b * n + j)] -= self_term;
                        h[(a * n + j, b * n + i)] -= self_term;
                    }
                }
            }
        }
        Ok(h)
    }

    pub fn gradient_vector(&self, q: &[f64]) -> Result<DVector<f64>, CrystalError> {
        Ok(DVector::from_vec(self.gradient(q)?))
    }
}

/// Stacked coordinates from per-ion triples.
pub fn stack(positions: &[[f64; 3]]) -> Vec<f64> {
    let n = positions.len();
    let mut q = vec![0.0; 3 * n];
    for (i, p) in positions.iter().enumerate() {
        for a in 0..3 {
            q[a * n + i] = p[a];
        }
    }
    q
}

/// Per-ion triples from stacked coordinates.
pub fn unstack(q: &[f64]) -> Vec<[f64; 3]> {
    let n = q.len() / 3;
    (0..n).map(|i| [q[i], q[n + i], q[2 * n + i]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Potential, Vec<f64>) {
        let pot = Potential { n: 3, alpha: [4.2, 3.9, 1.0], kappa: 37.0, u0: 0.013, phase: 0.4 };
        let q = stack(&[[0.11, -0.07, -1.02], [-0.05, 0.13, 0.03], [0.02, 0.01, 1.11]]);
        (pot, q)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (pot, q) = sample();
        let g = pot.gradient(&q).unwrap();
        for l in 0..q.len() {
            let h = 1e-6;
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[l] += h;
            qm[l] -= h;
            let fd = (pot.energy(&qp).unwrap() - pot.energy(&qm).unwrap()) / (2.0 * h);
            assert!((fd - g[l]).abs() < 1e-7, "l={l}: {fd} vs {}", g[l]);
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let (pot, q) = sample();
        let h = pot.hessian(&q).unwrap();
        assert!((&h - h.transpose()).amax() < 1e-14);
        for l in 0..q.len() {
            let eps = 1e-6;
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[l] += eps;
            qm[l] -= eps;
            let gp = pot.gradient(&qp).unwrap();
            let gm = pot.gradient(&qm).unwrap();
            for m in 0..q.len() {
                let fd = (gp[m] - gm[m]) / (2.0 * eps);
                assert!((fd - h[(m, l)]).abs() < 1e-6, "({m},{l}): {fd} vs {}", h[(m, l)]);
            }
        }
    }

    #[test]
    fn coincident_ions_are_rejected() {
        let pot = Potential { n: 2, alpha: [1.0; 3], kappa: 0.0, u0: 0.0, phase: 0.0 };
        let q = stack(&[[0.0, 0.0, 0.5], [0.0, 0.0, 0.5]]);
        assert_eq!(pot.energy(&q), Err(CrystalError::CoincidentIons { i: 0, j: 1 }));
        assert!(pot.gradient(&q).is_err());
    }

    #[test]
    fn stacking_round_trips() {
        let p = vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert_eq!(stack(&p), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(unstack(&stack(&p)), p);
    }
}
