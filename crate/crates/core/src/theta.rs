//! Riemann theta function by truncated lattice summation.
//!
//! Theta(z) = sum over N in Z^n of exp(2 pi i (N^T tau N / 2 + N^T z)).
//! Terms are paired N with -N, which makes evenness exact and halves the
//! work. The truncation radius comes from the Gaussian tail bound through
//! the smallest eigenvalue of Im tau.

use crate::surface::{tau_im_min_eig, tau_symmetry};
use crate::{c64, Complex64, Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct ThetaContext {
    pub tau: DMatrix<Complex64>,
    pub radius: i64,
    pub tol: f64,
    lambda_min: f64,
    /// Half-lattice representatives (first nonzero component positive).
    half_lattice: Vec<Vec<i64>>,
}

impl ThetaContext {
    pub fn new(tau: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        let n = tau.nrows();
        if tau.ncols() != n {
            return Err(Error::Invalid("tau must be square".into()));
        }
        let lambda_min = tau_im_min_eig(&tau);
        if n > 0 && lambda_min <= 0.0 {
            return Err(Error::TauNotPositive(lambda_min));
        }
        let sym = tau_symmetry(&tau);
        if sym > 1e-6 {
            return Err(Error::Invalid(format!("tau asymmetric by {sym:.2e}")));
        }
        let radius = if n == 0 { 0 } else { Self::radius_for(lambda_min, n, tol) };
        let half_lattice = half_lattice(n, radius);
        Ok(ThetaContext { tau, radius, tol, lambda_min, half_lattice })
    }

    /// Rebuild with an explicit radius (used by the doubling stability test).
    pub fn with_radius(&self, radius: i64) -> Self {
        let mut out = self.clone();
        out.radius = radius;
        out.half_lattice = half_lattice(self.genus(), radius);
        out
    }

    /// Smallest R with exp(-pi lambda R^2) (2R+3)^n < tol, plus safety margin.
    fn radius_for(lambda_min: f64, n: usize, tol: f64) -> i64 {
        let mut r = 1i64;
        loop {
            let bound = (-std::f64::consts::PI * lambda_min * (r as f64).powi(2)).exp()
                * ((2 * r + 3) as f64).powi(n as i32);
            if bound < tol || r > 64 {
                return r + 2;
            }
            r += 1;
        }
    }

    pub fn genus(&self) -> usize {
        self.tau.nrows()
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Theta(z). Exactly even in z by the paired summation.
    pub fn theta(&self, z: &DVector<Complex64>) -> Complex64 {
        let n = self.genus();
        assert_eq!(z.len(), n, "argument dimension mismatch");
        if n == 0 {
            return c64(1.0, 0.0);
        }
        let two_pi_i = c64(0.0, 2.0 * std::f64::consts::PI);
        let mut acc = c64(1.0, 0.0); // N = 0 term
        for nvec in &self.half_lattice {
            let mut q = c64(0.0, 0.0);
            for (i, &ni) in nvec.iter().enumerate() {
                if ni == 0 {
                    continue;
                }
                for (j, &nj) in nvec.iter().enumerate() {
                    if nj != 0 {
                        q += self.tau[(i, j)] * (ni as f64 * nj as f64);
                    }
                }
            }
            let mut nz = c64(0.0, 0.0);
            for (i, &ni) in nvec.iter().enumerate() {
                if ni != 0 {
                    nz += z[i] * (ni as f64);
                }
            }
            // exp(2 pi i (q/2 + nz)) + exp(2 pi i (q/2 - nz))
            let common = (two_pi_i * q * 0.5).exp();
            let osc = (two_pi_i * nz).exp();
            acc += common * (osc + 1.0 / osc);
        }
        acc
    }

    /// Analytic factor F with Theta(z + m + tau m') = F Theta(z):
    /// F = exp(2 pi i (-<m', z> - <m', tau m'>/2)).
    pub fn quasi_shift_factor(&self, z: &DVector<Complex64>, m_prime: &[i64]) -> Complex64 {
        let n = self.genus();
        assert_eq!(m_prime.len(), n);
        let two_pi_i = c64(0.0, 2.0 * std::f64::consts::PI);
        let mut mz = c64(0.0, 0.0);
        let mut mtm = c64(0.0, 0.0);
        for i in 0..n {
            mz += z[i] * (m_prime[i] as f64);
            for j in 0..n {
                mtm += self.tau[(i, j)] * (m_prime[i] as f64 * m_prime[j] as f64);
            }
        }
        (two_pi_i * (-mz - mtm * 0.5)).exp()
    }

    /// Shifted argument z + m + tau m'.
    pub fn shift(&self, z: &DVector<Complex64>, m: &[i64], m_prime: &[i64]) -> DVector<Complex64> {
        let n = self.genus();
        let mut out = z.clone();
        for i in 0..n {
            out[i] += c64(m[i] as f64, 0.0);
            for j in 0..n {
                out[i] += self.tau[(i, j)] * (m_prime[j] as f64);
            }
        }
        out
    }
}

fn half_lattice(n: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if n == 0 || r == 0 {
        return out;
    }
    let mut cur = vec![-r; n];
    loop {
        if cur.iter().any(|&x| x != 0) {
            let first = cur.iter().find(|&&x| x != 0).copied().unwrap();
            if first > 0 {
                out.push(cur.clone());
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            cur[i] += 1;
            if cur[i] <= r {
                break;
            }
            cur[i] = -r;
            i += 1;
        }
    }
}
