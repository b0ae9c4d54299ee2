//! Dense complex polynomials and companion-matrix root finding.

use crate::{c64, Complex64, Error, Result};
use nalgebra::DMatrix;

/// Polynomial with coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly(coeffs);
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly(vec![])
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| c64(c, 0.0)).collect())
    }

    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Poly(vec![c64(1.0, 0.0)]);
        for &r in roots {
            p = p.mul(&Poly(vec![-r, c64(1.0, 0.0)]));
        }
        p
    }

    fn trim(&mut self) {
        while let Some(last) = self.0.last() {
            if last.norm() == 0.0 && self.0.len() > 1 {
                self.0.pop();
            } else {
                break;
            }
        }
        if self.0.is_empty() {
            self.0.push(c64(0.0, 0.0));
        }
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.0.get(k).copied().unwrap_or(c64(0.0, 0.0))
    }

    pub fn leading(&self) -> Complex64 {
        *self.0.last().unwrap()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = c64(0.0, 0.0);
        for &c in self.0.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (i as f64 + 1.0))
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut out = vec![c64(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.coeff(i) + other.coeff(i);
        }
        Poly::new(out)
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::new(self.0.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![c64(0.0, 0.0); self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// All roots via companion-matrix eigenvalues, Newton-polished.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if n == 0 {
            return Ok(vec![]);
        }
        let lead = self.leading();
        if lead.norm() < 1e-300 {
            return Err(Error::Invalid("vanishing leading coefficient".into()));
        }
        let monic: Vec<Complex64> = self.0.iter().map(|&c| c / lead).collect();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = c64(1.0, 0.0);
        }
        for i in 0..n {
            m[(i, n - 1)] = -monic[i];
        }
        let schur = m.schur();
        let eig = schur
            .eigenvalues()
            .ok_or_else(|| Error::LinearSolve("companion eigenvalues unavailable".into()))?;
        let dp = self.derivative();
        let mut roots: Vec<Complex64> = eig.iter().cloned().collect();
        for r in roots.iter_mut() {
            for _ in 0..4 {
                let d = dp.eval(*r);
                if d.norm() < 1e-300 {
                    break;
                }
                let step = self.eval(*r) / d;
                *r -= step;
                if step.norm() < 1e-15 * (1.0 + r.norm()) {
                    break;
                }
            }
        }
        roots.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        Ok(roots)
    }
}
