//! Synthetic solitonless scattering data: a Schwarz-symmetric reflection
//! coefficient with 1/z decay and no real poles. The cut-jump logs that
//! would come from a_+/a_- are taken to vanish; there is no constructive
//! recipe for them from data, and zero is the self-consistent baseline.

use crate::{c64, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReflectionFamily {
    Zero,
    /// r(z) = amplitude * pole_scale * (z + pole_scale) / (z^2 + pole_scale^2).
    /// Real coefficients, poles at +- i pole_scale, max modulus on the real
    /// line equal to amplitude.
    Rational { amplitude: f64, pole_scale: f64 },
}

#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub reflection: ReflectionFamily,
    pub solitonless: bool,
}

impl ScatteringData {
    pub fn zero() -> Self {
        ScatteringData { reflection: ReflectionFamily::Zero, solitonless: true }
    }

    pub fn r(&self, z: Complex64) -> Complex64 {
        match self.reflection {
            ReflectionFamily::Zero => c64(0.0, 0.0),
            ReflectionFamily::Rational { amplitude, pole_scale } => {
                amplitude * pole_scale * (z + pole_scale) / (z * z + pole_scale * pole_scale)
            }
        }
    }

    /// conj(r(conj z)): the reflected-conjugate partner entering the jump
    /// matrices. For the real-coefficient families it equals r(z).
    pub fn r_conj_reflected(&self, z: Complex64) -> Complex64 {
        self.r(z.conj()).conj()
    }

    /// Analytic continuation of 1 + |r|^2 off the real line:
    /// 1 + r(z) conj(r(conj z)).
    pub fn one_plus_rr(&self, z: Complex64) -> Complex64 {
        c64(1.0, 0.0) + self.r(z) * self.r_conj_reflected(z)
    }

    /// log(1 + |r(x)|^2) for real x; nonnegative, principal branch.
    pub fn log_one_plus_rsq(&self, x: f64) -> f64 {
        let r = self.r(c64(x, 0.0));
        (1.0 + r.norm_sqr()).ln()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.reflection, ReflectionFamily::Zero)
    }
}

pub fn make_rational_r(amplitude: f64, pole_scale: f64) -> Result<ScatteringData> {
    if amplitude < 0.0 {
        return Err(Error::Invalid("amplitude must be nonnegative".into()));
    }
    if !(pole_scale > 0.0) {
        return Err(Error::Invalid("pole_scale must be positive (real poles otherwise)".into()));
    }
    if amplitude == 0.0 {
        return Ok(ScatteringData::zero());
    }
    Ok(ScatteringData {
        reflection: ReflectionFamily::Rational { amplitude, pole_scale },
        solitonless: true,
    })
}
