//! Finite-genus background fields: the theta-quotient q^alg and the matrix
//! M^alg on the full surface, the odd-genus deformed model on the kept-cut
//! subsurface with its reconstruction constant, and the even-genus extended
//! surface (two extra conjugate cut pairs) with its regularized phase,
//! beta constants and deformed background.

use crate::cauchy::quartic_ratio_onesided;
use crate::phase::PhaseModel;
use crate::poly::Poly;
use crate::quad;
use crate::surface::{
    abel_map, abel_map_on_cut, build_surface, BranchSet, CutSide, Sheet, SurfaceGeometry,
    SurfacePoint,
};
use crate::theta::ThetaContext;
use crate::{c64, Complex64, Error, Result, I, ONE};
use nalgebra::{DMatrix, DVector};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct BackgroundParams {
    pub phases_phi: Vec<f64>,
    pub divisor: Vec<SurfacePoint>,
    /// d = phi(D) + K
    pub d_vec: DVector<Complex64>,
}

impl BackgroundParams {
    pub fn new(
        surface: &SurfaceGeometry,
        phases_phi: Vec<f64>,
        divisor: Vec<SurfacePoint>,
    ) -> Result<Self> {
        let n = surface.genus();
        if phases_phi.len() != n {
            return Err(Error::Invalid(format!(
                "need {n} phases, got {}",
                phases_phi.len()
            )));
        }
        if divisor.len() != n {
            return Err(Error::Invalid(format!(
                "divisor must have {n} points, got {}",
                divisor.len()
            )));
        }
        let mut d = surface.riemann_k.clone();
        for p in &divisor {
            d += abel_map(surface, *p)?;
        }
        Ok(BackgroundParams { phases_phi, divisor, d_vec: d })
    }

    /// Generic non-special divisor used for Riemann-constant validation:
    /// one point hovering above each cut 1..n.
    pub fn default_divisor(branch: &BranchSet) -> Vec<SurfacePoint> {
        (1..branch.num_cuts())
            .map(|k| SurfacePoint::upper(c64(branch.b(k), 1.5 * branch.a(k))))
            .collect()
    }

    /// The divisor consistent with the theta-quotient background: the n
    /// zeros of nu + 1/nu, i.e. the roots of prod(z - E_k) = prod(z - conj E_k)
    /// lifted to the sheet where nu^2 = -1. At these points the vanishing
    /// prefactor cancels the theta-denominator zero, which keeps the matrix
    /// holomorphic off the cuts; any other divisor breaks the construction.
    pub fn consistent_divisor(branch: &BranchSet) -> Result<Vec<SurfacePoint>> {
        let upper = Poly::from_roots(branch.points());
        let lower = Poly::from_roots(&branch.points().iter().map(|p| p.conj()).collect::<Vec<_>>());
        let diff = upper.add(&lower.scale(c64(-1.0, 0.0)));
        let roots = diff.roots()?;
        let mut out = Vec::with_capacity(roots.len());
        for z in roots {
            let mut nu2 = ONE;
            for k in 0..branch.num_cuts() {
                nu2 *= ONE / crate::cauchy::quartic_ratio(branch, k, z);
            }
            let nu2 = nu2 * nu2;
            let sheet = if (nu2 - 1.0).norm() < (nu2 + 1.0).norm() {
                Sheet::Upper
            } else {
                Sheet::Lower
            };
            out.push(SurfacePoint { z, sheet });
        }
        Ok(out)
    }
}

/// Theta-argument shift c(x, t): c_k = -(x C_k^f + t C_k^g + phi_k) / (2 pi)
/// for the cuts k = 1..n. The cut constants equal the b-periods of df and
/// dg, which is what makes the jump conjugation (x, t)-independent.
pub fn c_vector(phase: &PhaseModel, params: &BackgroundParams, x: f64, t: f64) -> DVector<Complex64> {
    let n = params.phases_phi.len();
    DVector::from_fn(n, |j, _| {
        let k = j + 1;
        c64(
            -(x * phase.cf[k] + t * phase.cg[k] + params.phases_phi[j]) / TWO_PI,
            0.0,
        )
    })
}

/// Quartic ratio nu(z) = prod ((z - E_k)/(z - conj E_k))^{1/4} on the upper
/// sheet (the inverse of the cauchy-module tilde product over all cuts).
fn nu_all(branch: &BranchSet, z: Complex64) -> Complex64 {
    let mut acc = ONE;
    for k in 0..branch.num_cuts() {
        acc *= crate::cauchy::quartic_ratio(branch, k, z);
    }
    ONE / acc
}

/// The 2x2 background matrix assembled from theta quotients, given the Abel
/// map value and nu at the evaluation point.
fn assemble_m(
    ctx: &ThetaContext,
    phi: &DVector<Complex64>,
    phi_inf: &DVector<Complex64>,
    nu: Complex64,
    c: &DVector<Complex64>,
    d: &DVector<Complex64>,
) -> DMatrix<Complex64> {
    let lam = |sgn_phi: f64, ds: &DVector<Complex64>, at: &DVector<Complex64>| -> Complex64 {
        let arg_num = DVector::from_fn(at.len(), |i, _| sgn_phi * at[i] + c[i] + ds[i]);
        let arg_den = DVector::from_fn(at.len(), |i, _| sgn_phi * at[i] + ds[i]);
        ctx.theta(&arg_num) / ctx.theta(&arg_den)
    };
    let d2 = -d;
    let l11_inf = lam(1.0, d, phi_inf);
    let l22_inf = lam(-1.0, &d2, phi_inf);
    let half = c64(0.5, 0.0);
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    let p = nu + 1.0 / nu;
    let q = nu - 1.0 / nu;
    m[(0, 0)] = half / l11_inf * p * lam(1.0, d, phi);
    m[(0, 1)] = half / l11_inf * q * lam(-1.0, d, phi);
    m[(1, 0)] = half / l22_inf * q * lam(1.0, &d2, phi);
    m[(1, 1)] = half / l22_inf * p * lam(-1.0, &d2, phi);
    m
}

/// M^alg at a surface point off the cuts.
pub fn m_alg(
    surface: &SurfaceGeometry,
    ctx: &ThetaContext,
    phase: &PhaseModel,
    params: &BackgroundParams,
    p: SurfacePoint,
    x: f64,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    let phi = abel_map(surface, p)?;
    let nu = match p.sheet {
        Sheet::Upper => nu_all(&surface.branch, p.z),
        Sheet::Lower => ONE / nu_all(&surface.branch, p.z),
    };
    let c = c_vector(phase, params, x, t);
    Ok(assemble_m(ctx, &phi, &surface.phi_inf_upper, nu, &c, &params.d_vec))
}

/// One-sided boundary value of M^alg on cut k at height y (upper sheet).
#[allow(clippy::too_many_arguments)]
pub fn m_alg_on_cut(
    surface: &SurfaceGeometry,
    ctx: &ThetaContext,
    phase: &PhaseModel,
    params: &BackgroundParams,
    k: usize,
    y: f64,
    side: CutSide,
    x: f64,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    let phi = abel_map_on_cut(surface, k, y, side, Sheet::Upper)?;
    let br = &surface.branch;
    let mut nu = ONE;
    for j in 0..br.num_cuts() {
        if j == k {
            nu *= ONE / quartic_ratio_onesided(br, k, y, side);
        } else {
            nu *= ONE / crate::cauchy::quartic_ratio(br, j, c64(br.b(k), y));
        }
    }
    let c = c_vector(phase, params, x, t);
    Ok(assemble_m(ctx, &phi, &surface.phi_inf_upper, nu, &c, &params.d_vec))
}

/// Jump matrix on cut k: [[0, i e^{-2 pi i c_k}], [i e^{2 pi i c_k}, 0]]
/// with c_0 = 0.
pub fn jump_matrix(
    phase: &PhaseModel,
    params: &BackgroundParams,
    k: usize,
    x: f64,
    t: f64,
) -> DMatrix<Complex64> {
    let ck = if k == 0 {
        c64(0.0, 0.0)
    } else {
        c_vector(phase, params, x, t)[k - 1]
    };
    let mut j = DMatrix::<Complex64>::zeros(2, 2);
    j[(0, 1)] = I * (TWO_PI * I * ck).exp();
    j[(1, 0)] = I * (-TWO_PI * I * ck).exp();
    j
}

/// (M_1)_{12}-type reconstruction constant: the theta quotient carrying the
/// background, with the -(i/2) Im(sum E_k) prefactor.
pub fn m1_12(
    surface: &SurfaceGeometry,
    ctx: &ThetaContext,
    phase: &PhaseModel,
    params: &BackgroundParams,
    x: f64,
    t: f64,
) -> Result<Complex64> {
    let c = c_vector(phase, params, x, t);
    let phi_inf = &surface.phi_inf_upper;
    let d = &params.d_vec;
    let n = surface.genus();
    let arg = |sgn: f64, shift_c: bool, ds: &DVector<Complex64>| -> Complex64 {
        let v = DVector::from_fn(n, |i, _| {
            sgn * phi_inf[i] + if shift_c { c[i] } else { c64(0.0, 0.0) } + ds[i]
        });
        ctx.theta(&v)
    };
    let num = arg(-1.0, true, d) * arg(1.0, false, d);
    let den = arg(-1.0, false, d) * arg(1.0, true, d);
    if den.norm() < 1e-12 {
        return Err(Error::Singular("theta denominator vanishes (divisor hit)".into()));
    }
    let asum: f64 = (0..surface.branch.num_cuts()).map(|k| surface.branch.a(k)).sum();
    Ok(-I * 0.5 * asum * num / den)
}

/// q^alg(x, t) = 2 i e^{2 i (f0 x + g0 t)} (M_1)_{12}.
pub fn q_alg(
    surface: &SurfaceGeometry,
    ctx: &ThetaContext,
    phase: &PhaseModel,
    params: &BackgroundParams,
    x: f64,
    t: f64,
) -> Result<Complex64> {
    let m12 = m1_12(surface, ctx, phase, params, x, t)?;
    let carrier = (2.0 * I * (phase.f0 * x + phase.g0 * t)).exp();
    Ok(2.0 * I * carrier * m12)
}

/// Envelope (q without the plane-wave carrier), x-periodic on the theta box.
pub fn q_alg_envelope(
    surface: &SurfaceGeometry,
    ctx: &ThetaContext,
    phase: &PhaseModel,
    params: &BackgroundParams,
    x: f64,
    t: f64,
) -> Result<Complex64> {
    Ok(2.0 * I * m1_12(surface, ctx, phase, params, x, t)?)
}

// ---------------------------------------------------------------------------
// Odd-genus deformed model

#[derive(Debug, Clone)]
pub struct OddModel {
    /// Kept original cut indices (k > floor(n/2)).
    pub kept: Vec<usize>,
    pub sub_surface: SurfaceGeometry,
    pub sub_ctx: ThetaContext,
    pub d_vec: DVector<Complex64>,
    /// Im of the kept endpoint sum.
    pub im_kept_sum: f64,
}

impl OddModel {
    /// Build the deformed model on the kept cuts. The sub-divisor defaults
    /// to points hovering over the kept cuts past the first.
    pub fn new(surface: &SurfaceGeometry, divisor: Option<Vec<SurfacePoint>>) -> Result<Self> {
        let n = surface.genus();
        if n % 2 == 0 {
            return Err(Error::Invalid("odd model needs odd genus".into()));
        }
        let kept: Vec<usize> = ((n / 2 + 1)..=n).collect();
        let pts: Vec<Complex64> = kept.iter().map(|&k| surface.branch.point(k)).collect();
        let im_kept_sum: f64 = pts.iter().map(|p| p.im).sum();
        let sub_branch = BranchSet::new(pts)?;
        let sub_surface = build_surface(sub_branch, surface.quad_order)?;
        let sub_ctx = ThetaContext::new(sub_surface.tau.clone(), 1e-10)?;
        let div = match divisor {
            Some(d) => d,
            None => BackgroundParams::consistent_divisor(&sub_surface.branch)?,
        };
        if div.len() != sub_surface.genus() {
            return Err(Error::Invalid(format!(
                "sub-divisor must have {} points",
                sub_surface.genus()
            )));
        }
        let mut d_vec = sub_surface.riemann_k.clone();
        for p in &div {
            d_vec += abel_map(&sub_surface, *p)?;
        }
        Ok(OddModel { kept, sub_surface, sub_ctx, d_vec, im_kept_sum })
    }

    /// c~ on the sub-surface: c~_j = -c_{kept_j} - alpha/pi for the kept cuts
    /// past the distinguished one.
    pub fn c_tilde(
        &self,
        phase: &PhaseModel,
        params: &BackgroundParams,
        alpha: f64,
        x: f64,
        t: f64,
    ) -> DVector<Complex64> {
        let c_full = c_vector(phase, params, x, t);
        let s = self.sub_surface.genus();
        DVector::from_fn(s, |j, _| {
            let orig = self.kept[j + 1];
            -c_full[orig - 1] - c64(alpha / PI, 0.0)
        })
    }

    /// Q~ = -(i/2) Im(sum of kept E_k) times the theta quotient with c~.
    pub fn q_tilde(&self, c_tilde: &DVector<Complex64>) -> Result<Complex64> {
        let s = self.sub_surface.genus();
        let phi_inf = &self.sub_surface.phi_inf_upper;
        let d = &self.d_vec;
        let arg = |sgn: f64, shift: bool, ds: &DVector<Complex64>| -> Complex64 {
            let v = DVector::from_fn(s, |i, _| {
                sgn * phi_inf[i] + if shift { c_tilde[i] } else { c64(0.0, 0.0) } + ds[i]
            });
            self.sub_ctx.theta(&v)
        };
        let num = arg(-1.0, true, d) * arg(1.0, false, d);
        let den = arg(-1.0, false, d) * arg(1.0, true, d);
        if den.norm() < 1e-12 {
            return Err(Error::Singular("theta denominator vanishes (divisor hit)".into()));
        }
        Ok(-I * 0.5 * self.im_kept_sum * num / den)
    }

    /// N^alg of the deformed model at an off-cut point.
    pub fn n_alg(&self, c_tilde: &DVector<Complex64>, p: SurfacePoint) -> Result<DMatrix<Complex64>> {
        let phi = abel_map(&self.sub_surface, p)?;
        let nu = match p.sheet {
            Sheet::Upper => nu_all(&self.sub_surface.branch, p.z),
            Sheet::Lower => ONE / nu_all(&self.sub_surface.branch, p.z),
        };
        Ok(assemble_m(
            &self.sub_ctx,
            &phi,
            &self.sub_surface.phi_inf_upper,
            nu,
            c_tilde,
            &self.d_vec,
        ))
    }

    /// One-sided boundary value on sub-cut j at height y.
    pub fn n_alg_on_cut(
        &self,
        c_tilde: &DVector<Complex64>,
        j: usize,
        y: f64,
        side: CutSide,
    ) -> Result<DMatrix<Complex64>> {
        let br = &self.sub_surface.branch;
        let phi = abel_map_on_cut(&self.sub_surface, j, y, side, Sheet::Upper)?;
        let mut nu = ONE;
        for m in 0..br.num_cuts() {
            if m == j {
                nu *= ONE / quartic_ratio_onesided(br, j, y, side);
            } else {
                nu *= ONE / crate::cauchy::quartic_ratio(br, m, c64(br.b(j), y));
            }
        }
        Ok(assemble_m(
            &self.sub_ctx,
            &phi,
            &self.sub_surface.phi_inf_upper,
            nu,
            c_tilde,
            &self.d_vec,
        ))
    }

    /// Jump matrix on sub-cut j with the alpha-shifted constants.
    pub fn jump_matrix(&self, c_tilde: &DVector<Complex64>, j: usize) -> DMatrix<Complex64> {
        let cj = if j == 0 { c64(0.0, 0.0) } else { c_tilde[j - 1] };
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 1)] = I * (TWO_PI * I * cj).exp();
        m[(1, 0)] = I * (-TWO_PI * I * cj).exp();
        m
    }
}

// ---------------------------------------------------------------------------
// Even-genus extended surface

#[derive(Debug, Clone)]
pub struct ExtendedSurfaceData {
    pub e00: Complex64,
    pub e01: Complex64,
    /// Monic degree-n factor of the regularized phase numerator.
    pub h_ext: Poly,
    pub residual: f64,
    pub beta_minus: Complex64,
    pub beta_plus: Complex64,
    pub xi: f64,
}

/// sqrt((z - e)(z - conj e)) with cut on the vertical segment, ~ z - Re e.
fn pair_factor(e: Complex64, z: Complex64) -> Complex64 {
    let m = c64(e.re, 0.0);
    let h = c64(0.0, e.im);
    let d = z - m;
    d * (ONE - (h * h) / (d * d)).sqrt()
}

/// Residual of the a-period + asymptotic system for given (e00, e01),
/// solving the monic degree-n factor by least squares.
pub fn extended_residual(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    xi: f64,
    e00: Complex64,
    e01: Complex64,
) -> Result<(f64, Poly, BranchSet)> {
    let _ = phase;
    let n = surface.genus();
    let order = surface.quad_order;
    let mut pts: Vec<Complex64> = surface.branch.points().to_vec();
    pts.push(e00);
    pts.push(e01);
    let ext = BranchSet::new(pts)?;
    let quartic = Poly::from_roots(&[e00, e00.conj(), e01, e01.conj()]);
    let p_ext = ext.p_poly();
    let deg = p_ext.degree();
    let a1 = 0.5 * p_ext.coeff(deg - 1);
    let a2 = 0.5 * (p_ext.coeff(deg - 2) - a1 * a1);
    let q3 = quartic.coeff(3);
    let q2 = quartic.coeff(2);

    let ncond = (ext.num_cuts() - 1) + 2;
    let mut a = DMatrix::<Complex64>::zeros(ncond, n);
    let mut b = DVector::<Complex64>::zeros(ncond);
    for m in 1..ext.num_cuts() {
        for j in 0..n {
            let mono = Poly::new({
                let mut v = vec![c64(0.0, 0.0); j + 1];
                v[j] = ONE;
                v
            });
            let numer = mono.mul(&quartic).scale(c64(4.0, 0.0));
            a[(m - 1, j)] = crate::surface::cycle_integral(
                &ext,
                &numer,
                crate::surface::Cycle::AUpperHalf(m),
                order,
            );
        }
        let mono_n = Poly::new({
            let mut v = vec![c64(0.0, 0.0); n + 1];
            v[n] = ONE;
            v
        });
        let numer_n = mono_n.mul(&quartic).scale(c64(4.0, 0.0));
        b[m - 1] = -crate::surface::cycle_integral(
            &ext,
            &numer_n,
            crate::surface::Cycle::AUpperHalf(m),
            order,
        );
    }
    // z^0 coefficient of dtheta: H3 - 4 a1 = xi with H3 = 4 (h_{n-1} + q3)
    let row = ext.num_cuts() - 1;
    if n >= 1 {
        a[(row, n - 1)] = c64(4.0, 0.0);
    }
    b[row] = c64(xi, 0.0) + 4.0 * a1 - 4.0 * q3;
    // z^{-1}: H2 - H3 a1 + 4 (a1^2 - a2) = 0, H2 = 4 (h_{n-2} + h_{n-1} q3 + q2)
    let row2 = row + 1;
    if n >= 2 {
        a[(row2, n - 2)] = c64(4.0, 0.0);
    }
    if n >= 1 {
        a[(row2, n - 1)] = 4.0 * q3 - 4.0 * a1;
    }
    b[row2] = -4.0 * q2 + 4.0 * a1 * q3 - 4.0 * (a1 * a1 - a2);

    let svd = a.clone().svd(true, true);
    let h = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::LinearSolve(e.to_string()))?;
    let resid = (&a * &h - &b).norm();
    let mut coeffs: Vec<Complex64> = h.iter().cloned().collect();
    coeffs.push(ONE);
    Ok((resid, Poly::new(coeffs), ext))
}

/// d theta_ext / dz = 4 h_ext(z) s00(z) s01(z) / w(z) on the upper sheet of
/// the original surface.
pub fn dtheta_ext(surface: &SurfaceGeometry, ext: &ExtendedSurfaceData, z: Complex64) -> Complex64 {
    4.0 * ext.h_ext.eval(z) * pair_factor(ext.e00, z) * pair_factor(ext.e01, z)
        / surface.branch.w_upper(z)
}

/// theta_ext(z) normalized by theta_ext - (2 z^2 + xi z) -> 0 at infinity,
/// evaluated along an upward route and a stable tail.
pub fn theta_ext_at(
    surface: &SurfaceGeometry,
    ext: &ExtendedSurfaceData,
    z: Complex64,
) -> Result<Complex64> {
    let br = &surface.branch;
    let order = surface.quad_order;
    let mut tops = br.clearance();
    tops = tops.max(ext.e00.im * 2.0).max(ext.e01.im * 2.0);
    for k in 0..br.num_cuts() {
        if (z.re - br.b(k)).abs() < 1e-9 && z.im < br.a(k) {
            return Err(Error::Invalid("point is vertically aligned with a cut".into()));
        }
    }
    for e in [ext.e00, ext.e01] {
        if (z.re - e.re).abs() < 1e-9 && z.im < e.im && (z - e).norm() > 1e-9 {
            return Err(Error::Invalid("point is vertically aligned with a new cut".into()));
        }
    }
    let x_far = br.points().iter().map(|p| p.re.abs()).fold(0.0, f64::max) * 2.0 + 4.0 * tops + 4.0;
    let decay = |s: Complex64| dtheta_ext(surface, ext, s) - (4.0 * s + ext.xi);
    let p1 = c64(z.re, tops);
    let p2 = c64(x_far, tops);
    let p3 = c64(x_far, 0.0);
    let mut tail = quad::segment_chunked(&decay, z, p1, order, tops);
    tail += quad::segment_chunked(&decay, p1, p2, order, tops);
    tail += quad::segment(&decay, p2, p3, order);
    tail += quad::ray_to_infinity(&decay, p3, c64(4.0 * x_far, 0.0), order);
    // theta(z) = 2 z^2 + xi z - int_z^inf (dtheta - 4s - xi) ds
    Ok(2.0 * z * z + ext.xi * z + tail)
}

/// Solve for (E00, E01) by a Nelder-Mead descent on the period-system
/// residual, then attach the beta constants.
pub fn solve_extended(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    xi: f64,
    seed: (Complex64, Complex64),
    max_iter: usize,
) -> Result<ExtendedSurfaceData> {
    let f = |v: &[f64; 4]| -> f64 {
        let e01 = c64(v[0], v[1].abs().max(1e-4));
        let e00 = c64(v[2], v[3].abs().max(1e-4));
        match extended_residual(surface, phase, xi, e00, e01) {
            Ok((r, _, _)) => r,
            Err(_) => 1e6,
        }
    };
    let x0 = [seed.1.re, seed.1.im, seed.0.re, seed.0.im];
    let scale = 0.05 * surface.branch.min_cut_gap();
    let best = nelder_mead(&f, x0, scale, max_iter);
    let e01 = c64(best[0], best[1].abs().max(1e-4));
    let e00 = c64(best[2], best[3].abs().max(1e-4));
    let (resid, h_ext, _) = extended_residual(surface, phase, xi, e00, e01)?;
    if resid > 1e-8 {
        return Err(Error::NoConvergence(format!(
            "extended-surface solve stalled at residual {resid:.3e}; \
             best (E00, E01) = ({e00}, {e01}); supply a better seed"
        )));
    }
    let mut data = ExtendedSurfaceData {
        e00,
        e01,
        h_ext,
        residual: resid,
        beta_minus: c64(0.0, 0.0),
        beta_plus: c64(0.0, 0.0),
        xi,
    };
    data.beta_minus = theta_ext_at(surface, &data, e00)?;
    // beta_plus: half the one-sided difference across the E01 cut at the
    // real-axis crossing, Richardson-extrapolated to the cut
    let eps = 1e-5 * (1.0 + e01.norm());
    let east = theta_ext_at(surface, &data, c64(e01.re + eps, 0.0))?;
    let east2 = theta_ext_at(surface, &data, c64(e01.re + 0.5 * eps, 0.0))?;
    let west = theta_ext_at(surface, &data, c64(e01.re - eps, 0.0))?;
    let west2 = theta_ext_at(surface, &data, c64(e01.re - 0.5 * eps, 0.0))?;
    let plus = 2.0 * west2 - west;
    let minus = 2.0 * east2 - east;
    data.beta_plus = 0.5 * (plus - minus);
    Ok(data)
}

/// Pure validation mode: residual report for user-supplied endpoints.
pub fn validate_extended(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    xi: f64,
    e00: Complex64,
    e01: Complex64,
) -> Result<f64> {
    Ok(extended_residual(surface, phase, xi, e00, e01)?.0)
}

fn nelder_mead(f: &dyn Fn(&[f64; 4]) -> f64, x0: [f64; 4], scale: f64, max_iter: usize) -> [f64; 4] {
    let n = 4;
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0, f(&x0)));
    for i in 0..n {
        let mut v = x0;
        v[i] += scale;
        simplex.push((v, f(&v)));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if simplex[0].1 < 1e-10 {
            break;
        }
        let centroid = {
            let mut c = [0.0; 4];
            for (v, _) in simplex.iter().take(n) {
                for i in 0..n {
                    c[i] += v[i] / n as f64;
                }
            }
            c
        };
        let worst = simplex[n];
        let reflect = |t: f64| {
            let mut v = [0.0; 4];
            for i in 0..n {
                v[i] = centroid[i] + t * (centroid[i] - worst.0[i]);
            }
            v
        };
        let xr = reflect(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = reflect(2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = reflect(-0.5);
            let fc = f(&xc);
            if fc < worst.1 {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for item in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        item.0[i] = best[i] + 0.5 * (item.0[i] - best[i]);
                    }
                    item.1 = f(&item.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    simplex[0].0
}

// ---------------------------------------------------------------------------
// Even-genus deformed background

#[derive(Debug, Clone)]
pub struct EvenModel {
    pub ext_surface: SurfaceGeometry,
    pub ext_ctx: ThetaContext,
    pub d_vec: DVector<Complex64>,
    /// sorted indices of the two added cuts in the extended cut list
    pub idx_e01: usize,
    pub idx_e00: usize,
    /// original cut index per extended cut (None for the added ones)
    pub orig_of: Vec<Option<usize>>,
    pub im_total: f64,
}

impl EvenModel {
    pub fn new(
        surface: &SurfaceGeometry,
        ext: &ExtendedSurfaceData,
        divisor: Option<Vec<SurfacePoint>>,
    ) -> Result<Self> {
        let mut pts: Vec<Complex64> = surface.branch.points().to_vec();
        pts.push(ext.e00);
        pts.push(ext.e01);
        let branch = BranchSet::new(pts)?;
        let ext_surface = build_surface(branch, surface.quad_order)?;
        let ext_ctx = ThetaContext::new(ext_surface.tau.clone(), 1e-10)?;
        let ncuts = ext_surface.branch.num_cuts();
        let mut orig_of: Vec<Option<usize>> = Vec::with_capacity(ncuts);
        let mut idx_e01 = usize::MAX;
        let mut idx_e00 = usize::MAX;
        for m in 0..ncuts {
            let p = ext_surface.branch.point(m);
            if (p - ext.e01).norm() < 1e-10 {
                idx_e01 = m;
                orig_of.push(None);
            } else if (p - ext.e00).norm() < 1e-10 {
                idx_e00 = m;
                orig_of.push(None);
            } else {
                let orig = surface
                    .branch
                    .points()
                    .iter()
                    .position(|q| (q - p).norm() < 1e-10)
                    .ok_or_else(|| Error::Invalid("cut mapping failed".into()))?;
                orig_of.push(Some(orig));
            }
        }
        if idx_e01 == usize::MAX || idx_e00 == usize::MAX {
            return Err(Error::Invalid("added cuts not found in the extended list".into()));
        }
        let im_total: f64 = ext_surface.branch.points().iter().map(|p| p.im).sum();
        let div = match divisor {
            Some(d) => d,
            None => BackgroundParams::consistent_divisor(&ext_surface.branch)?,
        };
        if div.len() != ext_surface.genus() {
            return Err(Error::Invalid(format!(
                "extended divisor must have {} points",
                ext_surface.genus()
            )));
        }
        let mut d_vec = ext_surface.riemann_k.clone();
        for p in &div {
            d_vec += abel_map(&ext_surface, *p)?;
        }
        Ok(EvenModel { ext_surface, ext_ctx, d_vec, idx_e01, idx_e00, orig_of, im_total })
    }

    /// c-hat(t): the added cuts carry -(t beta^- + alpha1)/pi (the E00 one
    /// with an extra -alpha2/pi), original cuts left of the pair carry
    /// -c_k - alpha3/pi, those right of it -c_k - alpha2/pi.
    #[allow(clippy::too_many_arguments)]
    pub fn c_hat(
        &self,
        phase: &PhaseModel,
        params: &BackgroundParams,
        alphas: &[f64; 4],
        beta_minus: f64,
        x: f64,
        t: f64,
    ) -> DVector<Complex64> {
        let c_full = c_vector(phase, params, x, t);
        let ng = self.ext_surface.genus();
        DVector::from_fn(ng, |j, _| {
            let m = j + 1;
            if m == self.idx_e01 {
                c64(-(t * beta_minus + alphas[0]) / PI, 0.0)
            } else if m == self.idx_e00 {
                c64(-alphas[1] / PI - (t * beta_minus + alphas[0]) / PI, 0.0)
            } else if let Some(orig) = self.orig_of[m] {
                let alpha = if m < self.idx_e01 { alphas[2] } else { alphas[1] };
                if orig == 0 {
                    c64(-alpha / PI, 0.0)
                } else {
                    -c_full[orig - 1] - c64(alpha / PI, 0.0)
                }
            } else {
                c64(0.0, 0.0)
            }
        })
    }

    /// Q-hat from the extended theta quotient with prefactor
    /// -(i/2) Im(sum E_k + E00 + E01).
    pub fn q_hat(&self, c_hat: &DVector<Complex64>) -> Result<Complex64> {
        let ng = self.ext_surface.genus();
        let phi_inf = &self.ext_surface.phi_inf_upper;
        let d = &self.d_vec;
        let arg = |sgn: f64, shift: bool, ds: &DVector<Complex64>| -> Complex64 {
            let v = DVector::from_fn(ng, |i, _| {
                sgn * phi_inf[i] + if shift { c_hat[i] } else { c64(0.0, 0.0) } + ds[i]
            });
            self.ext_ctx.theta(&v)
        };
        let num = arg(-1.0, true, d) * arg(1.0, false, d);
        let den = arg(-1.0, false, d) * arg(1.0, true, d);
        if den.norm() < 1e-12 {
            return Err(Error::Singular("theta denominator vanishes (divisor hit)".into()));
        }
        Ok(-I * 0.5 * self.im_total * num / den)
    }

    /// N^alg of the even model at an off-cut point.
    pub fn n_alg(&self, c_hat: &DVector<Complex64>, p: SurfacePoint) -> Result<DMatrix<Complex64>> {
        let phi = abel_map(&self.ext_surface, p)?;
        let nu = match p.sheet {
            Sheet::Upper => nu_all(&self.ext_surface.branch, p.z),
            Sheet::Lower => ONE / nu_all(&self.ext_surface.branch, p.z),
        };
        Ok(assemble_m(
            &self.ext_ctx,
            &phi,
            &self.ext_surface.phi_inf_upper,
            nu,
            c_hat,
            &self.d_vec,
        ))
    }
}

/// Theta-divisor validation of the Riemann constants: Theta(phi(P) - phi(D) - K)
/// must vanish at each divisor point and stay away from zero at controls.
/// Returns (max |Theta| over divisor points, min |Theta| over controls).
pub fn theta_divisor_check(
    surface: &SurfaceGeometry,
    ctx: &ThetaContext,
    divisor: &[SurfacePoint],
) -> Result<(f64, f64)> {
    let n = surface.genus();
    let mut d = surface.riemann_k.clone();
    for p in divisor {
        d += abel_map(surface, *p)?;
    }
    let eval = |p: SurfacePoint| -> Result<f64> {
        let phi = abel_map(surface, p)?;
        let arg = DVector::from_fn(n, |i, _| phi[i] - d[i]);
        Ok(ctx.theta(&arg).norm())
    };
    let mut worst_zero: f64 = 0.0;
    for p in divisor {
        worst_zero = worst_zero.max(eval(*p)?);
    }
    let br = &surface.branch;
    let mut best_ctrl = f64::INFINITY;
    for k in 0..br.num_cuts() {
        let ctrl = SurfacePoint::upper(c64(br.b(k) + 0.4 * br.min_cut_gap(), -2.2 * br.a(k)));
        best_ctrl = best_ctrl.min(eval(ctrl)?);
    }
    Ok((worst_zero, best_ctrl))
}
