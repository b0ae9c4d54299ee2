//! Leading-order long-time asymptotics: the Painleve regime near an odd-genus
//! collision line and the parabolic-cylinder regime of the even-genus case,
//! assembled from the upstream scalar ingredients.

use crate::background::{BackgroundParams, EvenModel, ExtendedSurfaceData, OddModel};
use crate::cauchy::{
    delta, delta_constants, pc_local_data, DeltaConstants, DeltaModel, GFunction, PcLocalData,
};
use crate::phase::{eval_theta_phase, stationary_points, CollisionEvent, PhaseModel};
use crate::scattering::ScatteringData;
use crate::special::{hm_solution, pc_beta};
use crate::surface::{SurfaceGeometry, SurfacePoint};
use crate::{c64, Complex64, Error, Result, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    PainleveOdd,
    PcEven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorOrder {
    /// O(t^{-1/2})
    InverseSqrtT,
    /// O(ln t / t)
    LogTOverT,
}

impl std::fmt::Display for ErrorOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorOrder::InverseSqrtT => write!(f, "t^-1/2"),
            ErrorOrder::LogTOverT => write!(f, "ln(t)/t"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsymptoticBundle {
    pub regime: Regime,
    pub varpi: f64,
    pub delta_inf: Complex64,
    pub i1: Complex64,
    pub g_inf: Complex64,
    pub i2: Complex64,
    pub rho: Complex64,
    pub nu: f64,
    pub beta12: Vec<Complex64>,
    pub beta21: Vec<Complex64>,
    pub q_model: Complex64,
    pub leading: Complex64,
    pub error_order: ErrorOrder,
}

/// Painleve scaling variables at a collision: varpi = 2 theta'(z_j; xi)
/// t^{2/3} / theta'''^{1/3} and lambda = (theta''' t / 8)^{1/3} (z - z_j).
/// Real cube roots keep the branch continuous along xi sweeps.
pub fn varpi_lambda(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    collision: &CollisionEvent,
    xi: f64,
    t: f64,
    z: Complex64,
) -> Result<(f64, Complex64)> {
    if t <= 0.0 {
        return Err(Error::Invalid("t must be positive".into()));
    }
    let th3 = collision.theta3;
    if th3.norm() < 1e-10 {
        return Err(Error::Invalid("collision has vanishing third derivative".into()));
    }
    let th1 = eval_theta_phase(surface, phase, c64(collision.z_j, 0.0), xi, 1)?;
    let cbrt3 = th3.re.cbrt();
    let varpi = 2.0 * th1.re * t.powf(2.0 / 3.0) / cbrt3;
    let lambda = (th3.re * t / 8.0).cbrt() * (z - collision.z_j);
    Ok((varpi, lambda))
}

/// xi giving the requested varpi at time t (Newton on theta').
pub fn xi_for_varpi(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    collision: &CollisionEvent,
    varpi: f64,
    t: f64,
) -> Result<f64> {
    let cbrt3 = collision.theta3.re.cbrt();
    let target = varpi * cbrt3 / (2.0 * t.powf(2.0 / 3.0));
    // theta'(z_j; xi) = (xi - xi_j) f'(z_j) + O((xi - xi_j)^2)
    let mut xi = collision.xi_j + target / collision.transversal;
    for _ in 0..4 {
        let th1 = eval_theta_phase(surface, phase, c64(collision.z_j, 0.0), xi, 1)?;
        xi -= (th1.re - target) / collision.transversal;
    }
    Ok(xi)
}

/// Residual of the cubic-phase approximation t(theta - theta(z_j)) -
/// (4/3) lambda^3 - varpi lambda at the point with the given lambda.
pub fn cubic_phase_residual(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    collision: &CollisionEvent,
    xi: f64,
    t: f64,
    lambda: Complex64,
) -> Result<f64> {
    let z = c64(collision.z_j, 0.0) + lambda / (collision.theta3.re * t / 8.0).cbrt();
    let (varpi, lam) = varpi_lambda(surface, phase, collision, xi, t, z)?;
    // theta(z) - theta(z_j) through the local segment, so the t-amplified
    // difference is not polluted by the quadrature of two long base paths
    let h = crate::phase::h_poly(phase, xi);
    let br = &surface.branch;
    let diff = crate::quad::segment(
        |s| h.eval(s) / br.w_upper(s),
        c64(collision.z_j, 0.0),
        z,
        surface.quad_order,
    );
    let model = 4.0 / 3.0 * lam * lam * lam + varpi * lam;
    Ok((t * diff - model).norm())
}

/// Everything the odd-genus assembler needs, precomputed once per
/// configuration and collision.
#[derive(Debug, Clone)]
pub struct OddPipeline {
    pub collision: CollisionEvent,
    pub kappa3: f64,
    pub delta_model: DeltaModel,
    pub consts: DeltaConstants,
    pub g: GFunction,
    pub odd_model: OddModel,
    pub rho: Complex64,
    /// gate constant C in |xi - xi_j| t^{2/3} <= C
    pub gate_c: f64,
}

impl OddPipeline {
    pub fn new(
        surface: &SurfaceGeometry,
        phase: &PhaseModel,
        scat: &ScatteringData,
        collision: CollisionEvent,
        gate_c: f64,
    ) -> Result<Self> {
        let br = &surface.branch;
        // the contour is anchored at the collision: kappa1 = kappa2 = z_j
        let portrait = stationary_points(surface, phase, collision.xi_j)?;
        let kappa3 = portrait
            .real_points
            .iter()
            .cloned()
            .find(|&x| (x - collision.z_j).abs() > 1e-4)
            .ok_or_else(|| Error::OutOfRegime("no simple third stationary point".into()))?;
        let delta_model = DeltaModel::new_odd_transition(br, collision.z_j, kappa3)?;
        let consts = delta_constants(&delta_model, surface, phase, scat)?;
        let g = crate::cauchy::solve_g_odd(surface, &delta_model, phase, scat)?;
        let odd_model = OddModel::new(surface, None)?;
        // rho: constant part of i conj(r(z_j)) delta^2(z_j) / (1 + |r(z_j)|^2);
        // the endpoint logs of the two components touching z_j cancel, so the
        // value is the limit from above
        let zr = c64(collision.z_j, 0.0);
        let eps = 1e-6 * (1.0 + collision.z_j.abs());
        let d1 = delta(&delta_model, br, scat, zr + I * eps, surface.quad_order)?;
        let d2 = delta(&delta_model, br, scat, zr + I * (0.5 * eps), surface.quad_order)?;
        let dsq = {
            let v = 2.0 * d2 - d1;
            v * v
        };
        let r = scat.r(zr);
        let rho = I * scat.r_conj_reflected(zr) * dsq / (1.0 + r.norm_sqr());
        Ok(OddPipeline { collision, kappa3, delta_model, consts, g, odd_model, rho, gate_c })
    }
}

/// Theorem assembly for the odd regime:
/// q = -delta(inf)^2 e^{2i(f0x+g0t)} Q~ + 2 e^{2i(f0x+g0t)} delta(inf)^2
///     u(varpi) (theta'''(z_j) t)^{-1/3},  error O(t^{-1/2}).
pub fn q_painleve_odd(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    params: &BackgroundParams,
    pipe: &OddPipeline,
    x: f64,
    t: f64,
) -> Result<AsymptoticBundle> {
    if t <= 0.0 {
        return Err(Error::Invalid("t must be positive".into()));
    }
    let xi = x / t;
    let gate = (xi - pipe.collision.xi_j).abs() * t.powf(2.0 / 3.0);
    if gate > pipe.gate_c {
        return Err(Error::OutOfRegime(format!(
            "|xi - xi_j| t^(2/3) = {gate:.3} exceeds C = {}; nearest window is \
             xi in {:.4} +- {:.4}",
            pipe.gate_c,
            pipe.collision.xi_j,
            pipe.gate_c / t.powf(2.0 / 3.0)
        )));
    }
    let (varpi, _) =
        varpi_lambda(surface, phase, &pipe.collision, xi, t, c64(pipe.collision.z_j, 0.0))?;
    let a = pipe.rho.im;
    let (u, _, _) = hm_solution(a, varpi)?;
    let alpha = pipe.g.alphas.first().copied().unwrap_or(0.0);
    let ct = pipe.odd_model.c_tilde(phase, params, alpha, x, t);
    let q_tilde = pipe.odd_model.q_tilde(&ct)?;
    let carrier = (2.0 * I * (phase.f0 * x + phase.g0 * t)).exp();
    let dinf2 = pipe.consts.delta_inf * pipe.consts.delta_inf;
    let painleve_term = 2.0 * dinf2 * u / (pipe.collision.theta3.re * t).cbrt();
    let leading = carrier * (-dinf2 * q_tilde + painleve_term);
    Ok(AsymptoticBundle {
        regime: Regime::PainleveOdd,
        varpi,
        delta_inf: pipe.consts.delta_inf,
        i1: pipe.consts.i1,
        g_inf: pipe.g.g_inf,
        i2: pipe.g.i2,
        rho: pipe.rho,
        nu: 0.0,
        beta12: vec![],
        beta21: vec![],
        q_model: q_tilde,
        leading,
        error_order: ErrorOrder::InverseSqrtT,
    })
}

/// Everything the even-genus assembler needs.
#[derive(Debug, Clone)]
pub struct EvenPipeline {
    pub delta_model: DeltaModel,
    pub consts: DeltaConstants,
    pub g: GFunction,
    pub pcs: Vec<PcLocalData>,
    pub ext: ExtendedSurfaceData,
    pub even_model: EvenModel,
    pub kappas: Vec<f64>,
    /// gate: |xi| < gate_d
    pub gate_d: f64,
}

impl EvenPipeline {
    pub fn new(
        surface: &SurfaceGeometry,
        phase: &PhaseModel,
        scat: &ScatteringData,
        xi: f64,
        seed: (Complex64, Complex64),
        gate_d: f64,
    ) -> Result<Self> {
        let portrait = stationary_points(surface, phase, xi)?;
        let delta_model = DeltaModel::new_even(&surface.branch, &portrait)?;
        let consts = delta_constants(&delta_model, surface, phase, scat)?;
        let ext = crate::background::solve_extended(surface, phase, xi, seed, 400)?;
        let g = crate::cauchy::solve_g_even(
            surface,
            &delta_model,
            phase,
            scat,
            ext.e00,
            ext.e01,
            portrait.real_points[0],
        )?;
        let mut pcs = Vec::new();
        if !scat.is_zero() {
            for which in 0..2 {
                pcs.push(pc_local_data(surface, phase, &portrait, &delta_model, scat, which)?);
            }
        }
        let even_model = EvenModel::new(surface, &ext, None)?;
        Ok(EvenPipeline {
            delta_model,
            consts,
            g,
            pcs,
            ext,
            even_model,
            kappas: portrait.real_points.clone(),
            gate_d,
        })
    }
}

/// Theorem assembly for the even regime:
/// q = 2i e^{2i(f0x+g0t)} e^{2(ln delta(inf) + i g(inf))} [ (E_1)_{12} + Q^ ],
/// where (E_1)_{12} collects the parabolic-cylinder contributions of the two
/// real stationary points; error O(ln t / t).
pub fn q_pc_even(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    params: &BackgroundParams,
    pipe: &EvenPipeline,
    x: f64,
    t: f64,
) -> Result<AsymptoticBundle> {
    let _ = surface;
    if t <= 0.0 {
        return Err(Error::Invalid("t must be positive".into()));
    }
    let xi = x / t;
    if xi.abs() >= pipe.gate_d {
        return Err(Error::OutOfRegime(format!(
            "|xi| = {:.4} is outside the gate d = {:.4}",
            xi.abs(),
            pipe.gate_d
        )));
    }
    let alphas = [
        pipe.g.alphas.first().copied().unwrap_or(0.0),
        pipe.g.alphas.get(1).copied().unwrap_or(0.0),
        pipe.g.alphas.get(2).copied().unwrap_or(0.0),
        pipe.g.alphas.get(3).copied().unwrap_or(0.0),
    ];
    let c_hat = pipe
        .even_model
        .c_hat(phase, params, &alphas, pipe.ext.beta_minus.re, x, t);
    let q_hat = pipe.even_model.q_hat(&c_hat)?;
    let mut e1_12 = c64(0.0, 0.0);
    let mut beta12 = Vec::new();
    let mut beta21 = Vec::new();
    let mut nu_out = 0.0;
    for pc in &pipe.pcs {
        let r_eff = pc.r_eff(t);
        let (b12, b21) = pc_beta(r_eff, pc.nu)?;
        beta12.push(b12);
        beta21.push(b21);
        nu_out = pc.nu;
        let n_alg = pipe
            .even_model
            .n_alg(&c_hat, SurfacePoint::upper(c64(pc.kappa, 0.0)))?;
        let inv = n_alg
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::LinearSolve("N^alg not invertible at kappa".into()))?;
        let mut anti = nalgebra::DMatrix::<Complex64>::zeros(2, 2);
        anti[(0, 1)] = b12;
        anti[(1, 0)] = -b21;
        let conj = &n_alg * &anti * &inv;
        e1_12 += conj[(0, 1)] / (2.0 * I * t.sqrt() * pc.psi_at_kappa);
    }
    let carrier = (2.0 * I * (phase.f0 * x + phase.g0 * t)).exp();
    let amp = (2.0 * (pipe.consts.delta_inf.ln() + I * pipe.g.g_inf)).exp();
    let leading = 2.0 * I * carrier * amp * (e1_12 + q_hat);
    Ok(AsymptoticBundle {
        regime: Regime::PcEven,
        varpi: 0.0,
        delta_inf: pipe.consts.delta_inf,
        i1: pipe.consts.i1,
        g_inf: pipe.g.g_inf,
        i2: pipe.g.i2,
        rho: c64(nu_out, 0.0),
        nu: nu_out,
        beta12,
        beta21,
        q_model: q_hat,
        leading,
        error_order: ErrorOrder::LogTOverT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{find_collisions, solve_phase};
    use crate::scattering::make_rational_r;
    use crate::surface::{build_surface, BranchSet};

    fn c(re: f64, im: f64) -> Complex64 {
        c64(re, im)
    }

    fn odd_fixture() -> (SurfaceGeometry, PhaseModel, BackgroundParams, CollisionEvent) {
        let s = build_surface(BranchSet::new(vec![c(-1.5, 1.0), c(1.5, 1.0)]).unwrap(), 48).unwrap();
        let m = solve_phase(&s).unwrap();
        let params = BackgroundParams::new(
            &s,
            vec![0.3],
            BackgroundParams::consistent_divisor(&s.branch).unwrap(),
        )
        .unwrap();
        let events = find_collisions(&s, &m).unwrap();
        // the left-of-all-cuts collision at positive xi drives the odd regime
        let ev = events
            .iter()
            .cloned()
            .find(|e| e.z_j < -1.5 && e.xi_j > 0.0)
            .expect("expected the left collision");
        (s, m, params, ev)
    }

    #[test]
    fn varpi_vanishes_on_the_critical_line() {
        let (s, m, _p, ev) = odd_fixture();
        let (varpi, _) = varpi_lambda(&s, &m, &ev, ev.xi_j, 1e3, c64(ev.z_j, 0.0)).unwrap();
        assert!(varpi.abs() < 1e-6, "varpi = {varpi}");
    }

    #[test]
    fn cubic_phase_residual_decays_like_t_to_minus_third() {
        // on the critical line the quadratic correction vanishes and the
        // remainder is a clean t^{-1/3}; off the line (varpi = 1) a signed
        // t^{-2/3} piece flattens small-t fits, so only decay is asserted
        let (s, m, _p, ev) = odd_fixture();
        let lambda = c64(1.0, 0.0);
        let mut pts = Vec::new();
        for t in [1e3, 1e4, 1e5] {
            let r = cubic_phase_residual(&s, &m, &ev, ev.xi_j, t, lambda).unwrap();
            pts.push((t.ln(), r.ln()));
        }
        let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
        assert!(
            (slope + 1.0 / 3.0).abs() < 0.05,
            "cubic-phase residual slope {slope:.4}"
        );
        let mut prev = f64::INFINITY;
        for t in [1e3, 1e4, 1e5] {
            let xi = xi_for_varpi(&s, &m, &ev, 1.0, t).unwrap();
            let r = cubic_phase_residual(&s, &m, &ev, xi, t, lambda).unwrap();
            assert!(r < prev, "off-line residual must decay");
            prev = r;
        }
    }

    #[test]
    fn varpi_sign_tracks_the_sweep() {
        // sign(varpi) matches sign of the offset times transversal over the
        // cube root, with |varpi| growing along the sweep: no branch flips
        let (s, m, _p, ev) = odd_fixture();
        let t = 1e3;
        let expected_sign = (ev.transversal / ev.theta3.re.cbrt()).signum();
        let mut prev_abs = 0.0;
        for k in 1..=3 {
            for sgn in [1.0, -1.0] {
                let xi = ev.xi_j + sgn * k as f64 * 1e-4;
                let (varpi, _) = varpi_lambda(&s, &m, &ev, xi, t, c64(ev.z_j, 0.0)).unwrap();
                assert_eq!(varpi.signum(), sgn * expected_sign, "k={k} sgn={sgn}");
                if sgn > 0.0 {
                    assert!(varpi.abs() > prev_abs);
                    prev_abs = varpi.abs();
                }
            }
        }
    }

    #[test]
    fn odd_reflectionless_collapse() {
        let (s, m, params, ev) = odd_fixture();
        let scat = ScatteringData::zero();
        let pipe = OddPipeline::new(&s, &m, &scat, ev, 1.0).unwrap();
        assert!((pipe.consts.delta_inf - 1.0).norm() < 1e-12);
        assert!(pipe.rho.norm() < 1e-12);
        let t = 100.0;
        let x = ev.xi_j * t;
        let b = q_painleve_odd(&s, &m, &params, &pipe, x, t).unwrap();
        let carrier = (2.0 * I * (m.f0 * x + m.g0 * t)).exp();
        let expected = -carrier * b.q_model;
        assert!((b.leading - expected).norm() < 1e-10, "collapse failed");
        assert_eq!(b.error_order, ErrorOrder::InverseSqrtT);
    }

    #[test]
    fn odd_painleve_term_scales_t_minus_third() {
        let (s, m, params, ev) = odd_fixture();
        let scat = make_rational_r(0.6, 1.1).unwrap();
        let pipe = OddPipeline::new(&s, &m, &scat, ev, 2.0).unwrap();
        let varpi = 0.8;
        let mut pts = Vec::new();
        for t in [1e2, 1e3, 1e4] {
            let xi = xi_for_varpi(&s, &m, &ev, varpi, t).unwrap();
            let x = xi * t;
            let b = q_painleve_odd(&s, &m, &params, &pipe, x, t).unwrap();
            let carrier = (2.0 * I * (m.f0 * x + m.g0 * t)).exp();
            let bg = -carrier * (pipe.consts.delta_inf * pipe.consts.delta_inf) * b.q_model;
            let pl = (b.leading - bg).norm();
            pts.push((t.ln(), pl.ln()));
        }
        let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
        assert!(
            (slope + 1.0 / 3.0).abs() < 0.02,
            "Painleve term slope {slope:.4}"
        );
    }

    #[test]
    fn odd_airy_tail_at_large_varpi() {
        let (s, m, params, ev) = odd_fixture();
        let scat = make_rational_r(0.6, 1.1).unwrap();
        let pipe = OddPipeline::new(&s, &m, &scat, ev, 40.0).unwrap();
        let t = 1e3;
        let varpi = 8.0;
        let xi = xi_for_varpi(&s, &m, &ev, varpi, t).unwrap();
        let x = xi * t;
        let b = q_painleve_odd(&s, &m, &params, &pipe, x, t).unwrap();
        let carrier = (2.0 * I * (m.f0 * x + m.g0 * t)).exp();
        let bg = -carrier * (pipe.consts.delta_inf * pipe.consts.delta_inf) * b.q_model;
        let pl = (b.leading - bg).norm();
        let ai = crate::special::airy(c64(varpi, 0.0)).re;
        let scale = (pipe.consts.delta_inf * pipe.consts.delta_inf).norm() * 2.0
            / (ev.theta3.re * t).cbrt().abs();
        let model = (pipe.rho.im * ai).abs() * scale;
        let envelope = varpi.powf(-0.25) * (-(4.0 / 3.0) * varpi.powf(1.5)).exp();
        assert!(
            (pl - model).abs() <= 10.0 * envelope * scale,
            "tail mismatch: {pl:.3e} vs {model:.3e}"
        );
    }

    #[test]
    fn regime_gate_rejects_outside() {
        let (s, m, params, ev) = odd_fixture();
        let scat = ScatteringData::zero();
        let pipe = OddPipeline::new(&s, &m, &scat, ev, 1.0).unwrap();
        let t = 1e3;
        let xi = ev.xi_j + 1.0;
        let r = q_painleve_odd(&s, &m, &params, &pipe, xi * t, t);
        assert!(matches!(r, Err(Error::OutOfRegime(_))));
    }
}
