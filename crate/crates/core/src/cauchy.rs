//! Scalar Cauchy-integral functions: the delta function (odd and even
//! variants) with its constants delta(inf) and I_1, the g-function with its
//! real alpha parameters solved from moment conditions, and the local
//! parabolic-cylinder data (rho, the chi corrections, the delta-hat split,
//! effective reflection constants).

use crate::phase::PhaseModel;
use crate::phase::StationaryPortrait;
use crate::quad;
use crate::scattering::ScatteringData;
use crate::surface::{BranchSet, CutSide, SurfaceGeometry};
use crate::{c64, Complex64, Error, Result, I, ONE};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaVariant {
    Odd,
    Even,
}

/// One real-interval component of the delta contour; `lo = None` encodes a
/// half-line to minus infinity.
#[derive(Debug, Clone, Copy)]
pub struct IntervalComp {
    pub lo: Option<f64>,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct DeltaModel {
    pub variant: DeltaVariant,
    pub components: Vec<IntervalComp>,
    /// Cut indices entering the quartic-ratio prefactor.
    pub tilde_cuts: Vec<usize>,
    /// Power of the prefactor product: -1 for odd, +1 for even.
    pub prefactor_pow: i32,
}

impl DeltaModel {
    /// Odd-genus contour: requires three real stationary points with
    /// B_{k0} < kappa1 < kappa2 < B_{k0+1} < kappa3 < B_{k0+2}.
    pub fn new_odd(branch: &BranchSet, portrait: &StationaryPortrait) -> Result<Self> {
        let n = branch.genus();
        if n % 2 == 0 {
            return Err(Error::Invalid("odd variant needs odd genus".into()));
        }
        if portrait.real_points.len() != 3 {
            return Err(Error::OutOfRegime(format!(
                "odd delta needs exactly 3 real stationary points, found {}",
                portrait.real_points.len()
            )));
        }
        let (k1, k2, k3) = (
            portrait.real_points[0],
            portrait.real_points[1],
            portrait.real_points[2],
        );
        let mut k0: Option<usize> = None;
        for k in 0..branch.num_cuts() {
            if branch.b(k) < k1 {
                k0 = Some(k);
            }
        }
        let next = k0.map_or(0, |k| k + 1);
        if next + 1 >= branch.num_cuts() {
            return Err(Error::OutOfRegime(
                "stationary points do not bracket two cuts to the right".into(),
            ));
        }
        let b_next = branch.b(next);
        let b_next2 = branch.b(next + 1);
        if !(k2 < b_next && b_next < k3 && k3 < b_next2) {
            return Err(Error::OutOfRegime(format!(
                "portrait does not match the odd-genus contour layout: \
                 kappa = ({k1:.4}, {k2:.4}, {k3:.4}), B = ({b_next:.4}, {b_next2:.4})"
            )));
        }
        let half = n / 2;
        Ok(DeltaModel {
            variant: DeltaVariant::Odd,
            components: vec![
                IntervalComp { lo: None, hi: k1 },
                IntervalComp { lo: Some(k2), hi: b_next },
                IntervalComp { lo: Some(k3), hi: b_next2 },
            ],
            tilde_cuts: ((half + 1)..=n).collect(),
            prefactor_pow: -1,
        })
    }

    /// Odd-genus contour anchored exactly at a collision: kappa1 = kappa2 =
    /// z_j (the adjacent components touch there) with the remaining simple
    /// point kappa3 between the next two cut abscissas.
    pub fn new_odd_transition(branch: &BranchSet, z_j: f64, kappa3: f64) -> Result<Self> {
        let n = branch.genus();
        if n % 2 == 0 {
            return Err(Error::Invalid("odd variant needs odd genus".into()));
        }
        let mut k0: Option<usize> = None;
        for k in 0..branch.num_cuts() {
            if branch.b(k) < z_j {
                k0 = Some(k);
            }
        }
        let next = k0.map_or(0, |k| k + 1);
        if next + 1 >= branch.num_cuts() {
            return Err(Error::OutOfRegime(
                "collision does not bracket two cuts to the right".into(),
            ));
        }
        let b_next = branch.b(next);
        let b_next2 = branch.b(next + 1);
        if !(z_j < b_next && b_next < kappa3 && kappa3 < b_next2) {
            return Err(Error::OutOfRegime(format!(
                "collision layout mismatch: z_j = {z_j:.4}, kappa3 = {kappa3:.4}, \
                 B = ({b_next:.4}, {b_next2:.4})"
            )));
        }
        let half = n / 2;
        Ok(DeltaModel {
            variant: DeltaVariant::Odd,
            components: vec![
                IntervalComp { lo: None, hi: z_j },
                IntervalComp { lo: Some(z_j), hi: b_next },
                IntervalComp { lo: Some(kappa3), hi: b_next2 },
            ],
            tilde_cuts: ((half + 1)..=n).collect(),
            prefactor_pow: -1,
        })
    }

    /// Even-genus contour: two simple real points with
    /// kappa1 < B_{n/2+1} < kappa2.
    pub fn new_even(branch: &BranchSet, portrait: &StationaryPortrait) -> Result<Self> {
        let n = branch.genus();
        if n % 2 != 0 || n == 0 {
            return Err(Error::Invalid("even variant needs positive even genus".into()));
        }
        if portrait.real_points.len() != 2 {
            return Err(Error::OutOfRegime(format!(
                "even delta needs exactly 2 real stationary points, found {}",
                portrait.real_points.len()
            )));
        }
        let (k1, k2) = (portrait.real_points[0], portrait.real_points[1]);
        // the second component starts at the abscissa of the middle cut
        // Gamma_{n/2}, which the infinite branch approaches in this regime
        let mid = n / 2;
        let b_mid = branch.b(mid);
        if !(k1 < b_mid && b_mid < k2) {
            return Err(Error::OutOfRegime(format!(
                "portrait does not match the even-genus contour layout: \
                 kappa = ({k1:.4}, {k2:.4}), B_mid = {b_mid:.4}"
            )));
        }
        Ok(DeltaModel {
            variant: DeltaVariant::Even,
            components: vec![
                IntervalComp { lo: None, hi: k1 },
                IntervalComp { lo: Some(b_mid), hi: k2 },
            ],
            tilde_cuts: ((n / 2)..=n).collect(),
            prefactor_pow: 1,
        })
    }

    /// Genus-0 contour (the whole line splits at the two stationary points;
    /// only the left half-line carries the jump in the simplest layout).
    /// Used by the genus-0 diagnostics where no moment conditions exist.
    pub fn new_genus0(portrait: &StationaryPortrait) -> Result<Self> {
        if portrait.real_points.is_empty() {
            return Err(Error::OutOfRegime("need a real stationary point".into()));
        }
        Ok(DeltaModel {
            variant: DeltaVariant::Even,
            components: vec![IntervalComp { lo: None, hi: portrait.real_points[0] }],
            tilde_cuts: vec![],
            prefactor_pow: 1,
        })
    }

    pub fn prefactor(&self, branch: &BranchSet, z: Complex64) -> Complex64 {
        let mut acc = ONE;
        for &k in &self.tilde_cuts {
            acc *= quartic_ratio(branch, k, z);
        }
        if self.prefactor_pow < 0 {
            ONE / acc
        } else {
            acc
        }
    }

    pub fn prefactor_on_cut(&self, branch: &BranchSet, k: usize, y: f64, side: CutSide) -> Complex64 {
        let mut acc = ONE;
        for &j in &self.tilde_cuts {
            if j == k {
                acc *= quartic_ratio_onesided(branch, k, y, side);
            } else {
                acc *= quartic_ratio(branch, j, c64(branch.b(k), y));
            }
        }
        if self.prefactor_pow < 0 {
            ONE / acc
        } else {
            acc
        }
    }

    pub fn on_contour(&self, x: f64) -> bool {
        self.components.iter().any(|c| match c.lo {
            Some(lo) => x >= lo && x <= c.hi,
            None => x <= c.hi,
        })
    }
}

/// ((z - conj E_k)/(z - E_k))^{1/4} with branch cut on the segment,
/// -> 1 at infinity: the Moebius ratio (u+1)/(u-1) maps the complement of
/// the cut onto the complement of the negative real axis, so the principal
/// quarter power does the job.
pub fn quartic_ratio(branch: &BranchSet, k: usize, z: Complex64) -> Complex64 {
    let u = (z - branch.b(k)) / c64(0.0, branch.a(k));
    ((u + 1.0) / (u - 1.0)).powf(0.25)
}

/// One-sided boundary value on cut k at height y.
pub fn quartic_ratio_onesided(branch: &BranchSet, k: usize, y: f64, side: CutSide) -> Complex64 {
    let u = (y / branch.a(k)).clamp(-1.0, 1.0);
    let modulus = ((1.0 + u) / (1.0 - u)).abs().powf(0.25);
    let phase = match side {
        CutSide::East => Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
        CutSide::West => Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4),
    };
    modulus * phase
}

/// Nodes of the contour quadrature: s, weight already including every
/// jacobian so that  integral f = sum_n f(s_n) * weight_n.
fn contour_nodes(model: &DeltaModel, branch: &BranchSet, order: usize) -> Vec<(f64, f64)> {
    let scale = branch.points().iter().map(|p| p.norm()).fold(1.0, f64::max);
    let rule = quad::gauss_legendre(order);
    let mut out = Vec::new();
    for comp in &model.components {
        match comp.lo {
            Some(lo) => {
                let len = comp.hi - lo;
                let chunks = (len / scale).ceil().max(1.0) as usize * 2;
                for c in 0..chunks {
                    let a = lo + len * c as f64 / chunks as f64;
                    let b = lo + len * (c + 1) as f64 / chunks as f64;
                    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                        out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
                    }
                }
            }
            None => {
                let c_len = 5.0 * scale;
                for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                    let u = 0.5 * (x + 1.0);
                    if u >= 1.0 {
                        continue;
                    }
                    let s = comp.hi - c_len * u / (1.0 - u);
                    let jac = c_len / ((1.0 - u) * (1.0 - u));
                    out.push((s, 0.5 * w * jac));
                }
            }
        }
    }
    out
}

fn cauchy_exponent_integral(
    model: &DeltaModel,
    branch: &BranchSet,
    scat: &ScatteringData,
    z: Complex64,
    order: usize,
) -> Complex64 {
    let near = z.im.abs() < 0.05 * (1.0 + z.re.abs()) && model.on_contour(z.re);
    if !near {
        let mut acc = c64(0.0, 0.0);
        for (s, w) in contour_nodes(model, branch, order) {
            let l = scat.log_one_plus_rsq(s);
            acc += w * l / (branch.w_upper(c64(s, 0.0)) * (s - z));
        }
        return acc;
    }
    // near-contour evaluation: subtract the pole density on a window around
    // Re z and integrate it in closed form, so the quadrature never sees the
    // spike. The window is the part of the owning component within
    // half-width 1 of Re z. The subtraction point is nudged off component
    // endpoints, where w is one-sided.
    let x = z.re;
    let density = |s: f64| scat.log_one_plus_rsq(s) / branch.w_upper(c64(s, 0.0));
    let tiny = 1e-9 * (1.0 + x.abs());
    let mut x_eff = x;
    for comp in &model.components {
        if (x - comp.hi).abs() < tiny {
            x_eff = comp.hi - tiny;
        }
        if let Some(lo) = comp.lo {
            if (x - lo).abs() < tiny {
                x_eff = lo + tiny;
            }
        }
    }
    let dx = density(x_eff);
    let rule = quad::gauss_legendre(order);
    let mut acc = c64(0.0, 0.0);
    for comp in &model.components {
        let contains = match comp.lo {
            Some(lo) => x >= lo && x <= comp.hi,
            None => x <= comp.hi,
        };
        if !contains {
            // other components: plain nodes
            let single = DeltaModel {
                variant: model.variant,
                components: vec![*comp],
                tilde_cuts: vec![],
                prefactor_pow: 1,
            };
            for (s, w) in contour_nodes(&single, branch, order) {
                acc += w * density(s) / (s - z);
            }
            continue;
        }
        // window [a, b] around x inside this component
        let a = match comp.lo {
            Some(lo) => lo.max(x - 1.0),
            None => x - 1.0,
        };
        let b = comp.hi.min(x + 1.0);
        // subtracted part on the window
        for (xn, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * xn;
            // z is off the line by at least the guard, so s - z never vanishes
            acc += 0.5 * (b - a) * w * (density(s) - dx) / (s - z);
        }
        // closed form for the subtracted density
        acc += dx * ((c64(b, 0.0) - z).ln() - (c64(a, 0.0) - z).ln());
        // remaining parts of this component outside the window
        if b < comp.hi {
            let single = DeltaModel {
                variant: model.variant,
                components: vec![IntervalComp { lo: Some(b), hi: comp.hi }],
                tilde_cuts: vec![],
                prefactor_pow: 1,
            };
            for (s, w) in contour_nodes(&single, branch, order) {
                acc += w * density(s) / (s - z);
            }
        }
        match comp.lo {
            Some(lo) if lo < a => {
                let single = DeltaModel {
                    variant: model.variant,
                    components: vec![IntervalComp { lo: Some(lo), hi: a }],
                    tilde_cuts: vec![],
                    prefactor_pow: 1,
                };
                for (s, w) in contour_nodes(&single, branch, order) {
                    acc += w * density(s) / (s - z);
                }
            }
            None => {
                let single = DeltaModel {
                    variant: model.variant,
                    components: vec![IntervalComp { lo: None, hi: a }],
                    tilde_cuts: vec![],
                    prefactor_pow: 1,
                };
                for (s, w) in contour_nodes(&single, branch, order) {
                    acc += w * density(s) / (s - z);
                }
            }
            _ => {}
        }
    }
    acc
}

fn contour_moment(
    model: &DeltaModel,
    branch: &BranchSet,
    scat: &ScatteringData,
    k: usize,
    order: usize,
) -> Complex64 {
    let mut acc = c64(0.0, 0.0);
    for (s, w) in contour_nodes(model, branch, order) {
        let l = scat.log_one_plus_rsq(s);
        acc += w * l * c64(s, 0.0).powu(k as u32) / branch.w_upper(c64(s, 0.0));
    }
    acc
}

/// delta(z) for z off the contour and off the tilde cuts.
pub fn delta(
    model: &DeltaModel,
    branch: &BranchSet,
    scat: &ScatteringData,
    z: Complex64,
    order: usize,
) -> Result<Complex64> {
    let guard = 1e-9 * (1.0 + z.norm());
    if z.im.abs() < guard && model.on_contour(z.re) {
        return Err(Error::OnCut);
    }
    let integral = cauchy_exponent_integral(model, branch, scat, z, order);
    let w = branch.w_upper(z);
    Ok(model.prefactor(branch, z) * (w / (TWO_PI * I) * integral).exp())
}

/// delta on the positive side of a tilde cut (west of the upward
/// orientation), needed as boundary data for the g-function.
pub fn delta_on_cut(
    model: &DeltaModel,
    branch: &BranchSet,
    scat: &ScatteringData,
    k: usize,
    y: f64,
    side: CutSide,
    order: usize,
) -> Complex64 {
    let z = c64(branch.b(k), y);
    let pre = model.prefactor_on_cut(branch, k, y, side);
    let integral = cauchy_exponent_integral(model, branch, scat, z, order);
    let w_side = branch.w_on_cut(k, y, side);
    pre * (w_side / (TWO_PI * I) * integral).exp()
}

/// Boundary value on the real contour from above or below, by offset
/// evaluation with Richardson extrapolation.
pub fn delta_boundary(
    model: &DeltaModel,
    branch: &BranchSet,
    scat: &ScatteringData,
    x: f64,
    from_above: bool,
    order: usize,
) -> Result<Complex64> {
    let eps = 1e-6 * (1.0 + x.abs()) * if from_above { 1.0 } else { -1.0 };
    let v1 = delta(model, branch, scat, c64(x, eps), order)?;
    let v2 = delta(model, branch, scat, c64(x, 0.5 * eps), order)?;
    Ok(2.0 * v2 - v1)
}

#[derive(Debug, Clone)]
pub struct DeltaConstants {
    pub delta_inf: Complex64,
    pub i1: Complex64,
    /// Residuals of the moment conditions M_0 .. M_{n-1}; these vanish only
    /// when the scattering data conspires, so they are reported, not forced.
    pub moment_residuals: Vec<f64>,
}

pub fn delta_constants(
    model: &DeltaModel,
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    scat: &ScatteringData,
) -> Result<DeltaConstants> {
    let n = surface.genus();
    let order = surface.quad_order;
    let br = &surface.branch;
    let mut moment_residuals = Vec::with_capacity(n);
    for k in 0..n {
        moment_residuals.push(contour_moment(model, br, scat, k, order).norm());
    }
    let m_n = contour_moment(model, br, scat, n, order);
    let m_n1 = contour_moment(model, br, scat, n + 1, order);
    let fhat_n = phase.fhat.coeff(n);
    Ok(DeltaConstants {
        delta_inf: (-m_n / (TWO_PI * I)).exp(),
        i1: -(fhat_n * m_n + m_n1) / (TWO_PI * I),
        moment_residuals,
    })
}

/// Direct large-radius consistency data: (delta(R)/delta(inf) - 1) * R should
/// approach I_1 when the moment conditions hold (genus 0, or r = 0).
pub fn delta_large_z_check(
    model: &DeltaModel,
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    scat: &ScatteringData,
    radius: f64,
) -> Result<Complex64> {
    let consts = delta_constants(model, surface, phase, scat)?;
    let v = delta(model, &surface.branch, scat, c64(radius, radius), surface.quad_order)?;
    Ok((v / consts.delta_inf - ONE) * c64(radius, radius))
}

// ---------------------------------------------------------------------------
// g-function

#[derive(Debug, Clone)]
struct GNode {
    /// parameter along the piece (t for cut halves, theta for arcs)
    t: f64,
    s: Complex64,
    base: Complex64,
    /// measure density m(t) with  integral H(s)/(s-z) ds
    ///   = sum_j w_j * (base_j + 2 alpha) * m_j / (s_j - z) * halfspan
    meas_density: Complex64,
}

#[derive(Debug, Clone)]
enum GGeom {
    /// half of vertical cut k: s(t) = B + i A sin t
    CutHalf { k: usize, upper: bool },
    Arc,
}

#[derive(Debug, Clone)]
struct GPiece {
    geom: GGeom,
    alpha_idx: Option<usize>,
    halfspan: f64,
    nodes: Vec<GNode>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GFunction {
    pub variant: DeltaVariant,
    pub alphas: Vec<f64>,
    pub g_inf: Complex64,
    pub i2: Complex64,
    pub moment_residual: f64,
    pub rank: usize,
    pieces: Vec<GPiece>,
}

/// Upper half of cut k sampled for the prescribed data `data(y) -> base`;
/// the lower half is produced by Schwarz reflection of the samples, which
/// enforces H(conj z) = conj H(z) without a second branch unwrap.
fn cut_piece_pair(
    branch: &BranchSet,
    k: usize,
    order: usize,
    alpha_idx: Option<usize>,
    mut data: impl FnMut(f64) -> Complex64,
) -> (GPiece, GPiece) {
    let rule = quad::gauss_legendre(order);
    let halfspan = 0.5 * std::f64::consts::FRAC_PI_2;
    let mut upper_nodes = Vec::with_capacity(rule.nodes.len());
    for x in rule.nodes.iter() {
        let t = std::f64::consts::FRAC_PI_2 * 0.5 * (x + 1.0);
        let y = branch.a(k) * t.sin();
        let z = c64(branch.b(k), y);
        let mut rest = ONE;
        for j in 0..branch.num_cuts() {
            if j != k {
                rest *= branch.cut_factor(j, z);
            }
        }
        // ds / w_plus on the west side: ds = i A cos t dt,
        // w_plus = -A cos t rest, so the density is -i / rest
        upper_nodes.push(GNode { t, s: z, base: data(y), meas_density: -I / rest });
    }
    // conjugating the parameter reverses dt, hence the extra sign
    let lower_nodes: Vec<GNode> = upper_nodes
        .iter()
        .map(|n| GNode {
            t: -n.t,
            s: n.s.conj(),
            base: n.base.conj(),
            meas_density: -n.meas_density.conj(),
        })
        .collect();
    let w = rule.weights.clone();
    (
        GPiece {
            geom: GGeom::CutHalf { k, upper: true },
            alpha_idx,
            halfspan,
            nodes: upper_nodes,
            weights: w.clone(),
        },
        GPiece {
            geom: GGeom::CutHalf { k, upper: false },
            alpha_idx,
            halfspan,
            nodes: lower_nodes,
            weights: w,
        },
    )
}

/// ln of delta_+^2 along the upper half of cut k, unwrapped continuously
/// from the real axis upward.
fn log_delta_sq_walker<'a>(
    model: &'a DeltaModel,
    branch: &'a BranchSet,
    scat: &'a ScatteringData,
    k: usize,
    order: usize,
) -> impl FnMut(f64) -> Complex64 + 'a {
    let mut prev: Option<Complex64> = None;
    move |y: f64| {
        let d = delta_on_cut(model, branch, scat, k, y, CutSide::West, order);
        let dsq = d * d;
        let mut lg = dsq.ln();
        if let Some(p) = prev {
            let kb = ((p.im - lg.im) / TWO_PI).round();
            lg += c64(0.0, TWO_PI * kb);
        }
        prev = Some(lg);
        lg
    }
}

/// Odd-genus g: data i ln delta_+^2 on the tilde cuts, with a single real
/// alpha on every tilde cut except the distinguished one.
pub fn solve_g_odd(
    surface: &SurfaceGeometry,
    delta_model: &DeltaModel,
    phase: &PhaseModel,
    scat: &ScatteringData,
) -> Result<GFunction> {
    let br = &surface.branch;
    let n = br.genus();
    let order = surface.quad_order;
    let distinguished = n / 2 + 1;

    let mut pieces = Vec::new();
    for &k in &delta_model.tilde_cuts {
        let alpha_idx = if k == distinguished { None } else { Some(0) };
        let mut walker = log_delta_sq_walker(delta_model, br, scat, k, order);
        let (up, dn) = cut_piece_pair(br, k, order, alpha_idx, |y| I * walker(y));
        pieces.push(up);
        pieces.push(dn);
    }

    let mut g = GFunction {
        variant: DeltaVariant::Odd,
        alphas: vec![0.0],
        g_inf: c64(0.0, 0.0),
        i2: c64(0.0, 0.0),
        moment_residual: 0.0,
        rank: 0,
        pieces,
    };
    g.finish(surface, phase, 1)?;
    Ok(g)
}

/// Circular arc through three points, sampled with the arc-length measure.
fn arc_piece(
    p0: Complex64,
    pm: Complex64,
    p1: Complex64,
    branch: &BranchSet,
    order: usize,
    alpha_idx: Option<usize>,
    mut data: impl FnMut(Complex64) -> Complex64,
) -> Result<GPiece> {
    let (center, radius) = circle_through(p0, pm, p1)?;
    let th0 = (p0 - center).arg();
    let thm = (pm - center).arg();
    let th1 = (p1 - center).arg();
    let norm = |mut a: f64| {
        while a < 0.0 {
            a += TWO_PI;
        }
        while a >= TWO_PI {
            a -= TWO_PI;
        }
        a
    };
    let fwd_m = norm(thm - th0);
    let fwd_1 = norm(th1 - th0);
    let (a0, a1) = if fwd_m <= fwd_1 {
        (th0, th0 + fwd_1)
    } else {
        (th0, th0 - norm(th0 - th1))
    };
    let rule = quad::gauss_legendre(order);
    let mut nodes = Vec::with_capacity(rule.nodes.len());
    for x in rule.nodes.iter() {
        let th = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * x;
        let s = center + Complex64::from_polar(radius, th);
        // ds = i R e^{i th} d th over plain w
        let density = I * Complex64::from_polar(radius, th) / branch.w_upper(s);
        nodes.push(GNode { t: th, s, base: data(s), meas_density: density });
    }
    Ok(GPiece {
        geom: GGeom::Arc,
        alpha_idx,
        halfspan: 0.5 * (a1 - a0),
        nodes,
        weights: rule.weights.clone(),
    })
}

fn conjugate_piece(p: &GPiece) -> GPiece {
    GPiece {
        geom: p.geom.clone(),
        alpha_idx: p.alpha_idx,
        halfspan: p.halfspan,
        nodes: p
            .nodes
            .iter()
            .map(|n| GNode {
                t: -n.t,
                s: n.s.conj(),
                base: n.base.conj(),
                meas_density: -n.meas_density.conj(),
            })
            .collect(),
        weights: p.weights.clone(),
    }
}

fn circle_through(a: Complex64, b: Complex64, cpt: Complex64) -> Result<(Complex64, f64)> {
    let (ax, ay) = (a.re, a.im);
    let (bx, by) = (b.re, b.im);
    let (cx, cy) = (cpt.re, cpt.im);
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if d.abs() < 1e-14 {
        return Err(Error::DegenerateBranch("collinear arc endpoints".into()));
    }
    let ux = ((ax * ax + ay * ay) * (by - cy)
        + (bx * bx + by * by) * (cy - ay)
        + (cx * cx + cy * cy) * (ay - by))
        / d;
    let uy = ((ax * ax + ay * ay) * (cx - bx)
        + (bx * bx + by * by) * (ax - cx)
        + (cx * cx + cy * cy) * (bx - ax))
        / d;
    let center = c64(ux, uy);
    Ok((center, (a - center).norm()))
}

/// Even-genus g over the deformed contour: the two conjugate arcs joining
/// E01 to E00 (sum jumps, alpha_1), the kappa1 arc through the deformed cut
/// (difference jump, alpha_4), the tilde cuts (alpha_2), the remaining
/// interior cuts (alpha_3) and cut 0 with no alpha.
#[allow(clippy::too_many_arguments)]
pub fn solve_g_even(
    surface: &SurfaceGeometry,
    delta_model: &DeltaModel,
    phase: &PhaseModel,
    scat: &ScatteringData,
    e00: Complex64,
    e01: Complex64,
    kappa1: f64,
) -> Result<GFunction> {
    if scat.is_zero() {
        return Ok(GFunction {
            variant: DeltaVariant::Even,
            alphas: vec![0.0; 4],
            g_inf: c64(0.0, 0.0),
            i2: c64(0.0, 0.0),
            moment_residual: 0.0,
            rank: 0,
            pieces: vec![],
        });
    }
    let br = &surface.branch;
    let order = surface.quad_order;
    let mut pieces = Vec::new();

    // arc E01 -> E00 with g1 = -i ln(i r~(z) delta^2(z) / (1 + r r~))
    {
        let bulge = 0.5 * (e00 + e01) + c64(0.0, 0.25 * (e00 - e01).norm());
        let mut prev: Option<Complex64> = None;
        let dm = delta_model.clone();
        let up = arc_piece(e01, bulge, e00, br, order, Some(0), |s| {
            let d = delta(&dm, br, scat, s, order).unwrap_or(ONE);
            let val = I * scat.r_conj_reflected(s) * d * d / scat.one_plus_rr(s);
            let mut lg = val.ln();
            if let Some(p) = prev {
                let kb = ((p.im - lg.im) / TWO_PI).round();
                lg += c64(0.0, TWO_PI * kb);
            }
            prev = Some(lg);
            -I * lg
        })?;
        pieces.push(conjugate_piece(&up));
        pieces.push(up);
    }

    // kappa1 arc: upper part of the deformed cut through kappa1, difference
    // jump with data i ln(1 + r r~)
    {
        let mid = 0.5 * (c64(kappa1, 0.0) + e01) + c64(0.0, 0.1 * (e01.re - kappa1).abs().max(0.05));
        let mut prev: Option<Complex64> = None;
        let up = arc_piece(c64(kappa1, 0.0), mid, e01, br, order, Some(3), |s| {
            let mut lg = scat.one_plus_rr(s).ln();
            if let Some(p) = prev {
                let kb = ((p.im - lg.im) / TWO_PI).round();
                lg += c64(0.0, TWO_PI * kb);
            }
            prev = Some(lg);
            I * lg
        })?;
        pieces.push(conjugate_piece(&up));
        pieces.push(up);
    }

    for k in 0..br.num_cuts() {
        let is_tilde = delta_model.tilde_cuts.contains(&k);
        let alpha_idx = if k == 0 {
            None
        } else if is_tilde {
            Some(1)
        } else {
            Some(2)
        };
        if is_tilde {
            let mut prev: Option<Complex64> = None;
            let dm = delta_model.clone();
            let (up, dn) = cut_piece_pair(br, k, order, alpha_idx, |y| {
                let dp = delta_on_cut(&dm, br, scat, k, y, CutSide::West, order);
                let dmn = delta_on_cut(&dm, br, scat, k, y, CutSide::East, order);
                let mut lg = (dp * dmn).ln();
                if let Some(p) = prev {
                    let kb = ((p.im - lg.im) / TWO_PI).round();
                    lg += c64(0.0, TWO_PI * kb);
                }
                prev = Some(lg);
                I * lg
            });
            pieces.push(up);
            pieces.push(dn);
        } else {
            let mut walker = log_delta_sq_walker(delta_model, br, scat, k, order);
            let (up, dn) = cut_piece_pair(br, k, order, alpha_idx, |y| I * walker(y));
            pieces.push(up);
            pieces.push(dn);
        }
    }

    let mut g = GFunction {
        variant: DeltaVariant::Even,
        alphas: vec![0.0; 4],
        g_inf: c64(0.0, 0.0),
        i2: c64(0.0, 0.0),
        moment_residual: 0.0,
        rank: 0,
        pieces,
    };
    g.finish(surface, phase, 4)?;
    Ok(g)
}

impl GFunction {
    fn moment_parts(&self, k: usize, n_alphas: usize) -> (Complex64, Vec<Complex64>) {
        let mut base_acc = c64(0.0, 0.0);
        let mut alpha_acc = vec![c64(0.0, 0.0); n_alphas];
        for piece in &self.pieces {
            for (node, w) in piece.nodes.iter().zip(piece.weights.iter()) {
                let zk = node.s.powu(k as u32);
                let m = node.meas_density * piece.halfspan;
                base_acc += *w * zk * node.base * m;
                if let Some(idx) = piece.alpha_idx {
                    alpha_acc[idx] += *w * zk * 2.0 * m;
                }
            }
        }
        (base_acc, alpha_acc)
    }

    fn finish(&mut self, surface: &SurfaceGeometry, phase: &PhaseModel, n_alphas: usize) -> Result<()> {
        let n = surface.genus();
        self.alphas = vec![0.0; n_alphas];
        let mut rows: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
        for k in 0..n {
            rows.push(self.moment_parts(k, n_alphas));
        }
        let m = 2 * rows.len().max(1);
        let mut a = nalgebra::DMatrix::<f64>::zeros(m, n_alphas);
        let mut b = nalgebra::DVector::<f64>::zeros(m);
        for (i, (base, coef)) in rows.iter().enumerate() {
            for j in 0..n_alphas {
                a[(2 * i, j)] = coef[j].re;
                a[(2 * i + 1, j)] = coef[j].im;
            }
            b[2 * i] = -base.re;
            b[2 * i + 1] = -base.im;
        }
        let svd = a.clone().svd(true, true);
        let rank = svd.rank(1e-10);
        let x = svd.solve(&b, 1e-10).map_err(|e| Error::LinearSolve(e.to_string()))?;
        for j in 0..n_alphas {
            self.alphas[j] = x[j];
        }
        self.rank = rank;
        self.moment_residual = (a * x - b).norm();

        let (mn_b, mn_c) = self.moment_parts(n, n_alphas);
        let (mn1_b, mn1_c) = self.moment_parts(n + 1, n_alphas);
        let mut m_n = mn_b;
        let mut m_n1 = mn1_b;
        for j in 0..n_alphas {
            m_n += mn_c[j] * self.alphas[j];
            m_n1 += mn1_c[j] * self.alphas[j];
        }
        self.g_inf = -m_n / (TWO_PI * I);
        self.i2 = if m_n.norm() > 1e-14 {
            phase.fhat.coeff(n) + m_n1 / m_n
        } else {
            c64(0.0, 0.0)
        };
        Ok(())
    }

    /// g(z) for z away from the contour system.
    pub fn eval(&self, branch: &BranchSet, z: Complex64) -> Complex64 {
        let mut acc = c64(0.0, 0.0);
        for piece in &self.pieces {
            for (node, w) in piece.nodes.iter().zip(piece.weights.iter()) {
                let mut data = node.base;
                if let Some(idx) = piece.alpha_idx {
                    data += 2.0 * self.alphas[idx];
                }
                acc += *w * data * node.meas_density * piece.halfspan / (node.s - z);
            }
        }
        branch.w_upper(z) / (TWO_PI * I) * acc
    }

    /// One-sided boundary value on cut k at height y, directly on the cut:
    /// g_side = w_side (C_pv + s/2 H) with s = +1 on the west (plus) side,
    /// computed through the principal-value kernel in closed form.
    pub fn boundary_on_cut(
        &self,
        branch: &BranchSet,
        k: usize,
        y: f64,
        side: CutSide,
    ) -> Result<Complex64> {
        let a_k = branch.a(k);
        let u0 = y / a_k;
        if u0.abs() >= 0.999 {
            return Err(Error::Invalid("too close to the cut endpoints".into()));
        }
        let t0 = u0.asin();
        let upper0 = y > 0.0;
        let mut c_pv = c64(0.0, 0.0);
        let mut h_val: Option<Complex64> = None;
        for piece in &self.pieces {
            let is_singular = matches!(
                piece.geom,
                GGeom::CutHalf { k: pk, upper } if pk == k && upper == upper0
            );
            if !is_singular {
                for (node, w) in piece.nodes.iter().zip(piece.weights.iter()) {
                    let mut data = node.base;
                    if let Some(idx) = piece.alpha_idx {
                        data += 2.0 * self.alphas[idx];
                    }
                    c_pv += *w * data * node.meas_density * piece.halfspan
                        / (node.s - c64(branch.b(k), y));
                }
                continue;
            }
            // singular piece: phi(t) = data(t) meas_density(t), pole at t0
            let phi0 = interp_node(&piece.nodes, t0, |n| {
                let mut d = n.base;
                if let Some(idx) = piece.alpha_idx {
                    d += 2.0 * self.alphas[idx];
                }
                d * n.meas_density
            });
            for (node, w) in piece.nodes.iter().zip(piece.weights.iter()) {
                let mut data = node.base;
                if let Some(idx) = piece.alpha_idx {
                    data += 2.0 * self.alphas[idx];
                }
                let phi = data * node.meas_density;
                let denom = node.t.sin() - t0.sin();
                if denom.abs() < 1e-12 {
                    return Err(Error::Invalid("pick a test height away from nodes".into()));
                }
                c_pv += *w * piece.halfspan * (phi - phi0) / (c64(0.0, a_k) * denom);
            }
            // closed-form PV kernel over the half
            let (lo, hi) = if upper0 {
                (0.0, std::f64::consts::FRAC_PI_2)
            } else {
                (-std::f64::consts::FRAC_PI_2, 0.0)
            };
            c_pv += phi0 / c64(0.0, a_k) * pv_kernel(lo, hi, t0);
            // local density for the Plemelj half-jump
            let base0 = interp_node(&piece.nodes, t0, |n| n.base);
            let mut data0 = base0;
            if let Some(idx) = piece.alpha_idx {
                data0 += 2.0 * self.alphas[idx];
            }
            let w_plus = branch.w_on_cut(k, y, CutSide::West);
            h_val = Some(data0 / w_plus);
        }
        let h = h_val.ok_or_else(|| Error::Invalid("no piece covers this cut".into()))?;
        c_pv /= TWO_PI * I;
        let sgn = match side {
            CutSide::West => 0.5,
            CutSide::East => -0.5,
        };
        Ok(branch.w_on_cut(k, y, side) * (c_pv + sgn * h))
    }

    /// Prescribed sum data 2 alpha + base at height y on cut k's upper half,
    /// interpolated from the stored samples.
    pub fn prescribed_sum_at(&self, k: usize, y: f64, a_k: f64) -> Option<Complex64> {
        let t0 = (y / a_k).clamp(-1.0, 1.0).asin();
        for piece in &self.pieces {
            if let GGeom::CutHalf { k: pk, upper } = piece.geom {
                if pk == k && upper == (y > 0.0) {
                    let base = interp_node(&piece.nodes, t0, |n| n.base);
                    let mut d = base;
                    if let Some(idx) = piece.alpha_idx {
                        d += 2.0 * self.alphas[idx];
                    }
                    return Some(d);
                }
            }
        }
        None
    }

    /// Loop-moment identity: oint_{a_k} (g/w) p dz = -int_cut H p dz for any
    /// polynomial p, with the loop at a resolvable offset. Returns the
    /// residual for p = z^pow.
    pub fn loop_moment_residual(&self, branch: &BranchSet, k: usize, pow: u32) -> f64 {
        // stadium loop around cut k at offset, Gauss per smooth side
        let rho = 0.3 * branch.min_cut_gap().min(branch.a(k));
        let b = branch.b(k);
        let a = branch.a(k);
        let rule = quad::gauss_legendre(64);
        let f = |z: Complex64| self.eval(branch, z) / branch.w_upper(z) * z.powu(pow);
        let mut lhs = c64(0.0, 0.0);
        // east edge up, west edge down
        for (x0, x1) in [(c64(b + rho, -a), c64(b + rho, a)), (c64(b - rho, a), c64(b - rho, -a))] {
            for (xn, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let z = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * xn;
                lhs += *w * 0.5 * (x1 - x0) * f(z);
            }
        }
        // top and bottom semicircles
        for (center, th0, th1) in [
            (c64(b, a), 0.0, std::f64::consts::PI),
            (c64(b, -a), std::f64::consts::PI, TWO_PI),
        ] {
            for (xn, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let th = 0.5 * (th0 + th1) + 0.5 * (th1 - th0) * xn;
                let z = center + rho * Complex64::from_polar(1.0, th);
                let dz = I * rho * Complex64::from_polar(1.0, th);
                lhs += *w * 0.5 * (th1 - th0) * f(z) * dz;
            }
        }
        // rhs: -int over both halves of H p, H = data / w_plus;
        // in the node measure, int H p ds = sum w p(s) data meas halfspan
        let mut rhs = c64(0.0, 0.0);
        for piece in &self.pieces {
            if let GGeom::CutHalf { k: pk, .. } = piece.geom {
                if pk != k {
                    continue;
                }
                for (node, wq) in piece.nodes.iter().zip(piece.weights.iter()) {
                    let mut data = node.base;
                    if let Some(idx) = piece.alpha_idx {
                        data += 2.0 * self.alphas[idx];
                    }
                    rhs += *wq * node.s.powu(pow) * data * node.meas_density * piece.halfspan;
                }
            }
        }
        (lhs + rhs).norm()
    }
}

/// Cubic Lagrange interpolation over the four nodes nearest t0.
fn interp_node<F: Fn(&GNode) -> Complex64>(nodes: &[GNode], t0: f64, f: F) -> Complex64 {
    let mut idx: Vec<usize> = (0..nodes.len()).collect();
    idx.sort_by(|&a, &b| {
        (nodes[a].t - t0)
            .abs()
            .partial_cmp(&(nodes[b].t - t0).abs())
            .unwrap()
    });
    let take = idx.into_iter().take(4).collect::<Vec<_>>();
    let mut acc = c64(0.0, 0.0);
    for &i in &take {
        let mut li = 1.0;
        for &j in &take {
            if i != j {
                li *= (t0 - nodes[j].t) / (nodes[i].t - nodes[j].t);
            }
        }
        acc += li * f(&nodes[i]);
    }
    acc
}

/// PV of int_{lo}^{hi} dt / (sin t - sin t0) for t0 inside (lo, hi), via the
/// closed-form antiderivative with the log singularity cancelling in the
/// principal value.
fn pv_kernel(lo: f64, hi: f64, t0: f64) -> f64 {
    let u0 = t0.sin();
    if u0.abs() < 1e-14 {
        // sin t - 0: antiderivative ln|tan(t/2)|
        return (hi * 0.5).tan().abs().ln() - antideriv_zero(lo);
    }
    let c = 1.0 / u0;
    let d = (1.0 / (u0 * u0) - 1.0).sqrt();
    let f = |t: f64| -> f64 {
        let s = (t * 0.5).tan();
        -(u0.signum() / (1.0 - u0 * u0).sqrt()) * (((s - c - d) / (s - c + d)).abs()).ln()
    };
    f(hi) - f(lo)
}

fn antideriv_zero(t: f64) -> f64 {
    (t * 0.5).tan().abs().ln()
}



// ---------------------------------------------------------------------------
// Local parabolic-cylinder data

#[derive(Debug, Clone)]
pub struct PcLocalData {
    pub which: usize,
    pub kappa: f64,
    pub rho: f64,
    /// PC exponent; equal to rho.
    pub nu: f64,
    /// theta''(kappa; xi)
    pub theta2: Complex64,
    /// psi(kappa) = sqrt(theta''(kappa)/2), principal branch.
    pub psi_at_kappa: Complex64,
    /// chi(kappa) and chi~(kappa), regularized limits from the upper side.
    pub chi_at_kappa: Complex64,
    pub chi_tilde_at_kappa: Complex64,
    /// local ray half-length for the delta~ contours
    pub ray_len: f64,
    pub r_at_kappa: Complex64,
    /// +1 when kappa closes its contour component from the right (the local
    /// exponent of delta is -i rho), -1 for a left endpoint (+i rho).
    pub endpoint_sign: f64,
    xi: f64,
}

/// Build the local PC data at portrait real point `which`.
pub fn pc_local_data(
    surface: &SurfaceGeometry,
    phase: &PhaseModel,
    portrait: &StationaryPortrait,
    delta_model: &DeltaModel,
    scat: &ScatteringData,
    which: usize,
) -> Result<PcLocalData> {
    let br = &surface.branch;
    let order = surface.quad_order;
    let kappa = *portrait
        .real_points
        .get(which)
        .ok_or_else(|| Error::Invalid("no such real stationary point".into()))?;
    let zc = c64(kappa, 0.0);
    let theta2 = crate::phase::eval_theta_phase(surface, phase, zc, portrait.xi, 2)?;
    if theta2.norm() < 1e-8 {
        return Err(Error::OutOfRegime(
            "theta'' vanishes at the stationary point; use the Painleve regime".into(),
        ));
    }
    let rho = scat.log_one_plus_rsq(kappa) / TWO_PI;

    // local ray length: stay clear of cuts and of the other stationary points
    let mut clearance = f64::INFINITY;
    for k in 0..br.num_cuts() {
        clearance = clearance.min((br.b(k) - kappa).abs());
    }
    for (i, &p) in portrait.real_points.iter().enumerate() {
        if i != which {
            clearance = clearance.min((p - kappa).abs());
        }
    }
    let ray_len = 0.4 * clearance;

    // which end of its component does kappa close?
    let tol = 1e-10 * (1.0 + kappa.abs());
    let mut endpoint_sign = 0.0;
    for comp in &delta_model.components {
        if (comp.hi - kappa).abs() < tol {
            endpoint_sign = 1.0;
        }
        if let Some(lo) = comp.lo {
            if (lo - kappa).abs() < tol {
                endpoint_sign = -1.0;
            }
        }
    }
    if endpoint_sign == 0.0 {
        return Err(Error::Invalid("kappa is not a contour endpoint".into()));
    }

    let chi_at_kappa = chi_at_kappa_reg(delta_model, br, scat, kappa, rho, order)?;
    let chi_tilde_at_kappa = chi_tilde_at_kappa_reg(scat, kappa, ray_len, rho);

    Ok(PcLocalData {
        which,
        kappa,
        rho,
        nu: rho,
        theta2,
        psi_at_kappa: (theta2 * 0.5).sqrt(),
        chi_at_kappa,
        chi_tilde_at_kappa,
        ray_len,
        r_at_kappa: scat.r(zc),
        endpoint_sign,
        xi: portrait.xi,
    })
}

/// Regularized chi(kappa) for a contour component closed by kappa, as the
/// upper-side limit of ln delta -+ i rho Ln(z - kappa). The singular window
/// is subtracted against the density at kappa; for a right endpoint the
/// surviving boundary piece is i rho ln(kappa - a), for a left endpoint
/// -i rho ln(b - kappa) plus the branch constant pi rho.
fn chi_at_kappa_reg(
    model: &DeltaModel,
    branch: &BranchSet,
    scat: &ScatteringData,
    kappa: f64,
    rho: f64,
    order: usize,
) -> Result<Complex64> {
    let w_k = branch.w_upper(c64(kappa, 0.0));
    let l_over_w_at = |s: f64| scat.log_one_plus_rsq(s) / branch.w_upper(c64(s, 0.0));
    let lw_k = l_over_w_at(kappa);
    let mut acc = c64(0.0, 0.0);
    let rule = quad::gauss_legendre(order);
    let mut boundary = c64(0.0, 0.0);
    let tol = 1e-10 * (1.0 + kappa.abs());
    for comp in &model.components {
        let hi = comp.hi;
        let is_right = (hi - kappa).abs() < tol;
        let is_left = comp.lo.map_or(false, |lo| (lo - kappa).abs() < tol);
        if !is_right && !is_left {
            match comp.lo {
                Some(lo) => {
                    let chunks = 4;
                    for cch in 0..chunks {
                        let a = lo + (hi - lo) * cch as f64 / chunks as f64;
                        let b = lo + (hi - lo) * (cch + 1) as f64 / chunks as f64;
                        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                            let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
                            acc += 0.5 * (b - a) * w * l_over_w_at(s) / (s - kappa);
                        }
                    }
                }
                None => {
                    let c_len = 5.0 * (1.0 + kappa.abs());
                    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                        let u = 0.5 * (x + 1.0);
                        if u >= 1.0 {
                            continue;
                        }
                        let s = hi - c_len * u / (1.0 - u);
                        let jac = c_len / ((1.0 - u) * (1.0 - u));
                        acc += 0.5 * w * jac * l_over_w_at(s) / (s - kappa);
                    }
                }
            }
            continue;
        }
        if is_right {
            let a_reg = match comp.lo {
                Some(lo) => lo,
                None => kappa - 1.0,
            };
            if comp.lo.is_none() {
                let c_len = 5.0 * (1.0 + kappa.abs());
                for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                    let u = 0.5 * (x + 1.0);
                    if u >= 1.0 {
                        continue;
                    }
                    let s = (kappa - 1.0) - c_len * u / (1.0 - u);
                    let jac = c_len / ((1.0 - u) * (1.0 - u));
                    acc += 0.5 * w * jac * l_over_w_at(s) / (s - kappa);
                }
            }
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let s = 0.5 * (a_reg + kappa) + 0.5 * (kappa - a_reg) * x;
                acc += 0.5 * (kappa - a_reg) * w * (l_over_w_at(s) - lw_k) / (s - kappa);
            }
            boundary += I * rho * (kappa - a_reg).ln();
        } else {
            // left endpoint: window (kappa, b_reg)
            let b_reg = hi.min(kappa + 1.0);
            if b_reg < hi {
                let chunks = 4;
                for cch in 0..chunks {
                    let a = b_reg + (hi - b_reg) * cch as f64 / chunks as f64;
                    let b = b_reg + (hi - b_reg) * (cch + 1) as f64 / chunks as f64;
                    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                        let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
                        acc += 0.5 * (b - a) * w * l_over_w_at(s) / (s - kappa);
                    }
                }
            }
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let s = 0.5 * (kappa + b_reg) + 0.5 * (b_reg - kappa) * x;
                acc += 0.5 * (b_reg - kappa) * w * (l_over_w_at(s) - lw_k) / (s - kappa);
            }
            boundary += -I * rho * (b_reg - kappa).ln() + PI * rho;
        }
    }
    let prefactor_log = model.prefactor(branch, c64(kappa, 1e-12)).ln();
    Ok(prefactor_log + w_k / (TWO_PI * I) * acc + boundary)
}

/// Regularized chi~(kappa) from the two local rays of delta~:
/// reg integrals of (L - L(kappa))/(s - kappa) plus the closed-form
/// boundary pieces, with real part pi rho by the branch bookkeeping.
fn chi_tilde_at_kappa_reg(scat: &ScatteringData, kappa: f64, ell: f64, rho: f64) -> Complex64 {
    let order = 64;
    let rule = quad::gauss_legendre(order);
    let l_at = |s: f64| scat.log_one_plus_rsq(s);
    let l_k = l_at(kappa);
    let mut reg = c64(0.0, 0.0);
    // east ray (kappa, kappa + ell)
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let s = kappa + ell * 0.5 * (x + 1.0);
        if s == kappa {
            continue;
        }
        reg += 0.5 * ell * w * (l_at(s) - l_k) / (s - kappa);
    }
    // minus west ray (kappa - ell, kappa)
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let s = kappa - ell * 0.5 * (x + 1.0);
        if s == kappa {
            continue;
        }
        reg -= 0.5 * ell * w * (l_at(s) - l_k) / (s - kappa);
    }
    // boundary terms evaluated from above give chi~(kappa) =
    // reg/(2 pi i) - 2 i rho ln(ell) + pi rho
    reg / (TWO_PI * I) + c64(PI * rho, -2.0 * rho * ell.ln())
}

impl PcLocalData {
    /// delta~(z) from the two local rays, with the pole density subtracted
    /// near the rays so boundary values stay resolvable.
    pub fn delta_tilde(&self, scat: &ScatteringData, z: Complex64) -> Complex64 {
        let order = 96;
        let rule = quad::gauss_legendre(order);
        let l_of = |s: f64| scat.one_plus_rr(c64(s, 0.0)).ln();
        let near = z.im.abs() < 0.05 && (z.re - self.kappa).abs() <= self.ray_len;
        let mut acc = c64(0.0, 0.0);
        if !near {
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let s = self.kappa + self.ray_len * 0.5 * (x + 1.0);
                acc += 0.5 * self.ray_len * w * l_of(s) / (s - z);
            }
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let s = self.kappa - self.ray_len + self.ray_len * 0.5 * (x + 1.0);
                acc -= 0.5 * self.ray_len * w * l_of(s) / (s - z);
            }
            return (acc / (TWO_PI * I)).exp();
        }
        let x0 = z.re;
        let lx = l_of(x0);
        // east ray, subtracted
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let s = self.kappa + self.ray_len * 0.5 * (x + 1.0);
            acc += 0.5 * self.ray_len * w * (l_of(s) - lx) / (s - z);
        }
        acc += lx
            * ((c64(self.kappa + self.ray_len, 0.0) - z).ln() - (c64(self.kappa, 0.0) - z).ln());
        // west ray, subtracted, with its own sign
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let s = self.kappa - self.ray_len + self.ray_len * 0.5 * (x + 1.0);
            acc -= 0.5 * self.ray_len * w * (l_of(s) - lx) / (s - z);
        }
        acc -= lx
            * ((c64(self.kappa, 0.0) - z).ln() - (c64(self.kappa - self.ray_len, 0.0) - z).ln());
        (acc / (TWO_PI * I)).exp()
    }

    /// chi~(z) away from kappa: ln delta~ minus the split logs.
    pub fn chi_tilde(&self, scat: &ScatteringData, z: Complex64) -> Complex64 {
        let dt = self.delta_tilde(scat, z);
        let zk = z - self.kappa;
        dt.ln() - I * self.rho * (ln_branch(zk, 0.0) + ln_branch(zk, -PI))
    }

    /// chi(z) away from kappa: ln delta +- i rho Ln(z - kappa), the sign
    /// matching the endpoint side of kappa on its contour component.
    pub fn chi(
        &self,
        model: &DeltaModel,
        branch: &BranchSet,
        scat: &ScatteringData,
        z: Complex64,
        order: usize,
    ) -> Result<Complex64> {
        let d = delta(model, branch, scat, z, order)?;
        Ok(d.ln() + self.endpoint_sign * I * self.rho * (z - self.kappa).ln())
    }

    /// Local scaling variable zeta~ = 2 sqrt(t) (z - kappa) psi(z).
    pub fn zeta_tilde(
        &self,
        surface: &SurfaceGeometry,
        phase: &PhaseModel,
        z: Complex64,
        t: f64,
    ) -> Result<Complex64> {
        let psi = self.psi(surface, phase, z)?;
        Ok(2.0 * t.sqrt() * (z - self.kappa) * psi)
    }

    /// psi(z) = sqrt((theta(z) - theta(kappa)) / (z - kappa)^2), continuous
    /// branch with psi(kappa) = sqrt(theta''/2).
    pub fn psi(&self, surface: &SurfaceGeometry, phase: &PhaseModel, z: Complex64) -> Result<Complex64> {
        if (z - self.kappa).norm() < 1e-9 {
            return Ok(self.psi_at_kappa);
        }
        let th = crate::phase::eval_theta_phase(surface, phase, z, self.xi, 0)?;
        let thk = crate::phase::eval_theta_phase(surface, phase, c64(self.kappa, 0.0), self.xi, 0)?;
        let ratio = (th - thk) / ((z - self.kappa) * (z - self.kappa));
        let root = ratio.sqrt();
        // pick the branch nearest psi(kappa)
        if (root - self.psi_at_kappa).norm() <= (root + self.psi_at_kappa).norm() {
            Ok(root)
        } else {
            Ok(-root)
        }
    }

    /// Three-factor split, normalized so that
    /// delta~(z) delta(z) = dhat0(zeta~) dhat1(t) dhat2(z) holds on both
    /// half-planes: dhat0 = zeta~^{i nu} with the branch cut along the
    /// positive real axis, and the remaining t- and z-dependence split off.
    pub fn delta_hat0(&self, zeta: Complex64) -> Complex64 {
        (I * self.nu * ln_branch(zeta, 0.0)).exp()
    }

    pub fn delta_hat1(&self, t: f64) -> Complex64 {
        ((-I * self.nu) * (2.0f64.ln() + 0.5 * t.ln() + self.psi_at_kappa.ln())).exp()
            * (self.chi_at_kappa + self.chi_tilde_at_kappa).exp()
    }

    pub fn delta_hat2(
        &self,
        model: &DeltaModel,
        surface: &SurfaceGeometry,
        phase: &PhaseModel,
        scat: &ScatteringData,
        z: Complex64,
    ) -> Result<Complex64> {
        let psi = self.psi(surface, phase, z)?;
        let psi_ratio = psi / self.psi_at_kappa;
        let chi_z = self.chi(model, &surface.branch, scat, z, surface.quad_order)?;
        let chit_z = self.chi_tilde(scat, z);
        Ok((-I * self.nu * psi_ratio.ln()
            + (chi_z - self.chi_at_kappa)
            + (chit_z - self.chi_tilde_at_kappa))
            .exp())
    }

    /// Effective reflection constant at time t: phase-only corrections on
    /// r(kappa). The systematic real parts (the e^{pi nu/2}-type factors)
    /// belong to the model normalization and are excluded here, so
    /// |r_eff| = |r(kappa)| holds exactly.
    pub fn r_eff(&self, t: f64) -> Complex64 {
        let phase_sum = 2.0 * (self.chi_at_kappa.im + self.chi_tilde_at_kappa.im);
        let t_phase = 4.0 * t * self.rho * (self.psi_at_kappa * self.psi_at_kappa).re;
        self.r_at_kappa * Complex64::from_polar(1.0, phase_sum + t_phase)
    }
}

/// ln with the branch cut along arg = a: imaginary part in (a, a + 2 pi].
pub fn ln_branch(z: Complex64, a: f64) -> Complex64 {
    let mut arg = z.arg();
    while arg <= a {
        arg += TWO_PI;
    }
    while arg > a + TWO_PI {
        arg -= TWO_PI;
    }
    c64(z.norm().ln(), arg)
}
