//! Hyperelliptic surface w^2 = P(z) with conjugate branch-point pairs:
//! sheet-consistent w, homology cycles, normalized differentials, period
//! matrix, Abel map and Riemann constants.
//!
//! Branch points come in pairs {E_k, conj(E_k)}; each cut is the vertical
//! segment joining them. w is the product of per-cut square roots
//! sqrt((z - E_k)(z - conj E_k)), each with its branch cut exactly on the
//! segment and normalized to ~ z at infinity, so the product satisfies
//! w / z^{n+1} -> 1 on the upper sheet.

use crate::poly::Poly;
use crate::quad;
use crate::{c64, Complex64, Error, Result, I, ONE};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sheet {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub z: Complex64,
    pub sheet: Sheet,
}

impl SurfacePoint {
    pub fn upper(z: Complex64) -> Self {
        SurfacePoint { z, sheet: Sheet::Upper }
    }
    pub fn lower(z: Complex64) -> Self {
        SurfacePoint { z, sheet: Sheet::Lower }
    }
}

/// Side of a vertical cut, by real part relative to the cut abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutSide {
    East,
    West,
}

/// Upper-half-plane branch points E_k = B_k + i A_k; conjugates are implied.
#[derive(Debug, Clone)]
pub struct BranchSet {
    points: Vec<Complex64>,
}

impl BranchSet {
    pub fn new(mut points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("need at least one branch point".into()));
        }
        for p in &points {
            if !p.re.is_finite() || !p.im.is_finite() {
                return Err(Error::Invalid("non-finite branch point".into()));
            }
            if p.im <= 0.0 {
                return Err(Error::Invalid(format!(
                    "branch point {p} must lie in the open upper half-plane"
                )));
            }
        }
        points.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        let scale = points.iter().map(|p| p.norm()).fold(1.0, f64::max);
        for w in points.windows(2) {
            if (w[0] - w[1]).norm() < 1e-12 * scale {
                return Err(Error::DegenerateBranch(format!(
                    "coincident branch points {} and {}",
                    w[0], w[1]
                )));
            }
            if (w[0].re - w[1].re).abs() < 1e-9 * scale {
                return Err(Error::DegenerateBranch(format!(
                    "cuts at {} and {} share an abscissa; canonical paths cannot separate them",
                    w[0], w[1]
                )));
            }
        }
        Ok(BranchSet { points })
    }

    pub fn genus(&self) -> usize {
        self.points.len() - 1
    }

    pub fn num_cuts(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, k: usize) -> Complex64 {
        self.points[k]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn b(&self, k: usize) -> f64 {
        self.points[k].re
    }

    pub fn a(&self, k: usize) -> f64 {
        self.points[k].im
    }

    /// P(z) = prod (z - E_k)(z - conj E_k) as a polynomial.
    pub fn p_poly(&self) -> Poly {
        let mut roots = Vec::with_capacity(2 * self.points.len());
        for &e in &self.points {
            roots.push(e);
            roots.push(e.conj());
        }
        Poly::from_roots(&roots)
    }

    /// Per-cut factor sqrt((z - E_k)(z - conj E_k)), branch cut on the
    /// segment, ~ (z - B_k) at infinity. Not valid for z on the cut.
    pub fn cut_factor(&self, k: usize, z: Complex64) -> Complex64 {
        let m = c64(self.b(k), 0.0);
        let h = c64(0.0, self.a(k));
        let d = z - m;
        // (z - m) sqrt(1 - h^2 / (z - m)^2); principal square root keeps the
        // only discontinuity on the segment itself.
        d * (ONE - (h * h) / (d * d)).sqrt()
    }

    /// One-sided value of the k-th cut factor at height y on the cut.
    pub fn cut_factor_onesided(&self, k: usize, y: f64, side: CutSide) -> Complex64 {
        let a = self.a(k);
        debug_assert!(y.abs() <= a + 1e-12);
        let v = a * (1.0 - (y / a).powi(2)).max(0.0).sqrt();
        match side {
            CutSide::East => c64(v, 0.0),
            CutSide::West => c64(-v, 0.0),
        }
    }

    /// Upper-sheet w(z) for z off all cuts.
    pub fn w_upper(&self, z: Complex64) -> Complex64 {
        let mut acc = ONE;
        for k in 0..self.num_cuts() {
            acc *= self.cut_factor(k, z);
        }
        acc
    }

    /// w at a surface point (z off cuts).
    pub fn w_at(&self, p: SurfacePoint) -> Result<Complex64> {
        if !p.z.re.is_finite() || !p.z.im.is_finite() {
            return Err(Error::Invalid("non-finite point".into()));
        }
        if let Some(k) = self.cut_containing(p.z) {
            // branch points themselves are fine: w = 0 there
            if (p.z - self.point(k)).norm() < 1e-14 || (p.z - self.point(k).conj()).norm() < 1e-14 {
                return Ok(c64(0.0, 0.0));
            }
            return Err(Error::OnCut);
        }
        let w = self.w_upper(p.z);
        Ok(match p.sheet {
            Sheet::Upper => w,
            Sheet::Lower => -w,
        })
    }

    /// Upper-sheet w on the given side of cut k at height y.
    pub fn w_on_cut(&self, k: usize, y: f64, side: CutSide) -> Complex64 {
        let z = c64(self.b(k), y);
        let mut acc = self.cut_factor_onesided(k, y, side);
        for j in 0..self.num_cuts() {
            if j != k {
                acc *= self.cut_factor(j, z);
            }
        }
        acc
    }

    /// Index of the cut containing z, if any (interior points only).
    pub fn cut_containing(&self, z: Complex64) -> Option<usize> {
        for k in 0..self.num_cuts() {
            if (z.re - self.b(k)).abs() < 1e-13 * (1.0 + self.b(k).abs()) && z.im.abs() <= self.a(k) {
                return Some(k);
            }
        }
        None
    }

    /// Smallest horizontal gap between distinct cut abscissas.
    pub fn min_cut_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.num_cuts() {
            for j in (i + 1)..self.num_cuts() {
                let d = (self.b(i) - self.b(j)).abs();
                if d > 1e-13 {
                    gap = gap.min(d);
                }
            }
        }
        if gap.is_finite() {
            gap
        } else {
            2.0 * self.a(0)
        }
    }

    fn max_a(&self) -> f64 {
        self.points.iter().map(|p| p.im).fold(0.0, f64::max)
    }

    /// Clearance height used by canonical paths (above/below all cuts).
    pub fn clearance(&self) -> f64 {
        2.0 * self.max_a() + 0.5 * self.min_cut_gap().min(2.0 * self.max_a())
    }
}

/// Diagnostics serialized by the CLI `surface` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceDiagnostics {
    pub genus: usize,
    pub normalization_residual: f64,
    pub tau_symmetry: f64,
    pub tau_im_min_eigenvalue: f64,
    pub normalization_condition: f64,
    pub tau_re: Vec<Vec<f64>>,
    pub tau_im: Vec<Vec<f64>>,
    pub riemann_k_re: Vec<f64>,
    pub riemann_k_im: Vec<f64>,
}

/// Built surface: normalized differentials, period matrix, Riemann constants.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub branch: BranchSet,
    pub quad_order: usize,
    /// Row j holds the numerator coefficients (z^0 .. z^{n-1}) of zeta_j.
    pub diff_coeffs: DMatrix<Complex64>,
    pub tau: DMatrix<Complex64>,
    pub riemann_k: DVector<Complex64>,
    /// Abel map at infinity on the upper sheet.
    pub phi_inf_upper: DVector<Complex64>,
    pub normalization_condition: f64,
    pub normalization_residual: f64,
    /// Theta-divisor score of the selected Riemann-constant half-period
    /// (max |Theta| at divisor points over the control scale) and the score
    /// of the runner-up candidate.
    pub riemann_k_score: f64,
    pub riemann_k_runner_up: f64,
}

/// Cycle selector for `cycle_integral`.
#[derive(Debug, Clone, Copy)]
pub enum Cycle {
    /// Counterclockwise loop around cut j (upper sheet).
    A(usize),
    /// Upper-sheet restriction of the cut-edge realization of a_j
    /// (the east edge traversed upward).
    AUpperHalf(usize),
    /// Through cuts 0 and j (upper sheet out, lower sheet back).
    B(usize),
}

impl SurfaceGeometry {
    pub fn genus(&self) -> usize {
        self.branch.genus()
    }

    /// zeta_j numerator polynomial.
    pub fn zeta_numerator(&self, j: usize) -> Poly {
        let n = self.genus();
        Poly::new((0..n).map(|k| self.diff_coeffs[(j, k)]).collect())
    }

    /// Evaluate the full differential vector zeta(z) dz on the upper sheet.
    pub fn zeta_upper(&self, z: Complex64) -> DVector<Complex64> {
        let n = self.genus();
        let w = self.branch.w_upper(z);
        let mut out = DVector::from_element(n, c64(0.0, 0.0));
        for j in 0..n {
            out[j] = self.zeta_numerator(j).eval(z) / w;
        }
        out
    }

    pub fn diagnostics(&self) -> SurfaceDiagnostics {
        let n = self.genus();
        let sym = tau_symmetry(&self.tau);
        let min_eig = tau_im_min_eig(&self.tau);
        SurfaceDiagnostics {
            genus: n,
            normalization_residual: self.normalization_residual,
            tau_symmetry: sym,
            tau_im_min_eigenvalue: min_eig,
            normalization_condition: self.normalization_condition,
            tau_re: (0..n).map(|i| (0..n).map(|j| self.tau[(i, j)].re).collect()).collect(),
            tau_im: (0..n).map(|i| (0..n).map(|j| self.tau[(i, j)].im).collect()).collect(),
            riemann_k_re: (0..n).map(|i| self.riemann_k[i].re).collect(),
            riemann_k_im: (0..n).map(|i| self.riemann_k[i].im).collect(),
        }
    }
}

pub fn tau_symmetry(tau: &DMatrix<Complex64>) -> f64 {
    let n = tau.nrows();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            m = m.max((tau[(i, j)] - tau[(j, i)]).norm());
        }
    }
    m
}

pub fn tau_im_min_eig(tau: &DMatrix<Complex64>) -> f64 {
    let n = tau.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    let im = DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (tau[(i, j)].im + tau[(j, i)].im));
    let eig = im.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// w evaluated at a surface point; thin wrapper kept for API symmetry.
pub fn eval_w(surface: &SurfaceGeometry, p: SurfacePoint) -> Result<Complex64> {
    surface.branch.w_at(p)
}

/// Integral over a homology cycle of numerator(z)/w(z) dz.
///
/// a-cycles collapse onto the cut: the counterclockwise loop equals twice the
/// east-side integral up the cut, with z = B_j + i A_j sin t absorbing the
/// endpoint singularities. b-cycles reduce to twice the upper-sheet path
/// integral from E_0 to E_j, routed above all cuts.
pub fn cycle_integral(
    branch: &BranchSet,
    numerator: &Poly,
    cycle: Cycle,
    order: usize,
) -> Complex64 {
    match cycle {
        Cycle::A(j) => a_period(branch, numerator, j, order, -1.0, 1.0) * 2.0,
        Cycle::AUpperHalf(j) => a_period(branch, numerator, j, order, -1.0, 1.0),
        Cycle::B(j) => b_path_integral(branch, numerator, j, order),
    }
}

/// East-side integral of numerator/w along cut j between fractional heights
/// lo..hi in [-1, 1] (sin substitution).
fn a_period(branch: &BranchSet, numerator: &Poly, j: usize, order: usize, lo: f64, hi: f64) -> Complex64 {
    let rule = quad::gauss_legendre(order);
    let bj = branch.b(j);
    let t_lo = lo.asin();
    let t_hi = hi.asin();
    let mid = 0.5 * (t_lo + t_hi);
    let half = 0.5 * (t_hi - t_lo);
    let mut acc = c64(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let t = mid + half * x;
        let y = branch.a(j) * t.sin();
        let z = c64(bj, y);
        let mut rest = ONE;
        for k in 0..branch.num_cuts() {
            if k != j {
                rest *= branch.cut_factor(k, z);
            }
        }
        acc += *w * numerator.eval(z) / rest;
    }
    // dz / w_east = i dt / rest  (A cos t cancels)
    acc * I * half
}

/// Upper-sheet route from E_0 to E_j over the cut tops; the b_j period is
/// twice this by the mirror (sheet-swap) symmetry of the cycle.
fn b_path_integral(branch: &BranchSet, numerator: &Poly, j: usize, order: usize) -> Complex64 {
    let e0 = branch.point(0);
    let ej = branch.point(j);
    let h = branch.clearance();
    let p1 = c64(e0.re, h);
    let p2 = c64(ej.re, h);
    let f = |z: Complex64| numerator.eval(z) / branch.w_upper(z);
    let mut acc = quad::segment_sqrt_start(&f, e0, p1, order);
    acc += quad::segment_chunked(&f, p1, p2, order, h);
    acc -= quad::segment_sqrt_start(&f, ej, p2, order);
    acc * 2.0
}

/// Canonical Abel path target kinds.
enum AbelTarget {
    Point(Complex64),
    /// One-sided point on cut k at height y.
    CutPoint { k: usize, y: f64, side: CutSide },
    InfinityUpper,
}

/// Integrate a vector of differentials (rows of coeff matrix over w) along
/// the canonical path from conj(E_0) to the target, on the upper sheet.
fn abel_integral(
    surface: &SurfaceGeometry,
    target: AbelTarget,
    order: usize,
) -> Result<DVector<Complex64>> {
    let br = &surface.branch;
    let n = surface.genus();
    let h = br.clearance();
    let e0c = br.point(0).conj();
    let start_leg_end = c64(e0c.re, -h);
    let f_vec = |z: Complex64| -> DVector<Complex64> { surface.zeta_upper(z) };

    let mut total = DVector::from_element(n, c64(0.0, 0.0));
    // each leg integrates all components at once
    let add_leg = |total: &mut DVector<Complex64>, vals: Vec<DVector<Complex64>>, ws: Vec<Complex64>| {
        for (v, w) in vals.into_iter().zip(ws) {
            for i in 0..n {
                total[i] += v[i] * w;
            }
        }
    };

    // Leg 1: straight down from the branch point conj(E_0); sqrt singularity.
    {
        let rule = quad::gauss_legendre(order);
        let d = start_leg_end - e0c;
        let mut vals = Vec::with_capacity(rule.nodes.len());
        let mut ws = Vec::with_capacity(rule.nodes.len());
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let s = 0.5 * (x + 1.0);
            let z = e0c + d * (s * s);
            vals.push(f_vec(z));
            ws.push(c64(*w * s, 0.0) * d);
        }
        add_leg(&mut total, vals, ws);
    }

    let horiz_then_up = |total: &mut DVector<Complex64>, x_target: f64| {
        let p = c64(x_target, -h);
        let rule = quad::gauss_legendre(order);
        let a = start_leg_end;
        let chunks = ((p - a).norm() / h).ceil().max(1.0) as usize;
        let mut vals = Vec::new();
        let mut ws = Vec::new();
        for k in 0..chunks {
            let ca = a + (p - a) * (k as f64 / chunks as f64);
            let cb = a + (p - a) * ((k + 1) as f64 / chunks as f64);
            let mid = 0.5 * (ca + cb);
            let half = 0.5 * (cb - ca);
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                vals.push(f_vec(mid + half * x));
                ws.push(c64(*w, 0.0) * half);
            }
        }
        add_leg(total, vals, ws);
        p
    };

    match target {
        AbelTarget::Point(zt) => {
            if br.cut_containing(zt).is_some() {
                return Err(Error::OnCut);
            }
            // a vertical ascent may not thread a cut: when the target sits
            // above a cut, ascend beside it and hop across over the top
            let mut ascent_x = zt.re;
            let mut hop: Option<Complex64> = None;
            for k in 0..br.num_cuts() {
                if (zt.re - br.b(k)).abs() < 0.05 * br.min_cut_gap() && zt.im > -br.a(k) {
                    if zt.im <= br.a(k) * 1.05 + 1e-12 {
                        return Err(Error::Invalid(
                            "target is vertically aligned with a cut; perturb the point".into(),
                        ));
                    }
                    ascent_x = br.b(k) + 0.3 * br.min_cut_gap();
                    hop = Some(zt);
                }
            }
            let p = horiz_then_up(&mut total, ascent_x);
            let rule = quad::gauss_legendre(order);
            let top = match hop {
                Some(zt) => c64(ascent_x, zt.im),
                None => zt,
            };
            let legs: Vec<(Complex64, Complex64)> = match hop {
                Some(zt) => vec![(p, top), (top, zt)],
                None => vec![(p, zt)],
            };
            for (a, b) in legs {
                let mut vals = Vec::new();
                let mut ws = Vec::new();
                for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                    let mid = 0.5 * (a + b);
                    let half = 0.5 * (b - a);
                    vals.push(f_vec(mid + half * x));
                    ws.push(c64(*w * 0.5, 0.0) * (b - a));
                }
                add_leg(&mut total, vals, ws);
            }
        }
        AbelTarget::CutPoint { k, y, side } => {
            // approach along the cut edge from below, passing conj(E_k)
            let bx = br.b(k);
            let p = horiz_then_up(&mut total, bx);
            let ekc = br.point(k).conj();
            // vertical run from p up to the branch point conj(E_k); traversed
            // opposite to the substituted direction, hence the minus
            {
                let rule = quad::gauss_legendre(order);
                let d = p - ekc;
                for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                    let s = 0.5 * (x + 1.0);
                    let z = ekc + d * (s * s);
                    let v = f_vec(z);
                    for i in 0..n {
                        total[i] -= v[i] * (*w * s) * d;
                    }
                }
            }
            // edge piece from conj(E_k) up to height y along the chosen side
            {
                let rule = quad::gauss_legendre(order);
                let a_k = br.a(k);
                let t0 = -std::f64::consts::FRAC_PI_2;
                let t1 = (y / a_k).clamp(-1.0, 1.0).asin();
                let mid = 0.5 * (t0 + t1);
                let half = 0.5 * (t1 - t0);
                let sgn = match side {
                    CutSide::East => 1.0,
                    CutSide::West => -1.0,
                };
                for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                    let t = mid + half * x;
                    let z = c64(bx, a_k * t.sin());
                    let mut rest = ONE;
                    for kk in 0..br.num_cuts() {
                        if kk != k {
                            rest *= br.cut_factor(kk, z);
                        }
                    }
                    // dz / w_side = i dt / (sgn * rest)
                    for i in 0..n {
                        total[i] += *w * half * surface.zeta_numerator(i).eval(z) / (sgn * rest) * I;
                    }
                }
            }
        }
        AbelTarget::InfinityUpper => {
            let x_far = br.points().iter().map(|p| p.re.abs()).fold(0.0, f64::max) * 2.0
                + 4.0 * br.clearance()
                + 4.0;
            let p = horiz_then_up(&mut total, x_far);
            // up to the real axis
            let q = c64(x_far, 0.0);
            let rule = quad::gauss_legendre(order);
            let mid = 0.5 * (p + q);
            let half = 0.5 * (q - p);
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let z = mid + half * x;
                let v = f_vec(z);
                for i in 0..n {
                    total[i] += *w * v[i] * half;
                }
            }
            // tail along the positive real axis
            for i in 0..n {
                let num = surface.zeta_numerator(i);
                let contrib = quad::ray_to_infinity(
                    |z| num.eval(z) / br.w_upper(z),
                    q,
                    c64(4.0 * x_far, 0.0),
                    order,
                );
                total[i] += contrib;
            }
        }
    }
    Ok(total)
}

/// Abel map from the base point conj(E_0) along the canonical path.
pub fn abel_map(surface: &SurfaceGeometry, p: SurfacePoint) -> Result<DVector<Complex64>> {
    let v = abel_integral(surface, AbelTarget::Point(p.z), surface.quad_order)?;
    Ok(match p.sheet {
        Sheet::Upper => v,
        Sheet::Lower => -v,
    })
}

/// One-sided Abel map value on cut k at height y.
pub fn abel_map_on_cut(
    surface: &SurfaceGeometry,
    k: usize,
    y: f64,
    side: CutSide,
    sheet: Sheet,
) -> Result<DVector<Complex64>> {
    let v = abel_integral(surface, AbelTarget::CutPoint { k, y, side }, surface.quad_order)?;
    Ok(match sheet {
        Sheet::Upper => v,
        Sheet::Lower => -v,
    })
}

/// Abel map at infinity on the given sheet.
pub fn abel_map_infinity(surface: &SurfaceGeometry, sheet: Sheet) -> DVector<Complex64> {
    let v = surface.phi_inf_upper.clone();
    match sheet {
        Sheet::Upper => v,
        Sheet::Lower => -v,
    }
}

/// Build the surface: solve the normalization system, assemble tau and K.
pub fn build_surface(branch: BranchSet, quad_order: usize) -> Result<SurfaceGeometry> {
    if quad_order < 16 {
        return Err(Error::Invalid("quad_order must be at least 16".into()));
    }
    let n = branch.genus();
    if n == 0 {
        return Ok(SurfaceGeometry {
            branch,
            quad_order,
            diff_coeffs: DMatrix::zeros(0, 0),
            tau: DMatrix::zeros(0, 0),
            riemann_k: DVector::zeros(0),
            phi_inf_upper: DVector::zeros(0),
            normalization_condition: 1.0,
            normalization_residual: 0.0,
            riemann_k_score: 0.0,
            riemann_k_runner_up: f64::INFINITY,
        });
    }

    // A_{jk} = oint_{a_j} z^k / w dz for j = 1..n, k = 0..n-1
    let mut a_mat = DMatrix::<Complex64>::zeros(n, n);
    for j in 1..=n {
        for k in 0..n {
            let mono = Poly::new({
                let mut v = vec![c64(0.0, 0.0); k + 1];
                v[k] = ONE;
                v
            });
            a_mat[(j - 1, k)] = cycle_integral(&branch, &mono, Cycle::A(j), quad_order);
        }
    }
    let svd = a_mat.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 1e-14 * smax {
        return Err(Error::DegenerateBranch(
            "normalization matrix numerically singular; cuts nearly coincide".into(),
        ));
    }
    let cond = smax / smin;

    // C solves A C^T = I  =>  each column of C^T from an LU solve.
    let lu = a_mat.clone().lu();
    let mut c_t = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut rhs = DVector::<Complex64>::zeros(n);
        rhs[j] = ONE;
        let col = lu
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("normalization system".into()))?;
        c_t.set_column(j, &col);
    }
    let diff_coeffs = c_t.transpose();

    // residual of the normalization
    let mut resid: f64 = 0.0;
    let recheck = &a_mat * &diff_coeffs.transpose();
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { c64(0.0, 0.0) };
            resid = resid.max((recheck[(i, j)] - target).norm());
        }
    }

    // b-periods: tau_{jl} = oint_{b_j} zeta_l
    let mut tau = DMatrix::<Complex64>::zeros(n, n);
    for j in 1..=n {
        for l in 0..n {
            let mut num = Poly::zero();
            for k in 0..n {
                let mut v = vec![c64(0.0, 0.0); k + 1];
                v[k] = diff_coeffs[(l, k)];
                num = num.add(&Poly::new(v));
            }
            tau[(j - 1, l)] = cycle_integral(&branch, &num, Cycle::B(j), quad_order);
        }
    }
    // The mirror-path realization of the b-cycles can differ from a canonical
    // completion of the a-basis by integer a-cycle admixtures, which shows up
    // as integer antisymmetry of tau. Adding the integer admixture (lower
    // triangular, diagonal untouched) selects a canonical completion.
    for j in 1..n {
        for l in 0..j {
            let m = (tau[(l, j)] - tau[(j, l)]).re.round();
            tau[(j, l)] += c64(m, 0.0);
        }
    }

    let mut surface = SurfaceGeometry {
        branch,
        quad_order,
        diff_coeffs,
        tau,
        riemann_k: DVector::zeros(n),
        phi_inf_upper: DVector::zeros(n),
        normalization_condition: cond,
        normalization_residual: resid,
        riemann_k_score: 0.0,
        riemann_k_runner_up: f64::INFINITY,
    };

    let min_eig = tau_im_min_eig(&surface.tau);
    if min_eig <= 0.0 {
        return Err(Error::TauNotPositive(min_eig));
    }

    surface.phi_inf_upper = abel_integral(&surface, AbelTarget::InfinityUpper, quad_order)?;
    let (k_vec, score, runner_up) = riemann_constants(&surface)?;
    surface.riemann_k = k_vec;
    surface.riemann_k_score = score;
    surface.riemann_k_runner_up = runner_up;
    Ok(surface)
}

/// Riemann constant vector for the base point conj(E_0). The base point is
/// a Weierstrass point, so K is a half-period: K = (m + tau m')/2 with
/// binary vectors m, m'. The right one is selected by the theta-divisor
/// property, namely Theta(phi(P) - phi(D) - K) must vanish at the points of
/// a generic non-special degree-n divisor D and nowhere generic.
fn riemann_constants(surface: &SurfaceGeometry) -> Result<(DVector<Complex64>, f64, f64)> {
    let n = surface.genus();
    let br = &surface.branch;
    if n == 1 {
        return Ok((
            DVector::from_element(1, (ONE + surface.tau[(0, 0)]) * 0.5),
            0.0,
            f64::INFINITY,
        ));
    }
    let ctx = crate::theta::ThetaContext::new(surface.tau.clone(), 1e-10)?;
    // generic divisor: points hovering over cuts 1..n
    let divisor: Vec<Complex64> = (1..=n).map(|k| c64(br.b(k), 1.6 * br.a(k))).collect();
    let order = surface.quad_order;
    let mut phi_d = DVector::<Complex64>::from_element(n, c64(0.0, 0.0));
    let mut phi_pts = Vec::with_capacity(n);
    for &z in &divisor {
        let phi = abel_integral(surface, AbelTarget::Point(z), order)?;
        phi_d += &phi;
        phi_pts.push(phi);
    }
    // control points for the non-vanishing side
    let mut phi_ctrl = Vec::new();
    for k in 0..br.num_cuts().min(3) {
        let z = c64(br.b(k) + 0.4 * br.min_cut_gap(), -2.1 * br.a(k));
        phi_ctrl.push(abel_integral(surface, AbelTarget::Point(z), order)?);
    }
    let mut best: Option<(f64, DVector<Complex64>)> = None;
    let mut second = f64::INFINITY;
    let total = 1usize << (2 * n);
    for code in 0..total {
        let mut k_vec = DVector::<Complex64>::from_element(n, c64(0.0, 0.0));
        for j in 0..n {
            let m = ((code >> j) & 1) as f64;
            let mp = ((code >> (n + j)) & 1) as f64;
            k_vec[j] = 0.5 * c64(m, 0.0);
            for l in 0..n {
                let mpl = ((code >> (n + l)) & 1) as f64;
                k_vec[j] += 0.5 * surface.tau[(j, l)] * mpl;
                let _ = mp;
                let _ = mpl;
            }
        }
        // zero score: max |Theta| over the divisor points, normalized by the
        // control values
        let mut zero_score: f64 = 0.0;
        for phi in &phi_pts {
            let arg = DVector::from_fn(n, |i, _| phi[i] - phi_d[i] - k_vec[i]);
            zero_score = zero_score.max(ctx.theta(&arg).norm());
        }
        let mut ctrl_score = f64::INFINITY;
        for phi in &phi_ctrl {
            let arg = DVector::from_fn(n, |i, _| phi[i] - phi_d[i] - k_vec[i]);
            ctrl_score = ctrl_score.min(ctx.theta(&arg).norm());
        }
        let score = zero_score / ctrl_score.max(1e-300);
        match &best {
            Some((b, _)) if score >= *b => second = second.min(score),
            _ => {
                if let Some((b, _)) = &best {
                    second = second.min(*b);
                }
                best = Some((score, k_vec));
            }
        }
    }
    let (score, k_vec) = best.unwrap();
    Ok((k_vec, score, second))
}
