//! Special-function kernel: complex Airy function, the Hastings-McLeod
//! branch of Painleve II with its squared integral, the Airy parametrix with
//! its asymptotic series, complex Gamma, and the parabolic-cylinder
//! coefficients beta_12 / beta_21.

use crate::{c64, Complex64, Error, Result};
use nalgebra::DMatrix;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Gamma

/// Lanczos coefficients, g = 7, 9 terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Complex Gamma by Lanczos approximation with reflection for Re z < 1/2.
pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::Singular(format!("Gamma pole at {z}")));
    }
    if z.re < 0.5 {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let s = (std::f64::consts::PI * z).sin();
        if s.norm() == 0.0 {
            return Err(Error::Singular(format!("Gamma pole at {z}")));
        }
        return Ok(std::f64::consts::PI / (s * complex_gamma(1.0 - z)?));
    }
    let zm = z - 1.0;
    let mut x = c64(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (zm + i as f64);
    }
    let t = zm + LANCZOS_G + 0.5;
    Ok((TWO_PI).sqrt() * t.powc(zm + 0.5) * (-t).exp() * x)
}

// ---------------------------------------------------------------------------
// Airy

/// Ai(z) and Ai'(z) for complex z.
pub fn airy_pair(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < AIRY_TAYLOR_RADIUS {
        airy_taylor(z)
    } else if z.arg().abs() <= 2.0 {
        airy_asymptotic(z)
    } else {
        // connection: Ai(z) = -w Ai(w z) - w^2 Ai(w^2 z), w = e^{2 pi i/3};
        // both rotated arguments land in the good sector
        let w = Complex64::from_polar(1.0, TWO_PI / 3.0);
        let w2 = w * w;
        let (a1, d1) = airy_asymptotic(w * z);
        let (a2, d2) = airy_asymptotic(w2 * z);
        // d/dz Ai(w z) = w Ai'(w z)
        (-w * a1 - w2 * a2, -w2 * d1 - w2 * w2 * d2)
    }
}

pub fn airy(z: Complex64) -> Complex64 {
    airy_pair(z).0
}

/// e^{(2/3) z^{3/2}} Ai(z) together with the exponent, for use where Ai
/// itself would underflow.
pub fn airy_scaled(z: Complex64) -> (Complex64, Complex64) {
    let xi = (2.0 / 3.0) * z.powf(1.5);
    if z.norm() < AIRY_TAYLOR_RADIUS {
        let (a, _) = airy_taylor(z);
        (a * xi.exp(), xi)
    } else if z.arg().abs() <= 2.0 {
        let (sum_a, _) = airy_asymptotic_sums(z);
        ((0.5 / std::f64::consts::PI.sqrt()) * sum_a / z.powf(0.25), xi)
    } else {
        let (a, _) = airy_pair(z);
        (a * xi.exp(), xi)
    }
}

/// Crossover ring between the double-double Maclaurin series and the
/// asymptotic expansion; both routes carry ~1e-13 relative error there.
const AIRY_TAYLOR_RADIUS: f64 = 10.0;

/// Ai(0) = 3^{-2/3} / Gamma(2/3), -Ai'(0) = 3^{-1/3} / Gamma(1/3),
/// in double-double splits: the final combination c1 f - c2 g cancels up to
/// eighteen digits near the outer Taylor radius, so the constants need the
/// extended precision as much as the sums do.
const AIRY_C1: (f64, f64) = (0.3550280538878172, 2.05233632436212e-17);
const AIRY_C2: (f64, f64) = (0.2588194037928068, -2.522243111610832e-17);

// Double-double scalar: value = hi + lo. The Maclaurin series of Ai in the
// recessive directions cancels through ~12 digits at |z| = 8, so the sums
// are accumulated in roughly 32-digit arithmetic and rounded at the end.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: e }
}

fn dd_renorm(hi: f64, lo: f64) -> Dd {
    two_sum(hi, lo)
}

fn dd_add(a: Dd, b: Dd) -> Dd {
    let s = two_sum(a.hi, b.hi);
    dd_renorm(s.hi, s.lo + a.lo + b.lo)
}

fn dd_mul(a: Dd, b: Dd) -> Dd {
    let p = a.hi * b.hi;
    let e = a.hi.mul_add(b.hi, -p);
    dd_renorm(p, e + a.hi * b.lo + a.lo * b.hi)
}

fn dd_div_f64(a: Dd, x: f64) -> Dd {
    let q1 = a.hi / x;
    let r = (-q1).mul_add(x, a.hi) + a.lo;
    dd_renorm(q1, r / x)
}

fn dd_scale(a: Dd, x: f64) -> Dd {
    let p = a.hi * x;
    let e = a.hi.mul_add(x, -p);
    dd_renorm(p, e + a.lo * x)
}

#[derive(Debug, Clone, Copy)]
struct DdC {
    re: Dd,
    im: Dd,
}

impl DdC {
    fn from(z: Complex64) -> Self {
        DdC { re: Dd::from(z.re), im: Dd::from(z.im) }
    }
    fn zero() -> Self {
        DdC { re: Dd::from(0.0), im: Dd::from(0.0) }
    }
    fn value(self) -> Complex64 {
        c64(self.re.value(), self.im.value())
    }
    fn add(self, o: DdC) -> DdC {
        DdC { re: dd_add(self.re, o.re), im: dd_add(self.im, o.im) }
    }
    fn mul(self, o: DdC) -> DdC {
        let rr = dd_mul(self.re, o.re);
        let ii = dd_mul(self.im, o.im);
        let ri = dd_mul(self.re, o.im);
        let ir = dd_mul(self.im, o.re);
        DdC {
            re: dd_add(rr, dd_scale(ii, -1.0)),
            im: dd_add(ri, ir),
        }
    }
    fn div_f64(self, x: f64) -> DdC {
        DdC { re: dd_div_f64(self.re, x), im: dd_div_f64(self.im, x) }
    }
    fn scale(self, x: f64) -> DdC {
        DdC { re: dd_scale(self.re, x), im: dd_scale(self.im, x) }
    }
    fn norm_est(self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }
}

fn airy_taylor(z: Complex64) -> (Complex64, Complex64) {
    let z3 = DdC::from(z).mul(DdC::from(z)).mul(DdC::from(z));
    // f = sum a_k z^{3k},  a_{k+1} = a_k z^3 / ((3k+2)(3k+3))
    // g = sum b_k z^{3k+1}, b_{k+1} = b_k z^3 / ((3k+3)(3k+4))
    // fp = sum a_k 3k z^{3k-1}, gp = sum b_k (3k+1) z^{3k}
    let mut a_term = DdC::from(c64(1.0, 0.0));
    let mut b_term = DdC::from(z);
    let mut bp_term = DdC::from(c64(1.0, 0.0)); // b_k (3k+1) z^{3k}
    let mut ap_term = DdC::zero(); // a_k 3k z^{3k-1}
    let mut f = a_term;
    let mut g = b_term;
    let mut fp = ap_term;
    let mut gp = bp_term;
    // z^2 for the derivative recurrences
    let z2 = DdC::from(z).mul(DdC::from(z));
    for k in 0..200 {
        let kf = k as f64;
        let a_next = a_term.mul(z3).div_f64((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        let b_next = b_term.mul(z3).div_f64((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        // derivative-term recurrences with exact integer denominators:
        // AP_{k+1} = AP_k z^3 / (3k (3k+2)), BP_{k+1} = BP_k z^3 / ((3k+1)(3k+3))
        let ap_next = if k == 0 {
            z2.div_f64(2.0) // AP_1 = 3 a_1 z^2 = z^2 / 2
        } else {
            ap_term.mul(z3).div_f64(3.0 * kf * (3.0 * kf + 2.0))
        };
        let bp_next = bp_term.mul(z3).div_f64((3.0 * kf + 1.0) * (3.0 * kf + 3.0));
        f = f.add(a_next);
        g = g.add(b_next);
        fp = fp.add(ap_next);
        gp = gp.add(bp_next);
        let done = a_next.norm_est() < 1e-34 * f.norm_est().max(1.0)
            && b_next.norm_est() < 1e-34 * g.norm_est().max(1.0);
        a_term = a_next;
        b_term = b_next;
        ap_term = ap_next;
        bp_term = bp_next;
        if done {
            break;
        }
    }
    let c1 = Dd { hi: AIRY_C1.0, lo: AIRY_C1.1 };
    let c2 = Dd { hi: -AIRY_C2.0, lo: -AIRY_C2.1 };
    let mul_const = |v: DdC, c: Dd| DdC { re: dd_mul(v.re, c), im: dd_mul(v.im, c) };
    let ai = mul_const(f, c1).add(mul_const(g, c2)).value();
    let aip = mul_const(fp, c1).add(mul_const(gp, c2)).value();
    (ai, aip)
}

/// Asymptotic coefficient u_k from the product formula
/// u_k = (2k+1)(2k+3)...(6k-1) / (216^k k!), u_0 = 1; v_k = u_k (6k+1)/(1-6k).
pub fn airy_uk(k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut num = 1.0;
    let mut m = 2 * k + 1;
    while m <= 6 * k - 1 {
        num *= m as f64;
        m += 2;
    }
    let mut denom = 1.0;
    for j in 1..=k {
        denom *= 216.0 * j as f64;
    }
    num / denom
}

pub fn airy_vk(k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    airy_uk(k) * (6.0 * k as f64 + 1.0) / (1.0 - 6.0 * k as f64)
}

/// Truncated asymptotic sums: (sum (-1)^k u_k xi^-k, sum (-1)^k v_k xi^-k).
fn airy_asym_series(xi: Complex64) -> (Complex64, Complex64) {
    let mut sa = c64(0.0, 0.0);
    let mut sb = c64(0.0, 0.0);
    let mut pow = c64(1.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 0..40 {
        let term_a = airy_uk(k) * pow * if k % 2 == 0 { 1.0 } else { -1.0 };
        let term_b = airy_vk(k) * pow * if k % 2 == 0 { 1.0 } else { -1.0 };
        let mag = term_a.norm();
        if mag > prev {
            break; // divergent tail reached
        }
        sa += term_a;
        sb += term_b;
        if mag < 1e-18 * sa.norm().max(1.0) {
            break;
        }
        prev = mag;
        pow /= xi;
    }
    (sa, sb)
}

fn airy_asymptotic_sums(z: Complex64) -> (Complex64, Complex64) {
    let xi = (2.0 / 3.0) * z.powf(1.5);
    airy_asym_series(xi)
}

fn airy_asymptotic(z: Complex64) -> (Complex64, Complex64) {
    let xi = (2.0 / 3.0) * z.powf(1.5);
    let (sa, sb) = airy_asym_series(xi);
    let pref = (-xi).exp() / (2.0 * std::f64::consts::PI.sqrt());
    let ai = pref * sa / z.powf(0.25);
    let aip = -pref * sb * z.powf(0.25);
    (ai, aip)
}

// ---------------------------------------------------------------------------
// Hastings-McLeod Painleve II

/// State after a Hastings-McLeod sweep: samples of (varpi, u, u', J) with
/// J = int_varpi^inf u^2.
#[derive(Debug, Clone)]
pub struct HMState {
    pub a: f64,
    pub grid: Vec<(f64, f64, f64, f64)>,
}

const HM_SEED_POINT: f64 = 12.0;

fn hm_rhs(x: f64, y: &[f64; 3]) -> [f64; 3] {
    [y[1], x * y[0] + 2.0 * y[0].powi(3), -y[0] * y[0]]
}

/// Seed at the far right: u = a Ai, u' = a Ai', J = a^2 (Ai'^2 - x Ai^2).
fn hm_seed(a: f64, x: f64) -> [f64; 3] {
    let (ai, aip) = airy_pair(c64(x, 0.0));
    let (ai, aip) = (ai.re, aip.re);
    [a * ai, a * aip, a * a * (aip * aip - x * ai * ai)]
}

/// Cash-Karp embedded RK45 step.
fn rk45_step(x: f64, y: &[f64; 3], h: f64) -> ([f64; 3], f64) {
    let k1 = hm_rhs(x, y);
    let add = |y: &[f64; 3], ks: &[(&[f64; 3], f64)]| -> [f64; 3] {
        let mut out = *y;
        for (k, c) in ks {
            for i in 0..3 {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    let k2 = hm_rhs(x + 0.2 * h, &add(y, &[(&k1, 0.2)]));
    let k3 = hm_rhs(x + 0.3 * h, &add(y, &[(&k1, 3.0 / 40.0), (&k2, 9.0 / 40.0)]));
    let k4 = hm_rhs(
        x + 0.6 * h,
        &add(y, &[(&k1, 0.3), (&k2, -0.9), (&k3, 1.2)]),
    );
    let k5 = hm_rhs(
        x + h,
        &add(
            y,
            &[(&k1, -11.0 / 54.0), (&k2, 2.5), (&k3, -70.0 / 27.0), (&k4, 35.0 / 27.0)],
        ),
    );
    let k6 = hm_rhs(
        x + 0.875 * h,
        &add(
            y,
            &[
                (&k1, 1631.0 / 55296.0),
                (&k2, 175.0 / 512.0),
                (&k3, 575.0 / 13824.0),
                (&k4, 44275.0 / 110592.0),
                (&k5, 253.0 / 4096.0),
            ],
        ),
    );
    let y5 = add(
        y,
        &[
            (&k1, 37.0 / 378.0),
            (&k3, 250.0 / 621.0),
            (&k4, 125.0 / 594.0),
            (&k6, 512.0 / 1771.0),
        ],
    );
    let y4 = add(
        y,
        &[
            (&k1, 2825.0 / 27648.0),
            (&k3, 18575.0 / 48384.0),
            (&k4, 13525.0 / 55296.0),
            (&k5, 277.0 / 14336.0),
            (&k6, 0.25),
        ],
    );
    let mut err: f64 = 0.0;
    for i in 0..3 {
        // mixed control: absolute floor keeps the exponentially small
        // right tail resolved relative to its own scale
        err = err.max((y5[i] - y4[i]).abs() / (1e-30 + y[i].abs().max(y5[i].abs())));
    }
    (y5, err)
}

/// Adaptive sweep from HM_SEED_POINT down (or up) to target.
fn hm_sweep(a: f64, from: f64, to: f64, mut y: [f64; 3], tol: f64) -> Result<[f64; 3]> {
    let dir = if to >= from { 1.0 } else { -1.0 };
    let mut x = from;
    let mut h = dir * 0.05;
    let mut guard = 0usize;
    while (to - x) * dir > 1e-14 {
        if (x + h - to) * dir > 0.0 {
            h = to - x;
        }
        let (y_new, err) = rk45_step(x, &y, h);
        if err <= tol {
            x += h;
            y = y_new;
            if y[0].abs() > 1e6 {
                return Err(Error::Domain(format!(
                    "Painleve II solution blew up near varpi = {x:.4} (a = {a})"
                )));
            }
            if err > 0.0 {
                h *= 0.9 * (tol / err).powf(0.2).min(2.0);
            } else {
                h *= 2.0;
            }
        } else {
            h *= 0.9 * (tol / err).powf(0.25).max(0.1);
        }
        guard += 1;
        if guard > 2_000_000 {
            return Err(Error::NoConvergence("Painleve II stepper stalled".into()));
        }
    }
    Ok(y)
}

/// (u, u', int_varpi^inf u^2) for the Hastings-McLeod branch with
/// u ~ a Ai at +infinity.
pub fn hm_solution(a: f64, varpi: f64) -> Result<(f64, f64, f64)> {
    if a == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    if a < 0.0 {
        let (u, up, j) = hm_solution(-a, varpi)?;
        return Ok((-u, -up, j));
    }
    if varpi >= HM_SEED_POINT {
        let y = hm_seed(a, varpi);
        return Ok((y[0], y[1], y[2]));
    }
    let y0 = hm_seed(a, HM_SEED_POINT);
    let y = hm_sweep(a, HM_SEED_POINT, varpi, y0, 1e-12)?;
    Ok((y[0], y[1], y[2]))
}

impl HMState {
    /// One continuous downward sweep sampling the requested grid.
    pub fn build(a: f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || hi <= lo {
            return Err(Error::Invalid("bad grid".into()));
        }
        let mut grid = Vec::with_capacity(n);
        let mut y = hm_seed(a, HM_SEED_POINT);
        let mut x = HM_SEED_POINT;
        for i in (0..n).rev() {
            let target = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            if target > HM_SEED_POINT {
                let seeded = hm_seed(a, target);
                grid.push((target, seeded[0], seeded[1], seeded[2]));
                continue;
            }
            y = hm_sweep(a, x, target, y, 1e-12)?;
            x = target;
            grid.push((target, y[0], y[1], y[2]));
        }
        grid.reverse();
        Ok(HMState { a, grid })
    }

    /// Max residual of u'' = varpi u + 2u^3 by centered differences.
    pub fn ode_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.grid.windows(3) {
            let (x0, u0, _, _) = w[0];
            let (x1, u1, _, _) = w[1];
            let (x2, u2, _, _) = w[2];
            let h = x1 - x0;
            if ((x2 - x1) - h).abs() > 1e-9 {
                continue;
            }
            let upp = (u2 - 2.0 * u1 + u0) / (h * h);
            let rhs = x1 * u1 + 2.0 * u1 * u1 * u1;
            // fourth-derivative truncation of the stencil scales like h^2
            let res = (upp - rhs).abs() / (1.0 + u1.abs());
            worst = worst.max(res);
        }
        worst
    }
}

/// Independent fixed-step classical RK4 sweep (for cross-validation).
pub fn hm_rk4_sweep(from: f64, to: f64, y0: [f64; 3], steps: usize) -> [f64; 3] {
    let h = (to - from) / steps as f64;
    let mut y = y0;
    let mut x = from;
    for _ in 0..steps {
        let k1 = hm_rhs(x, &y);
        let mut y2 = y;
        for i in 0..3 {
            y2[i] += 0.5 * h * k1[i];
        }
        let k2 = hm_rhs(x + 0.5 * h, &y2);
        let mut y3 = y;
        for i in 0..3 {
            y3[i] += 0.5 * h * k2[i];
        }
        let k3 = hm_rhs(x + 0.5 * h, &y3);
        let mut y4 = y;
        for i in 0..3 {
            y4[i] += h * k3[i];
        }
        let k4 = hm_rhs(x + h, &y4);
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        x += h;
    }
    y
}

/// Trace-free Painleve coefficient matrix with off-diagonal u/2 and
/// diagonal -+ (i/2) int u^2.
pub fn painleve_n1(a: f64, varpi: f64) -> Result<DMatrix<Complex64>> {
    let (u, _, j) = hm_solution(a, varpi)?;
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 0)] = c64(0.0, -0.5 * j);
    m[(1, 1)] = c64(0.0, 0.5 * j);
    m[(0, 1)] = c64(0.5 * u, 0.0);
    m[(1, 0)] = c64(0.5 * u, 0.0);
    Ok(m)
}

// ---------------------------------------------------------------------------
// Airy parametrix

/// Sector index 1..4 by principal argument.
fn airy_sector(zeta: Complex64) -> usize {
    let a = zeta.arg();
    let third = TWO_PI / 3.0;
    if a >= 0.0 && a < third {
        1
    } else if a >= third {
        2
    } else if a <= -third {
        3
    } else {
        4
    }
}

/// N^Ai(zeta): exact Airy-built parametrix, sectorwise.
pub fn airy_parametrix_exact(zeta: Complex64) -> DMatrix<Complex64> {
    airy_parametrix_in_sector(zeta, airy_sector(zeta))
}

/// Same, with the sector forced; this is the boundary-value entry point for
/// points exactly on the four rays.
pub fn airy_parametrix_in_sector(zeta: Complex64, sector: usize) -> DMatrix<Complex64> {
    let w = Complex64::from_polar(1.0, TWO_PI / 3.0);
    let w2 = w * w;
    // zeta^{3/2} continued into the sector closure: only the negative axis
    // (between sectors 2 and 3) carries the branch jump
    let mut a = zeta.arg();
    if sector == 2 && a < -TWO_PI / 3.0 {
        a += TWO_PI;
    }
    if sector == 3 && a > TWO_PI / 3.0 {
        a -= TWO_PI;
    }
    let xi = (2.0 / 3.0) * zeta.norm().powf(1.5) * Complex64::from_polar(1.0, 1.5 * a);
    let e_pos = xi.exp();
    let e_neg = (-xi).exp();
    let col = |rot: usize, scale: Complex64, expf: Complex64| -> (Complex64, Complex64) {
        let rot_c = match rot {
            0 => c64(1.0, 0.0),
            1 => w,
            _ => w2,
        };
        let (ai, aip) = airy_pair(rot_c * zeta);
        (scale * ai * expf, scale * rot_c * aip * expf)
    };
    let em = Complex64::from_polar(1.0, -std::f64::consts::PI / 6.0);
    let ep = Complex64::from_polar(1.0, std::f64::consts::PI / 6.0);
    let i = c64(0.0, 1.0);
    let (c1, c2) = match sector {
        1 => (col(0, em, e_pos), col(2, ep, e_neg)),
        2 => (col(1, -i, e_pos), col(2, ep, e_neg)),
        3 => (col(2, ep, e_pos), col(1, i, e_neg)),
        _ => (col(0, em, e_pos), col(1, i, e_neg)),
    };
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 0)] = c1.0;
    m[(1, 0)] = c1.1;
    m[(0, 1)] = c2.0;
    m[(1, 1)] = c2.1;
    m
}

/// Truncated asymptotic approximation N_{as,N}(zeta).
pub fn airy_parametrix_asymptotic(zeta: Complex64, n_terms: usize) -> DMatrix<Complex64> {
    let xi = (2.0 / 3.0) * zeta.powf(1.5);
    let mut sum = DMatrix::<Complex64>::zeros(2, 2);
    let mut pow = c64(1.0, 0.0);
    for k in 0..=n_terms {
        let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
        let uk = airy_uk(k);
        let vk = airy_vk(k);
        sum[(0, 0)] += pow * sgn * uk;
        sum[(0, 1)] += pow * uk;
        sum[(1, 0)] += pow * (-sgn) * vk;
        sum[(1, 1)] += pow * vk;
        pow /= xi;
    }
    let pref = Complex64::from_polar(1.0, std::f64::consts::PI / 12.0)
        / (2.0 * std::f64::consts::PI.sqrt());
    let q = zeta.powf(0.25);
    let phase = Complex64::from_polar(1.0, -std::f64::consts::PI / 4.0);
    // zeta^{-s3/4} sum e^{-i pi s3 / 4}
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 0)] = pref / q * sum[(0, 0)] * phase;
    m[(0, 1)] = pref / q * sum[(0, 1)] / phase;
    m[(1, 0)] = pref * q * sum[(1, 0)] * phase;
    m[(1, 1)] = pref * q * sum[(1, 1)] / phase;
    m
}

/// Jump matrix on ray j (1..4) at |zeta| = r, per the four-ray table.
pub fn airy_jump(ray: usize, zeta_on_ray: Complex64) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::identity(2, 2);
    match ray {
        1 => {
            let xi = (2.0 / 3.0) * zeta_on_ray.powf(1.5);
            m[(0, 1)] = -(-2.0 * xi).exp();
        }
        2 | 4 => {
            // on these rays zeta^{3/2} is negative real; e^{(4/3)zeta^{3/2}} decays
            let xi32 = zeta_on_ray.powf(1.5);
            m[(1, 0)] = ((4.0 / 3.0) * xi32).exp();
        }
        3 => {
            m[(0, 0)] = c64(0.0, 0.0);
            m[(1, 1)] = c64(0.0, 0.0);
            m[(0, 1)] = c64(1.0, 0.0);
            m[(1, 0)] = c64(-1.0, 0.0);
        }
        _ => panic!("ray index 1..4"),
    }
    m
}

// ---------------------------------------------------------------------------
// Parabolic-cylinder coefficients

/// beta_12, beta_21 from the Gamma-function displays. The Gamma argument is
/// the PC exponent nu (the displays write the stationary-point symbol there,
/// but the dimensionally consistent argument is nu).
pub fn pc_beta(r_eff: Complex64, nu: f64) -> Result<(Complex64, Complex64)> {
    if nu < 0.0 {
        return Err(Error::Invalid("nu must be nonnegative".into()));
    }
    if r_eff.norm() == 0.0 {
        return Ok((c64(0.0, 0.0), c64(0.0, 0.0)));
    }
    let sqrt2pi = TWO_PI.sqrt();
    let quarter = std::f64::consts::FRAC_PI_4;
    let b12 = sqrt2pi * Complex64::from_polar(1.0, quarter) * (-std::f64::consts::PI * nu / 2.0).exp()
        / (r_eff * complex_gamma(c64(0.0, -nu))?);
    let b21 = -sqrt2pi * Complex64::from_polar(1.0, -quarter)
        * (-std::f64::consts::PI * nu / 2.0).exp()
        / (r_eff.conj() * complex_gamma(c64(0.0, nu))?);
    Ok((b12, b21))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_classical_values() {
        let g1 = complex_gamma(c64(1.0, 0.0)).unwrap();
        assert!((g1 - c64(1.0, 0.0)).norm() < 1e-13);
        let gh = complex_gamma(c64(0.5, 0.0)).unwrap();
        assert!((gh.re - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gamma_reflection_identity_at_i() {
        // |Gamma(i)|^2 = pi / sinh(pi)
        let gi = complex_gamma(c64(0.0, 1.0)).unwrap();
        let expected = std::f64::consts::PI / std::f64::consts::PI.sinh();
        assert!((gi.norm_sqr() - expected).abs() < 1e-13);
    }

    #[test]
    fn gamma_recurrence_on_samples() {
        let mut state = 0x2545f4914f6cdd1du64;
        for _ in 0..50 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let re = ((state >> 11) as f64 / (1u64 << 53) as f64) * 8.0 + 0.6;
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let im = ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 16.0;
            let z = c64(re, im);
            let lhs = complex_gamma(z + 1.0).unwrap();
            let rhs = z * complex_gamma(z).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm(), "z={z}");
        }
    }

    #[test]
    fn airy_at_zero_and_classical_points() {
        let (a0, d0) = airy_pair(c64(0.0, 0.0));
        assert!((a0.re - AIRY_C1.0).abs() < 1e-15);
        assert!((d0.re + AIRY_C2.0).abs() < 1e-15);
        // frozen classical values
        let a2 = airy(c64(2.0, 0.0));
        assert!((a2.re - 0.034924130423274379).abs() < 1e-13, "{a2}");
        let am2 = airy(c64(-2.0, 0.0));
        assert!((am2.re - 0.22740742820168557).abs() < 1e-13, "{am2}");
    }

    #[test]
    fn airy_positive_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..30 {
            let x = i as f64 * 0.5;
            let v = airy(c64(x, 0.0)).re;
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn airy_connection_formula_residual() {
        // Ai(z) + w Ai(w z) + w^2 Ai(w^2 z) = 0
        let w = Complex64::from_polar(1.0, TWO_PI / 3.0);
        for z in [c64(1.0, 0.5), c64(3.0, -2.0), c64(-4.0, 1.0), c64(9.0, 9.0)] {
            let s = airy(z) + w * airy(w * z) + w * w * airy(w * w * z);
            let scale = airy(z).norm().max(airy(w * z).norm()).max(1e-300);
            assert!(s.norm() < 1e-10 * scale.max(1e-12), "z={z}: {s}");
        }
    }

    #[test]
    fn airy_taylor_asymptotic_crossover_consistency() {
        // the two evaluation routes agree on the crossover ring
        for arg in [-1.8, -0.9, 0.0, 0.9, 1.8] {
            let z = Complex64::from_polar(AIRY_TAYLOR_RADIUS - 0.01, arg);
            let (t, tp) = airy_taylor(z);
            let (a, ap) = airy_asymptotic(z);
            let rel_a = (t - a).norm() / t.norm().max(1e-30);
            let rel_d = (tp - ap).norm() / tp.norm().max(1e-30);
            assert!(rel_a < 1e-10, "arg={arg}: Ai rel {rel_a:.3e} ({t} vs {a})");
            assert!(rel_d < 1e-10, "arg={arg}: Ai' rel {rel_d:.3e} ({tp} vs {ap})");
        }
    }

    #[test]
    fn hm_zero_amplitude() {
        let (u, up, j) = hm_solution(0.0, -3.0).unwrap();
        assert_eq!((u, up, j), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hm_tracks_airy_at_plus_eight() {
        let a = 1.0;
        let (u, _, _) = hm_solution(a, 8.0).unwrap();
        let ai = airy(c64(8.0, 0.0)).re;
        // envelope bound varpi^{-1/4} e^{-(4/3) varpi^{3/2}}
        let envelope = 8.0f64.powf(-0.25) * (-(4.0 / 3.0) * 8.0f64.powf(1.5)).exp();
        assert!((u - a * ai).abs() < 10.0 * envelope, "u={u} aAi={}", a * ai);
    }

    #[test]
    fn hm_dual_integrator_agreement() {
        // adaptive sweep down to 0, then an independent fixed-step RK4 back
        // up to a moderate checkpoint. The upward direction amplifies errors
        // like exp((2/3) x^{3/2}), so the checkpoint stays at x = 6.
        let a = 1.0;
        let (u0, up0, j0) = hm_solution(a, 0.0).unwrap();
        let back = hm_rk4_sweep(0.0, 6.0, [u0, up0, j0], 12000);
        let (u6, up6, _) = hm_solution(a, 6.0).unwrap();
        assert!((back[0] - u6).abs() < 1e-6, "{} vs {u6}", back[0]);
        assert!((back[1] - up6).abs() < 1e-6, "{} vs {up6}", back[1]);
    }

    #[test]
    fn hm_blowup_guard_fires() {
        // far above the Hastings-McLeod amplitude the solution blows up
        let r = hm_solution(4.0, -8.0);
        assert!(r.is_err());
    }

    #[test]
    fn hm_ode_residual_on_grid() {
        let st = HMState::build(1.0, -4.0, 6.0, 201).unwrap();
        let res = st.ode_residual();
        // second-order stencil on h = 0.05
        assert!(res < 1e-2, "residual {res}");
        // and the cached J column decreases with varpi
        for w in st.grid.windows(2) {
            assert!(w[0].3 >= w[1].3 - 1e-12);
        }
    }

    #[test]
    fn painleve_n1_structure() {
        let m = painleve_n1(0.8, 1.0).unwrap();
        assert!((m[(0, 1)] - m[(1, 0)]).norm() < 1e-15);
        assert!((m[(0, 0)] + m[(1, 1)]).norm() < 1e-15, "trace must vanish");
    }

    #[test]
    fn parametrix_series_constants() {
        assert!((airy_uk(1) - 5.0 / 72.0).abs() < 1e-15);
        assert!((airy_vk(1) + 7.0 / 72.0).abs() < 1e-15);
    }

    #[test]
    fn parametrix_jumps_on_all_rays() {
        // rays oriented toward the origin; the plus side sectors follow from
        // that orientation: Y1: (4,1), Y2: (1,2), Y3: (2,3), Y4: (3,4)
        let sides = [(1usize, 4usize, 1usize), (2, 1, 2), (3, 2, 3), (4, 3, 4)];
        let angles = [0.0, TWO_PI / 3.0, std::f64::consts::PI, -TWO_PI / 3.0];
        for &(ray, plus, minus) in &sides {
            for r in [0.8, 2.2, 5.0] {
                let zeta = Complex64::from_polar(r, angles[ray - 1]);
                let np = airy_parametrix_in_sector(zeta, plus);
                let nm = airy_parametrix_in_sector(zeta, minus);
                let j = airy_jump(ray, zeta);
                let resid = (&np - &nm * &j).norm() / nm.norm().max(1.0);
                assert!(resid < 1e-8, "ray {ray} r={r}: residual {resid:.3e}");
            }
        }
    }

    #[test]
    fn parametrix_error_decay_slopes() {
        for n in 0..=2usize {
            let mut lrs = Vec::new();
            for r in [5.0, 10.0, 20.0, 50.0] {
                let zeta = Complex64::from_polar(r, 0.4);
                let exact = airy_parametrix_exact(zeta);
                let asym = airy_parametrix_asymptotic(zeta, n);
                let inv = exact.clone().try_inverse().unwrap();
                let diff = &inv * &asym - DMatrix::<Complex64>::identity(2, 2);
                lrs.push((r.ln(), diff.norm().ln()));
            }
            // least-squares slope
            let m = lrs.len() as f64;
            let sx: f64 = lrs.iter().map(|p| p.0).sum();
            let sy: f64 = lrs.iter().map(|p| p.1).sum();
            let sxx: f64 = lrs.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = lrs.iter().map(|p| p.0 * p.1).sum();
            let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            let expected = -1.5 * (n as f64 + 1.0);
            assert!(
                (slope - expected).abs() < 0.1,
                "N={n}: slope {slope:.3} vs {expected}"
            );
        }
    }

    #[test]
    fn pc_beta_conjugation_and_identity() {
        let r = c64(0.4, 0.3);
        let nu = (1.0 + r.norm_sqr()).ln() / TWO_PI;
        let (b12, b21) = pc_beta(r, nu).unwrap();
        assert_eq!(b21, -b12.conj(), "exact conjugation at rounding");
        // |beta12|^2 against |Gamma(i nu)|^2 = pi/(nu sinh(pi nu))
        let gnorm2 = std::f64::consts::PI / (nu * (std::f64::consts::PI * nu).sinh());
        let expected = TWO_PI * (-std::f64::consts::PI * nu).exp() / (r.norm_sqr() * gnorm2);
        assert!((b12.norm_sqr() - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn pc_beta_zero_limit() {
        let (b12, b21) = pc_beta(c64(0.0, 0.0), 0.0).unwrap();
        assert_eq!(b12, c64(0.0, 0.0));
        assert_eq!(b21, c64(0.0, 0.0));
        // small-r limit: beta ~ 0 with nu = log(1+|r|^2)/2pi
        for amp in [1e-3, 1e-5] {
            let r = c64(amp, 0.0);
            let nu = (1.0 + r.norm_sqr()).ln() / TWO_PI;
            let (b12, _) = pc_beta(r, nu).unwrap();
            assert!(b12.norm() < 2.0 * amp, "amp={amp}: {}", b12.norm());
        }
    }
}
