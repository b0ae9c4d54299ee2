//! Gauss–Legendre quadrature and straight-segment path integration.
//!
//! Every period, normalization and Cauchy integral in the crate reduces to
//! integrals of smooth functions after one of two substitutions:
//!
//! * `z = m + h sin t` on a cut, which absorbs the inverse-square-root
//!   endpoint singularities of `1/w`,
//! * `z = a + (b - a) s^2` on a segment leaving a branch point, which does
//!   the same for a single singular endpoint.
//!
//! Gauss–Legendre on the transformed integrand then converges spectrally.

use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn rule_cache() -> &'static Mutex<HashMap<usize, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// n-point Gauss–Legendre rule, cached.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    assert!(n >= 2, "rule order must be at least 2");
    if let Some(r) = rule_cache().lock().unwrap().get(&n) {
        return r.clone();
    }
    let rule = Arc::new(compute_rule(n));
    rule_cache().lock().unwrap().insert(n, rule.clone());
    rule
}

fn compute_rule(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Integrate f over the straight segment from a to b.
pub fn segment<F: Fn(Complex64) -> Complex64>(f: F, a: Complex64, b: Complex64, n: usize) -> Complex64 {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        acc += *w * f(mid + half * *x);
    }
    acc * half
}

/// Integrate f over [a, b] where f has an inverse-square-root singularity at a.
///
/// Substitutes z = a + (b - a) s^2; the caller's integrand is evaluated at
/// interior points only.
pub fn segment_sqrt_start<F: Fn(Complex64) -> Complex64>(
    f: F,
    a: Complex64,
    b: Complex64,
    n: usize,
) -> Complex64 {
    let rule = gauss_legendre(n);
    let d = b - a;
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let s = 0.5 * (x + 1.0); // s in (0, 1)
        let z = a + d * (s * s);
        acc += *w * f(z) * (2.0 * s) * d;
    }
    acc * 0.5
}

/// Integrate f over [a, b] with inverse-square-root singularities at both ends.
///
/// Substitutes z = m + h sin t with m the midpoint and h the half-span.
pub fn segment_sqrt_both<F: Fn(Complex64) -> Complex64>(
    f: F,
    a: Complex64,
    b: Complex64,
    n: usize,
) -> Complex64 {
    let rule = gauss_legendre(n);
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let t = half_pi * x;
        let z = m + h * t.sin();
        acc += *w * f(z) * h * t.cos();
    }
    acc * half_pi
}

/// Integrate f over [a, b] split into chunks no longer than max_len, so the
/// quadrature keeps a healthy analyticity-ellipse ratio on long legs that
/// run parallel to singularities.
pub fn segment_chunked<F: Fn(Complex64) -> Complex64>(
    f: F,
    a: Complex64,
    b: Complex64,
    n: usize,
    max_len: f64,
) -> Complex64 {
    let len = (b - a).norm();
    let chunks = (len / max_len).ceil().max(1.0) as usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..chunks {
        let t0 = k as f64 / chunks as f64;
        let t1 = (k + 1) as f64 / chunks as f64;
        acc += segment(&f, a + (b - a) * t0, a + (b - a) * t1, n);
    }
    acc
}

/// Integrate f over the ray from a to complex infinity along direction of
/// `far`, assuming f decays at least like 1/z^2.
///
/// The ray is split at `far`; the head is chunked, the tail uses the
/// substitution z = far / s.
pub fn ray_to_infinity<F: Fn(Complex64) -> Complex64>(
    f: F,
    a: Complex64,
    far: Complex64,
    n: usize,
) -> Complex64 {
    let head = segment_chunked(&f, a, far, n, (far - a).norm() / 4.0);
    // tail: z = far / s, s in (0, 1], dz = -far / s^2 ds; orientation flips.
    let rule = gauss_legendre(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let s = 0.5 * (x + 1.0);
        if s == 0.0 {
            continue;
        }
        let z = far / s;
        acc += *w * f(z) * far / (s * s);
    }
    head + acc * 0.5
}

/// Integrate with order doubling until the change drops below tol (relative
/// to the magnitude of the result), returning the value and error estimate.
pub fn refine<F: Fn(usize) -> Complex64>(eval: F, start_order: usize, tol: f64) -> (Complex64, f64) {
    let mut n = start_order.max(8);
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        let err = (cur - prev).norm();
        if err <= tol * (1.0 + cur.norm()) || n >= 4096 {
            return (cur, err);
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        // 8-point rule is exact through degree 15
        let f = |z: Complex64| z.powu(14) + 3.0 * z.powu(5);
        let got = segment(f, c64(-1.0, 0.0), c64(1.0, 0.0), 8);
        // int_-1^1 z^14 = 2/15
        assert!((got - c64(2.0 / 15.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn doubling_is_stable_on_smooth_integrand() {
        let f = |z: Complex64| (z * z).exp();
        let a = c64(0.0, 0.0);
        let b = c64(1.0, 0.5);
        let i1 = segment(f, a, b, 24);
        let i2 = segment(f, a, b, 48);
        assert!((i1 - i2).norm() < 1e-10);
    }

    #[test]
    fn sqrt_substitution_handles_endpoint_singularity() {
        // int_0^1 dz / sqrt(z) = 2
        let f = |z: Complex64| 1.0 / z.sqrt();
        let got = segment_sqrt_start(f, c64(0.0, 0.0), c64(1.0, 0.0), 32);
        assert!((got - c64(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn both_end_substitution() {
        // int_-1^1 dz / sqrt(1 - z^2) = pi
        let f = |z: Complex64| 1.0 / (1.0 - z * z).sqrt();
        let got = segment_sqrt_both(f, c64(-1.0, 0.0), c64(1.0, 0.0), 32);
        assert!((got - c64(std::f64::consts::PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn tail_substitution() {
        // int_1^inf dz / z^2 = 1
        let f = |z: Complex64| 1.0 / (z * z);
        let got = ray_to_infinity(f, c64(1.0, 0.0), c64(10.0, 0.0), 48);
        assert!((got - c64(1.0, 0.0)).norm() < 1e-12);
    }
}
