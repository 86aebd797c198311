//! Brute-force reference integrator for oracle tests. Deliberately
//! implemented from scratch (Newton-iterated Legendre nodes, fixed composite
//! panels, no adaptivity, no acceleration) so that agreement with the
//! production quadrature is evidence, not tautology.

use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite fixed-panel integration of a complex integrand over [a, b].
pub fn integrate_panels<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    n_panels: usize,
    order: usize,
) -> Complex64 {
    let rule = gauss_legendre(order);
    let width = (b - a) / n_panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..n_panels {
        let lo = a + p as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        for &(x, w) in &rule {
            total += w * half * f(mid + half * x);
        }
    }
    total
}

#[allow(dead_code)]
pub fn assert_rule_sane() {
    // degree-2n-1 exactness spot check keeps the oracle itself honest
    let rule = gauss_legendre(8);
    let val: f64 = rule.iter().map(|&(x, w)| w * x.powi(14)).sum();
    assert!((val - 2.0 / 15.0).abs() < 1e-14, "GL8 x^14: {val}");
    let e = integrate_panels(
        |x| Complex64::new(x.exp(), 0.0),
        0.0,
        1.0,
        4,
        12,
    );
    assert!((e.re - (1f64.exp() - 1.0)).abs() < 1e-14);
}
