//! Quadrature rules: Gauss-Legendre on `[-1, 1]` and symmetric triangle rules.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact for polynomials of
/// degree `2n - 1`. Roots are found by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    (x.iter().map(|&xi| a + h * (xi + 1.0)).collect(), w.iter().map(|&wi| wi * h).collect())
}

/// Triangle rule as (barycentric coordinates, weight); weights sum to 1.
pub type TriangleRule = &'static [([f64; 3], f64)];

/// Degree-2 three-point rule (edge midpoints).
pub const TRI_DEG2: TriangleRule =
    &[([0.5, 0.5, 0.0], 1.0 / 3.0), ([0.0, 0.5, 0.5], 1.0 / 3.0), ([0.5, 0.0, 0.5], 1.0 / 3.0)];

const A5: f64 = 0.059_715_871_789_769_82;
const B5: f64 = 0.470_142_064_105_115_1;
const C5: f64 = 0.797_426_985_353_087_3;
const D5: f64 = 0.101_286_507_323_456_3;
const WB5: f64 = 0.132_394_152_788_506_2;
const WD5: f64 = 0.125_939_180_544_827_1;

/// Seven-point degree-5 rule (Radon). Exact for every integrand of the load
/// vector, including the cubic and quartic lower-order field terms.
pub const TRI_DEG5: TriangleRule = &[
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A5, B5, B5], WB5),
    ([B5, A5, B5], WB5),
    ([B5, B5, A5], WB5),
    ([C5, D5, D5], WD5),
    ([D5, C5, D5], WD5),
    ([D5, D5, C5], WD5),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    fn monomial_integral(i: u32, j: u32) -> f64 {
        // ∫ over reference triangle of x^i y^j = i! j! / (i + j + 2)!
        let f = |k: u32| (1..=k).map(f64::from).product::<f64>();
        f(i) * f(j) / f(i + j + 2)
    }

    #[test]
    fn triangle_rules_exact() {
        for (rule, deg) in [(TRI_DEG2, 2), (TRI_DEG5, 5)] {
            let wsum: f64 = rule.iter().map(|r| r.1).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for i in 0..=deg {
                for j in 0..=(deg - i) {
                    let q: f64 = rule.iter().map(|(l, w)| 0.5 * w * l[1].powi(i as i32) * l[2].powi(j as i32)).sum();
                    assert!((q - monomial_integral(i, j)).abs() < 1e-14, "{i} {j}");
                }
            }
        }
    }
}
