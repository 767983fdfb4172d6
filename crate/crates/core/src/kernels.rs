//! Compactly supported averaging kernels with vanishing moments.
//!
//! A two-sided kernel of class `(p, q)` has the form `P(x)(1 - x^2)^(q+1)` on
//! `[-1, 1]` with `P` even; a one-sided kernel is `P(x) x^(q+1) (1 - x)^(q+1)`
//! on `[0, 1]`. `P` is fixed by `∫k = 1` and `∫k x^r = 0` for `1 <= r <= p`.

use nalgebra::{DMatrix, DVector};

use crate::quadrature::gauss_legendre_on;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    p: usize,
    q: usize,
    one_sided: bool,
    /// Coefficients of `P` in powers of `x - center`, lowest degree first.
    poly: Vec<f64>,
    center: f64,
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(base: &[f64], e: usize) -> Vec<f64> {
    (0..e).fold(vec![1.0], |acc, _| poly_mul(&acc, base))
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Coefficients of `c(x + t)` as a polynomial in `t`.
fn taylor_shift(c: &[f64], x: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (i, &ci) in c.iter().enumerate() {
        let mut binom = 1.0;
        for (j, o) in out.iter_mut().enumerate().take(i + 1) {
            *o += ci * binom * x.powi((i - j) as i32);
            binom = binom * (i - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

impl Kernel {
    /// Builds the kernel of class `(p, q)`, two-sided or one-sided.
    pub fn new(p: usize, q: usize, one_sided: bool) -> Result<Self> {
        // Unknown polynomial terms and the moment orders they must satisfy.
        let powers: Vec<usize> = if one_sided { (0..=p).collect() } else { (0..=p / 2).map(|i| 2 * i).collect() };
        let n = powers.len();
        let (a, b) = if one_sided { (0.0, 1.0) } else { (-1.0, 1.0) };
        // Expanding about the support midpoint keeps the moment system well conditioned.
        let center = 0.5 * (a + b);
        let (xs, ws) = gauss_legendre_on(2 * (p + q) + 4, a, b);
        let bump = |x: f64| {
            if one_sided {
                (x * (1.0 - x)).powi(q as i32 + 1)
            } else {
                (1.0 - x * x).powi(q as i32 + 1)
            }
        };
        let mut m = DMatrix::zeros(n, n);
        for (&x, &w) in xs.iter().zip(&ws) {
            let bw = w * bump(x);
            let u = x - center;
            for (r, &pr) in powers.iter().enumerate() {
                for (c, &pc) in powers.iter().enumerate() {
                    m[(r, c)] += bw * u.powi((pr + pc) as i32);
                }
            }
        }
        // ∫k = 1 and ∫k x^r = 0 give ∫k (x - c)^r = (-c)^r.
        let rhs = DVector::from_iterator(n, powers.iter().map(|&r| (-center).powi(r as i32)));
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidParameter(format!("singular moment system for kernel p={p}, q={q}")))?;
        let mut poly = vec![0.0; powers.last().map_or(1, |&d| d + 1)];
        for (&pw, &c) in powers.iter().zip(sol.iter()) {
            poly[pw] = c;
        }
        Ok(Self { p, q, one_sided, poly, center })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn is_one_sided(&self) -> bool {
        self.one_sided
    }

    /// Coefficients of `P` in powers of `x - center()`.
    pub fn poly(&self) -> &[f64] {
        &self.poly
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// Support interval of the unscaled kernel.
    pub fn support(&self) -> (f64, f64) {
        if self.one_sided {
            (0.0, 1.0)
        } else {
            (-1.0, 1.0)
        }
    }

    /// Unscaled kernel value; zero outside the support.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a || x >= b {
            return 0.0;
        }
        let bump = if self.one_sided { x * (1.0 - x) } else { 1.0 - x * x };
        poly_eval(&self.poly, x - self.center) * bump.powi(self.q as i32 + 1)
    }

    /// `j`-th derivative of the kernel formula on the closed support; zero outside.
    ///
    /// Computed from Taylor expansions of the two factors about `x`, so the
    /// bump factor contributes exact zeros at the support ends.
    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        let (a, b) = self.support();
        if x < a || x > b {
            return 0.0;
        }
        let base = if self.one_sided { [0.0, 1.0, -1.0] } else { [1.0, 0.0, -1.0] };
        let bump = poly_pow(&taylor_shift(&base, x), self.q + 1);
        let series = poly_mul(&taylor_shift(&self.poly, x - self.center), &bump);
        let factorial: f64 = (1..=j).map(|i| i as f64).product();
        series.get(j).copied().unwrap_or(0.0) * factorial
    }

    /// `k_μ(x) = k(x/μ)/μ`.
    #[inline]
    pub fn eval_scaled(&self, mu: f64, x: f64) -> f64 {
        self.eval(x / mu) / mu
    }

    /// Product of scaled one-dimensional evaluations over the coordinates.
    pub fn tensor_eval(&self, mu: f64, point: &[f64]) -> f64 {
        point.iter().map(|&x| self.eval_scaled(mu, x)).product()
    }
}
