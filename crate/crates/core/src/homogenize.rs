//! Periodic cell problem and the homogenized exchange tensor `A^H`.
//!
//! On an `n x n` periodic grid with spacing `h = 1/n`, the corrector `χ_k`
//! solves `Σ a_face (χ_nb - χ) / h^2 = -(a_{+1/2} - a_{-1/2}) / h` in direction
//! `k`, with coefficients sampled at half-grid points.

use nalgebra::Matrix2;

use crate::linalg::pcg;
use crate::material::MaterialCoefficient;
use crate::{Error, Point, Result};

pub const DEFAULT_RESOLUTION: usize = 256;

/// Symmetric positive definite 2x2 effective coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomTensor {
    m: Matrix2<f64>,
}

impl HomTensor {
    pub fn new(m: Matrix2<f64>) -> Result<Self> {
        if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-8 * m.abs().max().max(1.0) {
            return Err(Error::InvalidParameter(format!("tensor is not symmetric: {m}")));
        }
        let m = 0.5 * (m + m.transpose());
        if !(m[(0, 0)] > 0.0 && m.determinant() > 0.0) {
            return Err(Error::InvalidParameter(format!("tensor is not positive definite: {m}")));
        }
        Ok(Self { m })
    }

    /// `c I`.
    pub fn scalar(c: f64) -> Result<Self> {
        Self::new(Matrix2::identity() * c)
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let tr = self.m.trace();
        let det = self.m.determinant();
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        [0.5 * tr - disc, 0.5 * tr + disc]
    }
}

/// Zero-mean correctors on the cell grid; `chi[k][j * n + i]` is `χ_k` at `(i h, j h)`.
#[derive(Debug, Clone)]
pub struct Correctors {
    pub n: usize,
    pub chi: [Vec<f64>; 2],
    /// Final residual of each equation in the grid 2-norm `(h^2 Σ r^2)^(1/2)`.
    pub residual: [f64; 2],
    /// Coefficient on x-faces `(i + 1/2, j)` and y-faces `(i, j + 1/2)`.
    pub a_x: Vec<f64>,
    pub a_y: Vec<f64>,
}

struct CellOperator {
    n: usize,
    a_x: Vec<f64>,
    a_y: Vec<f64>,
    diag: Vec<f64>,
}

impl CellOperator {
    fn new(n: usize, a: &(impl Fn(Point) -> f64 + Sync)) -> Self {
        let h = 1.0 / n as f64;
        let mut a_x = vec![0.0; n * n];
        let mut a_y = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                a_x[j * n + i] = a(Point::new((i as f64 + 0.5) * h, j as f64 * h));
                a_y[j * n + i] = a(Point::new(i as f64 * h, (j as f64 + 0.5) * h));
            }
        }
        let mut diag = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let im = (i + n - 1) % n;
                let jm = (j + n - 1) % n;
                diag[j * n + i] = a_x[j * n + i] + a_x[j * n + im] + a_y[j * n + i] + a_y[jm * n + i];
            }
        }
        Self { n, a_x, a_y, diag }
    }

    /// `(L χ)_ij = Σ_faces a (χ_ij - χ_nb)`, i.e. `-h^2 ∇·(a∇χ)`.
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            for i in 0..n {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                let c = x[j * n + i];
                out[j * n + i] = self.a_x[j * n + i] * (c - x[j * n + ip])
                    + self.a_x[j * n + im] * (c - x[j * n + im])
                    + self.a_y[j * n + i] * (c - x[jp * n + i])
                    + self.a_y[jm * n + i] * (c - x[jm * n + i]);
            }
        }
    }

    /// Right-hand side `h (a_{+1/2} - a_{-1/2})` in direction `k`, scaled like `apply`.
    fn rhs(&self, k: usize) -> Vec<f64> {
        let n = self.n;
        let h = 1.0 / n as f64;
        let mut b = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                b[j * n + i] = if k == 0 {
                    self.a_x[j * n + i] - self.a_x[j * n + (i + n - 1) % n]
                } else {
                    self.a_y[j * n + i] - self.a_y[((j + n - 1) % n) * n + i]
                } * h;
            }
        }
        b
    }
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn solve_direction(op: &CellOperator, k: usize) -> Result<(Vec<f64>, f64)> {
    let n = op.n;
    let mut b = op.rhs(k);
    subtract_mean(&mut b);
    let mut x = vec![0.0; n * n];
    pcg(
        |v, out| op.apply(v, out),
        |r, z| {
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(&op.diag) {
                *zi = ri / di;
            }
            subtract_mean(z);
        },
        &b,
        &mut x,
        1e-13,
        20 * n * n,
    )?;
    subtract_mean(&mut x);
    let mut r = vec![0.0; n * n];
    op.apply(&x, &mut r);
    let h = 1.0 / n as f64;
    // Residual of the unscaled equation is (L χ - b) / h^2.
    let res_sq: f64 = r.iter().zip(&b).map(|(ri, bi)| (ri - bi).powi(2)).sum();
    Ok((x, res_sq.sqrt() / h))
}

/// Solves both periodic cell problems for the cell function `a` on an `n x n` grid.
pub fn solve_cell_problem(a: impl Fn(Point) -> f64 + Sync, n: usize) -> Result<Correctors> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("cell grid resolution must be at least 4, got {n}")));
    }
    let op = CellOperator::new(n, &a);
    if let Some(v) = op.a_x.iter().chain(&op.a_y).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("cell coefficient is not positive: {v}")));
    }
    let (r0, r1) = rayon::join(|| solve_direction(&op, 0), || solve_direction(&op, 1));
    let (c0, res0) = r0?;
    let (c1, res1) = r1?;
    Ok(Correctors { n, chi: [c0, c1], residual: [res0, res1], a_x: op.a_x, a_y: op.a_y })
}

/// `A^H` from the correctors: row 1 averages `a (δ_1k + D_x χ_k)` over x-faces,
/// row 2 averages `a (δ_2k + D_y χ_k)` over y-faces.
pub fn tensor_from_correctors(c: &Correctors) -> Result<HomTensor> {
    let n = c.n;
    let h = 1.0 / n as f64;
    let mut m = Matrix2::zeros();
    for k in 0..2 {
        let chi = &c.chi[k];
        let (mut sx, mut sy) = (0.0, 0.0);
        for j in 0..n {
            let jp = (j + 1) % n;
            for i in 0..n {
                let ip = (i + 1) % n;
                let dx = (chi[j * n + ip] - chi[j * n + i]) / h;
                let dy = (chi[jp * n + i] - chi[j * n + i]) / h;
                sx += c.a_x[j * n + i] * (if k == 0 { 1.0 } else { 0.0 } + dx);
                sy += c.a_y[j * n + i] * (if k == 1 { 1.0 } else { 0.0 } + dy);
            }
        }
        m[(0, k)] = sx / (n * n) as f64;
        m[(1, k)] = sy / (n * n) as f64;
    }
    HomTensor::new(m)
}

/// Homogenized tensor of a periodic cell function.
pub fn homogenized_tensor(a: impl Fn(Point) -> f64 + Sync, n: usize) -> Result<HomTensor> {
    tensor_from_correctors(&solve_cell_problem(a, n)?)
}

/// Homogenized tensor of the cell function `y -> a(x, y)` with the slow variable frozen at `x`.
pub fn frozen_tensor(coeff: &MaterialCoefficient, x: Point, n: usize) -> Result<HomTensor> {
    homogenized_tensor(|y| coeff.cell(x, y), n)
}

/// Grid mean of `χ_k`; zero by construction.
pub fn corrector_mean(c: &Correctors, k: usize) -> f64 {
    c.chi[k].iter().sum::<f64>() / c.chi[k].len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::CoefficientKind;
    use std::f64::consts::TAU;

    #[test]
    fn constant_coefficient_gives_zero_corrector() {
        let c = solve_cell_problem(|_| 2.5, 16).unwrap();
        assert!(c.chi.iter().flatten().all(|v| *v == 0.0));
        let t = tensor_from_correctors(&c).unwrap();
        assert!((t.matrix() - Matrix2::identity() * 2.5).norm() < 1e-14);
    }

    #[test]
    fn laminate_corrector_depends_on_y1_only() {
        let n = 64;
        let c = solve_cell_problem(|y| 2.0 + (TAU * y.x).sin(), n).unwrap();
        assert!(c.chi[1].iter().all(|v| v.abs() < 1e-12));
        for j in 1..n {
            for i in 0..n {
                assert!((c.chi[0][j * n + i] - c.chi[0][i]).abs() < 1e-9);
            }
        }
        // Discrete 1D flux a (1 + χ') is constant and equals the harmonic mean of the face values.
        let h = 1.0 / n as f64;
        let hm = n as f64 / c.a_x[..n].iter().map(|a| 1.0 / a).sum::<f64>();
        for i in 0..n {
            let d = (c.chi[0][(i + 1) % n] - c.chi[0][i]) / h;
            assert!((c.a_x[i] * (1.0 + d) - hm).abs() < 1e-9);
        }
        assert!(corrector_mean(&c, 0).abs() < 1e-14);
        assert!(c.residual[0] <= 1e-10, "{}", c.residual[0]);
    }

    #[test]
    fn periodic_product_coefficient() {
        let coeff = MaterialCoefficient::new(CoefficientKind::PeriodicProduct, 0.01).unwrap();
        let t = frozen_tensor(&coeff, Point::zeros(), 128).unwrap();
        let m = t.matrix();
        assert!((m[(0, 0)] - 1.057).abs() < 5e-3, "{m}");
        assert!((m[(0, 1)] - 0.118).abs() < 5e-3, "{m}");
        assert!((m[(1, 1)] - 1.057).abs() < 5e-3, "{m}");
    }

    #[test]
    fn voigt_reuss_bounds() {
        let coeff = MaterialCoefficient::new(CoefficientKind::PeriodicExp, 0.01).unwrap();
        let n = 64;
        let c = solve_cell_problem(|y| coeff.cell(Point::zeros(), y), n).unwrap();
        let t = tensor_from_correctors(&c).unwrap();
        let arith = c.a_x.iter().sum::<f64>() / (n * n) as f64;
        let harm = (n * n) as f64 / c.a_x.iter().map(|a| 1.0 / a).sum::<f64>();
        let [lo, hi] = t.eigenvalues();
        assert!(lo >= harm - 1e-3 && hi <= arith + 1e-3, "{lo} {hi} {harm} {arith}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_cell_problem(|_| 1.0, 3).is_err());
        assert!(solve_cell_problem(|y| y.x - 0.5, 16).is_err());
        assert!(HomTensor::new(Matrix2::new(1.0, 0.5, 0.0, 1.0)).is_err());
        assert!(HomTensor::new(Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
    }
}
