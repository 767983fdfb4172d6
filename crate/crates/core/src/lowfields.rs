//! Lower-order field terms: scheduled external field and thin-film
//! demagnetization by FFT convolution with the Newell tensor.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{Locator, TriMesh};
use crate::macro_fem::{FieldProvider, NodalField};
use crate::{Error, Point, Result, Vec3};

/// Piecewise constant external field switched on at increasing times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalFieldSchedule {
    segments: Vec<(f64, Vec3)>,
}

impl ExternalFieldSchedule {
    pub fn new(segments: Vec<(f64, Vec3)>) -> Result<Self> {
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter("activation times must be strictly increasing".into()));
        }
        if segments.iter().any(|(t, v)| !t.is_finite() || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidParameter("schedule entries must be finite".into()));
        }
        Ok(Self { segments })
    }

    /// Field of the last segment activated at or before `t`; zero before the first.
    pub fn at(&self, t: f64) -> Vec3 {
        self.segments.iter().rev().find(|(start, _)| *start <= t).map_or(Vec3::zeros(), |(_, v)| *v)
    }

    pub fn segments(&self) -> &[(f64, Vec3)] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

fn ratio_asinh(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        (a / b).asinh()
    }
}

fn ratio_atan(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        (a / b).atan()
    }
}

/// Newell's `f`, generating the diagonal entries.
fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    0.5 * y * (z2 - x2) * ratio_asinh(y, (x2 + z2).sqrt()) + 0.5 * z * (y2 - x2) * ratio_asinh(z, (x2 + y2).sqrt())
        - x * y * z * ratio_atan(y * z, x * r)
        + (2.0 * x2 - y2 - z2) * r / 6.0
}

/// Newell's `g`, generating the off-diagonal entries.
fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let z = z.abs();
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    x * y * z * ratio_asinh(z, (x2 + y2).sqrt())
        + y / 6.0 * (3.0 * z2 - y2) * ratio_asinh(x, (y2 + z2).sqrt())
        + x / 6.0 * (3.0 * z2 - x2) * ratio_asinh(y, (x2 + z2).sqrt())
        - z2 * z / 6.0 * ratio_atan(x * y, z * r)
        - 0.5 * z * y2 * ratio_atan(x * z, y * r)
        - 0.5 * z * x2 * ratio_atan(y * z, x * r)
        - x * y * r / 3.0
}

/// Tensor components in the order xx, yy, zz, xy, xz, yz.
pub const COMPONENTS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

type NewellFn = fn(f64, f64, f64) -> f64;

/// Cell-averaged demagnetization factor `comp` between two cuboid cells of
/// size `h` whose offset is `lag` cells. Positive convention: the self
/// term has trace 1 and `H = -N M`.
pub fn newell_entry(lag: [i64; 3], h: [f64; 3], comp: usize) -> f64 {
    // Axis permutation feeding f or g so that one pair of formulas gives all six entries.
    let (func, perm): (NewellFn, [usize; 3]) = match comp {
        0 => (newell_f, [0, 1, 2]),
        1 => (newell_f, [1, 2, 0]),
        2 => (newell_f, [2, 0, 1]),
        3 => (newell_g, [0, 1, 2]),
        4 => (newell_g, [0, 2, 1]),
        5 => (newell_g, [1, 2, 0]),
        _ => panic!("tensor component {comp} out of range"),
    };
    let weight = |e: i64| if e == 0 { 2.0 } else { -1.0 };
    let mut sum = 0.0;
    for ex in -1..=1i64 {
        for ey in -1..=1i64 {
            for ez in -1..=1i64 {
                let e = [ex, ey, ez];
                let p = [
                    (lag[perm[0]] + e[perm[0]]) as f64 * h[perm[0]],
                    (lag[perm[1]] + e[perm[1]]) as f64 * h[perm[1]],
                    (lag[perm[2]] + e[perm[2]]) as f64 * h[perm[2]],
                ];
                sum += weight(ex) * weight(ey) * weight(ez) * func(p[0], p[1], p[2]);
            }
        }
    }
    sum / (4.0 * std::f64::consts::PI * h[0] * h[1] * h[2])
}

/// Regular single-layer grid with the Fourier-transformed Newell tensor.
#[derive(Clone)]
pub struct DemagSetup {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    dz: f64,
    origin: Point,
    /// Transformed tensor on the padded `2nx x 2ny` grid, row-major in y.
    kernel_hat: [Vec<Complex64>; 6],
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DemagSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DemagSetup")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("dx", &self.dx)
            .field("dy", &self.dy)
            .field("dz", &self.dz)
            .field("origin", &self.origin)
            .finish_non_exhaustive()
    }
}

/// Wrapped lag of padded index `i` on a grid of `n` cells.
fn lag_of(i: usize, n: usize) -> i64 {
    let i = i as i64;
    let n = n as i64;
    if i < n {
        i
    } else {
        i - 2 * n
    }
}

impl DemagSetup {
    /// Grid of `nx x ny` cells of size `dx x dy x dz` whose lower-left corner is `origin`.
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, dz: f64, origin: Point) -> Result<Self> {
        if nx == 0 || ny == 0 || !(dx > 0.0 && dy > 0.0 && dz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "demag grid needs positive dimensions, got {nx}x{ny} cells of {dx}x{dy}x{dz}"
            )));
        }
        if nx * ny > 1 << 22 {
            return Err(Error::InvalidParameter(format!("demag grid {nx}x{ny} is too large")));
        }
        let (px, py) = (2 * nx, 2 * ny);
        let mut planner = FftPlanner::new();
        let mut setup = Self {
            nx,
            ny,
            dx,
            dy,
            dz,
            origin,
            kernel_hat: Default::default(),
            fft_x: planner.plan_fft_forward(px),
            ifft_x: planner.plan_fft_inverse(px),
            fft_y: planner.plan_fft_forward(py),
            ifft_y: planner.plan_fft_inverse(py),
        };
        let h = [dx, dy, dz];
        for (c, slot) in setup.kernel_hat.iter_mut().enumerate() {
            let mut data = vec![Complex64::new(0.0, 0.0); px * py];
            for j in 0..py {
                for i in 0..px {
                    // Lag n is never reached by cells of an n-wide grid; leave it zero.
                    if i == nx || j == ny {
                        continue;
                    }
                    data[j * px + i].re = newell_entry([lag_of(i, nx), lag_of(j, ny), 0], h, c);
                }
            }
            *slot = data;
        }
        for c in 0..6 {
            let mut data = std::mem::take(&mut setup.kernel_hat[c]);
            setup.transform(&mut data, false);
            setup.kernel_hat[c] = data;
        }
        Ok(setup)
    }

    /// Grid covering the bounding box of `mesh` with cells of roughly `cell` size.
    pub fn covering(mesh: &TriMesh, cell: f64, dz: f64) -> Result<Self> {
        let (lo, hi) = mesh.bounding_box();
        let ext = hi - lo;
        if !(cell > 0.0) {
            return Err(Error::InvalidParameter(format!("demag cell size must be positive, got {cell}")));
        }
        let nx = ((ext.x / cell).round() as usize).max(1);
        let ny = ((ext.y / cell).round() as usize).max(1);
        Self::new(nx, ny, ext.x / nx as f64, ext.y / ny as f64, dz, lo)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cell_size(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        self.origin + Point::new((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// Real-space tensor component `c` at lag `(i, j)`.
    pub fn tensor(&self, lag: (i64, i64), c: usize) -> f64 {
        newell_entry([lag.0, lag.1, 0], [self.dx, self.dy, self.dz], c)
    }

    /// In-place 2D FFT of a padded array.
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (px, py) = (2 * self.nx, 2 * self.ny);
        let (fx, fy) = if inverse { (&self.ifft_x, &self.ifft_y) } else { (&self.fft_x, &self.fft_y) };
        for row in data.chunks_exact_mut(px) {
            fx.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); py];
        for i in 0..px {
            for j in 0..py {
                col[j] = data[j * px + i];
            }
            fy.process(&mut col);
            for j in 0..py {
                data[j * px + i] = col[j];
            }
        }
    }

    /// `H_i = -Σ_j N(r_i - r_j) M_j` over all cells, by zero-padded FFT.
    pub fn demag_field(&self, m: &[Vec3]) -> Result<Vec<Vec3>> {
        let (nx, ny) = (self.nx, self.ny);
        if m.len() != nx * ny {
            return Err(Error::DimensionMismatch(format!(
                "magnetization has {} cells, demag grid has {nx}x{ny}",
                m.len()
            )));
        }
        let (px, py) = (2 * nx, 2 * ny);
        let mut m_hat: Vec<Vec<Complex64>> = (0..3)
            .map(|c| {
                let mut data = vec![Complex64::new(0.0, 0.0); px * py];
                for j in 0..ny {
                    for i in 0..nx {
                        data[j * px + i].re = m[j * nx + i][c];
                    }
                }
                data
            })
            .collect();
        for data in &mut m_hat {
            self.transform(data, false);
        }
        let mut out = vec![Vec3::zeros(); nx * ny];
        let scale = 1.0 / (px * py) as f64;
        #[allow(clippy::needless_range_loop)]
        for a in 0..3 {
            let mut h = vec![Complex64::new(0.0, 0.0); px * py];
            for (c, &(r, s)) in COMPONENTS.iter().enumerate() {
                let other = if r == a {
                    s
                } else if s == a {
                    r
                } else {
                    continue;
                };
                let k = &self.kernel_hat[c];
                for ((hv, kv), mv) in h.iter_mut().zip(k).zip(&m_hat[other]) {
                    *hv += kv * mv;
                }
            }
            self.transform(&mut h, true);
            for j in 0..ny {
                for i in 0..nx {
                    out[j * nx + i][a] = -h[j * px + i].re * scale;
                }
            }
        }
        Ok(out)
    }

    fn check_fits(&self, mesh: &TriMesh) -> Result<()> {
        let (lo, hi) = mesh.bounding_box();
        let glo = self.origin;
        let ghi = self.origin + Point::new(self.nx as f64 * self.dx, self.ny as f64 * self.dy);
        let tol = 1e-9 * (ghi - glo).norm();
        if lo.x < glo.x - tol || lo.y < glo.y - tol || hi.x > ghi.x + tol || hi.y > ghi.y + tol {
            return Err(Error::InvalidParameter(format!(
                "mesh extent [{}, {}] x [{}, {}] exceeds demag grid [{}, {}] x [{}, {}]",
                lo.x, hi.x, lo.y, hi.y, glo.x, ghi.x, glo.y, ghi.y
            )));
        }
        Ok(())
    }

    /// Samples the P1 field at cell centers; cells whose center lies outside the mesh are zero.
    pub fn fem_to_grid(&self, mesh: &TriMesh, m: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check_fits(mesh)?;
        let locator = Locator::new(mesh);
        let mut out = vec![Vec3::zeros(); self.nx * self.ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = self.cell_center(i, j);
                if let Some(t) = locator.locate(p) {
                    out[j * self.nx + i] = mesh.eval_affine(m, t, p);
                }
            }
        }
        Ok(out)
    }

    /// Bilinear interpolation of cell-center data at the mesh nodes; nodes in
    /// the outer half-cell fringe use the nearest cell row or column.
    pub fn grid_to_nodes(&self, h: &[Vec3], mesh: &TriMesh) -> Result<Vec<Vec3>> {
        if h.len() != self.nx * self.ny {
            return Err(Error::DimensionMismatch(format!(
                "grid field has {} cells, expected {}",
                h.len(),
                self.nx * self.ny
            )));
        }
        self.check_fits(mesh)?;
        let axis = |x: f64, d: f64, n: usize| -> (usize, usize, f64) {
            let s = (x / d - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (s.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, s - i0 as f64)
        };
        Ok(mesh
            .nodes()
            .iter()
            .map(|p| {
                let q = p - self.origin;
                let (i0, i1, tx) = axis(q.x, self.dx, self.nx);
                let (j0, j1, ty) = axis(q.y, self.dy, self.ny);
                let at = |i: usize, j: usize| h[j * self.nx + i];
                at(i0, j0) * ((1.0 - tx) * (1.0 - ty))
                    + at(i1, j0) * (tx * (1.0 - ty))
                    + at(i0, j1) * ((1.0 - tx) * ty)
                    + at(i1, j1) * (tx * ty)
            })
            .collect())
    }
}

/// `H_L = H_ext(t) + scale * H_dem(M)` at the mesh nodes.
#[derive(Debug, Clone, Default)]
pub struct LowerField {
    pub schedule: ExternalFieldSchedule,
    /// Demagnetization grid and the factor converting it to the solver's field units.
    pub demag: Option<(DemagSetup, f64)>,
}

impl LowerField {
    pub fn evaluate(&self, mesh: &TriMesh, m: &[Vec3], t: f64) -> Result<Vec<Vec3>> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
        }
        let ext = self.schedule.at(t);
        let mut out = vec![ext; mesh.num_nodes()];
        if let Some((setup, scale)) = &self.demag {
            let grid = setup.fem_to_grid(mesh, m)?;
            let h = setup.demag_field(&grid)?;
            for (o, v) in out.iter_mut().zip(setup.grid_to_nodes(&h, mesh)?) {
                *o += v * *scale;
            }
        }
        Ok(out)
    }
}

impl FieldProvider for LowerField {
    fn field(&self, mesh: &TriMesh, m: &NodalField, t: f64) -> Result<Vec<Vec3>> {
        self.evaluate(mesh, m.values(), t)
    }
}

/// Functional form of [`LowerField::evaluate`].
pub fn lower_field(
    schedule: &ExternalFieldSchedule,
    demag: Option<(&DemagSetup, f64)>,
    mesh: &TriMesh,
    m: &[Vec3],
    t: f64,
) -> Result<Vec<Vec3>> {
    LowerField { schedule: schedule.clone(), demag: demag.map(|(s, k)| (s.clone(), k)) }.evaluate(mesh, m, t)
}
