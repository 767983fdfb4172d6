//! Direct finite-difference simulation resolving the ε scale.
//!
//! Only structured rectangles at moderate ε are supported: the grid spacing is
//! `ε / P` and the explicit step is `O(h²)`, so cost grows like `ε⁻⁴`.

use log::info;
use rayon::prelude::*;

use super::{output, zero_crossing, MeshSpec, RunSummary, SimConfig};
use crate::geometry::rectangle;
use crate::macro_fem::NodalField;
use crate::material::MaterialCoefficient;
use crate::{Error, Point, Result, Vec3};

/// Smallest ε accepted by [`run_fine`].
pub const MIN_FINE_EPSILON: f64 = 0.025;

/// RK4 step relative to `h² / (a_max √(1+α²))`.
pub const FINE_DT_FACTOR: f64 = 0.25;

/// Node-centered grid on `[0, lx] × [0, ly]` with face-sampled coefficients.
#[derive(Debug, Clone)]
pub struct FineGrid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    /// `a` at x-faces, `ny+1` rows of `nx` values.
    a_x: Vec<f64>,
    /// `a` at y-faces, `ny` rows of `nx+1` values.
    a_y: Vec<f64>,
    alpha: f64,
}

impl FineGrid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize, coeff: &MaterialCoefficient, alpha: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidParameter(format!("bad fine grid {nx}x{ny} on {lx}x{ly}")));
        }
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        let mut a_x = Vec::with_capacity((ny + 1) * nx);
        for j in 0..=ny {
            for i in 0..nx {
                a_x.push(coeff.eval(Point::new((i as f64 + 0.5) * hx, j as f64 * hy)));
            }
        }
        let mut a_y = Vec::with_capacity(ny * (nx + 1));
        for j in 0..ny {
            for i in 0..=nx {
                a_y.push(coeff.eval(Point::new(i as f64 * hx, (j as f64 + 0.5) * hy)));
            }
        }
        Ok(Self { nx, ny, hx, hy, a_x, a_y, alpha })
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Stable step for the given coefficient bound.
    pub fn stable_dt(&self, a_max: f64) -> f64 {
        let h = self.hx.min(self.hy);
        FINE_DT_FACTOR * h * h / (a_max * (1.0 + self.alpha * self.alpha).sqrt())
    }

    /// `∇·(a∇m)` with zero normal flux; boundary nodes use half control volumes.
    pub fn exchange(&self, m: &[Vec3]) -> Vec<Vec3> {
        let (nx, ny) = (self.nx, self.ny);
        let w = nx + 1;
        let (ihx2, ihy2) = (1.0 / (self.hx * self.hx), 1.0 / (self.hy * self.hy));
        let mut out = vec![Vec3::zeros(); m.len()];
        out.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
            for (i, h) in row.iter_mut().enumerate() {
                let c = m[j * w + i];
                let mut fx = Vec3::zeros();
                if i < nx {
                    fx += (m[j * w + i + 1] - c) * self.a_x[j * nx + i];
                }
                if i > 0 {
                    fx -= (c - m[j * w + i - 1]) * self.a_x[j * nx + i - 1];
                }
                if i == 0 || i == nx {
                    fx *= 2.0;
                }
                let mut fy = Vec3::zeros();
                if j < ny {
                    fy += (m[(j + 1) * w + i] - c) * self.a_y[j * w + i];
                }
                if j > 0 {
                    fy -= (c - m[(j - 1) * w + i]) * self.a_y[(j - 1) * w + i];
                }
                if j == 0 || j == ny {
                    fy *= 2.0;
                }
                *h = fx * ihx2 + fy * ihy2;
            }
        });
        out
    }

    /// `−m×H − α m×(m×H)` with `H` the exchange field plus `h_ext`.
    pub fn rate(&self, m: &[Vec3], h_ext: Vec3) -> Vec<Vec3> {
        let mut h = self.exchange(m);
        h.par_iter_mut().zip(m.par_iter()).for_each(|(h, m)| {
            let hh = *h + h_ext;
            let mxh = m.cross(&hh);
            *h = -mxh - m.cross(&mxh) * self.alpha;
        });
        h
    }

    /// RK4 step with nodal renormalization.
    pub fn rk4_step(&self, m: &[Vec3], h_ext: [Vec3; 3], dt: f64) -> Result<Vec<Vec3>> {
        let axpy = |a: &[Vec3], s: f64, b: &[Vec3]| -> Vec<Vec3> { a.iter().zip(b).map(|(a, b)| a + b * s).collect() };
        let k1 = self.rate(m, h_ext[0]);
        let k2 = self.rate(&axpy(m, 0.5 * dt, &k1), h_ext[1]);
        let k3 = self.rate(&axpy(m, 0.5 * dt, &k2), h_ext[1]);
        let k4 = self.rate(&axpy(m, dt, &k3), h_ext[2]);
        let next: Vec<Vec3> =
            (0..m.len()).map(|j| m[j] + (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (dt / 6.0)).collect();
        Ok(NodalField::new(next).renormalize()?.into_values())
    }
}

/// Fine-reference run of `cfg` on its rectangle with `fine.points_per_eps` points per ε.
pub fn run_fine(cfg: &SimConfig) -> Result<RunSummary> {
    let MeshSpec::Rectangle { lx, ly, .. } = cfg.mesh else {
        return Err(Error::Unsupported("fine_reference runs only on rectangle meshes".into()));
    };
    if cfg.epsilon < MIN_FINE_EPSILON {
        return Err(Error::Unsupported(format!(
            "fine_reference needs epsilon >= {MIN_FINE_EPSILON}: resolving epsilon = {} costs O(epsilon^-4) work",
            cfg.epsilon
        )));
    }
    if cfg.demag.is_some() {
        return Err(Error::Unsupported("fine_reference does not include the demagnetizing field".into()));
    }
    let p = cfg.fine_points_per_eps;
    if p < 2 {
        return Err(Error::InvalidParameter(format!("fine.points_per_eps must be at least 2, got {p}")));
    }
    let nx = (lx * p as f64 / cfg.epsilon).round().max(1.0) as usize;
    let ny = (ly * p as f64 / cfg.epsilon).round().max(1.0) as usize;
    let coeff = cfg.coefficient()?;
    let grid = FineGrid::new(lx, ly, nx, ny, &coeff, cfg.alpha)?;
    let mesh = rectangle(lx, ly, nx, ny)?;
    let mut m = NodalField::interpolate(&mesh, |x| cfg.init.eval(x)).renormalize()?.into_values();
    let mut dt = grid.stable_dt(coeff.a_max());
    if let Some(v) = cfg.dt {
        dt = dt.min(v);
    }
    let steps = if cfg.t_final > 0.0 { (cfg.t_final / dt).ceil() as usize } else { 0 };
    if steps > 0 {
        dt = cfg.t_final / steps as f64;
    }
    info!("fine reference: {nx}x{ny} cells, {steps} steps of {dt:.3e}");
    let mean = |m: &[Vec3]| {
        let f = NodalField::new(m.to_vec());
        Vec3::new(
            super::mean_component(&mesh, &f, 0),
            super::mean_component(&mesh, &f, 1),
            super::mean_component(&mesh, &f, 2),
        )
    };
    let mut times = vec![0.0];
    let mut means = vec![mean(&m)];
    let mut crossing = None;
    let mut taken = 0;
    for k in 0..steps {
        let t = k as f64 * dt;
        let h = [cfg.schedule.at(t), cfg.schedule.at(t + 0.5 * dt), cfg.schedule.at(t + dt)];
        m = grid.rk4_step(&m, h, dt).map_err(|e| Error::Step { step: k + 1, source: Box::new(e) })?;
        taken = k + 1;
        times.push(t + dt);
        means.push(mean(&m));
        if cfg.stop_at_zero_crossing {
            let n = means.len();
            crossing = zero_crossing(&times[n - 2..], &[means[n - 2].x, means[n - 1].x]);
            if let Some(t) = crossing {
                info!("<M_x> crossed zero at t = {t:.5}");
                break;
            }
        }
    }
    let field = NodalField::new(m);
    let mut files = Vec::new();
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        files.push(output::write_means(dir, &times, &means)?);
        files.push(output::write_snapshot(dir, usize::MAX, &mesh, &field)?);
        files.push(output::write_manifest(dir, cfg)?);
    }
    Ok(RunSummary {
        mesh,
        field,
        times,
        means,
        zero_crossing: crossing,
        dt,
        steps: taken,
        relax_converged: None,
        files,
    })
}
