//! P1 finite element macro solver: mass and load assembly, stage solves and
//! explicit time stepping with nodal renormalization.

use rayon::prelude::*;

use crate::geometry::TriMesh;
use crate::homogenize::{frozen_tensor, HomTensor};
use crate::linalg::SparseSpd;
use crate::material::MaterialCoefficient;
use crate::micro::MicroConfig;
use crate::quadrature::TRI_DEG5;
use crate::upscale::{flux_field, FluxField, Kernels};
use crate::{Error, Mat32, Result, Vec3};

pub use crate::field::NodalField;

/// Relative residual for stage solves.
pub const STAGE_TOL: f64 = 1e-10;

/// Consistent P1 mass matrix `b(φ_i, φ_j)`, shared by the three components.
pub fn assemble_mass(mesh: &TriMesh) -> Result<SparseSpd> {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (tri, el) in mesh.triangles().iter().zip(mesh.elements()) {
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { 2.0 } else { 1.0 };
                triplets.push((tri[a], tri[b], w * el.area / 12.0));
            }
        }
    }
    SparseSpd::from_triplets(mesh.num_nodes(), triplets)
}

/// Load vector `L(φ_j e_c; M, F)` for all nodes.
///
/// `m` may be an unnormalized stage state. All integrals are exact: the first
/// three terms are at most quadratic, the lower-order field term is integrated
/// with a degree-5 rule.
pub fn assemble_load(mesh: &TriMesh, m: &NodalField, flux: &FluxField, h_l: &[Vec3], alpha: f64) -> Result<Vec<Vec3>> {
    let n = mesh.num_nodes();
    if m.len() != n || h_l.len() != n || flux.len() != mesh.num_triangles() {
        return Err(Error::DimensionMismatch(format!(
            "mesh has {n} nodes and {} triangles; got {} field values, {} field-term values, {} fluxes",
            mesh.num_triangles(),
            m.len(),
            h_l.len(),
            flux.len()
        )));
    }
    let mv = m.values();
    let local: Vec<[Vec3; 3]> = mesh
        .triangles()
        .par_iter()
        .zip(mesh.elements().par_iter())
        .enumerate()
        .map(|(k, (tri, el))| {
            let mk = tri.map(|v| mv[v]);
            let hk = tri.map(|v| h_l[v]);
            let f = flux.get(k);
            let grad_m = el.gradient(mk);
            let mean = (mk[0] + mk[1] + mk[2]) / 3.0;
            let msum = mk[0] + mk[1] + mk[2];
            let s = grad_m.dot(f);
            let cross = [mean.cross(&f.column(0)), mean.cross(&f.column(1))];
            let mut out = [Vec3::zeros(); 3];
            for j in 0..3 {
                let g = el.grads[j];
                let mut v = (cross[0] * g.x + cross[1] * g.y) * el.area;
                v -= (f.column(0) * g.x + f.column(1) * g.y) * (alpha * el.area);
                v += (mk[j] + msum) * (alpha * s * el.area / 12.0);
                out[j] = v;
            }
            if hk.iter().any(|h| *h != Vec3::zeros()) {
                for (l, w) in TRI_DEG5 {
                    let mq = mk[0] * l[0] + mk[1] * l[1] + mk[2] * l[2];
                    let hq = hk[0] * l[0] + hk[1] * l[1] + hk[2] * l[2];
                    let t = mq.cross(&(hq + mq.cross(&hq) * alpha)) * (w * el.area);
                    for j in 0..3 {
                        out[j] -= t * l[j];
                    }
                }
            }
            out
        })
        .collect();
    let mut load = vec![Vec3::zeros(); n];
    for (tri, vals) in mesh.triangles().iter().zip(&local) {
        for j in 0..3 {
            load[tri[j]] += vals[j];
        }
    }
    Ok(load)
}

/// Solves `b(k, w) = load` componentwise by CG.
pub fn solve_stage(mass: &SparseSpd, load: &[Vec3], tol: f64) -> Result<NodalField> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("stage tolerance must be positive, got {tol}")));
    }
    if load.len() != mass.dim() {
        return Err(Error::DimensionMismatch(format!(
            "load has {} entries, mass matrix is {}x{}",
            load.len(),
            mass.dim(),
            mass.dim()
        )));
    }
    let n = load.len();
    let mut out = vec![Vec3::zeros(); n];
    for c in 0..3 {
        let b: Vec<f64> = load.iter().map(|v| v[c]).collect();
        let mut x = vec![0.0; n];
        mass.solve_cg(&b, &mut x, tol)?;
        for (o, xi) in out.iter_mut().zip(x) {
            o[c] = xi;
        }
    }
    Ok(NodalField::new(out))
}

/// `Δt = C H_min^2` for `0 < C < 1`.
pub fn stable_dt(h_min: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("time step constant must lie in (0, 1), got {c}")));
    }
    if !(h_min > 0.0) || !h_min.is_finite() {
        return Err(Error::InvalidParameter(format!("h_min must be positive, got {h_min}")));
    }
    Ok(c * h_min * h_min)
}

/// Radius of a disk inside the classical RK4 stability region.
pub const RK4_STABILITY_RADIUS: f64 = 2.6;

/// Scalar P1 stiffness matrix `(∇φ_i, ∇φ_j)`.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<SparseSpd> {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (tri, el) in mesh.triangles().iter().zip(mesh.elements()) {
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((tri[a], tri[b], el.area * el.grads[a].dot(&el.grads[b])));
            }
        }
    }
    SparseSpd::from_triplets(mesh.num_nodes(), triplets)
}

/// Largest eigenvalue of `M⁻¹K` by power iteration.
pub fn spectral_radius(mesh: &TriMesh, mass: &SparseSpd) -> Result<f64> {
    let k = assemble_stiffness(mesh)?;
    let n = mesh.num_nodes();
    // Deterministic start with content in the highest modes.
    let mut x: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -0.7 } + 0.01 * (j % 7) as f64).collect();
    let mut kx = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        k.mul_vec(&x, &mut kx);
        let mut y = vec![0.0; n];
        mass.solve_cg(&kx, &mut y, 1e-12)?;
        let mut mx = vec![0.0; n];
        mass.mul_vec(&x, &mut mx);
        let num: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
        let next = num / den;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        x = y.into_iter().map(|v| v / norm).collect();
        if (next - lambda).abs() <= 1e-6 * next {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Explicit step for which `Δt (α + i) a λ` stays inside the RK4 region, scaled by `margin`.
pub fn spectral_dt(lambda: f64, a_max: f64, alpha: f64, margin: f64) -> Result<f64> {
    if !(lambda > 0.0 && a_max > 0.0 && margin > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spectral step needs positive lambda, a_max and margin, got {lambda}, {a_max}, {margin}"
        )));
    }
    Ok(margin * RK4_STABILITY_RADIUS / (lambda * a_max * (1.0 + alpha * alpha).sqrt()))
}

/// Supplies the piecewise constant flux for any (possibly unnormalized) nodal state.
pub trait FluxProvider: Sync {
    fn flux(&self, mesh: &TriMesh, m: &NodalField) -> Result<FluxField>;
}

/// Supplies nodal lower-order field values at time `t`.
pub trait FieldProvider: Sync {
    fn field(&self, mesh: &TriMesh, m: &NodalField, t: f64) -> Result<Vec<Vec3>>;
}

/// No lower-order terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl FieldProvider for ZeroField {
    fn field(&self, mesh: &TriMesh, _m: &NodalField, _t: f64) -> Result<Vec<Vec3>> {
        Ok(vec![Vec3::zeros(); mesh.num_nodes()])
    }
}

/// `F_K = ∇M|_K A^H_K` with one tensor for the whole domain or one per triangle.
#[derive(Debug, Clone)]
pub struct HomogenizedFlux {
    tensors: Vec<HomTensor>,
}

impl HomogenizedFlux {
    pub fn uniform(tensor: HomTensor) -> Self {
        Self { tensors: vec![tensor] }
    }

    /// `A^H = a I`, e.g. the naive averaged coefficient.
    pub fn scalar(a: f64) -> Result<Self> {
        Ok(Self::uniform(HomTensor::scalar(a)?))
    }

    /// Frozen-slow-variable tensors at every barycenter.
    pub fn frozen(mesh: &TriMesh, coeff: &MaterialCoefficient, n: usize) -> Result<Self> {
        let tensors =
            mesh.elements().par_iter().map(|el| frozen_tensor(coeff, el.barycenter, n)).collect::<Result<Vec<_>>>()?;
        Ok(Self { tensors })
    }

    pub fn tensor(&self, tri: usize) -> &HomTensor {
        if self.tensors.len() == 1 {
            &self.tensors[0]
        } else {
            &self.tensors[tri]
        }
    }
}

impl FluxProvider for HomogenizedFlux {
    fn flux(&self, mesh: &TriMesh, m: &NodalField) -> Result<FluxField> {
        if self.tensors.len() != 1 && self.tensors.len() != mesh.num_triangles() {
            return Err(Error::DimensionMismatch(format!(
                "{} tensors for {} triangles",
                self.tensors.len(),
                mesh.num_triangles()
            )));
        }
        let values =
            (0..mesh.num_triangles()).map(|k| mesh.gradient(m.values(), k) * self.tensor(k).matrix()).collect();
        FluxField::new(values)
    }
}

/// Flux from micro problems on every triangle.
#[derive(Debug, Clone)]
pub struct HmmFlux {
    pub coeff: MaterialCoefficient,
    pub cfg: MicroConfig,
    pub kernels: Kernels,
}

impl FluxProvider for HmmFlux {
    fn flux(&self, mesh: &TriMesh, m: &NodalField) -> Result<FluxField> {
        flux_field(mesh, m.values(), &self.coeff, &self.cfg, &self.kernels)
    }
}

/// Time integrator of the macro loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    Rk4,
    Euler,
}

impl std::str::FromStr for Stepper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Stepper::Rk4),
            "euler" => Ok(Stepper::Euler),
            other => Err(Error::Config(format!("unknown time stepper '{other}' (rk4, euler)"))),
        }
    }
}

/// Mesh, mass matrix and damping of one macro problem.
#[derive(Debug, Clone)]
pub struct MacroSolver<'m> {
    mesh: &'m TriMesh,
    mass: SparseSpd,
    alpha: f64,
    tol: f64,
}

impl<'m> MacroSolver<'m> {
    pub fn new(mesh: &'m TriMesh, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("damping must be non-negative, got {alpha}")));
        }
        Ok(Self { mesh, mass: assemble_mass(mesh)?, alpha, tol: STAGE_TOL })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    pub fn mass(&self) -> &SparseSpd {
        &self.mass
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Stage value `k` with `b(k, w) = L(w; m, F(m))` and the field at time `t`.
    pub fn rate(
        &self,
        m: &NodalField,
        t: f64,
        flux: &dyn FluxProvider,
        field: &dyn FieldProvider,
    ) -> Result<NodalField> {
        let f = flux.flux(self.mesh, m)?;
        let h = field.field(self.mesh, m, t)?;
        let load = assemble_load(self.mesh, m, &f, &h, self.alpha)?;
        solve_stage(&self.mass, &load, self.tol)
    }

    /// Classical four-stage Runge-Kutta step followed by renormalization.
    pub fn rk4_step(
        &self,
        m: &NodalField,
        t: f64,
        dt: f64,
        flux: &dyn FluxProvider,
        field: &dyn FieldProvider,
    ) -> Result<NodalField> {
        let k1 = self.rate(m, t, flux, field)?;
        let k2 = self.rate(&m.axpy(0.5 * dt, k1.values()), t + 0.5 * dt, flux, field)?;
        let k3 = self.rate(&m.axpy(0.5 * dt, k2.values()), t + 0.5 * dt, flux, field)?;
        let k4 = self.rate(&m.axpy(dt, k3.values()), t + dt, flux, field)?;
        let combined: Vec<Vec3> = (0..m.len()).map(|j| k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]).collect();
        m.axpy(dt / 6.0, &combined).renormalize()
    }

    /// Forward Euler step followed by renormalization.
    pub fn euler_step(
        &self,
        m: &NodalField,
        t: f64,
        dt: f64,
        flux: &dyn FluxProvider,
        field: &dyn FieldProvider,
    ) -> Result<NodalField> {
        let k = self.rate(m, t, flux, field)?;
        m.axpy(dt, k.values()).renormalize()
    }

    pub fn step(
        &self,
        stepper: Stepper,
        m: &NodalField,
        t: f64,
        dt: f64,
        flux: &dyn FluxProvider,
        field: &dyn FieldProvider,
    ) -> Result<NodalField> {
        match stepper {
            Stepper::Rk4 => self.rk4_step(m, t, dt, flux, field),
            Stepper::Euler => self.euler_step(m, t, dt, flux, field),
        }
    }
}

/// `½ Σ_K |K| ∇M_K : (∇M_K A^H_K)`.
pub fn exchange_energy(mesh: &TriMesh, m: &NodalField, flux: &HomogenizedFlux) -> f64 {
    mesh.elements()
        .iter()
        .enumerate()
        .map(|(k, el)| {
            let g: Mat32 = mesh.gradient(m.values(), k);
            0.5 * el.area * g.dot(&(g * flux.tensor(k).matrix()))
        })
        .sum()
}
