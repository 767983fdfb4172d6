//! Kernel-weighted space-time averaging of `a^ε ∇m^ε` over micro solutions.

use rayon::prelude::*;

use crate::geometry::TriMesh;
use crate::homogenize::HomTensor;
use crate::kernels::Kernel;
use crate::material::MaterialCoefficient;
use crate::micro::{evolve, init_micro, MicroConfig, MicroState};
use crate::{Error, Mat32, Point, Result, Vec3};

/// Piecewise constant flux, one 3x2 matrix per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    values: Vec<Mat32>,
}

impl FluxField {
    pub fn new(values: Vec<Mat32>) -> Result<Self> {
        if let Some(tri) = values.iter().position(|f| f.iter().any(|v| !v.is_finite())) {
            return Err(Error::Instability { step: 0, reason: format!("non-finite flux on triangle {tri}") });
        }
        Ok(Self { values })
    }

    pub fn zeros(num_triangles: usize) -> Self {
        Self { values: vec![Mat32::zeros(); num_triangles] }
    }

    pub fn get(&self, tri: usize) -> &Mat32 {
        &self.values[tri]
    }

    pub fn values(&self) -> &[Mat32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The two averaging kernels: two-sided in space, one-sided in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernels {
    pub space: Kernel,
    pub time: Kernel,
}

impl Kernels {
    pub fn new(p_x: usize, q_x: usize, p_t: usize, q_t: usize) -> Result<Self> {
        Ok(Self { space: Kernel::new(p_x, q_x, false)?, time: Kernel::new(p_t, q_t, true)? })
    }
}

impl Default for Kernels {
    fn default() -> Self {
        Self::new(3, 7, 3, 7).expect("default kernels are well posed")
    }
}

/// Streaming accumulator for `∫∫ k_μ(ξ) k⁰_η(τ) a ∇m dξ dτ`.
///
/// `a ∂_1 m` is sampled on x-faces as `a_{i+1/2,j} (m_{i+1,j} - m_{i,j}) / Δξ`
/// (and likewise on y-faces), i.e. the fluxes of the micro stencil itself,
/// with trapezoidal kernel weights at the face midpoints.
struct FluxAccumulator {
    /// Node indices with nonzero weight.
    nodes: std::ops::Range<usize>,
    /// Face indices `i` (face between `i` and `i + 1`) with nonzero weight.
    faces: std::ops::Range<usize>,
    /// `Δξ k_μ(ξ_i)` indexed by node.
    w_node: Vec<f64>,
    /// `Δξ k_μ(ξ_i + Δξ/2)` indexed by face.
    w_face: Vec<f64>,
    time_weights: Vec<f64>,
    sum: Mat32,
}

fn support_range(w: &[f64]) -> std::ops::Range<usize> {
    let lo = w.iter().position(|&v| v != 0.0).unwrap_or(0);
    let hi = w.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
    lo..hi
}

impl FluxAccumulator {
    fn new(state: &MicroState, cfg: &MicroConfig, kernels: &Kernels) -> Result<Self> {
        if kernels.space.is_one_sided() || !kernels.time.is_one_sided() {
            return Err(Error::InvalidParameter(
                "flux averaging needs a two-sided space kernel and a one-sided time kernel".into(),
            ));
        }
        let n = state.n();
        let d_xi = state.d_xi();
        let w_node: Vec<f64> = (0..=n).map(|i| d_xi * kernels.space.eval_scaled(cfg.mu, state.xi(i))).collect();
        let w_face: Vec<f64> =
            (0..n).map(|i| d_xi * kernels.space.eval_scaled(cfg.mu, state.xi(i) + 0.5 * d_xi)).collect();
        let nodes = support_range(&w_node);
        let faces = support_range(&w_face);
        if nodes.is_empty() || faces.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "averaging width mu = {:.3e} is below the micro grid spacing {d_xi:.3e}",
                cfg.mu
            )));
        }
        let steps = cfg.m_mic();
        let d_tau = cfg.d_tau();
        let time_weights = (0..=steps)
            .map(|k| {
                let end = if k == 0 || k == steps { 0.5 } else { 1.0 };
                end * d_tau * kernels.time.eval_scaled(cfg.eta, k as f64 * d_tau)
            })
            .collect();
        Ok(Self { nodes, faces, w_node, w_face, time_weights, sum: Mat32::zeros() })
    }

    fn observe(&mut self, k: usize, state: &MicroState) {
        let wt = self.time_weights[k];
        if wt == 0.0 {
            return;
        }
        let w = state.n() + 1;
        let scale = wt / state.d_xi();
        let (a_x, a_y) = state.face_coefficients();
        for (comp, m) in state.components().into_iter().enumerate() {
            // x-faces (i + 1/2, j) and y-faces (i, j + 1/2).
            let mut sx = 0.0;
            for j in self.nodes.clone() {
                let row = &m[j * w..(j + 1) * w];
                let a = &a_x[j * w..(j + 1) * w];
                let mut r = 0.0;
                for i in self.faces.clone() {
                    r += self.w_face[i] * a[i] * (row[i + 1] - row[i]);
                }
                sx += self.w_node[j] * r;
            }
            let mut sy = 0.0;
            for j in self.faces.clone() {
                let row = &m[j * w..(j + 1) * w];
                let next = &m[(j + 1) * w..(j + 2) * w];
                let a = &a_y[j * w..(j + 1) * w];
                let mut r = 0.0;
                for i in self.nodes.clone() {
                    r += self.w_node[i] * a[i] * (next[i] - row[i]);
                }
                sy += self.w_face[j] * r;
            }
            self.sum[(comp, 0)] += scale * sx;
            self.sum[(comp, 1)] += scale * sy;
        }
    }
}

/// Averaged flux of an already initialized micro state.
pub fn flux_from_state(state: MicroState, cfg: &MicroConfig, kernels: &Kernels) -> Result<Mat32> {
    if cfg.mu > cfg.mu_prime {
        return Err(Error::InvalidParameter("mu must not exceed mu_prime".into()));
    }
    let mut acc = FluxAccumulator::new(&state, cfg, kernels)?;
    evolve(state, cfg, |k, _, s| acc.observe(k, s))?;
    Ok(acc.sum)
}

/// Flux `F_K` of triangle `tri` from one micro problem at its barycenter.
pub fn compute_flux(
    mesh: &TriMesh,
    macro_field: &[Vec3],
    tri: usize,
    coeff: &MaterialCoefficient,
    cfg: &MicroConfig,
    kernels: &Kernels,
) -> Result<Mat32> {
    let state = init_micro(mesh, macro_field, tri, coeff, cfg)?;
    flux_from_state(state, cfg, kernels)
}

/// Fluxes of all triangles, computed concurrently.
pub fn flux_field(
    mesh: &TriMesh,
    macro_field: &[Vec3],
    coeff: &MaterialCoefficient,
    cfg: &MicroConfig,
    kernels: &Kernels,
) -> Result<FluxField> {
    if macro_field.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} values, mesh has {} nodes",
            macro_field.len(),
            mesh.num_nodes()
        )));
    }
    let values = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|tri| {
            compute_flux(mesh, macro_field, tri, coeff, cfg, kernels)
                .map_err(|e| Error::Triangle { tri, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    FluxField::new(values)
}

/// Macro data for a single upscaling problem: one triangle whose barycenter
/// is `center`, with nodal values sampled from a smooth unit field.
#[derive(Debug, Clone)]
pub struct PatchProblem {
    pub mesh: TriMesh,
    pub values: Vec<Vec3>,
}

impl PatchProblem {
    /// Equilateral triangle with edge length `h` centered at `center`;
    /// nodal values are `field` at the vertices.
    pub fn equilateral(center: Point, h: f64, field: impl Fn(Point) -> Vec3) -> Result<Self> {
        let r = h / 3f64.sqrt();
        let nodes: Vec<Point> = (0..3)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::PI / 3.0;
                center + Point::new(r * t.cos(), r * t.sin())
            })
            .collect();
        let values = nodes.iter().map(|&p| field(p)).collect();
        Ok(Self { mesh: TriMesh::new(nodes, vec![[0, 1, 2]])?, values })
    }

    /// Smooth unit field used by the upscaling studies.
    pub fn default_field(x: Point) -> Vec3 {
        Vec3::new(0.6 + 0.5 * x.x, 0.3 - 0.4 * x.y, 0.7 + 0.2 * x.x * x.y).normalize()
    }

    /// Gradient of the affine interpolant.
    pub fn gradient(&self) -> Mat32 {
        self.mesh.gradient(&self.values, 0)
    }
}

/// Which micro parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Eta,
    Mu,
    MuPrime,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(SweepAxis::Eta),
            "mu" => Ok(SweepAxis::Mu),
            "mu_prime" => Ok(SweepAxis::MuPrime),
            other => Err(Error::Config(format!("unknown sweep axis '{other}' (eta, mu, mu_prime)"))),
        }
    }
}

/// Result of one upscaling run against a reference tensor.
#[derive(Debug, Clone)]
pub struct UpscaleReport {
    /// Swept parameter value, in units of ε (μ, μ') or ε² (η).
    pub value: f64,
    pub flux: Mat32,
    pub reference: Mat32,
    /// Frobenius norm of `F - ∇m_init A^H`.
    pub error: f64,
    /// Scale of the averaging error term `(ε/μ)^(q+2)`.
    pub mu_term: f64,
    /// Scale of the time-averaging term `(ε^2/η)^(q+1)`.
    pub eta_term: f64,
    /// Scale of the grid error `(Δξ/ε)^2`.
    pub grid_term: f64,
    pub cfg: MicroConfig,
}

/// Runs one upscaling problem and compares with `∇m_init A^H`.
pub fn upscale_report(
    problem: &PatchProblem,
    coeff: &MaterialCoefficient,
    cfg: &MicroConfig,
    kernels: &Kernels,
    reference: &HomTensor,
    value: f64,
) -> Result<UpscaleReport> {
    let flux = compute_flux(&problem.mesh, &problem.values, 0, coeff, cfg, kernels)?;
    let target = problem.gradient() * reference.matrix();
    let eps = cfg.epsilon;
    Ok(UpscaleReport {
        value,
        flux,
        reference: target,
        error: (flux - target).norm(),
        mu_term: (eps / cfg.mu).powi(kernels.space.q() as i32 + 2),
        eta_term: (eps * eps / cfg.eta).powi(kernels.time.q() as i32 + 1),
        grid_term: (cfg.d_xi() / eps).powi(2),
        cfg: *cfg,
    })
}

/// One report per value of the swept parameter; the other parameters stay at `base`.
pub fn parameter_sweep(
    axis: SweepAxis,
    values: &[f64],
    base: &MicroConfig,
    coeff: &MaterialCoefficient,
    problem: &PatchProblem,
    kernels: &Kernels,
    reference: &HomTensor,
) -> Result<Vec<UpscaleReport>> {
    let eps = base.epsilon;
    values
        .iter()
        .map(|&v| {
            let mut cfg = *base;
            match axis {
                SweepAxis::Eta => cfg.eta = v * eps * eps,
                SweepAxis::Mu => cfg.mu = v * eps,
                SweepAxis::MuPrime => cfg.mu_prime = v * eps,
            }
            cfg.validate()?;
            upscale_report(problem, coeff, &cfg, kernels, reference, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::CoefficientKind;
    use nalgebra::Rotation3;

    fn small_cfg(eps: f64) -> MicroConfig {
        MicroConfig::from_factors(eps, 2.0, 3.0, 0.2, 8, 1.2, 0.02).unwrap()
    }

    #[test]
    fn constant_field_gives_zero_flux() {
        let eps = 0.01;
        let coeff = MaterialCoefficient::new(CoefficientKind::PeriodicProduct, eps).unwrap();
        let p = PatchProblem::equilateral(Point::zeros(), 0.5, |_| Vec3::new(0.0, 0.6, 0.8)).unwrap();
        let f = compute_flux(&p.mesh, &p.values, 0, &coeff, &small_cfg(eps), &Kernels::default()).unwrap();
        assert!(f.norm() < 1e-12);
    }

    #[test]
    fn constant_coefficient_affine_data_is_exact() {
        let eps = 0.01;
        let coeff = MaterialCoefficient::constant(2.0).unwrap();
        let p = PatchProblem::equilateral(Point::new(0.2, 0.1), 0.5, |x| {
            Vec3::new(0.5 + 0.3 * x.x, -0.2 * x.y, 0.6 + 0.1 * x.x - 0.4 * x.y)
        })
        .unwrap();
        let f = compute_flux(&p.mesh, &p.values, 0, &coeff, &small_cfg(eps), &Kernels::default()).unwrap();
        assert!((f - p.gradient() * 2.0).norm() < 1e-8, "{f} vs {}", p.gradient() * 2.0);
    }

    #[test]
    fn rotation_covariance() {
        let eps = 0.01;
        let coeff = MaterialCoefficient::new(CoefficientKind::PeriodicProduct, eps).unwrap();
        let p = PatchProblem::equilateral(Point::zeros(), 0.5, PatchProblem::default_field).unwrap();
        let cfg = small_cfg(eps);
        let k = Kernels::default();
        let f = compute_flux(&p.mesh, &p.values, 0, &coeff, &cfg, &k).unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let rotated: Vec<Vec3> = p.values.iter().map(|v| rot * v).collect();
        let g = compute_flux(&p.mesh, &rotated, 0, &coeff, &cfg, &k).unwrap();
        assert!((g - rot.matrix() * f).norm() < 1e-10);
    }

    #[test]
    fn flux_field_covers_all_triangles() {
        let mesh = crate::geometry::unit_square(1).unwrap();
        let c = MaterialCoefficient::constant(1.5).unwrap();
        let field = vec![Vec3::z(); mesh.num_nodes()];
        let ff = flux_field(&mesh, &field, &c, &small_cfg(0.01), &Kernels::default()).unwrap();
        assert_eq!(ff.len(), mesh.num_triangles());
        assert!(ff.values().iter().all(|f| f.norm() < 1e-12));
    }

    #[test]
    fn wrong_kernel_sides_rejected() {
        let eps = 0.01;
        let coeff = MaterialCoefficient::constant(1.0).unwrap();
        let p = PatchProblem::equilateral(Point::zeros(), 0.5, PatchProblem::default_field).unwrap();
        let k = Kernels { space: Kernel::new(3, 7, true).unwrap(), time: Kernel::new(3, 7, true).unwrap() };
        assert!(compute_flux(&p.mesh, &p.values, 0, &coeff, &small_cfg(eps), &k).is_err());
    }
}
