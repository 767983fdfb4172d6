//! Error norms, convergence tables and scalar diagnostics.

use std::fmt::Write as _;

use log::{info, warn};
use rayon::prelude::*;

use super::{run, SimConfig};
use crate::geometry::{Locator, TriMesh};
use crate::macro_fem::{FieldProvider, FluxProvider, MacroSolver, NodalField, Stepper};
use crate::quadrature::TRI_DEG5;
use crate::{Error, Point, Result};

/// `‖M_coarse − M_ref‖_{L²}` integrated on the fine mesh.
///
/// The coarse field is evaluated by point location; quadrature points that
/// fall outside the coarse mesh (curved boundaries) use the nearest triangle.
pub fn l2_error(coarse: &TriMesh, m_coarse: &NodalField, fine: &TriMesh, m_ref: &NodalField) -> Result<f64> {
    if m_coarse.len() != coarse.num_nodes() || m_ref.len() != fine.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "fields of length {} and {} on meshes with {} and {} nodes",
            m_coarse.len(),
            m_ref.len(),
            coarse.num_nodes(),
            fine.num_nodes()
        )));
    }
    let locator = Locator::new(coarse);
    let (sum, outside) = fine
        .elements()
        .par_iter()
        .map(|el| {
            let nodes = fine.triangles()[el.tri].map(|v| fine.nodes()[v]);
            let refs = fine.local_values(m_ref.values(), el.tri);
            let mut acc = 0.0;
            let mut outside = 0usize;
            for (lam, w) in TRI_DEG5 {
                let x: Point = nodes[0] * lam[0] + nodes[1] * lam[1] + nodes[2] * lam[2];
                let r = refs[0] * lam[0] + refs[1] * lam[1] + refs[2] * lam[2];
                let tri = match locator.locate(x) {
                    Some(t) => t,
                    None => {
                        outside += 1;
                        locator.nearest(x)
                    }
                };
                let c = coarse.eval_affine(m_coarse.values(), tri, x);
                acc += w * el.area * (c - r).norm_squared();
            }
            (acc, outside)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if outside > 0 {
        warn!("l2_error: {outside} quadrature points outside the coarse mesh, using nearest triangles");
    }
    Ok(sum.sqrt())
}

/// Area-weighted mean of component `axis` of a P1 field.
pub fn mean_component(mesh: &TriMesh, m: &NodalField, axis: usize) -> f64 {
    let total: f64 = mesh
        .elements()
        .iter()
        .map(|el| {
            let v = mesh.local_values(m.values(), el.tri);
            el.area * (v[0][axis] + v[1][axis] + v[2][axis]) / 3.0
        })
        .sum();
    total / mesh.total_area()
}

/// First sign change of `values`, linearly interpolated in `times`.
pub fn zero_crossing(times: &[f64], values: &[f64]) -> Option<f64> {
    let n = times.len().min(values.len());
    if n > 0 && values[0] == 0.0 {
        return Some(times[0]);
    }
    for k in 1..n {
        let (a, b) = (values[k - 1], values[k]);
        if b == 0.0 {
            return Some(times[k]);
        }
        if a * b < 0.0 {
            let s = a / (a - b);
            return Some(times[k - 1] + s * (times[k] - times[k - 1]));
        }
    }
    None
}

/// Steps with damping `alpha` until the largest nodal change per unit time
/// drops below `tolerance` or `max_steps` is reached.
///
/// Returns the final state, whether it converged and the number of steps.
#[allow(clippy::too_many_arguments)]
pub fn relax_to_equilibrium(
    mesh: &TriMesh,
    m: NodalField,
    alpha: f64,
    dt: f64,
    tolerance: f64,
    max_steps: usize,
    flux: &dyn FluxProvider,
    field: &dyn FieldProvider,
) -> Result<(NodalField, bool, usize)> {
    if tolerance < 0.0 || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relaxation needs tolerance >= 0 and dt > 0, got {tolerance} and {dt}"
        )));
    }
    let solver = MacroSolver::new(mesh, alpha)?;
    let mut m = m;
    for k in 0..max_steps {
        let next = solver
            .step(Stepper::Rk4, &m, k as f64 * dt, dt, flux, field)
            .map_err(|e| Error::Step { step: k + 1, source: Box::new(e) })?;
        let change = next.values().iter().zip(m.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / dt;
        m = next;
        if change < tolerance {
            return Ok((m, true, k + 1));
        }
    }
    Ok((m, false, max_steps))
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub h_min: f64,
    pub error: f64,
    /// `log2(e_{i-1} / e_i)`; absent on the first row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    /// Builds rows and orders from `(h_min, error)` pairs ordered coarse to fine.
    pub fn from_errors(data: &[(f64, f64)]) -> Self {
        let rows = data
            .iter()
            .enumerate()
            .map(|(i, &(h_min, error))| ErrorRow {
                h_min,
                error,
                order: (i > 0).then(|| (data[i - 1].1 / error).log2()),
            })
            .collect();
        Self { rows }
    }

    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn mean_order(&self) -> Option<f64> {
        let o = self.orders();
        (!o.is_empty()).then(|| o.iter().sum::<f64>() / o.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h_min,error,order\n");
        for r in &self.rows {
            let order = r.order.map_or(String::new(), |o| format!("{o:.4}"));
            let _ = writeln!(s, "{:.6e},{:.6e},{}", r.h_min, r.error, order);
        }
        s
    }
}

/// Runs `base` at each mesh level and compares against a homogenized
/// reference one level finer than the finest.
pub fn convergence_study(base: &SimConfig, levels: &[usize]) -> Result<ErrorTable> {
    if levels.len() < 3 || levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidParameter(format!(
            "a convergence study needs at least three consecutive levels, got {levels:?}"
        )));
    }
    let finest = levels[levels.len() - 1];
    let reference_cfg =
        base.with("mode", "homogenized")?.with("mesh.level", &(finest + 1).to_string())?.with("output.dir", "none")?;
    info!("reference: homogenized at level {}", finest + 1);
    let reference = run(&reference_cfg)?;
    let mut data = Vec::with_capacity(levels.len());
    for &level in levels {
        let cfg = base.with("mesh.level", &level.to_string())?.with("output.dir", "none")?;
        let out = run(&cfg)?;
        let err = l2_error(&out.mesh, &out.field, &reference.mesh, &reference.field)?;
        info!("level {level}: h_min {:.4}, error {err:.4e}", out.mesh.h_min());
        data.push((out.mesh.h_min(), err));
    }
    Ok(ErrorTable::from_errors(&data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unit_square;
    use crate::Vec3;

    #[test]
    fn crossing_interpolates() {
        let t = zero_crossing(&[0.0, 1.0, 2.0], &[0.2, 0.05, -0.1]).unwrap();
        assert!((t - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(zero_crossing(&[0.0, 1.0], &[1.0, 0.5]), None);
    }

    #[test]
    fn table_orders() {
        let t = ErrorTable::from_errors(&[(0.4, 1.0), (0.2, 0.25), (0.1, 0.125)]);
        assert_eq!(t.orders(), vec![2.0, 1.0]);
        assert_eq!(t.mean_order(), Some(1.5));
        assert!(t.to_csv().starts_with("h_min,error,order\n"));
    }

    #[test]
    fn opposite_uniform_fields() {
        let mesh = unit_square(3).unwrap();
        let fine = unit_square(6).unwrap();
        let a = NodalField::interpolate(&mesh, |_| Vec3::x());
        let b = NodalField::interpolate(&fine, |_| -Vec3::x());
        assert!((l2_error(&mesh, &a, &fine, &b).unwrap() - 2.0).abs() < 1e-12);
        assert!((mean_component(&mesh, &a, 0) - 1.0).abs() < 1e-14);
    }
}
