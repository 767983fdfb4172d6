use crate::geometry::TriMesh;
use crate::{Error, Point, Result, Vec3};

/// Tolerance on `| |M_j| - 1 |` for a field to count as normalized.
pub const UNIT_TOL: f64 = 1e-12;

/// Per-node 3-vector field on a [`TriMesh`], e.g. the magnetization or an RK stage value.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<Vec3>,
    normalized: bool,
}

impl NodalField {
    /// Wraps arbitrary nodal values (not flagged as normalized).
    pub fn new(values: Vec<Vec3>) -> Self {
        Self { values, normalized: false }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![Vec3::zeros(); len])
    }

    /// Wraps nodal values that must all be unit vectors.
    pub fn normalized(values: Vec<Vec3>) -> Result<Self> {
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| (v.norm() - 1.0).abs() > UNIT_TOL) {
            return Err(Error::InvalidParameter(format!("nodal vector {j} has norm {} (expected 1)", v.norm())));
        }
        Ok(Self { values, normalized: true })
    }

    /// Nodal interpolation `I_h(f)`. The result is flagged normalized when every
    /// sampled vector is a unit vector.
    pub fn interpolate(mesh: &TriMesh, f: impl Fn(Point) -> Vec3) -> Self {
        let values: Vec<Vec3> = mesh.nodes().iter().map(|&p| f(p)).collect();
        let normalized = values.iter().all(|v| (v.norm() - 1.0).abs() <= UNIT_TOL);
        Self { values, normalized }
    }

    /// Projects every nodal vector onto the unit sphere.
    pub fn renormalize(&self) -> Result<Self> {
        let mut values = Vec::with_capacity(self.values.len());
        for (node, v) in self.values.iter().enumerate() {
            let n = v.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::ZeroLength { node });
            }
            values.push(v / n);
        }
        Ok(Self { values, normalized: true })
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Largest `| |M_j| - 1 |` over the nodes.
    pub fn max_norm_defect(&self) -> f64 {
        self.values.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `self + scale * other`, unflagged.
    pub fn axpy(&self, scale: f64, other: &[Vec3]) -> Self {
        Self::new(self.values.iter().zip(other).map(|(a, b)| a + b * scale).collect())
    }
}

impl std::ops::Index<usize> for NodalField {
    type Output = Vec3;
    fn index(&self, i: usize) -> &Vec3 {
        &self.values[i]
    }
}
