//! Triangle meshes, P1 basis data and point location for the macro domain.

mod generate;
mod locate;
mod msh;

use std::collections::HashMap;

use crate::{Error, Mat32, Point, Result, Vec3};

pub use generate::{disk, rectangle, ring, unit_square};
pub use locate::Locator;
pub use msh::{load_msh, parse_msh, parse_msh_bytes, write_msh};

/// Barycentric tolerance for point-in-triangle tests.
pub const BARY_TOL: f64 = 1e-12;

/// Geometry of one triangle together with its P1 basis gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P1Element {
    pub tri: usize,
    pub area: f64,
    /// Constant gradient of the barycentric basis function of each vertex.
    pub grads: [Point; 3],
    pub barycenter: Point,
}

impl P1Element {
    fn new(tri: usize, p: [Point; 3]) -> Self {
        let twice_area = cross2(p[1] - p[0], p[2] - p[0]);
        let inv = 1.0 / twice_area;
        let grads = [
            Point::new(p[1].y - p[2].y, p[2].x - p[1].x) * inv,
            Point::new(p[2].y - p[0].y, p[0].x - p[2].x) * inv,
            Point::new(p[0].y - p[1].y, p[1].x - p[0].x) * inv,
        ];
        Self { tri, area: 0.5 * twice_area, grads, barycenter: (p[0] + p[1] + p[2]) / 3.0 }
    }

    /// Barycentric coordinates of `x` (they extend affinely outside the triangle).
    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let d = x - self.barycenter;
        [1.0 / 3.0 + self.grads[0].dot(&d), 1.0 / 3.0 + self.grads[1].dot(&d), 1.0 / 3.0 + self.grads[2].dot(&d)]
    }

    /// Jacobian `∇v` of the affine interpolant of three vertex values.
    pub fn gradient(&self, v: [Vec3; 3]) -> Mat32 {
        let mut g = Mat32::zeros();
        for (vi, grad) in v.iter().zip(&self.grads) {
            g += vi * grad.transpose();
        }
        g
    }
}

#[inline]
pub(crate) fn cross2(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    interior_edges: usize,
    elements: Vec<P1Element>,
    h_min: f64,
}

impl TriMesh {
    /// Builds a mesh, reorienting clockwise triangles and inferring the boundary
    /// from edges with a single adjacent triangle.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_boundary(nodes, triangles, &[])
    }

    /// Like [`TriMesh::new`], additionally checking that every listed boundary
    /// line is an edge of the triangulation.
    pub fn with_boundary(
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        listed_lines: &[[usize; 2]],
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Topology("mesh has no triangles".into()));
        }
        if let Some((j, p)) = nodes.iter().enumerate().find(|(_, p)| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::Topology(format!("node {j} has non-finite coordinates {p:?}")));
        }
        let mut used = vec![false; nodes.len()];
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= nodes.len() {
                    return Err(Error::Topology(format!("triangle {t} references missing node {v}")));
                }
                used[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {t} repeats a node: {tri:?}")));
            }
            let [a, b, c] = tri.map(|v| nodes[v]);
            let twice_area = cross2(b - a, c - a);
            let scale = (b - a).norm_squared().max((c - a).norm_squared());
            if !(twice_area.abs() > 1e-14 * scale) {
                return Err(Error::Topology(format!("triangle {t} has zero area")));
            }
            if twice_area < 0.0 {
                tri.swap(1, 2);
            }
        }
        if let Some(j) = used.iter().position(|u| !u) {
            return Err(Error::Topology(format!("node {j} belongs to no triangle")));
        }

        let mut edge_count: HashMap<[usize; 2], usize> = HashMap::with_capacity(3 * triangles.len());
        for tri in &triangles {
            for k in 0..3 {
                *edge_count.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut boundary_edges = Vec::new();
        let mut interior_edges = 0;
        let mut h_min = f64::INFINITY;
        for (&[a, b], &count) in &edge_count {
            match count {
                1 => boundary_edges.push([a, b]),
                2 => interior_edges += 1,
                _ => return Err(Error::Topology(format!("edge ({a}, {b}) is shared by {count} triangles"))),
            }
            h_min = h_min.min((nodes[a] - nodes[b]).norm());
        }
        boundary_edges.sort_unstable();
        for line in listed_lines {
            if !edge_count.contains_key(&edge_key(line[0], line[1])) {
                return Err(Error::Topology(format!(
                    "boundary line ({}, {}) is not an edge of the triangulation",
                    line[0], line[1]
                )));
            }
        }

        let elements = triangles.iter().enumerate().map(|(t, tri)| P1Element::new(t, tri.map(|v| nodes[v]))).collect();
        let mesh = Self { nodes, triangles, boundary_edges, interior_edges, elements, h_min };
        mesh.check_hanging_nodes()?;
        Ok(mesh)
    }

    /// A node lying strictly inside a boundary edge signals a non-conforming
    /// junction (a hanging node).
    fn check_hanging_nodes(&self) -> Result<()> {
        let locator = Locator::new(self);
        for &[a, b] in &self.boundary_edges {
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            let len2 = (pb - pa).norm_squared();
            for c in locator.nodes_near_segment(self, pa, pb) {
                if c == a || c == b {
                    continue;
                }
                let pc = self.nodes[c];
                let s = (pc - pa).dot(&(pb - pa)) / len2;
                let off = cross2(pb - pa, pc - pa).abs() / len2.sqrt();
                if s > 1e-9 && s < 1.0 - 1e-9 && off <= 1e-10 * len2.sqrt() {
                    return Err(Error::Topology(format!("node {c} hangs on boundary edge ({a}, {b})")));
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.interior_edges
    }

    /// Length of the shortest edge.
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn element(&self, tri: usize) -> &P1Element {
        &self.elements[tri]
    }

    pub fn elements(&self) -> &[P1Element] {
        &self.elements
    }

    /// P1 basis data of one triangle.
    pub fn p1_element(&self, tri: usize) -> Result<P1Element> {
        self.elements
            .get(tri)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("triangle index {tri} out of range")))
    }

    /// Shortest edge of one triangle.
    pub fn triangle_h_min(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri].map(|v| self.nodes[v]);
        (b - a).norm().min((c - b).norm()).min((a - c).norm())
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// The three nodal vectors of a triangle.
    pub fn local_values(&self, field: &[Vec3], tri: usize) -> [Vec3; 3] {
        self.triangles[tri].map(|v| field[v])
    }

    /// Constant Jacobian of the P1 field on a triangle.
    pub fn gradient(&self, field: &[Vec3], tri: usize) -> Mat32 {
        self.elements[tri].gradient(self.local_values(field, tri))
    }

    /// Evaluates the P1 field at a point of the closed triangle `tri`.
    pub fn eval_p1(&self, field: &[Vec3], tri: usize, point: Point) -> Result<Vec3> {
        let el = self.p1_element(tri)?;
        let lambda = el.barycentric(point);
        if lambda.iter().any(|&l| l < -BARY_TOL) {
            return Err(Error::PointOutside { tri, x: point.x, y: point.y });
        }
        Ok(combine(lambda, self.local_values(field, tri)))
    }

    /// Evaluates the affine function of triangle `tri` anywhere in the plane.
    pub fn eval_affine(&self, field: &[Vec3], tri: usize, point: Point) -> Vec3 {
        combine(self.elements[tri].barycentric(point), self.local_values(field, tri))
    }

    /// Uniform red refinement. Midpoints of boundary edges are passed through
    /// `project(midpoint, a, b)` so curved boundaries can be recovered.
    pub fn refine(&self, project: impl Fn(Point, Point, Point) -> Point) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        let boundary: std::collections::HashSet<[usize; 2]> = self.boundary_edges.iter().copied().collect();
        let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point>| -> usize {
            let key = edge_key(a, b);
            *midpoint.entry(key).or_insert_with(|| {
                let (pa, pb) = (nodes[a], nodes[b]);
                let mut m = 0.5 * (pa + pb);
                if boundary.contains(&key) {
                    m = project(m, pa, pb);
                }
                nodes.push(m);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        TriMesh::new(nodes, triangles)
    }
}

#[inline]
fn combine(lambda: [f64; 3], v: [Vec3; 3]) -> Vec3 {
    v[0] * lambda[0] + v[1] * lambda[1] + v[2] * lambda[2]
}

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}
