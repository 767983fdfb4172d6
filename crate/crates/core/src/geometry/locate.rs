use super::TriMesh;
use crate::Point;

/// Uniform bucket grid for point location in a [`TriMesh`].
#[derive(Debug)]
pub struct Locator<'a> {
    mesh: &'a TriMesh,
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    triangles: Vec<Vec<usize>>,
    nodes: Vec<Vec<usize>>,
}

const LOCATE_TOL: f64 = 1e-10;

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let ext = hi - lo;
        let buckets = mesh.num_triangles().clamp(1, 1 << 20) as f64;
        let cell =
            ((ext.x.max(1e-300) * ext.y.max(1e-300)) / buckets).sqrt().max(ext.x.max(ext.y) / 4096.0).max(1e-300);
        let nx = ((ext.x / cell).ceil() as usize).clamp(1, 4096);
        let ny = ((ext.y / cell).ceil() as usize).clamp(1, 4096);
        let mut loc =
            Self { mesh, lo, cell, nx, ny, triangles: vec![Vec::new(); nx * ny], nodes: vec![Vec::new(); nx * ny] };
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let pts = tri.map(|v| mesh.nodes()[v]);
            let tlo = pts[0].inf(&pts[1]).inf(&pts[2]);
            let thi = pts[0].sup(&pts[1]).sup(&pts[2]);
            let (i0, j0) = loc.bucket(tlo);
            let (i1, j1) = loc.bucket(thi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.triangles[j * nx + i].push(t);
                }
            }
        }
        for (v, p) in mesh.nodes().iter().enumerate() {
            let (i, j) = loc.bucket(*p);
            loc.nodes[j * nx + i].push(v);
        }
        loc
    }

    fn bucket(&self, p: Point) -> (usize, usize) {
        let fx = ((p.x - self.lo.x) / self.cell).floor();
        let fy = ((p.y - self.lo.y) / self.cell).floor();
        let i = if fx.is_nan() { 0.0 } else { fx.clamp(0.0, (self.nx - 1) as f64) };
        let j = if fy.is_nan() { 0.0 } else { fy.clamp(0.0, (self.ny - 1) as f64) };
        (i as usize, j as usize)
    }

    /// Triangle containing `p` (closed, up to rounding), if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let (i, j) = self.bucket(p);
        self.triangles[j * self.nx + i]
            .iter()
            .copied()
            .find(|&t| self.mesh.element(t).barycentric(p).iter().all(|&l| l >= -LOCATE_TOL))
    }

    /// Triangle closest to `p` in Euclidean distance.
    pub fn nearest(&self, p: Point) -> usize {
        if let Some(t) = self.locate(p) {
            return t;
        }
        let mut best = (f64::INFINITY, 0);
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let [a, b, c] = tri.map(|v| self.mesh.nodes()[v]);
            let d = seg_dist(p, a, b).min(seg_dist(p, b, c)).min(seg_dist(p, c, a));
            if d < best.0 {
                best = (d, t);
            }
        }
        best.1
    }

    /// Nodes whose bucket overlaps the bounding box of segment `ab`.
    pub(crate) fn nodes_near_segment(&self, _mesh: &TriMesh, a: Point, b: Point) -> Vec<usize> {
        let (i0, j0) = self.bucket(a.inf(&b));
        let (i1, j1) = self.bucket(a.sup(&b));
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.extend_from_slice(&self.nodes[j * self.nx + i]);
            }
        }
        out
    }
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}
