//! Built-in structured meshes so tests and experiments run without external files.

use std::f64::consts::PI;

use super::TriMesh;
use crate::{Error, Point, Result};

/// Unit square `[0,1]^2` with `n` cells per side.
pub fn unit_square(n: usize) -> Result<TriMesh> {
    rectangle(1.0, 1.0, n, n)
}

/// Rectangle `[0,lx] x [0,ly]` with `nx x ny` cells, each split into two
/// triangles with alternating diagonals.
pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<TriMesh> {
    if nx == 0 || ny == 0 || !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rectangle needs positive extents and cell counts, got {lx}x{ly} with {nx}x{ny} cells"
        )));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Point::new(lx * i as f64 / nx as f64, ly * j as f64 / ny as f64));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    TriMesh::new(nodes, tris)
}

/// Unit disk: a 9-gon fan around the origin refined `level` times, with new
/// boundary nodes pushed onto the circle. The shortest edge is
/// `2 sin(pi/9) / 2^level`.
pub fn disk(level: usize) -> Result<TriMesh> {
    const SIDES: usize = 9;
    let mut nodes = vec![Point::zeros()];
    for k in 0..SIDES {
        let th = 2.0 * PI * k as f64 / SIDES as f64;
        nodes.push(Point::new(th.cos(), th.sin()));
    }
    let tris = (0..SIDES).map(|k| [0, 1 + k, 1 + (k + 1) % SIDES]).collect();
    let mut mesh = TriMesh::new(nodes, tris)?;
    for _ in 0..level {
        mesh = mesh.refine(|m, _, _| m / m.norm())?;
    }
    Ok(mesh)
}

/// Annulus `r_in <= |x| <= r_out` from `sectors` quadrilaterals refined `level` times.
pub fn ring(r_in: f64, r_out: f64, sectors: usize, level: usize) -> Result<TriMesh> {
    if !(r_in > 0.0 && r_out > r_in) || sectors < 3 {
        return Err(Error::InvalidParameter(format!(
            "ring needs 0 < r_in < r_out and >= 3 sectors, got {r_in}, {r_out}, {sectors}"
        )));
    }
    let mut nodes = Vec::with_capacity(2 * sectors);
    for k in 0..sectors {
        let th = 2.0 * PI * k as f64 / sectors as f64;
        let u = Point::new(th.cos(), th.sin());
        nodes.push(u * r_in);
        nodes.push(u * r_out);
    }
    let mut tris = Vec::with_capacity(2 * sectors);
    for k in 0..sectors {
        let (i0, o0) = (2 * k, 2 * k + 1);
        let (i1, o1) = (2 * ((k + 1) % sectors), 2 * ((k + 1) % sectors) + 1);
        tris.push([i0, o0, o1]);
        tris.push([i0, o1, i1]);
    }
    let mut mesh = TriMesh::new(nodes, tris)?;
    for _ in 0..level {
        mesh = mesh.refine(|m, a, b| m / m.norm() * 0.5 * (a.norm() + b.norm()))?;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_counts() {
        let mesh = rectangle(4.0, 1.0, 8, 2).unwrap();
        assert_eq!(mesh.num_nodes(), 27);
        assert_eq!(mesh.num_triangles(), 32);
        assert!((mesh.total_area() - 4.0).abs() < 1e-12);
        assert!((mesh.h_min() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ring_area() {
        let mesh = ring(0.4, 1.0, 8, 3).unwrap();
        let exact = PI * (1.0 - 0.16);
        assert!((mesh.total_area() - exact).abs() < 0.02);
        for p in mesh.nodes() {
            let r = p.norm();
            assert!(r > 0.4 - 1e-12 && r < 1.0 + 1e-12);
        }
    }
}
