//! VTK legacy and CSV writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{render_config, SimConfig};
use crate::geometry::TriMesh;
use crate::macro_fem::NodalField;
use crate::{Error, Result, Vec3};

/// Writes an unstructured-grid VTK legacy ASCII file with point vectors `M`.
pub fn write_vtk(mesh: &TriMesh, m: &NodalField, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "magnetization")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(out, "{:.17e} {:.17e} 0", p.x, p.y)?;
    }
    let nt = mesh.num_triangles();
    writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.num_nodes())?;
    writeln!(out, "VECTORS M double")?;
    for v in m.values() {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `snapshot_<step>.vtk`, or `final.vtk` for `step == usize::MAX`.
pub fn write_snapshot(dir: &Path, step: usize, mesh: &TriMesh, m: &NodalField) -> Result<PathBuf> {
    let path = if step == usize::MAX { dir.join("final.vtk") } else { dir.join(format!("snapshot_{step:06}.vtk")) };
    let mut w = create(&path)?;
    write_vtk(mesh, m, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Mean magnetization time series as `t,mx,my,mz`.
pub fn means_csv(times: &[f64], means: &[Vec3]) -> String {
    let mut s = String::from("t,mx,my,mz\n");
    for (t, m) in times.iter().zip(means) {
        s.push_str(&format!("{t:.10e},{:.10e},{:.10e},{:.10e}\n", m.x, m.y, m.z));
    }
    s
}

pub fn write_means(dir: &Path, times: &[f64], means: &[Vec3]) -> Result<PathBuf> {
    let path = dir.join("means.csv");
    std::fs::write(&path, means_csv(times, means)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// All resolved parameters, loadable as a config file.
pub fn write_manifest(dir: &Path, cfg: &SimConfig) -> Result<PathBuf> {
    let path = dir.join("manifest.cfg");
    let text = format!(
        "# resolved parameters; rerun with `llhmm simulate {}`\n{}",
        path.display(),
        render_config(&cfg.resolved)
    );
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unit_square;

    #[test]
    fn vtk_layout() {
        let mesh = unit_square(1).unwrap();
        let m = NodalField::interpolate(&mesh, |_| Vec3::z());
        let mut buf = Vec::new();
        write_vtk(&mesh, &m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(text.contains("POINT_DATA 4\nVECTORS M double"));
        assert_eq!(text.lines().count(), 5 + 4 + 1 + 2 + 1 + 2 + 2 + 4);
    }

    #[test]
    fn csv_rows() {
        let s = means_csv(&[0.0, 0.5], &[Vec3::x(), Vec3::y()]);
        assert_eq!(s.lines().count(), 3);
    }
}
