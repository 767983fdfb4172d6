use hmm_core::geometry::{disk, parse_msh, rectangle, ring, unit_square, write_msh, Locator};
use hmm_core::{Error, Point, Vec3};
use proptest::prelude::*;

fn roundtrip(mesh: &hmm_core::geometry::TriMesh) -> hmm_core::geometry::TriMesh {
    let mut buf = Vec::new();
    write_msh(mesh, &mut buf).unwrap();
    parse_msh(std::str::from_utf8(&buf).unwrap()).unwrap()
}

#[test]
fn disk_levels_have_expected_sizes() {
    let expected = [(9, 0.684), (36, 0.342), (144, 0.171), (576, 0.0855)];
    for (level, (tris, h)) in expected.into_iter().enumerate() {
        let m = disk(level).unwrap();
        assert_eq!(m.num_triangles(), tris);
        assert!((m.h_min() - h).abs() < 1e-3, "level {level}: {}", m.h_min());
    }
    // Inscribed polygons approach the unit disk from below.
    let areas: Vec<f64> = (0..4).map(|l| disk(l).unwrap().total_area()).collect();
    assert!(areas.windows(2).all(|w| w[0] < w[1] && w[1] < std::f64::consts::PI));
    assert!((areas[3] - std::f64::consts::PI).abs() < 0.01);
}

#[test]
fn ring_area_converges() {
    let exact = std::f64::consts::PI * (1.0 - 0.16);
    let coarse = ring(0.4, 1.0, 12, 0).unwrap().total_area();
    let fine = ring(0.4, 1.0, 12, 3).unwrap().total_area();
    assert!((fine - exact).abs() < (coarse - exact).abs());
    assert!((fine - exact).abs() < 5e-3);
    assert!(ring(1.0, 0.5, 12, 0).is_err());
}

#[test]
fn msh_reader_handles_tags_and_skips_other_elements() {
    let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n5\n10 0 0 0\n20 1 0 0\n30 1 1 0\n40 0 1 0\n99 5 5 0\n$EndNodes\n\
$Elements\n4\n1 15 2 0 1 10\n2 1 2 0 1 10 20\n3 2 2 0 1 10 20 30\n4 2 2 0 1 10 30 40\n$EndElements\n";
    let m = parse_msh(text).unwrap();
    assert_eq!(m.num_nodes(), 4);
    assert_eq!(m.num_triangles(), 2);
    assert!((m.total_area() - 1.0).abs() < 1e-15);
}

#[test]
fn msh_reader_rejects_malformed_input() {
    let cases = [
        "",
        "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n",
        "$MeshFormat\n2.2 1 8\n$EndMeshFormat\n",
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n$EndNodes\n",
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n$Elements\n1\n1 2 2 0 1 1 2 7\n$EndElements\n",
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 2 0 0\n$EndNodes\n$Elements\n1\n1 2 2 0 1 1 2 3\n$EndElements\n",
    ];
    for text in cases {
        let err = parse_msh(text).unwrap_err();
        assert!(err.is_input_error(), "{text:?}: {err}");
    }
}

#[test]
fn rectangle_rejects_degenerate_input() {
    assert!(matches!(rectangle(0.0, 1.0, 2, 2), Err(Error::InvalidParameter(_))));
    assert!(rectangle(1.0, 1.0, 0, 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn msh_roundtrip_preserves_mesh(nx in 1usize..7, ny in 1usize..7, lx in 0.1f64..5.0, ly in 0.1f64..5.0) {
        let mesh = rectangle(lx, ly, nx, ny).unwrap();
        let back = roundtrip(&mesh);
        prop_assert_eq!(back.triangles(), mesh.triangles());
        for (a, b) in back.nodes().iter().zip(mesh.nodes()) {
            prop_assert!((a - b).norm() <= 1e-15 * (lx + ly));
        }
        prop_assert_eq!(back.boundary_edges().len(), 2 * (nx + ny));
    }

    #[test]
    fn refinement_preserves_area_and_quarters_triangles(nx in 1usize..5, ny in 1usize..5, lx in 0.2f64..3.0) {
        let mesh = rectangle(lx, 1.0, nx, ny).unwrap();
        let fine = mesh.refine(|m, _, _| m).unwrap();
        prop_assert_eq!(fine.num_triangles(), 4 * mesh.num_triangles());
        prop_assert!((fine.total_area() - lx).abs() < 1e-12 * lx);
        prop_assert!((fine.h_min() - 0.5 * mesh.h_min()).abs() < 1e-12);
    }

    #[test]
    fn located_triangle_contains_point(x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1usize..9) {
        let mesh = unit_square(n).unwrap();
        let loc = Locator::new(&mesh);
        let p = Point::new(x, y);
        let t = loc.locate(p).expect("inside the square");
        let lam = mesh.element(t).barycentric(p);
        prop_assert!(lam.iter().all(|&l| l >= -1e-10));
        prop_assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // P1 evaluation reproduces affine data.
        let f = |q: Point| Vec3::new(1.0 + 2.0 * q.x, -q.y, 0.5 * q.x + 3.0 * q.y);
        let vals: Vec<Vec3> = mesh.nodes().iter().map(|&q| f(q)).collect();
        prop_assert!((mesh.eval_affine(&vals, t, p) - f(p)).norm() < 1e-12);
    }

    #[test]
    fn nearest_triangle_outside_the_mesh(x in 1.01f64..3.0, y in -1.0f64..2.0) {
        let mesh = unit_square(4).unwrap();
        let loc = Locator::new(&mesh);
        let p = Point::new(x, y);
        prop_assert!(loc.locate(p).is_none());
        let t = loc.nearest(p);
        let clamp = Point::new(1.0, y.clamp(0.0, 1.0));
        let lam = mesh.element(t).barycentric(clamp);
        prop_assert!(lam.iter().all(|&l| l >= -1e-9));
    }
}
