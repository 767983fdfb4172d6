use std::process::Command;

fn llhmm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_llhmm")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

#[test]
fn homogenize_prints_tensor_csv() {
    let out = llhmm(&["homogenize", "laminate", "--resolution", "64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a11,a12,a21,a22"));
    let v: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    // Default laminate: mean 2, amplitude 1.
    assert!((v[0] - 3f64.sqrt()).abs() < 1e-2, "{v:?}");
    assert!((v[3] - 2.0).abs() < 1e-2, "{v:?}");
    assert!(v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
}

#[test]
fn input_errors_exit_with_code_two() {
    for args in [
        vec!["homogenize", "nonsense"],
        vec!["simulate", "-e", "circle", "-o", "mesh.levle=3"],
        vec!["simulate", "-e", "circle", "-o", "noequals"],
        vec!["simulate", "/definitely/not/here.cfg"],
    ] {
        let out = llhmm(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "experiment = square\nmode = homogenized\nt_final = 0.01\n[mesh]\nnx = 3\nny = 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = llhmm(&["simulate", cfg.to_str().unwrap(), "-o", &format!("output.dir={}", out_dir.display())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["means.csv", "final.vtk", "manifest.cfg"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let means = std::fs::read_to_string(out_dir.join("means.csv")).unwrap();
    assert!(means.starts_with("t,mx,my,mz\n"));
}
