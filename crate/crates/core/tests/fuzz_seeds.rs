//! Replays the checked-in fuzz corpus through the same checks as the fuzz targets.

use std::path::Path;

use hmm_core::geometry::{parse_msh, parse_msh_bytes, write_msh};
use hmm_core::runner::{parse_config, parse_override, render_config, ConfigMap, SimConfig};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            (path.display().to_string(), std::fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn msh_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("msh") {
        if let Ok(mesh) = parse_msh_bytes(&data) {
            let mut buf = Vec::new();
            write_msh(&mesh, &mut buf).unwrap();
            let back = parse_msh(std::str::from_utf8(&buf).unwrap()).unwrap();
            assert_eq!(back.triangles(), mesh.triangles(), "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn config_seeds() {
    for (name, data) in seeds("config") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(map) = parse_config(text) {
            assert_eq!(parse_config(&render_config(&map)).unwrap(), map, "{name}");
            let _ = SimConfig::from_map(&map);
        }
    }
}

#[test]
fn override_seeds() {
    for (name, data) in seeds("override") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok((key, value)) = parse_override(text) {
            let mut map = ConfigMap::new();
            map.insert(key, value);
            assert_eq!(parse_config(&render_config(&map)).unwrap(), map, "{name}");
        }
    }
}
