#![no_main]

use hmm_core::geometry::{parse_msh, parse_msh_bytes, write_msh};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(mesh) = parse_msh_bytes(data) else {
        return;
    };
    // Anything accepted must survive a write/read cycle unchanged.
    let mut buf = Vec::new();
    write_msh(&mesh, &mut buf).unwrap();
    let back = parse_msh(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.triangles(), mesh.triangles());
    assert_eq!(back.num_nodes(), mesh.num_nodes());
});
