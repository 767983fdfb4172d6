//! Gmsh MSH 2.2 ASCII reader and writer (2D triangles and boundary lines).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::TriMesh;
use crate::{Error, Point, Result};

const ELEM_LINE: u32 = 1;
const ELEM_TRIANGLE: u32 = 2;

/// Reads an ASCII MSH 2.2 file.
pub fn load_msh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msh(&text)
}

/// Parses raw bytes, rejecting non-UTF-8 input.
pub fn parse_msh_bytes(bytes: &[u8]) -> Result<TriMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse { line: 0, msg: format!("not UTF-8: {e}") })?;
    parse_msh(text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some(l);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        let line = self.line;
        self.next().ok_or_else(|| Error::Parse { line, msg: format!("unexpected end of file, expected {what}") })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_>, tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| lines.err(format!("missing {what}")))?.parse().map_err(|_| lines.err(format!("malformed {what}")))
}

/// Parses the text of an ASCII MSH 2.x file.
///
/// Node tags may be arbitrary positive integers; nodes not used by any
/// triangle are dropped. Elements other than triangles and lines are ignored.
pub fn parse_msh(text: &str) -> Result<TriMesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let mut node_pos: HashMap<u64, Point> = HashMap::new();
    let mut raw_tris: Vec<[u64; 3]> = Vec::new();
    let mut raw_lines: Vec<[u64; 2]> = Vec::new();
    let mut seen_format = false;
    let mut seen_nodes = false;
    let mut seen_elements = false;

    while let Some(header) = lines.next() {
        match header {
            "$MeshFormat" => {
                let l = lines.expect("format line")?;
                let mut it = l.split_whitespace();
                let version: String = parse_num(&lines, it.next(), "version")?;
                let file_type: u32 = parse_num(&lines, it.next(), "file type")?;
                let _size: u32 = parse_num(&lines, it.next(), "data size")?;
                if !version.starts_with("2.") {
                    return Err(lines.err(format!("unsupported MSH version {version}")));
                }
                if file_type != 0 {
                    return Err(lines.err("binary MSH files are not supported"));
                }
                if lines.expect("$EndMeshFormat")? != "$EndMeshFormat" {
                    return Err(lines.err("expected $EndMeshFormat"));
                }
                seen_format = true;
            }
            "$Nodes" => {
                let tok = lines.expect("node count")?;
                let count: usize = parse_num(&lines, Some(tok), "node count")?;
                node_pos.reserve(count.min(1 << 16));
                for _ in 0..count {
                    let l = lines.expect("node")?;
                    let mut it = l.split_whitespace();
                    let tag: u64 = parse_num(&lines, it.next(), "node tag")?;
                    let x: f64 = parse_num(&lines, it.next(), "x coordinate")?;
                    let y: f64 = parse_num(&lines, it.next(), "y coordinate")?;
                    let _z: f64 = parse_num(&lines, it.next(), "z coordinate")?;
                    if !(x.is_finite() && y.is_finite()) {
                        return Err(lines.err("non-finite coordinate"));
                    }
                    if node_pos.insert(tag, Point::new(x, y)).is_some() {
                        return Err(lines.err(format!("duplicate node tag {tag}")));
                    }
                }
                if lines.expect("$EndNodes")? != "$EndNodes" {
                    return Err(lines.err("expected $EndNodes"));
                }
                seen_nodes = true;
            }
            "$Elements" => {
                let tok = lines.expect("element count")?;
                let count: usize = parse_num(&lines, Some(tok), "element count")?;
                for _ in 0..count {
                    let l = lines.expect("element")?;
                    let mut it = l.split_whitespace();
                    let _tag: u64 = parse_num(&lines, it.next(), "element tag")?;
                    let kind: u32 = parse_num(&lines, it.next(), "element type")?;
                    let ntags: usize = parse_num(&lines, it.next(), "tag count")?;
                    for _ in 0..ntags {
                        let _: i64 = parse_num(&lines, it.next(), "element tag")?;
                    }
                    let nodes: Vec<u64> = it
                        .map(|t| t.parse().map_err(|_| lines.err("malformed element node")))
                        .collect::<Result<_>>()?;
                    match kind {
                        ELEM_TRIANGLE => match nodes[..] {
                            [a, b, c] => raw_tris.push([a, b, c]),
                            _ => return Err(lines.err("triangle needs exactly 3 nodes")),
                        },
                        ELEM_LINE => match nodes[..] {
                            [a, b] => raw_lines.push([a, b]),
                            _ => return Err(lines.err("line needs exactly 2 nodes")),
                        },
                        _ => {}
                    }
                }
                if lines.expect("$EndElements")? != "$EndElements" {
                    return Err(lines.err("expected $EndElements"));
                }
                seen_elements = true;
            }
            other if other.starts_with("$End") => {
                return Err(lines.err(format!("unbalanced section terminator {other}")));
            }
            other if other.starts_with('$') => {
                // Unknown section: skip to its terminator.
                let end = format!("$End{}", &other[1..]);
                loop {
                    if lines.expect(&end)? == end {
                        break;
                    }
                }
            }
            _ => return Err(lines.err(format!("unexpected content outside a section: {header}"))),
        }
    }
    if !seen_format {
        return Err(Error::Parse { line: lines.line, msg: "missing $MeshFormat section".into() });
    }
    if !(seen_nodes && seen_elements) {
        return Err(Error::Parse { line: lines.line, msg: "missing $Nodes or $Elements section".into() });
    }

    // Compact numbering over nodes referenced by triangles, in tag order.
    let mut used: Vec<u64> = raw_tris.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut index = HashMap::with_capacity(used.len());
    let mut nodes = Vec::with_capacity(used.len());
    for tag in used {
        let p =
            node_pos.get(&tag).ok_or_else(|| Error::Topology(format!("triangle references undefined node {tag}")))?;
        index.insert(tag, nodes.len());
        nodes.push(*p);
    }
    let tris = raw_tris.iter().map(|t| t.map(|tag| index[&tag])).collect();
    let mut listed = Vec::with_capacity(raw_lines.len());
    for [a, b] in raw_lines {
        match (index.get(&a), index.get(&b)) {
            (Some(&a), Some(&b)) => listed.push([a, b]),
            _ => {
                return Err(Error::Topology(format!(
                    "boundary line ({a}, {b}) references a node outside the triangulation"
                )))
            }
        }
    }
    TriMesh::with_boundary(nodes, tris, &listed)
}

/// Writes an ASCII MSH 2.2 file with triangles and boundary lines.
pub fn write_msh(mesh: &TriMesh, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "$MeshFormat\n2.2 0 8\n$EndMeshFormat")?;
    writeln!(out, "$Nodes\n{}", mesh.num_nodes())?;
    for (i, p) in mesh.nodes().iter().enumerate() {
        writeln!(out, "{} {:e} {:e} 0", i + 1, p.x, p.y)?;
    }
    writeln!(out, "$EndNodes")?;
    let nb = mesh.boundary_edges().len();
    writeln!(out, "$Elements\n{}", nb + mesh.num_triangles())?;
    for (k, [a, b]) in mesh.boundary_edges().iter().enumerate() {
        writeln!(out, "{} 1 2 1 1 {} {}", k + 1, a + 1, b + 1)?;
    }
    for (k, [a, b, c]) in mesh.triangles().iter().enumerate() {
        writeln!(out, "{} 2 2 2 1 {} {} {}", nb + k + 1, a + 1, b + 1, c + 1)?;
    }
    writeln!(out, "$EndElements")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::disk;

    const SQUARE: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
        $Nodes\n4\n10 0 0 0\n11 1 0 0\n12 1 1 0\n13 0 1 0\n$EndNodes\n\
        $Elements\n7\n1 15 2 0 1 10\n2 1 2 1 1 10 11\n3 1 2 1 1 11 12\n\
        4 1 2 1 1 12 13\n5 1 2 1 1 13 10\n6 2 2 2 1 10 11 12\n7 2 2 2 1 10 12 13\n$EndElements\n";

    #[test]
    fn parses_square_with_sparse_tags() {
        let mesh = parse_msh(SQUARE).unwrap();
        assert_eq!(mesh.num_nodes(), 4);
        assert_eq!(mesh.num_triangles(), 2);
        assert_eq!(mesh.boundary_edges().len(), 4);
        assert_eq!(mesh.num_interior_edges(), 1);
    }

    #[test]
    fn repeated_node_triangle_is_topology_error() {
        let bad = SQUARE.replace("7 2 2 2 1 10 12 13", "7 2 2 2 1 10 12 12");
        assert!(matches!(parse_msh(&bad), Err(Error::Topology(_))));
    }

    #[test]
    fn malformed_sections_are_parse_errors() {
        for bad in [
            SQUARE.replace("$EndNodes", "$EndNode"),
            SQUARE.replace("2.2 0 8", "4.1 0 8"),
            SQUARE.replace("11 1 0 0", "11 1 zero 0"),
            SQUARE.replace("$Elements\n7", "$Elements\n9"),
            "".to_string(),
        ] {
            assert!(matches!(parse_msh(&bad), Err(Error::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn write_then_read() {
        let mesh = disk(1).unwrap();
        let mut buf = Vec::new();
        write_msh(&mesh, &mut buf).unwrap();
        let back = parse_msh_bytes(&buf).unwrap();
        assert_eq!(back.num_triangles(), mesh.num_triangles());
        assert_eq!(back.triangles(), mesh.triangles());
        assert!((back.h_min() - mesh.h_min()).abs() < 1e-12);
    }
}
