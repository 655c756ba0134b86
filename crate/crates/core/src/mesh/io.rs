//! Line-oriented `vemmesh 1` text format.
//!
//! ```text
//! vemmesh 1
//! <V> <C> <E>
//! x y                 (V lines)
//! m i1 i2 ... im      (C lines, 0-based CCW vertex indices)
//! a b t               (E lines, t: 0 interior, 1 Γᵘ, 2 Γᶿ)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, VemError};
use crate::Point;

use super::{BoundaryTag, Edge, PolygonalMesh};

pub fn write_mesh_string(mesh: &PolygonalMesh) -> String {
    let mut s = String::new();
    s.push_str("vemmesh 1\n");
    let _ = writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_cells(), mesh.num_edges());
    for p in mesh.vertices() {
        // shortest representation that round-trips exactly
        let _ = writeln!(s, "{:?} {:?}", p.x, p.y);
    }
    for cell in mesh.cells() {
        let _ = write!(s, "{}", cell.len());
        for v in cell {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    for e in mesh.edges() {
        let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag.code());
    }
    s
}

pub fn write_mesh(mesh: &PolygonalMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<PolygonalMesh> {
    read_mesh_str(&std::fs::read_to_string(path)?)
}

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(VemError::Parse {
        line,
        message: message.into(),
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            if !l.trim().is_empty() {
                return Ok((i + 1, l));
            }
        }
        parse_err(self.last + 1, "unexpected end of file")
    }
}

fn fields<T: std::str::FromStr>(line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|t| t.parse::<T>().or_else(|_| parse_err(line, format!("cannot parse '{t}'"))))
        .collect()
}

pub fn read_mesh_str(text: &str) -> Result<PolygonalMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (ln, header) = lines.next_line()?;
    if header.trim() != "vemmesh 1" {
        return parse_err(ln, format!("expected 'vemmesh 1', found '{}'", header.trim()));
    }
    let (ln, counts) = lines.next_line()?;
    let counts: Vec<usize> = fields(ln, counts)?;
    let [nv, nc, ne] = counts[..] else {
        return parse_err(ln, "expected three counts");
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next_line()?;
        let xy: Vec<f64> = fields(ln, l)?;
        if xy.len() != 2 {
            return parse_err(ln, "vertex line needs two coordinates");
        }
        vertices.push(Point::new(xy[0], xy[1]));
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = lines.next_line()?;
        let ids: Vec<usize> = fields(ln, l)?;
        if ids.is_empty() || ids.len() != ids[0] + 1 {
            return parse_err(ln, "cell line length does not match its vertex count");
        }
        cells.push(ids[1..].to_vec());
    }
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines.next_line()?;
        let ids: Vec<usize> = fields(ln, l)?;
        if ids.len() != 3 {
            return parse_err(ln, "edge line needs 'a b t'");
        }
        let tag = u8::try_from(ids[2])
            .ok()
            .and_then(BoundaryTag::from_code)
            .map_or_else(|| parse_err(ln, format!("unknown edge tag {}", ids[2])), Ok)?;
        edges.push(Edge {
            vertices: [ids[0], ids[1]],
            cells: Vec::new(),
            tag,
        });
    }
    if let Ok((ln, _)) = lines.next_line() {
        return parse_err(ln, "trailing content after the edge list");
    }
    PolygonalMesh::new(vertices, cells, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cartesian, generate_hexagonal, generate_partitioned};

    #[test]
    fn round_trip_is_identity() {
        for mesh in [
            generate_cartesian(2).unwrap(),
            generate_hexagonal(5).unwrap(),
            generate_partitioned(2, 3).unwrap(),
        ] {
            let back = read_mesh_str(&write_mesh_string(&mesh)).unwrap();
            assert_eq!(back, mesh);
        }
    }

    #[test]
    fn missing_vertex_is_rejected() {
        let text = "vemmesh 1\n3 1 3\n0 0\n1 0\n0 1\n3 0 1 7\n0 1 1\n1 2 1\n2 0 1\n";
        assert!(matches!(read_mesh_str(text), Err(VemError::Validation(_))));
    }

    #[test]
    fn untagged_boundary_edge_is_rejected() {
        let text = "vemmesh 1\n3 1 3\n0 0\n1 0\n0 1\n3 0 1 2\n0 1 1\n1 2 0\n2 0 2\n";
        let err = read_mesh_str(text).unwrap_err();
        assert!(matches!(err, VemError::Validation(ref m) if m.contains("untagged")), "{err}");
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "vemmesh 1\n3 1 3\n0 0\n1 zero\n0 1\n3 0 1 2\n0 1 1\n1 2 1\n2 0 2\n";
        match read_mesh_str(text) {
            Err(VemError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_mesh_str("mesh 2\n"), Err(VemError::Parse { line: 1, .. })));
    }
}
