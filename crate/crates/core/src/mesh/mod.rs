//! Polygonal meshes of planar domains.
//!
//! A mesh stores its vertices, counter-clockwise cell loops and the list of
//! edges. Every edge carries a fixed global orientation `a → b`; its global
//! unit normal is the clockwise rotation of the tangent `b − a`. For the cell
//! that traverses the edge in the same direction that normal is outward.

mod generate;
mod geometry;
mod io;

pub use generate::{generate_cartesian, generate_hexagonal, generate_partitioned};
pub use geometry::{cell_geometry, polygon_area, polygon_centroid, polygon_diameter, CellGeometry, EdgeGeometry};
pub use io::{read_mesh, read_mesh_str, write_mesh, write_mesh_string};

use std::collections::HashMap;

use crate::error::{Result, VemError};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    GammaU,
    GammaSigma,
}

impl BoundaryTag {
    pub fn code(self) -> u8 {
        match self {
            BoundaryTag::Interior => 0,
            BoundaryTag::GammaU => 1,
            BoundaryTag::GammaSigma => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BoundaryTag::Interior),
            1 => Some(BoundaryTag::GammaU),
            2 => Some(BoundaryTag::GammaSigma),
            _ => None,
        }
    }
}

/// Rule used to split the boundary into the velocity part Γᵘ and the
/// traction part Γᶿ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundarySplit {
    /// Γᶿ = {x = 0} ∪ {y = 0}, Γᵘ the rest of ∂(0,1)².
    #[default]
    Default,
    /// Γᵘ is the whole boundary, Γᶿ is empty.
    AllDirichlet,
}

impl BoundarySplit {
    pub fn tag(self, midpoint: Point) -> BoundaryTag {
        match self {
            BoundarySplit::AllDirichlet => BoundaryTag::GammaU,
            BoundarySplit::Default => {
                if midpoint.x.abs() < 1e-10 || midpoint.y.abs() < 1e-10 {
                    BoundaryTag::GammaSigma
                } else {
                    BoundaryTag::GammaU
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Adjacent cells, one for boundary edges and two for interior edges.
    pub cells: Vec<usize>,
    pub tag: BoundaryTag,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.len() == 1
    }
}

/// Local edge of a cell: the global edge id and whether the cell traverses
/// it along its global orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellEdge {
    pub edge: usize,
    pub aligned: bool,
}

impl CellEdge {
    /// +1 when the global edge normal is the outward normal of the cell.
    pub fn sign(&self) -> f64 {
        if self.aligned {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalMesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<CellEdge>>,
}

/// Summary of shape-regularity proxies.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshQualityReport {
    /// min over cells and their edges of h_F / h_K.
    pub min_edge_ratio: f64,
    /// min over cells of (distance from centroid to the closest edge line) / h_K.
    pub min_inradius_ratio: f64,
    pub max_vertices_per_cell: usize,
}

impl PolygonalMesh {
    /// Builds a mesh from vertices and counter-clockwise cell loops. Edges are
    /// numbered in order of first appearance; boundary edges are oriented
    /// outward and tagged with `split`.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<Vec<usize>>, split: BoundarySplit) -> Result<Self> {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            let m = cell.len();
            for i in 0..m {
                let (a, b) = (cell[i], cell[(i + 1) % m]);
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&e) => edges[e].cells.push(c),
                    None => {
                        lookup.insert(key, edges.len());
                        edges.push(Edge {
                            vertices: [a, b],
                            cells: vec![c],
                            tag: BoundaryTag::Interior,
                        });
                    }
                }
            }
        }
        for e in edges.iter_mut() {
            if e.cells.len() == 1 {
                let mid = (vertices[e.vertices[0]] + vertices[e.vertices[1]]) * 0.5;
                e.tag = split.tag(mid);
            }
        }
        Self::new(vertices, cells, edges)
    }

    /// Builds and validates a mesh from explicit edges. Adjacency lists of
    /// the supplied edges are recomputed from the cells.
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>, mut edges: Vec<Edge>) -> Result<Self> {
        let nv = vertices.len();
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(VemError::Validation(format!("cell {c} has fewer than 3 vertices")));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= nv) {
                return Err(VemError::Validation(format!("cell {c} references missing vertex {v}")));
            }
        }
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
        for (e, edge) in edges.iter_mut().enumerate() {
            let [a, b] = edge.vertices;
            if a >= nv || b >= nv || a == b {
                return Err(VemError::Validation(format!("edge {e} has invalid vertices {a} {b}")));
            }
            if lookup.insert((a.min(b), a.max(b)), e).is_some() {
                return Err(VemError::Validation(format!("edge {e} is duplicated")));
            }
            edge.cells.clear();
        }
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let m = cell.len();
            let mut local = Vec::with_capacity(m);
            for i in 0..m {
                let (a, b) = (cell[i], cell[(i + 1) % m]);
                let e = *lookup.get(&(a.min(b), a.max(b))).ok_or_else(|| {
                    VemError::Validation(format!("cell {c} uses edge ({a},{b}) missing from the edge list"))
                })?;
                edges[e].cells.push(c);
                local.push(CellEdge {
                    edge: e,
                    aligned: edges[e].vertices[0] == a,
                });
            }
            cell_edges.push(local);
        }
        for (e, edge) in edges.iter().enumerate() {
            match (edge.cells.len(), edge.tag) {
                (0, _) => return Err(VemError::Validation(format!("edge {e} belongs to no cell"))),
                (1, BoundaryTag::Interior) => {
                    return Err(VemError::Validation(format!("boundary edge {e} is untagged")))
                }
                (2, BoundaryTag::Interior) => {}
                (2, _) => return Err(VemError::Validation(format!("interior edge {e} carries a boundary tag"))),
                (1, _) => {}
                (n, _) => return Err(VemError::Validation(format!("edge {e} is shared by {n} cells"))),
            }
            if edge.cells.len() == 2 {
                let (c0, c1) = (edge.cells[0], edge.cells[1]);
                let a0 = cell_edges[c0].iter().find(|ce| ce.edge == e).map(|ce| ce.aligned);
                let a1 = cell_edges[c1].iter().find(|ce| ce.edge == e).map(|ce| ce.aligned);
                if a0 == a1 {
                    return Err(VemError::Validation(format!(
                        "cells {c0} and {c1} traverse edge {e} in the same direction"
                    )));
                }
            }
        }
        let mesh = PolygonalMesh {
            vertices,
            cells,
            edges,
            cell_edges,
        };
        for c in 0..mesh.num_cells() {
            let area = polygon_area(&mesh.cell_points(c));
            if area <= 1e-14 {
                return Err(VemError::Validation(format!(
                    "cell {c} is not counter-clockwise or is degenerate (area {area:e})"
                )));
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_edges(&self, cell: usize) -> &[CellEdge] {
        &self.cell_edges[cell]
    }

    pub fn cell_points(&self, cell: usize) -> Vec<Point> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn edge_points(&self, edge: usize) -> (Point, Point) {
        let [a, b] = self.edges[edge].vertices;
        (self.vertices[a], self.vertices[b])
    }

    /// Re-tags all boundary edges with a different split rule.
    pub fn retag(&mut self, split: BoundarySplit) {
        for e in 0..self.edges.len() {
            if self.edges[e].is_boundary() {
                let (a, b) = self.edge_points(e);
                self.edges[e].tag = split.tag((a + b) * 0.5);
            }
        }
    }

    pub fn with_split(mut self, split: BoundarySplit) -> Self {
        self.retag(split);
        self
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| polygon_area(&self.cell_points(c))).sum()
    }

    /// Largest cell diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| geometry::polygon_diameter(&self.cell_points(c)))
            .fold(0.0, f64::max)
    }

    /// Vertices at which some cell has a straight (180°) interior angle.
    pub fn hanging_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for cell in &self.cells {
            let m = cell.len();
            for i in 0..m {
                let p = self.vertices[cell[(i + m - 1) % m]];
                let q = self.vertices[cell[i]];
                let r = self.vertices[cell[(i + 1) % m]];
                let cross = (q - p).perp(&(r - q));
                let scale = (q - p).norm() * (r - q).norm();
                if cross.abs() <= 1e-10 * scale && (q - p).dot(&(r - q)) > 0.0 {
                    out.push(cell[i]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Index of the first cell containing `p` (boundary inclusive).
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.num_cells()).find(|&c| geometry::contains(&self.cell_points(c), p))
    }

    pub fn quality(&self) -> MeshQualityReport {
        let mut min_edge_ratio = f64::INFINITY;
        let mut min_inradius_ratio = f64::INFINITY;
        let mut max_vertices_per_cell = 0;
        for c in 0..self.num_cells() {
            let pts = self.cell_points(c);
            let hk = geometry::polygon_diameter(&pts);
            let xk = polygon_centroid(&pts);
            let m = pts.len();
            let mut inr = f64::INFINITY;
            for i in 0..m {
                let (a, b) = (pts[i], pts[(i + 1) % m]);
                let len = (b - a).norm();
                min_edge_ratio = min_edge_ratio.min(len / hk);
                inr = inr.min(((b - a).perp(&(xk - a)) / len).abs());
            }
            min_inradius_ratio = min_inradius_ratio.min(inr / hk);
            max_vertices_per_cell = max_vertices_per_cell.max(m);
        }
        MeshQualityReport {
            min_edge_ratio,
            min_inradius_ratio,
            max_vertices_per_cell,
        }
    }
}

/// A named mesh family member, with the mesh size convention used in
/// convergence tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshKind {
    Cartesian(usize),
    Hexagonal(usize),
    Partitioned(usize, usize),
}

impl MeshKind {
    pub fn generate(self) -> Result<PolygonalMesh> {
        match self {
            MeshKind::Cartesian(n) => generate_cartesian(n),
            MeshKind::Hexagonal(n) => generate_hexagonal(n),
            MeshKind::Partitioned(l, r) => generate_partitioned(l, r),
        }
    }

    /// Mesh size reported in convergence tables: the side 1/n for squares,
    /// the largest cell diameter otherwise.
    pub fn reported_h(self, mesh: &PolygonalMesh) -> f64 {
        match self {
            MeshKind::Cartesian(n) => 1.0 / n as f64,
            _ => mesh.max_diameter(),
        }
    }
}

impl std::fmt::Display for MeshKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshKind::Cartesian(n) => write!(f, "cartesian({n})"),
            MeshKind::Hexagonal(n) => write!(f, "hexagonal({n})"),
            MeshKind::Partitioned(l, r) => write!(f, "partitioned({l},{r})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_tags_follow_default_split() {
        let mesh = generate_cartesian(3).unwrap();
        for (e, edge) in mesh.edges().iter().enumerate() {
            let (a, b) = mesh.edge_points(e);
            let mid = (a + b) * 0.5;
            if !edge.is_boundary() {
                assert_eq!(edge.tag, BoundaryTag::Interior);
            } else if mid.x.abs() < 1e-12 || mid.y.abs() < 1e-12 {
                assert_eq!(edge.tag, BoundaryTag::GammaSigma);
            } else {
                assert_eq!(edge.tag, BoundaryTag::GammaU);
            }
        }
        let all = mesh.with_split(BoundarySplit::AllDirichlet);
        assert!(all.edges().iter().all(|e| e.tag != BoundaryTag::GammaSigma));
    }

    #[test]
    fn boundary_edges_are_oriented_outward() {
        let mesh = generate_hexagonal(3).unwrap();
        for c in 0..mesh.num_cells() {
            for ce in mesh.cell_edges(c) {
                if mesh.edges()[ce.edge].is_boundary() {
                    assert!(ce.aligned);
                }
            }
        }
    }

    #[test]
    fn rejects_clockwise_cell() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let err = PolygonalMesh::from_cells(v, vec![vec![0, 2, 1]], BoundarySplit::Default).unwrap_err();
        assert!(matches!(err, VemError::Validation(_)));
    }

    #[test]
    fn locate_finds_containing_cell() {
        let mesh = generate_cartesian(3).unwrap();
        let c = mesh.locate(Point::new(0.5, 0.5)).unwrap();
        assert_eq!(c, 4);
        assert!(mesh.locate(Point::new(1.5, 0.5)).is_none());
    }
}
