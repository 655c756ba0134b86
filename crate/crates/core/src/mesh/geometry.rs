use crate::error::{Result, VemError};
use crate::Point;

use super::PolygonalMesh;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeGeometry {
    pub length: f64,
    pub midpoint: Point,
    /// Outward unit normal with respect to the cell.
    pub normal: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: Point,
    pub diameter: f64,
    /// Local edges in loop order, edge `i` joining vertex `i` to `i + 1`.
    pub edges: Vec<EdgeGeometry>,
}

/// Signed shoelace area; positive for counter-clockwise loops.
pub fn polygon_area(pts: &[Point]) -> f64 {
    let m = pts.len();
    let mut s = 0.0;
    for i in 0..m {
        let (p, q) = (pts[i], pts[(i + 1) % m]);
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

/// Area centroid.
pub fn polygon_centroid(pts: &[Point]) -> Point {
    let m = pts.len();
    // shift to the first vertex to limit cancellation
    let o = pts[0];
    let mut a = 0.0;
    let mut c = Point::zeros();
    for i in 0..m {
        let (p, q) = (pts[i] - o, pts[(i + 1) % m] - o);
        let w = p.x * q.y - q.x * p.y;
        a += w;
        c += (p + q) * w;
    }
    o + c / (3.0 * a)
}

/// Largest vertex-to-vertex distance.
pub fn polygon_diameter(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Point-in-polygon test, boundary inclusive.
pub(crate) fn contains(pts: &[Point], p: Point) -> bool {
    let m = pts.len();
    let scale = polygon_diameter(pts);
    let mut inside = false;
    for i in 0..m {
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        let ab = b - a;
        let cross = ab.perp(&(p - a));
        let t = (p - a).dot(&ab) / ab.norm_squared();
        if cross.abs() <= 1e-12 * scale * ab.norm() && (-1e-12..=1.0 + 1e-12).contains(&t) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn cell_geometry(mesh: &PolygonalMesh, cell: usize) -> Result<CellGeometry> {
    let pts = mesh.cell_points(cell);
    let area = polygon_area(&pts);
    if area <= 1e-14 {
        return Err(VemError::DegenerateCell {
            cell,
            reason: format!("area {area:e}"),
        });
    }
    let m = pts.len();
    let edges = (0..m)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            let t = b - a;
            let length = t.norm();
            EdgeGeometry {
                length,
                midpoint: (a + b) * 0.5,
                normal: Point::new(t.y, -t.x) / length,
            }
        })
        .collect();
    Ok(CellGeometry {
        area,
        centroid: polygon_centroid(&pts),
        diameter: polygon_diameter(&pts),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cartesian, BoundarySplit};
    use approx::assert_abs_diff_eq;

    fn square(side: f64) -> PolygonalMesh {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(side, 0.0),
            Point::new(side, side),
            Point::new(0.0, side),
        ];
        PolygonalMesh::from_cells(v, vec![vec![0, 1, 2, 3]], BoundarySplit::Default).unwrap()
    }

    #[test]
    fn unit_square_geometry() {
        let g = cell_geometry(&square(1.0), 0).unwrap();
        assert_abs_diff_eq!(g.area, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.centroid.x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.centroid.y, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.diameter, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn half_square_geometry() {
        let g = cell_geometry(&square(0.5), 0).unwrap();
        assert_abs_diff_eq!(g.area, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(g.diameter, 2f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn regular_hexagon_area_matches_fan_quadrature() {
        let r = 0.7;
        let pts: Vec<Point> = (0..6)
            .map(|i| {
                let th = std::f64::consts::PI / 3.0 * i as f64 + 0.1;
                Point::new(1.0 + r * th.cos(), -2.0 + r * th.sin())
            })
            .collect();
        let v = pts.clone();
        let mesh = PolygonalMesh::from_cells(v, vec![(0..6).collect()], BoundarySplit::Default).unwrap();
        let g = cell_geometry(&mesh, 0).unwrap();
        // fan triangles from vertex 0, each integrating the constant 1 by its
        // cross-product area
        let fan: f64 = (1..5)
            .map(|i| 0.5 * (pts[i] - pts[0]).perp(&(pts[i + 1] - pts[0])))
            .sum();
        assert_abs_diff_eq!(g.area, fan, epsilon = 1e-14);
        assert_abs_diff_eq!(g.area, 1.5 * 3f64.sqrt() * r * r, epsilon = 1e-14);
        assert_abs_diff_eq!(g.centroid.x, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.centroid.y, -2.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_polygon_normals_sum_to_zero() {
        let mesh = generate_cartesian(3).unwrap();
        for c in 0..mesh.num_cells() {
            let g = cell_geometry(&mesh, c).unwrap();
            let s = g.edges.iter().fold(Point::zeros(), |s, e| s + e.normal * e.length);
            assert!(s.norm() < 1e-12);
            assert!(g.edges.iter().all(|e| e.length <= g.diameter));
        }
    }

    #[test]
    fn point_in_polygon() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        assert!(contains(&pts, Point::new(0.2, 0.2)));
        assert!(contains(&pts, Point::new(0.5, 0.5)));
        assert!(!contains(&pts, Point::new(0.6, 0.6)));
    }
}
