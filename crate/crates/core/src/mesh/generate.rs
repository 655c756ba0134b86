//! Deterministic mesh generators on the unit square.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::Point;

use super::geometry::{polygon_area, polygon_centroid};
use super::{BoundarySplit, PolygonalMesh};

/// `n × n` axis-aligned squares on (0,1)².
pub fn generate_cartesian(n: usize) -> Result<PolygonalMesh> {
    if n == 0 {
        return invalid("cartesian mesh needs n >= 1");
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 * h, j as f64 * h));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonalMesh::from_cells(vertices, cells, BoundarySplit::Default)
}

/// Regular hexagons with horizontal pitch `1/n`, clipped to the unit square.
///
/// Rows are horizontal with odd rows shifted by half a pitch; the bottom row
/// is centred on y = 0. Clipped pieces of (numerically) zero area are merged
/// into the neighbour sharing the longest boundary with them.
pub fn generate_hexagonal(n: usize) -> Result<PolygonalMesh> {
    if n < 2 {
        return invalid("hexagonal mesh needs n >= 2");
    }
    let pitch = 1.0 / n as f64;
    let r = pitch / 3f64.sqrt();
    let row_step = 1.5 * r;

    let mut polys: Vec<Vec<Point>> = Vec::new();
    let mut row = 0usize;
    while row as f64 * row_step - r < 1.0 {
        let cy = row as f64 * row_step;
        let centres: Vec<f64> = if row.is_multiple_of(2) {
            (0..=n).map(|i| i as f64 * pitch).collect()
        } else {
            (0..n).map(|i| (i as f64 + 0.5) * pitch).collect()
        };
        for cx in centres {
            let hex: Vec<Point> = (0..6)
                .map(|k| {
                    let th = (-90.0 + 60.0 * k as f64).to_radians();
                    Point::new(cx + r * th.cos(), cy + r * th.sin())
                })
                .collect();
            let clipped = clip_to_unit_square(&hex);
            if clipped.len() >= 3 && polygon_area(&clipped) > 1e-12 {
                polys.push(clipped);
            }
        }
        row += 1;
    }

    let mut pool = VertexPool::new(1e-10);
    let mut cells: Vec<Vec<usize>> = polys.iter().map(|p| pool.insert_loop(p)).collect();
    merge_small_cells(&pool.points, &mut cells, 1e-12);
    drop_private_collinear(&pool.points, &mut cells);
    let (vertices, cells) = compact(pool.points, cells);
    PolygonalMesh::from_cells(vertices, cells, BoundarySplit::Default)
}

/// Squares of side `1/(2·n_left)` on [0,½]×[0,1] and `1/(2·n_right)` on
/// [½,1]×[0,1]; interface vertices are merged and the coarser cells along
/// the interface carry hanging nodes.
pub fn generate_partitioned(n_left: usize, n_right: usize) -> Result<PolygonalMesh> {
    if n_left == 0 || n_right == 0 {
        return invalid("partitioned mesh needs positive sizes");
    }
    if n_left == n_right {
        return invalid("partitioned mesh needs n_left != n_right");
    }
    let mut pool = VertexPool::new(1e-10 * 2f64.sqrt());
    let mut cells = Vec::new();
    for (x0, n) in [(0.0, n_left), (0.5, n_right)] {
        let h = 1.0 / (2 * n) as f64;
        for j in 0..2 * n {
            for i in 0..n {
                let (x, y) = (x0 + i as f64 * h, j as f64 * h);
                let sq = [
                    Point::new(x, y),
                    Point::new(x + h, y),
                    Point::new(x + h, y + h),
                    Point::new(x, y + h),
                ];
                cells.push(pool.insert_loop(&sq));
            }
        }
    }
    insert_hanging_nodes(&pool, &mut cells);
    PolygonalMesh::from_cells(pool.points, cells, BoundarySplit::Default)
}

/// Vertex store that merges points closer than a tolerance.
struct VertexPool {
    points: Vec<Point>,
    tol: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl VertexPool {
    fn new(tol: f64) -> Self {
        VertexPool {
            points: Vec::new(),
            tol,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        let s = 1e3;
        ((p.x * s).floor() as i64, (p.y * s).floor() as i64)
    }

    fn find(&self, p: Point) -> Option<usize> {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if let Some(&i) = ids.iter().find(|&&i| (self.points[i] - p).norm() <= self.tol) {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, p: Point) -> usize {
        if let Some(i) = self.find(p) {
            return i;
        }
        let i = self.points.len();
        self.points.push(p);
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(i);
        i
    }

    fn insert_loop(&mut self, pts: &[Point]) -> Vec<usize> {
        let mut ids: Vec<usize> = Vec::with_capacity(pts.len());
        for &p in pts {
            let i = self.insert(p);
            if ids.last() != Some(&i) {
                ids.push(i);
            }
        }
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        ids
    }

    /// Vertices lying strictly inside the segment `a → b`, ordered from `a`.
    fn on_segment(&self, a: Point, b: Point) -> Vec<usize> {
        let ab = b - a;
        let len2 = ab.norm_squared();
        let mut hits: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| {
                let t = (p - a).dot(&ab) / len2;
                let dist = ab.perp(&(p - a)).abs() / len2.sqrt();
                (t > 1e-9 && t < 1.0 - 1e-9 && dist <= self.tol).then_some((t, i))
            })
            .collect();
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        hits.into_iter().map(|(_, i)| i).collect()
    }
}

fn insert_hanging_nodes(pool: &VertexPool, cells: &mut [Vec<usize>]) {
    for cell in cells.iter_mut() {
        let m = cell.len();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let (a, b) = (cell[i], cell[(i + 1) % m]);
            out.push(a);
            out.extend(pool.on_segment(pool.points[a], pool.points[b]));
        }
        *cell = out;
    }
}

/// Sutherland–Hodgman clipping against (0,1)².
fn clip_to_unit_square(poly: &[Point]) -> Vec<Point> {
    // each half-plane as (axis, bound, keep_below)
    let planes = [(0usize, 0.0, false), (0, 1.0, true), (1, 0.0, false), (1, 1.0, true)];
    let mut out: Vec<Point> = poly.to_vec();
    for (axis, bound, below) in planes {
        let inside = |p: &Point| {
            if below {
                p[axis] <= bound
            } else {
                p[axis] >= bound
            }
        };
        let input = std::mem::take(&mut out);
        let m = input.len();
        for i in 0..m {
            let (p, q) = (input[i], input[(i + 1) % m]);
            let (pin, qin) = (inside(&p), inside(&q));
            if pin {
                out.push(p);
            }
            if pin != qin {
                let t = (bound - p[axis]) / (q[axis] - p[axis]);
                let mut x = p + (q - p) * t;
                x[axis] = bound;
                out.push(x);
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

/// Repeatedly merges cells with area below `min_area` into the neighbour
/// sharing the longest boundary.
fn merge_small_cells(points: &[Point], cells: &mut Vec<Vec<usize>>, min_area: f64) {
    loop {
        let area = |c: &Vec<usize>| polygon_area(&c.iter().map(|&v| points[v]).collect::<Vec<_>>());
        let Some(small) = (0..cells.len())
            .filter(|&c| area(&cells[c]) < min_area)
            .min_by(|&a, &b| area(&cells[a]).total_cmp(&area(&cells[b])))
        else {
            return;
        };
        let mut best: Option<(f64, usize)> = None;
        for other in 0..cells.len() {
            if other == small {
                continue;
            }
            let shared = shared_length(points, &cells[small], &cells[other]);
            if shared > 0.0 && best.is_none_or(|(l, _)| shared > l + 1e-14) {
                best = Some((shared, other));
            }
        }
        let Some((_, other)) = best else {
            return;
        };
        let merged = merge_pair(&cells[other], &cells[small]);
        let (keep, drop) = (other.min(small), other.max(small));
        cells[keep] = merged;
        cells.remove(drop);
    }
}

fn directed_edges(cell: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let m = cell.len();
    (0..m).map(move |i| (cell[i], cell[(i + 1) % m]))
}

fn shared_length(points: &[Point], a: &[usize], b: &[usize]) -> f64 {
    directed_edges(a)
        .filter(|&(p, q)| directed_edges(b).any(|e| e == (q, p)))
        .map(|(p, q)| (points[q] - points[p]).norm())
        .sum()
}

/// Union of two counter-clockwise loops sharing one contiguous chain of
/// edges.
fn merge_pair(a: &[usize], b: &[usize]) -> Vec<usize> {
    let m = a.len();
    let shared: Vec<bool> = directed_edges(a)
        .map(|(p, q)| directed_edges(b).any(|e| e == (q, p)))
        .collect();
    let start = (0..m).find(|&i| shared[i] && !shared[(i + m - 1) % m]).unwrap_or(0);
    let mut end = start;
    while shared[(end + 1) % m] && (end + 1) % m != start {
        end = (end + 1) % m;
    }
    let s0 = a[start];
    let sm = a[(end + 1) % m];
    let mut out = Vec::new();
    // walk a from sm forward to s0
    let mut i = (end + 1) % m;
    loop {
        out.push(a[i]);
        if a[i] == s0 {
            break;
        }
        i = (i + 1) % m;
    }
    // then b from just after s0 up to just before sm
    let nb = b.len();
    let mut j = b.iter().position(|&v| v == s0).unwrap();
    loop {
        j = (j + 1) % nb;
        if b[j] == sm {
            break;
        }
        out.push(b[j]);
    }
    out
}

/// Removes straight-angle vertices that belong to a single cell (left over
/// by merging); they would only split an edge of that cell.
fn drop_private_collinear(points: &[Point], cells: &mut [Vec<usize>]) {
    let mut uses: HashMap<usize, usize> = HashMap::new();
    for c in cells.iter() {
        for &v in c {
            *uses.entry(v).or_default() += 1;
        }
    }
    for cell in cells.iter_mut() {
        let mut changed = true;
        while changed && cell.len() > 3 {
            changed = false;
            let m = cell.len();
            for i in 0..m {
                let (p, q, r) = (points[cell[(i + m - 1) % m]], points[cell[i]], points[cell[(i + 1) % m]]);
                let straight = (q - p).perp(&(r - q)).abs() <= 1e-12 && (q - p).dot(&(r - q)) > 0.0;
                if straight && uses[&cell[i]] == 1 {
                    cell.remove(i);
                    changed = true;
                    break;
                }
            }
        }
    }
}

/// Drops unused vertices and renumbers cells, ordering cells by centroid
/// (row-major) for a reproducible layout.
fn compact(points: Vec<Point>, mut cells: Vec<Vec<usize>>) -> (Vec<Point>, Vec<Vec<usize>>) {
    cells.sort_by(|a, b| {
        let ca = polygon_centroid(&a.iter().map(|&v| points[v]).collect::<Vec<_>>());
        let cb = polygon_centroid(&b.iter().map(|&v| points[v]).collect::<Vec<_>>());
        (ca.y, ca.x).partial_cmp(&(cb.y, cb.x)).unwrap()
    });
    let mut map = vec![usize::MAX; points.len()];
    let mut vertices = Vec::new();
    for cell in cells.iter_mut() {
        for v in cell.iter_mut() {
            if map[*v] == usize::MAX {
                map[*v] = vertices.len();
                vertices.push(points[*v]);
            }
            *v = map[*v];
        }
    }
    (vertices, cells)
}
