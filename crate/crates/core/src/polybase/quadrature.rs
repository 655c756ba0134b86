use crate::error::{Result, VemError};
use crate::mesh::{polygon_area, polygon_centroid};
use crate::Point;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub order: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    fn empty(order: usize) -> Self {
        QuadratureRule {
            points: Vec::new(),
            weights: Vec::new(),
            order,
        }
    }

    fn append(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    // P_n(z) and P_n'(z) by the three-term recurrence
    let legendre = |z: f64| {
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let (pn, pm) = if n == 1 { (z, 1.0) } else { (p1, p0) };
        (pn, n as f64 * (pm - z * pn) / (1.0 - z * z))
    };
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dp) = legendre(z);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule on the segment `a → b` exact to degree `order`.
pub fn edge_quadrature(a: Point, b: Point, order: usize) -> QuadratureRule {
    let n = (order + 2) / 2;
    let (x, w) = gauss_legendre(n.max(1));
    let len = (b - a).norm();
    QuadratureRule {
        points: x.iter().map(|&s| a + (b - a) * (0.5 * (s + 1.0))).collect(),
        weights: w.iter().map(|&wi| 0.5 * len * wi).collect(),
        order,
    }
}

/// Collapsed (Duffy) tensor Gauss rule on a triangle, exact to `order`.
pub fn triangle_rule(p0: Point, p1: Point, p2: Point, order: usize) -> QuadratureRule {
    let n = (order + 3) / 2;
    let (x, w) = gauss_legendre(n);
    let area2 = (p1 - p0).perp(&(p2 - p0));
    let mut rule = QuadratureRule::empty(order);
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            // (u, v) ∈ [0,1]² → barycentric (1 − u, u(1 − v), uv)
            let p = p0 + (p1 - p0) * (u * (1.0 - v)) + (p2 - p0) * (u * v);
            rule.points.push(p);
            rule.weights.push(0.25 * w[i] * w[j] * u * area2);
        }
    }
    rule
}

/// Triangle fan from the centroid, or `None` when some fan triangle is not
/// positively oriented (polygon not star-shaped from its centroid).
pub fn fan_quadrature(pts: &[Point], order: usize) -> Option<QuadratureRule> {
    let c = polygon_centroid(pts);
    let area = polygon_area(pts);
    let m = pts.len();
    let mut rule = QuadratureRule::empty(order);
    for i in 0..m {
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        let t = 0.5 * (a - c).perp(&(b - c));
        if t < -1e-12 * area {
            return None;
        }
        if t <= 1e-12 * area {
            continue;
        }
        rule.append(triangle_rule(c, a, b, order));
    }
    Some(rule)
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
pub fn ear_clip(pts: &[Point]) -> Option<Vec<[usize; 3]>> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::with_capacity(pts.len().saturating_sub(2));
    let scale = polygon_area(pts).abs();
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (pts[ia], pts[ib], pts[ic]);
            let cross = (b - a).perp(&(c - b));
            if cross <= 1e-14 * scale {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ia && j != ib && j != ic && inside_triangle(pts[j], a, b, c)
            });
            if !blocked {
                tris.push([ia, ib, ic]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // only straight-angle vertices left: drop one and continue
            let m = idx.len();
            let straight = (0..m).find(|&i| {
                let (a, b, c) = (pts[idx[(i + m - 1) % m]], pts[idx[i]], pts[idx[(i + 1) % m]]);
                (b - a).perp(&(c - b)).abs() <= 1e-14 * scale
            })?;
            idx.remove(straight);
        }
    }
    let (a, b, c) = (pts[idx[0]], pts[idx[1]], pts[idx[2]]);
    if (b - a).perp(&(c - a)) > 0.0 {
        tris.push([idx[0], idx[1], idx[2]]);
    }
    Some(tris)
}

fn inside_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let d1 = (b - a).perp(&(p - a));
    let d2 = (c - b).perp(&(p - b));
    let d3 = (a - c).perp(&(p - c));
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

/// Rule exact for bivariate polynomials of degree ≤ `order` on a simple
/// polygon: centroid fan, falling back to ear clipping.
pub fn cell_quadrature(pts: &[Point], order: usize) -> Result<QuadratureRule> {
    if polygon_area(pts) <= 1e-14 {
        return Err(VemError::DegenerateCell {
            cell: usize::MAX,
            reason: "non-positive area".into(),
        });
    }
    if let Some(rule) = fan_quadrature(pts, order) {
        return Ok(rule);
    }
    let tris = ear_clip(pts).ok_or_else(|| VemError::DegenerateCell {
        cell: usize::MAX,
        reason: "triangulation failed".into(),
    })?;
    let mut rule = QuadratureRule::empty(order);
    for [a, b, c] in tris {
        rule.append(triangle_rule(pts[a], pts[b], pts[c], order));
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for d in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert_abs_diff_eq!(q, exact, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn unit_square_integrals() {
        let rule = cell_quadrature(&unit_square(), 4).unwrap();
        assert_abs_diff_eq!(rule.integrate(|_| 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.integrate(|p| p.x - 0.5), 0.0, epsilon = 1e-15);
        // ∫∫ x²y² = (1/3)(1/3)
        assert_abs_diff_eq!(rule.integrate(|p| p.x * p.x * p.y * p.y), 1.0 / 9.0, epsilon = 1e-15);
        let s: f64 = rule.weights.iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn edge_integrals() {
        let a = Point::new(0.2, 0.1);
        let b = Point::new(0.2, 0.6);
        let rule = edge_quadrature(a, b, 3);
        assert_abs_diff_eq!(rule.integrate(|_| 1.0), 0.5, epsilon = 1e-15);
        let basis = crate::polybase::ScaledMonomialBasis1D::on_segment(1, a, b);
        use crate::polybase::PolyBasis;
        assert_abs_diff_eq!(rule.integrate(|p| basis.eval(p)[1]), 0.0, epsilon = 1e-16);
        let rule = edge_quadrature(Point::zeros(), Point::new(1.0, 0.0), 2);
        assert_abs_diff_eq!(rule.integrate(|p| p.x * p.x), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn ear_clipping_handles_non_convex_polygon() {
        // ∫xy = 2·0.5 over [0,2]×[0,1] plus 0.5·1.5 over [0,1]×[1,2]
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        let tris = ear_clip(&pts).unwrap();
        let area: f64 = tris
            .iter()
            .map(|&[a, b, c]| 0.5 * (pts[b] - pts[a]).perp(&(pts[c] - pts[a])))
            .sum();
        assert_abs_diff_eq!(area, 3.0, epsilon = 1e-14);
        let rule = cell_quadrature(&pts, 3).unwrap();
        assert_abs_diff_eq!(rule.integrate(|p| p.x * p.y), 1.75, epsilon = 1e-13);
    }

    #[test]
    fn centroid_outside_falls_back_to_ear_clipping() {
        // thin C-shape whose centroid lies outside
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(3.0, 0.2),
            Point::new(0.2, 0.2),
            Point::new(0.2, 2.8),
            Point::new(3.0, 2.8),
            Point::new(3.0, 3.0),
            Point::new(0.0, 3.0),
        ];
        assert!(fan_quadrature(&pts, 2).is_none());
        let rule = cell_quadrature(&pts, 2).unwrap();
        assert_abs_diff_eq!(rule.integrate(|_| 1.0), polygon_area(&pts), epsilon = 1e-13);
    }
}
