//! Scaled monomial bases, quadrature, Gram matrices and the split of
//! tensor-valued polynomials into gradients and their L² complement.
//!
//! Coordinate conventions used by the rest of the crate:
//!
//! * scalar `P_α`: monomials `ξ^β`, `ξ = (x − x_K)/h_K`, ordered by total
//!   degree and then by decreasing power of `ξ₁`;
//! * vector `P_α`: component-major, index `i·n + a`;
//! * tensor `P_α`: entry-major with entry `(i, j)` at `2i + j`, index
//!   `(2i + j)·n + a`, where `n` is the scalar dimension.

mod quadrature;
mod split;

pub use quadrature::{cell_quadrature, ear_clip, edge_quadrature, fan_quadrature, gauss_legendre, triangle_rule, QuadratureRule};
pub use split::{build_gradient_split, scaled_gradient_coeffs, GradientSplitBases};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::Point;

/// Number of scalar monomials of total degree ≤ `degree`.
pub fn dim_p(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponents `(β₁, β₂)` of the monomials of total degree ≤ `degree`.
pub fn exponents(degree: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::with_capacity(dim_p(degree));
    for d in 0..=degree {
        for b2 in 0..=d {
            out.push([d - b2, b2]);
        }
    }
    out
}

/// Position of an exponent pair in the [`exponents`] ordering.
pub fn exponent_index(e: [usize; 2]) -> usize {
    let d = e[0] + e[1];
    dim_p(d) - (d + 1) + e[1]
}

/// Something that can be evaluated at a point as a list of scalar functions.
pub trait PolyBasis {
    fn degree(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn eval_into(&self, x: Point, out: &mut [f64]);
    fn eval(&self, x: Point) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.eval_into(x, &mut v);
        v
    }
}

/// `((x − x_K)/h_K)^β`, `|β| ≤ degree`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMonomialBasis2D {
    degree: usize,
    center: Point,
    h: f64,
    exps: Vec<[usize; 2]>,
}

impl ScaledMonomialBasis2D {
    pub fn new(degree: usize, center: Point, h: f64) -> Self {
        ScaledMonomialBasis2D {
            degree,
            center,
            h,
            exps: exponents(degree),
        }
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn exponents(&self) -> &[[usize; 2]] {
        &self.exps
    }

    pub fn scaled(&self, x: Point) -> Point {
        (x - self.center) / self.h
    }

    /// Physical gradients of every monomial.
    pub fn gradients(&self, x: Point) -> Vec<[f64; 2]> {
        let xi = self.scaled(x);
        let pw = powers(xi, self.degree);
        self.exps
            .iter()
            .map(|&[a, b]| {
                let dx = if a > 0 { a as f64 * pw[0][a - 1] * pw[1][b] } else { 0.0 };
                let dy = if b > 0 { b as f64 * pw[0][a] * pw[1][b - 1] } else { 0.0 };
                [dx / self.h, dy / self.h]
            })
            .collect()
    }
}

fn powers(xi: Point, degree: usize) -> [Vec<f64>; 2] {
    let mut px = vec![1.0; degree + 1];
    let mut py = vec![1.0; degree + 1];
    for d in 1..=degree {
        px[d] = px[d - 1] * xi.x;
        py[d] = py[d - 1] * xi.y;
    }
    [px, py]
}

impl PolyBasis for ScaledMonomialBasis2D {
    fn degree(&self) -> usize {
        self.degree
    }

    fn len(&self) -> usize {
        self.exps.len()
    }

    fn eval_into(&self, x: Point, out: &mut [f64]) {
        let pw = powers(self.scaled(x), self.degree);
        for (o, &[a, b]) in out.iter_mut().zip(&self.exps) {
            *o = pw[0][a] * pw[1][b];
        }
    }
}

/// `(((x − x_F)·t)/h_F)^β`, `0 ≤ β ≤ degree`, along an edge with unit
/// tangent `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMonomialBasis1D {
    degree: usize,
    midpoint: Point,
    tangent: Point,
    h: f64,
}

impl ScaledMonomialBasis1D {
    /// Basis on the segment `a → b`; the parameter increases from `a` to `b`.
    pub fn on_segment(degree: usize, a: Point, b: Point) -> Self {
        let h = (b - a).norm();
        ScaledMonomialBasis1D {
            degree,
            midpoint: (a + b) * 0.5,
            tangent: (b - a) / h,
            h,
        }
    }

    pub fn length(&self) -> f64 {
        self.h
    }
}

impl PolyBasis for ScaledMonomialBasis1D {
    fn degree(&self) -> usize {
        self.degree
    }

    fn len(&self) -> usize {
        self.degree + 1
    }

    fn eval_into(&self, x: Point, out: &mut [f64]) {
        let s = (x - self.midpoint).dot(&self.tangent) / self.h;
        let mut v = 1.0;
        for o in out.iter_mut() {
            *o = v;
            v *= s;
        }
    }
}

/// `G[i, j] = ∫ a_i b_j` with the given rule.
pub fn gram_matrix(a: &impl PolyBasis, b: &impl PolyBasis, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    if rule.order < a.degree() + b.degree() {
        return invalid(format!(
            "quadrature order {} cannot integrate degree {}",
            rule.order,
            a.degree() + b.degree()
        ));
    }
    let mut g = DMatrix::zeros(a.len(), b.len());
    let mut va = vec![0.0; a.len()];
    let mut vb = vec![0.0; b.len()];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        a.eval_into(x, &mut va);
        b.eval_into(x, &mut vb);
        for i in 0..va.len() {
            let wa = w * va[i];
            for j in 0..vb.len() {
                g[(i, j)] += wa * vb[j];
            }
        }
    }
    Ok(g)
}

/// Block-diagonal repetition of a square matrix.
pub fn block_diag(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let n = block.nrows();
    let m = block.ncols();
    let mut out = DMatrix::zeros(n * copies, m * copies);
    for c in 0..copies {
        out.view_mut((c * n, c * m), (n, m)).copy_from(block);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::polygon_centroid;
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
    fn exponent_ordering() {
        assert_eq!(exponents(2), vec![[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]);
        for (i, &e) in exponents(5).iter().enumerate() {
            assert_eq!(exponent_index(e), i);
        }
        for d in 0..6 {
            assert_eq!(exponents(d).len(), dim_p(d));
        }
    }

    #[test]
    fn basis_cardinalities() {
        let b = ScaledMonomialBasis2D::new(3, Point::zeros(), 1.0);
        assert_eq!(b.len(), 10);
        let e = ScaledMonomialBasis1D::on_segment(3, Point::zeros(), Point::new(1.0, 0.0));
        assert_eq!(e.len(), 4);
        // non-constant monomials vanish at the centre
        let v = b.eval(Point::zeros());
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = ScaledMonomialBasis2D::new(3, Point::new(0.3, 0.2), 0.7);
        let x = Point::new(0.55, 0.1);
        let g = b.gradients(x);
        let eps = 1e-6;
        let fx = |dx: f64, dy: f64| b.eval(x + Point::new(dx, dy));
        let (px, mx, py, my) = (fx(eps, 0.0), fx(-eps, 0.0), fx(0.0, eps), fx(0.0, -eps));
        for i in 0..b.len() {
            assert_abs_diff_eq!(g[i][0], (px[i] - mx[i]) / (2.0 * eps), epsilon = 1e-7);
            assert_abs_diff_eq!(g[i][1], (py[i] - my[i]) / (2.0 * eps), epsilon = 1e-7);
        }
    }

    #[test]
    fn constant_gram_is_area() {
        let pts = unit_square();
        let rule = cell_quadrature(&pts, 4).unwrap();
        let b = ScaledMonomialBasis2D::new(0, polygon_centroid(&pts), 2f64.sqrt());
        let g = gram_matrix(&b, &b, &rule).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gram_is_symmetric_and_positive_definite() {
        let pts = unit_square();
        let rule = cell_quadrature(&pts, 4).unwrap();
        let b = ScaledMonomialBasis2D::new(2, polygon_centroid(&pts), 2f64.sqrt());
        let g = gram_matrix(&b, &b, &rule).unwrap();
        assert!((&g - g.transpose()).abs().max() <= 1e-15);
        let eig = g.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        assert!(min > 0.0, "min eigenvalue {min}");
    }

    #[test]
    fn gram_rejects_low_order_rule() {
        let pts = unit_square();
        let rule = cell_quadrature(&pts, 2).unwrap();
        let b = ScaledMonomialBasis2D::new(2, polygon_centroid(&pts), 1.0);
        assert!(gram_matrix(&b, &b, &rule).is_err());
    }

    #[test]
    fn monomials_stay_order_one() {
        // max |m| over the quadrature points never exceeds 4; it shrinks at
        // most geometrically with the degree
        let pentagon = vec![
            Point::new(0.0, 0.0),
            Point::new(0.1, -0.02),
            Point::new(0.16, 0.06),
            Point::new(0.09, 0.13),
            Point::new(-0.01, 0.08),
        ];
        let square: Vec<Point> = unit_square().iter().map(|p| p * 0.03 + Point::new(0.4, 0.7)).collect();
        for pts in [pentagon, square] {
            let rule = cell_quadrature(&pts, 6).unwrap();
            let hk = crate::mesh::polygon_diameter(&pts);
            let b = ScaledMonomialBasis2D::new(3, polygon_centroid(&pts), hk);
            for (j, e) in b.exponents().iter().enumerate().skip(1) {
                let mx = rule.points.iter().map(|&x| b.eval(x)[j].abs()).fold(0.0, f64::max);
                let lower = 0.1f64.powi((e[0] + e[1]) as i32);
                assert!(mx <= 4.0 && mx >= lower, "monomial {e:?}: {mx}");
            }
        }
    }
}
