use nalgebra::DMatrix;

use crate::error::{Result, VemError};

use super::{dim_p, exponent_index, exponents};

/// Coefficients of `h_K ∇(m_α e_i)` in the tensor `P_space` coordinates,
/// for every row `i` and every non-constant `α` with `|α| ≤ alpha_degree`.
/// Columns are ordered by `i` and then by `α`. The coefficients are integers
/// and do not depend on the cell.
pub fn scaled_gradient_coeffs(alpha_degree: usize, space_degree: usize) -> DMatrix<f64> {
    assert!(alpha_degree <= space_degree + 1);
    let n = dim_p(space_degree);
    let exps = exponents(alpha_degree);
    let per_row = exps.len() - 1;
    let mut c = DMatrix::zeros(4 * n, 2 * per_row);
    for i in 0..2 {
        for (a, &[e1, e2]) in exps.iter().enumerate().skip(1) {
            let col = i * per_row + a - 1;
            if e1 > 0 {
                c[((2 * i) * n + exponent_index([e1 - 1, e2]), col)] = e1 as f64;
            }
            if e2 > 0 {
                c[((2 * i + 1) * n + exponent_index([e1, e2 - 1]), col)] = e2 as f64;
            }
        }
    }
    c
}

/// Tensor polynomial spaces used by the stress degrees of freedom, all
/// expressed in `P_k` tensor coordinates.
#[derive(Clone, Debug)]
pub struct GradientSplitBases {
    pub degree: usize,
    /// `h_K ∇(P_k)²`, the gradients of degree ≤ k − 1.
    pub g_lower: DMatrix<f64>,
    /// `h_K ∇(P_{k+1})²`, the gradients of degree ≤ k.
    pub g_full: DMatrix<f64>,
    /// Basis of the complement of `g_full`, orthonormal in the scaled
    /// product `(1/|K|) ∫ σ : τ`.
    pub g_perp: DMatrix<f64>,
}

impl GradientSplitBases {
    /// `[g_full | g_perp]`, a square basis of the tensor `P_k`.
    pub fn full_basis(&self) -> DMatrix<f64> {
        let (n, a, b) = (self.g_full.nrows(), self.g_full.ncols(), self.g_perp.ncols());
        let mut q = DMatrix::zeros(n, a + b);
        q.columns_mut(0, a).copy_from(&self.g_full);
        q.columns_mut(a, b).copy_from(&self.g_perp);
        q
    }
}

/// Builds the split for degree `k` from the tensor mass matrix
/// `tensor_gram` (`∫ m_a m_b` repeated over the four entries) and the cell
/// area.
pub fn build_gradient_split(k: usize, tensor_gram: &DMatrix<f64>, area: f64) -> Result<GradientSplitBases> {
    let nt = 4 * dim_p(k);
    if tensor_gram.nrows() != nt || tensor_gram.ncols() != nt {
        return Err(VemError::InvalidArgument(format!(
            "tensor Gram matrix is {}x{}, expected {nt}x{nt}",
            tensor_gram.nrows(),
            tensor_gram.ncols()
        )));
    }
    let g_lower = scaled_gradient_coeffs(k, k);
    let g_full = scaled_gradient_coeffs(k + 1, k);
    let m = tensor_gram / area;
    let cmc = g_full.transpose() * &m * &g_full;
    let chol = cmc
        .cholesky()
        .ok_or_else(|| VemError::NumericalDegeneracy("gradient Gram matrix is not positive definite".into()))?;
    // M-orthogonal projector onto the complement of the gradients
    let proj = DMatrix::identity(nt, nt) - &g_full * chol.solve(&(g_full.transpose() * &m));
    let pmp = proj.transpose() * &m * &proj;
    let pmp = (&pmp + pmp.transpose()) * 0.5;
    let eig = pmp.symmetric_eigen();
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let dim = k * (k + 1);
    let top = eig.eigenvalues[order[0]];
    let kept = eig.eigenvalues[order[dim - 1]];
    let next = if dim < nt { eig.eigenvalues[order[dim]] } else { 0.0 };
    if kept <= 1e-10 * top || next.abs() > 1e-8 * top {
        return Err(VemError::NumericalDegeneracy(format!(
            "complement of the gradients has unexpected rank (kept {kept:e}, next {next:e}, top {top:e})"
        )));
    }
    let mut g_perp = DMatrix::zeros(nt, dim);
    for (c, &j) in order[..dim].iter().enumerate() {
        let v = &proj * eig.eigenvectors.column(j);
        g_perp.set_column(c, &(v / eig.eigenvalues[j].sqrt()));
    }
    Ok(GradientSplitBases {
        degree: k,
        g_lower,
        g_full,
        g_perp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{polygon_area, polygon_centroid, polygon_diameter};
    use crate::polybase::{block_diag, cell_quadrature, gram_matrix, PolyBasis, ScaledMonomialBasis2D};
    use crate::Point;

    fn pentagon() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(0.1, -0.02),
            Point::new(0.16, 0.06),
            Point::new(0.09, 0.13),
            Point::new(-0.01, 0.08),
        ]
    }

    fn split_for(pts: &[Point], k: usize) -> (GradientSplitBases, DMatrix<f64>, f64) {
        let rule = cell_quadrature(pts, 2 * k + 2).unwrap();
        let b = ScaledMonomialBasis2D::new(k, polygon_centroid(pts), polygon_diameter(pts));
        let g = block_diag(&gram_matrix(&b, &b, &rule).unwrap(), 4);
        let area = polygon_area(pts);
        (build_gradient_split(k, &g, area).unwrap(), g, area)
    }

    #[test]
    fn dimensions() {
        for (k, lower, full, perp) in [(1, 4, 10, 2), (2, 10, 18, 6), (3, 18, 28, 12)] {
            let (s, _, _) = split_for(&pentagon(), k);
            assert_eq!(s.g_lower.ncols(), lower);
            assert_eq!(s.g_full.ncols(), full);
            assert_eq!(s.g_perp.ncols(), perp);
            assert_eq!(s.full_basis().ncols(), 4 * dim_p(k));
        }
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal_to_gradients() {
        for k in 1..=3 {
            let (s, g, area) = split_for(&pentagon(), k);
            let m = g / area;
            let pp = s.g_perp.transpose() * &m * &s.g_perp;
            assert!((pp - DMatrix::identity(k * (k + 1), k * (k + 1))).abs().max() < 1e-9);
            let pc = s.g_perp.transpose() * &m * &s.g_full;
            assert!(pc.abs().max() < 1e-9, "k={k}: {}", pc.abs().max());
            assert_eq!(s.full_basis().rank(1e-10), 4 * dim_p(k));
        }
    }

    #[test]
    fn coefficients_match_pointwise_gradients() {
        let k = 2;
        let pts = pentagon();
        let hk = polygon_diameter(&pts);
        let small = ScaledMonomialBasis2D::new(k, polygon_centroid(&pts), hk);
        let big = ScaledMonomialBasis2D::new(k + 1, polygon_centroid(&pts), hk);
        let c = scaled_gradient_coeffs(k + 1, k);
        let n = small.len();
        let x = Point::new(0.05, 0.04);
        let m = small.eval(x);
        let grads = big.gradients(x);
        let per_row = big.len() - 1;
        for i in 0..2 {
            for a in 1..big.len() {
                let col = c.column(i * per_row + a - 1);
                for r in 0..2 {
                    for j in 0..2 {
                        let v: f64 = (0..n).map(|b| col[(2 * r + j) * n + b] * m[b]).sum();
                        let expected = if r == i { hk * grads[a][j] } else { 0.0 };
                        assert!((v - expected).abs() < 1e-12, "i={i} a={a} r={r} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn lower_gradients_are_a_subset() {
        let lower = scaled_gradient_coeffs(2, 2);
        let full = scaled_gradient_coeffs(3, 2);
        // (i, α) columns of the lower set appear in the full set with the
        // same α index
        for i in 0..2 {
            for a in 0..5 {
                assert_eq!(lower.column(i * 5 + a), full.column(i * 9 + a));
            }
        }
    }
}
