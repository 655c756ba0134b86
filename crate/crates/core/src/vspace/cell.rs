use nalgebra::DMatrix;

use crate::error::{Result, VemError};
use crate::mesh::{polygon_area, polygon_centroid, polygon_diameter, PolygonalMesh};
use crate::polybase::{
    block_diag, build_gradient_split, cell_quadrature, dim_p, edge_quadrature, gram_matrix, GradientSplitBases,
    PolyBasis, QuadratureRule, ScaledMonomialBasis1D, ScaledMonomialBasis2D,
};
use crate::Point;

#[derive(Clone, Debug)]
pub struct FrameEdge {
    pub edge: usize,
    /// +1 when the global edge normal points out of this cell.
    pub sign: f64,
    /// Endpoints in global edge orientation.
    pub a: Point,
    pub b: Point,
    pub length: f64,
    pub normal: Point,
    pub rule: QuadratureRule,
    /// `P_k(F)` in the global edge parameterization.
    pub basis: ScaledMonomialBasis1D,
}

/// Geometry, bases and Gram matrices of one cell.
#[derive(Clone, Debug)]
pub struct CellFrame {
    pub cell: usize,
    pub k: usize,
    pub area: f64,
    pub centroid: Point,
    pub h: f64,
    pub basis: ScaledMonomialBasis2D,
    pub basis_up: ScaledMonomialBasis2D,
    pub rule: QuadratureRule,
    /// `∫ m_a m_b`, `m ∈ P_k`.
    pub gram: DMatrix<f64>,
    /// `∫ m_a m_b`, `m_a ∈ P_k`, `m_b ∈ P_{k+1}`.
    pub gram_up: DMatrix<f64>,
    pub edges: Vec<FrameEdge>,
    pub split: GradientSplitBases,
}

impl CellFrame {
    pub fn new(mesh: &PolygonalMesh, cell: usize, k: usize) -> Result<Self> {
        Self::with_order(mesh, cell, k, 2 * k + 3)
    }

    pub fn with_order(mesh: &PolygonalMesh, cell: usize, k: usize, order: usize) -> Result<Self> {
        let pts = mesh.cell_points(cell);
        let degenerate = |reason: String| VemError::DegenerateCell { cell, reason };
        let area = polygon_area(&pts);
        if area <= 1e-14 {
            return Err(degenerate(format!("area {area:e}")));
        }
        let centroid = polygon_centroid(&pts);
        let h = polygon_diameter(&pts);
        let rule = cell_quadrature(&pts, order.max(2 * k + 1)).map_err(|e| degenerate(e.to_string()))?;
        let basis = ScaledMonomialBasis2D::new(k, centroid, h);
        let basis_up = ScaledMonomialBasis2D::new(k + 1, centroid, h);
        let gram = gram_matrix(&basis, &basis, &rule)?;
        let gram_up = gram_matrix(&basis, &basis_up, &rule)?;
        let edges = mesh
            .cell_edges(cell)
            .iter()
            .map(|ce| {
                let (a, b) = mesh.edge_points(ce.edge);
                let t = b - a;
                let length = t.norm();
                FrameEdge {
                    edge: ce.edge,
                    sign: ce.sign(),
                    a,
                    b,
                    length,
                    normal: Point::new(t.y, -t.x) * (ce.sign() / length),
                    rule: edge_quadrature(a, b, 2 * k + 2),
                    basis: ScaledMonomialBasis1D::on_segment(k, a, b),
                }
            })
            .collect();
        let split = build_gradient_split(k, &block_diag(&gram, 4), area).map_err(|e| match e {
            VemError::NumericalDegeneracy(m) => VemError::NumericalDegeneracy(format!("cell {cell}: {m}")),
            other => other,
        })?;
        Ok(CellFrame {
            cell,
            k,
            area,
            centroid,
            h,
            basis,
            basis_up,
            rule,
            gram,
            gram_up,
            edges,
            split,
        })
    }

    pub fn num_local_stress(&self) -> usize {
        self.edges.len() * 2 * (self.k + 1) + self.interior_dofs()
    }

    pub fn interior_dofs(&self) -> usize {
        self.split.g_lower.ncols() + self.split.g_perp.ncols()
    }

    /// First local interior DoF index.
    pub fn interior_start(&self) -> usize {
        self.edges.len() * 2 * (self.k + 1)
    }

    pub fn tensor_gram(&self) -> DMatrix<f64> {
        block_diag(&self.gram, 4)
    }

    pub fn vector_gram(&self) -> DMatrix<f64> {
        block_diag(&self.gram, 2)
    }

    /// `∫_F m q_γ` for the cell monomials `m` of `basis` and the edge
    /// monomials `q_γ` of local edge `e`.
    fn edge_cross_moments(&self, e: usize, basis: &ScaledMonomialBasis2D) -> DMatrix<f64> {
        let fe = &self.edges[e];
        let mut out = DMatrix::zeros(basis.len(), self.k + 1);
        let mut vm = vec![0.0; basis.len()];
        let mut vq = vec![0.0; self.k + 1];
        for (&x, &w) in fe.rule.points.iter().zip(&fe.rule.weights) {
            basis.eval_into(x, &mut vm);
            fe.basis.eval_into(x, &mut vq);
            for a in 0..vm.len() {
                for g in 0..vq.len() {
                    out[(a, g)] += w * vm[a] * vq[g];
                }
            }
        }
        out
    }
}

/// `Ĝ[β, γ] = ∫_{−1/2}^{1/2} s^{β+γ} ds`, the edge Gram matrix divided by
/// the edge length.
pub fn reference_edge_gram(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k + 1, k + 1, |b, g| {
        let n = b + g;
        if n % 2 == 1 {
            0.0
        } else {
            2.0 * 0.5f64.powi(n as i32 + 1) / (n as f64 + 1.0)
        }
    })
}

/// Computable operators of one cell, all acting on local stress DoFs.
#[derive(Clone, Debug)]
pub struct StressCellOperators {
    pub n_local: usize,
    /// Local DoFs → coefficients of `div τ` in vector `P_k`.
    pub div: DMatrix<f64>,
    /// `∫ (div τ)_i m_b`, i.e. the vector Gram matrix times `div`.
    pub div_moments: DMatrix<f64>,
    /// Local DoFs → coefficients of `Π⁰ₖτ` in tensor `P_k`.
    pub pi0: DMatrix<f64>,
    /// Tensor `P_k` coefficients → local DoF values.
    pub dof_of_poly: DMatrix<f64>,
    /// `dof_of_poly · pi0`.
    pub projector: DMatrix<f64>,
    pub stabilization: DMatrix<f64>,
}

impl StressCellOperators {
    /// `(I − P)ᵀ S (I − P)`.
    pub fn deflated_stabilization(&self) -> DMatrix<f64> {
        let r = DMatrix::identity(self.n_local, self.n_local) - &self.projector;
        r.transpose() * &self.stabilization * r
    }
}

/// `S = |K| I` on the local DoFs.
pub fn stabilization_matrix(frame: &CellFrame) -> DMatrix<f64> {
    let n = frame.num_local_stress();
    DMatrix::identity(n, n) * frame.area
}

pub fn build_stress_cell_operators(frame: &CellFrame) -> Result<StressCellOperators> {
    let k = frame.k;
    let np = dim_p(k);
    let np1 = dim_p(k + 1);
    let nt = 4 * np;
    let nloc = frame.num_local_stress();
    let ne = k + 1;
    let int0 = frame.interior_start();
    let n_lower = frame.split.g_lower.ncols();
    let degenerate = |what: &str| VemError::NumericalDegeneracy(format!("cell {}: singular {what}", frame.cell));

    let ghat_inv = reference_edge_gram(k)
        .try_inverse()
        .ok_or_else(|| degenerate("edge Gram matrix"))?;
    // ∫_F (τn)_i m for m ∈ P_{k+1}, per local edge, as a map from that
    // edge's k + 1 DoFs of component i
    let edge_maps: Vec<DMatrix<f64>> = (0..frame.edges.len())
        .map(|e| frame.edge_cross_moments(e, &frame.basis_up) * &ghat_inv)
        .collect();

    // ∫ (div τ)_i m_b = −(|K|/h) dof_G(i, b) + Σ_F ∫_F (τn)_i m_b
    let mut div_moments = DMatrix::zeros(2 * np, nloc);
    for i in 0..2 {
        for b in 0..np {
            let row = i * np + b;
            for (e, map) in edge_maps.iter().enumerate() {
                for beta in 0..ne {
                    div_moments[(row, e * 2 * ne + i * ne + beta)] = map[(b, beta)];
                }
            }
            if b > 0 {
                div_moments[(row, int0 + i * (np - 1) + b - 1)] -= frame.area / frame.h;
            }
        }
    }
    let gram_chol = frame.gram.clone().cholesky().ok_or_else(|| degenerate("scalar Gram matrix"))?;
    let mut div = DMatrix::zeros(2 * np, nloc);
    for i in 0..2 {
        let rows = div_moments.rows(i * np, np).into_owned();
        div.rows_mut(i * np, np).copy_from(&gram_chol.solve(&rows));
    }

    // L² projection of P_{k+1} onto P_k, so that ∫ (div τ)_i m_α is read off
    // the moments of div τ
    let proj_up = gram_chol.solve(&frame.gram_up);

    // moments of τ against [G_k | G_k^⊥]
    let n_full = frame.split.g_full.ncols();
    let per_row = np1 - 1;
    let mut moments = DMatrix::zeros(nt, nloc);
    for i in 0..2 {
        // ∫ (div τ)_i m_α for m_α ∈ P_{k+1}
        let vol = proj_up.transpose() * div_moments.rows(i * np, np);
        for a in 1..np1 {
            let row = i * per_row + a - 1;
            for c in 0..nloc {
                moments[(row, c)] = -frame.h * vol[(a, c)];
            }
            for (e, map) in edge_maps.iter().enumerate() {
                for beta in 0..ne {
                    moments[(row, e * 2 * ne + i * ne + beta)] += frame.h * map[(a, beta)];
                }
            }
        }
    }
    for j in 0..frame.split.g_perp.ncols() {
        moments[(n_full + j, int0 + n_lower + j)] = frame.area;
    }
    let mt = frame.tensor_gram();
    let qtm = frame.split.full_basis().transpose() * &mt;
    let lu = qtm.clone().lu();
    let mut pi0 = lu.solve(&moments).ok_or_else(|| degenerate("projection system"))?;
    // one step of iterative refinement
    let residual = &moments - &qtm * &pi0;
    pi0 += lu.solve(&residual).ok_or_else(|| degenerate("projection system"))?;

    // DoF values of the tensor monomials m_a E_c
    let mut dof_of_poly = DMatrix::zeros(nloc, nt);
    for (e, fe) in frame.edges.iter().enumerate() {
        let cross = frame.edge_cross_moments(e, &frame.basis);
        for c in 0..4 {
            let (i, j) = (c / 2, c % 2);
            for a in 0..np {
                for beta in 0..ne {
                    dof_of_poly[(e * 2 * ne + i * ne + beta, c * np + a)] = cross[(a, beta)] * fe.normal[j] / fe.length;
                }
            }
        }
    }
    let lower = frame.split.g_lower.transpose() * &mt / frame.area;
    let perp = frame.split.g_perp.transpose() * &mt / frame.area;
    dof_of_poly.rows_mut(int0, n_lower).copy_from(&lower);
    dof_of_poly.rows_mut(int0 + n_lower, perp.nrows()).copy_from(&perp);

    let projector = &dof_of_poly * &pi0;
    Ok(StressCellOperators {
        n_local: nloc,
        div,
        div_moments,
        pi0,
        dof_of_poly,
        projector,
        stabilization: stabilization_matrix(frame),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cartesian, generate_hexagonal, BoundarySplit};
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_edge_gram_values() {
        let g = reference_edge_gram(2);
        assert_abs_diff_eq!(g[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(1, 1)], 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(2, 2)], 1.0 / 80.0, epsilon = 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn projector_reproduces_polynomials_on_generated_meshes() {
        for mesh in [generate_cartesian(2).unwrap(), generate_hexagonal(3).unwrap()] {
            for k in 1..=3 {
                for c in 0..mesh.num_cells() {
                    let f = CellFrame::new(&mesh, c, k).unwrap();
                    let ops = build_stress_cell_operators(&f).unwrap();
                    let id = &ops.pi0 * &ops.dof_of_poly;
                    let err = (id - DMatrix::identity(4 * dim_p(k), 4 * dim_p(k))).abs().max();
                    assert!(err < 1e-11, "k={k} cell {c}: {err:e}");
                }
            }
        }
    }

    #[test]
    fn dof_of_poly_has_full_column_rank() {
        let mesh = generate_hexagonal(3).unwrap();
        for k in 1..=3 {
            let f = CellFrame::new(&mesh, 4, k).unwrap();
            let ops = build_stress_cell_operators(&f).unwrap();
            let sv = ops.dof_of_poly.clone().singular_values();
            assert!(sv.min() > 1e-10 * sv.max(), "k={k}");
        }
    }

    #[test]
    fn deflated_stabilization_is_psd_and_kills_polynomials() {
        let mesh = generate_hexagonal(3).unwrap().with_split(BoundarySplit::AllDirichlet);
        let f = CellFrame::new(&mesh, 2, 2).unwrap();
        let ops = build_stress_cell_operators(&f).unwrap();
        let s = ops.deflated_stabilization();
        assert!((&s - s.transpose()).abs().max() < 1e-12 * s.abs().max());
        let ev = s.clone().symmetric_eigen().eigenvalues;
        assert!(ev.min() >= -1e-12 * ev.max());
        let kill = &s * &ops.dof_of_poly;
        assert!(kill.abs().max() < 1e-10 * s.abs().max());
    }
}
