//! Local and global matrices of the semi-discrete system
//! `𝒜 ẋ = ℬ x + 𝒞(t)`, boundary data and essential constraints.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VemError};
use crate::linalg::{CsrMatrix, DirectSolver, TripletMatrix};
use crate::mesh::{BoundaryTag, PolygonalMesh};
use crate::polybase::{dim_p, edge_quadrature, PolyBasis};
use crate::vspace::{
    build_stress_cell_operators, reference_edge_gram, stress_edge_moments, CellFrame, DofLayout, FieldKind,
    StressCellOperators,
};
use crate::{Point, Tensor};

/// Lamé pairs of the three compartments and the density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialParams {
    /// Maxwell spring.
    pub mu0: f64,
    pub lambda0: f64,
    /// Maxwell dashpot.
    pub mu0p: f64,
    pub lambda0p: f64,
    /// Parallel spring.
    pub mu1: f64,
    pub lambda1: f64,
    pub rho: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            mu0: 3.0,
            lambda0: 2.0,
            mu0p: 4.0,
            lambda0p: 3.0,
            mu1: 4.0,
            lambda1: 5.0,
            rho: 1.0,
        }
    }
}

impl MaterialParams {
    /// Poisson ratios close to ½ in both springs.
    pub fn nearly_incompressible() -> Self {
        MaterialParams {
            mu0: 3.0,
            lambda0: 1.5e4,
            mu0p: 3.0,
            lambda0p: 1.5e4,
            mu1: 9.0,
            lambda1: 4.5e4,
            rho: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu0, self.lambda0, self.mu0p, self.lambda0p, self.mu1, self.lambda1, self.rho];
        if all.iter().any(|v| !v.is_finite()) {
            return invalid("material parameters must be finite");
        }
        if self.mu0 <= 0.0 || self.mu0p <= 0.0 || self.mu1 <= 0.0 {
            return invalid("all μ must be positive");
        }
        if self.lambda0 < 0.0 || self.lambda0p < 0.0 || self.lambda1 < 0.0 {
            return invalid("all λ must be non-negative");
        }
        if self.rho <= 0.0 {
            return invalid("ρ must be positive");
        }
        Ok(())
    }
}

/// `(1/2μ)(τ − λ/(2μ + 2λ) tr(τ) I)`.
pub fn compliance_action(mu: f64, lambda: f64, tau: &Tensor) -> Tensor {
    (tau - Tensor::identity() * (lambda / (2.0 * mu + 2.0 * lambda) * tau.trace())) / (2.0 * mu)
}

/// `W[(c,a),(d,b)] = ∫ 𝒜(m_a E_c) : m_b E_d` on tensor `P_k`.
pub fn compliance_weight(frame: &CellFrame, mu: f64, lambda: f64) -> DMatrix<f64> {
    let np = frame.basis.len();
    let mut w = frame.tensor_gram();
    let t = lambda / (2.0 * mu + 2.0 * lambda);
    for c in [0, 3] {
        for d in [0, 3] {
            for a in 0..np {
                for b in 0..np {
                    w[(c * np + a, d * np + b)] -= t * frame.gram[(a, b)];
                }
            }
        }
    }
    w / (2.0 * mu)
}

/// Consistency plus stabilization: `PI0ᵀ W PI0 + (1/2μ)(I − P)ᵀ S (I − P)`.
pub fn local_compliance_matrix(frame: &CellFrame, ops: &StressCellOperators, mu: f64, lambda: f64) -> DMatrix<f64> {
    let w = compliance_weight(frame, mu, lambda);
    let a = ops.pi0.transpose() * w * &ops.pi0 + ops.deflated_stabilization() / (2.0 * mu);
    (&a + a.transpose()) * 0.5
}

/// Cellwise coupling and mass blocks.
#[derive(Clone, Debug)]
pub struct LocalCouplings {
    /// `∫ div τ · w` for the vector `P_k` basis `w` (rows) and local stress
    /// DoFs (columns).
    pub div: DMatrix<f64>,
    /// `∫ Π⁰ₖτ : m_b J` for the rotation basis (rows).
    pub skew: DMatrix<f64>,
    /// `ρ ∫ w · w'`.
    pub mass: DMatrix<f64>,
}

pub fn local_couplings(frame: &CellFrame, ops: &StressCellOperators, rho: f64) -> LocalCouplings {
    let np = frame.basis.len();
    // ∫ m_a E_c : m_b J, J = [[0, 1], [−1, 0]]
    let mut x = DMatrix::zeros(4 * np, np);
    for a in 0..np {
        for b in 0..np {
            x[(np + a, b)] = frame.gram[(a, b)];
            x[(2 * np + a, b)] = -frame.gram[(a, b)];
        }
    }
    LocalCouplings {
        div: ops.div_moments.clone(),
        skew: x.transpose() * &ops.pi0,
        mass: frame.vector_gram() * rho,
    }
}

/// Mesh, layout and per-cell operators shared by assembly, time stepping
/// and error evaluation.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: PolygonalMesh,
    pub layout: DofLayout,
    pub frames: Vec<CellFrame>,
    pub ops: Vec<StressCellOperators>,
}

impl Discretization {
    pub fn new(mesh: PolygonalMesh, k: usize) -> Result<Self> {
        let layout = DofLayout::new(&mesh, k)?;
        let built: Vec<(CellFrame, StressCellOperators)> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let f = CellFrame::new(&mesh, c, k)?;
                let o = build_stress_cell_operators(&f)?;
                Ok((f, o))
            })
            .collect::<Result<_>>()?;
        let (frames, ops) = built.into_iter().unzip();
        Ok(Discretization {
            mesh,
            layout,
            frames,
            ops,
        })
    }

    pub fn k(&self) -> usize {
        self.layout.degree()
    }

    /// Global indices and signs of a cell's local DoFs of a stress field.
    fn stress_rows(&self, cell: usize, kind: FieldKind) -> (Vec<usize>, Vec<f64>) {
        let (idx, sign) = self.layout.cell_stress_map(&self.mesh, cell);
        let off = self.layout.offset(kind);
        (idx.into_iter().map(|i| i + off).collect(), sign)
    }

    fn velocity_rows(&self, cell: usize) -> Vec<usize> {
        let o = self.layout.offset(FieldKind::Velocity) + cell * self.layout.velocity_per_cell();
        (o..o + self.layout.velocity_per_cell()).collect()
    }

    fn rotation_rows(&self, cell: usize) -> Vec<usize> {
        let o = self.layout.offset(FieldKind::Rotation) + cell * self.layout.rotation_per_cell();
        (o..o + self.layout.rotation_per_cell()).collect()
    }
}

/// The block operators `𝒜` and `ℬ` and the constrained (Γᶿ) indices.
#[derive(Clone, Debug)]
pub struct BlockOperators {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    /// Global indices of Γᶿ edge DoFs of both stress fields, sorted.
    pub constrained: Vec<usize>,
}

fn sign_scale(m: &DMatrix<f64>, rows: Option<&[f64]>, cols: Option<&[f64]>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[(i, j)] * rows.map_or(1.0, |r| r[i]) * cols.map_or(1.0, |c| c[j])
    })
}

fn scatter(t: &mut TripletMatrix, rows: &[usize], cols: &[usize], m: &DMatrix<f64>) {
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            t.push(r, c, m[(a, b)]);
        }
    }
}

struct CellBlocks {
    a0: DMatrix<f64>,
    a1: DMatrix<f64>,
    a0p: DMatrix<f64>,
    couplings: LocalCouplings,
}

/// Assembles `𝒜` and `ℬ`. Local matrices are computed in parallel and
/// scattered in cell order, so the result does not depend on the thread
/// count.
pub fn assemble_global(disc: &Discretization, params: &MaterialParams) -> Result<BlockOperators> {
    params.validate()?;
    let order: Vec<usize> = (0..disc.mesh.num_cells()).collect();
    assemble_in_order(disc, params, &order)
}

/// Same as [`assemble_global`] with an explicit cell visiting order.
pub fn assemble_in_order(disc: &Discretization, params: &MaterialParams, order: &[usize]) -> Result<BlockOperators> {
    let n = disc.layout.total();
    let blocks: Vec<CellBlocks> = order
        .par_iter()
        .map(|&c| {
            let (f, o) = (&disc.frames[c], &disc.ops[c]);
            CellBlocks {
                a0: local_compliance_matrix(f, o, params.mu0, params.lambda0),
                a1: local_compliance_matrix(f, o, params.mu1, params.lambda1),
                a0p: local_compliance_matrix(f, o, params.mu0p, params.lambda0p),
                couplings: local_couplings(f, o, params.rho),
            }
        })
        .collect();
    let mut ta = TripletMatrix::new(n, n);
    let mut tb = TripletMatrix::new(n, n);
    for (&c, blk) in order.iter().zip(&blocks) {
        let (s0, sign) = disc.stress_rows(c, FieldKind::Stress0);
        let (s1, _) = disc.stress_rows(c, FieldKind::Stress1);
        let v = disc.velocity_rows(c);
        let r = disc.rotation_rows(c);
        let a0 = sign_scale(&blk.a0, Some(&sign), Some(&sign));
        let a1 = sign_scale(&blk.a1, Some(&sign), Some(&sign));
        let a0p = sign_scale(&blk.a0p, Some(&sign), Some(&sign));
        let j = sign_scale(&blk.couplings.div, None, Some(&sign));
        let h = sign_scale(&blk.couplings.skew, None, Some(&sign));
        let jt = -j.transpose();
        let ht = h.transpose();
        scatter(&mut ta, &s0, &s0, &a0);
        scatter(&mut ta, &s1, &s1, &a1);
        scatter(&mut ta, &v, &v, &blk.couplings.mass);
        for s in [&s0, &s1] {
            scatter(&mut ta, &r, s, &h);
            scatter(&mut ta, s, &r, &ht);
            scatter(&mut tb, &v, s, &j);
            scatter(&mut tb, s, &v, &jt);
        }
        scatter(&mut tb, &s0, &s0, &(-a0p));
    }
    let a = ta.to_csr();
    let b = tb.to_csr();
    if a.nrows() != n || b.nrows() != n {
        return Err(VemError::Validation("assembled operator has the wrong size".into()));
    }
    Ok(BlockOperators {
        a,
        b,
        constrained: disc.layout.constrained_global(&disc.mesh),
    })
}

/// `𝒞(t)`: `∫ ρ f · w` in the velocity rows and `⟨τn, v_D⟩` over Γᵘ edges
/// in the rows of both stress fields.
pub fn assemble_rhs<F, G>(disc: &Discretization, params: &MaterialParams, f: &F, v_d: &G, t: f64) -> Vec<f64>
where
    F: Fn(Point, f64) -> Point + Sync,
    G: Fn(Point, f64) -> Point + Sync,
{
    let layout = &disc.layout;
    let k = disc.k();
    let np = dim_p(k);
    let mut rhs = vec![0.0; layout.total()];
    let cell_loads: Vec<Vec<f64>> = disc
        .frames
        .par_iter()
        .map(|fr| {
            let mut out = vec![0.0; 2 * np];
            let mut m = vec![0.0; np];
            for (&x, &w) in fr.rule.points.iter().zip(&fr.rule.weights) {
                let fx = f(x, t) * (params.rho * w);
                fr.basis.eval_into(x, &mut m);
                for a in 0..np {
                    out[a] += fx.x * m[a];
                    out[np + a] += fx.y * m[a];
                }
            }
            out
        })
        .collect();
    let vo = layout.offset(FieldKind::Velocity);
    for (c, load) in cell_loads.iter().enumerate() {
        let o = vo + c * layout.velocity_per_cell();
        rhs[o..o + load.len()].copy_from_slice(load);
    }
    let ghat_inv = reference_edge_gram(k).try_inverse().expect("reference edge Gram is invertible");
    let mesh = &disc.mesh;
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.tag != BoundaryTag::GammaU {
            continue;
        }
        let cell = edge.cells[0];
        let sign = mesh.cell_edges(cell).iter().find(|ce| ce.edge == e).expect("edge belongs to its cell").sign();
        let (a, b) = mesh.edge_points(e);
        let rule = edge_quadrature(a, b, 2 * k + 2);
        let basis = crate::polybase::ScaledMonomialBasis1D::on_segment(k, a, b);
        let mut mom = [DVector::zeros(k + 1), DVector::zeros(k + 1)];
        let mut q = vec![0.0; k + 1];
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let g = v_d(x, t);
            basis.eval_into(x, &mut q);
            for beta in 0..=k {
                mom[0][beta] += w * g.x * q[beta];
                mom[1][beta] += w * g.y * q[beta];
            }
        }
        for i in 0..2 {
            // ∫_F (τn)_i g_i with (τn)_i = Σ_γ (Ĝ⁻¹ d_i)_γ q_γ
            let coeff = &ghat_inv * &mom[i] * sign;
            for kind in [FieldKind::Stress0, FieldKind::Stress1] {
                for beta in 0..=k {
                    rhs[layout.offset(kind) + layout.stress_edge_dof(e, i, beta)] += coeff[beta];
                }
            }
        }
    }
    rhs
}

/// Values of the constrained DoFs (`BlockOperators::constrained` order):
/// edge moments of the given stresses against the global edge normals.
pub fn constraint_values<S0, S1>(disc: &Discretization, sigma0: &S0, sigma1: &S1) -> Vec<f64>
where
    S0: Fn(Point) -> Tensor + Sync,
    S1: Fn(Point) -> Tensor + Sync,
{
    let layout = &disc.layout;
    let k = disc.k();
    let ne = layout.edge_dofs();
    let edges: Vec<usize> = disc
        .mesh
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.tag == BoundaryTag::GammaSigma)
        .map(|(i, _)| i)
        .collect();
    let mut out = vec![0.0; 2 * edges.len() * ne];
    let half = edges.len() * ne;
    for (j, &e) in edges.iter().enumerate() {
        let (a, b) = disc.mesh.edge_points(e);
        let t = b - a;
        let n = Point::new(t.y, -t.x) / t.norm();
        out[j * ne..(j + 1) * ne].copy_from_slice(&stress_edge_moments(a, b, n, k, sigma0));
        out[half + j * ne..half + (j + 1) * ne].copy_from_slice(&stress_edge_moments(a, b, n, k, sigma1));
    }
    out
}

/// System restricted to the free unknowns.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
    pub values: Vec<f64>,
}

impl ReducedSystem {
    /// Full vector from the free solution and the prescribed values.
    pub fn expand(&self, x_free: &[f64]) -> Vec<f64> {
        let n = self.free.len() + self.constrained.len();
        let mut x = vec![0.0; n];
        for (&i, &v) in self.free.iter().zip(x_free) {
            x[i] = v;
        }
        for (&i, &v) in self.constrained.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }
}

/// Free indices (complement of `constrained`) in increasing order.
pub fn free_indices(n: usize, constrained: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &c in constrained {
        mask[c] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

/// Eliminates the constrained unknowns: keeps the free rows and columns and
/// moves `K_fc · values` to the right-hand side.
pub fn apply_essential_bc(matrix: &CsrMatrix, rhs: &[f64], constrained: &[usize], values: &[f64]) -> Result<ReducedSystem> {
    if constrained.len() != values.len() {
        return invalid(format!(
            "{} constrained indices but {} values",
            constrained.len(),
            values.len()
        ));
    }
    let n = matrix.nrows();
    if rhs.len() != n || constrained.iter().any(|&c| c >= n) {
        return invalid("constraint data does not match the system size");
    }
    let free = free_indices(n, constrained);
    let kff = matrix.extract(&free, &free);
    let kfc = matrix.extract(&free, constrained);
    let lift = kfc.matvec(values);
    let r = free.iter().zip(&lift).map(|(&i, l)| rhs[i] - l).collect();
    Ok(ReducedSystem {
        matrix: kff,
        rhs: r,
        free,
        constrained: constrained.to_vec(),
        values: values.to_vec(),
    })
}

pub fn factorize(matrix: &CsrMatrix) -> Result<DirectSolver> {
    DirectSolver::factorize(matrix)
}

pub fn solve(handle: &DirectSolver, b: &[f64]) -> Result<Vec<f64>> {
    handle.solve(b)
}
