//! Discrete spaces: the virtual stress space (used twice), cellwise vector
//! polynomials for the velocity and skew tensor polynomials for the rotation.
//!
//! Stress degrees of freedom of one field, per cell in local order:
//!
//! * for every local edge `e`, component `i` and edge monomial `q_β`:
//!   `(1/|F|) ∫_F (τn)_i q_β`, with `n` the outward normal; index
//!   `e·2(k+1) + i(k+1) + β`;
//! * `(1/|K|) ∫_K τ : g` for the basis `g = h_K ∇(m_α e_i)` of the
//!   gradients of degree ≤ k − 1, ordered by `(i, α)`;
//! * `(1/|K|) ∫_K τ : g` for the orthonormal basis of the complement `G_k^⊥`.
//!
//! Globally an edge DoF is taken against the global edge normal, so the
//! local value is the global one times the orientation sign of the cell.
//! The global vector is `[σ₀ | σ₁ | v | r]`, each stress field laid out as
//! all edge DoFs (edge-major) followed by all interior DoFs (cell-major).

mod cell;
mod interp;

pub use cell::{build_stress_cell_operators, reference_edge_gram, stabilization_matrix, CellFrame, FrameEdge, StressCellOperators};
pub use interp::{
    eval_tensor, eval_vector, interpolate_stress, local_stress_interpolant, project_rotation, project_scalar_local,
    project_velocity, stress_edge_moments,
};

use crate::error::{invalid, Result, VemError};
use crate::mesh::{BoundaryTag, PolygonalMesh};
use crate::polybase::dim_p;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Stress0,
    Stress1,
    Velocity,
    Rotation,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] = [FieldKind::Stress0, FieldKind::Stress1, FieldKind::Velocity, FieldKind::Rotation];

    pub fn is_stress(self) -> bool {
        matches!(self, FieldKind::Stress0 | FieldKind::Stress1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofLayout {
    k: usize,
    num_edges: usize,
    num_cells: usize,
}

impl DofLayout {
    pub fn new(mesh: &PolygonalMesh, k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("polynomial degree must be at least 1");
        }
        Ok(DofLayout {
            k,
            num_edges: mesh.num_edges(),
            num_cells: mesh.num_cells(),
        })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Stress DoFs per edge and field: `2(k + 1)`.
    pub fn edge_dofs(&self) -> usize {
        2 * (self.k + 1)
    }

    /// Moments against the gradients of degree ≤ k − 1: `(k+1)(k+2) − 2`.
    pub fn interior_lower(&self) -> usize {
        (self.k + 1) * (self.k + 2) - 2
    }

    /// Moments against `G_k^⊥`: `k(k + 1)`.
    pub fn interior_perp(&self) -> usize {
        self.k * (self.k + 1)
    }

    pub fn interior_dofs(&self) -> usize {
        self.interior_lower() + self.interior_perp()
    }

    pub fn local_stress_dofs(&self, num_cell_edges: usize) -> usize {
        num_cell_edges * self.edge_dofs() + self.interior_dofs()
    }

    pub fn velocity_per_cell(&self) -> usize {
        2 * dim_p(self.k)
    }

    pub fn rotation_per_cell(&self) -> usize {
        dim_p(self.k)
    }

    pub fn field_len(&self, kind: FieldKind) -> usize {
        match kind {
            FieldKind::Stress0 | FieldKind::Stress1 => {
                self.num_edges * self.edge_dofs() + self.num_cells * self.interior_dofs()
            }
            FieldKind::Velocity => self.num_cells * self.velocity_per_cell(),
            FieldKind::Rotation => self.num_cells * self.rotation_per_cell(),
        }
    }

    pub fn offset(&self, kind: FieldKind) -> usize {
        let s = self.field_len(FieldKind::Stress0);
        match kind {
            FieldKind::Stress0 => 0,
            FieldKind::Stress1 => s,
            FieldKind::Velocity => 2 * s,
            FieldKind::Rotation => 2 * s + self.field_len(FieldKind::Velocity),
        }
    }

    pub fn total(&self) -> usize {
        FieldKind::ALL.iter().map(|&f| self.field_len(f)).sum()
    }

    /// `4(k+1)E + C(2((k+1)(k+2) − 2 + k(k+1)) + 3(k+1)(k+2)/2)`.
    pub fn closed_form_total(&self) -> usize {
        let k = self.k;
        4 * (k + 1) * self.num_edges
            + self.num_cells * (2 * ((k + 1) * (k + 2) - 2 + k * (k + 1)) + 3 * (k + 1) * (k + 2) / 2)
    }

    /// Field-relative index of an edge DoF.
    pub fn stress_edge_dof(&self, edge: usize, i: usize, beta: usize) -> usize {
        edge * self.edge_dofs() + i * (self.k + 1) + beta
    }

    /// Field-relative index of the `j`-th interior DoF of a cell.
    pub fn stress_interior_dof(&self, cell: usize, j: usize) -> usize {
        self.num_edges * self.edge_dofs() + cell * self.interior_dofs() + j
    }

    /// Field-relative velocity index of component `i`, monomial `a`.
    pub fn velocity_dof(&self, cell: usize, i: usize, a: usize) -> usize {
        cell * self.velocity_per_cell() + i * dim_p(self.k) + a
    }

    pub fn rotation_dof(&self, cell: usize, a: usize) -> usize {
        cell * self.rotation_per_cell() + a
    }

    /// Field-relative indices and signs of a cell's local stress DoFs.
    pub fn cell_stress_map(&self, mesh: &PolygonalMesh, cell: usize) -> (Vec<usize>, Vec<f64>) {
        let ces = mesh.cell_edges(cell);
        let n = self.local_stress_dofs(ces.len());
        let mut idx = Vec::with_capacity(n);
        let mut sign = Vec::with_capacity(n);
        for ce in ces {
            for i in 0..2 {
                for beta in 0..=self.k {
                    idx.push(self.stress_edge_dof(ce.edge, i, beta));
                    sign.push(ce.sign());
                }
            }
        }
        for j in 0..self.interior_dofs() {
            idx.push(self.stress_interior_dof(cell, j));
            sign.push(1.0);
        }
        (idx, sign)
    }

    /// Field-relative stress DoFs on Γᶿ edges, sorted.
    pub fn constrained_stress_dofs(&self, mesh: &PolygonalMesh) -> Vec<usize> {
        let mut out = Vec::new();
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.tag == BoundaryTag::GammaSigma {
                out.extend((0..self.edge_dofs()).map(|j| e * self.edge_dofs() + j));
            }
        }
        out
    }

    /// Global indices (both stress fields) of the constrained DoFs, sorted.
    pub fn constrained_global(&self, mesh: &PolygonalMesh) -> Vec<usize> {
        let local = self.constrained_stress_dofs(mesh);
        let s1 = self.offset(FieldKind::Stress1);
        let mut out = local.clone();
        out.extend(local.iter().map(|&d| d + s1));
        out
    }

    /// Checks that every global index is reached exactly once from the
    /// entities (edges, cells) that own it.
    pub fn check_bijection(&self, mesh: &PolygonalMesh) -> Result<()> {
        if mesh.num_edges() != self.num_edges || mesh.num_cells() != self.num_cells {
            return invalid("layout does not belong to this mesh");
        }
        let mut hits = vec![0u8; self.total()];
        let mut hit = |g: usize| hits[g] += 1;
        for kind in [FieldKind::Stress0, FieldKind::Stress1] {
            let off = self.offset(kind);
            for e in 0..self.num_edges {
                for i in 0..2 {
                    for b in 0..=self.k {
                        hit(off + self.stress_edge_dof(e, i, b));
                    }
                }
            }
            for c in 0..self.num_cells {
                for j in 0..self.interior_dofs() {
                    hit(off + self.stress_interior_dof(c, j));
                }
            }
        }
        for c in 0..self.num_cells {
            for i in 0..2 {
                for a in 0..dim_p(self.k) {
                    hit(self.offset(FieldKind::Velocity) + self.velocity_dof(c, i, a));
                }
            }
            for a in 0..dim_p(self.k) {
                hit(self.offset(FieldKind::Rotation) + self.rotation_dof(c, a));
            }
        }
        match hits.iter().position(|&h| h != 1) {
            Some(g) => Err(VemError::Validation(format!("global DoF {g} is hit {} times", hits[g]))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDofVector {
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

impl FieldDofVector {
    pub fn zeros(layout: &DofLayout, kind: FieldKind) -> Self {
        FieldDofVector {
            kind,
            values: vec![0.0; layout.field_len(kind)],
        }
    }

    pub fn check(&self, layout: &DofLayout) -> Result<()> {
        let n = layout.field_len(self.kind);
        if self.values.len() != n {
            return invalid(format!("{:?} vector has length {}, expected {n}", self.kind, self.values.len()));
        }
        Ok(())
    }

    /// Local stress DoF values of a cell, orientation signs applied.
    pub fn cell_stress(&self, layout: &DofLayout, mesh: &PolygonalMesh, cell: usize) -> nalgebra::DVector<f64> {
        let (idx, sign) = layout.cell_stress_map(mesh, cell);
        nalgebra::DVector::from_iterator(idx.len(), idx.iter().zip(&sign).map(|(&g, &s)| s * self.values[g]))
    }

    /// Polynomial coefficients of a velocity or rotation field on a cell.
    pub fn cell_coeffs(&self, layout: &DofLayout, cell: usize) -> &[f64] {
        let n = match self.kind {
            FieldKind::Velocity => layout.velocity_per_cell(),
            FieldKind::Rotation => layout.rotation_per_cell(),
            _ => panic!("cell_coeffs on a stress field"),
        };
        &self.values[cell * n..(cell + 1) * n]
    }
}

/// Concatenates the four fields into the global `[σ₀ | σ₁ | v | r]` vector.
pub fn pack(layout: &DofLayout, fields: [&FieldDofVector; 4]) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(layout.total());
    for (f, kind) in fields.iter().zip(FieldKind::ALL) {
        if f.kind != kind {
            return invalid(format!("expected {kind:?}, found {:?}", f.kind));
        }
        f.check(layout)?;
        x.extend_from_slice(&f.values);
    }
    Ok(x)
}

pub fn unpack(layout: &DofLayout, x: &[f64]) -> [FieldDofVector; 4] {
    assert_eq!(x.len(), layout.total());
    FieldKind::ALL.map(|kind| {
        let o = layout.offset(kind);
        FieldDofVector {
            kind,
            values: x[o..o + layout.field_len(kind)].to_vec(),
        }
    })
}

pub fn field_slice(layout: &DofLayout, x: &[f64], kind: FieldKind) -> FieldDofVector {
    let o = layout.offset(kind);
    FieldDofVector {
        kind,
        values: x[o..o + layout.field_len(kind)].to_vec(),
    }
}
