use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Result;
use crate::mesh::PolygonalMesh;
use crate::polybase::{dim_p, edge_quadrature, PolyBasis, ScaledMonomialBasis1D};
use crate::{Point, Tensor};

use super::{CellFrame, DofLayout, FieldDofVector, FieldKind};

/// `(1/|F|) ∫_F (τn)_i q_β` on the segment `a → b` for the given unit
/// normal, ordered `(i, β)`.
pub fn stress_edge_moments(a: Point, b: Point, normal: Point, k: usize, f: &impl Fn(Point) -> Tensor) -> Vec<f64> {
    let rule = edge_quadrature(a, b, 2 * k + 2);
    let basis = ScaledMonomialBasis1D::on_segment(k, a, b);
    let len = (b - a).norm();
    let mut out = vec![0.0; 2 * (k + 1)];
    let mut q = vec![0.0; k + 1];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let tn = f(x) * normal;
        basis.eval_into(x, &mut q);
        for i in 0..2 {
            for (beta, qb) in q.iter().enumerate() {
                out[i * (k + 1) + beta] += w * tn[i] * qb / len;
            }
        }
    }
    out
}

/// `∫_K f_c m_a` in tensor `P_k` coordinates.
fn tensor_moments(frame: &CellFrame, f: &impl Fn(Point) -> Tensor) -> DVector<f64> {
    let np = frame.basis.len();
    let mut t = DVector::zeros(4 * np);
    let mut m = vec![0.0; np];
    for (&x, &w) in frame.rule.points.iter().zip(&frame.rule.weights) {
        let v = f(x);
        frame.basis.eval_into(x, &mut m);
        for c in 0..4 {
            let fc = w * v[(c / 2, c % 2)];
            for a in 0..np {
                t[c * np + a] += fc * m[a];
            }
        }
    }
    t
}

fn interior_moments(frame: &CellFrame, f: &impl Fn(Point) -> Tensor) -> DVector<f64> {
    let t = tensor_moments(frame, f);
    let lower = frame.split.g_lower.transpose() * &t / frame.area;
    let perp = frame.split.g_perp.transpose() * &t / frame.area;
    let mut out = DVector::zeros(lower.len() + perp.len());
    out.rows_mut(0, lower.len()).copy_from(&lower);
    out.rows_mut(lower.len(), perp.len()).copy_from(&perp);
    out
}

/// Local DoF values (outward normals) of the interpolant of `f`.
pub fn local_stress_interpolant(frame: &CellFrame, f: &impl Fn(Point) -> Tensor) -> DVector<f64> {
    let mut out = DVector::zeros(frame.num_local_stress());
    let ne = 2 * (frame.k + 1);
    for (e, fe) in frame.edges.iter().enumerate() {
        let m = stress_edge_moments(fe.a, fe.b, fe.normal, frame.k, f);
        out.rows_mut(e * ne, ne).copy_from_slice(&m);
    }
    let int = interior_moments(frame, f);
    out.rows_mut(frame.interior_start(), int.len()).copy_from(&int);
    out
}

/// Global DoF vector of the interpolant of `f` for the given stress field.
pub fn interpolate_stress<F>(f: &F, mesh: &PolygonalMesh, frames: &[CellFrame], kind: FieldKind) -> Result<FieldDofVector>
where
    F: Fn(Point) -> Tensor + Sync,
{
    assert!(kind.is_stress());
    let k = frames.first().map_or(1, |fr| fr.k);
    let layout = DofLayout::new(mesh, k)?;
    let mut out = FieldDofVector::zeros(&layout, kind);
    let ne = layout.edge_dofs();
    let edge_vals: Vec<Vec<f64>> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let (a, b) = mesh.edge_points(e);
            let t = b - a;
            stress_edge_moments(a, b, Point::new(t.y, -t.x) / t.norm(), k, f)
        })
        .collect();
    for (e, v) in edge_vals.iter().enumerate() {
        out.values[e * ne..(e + 1) * ne].copy_from_slice(v);
    }
    let int_vals: Vec<DVector<f64>> = frames.par_iter().map(|fr| interior_moments(fr, f)).collect();
    for (c, v) in int_vals.iter().enumerate() {
        let s = layout.stress_interior_dof(c, 0);
        out.values[s..s + v.len()].copy_from_slice(v.as_slice());
    }
    Ok(out)
}

/// Cellwise L² projection coefficients `M⁻¹ ∫ f m` of a scalar function.
pub fn project_scalar_local(frame: &CellFrame, f: &impl Fn(Point) -> f64) -> DVector<f64> {
    let np = frame.basis.len();
    let mut rhs = DVector::zeros(np);
    let mut m = vec![0.0; np];
    for (&x, &w) in frame.rule.points.iter().zip(&frame.rule.weights) {
        let v = w * f(x);
        frame.basis.eval_into(x, &mut m);
        for a in 0..np {
            rhs[a] += v * m[a];
        }
    }
    solve_gram(&frame.gram, rhs)
}

fn solve_gram(gram: &DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    gram.clone().cholesky().expect("scalar Gram matrix is positive definite").solve(&rhs)
}

/// Cellwise L² projection of a vector field onto vector `P_k`.
pub fn project_velocity<F>(f: &F, frames: &[CellFrame]) -> FieldDofVector
where
    F: Fn(Point) -> Point + Sync,
{
    let blocks: Vec<Vec<f64>> = frames
        .par_iter()
        .map(|fr| {
            let mut v = project_scalar_local(fr, &|x| f(x).x).as_slice().to_vec();
            v.extend_from_slice(project_scalar_local(fr, &|x| f(x).y).as_slice());
            v
        })
        .collect();
    FieldDofVector {
        kind: FieldKind::Velocity,
        values: blocks.concat(),
    }
}

/// Cellwise L² projection of a skew field `s·J`, `J = [[0, 1], [−1, 0]]`,
/// given through its scalar `s`.
pub fn project_rotation<F>(s: &F, frames: &[CellFrame]) -> FieldDofVector
where
    F: Fn(Point) -> f64 + Sync,
{
    let blocks: Vec<Vec<f64>> = frames
        .par_iter()
        .map(|fr| project_scalar_local(fr, s).as_slice().to_vec())
        .collect();
    FieldDofVector {
        kind: FieldKind::Rotation,
        values: blocks.concat(),
    }
}

/// Evaluates a tensor `P_k` polynomial given by its coefficients.
pub fn eval_tensor(frame: &CellFrame, coeffs: &[f64], x: Point) -> Tensor {
    let m = frame.basis.eval(x);
    let np = m.len();
    let e = |c: usize| (0..np).map(|a| coeffs[c * np + a] * m[a]).sum::<f64>();
    Tensor::new(e(0), e(1), e(2), e(3))
}

/// Evaluates a vector `P_k` polynomial given by its coefficients.
pub fn eval_vector(frame: &CellFrame, coeffs: &[f64], x: Point) -> Point {
    let m = frame.basis.eval(x);
    let np = dim_p(frame.k);
    let e = |i: usize| (0..np).map(|a| coeffs[i * np + a] * m[a]).sum::<f64>();
    Point::new(e(0), e(1))
}
