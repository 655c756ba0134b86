//! Manufactured solutions of the Zener system, discrete error norms and
//! convergence studies.
//!
//! A case is a displacement `u = Σ_j T_j(t) φ_j(x)`. The elastic stress is
//! `σ₁ = 2μ₁ε(u) + λ₁ div u I`; the Maxwell stress starts from zero and
//! solves `𝒜₀σ̇₀ + 𝒜₀′σ₀ = ε(v)`, which splits into a deviatoric and a
//! volumetric scalar equation `ġ + a g = T_j′`, `g(0) = 0`, per term.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assemble::{assemble_global, assemble_rhs, constraint_values, Discretization, MaterialParams};
use crate::error::{invalid, Result, VemError};
use crate::mesh::{BoundarySplit, MeshKind, PolygonalMesh};
use crate::polybase::{cell_quadrature, dim_p, PolyBasis};
use crate::timeloop::{initial_state, run, zero_state, Stepper, SystemState};
use crate::vspace::{eval_tensor, eval_vector, field_slice, FieldKind};
use crate::{Point, Tensor};

/// Time factor `T(t)` of one displacement term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeProfile {
    Square,
    Cube,
    Cosine,
    Exponential,
}

impl TimeProfile {
    pub fn value(self, t: f64) -> f64 {
        match self {
            TimeProfile::Square => t * t,
            TimeProfile::Cube => t * t * t,
            TimeProfile::Cosine => t.cos(),
            TimeProfile::Exponential => t.exp(),
        }
    }

    pub fn d1(self, t: f64) -> f64 {
        match self {
            TimeProfile::Square => 2.0 * t,
            TimeProfile::Cube => 3.0 * t * t,
            TimeProfile::Cosine => -t.sin(),
            TimeProfile::Exponential => t.exp(),
        }
    }

    pub fn d2(self, t: f64) -> f64 {
        match self {
            TimeProfile::Square => 2.0,
            TimeProfile::Cube => 6.0 * t,
            TimeProfile::Cosine => -t.cos(),
            TimeProfile::Exponential => t.exp(),
        }
    }

    /// Solution of `ġ + a g = T′(t)`, `g(0) = 0`.
    pub fn relaxed(self, a: f64, t: f64) -> f64 {
        let decay = (-a * t).exp();
        match self {
            TimeProfile::Square => 2.0 * (t / a - (1.0 - decay) / (a * a)),
            TimeProfile::Cube => 3.0 * (t * t / a - 2.0 * t / (a * a) + 2.0 * (1.0 - decay) / (a * a * a)),
            TimeProfile::Cosine => -(a * t.sin() - t.cos() + decay) / (a * a + 1.0),
            TimeProfile::Exponential => (t.exp() - decay) / (a + 1.0),
        }
    }

    pub fn relaxed_rate(self, a: f64, t: f64) -> f64 {
        self.d1(t) - a * self.relaxed(a, t)
    }
}

/// Spatial factor `φ(x)` of one displacement term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpatialProfile {
    /// `(x(1−x)y(1−y), 0)`.
    Bubble,
    /// `(e^{−y} sin x, 0)`.
    ExpSin,
    /// `(0, eˣ)`.
    ExpX,
}

/// Value, gradient `∂_j φ_i` and Hessians `∂_j ∂_l φ_i` of a vector field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: Point,
    pub grad: Tensor,
    pub hess: [Tensor; 2],
}

impl Jet {
    pub fn div(&self) -> f64 {
        self.grad.trace()
    }

    pub fn strain(&self) -> Tensor {
        (self.grad + self.grad.transpose()) * 0.5
    }

    /// `∇ div φ`.
    pub fn grad_div(&self) -> Point {
        Point::new(
            self.hess[0][(0, 0)] + self.hess[1][(1, 0)],
            self.hess[0][(0, 1)] + self.hess[1][(1, 1)],
        )
    }

    /// `div ε(φ) = ½(Δφ + ∇ div φ)`.
    pub fn div_strain(&self) -> Point {
        let lap = Point::new(self.hess[0].trace(), self.hess[1].trace());
        (lap + self.grad_div()) * 0.5
    }

    /// `s` with `(∇φ − ∇φᵗ)/2 = s J`.
    pub fn skew(&self) -> f64 {
        0.5 * (self.grad[(0, 1)] - self.grad[(1, 0)])
    }
}

impl SpatialProfile {
    pub fn jet(self, x: Point) -> Jet {
        match self {
            SpatialProfile::Bubble => {
                let (p, q) = (x.x * (1.0 - x.x), x.y * (1.0 - x.y));
                let (dp, dq) = (1.0 - 2.0 * x.x, 1.0 - 2.0 * x.y);
                Jet {
                    value: Point::new(p * q, 0.0),
                    grad: Tensor::new(dp * q, p * dq, 0.0, 0.0),
                    hess: [Tensor::new(-2.0 * q, dp * dq, dp * dq, -2.0 * p), Tensor::zeros()],
                }
            }
            SpatialProfile::ExpSin => {
                let e = (-x.y).exp();
                let (s, c) = x.x.sin_cos();
                Jet {
                    value: Point::new(e * s, 0.0),
                    grad: Tensor::new(e * c, -e * s, 0.0, 0.0),
                    hess: [Tensor::new(-e * s, -e * c, -e * c, e * s), Tensor::zeros()],
                }
            }
            SpatialProfile::ExpX => {
                let e = x.x.exp();
                Jet {
                    value: Point::new(0.0, e),
                    grad: Tensor::new(0.0, 0.0, e, 0.0),
                    hess: [Tensor::zeros(), Tensor::new(e, 0.0, 0.0, 0.0)],
                }
            }
        }
    }
}

pub const CASE_NAMES: [&str; 3] = ["poly-t2", "poly-t3", "exp-trig"];

/// Closed-form exact solution for given material parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedCase {
    pub name: String,
    pub terms: Vec<(TimeProfile, SpatialProfile)>,
    pub params: MaterialParams,
}

pub fn build_case(name: &str, params: &MaterialParams) -> Result<ManufacturedCase> {
    params.validate()?;
    let terms = match name {
        "poly-t2" => vec![(TimeProfile::Square, SpatialProfile::Bubble)],
        "poly-t3" => vec![(TimeProfile::Cube, SpatialProfile::Bubble)],
        "exp-trig" => vec![
            (TimeProfile::Cosine, SpatialProfile::ExpSin),
            (TimeProfile::Exponential, SpatialProfile::ExpX),
        ],
        other => return invalid(format!("unknown manufactured case '{other}' (expected one of {CASE_NAMES:?})")),
    };
    Ok(ManufacturedCase {
        name: name.to_string(),
        terms,
        params: *params,
    })
}

fn dev(t: &Tensor) -> Tensor {
    t - Tensor::identity() * (0.5 * t.trace())
}

impl ManufacturedCase {
    /// Relaxation rate of the deviatoric part, `μ₀/μ₀′`.
    pub fn deviatoric_rate(&self) -> f64 {
        self.params.mu0 / self.params.mu0p
    }

    /// Relaxation rate of the volumetric part, `(μ₀+λ₀)/(μ₀′+λ₀′)`.
    pub fn volumetric_rate(&self) -> f64 {
        (self.params.mu0 + self.params.lambda0) / (self.params.mu0p + self.params.lambda0p)
    }

    fn sum<T: std::ops::Add<Output = T>>(&self, zero: T, f: impl Fn(TimeProfile, Jet) -> T, x: Point) -> T {
        self.terms.iter().fold(zero, |acc, &(tp, sp)| acc + f(tp, sp.jet(x)))
    }

    pub fn displacement(&self, x: Point, t: f64) -> Point {
        self.sum(Point::zeros(), |tp, j| j.value * tp.value(t), x)
    }

    pub fn velocity(&self, x: Point, t: f64) -> Point {
        self.sum(Point::zeros(), |tp, j| j.value * tp.d1(t), x)
    }

    pub fn acceleration(&self, x: Point, t: f64) -> Point {
        self.sum(Point::zeros(), |tp, j| j.value * tp.d2(t), x)
    }

    pub fn strain_rate(&self, x: Point, t: f64) -> Tensor {
        self.sum(Tensor::zeros(), |tp, j| j.strain() * tp.d1(t), x)
    }

    /// Scalar `s` of the rotation `(∇u − ∇uᵗ)/2 = s J`.
    pub fn rotation(&self, x: Point, t: f64) -> f64 {
        self.sum(0.0, |tp, j| j.skew() * tp.value(t), x)
    }

    pub fn sigma1(&self, x: Point, t: f64) -> Tensor {
        let p = &self.params;
        self.sum(
            Tensor::zeros(),
            |tp, j| (j.strain() * (2.0 * p.mu1) + Tensor::identity() * (p.lambda1 * j.div())) * tp.value(t),
            x,
        )
    }

    pub fn sigma1_rate(&self, x: Point, t: f64) -> Tensor {
        let p = &self.params;
        self.sum(
            Tensor::zeros(),
            |tp, j| (j.strain() * (2.0 * p.mu1) + Tensor::identity() * (p.lambda1 * j.div())) * tp.d1(t),
            x,
        )
    }

    fn sigma0_with(&self, x: Point, t: f64, g: impl Fn(TimeProfile, f64, f64) -> f64) -> Tensor {
        let p = self.params;
        let (ad, av) = (self.deviatoric_rate(), self.volumetric_rate());
        self.sum(
            Tensor::zeros(),
            |tp, j| {
                dev(&j.strain()) * (2.0 * p.mu0 * g(tp, ad, t))
                    + Tensor::identity() * ((p.mu0 + p.lambda0) * j.div() * g(tp, av, t))
            },
            x,
        )
    }

    pub fn sigma0(&self, x: Point, t: f64) -> Tensor {
        self.sigma0_with(x, t, |tp, a, t| tp.relaxed(a, t))
    }

    pub fn sigma0_rate(&self, x: Point, t: f64) -> Tensor {
        self.sigma0_with(x, t, |tp, a, t| tp.relaxed_rate(a, t))
    }

    pub fn div_sigma1(&self, x: Point, t: f64) -> Point {
        let p = &self.params;
        self.sum(
            Point::zeros(),
            |tp, j| (j.div_strain() * (2.0 * p.mu1) + j.grad_div() * p.lambda1) * tp.value(t),
            x,
        )
    }

    pub fn div_sigma0(&self, x: Point, t: f64) -> Point {
        let p = self.params;
        let (ad, av) = (self.deviatoric_rate(), self.volumetric_rate());
        self.sum(
            Point::zeros(),
            |tp, j| {
                let div_dev = j.div_strain() - j.grad_div() * 0.5;
                div_dev * (2.0 * p.mu0 * tp.relaxed(ad, t)) + j.grad_div() * ((p.mu0 + p.lambda0) * tp.relaxed(av, t))
            },
            x,
        )
    }

    /// `f = v̇ − div(σ₀ + σ₁)/ρ`.
    pub fn load(&self, x: Point, t: f64) -> Point {
        self.acceleration(x, t) - (self.div_sigma0(x, t) + self.div_sigma1(x, t)) / self.params.rho
    }

    /// Largest constitutive residual (relative to the strain-rate scale) and
    /// symmetry defect over a sample grid and sample times.
    pub fn constitutive_residual(&self) -> f64 {
        let p = &self.params;
        let mut worst: f64 = 0.0;
        for it in 0..=4 {
            let t = 0.25 * it as f64;
            for ix in 0..=4 {
                for iy in 0..=4 {
                    let x = Point::new(0.25 * ix as f64, 0.25 * iy as f64);
                    let eps = self.strain_rate(x, t);
                    let scale = 1.0 + eps.abs().max();
                    let r0 = crate::assemble::compliance_action(p.mu0, p.lambda0, &self.sigma0_rate(x, t))
                        + crate::assemble::compliance_action(p.mu0p, p.lambda0p, &self.sigma0(x, t))
                        - eps;
                    let r1 = crate::assemble::compliance_action(p.mu1, p.lambda1, &self.sigma1_rate(x, t)) - eps;
                    let total = self.sigma0(x, t) + self.sigma1(x, t);
                    let asym = (total - total.transpose()).abs().max() / (1.0 + total.abs().max());
                    worst = worst.max(r0.abs().max() / scale).max(r1.abs().max() / scale).max(asym);
                }
            }
        }
        worst
    }

    /// Largest gap between the closed-form relaxation factors and a
    /// classical Runge–Kutta integration (step `1e-4`) on `[0, 1]`,
    /// relative to `1 + |g|`.
    pub fn relaxation_gap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &(tp, _) in &self.terms {
            for a in [self.deviatoric_rate(), self.volumetric_rate()] {
                let h = 1e-4;
                let rhs = |t: f64, g: f64| tp.d1(t) - a * g;
                let mut g = 0.0;
                for n in 0..10_000 {
                    let t = n as f64 * h;
                    let k1 = rhs(t, g);
                    let k2 = rhs(t + 0.5 * h, g + 0.5 * h * k1);
                    let k3 = rhs(t + 0.5 * h, g + 0.5 * h * k2);
                    let k4 = rhs(t + h, g + h * k3);
                    g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    if (n + 1) % 1000 == 0 {
                        let exact = tp.relaxed(a, (n + 1) as f64 * h);
                        worst = worst.max((g - exact).abs() / (1.0 + exact.abs()));
                    }
                }
            }
        }
        worst
    }

    /// Gate run before any convergence study.
    pub fn verify(&self) -> Result<()> {
        let r = self.constitutive_residual();
        let g = self.relaxation_gap();
        if r > 1e-9 || g > 1e-9 {
            return Err(VemError::Validation(format!(
                "case {} fails its residual checks (constitutive {r:e}, relaxation {g:e})",
                self.name
            )));
        }
        Ok(())
    }
}

/// Exact fields of a problem of the Zener system.
pub trait ExactSolution: Sync {
    fn params(&self) -> &MaterialParams;
    fn sigma0(&self, x: Point, t: f64) -> Tensor;
    fn sigma1(&self, x: Point, t: f64) -> Tensor;
    fn velocity(&self, x: Point, t: f64) -> Point;
    /// Scalar `s` of the rotation `s J`.
    fn rotation(&self, x: Point, t: f64) -> f64;
    /// `div(σ₀ + σ₁)`.
    fn div_total(&self, x: Point, t: f64) -> Point;
    fn load(&self, x: Point, t: f64) -> Point;
}

impl ExactSolution for ManufacturedCase {
    fn params(&self) -> &MaterialParams {
        &self.params
    }
    fn sigma0(&self, x: Point, t: f64) -> Tensor {
        ManufacturedCase::sigma0(self, x, t)
    }
    fn sigma1(&self, x: Point, t: f64) -> Tensor {
        ManufacturedCase::sigma1(self, x, t)
    }
    fn velocity(&self, x: Point, t: f64) -> Point {
        ManufacturedCase::velocity(self, x, t)
    }
    fn rotation(&self, x: Point, t: f64) -> f64 {
        ManufacturedCase::rotation(self, x, t)
    }
    fn div_total(&self, x: Point, t: f64) -> Point {
        self.div_sigma0(x, t) + self.div_sigma1(x, t)
    }
    fn load(&self, x: Point, t: f64) -> Point {
        ManufacturedCase::load(self, x, t)
    }
}

/// Steady state with constant elastic stress and everything else zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchSolution {
    pub sigma1: Tensor,
    pub params: MaterialParams,
}

impl Default for PatchSolution {
    fn default() -> Self {
        PatchSolution {
            sigma1: Tensor::new(1.0, 0.3, 0.3, 2.0),
            params: MaterialParams::default(),
        }
    }
}

impl ExactSolution for PatchSolution {
    fn params(&self) -> &MaterialParams {
        &self.params
    }
    fn sigma0(&self, _: Point, _: f64) -> Tensor {
        Tensor::zeros()
    }
    fn sigma1(&self, _: Point, _: f64) -> Tensor {
        self.sigma1
    }
    fn velocity(&self, _: Point, _: f64) -> Point {
        Point::zeros()
    }
    fn rotation(&self, _: Point, _: f64) -> f64 {
        0.0
    }
    fn div_total(&self, _: Point, _: f64) -> Point {
        Point::zeros()
    }
    fn load(&self, _: Point, _: f64) -> Point {
        Point::zeros()
    }
}

/// Discrete state built from the exact fields at time `t`.
pub fn exact_state<S: ExactSolution>(case: &S, disc: &Discretization, t: f64) -> Result<SystemState> {
    initial_state(
        disc,
        &|x| case.sigma0(x, t),
        &|x| case.sigma1(x, t),
        &|x| case.velocity(x, t),
        &|x| case.rotation(x, t),
        t,
    )
}

/// Runs the steady patch problem for a few steps and returns the largest
/// error over all fields.
pub fn patch_test(mesh: PolygonalMesh, k: usize) -> Result<f64> {
    let sol = PatchSolution::default();
    let disc = Discretization::new(mesh, k)?;
    let state = solve_case(&disc, &sol, 1.0, 5)?;
    let e = error_norms(&disc, &sol, &state, 1.0)?;
    Ok(e.max())
}

/// Global L² errors of one discrete state.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ErrorNorms {
    pub sigma0: f64,
    pub sigma1: f64,
    pub velocity: f64,
    pub rotation: f64,
    pub div: f64,
}

impl ErrorNorms {
    pub fn as_array(&self) -> [f64; 5] {
        [self.sigma0, self.sigma1, self.velocity, self.rotation, self.div]
    }

    pub fn max(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

pub const FIELD_NAMES: [&str; 5] = ["sig0", "sig1", "v", "r", "div"];

/// `‖Π⁰σ_{i,h} − σ_i‖`, `‖v_h − v‖`, `‖r_h − r‖` (tensor norm) and
/// `‖div(σ₀,h + σ₁,h) − div(σ₀ + σ₁)‖` at time `t`.
pub fn error_norms<S: ExactSolution>(disc: &Discretization, case: &S, state: &SystemState, t: f64) -> Result<ErrorNorms> {
    let l = &disc.layout;
    if state.x.len() != l.total() {
        return invalid("state does not match the discretization");
    }
    let k = disc.k();
    let s0 = field_slice(l, &state.x, FieldKind::Stress0);
    let s1 = field_slice(l, &state.x, FieldKind::Stress1);
    let v = field_slice(l, &state.x, FieldKind::Velocity);
    let r = field_slice(l, &state.x, FieldKind::Rotation);
    let np = dim_p(k);
    let per_cell: Vec<[f64; 5]> = (0..disc.mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let fr = &disc.frames[c];
            let ops = &disc.ops[c];
            let d0 = s0.cell_stress(l, &disc.mesh, c);
            let d1 = s1.cell_stress(l, &disc.mesh, c);
            let p0 = &ops.pi0 * &d0;
            let p1 = &ops.pi0 * &d1;
            let dv = &ops.div * (d0 + d1);
            let rule = cell_quadrature(&disc.mesh.cell_points(c), 2 * k + 6)?;
            let vc = v.cell_coeffs(l, c);
            let rc = r.cell_coeffs(l, c);
            let mut acc = [0.0; 5];
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let e0 = eval_tensor(fr, p0.as_slice(), x) - case.sigma0(x, t);
                let e1 = eval_tensor(fr, p1.as_slice(), x) - case.sigma1(x, t);
                let ev = eval_vector(fr, vc, x) - case.velocity(x, t);
                let m = fr.basis.eval(x);
                let sh: f64 = (0..np).map(|a| rc[a] * m[a]).sum();
                let er = sh - case.rotation(x, t);
                let ed = eval_vector(fr, dv.as_slice(), x) - case.div_total(x, t);
                acc[0] += w * e0.norm_squared();
                acc[1] += w * e1.norm_squared();
                acc[2] += w * ev.norm_squared();
                acc[3] += w * 2.0 * er * er;
                acc[4] += w * ed.norm_squared();
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut tot = [0.0; 5];
    for a in &per_cell {
        for i in 0..5 {
            tot[i] += a[i];
        }
    }
    Ok(ErrorNorms {
        sigma0: tot[0].sqrt(),
        sigma1: tot[1].sqrt(),
        velocity: tot[2].sqrt(),
        rotation: tot[3].sqrt(),
        div: tot[4].sqrt(),
    })
}

/// `log(e/ẽ)/log(h/h̃)`.
pub fn rate(e: f64, e_next: f64, h: f64, h_next: f64) -> f64 {
    (e / e_next).ln() / (h / h_next).ln()
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_rate(h: &[f64], e: &[f64]) -> f64 {
    assert_eq!(h.len(), e.len());
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dofs: usize,
    pub tau: f64,
    pub steps: usize,
    pub errors: ErrorNorms,
    /// Rates against the previous row; `None` on the first row.
    pub rates: Option<[f64; 5]>,
}

/// `τ = τ₀ (h/h₀)^{(k+1)/2}`, rounded so that an integer number of steps
/// reaches `t_end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeRule {
    pub tau0: Option<f64>,
    pub t_end: f64,
}

impl Default for TimeRule {
    fn default() -> Self {
        TimeRule {
            tau0: None,
            t_end: 1.0,
        }
    }
}

impl TimeRule {
    /// `τ = τ₀ (h/h₀)^{(k+1)/2}` for mesh size `h`, with `h0` the coarsest size.
    pub fn tau(&self, k: usize, h: f64, h0: f64) -> f64 {
        let tau0 = self.tau0.unwrap_or(h0);
        tau0 * (h / h0).powf((k as f64 + 1.0) / 2.0)
    }

    /// Number of steps to reach `t_end` with step `tau(k, h, h0)`, counting a
    /// shortened final step.
    pub fn steps(&self, k: usize, h: f64, h0: f64) -> usize {
        let (full, rest) = split_interval(self.t_end, self.tau(k, h, h0));
        full + usize::from(rest > 0.0)
    }
}

/// Whole steps of length `tau` in `[0, t_end]` and the leftover length
/// (zero when `tau` divides `t_end` up to rounding).
fn split_interval(t_end: f64, tau: f64) -> (usize, f64) {
    let ratio = t_end / tau;
    let full = (ratio + 1e-9).floor() as usize;
    let rest = t_end - full as f64 * tau;
    if full > 0 && rest <= 1e-9 * tau {
        (full, 0.0)
    } else {
        (full, rest.max(0.0))
    }
}

/// Solves one manufactured problem on a mesh and returns the final state.
pub fn solve_case<S: ExactSolution>(disc: &Discretization, case: &S, t_end: f64, steps: usize) -> Result<SystemState> {
    solve_case_with_tau(disc, case, t_end, t_end / steps as f64)
}

/// As [`solve_case`] with a prescribed step `tau`; when `tau` does not
/// divide `t_end` the last step is shortened.
pub fn solve_case_with_tau<S: ExactSolution>(disc: &Discretization, case: &S, t_end: f64, tau: f64) -> Result<SystemState> {
    if !(tau > 0.0 && t_end > 0.0) {
        return invalid("time step and final time must be positive");
    }
    let params = *case.params();
    let ops = assemble_global(disc, &params)?;
    let rhs = |t| assemble_rhs(disc, &params, &|x, t| case.load(x, t), &|x, t| case.velocity(x, t), t);
    let constraints = |t| constraint_values(disc, &|x| case.sigma0(x, t), &|x| case.sigma1(x, t));
    let (full, rest) = split_interval(t_end, tau);
    let mut state = exact_state(case, disc, 0.0)?;
    if full > 0 {
        let stepper = Stepper::new(&ops, tau)?;
        state = run(&stepper, state, full, rhs, constraints, |_| {})?;
    }
    if rest > 0.0 {
        let last = Stepper::new(&ops, rest)?;
        let t0 = t_end - (state.step + 1) as f64 * rest;
        state = last.step(&state, &rhs(t_end - 0.5 * rest), &constraints(t_end), t0)?;
        state.t = t_end;
    }
    Ok(state)
}

/// Runs the case on every mesh of the family and tabulates errors at the
/// final time.
pub fn convergence_study(
    case: &ManufacturedCase,
    meshes: &[MeshKind],
    split: BoundarySplit,
    k: usize,
    rule: TimeRule,
) -> Result<Vec<ConvergenceRow>> {
    if meshes.len() < 2 {
        return invalid("a convergence study needs at least two meshes");
    }
    case.verify()?;
    let generated: Vec<(PolygonalMesh, f64)> = meshes
        .iter()
        .map(|m| {
            let mesh = m.generate()?.with_split(split);
            let h = m.reported_h(&mesh);
            Ok((mesh, h))
        })
        .collect::<Result<_>>()?;
    let h0 = generated[0].1;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(meshes.len());
    for (mesh, h) in generated {
        let tau = rule.tau(k, h, h0);
        let disc = Discretization::new(mesh, k)?;
        let state = solve_case_with_tau(&disc, case, rule.t_end, tau)?;
        let errors = error_norms(&disc, case, &state, rule.t_end)?;
        let rates = rows.last().map(|p| {
            let (a, b) = (p.errors.as_array(), errors.as_array());
            std::array::from_fn(|i| rate(a[i], b[i], p.h, h))
        });
        rows.push(ConvergenceRow {
            h,
            dofs: disc.layout.total(),
            tau,
            steps: rule.steps(k, h, h0),
            errors,
            rates,
        });
    }
    Ok(rows)
}

/// Fitted rate of every field over all rows.
pub fn fitted_rates(rows: &[ConvergenceRow]) -> [f64; 5] {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    std::array::from_fn(|i| {
        let e: Vec<f64> = rows.iter().map(|r| r.errors.as_array()[i]).collect();
        fitted_rate(&h, &e)
    })
}

pub const CSV_HEADER: &str = "h,dofs,e_sig0,rate_sig0,e_sig1,rate_sig1,e_v,rate_v,e_r,rate_r,e_div,rate_div";

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{:e},{}", r.h, r.dofs);
        let e = r.errors.as_array();
        for i in 0..5 {
            match r.rates {
                Some(rt) => {
                    let _ = write!(s, ",{:e},{:.4}", e[i], rt[i]);
                }
                None => {
                    let _ = write!(s, ",{:e},nan", e[i]);
                }
            }
        }
        s.push('\n');
    }
    s
}

/// One sample of the marker series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkerSample {
    pub t: f64,
    pub vx: f64,
}

/// Setup of the damped-oscillation experiment: zero initial data, constant
/// load, velocity fixed to zero on the whole boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerConfig {
    pub params: MaterialParams,
    pub mesh: MeshKind,
    pub k: usize,
    pub t_end: f64,
    pub tau: f64,
    pub load: Point,
    pub marker: Point,
}

impl Default for MarkerConfig {
    fn default() -> Self {
        MarkerConfig {
            params: MaterialParams {
                rho: 1000.0,
                ..MaterialParams::default()
            },
            mesh: MeshKind::Cartesian(9),
            k: 1,
            t_end: 100.0,
            tau: 0.1,
            load: Point::new(1.0, 1.0),
            marker: Point::new(0.5, 0.5),
        }
    }
}

impl MarkerConfig {
    /// The same setup with the dashpot nearly removed.
    pub fn low_viscosity() -> Self {
        let mut c = MarkerConfig::default();
        c.params.mu0p = 1e-5;
        c.params.lambda0p = 1e-6;
        c
    }
}

pub fn marker_experiment(cfg: &MarkerConfig) -> Result<Vec<MarkerSample>> {
    let mesh = cfg.mesh.generate()?.with_split(BoundarySplit::AllDirichlet);
    let cell = mesh
        .locate(cfg.marker)
        .ok_or_else(|| VemError::InvalidArgument(format!("marker {:?} lies outside the mesh", cfg.marker)))?;
    let disc = Discretization::new(mesh, cfg.k)?;
    let ops = assemble_global(&disc, &cfg.params)?;
    let steps = (cfg.t_end / cfg.tau).round() as usize;
    if steps == 0 {
        return invalid("final time is shorter than one step");
    }
    let stepper = Stepper::new(&ops, cfg.t_end / steps as f64)?;
    let load = cfg.load;
    // f is constant in time and v_D = 0, so 𝒞 is assembled once
    let rhs = assemble_rhs(&disc, &cfg.params, &|_, _| load, &|_, _| Point::zeros(), 0.0);
    let l = &disc.layout;
    let vo = l.offset(FieldKind::Velocity) + cell * l.velocity_per_cell();
    let sample = |s: &SystemState| MarkerSample {
        t: s.t,
        vx: eval_vector(&disc.frames[cell], &s.x[vo..vo + l.velocity_per_cell()], cfg.marker).x,
    };
    let x0 = zero_state(&disc);
    let mut out = vec![sample(&x0)];
    run(&stepper, x0, steps, |_| rhs.clone(), |_| Vec::new(), |s| out.push(sample(s)))?;
    Ok(out)
}

/// `max |v_x|` over `t ≥ window_start` divided by `max |v_x|` overall.
pub fn late_window_ratio(series: &[MarkerSample], window_start: f64) -> f64 {
    let all = series.iter().fold(0.0f64, |m, s| m.max(s.vx.abs()));
    let late = series
        .iter()
        .filter(|s| s.t >= window_start - 1e-9)
        .fold(0.0f64, |m, s| m.max(s.vx.abs()));
    if all == 0.0 {
        0.0
    } else {
        late / all
    }
}

pub fn marker_csv(series: &[MarkerSample]) -> String {
    let mut s = String::from("t,vx\n");
    for m in series {
        let _ = writeln!(s, "{},{:e}", m.t, m.vx);
    }
    s
}
