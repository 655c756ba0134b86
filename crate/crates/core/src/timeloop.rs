//! Crank–Nicolson integration of `𝒜 ẋ = ℬ x + 𝒞(t)`:
//!
//! ```text
//! (𝒜/τ − ℬ/2) xⁿ = (𝒜/τ + ℬ/2) xⁿ⁻¹ + 𝒞((n − ½)τ)
//! ```
//!
//! with the Γᶿ stress DoFs prescribed at `t_n`. The step matrix is reduced to
//! the free unknowns and factorized once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assemble::{free_indices, BlockOperators, Discretization};
use crate::error::{invalid, Result};
use crate::linalg::{CsrMatrix, DirectSolver};
use crate::vspace::{interpolate_stress, pack, project_rotation, project_velocity, FieldKind};
use crate::{Point, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    /// Number of steps taken; the time is `step · τ` (plus the start time).
    pub step: usize,
    pub t: f64,
    /// `[σ₀ | σ₁ | v | r]`.
    pub x: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub stress0: f64,
    pub stress1: f64,
    pub kinetic: f64,
    /// `xᵀ𝒜x`, which includes `cross`.
    pub total: f64,
    /// `2 r·H(σ₀ + σ₁)`; zero on weakly symmetric states.
    pub cross: f64,
    /// `σ₀ᵀ A₀′ σ₀ = −xᵀℬx`.
    pub dissipation: f64,
    pub weakly_symmetric: bool,
}

/// Builds the initial state from exact fields at time `t`: stresses are
/// interpolated (which also sets the Γᶿ DoFs to the traction moments),
/// velocity and rotation are projected. The rotation is given through the
/// scalar `s` of `s·J`.
pub fn initial_state<S0, S1, V, R>(disc: &Discretization, sigma0: &S0, sigma1: &S1, v: &V, s: &R, t: f64) -> Result<SystemState>
where
    S0: Fn(Point) -> Tensor + Sync,
    S1: Fn(Point) -> Tensor + Sync,
    V: Fn(Point) -> Point + Sync,
    R: Fn(Point) -> f64 + Sync,
{
    let s0 = interpolate_stress(sigma0, &disc.mesh, &disc.frames, FieldKind::Stress0)?;
    let s1 = interpolate_stress(sigma1, &disc.mesh, &disc.frames, FieldKind::Stress1)?;
    let vv = project_velocity(v, &disc.frames);
    let rr = project_rotation(s, &disc.frames);
    Ok(SystemState {
        step: 0,
        t,
        x: pack(&disc.layout, [&s0, &s1, &vv, &rr])?,
    })
}

pub fn zero_state(disc: &Discretization) -> SystemState {
    SystemState {
        step: 0,
        t: 0.0,
        x: vec![0.0; disc.layout.total()],
    }
}

/// `H(σ₀ + σ₁)`, the rotation rows of `𝒜` applied to the stress part.
pub fn weak_symmetry_residual(disc: &Discretization, ops: &BlockOperators, x: &[f64]) -> Vec<f64> {
    let l = &disc.layout;
    let ro = l.offset(FieldKind::Rotation);
    let vo = l.offset(FieldKind::Velocity);
    (ro..l.total())
        .map(|i| ops.a.row(i).filter(|&(j, _)| j < vo).map(|(j, v)| v * x[j]).sum())
        .collect()
}

fn block_form(a: &CsrMatrix, x: &[f64], lo: usize, hi: usize) -> f64 {
    (lo..hi)
        .map(|i| x[i] * a.row(i).filter(|&(j, _)| (lo..hi).contains(&j)).map(|(j, v)| v * x[j]).sum::<f64>())
        .sum()
}

pub fn energy(disc: &Discretization, ops: &BlockOperators, state: &SystemState) -> EnergySample {
    let l = &disc.layout;
    let x = &state.x;
    let o1 = l.offset(FieldKind::Stress1);
    let ov = l.offset(FieldKind::Velocity);
    let or = l.offset(FieldKind::Rotation);
    let stress0 = block_form(&ops.a, x, 0, o1);
    let stress1 = block_form(&ops.a, x, o1, ov);
    let kinetic = block_form(&ops.a, x, ov, or);
    let total = ops.a.quadratic_form(x);
    let cross = total - stress0 - stress1 - kinetic;
    let res = weak_symmetry_residual(disc, ops, x);
    let res_norm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = ops.a.max_abs() * x[..ov].iter().map(|v| v * v).sum::<f64>().sqrt();
    EnergySample {
        t: state.t,
        stress0,
        stress1,
        kinetic,
        total,
        cross,
        dissipation: -ops.b.quadratic_form(x),
        weakly_symmetric: res_norm <= 1e-10 * scale.max(f64::MIN_POSITIVE),
    }
}

/// Factorized Crank–Nicolson step for a fixed `τ` and constraint set.
#[derive(Debug)]
pub struct Stepper {
    tau: f64,
    explicit: CsrMatrix,
    coupling: CsrMatrix,
    solver: DirectSolver,
    free: Vec<usize>,
    constrained: Vec<usize>,
}

impl Stepper {
    pub fn new(ops: &BlockOperators, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid(format!("time step must be positive, got {tau}"));
        }
        let implicit = ops.a.combine(1.0 / tau, &ops.b, -0.5);
        let explicit = ops.a.combine(1.0 / tau, &ops.b, 0.5);
        let free = free_indices(implicit.nrows(), &ops.constrained);
        let kff = implicit.extract(&free, &free);
        let coupling = implicit.extract(&free, &ops.constrained);
        Ok(Stepper {
            tau,
            explicit,
            coupling,
            solver: DirectSolver::factorize(&kff)?,
            free,
            constrained: ops.constrained.clone(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn num_constrained(&self) -> usize {
        self.constrained.len()
    }

    /// One step. `rhs_mid` is `𝒞((n − ½)τ)`, `constraints` the Γᶿ DoF values
    /// at `t_n` in [`BlockOperators::constrained`] order. `t0` is the start
    /// time of the run.
    pub fn step(&self, state: &SystemState, rhs_mid: &[f64], constraints: &[f64], t0: f64) -> Result<SystemState> {
        let n = self.explicit.nrows();
        if state.x.len() != n || rhs_mid.len() != n {
            return invalid("state or right-hand side has the wrong length");
        }
        if constraints.len() != self.constrained.len() {
            return invalid(format!(
                "{} constraint values for {} constrained DoFs",
                constraints.len(),
                self.constrained.len()
            ));
        }
        let full = self.explicit.matvec(&state.x);
        let lift = self.coupling.matvec(constraints);
        let b: Vec<f64> = self.free.iter().zip(&lift).map(|(&i, l)| full[i] + rhs_mid[i] - l).collect();
        let xf = self.solver.solve(&b)?;
        let mut x = vec![0.0; n];
        for (&i, v) in self.free.iter().zip(xf) {
            x[i] = v;
        }
        for (&i, &v) in self.constrained.iter().zip(constraints) {
            x[i] = v;
        }
        let step = state.step + 1;
        Ok(SystemState {
            step,
            t: t0 + step as f64 * self.tau,
            x,
        })
    }
}

/// Runs `n_steps` uniform steps from `state`, calling `callback` after each
/// step. `rhs(t)` gives `𝒞(t)` and `constraints(t)` the Γᶿ values.
pub fn run<C, B, F>(
    stepper: &Stepper,
    state: SystemState,
    n_steps: usize,
    rhs: C,
    constraints: B,
    mut callback: F,
) -> Result<SystemState>
where
    C: Fn(f64) -> Vec<f64>,
    B: Fn(f64) -> Vec<f64>,
    F: FnMut(&SystemState),
{
    if n_steps == 0 {
        return invalid("at least one step is required");
    }
    let t0 = state.t - state.step as f64 * stepper.tau;
    let mut s = state;
    for _ in 0..n_steps {
        let tn = t0 + (s.step + 1) as f64 * stepper.tau;
        let mid = tn - 0.5 * stepper.tau;
        s = stepper.step(&s, &rhs(mid), &constraints(tn), t0)?;
        callback(&s);
    }
    Ok(s)
}

/// Runs to `t_end` in `n_steps` steps with `𝒞 = 0` and homogeneous
/// constraints.
pub fn run_unforced<F>(ops: &BlockOperators, state: SystemState, t_end: f64, n_steps: usize, callback: F) -> Result<SystemState>
where
    F: FnMut(&SystemState),
{
    if n_steps == 0 {
        return invalid("at least one step is required");
    }
    let stepper = Stepper::new(ops, (t_end - state.t) / n_steps as f64)?;
    let n = ops.a.nrows();
    let nc = ops.constrained.len();
    run(&stepper, state, n_steps, |_| vec![0.0; n], |_| vec![0.0; nc], callback)
}

/// Random state with zero Γᶿ DoFs and `H(σ₀ + σ₁) = 0`: uniform entries in
/// `[−1, 1]`, then the minimum-norm correction of the free `σ₁` DoFs.
pub fn random_weakly_symmetric_state(disc: &Discretization, ops: &BlockOperators, seed: u64) -> Result<SystemState> {
    let l = &disc.layout;
    let n = l.total();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    for &c in &ops.constrained {
        x[c] = 0.0;
    }
    let o1 = l.offset(FieldKind::Stress1);
    let ov = l.offset(FieldKind::Velocity);
    let ro = l.offset(FieldKind::Rotation);
    let constrained: std::collections::HashSet<usize> = ops.constrained.iter().copied().collect();
    let cols: Vec<usize> = (o1..ov).filter(|j| !constrained.contains(j)).collect();
    let rows: Vec<usize> = (ro..n).collect();
    let h = ops.a.extract(&rows, &cols).to_dense();
    let res = nalgebra::DVector::from_vec(weak_symmetry_residual(disc, ops, &x));
    let hht = &h * h.transpose();
    let y = hht
        .cholesky()
        .ok_or_else(|| crate::VemError::NumericalDegeneracy("weak symmetry coupling is rank deficient".into()))?
        .solve(&res);
    let delta = h.transpose() * y;
    for (&j, d) in cols.iter().zip(delta.iter()) {
        x[j] -= d;
    }
    Ok(SystemState { step: 0, t: 0.0, x })
}
