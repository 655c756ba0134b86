//! Global block operators and the direct solver.

mod common;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::norm;
use zener_vem::assemble::{assemble_global, assemble_in_order, factorize, free_indices, solve, Discretization, MaterialParams};
use zener_vem::mesh::{generate_cartesian, generate_hexagonal, generate_partitioned};
use zener_vem::timeloop::random_weakly_symmetric_state;

fn discretizations() -> Vec<Discretization> {
    vec![
        Discretization::new(generate_cartesian(4).unwrap(), 1).unwrap(),
        Discretization::new(generate_hexagonal(4).unwrap(), 2).unwrap(),
        Discretization::new(generate_partitioned(1, 2).unwrap(), 1).unwrap(),
    ]
}

#[test]
fn assembly_does_not_depend_on_cell_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for disc in discretizations() {
        let params = MaterialParams::default();
        let base = assemble_global(&disc, &params).unwrap();
        let mut order: Vec<usize> = (0..disc.mesh.num_cells()).collect();
        order.shuffle(&mut rng);
        let perm = assemble_in_order(&disc, &params, &order).unwrap();
        let da = base.a.combine(1.0, &perm.a, -1.0).max_abs();
        let db = base.b.combine(1.0, &perm.b, -1.0).max_abs();
        assert!(da <= 1e-14 * base.a.max_abs(), "𝒜 differs by {da:e}");
        assert!(db <= 1e-14 * base.b.max_abs(), "ℬ differs by {db:e}");
        assert_eq!(base.constrained, perm.constrained);
    }
}

#[test]
fn compliance_block_is_symmetric() {
    for disc in discretizations() {
        for params in [MaterialParams::default(), MaterialParams::nearly_incompressible()] {
            let ops = assemble_global(&disc, &params).unwrap();
            assert!(ops.a.symmetry_residual() <= 1e-12 * ops.a.max_abs());
        }
    }
}

#[test]
fn coupling_block_is_dissipative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for disc in discretizations() {
        let ops = assemble_global(&disc, &MaterialParams::default()).unwrap();
        let n = ops.b.nrows();
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = ops.b.quadratic_form(&x);
            assert!(q <= 1e-12 * ops.b.max_abs() * norm(&x).powi(2), "xᵀℬx = {q:e}");
        }
    }
}

#[test]
fn compliance_is_positive_on_weakly_symmetric_vectors() {
    for disc in discretizations() {
        for params in [MaterialParams::default(), MaterialParams::nearly_incompressible()] {
            let ops = assemble_global(&disc, &params).unwrap();
            for seed in 0..10 {
                let s = random_weakly_symmetric_state(&disc, &ops, seed).unwrap();
                assert!(ops.a.quadratic_form(&s.x) > 0.0);
            }
        }
    }
}

#[test]
fn crank_nicolson_matrix_factorizes() {
    let disc = Discretization::new(generate_cartesian(4).unwrap(), 1).unwrap();
    let ops = assemble_global(&disc, &MaterialParams::default()).unwrap();
    let tau = 0.25;
    let k = ops.a.combine(1.0 / tau, &ops.b, -0.5);
    let free = free_indices(k.nrows(), &ops.constrained);
    let kff = k.extract(&free, &free);
    let handle = factorize(&kff).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b: Vec<f64> = (0..free.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = solve(&handle, &b).unwrap();
    let r: Vec<f64> = kff.matvec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
    let bound = 1e-10 * (kff.max_abs() * norm(&x) + norm(&b));
    assert!(norm(&r) <= bound, "residual {:e}", norm(&r));
}
