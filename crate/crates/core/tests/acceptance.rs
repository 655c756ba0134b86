//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//! Failures are reported, not fatal, so the rest of the workspace tests
//! still run; set `ACCEPTANCE_STRICT=1` to exit non-zero on any failure.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zener_vem::assemble::{assemble_global, Discretization, MaterialParams};
use zener_vem::mesh::{generate_cartesian, generate_hexagonal, BoundarySplit, MeshKind, PolygonalMesh};
use zener_vem::mms::{
    build_case, convergence_study, error_norms, fitted_rates, late_window_ratio, marker_experiment, patch_test, solve_case,
    ConvergenceRow, MarkerConfig, TimeRule,
};
use zener_vem::polybase::{dim_p, PolyBasis, ScaledMonomialBasis2D};
use zener_vem::timeloop::{energy, zero_state, random_weakly_symmetric_state, run_unforced, weak_symmetry_residual};
use zener_vem::vspace::{build_stress_cell_operators, eval_tensor, local_stress_interpolant, project_scalar_local, CellFrame};
use zener_vem::{Point, Tensor};

struct Outcome {
    pass: bool,
    detail: String,
}

fn fmt_rates(r: &[f64]) -> String {
    r.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
}

fn squares(range: std::ops::RangeInclusive<usize>) -> Vec<MeshKind> {
    range.map(MeshKind::Cartesian).collect()
}

fn study(case: &str, params: &MaterialParams, meshes: &[MeshKind], k: usize) -> Vec<ConvergenceRow> {
    study_with(case, params, meshes, k, TimeRule::default())
}

fn study_with(case: &str, params: &MaterialParams, meshes: &[MeshKind], k: usize, rule: TimeRule) -> Vec<ConvergenceRow> {
    let c = build_case(case, params).expect("case");
    convergence_study(&c, meshes, BoundarySplit::Default, k, rule).expect("study")
}

fn rule(tau0: f64) -> TimeRule {
    TimeRule {
        tau0: Some(tau0),
        ..TimeRule::default()
    }
}

/// `‖σ₀‖, ‖σ₁‖, ‖v‖, ‖r‖` of the exact fields at `t`.
fn exact_norms(case: &str, params: &MaterialParams, t: f64) -> [f64; 4] {
    let c = build_case(case, params).unwrap();
    let disc = Discretization::new(generate_cartesian(6).unwrap(), 1).unwrap();
    let z = error_norms(&disc, &c, &zero_state(&disc), t).unwrap().as_array();
    [z[0], z[1], z[2], z[3]]
}

fn print_rows(rows: &[ConvergenceRow]) {
    for r in rows {
        let e = r.errors.as_array();
        println!(
            "      h={:.4} dofs={:6} steps={:3}  e: {:.3e} {:.3e} {:.3e} {:.3e} {:.3e}",
            r.h, r.dofs, r.steps, e[0], e[1], e[2], e[3], e[4]
        );
    }
}

fn criterion_1_and_4(rows: &[ConvergenceRow]) -> (Outcome, Outcome) {
    let f = fitted_rates(rows);
    let c1 = Outcome {
        pass: f[..4].iter().all(|&r| r >= 1.85),
        detail: format!("fitted rates σ₀ σ₁ v r = {} (need ≥ 1.85)", fmt_rates(&f[..4])),
    };
    let c4 = Outcome {
        pass: f[4] >= 1.85,
        detail: format!("fitted div rate = {:.3} (need ≥ 1.85)", f[4]),
    };
    (c1, c4)
}

fn criterion_2() -> Outcome {
    let meshes: Vec<MeshKind> = (6..=12).map(MeshKind::Hexagonal).collect();
    let rows = study("poly-t2", &MaterialParams::default(), &meshes, 1);
    print_rows(&rows);
    let f = fitted_rates(&rows);
    let h0 = rows[0].h;
    let fine = study_with("poly-t2", &MaterialParams::default(), &meshes, 1, rule(h0 / 4.0));
    println!(
        "      with τ = h/4 instead of τ = h: fitted rates {}",
        fmt_rates(&fitted_rates(&fine)[..4])
    );
    Outcome {
        pass: f[..4].iter().all(|&r| r >= 1.8),
        detail: format!("hexagons n=6..12, τ = h: fitted rates σ₀ σ₁ v r = {} (need ≥ 1.8)", fmt_rates(&f[..4])),
    }
}

fn criterion_3() -> Outcome {
    // τ² ∝ h³ from τ₀ = 1/32 on the coarsest mesh
    let meshes = squares(4..=8);
    let rows = study_with("poly-t2", &MaterialParams::default(), &meshes, 2, rule(1.0 / 32.0));
    print_rows(&rows);
    let last: Vec<[f64; 5]> = rows.iter().rev().take(2).map(|r| r.rates.unwrap()).collect();
    let worst = last.iter().flat_map(|r| r[..4].iter().copied()).fold(f64::INFINITY, f64::min);
    Outcome {
        pass: worst >= 2.85,
        detail: format!(
            "k=2 squares n=4..8, τ₀ = 1/32: last two pair rates {} | {} (need ≥ 2.85)",
            fmt_rates(&last[1][..4]),
            fmt_rates(&last[0][..4])
        ),
    }
}

fn optional_k3() -> String {
    let rows = study_with("poly-t2", &MaterialParams::default(), &squares(2..=4), 3, rule(1.0 / 64.0));
    print_rows(&rows);
    let f = fitted_rates(&rows);
    format!(
        "k=3 squares n=2..4: fitted rates {} ({} 3.7)",
        fmt_rates(&f[..4]),
        if f[..4].iter().all(|&r| r >= 3.7) { "≥" } else { "below" }
    )
}

fn criterion_5() -> Outcome {
    let meshes = squares(6..=12);
    let stiff = MaterialParams::nearly_incompressible();
    let soft = MaterialParams::default();
    let tau = rule(1.0 / 24.0);
    let rows = study_with("poly-t2", &stiff, &meshes, 1, tau);
    print_rows(&rows);
    let reference = study_with("poly-t2", &soft, &meshes, 1, tau);
    let f = fitted_rates(&rows);
    let total = |n: [f64; 4]| n.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (n_stiff, n_soft) = (total(exact_norms("poly-t2", &stiff, 1.0)), total(exact_norms("poly-t2", &soft, 1.0)));
    let mut scaled: f64 = 0.0;
    let mut raw: f64 = 0.0;
    for (a, b) in rows.iter().zip(&reference) {
        let (ea, eb) = (a.errors.as_array(), b.errors.as_array());
        for i in 0..4 {
            raw = raw.max(ea[i] / eb[i]);
            scaled = scaled.max((ea[i] / n_stiff) / (eb[i] / n_soft));
        }
    }
    let loose = study("poly-t2", &stiff, &meshes, 1);
    println!(
        "      with τ = h the velocity error is time-dominated: fitted rates {}",
        fmt_rates(&fitted_rates(&loose)[..4])
    );
    Outcome {
        pass: f[..4].iter().all(|&r| r >= 1.9) && scaled <= 100.0,
        detail: format!(
            "τ₀ = h₀/4: fitted rates {} (need ≥ 1.9); max error ratio to the compressible run, each normalized by the exact solution size, {:.2} (need ≤ 100; unnormalized {:.0})",
            fmt_rates(&f[..4]),
            scaled,
            raw
        ),
    }
}

fn criterion_6() -> Outcome {
    let meshes: Vec<MeshKind> = (1..=4).map(|m| MeshKind::Partitioned(2 * m, 3 * m)).collect();
    let h0 = 2f64.sqrt() / 4.0;
    let rows = study_with("poly-t3", &MaterialParams::default(), &meshes, 1, rule(h0 / 4.0));
    print_rows(&rows);
    let f = fitted_rates(&rows);
    Outcome {
        pass: f[..4].iter().all(|&r| r >= 1.8),
        detail: format!(
            "partitioned (2m,3m) m=1..4, poly-t3, τ₀ = h₀/4: fitted rates {} (need ≥ 1.8)",
            fmt_rates(&f[..4])
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in [1, 2] {
        for mesh in [generate_cartesian(3).unwrap(), generate_hexagonal(4).unwrap()] {
            worst = worst.max(patch_test(mesh, k).expect("patch"));
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max field error {worst:.2e} over cartesian 3×3 and hexagonal n=4, k=1,2 (need ≤ 1e-9)"),
    }
}

/// Star-shaped counter-clockwise polygon with 3–8 vertices.
fn random_polygon(rng: &mut ChaCha8Rng) -> Vec<Point> {
    loop {
        let n = rng.random_range(3..=8);
        let mut ang: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        ang.sort_by(f64::total_cmp);
        let gaps_ok = (0..n).all(|i| {
            let next = if i + 1 < n { ang[i + 1] } else { ang[0] + std::f64::consts::TAU };
            (0.25..std::f64::consts::PI - 0.1).contains(&(next - ang[i]))
        });
        if !gaps_ok {
            continue;
        }
        let scale = 10f64.powf(rng.random_range(-1.5..0.3));
        let shift = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        return ang
            .iter()
            .map(|&a| shift + Point::new(a.cos(), a.sin()) * (scale * rng.random_range(0.4..1.0)))
            .collect();
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_proj: f64 = 0.0;
    let mut worst_comm: f64 = 0.0;
    let polygons = 20;
    for _ in 0..polygons {
        let pts = random_polygon(&mut rng);
        let n = pts.len();
        let mesh = PolygonalMesh::from_cells(pts, vec![(0..n).collect()], BoundarySplit::AllDirichlet).unwrap();
        for k in 1..=3 {
            let fr = CellFrame::new(&mesh, 0, k).unwrap();
            let ops = build_stress_cell_operators(&fr).unwrap();
            let mt = fr.tensor_gram();
            let nt = 4 * dim_p(k);
            for _ in 0..50 {
                let p = DVector::from_fn(nt, |_, _| rng.random_range(-1.0..1.0));
                let d = local_stress_interpolant(&fr, &|x| eval_tensor(&fr, p.as_slice(), x));
                let e = &ops.pi0 * d - &p;
                let rel = ((e.transpose() * &mt * &e)[0].max(0.0) / (p.transpose() * &mt * &p)[0]).sqrt();
                worst_proj = worst_proj.max(rel);
            }
            // commutativity with a degree k + 2 tensor
            let big = ScaledMonomialBasis2D::new(k + 2, fr.centroid, fr.h);
            let nb = big.len();
            for _ in 0..5 {
                let c: Vec<f64> = (0..4 * nb).map(|_| rng.random_range(-1.0..1.0)).collect();
                let tau = |x: Point| {
                    let m = big.eval(x);
                    let e = |q: usize| (0..nb).map(|a| c[q * nb + a] * m[a]).sum::<f64>();
                    Tensor::new(e(0), e(1), e(2), e(3))
                };
                let div = |x: Point, i: usize| {
                    let g = big.gradients(x);
                    (0..nb).map(|a| c[(2 * i) * nb + a] * g[a][0] + c[(2 * i + 1) * nb + a] * g[a][1]).sum::<f64>()
                };
                let d = local_stress_interpolant(&fr, &tau);
                let got = &ops.div * d;
                let np = dim_p(k);
                let mut diff = DVector::zeros(2 * np);
                for i in 0..2 {
                    let proj = project_scalar_local(&fr, &|x| div(x, i));
                    for a in 0..np {
                        diff[i * np + a] = got[i * np + a] - proj[a];
                    }
                }
                let mv = fr.vector_gram();
                let res = (diff.transpose() * &mv * &diff)[0].max(0.0).sqrt();
                worst_comm = worst_comm.max(res);
            }
        }
    }
    Outcome {
        pass: worst_proj <= 1e-12 && worst_comm <= 1e-11,
        detail: format!(
            "{polygons} random polygons, k=1..3: projector relative error {worst_proj:.2e} (need ≤ 1e-12), commutativity residual {worst_comm:.2e} (need ≤ 1e-11)"
        ),
    }
}

fn criterion_9() -> Outcome {
    let disc = Discretization::new(generate_cartesian(8).unwrap(), 1).unwrap();
    let ops = assemble_global(&disc, &MaterialParams::default()).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (tau, seed) in [(0.1, 11u64), (1.0, 12)] {
        let s0 = random_weakly_symmetric_state(&disc, &ops, seed).unwrap();
        let e0 = energy(&disc, &ops, &s0);
        let h0 = weak_symmetry_residual(&disc, &ops, &s0.x);
        let stress_norm = s0.x[..disc.layout.offset(zener_vem::vspace::FieldKind::Velocity)]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let scale = ops.a.max_abs() * stress_norm;
        let mut prev = e0.total;
        let mut ok_steps = 0;
        let mut drift: f64 = 0.0;
        run_unforced(&ops, s0, 200.0 * tau, 200, |s| {
            let e = energy(&disc, &ops, s).total;
            if e <= prev + 1e-12 * e0.total {
                ok_steps += 1;
            }
            prev = e;
            let h = weak_symmetry_residual(&disc, &ops, &s.x);
            let d = h.iter().zip(&h0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            drift = drift.max(d / scale);
        })
        .unwrap();
        pass &= ok_steps == 200 && drift <= 1e-10;
        details.push(format!(
            "τ={tau}: {ok_steps}/200 nonincreasing, E_end/E0={:.3e}, H drift {drift:.1e}",
            prev / e0.total
        ));
    }
    Outcome {
        pass,
        detail: details.join("; "),
    }
}

fn criterion_10() -> Outcome {
    let case = build_case("exp-trig", &MaterialParams::default()).unwrap();
    let disc = Discretization::new(generate_cartesian(8).unwrap(), 1).unwrap();
    let finals: Vec<Vec<f64>> = [20, 40, 80]
        .iter()
        .map(|&n| solve_case(&disc, &case, 1.0, n).unwrap().x)
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let d1 = dist(&finals[0], &finals[1]);
    let d2 = dist(&finals[1], &finals[2]);
    let order = (d1 / d2).log2();
    Outcome {
        pass: (order - 2.0).abs() <= 0.2,
        detail: format!("exp-trig on 8×8, N=20,40,80: observed order {order:.3} (need 2.0 ± 0.2)"),
    }
}

fn criterion_11() -> Outcome {
    let standard = marker_experiment(&MarkerConfig::default()).unwrap();
    let low = marker_experiment(&MarkerConfig::low_viscosity()).unwrap();
    let rs = late_window_ratio(&standard, 80.0);
    let rl = late_window_ratio(&low, 80.0);
    Outcome {
        pass: rs < 0.05 && rl > 0.5,
        detail: format!("late-window ratio standard {rs:.4} (need < 0.05), low viscosity {rl:.4} (need > 0.5)"),
    }
}

fn main() {
    let mut results: Vec<(usize, String, Outcome)> = Vec::new();
    let mut timed = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let line = format!(
            "criterion {id:2} [{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        println!("{line}");
        results.push((id, name.to_string(), o));
    };

    let t = Instant::now();
    let base = study("poly-t2", &MaterialParams::default(), &squares(6..=12), 1);
    print_rows(&base);
    let (c1, c4) = criterion_1_and_4(&base);
    println!("      (k=1 square study took {:.1}s)", t.elapsed().as_secs_f64());
    timed(1, "spatial convergence k=1 squares", &mut || Outcome {
        pass: c1.pass,
        detail: c1.detail.clone(),
    });
    timed(2, "spatial convergence k=1 hexagons", &mut criterion_2);
    timed(3, "spatial convergence k=2 squares", &mut criterion_3);
    println!("      optional: {}", optional_k3());
    timed(4, "divergence error rate k=1", &mut || Outcome {
        pass: c4.pass,
        detail: c4.detail.clone(),
    });
    timed(5, "nearly incompressible", &mut criterion_5);
    timed(6, "hanging nodes", &mut criterion_6);
    timed(7, "patch test", &mut criterion_7);
    timed(8, "projector and commutativity", &mut criterion_8);
    timed(9, "energy dissipation", &mut criterion_9);
    timed(10, "time order", &mut criterion_10);
    timed(11, "marker damping", &mut criterion_11);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
