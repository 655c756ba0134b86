//! `zener-vem`: mesh generation, convergence studies, patch, energy and
//! marker runs. Exit codes: 0 success, 1 check failed, 2 usage error.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{check_size, family_member, parse_sizes, Boundary, Family, RunConfig, UsageError};
use zener_vem::assemble::{assemble_global, Discretization, MaterialParams};
use zener_vem::mesh::{generate_cartesian, generate_hexagonal, write_mesh, MeshKind};
use zener_vem::mms::{
    build_case, convergence_csv, convergence_study, fitted_rates, late_window_ratio, marker_csv, marker_experiment,
    patch_test, MarkerConfig, TimeRule, FIELD_NAMES,
};
use zener_vem::timeloop::{energy, random_weakly_symmetric_state, run_unforced, weak_symmetry_residual};

#[derive(Parser, Debug)]
#[command(name = "zener-vem", version, about = "Mixed VEM solver for Zener viscoelasticity")]
struct Cli {
    /// Worker threads for per-cell work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a mesh, print its counts and quality, optionally write it.
    Mesh(MeshArgs),
    /// Run a convergence study and check the fitted rates against k + 1.
    Convergence(ConvergenceArgs),
    /// Steady constant-stress solution on squares and hexagons.
    Patch(PatchArgs),
    /// Energy decay of unforced runs from random weakly symmetric data.
    Energy(EnergyArgs),
    /// Velocity at the centre under a constant load, both viscosities.
    Marker(MarkerArgs),
}

#[derive(Args, Debug)]
struct MeshArgs {
    kind: Family,
    /// n for cartesian/hexagonal, `n_left n_right` for partitioned.
    #[arg(required = true, num_args = 1..=2)]
    sizes: Vec<usize>,
    /// Output file (vemmesh format).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    mesh_kind: Option<Family>,
    /// e.g. `6..12` or `4,6,8`; partitioned size m means (2m, 3m).
    #[arg(long)]
    sizes: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Step on the coarsest mesh (default h₀); τ = τ₀ (h/h₀)^((k+1)/2).
    #[arg(long)]
    tau0: Option<f64>,
    /// JSON material parameters; missing entries keep their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Named parameter set, applied before --params.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    boundary: Option<Boundary>,
    /// Directory for convergence.csv and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum Preset {
    Default,
    NearlyIncompressible,
}

#[derive(Args, Debug)]
struct PatchArgs {
    /// Only this degree (default: 1 and 2).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Final time of the 200-step run, so τ = T/200.
    #[arg(long = "T", default_value_t = 20.0)]
    t_end: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MarkerArgs {
    #[arg(long = "T", default_value_t = 100.0)]
    t_end: f64,
    /// Directory for marker_standard.csv, marker_low_viscosity.csv and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<zener_vem::VemError> for Failure {
    fn from(e: zener_vem::VemError) -> Self {
        Failure::Check(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.command {
        Command::Mesh(a) => cmd_mesh(a),
        Command::Convergence(a) => cmd_convergence(a, cli.threads),
        Command::Patch(a) => cmd_patch(a),
        Command::Energy(a) => cmd_energy(a),
        Command::Marker(a) => cmd_marker(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Prints the report and, with an output directory, saves it as report.txt.
fn emit_report(report: &str, out: Option<&Path>) -> Outcome {
    print!("{report}");
    if let Some(dir) = out {
        write_file(&dir.join("report.txt"), report)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn cmd_mesh(a: MeshArgs) -> Outcome {
    let kind = match (a.kind, a.sizes.as_slice()) {
        (Family::Partitioned, [l, r]) => MeshKind::Partitioned(*l, *r),
        (Family::Partitioned, _) => return Err(Failure::Usage("partitioned needs two sizes: n_left n_right".into())),
        (f, [n]) => family_member(f, *n),
        (_, _) => return Err(Failure::Usage("cartesian and hexagonal take one size".into())),
    };
    check_size(kind)?;
    let mesh = kind.generate()?;
    let q = mesh.quality();
    let mut r = String::new();
    let _ = writeln!(r, "mesh {kind:?}");
    let _ = writeln!(r, "vertices {}", mesh.num_vertices());
    let _ = writeln!(r, "cells {}", mesh.num_cells());
    let _ = writeln!(r, "edges {}", mesh.num_edges());
    let _ = writeln!(r, "total area {:.15}", mesh.total_area());
    let _ = writeln!(r, "max diameter {:.6}", mesh.max_diameter());
    let _ = writeln!(r, "min edge ratio {:.6}", q.min_edge_ratio);
    let _ = writeln!(r, "min inradius ratio {:.6}", q.min_inradius_ratio);
    let _ = writeln!(r, "max vertices per cell {}", q.max_vertices_per_cell);
    let _ = writeln!(r, "hanging nodes {}", mesh.hanging_nodes().len());
    print!("{r}");
    if let Some(path) = a.out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        write_mesh(&mesh, &path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn read_params(path: &Path, base: MaterialParams) -> Result<MaterialParams, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let mut value = serde_json::to_value(base).expect("parameters serialize");
    let patch: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(fields) = patch else {
        return config::usage(format!("{}: expected a JSON object", path.display()));
    };
    for (k, v) in fields {
        if value.get(&k).is_none() {
            return config::usage(format!("{}: unknown parameter '{k}'", path.display()));
        }
        value[k] = v;
    }
    serde_json::from_value(value).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn resolve_config(a: ConvergenceArgs, threads: Option<usize>) -> Result<RunConfig, UsageError> {
    let mut c = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(k) = a.k {
        c.k = k;
    }
    if let Some(case) = a.case {
        c.case = case;
    }
    if let Some(f) = a.mesh_kind {
        c.mesh_kind = f;
    }
    if let Some(s) = a.sizes {
        c.sizes = parse_sizes(&s)?;
    }
    if let Some(t) = a.t_end {
        c.t_end = t;
    }
    if let Some(t) = a.tau0 {
        c.tau0 = Some(t);
    }
    match a.preset {
        Some(Preset::Default) => c.params = MaterialParams::default(),
        Some(Preset::NearlyIncompressible) => c.params = MaterialParams::nearly_incompressible(),
        None => {}
    }
    if let Some(p) = &a.params {
        c.params = read_params(p, c.params)?;
    }
    if let Some(b) = a.boundary {
        c.boundary = b;
    }
    if a.out.is_some() {
        c.out = a.out;
    }
    if threads.is_some() {
        c.threads = threads;
    }
    c.validate()?;
    Ok(c)
}

fn cmd_convergence(a: ConvergenceArgs, threads: Option<usize>) -> Outcome {
    let c = resolve_config(a, threads)?;
    let case = build_case(&c.case, &c.params)?;
    let rule = TimeRule {
        tau0: c.tau0,
        t_end: c.t_end,
    };
    let rows = convergence_study(&case, &c.meshes(), c.boundary.into(), c.k, rule)?;
    let fitted = fitted_rates(&rows);
    let bound = c.k as f64 + 1.0 - 0.15;

    let mut r = String::new();
    let _ = writeln!(
        r,
        "case {} k={} {:?} sizes {:?} T={} boundary {:?}",
        c.case, c.k, c.mesh_kind, c.sizes, c.t_end, c.boundary
    );
    let p = &c.params;
    let _ = writeln!(
        r,
        "params mu0 {} lambda0 {} mu0p {} lambda0p {} mu1 {} lambda1 {} rho {}",
        p.mu0, p.lambda0, p.mu0p, p.lambda0p, p.mu1, p.lambda1, p.rho
    );
    let _ = writeln!(r, "{:>9} {:>8} {:>9} {:>5}  {}", "h", "dofs", "tau", "steps", error_header());
    for row in &rows {
        let e = row.errors.as_array();
        let _ = write!(r, "{:>9.5} {:>8} {:>9.5} {:>5} ", row.h, row.dofs, row.tau, row.steps);
        for i in 0..5 {
            let rate = row.rates.map_or("  -  ".to_string(), |rt| format!("{:5.2}", rt[i]));
            let _ = write!(r, " {:>10.3e} {rate}", e[i]);
        }
        r.push('\n');
    }
    let _ = write!(r, "fitted rates:");
    for (name, v) in FIELD_NAMES.iter().zip(fitted) {
        let _ = write!(r, " {name} {v:.3}");
    }
    r.push('\n');
    let low: Vec<String> = FIELD_NAMES
        .iter()
        .zip(fitted)
        .filter(|(_, v)| v.is_nan() || *v < bound)
        .map(|(n, v)| format!("{n} ({v:.3})"))
        .collect();
    let verdict = if low.is_empty() {
        format!("PASS: all fitted rates >= {bound:.2}\n")
    } else {
        format!("FAIL: fitted rate below {bound:.2} for {}\n", low.join(", "))
    };
    r.push_str(&verdict);
    if let Some(dir) = &c.out {
        write_file(&dir.join("convergence.csv"), &convergence_csv(&rows))?;
    }
    emit_report(&r, c.out.as_deref())?;
    if low.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("fitted rate below {bound:.2} for {}", low.join(", "))))
    }
}

fn error_header() -> String {
    FIELD_NAMES.iter().map(|n| format!("{:>10} {:>5}", format!("e_{n}"), "rate")).collect::<Vec<_>>().join(" ")
}

fn cmd_patch(a: PatchArgs) -> Outcome {
    let degrees = match a.k {
        Some(k) if (1..=3).contains(&k) => vec![k],
        Some(k) => return Err(Failure::Usage(format!("k must be 1, 2 or 3, got {k}"))),
        None => vec![1, 2],
    };
    let mut r = String::new();
    let mut worst: f64 = 0.0;
    for k in degrees {
        for (name, mesh) in [("cartesian 3x3", generate_cartesian(3)?), ("hexagonal n=4", generate_hexagonal(4)?)] {
            let e = patch_test(mesh, k)?;
            worst = worst.max(e);
            let _ = writeln!(r, "{name} k={k}: max error {e:.3e}");
        }
    }
    let ok = worst <= 1e-9;
    let _ = writeln!(r, "{}: max error {worst:.3e} (bound 1e-9)", if ok { "PASS" } else { "FAIL" });
    emit_report(&r, a.out.as_deref())?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check(format!("patch error {worst:.3e} exceeds 1e-9")))
    }
}

fn cmd_energy(a: EnergyArgs) -> Outcome {
    if !(a.t_end > 0.0 && a.t_end.is_finite()) {
        return Err(Failure::Usage("T must be positive".into()));
    }
    let steps = 200;
    let disc = Discretization::new(generate_cartesian(8)?, 1)?;
    let ops = assemble_global(&disc, &MaterialParams::default())?;
    let s0 = random_weakly_symmetric_state(&disc, &ops, a.seed)?;
    let e0 = energy(&disc, &ops, &s0);
    let h0 = weak_symmetry_residual(&disc, &ops, &s0.x);
    let mut csv = String::from("t,energy,dissipation\n");
    let _ = writeln!(csv, "{},{:e},{:e}", e0.t, e0.total, e0.dissipation);
    let mut prev = e0.total;
    let mut first_bad: Option<usize> = None;
    let mut drift: f64 = 0.0;
    let end = run_unforced(&ops, s0, a.t_end, steps, |s| {
        let e = energy(&disc, &ops, s);
        let _ = writeln!(csv, "{},{:e},{:e}", e.t, e.total, e.dissipation);
        if e.total > prev + 1e-12 * e0.total && first_bad.is_none() {
            first_bad = Some(s.step);
        }
        prev = e.total;
        let h = weak_symmetry_residual(&disc, &ops, &s.x);
        drift = drift.max(h.iter().zip(&h0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    })?;
    let mut r = String::new();
    let _ = writeln!(r, "cartesian 8x8, k=1, seed {}, {steps} steps of tau = {}", a.seed, a.t_end / steps as f64);
    let _ = writeln!(r, "E0 = {:.6e}, E_end = {:.6e} at t = {}", e0.total, prev, end.t);
    let _ = writeln!(r, "max weak symmetry drift {drift:.2e}");
    match first_bad {
        None => {
            let _ = writeln!(r, "PASS: {steps}/{steps} steps nonincreasing");
        }
        Some(n) => {
            let _ = writeln!(r, "FAIL: energy increased at step {n}");
        }
    }
    if let Some(dir) = &a.out {
        write_file(&dir.join("energy.csv"), &csv)?;
    }
    emit_report(&r, a.out.as_deref())?;
    match first_bad {
        None => Ok(()),
        Some(n) => Err(Failure::Check(format!("energy increased at step {n}"))),
    }
}

fn cmd_marker(a: MarkerArgs) -> Outcome {
    if !(a.t_end > 0.0 && a.t_end.is_finite()) {
        return Err(Failure::Usage("T must be positive".into()));
    }
    let window = 0.8 * a.t_end;
    let mut r = String::new();
    let mut failed = Vec::new();
    for (name, mut cfg, damped) in [
        ("standard", MarkerConfig::default(), true),
        ("low_viscosity", MarkerConfig::low_viscosity(), false),
    ] {
        cfg.t_end = a.t_end;
        let series = marker_experiment(&cfg)?;
        let ratio = late_window_ratio(&series, window);
        let ok = if damped { ratio < 0.05 } else { ratio > 0.5 };
        let want = if damped { "< 0.05" } else { "> 0.5" };
        let _ = writeln!(
            r,
            "{name}: late-window (t >= {window}) amplitude ratio {ratio:.4} (want {want}) {}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(name);
        }
        if let Some(dir) = &a.out {
            write_file(&dir.join(format!("marker_{name}.csv")), &marker_csv(&series))?;
        }
    }
    emit_report(&r, a.out.as_deref())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("marker ratio out of range for {}", failed.join(", "))))
    }
}
