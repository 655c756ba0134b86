//! Run configuration: JSON file values, then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use zener_vem::assemble::MaterialParams;
use zener_vem::mesh::{BoundarySplit, MeshKind};
use zener_vem::mms::CASE_NAMES;

/// Bad input from the user; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Cartesian,
    Hexagonal,
    /// size m stands for the (2m, 3m) split
    Partitioned,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Default,
    AllDirichlet,
}

impl From<Boundary> for BoundarySplit {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Default => BoundarySplit::Default,
            Boundary::AllDirichlet => BoundarySplit::AllDirichlet,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: String,
    pub mesh_kind: Family,
    pub sizes: Vec<usize>,
    pub k: usize,
    pub params: MaterialParams,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// First time step; `None` means τ₀ = h₀.
    pub tau0: Option<f64>,
    pub out: Option<PathBuf>,
    pub boundary: Boundary,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: "poly-t2".into(),
            mesh_kind: Family::Cartesian,
            sizes: (6..=12).collect(),
            k: 1,
            params: MaterialParams::default(),
            t_end: 1.0,
            tau0: None,
            out: None,
            boundary: Boundary::Default,
            seed: 2024,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if !(1..=3).contains(&self.k) {
            return usage(format!("k must be 1, 2 or 3, got {}", self.k));
        }
        if !CASE_NAMES.contains(&self.case.as_str()) {
            return usage(format!("unknown case '{}' (expected one of {})", self.case, CASE_NAMES.join(", ")));
        }
        if self.sizes.len() < 2 {
            return usage("a convergence study needs at least two sizes");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return usage("T must be positive");
        }
        if let Some(t) = self.tau0 {
            if !(t > 0.0 && t.is_finite()) {
                return usage("tau0 must be positive");
            }
        }
        if self.threads == Some(0) {
            return usage("threads must be at least 1");
        }
        self.params.validate().map_err(|e| UsageError(e.to_string()))?;
        for m in self.meshes() {
            check_size(m)?;
        }
        Ok(())
    }

    pub fn meshes(&self) -> Vec<MeshKind> {
        self.sizes.iter().map(|&n| family_member(self.mesh_kind, n)).collect()
    }
}

pub fn family_member(f: Family, n: usize) -> MeshKind {
    match f {
        Family::Cartesian => MeshKind::Cartesian(n),
        Family::Hexagonal => MeshKind::Hexagonal(n),
        Family::Partitioned => MeshKind::Partitioned(2 * n, 3 * n),
    }
}

pub fn check_size(m: MeshKind) -> Result<(), UsageError> {
    match m {
        MeshKind::Cartesian(0) => usage("cartesian size must be at least 1"),
        MeshKind::Hexagonal(n) if n < 2 => usage("hexagonal size must be at least 2"),
        MeshKind::Partitioned(l, r) if l == 0 || r == 0 || l == r => {
            usage("partitioned sizes must be positive and different")
        }
        _ => Ok(()),
    }
}

/// `6,7,9` or `6..12` (inclusive) or a mix such as `2,4..6`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, UsageError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| UsageError(format!("bad size '{t}' in '{s}'")));
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                if a > b {
                    return usage(format!("empty size range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return usage("no sizes given");
    }
    Ok(out)
}
