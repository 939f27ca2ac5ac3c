use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hho_stokes::hho::DEFAULT_QUAD_BOOST;
use hho_stokes::mesh::{MeshFamily, DEFAULT_DISTORTION};
use hho_stokes::rheology::{FlowLaw, LawKind};
use hho_stokes::solver::NewtonConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    /// Solve the trigonometric benchmark on one mesh.
    Solve,
    /// Run the benchmark on a sequence of refined meshes.
    Convergence,
    /// Check the power-framed inequalities of the flow law.
    CheckLaw,
    /// Print mesh counts and regularity diagnostics.
    MeshInfo,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Convergence => "convergence",
            CommandKind::CheckLaw => "check-law",
            CommandKind::MeshInfo => "mesh-info",
        }
    }
}

/// Run configuration. Every key is optional in the JSON file; unknown keys
/// are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: CommandKind,
    pub law: FlowLaw,
    /// Built-in mesh family; defaults to Cartesian when no mesh file is given.
    pub family: Option<MeshFamily>,
    pub distortion: f64,
    /// Mesh file, exclusive with `family`.
    pub mesh_file: Option<PathBuf>,
    /// Cells per side for `solve` and `mesh-info`.
    pub n: usize,
    /// Cells per side of every level for `convergence`.
    pub levels: Vec<usize>,
    pub k: usize,
    /// Stabilization parameter; `√(σ_sm σ_hc)` when absent.
    pub gamma: Option<f64>,
    pub newton: NewtonConfig,
    pub quad_boost: usize,
    pub out: PathBuf,
    pub seed: u64,
    /// Samples per law for `check-law`.
    pub samples: usize,
    /// Exponents checked by `check-law`; the law's own `r` when empty.
    pub r_values: Vec<f64>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: CommandKind::Solve,
            law: FlowLaw::newtonian(1.0),
            family: None,
            distortion: DEFAULT_DISTORTION,
            mesh_file: None,
            n: 8,
            levels: vec![4, 8, 16, 32],
            k: 1,
            gamma: None,
            newton: NewtonConfig::default(),
            quad_boost: DEFAULT_QUAD_BOOST,
            out: PathBuf::from("hho-out"),
            seed: 0,
            samples: 10_000,
            r_values: Vec::new(),
            threads: None,
        }
    }
}

/// Command-line overrides, one per configuration key.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for element loops.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flow law kind: carreau_yasuda, power_law or newtonian.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Flow behaviour index; re-tags the law kind unless `--kind` is given.
    #[arg(long)]
    pub r: Option<f64>,
    /// cartesian, distorted_triangular or distorted_cartesian.
    #[arg(long)]
    pub family: Option<MeshFamily>,
    #[arg(long)]
    pub distortion: Option<f64>,
    #[arg(long)]
    pub mesh_file: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated cells per side, e.g. `4,8,16,32`.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub max_halvings: Option<usize>,
    #[arg(long)]
    pub damping: Option<bool>,
    #[arg(long)]
    pub condense: Option<bool>,
    #[arg(long)]
    pub continuation: Option<bool>,
    #[arg(long)]
    pub continuation_step: Option<f64>,
    #[arg(long)]
    pub intermediate_tol: Option<f64>,
    #[arg(long)]
    pub quad_boost: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated exponents for `check-law`.
    #[arg(long, value_delimiter = ',')]
    pub r_values: Option<Vec<f64>>,
}

fn parse_kind(s: &str) -> Result<LawKind, CliError> {
    match s {
        "carreau_yasuda" => Ok(LawKind::CarreauYasuda),
        "power_law" => Ok(LawKind::PowerLaw),
        "newtonian" => Ok(LawKind::Newtonian),
        other => Err(CliError::Config(format!(
            "unknown law kind `{other}` (expected carreau_yasuda, power_law or newtonian)"
        ))),
    }
}

/// Reads a JSON configuration file.
pub fn load_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Builds the validated configuration of `command` from an optional file and
/// the flag overrides.
pub fn parse_config(command: CommandKind, flags: &Overrides) -> Result<RunConfig, CliError> {
    let mut c = match &flags.config {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };
    c.command = command;
    if let Some(v) = &flags.kind {
        c.law.kind = parse_kind(v)?;
    }
    if let Some(v) = flags.mu {
        c.law.mu = v;
    }
    if let Some(v) = flags.delta {
        c.law.delta = v;
    }
    if let Some(v) = flags.a {
        c.law.a = v;
    }
    if let Some(r) = flags.r {
        c.law = if flags.kind.is_some() {
            FlowLaw { r, ..c.law }
        } else {
            c.law.with_exponent(r)
        };
    }
    if flags.delta.is_some() && flags.kind.is_none() && flags.r.is_none() {
        c.law = c.law.with_exponent(c.law.r);
    }
    if let Some(v) = flags.family {
        c.family = Some(v);
    }
    if let Some(v) = flags.distortion {
        c.distortion = v;
    }
    if let Some(v) = &flags.mesh_file {
        c.mesh_file = Some(v.clone());
    }
    if let Some(v) = flags.n {
        c.n = v;
    }
    if let Some(v) = &flags.levels {
        c.levels = v.clone();
    }
    if let Some(v) = flags.k {
        c.k = v;
    }
    if let Some(v) = flags.gamma {
        c.gamma = Some(v);
    }
    let nw = &mut c.newton;
    if let Some(v) = flags.tol {
        nw.tol = v;
    }
    if let Some(v) = flags.max_iter {
        nw.max_iter = v;
    }
    if let Some(v) = flags.max_halvings {
        nw.max_halvings = v;
    }
    if let Some(v) = flags.damping {
        nw.damping = v;
    }
    if let Some(v) = flags.condense {
        nw.condense = v;
    }
    if let Some(v) = flags.continuation {
        nw.continuation = v;
    }
    if let Some(v) = flags.continuation_step {
        nw.continuation_step = v;
    }
    if let Some(v) = flags.intermediate_tol {
        nw.intermediate_tol = v;
    }
    if let Some(v) = flags.quad_boost {
        c.quad_boost = v;
    }
    if let Some(v) = &flags.out {
        c.out = v.clone();
    }
    if let Some(v) = flags.seed {
        c.seed = v;
    }
    if let Some(v) = flags.samples {
        c.samples = v;
    }
    if let Some(v) = &flags.r_values {
        c.r_values = v.clone();
    }
    if let Some(v) = flags.threads {
        c.threads = Some(v);
    }
    validate(&c)?;
    Ok(c)
}

fn bad(msg: impl Into<String>) -> Result<(), CliError> {
    Err(CliError::Config(msg.into()))
}

/// Checks every value against the preconditions of the solver modules.
pub fn validate(c: &RunConfig) -> Result<(), CliError> {
    c.law.validate()?;
    if let Some(g) = c.gamma {
        c.law.constants().check_gamma(g)?;
    }
    if c.mesh_file.is_some() && c.family.is_some() {
        return bad("conflicting mesh sources: give either `family` or `mesh_file`, not both");
    }
    if c.command == CommandKind::Convergence && c.mesh_file.is_some() {
        return bad("`convergence` refines a built-in family and cannot use `mesh_file`");
    }
    if !(0.0..0.5).contains(&c.distortion) {
        return bad(format!("distortion must lie in [0, 0.5), got {}", c.distortion));
    }
    if c.k == 0 {
        return bad("polynomial degree k must be at least 1");
    }
    if c.n == 0 {
        return bad("n must be at least 1");
    }
    if c.command == CommandKind::Convergence {
        if c.levels.len() < 2 {
            return bad("`levels` needs at least two entries");
        }
        if c.levels.contains(&0) || c.levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("`levels` must be positive and strictly increasing, got {:?}", c.levels));
        }
    }
    let nw = &c.newton;
    if !(nw.tol > 0.0) || !(nw.intermediate_tol > 0.0) {
        return bad("Newton tolerances must be positive");
    }
    if !(nw.continuation_step > 0.0) {
        return bad(format!("continuation_step must be positive, got {}", nw.continuation_step));
    }
    if c.samples == 0 {
        return bad("samples must be at least 1");
    }
    for &r in &c.r_values {
        if !(r.is_finite() && r > 1.0) {
            return bad(format!("r_values entries must lie in (1, inf), got {r}"));
        }
    }
    if c.threads == Some(0) {
        return bad("threads must be at least 1");
    }
    Ok(())
}
