//! Batch front-end of the `hho-stokes` solver: configuration parsing and the
//! `solve`, `convergence`, `check-law` and `mesh-info` runs.

mod config;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use hho_stokes::mesh::{generate, load_mesh, mesh_stats, Mesh, MeshFamily, RegularityReport};
use hho_stokes::rheology::{verify_power_framed, FlowLaw, LawConstants, PowerFramedReport};
use hho_stokes::solver::{max_divergence_residual, solve, DiscreteProblem, DiscreteState, ProblemOptions, SolveReport};
use hho_stokes::verification::{
    error_pressure, error_velocity, run_convergence, ConvergenceConfig, ConvergenceReport, ManufacturedCase,
};
use serde::{Deserialize, Serialize};

pub use config::{load_config_file, parse_config, validate, CommandKind, Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] hho_stokes::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 for invalid input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Solver(hho_stokes::Error::InvalidParameter(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSummary {
    pub vertices: usize,
    pub cells: usize,
    pub faces: usize,
    pub interior_faces: usize,
    pub boundary_faces: usize,
    pub h: f64,
    pub regularity: RegularityReport,
}

impl MeshSummary {
    pub fn of(mesh: &Mesh) -> Self {
        Self {
            vertices: mesh.vertices().len(),
            cells: mesh.num_cells(),
            faces: mesh.num_faces(),
            interior_faces: mesh.num_interior_faces(),
            boundary_faces: mesh.num_boundary_faces(),
            h: mesh.h(),
            regularity: mesh_stats(mesh),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSummary {
    pub k: usize,
    pub law: FlowLaw,
    pub constants: LawConstants,
    pub gamma: f64,
    /// Size of the full Newton system.
    pub unknowns: usize,
    /// Size of the statically condensed system without the multiplier.
    pub condensed_size: usize,
    /// `‖u_h − I_h u‖_{ε,r,h}`.
    pub err_vel: f64,
    /// `‖p_h − π_h p‖_{L^{r'}}`.
    pub err_pre: f64,
    pub velocity_norm: f64,
    /// `max_q |b_h(u_h, q)| / ‖u_h‖_{ε,r,h}`.
    pub divergence_residual: f64,
    pub pressure_integral: f64,
    pub newton: SolveReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawCheck {
    pub law: FlowLaw,
    pub report: PowerFramedReport,
}

/// Content of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub command: CommandKind,
    pub success: bool,
    pub config: RunConfig,
    pub mesh: Option<MeshSummary>,
    pub solve: Option<SolveSummary>,
    pub convergence: Option<ConvergenceReport>,
    pub law_checks: Vec<LawCheck>,
    /// Files written to the output directory, summary excluded.
    pub files: Vec<String>,
}

impl Summary {
    fn new(config: &RunConfig) -> Self {
        Self {
            command: config.command,
            success: true,
            config: config.clone(),
            mesh: None,
            solve: None,
            convergence: None,
            law_checks: Vec::new(),
            files: Vec::new(),
        }
    }
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Result of [`run`]: the summary and the text printed to standard output.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub stdout: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.summary.success {
            0
        } else {
            1
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(dir: &Path, name: &str, content: &str, summary: &mut Summary) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    summary.files.push(name.to_string());
    Ok(())
}

fn build_mesh(config: &RunConfig) -> Result<Mesh, CliError> {
    Ok(match &config.mesh_file {
        Some(path) => load_mesh(path)?,
        None => generate(config.family.unwrap_or(MeshFamily::Cartesian), config.n, config.distortion)?,
    })
}

/// Executes a validated configuration and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    validate(config)?;
    std::fs::create_dir_all(&config.out).map_err(|e| io_err(&config.out, e))?;
    let mut summary = Summary::new(config);
    let mut out = String::new();
    match config.command {
        CommandKind::MeshInfo => mesh_info(config, &mut summary, &mut out)?,
        CommandKind::CheckLaw => check_law(config, &mut summary, &mut out),
        CommandKind::Solve => run_solve(config, &mut summary, &mut out)?,
        CommandKind::Convergence => run_study(config, &mut summary, &mut out)?,
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let path = config.out.join(SUMMARY_FILE);
    std::fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    Ok(RunOutcome { summary, stdout: out })
}

/// Parses a `summary.json` file.
pub fn read_summary(path: &Path) -> Result<Summary, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn mesh_info(config: &RunConfig, summary: &mut Summary, out: &mut String) -> Result<(), CliError> {
    let mesh = build_mesh(config)?;
    let m = MeshSummary::of(&mesh);
    let _ = writeln!(out, "vertices: {}", m.vertices);
    let _ = writeln!(out, "cells: {}", m.cells);
    let _ = writeln!(out, "faces: {} ({} interior, {} boundary)", m.faces, m.interior_faces, m.boundary_faces);
    let _ = writeln!(out, "h: {}", m.h);
    let _ = writeln!(out, "max faces per cell: {}", m.regularity.max_faces_per_cell);
    let _ = writeln!(out, "min inradius/diameter: {:.6}", m.regularity.min_inradius_ratio);
    let _ = writeln!(
        out,
        "face/cell diameter ratio: [{:.6}, {:.6}]",
        m.regularity.min_face_cell_ratio, m.regularity.max_face_cell_ratio
    );
    summary.mesh = Some(m);
    Ok(())
}

fn check_law(config: &RunConfig, summary: &mut Summary, out: &mut String) {
    let rs = if config.r_values.is_empty() {
        vec![config.law.r]
    } else {
        config.r_values.clone()
    };
    for (i, &r) in rs.iter().enumerate() {
        let law = config.law.with_exponent(r);
        let report = verify_power_framed(&law, config.samples, config.seed.wrapping_add(i as u64));
        let _ = writeln!(
            out,
            "check-law r={r} delta={}: {} (Hölder ratio {:.9}, monotonicity ratio {:.9}, {} samples)",
            law.delta,
            if report.pass { "PASS" } else { "FAIL" },
            report.worst_holder_ratio,
            report.worst_monotonicity_ratio,
            report.samples
        );
        summary.success &= report.pass;
        summary.law_checks.push(LawCheck { law, report });
    }
}

fn run_solve(config: &RunConfig, summary: &mut Summary, out: &mut String) -> Result<(), CliError> {
    let mesh = Arc::new(build_mesh(config)?);
    summary.mesh = Some(MeshSummary::of(&mesh));
    let case = ManufacturedCase::trigonometric(config.law);
    let options = ProblemOptions {
        gamma: config.gamma,
        quad_boost: config.quad_boost,
    };
    let mut problem = DiscreteProblem::new(
        Arc::clone(&mesh),
        config.k,
        config.law,
        case.load_field(),
        case.boundary_field(),
        options,
    )?;
    let (state, report) = solve(&mut problem, &config.newton)?;
    let err_vel = error_velocity(&problem, &state.velocity, &case)?;
    let err_pre = error_pressure(&problem, &state.pressure, &case)?;
    let velocity_norm = problem.energy_norm(&state.velocity, config.law.r)?;
    let divergence_residual = max_divergence_residual(&problem, &state.velocity) / velocity_norm.max(f64::MIN_POSITIVE);
    let layout = problem.layout();
    let s = SolveSummary {
        k: config.k,
        law: config.law,
        constants: *problem.constants(),
        gamma: problem.gamma(),
        unknowns: layout.system_size(),
        condensed_size: layout.condensed_size(),
        err_vel,
        err_pre,
        velocity_norm,
        divergence_residual,
        pressure_integral: problem.pressure_integral(&state.pressure),
        newton: report,
    };
    let _ = writeln!(
        out,
        "solve: {} cells, k={}, {}, gamma={}",
        mesh.num_cells(),
        config.k,
        config.law,
        s.gamma
    );
    let _ = writeln!(
        out,
        "newton: {} ({} iterations, final residual {:.3e})",
        if s.newton.converged() { "converged" } else { "NOT converged" },
        s.newton.total_iterations,
        s.newton.newton.final_residual()
    );
    let _ = writeln!(out, "err_vel: {err_vel:.6e}");
    let _ = writeln!(out, "err_pre: {err_pre:.6e}");
    summary.success = s.newton.converged();
    write_file(&config.out, "solution.csv", &cell_values_csv(&problem, &state), summary)?;
    summary.solve = Some(s);
    Ok(())
}

/// Cell-centroid values of the discrete velocity and pressure.
fn cell_values_csv(problem: &DiscreteProblem, state: &DiscreteState) -> String {
    let mut s = String::from("cell,x,y,ux,uy,p\n");
    let l = problem.layout();
    for (c, ops) in problem.operators().iter().enumerate() {
        let x = problem.mesh().cell(c).centroid;
        let u = ops.cell_value_at(&problem.gather(c, &state.velocity), &x);
        let p = ops
            .pressure_basis
            .eval(&x)
            .dot(&state.pressure.rows(l.pressure_offset(c), l.pressure_block));
        let _ = writeln!(s, "{c},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", x.x, x.y, u.x, u.y, p);
    }
    s
}

fn run_study(config: &RunConfig, summary: &mut Summary, out: &mut String) -> Result<(), CliError> {
    let family = config.family.unwrap_or(MeshFamily::Cartesian);
    let cfg = ConvergenceConfig {
        family,
        distortion: config.distortion,
        levels: config.levels.clone(),
        k: config.k,
        law: config.law,
        gamma: config.gamma,
        quad_boost: config.quad_boost,
        newton: config.newton,
    };
    let report = run_convergence(&cfg)?;
    let csv = report.to_csv();
    out.push_str(&csv);
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
    let _ = writeln!(
        out,
        "last-pair EOC: velocity {}, pressure {} (least squares {}, {})",
        fmt(report.eoc_vel),
        fmt(report.eoc_pre),
        fmt(report.lsq_vel),
        fmt(report.lsq_pre)
    );
    write_file(&config.out, "convergence.csv", &csv, summary)?;
    write_file(
        &config.out,
        "convergence.gp",
        &report.gnuplot_script("convergence.csv", "convergence.png"),
        summary,
    )?;
    summary.success = report.all_converged();
    if !summary.success {
        let _ = writeln!(out, "warning: Newton did not converge on every level");
    }
    summary.convergence = Some(report);
    Ok(())
}
