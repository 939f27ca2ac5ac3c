use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use super::{error_pressure, error_velocity, ManufacturedCase};
use crate::hho::DEFAULT_QUAD_BOOST;
use crate::mesh::{generate, MeshFamily, DEFAULT_DISTORTION};
use crate::rheology::FlowLaw;
use crate::solver::{max_divergence_residual, solve, DiscreteProblem, NewtonConfig, ProblemOptions, SolveReport};
use crate::{Error, Result};

/// Settings of a convergence study on a built-in mesh family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub family: MeshFamily,
    pub distortion: f64,
    /// Cells per side, one entry per level, increasing.
    pub levels: Vec<usize>,
    pub k: usize,
    pub law: FlowLaw,
    pub gamma: Option<f64>,
    pub quad_boost: usize,
    pub newton: NewtonConfig,
}

impl ConvergenceConfig {
    pub fn new(family: MeshFamily, levels: Vec<usize>, k: usize, law: FlowLaw) -> Self {
        Self {
            family,
            distortion: DEFAULT_DISTORTION,
            levels,
            k,
            law,
            gamma: None,
            quad_boost: DEFAULT_QUAD_BOOST,
            newton: NewtonConfig::default(),
        }
    }
}

/// Results on one mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    pub cells: usize,
    pub err_vel: f64,
    pub err_pre: f64,
    /// Slope against the previous level.
    pub eoc_vel: Option<f64>,
    pub eoc_pre: Option<f64>,
    /// `max_q |b_h(u_h, q)| / ‖u_h‖_{ε,r,h}` over the pressure basis.
    pub divergence_residual: f64,
    pub converged: bool,
    /// Newton iterations summed over continuation stages.
    pub newton_iters: usize,
    pub solve: SolveReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub family: MeshFamily,
    pub k: usize,
    pub law: FlowLaw,
    pub levels: Vec<LevelResult>,
    /// Last-pair slopes.
    pub eoc_vel: Option<f64>,
    pub eoc_pre: Option<f64>,
    /// Least-squares slopes of `log e` against `log h` over all levels.
    pub lsq_vel: Option<f64>,
    pub lsq_pre: Option<f64>,
}

/// `log(e₁/e₂) / log(h₁/h₂)`.
pub fn eoc(e1: f64, e2: f64, h1: f64, h2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Least-squares slope of `log e` against `log h`; `None` with fewer than
/// two usable points.
pub fn lsq_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves the trigonometric benchmark on every level.
///
/// A level whose Newton iteration fails is kept with `converged = false`
/// and the errors of the last iterate.
pub fn run_convergence(config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    run_convergence_for(config, &ManufacturedCase::trigonometric(config.law))
}

pub fn run_convergence_for(config: &ConvergenceConfig, case: &ManufacturedCase) -> Result<ConvergenceReport> {
    if config.levels.len() < 2 {
        return Err(Error::InvalidParameter("a convergence study needs at least two levels".into()));
    }
    if config.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "levels must be strictly increasing, got {:?}",
            config.levels
        )));
    }
    let mut levels: Vec<LevelResult> = Vec::with_capacity(config.levels.len());
    for &n in &config.levels {
        let mesh = Arc::new(generate(config.family, n, config.distortion)?);
        let h = mesh.h();
        let cells = mesh.num_cells();
        let options = ProblemOptions {
            gamma: config.gamma,
            quad_boost: config.quad_boost,
        };
        let mut problem =
            DiscreteProblem::new(mesh, config.k, config.law, case.load_field(), case.boundary_field(), options)?;
        let (state, solve) = solve(&mut problem, &config.newton)?;
        let err_vel = error_velocity(&problem, &state.velocity, case)?;
        let err_pre = error_pressure(&problem, &state.pressure, case)?;
        let unorm = problem.energy_norm(&state.velocity, config.law.r)?;
        let divergence_residual = max_divergence_residual(&problem, &state.velocity) / unorm.max(f64::MIN_POSITIVE);
        let (eoc_vel, eoc_pre) = match levels.last() {
            Some(prev) => (
                Some(eoc(prev.err_vel, err_vel, prev.h, h)),
                Some(eoc(prev.err_pre, err_pre, prev.h, h)),
            ),
            None => (None, None),
        };
        info!(
            "{} n={n} r={}: err_vel={err_vel:.4e} err_pre={err_pre:.4e} newton={}",
            config.family, config.law.r, solve.total_iterations
        );
        levels.push(LevelResult {
            n,
            h,
            cells,
            err_vel,
            err_pre,
            eoc_vel,
            eoc_pre,
            divergence_residual,
            converged: solve.converged(),
            newton_iters: solve.total_iterations,
            solve,
        });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let ev: Vec<f64> = levels.iter().map(|l| l.err_vel).collect();
    let ep: Vec<f64> = levels.iter().map(|l| l.err_pre).collect();
    let last = levels.last().expect("at least two levels");
    Ok(ConvergenceReport {
        family: config.family,
        k: config.k,
        law: config.law,
        eoc_vel: last.eoc_vel,
        eoc_pre: last.eoc_pre,
        lsq_vel: lsq_slope(&hs, &ev),
        lsq_pre: lsq_slope(&hs, &ep),
        levels,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl ConvergenceReport {
    pub fn all_converged(&self) -> bool {
        self.levels.iter().all(|l| l.converged)
    }

    pub const CSV_HEADER: &'static str = "family,k,r,n,h,err_vel,err_pre,eoc_vel,eoc_pre,newton_iters";

    /// One row per level; EOC cells are empty on the first level.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for l in &self.levels {
            writeln!(
                s,
                "{},{},{},{},{:.12e},{:.12e},{:.12e},{},{},{}",
                self.family,
                self.k,
                self.law.r,
                l.n,
                l.h,
                l.err_vel,
                l.err_pre,
                opt(l.eoc_vel),
                opt(l.eoc_pre),
                l.newton_iters
            )
            .expect("writing to a String");
        }
        s
    }

    /// Gnuplot script plotting both errors against `h` from `csv_name`, with
    /// the last-pair slopes in the legend.
    pub fn gnuplot_script(&self, csv_name: &str, image_name: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set terminal pngcairo size 900,600\n\
             set output '{image_name}'\n\
             set logscale xy\n\
             set key bottom right\n\
             set xlabel 'h'\n\
             set ylabel 'error'\n\
             set title '{family}, k = {k}, r = {r}'\n\
             plot '{csv_name}' using 5:6 skip 1 with linespoints title 'velocity (EOC {ev})', \\\n     \
             '{csv_name}' using 5:7 skip 1 with linespoints title 'pressure (EOC {ep})'\n",
            family = self.family,
            k = self.k,
            r = self.law.r,
            ev = opt(self.eoc_vel),
            ep = opt(self.eoc_pre),
        )
    }

    /// Writes `<stem>.csv` and `<stem>.gp` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        let gp = dir.join(format!("{stem}.gp"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| io_error(&csv, e))?;
        let script = self.gnuplot_script(&format!("{stem}.csv"), &format!("{stem}.png"));
        std::fs::write(&gp, script).map_err(|e| io_error(&gp, e))?;
        Ok((csv, gp))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}
