use log::{debug, info, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::condense::newton_update;
use super::problem::{apply_dirichlet, assemble_residual, DiscreteProblem, DiscreteState};
use super::{LinearSolver, SparseLu};
use crate::Result;

/// Newton iteration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    /// Converged when `‖R‖ ≤ tol·(1 + ‖F‖)`, `F` the assembled load vector.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual backtracking by halving.
    pub damping: bool,
    pub max_halvings: usize,
    /// Solve the statically condensed system.
    pub condense: bool,
    /// March the exponent from 2 to the target before the final solve.
    pub continuation: bool,
    /// Largest exponent increment between continuation stages.
    pub continuation_step: f64,
    /// Tolerance of the intermediate continuation stages.
    pub intermediate_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            damping: true,
            max_halvings: 20,
            condense: true,
            continuation: true,
            continuation_step: 0.25,
            intermediate_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    MaxIterations,
    /// No step length in the backtracking sequence reduced the residual.
    LineSearchFailed,
    LinearSolverFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSolverStats {
    pub solver: String,
    pub condensed: bool,
    /// Size of the matrix passed to the linear solver.
    pub system_size: usize,
    pub solves: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// `‖R‖` before the first and after every iteration.
    pub residual_history: Vec<f64>,
    /// Total number of step halvings.
    pub damping_steps: usize,
    pub converged: bool,
    pub status: NewtonStatus,
    /// Absolute residual threshold `tol·(1 + ‖F‖)`.
    pub threshold: f64,
    pub linear: LinearSolverStats,
    pub message: Option<String>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// [`newton_solve_with`] using the sparse LU solver.
pub fn newton_solve(
    problem: &DiscreteProblem,
    initial: DiscreteState,
    config: &NewtonConfig,
) -> Result<(DiscreteState, NewtonReport)> {
    newton_solve_with(problem, initial, config, &SparseLu)
}

/// Damped Newton iteration at the current flow law of `problem`.
///
/// Non-convergence and linear solver failures are reported in the returned
/// [`NewtonReport`]; errors are reserved for inconsistent input.
pub fn newton_solve_with(
    problem: &DiscreteProblem,
    initial: DiscreteState,
    config: &NewtonConfig,
    solver: &dyn LinearSolver,
) -> Result<(DiscreteState, NewtonReport)> {
    if !(config.tol > 0.0) {
        return Err(crate::Error::InvalidParameter(format!("Newton tolerance must be positive, got {}", config.tol)));
    }
    let layout = problem.layout();
    let mut state = apply_dirichlet(problem, initial);
    let threshold = config.tol * (1.0 + problem.load_norm());
    let mut res = assemble_residual(problem, &state)?.norm();
    let mut report = NewtonReport {
        iterations: 0,
        residual_history: vec![res],
        damping_steps: 0,
        converged: false,
        status: NewtonStatus::MaxIterations,
        threshold,
        linear: LinearSolverStats {
            solver: solver.name().to_string(),
            condensed: config.condense,
            system_size: if config.condense {
                layout.condensed_size() + 1
            } else {
                layout.system_size()
            },
            solves: 0,
        },
        message: None,
    };

    while res > threshold {
        if report.iterations >= config.max_iter {
            report.message = Some(format!("no convergence after {} iterations", config.max_iter));
            warn!("Newton: {}", report.message.as_deref().unwrap());
            return Ok((state, report));
        }
        let delta = match newton_update(problem, &state, solver, config.condense) {
            Ok((d, _)) => d,
            Err(e) => {
                report.status = NewtonStatus::LinearSolverFailed;
                report.message = Some(e.to_string());
                warn!("Newton: {e}");
                return Ok((state, report));
            }
        };
        report.linear.solves += 1;
        report.iterations += 1;
        let x = state.to_unknowns(layout);
        let mut t = 1.0;
        let mut accepted = None;
        for halving in 0..=config.max_halvings {
            let mut trial = state.clone();
            trial.set_unknowns(layout, &(&x + &delta * t));
            let r = assemble_residual(problem, &trial)?.norm();
            if !config.damping || r < res {
                report.damping_steps += halving;
                accepted = Some((trial, r));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, r)) = accepted else {
            report.damping_steps += config.max_halvings;
            report.status = NewtonStatus::LineSearchFailed;
            report.message = Some(format!(
                "residual not reduced after {} halvings at iteration {}",
                config.max_halvings, report.iterations
            ));
            warn!("Newton: {}", report.message.as_deref().unwrap());
            return Ok((state, report));
        };
        debug!("Newton iteration {}: residual {r:.3e}, step {t}", report.iterations);
        state = trial;
        res = r;
        report.residual_history.push(res);
    }
    report.converged = true;
    report.status = NewtonStatus::Converged;
    Ok((state, report))
}

/// One stage of an exponent continuation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStage {
    pub r: f64,
    pub report: NewtonReport,
}

/// Outcome of [`solve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Intermediate stages, empty without continuation.
    pub stages: Vec<ContinuationStage>,
    /// Newton report at the target law.
    pub newton: NewtonReport,
    pub total_iterations: usize,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.newton.converged
    }
}

/// Exponents visited by continuation from `r = 2` to `target`, target
/// excluded; steps are equal and at most `step` long.
pub fn continuation_schedule(target: f64, step: f64) -> Vec<f64> {
    let m = ((target - 2.0).abs() / step).ceil() as usize;
    (0..m).map(|j| 2.0 + (target - 2.0) * j as f64 / m as f64).collect()
}

/// Solves the discrete problem from the zero state, with exponent
/// continuation if enabled. The flow law of `problem` is restored on return.
pub fn solve(problem: &mut DiscreteProblem, config: &NewtonConfig) -> Result<(DiscreteState, SolveReport)> {
    solve_from(problem, DiscreteState::zeros(problem), config, &SparseLu)
}

/// [`solve`] from a given initial state and linear solver.
pub fn solve_from(
    problem: &mut DiscreteProblem,
    initial: DiscreteState,
    config: &NewtonConfig,
    solver: &dyn LinearSolver,
) -> Result<(DiscreteState, SolveReport)> {
    let target = *problem.law();
    let gamma = problem.gamma();
    let schedule = if config.continuation && target.r != 2.0 {
        if !(config.continuation_step > 0.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "continuation step must be positive, got {}",
                config.continuation_step
            )));
        }
        continuation_schedule(target.r, config.continuation_step)
    } else {
        Vec::new()
    };

    let mut state = initial;
    let mut stages = Vec::with_capacity(schedule.len());
    let stage_config = NewtonConfig {
        tol: config.intermediate_tol.max(config.tol),
        ..*config
    };
    for &r in &schedule {
        problem.set_law(target.with_exponent(r))?;
        let (s, report) = newton_solve_with(problem, state, &stage_config, solver)?;
        info!(
            "continuation r = {r:.4}: {} iterations, residual {:.3e}",
            report.iterations,
            report.final_residual()
        );
        state = s;
        stages.push(ContinuationStage { r, report });
    }
    if !schedule.is_empty() {
        problem.set_law(target)?;
        if problem.gamma() != gamma {
            problem.set_gamma(gamma)?;
        }
    }
    let (state, newton) = newton_solve_with(problem, state, config, solver)?;
    let total_iterations = stages.iter().map(|s| s.report.iterations).sum::<usize>() + newton.iterations;
    Ok((
        state,
        SolveReport {
            stages,
            newton,
            total_iterations,
        },
    ))
}

/// Largest `|b_h(u, q)|` over the pressure basis functions `q`.
pub fn max_divergence_residual(problem: &DiscreteProblem, velocity: &DVector<f64>) -> f64 {
    problem.divergence_moments(velocity).amax()
}
