use nalgebra::DVector;
use rayon::prelude::*;

use super::ManufacturedCase;
use crate::quadrature::quad_cell;
use crate::solver::DiscreteProblem;
use crate::Result;

/// `‖u_h − I_h u‖_{ε,r,h}` with `r` the exponent of the problem's law.
pub fn error_velocity(problem: &DiscreteProblem, velocity: &DVector<f64>, case: &ManufacturedCase) -> Result<f64> {
    let s = case.solution.clone();
    let iu = problem.interpolate(&move |p| s.velocity(p))?;
    problem.energy_norm(&(velocity - iu), problem.law().r)
}

/// `‖p_h − π_h^k p‖_{L^{r'}}` with `r'` conjugate to the law's exponent.
pub fn error_pressure(problem: &DiscreteProblem, pressure: &DVector<f64>, case: &ManufacturedCase) -> Result<f64> {
    let s = case.solution.clone();
    let pp = problem.project_pressure(&move |p| s.pressure(p))?;
    pressure_lebesgue_norm(problem, &(pressure - pp), problem.law().r_conj())
}

/// `‖q_h‖_{L^s(Ω)}` of a discrete pressure.
pub fn pressure_lebesgue_norm(problem: &DiscreteProblem, q: &DVector<f64>, s: f64) -> Result<f64> {
    let l = problem.layout();
    let mesh = problem.mesh();
    let degree = 2 * problem.k() + problem.quad_boost();
    let parts = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let pb = &problem.operators()[c].pressure_basis;
            let coef = q.rows(l.pressure_offset(c), l.pressure_block);
            let rule = quad_cell(mesh, c, degree)?;
            Ok(rule.iter().map(|(p, w)| w * pb.eval(p).dot(&coef).abs().powf(s)).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().powf(1.0 / s))
}
