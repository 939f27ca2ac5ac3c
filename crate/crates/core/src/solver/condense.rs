use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::problem::{DiscreteProblem, DiscreteState, LocalSystem};
use super::{LinearSolver, SparseMatrix};
use crate::{Error, Result};

/// Elimination data of one cell: `δ_I = y − X δ_B`.
#[derive(Clone, Debug)]
struct CellElimination {
    /// System indices of the eliminated unknowns.
    eliminated: Vec<usize>,
    /// Condensed indices of the kept unknowns.
    kept: Vec<usize>,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

/// Newton system after elimination of the cell velocities and of all but
/// the first pressure unknown of every cell.
///
/// Unknowns are ordered as interior-face velocities, one pressure per cell
/// and the mean-value multiplier last.
#[derive(Clone, Debug)]
pub struct CondensedSystem {
    pub matrix: SparseMatrix,
    pub rhs: DVector<f64>,
    cells: Vec<CellElimination>,
    /// System index of each condensed unknown.
    system_index: Vec<usize>,
    system_size: usize,
}

impl CondensedSystem {
    /// Size of the reduced system without the multiplier row:
    /// `2·card(F_i)·(k+1) + card(T_h)`.
    pub fn reduced_size(&self) -> usize {
        self.rhs.len() - 1
    }

    /// Expands a solution of the condensed system into a full Newton update
    /// in system numbering.
    pub fn recover(&self, delta_b: &DVector<f64>) -> DVector<f64> {
        let mut delta = DVector::zeros(self.system_size);
        for (i, &s) in self.system_index.iter().enumerate() {
            delta[s] = delta_b[i];
        }
        for e in &self.cells {
            let db = DVector::from_iterator(e.kept.len(), e.kept.iter().map(|&i| delta_b[i]));
            let di = &e.y - &e.x * db;
            for (i, &s) in e.eliminated.iter().enumerate() {
                delta[s] = di[i];
            }
        }
        delta
    }
}

/// Condenses the Newton system `J δ = −R` at `state` cell by cell.
pub fn static_condense(problem: &DiscreteProblem, state: &DiscreteState) -> Result<CondensedSystem> {
    let l = problem.layout();
    let nvu = l.n_velocity_unknowns();
    let cell_dofs = l.n_cells * l.cell_block;
    let n_face_dofs = l.n_interior_faces * l.face_block;
    let lam = l.condensed_size();
    let size = lam + 1;

    let locals = problem.local_systems(state, true);
    let eliminations = locals
        .into_par_iter()
        .enumerate()
        .map(|(c, ls)| condense_cell(problem, c, ls, nvu, cell_dofs, n_face_dofs))
        .collect::<Result<Vec<_>>>()?;

    let mut trips = Vec::new();
    let mut rhs = DVector::zeros(size);
    for (c, (_, s, g)) in eliminations.iter().enumerate() {
        let kept = &eliminations[c].0.kept;
        for (a, &ga) in kept.iter().enumerate() {
            rhs[ga] -= g[a];
            for (b, &gb) in kept.iter().enumerate() {
                if s[(a, b)] != 0.0 {
                    trips.push((ga, gb, s[(a, b)]));
                }
            }
        }
        let area = problem.mesh().cell(c).area;
        let p0 = n_face_dofs + c;
        trips.push((p0, lam, area));
        trips.push((lam, p0, area));
    }
    rhs[lam] = -problem.pressure_integral(&state.pressure);

    let mut system_index = Vec::with_capacity(size);
    system_index.extend(cell_dofs..cell_dofs + n_face_dofs);
    system_index.extend((0..l.n_cells).map(|c| nvu + l.pressure_offset(c)));
    system_index.push(l.multiplier_index());

    Ok(CondensedSystem {
        matrix: SparseMatrix::from_triplets(size, size, trips)?,
        rhs,
        cells: eliminations.into_iter().map(|(e, _, _)| e).collect(),
        system_index,
        system_size: l.system_size(),
    })
}

/// Eliminates the interior unknowns of one cell. Returns the elimination
/// data, the Schur complement and the condensed residual on the kept set.
fn condense_cell(
    problem: &DiscreteProblem,
    c: usize,
    ls: LocalSystem,
    nvu: usize,
    cell_dofs: usize,
    n_face_dofs: usize,
) -> Result<(CellElimination, DMatrix<f64>, DVector<f64>)> {
    let l = problem.layout();
    let j = ls.jacobian.expect("jacobian requested");
    let nl = ls.velocity_index.len();
    let np = l.pressure_block;

    // Local positions of eliminated and kept unknowns.
    let mut li: Vec<usize> = (0..l.cell_block).collect();
    li.extend(nl + 1..nl + np);
    let mut lb = Vec::new();
    let mut kept = Vec::new();
    for i in l.cell_block..nl {
        let g = ls.velocity_index[i];
        if g < nvu {
            lb.push(i);
            kept.push(g - cell_dofs);
        }
    }
    lb.push(nl);
    kept.push(n_face_dofs + c);

    let mut eliminated: Vec<usize> = (0..l.cell_block).map(|i| ls.velocity_index[i]).collect();
    let po = nvu + l.pressure_offset(c);
    eliminated.extend(po + 1..po + np);

    let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |a, b| j[(rows[a], cols[b])]);
    let j_ii = sub(&li, &li);
    let j_ib = sub(&li, &lb);
    let j_bi = sub(&lb, &li);
    let j_bb = sub(&lb, &lb);
    let r_i = DVector::from_iterator(li.len(), li.iter().map(|&i| ls.residual[i]));
    let mut r_b = DVector::from_iterator(lb.len(), lb.iter().map(|&i| ls.residual[i]));

    let singular = || Error::SingularLocalSystem {
        cell: c,
        what: "cell velocity and pressure block",
    };
    let lu = j_ii.full_piv_lu();
    let x = lu.solve(&j_ib).ok_or_else(singular)?;
    let y = -lu.solve(&r_i).ok_or_else(singular)?;
    let s = j_bb - &j_bi * &x;
    if !s.iter().all(|v| v.is_finite()) {
        return Err(singular());
    }
    // g = r_B − J_BI J_II⁻¹ r_I, with y = −J_II⁻¹ r_I.
    r_b.gemv(1.0, &j_bi, &y, 1.0);
    Ok((CellElimination { eliminated, kept, x, y }, s, r_b))
}

/// Newton update `δ` solving `J δ = −R`, with or without condensation.
/// Also returns the size of the system passed to the linear solver.
pub fn newton_update(
    problem: &DiscreteProblem,
    state: &DiscreteState,
    solver: &dyn LinearSolver,
    condense: bool,
) -> Result<(DVector<f64>, usize)> {
    if condense {
        let sys = static_condense(problem, state)?;
        let db = solver.solve(&sys.matrix, &sys.rhs)?;
        Ok((sys.recover(&db), sys.rhs.len()))
    } else {
        let j = super::assemble_jacobian(problem, state)?;
        let r = super::assemble_residual(problem, state)?;
        let n = r.len();
        Ok((solver.solve(&j, &(-r))?, n))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{generate, generate_cartesian, MeshFamily};
    use crate::rheology::FlowLaw;
    use crate::solver::{field, zero_field, DiscreteProblem, ProblemOptions, SparseLu};
    use crate::{Point, Vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reduced_sizes() {
        for (n, k, expected) in [(2, 1, 20), (1, 1, 1), (3, 2, 2 * 12 * 3 + 9)] {
            let mesh = Arc::new(generate_cartesian(n).unwrap());
            let p = DiscreteProblem::new(mesh, k, FlowLaw::newtonian(1.0), zero_field(), zero_field(), ProblemOptions::default())
                .unwrap();
            let s = DiscreteState::zeros(&p);
            assert_eq!(static_condense(&p, &s).unwrap().reduced_size(), expected);
        }
    }

    #[test]
    fn condensed_update_matches_full_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for family in MeshFamily::ALL {
            for r in [1.75, 2.0, 2.5] {
                let mesh = Arc::new(generate(family, 4, 0.15).unwrap());
                let f = field(|p: &Point| Vector::new(p.x.cos(), p.x * p.y));
                let g = field(|p: &Point| Vector::new(p.y, -p.x));
                let p = DiscreteProblem::new(mesh, 1, FlowLaw::carreau_yasuda(1.0, 0.5, 2.0, r), f, g, ProblemOptions::default())
                    .unwrap();
                let l = p.layout();
                let mut s = DiscreteState::zeros(&p);
                let x = DVector::from_fn(l.system_size(), |_, _| rng.random_range(-1.0..1.0));
                s.set_unknowns(l, &x);
                let (d1, n1) = newton_update(&p, &s, &SparseLu, false).unwrap();
                let (d2, n2) = newton_update(&p, &s, &SparseLu, true).unwrap();
                assert_eq!(n1, l.system_size());
                assert_eq!(n2, l.condensed_size() + 1);
                let err = (&d1 - &d2).amax() / d1.amax().max(1.0);
                assert!(err < 1e-10, "{family:?} r={r}: {err:e}");
            }
        }
    }
}
