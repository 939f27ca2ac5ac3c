use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::hho::{
    interpolate_face, local_energy_seminorm_pow, viscous_residual_vector, viscous_tangent_matrix, DofLayout,
    ElementOperators, DEFAULT_QUAD_BOOST,
};
use crate::mesh::Mesh;
use crate::rheology::{FlowLaw, LawConstants};
use crate::{Error, Point, Result, Vector};

use super::SparseMatrix;

/// A vector field on the domain, shared between threads.
pub type VectorField = Arc<dyn Fn(&Point) -> Vector + Send + Sync>;

/// Wraps a closure as a [`VectorField`].
pub fn field<F>(f: F) -> VectorField
where
    F: Fn(&Point) -> Vector + Send + Sync + 'static,
{
    Arc::new(f)
}

/// The zero vector field.
pub fn zero_field() -> VectorField {
    field(|_| Vector::zeros())
}

/// Discretization options of a [`DiscreteProblem`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemOptions {
    /// Stabilization parameter; `None` selects `√(σ_sm σ_hc)`.
    pub gamma: Option<f64>,
    /// Extra quadrature degree beyond `2k` for nonlinear integrands.
    pub quad_boost: usize,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self {
            gamma: None,
            quad_boost: DEFAULT_QUAD_BOOST,
        }
    }
}

/// The discrete generalized Stokes problem on a mesh.
///
/// Element operators, load vectors and Dirichlet values are computed once at
/// construction. [`DiscreteProblem::set_law`] changes the flow law in place,
/// which is how exponent continuation reuses the operators.
pub struct DiscreteProblem {
    mesh: Arc<Mesh>,
    layout: DofLayout,
    law: FlowLaw,
    constants: LawConstants,
    gamma: f64,
    gamma_override: Option<f64>,
    quad_boost: usize,
    load: VectorField,
    boundary: VectorField,
    ops: Vec<ElementOperators>,
    /// `∫_T f·φ` for the cell velocity basis, one block per cell.
    cell_loads: Vec<DVector<f64>>,
    /// `π_F^k g` on boundary faces, in layout order.
    boundary_values: DVector<f64>,
    load_norm: f64,
}

impl fmt::Debug for DiscreteProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteProblem")
            .field("cells", &self.mesh.num_cells())
            .field("k", &self.layout.k)
            .field("law", &self.law)
            .field("gamma", &self.gamma)
            .field("quad_boost", &self.quad_boost)
            .finish()
    }
}

impl DiscreteProblem {
    pub fn new(
        mesh: Arc<Mesh>,
        k: usize,
        law: FlowLaw,
        load: VectorField,
        boundary: VectorField,
        options: ProblemOptions,
    ) -> Result<Self> {
        law.validate()?;
        if k == 0 {
            return Err(Error::InvalidParameter("polynomial degree k must be at least 1".into()));
        }
        let constants = law.constants();
        let gamma = match options.gamma {
            Some(g) => {
                constants.check_gamma(g)?;
                g
            }
            None => constants.default_gamma(),
        };
        let layout = DofLayout::new(&mesh, k);
        let ops = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| ElementOperators::build(&mesh, c, k, law.r, options.quad_boost))
            .collect::<Result<Vec<_>>>()?;
        let cell_loads: Vec<DVector<f64>> = ops.par_iter().map(|o| cell_load(o, &load)).collect();
        let load_norm = cell_loads.iter().map(|l| l.norm_squared()).sum::<f64>().sqrt();

        let n_bnd = layout.n_velocity() - layout.n_velocity_unknowns();
        let qdeg = 2 * k + options.quad_boost;
        let bfaces: Vec<usize> = (0..mesh.num_faces()).filter(|&f| layout.is_boundary_face(f)).collect();
        let bvals = bfaces
            .par_iter()
            .map(|&f| interpolate_face(&mesh, f, k, qdeg, |p| boundary(p)))
            .collect::<Result<Vec<_>>>()?;
        let mut boundary_values = DVector::zeros(n_bnd);
        let base = layout.n_velocity_unknowns();
        for (&f, v) in bfaces.iter().zip(bvals) {
            let o = layout.face_offset(f) - base;
            boundary_values.rows_mut(o, v.len()).copy_from(&v);
        }

        Ok(Self {
            mesh,
            layout,
            law,
            constants,
            gamma,
            gamma_override: options.gamma,
            quad_boost: options.quad_boost,
            load,
            boundary,
            ops,
            cell_loads,
            boundary_values,
            load_norm,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn k(&self) -> usize {
        self.layout.k
    }

    pub fn law(&self) -> &FlowLaw {
        &self.law
    }

    pub fn constants(&self) -> &LawConstants {
        &self.constants
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn quad_boost(&self) -> usize {
        self.quad_boost
    }

    pub fn load(&self) -> &VectorField {
        &self.load
    }

    pub fn boundary(&self) -> &VectorField {
        &self.boundary
    }

    pub fn operators(&self) -> &[ElementOperators] {
        &self.ops
    }

    /// Euclidean norm of the assembled load vector `(∫ f·φ_i)_i`.
    pub fn load_norm(&self) -> f64 {
        self.load_norm
    }

    /// `π_F^k g` on the boundary faces, in layout order.
    pub fn boundary_values(&self) -> &DVector<f64> {
        &self.boundary_values
    }

    /// Replaces the flow law. The stabilization parameter becomes the
    /// configured override if it is admissible for the new law, and the
    /// default `√(σ_sm σ_hc)` otherwise.
    pub fn set_law(&mut self, law: FlowLaw) -> Result<()> {
        law.validate()?;
        let constants = law.constants();
        self.gamma = match self.gamma_override {
            Some(g) if constants.check_gamma(g).is_ok() => g,
            _ => constants.default_gamma(),
        };
        if law.r != self.law.r {
            self.ops.par_iter_mut().try_for_each(|o| o.set_exponent(law.r))?;
        }
        self.law = law;
        self.constants = constants;
        Ok(())
    }

    /// Sets `γ`, which must lie in `[σ_sm, σ_hc]`.
    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        self.constants.check_gamma(gamma)?;
        self.gamma = gamma;
        self.gamma_override = Some(gamma);
        Ok(())
    }

    /// Local velocity vector of `cell` gathered from a full velocity vector.
    pub fn gather(&self, cell: usize, velocity: &DVector<f64>) -> DVector<f64> {
        let idx = self.layout.local_velocity_indices(&self.mesh, cell);
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| velocity[i]))
    }

    /// Global interpolant `I_h v` as a full velocity vector.
    pub fn interpolate(&self, v: &(dyn Fn(&Point) -> Vector + Sync)) -> Result<DVector<f64>> {
        let k = self.k();
        let qdeg = 2 * k + self.quad_boost;
        let l = &self.layout;
        let mut out = DVector::zeros(l.n_velocity());
        let cells = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let b = &self.ops[c].cell_basis;
                let mut cv = DVector::zeros(l.cell_block);
                let nk = b.size();
                for a in 0..2 {
                    let coef = crate::basis::l2_project_in_basis(&self.mesh, c, b, qdeg, |p| v(p)[a])?;
                    cv.rows_mut(a * nk, nk).copy_from(&coef);
                }
                Ok(cv)
            })
            .collect::<Result<Vec<_>>>()?;
        for (c, cv) in cells.into_iter().enumerate() {
            out.rows_mut(l.cell_offset(c), l.cell_block).copy_from(&cv);
        }
        let faces = (0..self.mesh.num_faces())
            .into_par_iter()
            .map(|f| interpolate_face(&self.mesh, f, k, qdeg, v))
            .collect::<Result<Vec<_>>>()?;
        for (f, fv) in faces.into_iter().enumerate() {
            out.rows_mut(l.face_offset(f), l.face_block).copy_from(&fv);
        }
        Ok(out)
    }

    /// `π_h^k q` in the pressure bases.
    pub fn project_pressure(&self, q: &(dyn Fn(&Point) -> f64 + Sync)) -> Result<DVector<f64>> {
        let k = self.k();
        let qdeg = 2 * k + self.quad_boost;
        let blocks = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let pb = &self.ops[c].pressure_basis;
                let rule = crate::quadrature::quad_cell(&self.mesh, c, qdeg)?;
                let mut m = DMatrix::zeros(pb.size(), pb.size());
                let mut rhs = DVector::zeros(pb.size());
                for (p, w) in rule.iter() {
                    let psi = pb.eval(p);
                    m.ger(w, &psi, &psi, 1.0);
                    rhs.axpy(w * q(p), &psi, 1.0);
                }
                m.cholesky()
                    .map(|ch| ch.solve(&rhs))
                    .ok_or(Error::SingularLocalSystem {
                        cell: c,
                        what: "pressure mass matrix",
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = DVector::zeros(self.layout.n_pressure());
        for (c, b) in blocks.into_iter().enumerate() {
            out.rows_mut(self.layout.pressure_offset(c), b.len()).copy_from(&b);
        }
        Ok(out)
    }

    /// `a_h(w, ·)` applied to every velocity basis vector, including the
    /// boundary ones (full velocity numbering).
    pub fn viscous_residual(&self, w: &DVector<f64>) -> DVector<f64> {
        let locals: Vec<DVector<f64>> = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| viscous_residual_vector(&self.ops[c], &self.law, self.gamma, &self.gather(c, w)))
            .collect();
        let mut out = DVector::zeros(self.layout.n_velocity());
        for (c, r) in locals.iter().enumerate() {
            for (i, &g) in self.layout.local_velocity_indices(&self.mesh, c).iter().enumerate() {
                out[g] += r[i];
            }
        }
        out
    }

    /// `a_h(w, v)` on full velocity vectors.
    pub fn viscous_form(&self, w: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.viscous_residual(w).dot(v)
    }

    /// `b_h(v, q) = −Σ_T ∫_T D_T^k(v) q_T`.
    pub fn divergence_form(&self, v: &DVector<f64>, q: &DVector<f64>) -> f64 {
        let l = &self.layout;
        (0..self.mesh.num_cells())
            .map(|c| {
                let qt = q.rows(l.pressure_offset(c), l.pressure_block);
                -qt.dot(&(&self.ops[c].pressure_coupling * self.gather(c, v)))
            })
            .sum()
    }

    /// `(∫_T D_T^k(v) ψ_i)` for every pressure basis function.
    pub fn divergence_moments(&self, v: &DVector<f64>) -> DVector<f64> {
        let l = &self.layout;
        let mut out = DVector::zeros(l.n_pressure());
        for c in 0..self.mesh.num_cells() {
            let m = &self.ops[c].pressure_coupling * self.gather(c, v);
            out.rows_mut(l.pressure_offset(c), l.pressure_block).copy_from(&m);
        }
        out
    }

    /// `‖v‖_{ε,r,h}` for the given exponent.
    pub fn energy_norm(&self, v: &DVector<f64>, r: f64) -> Result<f64> {
        let parts = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| local_energy_seminorm_pow(&self.ops[c], &self.gather(c, v), r))
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.iter().sum::<f64>().powf(1.0 / r))
    }

    /// `∫_Ω q_h`.
    pub fn pressure_integral(&self, p: &DVector<f64>) -> f64 {
        let l = &self.layout;
        (0..self.mesh.num_cells())
            .map(|c| self.mesh.cell(c).area * p[l.pressure_offset(c)])
            .sum()
    }

    /// `∫_Ω f·v_h` over cell unknowns.
    pub fn load_form(&self, v: &DVector<f64>) -> f64 {
        let l = &self.layout;
        self.cell_loads
            .iter()
            .enumerate()
            .map(|(c, f)| f.dot(&v.rows(l.cell_offset(c), l.cell_block)))
            .sum()
    }
}

fn cell_load(ops: &ElementOperators, f: &VectorField) -> DVector<f64> {
    let q = &ops.cell_quad;
    let nk = q.basis.nrows();
    let mut out = DVector::zeros(2 * nk);
    for (i, (p, w)) in q.points.iter().zip(&q.weights).enumerate() {
        let fv = f(p);
        let phi = q.basis.column(i);
        out.rows_mut(0, nk).axpy(w * fv.x, &phi, 1.0);
        out.rows_mut(nk, nk).axpy(w * fv.y, &phi, 1.0);
    }
    out
}

/// Velocity, pressure and mean-value multiplier of a discrete solution.
///
/// `velocity` is the full vector in [`DofLayout`] numbering; its boundary
/// tail holds the Dirichlet values.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteState {
    pub velocity: DVector<f64>,
    pub pressure: DVector<f64>,
    pub multiplier: f64,
}

impl DiscreteState {
    /// Zero unknowns with the boundary values of `problem`.
    pub fn zeros(problem: &DiscreteProblem) -> Self {
        let l = problem.layout();
        apply_dirichlet(
            problem,
            Self {
                velocity: DVector::zeros(l.n_velocity()),
                pressure: DVector::zeros(l.n_pressure()),
                multiplier: 0.0,
            },
        )
    }

    /// Unknowns `[u (interior) | p | λ]` in system numbering.
    pub fn to_unknowns(&self, layout: &DofLayout) -> DVector<f64> {
        let nvu = layout.n_velocity_unknowns();
        let mut x = DVector::zeros(layout.system_size());
        x.rows_mut(0, nvu).copy_from(&self.velocity.rows(0, nvu));
        x.rows_mut(nvu, layout.n_pressure()).copy_from(&self.pressure);
        x[layout.multiplier_index()] = self.multiplier;
        x
    }

    /// Overwrites the unknowns from a system-numbered vector.
    pub fn set_unknowns(&mut self, layout: &DofLayout, x: &DVector<f64>) {
        let nvu = layout.n_velocity_unknowns();
        self.velocity.rows_mut(0, nvu).copy_from(&x.rows(0, nvu));
        self.pressure.copy_from(&x.rows(nvu, layout.n_pressure()));
        self.multiplier = x[layout.multiplier_index()];
    }

    fn check(&self, layout: &DofLayout) -> Result<()> {
        if self.velocity.len() != layout.n_velocity() {
            return Err(Error::SizeMismatch {
                expected: layout.n_velocity(),
                got: self.velocity.len(),
            });
        }
        if self.pressure.len() != layout.n_pressure() {
            return Err(Error::SizeMismatch {
                expected: layout.n_pressure(),
                got: self.pressure.len(),
            });
        }
        Ok(())
    }
}

/// Sets every boundary-face block of the velocity to `π_F^k g`.
pub fn apply_dirichlet(problem: &DiscreteProblem, mut state: DiscreteState) -> DiscreteState {
    let nvu = problem.layout().n_velocity_unknowns();
    let b = problem.boundary_values();
    state.velocity.rows_mut(nvu, b.len()).copy_from(b);
    state
}

/// Per-cell contributions to the residual and Jacobian, in local numbering
/// `[cell velocity | face velocities | pressure]`.
pub(crate) struct LocalSystem {
    /// Full-velocity indices of the local velocity dofs.
    pub velocity_index: Vec<usize>,
    pub residual: DVector<f64>,
    pub jacobian: Option<DMatrix<f64>>,
}

impl DiscreteProblem {
    pub(crate) fn local_system(&self, cell: usize, state: &DiscreteState, with_jacobian: bool) -> LocalSystem {
        let l = &self.layout;
        let ops = &self.ops[cell];
        let velocity_index = l.local_velocity_indices(&self.mesh, cell);
        let u = DVector::from_iterator(velocity_index.len(), velocity_index.iter().map(|&i| state.velocity[i]));
        let nl = u.len();
        let np = l.pressure_block;
        let p = state.pressure.rows(l.pressure_offset(cell), np);
        let bp = &ops.pressure_coupling;
        let area = self.mesh.cell(cell).area;

        let mut residual = DVector::zeros(nl + np);
        let mut mom = viscous_residual_vector(ops, &self.law, self.gamma, &u);
        mom.gemv_tr(-1.0, bp, &p, 1.0);
        mom.rows_mut(0, l.cell_block).axpy(-1.0, &self.cell_loads[cell], 1.0);
        residual.rows_mut(0, nl).copy_from(&mom);
        let mut mass = bp * &u;
        mass[0] += state.multiplier * area;
        residual.rows_mut(nl, np).copy_from(&mass);

        let jacobian = with_jacobian.then(|| {
            let mut j = DMatrix::zeros(nl + np, nl + np);
            j.view_mut((0, 0), (nl, nl))
                .copy_from(&viscous_tangent_matrix(ops, &self.law, self.gamma, &u));
            j.view_mut((0, nl), (nl, np)).copy_from(&(-bp.transpose()));
            j.view_mut((nl, 0), (np, nl)).copy_from(bp);
            j
        });
        LocalSystem {
            velocity_index,
            residual,
            jacobian,
        }
    }

    pub(crate) fn local_systems(&self, state: &DiscreteState, with_jacobian: bool) -> Vec<LocalSystem> {
        (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| self.local_system(c, state, with_jacobian))
            .collect()
    }
}

/// Residual `[momentum | mass | mean]` of the discrete problem in system
/// numbering: `a_h(u, v) + b_h(v, p) − ∫ f·v`, `−b_h(u, q) + λ ∫ q` and
/// `∫ p`.
pub fn assemble_residual(problem: &DiscreteProblem, state: &DiscreteState) -> Result<DVector<f64>> {
    let l = problem.layout();
    state.check(l)?;
    let nvu = l.n_velocity_unknowns();
    let mut r = DVector::zeros(l.system_size());
    for (c, ls) in problem.local_systems(state, false).into_iter().enumerate() {
        let nl = ls.velocity_index.len();
        for (i, &g) in ls.velocity_index.iter().enumerate() {
            if g < nvu {
                r[g] += ls.residual[i];
            }
        }
        let po = nvu + l.pressure_offset(c);
        for i in 0..l.pressure_block {
            r[po + i] = ls.residual[nl + i];
        }
    }
    r[l.multiplier_index()] = problem.pressure_integral(&state.pressure);
    Ok(r)
}

/// Jacobian of [`assemble_residual`] with respect to the unknowns.
pub fn assemble_jacobian(problem: &DiscreteProblem, state: &DiscreteState) -> Result<SparseMatrix> {
    let l = problem.layout();
    state.check(l)?;
    let nvu = l.n_velocity_unknowns();
    let n = l.system_size();
    let lam = l.multiplier_index();
    let mut trips = Vec::new();
    for (c, ls) in problem.local_systems(state, true).into_iter().enumerate() {
        let j = ls.jacobian.expect("jacobian requested");
        let nl = ls.velocity_index.len();
        let po = nvu + l.pressure_offset(c);
        let global = |i: usize| -> Option<usize> {
            if i < nl {
                let g = ls.velocity_index[i];
                (g < nvu).then_some(g)
            } else {
                Some(po + i - nl)
            }
        };
        for a in 0..j.nrows() {
            let Some(ga) = global(a) else { continue };
            for b in 0..j.ncols() {
                let v = j[(a, b)];
                if v == 0.0 {
                    continue;
                }
                if let Some(gb) = global(b) {
                    trips.push((ga, gb, v));
                }
            }
        }
        let area = problem.mesh().cell(c).area;
        trips.push((po, lam, area));
        trips.push((lam, po, area));
    }
    SparseMatrix::from_triplets(n, n, trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, generate_cartesian, MeshFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(law: FlowLaw, n: usize) -> DiscreteProblem {
        let mesh = Arc::new(generate(MeshFamily::DistortedCartesian, n, 0.15).unwrap());
        let f = field(|p: &Point| Vector::new((3.0 * p.y).sin(), p.x * p.x));
        let g = field(|p: &Point| Vector::new(p.y * (1.0 - p.y), 0.3 * p.x));
        DiscreteProblem::new(mesh, 1, law, f, g, ProblemOptions::default()).unwrap()
    }

    fn random_state(p: &DiscreteProblem, rng: &mut ChaCha8Rng) -> DiscreteState {
        let l = p.layout();
        let mut s = DiscreteState::zeros(p);
        let x = DVector::from_fn(l.system_size(), |_, _| rng.random_range(-1.0..1.0));
        s.set_unknowns(l, &x);
        s
    }

    #[test]
    fn zero_data_gives_zero_residual() {
        let mesh = Arc::new(generate_cartesian(3).unwrap());
        let p = DiscreteProblem::new(mesh, 2, FlowLaw::power_law(1.0, 1.5), zero_field(), zero_field(), ProblemOptions::default())
            .unwrap();
        let s = DiscreteState::zeros(&p);
        assert_eq!(assemble_residual(&p, &s).unwrap().amax(), 0.0);
    }

    #[test]
    fn newtonian_residual_is_affine() {
        let p = problem(FlowLaw::newtonian(1.0), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = p.layout();
        let s1 = random_state(&p, &mut rng);
        let s2 = random_state(&p, &mut rng);
        let mut s12 = s1.clone();
        s12.set_unknowns(l, &(s1.to_unknowns(l) + s2.to_unknowns(l)));
        let r = |s: &DiscreteState| assemble_residual(&p, s).unwrap();
        let zero = DiscreteState::zeros(&p);
        let combo = r(&s12) - r(&s1) - r(&s2) + r(&zero);
        assert!(combo.amax() < 1e-12 * r(&s12).amax());
        let j1 = assemble_jacobian(&p, &s1).unwrap().to_dense();
        let j2 = assemble_jacobian(&p, &s2).unwrap().to_dense();
        assert!((j1 - j2).amax() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for r in [1.75, 2.5] {
            let p = problem(FlowLaw::power_law(1.0, r), 4);
            let l = p.layout();
            let s = random_state(&p, &mut rng);
            let j = assemble_jacobian(&p, &s).unwrap();
            for _ in 0..3 {
                let z = DVector::from_fn(l.system_size(), |_, _| rng.random_range(-1.0..1.0));
                let eps = 1e-6;
                let x = s.to_unknowns(l);
                let mut sp = s.clone();
                sp.set_unknowns(l, &(&x + &z * eps));
                let mut sm = s.clone();
                sm.set_unknowns(l, &(&x - &z * eps));
                let fd = (assemble_residual(&p, &sp).unwrap() - assemble_residual(&p, &sm).unwrap()) / (2.0 * eps);
                let jz = j.mul_vec(&z);
                assert!((&fd - &jz).norm() <= 1e-5 * jz.norm(), "r={r}");
            }
        }
    }

    #[test]
    fn constant_pressure_is_orthogonal_to_homogeneous_velocities() {
        let p = problem(FlowLaw::newtonian(1.0), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = p.layout();
        let mut v = DVector::from_fn(l.n_velocity(), |_, _| rng.random_range(-1.0..1.0));
        v.rows_mut(l.n_velocity_unknowns(), l.n_velocity() - l.n_velocity_unknowns()).fill(0.0);
        let mut one = DVector::zeros(l.n_pressure());
        for c in 0..p.mesh().num_cells() {
            one[l.pressure_offset(c)] = 1.0;
        }
        assert!(p.divergence_form(&v, &one).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_values() {
        let mesh = Arc::new(generate_cartesian(2).unwrap());
        let c = Vector::new(0.25, -2.0);
        let p = DiscreteProblem::new(mesh, 2, FlowLaw::newtonian(1.0), zero_field(), field(move |_| c), ProblemOptions::default())
            .unwrap();
        let l = p.layout();
        let s = DiscreteState::zeros(&p);
        for f in 0..p.mesh().num_faces() {
            let o = l.face_offset(f);
            let block = s.velocity.rows(o, l.face_block);
            if l.is_boundary_face(f) {
                assert!((block[0] - c.x).abs() < 1e-14 && (block[3] - c.y).abs() < 1e-14);
                assert!(block[1].abs() < 1e-14 && block[2].abs() < 1e-14 && block[5].abs() < 1e-14);
            } else {
                assert_eq!(block.amax(), 0.0);
            }
        }
    }

    #[test]
    fn gamma_is_validated() {
        let law = FlowLaw::power_law(1.0, 2.5);
        let hc = law.constants().sigma_hc;
        let mesh = Arc::new(generate_cartesian(1).unwrap());
        let opts = ProblemOptions {
            gamma: Some(10.0 * hc),
            ..Default::default()
        };
        assert!(matches!(
            DiscreteProblem::new(mesh, 1, law, zero_field(), zero_field(), opts),
            Err(Error::InvalidParameter(_))
        ));
    }
}
