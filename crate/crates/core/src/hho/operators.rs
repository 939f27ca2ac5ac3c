use nalgebra::{DMatrix, DVector, Matrix2xX, Matrix3xX};

use crate::basis::{cell_dim, face_dim, l2_project_face_with, l2_project_in_basis, CellBasis, FaceBasis, PressureBasis};
use crate::mesh::Mesh;
use crate::quadrature::{quad_cell, quad_face};
use crate::{Error, Point, Result, Vector};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Default number of degrees added to `2k` for quadratures of nonlinear
/// integrands.
pub const DEFAULT_QUAD_BOOST: usize = 4;

/// Local velocity unknowns of one cell.
///
/// `cell` holds the x-coefficients followed by the y-coefficients of `v_T`;
/// each entry of `faces` does the same for `v_F`, in the cell's face order.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalVector {
    pub cell: DVector<f64>,
    pub faces: Vec<DVector<f64>>,
}

impl LocalVector {
    pub fn zeros(k: usize, n_faces: usize) -> Self {
        Self {
            cell: DVector::zeros(2 * cell_dim(k)),
            faces: vec![DVector::zeros(2 * face_dim(k)); n_faces],
        }
    }

    pub fn len(&self) -> usize {
        self.cell.len() + self.faces.iter().map(|f| f.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation `[v_T, v_F1, v_F2, …]`.
    pub fn to_flat(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        out.rows_mut(0, self.cell.len()).copy_from(&self.cell);
        let mut o = self.cell.len();
        for f in &self.faces {
            out.rows_mut(o, f.len()).copy_from(f);
            o += f.len();
        }
        out
    }

    pub fn from_flat(k: usize, n_faces: usize, flat: &DVector<f64>) -> Result<Self> {
        let nc = 2 * cell_dim(k);
        let nf = 2 * face_dim(k);
        let expected = nc + n_faces * nf;
        if flat.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                got: flat.len(),
            });
        }
        Ok(Self {
            cell: flat.rows(0, nc).into_owned(),
            faces: (0..n_faces)
                .map(|i| flat.rows(nc + i * nf, nf).into_owned())
                .collect(),
        })
    }
}

/// Interpolates a vector field on a cell: `π_T^k v` on the cell and `π_F^k v`
/// on each face, with quadratures of exactness `quad_degree`.
pub fn interpolate<F>(mesh: &Mesh, cell: usize, k: usize, quad_degree: usize, v: F) -> Result<LocalVector>
where
    F: Fn(&Point) -> Vector,
{
    let basis = hho_cell_basis(mesh, cell, k)?.truncated(k);
    let nk = cell_dim(k);
    let mut cv = DVector::zeros(2 * nk);
    for a in 0..2 {
        let c = l2_project_in_basis(mesh, cell, &basis, quad_degree, |p| v(p)[a])?;
        cv.rows_mut(a * nk, nk).copy_from(&c);
    }
    let faces = mesh
        .cell(cell)
        .faces
        .iter()
        .map(|&f| interpolate_face(mesh, f, k, quad_degree, &v))
        .collect::<Result<_>>()?;
    Ok(LocalVector { cell: cv, faces })
}

/// Cell basis of `P^{k+1}(T)` used by the HHO operators; its `P^k` prefix
/// carries the cell unknowns.
pub fn hho_cell_basis(mesh: &Mesh, cell: usize, k: usize) -> Result<CellBasis> {
    CellBasis::orthonormal_on_cell(mesh, cell, k + 1)
}

/// `π_F^k v` on a single face, x-coefficients then y-coefficients.
pub fn interpolate_face<F>(mesh: &Mesh, face: usize, k: usize, quad_degree: usize, v: F) -> Result<DVector<f64>>
where
    F: Fn(&Point) -> Vector,
{
    let nf = face_dim(k);
    let mut out = DVector::zeros(2 * nf);
    for a in 0..2 {
        let c = l2_project_face_with(mesh, face, k, quad_degree, |p| v(p)[a])?;
        out.rows_mut(a * nf, nf).copy_from(&c);
    }
    Ok(out)
}

/// Face data cached at quadrature points.
#[derive(Clone, Debug)]
pub(crate) struct FaceQuad {
    pub weights: Vec<f64>,
    /// Unscaled boundary residual `Δ_F` evaluated at each point (2 × n).
    pub residual: Vec<Matrix2xX<f64>>,
    /// `v_F − v_T` at each point (2 × n).
    pub jump: Vec<Matrix2xX<f64>>,
}

/// Cell data cached at quadrature points.
#[derive(Clone, Debug)]
pub(crate) struct CellQuad {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// `P^k` basis values, one column per point.
    pub basis: DMatrix<f64>,
    /// `G_T^k v` in Mandel coordinates at each point (3 × n).
    pub gradient: Vec<Matrix3xX<f64>>,
    /// `∇_s v_T` in Mandel coordinates at each point (3 × n).
    pub strain: Vec<Matrix3xX<f64>>,
    /// Full gradient `∇v_T` as `(∂x vx, ∂y vx, ∂x vy, ∂y vy)` (4 × n).
    pub full_gradient: Vec<DMatrix<f64>>,
    /// `v_T` at each point (2 × n).
    pub value: Vec<Matrix2xX<f64>>,
}

/// Local HHO operators of one cell.
///
/// All matrices act on the flattened [`LocalVector`]. Symmetric tensors are
/// expanded on the orthonormal Mandel basis `E1 = e1⊗e1`, `E2 = e2⊗e2`,
/// `E3 = (e1⊗e2 + e2⊗e1)/√2`, so `G` has three stacked `P^k` blocks.
#[derive(Clone, Debug)]
pub struct ElementOperators {
    pub cell: usize,
    pub k: usize,
    pub n_faces: usize,
    /// Sobolev exponent used in the `h_F^{-1/r'}` scaling of `Δ_F`.
    pub r: f64,
    /// `G_T^k`, `3·dim P^k × n`.
    pub gradient: DMatrix<f64>,
    /// `D_T^k = tr G_T^k`, `dim P^k × n`.
    pub divergence: DMatrix<f64>,
    /// `r_T^{k+1}`, `2·dim P^{k+1} × n` (x-block then y-block).
    pub reconstruction: DMatrix<f64>,
    /// `∫_T D_T^k(v) ψ_i` for the pressure basis `ψ_i`.
    pub pressure_coupling: DMatrix<f64>,
    pub cell_basis: CellBasis,
    /// Basis of `P^{k+1}(T)` for the coefficients of `r_T^{k+1}`.
    pub reconstruction_basis: CellBasis,
    pub pressure_basis: PressureBasis,
    pub face_bases: Vec<FaceBasis>,
    pub face_diameters: Vec<f64>,
    residuals: Vec<DMatrix<f64>>,
    residual_scales: Vec<f64>,
    pub(crate) cell_quad: CellQuad,
    pub(crate) face_quads: Vec<FaceQuad>,
}

fn singular(cell: usize, what: &'static str) -> Error {
    Error::SingularLocalSystem { cell, what }
}

impl ElementOperators {
    /// Builds the operators with the default quadrature boost.
    pub fn new(mesh: &Mesh, cell: usize, k: usize, r: f64) -> Result<Self> {
        Self::build(mesh, cell, k, r, DEFAULT_QUAD_BOOST)
    }

    pub fn build(mesh: &Mesh, cell: usize, k: usize, r: f64, quad_boost: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("polynomial degree k must be at least 1".into()));
        }
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponent r = {r} must exceed 1")));
        }
        let c = mesh.cell(cell);
        let nf = c.faces.len();
        let nk = cell_dim(k);
        let nk1 = cell_dim(k + 1);
        let nfk = face_dim(k);
        let n = 2 * nk + 2 * nf * nfk;
        let cc = |a: usize, i: usize| a * nk + i;
        let fc = |fi: usize, a: usize, m: usize| 2 * nk + (2 * fi + a) * nfk + m;

        let basis = hho_cell_basis(mesh, cell, k)?;
        let cell_basis = basis.truncated(k);
        let pressure_basis = PressureBasis::from_basis(mesh, cell, cell_basis.clone())?;
        let qdeg = (2 * k + quad_boost).max(2 * k + 2);
        let rule = quad_cell(mesh, cell, qdeg)?;

        // Cell integrals.
        let mut mass_k = DMatrix::zeros(nk, nk);
        let mut mass_k_k1 = DMatrix::zeros(nk, nk1);
        let mut stiff = DMatrix::zeros(2 * nk1, 2 * nk1);
        // ∫ ∇_s(φ_i e_a) : φ_j E_c, rows (a, i) of P^{k+1}, columns (c, j) of P^k.
        let mut strain_mass = DMatrix::zeros(2 * nk1, 3 * nk);
        let mut pres_mass = DMatrix::zeros(nk, nk);
        let mut mean = DVector::zeros(nk1);
        let mut mean_grad = vec![Vector::zeros(); nk1];
        let strain_cache = |g: &[Vector]| {
            // Mandel rows of ∇_s(φ_i e_a), columns (a, i).
            let mut s = DMatrix::zeros(3, 2 * g.len());
            for (i, gi) in g.iter().enumerate() {
                s[(0, i)] = gi.x;
                s[(2, i)] = gi.y * SQRT_HALF;
                s[(1, g.len() + i)] = gi.y;
                s[(2, g.len() + i)] = gi.x * SQRT_HALF;
            }
            s
        };
        for (p, w) in rule.iter() {
            let phi = basis.eval(p);
            let grad = basis.grad(p);
            let phik = phi.rows(0, nk);
            mass_k.ger(w, &phik, &phik, 1.0);
            mass_k_k1.ger(w, &phik, &phi, 1.0);
            let s = strain_cache(&grad);
            stiff.gemm_tr(w, &s, &s, 1.0);
            for row in 0..2 * nk1 {
                for cmp in 0..3 {
                    let sv = s[(cmp, row)];
                    if sv != 0.0 {
                        for j in 0..nk {
                            strain_mass[(row, cmp * nk + j)] += w * sv * phik[j];
                        }
                    }
                }
            }
            let psi = pressure_basis.eval(p);
            pres_mass.ger(w, &psi, &phik, 1.0);
            mean.axpy(w, &phi, 1.0);
            for (m, g) in mean_grad.iter_mut().zip(&grad) {
                *m += g * w;
            }
        }
        let chol_k = mass_k.clone().cholesky().ok_or(singular(cell, "cell mass matrix"))?;

        // Right-hand side of G: cell part.
        let mut bg = DMatrix::zeros(3 * nk, n);
        for a in 0..2 {
            for i in 0..nk {
                for col in 0..3 * nk {
                    bg[(col, cc(a, i))] = strain_mass[(a * nk1 + i, col)];
                }
            }
        }

        // Closure of the reconstruction.
        let h_t = c.diameter;
        let area = c.area;
        let mut closure = DMatrix::zeros(3, 2 * nk1);
        let mut closure_rhs = DMatrix::zeros(3, n);
        for i in 0..nk1 {
            closure[(0, i)] = mean[i] / area;
            closure[(1, nk1 + i)] = mean[i] / area;
            closure[(2, i)] = 0.5 * h_t / area * mean_grad[i].y;
            closure[(2, nk1 + i)] = -0.5 * h_t / area * mean_grad[i].x;
        }
        for i in 0..nk {
            closure_rhs[(0, cc(0, i))] = mean[i] / area;
            closure_rhs[(1, cc(1, i))] = mean[i] / area;
        }

        // Face integrals.
        let mut face_bases = Vec::with_capacity(nf);
        let mut face_rules = Vec::with_capacity(nf);
        let mut traces = Vec::with_capacity(nf);
        for (fi, (&f, nrm)) in c.faces.iter().zip(&c.normals).enumerate() {
            let fb = FaceBasis::on_face(mesh, f, k);
            let frule = quad_face(mesh, f, qdeg);
            let mut mass_f = DMatrix::zeros(nfk, nfk);
            let mut trace = DMatrix::zeros(nfk, nk1);
            let mut cell_cell = DMatrix::zeros(nk, nk);
            let mut psi_mean = DVector::zeros(nfk);
            for (p, w) in frule.iter() {
                let psi = fb.eval(p);
                let phi = basis.eval(p);
                let phik = phi.rows(0, nk);
                mass_f.ger(w, &psi, &psi, 1.0);
                trace.ger(w, &psi, &phi, 1.0);
                cell_cell.ger(w, &phik, &phik, 1.0);
                psi_mean.axpy(w, &psi, 1.0);
            }
            // (E_c n) for c = 1, 2, 3.
            let en = [
                Vector::new(nrm.x, 0.0),
                Vector::new(0.0, nrm.y),
                Vector::new(nrm.y, nrm.x) * SQRT_HALF,
            ];
            for (cmp, e) in en.iter().enumerate() {
                for j in 0..nk {
                    let row = cmp * nk + j;
                    for a in 0..2 {
                        if e[a] == 0.0 {
                            continue;
                        }
                        for m in 0..nfk {
                            bg[(row, fc(fi, a, m))] += e[a] * trace[(m, j)];
                        }
                        for i in 0..nk {
                            bg[(row, cc(a, i))] -= e[a] * cell_cell[(i, j)];
                        }
                    }
                }
            }
            for m in 0..nfk {
                closure_rhs[(2, fc(fi, 0, m))] += 0.5 * h_t / area * nrm.y * psi_mean[m];
                closure_rhs[(2, fc(fi, 1, m))] -= 0.5 * h_t / area * nrm.x * psi_mean[m];
            }
            let chol_f = mass_f.cholesky().ok_or(singular(cell, "face mass matrix"))?;
            traces.push(chol_f.solve(&trace));
            face_bases.push(fb);
            face_rules.push(frule);
        }

        let mut gradient = bg;
        for cmp in 0..3 {
            let mut block = gradient.rows_mut(cmp * nk, nk);
            let solved = chol_k.solve(&block.clone_owned());
            block.copy_from(&solved);
        }
        let divergence = gradient.rows(0, nk) + gradient.rows(nk, nk);
        let pressure_coupling = &pres_mass * &divergence;

        let lhs = &stiff + closure.transpose() * &closure;
        let rhs = &strain_mass * &gradient + closure.transpose() * &closure_rhs;
        let reconstruction = lhs
            .cholesky()
            .ok_or(singular(cell, "velocity reconstruction"))?
            .solve(&rhs);

        // Δ_F = π_F(R v − v_F) − π_T(R v − v_T) restricted to F.
        let proj_k = chol_k.solve(&mass_k_k1);
        let mut residuals = Vec::with_capacity(nf);
        for (fi, trace) in traces.iter().enumerate() {
            let mut delta = DMatrix::zeros(2 * nfk, n);
            let trace_low = trace.columns(0, nk);
            for a in 0..2 {
                let ra = reconstruction.rows(a * nk1, nk1);
                let mut cell_part = &proj_k * ra;
                for i in 0..nk {
                    cell_part[(i, cc(a, i))] -= 1.0;
                }
                let mut da = trace * ra - trace_low * cell_part;
                for m in 0..nfk {
                    da[(m, fc(fi, a, m))] -= 1.0;
                }
                delta.rows_mut(a * nfk, nfk).copy_from(&da);
            }
            residuals.push(delta);
        }

        // Quadrature caches for the nonlinear forms.
        let nq = rule.len();
        let mut basis_vals = DMatrix::zeros(nk, nq);
        let mut grad_at = Vec::with_capacity(nq);
        let mut strain_at = Vec::with_capacity(nq);
        let mut full_at = Vec::with_capacity(nq);
        let mut value_at = Vec::with_capacity(nq);
        for (q, p) in rule.points.iter().enumerate() {
            let phi = cell_basis.eval(p);
            let grad = cell_basis.grad(p);
            basis_vals.set_column(q, &phi);
            let mut g = Matrix3xX::zeros(n);
            for cmp in 0..3 {
                let row = phi.transpose() * gradient.rows(cmp * nk, nk);
                g.row_mut(cmp).copy_from(&row);
            }
            grad_at.push(g);
            let s = strain_cache(&grad);
            let mut st = Matrix3xX::zeros(n);
            st.columns_mut(0, 2 * nk).copy_from(&s);
            strain_at.push(st);
            let mut full = DMatrix::zeros(4, n);
            let mut val = Matrix2xX::zeros(n);
            for i in 0..nk {
                full[(0, cc(0, i))] = grad[i].x;
                full[(1, cc(0, i))] = grad[i].y;
                full[(2, cc(1, i))] = grad[i].x;
                full[(3, cc(1, i))] = grad[i].y;
                val[(0, cc(0, i))] = phi[i];
                val[(1, cc(1, i))] = phi[i];
            }
            full_at.push(full);
            value_at.push(val);
        }
        let cell_quad = CellQuad {
            points: rule.points.clone(),
            weights: rule.weights.clone(),
            basis: basis_vals,
            gradient: grad_at,
            strain: strain_at,
            full_gradient: full_at,
            value: value_at,
        };

        let mut face_quads = Vec::with_capacity(nf);
        for (fi, frule) in face_rules.into_iter().enumerate() {
            let fb = &face_bases[fi];
            let delta = &residuals[fi];
            let mut residual = Vec::with_capacity(frule.len());
            let mut jump = Vec::with_capacity(frule.len());
            for p in &frule.points {
                let psi = fb.eval(p);
                let phi = cell_basis.eval(p);
                let mut d = Matrix2xX::zeros(n);
                let mut j = Matrix2xX::zeros(n);
                for a in 0..2 {
                    let row = psi.transpose() * delta.rows(a * nfk, nfk);
                    d.row_mut(a).copy_from(&row);
                    for m in 0..nfk {
                        j[(a, fc(fi, a, m))] = psi[m];
                    }
                    for i in 0..nk {
                        j[(a, cc(a, i))] = -phi[i];
                    }
                }
                residual.push(d);
                jump.push(j);
            }
            face_quads.push(FaceQuad {
                weights: frule.weights,
                residual,
                jump,
            });
        }

        let face_diameters: Vec<f64> = c.faces.iter().map(|&f| mesh.face(f).length).collect();
        let mut ops = Self {
            cell,
            k,
            n_faces: nf,
            r,
            gradient,
            divergence,
            reconstruction,
            pressure_coupling,
            cell_basis,
            reconstruction_basis: basis,
            pressure_basis,
            face_bases,
            face_diameters,
            residuals,
            residual_scales: vec![1.0; nf],
            cell_quad,
            face_quads,
        };
        ops.set_exponent(r)?;
        Ok(ops)
    }

    /// Updates the `h_F^{-1/r'}` scaling of the boundary residuals.
    pub fn set_exponent(&mut self, r: f64) -> Result<()> {
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponent r = {r} must exceed 1")));
        }
        self.r = r;
        let r_conj = r / (r - 1.0);
        for (s, h) in self.residual_scales.iter_mut().zip(&self.face_diameters) {
            *s = h.powf(-1.0 / r_conj);
        }
        Ok(())
    }

    /// Size of the local velocity vector.
    pub fn local_size(&self) -> usize {
        self.gradient.ncols()
    }

    pub fn residual_scale(&self, face: usize) -> f64 {
        self.residual_scales[face]
    }

    /// `Δ_F` for the `i`-th face of the cell, including the `h_F^{-1/r'}`
    /// scaling; rows hold x-coefficients then y-coefficients in `P^k(F)`.
    pub fn boundary_residual(&self, face: usize) -> DMatrix<f64> {
        &self.residuals[face] * self.residual_scales[face]
    }

    /// Number of quadrature points on the cell.
    pub fn cell_quadrature_len(&self) -> usize {
        self.cell_quad.points.len()
    }

    pub(crate) fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.local_size() {
            return Err(Error::SizeMismatch {
                expected: self.local_size(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Evaluates `R v` at `p`.
    pub fn reconstruct_at(&self, v: &DVector<f64>, p: &Point) -> Vector {
        let b = &self.reconstruction_basis;
        let coeffs = &self.reconstruction * v;
        let nk1 = b.size();
        let phi = b.eval(p);
        Vector::new(
            phi.dot(&coeffs.rows(0, nk1)),
            phi.dot(&coeffs.rows(nk1, nk1)),
        )
    }

    /// Evaluates `v_T` at `p`.
    pub fn cell_value_at(&self, v: &DVector<f64>, p: &Point) -> Vector {
        let nk = self.cell_basis.size();
        let phi = self.cell_basis.eval(p);
        Vector::new(phi.dot(&v.rows(0, nk)), phi.dot(&v.rows(nk, nk)))
    }

    /// Evaluates the symmetric tensor `G v` (Mandel coordinates) at `p`.
    pub fn gradient_at(&self, v: &DVector<f64>, p: &Point) -> nalgebra::Vector3<f64> {
        let nk = self.cell_basis.size();
        let phi = self.cell_basis.eval(p);
        let g = &self.gradient * v;
        nalgebra::Vector3::from_fn(|c, _| phi.dot(&g.rows(c * nk, nk)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, generate_cartesian, MeshFamily};
    use crate::rheology::to_mandel;
    use nalgebra::{Matrix2, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random polynomial vector field of total degree ≤ `deg`.
    fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> impl Fn(&Point) -> (Vector, Matrix2<f64>) {
        let n = cell_dim(deg);
        let cx: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cy: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = CellBasis::new(Point::new(0.3, 0.6), 1.0, deg);
        move |p: &Point| {
            let phi = b.eval(p);
            let g = b.grad(p);
            let v = Vector::new(
                phi.iter().zip(&cx).map(|(a, b)| a * b).sum(),
                phi.iter().zip(&cy).map(|(a, b)| a * b).sum(),
            );
            let gx: Vector = g.iter().zip(&cx).map(|(a, b)| a * *b).sum();
            let gy: Vector = g.iter().zip(&cy).map(|(a, b)| a * *b).sum();
            (v, Matrix2::new(gx.x, gx.y, gy.x, gy.y))
        }
    }

    fn meshes() -> Vec<Mesh> {
        [
            MeshFamily::Cartesian,
            MeshFamily::DistortedTriangular,
            MeshFamily::DistortedCartesian,
        ]
        .into_iter()
        .map(|f| generate(f, 3, 0.15).unwrap())
        .collect()
    }

    #[test]
    fn constant_field_is_in_every_kernel() {
        let m = generate(MeshFamily::DistortedCartesian, 3, 0.2).unwrap();
        for k in 1..=3 {
            for c in [0, 4] {
                let ops = ElementOperators::new(&m, c, k, 1.75).unwrap();
                let v = interpolate(&m, c, k, 2 * k + 2, |_| Vector::new(0.7, -1.3))
                    .unwrap()
                    .to_flat();
                assert!((&ops.gradient * &v).amax() < 1e-12);
                assert!((&ops.divergence * &v).amax() < 1e-12);
                for f in 0..ops.n_faces {
                    assert!((ops.boundary_residual(f) * &v).amax() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rigid_rotation() {
        let m = generate(MeshFamily::DistortedTriangular, 4, 0.3).unwrap();
        let rot = |p: &Point| Vector::new(-p.y, p.x);
        for k in 1..=3 {
            let ops = ElementOperators::new(&m, 5, k, 2.0).unwrap();
            let v = interpolate(&m, 5, k, 2 * k + 2, rot).unwrap().to_flat();
            assert!((&ops.gradient * &v).amax() < 1e-11);
            let p = m.cell(5).centroid + Vector::new(0.01, -0.02);
            assert!((ops.reconstruct_at(&v, &p) - rot(&p)).norm() < 1e-12);
        }
    }

    /// Brute-force `π_T^k(∇_s w)` by a dense least-squares fit at quadrature points.
    fn lsq_projection(m: &Mesh, cell: usize, k: usize, f: impl Fn(&Point) -> Vector3<f64>) -> DVector<f64> {
        let b = hho_cell_basis(m, cell, k).unwrap().truncated(k);
        let rule = quad_cell(m, cell, 2 * k + 6).unwrap();
        let nk = b.size();
        let mut a = DMatrix::zeros(rule.len(), nk);
        let mut rhs = DMatrix::zeros(rule.len(), 3);
        for (q, (p, w)) in rule.iter().enumerate() {
            let sw = w.sqrt();
            a.row_mut(q).copy_from(&(b.eval(p).transpose() * sw));
            rhs.row_mut(q).copy_from(&(f(p).transpose() * sw));
        }
        let sol = a.svd(true, true).solve(&rhs, 1e-14).unwrap();
        DVector::from_iterator(3 * nk, (0..3).flat_map(|c| sol.column(c).iter().copied().collect::<Vec<_>>()))
    }

    #[test]
    fn quadratic_field_on_unit_square() {
        let m = generate_cartesian(1).unwrap();
        let w = |p: &Point| Vector::new(p.x * p.x, p.x * p.y);
        let ops = ElementOperators::new(&m, 0, 1, 2.0).unwrap();
        let v = interpolate(&m, 0, 1, 6, w).unwrap().to_flat();
        let g = &ops.gradient * &v;
        let oracle = lsq_projection(&m, 0, 1, |p| {
            to_mandel(&Matrix2::new(2.0 * p.x, 0.5 * p.y, 0.5 * p.y, p.x))
        });
        assert!((g - oracle).amax() < 1e-12);
        for f in 0..4 {
            assert!((ops.boundary_residual(f) * &v).amax() < 1e-12);
        }
    }

    #[test]
    fn commutation_reconstruction_and_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in meshes() {
            for k in 1..=3 {
                for trial in 0..50 {
                    let cell = trial % m.num_cells();
                    let ops = ElementOperators::new(&m, cell, k, 2.5).unwrap();
                    let field = random_poly(&mut rng, k + 1);
                    let v = interpolate(&m, cell, k, 2 * k + 4, |p| field(p).0).unwrap().to_flat();
                    let g = &ops.gradient * &v;
                    let oracle = lsq_projection(&m, cell, k, |p| {
                        let gr = field(p).1;
                        to_mandel(&(0.5 * (gr + gr.transpose())))
                    });
                    let scale = oracle.amax().max(1.0);
                    assert!((&g - &oracle).amax() < 1e-11 * scale, "k={k} G");
                    let d = &ops.divergence * &v;
                    let nk = cell_dim(k);
                    let div = oracle.rows(0, nk) + oracle.rows(nk, nk);
                    assert!((d - div).amax() < 1e-11 * scale, "k={k} D");
                    for f in 0..ops.n_faces {
                        assert!((ops.boundary_residual(f) * &v).amax() < 1e-10 * scale);
                    }
                    if trial < 30 {
                        let c = m.cell(cell);
                        let t: f64 = rng.random_range(0.0..0.9);
                        let vtx = m.vertices()[c.vertices[trial % c.vertices.len()]];
                        let p = c.centroid + (vtx - c.centroid) * t;
                        let exact = field(&p).0;
                        let err = (ops.reconstruct_at(&v, &p) - exact).norm();
                        assert!(err < 1e-10 * exact.norm().max(1.0), "k={k} R err {err}");
                    }
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = generate(MeshFamily::DistortedCartesian, 4, 0.25).unwrap();
        for k in 1..=3 {
            let field = random_poly(&mut rng, k);
            let ops = ElementOperators::new(&m, 6, k, 2.0).unwrap();
            let v = interpolate(&m, 6, k, 2 * k, |p| field(p).0).unwrap().to_flat();
            let c = m.cell(6);
            for _ in 0..20 {
                let t: f64 = rng.random_range(0.0..1.0);
                let vtx = m.vertices()[c.vertices[rng.random_range(0..c.vertices.len())]];
                let p = c.centroid + (vtx - c.centroid) * t;
                assert!((ops.cell_value_at(&v, &p) - field(&p).0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn face_interpolant_matches_fine_least_squares() {
        let m = generate_cartesian(4).unwrap();
        let u = |p: &Point| {
            let (a, b) = (std::f64::consts::FRAC_PI_2 * p.x, std::f64::consts::FRAC_PI_2 * p.y);
            Vector::new(a.sin() * b.cos(), -a.cos() * b.sin())
        };
        let k = 2;
        for (fi, &f) in m.cell(5).faces.iter().enumerate() {
            let got = &interpolate(&m, 5, k, 2 * k + 10, u).unwrap().faces[fi];
            // Composite 3-point Gauss least squares on 400 sub-intervals.
            let fb = FaceBasis::on_face(&m, f, k);
            let [a, b] = m.face_points(f);
            let nsub = 400;
            let g = (0.6f64).sqrt();
            let nodes = [(-g, 5.0 / 9.0), (0.0, 8.0 / 9.0), (g, 5.0 / 9.0)];
            let mut mm = DMatrix::zeros(k + 1, k + 1);
            let mut rhs = DMatrix::zeros(k + 1, 2);
            for s in 0..nsub {
                for &(x, w) in &nodes {
                    let t = (s as f64 + 0.5 * (x + 1.0)) / nsub as f64;
                    let p = Point::from(a.coords + (b - a) * t);
                    let psi = fb.eval(&p);
                    mm.ger(w, &psi, &psi, 1.0);
                    let val = u(&p);
                    for c in 0..2 {
                        rhs.column_mut(c).axpy(w * val[c], &psi, 1.0);
                    }
                }
            }
            let sol = mm.lu().solve(&rhs).unwrap();
            for c in 0..2 {
                for i in 0..=k {
                    assert!((got[c * (k + 1) + i] - sol[(i, c)]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn local_vector_roundtrip() {
        let v = DVector::from_fn(6 + 3 * 4, |i, _| i as f64);
        let lv = LocalVector::from_flat(1, 3, &v).unwrap();
        assert_eq!(lv.faces[2][3], 17.0);
        assert_eq!(lv.to_flat(), v);
        assert!(LocalVector::from_flat(1, 4, &v).is_err());
    }

    #[test]
    fn rejects_k_zero() {
        let m = generate_cartesian(1).unwrap();
        assert!(ElementOperators::new(&m, 0, 0, 2.0).is_err());
    }
}
