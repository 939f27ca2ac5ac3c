//! Scaled monomial bases and local L² projectors.
//!
//! Cell bases are monomials in `2 (x - x_T) / h_T`, ordered by total degree
//! (`1, ξ, η, ξ², ξη, η², …`), so the degree-`l` basis is a prefix of the
//! degree-`l+1` one. Face bases are Legendre polynomials in the scaled
//! arclength coordinate `2 (x - x_F)·t_F / h_F ∈ [-1, 1]`.

use nalgebra::{DMatrix, DVector};

use crate::mesh::Mesh;
use crate::quadrature::{quad_cell, quad_face, QuadratureRule};
use crate::{Error, Point, Result, Vector};

/// Dimension of `P^l` in two variables.
pub fn cell_dim(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}

/// Dimension of `P^l` in one variable.
pub fn face_dim(l: usize) -> usize {
    l + 1
}

/// Scaled monomial basis of `P^l(T)`.
#[derive(Clone, Debug)]
pub struct CellBasis {
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
    exponents: Vec<(u32, u32)>,
    /// Optional lower-triangular change of basis applied to the monomials.
    transform: Option<DMatrix<f64>>,
}

impl CellBasis {
    pub fn new(center: Point, scale: f64, degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(cell_dim(degree));
        for d in 0..=degree as u32 {
            for j in 0..=d {
                exponents.push((d - j, j));
            }
        }
        Self {
            center,
            scale,
            degree,
            exponents,
            transform: None,
        }
    }

    /// Basis of `P^l(T)` orthonormal for the averaged inner product
    /// `(f, g) ↦ |T|⁻¹ ∫_T f g`, obtained by Gram–Schmidt on the scaled
    /// monomials in degree order. The first function is the constant 1 and
    /// the degree-`l'` prefix spans `P^{l'}(T)`.
    pub fn orthonormal_on_cell(mesh: &Mesh, cell: usize, degree: usize) -> Result<Self> {
        let mut basis = Self::on_cell(mesh, cell, degree);
        let rule = quad_cell(mesh, cell, 2 * degree)?;
        let area = mesh.cell(cell).area;
        // Two passes keep the result orthonormal to rounding for
        // ill-conditioned monomial Gram matrices.
        for _ in 0..2 {
            let m = gram(&rule, basis.size(), |p| basis.eval(p)) / area;
            let l = m
                .cholesky()
                .ok_or_else(|| Error::DegenerateGeometry(format!("singular Gram matrix on cell {cell}")))?
                .l();
            let linv = l
                .solve_lower_triangular(&DMatrix::identity(basis.size(), basis.size()))
                .ok_or_else(|| Error::DegenerateGeometry(format!("singular Gram factor on cell {cell}")))?;
            basis.transform = Some(match basis.transform.take() {
                Some(t) => linv * t,
                None => linv,
            });
        }
        Ok(basis)
    }

    /// The first `dim P^degree` functions, which span `P^degree`.
    pub fn truncated(&self, degree: usize) -> Self {
        assert!(degree <= self.degree, "cannot truncate to a higher degree");
        let n = cell_dim(degree);
        Self {
            center: self.center,
            scale: self.scale,
            degree,
            exponents: self.exponents[..n].to_vec(),
            transform: self.transform.as_ref().map(|t| t.view((0, 0), (n, n)).into_owned()),
        }
    }

    /// Basis of `P^l` on a mesh cell, centered at its centroid and scaled by
    /// half its diameter.
    pub fn on_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        let c = mesh.cell(cell);
        Self::new(c.centroid, 0.5 * c.diameter, degree)
    }

    pub fn size(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exponents
    }

    fn local(&self, p: &Point) -> (f64, f64) {
        ((p.x - self.center.x) / self.scale, (p.y - self.center.y) / self.scale)
    }

    pub fn eval(&self, p: &Point) -> DVector<f64> {
        let (xi, eta) = self.local(p);
        let m = DVector::from_iterator(
            self.size(),
            self.exponents
                .iter()
                .map(|&(a, b)| xi.powi(a as i32) * eta.powi(b as i32)),
        );
        match &self.transform {
            Some(t) => t * m,
            None => m,
        }
    }

    /// Gradients of all basis functions at `p`.
    pub fn grad(&self, p: &Point) -> Vec<Vector> {
        let (xi, eta) = self.local(p);
        let pw = |t: f64, e: u32| if e == 0 { 1.0 } else { t.powi(e as i32) };
        let monomial: Vec<Vector> = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a == 0 {
                    0.0
                } else {
                    a as f64 * pw(xi, a - 1) * pw(eta, b)
                };
                let dy = if b == 0 {
                    0.0
                } else {
                    b as f64 * pw(xi, a) * pw(eta, b - 1)
                };
                Vector::new(dx, dy) / self.scale
            })
            .collect();
        match &self.transform {
            Some(t) => (0..self.size())
                .map(|i| {
                    (0..=i)
                        .map(|j| monomial[j] * t[(i, j)])
                        .fold(Vector::zeros(), |a, b| a + b)
                })
                .collect(),
            None => monomial,
        }
    }

    /// Value at `p` of the polynomial with the given coefficients.
    pub fn evaluate(&self, coeffs: &[f64], p: &Point) -> f64 {
        self.eval(p).iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }
}

/// Legendre basis of `P^l(F)`, orthogonal on the face.
#[derive(Clone, Debug)]
pub struct FaceBasis {
    pub midpoint: Point,
    pub tangent: Vector,
    pub scale: f64,
    pub degree: usize,
}

impl FaceBasis {
    pub fn on_face(mesh: &Mesh, face: usize, degree: usize) -> Self {
        let f = mesh.face(face);
        Self {
            midpoint: f.midpoint,
            tangent: f.tangent,
            scale: f.length,
            degree,
        }
    }

    pub fn size(&self) -> usize {
        face_dim(self.degree)
    }

    pub fn eval(&self, p: &Point) -> DVector<f64> {
        let z = 2.0 * (p - self.midpoint).dot(&self.tangent) / self.scale;
        let mut v = DVector::zeros(self.size());
        // Legendre recurrence in z ∈ [-1, 1].
        let (mut p0, mut p1) = (1.0, z);
        v[0] = 1.0;
        for i in 1..self.size() {
            v[i] = p1;
            let n = i as f64;
            let p2 = ((2.0 * n + 1.0) * z * p1 - n * p0) / (n + 1.0);
            p0 = p1;
            p1 = p2;
        }
        v
    }

    pub fn evaluate(&self, coeffs: &[f64], p: &Point) -> f64 {
        self.eval(p).iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }
}

/// Cell basis of `P^l(T)` whose non-constant members have zero mean on `T`.
///
/// Used for pressures: the first coefficient is the cell average.
#[derive(Clone, Debug)]
pub struct PressureBasis {
    pub basis: CellBasis,
    pub means: Vec<f64>,
}

impl PressureBasis {
    /// Built on [`CellBasis::orthonormal_on_cell`].
    pub fn on_cell(mesh: &Mesh, cell: usize, degree: usize) -> Result<Self> {
        Self::from_basis(mesh, cell, CellBasis::orthonormal_on_cell(mesh, cell, degree)?)
    }

    /// Subtracts cell means from every function of `basis` but the first,
    /// which must be the constant 1.
    pub fn from_basis(mesh: &Mesh, cell: usize, basis: CellBasis) -> Result<Self> {
        let degree = basis.degree;
        let rule = quad_cell(mesh, cell, degree)?;
        let area = mesh.cell(cell).area;
        let mut means = vec![0.0; basis.size()];
        for (p, w) in rule.iter() {
            for (m, v) in means.iter_mut().zip(basis.eval(p).iter()) {
                *m += w * v / area;
            }
        }
        means[0] = 0.0;
        Ok(Self { basis, means })
    }

    pub fn size(&self) -> usize {
        self.basis.size()
    }

    pub fn eval(&self, p: &Point) -> DVector<f64> {
        let mut v = self.basis.eval(p);
        for (x, m) in v.iter_mut().zip(&self.means) {
            *x -= m;
        }
        v
    }

    pub fn evaluate(&self, coeffs: &[f64], p: &Point) -> f64 {
        self.eval(p).iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }
}

/// Gram matrix `∫ φ_i φ_j` of basis values sampled at the rule points.
pub fn gram<F>(rule: &QuadratureRule, n: usize, eval: F) -> DMatrix<f64>
where
    F: Fn(&Point) -> DVector<f64>,
{
    let mut m = DMatrix::zeros(n, n);
    for (p, w) in rule.iter() {
        let v = eval(p);
        m.ger(w, &v, &v, 1.0);
    }
    m
}

fn project<F, B>(rule: &QuadratureRule, n: usize, eval: B, f: F, what: &'static str) -> Result<DVector<f64>>
where
    F: Fn(&Point) -> f64,
    B: Fn(&Point) -> DVector<f64>,
{
    let mut m = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (p, w) in rule.iter() {
        let v = eval(p);
        m.ger(w, &v, &v, 1.0);
        rhs.axpy(w * f(p), &v, 1.0);
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::DegenerateGeometry(format!("singular {what} Gram matrix")))?;
    Ok(chol.solve(&rhs))
}

/// Coefficients of `π_T f` in an arbitrary cell basis, using quadrature of
/// exactness `quad_degree`.
pub fn l2_project_in_basis<F>(mesh: &Mesh, cell: usize, basis: &CellBasis, quad_degree: usize, f: F) -> Result<DVector<f64>>
where
    F: Fn(&Point) -> f64,
{
    let rule = quad_cell(mesh, cell, quad_degree.max(2 * basis.degree))?;
    project(&rule, basis.size(), |p| basis.eval(p), f, "cell")
}

/// Coefficients of `π_T^l f` in [`CellBasis::on_cell`], using quadrature of
/// exactness `quad_degree`.
pub fn l2_project_cell_with<F>(mesh: &Mesh, cell: usize, l: usize, quad_degree: usize, f: F) -> Result<DVector<f64>>
where
    F: Fn(&Point) -> f64,
{
    let basis = CellBasis::on_cell(mesh, cell, l);
    let rule = quad_cell(mesh, cell, quad_degree.max(2 * l))?;
    project(&rule, basis.size(), |p| basis.eval(p), f, "cell")
}

/// Coefficients of `π_T^l f`, integrated with exactness `2l + 4`.
pub fn l2_project_cell<F>(mesh: &Mesh, cell: usize, l: usize, f: F) -> Result<DVector<f64>>
where
    F: Fn(&Point) -> f64,
{
    l2_project_cell_with(mesh, cell, l, 2 * l + 4, f)
}

pub fn l2_project_face_with<F>(mesh: &Mesh, face: usize, l: usize, quad_degree: usize, f: F) -> Result<DVector<f64>>
where
    F: Fn(&Point) -> f64,
{
    let basis = FaceBasis::on_face(mesh, face, l);
    let rule = quad_face(mesh, face, quad_degree.max(2 * l));
    project(&rule, basis.size(), |p| basis.eval(p), f, "face")
}

/// Coefficients of `π_F^l f` in [`FaceBasis::on_face`].
pub fn l2_project_face<F>(mesh: &Mesh, face: usize, l: usize, f: F) -> Result<DVector<f64>>
where
    F: Fn(&Point) -> f64,
{
    l2_project_face_with(mesh, face, l, 2 * l + 4, f)
}

/// Orthonormalizes `basis` with respect to the L²(T) inner product: returns
/// `L⁻¹` where `M = L Lᵀ` is the Gram matrix, so that `L⁻¹ φ` is orthonormal.
pub fn orthonormalization(mesh: &Mesh, cell: usize, basis: &CellBasis) -> Result<DMatrix<f64>> {
    let rule = quad_cell(mesh, cell, 2 * basis.degree)?;
    let m = gram(&rule, basis.size(), |p| basis.eval(p));
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::DegenerateGeometry("singular cell Gram matrix".into()))?;
    let l = chol.l();
    l.try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("singular Cholesky factor".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cartesian;

    #[test]
    fn dims() {
        assert_eq!(cell_dim(0), 1);
        assert_eq!(cell_dim(1), 3);
        assert_eq!(cell_dim(2), 6);
        assert_eq!(CellBasis::new(Point::origin(), 1.0, 4).size(), 15);
        assert_eq!(face_dim(3), 4);
    }

    #[test]
    fn constant_at_centroid() {
        let m = crate::mesh::generate_distorted_cartesian(3, 0.2).unwrap();
        let b = CellBasis::on_cell(&m, 4, 3);
        let v = b.eval(&m.cell(4).centroid);
        assert_eq!(v[0], 1.0);
        assert!(v.iter().skip(1).all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let b = CellBasis::new(Point::new(0.3, 0.2), 0.5, 4);
        let p = Point::new(0.41, 0.07);
        let g = b.grad(&p);
        let eps = 1e-6;
        let dx = (b.eval(&Point::new(p.x + eps, p.y)) - b.eval(&Point::new(p.x - eps, p.y))) / (2.0 * eps);
        let dy = (b.eval(&Point::new(p.x, p.y + eps)) - b.eval(&Point::new(p.x, p.y - eps))) / (2.0 * eps);
        for i in 0..b.size() {
            assert!((g[i].x - dx[i]).abs() < 1e-8);
            assert!((g[i].y - dy[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn gram_is_spd() {
        let m = crate::mesh::generate_distorted_triangular(3, 0.3).unwrap();
        for c in 0..m.num_cells() {
            let b = CellBasis::on_cell(&m, c, 3);
            let r = quad_cell(&m, c, 6).unwrap();
            let g = gram(&r, b.size(), |p| b.eval(p));
            assert!((g.clone() - g.transpose()).amax() < 1e-15);
            assert!(g.cholesky().is_some());
        }
    }

    #[test]
    fn project_constant_and_linear() {
        let m = generate_cartesian(1).unwrap();
        let c = l2_project_cell(&m, 0, 1, |_| 3.0).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-14 && c[1].abs() < 1e-14 && c[2].abs() < 1e-14);
        // x = 0.5 + (h_T / 2) ξ with h_T = √2.
        let c = l2_project_cell(&m, 0, 1, |p| p.x).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-14);
        assert!((c[1] - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!(c[2].abs() < 1e-14);
    }

    #[test]
    fn project_quadratic_on_square() {
        // Best linear L² fit of x² on the unit square is x - 1/6, with
        // squared error ∫ (x² - x + 1/6)² = 1/180.
        let m = generate_cartesian(1).unwrap();
        let c = l2_project_cell(&m, 0, 1, |p| p.x * p.x).unwrap();
        let b = CellBasis::on_cell(&m, 0, 1);
        let rule = quad_cell(&m, 0, 8).unwrap();
        let err2 = rule.integrate(|p| (p.x * p.x - b.evaluate(c.as_slice(), p)).powi(2));
        assert!((err2 - 1.0 / 180.0).abs() < 1e-15);
        for (x, y) in [(0.1, 0.9), (0.7, 0.3)] {
            let p = Point::new(x, y);
            assert!((b.evaluate(c.as_slice(), &p) - (x - 1.0 / 6.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn project_face() {
        let m = generate_cartesian(1).unwrap();
        // Bottom face from (0,0) to (1,0): z = 2x - 1, so x = 1/2 + z/2.
        let f = (0..4)
            .find(|&f| m.face(f).midpoint == Point::new(0.5, 0.0))
            .unwrap();
        let c = l2_project_face(&m, f, 1, |_| 2.0).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-14 && c[1].abs() < 1e-14);
        let c = l2_project_face(&m, f, 1, |p| p.x).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        // Best linear fit of x² on [0,1] is x - 1/6 = 1/3 + z/2.
        let c = l2_project_face(&m, f, 1, |p| p.x * p.x).unwrap();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        let c = l2_project_face(&m, f, 2, |p| p.x * p.x).unwrap();
        // x² = 1/3 + z/2 + P2(z)/6.
        assert!((c[2] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn pressure_basis_zero_mean() {
        let m = crate::mesh::generate_distorted_cartesian(4, 0.3).unwrap();
        let pb = PressureBasis::on_cell(&m, 5, 2).unwrap();
        let rule = quad_cell(&m, 5, 4).unwrap();
        for i in 1..pb.size() {
            assert!(rule.integrate(|p| pb.eval(p)[i]).abs() < 1e-15);
        }
        assert!((rule.integrate(|p| pb.eval(p)[0]) - m.cell(5).area).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_basis() {
        let m = crate::mesh::generate_distorted_triangular(3, 0.3).unwrap();
        for c in [0, 5, 11] {
            let b = CellBasis::orthonormal_on_cell(&m, c, 4).unwrap();
            let rule = quad_cell(&m, c, 8).unwrap();
            let g = gram(&rule, b.size(), |p| b.eval(p)) / m.cell(c).area;
            assert!((g - DMatrix::identity(15, 15)).amax() < 1e-13);
            let p = Point::new(0.4, 0.55);
            assert!((b.eval(&p)[0] - 1.0).abs() < 1e-14);
            let t = b.truncated(2);
            assert_eq!(t.eval(&p), b.eval(&p).rows(0, 6).into_owned());
            let eps = 1e-6;
            let g = b.grad(&p);
            let dx = (b.eval(&Point::new(p.x + eps, p.y)) - b.eval(&Point::new(p.x - eps, p.y))) / (2.0 * eps);
            for i in 0..b.size() {
                assert!((g[i].x - dx[i]).abs() < 1e-6 * dx.amax());
            }
        }
    }

    #[test]
    fn orthonormalized_gram_is_identity() {
        let m = generate_cartesian(2).unwrap();
        let b = CellBasis::on_cell(&m, 1, 4);
        let t = orthonormalization(&m, 1, &b).unwrap();
        let rule = quad_cell(&m, 1, 8).unwrap();
        let g = gram(&rule, b.size(), |p| &t * b.eval(p));
        assert!((g - DMatrix::identity(b.size(), b.size())).amax() < 1e-10);
    }
}
