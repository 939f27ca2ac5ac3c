use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::rheology::{from_mandel, stress_tangent, to_mandel, FlowLaw};
use crate::solver::{field, VectorField};
use crate::{Point, Vector};

/// A smooth velocity–pressure pair with closed-form derivatives.
pub trait ExactSolution: Send + Sync {
    fn velocity(&self, p: &Point) -> Vector;
    /// `∇u` with entries `(i, j) = ∂_j u_i`.
    fn velocity_gradient(&self, p: &Point) -> Matrix2<f64>;
    /// `[∂_x ∇u, ∂_y ∇u]`.
    fn velocity_hessian(&self, p: &Point) -> [Matrix2<f64>; 2];
    fn pressure(&self, p: &Point) -> f64;
    fn pressure_gradient(&self, p: &Point) -> Vector;
    fn name(&self) -> &'static str;
}

/// `u = (sin(πx/2) cos(πy/2), −cos(πx/2) sin(πy/2))`,
/// `p = sin(πx/2) sin(πy/2) − 4/π²` on the unit square.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrigonometricSolution;

impl ExactSolution for TrigonometricSolution {
    fn velocity(&self, p: &Point) -> Vector {
        let (sx, cx, sy, cy) = trig(p);
        Vector::new(sx * cy, -cx * sy)
    }

    fn velocity_gradient(&self, p: &Point) -> Matrix2<f64> {
        let (sx, cx, sy, cy) = trig(p);
        let k = 0.5 * PI;
        Matrix2::new(k * cx * cy, -k * sx * sy, k * sx * sy, -k * cx * cy)
    }

    fn velocity_hessian(&self, p: &Point) -> [Matrix2<f64>; 2] {
        let (sx, cx, sy, cy) = trig(p);
        let k2 = 0.25 * PI * PI;
        [
            Matrix2::new(-k2 * sx * cy, -k2 * cx * sy, k2 * cx * sy, k2 * sx * cy),
            Matrix2::new(-k2 * cx * sy, -k2 * sx * cy, k2 * sx * cy, k2 * cx * sy),
        ]
    }

    fn pressure(&self, p: &Point) -> f64 {
        let (sx, _, sy, _) = trig(p);
        sx * sy - 4.0 / (PI * PI)
    }

    fn pressure_gradient(&self, p: &Point) -> Vector {
        let (sx, cx, sy, cy) = trig(p);
        0.5 * PI * Vector::new(cx * sy, sx * cy)
    }

    fn name(&self) -> &'static str {
        "trigonometric"
    }
}

fn trig(p: &Point) -> (f64, f64, f64, f64) {
    let (sx, cx) = (0.5 * PI * p.x).sin_cos();
    let (sy, cy) = (0.5 * PI * p.y).sin_cos();
    (sx, cx, sy, cy)
}

/// `u = (x², −2xy)`, `p = x − 1/2`: quadratic velocity and affine pressure,
/// reproduced exactly by the Newtonian scheme with `k ≥ 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolynomialSolution;

impl ExactSolution for PolynomialSolution {
    fn velocity(&self, p: &Point) -> Vector {
        Vector::new(p.x * p.x, -2.0 * p.x * p.y)
    }

    fn velocity_gradient(&self, p: &Point) -> Matrix2<f64> {
        Matrix2::new(2.0 * p.x, 0.0, -2.0 * p.y, -2.0 * p.x)
    }

    fn velocity_hessian(&self, _: &Point) -> [Matrix2<f64>; 2] {
        [Matrix2::new(2.0, 0.0, 0.0, -2.0), Matrix2::new(0.0, 0.0, -2.0, 0.0)]
    }

    fn pressure(&self, p: &Point) -> f64 {
        p.x - 0.5
    }

    fn pressure_gradient(&self, _: &Point) -> Vector {
        Vector::new(1.0, 0.0)
    }

    fn name(&self) -> &'static str {
        "polynomial"
    }
}

/// An exact solution together with the flow law defining its load.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub law: FlowLaw,
    pub solution: Arc<dyn ExactSolution>,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("law", &self.law)
            .field("solution", &self.solution.name())
            .finish()
    }
}

impl ManufacturedCase {
    pub fn new(law: FlowLaw, solution: Arc<dyn ExactSolution>) -> Self {
        Self { law, solution }
    }

    /// The trigonometric benchmark on the unit square.
    pub fn trigonometric(law: FlowLaw) -> Self {
        Self::new(law, Arc::new(TrigonometricSolution))
    }

    pub fn polynomial(law: FlowLaw) -> Self {
        Self::new(law, Arc::new(PolynomialSolution))
    }

    pub fn velocity(&self, p: &Point) -> Vector {
        self.solution.velocity(p)
    }

    pub fn pressure(&self, p: &Point) -> f64 {
        self.solution.pressure(p)
    }

    /// `∇_s u`.
    pub fn strain(&self, p: &Point) -> Matrix2<f64> {
        let g = self.solution.velocity_gradient(p);
        0.5 * (g + g.transpose())
    }

    /// `f = −div σ(∇_s u) + ∇p`, by the chain rule through the stress tangent.
    pub fn load(&self, p: &Point) -> Vector {
        let tangent = stress_tangent(&self.law, &self.strain(p));
        let h = self.solution.velocity_hessian(p);
        let mut div = Vector::zeros();
        for (j, hj) in h.iter().enumerate() {
            let dtau = 0.5 * (hj + hj.transpose());
            let dsigma = from_mandel(&(tangent * to_mandel(&dtau)));
            div += dsigma.column(j);
        }
        self.solution.pressure_gradient(p) - div
    }

    pub fn load_field(&self) -> VectorField {
        let case = self.clone();
        field(move |p| case.load(p))
    }

    /// Dirichlet data `g = u`.
    pub fn boundary_field(&self) -> VectorField {
        let s = Arc::clone(&self.solution);
        field(move |p| s.velocity(p))
    }

    pub fn velocity_field(&self) -> VectorField {
        self.boundary_field()
    }
}
