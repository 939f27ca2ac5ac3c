//! Quadrature on segments, triangles and star-shaped polygons.
//!
//! Polygons are integrated by a fan sub-triangulation from the centroid; each
//! triangle carries a collapsed (Duffy) tensor Gauss–Legendre rule, which has
//! strictly positive weights and interior points for every degree.

use crate::mesh::Mesh;
use crate::{Error, Point, Result};

/// A quadrature rule in physical coordinates.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Value and derivative of the Legendre polynomial `P_n` at `z`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule exact to `degree` on the segment `[a, b]`.
pub fn segment_rule(a: Point, b: Point, degree: usize) -> QuadratureRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a).norm();
    let points = x
        .iter()
        .map(|&t| Point::from(a.coords + (b - a) * (0.5 * (t + 1.0))))
        .collect();
    let weights = w.iter().map(|&wi| wi * half).collect();
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Collapsed Gauss rule exact to `degree` on the triangle `(a, b, c)`.
///
/// Appends to `rule`; the triangle must be counter-clockwise.
fn push_triangle(rule: &mut QuadratureRule, a: Point, b: Point, c: Point, degree: usize) {
    let area = 0.5 * ((b - a).perp(&(c - a)));
    // x(s,t) = a + s[(b - a) + t(c - b)], Jacobian 2|T| s.
    let (xs, ws) = gauss_legendre(degree.div_ceil(2) + 1);
    let (xt, wt) = gauss_legendre(degree / 2 + 1);
    for (&s, &w_s) in xs.iter().zip(&ws) {
        let s = 0.5 * (s + 1.0);
        for (&t, &w_t) in xt.iter().zip(&wt) {
            let t = 0.5 * (t + 1.0);
            let p = a.coords + ((b - a) + (c - b) * t) * s;
            rule.points.push(Point::from(p));
            rule.weights.push(0.25 * w_s * w_t * 2.0 * area * s);
        }
    }
}

/// Triangle rule exact to `degree`.
pub fn triangle_rule(a: Point, b: Point, c: Point, degree: usize) -> QuadratureRule {
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    push_triangle(&mut rule, a, b, c, degree);
    rule
}

/// Rule exact to `degree` on a polygon star-shaped with respect to `center`.
pub fn polygon_rule(vertices: &[Point], center: Point, degree: usize) -> Result<QuadratureRule> {
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    let n = vertices.len();
    if n < 3 {
        return Err(Error::DegenerateGeometry("polygon with fewer than 3 vertices".into()));
    }
    if n == 3 {
        push_triangle(&mut rule, vertices[0], vertices[1], vertices[2], degree);
    } else {
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let area = 0.5 * (a - center).perp(&(b - center));
            if area <= 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "polygon is not star-shaped with respect to its centroid (sub-triangle {i})"
                )));
            }
            push_triangle(&mut rule, center, a, b, degree);
        }
    }
    Ok(rule)
}

/// Quadrature of exactness `degree` on a mesh cell.
pub fn quad_cell(mesh: &Mesh, cell: usize, degree: usize) -> Result<QuadratureRule> {
    polygon_rule(&mesh.cell_points(cell), mesh.cell(cell).centroid, degree)
}

/// Gauss–Legendre quadrature of exactness `degree` on a mesh face.
pub fn quad_face(mesh: &Mesh, face: usize, degree: usize) -> QuadratureRule {
    let [a, b] = mesh.face_points(face);
    segment_rule(a, b, degree)
}
