use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::{Error, Point, Result};

/// Default vertex displacement amplitude of the distorted families, relative
/// to the grid spacing.
pub const DEFAULT_DISTORTION: f64 = 0.15;

/// Built-in mesh families on the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    Cartesian,
    DistortedTriangular,
    DistortedCartesian,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 3] = [
        MeshFamily::Cartesian,
        MeshFamily::DistortedTriangular,
        MeshFamily::DistortedCartesian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Cartesian => "cartesian",
            MeshFamily::DistortedTriangular => "distorted_triangular",
            MeshFamily::DistortedCartesian => "distorted_cartesian",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeshFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mesh family `{s}`")))
    }
}

/// Builds a member of `family` with `n` cells per side.
///
/// `amplitude` is ignored for the Cartesian family.
pub fn generate(family: MeshFamily, n: usize, amplitude: f64) -> Result<Mesh> {
    match family {
        MeshFamily::Cartesian => generate_cartesian(n),
        MeshFamily::DistortedTriangular => generate_distorted_triangular(n, amplitude),
        MeshFamily::DistortedCartesian => generate_distorted_cartesian(n, amplitude),
    }
}

/// Uniform `n × n` grid of squares on `(0,1)²`.
pub fn generate_cartesian(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidParameter("cells per side must be at least 1".into()));
    }
    let (vertices, cells) = grid(n, 0.0, false);
    Mesh::from_cells(vertices, cells)
}

/// Cartesian grid with interior vertices moved by a smooth sine displacement.
pub fn generate_distorted_cartesian(n: usize, amplitude: f64) -> Result<Mesh> {
    check_distortion(n, amplitude)?;
    let (vertices, cells) = grid(n, amplitude, false);
    Mesh::from_cells(vertices, cells)
}

/// Cartesian grid split along the `(i,j)–(i+1,j+1)` diagonals, then distorted.
///
/// Amplitudes above about 0.33 fold some triangles at `n = 3`; the folded
/// mesh is rejected with [`Error::DegenerateGeometry`].
pub fn generate_distorted_triangular(n: usize, amplitude: f64) -> Result<Mesh> {
    check_distortion(n, amplitude)?;
    let (vertices, cells) = grid(n, amplitude, true);
    Mesh::from_cells(vertices, cells)
}

fn check_distortion(n: usize, amplitude: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("cells per side must be at least 1".into()));
    }
    if !(0.0..0.5).contains(&amplitude) {
        return Err(Error::InvalidParameter(format!(
            "distortion amplitude must lie in [0, 0.5), got {amplitude}"
        )));
    }
    Ok(())
}

fn grid(n: usize, amplitude: f64, split: bool) -> (Vec<Point>, Vec<Vec<usize>>) {
    let nf = n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (x, y) = (i as f64 / nf, j as f64 / nf);
            let interior = i > 0 && i < n && j > 0 && j < n;
            if interior && amplitude > 0.0 {
                let d = amplitude / nf * (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
                vertices.push(Point::new(x + d, y - d));
            } else {
                vertices.push(Point::new(x, y));
            }
        }
    }
    let mut cells = Vec::with_capacity(if split { 2 * n * n } else { n * n });
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if split {
                cells.push(vec![a, b, c]);
                cells.push(vec![a, c, d]);
            } else {
                cells.push(vec![a, b, c, d]);
            }
        }
    }
    (vertices, cells)
}
