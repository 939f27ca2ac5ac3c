//! Polygonal meshes of planar domains.
//!
//! A [`Mesh`] is built from a vertex list and counter-clockwise cell vertex
//! lists. Faces (edges) are recovered by hashing vertex pairs and oriented
//! from the lower to the higher vertex index, so that the face basis and the
//! face tangent are shared by both neighbouring cells.

mod generators;
mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result, Vector};

pub use generators::{
    generate, generate_cartesian, generate_distorted_cartesian, generate_distorted_triangular,
    MeshFamily, DEFAULT_DISTORTION,
};
pub use io::{load_mesh, parse_mesh, write_mesh};

/// Spatial dimension handled by the mesh data structures.
pub const DIM: usize = 2;

/// A polygonal cell.
#[derive(Clone, Debug)]
pub struct Cell {
    /// Vertex indices, counter-clockwise.
    pub vertices: Vec<usize>,
    /// Face indices; face `i` joins vertex `i` and vertex `i + 1`.
    pub faces: Vec<usize>,
    /// Unit normals pointing out of the cell, one per entry of `faces`.
    pub normals: Vec<Vector>,
    pub centroid: Point,
    pub area: f64,
    /// Cell diameter `h_T`.
    pub diameter: f64,
}

impl Cell {
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }
}

/// A straight face (edge).
#[derive(Clone, Debug)]
pub struct Face {
    /// End points, lower index first.
    pub vertices: [usize; 2],
    /// Adjacent cells; the second slot is `None` on the boundary.
    pub cells: [Option<usize>; 2],
    pub length: f64,
    pub midpoint: Point,
    /// Unit tangent from `vertices[0]` to `vertices[1]`.
    pub tangent: Vector,
    pub boundary: bool,
}

impl Face {
    /// Face diameter `h_F`, equal to its length.
    pub fn diameter(&self) -> f64 {
        self.length
    }

    pub fn adjacent_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().flatten().copied()
    }
}

/// Shape-regularity diagnostics of a mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Smallest ratio between the distance from the centroid to the cell
    /// boundary and the cell diameter.
    pub min_inradius_ratio: f64,
    pub max_faces_per_cell: usize,
    pub min_face_cell_ratio: f64,
    pub max_face_cell_ratio: f64,
}

/// Immutable polygonal mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<Cell>,
    faces: Vec<Face>,
    h: f64,
}

impl Mesh {
    /// Builds the mesh connectivity and geometry from counter-clockwise cell
    /// vertex lists.
    pub fn from_cells(vertices: Vec<Point>, cell_vertices: Vec<Vec<usize>>) -> Result<Self> {
        if cell_vertices.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        let mut faces: Vec<Face> = Vec::new();
        let mut face_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(cell_vertices.len());

        for (c, verts) in cell_vertices.into_iter().enumerate() {
            if verts.len() < 3 {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} has {} vertices, at least 3 required",
                    verts.len()
                )));
            }
            if let Some(&v) = verts.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references vertex {v}, but only {} vertices exist",
                    vertices.len()
                )));
            }
            let pts: Vec<Point> = verts.iter().map(|&v| vertices[v]).collect();
            let (area, centroid) = polygon_area_centroid(&pts);
            if area <= 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "cell {c} has non-positive signed area {area:e} (zero area or clockwise ordering)"
                )));
            }

            let nv = verts.len();
            let mut cell_faces = Vec::with_capacity(nv);
            let mut normals = Vec::with_capacity(nv);
            for i in 0..nv {
                let (a, b) = (verts[i], verts[(i + 1) % nv]);
                if a == b {
                    return Err(Error::DegenerateGeometry(format!(
                        "cell {c} repeats vertex {a} on consecutive positions"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let f = match face_index.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.cells[1].is_some() {
                            return Err(Error::NonManifoldFace(key.0, key.1));
                        }
                        if face.cells[0] == Some(c) {
                            return Err(Error::InvalidMesh(format!(
                                "cell {c} uses face ({}, {}) twice",
                                key.0, key.1
                            )));
                        }
                        face.cells[1] = Some(c);
                        face.boundary = false;
                        f
                    }
                    None => {
                        let (p, q) = (vertices[key.0], vertices[key.1]);
                        let e = q - p;
                        let length = e.norm();
                        if length <= 0.0 {
                            return Err(Error::DegenerateGeometry(format!(
                                "face ({}, {}) has zero length",
                                key.0, key.1
                            )));
                        }
                        faces.push(Face {
                            vertices: [key.0, key.1],
                            cells: [Some(c), None],
                            length,
                            midpoint: Point::from((p.coords + q.coords) * 0.5),
                            tangent: e / length,
                            boundary: true,
                        });
                        face_index.insert(key, faces.len() - 1);
                        faces.len() - 1
                    }
                };
                let e = vertices[b] - vertices[a];
                normals.push(Vector::new(e.y, -e.x) / e.norm());
                cell_faces.push(f);
            }

            let mut diameter: f64 = 0.0;
            for i in 0..nv {
                for j in (i + 1)..nv {
                    diameter = diameter.max((pts[i] - pts[j]).norm());
                }
            }
            cells.push(Cell {
                vertices: verts,
                faces: cell_faces,
                normals,
                centroid,
                area,
                diameter,
            });
        }

        // Two cells sharing a face must traverse it in opposite directions.
        for (f, face) in faces.iter().enumerate() {
            if let [Some(c0), Some(c1)] = face.cells {
                let n0 = outward_normal(&cells[c0], f);
                let n1 = outward_normal(&cells[c1], f);
                if (n0 + n1).norm() > 1e-12 {
                    return Err(Error::InvalidMesh(format!(
                        "cells {c0} and {c1} have inconsistent orientation across face {f}"
                    )));
                }
            }
        }

        let h = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        Ok(Self {
            vertices,
            cells,
            faces,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        DIM
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn cell(&self, c: usize) -> &Cell {
        &self.cells[c]
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.boundary).count()
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.len() - self.num_boundary_faces()
    }

    /// Mesh size `h = max_T h_T`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Vertex coordinates of a cell, counter-clockwise.
    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cells[c]
            .vertices
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    pub fn face_points(&self, f: usize) -> [Point; 2] {
        let [a, b] = self.faces[f].vertices;
        [self.vertices[a], self.vertices[b]]
    }

    /// Checks the connectivity and geometric invariants; returns a
    /// description of the first violation found.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidMesh(msg));
        for (f, face) in self.faces.iter().enumerate() {
            let n_adj = face.adjacent_cells().count();
            if face.boundary != (n_adj == 1) || n_adj == 0 {
                return fail(format!("face {f} has inconsistent boundary flag"));
            }
            for c in face.adjacent_cells() {
                if !self.cells[c].faces.contains(&f) {
                    return fail(format!("face {f} lists cell {c} which does not list it"));
                }
            }
            if face.length <= 0.0 {
                return fail(format!("face {f} has non-positive length"));
            }
        }
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.area <= 0.0 {
                return fail(format!("cell {c} has non-positive area"));
            }
            let mut closure = Vector::zeros();
            for (i, &f) in cell.faces.iter().enumerate() {
                let face = &self.faces[f];
                if !face.adjacent_cells().any(|t| t == c) {
                    return fail(format!("cell {c} lists face {f} which does not list it"));
                }
                let n = cell.normals[i];
                if (n.norm() - 1.0).abs() > 1e-12 {
                    return fail(format!("normal of face {f} in cell {c} is not unit"));
                }
                if face.length > cell.diameter * (1.0 + 1e-14) {
                    return fail(format!("face {f} is longer than cell {c} diameter"));
                }
                closure += n * face.length;
            }
            if closure.norm() > 1e-12 * cell.diameter {
                return fail(format!(
                    "cell {c} violates the normal closure relation: |sum| = {:e}",
                    closure.norm()
                ));
            }
        }
        Ok(())
    }
}

fn outward_normal(cell: &Cell, f: usize) -> Vector {
    let i = cell.faces.iter().position(|&g| g == f).unwrap();
    cell.normals[i]
}

/// Signed area and centroid of a polygon given counter-clockwise.
pub fn polygon_area_centroid(pts: &[Point]) -> (f64, Point) {
    let n = pts.len();
    // Shoelace formula relative to the first vertex to limit cancellation.
    let o = pts[0];
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = pts[i] - o;
        let q = pts[(i + 1) % n] - o;
        let cross = p.x * q.y - q.x * p.y;
        area2 += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    let area = 0.5 * area2;
    if area2 == 0.0 {
        return (0.0, o);
    }
    (area, Point::new(o.x + cx / (3.0 * area2), o.y + cy / (3.0 * area2)))
}

/// Computes the shape-regularity diagnostics of `mesh`.
pub fn mesh_stats(mesh: &Mesh) -> RegularityReport {
    let mut min_inradius_ratio = f64::INFINITY;
    let mut max_faces_per_cell = 0;
    let mut min_fc = f64::INFINITY;
    let mut max_fc: f64 = 0.0;
    for cell in mesh.cells() {
        max_faces_per_cell = max_faces_per_cell.max(cell.num_faces());
        let mut dist = f64::INFINITY;
        for (i, &f) in cell.faces.iter().enumerate() {
            let face = mesh.face(f);
            let ratio = face.length / cell.diameter;
            min_fc = min_fc.min(ratio);
            max_fc = max_fc.max(ratio);
            dist = dist.min((face.midpoint - cell.centroid).dot(&cell.normals[i]));
        }
        min_inradius_ratio = min_inradius_ratio.min(dist / cell.diameter);
    }
    RegularityReport {
        min_inradius_ratio,
        max_faces_per_cell,
        min_face_cell_ratio: min_fc,
        max_face_cell_ratio: max_fc,
    }
}
