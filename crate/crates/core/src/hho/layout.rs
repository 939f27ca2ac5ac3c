use crate::basis::{cell_dim, face_dim};
use crate::mesh::Mesh;
use crate::mesh::DIM as DIM_VELOCITY;

/// Global numbering of velocity and pressure coefficients.
///
/// Velocity coefficients are laid out as `[cells | interior faces | boundary
/// faces]`, so the unknowns left after strong Dirichlet elimination form a
/// prefix of the velocity vector. Pressures are stored per cell in a separate
/// vector; in the assembled system they follow the velocity unknowns and are
/// followed by the zero-mean multiplier.
#[derive(Clone, Debug)]
pub struct DofLayout {
    pub k: usize,
    pub n_cells: usize,
    pub n_faces: usize,
    pub n_interior_faces: usize,
    /// Velocity coefficients per cell, `d·(k+1)(k+2)/2`.
    pub cell_block: usize,
    /// Velocity coefficients per face, `d·(k+1)`.
    pub face_block: usize,
    /// Pressure coefficients per cell, `(k+1)(k+2)/2`.
    pub pressure_block: usize,
    face_slot: Vec<usize>,
    boundary: Vec<bool>,
}

impl DofLayout {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let n_faces = mesh.num_faces();
        let mut face_slot = vec![0; n_faces];
        let mut next = 0;
        for (f, face) in mesh.faces().iter().enumerate() {
            if !face.boundary {
                face_slot[f] = next;
                next += 1;
            }
        }
        let n_interior_faces = next;
        for (f, face) in mesh.faces().iter().enumerate() {
            if face.boundary {
                face_slot[f] = next;
                next += 1;
            }
        }
        Self {
            k,
            n_cells: mesh.num_cells(),
            n_faces,
            n_interior_faces,
            cell_block: DIM_VELOCITY * cell_dim(k),
            face_block: DIM_VELOCITY * face_dim(k),
            pressure_block: cell_dim(k),
            face_slot,
            boundary: mesh.faces().iter().map(|f| f.boundary).collect(),
        }
    }

    pub fn cell_offset(&self, cell: usize) -> usize {
        cell * self.cell_block
    }

    pub fn face_offset(&self, face: usize) -> usize {
        self.n_cells * self.cell_block + self.face_slot[face] * self.face_block
    }

    pub fn is_boundary_face(&self, face: usize) -> bool {
        self.boundary[face]
    }

    /// Size of the full velocity vector, boundary faces included.
    pub fn n_velocity(&self) -> usize {
        self.n_cells * self.cell_block + self.n_faces * self.face_block
    }

    /// Velocity coefficients that remain unknown after Dirichlet elimination.
    pub fn n_velocity_unknowns(&self) -> usize {
        self.n_cells * self.cell_block + self.n_interior_faces * self.face_block
    }

    pub fn pressure_offset(&self, cell: usize) -> usize {
        cell * self.pressure_block
    }

    pub fn n_pressure(&self) -> usize {
        self.n_cells * self.pressure_block
    }

    /// Row/column of the zero-mean multiplier in the assembled system.
    pub fn multiplier_index(&self) -> usize {
        self.n_velocity_unknowns() + self.n_pressure()
    }

    /// Size of the uncondensed Newton system.
    pub fn system_size(&self) -> usize {
        self.multiplier_index() + 1
    }

    /// Size of the statically condensed system without the multiplier row:
    /// interior face velocities plus one pressure per cell.
    pub fn condensed_size(&self) -> usize {
        self.n_interior_faces * self.face_block + self.n_cells
    }

    /// Full-velocity indices of the local dofs of `cell`, in local order
    /// (cell block, then one block per face of the cell).
    pub fn local_velocity_indices(&self, mesh: &Mesh, cell: usize) -> Vec<usize> {
        let c = mesh.cell(cell);
        let mut idx = Vec::with_capacity(self.cell_block + c.faces.len() * self.face_block);
        idx.extend(self.cell_offset(cell)..self.cell_offset(cell) + self.cell_block);
        for &f in &c.faces {
            let o = self.face_offset(f);
            idx.extend(o..o + self.face_block);
        }
        idx
    }

    /// Local size of the velocity vector on a cell with `n_faces` faces.
    pub fn local_size(&self, n_faces: usize) -> usize {
        self.cell_block + n_faces * self.face_block
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cartesian, generate_distorted_triangular};

    #[test]
    fn offsets_partition_the_range() {
        let mesh = generate_distorted_triangular(3, 0.1).unwrap();
        for k in 1..=3 {
            let l = DofLayout::new(&mesh, k);
            let mut hit = vec![0u8; l.n_velocity()];
            for c in 0..mesh.num_cells() {
                for i in l.cell_offset(c)..l.cell_offset(c) + l.cell_block {
                    hit[i] += 1;
                }
            }
            for f in 0..mesh.num_faces() {
                let o = l.face_offset(f);
                for i in o..o + l.face_block {
                    hit[i] += 1;
                }
                assert_eq!(o >= l.n_velocity_unknowns(), l.is_boundary_face(f));
            }
            assert!(hit.iter().all(|&h| h == 1));
        }
    }

    #[test]
    fn sizes() {
        let mesh = generate_cartesian(2).unwrap();
        let l = DofLayout::new(&mesh, 1);
        assert_eq!((l.cell_block, l.face_block, l.pressure_block), (6, 4, 3));
        assert_eq!(l.condensed_size(), 2 * 4 * 2 + 4);
        assert_eq!(l.system_size(), 4 * 6 + 4 * 4 + 4 * 3 + 1);
        let l = DofLayout::new(&generate_cartesian(1).unwrap(), 1);
        assert_eq!(l.condensed_size(), 1);
    }
}
