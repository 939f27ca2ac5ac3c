//! Hybrid high-order (HHO) discretization of the steady generalized Stokes
//! problem with shear-rate dependent viscosity on polygonal meshes.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: polygonal meshes, built-in mesh families and a text reader,
//! - [`quadrature`] and [`basis`]: integration rules, scaled monomial bases
//!   and local L² projectors,
//! - [`rheology`]: Carreau–Yasuda / power-law stress laws and their tangents,
//! - [`hho`]: per-cell reconstructions, stabilization and local forms,
//! - [`solver`]: global assembly, Dirichlet elimination, Newton iterations and
//!   static condensation,
//! - [`verification`]: manufactured solutions, error norms, convergence runs
//!   and stability studies.

pub mod basis;
pub mod error;
pub mod hho;
pub mod mesh;
pub mod quadrature;
pub mod rheology;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};

/// Points and vectors in the plane.
pub type Point = nalgebra::Point2<f64>;
pub type Vector = nalgebra::Vector2<f64>;
