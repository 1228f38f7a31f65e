//! Grayscale-grid encoding of 3D cubical complexes, critical-vertex
//! detection and repair into well-composed polyhedral complexes, with
//! GF(2) homology checks and mesh export.
//!
//! The pipeline, front to back:
//!
//! 1. [`image_io`] parses a binary image (a finite set of voxel centers).
//! 2. [`ecm_grid`] encodes its cubical complex as a grid of cell colors
//!    (one lattice point per cell; the color is the cell dimension) and
//!    answers face/coface queries by structuring-element matching.
//! 3. [`criticality`] finds the vertices where the boundary surface is
//!    not locally a disk, via a 256-entry table over 2x2x2 occupancy
//!    patterns.
//! 4. [`repair`] recolors the grid around every critical vertex, yielding
//!    the grid of a well-composed polyhedral complex.
//! 5. [`complex`] builds both complexes explicitly, checks the manifold
//!    conditions, and derives the structuring elements of the repaired
//!    grid.
//! 6. [`homology`] computes Betti numbers over GF(2) to certify that the
//!    repair preserved topology.
//! 7. [`mesh_export`] triangulates boundary surfaces into OBJ meshes.
//!
//! With the default `parallel` feature the detection, repair and
//! verification passes distribute over a rayon thread pool; without it
//! everything runs sequentially with identical outputs.

pub mod complex;
pub mod criticality;
pub mod ecm_grid;
pub mod error;
pub mod homology;
pub mod image_io;
pub mod mesh_export;
pub mod point;
pub mod repair;
mod textio;

pub use ecm_grid::{build_q_grid, GrayscaleGrid, StructuringElement};
pub use image_io::BinaryImage;
pub use point::Point3;
