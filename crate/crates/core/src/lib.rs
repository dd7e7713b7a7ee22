//! Tile-packing tomography.
//!
//! Reconstruct packings of translated copies of a fixed tile from their
//! row/column start counts, and reduce 3-color tomography to that problem for
//! any tile that is not a bar, with machine checks of the reduction.

pub mod error;
pub mod packing;
pub mod reduction;
pub mod solver;
pub mod tile;
pub mod verify;

pub use error::{Error, Result};
pub use packing::{GridDims, Packing, PackingCheck, ProjectionPair};
pub use reduction::{BlockGadget, CaseTag, ReductionCertificate};
pub use solver::{
    Color, ColorMatrix, ColorVectors, Mode, SearchLimits, SolveResult, Status, ThreeColorInstance, TptpInstance,
};
pub use tile::{Cell, ConflictProfile, Tile, Transform, Vector2};
pub use verify::VerificationReport;
