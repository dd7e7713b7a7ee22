use thiserror::Error;

use crate::tile::Cell;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("tile has no cells")]
    EmptyTile,

    #[error("tile is not 4-connected: {reached:?} cannot reach {unreached:?}")]
    DisconnectedTile { reached: Cell, unreached: Cell },

    #[error("duplicate cell {0:?}")]
    DuplicateCell(Cell),

    #[error("tile is a bar (width or height 1)")]
    BarTile,

    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("block ({x}, {y}) has projections r={r:?} s={s:?} matching no color")]
    UnrecognizedBlock {
        x: usize,
        y: usize,
        r: Vec<u64>,
        s: Vec<u64>,
    },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
