//! Tiles, translation vectors, conflict profiles and orientation transforms.
//!
//! A tile is a finite 4-connected set of cells kept in canonical position
//! (minimum row and minimum column both zero). Two copies of a tile placed at
//! positions `u` and `v` overlap exactly when `u - v` is a *conflicting*
//! vector, so almost every question about packings reduces to conflict
//! lookups against the tile's [`ConflictProfile`].

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid cell, or a translation position when used as a packing entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(i64, i64)", into = "(i64, i64)")]
pub struct Cell {
    pub row: i64,
    pub col: i64,
}

impl Cell {
    pub const fn new(row: i64, col: i64) -> Self {
        Cell { row, col }
    }

    pub fn offset(self, v: Vector2) -> Cell {
        Cell::new(self.row + v.di, self.col + v.dj)
    }

    /// Displacement from `other` to `self`.
    pub fn diff(self, other: Cell) -> Vector2 {
        Vector2::new(self.row - other.row, self.col - other.col)
    }
}

impl From<(i64, i64)> for Cell {
    fn from((row, col): (i64, i64)) -> Self {
        Cell { row, col }
    }
}

impl From<Cell> for (i64, i64) {
    fn from(c: Cell) -> Self {
        (c.row, c.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(i64, i64)", into = "(i64, i64)")]
pub struct Vector2 {
    pub di: i64,
    pub dj: i64,
}

impl Vector2 {
    pub const fn new(di: i64, dj: i64) -> Self {
        Vector2 { di, dj }
    }

    pub fn neg(self) -> Self {
        Vector2::new(-self.di, -self.dj)
    }

    pub fn l1(self) -> i64 {
        self.di.abs() + self.dj.abs()
    }
}

impl From<(i64, i64)> for Vector2 {
    fn from((di, dj): (i64, i64)) -> Self {
        Vector2 { di, dj }
    }
}

impl From<Vector2> for (i64, i64) {
    fn from(v: Vector2) -> Self {
        (v.di, v.dj)
    }
}

/// A connected tile in canonical position.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "TileJson", into = "TileJson")]
pub struct Tile {
    // sorted row-major
    cells: Vec<Cell>,
    height: usize,
    width: usize,
    mask: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct TileJson {
    cells: Vec<Cell>,
}

impl TryFrom<TileJson> for Tile {
    type Error = Error;
    fn try_from(j: TileJson) -> Result<Tile> {
        Tile::new(j.cells)
    }
}

impl From<Tile> for TileJson {
    fn from(t: Tile) -> Self {
        TileJson { cells: t.cells }
    }
}

impl fmt::Debug for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tile{:?}", self.cells.iter().map(|c| (c.row, c.col)).collect::<Vec<_>>())
    }
}

impl Tile {
    /// Translates `cells` into canonical position and checks 4-connectivity.
    /// Duplicate cells are rejected.
    pub fn new(cells: impl IntoIterator<Item = Cell>) -> Result<Tile> {
        let raw: Vec<Cell> = cells.into_iter().collect();
        let mut set = BTreeSet::new();
        for &c in &raw {
            if !set.insert(c) {
                return Err(Error::DuplicateCell(c));
            }
        }
        canonicalize(&set)
    }

    /// Convenience constructor from `(row, col)` pairs.
    pub fn from_pairs(pairs: &[(i64, i64)]) -> Result<Tile> {
        Tile::new(pairs.iter().map(|&p| Cell::from(p)))
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn contains(&self, c: Cell) -> bool {
        if c.row < 0 || c.col < 0 {
            return false;
        }
        let (r, k) = (c.row as usize, c.col as usize);
        r < self.height && k < self.width && self.mask[r * self.width + k]
    }

    pub fn is_bar(&self) -> bool {
        self.width == 1 || self.height == 1
    }

    pub fn translate(&self, v: Vector2) -> Vec<Cell> {
        self.cells.iter().map(|&c| c.offset(v)).collect()
    }

    /// Whether the tile and its translate by `v` share a cell.
    pub fn is_conflicting(&self, v: Vector2) -> bool {
        if v.di.unsigned_abs() as usize >= self.height || v.dj.unsigned_abs() as usize >= self.width {
            return false;
        }
        self.cells.iter().any(|&c| self.contains(c.offset(v)))
    }

    pub fn conflict_profile(&self) -> ConflictProfile {
        ConflictProfile::of(self)
    }

    pub fn apply_transform(&self, tr: Transform) -> Tile {
        let cells: BTreeSet<Cell> = self
            .cells
            .iter()
            .map(|&c| tr.apply_cell(c, self.height, self.width))
            .collect();
        canonicalize(&cells).expect("grid symmetries preserve connectivity")
    }

    /// Multi-line picture of the tile, `#` for cells.
    pub fn picture(&self) -> String {
        let mut out = String::new();
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(if self.mask[r * self.width + c] { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// Translates a cell set so its minimum row and column are zero, and checks
/// that it is nonempty and 4-connected.
pub fn canonicalize(cells: &BTreeSet<Cell>) -> Result<Tile> {
    let first = *cells.iter().next().ok_or(Error::EmptyTile)?;
    let min_r = cells.iter().map(|c| c.row).min().unwrap();
    let min_c = cells.iter().map(|c| c.col).min().unwrap();
    let max_r = cells.iter().map(|c| c.row).max().unwrap();
    let max_c = cells.iter().map(|c| c.col).max().unwrap();

    // connectivity on the input coordinates
    let mut seen = BTreeSet::from([first]);
    let mut queue = VecDeque::from([first]);
    while let Some(c) = queue.pop_front() {
        for v in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let nb = c.offset(Vector2::from(v));
            if cells.contains(&nb) && seen.insert(nb) {
                queue.push_back(nb);
            }
        }
    }
    if seen.len() != cells.len() {
        let unreached = *cells.iter().find(|c| !seen.contains(c)).unwrap();
        return Err(Error::DisconnectedTile {
            reached: first,
            unreached,
        });
    }

    let height = (max_r - min_r + 1) as usize;
    let width = (max_c - min_c + 1) as usize;
    let mut mask = vec![false; height * width];
    let shifted: Vec<Cell> = cells
        .iter()
        .map(|c| Cell::new(c.row - min_r, c.col - min_c))
        .collect();
    for c in &shifted {
        mask[c.row as usize * width + c.col as usize] = true;
    }
    Ok(Tile {
        cells: shifted,
        height,
        width,
        mask,
    })
}

/// All conflicting vectors of a tile inside the window `|di| < h`, `|dj| < w`.
/// Anything outside the window is non-conflicting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictProfile {
    height: usize,
    width: usize,
    mask: Vec<bool>,
}

impl ConflictProfile {
    pub fn of(t: &Tile) -> Self {
        let (h, w) = (t.height as i64, t.width as i64);
        let span = (2 * w - 1) as usize;
        let mut mask = vec![false; (2 * h - 1) as usize * span];
        for a in &t.cells {
            for b in &t.cells {
                let v = a.diff(*b);
                mask[(v.di + h - 1) as usize * span + (v.dj + w - 1) as usize] = true;
            }
        }
        ConflictProfile {
            height: t.height,
            width: t.width,
            mask,
        }
    }

    pub fn contains(&self, v: Vector2) -> bool {
        let (h, w) = (self.height as i64, self.width as i64);
        if v.di.abs() >= h || v.dj.abs() >= w {
            return false;
        }
        let span = (2 * w - 1) as usize;
        self.mask[(v.di + h - 1) as usize * span + (v.dj + w - 1) as usize]
    }

    /// Conflicting vectors in lexicographic order.
    pub fn vectors(&self) -> Vec<Vector2> {
        let (h, w) = (self.height as i64, self.width as i64);
        let mut out = Vec::new();
        for di in -(h - 1)..h {
            for dj in -(w - 1)..w {
                let v = Vector2::new(di, dj);
                if self.contains(v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A grid symmetry: optional vertical flip, then optional horizontal flip,
/// then optional transpose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transform {
    pub vflip: bool,
    pub hflip: bool,
    pub transpose: bool,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        vflip: false,
        hflip: false,
        transpose: false,
    };

    pub const fn new(vflip: bool, hflip: bool, transpose: bool) -> Self {
        Transform {
            vflip,
            hflip,
            transpose,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Maps a cell of an `h x w` box, before re-canonicalization.
    pub fn apply_cell(&self, c: Cell, h: usize, w: usize) -> Cell {
        let mut out = c;
        if self.vflip {
            out.row = h as i64 - 1 - out.row;
        }
        if self.hflip {
            out.col = w as i64 - 1 - out.col;
        }
        if self.transpose {
            out = Cell::new(out.col, out.row);
        }
        out
    }

    /// How a displacement between two copies transforms.
    pub fn apply_vector(&self, v: Vector2) -> Vector2 {
        let mut out = v;
        if self.vflip {
            out.di = -out.di;
        }
        if self.hflip {
            out.dj = -out.dj;
        }
        if self.transpose {
            out = Vector2::new(out.dj, out.di);
        }
        out
    }

    /// Transpose-then-hflip equals vflip-then-transpose, so inverting a
    /// transform with a transpose swaps the two flip flags.
    pub fn inverse(&self) -> Transform {
        if self.transpose {
            Transform::new(self.hflip, self.vflip, true)
        } else {
            *self
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.vflip {
            parts.push("vflip");
        }
        if self.hflip {
            parts.push("hflip");
        }
        if self.transpose {
            parts.push("transpose");
        }
        if parts.is_empty() {
            f.write_str("identity")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

/// The maximal conflicting vector `(-p, q)` with nonzero coordinates, and the
/// flip that brings the tile into the orientation where it has that form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxConflict {
    pub p: i64,
    pub q: i64,
    pub transform: Transform,
}

/// Picks a conflicting vector of maximal L1 norm among those with both
/// coordinates nonzero.
///
/// If one of the maximal vectors already has the form `(-p, q)` with
/// `p, q > 0`, the lexicographically smallest such vector is used and the
/// transform is the identity. Otherwise every maximal vector has same-signed
/// coordinates; the lexicographically smallest one with positive row
/// component is used and the tile is flipped vertically.
pub fn select_max_conflict(t: &Tile) -> Result<MaxConflict> {
    if t.is_bar() {
        return Err(Error::BarTile);
    }
    let mixed: Vec<Vector2> = t
        .conflict_profile()
        .vectors()
        .into_iter()
        .filter(|v| v.di != 0 && v.dj != 0)
        .collect();
    let best = mixed
        .iter()
        .map(|v| v.l1())
        .max()
        .ok_or_else(|| Error::InternalInconsistency("non-bar tile without diagonal conflict".into()))?;
    let top: Vec<Vector2> = mixed.into_iter().filter(|v| v.l1() == best).collect();

    if let Some(v) = top.iter().find(|v| v.di < 0 && v.dj > 0) {
        return Ok(MaxConflict {
            p: -v.di,
            q: v.dj,
            transform: Transform::IDENTITY,
        });
    }
    let v = top
        .iter()
        .find(|v| v.di > 0)
        .ok_or_else(|| Error::InternalInconsistency("conflict profile not symmetric".into()))?;
    let transform = Transform::new(v.di > 0, v.dj < 0, false);
    let w = transform.apply_vector(*v);
    Ok(MaxConflict {
        p: -w.di,
        q: w.dj,
        transform,
    })
}

/// Smallest positive `a` with `(a*p, 0)` non-conflicting and smallest positive
/// `b` with `(0, b*q)` non-conflicting.
pub fn compute_ab(t: &Tile, p: i64, q: i64) -> (i64, i64) {
    let mut a = 1;
    while t.is_conflicting(Vector2::new(a * p, 0)) {
        a += 1;
    }
    let mut b = 1;
    while t.is_conflicting(Vector2::new(0, b * q)) {
        b += 1;
    }
    (a, b)
}

/// Every distinct tile (up to translation) fitting in a `max_h x max_w` box.
/// Bars included; see [`catalog_non_bar`].
pub fn catalog(max_h: usize, max_w: usize) -> Vec<Tile> {
    let cells = max_h * max_w;
    assert!(cells < 31, "catalog box too large");
    let mut out = BTreeSet::new();
    for mask in 1u32..(1u32 << cells) {
        let set: BTreeSet<Cell> = (0..cells)
            .filter(|&b| mask >> b & 1 == 1)
            .map(|b| Cell::new((b / max_w) as i64, (b % max_w) as i64))
            .collect();
        if let Ok(t) = canonicalize(&set) {
            out.insert(t);
        }
    }
    out.into_iter().collect()
}

/// Non-bar tiles with bounding box at most `max_h x max_w`, sorted by size then cells.
pub fn catalog_non_bar(max_h: usize, max_w: usize) -> Vec<Tile> {
    let mut tiles: Vec<Tile> = catalog(max_h, max_w).into_iter().filter(|t| !t.is_bar()).collect();
    tiles.sort_by(|a, b| (a.len(), a.cells()).cmp(&(b.len(), b.cells())));
    tiles
}

/// Tiles used throughout the examples and tests.
pub mod shapes {
    use super::Tile;

    pub fn single_cell() -> Tile {
        Tile::from_pairs(&[(0, 0)]).unwrap()
    }

    pub fn square2() -> Tile {
        Tile::from_pairs(&[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap()
    }

    pub fn l_tromino() -> Tile {
        Tile::from_pairs(&[(0, 0), (1, 0), (1, 1)]).unwrap()
    }

    /// Vertical S-tetromino.
    pub fn s_tetromino() -> Tile {
        Tile::from_pairs(&[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap()
    }

    /// Six-cell staircase.
    pub fn s6_staircase() -> Tile {
        Tile::from_pairs(&[(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 2)]).unwrap()
    }

    /// Seven-cell tile with a known packing of a 9x10 grid.
    pub fn heptomino() -> Tile {
        Tile::from_pairs(&[(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]).unwrap()
    }
}
