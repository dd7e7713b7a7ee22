//! Packings of translated tile copies on an `m x n` grid and their
//! start-count projections.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tile::{Cell, ConflictProfile, Tile, Vector2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub m: usize,
    pub n: usize,
}

impl GridDims {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::MalformedInstance(format!("grid {m}x{n} must be at least 1x1")));
        }
        Ok(GridDims { m, n })
    }

    pub fn transposed(self) -> Self {
        GridDims { m: self.n, n: self.m }
    }

    /// Whether a copy of `tile` at `pos` lies inside the grid.
    pub fn fits(&self, tile: &Tile, pos: Cell) -> bool {
        pos.row >= 0
            && pos.col >= 0
            && pos.row as usize + tile.height() <= self.m
            && pos.col as usize + tile.width() <= self.n
    }
}

/// A set of translation positions on a grid, sorted row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "PackingJson", from = "PackingJson")]
pub struct Packing {
    pub dims: GridDims,
    positions: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct PackingJson {
    m: usize,
    n: usize,
    positions: Vec<Cell>,
}

impl From<PackingJson> for Packing {
    fn from(j: PackingJson) -> Self {
        Packing::new(GridDims { m: j.m, n: j.n }, j.positions)
    }
}

impl From<Packing> for PackingJson {
    fn from(p: Packing) -> Self {
        PackingJson {
            m: p.dims.m,
            n: p.dims.n,
            positions: p.positions,
        }
    }
}

impl Packing {
    /// Positions are sorted; duplicates are kept so validation can flag them.
    pub fn new(dims: GridDims, positions: impl IntoIterator<Item = Cell>) -> Self {
        let mut positions: Vec<Cell> = positions.into_iter().collect();
        positions.sort();
        Packing { dims, positions }
    }

    pub fn positions(&self) -> &[Cell] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn projections(&self) -> ProjectionPair {
        projections(self.dims, &self.positions)
    }

    pub fn validate(&self, tile: &Tile) -> PackingCheck {
        validate_packing(tile, self.dims, &self.positions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProjectionPair {
    pub r: Vec<u64>,
    pub s: Vec<u64>,
}

impl ProjectionPair {
    pub fn zeros(dims: GridDims) -> Self {
        ProjectionPair {
            r: vec![0; dims.m],
            s: vec![0; dims.n],
        }
    }

    pub fn dims(&self) -> Option<GridDims> {
        GridDims::new(self.r.len(), self.s.len()).ok()
    }

    pub fn row_total(&self) -> u64 {
        self.r.iter().sum()
    }

    pub fn col_total(&self) -> u64 {
        self.s.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PackingCheck {
    Ok,
    OutOfGrid { position: Cell },
    Overlap { first: Cell, second: Cell, difference: Vector2 },
}

impl PackingCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, PackingCheck::Ok)
    }
}

/// Checks containment of every copy, then pairwise disjointness. Overlap is
/// decided by conflict lookup: copies at `u` and `v` overlap iff `v - u` is
/// conflicting.
pub fn validate_packing(tile: &Tile, dims: GridDims, positions: &[Cell]) -> PackingCheck {
    if let Some(&position) = positions.iter().find(|&&p| !dims.fits(tile, p)) {
        return PackingCheck::OutOfGrid { position };
    }
    let profile = ConflictProfile::of(tile);
    for (idx, &u) in positions.iter().enumerate() {
        for &v in &positions[idx + 1..] {
            let difference = v.diff(u);
            if profile.contains(difference) {
                return PackingCheck::Overlap {
                    first: u,
                    second: v,
                    difference,
                };
            }
        }
    }
    PackingCheck::Ok
}

/// Start counts per row and per column. Positions outside the grid are ignored.
pub fn projections(dims: GridDims, positions: &[Cell]) -> ProjectionPair {
    let mut out = ProjectionPair::zeros(dims);
    for p in positions {
        if p.row >= 0 && p.col >= 0 && (p.row as usize) < dims.m && (p.col as usize) < dims.n {
            out.r[p.row as usize] += 1;
            out.s[p.col as usize] += 1;
        }
    }
    out
}

pub fn covered_cells(tile: &Tile, positions: &[Cell]) -> BTreeSet<Cell> {
    positions
        .iter()
        .flat_map(|&p| tile.translate(Vector2::new(p.row, p.col)))
        .collect()
}

fn label(idx: usize) -> char {
    (b'a' + (idx % 26) as u8) as char
}

/// ASCII picture of a packing. Copies are labelled `a..z` (cycling) in
/// row-major position order; each grid row is followed by its row projection
/// and a last line carries the column projection.
pub fn render(tile: &Tile, dims: GridDims, positions: &[Cell]) -> String {
    let mut sorted = positions.to_vec();
    sorted.sort();
    let mut grid = vec![vec!['.'; dims.n]; dims.m];
    for (idx, &p) in sorted.iter().enumerate() {
        for c in tile.translate(Vector2::new(p.row, p.col)) {
            if c.row >= 0 && c.col >= 0 && (c.row as usize) < dims.m && (c.col as usize) < dims.n {
                grid[c.row as usize][c.col as usize] = label(idx);
            }
        }
    }
    let proj = projections(dims, &sorted);
    let mut out = String::new();
    for (row, r) in grid.iter().zip(&proj.r) {
        let line: String = row.iter().collect();
        writeln!(out, "{line} {r}").unwrap();
    }
    if proj.s.iter().all(|&s| s < 10) {
        let line: String = proj.s.iter().map(|s| char::from(b'0' + *s as u8)).collect();
        writeln!(out, "{line}").unwrap();
    } else {
        let parts: Vec<String> = proj.s.iter().map(|s| s.to_string()).collect();
        writeln!(out, "{}", parts.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tile::shapes::*;

    pub(crate) fn heptomino_positions() -> Vec<Cell> {
        [(0, 3), (2, 0), (2, 7), (3, 5), (4, 3), (6, 0), (6, 7)]
            .into_iter()
            .map(Cell::from)
            .collect()
    }

    fn dims(m: usize, n: usize) -> GridDims {
        GridDims::new(m, n).unwrap()
    }

    #[test]
    fn heptomino_packing_is_valid() {
        assert_eq!(validate_packing(&heptomino(), dims(9, 10), &heptomino_positions()), PackingCheck::Ok);
    }

    #[test]
    fn overlap_reports_difference() {
        let got = validate_packing(&heptomino(), dims(9, 10), &[Cell::new(0, 3), Cell::new(1, 4)]);
        assert_eq!(
            got,
            PackingCheck::Overlap {
                first: Cell::new(0, 3),
                second: Cell::new(1, 4),
                difference: Vector2::new(1, 1)
            }
        );
    }

    #[test]
    fn out_of_grid() {
        let got = validate_packing(&heptomino(), dims(9, 10), &[Cell::new(7, 0)]);
        assert_eq!(got, PackingCheck::OutOfGrid { position: Cell::new(7, 0) });
    }

    #[test]
    fn projection_examples() {
        let p = projections(dims(3, 3), &[]);
        assert_eq!((p.r, p.s), (vec![0; 3], vec![0; 3]));

        let p = projections(dims(9, 10), &heptomino_positions());
        assert_eq!(p.r, vec![1, 0, 2, 1, 1, 0, 2, 0, 0]);
        assert_eq!(p.s, vec![2, 0, 0, 2, 0, 1, 0, 2, 0, 0]);

        let p = projections(dims(2, 4), &[Cell::new(0, 0), Cell::new(0, 2)]);
        assert_eq!((p.r, p.s), (vec![2, 0], vec![1, 0, 1, 0]));
    }

    #[test]
    fn covered_examples() {
        assert_eq!(
            covered_cells(&single_cell(), &[Cell::new(1, 1)]),
            BTreeSet::from([Cell::new(1, 1)])
        );
        assert_eq!(covered_cells(&square2(), &[Cell::new(0, 0)]).len(), 4);
        let got = covered_cells(&heptomino(), &[Cell::new(0, 3)]);
        let want: BTreeSet<Cell> = heptomino().translate(Vector2::new(0, 3)).into_iter().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn render_examples() {
        assert_eq!(render(&single_cell(), dims(2, 2), &[]), ".. 0\n.. 0\n00\n");
        assert_eq!(render(&single_cell(), dims(1, 3), &[Cell::new(0, 1)]), ".a. 1\n010\n");
    }

    #[test]
    fn render_matches_covered_cells() {
        let tile = heptomino();
        let positions = heptomino_positions();
        let text = render(&tile, dims(9, 10), &positions);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        for (idx, p) in positions.iter().enumerate() {
            let mine: BTreeSet<Cell> = lines[..9]
                .iter()
                .enumerate()
                .flat_map(|(r, l)| {
                    l.chars()
                        .take(10)
                        .enumerate()
                        .filter(move |&(_, ch)| ch == label(idx))
                        .map(move |(c, _)| Cell::new(r as i64, c as i64))
                })
                .collect();
            assert_eq!(mine, covered_cells(&tile, &[*p]));
        }
    }

    #[test]
    fn packing_json_sorted() {
        let p = Packing::new(dims(2, 4), [Cell::new(0, 2), Cell::new(0, 0)]);
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"m":2,"n":4,"positions":[[0,0],[0,2]]}"#);
        let back: Packing = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
