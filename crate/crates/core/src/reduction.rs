//! Reduction from 3-color tomography to tile-packing tomography for a fixed
//! non-bar tile.
//!
//! The tile is first brought into a normalized orientation in which
//! `(-p, q)` is a maximal conflicting vector and `a <= b`. One of four block
//! gadgets is then chosen: three packings `D^R`, `D^G`, `D^B` of a `k x l`
//! block. A 3-color instance on an `m x n` matrix becomes a packing instance
//! on an `mk x nl` grid whose projections are the color counts combined with
//! the block projections. All gadget arithmetic happens in the normalized
//! frame; instances and packings handed to callers live in the frame of the
//! caller's tile.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::{projections, GridDims, Packing, ProjectionPair};
use crate::solver::{Color, ColorMatrix, ColorVectors, ThreeColorInstance, TptpInstance};
use crate::tile::{compute_ab, select_max_conflict, Cell, Tile, Transform, Vector2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    /// `a = 1`, `b = 1`
    Case1,
    /// `a = 1`, `b >= 2`
    Case2,
    /// `a = b = 2` and `(p, q)` conflicting
    Case3,
    /// everything else
    Case4,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::Case3 => "case3",
            CaseTag::Case4 => "case4",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub case: CaseTag,
    pub p: i64,
    pub q: i64,
    pub a: i64,
    pub b: i64,
    pub transform: Transform,
    pub normalized: Tile,
}

/// Normalizes the orientation of a non-bar tile and determines its case.
pub fn classify(tile: &Tile) -> Result<Classification> {
    let mc = select_max_conflict(tile)?;
    let mut transform = mc.transform;
    let (mut p, mut q) = (mc.p, mc.q);
    let (mut a, mut b) = compute_ab(&tile.apply_transform(transform), p, q);
    if a > b {
        transform.transpose = true;
        std::mem::swap(&mut p, &mut q);
        std::mem::swap(&mut a, &mut b);
    }
    let normalized = tile.apply_transform(transform);
    if !normalized.is_conflicting(Vector2::new(-p, q)) || compute_ab(&normalized, p, q) != (a, b) {
        return Err(Error::InternalInconsistency(format!(
            "normalization of {tile:?} by {transform} lost (-p, q) = ({}, {q})",
            -p
        )));
    }
    let case = match (a, b) {
        (1, 1) => CaseTag::Case1,
        (1, _) => CaseTag::Case2,
        (2, 2) if normalized.is_conflicting(Vector2::new(p, q)) => CaseTag::Case3,
        _ => CaseTag::Case4,
    };
    Ok(Classification {
        case,
        p,
        q,
        a,
        b,
        transform,
        normalized,
    })
}

/// Three block packings and the block size they fit in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGadget {
    pub k: usize,
    pub l: usize,
    /// Position sets indexed by [`Color::index`].
    pub packings: [Vec<Cell>; 3],
    pub row_proj: [Vec<u64>; 3],
    pub col_proj: [Vec<u64>; 3],
}

impl BlockGadget {
    pub fn packing(&self, c: Color) -> &[Cell] {
        &self.packings[c.index()]
    }

    pub fn rbar(&self, c: Color) -> &[u64] {
        &self.row_proj[c.index()]
    }

    pub fn sbar(&self, c: Color) -> &[u64] {
        &self.col_proj[c.index()]
    }

    pub fn block_dims(&self) -> GridDims {
        GridDims { m: self.k, n: self.l }
    }

    /// The color whose block projections equal `sig`, if any.
    pub fn color_of(&self, sig: &ProjectionPair) -> Option<Color> {
        Color::ALL
            .into_iter()
            .find(|&c| self.rbar(c) == sig.r.as_slice() && self.sbar(c) == sig.s.as_slice())
    }

    /// Builds a gadget from explicit position sets on the smallest block that
    /// contains them.
    pub fn from_packings(tile: &Tile, packings: [Vec<Cell>; 3]) -> Result<BlockGadget> {
        let all = packings.iter().flatten();
        let max_row = all.clone().map(|c| c.row).max().unwrap_or(0);
        let max_col = all.map(|c| c.col).max().unwrap_or(0);
        let k = tile.height() + max_row as usize;
        let l = tile.width() + max_col as usize;
        let dims = GridDims { m: k, n: l };
        let mut packings = packings;
        for (c, d) in Color::ALL.iter().zip(packings.iter_mut()) {
            d.sort();
            let check = crate::packing::validate_packing(tile, dims, d);
            if !check.is_ok() {
                return Err(Error::InternalInconsistency(format!(
                    "gadget packing D^{} is invalid on {k}x{l}: {check:?}",
                    c.as_char()
                )));
            }
        }
        let proj = packings.clone().map(|d| projections(dims, &d));
        Ok(BlockGadget {
            k,
            l,
            row_proj: proj.clone().map(|p| p.r),
            col_proj: proj.map(|p| p.s),
            packings,
        })
    }
}

/// The case's three block packings, for the normalized tile.
pub fn build_gadget(normalized: &Tile, case: CaseTag, p: i64, q: i64, _a: i64, b: i64) -> Result<BlockGadget> {
    let c = |i: i64, j: i64| Cell::new(i, j);
    let packings = match case {
        CaseTag::Case1 => [
            vec![c(p, 0), c(p, q)],
            vec![c(0, q), c(p, q)],
            vec![c(p, q)],
        ],
        CaseTag::Case2 => [
            vec![c(2 * p, 0), c(2 * p, b * q), c(p, 0)],
            vec![c(2 * p, 0), c(2 * p, b * q), c(0, q)],
            vec![c(2 * p, 0), c(2 * p, b * q)],
        ],
        CaseTag::Case3 => [
            vec![c(0, 2 * q), c(p, 0), c(2 * p, 2 * q)],
            vec![c(0, q), c(2 * p, 0), c(2 * p, 2 * q)],
            vec![c(0, 0), c(0, 2 * q), c(2 * p, 0), c(2 * p, 2 * q)],
        ],
        CaseTag::Case4 => [
            vec![c(p, 0), c(p, b * q)],
            vec![c(0, q), c(p, b * q)],
            vec![c(p, b * q)],
        ],
    };
    BlockGadget::from_packings(normalized, packings)
}

/// Everything needed to move solutions between a 3-color instance and its
/// packing image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CertificateJson", into = "CertificateJson")]
pub struct ReductionCertificate {
    pub tile: Tile,
    pub transform: Transform,
    pub normalized: Tile,
    pub p: i64,
    pub q: i64,
    pub a: i64,
    pub b: i64,
    pub case: CaseTag,
    pub gadget: BlockGadget,
    /// Source matrix size.
    pub m: usize,
    pub n: usize,
    /// Grid of the emitted instance, in the caller's frame.
    pub target: GridDims,
    /// Set when the source failed its feasibility preconditions and the
    /// fixed infeasible instance was emitted instead.
    pub infeasible_source: Option<String>,
}

/// Row color counts must sum to `n` and column color counts to `m`.
pub const SUM_CONVENTION: &str = "rows: sum_c r^c_x = n; columns: sum_c s^c_y = m";

#[derive(Serialize, Deserialize)]
struct GadgetJson {
    #[serde(rename = "R")]
    red: Vec<Cell>,
    #[serde(rename = "G")]
    green: Vec<Cell>,
    #[serde(rename = "B")]
    blue: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    tile: Tile,
    transform: Transform,
    p: i64,
    q: i64,
    a: i64,
    b: i64,
    case: CaseTag,
    k: usize,
    l: usize,
    gadget: GadgetJson,
    m: usize,
    n: usize,
    #[serde(default)]
    target_m: Option<usize>,
    #[serde(default)]
    target_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    infeasible_source: Option<String>,
    #[serde(default)]
    sum_convention: Option<String>,
}

impl From<ReductionCertificate> for CertificateJson {
    fn from(c: ReductionCertificate) -> Self {
        let [red, green, blue] = c.gadget.packings;
        CertificateJson {
            tile: c.tile,
            transform: c.transform,
            p: c.p,
            q: c.q,
            a: c.a,
            b: c.b,
            case: c.case,
            k: c.gadget.k,
            l: c.gadget.l,
            gadget: GadgetJson { red, green, blue },
            m: c.m,
            n: c.n,
            target_m: Some(c.target.m),
            target_n: Some(c.target.n),
            infeasible_source: c.infeasible_source,
            sum_convention: Some(SUM_CONVENTION.to_string()),
        }
    }
}

impl TryFrom<CertificateJson> for ReductionCertificate {
    type Error = Error;
    fn try_from(j: CertificateJson) -> Result<Self> {
        let normalized = j.tile.apply_transform(j.transform);
        let gadget = BlockGadget::from_packings(&normalized, [j.gadget.red, j.gadget.green, j.gadget.blue])?;
        if (gadget.k, gadget.l) != (j.k, j.l) {
            return Err(Error::MalformedInstance(format!(
                "certificate block {}x{} does not match its packings ({}x{})",
                j.k, j.l, gadget.k, gadget.l
            )));
        }
        let cert = ReductionCertificate {
            target: match (j.target_m, j.target_n) {
                (Some(m), Some(n)) => GridDims { m, n },
                _ => default_target(&j.tile, j.transform, j.m, j.n, &gadget, j.infeasible_source.is_some()),
            },
            tile: j.tile,
            transform: j.transform,
            normalized,
            p: j.p,
            q: j.q,
            a: j.a,
            b: j.b,
            case: j.case,
            gadget,
            m: j.m,
            n: j.n,
            infeasible_source: j.infeasible_source,
        };
        Ok(cert)
    }
}

fn default_target(tile: &Tile, tr: Transform, m: usize, n: usize, g: &BlockGadget, infeasible: bool) -> GridDims {
    if infeasible {
        return GridDims {
            m: tile.height(),
            n: tile.width(),
        };
    }
    let dims = GridDims { m: m * g.k, n: n * g.l };
    if tr.transpose {
        dims.transposed()
    } else {
        dims
    }
}

impl ReductionCertificate {
    /// Grid of the instance in the normalized frame, `mk x nl`.
    pub fn normalized_dims(&self) -> GridDims {
        GridDims {
            m: self.m * self.gadget.k,
            n: self.n * self.gadget.l,
        }
    }

    fn require_feasible_branch(&self) -> Result<()> {
        match &self.infeasible_source {
            Some(reason) => Err(Error::DimensionMismatch(format!(
                "reduction emitted the fixed infeasible instance ({reason}); no block structure"
            ))),
            None => Ok(()),
        }
    }

    /// Maps a packing of the caller's tile to the normalized frame and
    /// returns every block's local projections, row-major by block.
    pub fn block_signatures(&self, packing: &Packing) -> Result<Vec<ProjectionPair>> {
        self.require_feasible_branch()?;
        if packing.dims != self.target {
            return Err(Error::DimensionMismatch(format!(
                "packing grid {}x{} but reduced grid is {}x{}",
                packing.dims.m, packing.dims.n, self.target.m, self.target.n
            )));
        }
        let norm = packing.frame_map(self.transform, &self.tile);
        let (k, l) = (self.gadget.k, self.gadget.l);
        let mut local = vec![Vec::new(); self.m * self.n];
        for pos in norm.positions() {
            let (i, j) = (pos.row as usize, pos.col as usize);
            local[(i / k) * self.n + j / l].push(Cell::new((i % k) as i64, (j % l) as i64));
        }
        Ok(local
            .iter()
            .map(|d| projections(self.gadget.block_dims(), d))
            .collect())
    }
}

/// The fixed unsatisfiable instance: one start in row 0 and none in any
/// column, on the tile's own bounding box.
pub fn canonical_infeasible(tile: &Tile) -> TptpInstance {
    let dims = GridDims {
        m: tile.height(),
        n: tile.width(),
    };
    let mut r = vec![0; dims.m];
    r[0] = 1;
    TptpInstance {
        tile: tile.clone(),
        dims,
        target: ProjectionPair {
            r,
            s: vec![0; dims.n],
        },
    }
}

/// Classifies the tile and builds its gadget; the source size is left at 0x0.
pub fn certificate_for_tile(tile: &Tile) -> Result<ReductionCertificate> {
    let cls = classify(tile)?;
    let gadget = build_gadget(&cls.normalized, cls.case, cls.p, cls.q, cls.a, cls.b)?;
    Ok(ReductionCertificate {
        tile: tile.clone(),
        transform: cls.transform,
        normalized: cls.normalized,
        p: cls.p,
        q: cls.q,
        a: cls.a,
        b: cls.b,
        case: cls.case,
        gadget,
        m: 0,
        n: 0,
        target: GridDims { m: 0, n: 0 },
        infeasible_source: None,
    })
}

/// Block-wise combination of color counts and block projections.
pub fn synthesize(rows: &ColorVectors, cols: &ColorVectors, gadget: &BlockGadget) -> ProjectionPair {
    let combine = |counts: &ColorVectors, bar: &[Vec<u64>; 3], len: usize| {
        let blocks = counts.red.len();
        let mut out = vec![0u64; blocks * len];
        for x in 0..blocks {
            for i in 0..len {
                out[x * len + i] = Color::ALL
                    .iter()
                    .map(|&c| counts.get(c)[x] * bar[c.index()][i])
                    .sum();
            }
        }
        out
    };
    ProjectionPair {
        r: combine(rows, &gadget.row_proj, gadget.k),
        s: combine(cols, &gadget.col_proj, gadget.l),
    }
}

/// Maps a 3-color instance to a packing instance for `tile`.
pub fn reduce(inst: &ThreeColorInstance, tile: &Tile) -> Result<(TptpInstance, ReductionCertificate)> {
    let mut cert = certificate_for_tile(tile)?;
    cert.m = inst.m;
    cert.n = inst.n;
    if let Some(reason) = inst.precondition_failure() {
        let out = canonical_infeasible(tile);
        cert.target = out.dims;
        cert.infeasible_source = Some(reason);
        return Ok((out, cert));
    }
    let norm_target = synthesize(&inst.rows, &inst.cols, &cert.gadget);
    let target = norm_target.frame_map(cert.transform.inverse(), &cert.normalized);
    let dims = GridDims::new(target.r.len(), target.s.len())?;
    cert.target = dims;
    Ok((TptpInstance::new(tile.clone(), dims, target)?, cert))
}

/// Replaces every cell of `mtx` by its color's block packing.
pub fn lift_solution(mtx: &ColorMatrix, cert: &ReductionCertificate) -> Result<Packing> {
    cert.require_feasible_branch()?;
    if (mtx.m(), mtx.n()) != (cert.m, cert.n) {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but certificate source is {}x{}",
            mtx.m(),
            mtx.n(),
            cert.m,
            cert.n
        )));
    }
    let (k, l) = (cert.gadget.k as i64, cert.gadget.l as i64);
    let mut positions = Vec::new();
    for x in 0..cert.m {
        for y in 0..cert.n {
            let offset = Vector2::new(x as i64 * k, y as i64 * l);
            positions.extend(cert.gadget.packing(mtx.get(x, y)).iter().map(|c| c.offset(offset)));
        }
    }
    let norm = Packing::new(cert.normalized_dims(), positions);
    Ok(norm.frame_map(cert.transform.inverse(), &cert.normalized))
}

/// Reads each block's projections and names the gadget color they match.
pub fn project_solution(packing: &Packing, cert: &ReductionCertificate) -> Result<ColorMatrix> {
    let sigs = cert.block_signatures(packing)?;
    let mut rows = vec![Vec::with_capacity(cert.n); cert.m];
    for (idx, sig) in sigs.into_iter().enumerate() {
        let (x, y) = (idx / cert.n, idx % cert.n);
        let color = cert.gadget.color_of(&sig).ok_or(Error::UnrecognizedBlock {
            x,
            y,
            r: sig.r,
            s: sig.s,
        })?;
        rows[x].push(color);
    }
    ColorMatrix::new(rows)
}

/// Moving packings and projections between the frames of a tile and of its
/// transformed version.
///
/// `x.frame_map(tr, tile)` takes an object described for `tile` to the
/// matching object for `tile.apply_transform(tr)` on the correspondingly
/// transformed grid. Under a vertical flip a start row `i` becomes
/// `m - h - i`; under a horizontal flip a start column `j` becomes
/// `n - w - j`; a transpose swaps coordinates (and `r` with `s`).
pub trait FrameMap: Sized {
    fn frame_map(&self, tr: Transform, tile: &Tile) -> Self;
}

impl FrameMap for Packing {
    fn frame_map(&self, tr: Transform, tile: &Tile) -> Packing {
        let (h, w) = (tile.height() as i64, tile.width() as i64);
        let (m, n) = (self.dims.m as i64, self.dims.n as i64);
        let mut dims = self.dims;
        let positions = self
            .positions()
            .iter()
            .map(|&c| {
                let mut out = c;
                if tr.vflip {
                    out.row = m - h - out.row;
                }
                if tr.hflip {
                    out.col = n - w - out.col;
                }
                if tr.transpose {
                    out = Cell::new(out.col, out.row);
                }
                out
            })
            .collect::<Vec<_>>();
        if tr.transpose {
            dims = dims.transposed();
        }
        Packing::new(dims, positions)
    }
}

/// Reverses the legal start range `[0, len - extent]` and leaves the tail,
/// where no copy can start, in place. This keeps the map a bijection on all
/// vectors, not only on those arising from packings.
fn reflect_starts(v: &[u64], extent: usize) -> Vec<u64> {
    let mut out = v.to_vec();
    if v.len() >= extent {
        let last = v.len() - extent;
        for i in 0..=last {
            out[last - i] = v[i];
        }
    }
    out
}

impl FrameMap for ProjectionPair {
    fn frame_map(&self, tr: Transform, tile: &Tile) -> ProjectionPair {
        let mut r = self.r.clone();
        let mut s = self.s.clone();
        if tr.vflip {
            r = reflect_starts(&r, tile.height());
        }
        if tr.hflip {
            s = reflect_starts(&s, tile.width());
        }
        if tr.transpose {
            std::mem::swap(&mut r, &mut s);
        }
        ProjectionPair { r, s }
    }
}
