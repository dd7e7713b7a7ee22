//! Exact search for tile-packing and 3-color reconstruction problems, the
//! greedy single-cell (Ryser) construction, and the `xi` packing bound.
//!
//! Every search here is complete: pruning only ever discards branches that
//! provably contain no solution. Running out of budget is reported as
//! [`Status::LimitExceeded`], which is never conflated with infeasibility.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::{GridDims, Packing, ProjectionPair};
use crate::tile::{Cell, ConflictProfile, Tile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Decide,
    Find,
    Count,
    Enumerate,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "decide" => Ok(Mode::Decide),
            "find" => Ok(Mode::Find),
            "count" => Ok(Mode::Count),
            "enumerate" => Ok(Mode::Enumerate),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Feasible,
    Infeasible,
    LimitExceeded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::LimitExceeded => "limit-exceeded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    pub max_nodes: u64,
    pub max_solutions: u64,
    pub timeout: Option<Duration>,
    /// Worker threads for subtree splitting; 1 runs the plain serial search.
    pub jobs: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_nodes: 200_000_000,
            max_solutions: 1_000_000,
            timeout: None,
            jobs: 1,
        }
    }
}

impl SearchLimits {
    pub fn with_nodes(mut self, n: u64) -> Self {
        self.max_nodes = n;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult<W> {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<W>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solutions: Option<Vec<W>>,
    pub stats: SearchStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl<W> SolveResult<W> {
    fn rejected(mode: Mode, reason: impl Into<String>) -> Self {
        SolveResult {
            status: Status::Infeasible,
            witness: None,
            count: matches!(mode, Mode::Count | Mode::Enumerate).then_some(0),
            solutions: matches!(mode, Mode::Enumerate).then(Vec::new),
            stats: SearchStats::default(),
            reason: Some(reason.into()),
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

// ---------------------------------------------------------------------------
// Tile-packing tomography

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TptpJson", into = "TptpJson")]
pub struct TptpInstance {
    pub tile: Tile,
    pub dims: GridDims,
    pub target: ProjectionPair,
}

#[derive(Serialize, Deserialize)]
struct TptpJson {
    tile: Tile,
    m: usize,
    n: usize,
    r: Vec<u64>,
    s: Vec<u64>,
}

impl TryFrom<TptpJson> for TptpInstance {
    type Error = Error;
    fn try_from(j: TptpJson) -> Result<Self> {
        TptpInstance::new(j.tile, GridDims::new(j.m, j.n)?, ProjectionPair { r: j.r, s: j.s })
    }
}

impl From<TptpInstance> for TptpJson {
    fn from(i: TptpInstance) -> Self {
        TptpJson {
            tile: i.tile,
            m: i.dims.m,
            n: i.dims.n,
            r: i.target.r,
            s: i.target.s,
        }
    }
}

impl TptpInstance {
    pub fn new(tile: Tile, dims: GridDims, target: ProjectionPair) -> Result<Self> {
        if target.r.len() != dims.m || target.s.len() != dims.n {
            return Err(Error::MalformedInstance(format!(
                "projection lengths {}x{} do not match grid {}x{}",
                target.r.len(),
                target.s.len(),
                dims.m,
                dims.n
            )));
        }
        Ok(TptpInstance { tile, dims, target })
    }
}

/// A placement candidate: a legal start position with nonzero row and column
/// budget, plus the flat grid indices it covers.
struct Candidate {
    row: usize,
    col: usize,
    cells: Vec<usize>,
}

struct TptpProblem {
    cands: Vec<Candidate>,
}

#[derive(Clone)]
struct TptpState {
    occ: Vec<u64>,
    rrem: Vec<u64>,
    srem: Vec<u64>,
    remaining: u64,
    chosen: Vec<usize>,
}

impl TptpState {
    fn free(&self, c: &Candidate) -> bool {
        c.cells.iter().all(|&x| self.occ[x / 64] >> (x % 64) & 1 == 0)
    }

    fn toggle(&mut self, c: &Candidate) {
        for &x in &c.cells {
            self.occ[x / 64] ^= 1 << (x % 64);
        }
    }
}

impl TptpProblem {
    /// Upper bounds on what rows and columns can still receive, from free
    /// candidates at index `k` or later; fails if any budget exceeds it.
    fn capacity_ok(&self, k: usize, st: &TptpState, row_cap: &mut [u64], col_cap: &mut [u64]) -> bool {
        row_cap.iter_mut().for_each(|x| *x = 0);
        col_cap.iter_mut().for_each(|x| *x = 0);
        for c in &self.cands[k..] {
            if st.rrem[c.row] > 0 && st.srem[c.col] > 0 && st.free(c) {
                row_cap[c.row] += 1;
                col_cap[c.col] += 1;
            }
        }
        st.rrem.iter().zip(row_cap.iter()).all(|(need, cap)| need <= cap)
            && st.srem.iter().zip(col_cap.iter()).all(|(need, cap)| need <= cap)
    }

    fn positions(&self, chosen: &[usize]) -> Vec<Cell> {
        chosen
            .iter()
            .map(|&k| Cell::new(self.cands[k].row as i64, self.cands[k].col as i64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Halt {
    Limit,
    Found,
}

struct Budget<'a> {
    limits: SearchLimits,
    nodes: &'a AtomicU64,
    deadline: Option<Instant>,
    limit_hit: &'a AtomicBool,
}

impl Budget<'_> {
    fn tick(&self) -> std::result::Result<(), Halt> {
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if self.limit_hit.load(Ordering::Relaxed) {
            return Err(Halt::Limit);
        }
        let over_nodes = n > self.limits.max_nodes;
        let over_time = n % 4096 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d);
        if over_nodes || over_time {
            self.limit_hit.store(true, Ordering::Relaxed);
            return Err(Halt::Limit);
        }
        Ok(())
    }
}

/// Per-subtree search outcome.
struct Found<T> {
    count: u64,
    solutions: Vec<T>,
}

impl<T> Default for Found<T> {
    fn default() -> Self {
        Found {
            count: 0,
            solutions: Vec::new(),
        }
    }
}

struct Worker<'a> {
    problem: &'a TptpProblem,
    mode: Mode,
    budget: &'a Budget<'a>,
    row_cap: Vec<u64>,
    col_cap: Vec<u64>,
    found: Found<Vec<Cell>>,
    // for parallel find: give up once a lower-indexed subtree has a witness
    my_index: usize,
    best_index: Option<&'a AtomicUsize>,
}

impl<'a> Worker<'a> {
    fn new(
        problem: &'a TptpProblem,
        mode: Mode,
        budget: &'a Budget<'a>,
        dims: GridDims,
        my_index: usize,
        best_index: Option<&'a AtomicUsize>,
    ) -> Self {
        Worker {
            problem,
            mode,
            budget,
            row_cap: vec![0; dims.m],
            col_cap: vec![0; dims.n],
            found: Found::default(),
            my_index,
            best_index,
        }
    }

    fn record(&mut self, st: &TptpState) -> std::result::Result<(), Halt> {
        self.found.count += 1;
        match self.mode {
            Mode::Decide | Mode::Find => {
                self.found.solutions.push(self.problem.positions(&st.chosen));
                Err(Halt::Found)
            }
            Mode::Count => Ok(()),
            Mode::Enumerate => {
                self.found.solutions.push(self.problem.positions(&st.chosen));
                if self.found.solutions.len() as u64 > self.budget.limits.max_solutions {
                    self.budget.limit_hit.store(true, Ordering::Relaxed);
                    Err(Halt::Limit)
                } else {
                    Ok(())
                }
            }
        }
    }

    fn dfs(&mut self, k: usize, st: &mut TptpState) -> std::result::Result<(), Halt> {
        self.budget.tick()?;
        if let Some(best) = self.best_index {
            if best.load(Ordering::Relaxed) < self.my_index {
                return Err(Halt::Found);
            }
        }
        if st.remaining == 0 {
            return self.record(st);
        }
        if k == self.problem.cands.len() {
            return Ok(());
        }
        if !self.problem.capacity_ok(k, st, &mut self.row_cap, &mut self.col_cap) {
            return Ok(());
        }
        let c = &self.problem.cands[k];
        if st.rrem[c.row] > 0 && st.srem[c.col] > 0 && st.free(c) {
            st.toggle(c);
            st.rrem[c.row] -= 1;
            st.srem[c.col] -= 1;
            st.remaining -= 1;
            st.chosen.push(k);
            let res = self.dfs(k + 1, st);
            st.chosen.pop();
            st.remaining += 1;
            st.srem[c.col] += 1;
            st.rrem[c.row] += 1;
            st.toggle(c);
            res?;
        }
        self.dfs(k + 1, st)
    }

    /// Walks the tree down to candidate index `split`, collecting the open
    /// subtrees in the order the serial search would visit them.
    fn frontier(
        &mut self,
        k: usize,
        split: usize,
        st: &mut TptpState,
        out: &mut Vec<(usize, TptpState)>,
    ) -> std::result::Result<(), Halt> {
        if st.remaining == 0 || k == split || k == self.problem.cands.len() {
            out.push((k, st.clone()));
            return Ok(());
        }
        self.budget.tick()?;
        if !self.problem.capacity_ok(k, st, &mut self.row_cap, &mut self.col_cap) {
            return Ok(());
        }
        let c = &self.problem.cands[k];
        if st.rrem[c.row] > 0 && st.srem[c.col] > 0 && st.free(c) {
            let mut next = st.clone();
            next.toggle(c);
            next.rrem[c.row] -= 1;
            next.srem[c.col] -= 1;
            next.remaining -= 1;
            next.chosen.push(k);
            self.frontier(k + 1, split, &mut next, out)?;
        }
        self.frontier(k + 1, split, st, out)
    }
}

fn quick_reject(inst: &TptpInstance) -> Option<String> {
    let ProjectionPair { r, s } = &inst.target;
    if inst.target.row_total() != inst.target.col_total() {
        return Some(format!(
            "row total {} differs from column total {}",
            inst.target.row_total(),
            inst.target.col_total()
        ));
    }
    let (h, w) = (inst.tile.height(), inst.tile.width());
    if let Some(i) = (0..r.len()).find(|&i| r[i] > 0 && i + h > inst.dims.m) {
        return Some(format!("row {i} has starts but a copy there leaves the grid"));
    }
    if let Some(j) = (0..s.len()).find(|&j| s[j] > 0 && j + w > inst.dims.n) {
        return Some(format!("column {j} has starts but a copy there leaves the grid"));
    }
    None
}

/// Exact search for packings with the target projections.
///
/// Candidate start cells are scanned row-major with a place/skip branch at
/// each. A branch is cut when some row or column budget exceeds the number
/// of still-placeable candidates that could serve it. With `limits.jobs > 1`
/// the tree is split into subtrees searched in parallel; status, count and
/// the (sorted) solution list match the serial search.
pub fn solve_tptp(inst: &TptpInstance, mode: Mode, limits: SearchLimits) -> SolveResult<Packing> {
    if let Some(reason) = quick_reject(inst) {
        return SolveResult::rejected(mode, reason);
    }
    let dims = inst.dims;
    let tile = &inst.tile;
    let mut cands = Vec::new();
    for i in 0..dims.m {
        if inst.target.r[i] == 0 {
            continue;
        }
        for j in 0..dims.n {
            if inst.target.s[j] == 0 {
                continue;
            }
            let pos = Cell::new(i as i64, j as i64);
            if !dims.fits(tile, pos) {
                continue;
            }
            let cells = tile
                .cells()
                .iter()
                .map(|c| (i + c.row as usize) * dims.n + j + c.col as usize)
                .collect();
            cands.push(Candidate { row: i, col: j, cells });
        }
    }
    let problem = TptpProblem { cands };
    let root = TptpState {
        occ: vec![0; (dims.m * dims.n).div_ceil(64)],
        rrem: inst.target.r.clone(),
        srem: inst.target.s.clone(),
        remaining: inst.target.row_total(),
        chosen: Vec::new(),
    };

    let nodes = AtomicU64::new(0);
    let limit_hit = AtomicBool::new(false);
    let budget = Budget {
        limits,
        nodes: &nodes,
        deadline: limits.timeout.map(|t| Instant::now() + t),
        limit_hit: &limit_hit,
    };

    let found = if limits.jobs <= 1 {
        let mut w = Worker::new(&problem, mode, &budget, dims, 0, None);
        let mut st = root;
        let _ = w.dfs(0, &mut st);
        w.found
    } else {
        let split = split_depth(limits.jobs).min(problem.cands.len());
        let mut frontier = Vec::new();
        let mut st = root;
        let _ = Worker::new(&problem, mode, &budget, dims, 0, None).frontier(0, split, &mut st, &mut frontier);
        let best = AtomicUsize::new(usize::MAX);
        let parts: Vec<Found<Vec<Cell>>> = rayon::ThreadPoolBuilder::new()
            .num_threads(limits.jobs)
            .build()
            .expect("thread pool")
            .install(|| {
                frontier
                    .into_par_iter()
                    .enumerate()
                    .map(|(idx, (k, mut st))| {
                        let mut w = Worker::new(&problem, mode, &budget, dims, idx, Some(&best));
                        if w.dfs(k, &mut st) == Err(Halt::Found) && w.found.count > 0 {
                            best.fetch_min(idx, Ordering::Relaxed);
                        }
                        w.found
                    })
                    .collect()
            });
        merge(parts, mode)
    };

    let stats = SearchStats {
        nodes: nodes.load(Ordering::Relaxed),
    };
    let to_packing = |pos: Vec<Cell>| Packing::new(dims, pos);
    finish(mode, limit_hit.load(Ordering::Relaxed), found, stats, to_packing)
}

fn split_depth(jobs: usize) -> usize {
    // roughly 16 subtrees per worker before pruning
    let target = (jobs * 16).next_power_of_two();
    target.trailing_zeros() as usize + 2
}

fn merge<T>(parts: Vec<Found<T>>, mode: Mode) -> Found<T> {
    let mut out = Found::default();
    for p in parts {
        if matches!(mode, Mode::Decide | Mode::Find) && out.count > 0 {
            break;
        }
        out.count += p.count;
        out.solutions.extend(p.solutions);
    }
    out
}

fn finish<T, W>(
    mode: Mode,
    limit_hit: bool,
    found: Found<T>,
    stats: SearchStats,
    convert: impl Fn(T) -> W,
) -> SolveResult<W> {
    let any = found.count > 0;
    let exhaustive = matches!(mode, Mode::Count | Mode::Enumerate);
    let status = if any && !exhaustive {
        Status::Feasible
    } else if limit_hit {
        Status::LimitExceeded
    } else if any {
        Status::Feasible
    } else {
        Status::Infeasible
    };
    let mut solutions: Vec<W> = found.solutions.into_iter().map(convert).collect();
    let witness = (mode == Mode::Find && !solutions.is_empty()).then(|| solutions.remove(0));
    SolveResult {
        status,
        witness,
        count: exhaustive.then_some(found.count),
        solutions: (mode == Mode::Enumerate).then_some(solutions),
        stats,
        reason: None,
    }
}

// ---------------------------------------------------------------------------
// 3-color tomography

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    R,
    G,
    B,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::R, Color::G, Color::B];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Color::R => 'R',
            Color::G => 'G',
            Color::B => 'B',
        }
    }

    pub fn from_char(c: char) -> Option<Color> {
        match c {
            'R' => Some(Color::R),
            'G' => Some(Color::G),
            'B' => Some(Color::B),
            _ => None,
        }
    }
}

/// One vector per color.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColorVectors {
    #[serde(rename = "R")]
    pub red: Vec<u64>,
    #[serde(rename = "G")]
    pub green: Vec<u64>,
    #[serde(rename = "B")]
    pub blue: Vec<u64>,
}

impl ColorVectors {
    pub fn zeros(len: usize) -> Self {
        ColorVectors {
            red: vec![0; len],
            green: vec![0; len],
            blue: vec![0; len],
        }
    }

    pub fn get(&self, c: Color) -> &[u64] {
        match c {
            Color::R => &self.red,
            Color::G => &self.green,
            Color::B => &self.blue,
        }
    }

    pub fn get_mut(&mut self, c: Color) -> &mut Vec<u64> {
        match c {
            Color::R => &mut self.red,
            Color::G => &mut self.green,
            Color::B => &mut self.blue,
        }
    }

    pub fn total(&self, c: Color) -> u64 {
        self.get(c).iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "ThreeColorJson", into = "ThreeColorJson")]
pub struct ThreeColorInstance {
    pub m: usize,
    pub n: usize,
    pub rows: ColorVectors,
    pub cols: ColorVectors,
}

#[derive(Serialize, Deserialize)]
struct ThreeColorJson {
    m: usize,
    n: usize,
    rows: ColorVectors,
    cols: ColorVectors,
}

impl TryFrom<ThreeColorJson> for ThreeColorInstance {
    type Error = Error;
    fn try_from(j: ThreeColorJson) -> Result<Self> {
        ThreeColorInstance::new(j.m, j.n, j.rows, j.cols)
    }
}

impl From<ThreeColorInstance> for ThreeColorJson {
    fn from(i: ThreeColorInstance) -> Self {
        ThreeColorJson {
            m: i.m,
            n: i.n,
            rows: i.rows,
            cols: i.cols,
        }
    }
}

impl ThreeColorInstance {
    pub fn new(m: usize, n: usize, rows: ColorVectors, cols: ColorVectors) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::MalformedInstance(format!("matrix {m}x{n} must be at least 1x1")));
        }
        for c in Color::ALL {
            if rows.get(c).len() != m || cols.get(c).len() != n {
                return Err(Error::MalformedInstance(format!(
                    "color {} vectors have lengths {}/{}, expected {m}/{n}",
                    c.as_char(),
                    rows.get(c).len(),
                    cols.get(c).len()
                )));
            }
        }
        Ok(ThreeColorInstance { m, n, rows, cols })
    }

    /// The reason the instance is trivially infeasible, if it is: per-color
    /// totals must agree, each row's colors must sum to `n` and each column's
    /// to `m`.
    pub fn precondition_failure(&self) -> Option<String> {
        for c in Color::ALL {
            if self.rows.total(c) != self.cols.total(c) {
                return Some(format!(
                    "color {} row total {} differs from column total {}",
                    c.as_char(),
                    self.rows.total(c),
                    self.cols.total(c)
                ));
            }
        }
        for x in 0..self.m {
            let sum: u64 = Color::ALL.iter().map(|&c| self.rows.get(c)[x]).sum();
            if sum != self.n as u64 {
                return Some(format!("row {x} color counts sum to {sum}, expected {}", self.n));
            }
        }
        for y in 0..self.n {
            let sum: u64 = Color::ALL.iter().map(|&c| self.cols.get(c)[y]).sum();
            if sum != self.m as u64 {
                return Some(format!("column {y} color counts sum to {sum}, expected {}", self.m));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ColorMatrix {
    rows: Vec<Vec<Color>>,
}

impl TryFrom<Vec<String>> for ColorMatrix {
    type Error = Error;
    fn try_from(rows: Vec<String>) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|row| {
                row.chars()
                    .map(|ch| {
                        Color::from_char(ch)
                            .ok_or_else(|| Error::MalformedInstance(format!("bad color {ch:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        ColorMatrix::new(parsed)
    }
}

impl From<ColorMatrix> for Vec<String> {
    fn from(m: ColorMatrix) -> Self {
        m.rows
            .iter()
            .map(|row| row.iter().map(|c| c.as_char()).collect())
            .collect()
    }
}

impl ColorMatrix {
    pub fn new(rows: Vec<Vec<Color>>) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::MalformedInstance("color matrix must be a nonempty rectangle".into()));
        }
        Ok(ColorMatrix { rows })
    }

    /// Parses rows written as strings over `R`, `G`, `B`.
    pub fn parse(rows: &[&str]) -> Result<Self> {
        ColorMatrix::try_from(rows.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, x: usize, y: usize) -> Color {
        self.rows[x][y]
    }

    /// The 3-color instance this matrix solves.
    pub fn projections(&self) -> ThreeColorInstance {
        let (m, n) = (self.m(), self.n());
        let mut rows = ColorVectors::zeros(m);
        let mut cols = ColorVectors::zeros(n);
        for x in 0..m {
            for y in 0..n {
                let c = self.rows[x][y];
                rows.get_mut(c)[x] += 1;
                cols.get_mut(c)[y] += 1;
            }
        }
        ThreeColorInstance { m, n, rows, cols }
    }

    /// All `3^(m*n)` matrices of the given shape, in lexicographic order.
    pub fn all(m: usize, n: usize) -> Vec<ColorMatrix> {
        let cells = m * n;
        let total = 3usize.pow(cells as u32);
        (0..total)
            .map(|mut code| {
                let mut flat = vec![Color::R; cells];
                for slot in flat.iter_mut().rev() {
                    *slot = Color::ALL[code % 3];
                    code /= 3;
                }
                ColorMatrix {
                    rows: flat.chunks(n).map(|c| c.to_vec()).collect(),
                }
            })
            .collect()
    }
}

struct ColorSearch<'a> {
    inst: &'a ThreeColorInstance,
    mode: Mode,
    budget: &'a Budget<'a>,
    rowrem: [Vec<u64>; 3],
    colrem: [Vec<u64>; 3],
    grid: Vec<Vec<Color>>,
    found: Found<Vec<Vec<Color>>>,
}

impl ColorSearch<'_> {
    // cells are filled column by column
    fn dfs(&mut self, t: usize) -> std::result::Result<(), Halt> {
        self.budget.tick()?;
        let (m, n) = (self.inst.m, self.inst.n);
        if t == m * n {
            self.found.count += 1;
            return match self.mode {
                Mode::Count => Ok(()),
                Mode::Decide | Mode::Find => {
                    self.found.solutions.push(self.grid.clone());
                    Err(Halt::Found)
                }
                Mode::Enumerate => {
                    self.found.solutions.push(self.grid.clone());
                    if self.found.solutions.len() as u64 > self.budget.limits.max_solutions {
                        self.budget.limit_hit.store(true, Ordering::Relaxed);
                        return Err(Halt::Limit);
                    }
                    Ok(())
                }
            };
        }
        let (y, x) = (t / m, t % m);
        let cols_left = (n - y - 1) as u64;
        let rows_left = (m - x - 1) as u64;
        for c in Color::ALL {
            let ci = c.index();
            if self.rowrem[ci][x] == 0 || self.colrem[ci][y] == 0 {
                continue;
            }
            self.rowrem[ci][x] -= 1;
            self.colrem[ci][y] -= 1;
            let ok = (0..3).all(|k| self.rowrem[k][x] <= cols_left && self.colrem[k][y] <= rows_left);
            if ok {
                self.grid[x][y] = c;
                let res = self.dfs(t + 1);
                if res.is_err() {
                    self.rowrem[ci][x] += 1;
                    self.colrem[ci][y] += 1;
                    return res;
                }
            }
            self.rowrem[ci][x] += 1;
            self.colrem[ci][y] += 1;
        }
        Ok(())
    }
}

/// Complete search over colorings, column by column, pruning on remaining
/// per-row and per-column color budgets.
pub fn solve_3ctp(inst: &ThreeColorInstance, mode: Mode, limits: SearchLimits) -> SolveResult<ColorMatrix> {
    if let Some(reason) = inst.precondition_failure() {
        return SolveResult::rejected(mode, reason);
    }
    let nodes = AtomicU64::new(0);
    let limit_hit = AtomicBool::new(false);
    let budget = Budget {
        limits,
        nodes: &nodes,
        deadline: limits.timeout.map(|t| Instant::now() + t),
        limit_hit: &limit_hit,
    };
    let mut search = ColorSearch {
        inst,
        mode,
        budget: &budget,
        rowrem: Color::ALL.map(|c| inst.rows.get(c).to_vec()),
        colrem: Color::ALL.map(|c| inst.cols.get(c).to_vec()),
        grid: vec![vec![Color::R; inst.n]; inst.m],
        found: Found::default(),
    };
    let _ = search.dfs(0);
    let found = search.found;
    let stats = SearchStats {
        nodes: nodes.load(Ordering::Relaxed),
    };
    let mut res = finish(mode, limit_hit.load(Ordering::Relaxed), found, stats, |rows| ColorMatrix { rows });
    if let Some(sols) = res.solutions.as_mut() {
        sols.sort();
    }
    res
}

// ---------------------------------------------------------------------------
// Single-cell reconstruction

/// Builds a 0-1 matrix with row sums `r` and column sums `s`, or returns
/// `None` when no such matrix exists.
///
/// Rows are filled in non-increasing order of `r`; each row takes the columns
/// with the largest remaining demand, lowest index first on ties.
pub fn ryser_single_cell(r: &[u64], s: &[u64]) -> Option<Vec<Vec<u8>>> {
    let (m, n) = (r.len(), s.len());
    if r.iter().any(|&x| x as usize > n)
        || s.iter().any(|&x| x as usize > m)
        || r.iter().sum::<u64>() != s.iter().sum::<u64>()
    {
        return None;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(r[i]));
    let mut rem = s.to_vec();
    let mut out = vec![vec![0u8; n]; m];
    for i in order {
        let mut cols: Vec<usize> = (0..n).collect();
        cols.sort_by_key(|&j| (std::cmp::Reverse(rem[j]), j));
        for &j in cols.iter().take(r[i] as usize) {
            if rem[j] == 0 {
                return None;
            }
            rem[j] -= 1;
            out[i][j] = 1;
        }
    }
    rem.iter().all(|&x| x == 0).then_some(out)
}

// ---------------------------------------------------------------------------
// xi: maximum number of copies starting in I x J

/// Maximum size of a packing whose positions all lie in `rows x cols`,
/// ignoring projections. Exact, by branch and bound over the conflict graph.
pub fn xi(tile: &Tile, dims: GridDims, rows: &[usize], cols: &[usize]) -> u64 {
    let mut rows: Vec<usize> = rows.to_vec();
    let mut cols: Vec<usize> = cols.to_vec();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let positions: Vec<Cell> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| Cell::new(i as i64, j as i64)))
        .filter(|&p| dims.fits(tile, p))
        .collect();
    let profile = ConflictProfile::of(tile);
    let count = positions.len();
    let words = count.div_ceil(64).max(1);
    let mut adj = vec![vec![0u64; words]; count];
    for a in 0..count {
        for b in 0..count {
            if a != b && profile.contains(positions[a].diff(positions[b])) {
                adj[a][b / 64] |= 1 << (b % 64);
            }
        }
    }
    let mut all = vec![0u64; words];
    for v in 0..count {
        all[v / 64] |= 1 << (v % 64);
    }
    let mut best = 0;
    max_independent(&adj, all, 0, &mut best);
    best
}

fn max_independent(adj: &[Vec<u64>], open: Vec<u64>, size: u64, best: &mut u64) {
    let left: u64 = open.iter().map(|w| w.count_ones() as u64).sum();
    if size + left <= *best {
        return;
    }
    let Some(v) = open
        .iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    else {
        *best = size;
        return;
    };
    let mut with = open.clone();
    for (w, a) in with.iter_mut().zip(&adj[v]) {
        *w &= !a;
    }
    with[v / 64] &= !(1 << (v % 64));
    max_independent(adj, with, size + 1, best);
    let mut without = open;
    without[v / 64] &= !(1 << (v % 64));
    max_independent(adj, without, size, best);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::{projections, validate_packing};
    use crate::tile::shapes::*;

    fn dims(m: usize, n: usize) -> GridDims {
        GridDims::new(m, n).unwrap()
    }

    fn inst(tile: Tile, m: usize, n: usize, r: &[u64], s: &[u64]) -> TptpInstance {
        TptpInstance::new(
            tile,
            dims(m, n),
            ProjectionPair {
                r: r.to_vec(),
                s: s.to_vec(),
            },
        )
        .unwrap()
    }

    fn cells(pairs: &[(i64, i64)]) -> Vec<Cell> {
        pairs.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn heptomino_projections_include_known_packing() {
        let want = crate::packing::tests::heptomino_positions();
        let i = inst(heptomino(), 9, 10, &[1, 0, 2, 1, 1, 0, 2, 0, 0], &[2, 0, 0, 2, 0, 1, 0, 2, 0, 0]);
        let res = solve_tptp(&i, Mode::Enumerate, SearchLimits::default());
        assert_eq!(res.status, Status::Feasible);
        let sols = res.solutions.unwrap();
        assert!(sols.iter().any(|p| p.positions() == want.as_slice()));
        for p in &sols {
            assert!(p.validate(&heptomino()).is_ok());
            assert_eq!(p.projections(), i.target);
        }
    }

    #[test]
    fn zero_projections_give_empty_packing() {
        let res = solve_tptp(&inst(l_tromino(), 3, 3, &[0; 3], &[0; 3]), Mode::Find, SearchLimits::default());
        assert_eq!(res.status, Status::Feasible);
        assert!(res.witness.unwrap().is_empty());
    }

    #[test]
    fn single_cell_unique() {
        let i = inst(single_cell(), 2, 2, &[2, 0], &[1, 1]);
        let res = solve_tptp(&i, Mode::Count, SearchLimits::default());
        assert_eq!((res.status, res.count), (Status::Feasible, Some(1)));
        let res = solve_tptp(&i, Mode::Enumerate, SearchLimits::default());
        assert_eq!(res.solutions.unwrap()[0].positions(), cells(&[(0, 0), (0, 1)]).as_slice());
    }

    #[test]
    fn quick_rejects() {
        let res = solve_tptp(&inst(single_cell(), 2, 2, &[1, 0], &[0, 0]), Mode::Decide, SearchLimits::default());
        assert_eq!(res.status, Status::Infeasible);
        assert!(res.reason.is_some());
        // row 1 cannot host a height-2 copy on a 2-row grid
        let res = solve_tptp(&inst(square2(), 2, 2, &[0, 1], &[1, 0]), Mode::Decide, SearchLimits::default());
        assert_eq!(res.status, Status::Infeasible);
    }

    #[test]
    fn malformed_lengths() {
        let err = TptpInstance::new(single_cell(), dims(2, 2), ProjectionPair { r: vec![0], s: vec![0, 0] });
        assert!(matches!(err, Err(Error::MalformedInstance(_))));
    }

    #[test]
    fn node_limit_is_reported() {
        let i = inst(single_cell(), 4, 4, &[2, 2, 2, 2], &[2, 2, 2, 2]);
        let res = solve_tptp(&i, Mode::Count, SearchLimits::default().with_nodes(5));
        assert_eq!(res.status, Status::LimitExceeded);
        let res = solve_tptp(&i, Mode::Count, SearchLimits::default());
        assert_eq!((res.status, res.count), (Status::Feasible, Some(90)));
    }

    #[test]
    fn parallel_matches_serial() {
        let i = inst(square2(), 8, 8, &[2, 1, 3, 0, 2, 1, 3, 0], &[2, 1, 3, 0, 2, 1, 3, 0]);
        let serial = solve_tptp(&i, Mode::Enumerate, SearchLimits::default());
        for jobs in [2, 4] {
            let par = solve_tptp(&i, Mode::Enumerate, SearchLimits::default().with_jobs(jobs));
            assert_eq!(par.status, serial.status);
            assert_eq!(par.count, serial.count);
            assert_eq!(par.solutions, serial.solutions);
            let found = solve_tptp(&i, Mode::Find, SearchLimits::default().with_jobs(jobs));
            let want = solve_tptp(&i, Mode::Find, SearchLimits::default());
            assert_eq!(found.witness, want.witness);
        }
    }

    #[test]
    fn three_color_examples() {
        let one = |rows: [u64; 3], cols: [u64; 3]| ThreeColorInstance {
            m: 1,
            n: 1,
            rows: ColorVectors {
                red: vec![rows[0]],
                green: vec![rows[1]],
                blue: vec![rows[2]],
            },
            cols: ColorVectors {
                red: vec![cols[0]],
                green: vec![cols[1]],
                blue: vec![cols[2]],
            },
        };
        let res = solve_3ctp(&one([1, 0, 0], [1, 0, 0]), Mode::Find, SearchLimits::default());
        assert_eq!(res.witness, Some(ColorMatrix::parse(&["R"]).unwrap()));

        let res = solve_3ctp(&one([1, 0, 0], [0, 1, 0]), Mode::Decide, SearchLimits::default());
        assert_eq!(res.status, Status::Infeasible);

        let rg = ColorMatrix::parse(&["RG", "GR"]).unwrap().projections();
        assert_eq!(rg.rows.red, vec![1, 1]);
        let res = solve_3ctp(&rg, Mode::Enumerate, SearchLimits::default());
        assert_eq!(res.count, Some(2));
        assert_eq!(
            res.solutions.unwrap(),
            vec![ColorMatrix::parse(&["RG", "GR"]).unwrap(), ColorMatrix::parse(&["GR", "RG"]).unwrap()]
        );
    }

    #[test]
    fn three_color_count_matches_brute_force() {
        let all = ColorMatrix::all(2, 3);
        assert_eq!(all.len(), 729);
        let mut seen = std::collections::BTreeMap::new();
        for mtx in &all {
            *seen.entry(mtx.projections()).or_insert(0u64) += 1;
        }
        for (inst, want) in seen {
            let res = solve_3ctp(&inst, Mode::Count, SearchLimits::default());
            assert_eq!(res.count, Some(want));
        }
    }

    #[test]
    fn color_matrix_json() {
        let mtx = ColorMatrix::parse(&["RG", "BB"]).unwrap();
        assert_eq!(serde_json::to_string(&mtx).unwrap(), r#"["RG","BB"]"#);
        assert!(serde_json::from_str::<ColorMatrix>(r#"["RX"]"#).is_err());
        assert!(serde_json::from_str::<ColorMatrix>(r#"["R","RG"]"#).is_err());
    }

    #[test]
    fn ryser_examples() {
        assert_eq!(ryser_single_cell(&[1], &[1]), Some(vec![vec![1]]));
        assert_eq!(ryser_single_cell(&[2, 1], &[2, 1]), Some(vec![vec![1, 1], vec![1, 0]]));
        assert_eq!(ryser_single_cell(&[2, 0], &[1, 1]), Some(vec![vec![1, 1], vec![0, 0]]));
        assert_eq!(ryser_single_cell(&[2, 0], &[2, 0]), None);
        assert_eq!(ryser_single_cell(&[3], &[1, 1]), None);
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi(&single_cell(), dims(3, 3), &[0], &[0, 1, 2]), 3);
        assert_eq!(xi(&square2(), dims(4, 4), &[1, 2], &[1, 2]), 1);
        assert_eq!(xi(&l_tromino(), dims(4, 4), &[], &[0, 1]), 0);
        // 2x2 squares starting anywhere in a 4x4 grid: at most four fit
        assert_eq!(xi(&square2(), dims(4, 4), &[0, 1, 2], &[0, 1, 2]), 4);
    }

    #[test]
    fn xi_bounds_enumerated_packings() {
        let i = inst(square2(), 8, 8, &[2, 1, 3, 0, 2, 1, 3, 0], &[2, 1, 3, 0, 2, 1, 3, 0]);
        let rows = [1, 2, 5, 6];
        let cols = [0, 2, 4, 6];
        let bound = xi(&square2(), dims(8, 8), &rows, &cols);
        for p in solve_tptp(&i, Mode::Enumerate, SearchLimits::default()).solutions.unwrap() {
            let inside = p
                .positions()
                .iter()
                .filter(|c| rows.contains(&(c.row as usize)) && cols.contains(&(c.col as usize)))
                .count() as u64;
            assert!(inside <= bound);
        }
    }

    #[test]
    fn witness_reproduces_target() {
        let p = crate::packing::tests::heptomino_positions();
        let target = projections(dims(9, 10), &p);
        let i = TptpInstance::new(heptomino(), dims(9, 10), target.clone()).unwrap();
        let w = solve_tptp(&i, Mode::Find, SearchLimits::default()).witness.unwrap();
        assert!(validate_packing(&heptomino(), dims(9, 10), w.positions()).is_ok());
        assert_eq!(w.projections(), target);
    }
}
