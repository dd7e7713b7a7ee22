//! Instance-level checks of the reduction's correctness conditions.
//!
//! These are finite checks: a report that holds is evidence for the
//! instances examined, not a proof. Running out of search budget yields an
//! inconclusive report, never a passing one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::packing::ProjectionPair;
use crate::reduction::{lift_solution, project_solution, reduce, BlockGadget, ReductionCertificate};
use crate::solver::{solve_3ctp, solve_tptp, xi, Mode, SearchLimits, Status, ThreeColorInstance, TptpInstance};
use crate::tile::Tile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub holds: bool,
    /// Search budget ran out before the check could finish.
    pub inconclusive: bool,
    /// Present exactly when the check ran to completion and failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
    /// Block signature -> occurrences, summed over all packings examined.
    /// Gadget signatures are keyed by their color letter.
    pub signature_counts: BTreeMap<String, u64>,
    pub packings_examined: u64,
    pub details: BTreeMap<String, Value>,
}

impl VerificationReport {
    fn new() -> Self {
        VerificationReport {
            holds: true,
            inconclusive: false,
            counterexample: None,
            signature_counts: BTreeMap::new(),
            packings_examined: 0,
            details: BTreeMap::new(),
        }
    }

    fn fail(mut self, counterexample: Value) -> Self {
        self.holds = false;
        self.counterexample = Some(counterexample);
        self
    }

    fn inconclusive(mut self) -> Self {
        self.holds = false;
        self.inconclusive = true;
        self.counterexample = None;
        self
    }

    fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), json!(value));
    }
}

/// Picks the listed coordinates of `v`, in the listed order.
pub fn restriction<T: Copy>(v: &[T], indices: &[usize]) -> Result<Vec<T>> {
    indices
        .iter()
        .map(|&i| {
            v.get(i).copied().ok_or(Error::IndexOutOfRange {
                index: i,
                len: v.len(),
            })
        })
        .collect()
}

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let height = a.len();
    let width = a.first().map_or(0, |r| r.len());
    let mut prev = 1i128;
    let mut rank = 0;
    for col in 0..width {
        let Some(pivot) = (rank..height).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in rank + 1..height {
            for c in col + 1..width {
                a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev;
            }
            a[r][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
        if rank == height {
            break;
        }
    }
    rank
}

fn check_shape(vectors: &[Vec<i64>]) -> Result<()> {
    let Some(first) = vectors.first() else {
        return Err(Error::DimensionMismatch("no vectors given".into()));
    };
    if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
        return Err(Error::DimensionMismatch(format!(
            "vector lengths {} and {} differ",
            first.len(),
            bad.len()
        )));
    }
    Ok(())
}

/// Affine independence via the augmented vectors `(v_i, 1)`: independent iff
/// they have full rank.
pub fn affinely_independent(vectors: &[Vec<i64>]) -> Result<bool> {
    check_shape(vectors)?;
    let augmented: Vec<Vec<i64>> = vectors
        .iter()
        .map(|v| v.iter().copied().chain(std::iter::once(1)).collect())
        .collect();
    Ok(rank(&augmented) == vectors.len())
}

/// Affine independence via the difference vectors `v_i - v_1`.
pub fn affinely_independent_by_differences(vectors: &[Vec<i64>]) -> Result<bool> {
    check_shape(vectors)?;
    let base = &vectors[0];
    let diffs: Vec<Vec<i64>> = vectors[1..]
        .iter()
        .map(|v| v.iter().zip(base).map(|(x, y)| x - y).collect())
        .collect();
    Ok(rank(&diffs) == vectors.len() - 1)
}

/// Affine independence straight from the definition: the system
/// `sum a_i = 0, sum a_i v_i = 0` has only the trivial solution, i.e. its
/// coefficient matrix (one column per vector) has rank equal to the count.
pub fn affinely_independent_by_definition(vectors: &[Vec<i64>]) -> Result<bool> {
    check_shape(vectors)?;
    let dim = vectors[0].len();
    let mut system = vec![vec![1i64; vectors.len()]];
    for coord in 0..dim {
        system.push(vectors.iter().map(|v| v[coord]).collect());
    }
    Ok(rank(&system) == vectors.len())
}

fn to_i64(v: &[u64]) -> Vec<i64> {
    v.iter().map(|&x| x as i64).collect()
}

/// Row projections of the three block packings are affinely independent,
/// and so are the column projections.
pub fn check_requirement1(gadget: &BlockGadget) -> bool {
    let rows: Vec<Vec<i64>> = gadget.row_proj.iter().map(|v| to_i64(v)).collect();
    let cols: Vec<Vec<i64>> = gadget.col_proj.iter().map(|v| to_i64(v)).collect();
    affinely_independent(&rows).unwrap_or(false) && affinely_independent(&cols).unwrap_or(false)
}

pub fn signature_key(gadget: &BlockGadget, sig: &ProjectionPair) -> String {
    match gadget.color_of(sig) {
        Some(c) => c.as_char().to_string(),
        None => format!("r={:?} s={:?}", sig.r, sig.s),
    }
}

/// Enumerates every packing of the reduced instance and checks that each
/// block's local projections equal those of one gadget packing.
pub fn check_requirement2(
    inst: &TptpInstance,
    cert: &ReductionCertificate,
    limits: SearchLimits,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    report.detail("case", cert.case);
    report.detail("block", [cert.gadget.k, cert.gadget.l]);
    if cert.infeasible_source.is_some() {
        // no block structure to check; the emitted instance has no packings
        report.detail("infeasible_source", &cert.infeasible_source);
    }
    let res = solve_tptp(inst, Mode::Enumerate, limits);
    report.detail("nodes", res.stats.nodes);
    if res.status == Status::LimitExceeded {
        return Ok(report.inconclusive());
    }
    let solutions = res.solutions.unwrap_or_default();
    report.packings_examined = solutions.len() as u64;
    let mut failure = None;
    for packing in &solutions {
        let sigs = cert.block_signatures(packing)?;
        for (idx, sig) in sigs.iter().enumerate() {
            let key = signature_key(&cert.gadget, sig);
            if failure.is_none() && cert.gadget.color_of(sig).is_none() {
                failure = Some(json!({
                    "packing": packing,
                    "block": [idx / cert.n, idx % cert.n],
                    "r": sig.r,
                    "s": sig.s,
                }));
            }
            *report.signature_counts.entry(key).or_insert(0) += 1;
        }
    }
    Ok(match failure {
        Some(ce) => report.fail(ce),
        None => report,
    })
}

/// Checks the adapted Ryser lemma on one instance: when
/// `r(I) - s(complement J)` equals `xi(I, J)`, every packing with these
/// projections has exactly `xi` copies starting in `I x J` and none in the
/// complement product.
pub fn check_ryser_lemma(
    inst: &TptpInstance,
    rows: &[usize],
    cols: &[usize],
    limits: SearchLimits,
) -> Result<VerificationReport> {
    let (m, n) = (inst.dims.m, inst.dims.n);
    for &i in rows {
        if i >= m {
            return Err(Error::IndexOutOfRange { index: i, len: m });
        }
    }
    for &j in cols {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
    }
    let in_rows = |i: usize| rows.contains(&i);
    let in_cols = |j: usize| cols.contains(&j);
    let r_i: i64 = (0..m).filter(|&i| in_rows(i)).map(|i| inst.target.r[i] as i64).sum();
    let s_jbar: i64 = (0..n).filter(|&j| !in_cols(j)).map(|j| inst.target.s[j] as i64).sum();
    let bound = xi(&inst.tile, inst.dims, rows, cols) as i64;

    let mut report = VerificationReport::new();
    report.detail("xi", bound);
    report.detail("r_I", r_i);
    report.detail("s_Jbar", s_jbar);
    report.detail("r_I_minus_s_Jbar", r_i - s_jbar);
    if r_i - s_jbar != bound {
        report.detail("hypothesis_met", false);
        return Ok(report.fail(json!({
            "hypothesis_not_met": { "r_I_minus_s_Jbar": r_i - s_jbar, "xi": bound }
        })));
    }
    report.detail("hypothesis_met", true);
    let res = solve_tptp(inst, Mode::Enumerate, limits);
    if res.status == Status::LimitExceeded {
        return Ok(report.inconclusive());
    }
    let solutions = res.solutions.unwrap_or_default();
    report.packings_examined = solutions.len() as u64;
    for packing in &solutions {
        let inside = packing
            .positions()
            .iter()
            .filter(|c| in_rows(c.row as usize) && in_cols(c.col as usize))
            .count() as i64;
        let outside = packing
            .positions()
            .iter()
            .filter(|c| !in_rows(c.row as usize) && !in_cols(c.col as usize))
            .count() as i64;
        if inside != bound || outside != 0 {
            return Ok(report.fail(json!({
                "packing": packing,
                "in_I_J": inside,
                "in_complement": outside,
            })));
        }
    }
    Ok(report)
}

/// Reduces `inst`, decides both sides, and checks the answers agree. On
/// feasible instances the source witness is lifted and projected back, and
/// the packing solver's own witness is projected to a color matrix that must
/// solve the source.
pub fn check_equisat(inst: &ThreeColorInstance, tile: &Tile, limits: SearchLimits) -> Result<VerificationReport> {
    let (out, cert) = reduce(inst, tile)?;
    let mut report = VerificationReport::new();
    report.detail("case", cert.case);
    report.detail("target", [out.dims.m, out.dims.n]);

    let src = solve_3ctp(inst, Mode::Find, limits);
    let dst = solve_tptp(&out, Mode::Find, limits);
    report.detail("source_status", src.status);
    report.detail("target_status", dst.status);
    report.detail("target_nodes", dst.stats.nodes);
    if src.status == Status::LimitExceeded || dst.status == Status::LimitExceeded {
        return Ok(report.inconclusive());
    }
    if src.is_feasible() != dst.is_feasible() {
        return Ok(report.fail(json!({
            "source_status": src.status,
            "target_status": dst.status,
            "source_witness": src.witness,
            "target_witness": dst.witness,
        })));
    }
    let (Some(mtx), Some(packing)) = (src.witness, dst.witness) else {
        return Ok(report);
    };
    report.packings_examined = 1;

    let lifted = lift_solution(&mtx, &cert)?;
    if !lifted.validate(tile).is_ok() || lifted.projections() != out.target {
        return Ok(report.fail(json!({ "lift_failed": { "matrix": mtx, "packing": lifted } })));
    }
    match project_solution(&lifted, &cert) {
        Ok(back) if back == mtx => {}
        other => {
            return Ok(report.fail(json!({
                "round_trip_failed": { "matrix": mtx, "projected": other.ok() }
            })))
        }
    }
    match project_solution(&packing, &cert) {
        Ok(m2) if m2.projections() == *inst => {
            report.detail("target_witness_projects_to", &m2);
            Ok(report)
        }
        Ok(m2) => Ok(report.fail(json!({ "projected_witness_wrong": { "packing": packing, "matrix": m2 } }))),
        Err(Error::UnrecognizedBlock { x, y, r, s }) => Ok(report.fail(json!({
            "unrecognized_block": { "packing": packing, "block": [x, y], "r": r, "s": s }
        }))),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::GridDims;
    use crate::reduction::certificate_for_tile;
    use crate::solver::ColorMatrix;
    use crate::tile::shapes::*;

    #[test]
    fn restriction_examples() {
        assert_eq!(restriction(&[4, 3, 1, 0, 7, 9, 5], &[0, 3, 4]).unwrap(), vec![4, 0, 7]);
        assert_eq!(restriction(&[1, 2, 3], &[0, 1, 2]).unwrap(), vec![1, 2, 3]);
        assert_eq!(restriction(&[1, 2], &[1, 0]).unwrap(), vec![2, 1]);
        assert_eq!(restriction(&[1, 2], &[2]), Err(Error::IndexOutOfRange { index: 2, len: 2 }));
    }

    #[test]
    fn affine_examples() {
        let v = |xs: &[&[i64]]| xs.iter().map(|x| x.to_vec()).collect::<Vec<_>>();
        assert!(affinely_independent(&v(&[&[1, 1], &[3, 4], &[5, 5]])).unwrap());
        assert!(!affinely_independent(&v(&[&[2, 7], &[2, 7]])).unwrap());
        assert!(affinely_independent(&v(&[&[1, 1, 1], &[1, 0, 2], &[2, 0, 2]])).unwrap());
        // collinear points
        assert!(!affinely_independent(&v(&[&[0, 0], &[1, 1], &[2, 2]])).unwrap());
        assert!(matches!(
            affinely_independent(&v(&[&[1], &[1, 2]])),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(affinely_independent(&[]).is_err());
    }

    #[test]
    fn bareiss_rank() {
        assert_eq!(rank(&[vec![2, 4], vec![1, 2]]), 1);
        assert_eq!(rank(&[vec![0, 1], vec![1, 0]]), 2);
        assert_eq!(rank(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]), 2);
        assert_eq!(rank(&[vec![0, 0], vec![0, 0]]), 0);
    }

    #[test]
    fn requirement1_examples() {
        assert!(check_requirement1(&certificate_for_tile(&square2()).unwrap().gadget));
        assert!(check_requirement1(&certificate_for_tile(&l_tromino()).unwrap().gadget));
        let mut g = certificate_for_tile(&square2()).unwrap().gadget;
        g.row_proj[1] = g.row_proj[0].clone();
        g.col_proj[1] = g.col_proj[0].clone();
        assert!(!check_requirement1(&g));
    }

    #[test]
    fn requirement2_single_block() {
        let inst = ColorMatrix::parse(&["B"]).unwrap().projections();
        let (out, cert) = reduce(&inst, &square2()).unwrap();
        let rep = check_requirement2(&out, &cert, SearchLimits::default()).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.packings_examined, 1);
        assert_eq!(rep.signature_counts, BTreeMap::from([("B".to_string(), 1)]));
    }

    #[test]
    fn requirement2_perturbed_target() {
        let inst = ColorMatrix::parse(&["RG", "GR"]).unwrap().projections();
        let (mut out, cert) = reduce(&inst, &square2()).unwrap();
        out.target.r[0] += 1;
        out.target.r[1] -= 1;
        let rep = check_requirement2(&out, &cert, SearchLimits::default()).unwrap();
        assert!(!rep.inconclusive);
        assert_eq!(rep.holds, rep.counterexample.is_none());
        if rep.packings_examined > 0 {
            assert!(!rep.holds);
        }
    }

    #[test]
    fn requirement2_limit_is_inconclusive() {
        let inst = ColorMatrix::parse(&["RG", "GR"]).unwrap().projections();
        let (out, cert) = reduce(&inst, &square2()).unwrap();
        let rep = check_requirement2(&out, &cert, SearchLimits::default().with_nodes(3)).unwrap();
        assert!(rep.inconclusive && !rep.holds && rep.counterexample.is_none());
    }

    #[test]
    fn ryser_lemma_hypothesis_not_met() {
        let inst = TptpInstance::new(
            single_cell(),
            GridDims::new(2, 2).unwrap(),
            ProjectionPair {
                r: vec![1, 1],
                s: vec![1, 1],
            },
        )
        .unwrap();
        let rep = check_ryser_lemma(&inst, &[0], &[0, 1], SearchLimits::default()).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.details["xi"], json!(2));
        assert_eq!(rep.details["r_I_minus_s_Jbar"], json!(1));
        assert_eq!(rep.details["hypothesis_met"], json!(false));
    }

    #[test]
    fn ryser_lemma_empty_rows() {
        let inst = TptpInstance::new(
            single_cell(),
            GridDims::new(2, 2).unwrap(),
            ProjectionPair {
                r: vec![1, 0],
                s: vec![1, 0],
            },
        )
        .unwrap();
        // I empty, J = {1}: xi = 0 and s(complement J) = s_0 = 1, so not met
        let rep = check_ryser_lemma(&inst, &[], &[1], SearchLimits::default()).unwrap();
        assert_eq!(rep.details["xi"], json!(0));
        assert!(!rep.holds);
        // I empty, J = {0, 1}: complement empty, hypothesis 0 = 0 holds
        let rep = check_ryser_lemma(&inst, &[], &[0, 1], SearchLimits::default()).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.packings_examined, 1);
    }

    #[test]
    fn equisat_examples() {
        let blue = ColorMatrix::parse(&["B"]).unwrap().projections();
        assert!(check_equisat(&blue, &square2(), SearchLimits::default()).unwrap().holds);

        let mut bad = blue.clone();
        bad.rows.red[0] = 1;
        let rep = check_equisat(&bad, &heptomino(), SearchLimits::default()).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.details["source_status"], json!("infeasible"));

        let rg = ColorMatrix::parse(&["RG", "GR"]).unwrap().projections();
        let rep = check_equisat(&rg, &l_tromino(), SearchLimits::default()).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert_eq!(rep.packings_examined, 1);

        assert_eq!(check_equisat(&rg, &single_cell(), SearchLimits::default()), Err(Error::BarTile));
    }
}
