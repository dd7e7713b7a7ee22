use std::collections::{BTreeSet, HashSet};

use num_rational::Rational64;
use proptest::prelude::*;

use tomo_core::packing::{projections, validate_packing};
use tomo_core::reduction::{certificate_for_tile, classify, lift_solution, project_solution, reduce, FrameMap};
use tomo_core::solver::{ryser_single_cell, solve_tptp, xi};
use tomo_core::tile::{catalog, catalog_non_bar};
use tomo_core::verify::{
    affinely_independent, affinely_independent_by_definition, affinely_independent_by_differences,
};
use tomo_core::{Cell, Color, ColorMatrix, GridDims, Mode, Packing, ProjectionPair, SearchLimits, Tile, TptpInstance,
    Transform, Vector2};

fn all_transforms() -> Vec<Transform> {
    (0..8u8)
        .map(|b| Transform::new(b & 1 != 0, b & 2 != 0, b & 4 != 0))
        .collect()
}

fn window(t: &Tile) -> impl Iterator<Item = Vector2> {
    let (h, w) = (t.height() as i64, t.width() as i64);
    (-h - 1..=h + 1).flat_map(move |i| (-w - 1..=w + 1).map(move |j| Vector2::new(i, j)))
}

fn brute_conflict(t: &Tile, v: Vector2) -> bool {
    let cells: HashSet<Cell> = t.cells().iter().copied().collect();
    t.translate(v).iter().any(|c| cells.contains(c))
}

#[test]
fn conflict_profile_matches_intersection() {
    for t in catalog(3, 3) {
        let profile = t.conflict_profile();
        for v in window(&t) {
            let want = brute_conflict(&t, v);
            assert_eq!(t.is_conflicting(v), want);
            assert_eq!(profile.contains(v), want);
            assert_eq!(t.is_conflicting(v.neg()), want, "negation symmetry");
            if v.di.unsigned_abs() as usize >= t.height() || v.dj.unsigned_abs() as usize >= t.width() {
                assert!(!want);
            }
        }
        assert!(profile.contains(Vector2::new(0, 0)));
    }
}

#[test]
fn non_bar_tiles_have_diagonal_conflict() {
    for t in catalog_non_bar(3, 3) {
        assert!(t.is_conflicting(Vector2::new(1, 1)) || t.is_conflicting(Vector2::new(-1, 1)), "{t:?}");
    }
}

#[test]
fn flips_act_on_conflict_vectors() {
    let single = [
        Transform::new(true, false, false),
        Transform::new(false, true, false),
        Transform::new(false, false, true),
    ];
    for t in catalog(3, 3) {
        for tr in single {
            let u = t.apply_transform(tr);
            for v in window(&u) {
                let back = match (tr.vflip, tr.hflip) {
                    (true, _) => Vector2::new(-v.di, v.dj),
                    (_, true) => Vector2::new(v.di, -v.dj),
                    _ => Vector2::new(v.dj, v.di),
                };
                assert_eq!(u.is_conflicting(v), t.is_conflicting(back), "{t:?} {tr} {v:?}");
            }
            assert_eq!(u.apply_transform(tr), t, "involution");
            assert_eq!(u.len(), t.len());
            if tr.transpose {
                assert_eq!((u.height(), u.width()), (t.width(), t.height()));
            } else {
                assert_eq!((u.height(), u.width()), (t.height(), t.width()));
            }
        }
    }
}

#[test]
fn classification_is_total_and_maximal() {
    let mut cases = BTreeSet::new();
    for t in catalog_non_bar(3, 3) {
        let cls = classify(&t).unwrap();
        assert!(cls.p > 0 && cls.q > 0 && cls.a <= cls.b);
        assert_eq!(cls.normalized, t.apply_transform(cls.transform));
        assert!(cls.normalized.is_conflicting(Vector2::new(-cls.p, cls.q)));
        for a in 1..cls.a {
            assert!(cls.normalized.is_conflicting(Vector2::new(a * cls.p, 0)));
        }
        assert!(!cls.normalized.is_conflicting(Vector2::new(cls.a * cls.p, 0)));
        for b in 1..cls.b {
            assert!(cls.normalized.is_conflicting(Vector2::new(0, b * cls.q)));
        }
        assert!(!cls.normalized.is_conflicting(Vector2::new(0, cls.b * cls.q)));
        cases.insert(cls.case);
    }
    assert_eq!(cases.len(), 4, "every case occurs in the 3x3 catalog");
}

#[test]
fn gadgets_are_valid_and_minimal() {
    for t in catalog_non_bar(3, 3) {
        let cert = certificate_for_tile(&t).unwrap();
        let g = &cert.gadget;
        let dims = g.block_dims();
        for c in Color::ALL {
            assert!(validate_packing(&cert.normalized, dims, g.packing(c)).is_ok());
            assert_eq!(projections(dims, g.packing(c)).r, g.rbar(c));
        }
        // shrinking either side drops some copy out of the block
        let all: Vec<Cell> = Color::ALL.iter().flat_map(|&c| g.packing(c).to_vec()).collect();
        let fits = |m, n| {
            let d = GridDims { m, n };
            all.iter().all(|&p| d.fits(&cert.normalized, p))
        };
        assert!(fits(g.k, g.l) && !fits(g.k - 1, g.l) && !fits(g.k, g.l - 1));
    }
}

#[test]
fn lift_is_sound_and_round_trips() {
    let matrices = ColorMatrix::all(2, 2);
    for t in catalog_non_bar(3, 3) {
        for mtx in &matrices {
            let inst = mtx.projections();
            let (out, cert) = reduce(&inst, &t).unwrap();
            let lifted = lift_solution(mtx, &cert).unwrap();
            assert!(lifted.validate(&t).is_ok(), "{t:?} {mtx:?}");
            assert_eq!(lifted.projections(), out.target);
            assert_eq!(&project_solution(&lifted, &cert).unwrap(), mtx);

            // total starts: each color count times the size of its block packing
            let want: u64 = Color::ALL
                .iter()
                .map(|&c| inst.rows.total(c) * cert.gadget.packing(c).len() as u64)
                .sum();
            assert_eq!(out.target.row_total(), want);
            assert_eq!(out.target.col_total(), want);
        }
    }
}

#[test]
fn requirement2_holds_on_catalog_sweep() {
    let instances: BTreeSet<_> = ColorMatrix::all(2, 2).iter().map(|m| m.projections()).collect();
    for t in catalog_non_bar(3, 3) {
        for inst in &instances {
            let (out, cert) = reduce(inst, &t).unwrap();
            let rep = tomo_core::verify::check_requirement2(&out, &cert, SearchLimits::default()).unwrap();
            assert!(rep.holds, "{t:?} {inst:?} {:?}", rep.counterexample);
        }
    }
}

#[test]
fn ryser_agrees_with_packing_solver() {
    let single = Tile::from_pairs(&[(0, 0)]).unwrap();
    for m in 1..=3usize {
        for n in 1..=3usize {
            let dims = GridDims::new(m, n).unwrap();
            for r in vectors(m, n as u64) {
                for s in vectors(n, m as u64) {
                    let inst = TptpInstance::new(single.clone(), dims, ProjectionPair { r: r.clone(), s: s.clone() })
                        .unwrap();
                    let solver = solve_tptp(&inst, Mode::Decide, SearchLimits::default()).is_feasible();
                    assert_eq!(ryser_single_cell(&r, &s).is_some(), solver, "{r:?} {s:?}");
                }
            }
        }
    }
}

fn vectors(len: usize, max: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=max).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Rank over the rationals by plain Gaussian elimination.
fn rational_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<Rational64>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| Rational64::from_integer(x)).collect())
        .collect();
    let width = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..width {
        let Some(p) = (rank..a.len()).find(|&r| a[r][col] != Rational64::from_integer(0)) else {
            continue;
        };
        a.swap(rank, p);
        let pivot = a[rank][col];
        for r in 0..a.len() {
            if r != rank {
                let f = a[r][col] / pivot;
                for c in 0..width {
                    let sub = f * a[rank][c];
                    a[r][c] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn vector_family() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=4, 1usize..=6).prop_flat_map(|(count, len)| {
        prop::collection::vec(prop::collection::vec(-3i64..=3, len), count)
    })
}

fn random_tile() -> impl Strategy<Value = Tile> {
    let tiles = catalog(3, 3);
    (0..tiles.len()).prop_map(move |i| tiles[i].clone())
}

proptest! {
    #[test]
    fn affine_tests_agree_with_rational_definition(vs in vector_family()) {
        // only the trivial combination with sum zero vanishes <=> the
        // (1, coords) columns have full column rank
        let mut system = vec![vec![1i64; vs.len()]];
        for coord in 0..vs[0].len() {
            system.push(vs.iter().map(|v| v[coord]).collect());
        }
        let oracle = rational_rank(&system) == vs.len();
        prop_assert_eq!(affinely_independent(&vs).unwrap(), oracle);
        prop_assert_eq!(affinely_independent_by_differences(&vs).unwrap(), oracle);
        prop_assert_eq!(affinely_independent_by_definition(&vs).unwrap(), oracle);
        prop_assert_eq!(tomo_core::verify::rank(&vs), rational_rank(&vs));
    }

    #[test]
    fn validation_matches_cell_disjointness(
        tile in random_tile(),
        m in 1usize..7,
        n in 1usize..7,
        raw in prop::collection::vec((0i64..7, 0i64..7), 0..6),
    ) {
        let dims = GridDims::new(m, n).unwrap();
        let positions: Vec<Cell> = raw.into_iter().map(Cell::from).collect::<BTreeSet<_>>().into_iter().collect();
        let in_grid = positions.iter().all(|&p| dims.fits(&tile, p));
        let mut seen = HashSet::new();
        let disjoint = positions.iter().all(|&p| {
            tile.translate(Vector2::new(p.row, p.col)).into_iter().all(|c| seen.insert(c))
        });
        prop_assert_eq!(validate_packing(&tile, dims, &positions).is_ok(), in_grid && disjoint);
    }

    #[test]
    fn projection_conservation(
        m in 1usize..8,
        n in 1usize..8,
        raw in prop::collection::vec((0i64..8, 0i64..8), 0..10),
        extra in (0i64..8, 0i64..8),
    ) {
        let dims = GridDims::new(m, n).unwrap();
        let positions: Vec<Cell> = raw
            .into_iter()
            .map(Cell::from)
            .filter(|c| (c.row as usize) < m && (c.col as usize) < n)
            .collect();
        let p = projections(dims, &positions);
        prop_assert_eq!(p.row_total(), positions.len() as u64);
        prop_assert_eq!(p.col_total(), positions.len() as u64);
        let extra = Cell::from(extra);
        if (extra.row as usize) < m && (extra.col as usize) < n {
            let mut more = positions.clone();
            more.push(extra);
            let q = projections(dims, &more);
            let mut want = p.clone();
            want.r[extra.row as usize] += 1;
            want.s[extra.col as usize] += 1;
            prop_assert_eq!(q, want);
        }
    }

    #[test]
    fn frame_map_is_a_bijection(
        tile in random_tile(),
        bits in 0u8..8,
        m in 3usize..9,
        n in 3usize..9,
        raw in prop::collection::vec((0i64..9, 0i64..9), 0..6),
        r in prop::collection::vec(0u64..3, 8),
        s in prop::collection::vec(0u64..3, 8),
    ) {
        let tr = Transform::new(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
        let dims = GridDims::new(m, n).unwrap();
        let positions: Vec<Cell> = raw.into_iter().map(Cell::from).filter(|&p| dims.fits(&tile, p)).collect();
        let packing = Packing::new(dims, positions);
        let mapped = packing.frame_map(tr, &tile);
        let image = tile.apply_transform(tr);
        prop_assert_eq!(mapped.frame_map(tr.inverse(), &image), packing.clone());
        prop_assert_eq!(packing.validate(&tile).is_ok(), mapped.validate(&image).is_ok());
        prop_assert_eq!(mapped.projections(), packing.projections().frame_map(tr, &tile));

        let proj = ProjectionPair { r: r[..m].to_vec(), s: s[..n].to_vec() };
        prop_assert_eq!(proj.frame_map(tr, &tile).frame_map(tr.inverse(), &image), proj);
    }

    #[test]
    fn witnesses_reproduce_targets_and_jobs_do_not_matter(
        tile in random_tile(),
        m in 2usize..7,
        n in 2usize..7,
        raw in prop::collection::vec((0i64..7, 0i64..7), 0..8),
    ) {
        let dims = GridDims::new(m, n).unwrap();
        // greedily keep a valid packing to get achievable projections
        let mut kept: Vec<Cell> = Vec::new();
        for p in raw.into_iter().map(Cell::from) {
            let mut trial = kept.clone();
            trial.push(p);
            trial.sort();
            trial.dedup();
            if validate_packing(&tile, dims, &trial).is_ok() {
                kept = trial;
            }
        }
        let inst = TptpInstance::new(tile.clone(), dims, projections(dims, &kept)).unwrap();
        let serial = solve_tptp(&inst, Mode::Enumerate, SearchLimits::default());
        let parallel = solve_tptp(&inst, Mode::Enumerate, SearchLimits::default().with_jobs(3));
        prop_assert!(serial.is_feasible());
        prop_assert_eq!(&serial.solutions, &parallel.solutions);
        let sols = serial.solutions.unwrap();
        prop_assert!(sols.iter().any(|p| p.positions() == kept.as_slice()));
        for p in &sols {
            prop_assert!(p.validate(&tile).is_ok());
            prop_assert_eq!(&p.projections(), &inst.target);
        }
        let count = solve_tptp(&inst, Mode::Count, SearchLimits::default()).count.unwrap();
        prop_assert_eq!(count, sols.len() as u64);

        // xi bounds every packing's share of I x J
        let rows: Vec<usize> = (0..m).step_by(2).collect();
        let cols: Vec<usize> = (0..n).filter(|j| j % 3 != 1).collect();
        let bound = xi(&tile, dims, &rows, &cols);
        for p in &sols {
            let inside = p.positions().iter()
                .filter(|c| rows.contains(&(c.row as usize)) && cols.contains(&(c.col as usize)))
                .count() as u64;
            prop_assert!(inside <= bound);
        }
    }
}

#[test]
fn transforms_compose_with_inverse() {
    for t in catalog(3, 3) {
        for tr in all_transforms() {
            assert_eq!(t.apply_transform(tr).apply_transform(tr.inverse()), t);
            for v in window(&t) {
                assert_eq!(tr.inverse().apply_vector(tr.apply_vector(v)), v);
                assert_eq!(t.apply_transform(tr).is_conflicting(tr.apply_vector(v)), t.is_conflicting(v));
            }
        }
    }
}
