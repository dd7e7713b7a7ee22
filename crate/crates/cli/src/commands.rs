use std::fmt::Write;

use serde::Serialize;
use serde_json::{json, Value};

use tomo_core::packing::{render as render_packing, PackingCheck};
use tomo_core::reduction::{certificate_for_tile, classify as classify_tile, reduce as reduce_instance};
use tomo_core::solver::{solve_3ctp, solve_tptp};
use tomo_core::tile::{catalog as tile_catalog, catalog_non_bar};
use tomo_core::verify::{check_equisat, check_requirement1, check_requirement2, check_ryser_lemma};
use tomo_core::{
    Color, ColorMatrix, Mode, Packing, SolveResult, Status, ThreeColorInstance, Tile, TptpInstance,
    VerificationReport, Vector2,
};

use crate::{
    parse_value, read_json, CatalogArgs, CheckCommand, CliError, CliResult, GlobalOpts, InstanceArg, Outcome,
    PackingArgs, ReduceArgs, TileArg, EXIT_LIMIT, EXIT_NO, EXIT_OK,
};

fn to_json(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("library types always serialize")
}

fn ok(json: Value, text: String) -> Outcome {
    Outcome { json, text, code: EXIT_OK }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn load_tile(path: &str) -> CliResult<Tile> {
    read_json(path)
}

fn load_packing(args: &PackingArgs) -> CliResult<(Tile, Packing)> {
    Ok((load_tile(&args.tile)?, read_json(&args.packing)?))
}

pub fn tile_info(args: &TileArg) -> CliResult<Outcome> {
    let t = load_tile(&args.tile)?;
    let json = json!({
        "tile": t,
        "size": t.len(),
        "height": t.height(),
        "width": t.width(),
        "bar": t.is_bar(),
        "conflicts": t.conflict_profile().len(),
    });
    let text = format!(
        "{}size {}  box {}x{}  bar {}  conflicts {}\n",
        t.picture(),
        t.len(),
        t.height(),
        t.width(),
        t.is_bar(),
        t.conflict_profile().len()
    );
    Ok(ok(json, text))
}

pub fn tile_conflicts(args: &TileArg) -> CliResult<Outcome> {
    let t = load_tile(&args.tile)?;
    let vectors = t.conflict_profile().vectors();
    let (h, w) = (t.height() as i64, t.width() as i64);
    let mut text = String::new();
    for di in -(h - 1)..h {
        for dj in -(w - 1)..w {
            text.push(match (di, dj) {
                (0, 0) => 'o',
                _ if t.is_conflicting(Vector2::new(di, dj)) => '#',
                _ => '.',
            });
        }
        text.push('\n');
    }
    Ok(ok(json!({ "tile": t, "vectors": vectors }), text))
}

pub fn classify(args: &TileArg) -> CliResult<Outcome> {
    let t = load_tile(&args.tile)?;
    let cls = classify_tile(&t)?;
    let json = json!({
        "case": cls.case,
        "p": cls.p,
        "q": cls.q,
        "a": cls.a,
        "b": cls.b,
        "transform": cls.transform,
        "normalized": cls.normalized,
    });
    let text = format!(
        "{} p={} q={} a={} b={} transform={}\n{}",
        cls.case,
        cls.p,
        cls.q,
        cls.a,
        cls.b,
        cls.transform,
        cls.normalized.picture()
    );
    Ok(ok(json, text))
}

pub fn gadget(args: &TileArg) -> CliResult<Outcome> {
    let t = load_tile(&args.tile)?;
    let cert = certificate_for_tile(&t)?;
    let g = &cert.gadget;
    let mut text = format!("{} block {}x{} transform={}\n", cert.case, g.k, g.l, cert.transform);
    for c in Color::ALL {
        writeln!(text, "\n{}:", c.as_char()).unwrap();
        text.push_str(&render_packing(&cert.normalized, g.block_dims(), g.packing(c)));
    }
    let json = json!({
        "case": cert.case,
        "transform": cert.transform,
        "normalized": cert.normalized,
        "gadget": g,
    });
    Ok(ok(json, text))
}

fn load_reduction(args: &ReduceArgs) -> CliResult<(ThreeColorInstance, Tile)> {
    Ok((read_json(&args.instance)?, load_tile(&args.tile)?))
}

pub fn reduce(args: &ReduceArgs) -> CliResult<Outcome> {
    let (src, t) = load_reduction(args)?;
    let (out, cert) = reduce_instance(&src, &t)?;
    let mut text = format!("{} {}x{}\nr: {}\ns: {}\n", cert.case, out.dims.m, out.dims.n, join(&out.target.r), join(&out.target.s));
    if let Some(reason) = &cert.infeasible_source {
        writeln!(text, "infeasible source: {reason}").unwrap();
    }
    Ok(ok(json!({ "instance": out, "certificate": cert }), text))
}

pub fn project(args: &PackingArgs) -> CliResult<Outcome> {
    let (t, packing) = load_packing(args)?;
    if let check @ (PackingCheck::OutOfGrid { .. } | PackingCheck::Overlap { .. }) = packing.validate(&t) {
        return Err(CliError::Input(format!("invalid packing: {}", to_json(check))));
    }
    let p = packing.projections();
    let text = format!("r: {}\ns: {}\n", join(&p.r), join(&p.s));
    Ok(ok(to_json(p), text))
}

pub fn verify_packing(args: &PackingArgs) -> CliResult<Outcome> {
    let (t, packing) = load_packing(args)?;
    let check = packing.validate(&t);
    let code = if check.is_ok() { EXIT_OK } else { EXIT_NO };
    let text = match &check {
        PackingCheck::Ok => "ok\n".to_string(),
        PackingCheck::OutOfGrid { position } => format!("copy at {:?} leaves the grid\n", (position.row, position.col)),
        PackingCheck::Overlap { first, second, .. } => format!(
            "copies at {:?} and {:?} overlap\n",
            (first.row, first.col),
            (second.row, second.col)
        ),
    };
    Ok(Outcome { json: to_json(&check), text, code })
}

pub fn render(args: &PackingArgs) -> CliResult<Outcome> {
    let (t, packing) = load_packing(args)?;
    let text = render_packing(&t, packing.dims, packing.positions());
    let lines: Vec<&str> = text.lines().collect();
    Ok(ok(json!({ "lines": lines }), text.clone()))
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Feasible => EXIT_OK,
        Status::Infeasible => EXIT_NO,
        Status::LimitExceeded => EXIT_LIMIT,
    }
}

fn solve_text<W>(res: &SolveResult<W>, show: impl Fn(&W) -> String) -> String {
    let mut text = format!("{} ({} nodes)\n", res.status, res.stats.nodes);
    if let Some(reason) = &res.reason {
        writeln!(text, "{reason}").unwrap();
    }
    if let Some(count) = res.count {
        writeln!(text, "count {count}").unwrap();
    }
    if let Some(w) = &res.witness {
        text.push_str(&show(w));
    }
    for w in res.solutions.iter().flatten() {
        text.push('\n');
        text.push_str(&show(w));
    }
    text
}

pub fn solve(args: &InstanceArg, mode: &str, opts: &GlobalOpts) -> CliResult<Outcome> {
    let mode: Mode = mode.parse().map_err(|e: String| CliError::Input(e))?;
    let limits = opts.limits()?;
    let raw: Value = read_json(&args.instance)?;
    if raw.get("tile").is_some() {
        let inst: TptpInstance = parse_value(&args.instance, raw)?;
        let res = solve_tptp(&inst, mode, limits);
        let text = solve_text(&res, |p| render_packing(&inst.tile, p.dims, p.positions()));
        Ok(Outcome { json: to_json(&res), text, code: status_code(res.status) })
    } else {
        let inst: ThreeColorInstance = parse_value(&args.instance, raw)?;
        let res = solve_3ctp(&inst, mode, limits);
        let text = solve_text(&res, |m: &ColorMatrix| {
            let rows: Vec<String> = m.clone().into();
            rows.join("\n") + "\n"
        });
        Ok(Outcome { json: to_json(&res), text, code: status_code(res.status) })
    }
}

fn report_outcome(report: VerificationReport) -> Outcome {
    let (code, verdict) = if report.holds {
        (EXIT_OK, "holds")
    } else if report.inconclusive {
        (EXIT_LIMIT, "inconclusive")
    } else {
        (EXIT_NO, "does not hold")
    };
    let mut text = format!("{verdict}\n");
    if let Some(ce) = &report.counterexample {
        writeln!(text, "counterexample: {ce}").unwrap();
    }
    if report.packings_examined > 0 {
        writeln!(text, "packings examined: {}", report.packings_examined).unwrap();
    }
    for (k, v) in &report.signature_counts {
        writeln!(text, "  {k}: {v}").unwrap();
    }
    for (k, v) in &report.details {
        writeln!(text, "{k}: {v}").unwrap();
    }
    Outcome { json: to_json(&report), text, code }
}

pub fn check(cmd: CheckCommand, opts: &GlobalOpts) -> CliResult<Outcome> {
    let limits = opts.limits()?;
    match cmd {
        CheckCommand::Requirement1(a) => {
            let t = load_tile(&a.tile)?;
            let cert = certificate_for_tile(&t)?;
            let holds = check_requirement1(&cert.gadget);
            let json = json!({
                "holds": holds,
                "case": cert.case,
                "row_proj": cert.gadget.row_proj,
                "col_proj": cert.gadget.col_proj,
            });
            let text = format!("{}\n", if holds { "holds" } else { "does not hold" });
            Ok(Outcome { json, text, code: if holds { EXIT_OK } else { EXIT_NO } })
        }
        CheckCommand::Requirement2(a) => {
            let (src, t) = load_reduction(&a)?;
            let (out, cert) = reduce_instance(&src, &t)?;
            if let Some(reason) = &cert.infeasible_source {
                return Err(CliError::Input(format!("source instance is trivially infeasible: {reason}")));
            }
            Ok(report_outcome(check_requirement2(&out, &cert, limits)?))
        }
        CheckCommand::RyserLemma(a) => {
            let inst: TptpInstance = read_json(&a.instance)?;
            Ok(report_outcome(check_ryser_lemma(&inst, &a.rows, &a.cols, limits)?))
        }
        CheckCommand::Equisat(a) => {
            let (src, t) = load_reduction(&a)?;
            Ok(report_outcome(check_equisat(&src, &t, limits)?))
        }
    }
}

pub fn catalog(args: &CatalogArgs) -> Outcome {
    let tiles = if args.bars {
        tile_catalog(args.max_h, args.max_w)
    } else {
        catalog_non_bar(args.max_h, args.max_w)
    };
    let mut entries = Vec::new();
    let mut text = String::new();
    for t in &tiles {
        let case = classify_tile(t).ok().map(|c| c.case);
        entries.push(json!({ "tile": t, "size": t.len(), "case": case }));
        let label = case.map_or("bar".to_string(), |c| c.to_string());
        writeln!(text, "{} cells, {label}", t.len()).unwrap();
        text.push_str(&t.picture());
        text.push('\n');
    }
    ok(json!({ "count": tiles.len(), "tiles": entries }), text)
}
