//! One function per subcommand, each producing the text of its artifact.

use serde_json::{json, Map, Value};

use rivalfit_core::discrete::{self, DiscreteGame, Rational};
use rivalfit_core::mc::McModel;
use rivalfit_core::solver::{self, MaxminSolution, OverlapRule, SearchConfig, SweepRow};
use rivalfit_core::{cubature, reward, FeatureRegime, SymmetricStrategyPair};

use crate::cli::{
    blame, CliError, ExampleArgs, Format, HermiteArgs, MaxminArgs, McArgs, RegimeArgs, RewardArgs,
    SweepArgs,
};
use crate::format::{json_number, sig, Csv, FULL_DIGITS};
use crate::parallel::{mc_parallel, ordered_map};

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub body: String,
    /// Companion metadata, written next to a file artifact.
    pub meta: Option<Value>,
    /// Messages for standard error.
    pub warnings: Vec<String>,
}

impl Artifact {
    fn plain(body: String) -> Self {
        Self {
            body,
            meta: None,
            warnings: Vec::new(),
        }
    }
}

/// Settings shared by all commands.
#[derive(Debug, Clone, Copy)]
pub struct Output {
    pub format: Format,
    pub digits: usize,
    pub seed: Option<u64>,
    pub workers: usize,
}

impl Output {
    fn num(&self, x: f64) -> Value {
        json_number(x, self.digits)
    }

    fn text(&self, x: f64) -> String {
        sig(x, self.digits)
    }
}

fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are finite or strings");
    s.push('\n');
    s
}

fn regime(args: &RegimeArgs) -> Result<FeatureRegime, CliError> {
    FeatureRegime::new(args.g1, args.g2, args.g12).map_err(blame("--g1/--g2/--g12"))
}

fn strategy(a: [f64; 4]) -> Result<SymmetricStrategyPair, CliError> {
    let s = SymmetricStrategyPair::new(a[0], a[1], a[2], a[3]);
    s.validate().map_err(blame("--a"))?;
    Ok(s)
}

fn search_config(cfg: SearchConfig) -> Result<SearchConfig, CliError> {
    cfg.validate()
        .map_err(blame("--box/--coarse/--refine/--shrink/--order"))?;
    Ok(cfg)
}

pub fn reward(args: &RewardArgs, out: Output) -> Result<Artifact, CliError> {
    let regime = regime(&args.regime)?;
    let strat = strategy(args.a)?;
    let mut est =
        reward::reward_symmetric(&regime, &strat, args.order).map_err(blame("--order"))?;
    if args.absolute {
        let n = args.n.expect("clap enforces --n with --absolute");
        est = est.absolute(n as f64);
    }
    let body = match out.format {
        Format::Json => render_json(&json!({
            "value": out.num(est.value),
            "method": est.method.as_str(),
            "order": est.order_or_samples,
            "error_bound": out.num(est.error_bound),
            "scale_applied": out.num(est.scale_applied),
        })),
        Format::Csv => {
            let mut csv = Csv::new(["value", "order", "error_bound", "scale_applied"]);
            csv.push(vec![
                out.text(est.value),
                est.order_or_samples.to_string(),
                out.text(est.error_bound),
                out.text(est.scale_applied),
            ]);
            csv.render()
        }
    };
    Ok(Artifact::plain(body))
}

pub const DEFAULT_SEED: u64 = 0;

pub fn mc(args: &McArgs, out: Output) -> Result<Artifact, CliError> {
    let regime = regime(&args.regime)?;
    let strat = strategy(args.a)?;
    let model = McModel::from_regime(&regime, &strat, args.n).map_err(blame("--n"))?;
    let seed = out.seed.unwrap_or(DEFAULT_SEED);
    let report =
        mc_parallel(&model, args.samples, seed, out.workers).map_err(blame("--samples"))?;
    let scale = if args.absolute {
        (args.n as f64).sqrt()
    } else {
        1.0
    };
    let parts = [("a", report.a), ("b", report.b), ("total", report.total)];
    let body = match out.format {
        Format::Json => {
            let mut obj = Map::new();
            for (name, est) in parts {
                obj.insert(
                    name.into(),
                    json!({ "value": out.num(est.value * scale), "std_error": out.num(est.error_bound * scale) }),
                );
            }
            obj.insert("samples".into(), json!(report.a.order_or_samples));
            obj.insert("seed".into(), json!(seed));
            obj.insert("streams".into(), json!(report.streams));
            obj.insert("n".into(), json!(args.n));
            obj.insert("scale_applied".into(), out.num(scale));
            obj.insert(
                "partition_violations".into(),
                json!(report.partition_violations),
            );
            render_json(&Value::Object(obj))
        }
        Format::Csv => {
            let mut csv = Csv::new([
                "a", "a_se", "b", "b_se", "total", "total_se", "samples", "seed", "streams",
            ]);
            let mut row = Vec::new();
            for (_, est) in parts {
                row.push(out.text(est.value * scale));
                row.push(out.text(est.error_bound * scale));
            }
            row.extend([
                report.a.order_or_samples.to_string(),
                seed.to_string(),
                report.streams.to_string(),
            ]);
            csv.push(row);
            csv.render()
        }
    };
    let mut artifact = Artifact::plain(body);
    if report.partition_violations > 0 {
        artifact.warnings.push(format!(
            "{} draws broke r1 + r2 = |y|",
            report.partition_violations
        ));
    }
    Ok(artifact)
}

const SWEEP_HEADER: [&str; 12] = [
    "g1",
    "g2",
    "g12",
    "u_theoretical",
    "u_star",
    "gain",
    "a11",
    "a12",
    "a21",
    "a22",
    "evals",
    "gap",
];

pub const SKIP: &str = "skip";

fn solution_fields(s: &MaxminSolution, out: &Output) -> Vec<String> {
    vec![
        out.text(s.u_theoretical),
        out.text(s.u_star),
        out.text(s.gain),
        out.text(s.a1_star[0]),
        out.text(s.a1_star[1]),
        out.text(s.a2_response[0]),
        out.text(s.a2_response[1]),
        s.diagnostics.evals.to_string(),
        out.text(s.diagnostics.cubature_gap),
    ]
}

fn solution_json(s: &MaxminSolution, out: &Output) -> Value {
    json!({
        "u_theoretical": out.num(s.u_theoretical),
        "u_star": out.num(s.u_star),
        "gain": out.num(s.gain),
        "a1_star": [out.num(s.a1_star[0]), out.num(s.a1_star[1])],
        "a2_response": [out.num(s.a2_response[0]), out.num(s.a2_response[1])],
        "diagnostics": {
            "evals": s.diagnostics.evals,
            "outer_spacing": out.num(s.diagnostics.outer_spacing),
            "inner_spacing": out.num(s.diagnostics.inner_spacing),
            "cubature_gap": out.num(s.diagnostics.cubature_gap),
            "on_boundary": s.diagnostics.on_boundary,
        },
    })
}

fn boundary_warning(g1: f64, g2: f64, s: &MaxminSolution) -> Option<String> {
    s.diagnostics.on_boundary.then(|| {
        format!("warning: g1={g1} g2={g2}: optimum touches the search box; the true value may lie outside it")
    })
}

fn search_meta(cfg: &SearchConfig) -> Value {
    json!({
        "box": [cfg.bounds.lo, cfg.bounds.hi],
        "coarse": cfg.coarse_points,
        "refine": cfg.refine_rounds,
        "shrink": cfg.refine_shrink,
        "order": cfg.cubature_order,
    })
}

pub fn maxmin(args: &MaxminArgs, out: Output) -> Result<Artifact, CliError> {
    let regime = regime(&args.regime)?;
    let cfg = search_config(args.search.config())?;
    let s = solver::maxmin(&regime, &cfg).map_err(CliError::Numerical)?;
    let (g1, g2, g12) = (regime.g1(), regime.g2(), regime.g12());
    let body = match out.format {
        Format::Json => {
            let mut v = solution_json(&s, &out);
            let obj = v.as_object_mut().expect("object");
            obj.insert("g1".into(), out.num(g1));
            obj.insert("g2".into(), out.num(g2));
            obj.insert("g12".into(), out.num(g12));
            obj.insert("search".into(), search_meta(&cfg));
            render_json(&v)
        }
        Format::Csv => {
            let mut csv = Csv::new(SWEEP_HEADER);
            let mut row = vec![out.text(g1), out.text(g2), out.text(g12)];
            row.extend(solution_fields(&s, &out));
            csv.push(row);
            csv.render()
        }
    };
    let mut artifact = Artifact::plain(body);
    artifact.warnings.extend(boundary_warning(g1, g2, &s));
    Ok(artifact)
}

/// Runs every cell of the sweep, `g1`-major, on `workers` threads.
pub fn sweep_rows(
    g1s: &[f64],
    g2s: &[f64],
    rule: OverlapRule,
    cfg: &SearchConfig,
    workers: usize,
) -> rivalfit_core::Result<Vec<SweepRow>> {
    cfg.validate()?;
    let cells: Vec<(f64, f64)> = g1s
        .iter()
        .flat_map(|&g1| g2s.iter().map(move |&g2| (g1, g2)))
        .collect();
    ordered_map(&cells, workers, |&(g1, g2)| {
        solver::sweep_cell(g1, g2, rule, cfg)
    })
    .into_iter()
    .collect()
}

pub fn sweep_csv(rows: &[SweepRow], out: &Output) -> String {
    let mut csv = Csv::new(SWEEP_HEADER);
    for r in rows {
        let mut row = vec![out.text(r.g1), out.text(r.g2), out.text(r.g12)];
        match &r.solution {
            Some(s) => row.extend(solution_fields(s, out)),
            None => row.extend(std::iter::repeat_n(
                SKIP.to_string(),
                SWEEP_HEADER.len() - 3,
            )),
        }
        csv.push(row);
    }
    csv.render()
}

pub fn sweep(args: &SweepArgs, out: Output) -> Result<Artifact, CliError> {
    let (g1s, g2s) = (&args.g1.0, &args.g2.0);
    for (flag, grid) in [("--g1", g1s), ("--g2", g2s)] {
        if let Some(g) = grid.iter().find(|&&g| !(0.0..=1.0).contains(&g)) {
            return Err(CliError::Flag {
                flag,
                message: format!("{g} is outside [0, 1]"),
            });
        }
    }
    let cfg = search_config(args.search.config())?;
    let rows = sweep_rows(g1s, g2s, args.g12, &cfg, out.workers).map_err(CliError::Numerical)?;
    let body = match out.format {
        Format::Csv => sweep_csv(&rows, &out),
        Format::Json => render_json(&Value::Array(
            rows.iter()
                .map(|r| {
                    let mut v = match &r.solution {
                        Some(s) => solution_json(s, &out),
                        None => json!({ "skip": true }),
                    };
                    let obj = v.as_object_mut().expect("object");
                    obj.insert("g1".into(), out.num(r.g1));
                    obj.insert("g2".into(), out.num(r.g2));
                    obj.insert("g12".into(), out.num(r.g12));
                    v
                })
                .collect(),
        )),
    };
    let solved: Vec<&MaxminSolution> = rows.iter().filter_map(|r| r.solution.as_ref()).collect();
    let overlap = match args.g12 {
        OverlapRule::Product => json!("product"),
        OverlapRule::Fixed(v) => json!(v),
    };
    let meta = json!({
        "command": "sweep",
        "version": env!("CARGO_PKG_VERSION"),
        "g1": g1s.iter().map(|&g| out.num(g)).collect::<Vec<_>>(),
        "g2": g2s.iter().map(|&g| out.num(g)).collect::<Vec<_>>(),
        "g12": overlap,
        "search": search_meta(&cfg),
        "cubature_order": cfg.cubature_order,
        "seed": Value::Null,
        "cells": rows.len(),
        "skipped": rows.len() - solved.len(),
        "boundary_cells": solved.iter().filter(|s| s.diagnostics.on_boundary).count(),
        "magnification_fraction": out.num(solver::magnification_fraction(&rows)),
    });
    let warnings = rows
        .iter()
        .filter_map(|r| {
            r.solution
                .as_ref()
                .and_then(|s| boundary_warning(r.g1, r.g2, s))
        })
        .collect();
    Ok(Artifact {
        body,
        meta: Some(meta),
        warnings,
    })
}

fn ratio_text(r: Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn spread<const N: usize>(flag: &'static str, v: &[Rational]) -> Result<[Rational; N], CliError> {
    match v.len() {
        1 => Ok([v[0]; N]),
        n if n == N => Ok(v.try_into().expect("length checked")),
        n => Err(CliError::Flag {
            flag,
            message: format!("expected 1 or {N} values, got {n}"),
        }),
    }
}

pub fn example(args: &ExampleArgs, out: Output) -> Result<Artifact, CliError> {
    let num = |r: Rational| out.num(discrete::to_f64(r));
    if args.maxmin {
        let r = solver::discrete_maxmin_equal(args.lo, args.hi, args.step)
            .map_err(blame("--step/--lo/--hi"))?;
        let body = render_json(&json!({
            "value": num(r.value),
            "value_exact": ratio_text(r.value),
            "alpha": num(r.alpha),
            "alpha_last": num(r.alpha_last),
            "maximizers": r.maximizers,
            "beta_response": num(r.beta_response),
            "baseline": num(r.baseline),
            "gain": out.num(r.gain),
            "evals": r.evals,
        }));
        return Ok(Artifact::plain(body));
    }
    let alpha = spread::<2>("--alpha", &args.alpha.0)?;
    let beta = spread::<3>("--beta", &args.beta.0)?;
    let game = DiscreteGame::four_feature_example(alpha, beta);
    let e = discrete::enumerate_discrete(&game).map_err(CliError::Numerical)?;
    if args.table {
        let mut csv = Csv::new(["pattern", "e1", "e2", "y", "r1"]);
        for row in &e.rows {
            let pattern: String = row.pattern.iter().map(|v| v.to_string()).collect();
            csv.push(vec![
                pattern,
                out.text(discrete::to_f64(row.e1)),
                out.text(discrete::to_f64(row.e2)),
                row.y.to_string(),
                row.r1.to_string(),
            ]);
        }
        return Ok(Artifact::plain(csv.render()));
    }
    let body = match out.format {
        Format::Json => render_json(&json!({
            "r1": num(e.r1),
            "r2": num(e.r2),
            "total": num(e.total()),
            "r1_exact": ratio_text(e.r1),
            "r2_exact": ratio_text(e.r2),
        })),
        Format::Csv => {
            let mut csv = Csv::new(["r1", "r2", "total"]);
            csv.push(vec![
                out.text(discrete::to_f64(e.r1)),
                out.text(discrete::to_f64(e.r2)),
                out.text(discrete::to_f64(e.total())),
            ]);
            csv.render()
        }
    };
    Ok(Artifact::plain(body))
}

pub fn hermite(args: &HermiteArgs) -> Result<Artifact, CliError> {
    let rule = cubature::hermite_rule(args.order).map_err(blame("--order"))?;
    let mut csv = Csv::new(["index", "node", "weight"]);
    for (i, (x, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        csv.push(vec![
            i.to_string(),
            sig(*x, FULL_DIGITS),
            sig(*w, FULL_DIGITS),
        ]);
    }
    Ok(Artifact::plain(csv.render()))
}
