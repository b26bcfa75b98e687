use std::fmt::Write as _;

use anyhow::{anyhow, Context, Result};
use mspsolve::certify::{certify_newton, CertifyOptions};
use mspsolve::scalar::{parse_rational, ratio_string, rational_to_f64};
use mspsolve::{
    clean, cmin_mbits, dnm_solve, kleene_solve, newton_solve, quadratize, random_ppda, random_termination_system,
    valid_bits, Arith, Error, IterationTrace, Method, Msp, NumVec, Rational, Scalar, SchemeKind, SolveOptions,
    StopRule, SystemKind, UpperChoice,
};
use serde_json::{json, Value};

use crate::input::{load, Loaded};
use crate::{
    CertifyArgs, ConvertArgs, ConvertTarget, EmitArg, GenerateArgs, InfoArgs, ModeArg, OutputArg, SchemeArg, SolveArgs,
};

/// 2 input errors, 3 solver errors, 4 suspected infeasibility, 5 not certifiable.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Syntax { .. }
            | Error::NegativeCoefficient { .. }
            | Error::UndefinedVariable { .. }
            | Error::DuplicateVariable(_)
            | Error::EmptySystem
            | Error::ProbabilitySumViolation { .. }
            | Error::RhsTooLong { .. }
            | Error::InvalidBackButton(_)
            | Error::DimensionMismatch { .. }
            | Error::ExactModeRequired,
        ) => 2,
        Some(Error::InfeasibleSuspected { .. }) => 4,
        Some(Error::NotCertifiable { .. } | Error::NotStronglyConnected) => 5,
        Some(_) => 3,
        None if e.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 3,
    }
}

fn note(text: impl AsRef<str>) {
    eprintln!("note: {}", text.as_ref());
}

fn load_with_notes(input: &crate::InputArgs) -> Result<Msp> {
    let Loaded { msp, notes } = load(input)?;
    notes.iter().for_each(note);
    Ok(msp)
}

fn kind_label(kind: SystemKind) -> &'static str {
    match kind {
        SystemKind::General => "general",
        SystemKind::Termination { strict: false } => "pPDA termination system",
        SystemKind::Termination { strict: true } => "strict pPDA termination system",
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn info(args: &InfoArgs) -> Result<String> {
    let f = load_with_notes(&args.input)?;
    let dag = f.scc_dag();
    let (cmin, m) = cmin_mbits(&f);
    let degree = f.equations().iter().map(|p| p.degree()).max().unwrap_or(0);
    let names = |vars: &[usize]| vars.iter().map(|&v| f.names()[v].clone()).collect::<Vec<_>>();

    if args.output == OutputArg::Json {
        let sccs: Vec<Value> = dag
            .sccs
            .iter()
            .enumerate()
            .map(|(s, vars)| json!({ "depth": dag.depth[s], "variables": names(vars) }))
            .collect();
        let v = json!({
            "variables": f.names(),
            "kind": kind_label(f.kind()),
            "clean": f.is_clean(),
            "quadratic": f.is_quadratic(),
            "degree": degree,
            "strongly_connected": f.is_strongly_connected(),
            "sccs": sccs,
            "height": dag.height,
            "width": dag.width,
            "cmin": ratio_string(&cmin),
            "m": m,
        });
        return Ok(format!("{}\n", serde_json::to_string_pretty(&v)?));
    }

    let mut out = String::new();
    writeln!(out, "variables: {} ({})", f.dim(), f.names().join(", "))?;
    writeln!(out, "kind: {}", kind_label(f.kind()))?;
    writeln!(out, "clean: {}", yes_no(f.is_clean()))?;
    writeln!(out, "quadratic: {} (degree {degree})", yes_no(f.is_quadratic()))?;
    writeln!(out, "strongly connected: {}", yes_no(f.is_strongly_connected()))?;
    writeln!(out, "sccs: {}", dag.sccs.len())?;
    for t in 0..=dag.height {
        for s in dag.comp(t) {
            writeln!(out, "  depth {t}: {{{}}}", names(&dag.sccs[s]).join(", "))?;
        }
    }
    writeln!(out, "height h: {}", dag.height)?;
    writeln!(out, "width w: {}", dag.width)?;
    writeln!(out, "cmin: {}", ratio_string(&cmin))?;
    writeln!(out, "m: {m}")?;
    Ok(out)
}

fn iterate_bits(text: &str) -> Result<Option<u64>> {
    if text == "none" {
        return Ok(None);
    }
    let bits: u64 = text
        .parse()
        .map_err(|_| anyhow!("--iterate-bits expects a positive integer or `none`"))?;
    if bits == 0 {
        return Err(anyhow!("--iterate-bits must be positive"));
    }
    Ok(Some(bits))
}

pub fn solve(args: &SolveArgs) -> Result<String> {
    let original = load_with_notes(&args.input)?;
    let f = if args.scheme == SchemeArg::Dnm && !original.is_quadratic() {
        note("the decomposed Newton method needs a quadratic system; quadratizing first");
        quadratize(&original).msp
    } else {
        original.clone()
    };
    let stop = match (args.max_iterations, args.residual_eps) {
        (_, Some(eps)) => StopRule::ResidualBelow(eps),
        (Some(k), None) => StopRule::MaxIterations(k),
        (None, None) => StopRule::MaxIterations(20),
    };
    let opts = SolveOptions {
        arith: Arith {
            pivot_tolerance: args.pivot_tolerance,
            float_bits: args.float_precision,
            iterate_bits: iterate_bits(&args.iterate_bits)?,
            ..Arith::default()
        },
        stop,
        parallel_sccs: args.parallel_sccs,
        early_exit: args.early_exit,
        ..SolveOptions::default()
    };
    let report = match args.mode {
        ModeArg::Exact => run_solve::<Rational>(&f, original.dim(), args, &opts)?,
        ModeArg::Float => run_solve::<f64>(&f, original.dim(), args, &opts)?,
    };
    render_solve(&f, original.dim(), args, &report)
}

struct SolveReport {
    scheme: SchemeKind,
    mode: &'static str,
    steps: u64,
    total_newton_steps: u64,
    residual: f64,
    iterate: Vec<(f64, Value)>,
    per_scc: Vec<(usize, Vec<usize>, u64)>,
    empirical_bits: Option<Option<u64>>,
    trace: Vec<(u64, f64)>,
}

fn run_solve<T: Scalar>(f: &Msp, shown: usize, args: &SolveArgs, opts: &SolveOptions) -> Result<SolveReport> {
    let trace: IterationTrace<T> = match args.scheme {
        SchemeArg::Kleene => kleene_solve(f, opts)?,
        SchemeArg::Newton => newton_solve(f, opts)?,
        SchemeArg::Dnm => dnm_solve(f, args.j, opts)?,
    };
    let exact = T::MODE == mspsolve::Mode::Exact;
    let iterate = trace
        .last()
        .iter()
        .take(shown)
        .map(|v| {
            let shown = if exact {
                Value::String(ratio_string(&v.to_rational().expect("exact values are finite")))
            } else {
                json!(v.to_f64())
            };
            (v.to_f64(), shown)
        })
        .collect();
    let dag = f.scc_dag();
    let per_scc = trace
        .per_scc_steps
        .iter()
        .enumerate()
        .map(|(s, &steps)| (dag.depth[s], dag.sccs[s].clone(), steps))
        .collect();

    // DNM carries no certificate; estimate correct bits against a longer
    // whole-system Newton run instead.
    let empirical_bits = if args.scheme == SchemeArg::Dnm {
        let reference = newton_solve::<T>(f, &SolveOptions::max_iterations(trace.total_newton_steps + 20))?;
        Some(empirical_valid_bits(trace.last(), reference.last()))
    } else {
        None
    };
    Ok(SolveReport {
        scheme: trace.scheme,
        mode: T::MODE.as_str(),
        steps: trace.iterations(),
        total_newton_steps: trace.total_newton_steps,
        residual: trace.last_residual().max_norm_f64(),
        iterate,
        per_scc,
        empirical_bits,
        trace: trace.residuals.iter().map(|(k, r)| (*k, r.max_norm_f64())).collect(),
    })
}

fn empirical_valid_bits<T: Scalar>(nu: &NumVec<T>, reference: &NumVec<T>) -> Option<u64> {
    let to_exact = |v: &NumVec<T>| NumVec(v.iter().map(|x| x.to_rational().expect("finite")).collect::<Vec<_>>());
    valid_bits(&to_exact(nu), &to_exact(reference))
}

fn render_solve(f: &Msp, shown: usize, args: &SolveArgs, r: &SolveReport) -> Result<String> {
    let names = &f.names()[..shown];
    if args.output == OutputArg::Json {
        let iterate: serde_json::Map<String, Value> =
            names.iter().cloned().zip(r.iterate.iter().map(|(_, v)| v.clone())).collect();
        let per_scc: Vec<Value> = r
            .per_scc
            .iter()
            .map(|(depth, vars, steps)| {
                json!({
                    "depth": depth,
                    "variables": vars.iter().map(|&v| f.names()[v].clone()).collect::<Vec<_>>(),
                    "steps": steps,
                })
            })
            .collect();
        let v = json!({
            "scheme": r.scheme.as_str(),
            "mode": r.mode,
            "iterations": r.steps,
            "total_newton_steps": r.total_newton_steps,
            "residual_max_norm": r.residual,
            "iterate": iterate,
            "per_scc_steps": per_scc,
            "empirical_valid_bits": r.empirical_bits.map(|b| b.map_or(json!("exact"), |b| json!(b))),
            "trace": r.trace.iter().map(|(k, res)| json!({"step": k, "residual_max_norm": res})).collect::<Vec<_>>(),
        });
        return Ok(format!("{}\n", serde_json::to_string_pretty(&v)?));
    }
    let mut out = String::new();
    writeln!(out, "scheme: {} ({} arithmetic)", r.scheme.as_str(), r.mode)?;
    match r.scheme {
        SchemeKind::Kleene => writeln!(out, "iterations: {}", r.steps)?,
        _ => writeln!(out, "newton steps: {}", r.total_newton_steps)?,
    }
    writeln!(out, "residual max-norm: {:e}", r.residual)?;
    if !r.per_scc.is_empty() {
        writeln!(out, "steps per scc:")?;
        let mut rows = r.per_scc.clone();
        rows.sort_by_key(|(depth, vars, _)| (std::cmp::Reverse(*depth), vars[0]));
        for (depth, vars, steps) in rows {
            let vars: Vec<&str> = vars.iter().map(|&v| f.names()[v].as_str()).collect();
            writeln!(out, "  depth {depth} {{{}}}: {steps}", vars.join(", "))?;
        }
    }
    if let Some(bits) = r.empirical_bits {
        let bits = bits.map_or("all".to_string(), |b| b.to_string());
        writeln!(out, "empirical valid bits (not certified): {bits}")?;
    }
    for (name, (approx, _)) in names.iter().zip(&r.iterate) {
        writeln!(out, "{name} = {approx}")?;
    }
    Ok(out)
}

fn parse_upper(text: &str, dim: usize) -> Result<UpperChoice> {
    Ok(match text {
        "one" => UpperChoice::One,
        "none" => UpperChoice::None,
        "auto" => UpperChoice::Auto,
        list => {
            let values = list
                .split(',')
                .map(|s| parse_rational(s).ok_or_else(|| anyhow!("invalid number `{s}` in --upper-bound")))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: values.len(),
                }
                .into());
            }
            UpperChoice::Vector(NumVec(values))
        }
    })
}

pub fn certify(args: &CertifyArgs) -> Result<String> {
    if args.mode == ModeArg::Float {
        return Err(Error::ExactModeRequired.into());
    }
    let mut f = load_with_notes(&args.input)?;
    if !f.is_quadratic() {
        note("quadratizing the system; the certificate refers to the quadratic system");
        f = quadratize(&f).msp;
    }
    if !f.is_strongly_connected() {
        return Err(anyhow::Error::new(Error::NotStronglyConnected).context(
            "certificates cover strongly connected systems only; use `solve --scheme dnm` for an uncertified estimate",
        ));
    }
    let method = Method::parse(&args.method).expect("restricted by clap");
    let upper = match &args.upper_bound {
        Some(text) => parse_upper(text, f.dim())?,
        None => UpperChoice::default_for(&f),
    };
    let mut opts = CertifyOptions::new(method, upper);
    opts.iterations = args.iterations;
    opts.target_bits = match (args.iterations, args.target_bits) {
        (None, None) => Some(8),
        (_, t) => t,
    };
    opts.arith.iterate_bits = iterate_bits(&args.iterate_bits)?;

    let (cert, _) = certify_newton(&f, &opts).context("certification failed")?;
    if cert.method != cert.requested {
        note(format!(
            "the cone vector could not be verified; used the {} threshold instead",
            cert.method
        ));
    }
    let verdict = args
        .prove_below_one
        .then(|| cert.enclosure.iter().all(|(_, hi)| hi < &Rational::from_integer(1.into())));
    let verdict_line = verdict.map(|v| format!("below one: {}", if v { "YES" } else { "NO" }));

    if args.output == OutputArg::Json {
        if let Some(line) = &verdict_line {
            eprintln!("{line}");
        }
        return Ok(format!("{}\n", serde_json::to_string_pretty(&cert.to_json())?));
    }
    let mut out = String::new();
    writeln!(out, "method: {}", cert.method)?;
    writeln!(out, "threshold k: {:.6} (ceil {})", rational_to_f64(&cert.value), cert.value.ceil())?;
    writeln!(out, "cmin: {}  m: {}", ratio_string(&cert.cmin), cert.m)?;
    writeln!(out, "newton steps: {}", cert.iterations)?;
    writeln!(out, "certified valid bits: {}", cert.bits)?;
    for (name, (lo, hi)) in cert.names.iter().zip(&cert.enclosure) {
        writeln!(out, "{name} in [{}, {}]", rational_to_f64(lo), rational_to_f64(hi))?;
    }
    if let Some(line) = verdict_line {
        writeln!(out, "{line}")?;
    }
    Ok(out)
}

pub fn convert(args: &ConvertArgs) -> Result<String> {
    let f = load_with_notes(&args.input)?;
    let text = match args.to {
        ConvertTarget::Mspe => f.to_text(),
        ConvertTarget::Quadratize => {
            let q = quadratize(&f);
            if q.auxiliaries > 0 {
                note(format!("introduced {} auxiliary variable(s)", q.auxiliaries));
            }
            q.msp.to_text()
        }
        ConvertTarget::Clean => {
            let (g, removed) = clean(&f)?;
            if !removed.is_empty() {
                let names: Vec<&str> = removed.iter().map(|&i| f.names()[i].as_str()).collect();
                note(format!("removed unproductive: {}", names.join(", ")));
            }
            g.to_text()
        }
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {path}"))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

pub fn generate(args: &GenerateArgs) -> Result<String> {
    if args.n_states == 0 || args.n_symbols == 0 {
        return Err(anyhow!("--n-states and --n-symbols must be positive"));
    }
    let header = format!(
        "# random pPDA: n_states={} n_symbols={} seed={}\n",
        args.n_states, args.n_symbols, args.seed
    );
    let body = match args.emit {
        EmitArg::Ppda => random_ppda(args.n_states, args.n_symbols, args.seed).to_text(),
        EmitArg::Mspe => random_termination_system(args.n_states, args.n_symbols, args.seed)?
            .msp
            .to_text(),
    };
    Ok(header + &body)
}
