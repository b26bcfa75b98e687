//! Browser bindings for the solver. Every export takes the system text and
//! returns a JSON string; failures come back as `{"error": "..."}` so the page
//! can show them without exception plumbing.

use mspsolve::{
    backbutton_mspe, certify_newton, cmin_mbits, detect_format, kleene_solve, newton_solve, parse_backbutton,
    parse_mspe, parse_ppda, quadratize, termination_mspe, CertifyOptions, InputFormat, Method, Msp, NumVec,
    Rational, SolveOptions, StopRule, SystemKind, UpperChoice,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn load(text: &str) -> Result<(Msp, InputFormat), String> {
    let format = detect_format(text);
    let f = match format {
        InputFormat::Mspe => parse_mspe(text),
        InputFormat::Ppda => parse_ppda(text).and_then(|p| termination_mspe(&p)).map(|t| t.msp),
        InputFormat::BackButton => parse_backbutton(text).map(|b| backbutton_mspe(&b)),
    };
    f.map(|f| (f, format)).map_err(|e| e.to_string())
}

fn respond(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn ratio(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

fn format_name(format: InputFormat) -> &'static str {
    match format {
        InputFormat::Mspe => "mspe",
        InputFormat::Ppda => "ppda",
        InputFormat::BackButton => "backbutton",
    }
}

/// Structure of the system: canonical text, SCC decomposition and the
/// constants that enter the thresholds.
#[wasm_bindgen]
pub fn analyze(text: &str) -> String {
    respond(load(text).map(|(f, format)| {
        let dag = f.scc_dag();
        let (cmin, m) = cmin_mbits(&f);
        let sccs: Vec<Value> = dag
            .sccs
            .iter()
            .enumerate()
            .map(|(s, vars)| {
                let names: Vec<&str> = vars.iter().map(|&v| f.names()[v].as_str()).collect();
                json!({ "depth": dag.depth[s], "variables": names })
            })
            .collect();
        let kind = match f.kind() {
            SystemKind::General => "general",
            SystemKind::Termination { strict: false } => "termination",
            SystemKind::Termination { strict: true } => "strict termination",
        };
        json!({
            "format": format_name(format),
            "system": f.to_text(),
            "variables": f.names(),
            "kind": kind,
            "quadratic": f.is_quadratic(),
            "strongly_connected": f.is_strongly_connected(),
            "sccs": sccs,
            "height": dag.height,
            "cmin": ratio(&cmin),
            "m": m,
        })
    }))
}

/// Bits of agreement between `x` and `reference`, capped at 52.
fn float_bits(x: &NumVec<f64>, reference: &NumVec<f64>) -> f64 {
    let err = x
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (b - a).abs() / b.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if err == 0.0 {
        52.0
    } else {
        (-err.log2()).clamp(0.0, 52.0)
    }
}

/// Kleene and Newton side by side in floating point: for each step, the
/// number of correct bits against a converged Newton run.
#[wasm_bindgen]
pub fn converge(text: &str, steps: u32) -> String {
    respond(load(text).and_then(|(f, _)| {
        let reference_opts = SolveOptions {
            stop: StopRule::ResidualBelow(1e-15),
            iteration_cap: 200,
            ..SolveOptions::default()
        };
        let reference = newton_solve::<f64>(&f, &reference_opts).map_err(|e| e.to_string())?;
        let reference = reference.last().clone();
        let opts = SolveOptions::max_iterations(steps as u64);
        let series = |trace: mspsolve::Result<mspsolve::IterationTrace<f64>>| -> Result<Value, String> {
            let trace = trace.map_err(|e| e.to_string())?;
            let points: Vec<Value> = trace
                .iterates
                .iter()
                .map(|(k, x)| json!([k, float_bits(x, &reference)]))
                .collect();
            Ok(json!({ "bits": points, "last": trace.last().0 }))
        };
        Ok(json!({
            "variables": f.names(),
            "solution": reference.0,
            "kleene": series(kleene_solve::<f64>(&f, &opts))?,
            "newton": series(newton_solve::<f64>(&f, &opts))?,
        }))
    }))
}

/// Exact Newton until `target_bits` bits are certified. Systems of higher
/// degree are quadratized first and the certificate is reported for the
/// original variables.
#[wasm_bindgen]
pub fn certify(text: &str, target_bits: u32, method: &str) -> String {
    respond(load(text).and_then(|(f, _)| {
        let method = Method::parse(method).ok_or_else(|| format!("unknown method `{method}`"))?;
        let (g, var_map) = if f.is_quadratic() {
            let identity = (0..f.dim()).collect();
            (f, identity)
        } else {
            let q = quadratize(&f);
            (q.msp, q.var_map)
        };
        if !g.is_strongly_connected() {
            return Err("certificates need a strongly connected system".into());
        }
        let mut opts = CertifyOptions::new(method, UpperChoice::default_for(&g));
        opts.target_bits = Some(target_bits.into());
        opts.iteration_cap = 2_000;
        let (cert, _) = certify_newton(&g, &opts).map_err(|e| e.to_string())?;
        let enclosure: Vec<Value> = var_map
            .iter()
            .map(|&i| {
                let (lo, hi) = &cert.enclosure[i];
                json!({
                    "variable": cert.names[i],
                    "lower": mspsolve::scalar::rational_to_f64(lo),
                    "upper": mspsolve::scalar::rational_to_f64(hi),
                })
            })
            .collect();
        Ok(json!({
            "bits": cert.bits,
            "method": cert.method.as_str(),
            "threshold": mspsolve::scalar::rational_to_f64(&cert.value),
            "iterations": cert.iterations,
            "enclosure": enclosure,
            "certificate": cert.to_json(),
        }))
    }))
}
