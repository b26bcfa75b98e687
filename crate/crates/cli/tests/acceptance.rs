//! Acceptance harness: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary (`harness = false`) so the lines show up in
//! `cargo test` output.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use mspsolve::certify::{lambda_max, Certificate};
use mspsolve::{
    certify_newton, clean, cmin_mbits, cone_vector, dnm_solve, kleene_upper, newton_solve, parse_mspe, parse_ppda,
    quadratize, random_termination_system, search_upper, termination_mspe, threshold_scc, valid_bits, Arith, Bounds,
    CertifyOptions, Error, Method, Msp, NumVec, Rational, SolveOptions, StopRule, UpperChoice,
};
use num_bigint::BigInt;
use num_traits::{One, Zero};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn load(name: &str) -> Msp {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture exists");
    if name.ends_with(".ppda") {
        termination_mspe(&parse_ppda(&text).unwrap()).unwrap().msp
    } else {
        parse_mspe(&text).unwrap()
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn pow2_neg(k: u64) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k)
}

fn newton_iterates(f: &Msp, steps: u64, arith: Arith) -> Result<Vec<NumVec<Rational>>, Error> {
    let opts = SolveOptions {
        arith,
        ..SolveOptions::max_iterations(steps)
    };
    let trace = newton_solve::<Rational>(f, &opts)?;
    assert!(steps <= 50, "iterates beyond step 50 are thinned");
    Ok(trace.iterates.into_iter().map(|(_, x)| x).collect())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Checks one certificate against a reference run 20 Newton steps longer.
fn check_certificate(f: &Msp, cert: &Certificate) -> Result<(), String> {
    cert.verify(f)?;
    let reference = newton_iterates_long(f, cert.iterations + 20);
    let rel_ok = cert.iterate.iter().zip(reference.iter()).all(|(v, r)| {
        r.is_zero() || ((r - v) / r) <= pow2_neg(cert.bits)
    });
    let inside = cert
        .enclosure
        .iter()
        .zip(reference.iter())
        .all(|((lo, hi), r)| lo <= r && r <= hi);
    ensure(rel_ok && inside, || {
        format!(
            "{} bits after {} steps ({}): reference disagrees",
            cert.bits, cert.iterations, cert.method
        )
    })
}

/// Final Newton iterate after `steps` steps. Precision beyond `steps + 64`
/// bits is of no use to the checks and only slows long runs down.
fn newton_iterates_long(f: &Msp, steps: u64) -> NumVec<Rational> {
    let opts = SolveOptions {
        arith: Arith {
            iterate_bits_limit: Some(steps + 64),
            ..Arith::default()
        },
        ..SolveOptions::max_iterations(steps)
    };
    newton_solve::<Rational>(f, &opts)
        .expect("reference run")
        .last()
        .clone()
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mspsolve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn criterion_1(certs: &mut Vec<(Msp, Certificate)>) -> Outcome {
    let start = Instant::now();
    let f = load("golden.mspe");
    let nu = newton_iterates(&f, 14, Arith::default()).map_err(|e| e.to_string())?.pop().unwrap();
    let boxes = [(q(98, 100), q(99, 100)), (q(97, 100), q(98, 100)), (q(992, 1000), q(993, 1000))];
    ensure(nu.iter().zip(&boxes).all(|(v, (lo, hi))| lo <= v && v <= hi), || {
        format!("nu(14) = {:?} outside the printed box", nu.to_f64())
    })?;
    let (cmin, _) = cmin_mbits(&f);
    ensure(cmin == q(3, 10), || format!("cmin = {cmin}"))?;

    let mut bounds = Bounds::new(&f, nu.clone());
    bounds.install_upper(&f, NumVec::ones(3));
    let k = threshold_scc(&f, &bounds).map_err(|e| e.to_string())?;
    ensure(k <= q(6, 1), || format!("threshold_scc = {k}"))?;

    let path = fixture("golden.mspe");
    let out = cli(&["certify", path.to_str().unwrap(), "--iterations", "14", "--prove-below-one"]);
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let cert = Certificate::from_json(&json).map_err(|e| e.to_string())?;
    ensure(cert.bits >= 8, || format!("{} bits", cert.bits))?;
    let caps = [q(994, 1000), q(984, 1000), q(997, 1000)];
    ensure(cert.enclosure.iter().zip(&caps).all(|((_, hi), cap)| hi < cap), || {
        "enclosure upper ends not below (0.994, 0.984, 0.997)".into()
    })?;
    let verdict = String::from_utf8_lossy(&out.stderr).contains("below one: YES");
    ensure(verdict, || "verdict is not YES".into())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 5.0, || format!("took {elapsed:.2} s"))?;
    certs.push((f, cert));
    Ok(format!(
        "cmin 3/10, k_scc {:.3}, {} bits, verdict YES, {elapsed:.2} s",
        mspsolve::scalar::rational_to_f64(&k),
        certs[0].1.bits
    ))
}

fn criterion_2(certs: &mut Vec<(Msp, Certificate)>) -> Outcome {
    let f = load("halving.mspe");
    let iterates = newton_iterates(&f, 20, Arith::default()).map_err(|e| e.to_string())?;
    for (k, x) in iterates.iter().enumerate() {
        let want = Rational::one() - pow2_neg(k as u64);
        ensure(x[0] == want, || format!("step {k}: {} != 1 - 2^-{k}", x[0]))?;
    }
    // Certificates for the same equation, taken through the pPDA front end so
    // the pPDA thresholds apply.
    let g = load("halving.ppda");
    for method in Method::ALL {
        let mut opts = CertifyOptions::new(method, UpperChoice::One);
        opts.target_bits = Some(12);
        let (cert, _) = certify_newton(&g, &opts).map_err(|e| format!("{method}: {e}"))?;
        certs.push((g.clone(), cert));
    }
    Ok("nu(k) = 1 - 2^-k for k = 0..20; certificates for every threshold method".into())
}

fn generated_suite() -> Vec<Msp> {
    (0..200u64)
        .map(|seed| {
            let out = cli(&["generate", "--n-states", "2", "--n-symbols", "3", "--seed", &seed.to_string()]);
            assert!(out.status.success());
            parse_mspe(&String::from_utf8(out.stdout).unwrap()).unwrap()
        })
        .collect()
}

#[derive(Default)]
struct SuiteStats {
    chain_violations: Vec<String>,
    dominance_violations: Vec<String>,
    singular: usize,
    other_errors: Vec<String>,
}

fn run_suite_member(seed: usize, f: &Msp, stats: &mut SuiteStats) {
    let ones = NumVec::<Rational>::ones(f.dim());
    let iterates = match newton_iterates(f, 15, Arith::default()) {
        Ok(x) => x,
        Err(Error::SingularMatrix { .. }) => {
            stats.singular += 1;
            return;
        }
        Err(e) => {
            stats.other_errors.push(format!("seed {seed}: {e}"));
            return;
        }
    };
    for (k, x) in iterates.iter().enumerate() {
        let fx = f.eval(x).unwrap();
        let next = iterates.get(k + 1).unwrap_or(&fx);
        if !(x.le(&fx) && fx.le(next) && next.le(&ones)) {
            stats.chain_violations.push(format!("seed {seed}, k {k}"));
        }
    }
    let kleene = kleene_upper(f, 15, 128).unwrap();
    for (k, (nu, kappa)) in iterates.iter().zip(&kleene).enumerate() {
        if !kappa.le(nu) {
            stats.dominance_violations.push(format!("seed {seed}, k {k}"));
        }
    }
}

/// Certificates for the smallest strongly connected members of the suite,
/// alternating between the general and the cone-vector threshold.
fn certify_sample(suite: &[Msp], count: usize) -> (Vec<(Msp, Certificate)>, usize) {
    let mut sample: Vec<&Msp> = suite.iter().filter(|f| f.is_strongly_connected()).collect();
    sample.sort_by_key(|f| f.dim());
    let mut certs = Vec::new();
    let mut refusals = 0;
    for (i, f) in sample.into_iter().take(count).enumerate() {
        let mut methods = vec![if i % 2 == 0 { Method::SccGeneral } else { Method::ConeVector }];
        if f.dim() <= 3 {
            methods.push(Method::SizeBased);
        }
        for method in methods {
            let mut opts = CertifyOptions::new(method, UpperChoice::default_for(f));
            opts.target_bits = Some(8);
            opts.iteration_cap = 400;
            match certify_newton(f, &opts) {
                Ok((cert, _)) => certs.push((f.clone(), cert)),
                Err(_) => refusals += 1,
            }
        }
    }
    (certs, refusals)
}

fn criteria_3_4(suite: &[Msp]) -> (Outcome, Outcome) {
    let start = Instant::now();
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
    let mut parts: Vec<SuiteStats> = Vec::new();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    let mut stats = SuiteStats::default();
                    for (seed, f) in suite.iter().enumerate().skip(w).step_by(workers) {
                        run_suite_member(seed, f, &mut stats);
                    }
                    stats
                })
            })
            .collect();
        parts = handles.into_iter().map(|h| h.join().expect("worker")).collect();
    });
    let mut stats = SuiteStats::default();
    for p in parts {
        stats.chain_violations.extend(p.chain_violations);
        stats.dominance_violations.extend(p.dominance_violations);
        stats.singular += p.singular;
        stats.other_errors.extend(p.other_errors);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let max_n = suite.iter().map(Msp::dim).max().unwrap_or(0);
    let c3 = if stats.chain_violations.is_empty() && stats.singular == 0 && stats.other_errors.is_empty() && elapsed < 120.0
    {
        Ok(format!("{} systems (n <= {max_n}), 15 steps each, 0 violations, 0 singular, {elapsed:.1} s", suite.len()))
    } else {
        Err(format!(
            "violations {:?}, singular {}, errors {:?}, {elapsed:.1} s",
            stats.chain_violations, stats.singular, stats.other_errors
        ))
    };
    let c4 = if stats.dominance_violations.is_empty() && stats.other_errors.is_empty() {
        Ok(format!("{} systems, k = 0..15, newton >= kleene everywhere", suite.len()))
    } else {
        Err(format!("violations {:?}", stats.dominance_violations))
    };
    (c3, c4)
}

fn criterion_5(certs: &[(Msp, Certificate)], refusals: usize) -> Outcome {
    let failures: Vec<String> = certs
        .iter()
        .filter_map(|(f, c)| check_certificate(f, c).err())
        .collect();
    let max_bits = certs.iter().map(|(_, c)| c.bits).max().unwrap_or(0);
    if failures.is_empty() && !certs.is_empty() {
        Ok(format!(
            "{} certificates (up to {max_bits} bits), 0 violations; {refusals} refused",
            certs.len()
        ))
    } else {
        Err(format!("{} of {} certificates violated: {:?}", failures.len(), certs.len(), failures))
    }
}

fn criterion_6() -> Outcome {
    let mut systems = Vec::new();
    for symbols in 1..=5 {
        for seed in 0..9 {
            systems.push(random_termination_system(1, symbols, seed).map_err(|e| e.to_string())?.msp);
        }
    }
    for seed in 0..10 {
        systems.push(random_termination_system(2, 1, seed).map_err(|e| e.to_string())?.msp);
    }
    let mut tightest = f64::INFINITY;
    for (i, f) in systems.iter().enumerate() {
        let n = f.dim();
        ensure(n <= 5, || format!("system {i} has {n} variables"))?;
        let nu = newton_iterates_long(f, 40);
        let (cmin, _) = cmin_mbits(f);
        let exponent = (1i32 << (n + 1)) - 1;
        let bound = num_traits::pow(cmin, exponent as usize);
        let min = nu.min_entry().unwrap();
        // nu is below the least fixed point, so this checks the stronger claim.
        ensure(min >= bound, || format!("system {i}: min {min} < bound {bound}"))?;
        tightest = tightest.min(mspsolve::scalar::rational_to_f64(&min));
    }
    Ok(format!("{} systems (n <= 5); smallest solution component {tightest:.3e}", systems.len()))
}

fn criterion_7() -> Outcome {
    let mut checked = 0;
    for name in ["golden.mspe", "golden.bb", "halving.mspe", "halving.ppda"] {
        let f = if name.ends_with(".bb") {
            let text = std::fs::read_to_string(fixture(name)).unwrap();
            mspsolve::backbutton_mspe(&mspsolve::parse_backbutton(&text).unwrap())
        } else {
            load(name)
        };
        let iterates = newton_iterates(&f, 14, Arith::default()).map_err(|e| e.to_string())?;
        let late = newton_iterates_long(&f, 40);
        let ones = NumVec::ones(f.dim());
        let upper = search_upper(&f, &late).unwrap_or(ones);
        let mut bounds = Bounds::new(&f, late.clone());
        ensure(bounds.install_upper(&f, upper.clone()), || format!("{name}: upper bound rejected"))?;
        let (d, verified) = cone_vector(&f, &iterates[14], &bounds).map_err(|e| e.to_string())?;
        ensure(verified, || format!("{name}: cone vector not verified"))?;
        let lmax = lambda_max(&d, &bounds).map_err(|e| e.to_string())?;
        for (k, nu) in iterates.iter().enumerate() {
            let scale = pow2_neg(k as u64) * &lmax;
            // upper >= mu, so this bounds mu - nu from above.
            let ok = upper.iter().zip(nu.iter()).zip(d.iter()).all(|((u, v), dj)| u - v <= &scale * dj);
            ensure(ok, || format!("{name}: bound fails at k = {k}"))?;
        }
        checked += 1;
    }
    Ok(format!("{checked} systems with verified cone vectors, k = 0..14"))
}

fn criterion_8() -> Outcome {
    let mut runs = 0;
    for h in 0..=3usize {
        for w in 1..=3usize {
            let f = load(&format!("dag/dag_h{h}_w{w}.mspe"));
            let dag = f.scc_dag();
            ensure(dag.height == h && dag.width == w, || format!("h{h} w{w}: shape {} {}", dag.height, dag.width))?;
            for j in [1u64, 2, 4] {
                let trace = dnm_solve::<Rational>(&f, j, &SolveOptions::default()).map_err(|e| e.to_string())?;
                let bound = j * w as u64 * (1 << (h + 1));
                ensure(trace.total_newton_steps <= bound, || {
                    format!("h{h} w{w} j{j}: {} steps > {bound}", trace.total_newton_steps)
                })?;
                for (s, &steps) in trace.per_scc_steps.iter().enumerate() {
                    let want = j << dag.depth[s];
                    ensure(steps == want, || format!("h{h} w{w} j{j}: scc {s} ran {steps}, want {want}"))?;
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs: per-SCC steps = j*2^depth, totals within j*w*2^(h+1)"))
}

fn criterion_9() -> Outcome {
    let window = 5u64;
    let horizon = 24u64;
    let mut j0s = Vec::new();
    for w in 1..=3 {
        let f = load(&format!("dag/dag_h2_w{w}.mspe"));
        let exact = NumVec::ones(f.dim());
        let bits: Vec<u64> = (1..=horizon)
            .map(|j| {
                let trace = dnm_solve::<Rational>(&f, j, &SolveOptions::default()).expect("dnm run");
                valid_bits(trace.last(), &exact).unwrap_or(u64::MAX)
            })
            .collect();
        let gains = |j: u64| bits[j as usize] as i128 - bits[j as usize - 1] as i128;
        let j0 = (1..=horizon - window - 1).find(|&j0| (j0..=j0 + window).all(|j| gains(j) >= 1));
        match j0 {
            Some(j0) => j0s.push(format!("w{w}: j0 = {j0} (bits {:?})", &bits[..(j0 + window + 1) as usize])),
            None => return Err(format!("w{w}: no window of {window} increasing steps in {bits:?}")),
        }
    }
    Ok(j0s.join("; "))
}

fn solve_to(f: &Msp, arith: Arith, residual: f64) -> NumVec<Rational> {
    let opts = SolveOptions {
        arith,
        stop: StopRule::ResidualBelow(residual),
        iteration_cap: 500,
        ..SolveOptions::default()
    };
    newton_solve::<Rational>(f, &opts).expect("solve").last().clone()
}

fn by_name(f: &Msp, x: &NumVec<Rational>, name: &str) -> Rational {
    f.index_of(name).map_or_else(Rational::zero, |i| x[i].clone())
}

fn criterion_10() -> Outcome {
    let unrounded = Arith {
        iterate_bits: None,
        ..Arith::default()
    };
    for name in ["linear.mspe", "linear_chain.mspe"] {
        let f = load(name);
        let (g, _) = clean(&f).map_err(|e| e.to_string())?;
        let h = quadratize(&g).msp;
        let mu_f = solve_to(&f, unrounded.clone(), 0.0);
        ensure(f.eval(&mu_f).unwrap() == mu_f, || format!("{name}: not a fixed point"))?;
        for other in [&g, &h] {
            let mu = solve_to(other, unrounded.clone(), 0.0);
            ensure(f.names().iter().all(|v| by_name(&f, &mu_f, v) == by_name(other, &mu, v)), || {
                format!("{name}: transformed solution differs")
            })?;
        }
    }
    let mut worst = 0f64;
    for name in ["cubic.mspe", "quartic.mspe", "mixed_degree.mspe", "unproductive.mspe"] {
        let f = load(name);
        let (g, _) = clean(&f).map_err(|e| e.to_string())?;
        let h = quadratize(&g).msp;
        let mu_f = solve_to(&f, Arith::default(), 1e-30);
        for other in [&g, &h] {
            let mu = solve_to(other, Arith::default(), 1e-30);
            for v in f.names() {
                let (a, b) = (by_name(&f, &mu_f, v), by_name(other, &mu, v));
                let rel = if a.is_zero() && b.is_zero() {
                    0.0
                } else {
                    let diff = mspsolve::scalar::rational_to_f64(&(&a - &b));
                    (diff / mspsolve::scalar::rational_to_f64(&a.max(b.clone()))).abs()
                };
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= 1e-9, || format!("relative disagreement {worst:e}"))?;
    Ok(format!("linear fixtures agree exactly; nonlinear worst relative disagreement {worst:.1e}"))
}

fn run(id: u32, title: &str, outcome: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(outcome)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    report(id, title, &outcome)
}

fn report(id: u32, title: &str, outcome: &Outcome) -> bool {
    match outcome {
        Ok(detail) => println!("PASS [{id:>2}] {title}: {detail}"),
        Err(detail) => println!("FAIL [{id:>2}] {title}: {detail}"),
    }
    outcome.is_ok()
}

fn main() {
    let mut all = true;
    let mut certs = Vec::new();
    all &= run(1, "golden back-button example", || criterion_1(&mut certs));
    all &= run(2, "closed-form Newton iterates", || criterion_2(&mut certs));

    let suite = generated_suite();
    let (c3, c4) = criteria_3_4(&suite);
    all &= report(3, "monotone Newton chain on generated suite", &c3);
    all &= report(4, "Newton dominates Kleene", &c4);
    let (sample, refusals) = certify_sample(&suite, 10);
    certs.extend(sample);
    all &= run(5, "certificate soundness", || criterion_5(&certs, refusals));
    all &= run(6, "lower bound on the least fixed point", criterion_6);
    all &= run(7, "cone-vector error bound", criterion_7);
    all &= run(8, "DNM schedule and step bound", criterion_8);
    all &= run(9, "DNM linear convergence", criterion_9);
    all &= run(10, "cleaning and quadratization preserve the solution", criterion_10);
    if !all {
        std::process::exit(1);
    }
}
