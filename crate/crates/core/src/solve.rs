//! Kleene iteration, Newton's method and the decomposed Newton method (DNM).
//!
//! All schemes start from 0 and approach the least fixed point from below.
//!
//! In exact mode every arithmetic operation is exact, but the bit size of
//! exact Newton iterates roughly quadruples per step. When
//! [`Arith::iterate_bits`] is set to `p`, a Newton iterate `N(x)` is rounded
//! down to `q` fractional bits, where `q` is the larger of `p` and 64 plus the
//! number of leading zero bits of the residual `f(x) - x`; the precision thus
//! follows the accuracy already reached, and sizes grow by roughly 64 bits per
//! step once the iterates are accurate to about `p` bits, unless
//! [`Arith::iterate_bits_limit`] caps that growth. The rounded vector is
//! then adjusted so that the stored iterate `y` satisfies, checked exactly,
//!
//! * `f(x) <= y <= N(x)`, and
//! * `y <= f(y)`.
//!
//! A component that violates the second condition is lowered to its rounded
//! image under `f` (never below `f(x)`), repeatedly; after a bounded number
//! of rounds the remaining violators take the value `f(x)`, which satisfies
//! both conditions. Because `y <= N(x) <= mu f`, stored iterates remain lower
//! bounds of the least fixed point.
//!
//! Under a precision cap the interval `[f(x), N(x)]` can become narrower than
//! the grid of `q`-bit dyadics. Such a component drops the `f(x) <= y`
//! requirement and takes the larger of `N(x)` rounded down and `x` itself, so
//! only `x <= y <= N(x)` and `y <= f(y)` are kept. The repair then gives up
//! after a few rounds and persistent violators take the value `x`.

use crate::error::{Error, Result};
use crate::linalg::{solve_linear, NumVec, SquareMat};
use crate::msp::Msp;
use crate::scalar::{bits_below, ceil_to_bits, floor_to_bits, size_bits, Arith, Mode, Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Kleene,
    Newton,
    Dnm,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Kleene => "kleene",
            SchemeKind::Newton => "newton",
            SchemeKind::Dnm => "dnm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    MaxIterations(u64),
    /// Stop once the max-norm of `f(x) - x` drops below the bound.
    ResidualBelow(f64),
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub arith: Arith,
    pub stop: StopRule,
    /// Hard limit for residual-based stopping.
    pub iteration_cap: u64,
    /// Any iterate component above this aborts with `InfeasibleSuspected`.
    pub divergence_bound: f64,
    /// Solve SCCs of equal depth concurrently (DNM only).
    pub parallel_sccs: bool,
    /// DNM: stop an SCC early once its iterate is an exact fixed point.
    pub early_exit: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            arith: Arith::default(),
            stop: StopRule::MaxIterations(20),
            iteration_cap: 10_000,
            divergence_bound: 1e12,
            parallel_sccs: false,
            early_exit: false,
        }
    }
}

impl SolveOptions {
    pub fn max_iterations(k: u64) -> Self {
        SolveOptions {
            stop: StopRule::MaxIterations(k),
            ..Default::default()
        }
    }
}

/// Iterates of a run. Every iterate up to step 50 is kept, then every 10th;
/// the final iterate is always kept.
#[derive(Debug, Clone)]
pub struct IterationTrace<T> {
    pub scheme: SchemeKind,
    /// `(step, iterate)`, step 0 is the zero vector.
    pub iterates: Vec<(u64, NumVec<T>)>,
    /// `(step, f(x) - x)` aligned with `iterates`.
    pub residuals: Vec<(u64, NumVec<T>)>,
    pub total_newton_steps: u64,
    /// DNM only: Newton steps per SCC, indexed like `SccDag::sccs`.
    pub per_scc_steps: Vec<u64>,
}

impl<T: Scalar> IterationTrace<T> {
    pub(crate) fn new(scheme: SchemeKind) -> Self {
        IterationTrace {
            scheme,
            iterates: Vec::new(),
            residuals: Vec::new(),
            total_newton_steps: 0,
            per_scc_steps: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, step: u64, x: NumVec<T>, residual: NumVec<T>, force: bool) {
        if force || step <= 50 || step.is_multiple_of(10) {
            if self.iterates.last().map(|(s, _)| *s) == Some(step) {
                return;
            }
            self.iterates.push((step, x));
            self.residuals.push((step, residual));
        }
    }

    pub fn last(&self) -> &NumVec<T> {
        &self.iterates.last().expect("trace is never empty").1
    }

    pub fn last_step(&self) -> u64 {
        self.iterates.last().map(|(s, _)| *s).unwrap_or(0)
    }

    pub fn last_residual(&self) -> &NumVec<T> {
        &self.residuals.last().expect("trace is never empty").1
    }

    /// Number of iterations performed (Newton steps for Newton/DNM).
    pub fn iterations(&self) -> u64 {
        match self.scheme {
            SchemeKind::Kleene => self.last_step(),
            _ => self.total_newton_steps,
        }
    }
}

fn check_bound<T: Scalar>(x: &NumVec<T>, bound: f64) -> Result<()> {
    if x.iter().any(|v| v.to_f64() > bound) {
        Err(Error::InfeasibleSuspected { bound })
    } else {
        Ok(())
    }
}

/// One Kleene step: `f(x)`.
pub fn kleene_step<T: Scalar>(f: &Msp, x: &NumVec<T>) -> Result<NumVec<T>> {
    f.eval(x)
}

/// The Newton correction `(Id - f'(x))^-1 (f(x) - x)` and the matrix
/// `Id - f'(x)`.
fn newton_delta<T: Scalar>(
    f: &Msp,
    x: &NumVec<T>,
    fx: &NumVec<T>,
    arith: &Arith,
) -> Result<(NumVec<T>, SquareMat<T>)> {
    let m = f.jacobian(x)?.identity_minus();
    Ok((solve_linear(&m, &fx.sub(x), arith)?, m))
}

/// One Newton step `x + (Id - f'(x))^-1 (f(x) - x)` as stored by the solver
/// (see the module docs for rounding). A point with `f(x) = x` is returned
/// unchanged without forming the matrix.
pub fn newton_step<T: Scalar>(f: &Msp, x: &NumVec<T>, arith: &Arith) -> Result<NumVec<T>> {
    let fx = f.eval(x)?;
    if fx == *x {
        return Ok(x.clone());
    }
    let (delta, m) = newton_delta(f, x, &fx, arith)?;
    let next = x.add(&delta);
    if !next.iter().all(Scalar::is_finite) {
        return Err(Error::NonFinite);
    }
    match T::MODE {
        Mode::Float => Ok(NumVec(next.iter().map(|v| v.round_iterate(arith)).collect())),
        Mode::Exact => guarded_round(f, x, &fx, &m, next, &step_arith(x, &fx, arith)),
    }
}

/// Rounding precision for the step from `x`: see the module docs.
fn step_arith<T: Scalar>(x: &NumVec<T>, fx: &NumVec<T>, arith: &Arith) -> Arith {
    let Some(p) = arith.iterate_bits else {
        return arith.clone();
    };
    let residual = fx.iter().zip(x.iter()).map(|(a, b)| a.clone() - b.clone()).fold(T::zero(), |m, r| T::max_of(&m, &r));
    let zeros = residual.to_rational().as_ref().and_then(bits_below).unwrap_or(0);
    let wanted = zeros.saturating_add(64).min(arith.iterate_bits_limit.unwrap_or(u64::MAX));
    Arith {
        iterate_bits: Some(p.max(wanted)),
        ..arith.clone()
    }
}

fn guarded_round<T: Scalar>(
    f: &Msp,
    x: &NumVec<T>,
    fx: &NumVec<T>,
    m: &SquareMat<T>,
    exact: NumVec<T>,
    arith: &Arith,
) -> Result<NumVec<T>> {
    let capped = arith.iterate_bits_limit.is_some();
    let rounds = if capped { CAPPED_REPAIR_ROUNDS } else { REPAIR_ROUNDS };
    let mut y = NumVec(
        exact
            .iter()
            .zip(fx.iter())
            .zip(x.iter())
            .map(|((n, lo), floor)| short_between(lo, n, floor, arith))
            .collect(),
    );
    if !y.le(&f.eval(&y)?) {
        if let Some(shifted) = cone_shifted(m, x, fx, &exact, arith)? {
            y = shifted;
        }
    }
    // Lower every violating component to its rounded image until none is
    // left; after a bounded number of rounds use f(x) (or x when capped),
    // which can never violate again because y >= x.
    for round in 0.. {
        let fy = f.eval(&y)?;
        let mut changed = false;
        for i in 0..y.len() {
            if fy[i] < y[i] {
                let candidate = (round < rounds).then(|| short_between(&fx[i], &fy[i], &x[i], arith));
                y[i] = match candidate {
                    // Below f(x) only under a cap; lowering in tiny steps
                    // would take every remaining round.
                    Some(c) if capped && c < fx[i] => x[i].clone(),
                    Some(c) => c,
                    None if capped => x[i].clone(),
                    None => fx[i].clone(),
                };
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(y)
}

/// `N - 2^-q d` with `(Id - f'(x)) d = 1`, rounded down to `q + 16` bits;
/// components that would fall below `f(x)` use [`short_between`] instead. Independent rounding of the components can push
/// `f(y) - y` negative when `f'` is large; the offset along `d` makes it about
/// `2^-q` everywhere, more than the finer rounding can take away.
fn cone_shifted<T: Scalar>(
    m: &SquareMat<T>,
    x: &NumVec<T>,
    fx: &NumVec<T>,
    exact: &NumVec<T>,
    arith: &Arith,
) -> Result<Option<NumVec<T>>> {
    let Some(q) = arith.iterate_bits else {
        return Ok(None);
    };
    let d = solve_linear(m, &NumVec::ones(m.dim()), arith)?;
    let eps = Rational::new(1.into(), num_bigint::BigInt::from(1) << q as usize);
    let mut y = Vec::with_capacity(d.len());
    for (((n, di), lo), floor) in exact.iter().zip(d.iter()).zip(fx.iter()).zip(x.iter()) {
        let (Some(nr), Some(dr)) = (n.to_rational(), di.to_rational()) else {
            return Ok(None);
        };
        let v = T::from_rational(&floor_to_bits(&(nr - &eps * dr), q + 16));
        y.push(if v >= *lo { v } else { short_between(lo, n, floor, arith) });
    }
    Ok(Some(NumVec(y)))
}

const REPAIR_ROUNDS: usize = 64;
/// Near the cap the repair oscillates below the grid resolution; give up
/// early and keep `x` for the remaining violators.
const CAPPED_REPAIR_ROUNDS: usize = 4;

/// A value in `[lo, hi]` of small bit size: `hi` rounded down when that stays
/// above `lo`, otherwise the coarsest dyadic rational at or above `lo` that
/// still fits below `hi`. Under a precision cap, an interval too narrow for
/// the grid yields `max(hi rounded down, floor)` instead.
fn short_between<T: Scalar>(lo: &T, hi: &T, floor: &T, arith: &Arith) -> T {
    let rounded = hi.round_iterate(arith);
    if rounded >= *lo {
        return rounded;
    }
    let (Some(l), Some(h)) = (lo.to_rational(), hi.to_rational()) else {
        return lo.clone();
    };
    if h <= l {
        return lo.clone();
    }
    let Some(g) = bits_below(&(h - &l)) else {
        return lo.clone();
    };
    let budget = arith.iterate_bits.unwrap_or(u64::MAX).saturating_add(64);
    if arith.iterate_bits_limit.is_some() && g + 1 > budget {
        return T::max_of(&rounded, floor);
    }
    if size_bits(&l) > g + 1 {
        T::from_rational(&ceil_to_bits(&l, g + 1))
    } else {
        lo.clone()
    }
}

/// Whether the stop rule is met at `step` with residual `r`.
fn should_stop<T: Scalar>(opts: &SolveOptions, step: u64, r: &NumVec<T>) -> bool {
    match opts.stop {
        StopRule::MaxIterations(k) => step >= k,
        StopRule::ResidualBelow(eps) => r.max_norm_f64() < eps || step >= opts.iteration_cap,
    }
}

/// Kleene iteration from 0.
pub fn kleene_solve<T: Scalar>(f: &Msp, opts: &SolveOptions) -> Result<IterationTrace<T>> {
    iterate(f, opts, SchemeKind::Kleene, |x: &NumVec<T>, fx: &NumVec<T>| {
        Ok(NumVec(
            fx.iter()
                .zip(x.iter())
                .map(|(v, old)| T::max_of(&v.round_iterate(&opts.arith), old))
                .collect(),
        ))
    })
}

/// Upper bounds on the exact Kleene iterates `kappa^(0..=steps)`.
///
/// Each stored value is `f` of the previous one rounded up to `bits`
/// fractional bits once it grows larger than that; by monotonicity of `f` the
/// result dominates the exact Kleene sequence, whose bit size doubles per step.
pub fn kleene_upper(f: &Msp, steps: u64, bits: u64) -> Result<Vec<NumVec<Rational>>> {
    let mut out = vec![NumVec::<Rational>::zeros(f.dim())];
    for _ in 0..steps {
        let next = f.eval(out.last().expect("nonempty"))?;
        out.push(NumVec(
            next.iter()
                .map(|v| if size_bits(v) > bits { ceil_to_bits(v, bits) } else { v.clone() })
                .collect(),
        ));
    }
    Ok(out)
}

/// Newton's method from 0 on the whole system (not decomposed).
pub fn newton_solve<T: Scalar>(f: &Msp, opts: &SolveOptions) -> Result<IterationTrace<T>> {
    let mut trace = iterate(f, opts, SchemeKind::Newton, |x, _| newton_step(f, x, &opts.arith))?;
    trace.total_newton_steps = trace.last_step();
    Ok(trace)
}

fn iterate<T: Scalar>(
    f: &Msp,
    opts: &SolveOptions,
    scheme: SchemeKind,
    mut step_fn: impl FnMut(&NumVec<T>, &NumVec<T>) -> Result<NumVec<T>>,
) -> Result<IterationTrace<T>> {
    let mut trace = IterationTrace::new(scheme);
    let mut x = NumVec::<T>::zeros(f.dim());
    let mut step = 0u64;
    loop {
        let fx = f.eval(&x)?;
        let residual = fx.sub(&x);
        let stop = should_stop(opts, step, &residual);
        trace.record(step, x.clone(), residual, stop);
        if stop {
            return Ok(trace);
        }
        x = step_fn(&x, &fx)?;
        check_bound(&x, opts.divergence_bound)?;
        step += 1;
    }
}

/// Decomposed Newton's method with parameter `j`.
///
/// SCCs are processed from depth `height` down to 0; an SCC of depth t gets
/// `j * 2^t` Newton steps from 0 on its subsystem, in which every variable of
/// a deeper SCC has already been replaced by its computed approximation.
pub fn dnm_solve<T: Scalar>(f: &Msp, j: u64, opts: &SolveOptions) -> Result<IterationTrace<T>> {
    if !f.is_quadratic() {
        return Err(Error::NotQuadratic);
    }
    let dag = f.scc_dag();
    let mut values: Vec<Option<T>> = vec![None; f.dim()];
    let mut per_scc = vec![0u64; dag.sccs.len()];

    for t in (0..=dag.height).rev() {
        let steps = j.saturating_mul(1u64.checked_shl(t as u32).unwrap_or(u64::MAX));
        let known: Vec<Option<Rational>> = values
            .iter()
            .map(|v| v.as_ref().map(|x| x.to_rational().expect("finite iterate")))
            .collect();
        let level = dag.comp(t);
        let solve_one = |s: usize| -> Result<(NumVec<T>, u64)> {
            let sub = f.restrict(&dag.sccs[s], &known)?;
            scc_newton(&sub, steps, opts)
        };
        let results: Vec<Result<(NumVec<T>, u64)>> = run_level(&level, opts.parallel_sccs, solve_one);
        for (&s, res) in level.iter().zip(results) {
            let (nu, done) = res?;
            for (&v, val) in dag.sccs[s].iter().zip(nu.0) {
                values[v] = Some(val);
            }
            per_scc[s] = done;
        }
    }

    let x = NumVec(values.into_iter().map(|v| v.expect("every SCC solved")).collect());
    let residual = f.eval(&x)?.sub(&x);
    let mut trace = IterationTrace::new(SchemeKind::Dnm);
    trace.total_newton_steps = per_scc.iter().sum();
    trace.per_scc_steps = per_scc;
    trace.record(trace.total_newton_steps, x, residual, true);
    Ok(trace)
}

fn scc_newton<T: Scalar>(sub: &Msp, steps: u64, opts: &SolveOptions) -> Result<(NumVec<T>, u64)> {
    let mut x = NumVec::<T>::zeros(sub.dim());
    for done in 0..steps {
        let next = newton_step(sub, &x, &opts.arith)?;
        check_bound(&next, opts.divergence_bound)?;
        if opts.early_exit && next == x && sub.eval(&x)? == x {
            return Ok((x, done));
        }
        x = next;
    }
    Ok((x, steps))
}

#[cfg(feature = "parallel")]
fn run_level<R: Send>(level: &[usize], parallel: bool, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    if parallel {
        level.par_iter().map(|&s| f(s)).collect()
    } else {
        level.iter().map(|&s| f(s)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_level<R: Send>(level: &[usize], _parallel: bool, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    level.iter().map(|&s| f(s)).collect()
}
