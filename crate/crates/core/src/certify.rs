//! Convergence thresholds, certified bounds, cone vectors and valid-bits
//! certificates for Newton's method on strongly connected quadratic systems.
//!
//! A threshold `k` certifies that Newton iterate number `ceil(k) + i` has `i`
//! valid bits, i.e. componentwise relative error at most `2^-i`. Every
//! threshold here is evaluated from bounds that are known to be on the safe
//! side: the lower bound is a Newton iterate, the upper bound a vector `u`
//! checked exactly to satisfy `f(u) <= u`, and logarithms are rounded up.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{solve_linear, NumVec};
use crate::msp::{Msp, SystemKind};
use crate::scalar::{
    bit_length, bits_below, ceil_int, ceil_to_bits, log2_lower, log2_upper, parse_ratio_string, ratio_string, Arith,
    Rational,
};
use crate::solve::{newton_step, IterationTrace, SchemeKind};

/// Smallest coefficient and the largest bit length among all coefficient
/// numerators and denominators.
pub fn cmin_mbits(f: &Msp) -> (Rational, u64) {
    let mut cmin: Option<&Rational> = None;
    let mut m = 0;
    for c in f.coefficients() {
        if cmin.is_none_or(|best| c < best) {
            cmin = Some(c);
        }
        m = m.max(bit_length(c.numer())).max(bit_length(c.denom()));
    }
    (cmin.cloned().expect("a system has at least one coefficient"), m)
}

/// Certified enclosure data for the least fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub mu_lower: NumVec<Rational>,
    pub mu_upper: Option<NumVec<Rational>>,
    pub cmin: Rational,
    pub m_bits: u64,
}

impl Bounds {
    /// Bounds with the given lower bound and no upper bound yet.
    pub fn new(f: &Msp, mu_lower: NumVec<Rational>) -> Self {
        let (cmin, m_bits) = cmin_mbits(f);
        Bounds {
            mu_lower,
            mu_upper: None,
            cmin,
            m_bits,
        }
    }

    /// Install `u` as upper bound when `f(u) <= u`; returns whether it was installed.
    pub fn install_upper(&mut self, f: &Msp, u: NumVec<Rational>) -> bool {
        let ok = check_upper(f, &u);
        if ok {
            self.mu_upper = Some(u);
        }
        ok
    }

    /// Smallest lower-bound component, required to be positive.
    pub fn lower_min(&self) -> Result<Rational> {
        let min = self.mu_lower.min_entry().ok_or(Error::ZeroLowerBound)?;
        if min.is_positive() {
            Ok(min)
        } else {
            Err(Error::ZeroLowerBound)
        }
    }

    pub fn upper_max(&self) -> Result<Rational> {
        self.mu_upper
            .as_ref()
            .and_then(NumVec::max_entry)
            .ok_or(Error::MissingUpperBound)
    }
}

/// `f(u) <= u` componentwise, decided exactly. Any such `u >= 0` bounds the
/// least fixed point from above.
pub fn check_upper(f: &Msp, u: &NumVec<Rational>) -> bool {
    u.len() == f.dim() && u.iter().all(|v| !v.is_negative()) && f.eval(u).is_ok_and(|fu| fu.le(u))
}

/// Search for a tight verified upper bound of the form `nu + 2^-s * d`.
///
/// The direction `d` is `(Id - f'(nu))^-1 * 1` scaled to maximum 1 when that
/// is positive, and the all-ones vector otherwise. Candidates are rounded up
/// to dyadic rationals to keep them small; each one is checked exactly, and the
/// tightest verified candidate is returned.
pub fn search_upper(f: &Msp, nu: &NumVec<Rational>) -> Option<NumVec<Rational>> {
    let n = f.dim();
    let arith = Arith::default();
    let Ok(fnu) = f.eval(nu) else {
        return None;
    };
    let system = f.jacobian(nu).ok().map(|j| j.identity_minus());
    let direction = system
        .as_ref()
        .and_then(|m| solve_linear(m, &NumVec::ones(n), &arith).ok())
        .filter(|d| d.is_positive())
        .map(|d| {
            let max = d.max_entry().expect("nonempty");
            d.scale(&max.recip())
        })
        .unwrap_or_else(|| NumVec::ones(n));

    // The Newton correction underestimates the gap to the fixed point, so
    // offsets much smaller than it cannot give an upper bound.
    let gap = system
        .as_ref()
        .and_then(|m| solve_linear(m, &fnu.sub(nu), &arith).ok())
        .and_then(|c| c.iter().zip(direction.iter()).map(|(c, d)| c / d).max());
    let gap_bits = gap.as_ref().filter(|g| g.is_positive()).map(|g| bits_below(g).unwrap_or(0));
    let check = |s: u64| {
        let step = Rational::new(BigInt::one(), BigInt::one() << s as usize);
        let u = NumVec(
            nu.iter()
                .zip(direction.iter())
                .map(|(x, d)| ceil_to_bits(&(x + d * &step), s + 40))
                .collect(),
        );
        check_upper(f, &u).then_some(u)
    };
    // Scan offsets 2^-s; the tightest verified candidate wins. Near the
    // Newton correction first, then the looser offsets below that window.
    let windows = match gap_bits {
        Some(g) => vec![g.saturating_sub(40)..=(g + 24).min(400), 0..=g.saturating_sub(41)],
        None => vec![0..=400],
    };
    for window in windows {
        let mut best = None;
        let mut misses_since_hit = 0;
        for s in window {
            if let Some(u) = check(s) {
                best = Some(u);
                misses_since_hit = 0;
            } else if best.is_some() {
                misses_since_hit += 1;
                if misses_since_hit > 24 {
                    break;
                }
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// How the upper bound for a certificate is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum UpperChoice {
    /// Use no upper bound.
    None,
    /// The all-ones vector (verified).
    One,
    /// A tight search around the iterate, falling back to all-ones.
    Auto,
    /// A user-supplied vector (verified).
    Vector(NumVec<Rational>),
}

impl UpperChoice {
    /// `One` for termination systems whose all-ones vector is post-fixed
    /// (always the case with a single control state), `Auto` otherwise.
    pub fn default_for(f: &Msp) -> Self {
        match f.kind() {
            SystemKind::Termination { .. } if f.ones_is_post_fixed_point() => UpperChoice::One,
            _ => UpperChoice::Auto,
        }
    }

    pub fn resolve(&self, f: &Msp, nu: &NumVec<Rational>) -> Result<Option<NumVec<Rational>>> {
        let verified = |u: NumVec<Rational>| {
            if check_upper(f, &u) {
                Ok(Some(u))
            } else {
                Err(Error::UpperBoundRejected)
            }
        };
        match self {
            UpperChoice::None => Ok(None),
            UpperChoice::One => verified(NumVec::ones(f.dim())),
            UpperChoice::Vector(u) => verified(u.clone()),
            UpperChoice::Auto => {
                let ones = NumVec::ones(f.dim());
                Ok(search_upper(f, nu).or_else(|| check_upper(f, &ones).then_some(ones)))
            }
        }
    }
}

fn require_scc_quadratic(f: &Msp) -> Result<()> {
    if !f.is_quadratic() {
        return Err(Error::NotQuadratic);
    }
    if !f.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    Ok(())
}

fn int(v: u64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// General threshold for strongly connected quadratic systems:
/// `n * log2(mu_max / (cmin * mu_min * min(mu_min, 1)))`.
pub fn threshold_scc(f: &Msp, b: &Bounds) -> Result<Rational> {
    require_scc_quadratic(f)?;
    let upper = b.upper_max()?;
    let lower = b.lower_min()?;
    Ok(scc_formula(f.dim() as u64, &b.cmin, &lower, &upper))
}

pub fn scc_formula(n: u64, cmin: &Rational, mu_min: &Rational, mu_max: &Rational) -> Rational {
    let floor_one = if mu_min < &Rational::one() { mu_min.clone() } else { Rational::one() };
    let ratio = mu_max / (cmin * mu_min * floor_one);
    int(n) * log2_upper(&ratio)
}

/// Threshold from coefficient sizes: `3 n^2 m + 2 n^2 |log2 mu_min|`.
pub fn threshold_size(f: &Msp, b: &Bounds) -> Result<Rational> {
    require_scc_quadratic(f)?;
    Ok(size_formula(f.dim() as u64, b.m_bits, &b.lower_min()?))
}

pub fn size_formula(n: u64, m: u64, mu_min: &Rational) -> Rational {
    let abs_log = if mu_min < &Rational::one() { -log2_lower(mu_min) } else { log2_upper(mu_min) };
    int(3 * n * n * m) + int(2 * n * n) * abs_log
}

/// Threshold for termination systems of pPDAs, needing no fixed-point
/// information: `n * 2^(n+2) * m`.
pub fn threshold_ppda(f: &Msp) -> Result<Rational> {
    if !matches!(f.kind(), SystemKind::Termination { .. }) {
        return Err(Error::NotTerminationSystem);
    }
    require_scc_quadratic(f)?;
    let (_, m) = cmin_mbits(f);
    Ok(ppda_formula(f.dim() as u64, m))
}

pub fn ppda_formula(n: u64, m: u64) -> Rational {
    Rational::from_integer(BigInt::from(n) * (BigInt::one() << (n as usize + 2)) * BigInt::from(m))
}

/// Threshold for termination systems of strict pPDAs: `3 n m`.
pub fn threshold_strict(f: &Msp) -> Result<Rational> {
    if f.kind() != (SystemKind::Termination { strict: true }) {
        return Err(Error::NotStrictSystem);
    }
    require_scc_quadratic(f)?;
    let (_, m) = cmin_mbits(f);
    Ok(int(3 * f.dim() as u64 * m))
}

/// Approximate cone vector `d = (Id - f'(x))^-1 * 1`.
///
/// `d - f'(x) d = 1` holds by construction. The vector is reported as verified
/// when `d` is positive and `f'(u) d <= d` for the installed upper bound `u`;
/// since `f'` is monotone this implies `f'(mu) d <= d`.
pub fn cone_vector(f: &Msp, x: &NumVec<Rational>, b: &Bounds) -> Result<(NumVec<Rational>, bool)> {
    let upper = b.mu_upper.as_ref().ok_or(Error::MissingUpperBound)?;
    let jac = f.jacobian(x)?;
    let d = solve_linear(&jac.identity_minus(), &NumVec::ones(f.dim()), &Arith::default())?;
    let verified = d.is_positive() && f.jacobian(upper)?.mul_vec(&d).le(&d);
    Ok((d, verified))
}

/// `lambda_max = max_j u_j / d_j` for a cone vector `d`.
pub fn lambda_max(d: &NumVec<Rational>, b: &Bounds) -> Result<Rational> {
    let upper = b.mu_upper.as_ref().ok_or(Error::MissingUpperBound)?;
    Ok(upper
        .iter()
        .zip(d.iter())
        .map(|(u, d)| u / d)
        .max()
        .expect("nonempty"))
}

/// Cone-vector threshold `log2(lambda_max / lambda_min)`.
pub fn threshold_cone(f: &Msp, d: &NumVec<Rational>, b: &Bounds) -> Result<Rational> {
    require_scc_quadratic(f)?;
    if !d.is_positive() {
        return Err(Error::UnverifiedConeVector);
    }
    b.lower_min()?;
    let lmax = lambda_max(d, b)?;
    let lmin = b
        .mu_lower
        .iter()
        .zip(d.iter())
        .map(|(l, d)| l / d)
        .min()
        .expect("nonempty");
    Ok(log2_upper(&(lmax / lmin)))
}

/// Largest `i` such that every component of `nu` has relative error at most
/// `2^-i` against `reference`; `None` when they agree exactly.
pub fn valid_bits(nu: &NumVec<Rational>, reference: &NumVec<Rational>) -> Option<u64> {
    let worst = nu
        .iter()
        .zip(reference.iter())
        .filter(|(_, r)| !r.is_zero())
        .map(|(v, r)| ((r - v) / r).abs())
        .max()?;
    bits_below(&worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SccGeneral,
    SizeBased,
    Ppda,
    StrictPpda,
    ConeVector,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SccGeneral,
        Method::SizeBased,
        Method::Ppda,
        Method::StrictPpda,
        Method::ConeVector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SccGeneral => "scc_general",
            Method::SizeBased => "size_based",
            Method::Ppda => "ppda",
            Method::StrictPpda => "strict_ppda",
            Method::ConeVector => "cone_vector",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A valid-bits statement about a Newton iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub system_sha256: String,
    pub names: Vec<String>,
    pub iterate: NumVec<Rational>,
    pub bits: u64,
    /// Method whose threshold was used.
    pub method: Method,
    /// Method asked for; differs from `method` after a cone-vector fallback.
    pub requested: Method,
    pub value: Rational,
    pub cmin: Rational,
    pub m: u64,
    pub mu_lower_min: Rational,
    pub mu_upper_max: Option<Rational>,
    pub iterations: u64,
    pub enclosure: Vec<(Rational, Rational)>,
}

/// Hex SHA-256 of the canonical text of `f`.
pub fn system_hash(f: &Msp) -> String {
    Sha256::digest(f.to_text().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Certify the final iterate of a Newton trace.
pub fn certify(
    f: &Msp,
    trace: &IterationTrace<Rational>,
    method: Method,
    upper: &UpperChoice,
) -> Result<Certificate> {
    if trace.scheme != SchemeKind::Newton {
        return Err(Error::NotNewtonTrace);
    }
    certify_iterate(f, trace.last(), trace.total_newton_steps, method, upper)
}

/// Certify `nu`, assumed to be Newton iterate number `iterations` (exact mode).
pub fn certify_iterate(
    f: &Msp,
    nu: &NumVec<Rational>,
    iterations: u64,
    method: Method,
    upper: &UpperChoice,
) -> Result<Certificate> {
    require_scc_quadratic(f)?;
    nu.check_dim(f.dim())?;
    let mut bounds = Bounds::new(f, nu.clone());
    bounds.mu_upper = upper.resolve(f, nu)?;

    let (used, value) = match method {
        Method::SccGeneral => (method, threshold_scc(f, &bounds)?),
        Method::SizeBased => (method, threshold_size(f, &bounds)?),
        Method::Ppda => (method, threshold_ppda(f)?),
        Method::StrictPpda => (method, threshold_strict(f)?),
        Method::ConeVector => match cone_vector(f, nu, &bounds)? {
            (d, true) => (method, threshold_cone(f, &d, &bounds)?),
            (_, false) => (Method::SccGeneral, threshold_scc(f, &bounds)?),
        },
    };
    let k = ceil_int(&value).max(BigInt::zero()).to_u64().unwrap_or(u64::MAX);
    if iterations <= k {
        return Err(Error::NotCertifiable {
            iterations,
            threshold: k,
        });
    }
    let bits = iterations - k;
    Ok(Certificate {
        system_sha256: system_hash(f),
        names: f.names().to_vec(),
        iterate: nu.clone(),
        bits,
        method: used,
        requested: method,
        value,
        cmin: bounds.cmin.clone(),
        m: bounds.m_bits,
        mu_lower_min: bounds.lower_min()?,
        mu_upper_max: bounds.upper_max().ok(),
        iterations,
        enclosure: enclosure(nu, bounds.mu_upper.as_ref(), bits),
    })
}

/// `[nu, nu + 2^-bits * u]` with an upper bound `u`, else `[nu, nu / (1 - 2^-bits)]`.
fn enclosure(nu: &NumVec<Rational>, upper: Option<&NumVec<Rational>>, bits: u64) -> Vec<(Rational, Rational)> {
    let eps = Rational::new(BigInt::one(), BigInt::one() << bits as usize);
    nu.iter()
        .enumerate()
        .map(|(j, v)| {
            let hi = match upper {
                Some(u) => v + &eps * &u[j],
                None => v / (Rational::one() - &eps),
            };
            (v.clone(), hi)
        })
        .collect()
}

/// Settings for [`certify_newton`].
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub method: Method,
    pub upper: UpperChoice,
    /// Minimum number of Newton steps.
    pub iterations: Option<u64>,
    /// Keep iterating until this many bits are certified.
    pub target_bits: Option<u64>,
    pub arith: Arith,
    pub iteration_cap: u64,
}

impl CertifyOptions {
    pub fn new(method: Method, upper: UpperChoice) -> Self {
        CertifyOptions {
            method,
            upper,
            iterations: None,
            target_bits: None,
            arith: Arith::default(),
            iteration_cap: 10_000,
        }
    }
}

/// Run exact Newton from 0 and certify: with `target_bits`, run until the
/// certificate reaches that many bits (and at least `iterations` steps);
/// otherwise run exactly `iterations` steps.
pub fn certify_newton(f: &Msp, opts: &CertifyOptions) -> Result<(Certificate, IterationTrace<Rational>)> {
    require_scc_quadratic(f)?;
    let min_steps = opts.iterations.unwrap_or(0);
    let mut trace = IterationTrace::new(SchemeKind::Newton);
    let mut x = NumVec::<Rational>::zeros(f.dim());
    let mut step = 0u64;
    // Auto searches are costly; reuse a verified bound until the step count
    // doubles.
    let mut cached: Option<(u64, NumVec<Rational>)> = None;
    loop {
        let fx = f.eval(&x)?;
        let done_min = step >= min_steps;
        let attempt = if done_min {
            let upper = match &opts.upper {
                UpperChoice::Auto => {
                    if cached.as_ref().is_none_or(|(at, _)| step >= 2 * at.max(&1)) {
                        if let Some(u) = UpperChoice::Auto.resolve(f, &x)? {
                            cached = Some((step, u));
                        }
                    }
                    cached.as_ref().map_or(UpperChoice::None, |(_, u)| UpperChoice::Vector(u.clone()))
                }
                other => other.clone(),
            };
            Some(certify_iterate(f, &x, step, opts.method, &upper))
        } else {
            None
        };
        let finished = match (&attempt, opts.target_bits) {
            (Some(_), None) => true,
            (Some(Ok(c)), Some(t)) => c.bits >= t,
            (Some(Err(Error::ZeroLowerBound | Error::NotCertifiable { .. })), Some(_)) => step >= opts.iteration_cap,
            // The upper-bound search needs an iterate close to the solution.
            (Some(Err(Error::MissingUpperBound)), Some(_)) if opts.upper == UpperChoice::Auto => {
                step >= opts.iteration_cap
            }
            (Some(Err(_)), Some(_)) => true,
            (None, _) => false,
        };
        trace.record(step, x.clone(), fx.sub(&x), finished);
        if finished {
            trace.total_newton_steps = step;
            return attempt.expect("finished implies attempted").map(|c| (c, trace));
        }
        // Claims never exceed the step count, so precision beyond it plus a
        // margin of 64 bits is not needed.
        let arith = Arith {
            iterate_bits_limit: Some(step + 64),
            ..opts.arith.clone()
        };
        x = newton_step(f, &x, &arith)?;
        step += 1;
    }
}

impl Certificate {
    /// JSON with keys in schema order and rationals as `num/den` strings.
    pub fn to_json(&self) -> Value {
        let iterate: Map<String, Value> = self
            .names
            .iter()
            .zip(self.iterate.iter())
            .map(|(n, v)| (n.clone(), Value::String(ratio_string(v))))
            .collect();
        let enclosure: Map<String, Value> = self
            .names
            .iter()
            .zip(&self.enclosure)
            .map(|(n, (lo, hi))| (n.clone(), json!([ratio_string(lo), ratio_string(hi)])))
            .collect();
        json!({
            "system_sha256": self.system_sha256,
            "mode": "exact",
            "iterate": iterate,
            "bits": self.bits,
            "threshold": {
                "method": self.method.as_str(),
                "value": ratio_string(&self.value),
                "cmin": ratio_string(&self.cmin),
                "m": self.m,
                "mu_lower_min": ratio_string(&self.mu_lower_min),
                "mu_upper_max": self.mu_upper_max.as_ref().map(ratio_string),
            },
            "iterations": self.iterations,
            "enclosure": enclosure,
        })
    }

    pub fn from_json(v: &Value) -> Result<Certificate> {
        let bad = |what: &str| Error::MalformedCertificate(what.to_string());
        let ratio = |v: &Value, what: &str| v.as_str().and_then(parse_ratio_string).ok_or_else(|| bad(what));
        let obj = |v: &Value, what: &str| v.as_object().cloned().ok_or_else(|| bad(what));

        if v["mode"] != "exact" {
            return Err(bad("mode"));
        }
        let iterate_map = obj(&v["iterate"], "iterate")?;
        let names: Vec<String> = iterate_map.keys().cloned().collect();
        let iterate = NumVec(
            iterate_map
                .values()
                .map(|x| ratio(x, "iterate"))
                .collect::<Result<Vec<_>>>()?,
        );
        let enclosure_map = obj(&v["enclosure"], "enclosure")?;
        let enclosure = names
            .iter()
            .map(|n| {
                let pair = enclosure_map.get(n).and_then(Value::as_array).ok_or_else(|| bad("enclosure"))?;
                match pair.as_slice() {
                    [lo, hi] => Ok((ratio(lo, "enclosure")?, ratio(hi, "enclosure")?)),
                    _ => Err(bad("enclosure")),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let t = &v["threshold"];
        let method = t["method"].as_str().and_then(Method::parse).ok_or_else(|| bad("method"))?;
        let mu_upper_max = match &t["mu_upper_max"] {
            Value::Null => None,
            x => Some(ratio(x, "mu_upper_max")?),
        };
        Ok(Certificate {
            system_sha256: v["system_sha256"].as_str().ok_or_else(|| bad("system_sha256"))?.to_string(),
            names,
            iterate,
            bits: v["bits"].as_u64().ok_or_else(|| bad("bits"))?,
            method,
            requested: method,
            value: ratio(&t["value"], "value")?,
            cmin: ratio(&t["cmin"], "cmin")?,
            m: t["m"].as_u64().ok_or_else(|| bad("m"))?,
            mu_lower_min: ratio(&t["mu_lower_min"], "mu_lower_min")?,
            mu_upper_max,
            iterations: v["iterations"].as_u64().ok_or_else(|| bad("iterations"))?,
            enclosure,
        })
    }

    /// Re-check a certificate against a system: the hash, the recorded
    /// coefficient data, the threshold value recomputed from the recorded
    /// inputs (all methods except the cone vector, whose vector is not
    /// recorded), the step arithmetic and the enclosure. Returns the first
    /// failed check.
    pub fn verify(&self, f: &Msp) -> std::result::Result<(), String> {
        if self.system_sha256 != system_hash(f) {
            return Err("system hash differs".into());
        }
        if self.names != f.names() {
            return Err("variable names differ".into());
        }
        let (cmin, m) = cmin_mbits(f);
        if self.cmin != cmin || self.m != m {
            return Err("cmin or m differ".into());
        }
        if self.iterate.min_entry().as_ref() != Some(&self.mu_lower_min) {
            return Err("mu_lower_min is not the smallest iterate component".into());
        }
        let n = f.dim() as u64;
        let expected = match self.method {
            Method::SccGeneral => {
                let upper = self.mu_upper_max.as_ref().ok_or("missing mu_upper_max")?;
                Some(scc_formula(n, &cmin, &self.mu_lower_min, upper))
            }
            Method::SizeBased => Some(size_formula(n, m, &self.mu_lower_min)),
            Method::Ppda => Some(ppda_formula(n, m)),
            Method::StrictPpda => Some(int(3 * n * m)),
            Method::ConeVector => None,
        };
        if expected.is_some_and(|k| k != self.value) {
            return Err("threshold value does not match its inputs".into());
        }
        let k = ceil_int(&self.value).max(BigInt::zero());
        if BigInt::from(self.iterations) < k + BigInt::from(self.bits) || self.bits == 0 {
            return Err("iterations do not cover threshold plus bits".into());
        }
        if !self.iterate.le(&f.eval(&self.iterate).map_err(|e| e.to_string())?) {
            return Err("iterate is not below its image".into());
        }
        let eps = Rational::new(BigInt::one(), BigInt::one() << self.bits as usize);
        for (v, (lo, hi)) in self.iterate.iter().zip(&self.enclosure) {
            let widest = match &self.mu_upper_max {
                Some(u) => v + &eps * u,
                None => v / (Rational::one() - &eps),
            };
            if lo != v || hi < v || hi > &widest {
                return Err("enclosure inconsistent with iterate and bits".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_mspe;
    use crate::scalar::rational_to_f64;
    use crate::solve::{newton_solve, SolveOptions};

    const WORKED: &str = "X1 = 0.4*X2*X1 + 0.6; X2 = 0.3*X1*X2 + 0.4*X3*X2 + 0.3; X3 = 0.3*X1*X3 + 0.7;";

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn bounds(f: &Msp, lower: Rational, upper: Option<Rational>) -> Bounds {
        let mut b = Bounds::new(f, NumVec(vec![lower; f.dim()]));
        b.mu_upper = upper.map(|u| NumVec(vec![u; f.dim()]));
        b
    }

    #[test]
    fn cmin_and_m() {
        let f = parse_mspe(WORKED).unwrap();
        assert_eq!(cmin_mbits(&f).0, q(3, 10));
        assert_eq!(cmin_mbits(&parse_mspe("X = 1/2*X*X + 1/2;").unwrap()), (q(1, 2), 2));
        assert_eq!(cmin_mbits(&parse_mspe("X = 3/4;").unwrap()).0, q(3, 4));
    }

    #[test]
    fn scc_threshold_worked_example() {
        let f = parse_mspe(WORKED).unwrap();
        let k = threshold_scc(&f, &bounds(&f, q(97, 100), Some(q(1, 1)))).unwrap();
        assert!(k <= q(6, 1));
        assert!((rational_to_f64(&k) - 3.0 * (1.0f64 / (0.97 * 0.3 * 0.97)).log2()).abs() < 1e-9);
    }

    #[test]
    fn scc_threshold_linear_example_is_one() {
        let f = parse_mspe("X = 1/2*X + 1/2;").unwrap();
        assert_eq!(threshold_scc(&f, &bounds(&f, q(1, 1), Some(q(1, 1)))).unwrap(), q(1, 1));
    }

    #[test]
    fn scc_threshold_needs_bounds() {
        let f = parse_mspe(WORKED).unwrap();
        assert_eq!(threshold_scc(&f, &bounds(&f, q(1, 2), None)), Err(Error::MissingUpperBound));
        assert_eq!(threshold_scc(&f, &bounds(&f, q(0, 1), Some(q(1, 1)))), Err(Error::ZeroLowerBound));
    }

    #[test]
    fn size_formula_examples() {
        assert_eq!(size_formula(1, 2, &q(1, 2)), q(8, 1));
        assert_eq!(size_formula(3, 4, &q(1, 1)), q(108, 1));
        let f = parse_mspe(WORKED).unwrap();
        let b = bounds(&f, q(97, 100), Some(q(1, 1)));
        assert!(threshold_size(&f, &b).unwrap() > threshold_scc(&f, &b).unwrap());
    }

    #[test]
    fn ppda_and_strict_formulas() {
        assert_eq!(ppda_formula(1, 1), q(8, 1));
        assert_eq!(ppda_formula(3, 2), q(192, 1));
        let f = parse_mspe("X = 1/2*X*X + 1/2;").unwrap();
        assert_eq!(threshold_ppda(&f), Err(Error::NotTerminationSystem));
        assert_eq!(threshold_strict(&f), Err(Error::NotStrictSystem));
        let t = f.clone().with_kind(SystemKind::Termination { strict: true });
        assert_eq!(threshold_strict(&t).unwrap(), q(6, 1));
        assert_eq!(threshold_ppda(&t).unwrap(), q(16, 1));
    }

    #[test]
    fn upper_bound_checks() {
        let f = parse_mspe(WORKED).unwrap();
        assert!(check_upper(&f, &NumVec::ones(3)));
        let g = parse_mspe("X = 1/2*X + 1/2;").unwrap();
        assert!(!check_upper(&g, &NumVec(vec![q(1, 2)])));
        assert!(check_upper(&g, &NumVec(vec![q(1, 1)])));
    }

    #[test]
    fn upper_search_is_tight_and_verified() {
        let f = parse_mspe(WORKED).unwrap();
        let nu = newton_solve::<Rational>(&f, &SolveOptions::max_iterations(14)).unwrap().last().clone();
        let u = search_upper(&f, &nu).unwrap();
        assert!(check_upper(&f, &u));
        assert!(nu.le(&u));
        for (a, b) in nu.iter().zip(u.iter()) {
            assert!(rational_to_f64(&(b - a)) < 1e-60);
        }
    }

    #[test]
    fn cone_vector_scalar() {
        let f = parse_mspe("X = 1/2*X*X + 1/2;").unwrap();
        let mut b = Bounds::new(&f, NumVec(vec![q(7, 8)]));
        assert_eq!(cone_vector(&f, &NumVec(vec![q(7, 8)]), &b), Err(Error::MissingUpperBound));
        assert!(b.install_upper(&f, NumVec(vec![q(1, 1)])));
        let (d, verified) = cone_vector(&f, &NumVec(vec![q(7, 8)]), &b).unwrap();
        assert_eq!(d, NumVec(vec![q(8, 1)]));
        assert!(verified);
    }

    #[test]
    fn cone_threshold_tight_bounds() {
        let f = parse_mspe("X = 1/2*X*X + 1/2;").unwrap();
        let lower = Rational::one() - Rational::new(BigInt::one(), BigInt::one() << 20);
        let mut b = Bounds::new(&f, NumVec(vec![lower]));
        b.install_upper(&f, NumVec(vec![q(1, 1)]));
        let k = threshold_cone(&f, &NumVec(vec![q(8, 1)]), &b).unwrap();
        assert!(rational_to_f64(&k) < 1e-5);
        assert_eq!(ceil_int(&k), BigInt::one());
    }

    #[test]
    fn worked_example_certificate() {
        let f = parse_mspe(WORKED).unwrap();
        let trace = newton_solve::<Rational>(&f, &SolveOptions::max_iterations(14)).unwrap();
        let cert = certify(&f, &trace, Method::SccGeneral, &UpperChoice::One).unwrap();
        assert!(cert.bits >= 8);
        assert!(cert.value <= q(6, 1));
        let caps = [0.994, 0.984, 0.997];
        for ((_, hi), cap) in cert.enclosure.iter().zip(caps) {
            assert!(rational_to_f64(hi) < cap);
        }
        cert.verify(&f).unwrap();
        let back = Certificate::from_json(&cert.to_json()).unwrap();
        back.verify(&f).unwrap();
        assert_eq!(back.to_json(), cert.to_json());
    }

    #[test]
    fn too_few_iterations_rejected() {
        let f = parse_mspe(WORKED).unwrap();
        let trace = newton_solve::<Rational>(&f, &SolveOptions::max_iterations(5)).unwrap();
        let err = certify(&f, &trace, Method::SccGeneral, &UpperChoice::One).unwrap_err();
        assert_eq!(
            err,
            Error::NotCertifiable {
                iterations: 5,
                threshold: 6
            }
        );
    }

    #[test]
    fn target_bits_runs_long_enough() {
        let f = parse_mspe("X = 1/2*X*X + 1/2;")
            .unwrap()
            .with_kind(SystemKind::Termination { strict: false });
        let mut opts = CertifyOptions::new(Method::Ppda, UpperChoice::One);
        opts.target_bits = Some(12);
        let (cert, trace) = certify_newton(&f, &opts).unwrap();
        assert_eq!(cert.iterations, 16 + 12);
        assert_eq!(trace.last_step(), 28);
        assert_eq!(cert.bits, 12);
    }

    #[test]
    fn tampered_certificate_fails_verification() {
        let f = parse_mspe(WORKED).unwrap();
        let trace = newton_solve::<Rational>(&f, &SolveOptions::max_iterations(14)).unwrap();
        let mut cert = certify(&f, &trace, Method::SccGeneral, &UpperChoice::One).unwrap();
        cert.bits += 1;
        assert!(cert.verify(&f).is_err());
    }

    #[test]
    fn valid_bits_definition() {
        let nu = NumVec(vec![q(3, 4), q(1, 1)]);
        let reference = NumVec(vec![q(1, 1), q(1, 1)]);
        assert_eq!(valid_bits(&nu, &reference), Some(2));
        assert_eq!(valid_bits(&reference, &reference), None);
    }
}
