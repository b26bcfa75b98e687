//! System transformations: removing unproductive variables and reducing to
//! degree at most two.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::msp::{Monomial, Msp, Polynomial, SystemKind};
use crate::scalar::Rational;

/// Productive variables.
///
/// Runs n Kleene steps over the positivity abstraction: with positive
/// coefficients, component i of the k-th Kleene iterate is non-zero exactly
/// when the boolean iterate is true. Stops early once stable.
pub fn productive(f: &Msp) -> Vec<bool> {
    let n = f.dim();
    let mut state = vec![false; n];
    for _ in 0..n {
        let next: Vec<bool> = f
            .equations()
            .iter()
            .map(|p| p.terms().iter().any(|m| m.exps.iter().all(|&(v, _)| state[v])))
            .collect();
        if next == state {
            break;
        }
        state = next;
    }
    state
}

/// Remove unproductive variables, substituting 0 for them everywhere.
/// Returns the cleaned system and the removed indices (in the input system).
pub fn clean(f: &Msp) -> Result<(Msp, Vec<usize>)> {
    let prod = productive(f);
    let removed: Vec<usize> = (0..f.dim()).filter(|&i| !prod[i]).collect();
    if removed.is_empty() {
        return Ok((f.clone(), removed));
    }
    let keep: Vec<usize> = (0..f.dim()).filter(|&i| prod[i]).collect();
    if keep.is_empty() {
        return Err(Error::AllVariablesUnproductive);
    }
    let values: Vec<Option<Rational>> = prod
        .iter()
        .map(|&p| if p { None } else { Some(Rational::zero()) })
        .collect();
    let cleaned = f.restrict(&keep, &values)?.with_kind(f.kind());
    Ok((cleaned, removed))
}

/// Result of [`quadratize`]: the new system and, for every original
/// variable, its index in the new system.
#[derive(Debug, Clone)]
pub struct Quadratized {
    pub msp: Msp,
    pub var_map: Vec<usize>,
    pub auxiliaries: usize,
}

/// Introduce auxiliary variables for products until every monomial has degree
/// at most two.
///
/// A power `X^e` is split along the binary expansion of `e` using squaring
/// auxiliaries (`X^2`, `X^4`, ...); the resulting factors are then paired left
/// to right. Every auxiliary product is introduced once and reused.
pub fn quadratize(f: &Msp) -> Quadratized {
    let n = f.dim();
    let var_map: Vec<usize> = (0..n).collect();
    if f.is_quadratic() {
        return Quadratized {
            msp: f.clone(),
            var_map,
            auxiliaries: 0,
        };
    }
    let mut builder = AuxBuilder {
        names: f.names().to_vec(),
        aux_eqs: Vec::new(),
        memo: HashMap::new(),
        n_orig: n,
    };
    let mut equations = Vec::with_capacity(n);
    for p in f.equations() {
        let terms: Vec<Monomial> = p
            .terms()
            .iter()
            .map(|m| {
                if m.degree() <= 2 {
                    return m.clone();
                }
                let mut factors = Vec::new();
                for &(v, e) in &m.exps {
                    let mut bit = 0;
                    while (e >> bit) > 0 {
                        if (e >> bit) & 1 == 1 {
                            factors.push(builder.power(v, bit));
                        }
                        bit += 1;
                    }
                }
                while factors.len() > 2 {
                    let a = factors.remove(0);
                    let b = factors.remove(0);
                    factors.insert(0, builder.product(a, b));
                }
                Monomial::new(m.coeff.clone(), factors.into_iter().map(|v| (v, 1)))
            })
            .collect();
        equations.push(Polynomial::new(terms));
    }
    let auxiliaries = builder.aux_eqs.len();
    equations.extend(builder.aux_eqs);
    let kind = match f.kind() {
        SystemKind::Termination { .. } => SystemKind::General,
        k => k,
    };
    let msp = Msp::new(builder.names, equations)
        .expect("auxiliary names are fresh")
        .with_kind(kind);
    Quadratized {
        msp,
        var_map,
        auxiliaries,
    }
}

struct AuxBuilder {
    names: Vec<String>,
    aux_eqs: Vec<Polynomial>,
    memo: HashMap<(usize, usize), usize>,
    n_orig: usize,
}

impl AuxBuilder {
    /// Variable standing for `X_v^(2^bit)`.
    fn power(&mut self, v: usize, bit: u32) -> usize {
        let mut cur = v;
        for _ in 0..bit {
            cur = self.product(cur, cur);
        }
        cur
    }

    fn product(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let index = self.names.len();
        let mut k = index - self.n_orig + 1;
        let name = loop {
            let candidate = format!("_aux{k}");
            if !self.names.contains(&candidate) {
                break candidate;
            }
            k += 1;
        };
        self.names.push(name);
        self.aux_eqs
            .push(Polynomial::new([Monomial::new(Rational::one(), [(key.0, 1), (key.1, 1)])]));
        self.memo.insert(key, index);
        index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_mspe;

    #[test]
    fn removes_unproductive_variable() {
        // kappa(1) = (1/2, 0), kappa(2) = (1/2, 0)
        let f = parse_mspe("X1 = 1/2*X2 + 1/2; X2 = X2*X1;").unwrap();
        assert_eq!(productive(&f), vec![true, false]);
        let (g, removed) = clean(&f).unwrap();
        assert_eq!(removed, vec![1]);
        assert_eq!(g, parse_mspe("X1 = 1/2;").unwrap());
        assert!(g.is_clean() && !f.is_clean());
    }

    #[test]
    fn clean_is_identity_on_clean_systems() {
        let f = parse_mspe("X1 = 0.4*X2*X1 + 0.6; X2 = 0.3*X1*X2 + 0.4*X3*X2 + 0.3; X3 = 0.3*X1*X3 + 0.7;").unwrap();
        let (g, removed) = clean(&f).unwrap();
        assert!(removed.is_empty());
        assert_eq!(g, f);
    }

    #[test]
    fn productivity_needs_several_rounds() {
        let f = parse_mspe("A = B*B; B = C; C = 1/2*A + 1/2;").unwrap();
        assert_eq!(productive(&f), vec![true, true, true]);
    }

    #[test]
    fn all_unproductive() {
        let f = parse_mspe("X = X*X;").unwrap();
        assert_eq!(clean(&f).unwrap_err(), Error::AllVariablesUnproductive);
    }

    #[test]
    fn cubic_needs_one_auxiliary() {
        let f = parse_mspe("X = 1/2*X^3 + 1/2;").unwrap();
        let q = quadratize(&f);
        assert_eq!(q.auxiliaries, 1);
        assert_eq!(q.msp, parse_mspe("X = 1/2*_aux1*X + 1/2; _aux1 = X*X;").unwrap());
        assert_eq!(q.var_map, vec![0]);
    }

    #[test]
    fn quartic_uses_repeated_squaring() {
        let f = parse_mspe("X = 1/4*X^4 + 3/4;").unwrap();
        let q = quadratize(&f);
        assert_eq!(q.auxiliaries, 2);
        assert_eq!(
            q.msp,
            parse_mspe("X = 1/4*_aux2 + 3/4; _aux1 = X*X; _aux2 = _aux1*_aux1;").unwrap()
        );
        assert!(q.msp.is_strongly_connected());
    }

    #[test]
    fn auxiliaries_are_shared() {
        let f = parse_mspe("X = 1/4*X^3 + 1/4*X^2*Y + 1/2; Y = 1/2*X*X*X + 1/2;").unwrap();
        let q = quadratize(&f);
        assert!(q.msp.is_quadratic());
        assert_eq!(q.auxiliaries, 1);
    }

    #[test]
    fn quadratic_systems_unchanged() {
        let f = parse_mspe("X = 1/2*X*X + 1/2;").unwrap();
        let q = quadratize(&f);
        assert_eq!(q.msp, f);
        assert_eq!(q.auxiliaries, 0);
    }

    #[test]
    fn aux_names_avoid_collisions() {
        let f = parse_mspe("_aux1 = 1/2*_aux1^3 + 1/2;").unwrap();
        let q = quadratize(&f);
        assert_eq!(q.msp.names(), ["_aux1", "_aux2"]);
    }
}
