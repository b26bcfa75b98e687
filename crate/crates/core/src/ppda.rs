//! Probabilistic pushdown automata, back-button processes, and their
//! termination systems.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::msp::{Monomial, Msp, Polynomial, SystemKind};
use crate::scalar::{compact_string, Rational};
use crate::transform::clean;

/// `from symbol --prob--> to push`, where `push` has at most two symbols
/// (leftmost is the new top of stack).
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub from: String,
    pub symbol: String,
    pub prob: Rational,
    pub to: String,
    pub push: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ppda {
    states: Vec<String>,
    symbols: Vec<String>,
    rules: Vec<Rule>,
}

impl Ppda {
    /// Validates rule shapes and that outgoing probabilities of every
    /// (state, symbol) pair with rules sum to exactly 1.
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        let mut sums: BTreeMap<(String, String), Rational> = BTreeMap::new();
        let mut states = BTreeSet::new();
        let mut symbols = BTreeSet::new();
        for r in &rules {
            if r.push.len() > 2 {
                return Err(Error::RhsTooLong {
                    state: r.from.clone(),
                    symbol: r.symbol.clone(),
                });
            }
            if r.prob.is_zero() || r.prob > Rational::one() {
                return Err(Error::ProbabilitySumViolation {
                    state: r.from.clone(),
                    symbol: r.symbol.clone(),
                    sum: compact_string(&r.prob),
                });
            }
            *sums
                .entry((r.from.clone(), r.symbol.clone()))
                .or_insert_with(Rational::zero) += &r.prob;
            states.insert(r.from.clone());
            states.insert(r.to.clone());
            symbols.insert(r.symbol.clone());
            symbols.extend(r.push.iter().cloned());
        }
        for ((state, symbol), sum) in sums {
            if !sum.is_one() {
                return Err(Error::ProbabilitySumViolation {
                    state,
                    symbol,
                    sum: compact_string(&sum),
                });
            }
        }
        Ok(Ppda {
            states: states.into_iter().collect(),
            symbols: symbols.into_iter().collect(),
            rules,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Every (p, X) that has rules pops to every control state with positive
    /// probability.
    pub fn is_strict(&self) -> bool {
        let mut pops: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
        for r in &self.rules {
            let entry = pops.entry((r.from.as_str(), r.symbol.as_str())).or_default();
            if r.push.is_empty() {
                entry.insert(r.to.as_str());
            }
        }
        pops.values().all(|targets| targets.len() == self.states.len())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&format!("rule {} {} -> {} {}", r.from, r.symbol, compact_string(&r.prob), r.to));
            for s in &r.push {
                out.push(' ');
                out.push_str(s);
            }
            out.push_str(";\n");
        }
        out
    }
}

/// Termination system of a pPDA together with the triples that survived
/// cleaning, in variable order.
#[derive(Debug, Clone)]
pub struct TerminationSystem {
    pub msp: Msp,
    pub triples: Vec<(String, String, String)>,
    pub removed: Vec<(String, String, String)>,
}

pub fn triple_name(p: &str, x: &str, q: &str) -> String {
    format!("[{p}.{x}.{q}]")
}

/// One variable `[p.X.q]` per triple, ordered lexicographically by (p, X, q):
///
/// `[pXq] = sum_{pX->rYZ} x * sum_t [rYt][tZq] + sum_{pX->rY} x * [rYq] + sum_{pX->q} x`
///
/// The result is cleaned; unproductive triples are reported in `removed`.
pub fn termination_mspe(ppda: &Ppda) -> Result<TerminationSystem> {
    let states = ppda.states();
    let symbols = ppda.symbols();
    let ns = states.len();
    let state_ix: BTreeMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let sym_ix: BTreeMap<&str, usize> = symbols.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let var = |p: usize, x: usize, q: usize| (p * symbols.len() + x) * ns + q;

    let n = ns * symbols.len() * ns;
    let mut terms: Vec<Vec<Monomial>> = vec![Vec::new(); n];
    for r in ppda.rules() {
        let p = state_ix[r.from.as_str()];
        let x = sym_ix[r.symbol.as_str()];
        let to = state_ix[r.to.as_str()];
        for q in 0..ns {
            let target = &mut terms[var(p, x, q)];
            match r.push.as_slice() {
                [] if to == q => target.push(Monomial::constant(r.prob.clone())),
                [] => {}
                [y] => {
                    let y = sym_ix[y.as_str()];
                    target.push(Monomial::new(r.prob.clone(), [(var(to, y, q), 1)]));
                }
                [y, z] => {
                    let (y, z) = (sym_ix[y.as_str()], sym_ix[z.as_str()]);
                    for t in 0..ns {
                        target.push(Monomial::new(r.prob.clone(), [(var(to, y, t), 1), (var(t, z, q), 1)]));
                    }
                }
                _ => unreachable!("validated on construction"),
            }
        }
    }

    let mut triples = Vec::with_capacity(n);
    for p in states {
        for x in symbols {
            for q in states {
                triples.push((p.clone(), x.clone(), q.clone()));
            }
        }
    }
    let names = triples.iter().map(|(p, x, q)| triple_name(p, x, q)).collect();
    let raw = Msp::new(names, terms.into_iter().map(Polynomial::new).collect())?;
    let (cleaned, removed_ix) = clean(&raw)?;
    let removed_set: BTreeSet<usize> = removed_ix.iter().copied().collect();
    let removed = removed_ix.iter().map(|&i| triples[i].clone()).collect();
    let triples = triples
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !removed_set.contains(i))
        .map(|(_, t)| t)
        .collect();
    Ok(TerminationSystem {
        msp: cleaned.with_kind(SystemKind::Termination {
            strict: ppda.is_strict(),
        }),
        triples,
        removed,
    })
}

/// A back-button process: one control state, pages as stack symbols, rules
/// `pA --b_A--> p` and `pA --l_AB--> pBA`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackButton {
    pages: Vec<String>,
    back: Vec<Rational>,
    links: Vec<(usize, usize, Rational)>,
}

impl BackButton {
    /// Pages keep declaration order. Requires `b_A > 0` and
    /// `b_A + sum_B l_AB = 1` for every page.
    pub fn new(pages: Vec<(String, Rational)>, links: Vec<(String, String, Rational)>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, (id, b)) in pages.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidBackButton(format!("page `{id}` declared twice")));
            }
            if b.is_zero() {
                return Err(Error::InvalidBackButton(format!("page `{id}` has back probability 0")));
            }
        }
        let mut totals: Vec<Rational> = pages.iter().map(|(_, b)| b.clone()).collect();
        let mut resolved = Vec::with_capacity(links.len());
        for (a, b, l) in links {
            let ia = *index
                .get(&a)
                .ok_or_else(|| Error::InvalidBackButton(format!("link from undeclared page `{a}`")))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| Error::InvalidBackButton(format!("link to undeclared page `{b}`")))?;
            if l.is_zero() {
                continue;
            }
            totals[ia] += &l;
            resolved.push((ia, ib, l));
        }
        for (i, t) in totals.iter().enumerate() {
            if !t.is_one() {
                return Err(Error::InvalidBackButton(format!(
                    "probabilities of page `{}` sum to {}",
                    pages[i].0,
                    compact_string(t)
                )));
            }
        }
        Ok(BackButton {
            back: pages.iter().map(|(_, b)| b.clone()).collect(),
            pages: pages.into_iter().map(|(id, _)| id).collect(),
            links: resolved,
        })
    }

    pub fn pages(&self) -> &[String] {
        &self.pages
    }

    /// The same process as a one-state pPDA with control state `p`.
    pub fn to_ppda(&self) -> Ppda {
        let mut rules = Vec::new();
        for (i, page) in self.pages.iter().enumerate() {
            rules.push(Rule {
                from: "p".into(),
                symbol: page.clone(),
                prob: self.back[i].clone(),
                to: "p".into(),
                push: vec![],
            });
            for (a, b, l) in &self.links {
                if *a == i {
                    rules.push(Rule {
                        from: "p".into(),
                        symbol: page.clone(),
                        prob: l.clone(),
                        to: "p".into(),
                        push: vec![self.pages[*b].clone(), page.clone()],
                    });
                }
            }
        }
        Ppda::new(rules).expect("back-button processes are valid pPDAs")
    }
}

/// `[pAp] = b_A + [pAp] * sum_B l_AB [pBp]`, one variable per page, named by
/// the page id.
pub fn backbutton_mspe(bb: &BackButton) -> Msp {
    let equations = (0..bb.pages.len())
        .map(|a| {
            let mut terms = vec![Monomial::constant(bb.back[a].clone())];
            for (from, to, l) in &bb.links {
                if *from == a {
                    terms.push(Monomial::new(l.clone(), [(a, 1), (*to, 1)]));
                }
            }
            Polynomial::new(terms)
        })
        .collect();
    Msp::new(bb.pages.clone(), equations)
        .expect("pages are distinct and non-empty")
        .with_kind(SystemKind::Termination { strict: true })
}
