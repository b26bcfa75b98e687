//! Seeded random pPDAs and their termination systems, for test corpora.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ppda::{termination_mspe, Ppda, Rule, TerminationSystem};
use crate::scalar::Rational;

/// A random pPDA with `n_states` control states and `n_symbols` stack symbols.
///
/// Every (state, symbol) pair gets two to four rules whose probabilities are
/// positive multiples of 1/10 summing to 1; the first rule always pops, the
/// others push zero to two symbols. The result depends only on the arguments.
pub fn random_ppda(n_states: usize, n_symbols: usize, seed: u64) -> Ppda {
    assert!(n_states > 0 && n_symbols > 0, "need at least one state and one symbol");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<String> = (0..n_states).map(|i| format!("p{i}")).collect();
    let symbols: Vec<String> = (0..n_symbols).map(|i| ((b'A' + (i % 26) as u8) as char).to_string()).collect();

    let mut rules = Vec::new();
    for p in &states {
        for x in &symbols {
            let count = rng.gen_range(2..=4);
            for (k, tenths) in split_tenths(&mut rng, count).into_iter().enumerate() {
                let push_len = if k == 0 { 0 } else { rng.gen_range(0..=2) };
                rules.push(Rule {
                    from: p.clone(),
                    symbol: x.clone(),
                    prob: Rational::new(BigInt::from(tenths), BigInt::from(10)),
                    to: states.choose(&mut rng).expect("nonempty").clone(),
                    push: (0..push_len)
                        .map(|_| symbols.choose(&mut rng).expect("nonempty").clone())
                        .collect(),
                });
            }
        }
    }
    Ppda::new(rules).expect("generated rules are well formed")
}

/// `count` positive integers summing to 10.
fn split_tenths(rng: &mut impl Rng, count: usize) -> Vec<u32> {
    let mut cuts: Vec<u32> = (1..10).collect();
    cuts.shuffle(rng);
    let mut cuts = cuts[..count - 1].to_vec();
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(count);
    let mut prev = 0;
    for c in cuts.into_iter().chain([10]) {
        parts.push(c - prev);
        prev = c;
    }
    parts
}

/// Termination system of [`random_ppda`], retrying with derived seeds in the
/// rare case that every triple is unproductive.
pub fn random_termination_system(n_states: usize, n_symbols: usize, seed: u64) -> Result<TerminationSystem> {
    let mut last = Error::AllVariablesUnproductive;
    for attempt in 0..16u64 {
        let derived = seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        match termination_mspe(&random_ppda(n_states, n_symbols, derived)) {
            Ok(t) => return Ok(t),
            Err(e) => last = e,
        }
    }
    Err(last)
}
