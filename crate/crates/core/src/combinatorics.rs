//! Colexicographic enumeration of `k`-subsets of `0..p`.
//!
//! A subset `c₀ < c₁ < … < c_{k-1}` has colex rank `Σ C(cᵢ, i+1)`. Ranks are
//! contiguous, so the subset space splits into independent rank ranges that
//! are walked in parallel and merged in rank order.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at each step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Refuses enumerations larger than `budget`.
pub fn check_budget(needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// Colex rank of a sorted subset.
pub fn colex_rank(subset: &[usize]) -> u128 {
    subset.iter().enumerate().map(|(i, &c)| binomial(c, i + 1)).sum()
}

/// Subset of size `k` with the given colex rank.
pub fn colex_unrank(mut rank: u128, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for i in (0..k).rev() {
        // largest c with C(c, i+1) <= rank
        let mut c = i;
        while binomial(c + 1, i + 1) <= rank {
            c += 1;
        }
        out[i] = c;
        rank -= binomial(c, i + 1);
    }
    out
}

/// Advances `subset` to its colex successor within `0..p`. Returns false after the last subset.
pub fn colex_next(subset: &mut [usize], p: usize) -> bool {
    let k = subset.len();
    for i in 0..k {
        let limit = if i + 1 < k { subset[i + 1] } else { p };
        if subset[i] + 1 < limit {
            subset[i] += 1;
            for (j, c) in subset[..i].iter_mut().enumerate() {
                *c = j;
            }
            return true;
        }
    }
    false
}

/// Visits every `k`-subset of `0..p` with rank in `[start, end)`, in colex order.
pub fn for_each_in_range(p: usize, k: usize, start: u128, end: u128, mut f: impl FnMut(u128, &[usize])) {
    if start >= end {
        return;
    }
    let mut subset = colex_unrank(start, k);
    let mut rank = start;
    loop {
        f(rank, &subset);
        rank += 1;
        if rank >= end || !colex_next(&mut subset, p) {
            break;
        }
    }
}

/// Folds over all `k`-subsets of `0..p` in parallel chunks of consecutive ranks.
///
/// `merge` must be associative; chunk results are combined in rank order so
/// the outcome does not depend on scheduling.
pub fn par_fold<A, I, F, M>(p: usize, k: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, u128, &[usize]) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let total = binomial(p, k);
    const CHUNK: u128 = 4096;
    let chunks = total.div_ceil(CHUNK).max(1) as u64;
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c as u128 * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut acc = init();
            for_each_in_range(p, k, start, end, |rank, s| fold(&mut acc, rank, s));
            acc
        })
        .reduce(&init, &merge)
}
