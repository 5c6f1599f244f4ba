//! Supports that no single swap improves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_on_support, support_residual};
use crate::combinatorics::{binomial, check_budget, colex_rank, colex_unrank, par_fold};
use crate::error::{param_err, Result};
use crate::model::{Instance, SparseVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub support: Vec<usize>,
    pub beta: SparseVector,
    pub residual: f64,
}

/// Every size-`k` support other than the true one whose best fit is no worse
/// than the best fit of any support obtained by exchanging one index.
/// Results are in lexicographic order of support.
pub fn find_nontrivial_local_minima(instance: &Instance, budget: u128) -> Result<Vec<LocalMinimum>> {
    let (p, k) = (instance.dims.p, instance.beta_star.nnz());
    if k == 0 || k >= p {
        return param_err("need 0 < |support(β*)| < p");
    }
    let total = binomial(p, k);
    check_budget(total, budget)?;
    let (x, y) = (&instance.x, &instance.y);
    let residuals: Vec<f64> = par_fold(
        p,
        k,
        Vec::new,
        |acc: &mut Vec<f64>, _, s| acc.push(support_residual(x, y, s)),
        |mut a, b| {
            a.extend(b);
            a
        },
    );
    let truth_rank = colex_rank(instance.beta_star.support());
    let mut found: Vec<Vec<usize>> = (0..total as u64)
        .into_par_iter()
        .filter_map(|rank| {
            let rank = rank as u128;
            if rank == truth_rank {
                return None;
            }
            let support = colex_unrank(rank, k);
            let own = residuals[rank as usize];
            let mut neighbour = support.clone();
            for out in 0..k {
                for candidate in 0..p {
                    if support.binary_search(&candidate).is_ok() {
                        continue;
                    }
                    neighbour.copy_from_slice(&support);
                    neighbour[out] = candidate;
                    neighbour.sort_unstable();
                    if residuals[colex_rank(&neighbour) as usize] < own {
                        return None;
                    }
                }
            }
            Some(support)
        })
        .collect();
    found.sort();
    found
        .into_iter()
        .map(|support| {
            let (beta, residual) = best_on_support(x, y, &support)?;
            Ok(LocalMinimum { support, beta, residual })
        })
        .collect()
}
