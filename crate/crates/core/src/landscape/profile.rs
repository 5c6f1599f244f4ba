//! Minimum residual per overlap level and overlap gap verdicts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{better, support_residual, SearchMode};
use crate::combinatorics::{binomial, check_budget, par_fold};
use crate::error::{param_err, Result};
use crate::model::Instance;
use crate::rng::{self, streams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapLevel {
    pub overlap: usize,
    pub min_residual: f64,
    pub argmin_support: Vec<usize>,
}

/// `levels[s]` holds the best fit among supports sharing `s` indices with the
/// true support; `None` when no support of that overlap was seen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapProfile {
    pub k: usize,
    pub levels: Vec<Option<OverlapLevel>>,
    pub exact: bool,
    pub supports_evaluated: u128,
}

impl OverlapProfile {
    pub fn min_residual(&self, s: usize) -> Option<f64> {
        self.levels.get(s)?.as_ref().map(|l| l.min_residual)
    }

    /// CSV with columns `overlap,min_residual,support`; indices separated by `;`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "overlap,min_residual,support")?;
        for level in self.levels.iter().flatten() {
            let s: Vec<String> = level.argmin_support.iter().map(|i| i.to_string()).collect();
            writeln!(out, "{},{:e},{}", level.overlap, level.min_residual, s.join(";"))?;
        }
        Ok(())
    }
}

type Levels = Vec<Option<(f64, Vec<usize>)>>;

fn offer(levels: &mut Levels, s: usize, value: f64, support: &[usize]) {
    match &levels[s] {
        Some((v, sup)) if !better((value, support), (*v, sup)) => {}
        _ => levels[s] = Some((value, support.to_vec())),
    }
}

fn merge_levels(mut a: Levels, b: Levels) -> Levels {
    for (s, slot) in b.into_iter().enumerate() {
        if let Some((v, sup)) = slot {
            offer(&mut a, s, v, &sup);
        }
    }
    a
}

fn overlap_with(support: &[usize], truth: &[usize]) -> usize {
    support.iter().filter(|j| truth.binary_search(j).is_ok()).count()
}

/// Exact mode enumerates every size-`k` support and refuses when there are
/// more than `budget`. Sampled mode draws `budget` supports per overlap level
/// (uniform within the level) and yields upper bounds on the level minima.
pub fn overlap_profile(instance: &Instance, mode: SearchMode, budget: u128, seed: u64) -> Result<OverlapProfile> {
    let (p, k) = (instance.dims.p, instance.beta_star.nnz());
    let truth = instance.beta_star.support();
    if k == 0 {
        return param_err("true support is empty");
    }
    let (x, y) = (&instance.x, &instance.y);
    let (levels, evaluated) = match mode {
        SearchMode::Exact => {
            let total = binomial(p, k);
            check_budget(total, budget)?;
            let levels = par_fold(
                p,
                k,
                || vec![None; k + 1],
                |acc: &mut Levels, _, s| offer(acc, overlap_with(s, truth), support_residual(x, y, s), s),
                merge_levels,
            );
            (levels, total)
        }
        SearchMode::Sampled => {
            let outside: Vec<usize> = (0..p).filter(|j| truth.binary_search(j).is_err()).collect();
            let mut sampler = rng::stream(seed, streams::SAMPLING);
            let mut levels: Levels = vec![None; k + 1];
            let mut evaluated = 0u128;
            for s in 0..=k {
                if k - s > outside.len() {
                    continue;
                }
                for _ in 0..budget {
                    let mut sup = rng::sample_from(&mut sampler, truth, s);
                    sup.extend(rng::sample_from(&mut sampler, &outside, k - s));
                    sup.sort_unstable();
                    let value = support_residual(x, y, &sup);
                    offer(&mut levels, s, value, &sup);
                    evaluated += 1;
                }
            }
            (levels, evaluated)
        }
    };
    let levels = levels
        .into_iter()
        .enumerate()
        .map(|(s, l)| l.map(|(min_residual, argmin_support)| OverlapLevel { overlap: s, min_residual, argmin_support }))
        .collect();
    Ok(OverlapProfile { k, levels, exact: mode == SearchMode::Exact, supports_evaluated: evaluated })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// Sampled profile: the minima are only upper bounds, so a gap cannot be confirmed.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OgpReport {
    pub r: f64,
    pub verdict: Verdict,
    pub holds: bool,
    /// `‖Y − Xβ*‖₂ < r`.
    pub condition1: bool,
    /// Some support disjoint from the truth fits below `r`; `None` if undecided.
    pub condition2: Option<bool>,
    /// A run of intermediate overlap levels with every fit at least `r`.
    pub condition3: Option<bool>,
    /// Longest run `[s₁, s₂] ⊂ [1, k−1]` of levels whose minima are `≥ r`.
    pub gap_levels: Option<(usize, usize)>,
    /// `(s₁ − ½)/k` and `(s₂ + ½)/k`: fractions bracketing exactly the gap levels.
    pub zeta1: Option<f64>,
    pub zeta2: Option<f64>,
    pub residual_at_beta_star: f64,
    /// Disjoint support fitting below `r`.
    pub low_overlap_witness: Option<Vec<usize>>,
}

fn longest_run(flags: &[bool], offset: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, &f) in flags.iter().enumerate().chain(std::iter::once((flags.len(), &false))) {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| i - s > b - a + 1) {
                    best = Some((s + offset, i - 1 + offset));
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Overlap gap verdict at radius `r`.
///
/// Holds when the truth fits below `r`, some disjoint support fits below `r`,
/// and some intermediate overlap levels `s ∈ [1, k−1]` have every fit at least
/// `r`. A single such level already gives real fractions `0 < ζ₁ < ζ₂ < 1` with
/// no overlap in `[ζ₁k, ζ₂k]` fitting below `r`.
pub fn ogp_check(profile: &OverlapProfile, residual_at_beta_star: f64, r: f64) -> Result<OgpReport> {
    if !(r > 0.0) || !r.is_finite() {
        return param_err(format!("r = {r} must be positive and finite"));
    }
    let k = profile.k;
    let condition1 = residual_at_beta_star < r;
    let level0 = profile.levels.first().and_then(|l| l.as_ref());
    let below0 = level0.map(|l| l.min_residual < r);
    let inner: Vec<Option<f64>> = (1..k).map(|s| profile.min_residual(s)).collect();
    let mut report = OgpReport {
        r,
        verdict: Verdict::Fails,
        holds: false,
        condition1,
        condition2: None,
        condition3: None,
        gap_levels: None,
        zeta1: None,
        zeta2: None,
        residual_at_beta_star,
        low_overlap_witness: level0.filter(|l| l.min_residual < r).map(|l| l.argmin_support.clone()),
    };
    if profile.exact {
        let flags: Vec<bool> = inner.iter().map(|m| m.is_some_and(|v| v >= r)).collect();
        let gap = longest_run(&flags, 1);
        report.condition2 = Some(below0 == Some(true));
        report.condition3 = Some(gap.is_some());
        if let Some((s1, s2)) = gap {
            report.gap_levels = gap;
            report.zeta1 = Some((s1 as f64 - 0.5) / k as f64);
            report.zeta2 = Some((s2 as f64 + 0.5) / k as f64);
        }
        report.holds = condition1 && report.condition2 == Some(true) && gap.is_some();
        report.verdict = if report.holds { Verdict::Holds } else { Verdict::Fails };
    } else {
        // sampled minima bound the true minima from above
        report.condition2 = if below0 == Some(true) { Some(true) } else { None };
        let surely_no_gap = inner.iter().all(|m| m.is_some_and(|v| v < r));
        report.condition3 = if surely_no_gap { Some(false) } else { None };
        report.verdict = if !condition1 || surely_no_gap { Verdict::Fails } else { Verdict::Unknown };
    }
    Ok(report)
}

/// `count` log-spaced radii from `0.5‖W‖₂` to `4‖W‖₂`.
pub fn r_grid(noise_norm: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = (0.5 * noise_norm, 4.0 * noise_norm);
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect(),
    }
}

pub fn ogp_scan(profile: &OverlapProfile, residual_at_beta_star: f64, grid: &[f64]) -> Result<Vec<OgpReport>> {
    grid.iter().map(|&r| ogp_check(profile, residual_at_beta_star, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_beta_star, BetaKind, Dimensions};

    fn instance(n: usize, sigma2: f64, seed: u64) -> Instance {
        let dims = Dimensions::new(n, 12, 3, sigma2).unwrap();
        let b = sample_beta_star(12, 3, BetaKind::Binary, 1.0, seed).unwrap();
        Instance::generate(dims, b, seed).unwrap()
    }

    fn profile_from(k: usize, minima: &[f64]) -> OverlapProfile {
        let levels = minima
            .iter()
            .enumerate()
            .map(|(s, &m)| Some(OverlapLevel { overlap: s, min_residual: m, argmin_support: vec![s] }))
            .collect();
        OverlapProfile { k, levels, exact: true, supports_evaluated: 0 }
    }

    #[test]
    fn noiseless_level_k_is_zero_and_feasible() {
        let inst = instance(10, 0.0, 1);
        let prof = overlap_profile(&inst, SearchMode::Exact, 1000, 0).unwrap();
        assert!(prof.min_residual(3).unwrap() < 1e-12);
        assert_eq!(prof.supports_evaluated, 220);
        for seed in 0..5 {
            let inst = instance(8, 1.0, seed);
            let prof = overlap_profile(&inst, SearchMode::Exact, 1000, 0).unwrap();
            assert!(prof.min_residual(3).unwrap() <= inst.noise_norm() + 1e-12);
        }
    }

    #[test]
    fn budget_refused() {
        let inst = instance(10, 0.5, 1);
        assert!(matches!(
            overlap_profile(&inst, SearchMode::Exact, 219, 0),
            Err(crate::Error::BudgetExceeded { needed: 220, budget: 219 })
        ));
    }

    #[test]
    fn sampled_bounds_exact_from_above() {
        for seed in 0..5 {
            let inst = instance(8, 0.5, seed);
            let exact = overlap_profile(&inst, SearchMode::Exact, 1000, 0).unwrap();
            let sampled = overlap_profile(&inst, SearchMode::Sampled, 10, seed).unwrap();
            assert!(!sampled.exact);
            for s in 0..=3 {
                assert!(sampled.min_residual(s).unwrap() >= exact.min_residual(s).unwrap());
            }
        }
    }

    #[test]
    fn verdict_cases() {
        let prof = profile_from(4, &[1.0, 5.0, 5.0, 0.5, 0.2]);
        let rep = ogp_check(&prof, 0.3, 2.0).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.gap_levels, Some((1, 2)));
        let (z1, z2) = (rep.zeta1.unwrap(), rep.zeta2.unwrap());
        assert!(0.0 < z1 && z1 < z2 && z2 < 1.0);
        // condition 1 fails
        assert!(!ogp_check(&prof, 2.0, 2.0).unwrap().holds);
        // every level fits below r
        let flat = profile_from(4, &[0.1, 0.1, 0.1, 0.1, 0.1]);
        let rep = ogp_check(&flat, 0.05, 1.0).unwrap();
        assert!(!rep.holds && rep.condition3 == Some(false));
        // single-level gap
        let one = profile_from(3, &[1.0, 3.0, 1.5, 0.2]);
        let rep = ogp_check(&one, 0.2, 2.0).unwrap();
        assert_eq!(rep.gap_levels, Some((1, 1)));
        assert!(rep.holds);
        assert!(ogp_check(&one, 0.2, 0.0).is_err());
    }

    #[test]
    fn longest_gap_is_reported() {
        let prof = profile_from(6, &[1.0, 5.0, 1.0, 5.0, 5.0, 5.0, 0.1]);
        assert_eq!(ogp_check(&prof, 0.1, 2.0).unwrap().gap_levels, Some((3, 5)));
    }

    #[test]
    fn sampled_verdicts_never_hold() {
        let mut prof = profile_from(4, &[1.0, 5.0, 5.0, 0.5, 0.2]);
        prof.exact = false;
        assert_eq!(ogp_check(&prof, 0.3, 2.0).unwrap().verdict, Verdict::Unknown);
        assert_eq!(ogp_check(&prof, 3.0, 2.0).unwrap().verdict, Verdict::Fails);
        let mut flat = profile_from(4, &[0.1; 5]);
        flat.exact = false;
        assert_eq!(ogp_check(&flat, 0.05, 1.0).unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn grid_endpoints() {
        let g = r_grid(2.0, 40);
        assert_eq!(g.len(), 40);
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[39] - 8.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_header() {
        let inst = instance(10, 0.5, 2);
        let prof = overlap_profile(&inst, SearchMode::Exact, 1000, 0).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("overlap,min_residual,support\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
