//! Exhaustive and sampled diagnostics of the support landscape.
//!
//! Every size-`k` support `S` has a best fit `min_β ‖Y − X_S β‖₂`; these
//! values, grouped by overlap with the true support or compared across
//! single-swap neighbours, decide the overlap gap verdicts and local minima
//! reported here.

mod certificate;
mod dlm;
mod localmin;
mod profile;

pub use certificate::{
    build_certificate, certificate_l1_norm, certificate_lambda, noise_fit_bound, pure_noise_best_fit, CertificateReport,
    NoiseFit, NoiseFitOptions,
};
pub use dlm::{augment_with_noise, dlm_aggregate_bound, dlm_check, DlmTriplet};
pub use localmin::{find_nontrivial_local_minima, LocalMinimum};
pub use profile::{ogp_check, ogp_scan, overlap_profile, r_grid, OgpReport, OverlapLevel, OverlapProfile, Verdict};

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::linalg::{least_squares_on_support, Matrix};
use crate::model::SparseVector;

/// Exhaustive enumeration or random sampling of supports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exact,
    Sampled,
}

impl std::str::FromStr for SearchMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "sampled" | "greedy" => Ok(Self::Sampled),
            other => crate::error::param_err(format!("unknown search mode '{other}' (exact | sampled)")),
        }
    }
}

/// Least squares of `y` on the columns `support`, zero elsewhere, with `‖y − X_S β_S‖₂`.
///
/// Rank-deficient column sets get the minimum-norm solution. Coefficients that
/// come out exactly zero are dropped from the returned vector.
pub fn best_on_support(x: &Matrix, y: &[f64], support: &[usize]) -> Result<(SparseVector, f64)> {
    if y.len() != x.rows() {
        return dim_err(format!("Y has length {}, X has {} rows", y.len(), x.rows()));
    }
    if support.iter().any(|&j| j >= x.cols()) || support.windows(2).any(|w| w[0] >= w[1]) {
        return dim_err("support must be strictly increasing and inside 0..p");
    }
    let (coef, resid) = least_squares_on_support(x, y, support);
    let beta = SparseVector::new(x.cols(), support.iter().copied().zip(coef).filter(|(_, v)| *v != 0.0))?;
    Ok((beta, resid))
}

/// Residual only; the hot path of every enumeration.
pub(crate) fn support_residual(x: &Matrix, y: &[f64], support: &[usize]) -> f64 {
    least_squares_on_support(x, y, support).1
}

/// `(value, support)` ordering used by every reduction: smaller value first,
/// then the lexicographically smaller support.
pub(crate) fn better(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}
