//! Historical click-through features computed from per-document statistics.
//!
//! All six click features are functions of a document's per-position counts
//! `(n_k, chi_k)` and a per-position weight vector:
//!
//! - CTR            `sum(chi) / n`
//! - IPW-CTR        `(1/n) * sum_k chi_k / theta_k`
//! - Empirical-CTR  IPW-CTR with observed click rates as weights
//! - SNIPS          `sum_k (chi_k / theta_k) / sum_k (n_k / theta_k)`
//! - COEC           `sum(chi) / sum_k (n_k * w_k)` with empirical weights
//! - IPW-COEC       COEC with the true curve as weights
//! - clipped IPW-CTR IPW-CTR with weights floored at a clip threshold
//!
//! COEC and IPW-COEC are one formula parameterized on the weight vector, as
//! are IPW-CTR and Empirical-CTR; only the validation semantics differ. A
//! document with zero impressions has no feature value (`Missing`) — the
//! cold-start fallback is a ranking-time policy, not an estimator concern.

use crate::log::DocumentStats;
use crate::position::PropensityVector;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// The ranking signals the harness can evaluate.
///
/// `Proxy` and `TrueRelevance` are baselines read off the world, not computed
/// from clicks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureKind {
    Ctr,
    IpwCtr,
    EmpiricalCtr,
    Snips,
    Coec,
    IpwCoec,
    ClippedIpwCtr,
    Proxy,
    TrueRelevance,
}

impl FeatureKind {
    /// The features computed from the training log.
    pub const CLICK_FEATURES: [FeatureKind; 7] = [
        FeatureKind::Ctr,
        FeatureKind::IpwCtr,
        FeatureKind::EmpiricalCtr,
        FeatureKind::Snips,
        FeatureKind::Coec,
        FeatureKind::IpwCoec,
        FeatureKind::ClippedIpwCtr,
    ];

    /// Every ranking signal, click features first.
    pub const ALL: [FeatureKind; 9] = [
        FeatureKind::Ctr,
        FeatureKind::IpwCtr,
        FeatureKind::EmpiricalCtr,
        FeatureKind::Snips,
        FeatureKind::Coec,
        FeatureKind::IpwCoec,
        FeatureKind::ClippedIpwCtr,
        FeatureKind::Proxy,
        FeatureKind::TrueRelevance,
    ];

    pub fn is_click_feature(self) -> bool {
        !matches!(self, FeatureKind::Proxy | FeatureKind::TrueRelevance)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Ctr => "CTR",
            FeatureKind::IpwCtr => "IPW_CTR",
            FeatureKind::EmpiricalCtr => "EMPIRICAL_CTR",
            FeatureKind::Snips => "SNIPS",
            FeatureKind::Coec => "COEC",
            FeatureKind::IpwCoec => "IPW_COEC",
            FeatureKind::ClippedIpwCtr => "CLIPPED_IPW_CTR",
            FeatureKind::Proxy => "PROXY",
            FeatureKind::TrueRelevance => "TRUE_RELEVANCE",
        }
    }

    /// Stable identifier used for seed derivation; never reordered.
    pub fn stable_id(self) -> u64 {
        match self {
            FeatureKind::Ctr => 1,
            FeatureKind::IpwCtr => 2,
            FeatureKind::EmpiricalCtr => 3,
            FeatureKind::Snips => 4,
            FeatureKind::Coec => 5,
            FeatureKind::IpwCoec => 6,
            FeatureKind::ClippedIpwCtr => 7,
            FeatureKind::Proxy => 8,
            FeatureKind::TrueRelevance => 9,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A feature value, or `Missing` for a document with no impressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Missing,
    Present(f64),
}

impl FeatureValue {
    pub fn value(self) -> Option<f64> {
        match self {
            FeatureValue::Missing => None,
            FeatureValue::Present(v) => Some(v),
        }
    }

    pub fn is_missing(self) -> bool {
        matches!(self, FeatureValue::Missing)
    }

    pub fn unwrap_or(self, default: f64) -> f64 {
        self.value().unwrap_or(default)
    }

    #[track_caller]
    pub fn expect_present(self) -> f64 {
        match self {
            FeatureValue::Present(v) => v,
            FeatureValue::Missing => panic!("feature value is missing"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("zero or missing propensity at occupied position {position}")]
    DivisionHazard { position: u32 },
    #[error("weight vector has no usable value at occupied position {position}")]
    PropensityCoverage { position: u32 },
    #[error("expected clicks are zero over {impressions} impressions")]
    DegenerateDenominator { impressions: u64 },
    #[error("clip floor {0} outside (0, 1]")]
    InvalidClipFloor(f64),
}

/// Which error an unusable weight maps to; IPW uses the true curve (a zero is
/// a division hazard), empirical weighting is a coverage problem.
#[derive(Clone, Copy)]
enum WeightErr {
    Hazard,
    Coverage,
}

fn weight_at(
    weights: &PropensityVector,
    position: u32,
    err: WeightErr,
) -> Result<f64, FeatureError> {
    match weights.get(position) {
        Some(w) if w > 0.0 => Ok(w),
        _ => Err(match err {
            WeightErr::Hazard => FeatureError::DivisionHazard { position },
            WeightErr::Coverage => FeatureError::PropensityCoverage { position },
        }),
    }
}

/// `(1/n) * sum_k chi_k / w_k` over occupied positions.
fn inverse_weighted_mean(
    stats: &DocumentStats,
    weights: &PropensityVector,
    err: WeightErr,
    clip_floor: Option<f64>,
) -> Result<FeatureValue, FeatureError> {
    let n = stats.total_impressions();
    if n == 0 {
        return Ok(FeatureValue::Missing);
    }
    let mut sum = 0.0;
    for (position, _, chi) in stats.occupied_positions() {
        let mut w = weight_at(weights, position, err)?;
        if let Some(floor) = clip_floor {
            w = w.max(floor);
        }
        sum += f64::from(chi) / w;
    }
    Ok(FeatureValue::Present(sum / n as f64))
}

/// `sum(chi) / sum_k n_k * w_k` over occupied positions.
fn clicks_over_expected(
    stats: &DocumentStats,
    weights: &PropensityVector,
) -> Result<FeatureValue, FeatureError> {
    let n = stats.total_impressions();
    if n == 0 {
        return Ok(FeatureValue::Missing);
    }
    let mut expected = 0.0;
    for (position, n_k, _) in stats.occupied_positions() {
        let w = weight_at(weights, position, WeightErr::Coverage)?;
        expected += f64::from(n_k) * w;
    }
    if expected <= 0.0 {
        return Err(FeatureError::DegenerateDenominator { impressions: n });
    }
    Ok(FeatureValue::Present(stats.total_clicks() as f64 / expected))
}

/// Raw click-through rate: biased low whenever any occupied position has
/// examination probability below one.
pub fn ctr(stats: &DocumentStats) -> FeatureValue {
    let n = stats.total_impressions();
    if n == 0 {
        FeatureValue::Missing
    } else {
        FeatureValue::Present(stats.total_clicks() as f64 / n as f64)
    }
}

/// Inverse propensity weighted CTR; unbiased for document relevance under
/// the position model, at the price of variance that grows as `1/theta^2`.
pub fn ipw_ctr(
    stats: &DocumentStats,
    theta: &PropensityVector,
) -> Result<FeatureValue, FeatureError> {
    inverse_weighted_mean(stats, theta, WeightErr::Hazard, None)
}

/// IPW-CTR with observed per-position click rates as weights. Because the
/// ranker puts relevant documents high, those weights overstate position
/// bias and the feature is biased upward relative to IPW-CTR.
pub fn empirical_ctr(
    stats: &DocumentStats,
    theta_hat: &PropensityVector,
) -> Result<FeatureValue, FeatureError> {
    inverse_weighted_mean(stats, theta_hat, WeightErr::Coverage, None)
}

/// Self-normalized IPW: the inverse-propensity click sum divided by the
/// inverse-propensity impression sum. Biased downward whenever any occupied
/// position has weight below one, but bounded in [0, 1].
pub fn snips(
    stats: &DocumentStats,
    theta: &PropensityVector,
) -> Result<FeatureValue, FeatureError> {
    let n = stats.total_impressions();
    if n == 0 {
        return Ok(FeatureValue::Missing);
    }
    let mut clicks = 0.0;
    let mut impressions = 0.0;
    for (position, n_k, chi) in stats.occupied_positions() {
        let w = weight_at(theta, position, WeightErr::Hazard)?;
        clicks += f64::from(chi) / w;
        impressions += f64::from(n_k) / w;
    }
    Ok(FeatureValue::Present(clicks / impressions))
}

/// Clicks over expected clicks with empirical weights.
pub fn coec(
    stats: &DocumentStats,
    theta_hat: &PropensityVector,
) -> Result<FeatureValue, FeatureError> {
    clicks_over_expected(stats, theta_hat)
}

/// Clicks over expected clicks with the true curve as weights; unbiased for
/// relevance when the document's position schedule is fixed.
pub fn ipw_coec(
    stats: &DocumentStats,
    theta: &PropensityVector,
) -> Result<FeatureValue, FeatureError> {
    clicks_over_expected(stats, theta)
}

/// IPW-CTR with weights floored at `clip_floor`, trading bias for bounded
/// variance.
pub fn clipped_ipw_ctr(
    stats: &DocumentStats,
    theta: &PropensityVector,
    clip_floor: f64,
) -> Result<FeatureValue, FeatureError> {
    if !(clip_floor > 0.0 && clip_floor <= 1.0) {
        return Err(FeatureError::InvalidClipFloor(clip_floor));
    }
    inverse_weighted_mean(stats, theta, WeightErr::Hazard, Some(clip_floor))
}

/// Sensitivity of the two unbiased features to one more click.
///
/// Returns `(delta_ipw_ctr, delta_ipw_coec)` where each delta is the feature
/// recomputed with a clicked hypothetical impression at `position` minus the
/// feature recomputed with an unclicked one.
pub fn click_sensitivity(
    stats: &DocumentStats,
    theta: &PropensityVector,
    position: u32,
) -> Result<(f64, f64), FeatureError> {
    let clicked = stats.with_impression(position, true);
    let unclicked = stats.with_impression(position, false);
    let d_ipw = ipw_ctr(&clicked, theta)?.expect_present()
        - ipw_ctr(&unclicked, theta)?.expect_present();
    let d_coec = ipw_coec(&clicked, theta)?.expect_present()
        - ipw_coec(&unclicked, theta)?.expect_present();
    Ok((d_ipw, d_coec))
}
