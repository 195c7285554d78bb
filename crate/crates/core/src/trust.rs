//! History-based trustworthiness scoring.
//!
//! Every feature gets a direct indicator from its own version chain, an
//! indirect indicator from the direct scores of nearby features, and a
//! temporal indicator from how long it has persisted unchanged. The
//! combined index is a convex combination of the three.

use serde::{Deserialize, Serialize};

use crate::classify::FeatureClass;
use crate::element::{ElementId, FeatureHistory, Timestamp, VersionedElement};
use crate::error::{Error, Result};
use crate::spatial::NeighborIndex;

/// Convex weights for the direct, indirect and temporal components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustWeights {
    pub direct: f64,
    pub indirect: f64,
    pub temporal: f64,
}

impl Default for TrustWeights {
    fn default() -> TrustWeights {
        TrustWeights {
            direct: 0.5,
            indirect: 0.25,
            temporal: 0.25,
        }
    }
}

impl TrustWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.direct, self.indirect, self.temporal];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(
                "trust weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "trust weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Tunable scoring parameters. Everything here is echoed into report
/// metadata so runs stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustParams {
    pub weights: TrustWeights,
    /// Rate of the saturating exponential over the direct activity score.
    pub lambda_direct: f64,
    /// Multiplicative penalty applied once per detected rollback.
    pub rollback_penalty: f64,
    /// Persistence timescale in days for the temporal indicator.
    pub tau_days: f64,
    /// Radius of the indirect-trust neighborhood.
    pub neighbor_radius_m: f64,
    /// Split point for the score distribution report.
    pub threshold: f64,
    /// Restrict indirect-trust neighborhoods to features of the same class.
    pub same_class_neighbors: bool,
    /// Classes that receive scores and distribution rows.
    pub scored_classes: Vec<FeatureClass>,
}

impl Default for TrustParams {
    fn default() -> TrustParams {
        TrustParams {
            weights: TrustWeights::default(),
            lambda_direct: 0.3,
            rollback_penalty: 0.5,
            tau_days: 730.0,
            neighbor_radius_m: 50.0,
            threshold: 0.5,
            same_class_neighbors: false,
            scored_classes: vec![
                FeatureClass::RoadWithSidewalkInfo,
                FeatureClass::SidewalkGeometry,
            ],
        }
    }
}

impl TrustParams {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.lambda_direct > 0.0) {
            return Err(Error::Config("lambda_direct must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rollback_penalty) {
            return Err(Error::Config("rollback_penalty must be in [0, 1]".into()));
        }
        if !(self.tau_days > 0.0) {
            return Err(Error::Config("tau_days must be positive".into()));
        }
        if !(self.neighbor_radius_m > 0.0) {
            return Err(Error::Config("neighbor_radius_m must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must be in [0, 1]".into()));
        }
        if self.scored_classes.is_empty() {
            return Err(Error::Config("scored_classes must be non-empty".into()));
        }
        Ok(())
    }
}

/// Counters distilled from one feature's version chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistorySignals {
    /// Number of versions.
    pub version_count: u32,
    /// Number of distinct editors.
    pub editor_count: u32,
    /// Different-user versions leaving tags and geometry refs unchanged.
    pub confirmations: u32,
    /// Versions restoring the state of two versions prior.
    pub rollbacks: u32,
    /// Days from the last version to the evaluation instant.
    pub age_days: f64,
}

/// Tags plus geometry refs; the state compared for confirmations and
/// rollbacks. Node positions stand in for the geometry of nodes.
fn payload_eq(a: &VersionedElement, b: &VersionedElement) -> bool {
    a.tags == b.tags && a.detail == b.detail
}

/// Derives (V, U, C, Rb, age) from a version chain. `eval_t` must not
/// precede the last version.
pub fn extract_signals(history: &FeatureHistory, eval_t: Timestamp) -> Result<HistorySignals> {
    let versions = &history.versions;
    assert!(!versions.is_empty(), "history is non-empty");
    let last = history.last();
    if eval_t < last.timestamp {
        return Err(Error::EvalBeforeLastVersion {
            eval: eval_t,
            last: last.timestamp,
        });
    }

    let mut editors: Vec<i64> = versions.iter().map(|v| v.uid).collect();
    editors.sort_unstable();
    editors.dedup();

    let confirmations = versions
        .windows(2)
        .filter(|w| w[1].uid != w[0].uid && payload_eq(&w[1], &w[0]))
        .count() as u32;

    let rollbacks = versions
        .windows(3)
        .filter(|w| payload_eq(&w[2], &w[0]) && !payload_eq(&w[2], &w[1]))
        .count() as u32;

    let age_days = (eval_t - last.timestamp).num_seconds() as f64 / 86_400.0;

    Ok(HistorySignals {
        version_count: versions.len() as u32,
        editor_count: editors.len() as u32,
        confirmations,
        rollbacks,
        age_days,
    })
}

/// Direct indicator: saturating exponential over weighted edit activity,
/// halved (by default) for every detected rollback.
///
/// Activity S = (V-1) + 2(U-1) + 3C; result (1 - e^(-lambda*S)) * rho^Rb.
pub fn direct_trust(signals: &HistorySignals, params: &TrustParams) -> f64 {
    let activity = (signals.version_count as f64 - 1.0)
        + 2.0 * (signals.editor_count as f64 - 1.0)
        + 3.0 * signals.confirmations as f64;
    let saturation = 1.0 - (-params.lambda_direct * activity).exp();
    saturation * params.rollback_penalty.powi(signals.rollbacks as i32)
}

/// Indirect indicator: mean direct score of neighbors within the radius,
/// falling back to the feature's own direct score when it has none.
pub fn indirect_trust(
    id: ElementId,
    index: &NeighborIndex,
    direct_scores: &std::collections::BTreeMap<ElementId, f64>,
    radius_m: f64,
) -> Result<f64> {
    let own = *direct_scores
        .get(&id)
        .ok_or(Error::MissingDirectScore(id))?;
    let neighbors = index.neighbors_of(id, radius_m);
    if neighbors.is_empty() {
        return Ok(own);
    }
    let mut sum = 0.0;
    for neighbor in &neighbors {
        sum += *direct_scores
            .get(neighbor)
            .ok_or(Error::MissingDirectScore(*neighbor))?;
    }
    Ok(sum / neighbors.len() as f64)
}

/// Temporal indicator: 1 - e^(-age/tau). Zero right after an edit,
/// approaching one as the feature persists untouched.
pub fn temporal_trust(signals: &HistorySignals, params: &TrustParams) -> f64 {
    1.0 - (-signals.age_days / params.tau_days).exp()
}

/// Weighted combination of the three indicators.
pub fn trustworthiness(
    direct: f64,
    indirect: f64,
    temporal: f64,
    weights: &TrustWeights,
) -> Result<f64> {
    weights.validate()?;
    Ok(weights.direct * direct + weights.indirect * indirect + weights.temporal * temporal)
}

/// A feature's component and combined scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustScore {
    pub id: ElementId,
    pub direct: f64,
    pub indirect: f64,
    pub temporal: f64,
    pub combined: f64,
    pub weights: TrustWeights,
}

pub const DISTRIBUTION_BINS: usize = 20;

/// Threshold split and 20-bin histogram of combined scores.
/// Percentages are rounded to 2 dp and sum to exactly 100.00.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustDistribution {
    pub threshold: f64,
    pub count: u64,
    pub below: u64,
    pub at_or_above: u64,
    pub pct_below: f64,
    pub pct_at_or_above: f64,
    /// Counts over [0, 0.05), [0.05, 0.10), ..., [0.95, 1.00].
    pub bins: [u64; DISTRIBUTION_BINS],
}

/// None when there are no scores to distribute.
pub fn trust_distribution(scores: &[f64], threshold: f64) -> Option<TrustDistribution> {
    if scores.is_empty() {
        return None;
    }
    let mut bins = [0u64; DISTRIBUTION_BINS];
    let mut below = 0u64;
    for score in scores {
        if *score < threshold {
            below += 1;
        }
        let bin = ((score * DISTRIBUTION_BINS as f64).floor() as usize).min(DISTRIBUTION_BINS - 1);
        bins[bin] += 1;
    }
    let count = scores.len() as u64;
    let at_or_above = count - below;
    // Basis points keep the two percentages summing to exactly 100.00.
    let below_bp = (below as f64 / count as f64 * 10_000.0).round() as i64;
    Some(TrustDistribution {
        threshold,
        count,
        below,
        at_or_above,
        pct_below: below_bp as f64 / 100.0,
        pct_at_or_above: (10_000 - below_bp) as f64 / 100.0,
        bins,
    })
}
