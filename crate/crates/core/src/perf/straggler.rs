use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RankTiming;

use super::metrics::{mean, median};

/// How the straggler threshold on `t_n` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "factor", rename_all = "snake_case")]
pub enum StragglerPolicy {
    /// Threshold = factor × median `t_n`.
    MedianFactor(f64),
    /// Threshold = factor × mean `t_n` of the fastest group: the ranks whose
    /// `t_n` lies in the lowest quarter of the observed `[min, max]` range.
    FastestGroupFactor(f64),
}

impl Default for StragglerPolicy {
    fn default() -> Self {
        StragglerPolicy::MedianFactor(1.5)
    }
}

impl StragglerPolicy {
    pub const DEFAULT_FASTEST_GROUP: StragglerPolicy = StragglerPolicy::FastestGroupFactor(2.0);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StragglerVerdict {
    pub rank: usize,
    pub t_n: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// Threshold for the given completion times.
pub fn straggler_threshold(t_n: &[f64], policy: StragglerPolicy) -> Result<f64> {
    if t_n.len() < 2 {
        return Err(Error::invalid(format!(
            "straggler detection needs at least 2 ranks, got {}",
            t_n.len()
        )));
    }
    Ok(match policy {
        StragglerPolicy::MedianFactor(theta) => theta * median(t_n).expect("non-empty"),
        StragglerPolicy::FastestGroupFactor(kappa) => {
            let lo = t_n.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = t_n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let cutoff = lo + 0.25 * (hi - lo);
            kappa * mean(t_n.iter().copied().filter(|&t| t <= cutoff))
        }
    })
}

/// Flags every rank whose `t_n` reaches the policy threshold.
pub fn detect_stragglers(timings: &[RankTiming], policy: StragglerPolicy) -> Result<Vec<StragglerVerdict>> {
    let t_n: Vec<f64> = timings.iter().map(|t| t.t_n).collect();
    let threshold = straggler_threshold(&t_n, policy)?;
    Ok(timings
        .iter()
        .map(|t| StragglerVerdict {
            rank: t.rank,
            t_n: t.t_n,
            threshold,
            flagged: t.t_n >= threshold,
        })
        .collect())
}
