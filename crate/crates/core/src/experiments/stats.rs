//! Distribution comparisons.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::ExperimentError;
use crate::lattice::NodeId;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

fn check_normalized(name: &str, p: &BTreeMap<NodeId, f64>) -> Result<(), ExperimentError> {
    let total: f64 = p.values().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE || p.values().any(|&x| x.is_nan() || x < 0.0) {
        return Err(ExperimentError::NotADistribution(format!(
            "{name} sums to {total}"
        )));
    }
    Ok(())
}

/// `½ Σ |p_i − q_i|` over a shared support.
pub fn tv_distance(
    p: &BTreeMap<NodeId, f64>,
    q: &BTreeMap<NodeId, f64>,
) -> Result<f64, ExperimentError> {
    if !p.keys().eq(q.keys()) {
        return Err(ExperimentError::SupportMismatch);
    }
    check_normalized("first distribution", p)?;
    check_normalized("second distribution", q)?;
    let sum: f64 = p.values().zip(q.values()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// Some cell expected fewer than 5 counts.
    pub underpowered: bool,
}

impl ChiSquare {
    /// Whether the statistic lies below the critical value at `percentile`.
    /// With no degrees of freedom there is nothing to test.
    pub fn passes(&self, percentile: f64) -> Result<bool, ExperimentError> {
        if self.dof == 0 {
            return Ok(self.statistic == 0.0);
        }
        Ok(self.statistic < chi_square_critical(self.dof, percentile)?)
    }
}

/// Pearson statistic of `counts` against `reference`. Cells with zero
/// reference probability are left out of the degrees of freedom; a count in
/// such a cell makes the statistic infinite.
pub fn chi_square(
    counts: &BTreeMap<NodeId, u64>,
    reference: &BTreeMap<NodeId, f64>,
    trials: u64,
) -> Result<ChiSquare, ExperimentError> {
    if !counts.keys().eq(reference.keys()) {
        return Err(ExperimentError::SupportMismatch);
    }
    check_normalized("reference", reference)?;
    let n = trials as f64;
    let mut statistic = 0.0;
    let mut support = 0usize;
    let mut underpowered = false;
    for (&observed, &p) in counts.values().zip(reference.values()) {
        if p == 0.0 {
            if observed > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        support += 1;
        let expected = n * p;
        underpowered |= expected < 5.0;
        statistic += (observed as f64 - expected).powi(2) / expected;
    }
    Ok(ChiSquare {
        statistic,
        dof: support.saturating_sub(1),
        underpowered,
    })
}

/// Quantile of the χ² distribution with `dof` degrees of freedom.
pub fn chi_square_critical(dof: usize, percentile: f64) -> Result<f64, ExperimentError> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(ExperimentError::InvalidParameter(format!(
            "percentile must lie in (0, 1), got {percentile}"
        )));
    }
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| ExperimentError::InvalidParameter(e.to_string()))?;
    Ok(dist.inverse_cdf(percentile))
}
