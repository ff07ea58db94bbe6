use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::lattice::NodeId;

/// How a lottery winner's weight carries forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LotteryMode {
    /// The winner keeps its own detector intensity.
    Naive,
    /// The winner takes on the combined weight of everything it beat.
    Aggregate,
}

impl std::str::FromStr for LotteryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(LotteryMode::Naive),
            "aggregate" => Ok(LotteryMode::Aggregate),
            other => Err(format!("unknown lottery mode {other:?}")),
        }
    }
}

impl std::fmt::Display for LotteryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LotteryMode::Naive => "naive",
            LotteryMode::Aggregate => "aggregate",
        })
    }
}

/// A reverse query signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    /// Detector the query speaks for.
    pub detector: NodeId,
    pub weight: f64,
    /// Node the query is travelling to or sitting at.
    pub at: NodeId,
    /// Detector indices whose weight this query carries.
    pub absorbed: FixedBitSet,
}

impl Query {
    pub fn new(
        detector: NodeId,
        detector_index: usize,
        detectors: usize,
        weight: f64,
        at: NodeId,
    ) -> Self {
        let mut absorbed = FixedBitSet::with_capacity(detectors);
        absorbed.insert(detector_index);
        Query {
            detector,
            weight,
            at,
            absorbed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LotteryOutcome {
    pub winner_index: usize,
    pub winner: Query,
    pub losers: Vec<usize>,
    /// All weights were zero and the draw fell back to uniform.
    pub degenerate: bool,
}

/// Draws one competitor with probability `weight / Σ weight`.
pub fn lottery_select<R: Rng + ?Sized>(
    competitors: &[Query],
    mode: LotteryMode,
    rng: &mut R,
) -> Result<LotteryOutcome, EngineError> {
    if competitors.is_empty() {
        return Err(EngineError::ProtocolOrder(
            "lottery without competitors".into(),
        ));
    }
    if let Some(q) = competitors
        .iter()
        .find(|q| !(q.weight >= 0.0 && q.weight.is_finite()))
    {
        return Err(EngineError::InvalidWeight {
            detector: q.detector,
            weight: q.weight,
        });
    }
    let total: f64 = competitors.iter().map(|q| q.weight).sum();
    let (winner_index, degenerate) = if competitors.len() == 1 {
        (0, total == 0.0)
    } else if total > 0.0 {
        let ticket = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, q) in competitors.iter().enumerate() {
            acc += q.weight;
            if q.weight > 0.0 && ticket < acc {
                pick = Some(i);
                break;
            }
        }
        // rounding can leave the ticket just past the last partial sum
        let pick = pick.unwrap_or_else(|| {
            competitors
                .iter()
                .rposition(|q| q.weight > 0.0)
                .expect("positive total implies a positive weight")
        });
        (pick, false)
    } else {
        (rng.random_range(0..competitors.len()), true)
    };

    let mut winner = competitors[winner_index].clone();
    if mode == LotteryMode::Aggregate {
        winner.weight = total;
        for q in competitors {
            winner.absorbed.union_with(&q.absorbed);
        }
    }
    let losers = (0..competitors.len())
        .filter(|&i| i != winner_index)
        .collect();
    Ok(LotteryOutcome {
        winner_index,
        winner,
        losers,
        degenerate,
    })
}
