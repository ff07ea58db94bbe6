//! Monte-Carlo ensembles and their comparison with the oracle.
//!
//! Trials fan out over a rayon pool. Each trial draws from its own stream
//! `(master seed, trial index)` and the per-detector counts are summed, so the
//! result does not depend on scheduling or on the number of threads.

mod output;
mod stats;

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use output::{clock_csv, dilation_csv, ensemble_csv, profile_csv, summary_json, Summary};
pub use stats::{chi_square, chi_square_critical, tv_distance, ChiSquare};

use crate::engine::{EngineError, LotteryMode, Protocol, ProtocolConfig};
use crate::lattice::{build_slit_grid, Lattice, LatticeError, NodeId, SlitGrid};
use crate::oracle::{self, BornDistribution, OracleError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("trial {trial}: {source}")]
    Trial { trial: u64, source: EngineError },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("distributions have different supports")]
    SupportMismatch,
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    /// `n<nodes>-r<ribs>-d<detectors>`.
    pub lattice_id: String,
    pub mode: LotteryMode,
    pub trials: u64,
    pub seed: u64,
    pub counts: BTreeMap<NodeId, u64>,
    pub empirical: BTreeMap<NodeId, f64>,
    pub reference: BornDistribution,
    pub tv_distance: f64,
    pub chi_square: ChiSquare,
    pub degenerate_lotteries: u64,
}

pub fn lattice_id(lattice: &Lattice) -> String {
    format!(
        "n{}-r{}-d{}",
        lattice.nodes().len(),
        lattice.ribs().len(),
        lattice.detectors().len()
    )
}

/// Born reference from oracle amplitudes. Detectors the engine treats as dark
/// get probability zero.
pub fn born_reference(
    lattice: &Lattice,
    config: &ProtocolConfig,
) -> Result<BornDistribution, ExperimentError> {
    let intensities = oracle::amplitudes(lattice, config.admissibility, config.path_budget)?
        .into_iter()
        .map(|(d, a)| {
            let i = a.norm_sqr();
            (d, if i <= config.dark_threshold { 0.0 } else { i })
        })
        .collect();
    Ok(oracle::born_from_intensities(&intensities)?)
}

/// Per-detector tallies, indexed like `Lattice::detectors()`.
#[derive(Debug, Clone)]
struct Tally {
    counts: Vec<u64>,
    degenerate: u64,
    /// Lowest failing trial index, so the reported error is scheduling-free.
    error: Option<(u64, EngineError)>,
}

impl Tally {
    fn new(detectors: usize) -> Self {
        Tally {
            counts: vec![0; detectors],
            degenerate: 0,
            error: None,
        }
    }

    fn fail(&mut self, trial: u64, e: EngineError) {
        if self.error.as_ref().is_none_or(|(t, _)| trial < *t) {
            self.error = Some((trial, e));
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.degenerate += other.degenerate;
        if let Some((t, e)) = other.error {
            self.fail(t, e);
        }
        self
    }
}

/// Runs trials `0..trials` on the current rayon pool.
pub fn run_ensemble(
    lattice: &Lattice,
    config: ProtocolConfig,
    trials: u64,
    master_seed: u64,
) -> Result<EnsembleResult, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let protocol = Protocol::prepare(lattice, config)?;
    let detectors = lattice.detectors();
    let tally = (0..trials)
        .into_par_iter()
        .fold(
            || Tally::new(detectors.len()),
            |mut tally, i| {
                match protocol.run_trial(master_seed, i) {
                    Ok(o) => {
                        let idx = lattice
                            .detector_index(o.winner)
                            .expect("winner is a detector");
                        tally.counts[idx] += 1;
                        tally.degenerate += u64::from(o.degenerate_lotteries);
                    }
                    Err(e) => tally.fail(i, e),
                }
                tally
            },
        )
        .reduce(|| Tally::new(detectors.len()), Tally::merge);
    if let Some((trial, source)) = tally.error {
        return Err(ExperimentError::Trial { trial, source });
    }

    let reference = born_reference(lattice, &config)?;
    let counts: BTreeMap<NodeId, u64> = detectors.iter().copied().zip(tally.counts).collect();
    let empirical = counts
        .iter()
        .map(|(&d, &c)| (d, c as f64 / trials as f64))
        .collect();
    let tv = tv_distance(&empirical, &reference.entries)?;
    let chi = chi_square(&counts, &reference.entries, trials)?;
    Ok(EnsembleResult {
        lattice_id: lattice_id(lattice),
        mode: config.mode,
        trials,
        seed: master_seed,
        counts,
        empirical,
        reference,
        tv_distance: tv,
        chi_square: chi,
        degenerate_lotteries: tally.degenerate,
    })
}

/// [`run_ensemble`] on a dedicated pool of `jobs` threads.
pub fn run_ensemble_with_jobs(
    lattice: &Lattice,
    config: ProtocolConfig,
    trials: u64,
    master_seed: u64,
    jobs: usize,
) -> Result<EnsembleResult, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    pool.install(|| run_ensemble(lattice, config, trials, master_seed))
}

/// Screen detectors ordered by position, with the oracle intensity and the
/// engine's empirical frequency at each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceProfile {
    pub detectors: Vec<NodeId>,
    pub positions: Vec<f64>,
    pub oracle_intensity: Vec<f64>,
    pub empirical_frequency: Vec<f64>,
}

impl InterferenceProfile {
    /// Screen indices whose intensity is below both neighbours.
    pub fn interior_minima(&self) -> Vec<usize> {
        interior_minima(&self.oracle_intensity)
    }

    pub fn peak(&self) -> f64 {
        self.oracle_intensity.iter().copied().fold(0.0, f64::max)
    }
}

pub fn interior_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
        .collect()
}

/// Builds the slit lattice, runs an ensemble on it and lines up both
/// profiles along the screen.
pub fn interference_profile(
    spec: &SlitGrid,
    config: ProtocolConfig,
    trials: u64,
    master_seed: u64,
) -> Result<(InterferenceProfile, EnsembleResult), ExperimentError> {
    let lattice = build_slit_grid(spec)?;
    let ensemble = run_ensemble(&lattice, config, trials, master_seed)?;
    Ok((profile_from(&lattice, &ensemble, &config)?, ensemble))
}

/// Lines up oracle intensities and ensemble frequencies along the screen.
pub fn profile_from(
    lattice: &Lattice,
    ensemble: &EnsembleResult,
    config: &ProtocolConfig,
) -> Result<InterferenceProfile, ExperimentError> {
    let amplitudes = oracle::amplitudes(lattice, config.admissibility, config.path_budget)?;
    let mut detectors = lattice.detectors().to_vec();
    detectors.sort_by(|a, b| {
        lattice
            .node(*a)
            .position
            .y()
            .total_cmp(&lattice.node(*b).position.y())
            .then(a.cmp(b))
    });
    Ok(InterferenceProfile {
        positions: detectors
            .iter()
            .map(|&d| lattice.node(d).position.y())
            .collect(),
        oracle_intensity: detectors.iter().map(|d| amplitudes[d].norm_sqr()).collect(),
        empirical_frequency: detectors.iter().map(|d| ensemble.empirical[d]).collect(),
        detectors,
    })
}

/// Whether query routes branch like a tree: at every node the detectors
/// reachable through different outgoing scout ribs are disjoint, except for
/// copies of one and the same detector, which merge without a lottery.
pub fn lottery_routes_are_tree(protocol: &Protocol) -> bool {
    let lattice = protocol.lattice();
    let down = &protocol.scouts().down;
    let mut below: Vec<Option<FixedBitSet>> = vec![None; down.len()];
    let mut visiting = vec![false; down.len()];

    fn reach(
        v: usize,
        lattice: &Lattice,
        down: &[Vec<(crate::lattice::RibId, NodeId)>],
        below: &mut Vec<Option<FixedBitSet>>,
        visiting: &mut Vec<bool>,
    ) -> Option<FixedBitSet> {
        if let Some(set) = &below[v] {
            return Some(set.clone());
        }
        if visiting[v] {
            return None;
        }
        visiting[v] = true;
        let mut set = FixedBitSet::with_capacity(lattice.detectors().len());
        if let Some(i) = lattice.detector_index(NodeId(v)) {
            set.insert(i);
        }
        let mut children = Vec::new();
        for &(_, w) in &down[v] {
            children.push(reach(w.0, lattice, down, below, visiting)?);
        }
        for (i, a) in children.iter().enumerate() {
            for b in &children[i + 1..] {
                let same_single = a == b && a.count_ones(..) == 1;
                if !a.is_disjoint(b) && !same_single {
                    return None;
                }
            }
            set.union_with(a);
        }
        visiting[v] = false;
        below[v] = Some(set.clone());
        Some(set)
    }

    reach(lattice.source().0, lattice, down, &mut below, &mut visiting).is_some()
}

/// Exact selection laws of both lottery modes next to the Born rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeComparison {
    pub born: BTreeMap<NodeId, f64>,
    pub naive: BTreeMap<NodeId, f64>,
    pub aggregate: BTreeMap<NodeId, f64>,
    pub naive_tv: f64,
    pub aggregate_tv: f64,
}

pub fn compare_modes(
    lattice: &Lattice,
    config: &ProtocolConfig,
    outcome_budget: usize,
) -> Result<ModeComparison, ExperimentError> {
    let born = born_reference(lattice, config)?.entries;
    let exact = |mode| {
        oracle::exact_selection(
            lattice,
            mode,
            config.admissibility,
            config.path_budget,
            config.dark_threshold,
            outcome_budget,
        )
    };
    let naive = exact(LotteryMode::Naive)?;
    let aggregate = exact(LotteryMode::Aggregate)?;
    Ok(ModeComparison {
        naive_tv: tv_distance(&naive, &born)?,
        aggregate_tv: tv_distance(&aggregate, &born)?,
        born,
        naive,
        aggregate,
    })
}
