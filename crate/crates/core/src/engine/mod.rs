//! One protocol trial in discrete hidden time.
//!
//! The scout phase is deterministic, so [`Protocol::prepare`] runs it once per
//! lattice and keeps the closed detector records. Each trial then replays the
//! reverse phase with its own random stream.

mod detector;
mod log;
mod lottery;
mod phase;
mod query;
mod rng;
mod scout;

use std::collections::BTreeMap;

use thiserror::Error;

pub use detector::{close_detector, DetectorRecord};
pub use log::{SignalKind, TraceEvent};
pub use lottery::{lottery_select, LotteryMode, LotteryOutcome, Query};
pub use phase::{classify_arrival, next_phase, ArrivalClass, Phase};
pub use query::{backpropagate, confirmed_path, emit_queries, QueryEmission, Selection};
pub use rng::RandomStream;
pub use scout::{
    propagate_scouts, propagate_scouts_from, RibMark, ScoutArrival, ScoutDirection, ScoutFront,
    ScoutTrace,
};

use crate::lattice::{Admissibility, Lattice, NodeId};

/// Intensity at or below which a detector counts as dark.
pub const DARK_THRESHOLD: f64 = 1e-12;
/// Default phase window for same-source arrivals, radians.
pub const SAME_SOURCE_EPS: f64 = 0.1;
pub const DEFAULT_PATH_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("path budget exceeded: {count} scouts in play, budget {budget}")]
    PathBudgetExceeded { count: usize, budget: usize },
    #[error("protocol order violation: {0}")]
    ProtocolOrder(String),
    #[error("dark trial: no detector above the intensity threshold")]
    DarkTrial,
    #[error("invalid lottery weight {weight} for detector {detector}")]
    InvalidWeight { detector: NodeId, weight: f64 },
    #[error("deadlock: node {0} never collected all of its queries")]
    Deadlock(NodeId),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub mode: LotteryMode,
    pub admissibility: Admissibility,
    pub path_budget: usize,
    pub dark_threshold: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            mode: LotteryMode::Aggregate,
            admissibility: Admissibility::ForwardDag,
            path_budget: DEFAULT_PATH_BUDGET,
            dark_threshold: DARK_THRESHOLD,
        }
    }
}

impl ProtocolConfig {
    pub fn with_mode(mode: LotteryMode) -> Self {
        ProtocolConfig {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub winner: NodeId,
    /// Source to winner along the confirmed ribs.
    pub surviving_path: Vec<NodeId>,
    pub hidden_ticks: u64,
    pub intensities: BTreeMap<NodeId, f64>,
    pub seed: u64,
    pub trial_index: u64,
    /// Lotteries that fell back to a uniform draw.
    pub degenerate_lotteries: u32,
    /// Final rib markings; every entry is `Void` or `Confirmed`.
    pub ribs: Vec<RibMark>,
}

/// A lattice with its scout phase already run.
#[derive(Debug, Clone)]
pub struct Protocol<'a> {
    lattice: &'a Lattice,
    config: ProtocolConfig,
    scouts: ScoutTrace,
    records: Vec<DetectorRecord>,
}

impl<'a> Protocol<'a> {
    pub fn prepare(lattice: &'a Lattice, config: ProtocolConfig) -> Result<Self, EngineError> {
        Self::build(lattice, config, false)
    }

    /// Like [`Protocol::prepare`] but keeps a log line for every scout hop.
    pub fn prepare_logged(
        lattice: &'a Lattice,
        config: ProtocolConfig,
    ) -> Result<Self, EngineError> {
        Self::build(lattice, config, true)
    }

    fn build(lattice: &'a Lattice, config: ProtocolConfig, log: bool) -> Result<Self, EngineError> {
        let scouts = propagate_scouts_from(
            lattice,
            lattice.source(),
            config.admissibility,
            config.path_budget,
            log,
        )?;
        // the wavefront is exhausted: every detector stops summing
        let records = scouts
            .records
            .iter()
            .cloned()
            .map(close_detector)
            .collect::<Result<_, _>>()?;
        Ok(Protocol {
            lattice,
            config,
            scouts,
            records,
        })
    }

    pub fn lattice(&self) -> &'a Lattice {
        self.lattice
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn scouts(&self) -> &ScoutTrace {
        &self.scouts
    }

    /// Closed records in detector order.
    pub fn records(&self) -> &[DetectorRecord] {
        &self.records
    }

    pub fn intensities(&self) -> BTreeMap<NodeId, f64> {
        self.records
            .iter()
            .map(|r| (r.detector, r.intensity))
            .collect()
    }

    pub fn run_trial(
        &self,
        master_seed: u64,
        trial_index: u64,
    ) -> Result<TrialOutcome, EngineError> {
        self.execute(master_seed, trial_index, None)
    }

    /// Runs a trial and returns its log, scout hops included when the
    /// protocol was prepared with [`Protocol::prepare_logged`].
    pub fn run_trial_logged(
        &self,
        master_seed: u64,
        trial_index: u64,
    ) -> Result<(TrialOutcome, Vec<TraceEvent>), EngineError> {
        let mut events = self.scouts.events.clone();
        let outcome = self.execute(master_seed, trial_index, Some(&mut events))?;
        Ok((outcome, events))
    }

    fn execute(
        &self,
        master_seed: u64,
        trial_index: u64,
        log: Option<&mut Vec<TraceEvent>>,
    ) -> Result<TrialOutcome, EngineError> {
        let mut rng = RandomStream::new(master_seed, trial_index);
        let emission = emit_queries(
            self.lattice,
            &self.scouts,
            &self.records,
            self.config.dark_threshold,
        )?;
        let selection = backpropagate(
            self.lattice,
            &self.scouts,
            &self.records,
            &emission,
            self.config.mode,
            &mut rng,
            log,
        )?;
        Ok(TrialOutcome {
            winner: selection.winner,
            surviving_path: selection.path,
            hidden_ticks: selection.ticks,
            intensities: self.intensities(),
            seed: master_seed,
            trial_index,
            degenerate_lotteries: selection.degenerate_lotteries,
            ribs: selection.ribs,
        })
    }
}

/// Full trial with default settings for everything but the lottery mode.
pub fn run_trial(
    lattice: &Lattice,
    mode: LotteryMode,
    master_seed: u64,
    trial_index: u64,
) -> Result<TrialOutcome, EngineError> {
    Protocol::prepare(lattice, ProtocolConfig::with_mode(mode))?.run_trial(master_seed, trial_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::random::{random_lattice, RandomLatticeSpec};
    use crate::lattice::{build_star, build_two_path};
    use crate::oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The confirmed ribs form one simple source-to-winner path.
    fn assert_single_path(lattice: &Lattice, outcome: &TrialOutcome) {
        let confirmed: Vec<usize> = outcome
            .ribs
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == RibMark::Confirmed)
            .map(|(i, _)| i)
            .collect();
        assert!(outcome
            .ribs
            .iter()
            .all(|m| matches!(m, RibMark::Void | RibMark::Confirmed)));
        let path = &outcome.surviving_path;
        assert_eq!(path.first(), Some(&lattice.source()));
        assert_eq!(path.last(), Some(&outcome.winner));
        assert_eq!(confirmed.len(), path.len() - 1);
        let mut seen = std::collections::BTreeSet::new();
        assert!(path.iter().all(|n| seen.insert(*n)));
        for pair in path.windows(2) {
            let rib = lattice
                .find_rib(pair[0], pair[1])
                .expect("path follows ribs");
            assert!(confirmed.contains(&rib.0));
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let l = build_star(4, 2, &[1.0; 4], 0.7).unwrap();
        let p = Protocol::prepare(&l, ProtocolConfig::default()).unwrap();
        for i in 0..20 {
            assert_eq!(p.run_trial(9, i).unwrap(), p.run_trial(9, i).unwrap());
        }
        let a: Vec<_> = (0..50).map(|i| p.run_trial(9, i).unwrap().winner).collect();
        let b: Vec<_> = (0..50)
            .map(|i| p.run_trial(10, i).unwrap().winner)
            .collect();
        assert_ne!(a, b);
    }

    #[test]
    fn single_arm_always_wins() {
        let l = build_star(1, 3, &[0.4], 1.0).unwrap();
        for mode in [LotteryMode::Naive, LotteryMode::Aggregate] {
            let o = run_trial(&l, mode, 1, 0).unwrap();
            assert_eq!(o.winner, l.detectors()[0]);
            assert_eq!(o.surviving_path.len(), 4);
            assert_single_path(&l, &o);
        }
    }

    #[test]
    fn refusal_voids_losing_arms() {
        let l = build_star(3, 2, &[1.0, 1.0, 1.0], 1.0).unwrap();
        let p = Protocol::prepare(&l, ProtocolConfig::default()).unwrap();
        for i in 0..30 {
            let (o, events) = p.run_trial_logged(5, i).unwrap();
            assert_single_path(&l, &o);
            let confirmed = o.ribs.iter().filter(|m| **m == RibMark::Confirmed).count();
            assert_eq!(confirmed, 2);
            assert_eq!(o.ribs.iter().filter(|m| **m == RibMark::Void).count(), 4);
            let refusals = events
                .iter()
                .filter(|e| e.kind == SignalKind::Refusal)
                .count();
            assert_eq!(refusals, 4);
        }
    }

    #[test]
    fn two_path_merge_confirms_one_chain() {
        let l = build_two_path(2.0, 2.0, 3, 1.0).unwrap();
        let p = Protocol::prepare(&l, ProtocolConfig::default()).unwrap();
        assert!((p.intensities()[&l.detectors()[0]] - 4.0).abs() < 1e-9);
        let mut lengths = std::collections::BTreeSet::new();
        for i in 0..40 {
            let o = p.run_trial(3, i).unwrap();
            assert_single_path(&l, &o);
            assert_eq!(o.surviving_path.len(), 4);
            lengths.insert(o.surviving_path.clone());
        }
        // both chains get confirmed in some trial
        assert_eq!(lengths.len(), 2);
    }

    #[test]
    fn dark_lattice_is_reported() {
        let l = build_two_path(2.0, 2.5, 2, 1.0).unwrap();
        assert_eq!(
            run_trial(&l, LotteryMode::Aggregate, 0, 0).unwrap_err(),
            EngineError::DarkTrial
        );
    }

    #[test]
    fn amplitudes_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let spec = RandomLatticeSpec::sized(&mut rng, 80);
            let l = random_lattice(&mut rng, &spec);
            let p = Protocol::prepare(&l, ProtocolConfig::default()).unwrap();
            let want =
                oracle::amplitudes(&l, Admissibility::ForwardDag, DEFAULT_PATH_BUDGET).unwrap();
            for r in p.records() {
                assert!((r.amplitude - want[&r.detector]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn random_trials_keep_path_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for k in 0..30 {
            let spec = RandomLatticeSpec::sized(&mut rng, 80);
            let l = random_lattice(&mut rng, &spec);
            for mode in [LotteryMode::Naive, LotteryMode::Aggregate] {
                match run_trial(&l, mode, k, 0) {
                    Ok(o) => assert_single_path(&l, &o),
                    Err(EngineError::DarkTrial) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
}
