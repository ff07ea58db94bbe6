//! Simulator for a hidden-time conversation between a photon source and its
//! candidate detectors.
//!
//! Scouts spread phase over a lattice of nodes and ribs, detectors sum unit
//! phasors into an amplitude, and reverse query lotteries pick a single
//! detector. The [`oracle`] recomputes amplitudes and selection laws by
//! brute force so the protocol can be checked against the path sum and the
//! Born rule. [`chronometry`] covers the photon-counting clock and the
//! dilation factor; [`experiments`] runs seeded ensembles and writes CSV/JSON.

pub mod chronometry;
pub mod cli;
pub mod engine;
pub mod experiments;
pub mod lattice;
pub mod oracle;

pub use engine::{run_trial, LotteryMode, Protocol, ProtocolConfig, TrialOutcome};
pub use lattice::{Admissibility, Lattice, NodeId, NodeKind, RibId};
