//! Forward wavefront of scout signals.
//!
//! Every live front moves one rib per hidden tick. A front entering a void
//! node is copied onto each admissible rib; a front entering a detector is
//! absorbed and its phasor added to that detector's record. Fronts never
//! interact, so the arrival set is exactly one arrival per admissible path.

use fixedbitset::FixedBitSet;

use super::detector::DetectorRecord;
use super::log::{SignalKind, TraceEvent};
use super::phase::{next_phase, Phase};
use super::EngineError;
use crate::lattice::{Admissibility, Lattice, NodeId, NodeKind, RibId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoutDirection {
    From(NodeId),
    /// Scouts crossed the rib both ways (only possible under `MaxHops`).
    Both,
}

/// Marking of one rib during a trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RibMark {
    Void,
    Scout(ScoutDirection),
    /// Carries a query; the set holds the detector indices it stands for.
    Query(FixedBitSet),
    Confirmed,
}

/// A phase-carrying scout in flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoutFront {
    pub at: NodeId,
    pub phase: Phase,
    pub hops: usize,
    node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoutArrival {
    pub detector: NodeId,
    pub phase: Phase,
    pub hops: usize,
    pub tick: u64,
    node: usize,
}

/// Everything the scout phase leaves behind.
#[derive(Debug, Clone)]
pub struct ScoutTrace {
    pub origin: NodeId,
    /// In arrival order (tick, then front order).
    pub arrivals: Vec<ScoutArrival>,
    /// Open records aligned with `Lattice::detectors()`.
    pub records: Vec<DetectorRecord>,
    pub ribs: Vec<RibMark>,
    /// Tick at which the wavefront was exhausted.
    pub ticks: u64,
    /// Scout-direction edges leaving each node: `(rib, head)`.
    pub down: Vec<Vec<(RibId, NodeId)>>,
    /// Scout-direction edges entering each node: `(rib, tail)`.
    pub up: Vec<Vec<(RibId, NodeId)>>,
    pub events: Vec<TraceEvent>,
    // Prefix tree of fronts: (node, parent entry).
    tree: Vec<(NodeId, Option<usize>)>,
}

impl ScoutTrace {
    /// Node sequence from the origin to the arrival's detector.
    pub fn path(&self, arrival: &ScoutArrival) -> Vec<NodeId> {
        self.walk(arrival.node)
    }

    pub fn front_path(&self, front: &ScoutFront) -> Vec<NodeId> {
        self.walk(front.node)
    }

    fn walk(&self, mut at: usize) -> Vec<NodeId> {
        let mut out = Vec::new();
        loop {
            let (node, parent) = self.tree[at];
            out.push(node);
            match parent {
                Some(p) => at = p,
                None => break,
            }
        }
        out.reverse();
        out
    }

    fn on_path(&self, mut at: usize, node: NodeId) -> bool {
        loop {
            let (n, parent) = self.tree[at];
            if n == node {
                return true;
            }
            match parent {
                Some(p) => at = p,
                None => return false,
            }
        }
    }

    pub fn arrivals_at(&self, detector: NodeId) -> impl Iterator<Item = &ScoutArrival> {
        self.arrivals.iter().filter(move |a| a.detector == detector)
    }

    fn mark(&mut self, lattice: &Lattice, rib: RibId, from: NodeId) {
        let to = lattice.rib(rib).other(from);
        match self.ribs[rib.0] {
            RibMark::Void => {
                self.ribs[rib.0] = RibMark::Scout(ScoutDirection::From(from));
            }
            RibMark::Scout(ScoutDirection::From(f)) if f == from => return,
            RibMark::Scout(ScoutDirection::From(_)) => {
                self.ribs[rib.0] = RibMark::Scout(ScoutDirection::Both);
            }
            _ => {
                if self.down[from.0].iter().any(|&(r, _)| r == rib) {
                    return;
                }
            }
        }
        self.down[from.0].push((rib, to));
        self.up[to.0].push((rib, from));
    }
}

/// Runs the scout wavefront from the lattice source.
pub fn propagate_scouts(
    lattice: &Lattice,
    admissibility: Admissibility,
    path_budget: usize,
) -> Result<ScoutTrace, EngineError> {
    propagate_scouts_from(lattice, lattice.source(), admissibility, path_budget, false)
}

/// Runs the scout wavefront from any emitting node. With `log` set every
/// scout hop is recorded in `events`.
pub fn propagate_scouts_from(
    lattice: &Lattice,
    origin: NodeId,
    admissibility: Admissibility,
    path_budget: usize,
    log: bool,
) -> Result<ScoutTrace, EngineError> {
    let n = lattice.nodes().len();
    let mut trace = ScoutTrace {
        origin,
        arrivals: Vec::new(),
        records: lattice
            .detectors()
            .iter()
            .map(|&d| DetectorRecord::new(d))
            .collect(),
        ribs: vec![RibMark::Void; lattice.ribs().len()],
        ticks: 0,
        down: vec![Vec::new(); n],
        up: vec![Vec::new(); n],
        events: Vec::new(),
        tree: vec![(origin, None)],
    };
    let wavelength = lattice.wavelength();
    // tick at which each node was first entered by the wavefront
    let mut first_seen: Vec<Option<u64>> = vec![None; n];
    first_seen[origin.0] = Some(0);

    let mut fronts = vec![ScoutFront {
        at: origin,
        phase: Phase::ZERO,
        hops: 0,
        node: 0,
    }];
    let mut tick = 0u64;
    while !fronts.is_empty() {
        let mut next = Vec::new();
        for front in &fronts {
            for &rib_id in lattice.incident(front.at) {
                let rib = lattice.rib(rib_id);
                let to = rib.other(front.at);
                if to == origin {
                    continue;
                }
                let admissible = match admissibility {
                    Admissibility::ForwardDag => first_seen[to.0].is_none_or(|t| t == tick + 1),
                    Admissibility::MaxHops(limit) => {
                        front.hops < limit && !trace.on_path(front.node, to)
                    }
                };
                if !admissible {
                    continue;
                }
                first_seen[to.0].get_or_insert(tick + 1);
                trace.mark(lattice, rib_id, front.at);

                let phase = next_phase(front.phase, rib.length, wavelength);
                trace.tree.push((to, Some(front.node)));
                let node = trace.tree.len() - 1;
                if log {
                    trace.events.push(TraceEvent {
                        tick: tick + 1,
                        kind: SignalKind::Scout,
                        rib: Some(rib_id),
                        from: front.at,
                        to,
                        value: Some(phase.radians()),
                    });
                }
                match lattice.kind(to) {
                    NodeKind::Detector => {
                        let idx = lattice
                            .detector_index(to)
                            .expect("detector ids are indexed");
                        trace.records[idx].accept(phase)?;
                        trace.arrivals.push(ScoutArrival {
                            detector: to,
                            phase,
                            hops: front.hops + 1,
                            tick: tick + 1,
                            node,
                        });
                    }
                    NodeKind::Void => next.push(ScoutFront {
                        at: to,
                        phase,
                        hops: front.hops + 1,
                        node,
                    }),
                    // other emitters absorb without counting
                    NodeKind::Source | NodeKind::LaserEmitter => {}
                }
            }
        }
        let in_play = next.len() + trace.arrivals.len();
        if in_play > path_budget {
            return Err(EngineError::PathBudgetExceeded {
                count: in_play,
                budget: path_budget,
            });
        }
        if !next.is_empty() || trace.arrivals.last().is_some_and(|a| a.tick == tick + 1) {
            trace.ticks = tick + 1;
        }
        fronts = next;
        tick += 1;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, build_star, build_two_path};
    use std::f64::consts::PI;

    fn phases(trace: &ScoutTrace) -> Vec<f64> {
        trace.arrivals.iter().map(|a| a.phase.radians()).collect()
    }

    #[test]
    fn two_path_phases() {
        let l = build_two_path(2.0, 2.0, 2, 1.0).unwrap();
        let t = propagate_scouts(&l, Admissibility::ForwardDag, 1000).unwrap();
        assert_eq!(phases(&t), vec![0.0, 0.0]);

        let l = build_two_path(2.0, 2.5, 2, 1.0).unwrap();
        let t = propagate_scouts(&l, Admissibility::ForwardDag, 1000).unwrap();
        let mut p = phases(&t);
        p.sort_by(f64::total_cmp);
        assert_eq!(p, vec![0.0, PI]);
        assert_eq!(t.ticks, 2);
    }

    #[test]
    fn grid_corner_to_corner_has_six_arrivals() {
        let l = build_grid(3, 3, 1.0, (0, 0), &[(2, 2)], 1.0).unwrap();
        let t = propagate_scouts(&l, Admissibility::ForwardDag, 1000).unwrap();
        assert_eq!(t.arrivals.len(), 6);
        for a in &t.arrivals {
            let path = t.path(a);
            assert_eq!(path.len(), a.hops + 1);
            assert_eq!(path.first(), Some(&l.source()));
        }
    }

    #[test]
    fn every_scout_rib_is_marked() {
        let l = build_star(3, 2, &[1.0, 1.0, 1.0], 1.0).unwrap();
        let t = propagate_scouts(&l, Admissibility::ForwardDag, 1000).unwrap();
        assert!(t
            .ribs
            .iter()
            .all(|m| matches!(m, RibMark::Scout(ScoutDirection::From(_)))));
        assert_eq!(t.arrivals.len(), 3);
    }

    #[test]
    fn budget_is_enforced() {
        let l = build_grid(6, 6, 1.0, (0, 0), &[(5, 5)], 1.0).unwrap();
        let err = propagate_scouts(&l, Admissibility::ForwardDag, 100).unwrap_err();
        assert!(matches!(
            err,
            EngineError::PathBudgetExceeded { budget: 100, .. }
        ));
    }

    #[test]
    fn max_hops_reaches_longer_paths() {
        let l = build_grid(3, 3, 1.0, (0, 0), &[(2, 2)], 1.0).unwrap();
        let dag = propagate_scouts(&l, Admissibility::ForwardDag, 10_000).unwrap();
        let hops = propagate_scouts(&l, Admissibility::MaxHops(6), 10_000).unwrap();
        assert!(hops.arrivals.len() > dag.arrivals.len());
        for a in &hops.arrivals {
            let path = hops.path(a);
            let mut sorted = path.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), path.len(), "scout path must be simple");
        }
    }
}
