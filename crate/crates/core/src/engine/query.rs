//! Reverse half of a trial: queries, lotteries, refusals and confirmation.
//!
//! All signals cross one rib per hidden tick. A void node (or the source)
//! holds its lottery once every scout rib it fed has answered with either a
//! query or a void signal. Copies of one detector's query that meet merge
//! instead of competing. The winner is forwarded onto every scout rib that
//! fed the node; losers are refused back toward their detectors.
//!
//! A node whose forwarded copies have all been refused passes the refusal
//! down the ribs its winner arrived on. The source's winner triggers a
//! confirmation that walks back along one arrival rib per node, refusing the
//! other copies it passes.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use rand::Rng;

use super::detector::DetectorRecord;
use super::log::{SignalKind, TraceEvent};
use super::lottery::{lottery_select, LotteryMode, Query};
use super::scout::{RibMark, ScoutTrace};
use super::EngineError;
use crate::lattice::{Lattice, NodeId, NodeKind, RibId};

/// Initial query traffic produced by the closed detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmission {
    /// `(rib, destination, query)` for every bright detector's scout rib.
    pub queries: Vec<(RibId, NodeId, Query)>,
    /// Scout ribs of dark detectors, refused immediately: `(rib, destination)`.
    pub refused: Vec<(RibId, NodeId)>,
}

/// Each detector above `dark_threshold` sends its intensity back along every
/// scout rib that reached it; darker detectors void those ribs instead.
pub fn emit_queries(
    lattice: &Lattice,
    trace: &ScoutTrace,
    records: &[DetectorRecord],
    dark_threshold: f64,
) -> Result<QueryEmission, EngineError> {
    if let Some(open) = records.iter().find(|r| !r.closed) {
        return Err(EngineError::ProtocolOrder(format!(
            "detector {} still open when queries start",
            open.detector
        )));
    }
    if records.iter().all(|r| r.intensity <= dark_threshold) {
        return Err(EngineError::DarkTrial);
    }
    let n = lattice.detectors().len();
    let mut emission = QueryEmission {
        queries: Vec::new(),
        refused: Vec::new(),
    };
    for (idx, record) in records.iter().enumerate() {
        let d = record.detector;
        for &(rib, parent) in &trace.up[d.0] {
            if record.intensity > dark_threshold {
                let q = Query::new(d, idx, n, record.intensity, parent);
                emission.queries.push((rib, parent, q));
            } else {
                emission.refused.push((rib, parent));
            }
        }
    }
    Ok(emission)
}

/// Result of the reverse phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub winner: NodeId,
    pub path: Vec<NodeId>,
    pub ribs: Vec<RibMark>,
    /// Tick at which the last signal was delivered.
    pub ticks: u64,
    pub degenerate_lotteries: u32,
}

#[derive(Debug, Clone)]
enum Signal {
    Query(RibId, NodeId, NodeId, Query),
    Void(RibId, NodeId, NodeId),
    Refusal(RibId, NodeId, NodeId),
    Confirm(RibId, NodeId, NodeId),
}

#[derive(Debug, Clone)]
struct Forwarded {
    label: NodeId,
    arrived_on: Vec<(RibId, NodeId)>,
    live_up: usize,
}

#[derive(Debug, Clone, Default)]
struct NodeState {
    pending: usize,
    received: Vec<(RibId, NodeId, Query)>,
    resolved: bool,
    forwarded: Option<Forwarded>,
}

struct QueryPhase<'a, R: Rng + ?Sized> {
    lattice: &'a Lattice,
    trace: &'a ScoutTrace,
    mode: LotteryMode,
    intensities: Vec<f64>,
    ribs: Vec<RibMark>,
    nodes: Vec<NodeState>,
    outbox: Vec<Signal>,
    tick: u64,
    rng: &'a mut R,
    log: Option<&'a mut Vec<TraceEvent>>,
    degenerate: u32,
    winner: Option<NodeId>,
    detected: Option<NodeId>,
}

/// Runs queries, lotteries, refusals and the confirmation to completion.
pub fn backpropagate<R: Rng + ?Sized>(
    lattice: &Lattice,
    trace: &ScoutTrace,
    records: &[DetectorRecord],
    emission: &QueryEmission,
    mode: LotteryMode,
    rng: &mut R,
    log: Option<&mut Vec<TraceEvent>>,
) -> Result<Selection, EngineError> {
    let nodes = (0..lattice.nodes().len())
        .map(|v| NodeState {
            pending: trace.down[v].len(),
            ..NodeState::default()
        })
        .collect();
    let mut phase = QueryPhase {
        lattice,
        trace,
        mode,
        intensities: records.iter().map(|r| r.intensity).collect(),
        ribs: trace.ribs.clone(),
        nodes,
        outbox: Vec::new(),
        tick: trace.ticks,
        rng,
        log,
        degenerate: 0,
        winner: None,
        detected: None,
    };
    phase.start(emission);
    phase.run()?;
    phase.finish()
}

impl<'a, R: Rng + ?Sized> QueryPhase<'a, R> {
    fn record(
        &mut self,
        kind: SignalKind,
        rib: Option<RibId>,
        from: NodeId,
        to: NodeId,
        value: Option<f64>,
    ) {
        if let Some(log) = self.log.as_deref_mut() {
            log.push(TraceEvent {
                tick: self.tick,
                kind,
                rib,
                from,
                to,
                value,
            });
        }
    }

    fn send(&mut self, signal: Signal) {
        let (rib, mark) = match &signal {
            Signal::Query(rib, _, _, q) => (*rib, RibMark::Query(q.absorbed.clone())),
            Signal::Void(rib, ..) | Signal::Refusal(rib, ..) => (*rib, RibMark::Void),
            Signal::Confirm(rib, ..) => (*rib, RibMark::Confirmed),
        };
        self.ribs[rib.0] = mark;
        self.outbox.push(signal);
    }

    fn start(&mut self, emission: &QueryEmission) {
        for (rib, to, q) in &emission.queries {
            let from = self.lattice.rib(*rib).other(*to);
            self.send(Signal::Query(*rib, from, *to, q.clone()));
        }
        for &(rib, to) in &emission.refused {
            let from = self.lattice.rib(rib).other(to);
            self.send(Signal::Void(rib, from, to));
        }
        for d in self.lattice.detectors() {
            self.nodes[d.0].resolved = true;
        }
        // Relaying nodes whose scouts went nowhere answer with void at once.
        for v in 0..self.nodes.len() {
            let id = NodeId(v);
            if self.lattice.kind(id) != NodeKind::Detector
                && id != self.trace.origin
                && self.trace.down[v].is_empty()
                && !self.trace.up[v].is_empty()
            {
                self.nodes[v].resolved = true;
                self.void_upward(id);
            }
        }
    }

    fn void_upward(&mut self, v: NodeId) {
        for i in 0..self.trace.up[v.0].len() {
            let (rib, parent) = self.trace.up[v.0][i];
            self.send(Signal::Void(rib, v, parent));
        }
    }

    fn run(&mut self) -> Result<(), EngineError> {
        while !self.outbox.is_empty() {
            self.tick += 1;
            let inbox = std::mem::take(&mut self.outbox);
            let mut ready = Vec::new();
            for signal in inbox {
                match signal {
                    Signal::Query(rib, from, to, q) => {
                        self.record(SignalKind::Query, Some(rib), from, to, Some(q.weight));
                        let state = &mut self.nodes[to.0];
                        state.received.push((rib, from, q));
                        state.pending -= 1;
                        if state.pending == 0 {
                            ready.push(to);
                        }
                    }
                    Signal::Void(rib, from, to) => {
                        self.record(SignalKind::Void, Some(rib), from, to, None);
                        let state = &mut self.nodes[to.0];
                        state.pending -= 1;
                        if state.pending == 0 {
                            ready.push(to);
                        }
                    }
                    Signal::Refusal(rib, from, to) => {
                        self.record(SignalKind::Refusal, Some(rib), from, to, None);
                        self.refused_at(to);
                    }
                    Signal::Confirm(rib, from, to) => {
                        self.record(SignalKind::Confirm, Some(rib), from, to, None);
                        self.confirmed_at(to)?;
                    }
                }
            }
            ready.sort_unstable();
            for v in ready {
                self.resolve(v)?;
            }
        }
        Ok(())
    }

    fn weight_of(&self, label: NodeId, absorbed: &FixedBitSet) -> f64 {
        match self.mode {
            LotteryMode::Naive => {
                let idx = self
                    .lattice
                    .detector_index(label)
                    .expect("labels are detectors");
                self.intensities[idx]
            }
            LotteryMode::Aggregate => absorbed.ones().map(|i| self.intensities[i]).sum(),
        }
    }

    /// Barrier satisfied at `v`: merge, draw, forward or start confirmation.
    fn resolve(&mut self, v: NodeId) -> Result<(), EngineError> {
        let received = std::mem::take(&mut self.nodes[v.0].received);
        self.nodes[v.0].resolved = true;
        if received.is_empty() {
            if v == self.trace.origin {
                return Err(EngineError::DarkTrial);
            }
            self.void_upward(v);
            return Ok(());
        }

        let mut groups: BTreeMap<NodeId, (FixedBitSet, Vec<(RibId, NodeId)>)> = BTreeMap::new();
        for (rib, child, q) in received {
            let entry = groups
                .entry(q.detector)
                .or_insert_with(|| (FixedBitSet::with_capacity(q.absorbed.len()), Vec::new()));
            entry.0.union_with(&q.absorbed);
            entry.1.push((rib, child));
        }
        let mut competitors = Vec::with_capacity(groups.len());
        let mut routes = Vec::with_capacity(groups.len());
        for (label, (absorbed, arrived)) in groups {
            let weight = self.weight_of(label, &absorbed);
            competitors.push(Query {
                detector: label,
                weight,
                at: v,
                absorbed,
            });
            routes.push(arrived);
        }

        let (mut winner, winner_routes) = if competitors.len() == 1 {
            (
                competitors.pop().expect("one competitor"),
                routes.pop().expect("one route set"),
            )
        } else {
            let outcome = lottery_select(&competitors, self.mode, &mut *self.rng)?;
            let kind = if outcome.degenerate {
                self.degenerate += 1;
                SignalKind::DegenerateLottery
            } else {
                SignalKind::Lottery
            };
            self.record(
                kind,
                None,
                v,
                outcome.winner.detector,
                Some(outcome.winner.weight),
            );
            for &loser in &outcome.losers {
                for &(rib, child) in &routes[loser] {
                    self.send(Signal::Refusal(rib, v, child));
                }
            }
            let routes = std::mem::take(&mut routes[outcome.winner_index]);
            (outcome.winner, routes)
        };
        if self.mode == LotteryMode::Aggregate {
            // copies met along different routes may overlap; count each detector once
            winner.weight = self.weight_of(winner.detector, &winner.absorbed);
        }

        if v == self.trace.origin {
            self.winner = Some(winner.detector);
            self.confirm_from(v, winner_routes);
        } else {
            let up = self.trace.up[v.0].clone();
            self.nodes[v.0].forwarded = Some(Forwarded {
                label: winner.detector,
                arrived_on: winner_routes,
                live_up: up.len(),
            });
            for (rib, parent) in up {
                let mut q = winner.clone();
                q.at = parent;
                self.send(Signal::Query(rib, v, parent, q));
            }
        }
        Ok(())
    }

    /// Sends the confirmation down one of the winner's arrival ribs, chosen
    /// uniformly, and refuses the others.
    fn confirm_from(&mut self, v: NodeId, routes: Vec<(RibId, NodeId)>) {
        let keep = if routes.len() > 1 {
            self.rng.random_range(0..routes.len())
        } else {
            0
        };
        for (i, (rib, child)) in routes.into_iter().enumerate() {
            if i == keep {
                self.send(Signal::Confirm(rib, v, child));
            } else {
                self.send(Signal::Refusal(rib, v, child));
            }
        }
    }

    fn confirmed_at(&mut self, w: NodeId) -> Result<(), EngineError> {
        if self.lattice.kind(w) == NodeKind::Detector {
            self.detected = Some(w);
            self.record(SignalKind::Detect, None, w, w, None);
            return Ok(());
        }
        let fwd = self.nodes[w.0].forwarded.as_ref().ok_or_else(|| {
            EngineError::ProtocolOrder(format!("confirmation reached idle node {w}"))
        })?;
        if Some(fwd.label) != self.winner {
            return Err(EngineError::Invariant(format!(
                "confirmation reached {w}, which forwarded {}",
                fwd.label
            )));
        }
        let routes = fwd.arrived_on.clone();
        self.confirm_from(w, routes);
        Ok(())
    }

    /// One forwarded copy at `w` lost; once none is left, refuse downward.
    fn refused_at(&mut self, w: NodeId) {
        let Some(fwd) = self.nodes[w.0].forwarded.as_mut() else {
            return;
        };
        fwd.live_up -= 1;
        if fwd.live_up == 0 {
            let routes = std::mem::take(&mut fwd.arrived_on);
            for (rib, child) in routes {
                self.send(Signal::Refusal(rib, w, child));
            }
        }
    }

    fn finish(self) -> Result<Selection, EngineError> {
        if let Some(v) = (0..self.nodes.len()).find(|&v| {
            !self.nodes[v].resolved
                && (!self.trace.down[v].is_empty() || NodeId(v) == self.trace.origin)
        }) {
            return Err(EngineError::Deadlock(NodeId(v)));
        }
        let winner = self.winner.ok_or(EngineError::DarkTrial)?;
        if self.detected != Some(winner) {
            return Err(EngineError::Invariant(format!(
                "confirmation for {winner} never arrived"
            )));
        }
        if let Some(i) = self
            .ribs
            .iter()
            .position(|m| !matches!(m, RibMark::Void | RibMark::Confirmed))
        {
            return Err(EngineError::Invariant(format!(
                "rib r{i} left as {:?} after the trial",
                self.ribs[i]
            )));
        }
        let path = confirmed_path(self.lattice, &self.ribs, self.trace.origin, winner)?;
        Ok(Selection {
            winner,
            path,
            ribs: self.ribs,
            ticks: self.tick,
            degenerate_lotteries: self.degenerate,
        })
    }
}

/// Follows confirmed ribs from `origin`; they must form one simple path that
/// ends at `winner` and uses every confirmed rib.
pub fn confirmed_path(
    lattice: &Lattice,
    ribs: &[RibMark],
    origin: NodeId,
    winner: NodeId,
) -> Result<Vec<NodeId>, EngineError> {
    let total = ribs.iter().filter(|m| **m == RibMark::Confirmed).count();
    let mut path = vec![origin];
    let mut prev: Option<RibId> = None;
    let mut at = origin;
    loop {
        let next: Vec<RibId> = lattice
            .incident(at)
            .iter()
            .copied()
            .filter(|&r| Some(r) != prev && ribs[r.0] == RibMark::Confirmed)
            .collect();
        match next.as_slice() {
            [] => break,
            [r] => {
                at = lattice.rib(*r).other(at);
                if path.contains(&at) {
                    return Err(EngineError::Invariant("confirmed ribs form a cycle".into()));
                }
                path.push(at);
                prev = Some(*r);
            }
            _ => {
                return Err(EngineError::Invariant(format!(
                    "confirmed ribs branch at {at}"
                )))
            }
        }
    }
    if at != winner || path.len() - 1 != total {
        return Err(EngineError::Invariant(format!(
            "confirmed ribs do not form a single path to {winner}"
        )));
    }
    Ok(path)
}
