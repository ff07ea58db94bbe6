//! Brute-force reference computations.
//!
//! Nothing here touches the engine's wavefront or query loop. Paths are
//! listed by plain recursion over hop distances obtained by relaxation,
//! amplitudes are summed directly, and selection laws are obtained by walking
//! every possible sequence of lottery outcomes.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{LotteryMode, Phase};
use crate::lattice::{Admissibility, Lattice, NodeId, NodeKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("path budget exceeded: {count} paths, budget {budget}")]
    PathBudgetExceeded { count: usize, budget: usize },
    #[error("dark configuration: every amplitude is zero")]
    DarkConfiguration,
    #[error("reverse routes contain a cycle through {0}")]
    CyclicRoutes(NodeId),
    #[error("more than {0} lottery outcome sequences")]
    OutcomeBudgetExceeded(usize),
    #[error("{0} is not a detector")]
    NotADetector(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub nodes: Vec<NodeId>,
    pub total_length: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornDistribution {
    pub entries: BTreeMap<NodeId, f64>,
    pub total_intensity: f64,
}

impl BornDistribution {
    pub fn probability(&self, detector: NodeId) -> f64 {
        self.entries.get(&detector).copied().unwrap_or(0.0)
    }
}

/// Hop distance from the source, relaxing every rib until nothing changes.
/// Only the source and void nodes pass distance on.
fn hop_distances(lattice: &Lattice) -> Vec<Option<usize>> {
    let source = lattice.source();
    let mut dist = vec![None; lattice.nodes().len()];
    dist[source.0] = Some(0);
    let passes = |n: NodeId| n == source || lattice.kind(n) == NodeKind::Void;
    let mut changed = true;
    while changed {
        changed = false;
        for rib in lattice.ribs() {
            for (from, to) in [(rib.a, rib.b), (rib.b, rib.a)] {
                let Some(d) = dist[from.0] else { continue };
                if !passes(from) {
                    continue;
                }
                if dist[to.0].is_none_or(|old| d + 1 < old) {
                    dist[to.0] = Some(d + 1);
                    changed = true;
                }
            }
        }
    }
    dist
}

struct Enumeration<'a> {
    lattice: &'a Lattice,
    target: NodeId,
    admissibility: Admissibility,
    dist: Vec<Option<usize>>,
    budget: usize,
    found: Vec<PathRecord>,
}

impl Enumeration<'_> {
    fn visit(&mut self, path: &mut Vec<NodeId>, length: f64) -> Result<(), OracleError> {
        let here = *path.last().expect("path starts at the source");
        if here == self.target {
            self.found.push(PathRecord {
                nodes: path.clone(),
                total_length: length,
                phase: Phase::from_turns(length / self.lattice.wavelength()),
            });
            if self.found.len() > self.budget {
                return Err(OracleError::PathBudgetExceeded {
                    count: self.found.len(),
                    budget: self.budget,
                });
            }
            return Ok(());
        }
        if here != self.lattice.source() && self.lattice.kind(here) != NodeKind::Void {
            return Ok(());
        }
        let hops = path.len() - 1;
        let mut next: Vec<(NodeId, f64)> = self
            .lattice
            .ribs()
            .iter()
            .filter(|r| r.touches(here))
            .map(|r| (r.other(here), r.length))
            .collect();
        next.sort_by_key(|&(n, _)| n);
        for (n, len) in next {
            let ok = match self.admissibility {
                Admissibility::ForwardDag => {
                    self.dist[n.0] == Some(hops + 1)
                        && self.dist[self.target.0].is_some_and(|t| hops < t)
                }
                Admissibility::MaxHops(limit) => hops < limit && !path.contains(&n),
            };
            if ok {
                path.push(n);
                self.visit(path, length + len)?;
                path.pop();
            }
        }
        Ok(())
    }
}

/// Every admissible source-to-`detector` path, in lexicographic node order.
pub fn enumerate_paths(
    lattice: &Lattice,
    detector: NodeId,
    admissibility: Admissibility,
    budget: usize,
) -> Result<Vec<PathRecord>, OracleError> {
    if lattice.kind(detector) != NodeKind::Detector {
        return Err(OracleError::NotADetector(detector));
    }
    let mut e = Enumeration {
        lattice,
        target: detector,
        admissibility,
        dist: hop_distances(lattice),
        budget,
        found: Vec::new(),
    };
    e.visit(&mut vec![lattice.source()], 0.0)?;
    let mut found = e.found;
    found.sort_by(|a, b| a.nodes.cmp(&b.nodes));
    Ok(found)
}

/// `Σ (cos φ, sin φ)` over the paths.
pub fn detector_amplitude(paths: &[PathRecord]) -> Complex64 {
    paths.iter().map(|p| p.phase.phasor()).sum()
}

/// Amplitude of every detector of the lattice.
pub fn amplitudes(
    lattice: &Lattice,
    admissibility: Admissibility,
    budget: usize,
) -> Result<BTreeMap<NodeId, Complex64>, OracleError> {
    lattice
        .detectors()
        .iter()
        .map(|&d| {
            Ok((
                d,
                detector_amplitude(&enumerate_paths(lattice, d, admissibility, budget)?),
            ))
        })
        .collect()
}

pub fn born_distribution(
    amplitudes: &BTreeMap<NodeId, Complex64>,
) -> Result<BornDistribution, OracleError> {
    let intensities = amplitudes.iter().map(|(&d, a)| (d, a.norm_sqr())).collect();
    born_from_intensities(&intensities)
}

/// `P_i = I_i / Σ I`.
pub fn born_from_intensities(
    intensities: &BTreeMap<NodeId, f64>,
) -> Result<BornDistribution, OracleError> {
    let total: f64 = intensities.values().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(OracleError::DarkConfiguration);
    }
    Ok(BornDistribution {
        entries: intensities.iter().map(|(&d, &i)| (d, i / total)).collect(),
        total_intensity: total,
    })
}

#[derive(Debug, Clone)]
struct Held {
    label: NodeId,
    absorbed: FixedBitSet,
}

struct OutcomeWalk<'a> {
    lattice: &'a Lattice,
    mode: LotteryMode,
    intensities: Vec<f64>,
    children: Vec<Vec<NodeId>>,
    order: Vec<NodeId>,
    held: Vec<Option<Held>>,
    result: BTreeMap<NodeId, f64>,
    leaves: usize,
    budget: usize,
}

impl OutcomeWalk<'_> {
    fn weight(&self, label: NodeId, absorbed: &FixedBitSet) -> f64 {
        match self.mode {
            LotteryMode::Naive => self.intensities[self.lattice.detector_index(label).unwrap()],
            LotteryMode::Aggregate => absorbed.ones().map(|i| self.intensities[i]).sum(),
        }
    }

    fn walk(&mut self, step: usize, probability: f64) -> Result<(), OracleError> {
        if step == self.order.len() {
            self.leaves += 1;
            if self.leaves > self.budget {
                return Err(OracleError::OutcomeBudgetExceeded(self.budget));
            }
            let label = self.held[self.lattice.source().0]
                .as_ref()
                .expect("source holds a query")
                .label;
            *self.result.entry(label).or_insert(0.0) += probability;
            return Ok(());
        }
        let v = self.order[step];
        let mut groups: BTreeMap<NodeId, FixedBitSet> = BTreeMap::new();
        for c in &self.children[v.0] {
            if let Some(h) = &self.held[c.0] {
                groups
                    .entry(h.label)
                    .or_insert_with(|| FixedBitSet::with_capacity(h.absorbed.len()))
                    .union_with(&h.absorbed);
            }
        }
        let competitors: Vec<(NodeId, FixedBitSet, f64)> = groups
            .into_iter()
            .map(|(l, a)| {
                let w = self.weight(l, &a);
                (l, a, w)
            })
            .collect();
        if competitors.is_empty() {
            self.held[v.0] = None;
            return self.walk(step + 1, probability);
        }
        let total: f64 = competitors.iter().map(|c| c.2).sum();
        let mut union = FixedBitSet::with_capacity(self.intensities.len());
        for c in &competitors {
            union.union_with(&c.1);
        }
        for (label, absorbed, w) in &competitors {
            let p = if competitors.len() == 1 {
                1.0
            } else if total > 0.0 {
                w / total
            } else {
                1.0 / competitors.len() as f64
            };
            if p == 0.0 {
                continue;
            }
            let absorbed = match self.mode {
                LotteryMode::Aggregate => union.clone(),
                LotteryMode::Naive => absorbed.clone(),
            };
            self.held[v.0] = Some(Held {
                label: *label,
                absorbed,
            });
            self.walk(step + 1, probability * p)?;
        }
        self.held[v.0] = None;
        Ok(())
    }
}

/// Exact selection law of the query lotteries, obtained by enumerating every
/// sequence of lottery outcomes on the reverse routes of bright detectors.
pub fn exact_selection(
    lattice: &Lattice,
    mode: LotteryMode,
    admissibility: Admissibility,
    path_budget: usize,
    dark_threshold: f64,
    outcome_budget: usize,
) -> Result<BTreeMap<NodeId, f64>, OracleError> {
    let n = lattice.nodes().len();
    let detectors = lattice.detectors();
    let mut intensities = vec![0.0; detectors.len()];
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (i, &d) in detectors.iter().enumerate() {
        let paths = enumerate_paths(lattice, d, admissibility, path_budget)?;
        intensities[i] = detector_amplitude(&paths).norm_sqr();
        if intensities[i] <= dark_threshold {
            continue;
        }
        for p in &paths {
            for pair in p.nodes.windows(2) {
                if !children[pair[0].0].contains(&pair[1]) {
                    children[pair[0].0].push(pair[1]);
                }
            }
        }
    }
    if intensities.iter().all(|&i| i <= dark_threshold) {
        return Err(OracleError::DarkConfiguration);
    }
    for list in children.iter_mut() {
        list.sort();
    }

    // children before parents; detectors are fixed leaves
    let mut state = vec![0u8; n];
    let mut order = Vec::new();
    fn post(
        v: NodeId,
        children: &[Vec<NodeId>],
        state: &mut [u8],
        order: &mut Vec<NodeId>,
    ) -> Result<(), OracleError> {
        match state[v.0] {
            2 => return Ok(()),
            1 => return Err(OracleError::CyclicRoutes(v)),
            _ => {}
        }
        state[v.0] = 1;
        for &c in &children[v.0] {
            post(c, children, state, order)?;
        }
        state[v.0] = 2;
        order.push(v);
        Ok(())
    }
    post(lattice.source(), &children, &mut state, &mut order)?;

    let mut held = vec![None; n];
    for (i, &d) in detectors.iter().enumerate() {
        if intensities[i] > dark_threshold {
            let mut absorbed = FixedBitSet::with_capacity(detectors.len());
            absorbed.insert(i);
            held[d.0] = Some(Held { label: d, absorbed });
        }
    }
    order.retain(|&v| lattice.kind(v) != NodeKind::Detector);
    let mut walk = OutcomeWalk {
        lattice,
        mode,
        intensities,
        children,
        order,
        held,
        result: BTreeMap::new(),
        leaves: 0,
        budget: outcome_budget,
    };
    walk.walk(0, 1.0)?;
    let mut result = walk.result;
    for &d in detectors {
        result.entry(d).or_insert(0.0);
    }
    Ok(result)
}
