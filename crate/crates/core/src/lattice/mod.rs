//! Node/rib graphs that every protocol run executes on.
//!
//! A [`Lattice`] is immutable once built. Construction goes through
//! [`Lattice::new`], which checks every structural invariant, so builders,
//! the topology loader and hand-assembled graphs all share one validation
//! path.
//!
//! Only void nodes relay signals. The source emits, detectors and laser
//! emitters terminate whatever reaches them. Reachability checks and both
//! path-enumeration routes (engine and oracle) follow that rule.

mod builders;
pub mod random;
mod topology;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builders::{
    arm_lengths_for_intensity, build_clock_chain, build_grid, build_interferometric_star,
    build_merge_tree, build_slit_grid, build_star, build_two_path, MergeTree, SlitGrid,
};
pub use topology::{load_topology, to_topology_document};

/// Tolerance between a builder-assigned rib length and the Euclidean distance
/// of its endpoints.
pub const LENGTH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("n{}", self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RibId(pub usize);

impl fmt::Display for RibId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("r{}", self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Void,
    Source,
    Detector,
    LaserEmitter,
}

impl NodeKind {
    /// Whether a signal entering this node is passed on to further ribs.
    pub fn relays(self) -> bool {
        matches!(self, NodeKind::Void)
    }

    pub fn is_charged(self) -> bool {
        !self.relays()
    }
}

/// Planar or spatial coordinates in lattice length units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position(Vec<f64>);

impl Position {
    pub fn planar(x: f64, y: f64) -> Self {
        Position(vec![x, y])
    }

    pub fn spatial(x: f64, y: f64, z: f64) -> Self {
        Position(vec![x, y, z])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    fn is_valid(&self) -> bool {
        matches!(self.0.len(), 2 | 3) && self.0.iter().all(|c| c.is_finite())
    }

    /// Euclidean distance; a planar point is treated as having `z = 0`.
    pub fn distance(&self, other: &Position) -> f64 {
        let get = |p: &Position, i: usize| p.0.get(i).copied().unwrap_or(0.0);
        (0..3)
            .map(|i| get(self, i) - get(other, i))
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub position: Position,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rib {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

impl Rib {
    /// The endpoint opposite `node`. `node` must be an endpoint.
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.a == node {
            self.b
        } else {
            debug_assert_eq!(self.b, node);
            self.a
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.a == node || self.b == node
    }
}

/// A rib as supplied to [`Lattice::new`]; the length defaults to the
/// Euclidean distance between the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RibSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub length: Option<f64>,
}

impl RibSpec {
    pub fn new(a: usize, b: usize, length: Option<f64>) -> Self {
        RibSpec {
            a: NodeId(a),
            b: NodeId(b),
            length,
        }
    }
}

/// Which source-to-detector paths count as admissible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Admissibility {
    /// Only ribs that strictly increase hop distance from the source.
    #[default]
    ForwardDag,
    /// Every simple path with at most this many ribs.
    MaxHops(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing wavelength")]
    MissingWavelength,
    #[error("wavelength must be positive and finite, got {0}")]
    InvalidWavelength(f64),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node ids must be dense from 0; {0} is missing")]
    NonDenseIds(NodeId),
    #[error("node {0} has an invalid position (need 2 or 3 finite coordinates)")]
    InvalidPosition(NodeId),
    #[error("missing source node")]
    MissingSource,
    #[error("more than one source node ({0} and {1})")]
    MultipleSources(NodeId, NodeId),
    #[error("no detector node")]
    NoDetector,
    #[error("rib {rib} has dangling endpoint {node}")]
    DanglingEndpoint { rib: usize, node: NodeId },
    #[error("rib {rib} is a self-loop on {node}")]
    SelfLoop { rib: usize, node: NodeId },
    #[error("rib {rib} duplicates the endpoints {a}-{b}")]
    DuplicateRib { rib: usize, a: NodeId, b: NodeId },
    #[error("rib {rib} has non-positive length {length}")]
    NonPositiveLength { rib: usize, length: f64 },
    #[error("detector {0} is not reachable from the source through void nodes")]
    DisconnectedDetector(NodeId),
    #[error("malformed topology document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    nodes: Vec<Node>,
    ribs: Vec<Rib>,
    adjacency: Vec<Vec<RibId>>,
    wavelength: f64,
    source: NodeId,
    detectors: Vec<NodeId>,
}

impl Lattice {
    /// Validates and assembles a lattice. Nodes may be given in any order but
    /// their ids must be unique and dense from 0.
    pub fn new(
        mut nodes: Vec<Node>,
        ribs: Vec<RibSpec>,
        wavelength: f64,
    ) -> Result<Self, LatticeError> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(LatticeError::InvalidWavelength(wavelength));
        }

        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(LatticeError::DuplicateNode(pair[0].id));
            }
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id.0 != i {
                return Err(LatticeError::NonDenseIds(NodeId(i)));
            }
            if !node.position.is_valid() {
                return Err(LatticeError::InvalidPosition(node.id));
            }
        }

        let mut source = None;
        for node in nodes.iter().filter(|n| n.kind == NodeKind::Source) {
            match source {
                None => source = Some(node.id),
                Some(first) => return Err(LatticeError::MultipleSources(first, node.id)),
            }
        }
        let source = source.ok_or(LatticeError::MissingSource)?;
        let detectors: Vec<NodeId> = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Detector)
            .map(|n| n.id)
            .collect();
        if detectors.is_empty() {
            return Err(LatticeError::NoDetector);
        }

        let mut seen = BTreeSet::new();
        let mut built = Vec::with_capacity(ribs.len());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, spec) in ribs.iter().enumerate() {
            for end in [spec.a, spec.b] {
                if end.0 >= nodes.len() {
                    return Err(LatticeError::DanglingEndpoint { rib: i, node: end });
                }
            }
            if spec.a == spec.b {
                return Err(LatticeError::SelfLoop {
                    rib: i,
                    node: spec.a,
                });
            }
            let key = (spec.a.min(spec.b), spec.a.max(spec.b));
            if !seen.insert(key) {
                return Err(LatticeError::DuplicateRib {
                    rib: i,
                    a: key.0,
                    b: key.1,
                });
            }
            let length = spec
                .length
                .unwrap_or_else(|| nodes[spec.a.0].position.distance(&nodes[spec.b.0].position));
            if !(length.is_finite() && length > 0.0) {
                return Err(LatticeError::NonPositiveLength { rib: i, length });
            }
            adjacency[spec.a.0].push(RibId(i));
            adjacency[spec.b.0].push(RibId(i));
            built.push(Rib {
                a: spec.a,
                b: spec.b,
                length,
            });
        }
        // Neighbour order is ascending by neighbour id.
        for (n, list) in adjacency.iter_mut().enumerate() {
            list.sort_by_key(|&r| built[r.0].other(NodeId(n)));
        }

        let lattice = Lattice {
            nodes,
            ribs: built,
            adjacency,
            wavelength,
            source,
            detectors,
        };
        let reach = lattice.relay_reachable(source);
        if let Some(&lost) = lattice.detectors.iter().find(|d| !reach[d.0]) {
            return Err(LatticeError::DisconnectedDetector(lost));
        }
        Ok(lattice)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.0].kind
    }

    pub fn ribs(&self) -> &[Rib] {
        &self.ribs
    }

    pub fn rib(&self, id: RibId) -> &Rib {
        &self.ribs[id.0]
    }

    /// Ribs incident to `node`, ordered by neighbour id.
    pub fn incident(&self, node: NodeId) -> &[RibId] {
        &self.adjacency[node.0]
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    /// Detector ids in ascending order.
    pub fn detectors(&self) -> &[NodeId] {
        &self.detectors
    }

    pub fn detector_index(&self, id: NodeId) -> Option<usize> {
        self.detectors.binary_search(&id).ok()
    }

    /// Nodes carrying the given kind, ascending.
    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(move |n| n.kind == kind)
            .map(|n| n.id)
    }

    pub fn find_rib(&self, a: NodeId, b: NodeId) -> Option<RibId> {
        self.adjacency[a.0]
            .iter()
            .copied()
            .find(|&r| self.ribs[r.0].other(a) == b)
    }

    /// Same graph with a different wavelength.
    pub fn with_wavelength(&self, wavelength: f64) -> Result<Self, LatticeError> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(LatticeError::InvalidWavelength(wavelength));
        }
        Ok(Lattice {
            wavelength,
            ..self.clone()
        })
    }

    /// Breadth-first reachability from `origin` where only void nodes pass
    /// signals on.
    pub fn relay_reachable(&self, origin: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        seen[origin.0] = true;
        let mut queue = VecDeque::from([origin]);
        while let Some(v) = queue.pop_front() {
            if v != origin && !self.kind(v).relays() {
                continue;
            }
            for &r in &self.adjacency[v.0] {
                let w = self.ribs[r.0].other(v);
                if !seen[w.0] {
                    seen[w.0] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Largest gap between a rib's length and its endpoints' distance.
    pub fn max_length_mismatch(&self) -> f64 {
        self.ribs
            .iter()
            .map(|r| {
                let d = self.nodes[r.a.0]
                    .position
                    .distance(&self.nodes[r.b.0].position);
                (d - r.length).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: usize, x: f64, kind: NodeKind) -> Node {
        Node {
            id: NodeId(id),
            position: Position::planar(x, 0.0),
            kind,
        }
    }

    fn chain() -> Vec<Node> {
        vec![
            node(0, 0.0, NodeKind::Source),
            node(1, 1.0, NodeKind::Void),
            node(2, 2.0, NodeKind::Detector),
        ]
    }

    #[test]
    fn default_lengths_are_euclidean() {
        let l = Lattice::new(
            chain(),
            vec![RibSpec::new(0, 1, None), RibSpec::new(1, 2, Some(0.5))],
            1.0,
        )
        .unwrap();
        assert_eq!(l.rib(RibId(0)).length, 1.0);
        assert_eq!(l.rib(RibId(1)).length, 0.5);
        assert_eq!(l.detectors(), &[NodeId(2)]);
    }

    #[test]
    fn rejects_structural_defects() {
        let ribs = || vec![RibSpec::new(0, 1, None), RibSpec::new(1, 2, None)];
        assert_eq!(
            Lattice::new(chain(), ribs(), 0.0).unwrap_err(),
            LatticeError::InvalidWavelength(0.0)
        );
        let mut dup = chain();
        dup[2].id = NodeId(1);
        assert!(matches!(
            Lattice::new(dup, ribs(), 1.0),
            Err(LatticeError::DuplicateNode(NodeId(1)))
        ));
        assert!(matches!(
            Lattice::new(chain(), vec![RibSpec::new(0, 5, None)], 1.0),
            Err(LatticeError::DanglingEndpoint { rib: 0, .. })
        ));
        assert!(matches!(
            Lattice::new(chain(), vec![RibSpec::new(1, 1, None)], 1.0),
            Err(LatticeError::SelfLoop { .. })
        ));
        assert!(matches!(
            Lattice::new(
                chain(),
                vec![RibSpec::new(0, 1, None), RibSpec::new(1, 0, None)],
                1.0
            ),
            Err(LatticeError::DuplicateRib { rib: 1, .. })
        ));
        assert!(matches!(
            Lattice::new(chain(), vec![RibSpec::new(0, 1, Some(-1.0))], 1.0),
            Err(LatticeError::NonPositiveLength { .. })
        ));
        assert!(matches!(
            Lattice::new(chain(), vec![RibSpec::new(0, 1, None)], 1.0),
            Err(LatticeError::DisconnectedDetector(NodeId(2)))
        ));
    }

    #[test]
    fn detectors_do_not_relay() {
        // source - detector - detector: the far detector is shadowed
        let nodes = vec![
            node(0, 0.0, NodeKind::Source),
            node(1, 1.0, NodeKind::Detector),
            node(2, 2.0, NodeKind::Detector),
        ];
        let err = Lattice::new(
            nodes,
            vec![RibSpec::new(0, 1, None), RibSpec::new(1, 2, None)],
            1.0,
        )
        .unwrap_err();
        assert_eq!(err, LatticeError::DisconnectedDetector(NodeId(2)));
    }

    #[test]
    fn source_count_is_checked() {
        let mut nodes = chain();
        nodes[1].kind = NodeKind::Source;
        assert!(matches!(
            Lattice::new(nodes, vec![], 1.0),
            Err(LatticeError::MultipleSources(..))
        ));
        let mut nodes = chain();
        nodes[0].kind = NodeKind::Void;
        assert_eq!(
            Lattice::new(nodes, vec![], 1.0).unwrap_err(),
            LatticeError::MissingSource
        );
    }
}
