//! Randomized lattices for property checks: a jittered grid with random rib
//! deletion, random diagonals, and randomly placed detectors.

use rand::seq::index::sample;
use rand::Rng;

use super::{Lattice, Node, NodeId, NodeKind, Position, RibSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomLatticeSpec {
    pub columns: usize,
    pub rows: usize,
    /// Probability that an axis-aligned rib is kept.
    pub keep: f64,
    /// Probability that a cell gets one diagonal rib.
    pub diagonal: f64,
    pub detectors: usize,
    /// Maximum displacement of each node from its grid point.
    pub jitter: f64,
    pub wavelength: (f64, f64),
}

impl Default for RandomLatticeSpec {
    fn default() -> Self {
        RandomLatticeSpec {
            columns: 8,
            rows: 6,
            keep: 0.8,
            diagonal: 0.3,
            detectors: 3,
            jitter: 0.25,
            wavelength: (0.3, 2.0),
        }
    }
}

impl RandomLatticeSpec {
    /// Random grid dimensions with at most `max_nodes` nodes.
    pub fn sized<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> Self {
        let columns = rng.random_range(3..=12usize);
        let rows = rng.random_range(2..=(max_nodes / columns).clamp(2, 16));
        RandomLatticeSpec {
            columns,
            rows,
            detectors: rng.random_range(1..=4usize.min(columns * rows - 1)),
            ..Self::default()
        }
    }
}

/// Draws lattices until one validates. Panics after 10 000 rejected draws,
/// which only happens for specs that can never connect.
pub fn random_lattice<R: Rng + ?Sized>(rng: &mut R, spec: &RandomLatticeSpec) -> Lattice {
    for _ in 0..10_000 {
        if let Some(l) = draw(rng, spec) {
            return l;
        }
    }
    panic!("random lattice spec {spec:?} never produced a connected lattice");
}

fn draw<R: Rng + ?Sized>(rng: &mut R, spec: &RandomLatticeSpec) -> Option<Lattice> {
    let (w, h) = (spec.columns, spec.rows);
    let n = w * h;
    if n < 2 || spec.detectors == 0 || spec.detectors >= n {
        return None;
    }
    let id = |x: usize, y: usize| y * w + x;
    let source = id(0, rng.random_range(0..h));
    let candidates: Vec<usize> = (0..n).filter(|&i| i % w != 0).collect();
    let picks = sample(rng, candidates.len(), spec.detectors.min(candidates.len()));
    let detectors: Vec<usize> = picks.iter().map(|i| candidates[i]).collect();

    let nodes = (0..n)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let jx = rng.random_range(-spec.jitter..=spec.jitter);
            let jy = rng.random_range(-spec.jitter..=spec.jitter);
            let kind = if i == source {
                NodeKind::Source
            } else if detectors.contains(&i) {
                NodeKind::Detector
            } else {
                NodeKind::Void
            };
            Node {
                id: NodeId(i),
                position: Position::planar(x + jx, y + jy),
                kind,
            }
        })
        .collect();

    let mut ribs = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w && rng.random_bool(spec.keep) {
                ribs.push(RibSpec::new(id(x, y), id(x + 1, y), None));
            }
            if y + 1 < h && rng.random_bool(spec.keep) {
                ribs.push(RibSpec::new(id(x, y), id(x, y + 1), None));
            }
            if x + 1 < w && y + 1 < h && rng.random_bool(spec.diagonal) {
                if rng.random_bool(0.5) {
                    ribs.push(RibSpec::new(id(x, y), id(x + 1, y + 1), None));
                } else {
                    ribs.push(RibSpec::new(id(x + 1, y), id(x, y + 1), None));
                }
            }
        }
    }
    let (lo, hi) = spec.wavelength;
    let wavelength = if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    };
    Lattice::new(nodes, ribs, wavelength).ok()
}
