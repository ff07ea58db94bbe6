use std::f64::consts::{PI, TAU};

use super::{Lattice, LatticeError, Node, NodeId, NodeKind, Position, RibSpec};

#[derive(Default)]
struct Draft {
    nodes: Vec<Node>,
    ribs: Vec<RibSpec>,
}

impl Draft {
    fn add_node(&mut self, x: f64, y: f64, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            id,
            position: Position::planar(x, y),
            kind,
        });
        id
    }

    fn add_rib(&mut self, a: NodeId, b: NodeId, length: Option<f64>) {
        self.ribs.push(RibSpec { a, b, length });
    }

    fn xy(&self, id: NodeId) -> (f64, f64) {
        let p = &self.nodes[id.0].position;
        (p.x(), p.y())
    }

    /// Joins `from` and `to` with `hops` equal chords of total length
    /// `length`, laid on a circular arc bulging to `side` (+1 left, -1 right
    /// of the from→to direction). Needs `hops >= 2` and a chord span shorter
    /// than `length`.
    fn add_arc_chain(&mut self, from: NodeId, to: NodeId, length: f64, hops: usize, side: f64) {
        let (ax, ay) = self.xy(from);
        let (bx, by) = self.xy(to);
        let span = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
        let h = hops as f64;
        let chord = length / h;
        debug_assert!(hops >= 2 && span < length);

        // sin(h x) / sin(x) falls monotonically from h to 0 on (0, pi/h).
        let ratio = span / chord;
        let (mut lo, mut hi) = (0.0_f64, PI / h);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (h * mid).sin() / mid.sin() > ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let half = 0.5 * (lo + hi);
        let radius = chord / (2.0 * half.sin());

        let (ux, uy) = ((bx - ax) / span, (by - ay) / span);
        let (nx, ny) = (-uy * side, ux * side);
        let (mx, my) = (0.5 * (ax + bx), 0.5 * (ay + by));
        let offset = radius * (h * half).cos();
        let (cx, cy) = (mx - nx * offset, my - ny * offset);

        let mut prev = from;
        for k in 1..hops {
            let theta = PI / 2.0 + h * half - 2.0 * (k as f64) * half;
            let (c, s) = (radius * theta.cos(), radius * theta.sin());
            let next = self.add_node(cx + ux * c + nx * s, cy + uy * c + ny * s, NodeKind::Void);
            self.add_rib(prev, next, Some(chord));
            prev = next;
        }
        self.add_rib(prev, to, Some(chord));
    }

    /// Source-side endpoint `from`, detector `to` placed at `dir` from it;
    /// two arcs of lengths `len_a` and `len_b` join them.
    fn add_interferometer(
        &mut self,
        from: NodeId,
        dir: (f64, f64),
        len_a: f64,
        len_b: f64,
        hops: usize,
    ) -> NodeId {
        let hops = hops.max(2);
        let span = 0.5 * len_a.min(len_b);
        let (fx, fy) = self.xy(from);
        let detector = self.add_node(fx + dir.0 * span, fy + dir.1 * span, NodeKind::Detector);
        self.add_arc_chain(from, detector, len_a, hops, 1.0);
        self.add_arc_chain(from, detector, len_b, hops, -1.0);
        detector
    }

    fn finish(self, wavelength: f64) -> Result<Lattice, LatticeError> {
        Lattice::new(self.nodes, self.ribs, wavelength)
    }
}

fn positive(name: &str, v: f64) -> Result<f64, LatticeError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(LatticeError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<usize, LatticeError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(LatticeError::InvalidParameter(format!(
            "{name} must be at least 1"
        )))
    }
}

/// Source at the origin with `num_detectors` straight, disjoint arms of
/// `arm_hops` ribs each. Arm `i` uses rib length `arm_lengths[i]`.
pub fn build_star(
    num_detectors: usize,
    arm_hops: usize,
    arm_lengths: &[f64],
    wavelength: f64,
) -> Result<Lattice, LatticeError> {
    at_least_one("num_detectors", num_detectors)?;
    at_least_one("arm_hops", arm_hops)?;
    if arm_lengths.len() != num_detectors {
        return Err(LatticeError::InvalidParameter(format!(
            "expected {num_detectors} arm lengths, got {}",
            arm_lengths.len()
        )));
    }
    let mut draft = Draft::default();
    let source = draft.add_node(0.0, 0.0, NodeKind::Source);
    for (i, &len) in arm_lengths.iter().enumerate() {
        positive("arm length", len)?;
        let angle = TAU * i as f64 / num_detectors as f64;
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut prev = source;
        for k in 1..=arm_hops {
            let kind = if k == arm_hops {
                NodeKind::Detector
            } else {
                NodeKind::Void
            };
            let r = len * k as f64;
            let next = draft.add_node(dx * r, dy * r, kind);
            draft.add_rib(prev, next, Some(len));
            prev = next;
        }
    }
    draft.finish(wavelength)
}

/// Source and a single detector joined by two disjoint chains of total
/// lengths `len_a` and `len_b`. A one-hop request would put two parallel
/// ribs between the same endpoints, so chains get at least two hops.
pub fn build_two_path(
    len_a: f64,
    len_b: f64,
    hops_per_path: usize,
    wavelength: f64,
) -> Result<Lattice, LatticeError> {
    positive("len_a", len_a)?;
    positive("len_b", len_b)?;
    at_least_one("hops_per_path", hops_per_path)?;
    let mut draft = Draft::default();
    let source = draft.add_node(0.0, 0.0, NodeKind::Source);
    draft.add_interferometer(source, (1.0, 0.0), len_a, len_b, hops_per_path);
    draft.finish(wavelength)
}

/// A star whose every arm is a two-chain interferometer, so each detector's
/// intensity is set by the length difference of its pair.
pub fn build_interferometric_star(
    arms: &[(f64, f64)],
    hops_per_path: usize,
    wavelength: f64,
) -> Result<Lattice, LatticeError> {
    at_least_one("arm count", arms.len())?;
    at_least_one("hops_per_path", hops_per_path)?;
    let mut draft = Draft::default();
    let source = draft.add_node(0.0, 0.0, NodeKind::Source);
    for (i, &(a, b)) in arms.iter().enumerate() {
        positive("arm length", a)?;
        positive("arm length", b)?;
        let angle = TAU * i as f64 / arms.len() as f64;
        draft.add_interferometer(source, (angle.cos(), angle.sin()), a, b, hops_per_path);
    }
    draft.finish(wavelength)
}

/// Chain lengths `(2λ, 2λ + δ)` whose two unit phasors sum to the requested
/// intensity, `I = 2 + 2 cos(2π δ / λ)`.
pub fn arm_lengths_for_intensity(
    intensity: f64,
    wavelength: f64,
) -> Result<(f64, f64), LatticeError> {
    if !(0.0..=4.0).contains(&intensity) {
        return Err(LatticeError::InvalidParameter(format!(
            "two-path intensity must lie in [0, 4], got {intensity}"
        )));
    }
    positive("wavelength", wavelength)?;
    let delta = wavelength * (intensity / 2.0 - 1.0).clamp(-1.0, 1.0).acos() / TAU;
    let base = 2.0 * wavelength;
    Ok((base, base + delta))
}

/// Rectangular grid with 4-neighbour ribs of length `spacing`. Node ids are
/// row-major (`y * width + x`).
pub fn build_grid(
    width: usize,
    height: usize,
    spacing: f64,
    source: (usize, usize),
    detectors: &[(usize, usize)],
    wavelength: f64,
) -> Result<Lattice, LatticeError> {
    at_least_one("width", width)?;
    at_least_one("height", height)?;
    positive("spacing", spacing)?;
    let inside = |(x, y): (usize, usize)| x < width && y < height;
    if !inside(source) || !detectors.iter().all(|&d| inside(d)) {
        return Err(LatticeError::InvalidParameter(
            "grid coordinate out of range".into(),
        ));
    }
    let mut draft = Draft::default();
    for y in 0..height {
        for x in 0..width {
            let kind = if (x, y) == source {
                NodeKind::Source
            } else if detectors.contains(&(x, y)) {
                NodeKind::Detector
            } else {
                NodeKind::Void
            };
            draft.add_node(x as f64 * spacing, y as f64 * spacing, kind);
        }
    }
    let id = |x: usize, y: usize| NodeId(y * width + x);
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                draft.add_rib(id(x, y), id(x + 1, y), Some(spacing));
            }
            if y + 1 < height {
                draft.add_rib(id(x, y), id(x, y + 1), Some(spacing));
            }
        }
    }
    draft.finish(wavelength)
}

/// Slit-screen geometry on a king-move grid (straight and diagonal ribs).
#[derive(Debug, Clone, PartialEq)]
pub struct SlitGrid {
    pub width: usize,
    pub height: usize,
    /// Column fully blocked except for `open_rows`.
    pub barrier_column: usize,
    pub open_rows: Vec<usize>,
    /// Number of detector rows, centred on the last column.
    pub screen_detectors: usize,
    pub spacing: f64,
    pub wavelength: f64,
}

impl SlitGrid {
    /// 10 x 13 grid, barrier on column 3, slits at rows 2 and 10, λ = 0.8.
    pub fn double_slit() -> Self {
        SlitGrid {
            width: 10,
            height: 13,
            barrier_column: 3,
            open_rows: vec![2, 10],
            screen_detectors: 13,
            spacing: 1.0,
            wavelength: 0.8,
        }
    }

    /// Same geometry with one central slit.
    pub fn single_slit() -> Self {
        SlitGrid {
            open_rows: vec![6],
            ..Self::double_slit()
        }
    }

    /// First screen row; screen rows are `screen_start..screen_start + screen_detectors`.
    pub fn screen_start(&self) -> usize {
        (self.height - self.screen_detectors) / 2
    }
}

/// Builds the slit scenario: source at the middle of column 0, barrier nodes
/// removed except the openings, screen detectors on the last column.
pub fn build_slit_grid(spec: &SlitGrid) -> Result<Lattice, LatticeError> {
    let SlitGrid {
        width,
        height,
        barrier_column,
        ref open_rows,
        screen_detectors,
        spacing,
        wavelength,
    } = *spec;
    if width < 3 || height < 1 {
        return Err(LatticeError::InvalidParameter(
            "slit grid needs width >= 3 and height >= 1".into(),
        ));
    }
    if barrier_column == 0 || barrier_column + 1 >= width {
        return Err(LatticeError::InvalidParameter(format!(
            "barrier column {barrier_column} must lie strictly between source and screen"
        )));
    }
    if open_rows.iter().any(|&r| r >= height) {
        return Err(LatticeError::InvalidParameter(
            "slit row out of range".into(),
        ));
    }
    if screen_detectors == 0 || screen_detectors > height {
        return Err(LatticeError::InvalidParameter(format!(
            "screen_detectors must be in 1..={height}"
        )));
    }
    positive("spacing", spacing)?;

    let present = |x: usize, y: usize| x != barrier_column || open_rows.contains(&y);
    let screen = spec.screen_start()..spec.screen_start() + screen_detectors;
    let mut draft = Draft::default();
    let mut ids = vec![None; width * height];
    for y in 0..height {
        for x in 0..width {
            if !present(x, y) {
                continue;
            }
            let kind = if x == 0 && y == height / 2 {
                NodeKind::Source
            } else if x == width - 1 && screen.contains(&y) {
                NodeKind::Detector
            } else {
                NodeKind::Void
            };
            ids[y * width + x] = Some(draft.add_node(x as f64 * spacing, y as f64 * spacing, kind));
        }
    }
    let diagonal = spacing * 2f64.sqrt();
    for y in 0..height {
        for x in 0..width {
            let Some(a) = ids[y * width + x] else {
                continue;
            };
            let forward = [
                (1i64, 0i64, spacing),
                (0, 1, spacing),
                (1, 1, diagonal),
                (1, -1, diagonal),
            ];
            for (dx, dy, len) in forward {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                    continue;
                }
                if let Some(b) = ids[ny as usize * width + nx as usize] {
                    draft.add_rib(a, b, Some(len));
                }
            }
        }
    }
    draft.finish(wavelength)
}

/// Shape of a reverse-query merge tree. Leaves are detectors realised as
/// two-chain interferometers of the requested intensity; inner nodes are
/// void merge points. The root is the source.
#[derive(Debug, Clone, PartialEq)]
pub enum MergeTree {
    Detector(f64),
    Merge(Vec<MergeTree>),
}

impl MergeTree {
    pub fn leaves(&self) -> usize {
        match self {
            MergeTree::Detector(_) => 1,
            MergeTree::Merge(children) => children.iter().map(MergeTree::leaves).sum(),
        }
    }

    /// Nodes where queries from at least two distinct detectors meet, the
    /// root included.
    pub fn merge_nodes(&self) -> usize {
        match self {
            MergeTree::Detector(_) => 0,
            MergeTree::Merge(children) => {
                let own = usize::from(self.leaves() >= 2 && children.len() >= 2);
                own + children.iter().map(MergeTree::merge_nodes).sum::<usize>()
            }
        }
    }

    /// Leaf intensities in left-to-right order.
    pub fn intensities(&self) -> Vec<f64> {
        match self {
            MergeTree::Detector(i) => vec![*i],
            MergeTree::Merge(children) => {
                children.iter().flat_map(MergeTree::intensities).collect()
            }
        }
    }
}

/// Lays out a [`MergeTree`]: depth along x, leaves spread along y, inner
/// ribs at their Euclidean length, each leaf a two-hop interferometer.
pub fn build_merge_tree(tree: &MergeTree, wavelength: f64) -> Result<Lattice, LatticeError> {
    positive("wavelength", wavelength)?;
    let mut draft = Draft::default();
    let mut next_leaf = 0usize;

    fn leaf_y(tree: &MergeTree, next_leaf: &mut usize) -> f64 {
        match tree {
            MergeTree::Detector(_) => {
                let y = *next_leaf as f64 * 2.0;
                *next_leaf += 1;
                y
            }
            MergeTree::Merge(children) => {
                let ys: Vec<f64> = children.iter().map(|c| leaf_y(c, next_leaf)).collect();
                ys.iter().sum::<f64>() / ys.len().max(1) as f64
            }
        }
    }

    fn place(
        tree: &MergeTree,
        parent: NodeId,
        depth: usize,
        draft: &mut Draft,
        next_leaf: &mut usize,
        wavelength: f64,
    ) -> Result<(), LatticeError> {
        let (px, py) = draft.xy(parent);
        let mut probe = *next_leaf;
        let y = leaf_y(tree, &mut probe);
        let x = depth as f64 * 3.0;
        match tree {
            MergeTree::Detector(intensity) => {
                *next_leaf = probe;
                let (len_a, len_b) = arm_lengths_for_intensity(*intensity, wavelength)?;
                let (dx, dy) = (x - px, y - py);
                let norm = (dx * dx + dy * dy).sqrt();
                draft.add_interferometer(parent, (dx / norm, dy / norm), len_a, len_b, 2);
            }
            MergeTree::Merge(children) => {
                if children.is_empty() {
                    return Err(LatticeError::InvalidParameter(
                        "merge node without children".into(),
                    ));
                }
                let node = draft.add_node(x, y, NodeKind::Void);
                draft.add_rib(parent, node, None);
                for child in children {
                    place(child, node, depth + 1, draft, next_leaf, wavelength)?;
                }
            }
        }
        Ok(())
    }

    let source = draft.add_node(0.0, 0.0, NodeKind::Source);
    match tree {
        MergeTree::Merge(children) if !children.is_empty() => {
            // centre the source on its subtree
            let mut probe = 0;
            let y = leaf_y(tree, &mut probe);
            draft.nodes[source.0].position = Position::planar(0.0, y);
            for child in children {
                place(child, source, 1, &mut draft, &mut next_leaf, wavelength)?;
            }
        }
        MergeTree::Merge(_) => {
            return Err(LatticeError::InvalidParameter("empty merge tree".into()))
        }
        leaf => place(leaf, source, 1, &mut draft, &mut next_leaf, wavelength)?,
    }
    draft.finish(wavelength)
}

/// Straight source chain of `source_hops` ribs into the clock atom (a
/// detector at the origin) and a perpendicular chain of `laser_hops` ribs
/// from the laser emitter. Unit rib lengths, λ = 1.
pub fn build_clock_chain(source_hops: usize, laser_hops: usize) -> Result<Lattice, LatticeError> {
    at_least_one("source distance", source_hops)?;
    at_least_one("laser distance", laser_hops)?;
    let mut draft = Draft::default();
    let atom = draft.add_node(0.0, 0.0, NodeKind::Detector);
    let source = draft.add_node(-(source_hops as f64), 0.0, NodeKind::Source);
    let mut prev = source;
    for k in 1..source_hops {
        let next = draft.add_node(k as f64 - source_hops as f64, 0.0, NodeKind::Void);
        draft.add_rib(prev, next, Some(1.0));
        prev = next;
    }
    draft.add_rib(prev, atom, Some(1.0));
    let laser = draft.add_node(0.0, laser_hops as f64, NodeKind::LaserEmitter);
    let mut prev = laser;
    for k in (1..laser_hops).rev() {
        let next = draft.add_node(0.0, k as f64, NodeKind::Void);
        draft.add_rib(prev, next, Some(1.0));
        prev = next;
    }
    draft.add_rib(prev, atom, Some(1.0));
    draft.finish(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{RibId, LENGTH_TOLERANCE};

    #[test]
    fn star_counts() {
        let l = build_star(1, 1, &[1.0], 1.0).unwrap();
        assert_eq!((l.nodes().len(), l.ribs().len()), (2, 1));

        let l = build_star(3, 2, &[1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!((l.nodes().len(), l.ribs().len()), (7, 6));
        assert_eq!(l.detectors().len(), 3);

        let l = build_star(2, 1, &[0.5, 0.25], 1.0).unwrap();
        let lens: Vec<f64> = l.ribs().iter().map(|r| r.length).collect();
        assert_eq!(lens, vec![0.5, 0.25]);
        assert!(l.max_length_mismatch() < LENGTH_TOLERANCE);
    }

    #[test]
    fn star_rejects_bad_input() {
        assert!(build_star(0, 1, &[], 1.0).is_err());
        assert!(build_star(2, 1, &[1.0, 0.0], 1.0).is_err());
        assert!(build_star(2, 1, &[1.0], 1.0).is_err());
    }

    #[test]
    fn two_path_lengths_and_geometry() {
        for (a, b, h) in [(2.0, 2.0, 2), (2.0, 2.5, 2), (3.0, 5.0, 5), (1.0, 1.0, 1)] {
            let l = build_two_path(a, b, h, 1.0).unwrap();
            assert_eq!(l.detectors().len(), 1);
            assert!(l.max_length_mismatch() < LENGTH_TOLERANCE, "{a} {b} {h}");
            let total: f64 = l.ribs().iter().map(|r| r.length).sum();
            assert!((total - (a + b)).abs() < 1e-12);
        }
        // one hop per path is widened to avoid parallel ribs
        let l = build_two_path(1.0, 1.0, 1, 1.0).unwrap();
        assert_eq!((l.nodes().len(), l.ribs().len()), (4, 4));
        assert!(build_two_path(0.0, 1.0, 2, 1.0).is_err());
    }

    #[test]
    fn slit_grid_shape() {
        let spec = SlitGrid::double_slit();
        let l = build_slit_grid(&spec).unwrap();
        assert_eq!(
            l.nodes().len(),
            spec.width * spec.height - (spec.height - 2)
        );
        assert_eq!(l.detectors().len(), 13);
        assert!(l.max_length_mismatch() < LENGTH_TOLERANCE);

        let closed = SlitGrid {
            open_rows: vec![],
            ..spec
        };
        assert!(matches!(
            build_slit_grid(&closed),
            Err(LatticeError::DisconnectedDetector(_))
        ));
    }

    #[test]
    fn merge_tree_counts() {
        let t = MergeTree::Merge(vec![
            MergeTree::Merge(vec![MergeTree::Detector(1.0), MergeTree::Detector(1.0)]),
            MergeTree::Detector(2.0),
        ]);
        assert_eq!(t.leaves(), 3);
        assert_eq!(t.merge_nodes(), 2);
        let l = build_merge_tree(&t, 1.0).unwrap();
        assert_eq!(l.detectors().len(), 3);
        assert!(l.max_length_mismatch() < LENGTH_TOLERANCE);
    }

    #[test]
    fn intensity_lengths() {
        let (a, b) = arm_lengths_for_intensity(2.0, 1.0).unwrap();
        assert!((b - a - 0.25).abs() < 1e-15);
        assert!(arm_lengths_for_intensity(4.5, 1.0).is_err());
    }

    #[test]
    fn clock_chain_layout() {
        let l = build_clock_chain(3, 2).unwrap();
        assert_eq!(l.ribs().len(), 5);
        assert_eq!(l.nodes_of_kind(NodeKind::LaserEmitter).count(), 1);
        assert_eq!(l.rib(RibId(0)).length, 1.0);
    }
}
