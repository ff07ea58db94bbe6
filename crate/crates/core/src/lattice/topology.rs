//! TOML topology documents.
//!
//! ```toml
//! wavelength = 1.0
//!
//! [[nodes]]
//! id = 0
//! kind = "source"          # void | source | detector | laser-emitter
//! position = [0.0, 0.0]    # 2 or 3 coordinates
//!
//! [[ribs]]
//! endpoints = [0, 1]
//! length = 1.0             # optional, defaults to the Euclidean distance
//! ```
//!
//! Serialization writes nodes by ascending id and ribs in lattice order, with
//! every rib length spelled out.

use serde::{Deserialize, Serialize};

use super::{Lattice, LatticeError, Node, NodeId, NodeKind, Position, RibSpec};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    wavelength: Option<f64>,
    #[serde(default)]
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    ribs: Vec<RibEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: usize,
    kind: NodeKind,
    position: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RibEntry {
    endpoints: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
}

pub fn load_topology(document: &str) -> Result<Lattice, LatticeError> {
    let doc: Document =
        toml::from_str(document).map_err(|e| LatticeError::Malformed(e.message().to_string()))?;
    let wavelength = doc.wavelength.ok_or(LatticeError::MissingWavelength)?;
    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| Node {
            id: NodeId(n.id),
            kind: n.kind,
            position: Position(n.position),
        })
        .collect();
    let ribs = doc
        .ribs
        .into_iter()
        .map(|r| RibSpec::new(r.endpoints[0], r.endpoints[1], r.length))
        .collect();
    Lattice::new(nodes, ribs, wavelength)
}

pub fn to_topology_document(lattice: &Lattice) -> String {
    let doc = Document {
        wavelength: Some(lattice.wavelength()),
        nodes: lattice
            .nodes()
            .iter()
            .map(|n| NodeEntry {
                id: n.id.0,
                kind: n.kind,
                position: n.position.coords().to_vec(),
            })
            .collect(),
        ribs: lattice
            .ribs()
            .iter()
            .map(|r| RibEntry {
                endpoints: [r.a.0, r.b.0],
                length: Some(r.length),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("topology documents always serialize")
}
