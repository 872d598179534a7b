//! Receptive fields and featureless Weisfeiler-Lehman hashing.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::Graph;

/// Node-induced ball of radius `L` around a center node.
#[derive(Debug, Clone)]
pub struct ReceptiveField {
    /// Local index of the center inside `graph`.
    pub center: usize,
    pub graph: Graph,
    /// `nodes[local]` is the index of that node in the source graph.
    pub nodes: Vec<usize>,
}

/// 16-hex-character structural digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructHash(pub String);

impl fmt::Display for StructHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Nodes within distance `radius` of `center`, ascending by index.
pub fn ball(g: &Graph, center: usize, radius: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.num_nodes()];
    dist[center] = 0;
    let mut queue = VecDeque::from([center]);
    let mut nodes = vec![center];
    while let Some(u) = queue.pop_front() {
        if dist[u] == radius {
            continue;
        }
        for w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                nodes.push(w);
                queue.push_back(w);
            }
        }
    }
    nodes.sort_unstable();
    nodes
}

pub fn extract_receptive_field(g: &Graph, v: usize, radius: usize) -> ReceptiveField {
    let nodes = ball(g, v, radius);
    let center = nodes.binary_search(&v).expect("center is in its own ball");
    let graph = g.induced_subgraph(format!("{}#{v}", g.id()), &nodes);
    ReceptiveField {
        center,
        graph,
        nodes,
    }
}

fn mix(mut h: u64, x: u64) -> u64 {
    h ^= x
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(h << 6)
        .wrapping_add(h >> 2);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// WL colors after `num_nodes` refinement rounds. Colors are content hashes,
/// so they are comparable across graphs.
pub fn wl_colors(g: &Graph, center: Option<usize>) -> Vec<u64> {
    let n = g.num_nodes();
    let mut colors: Vec<u64> = (0..n)
        .map(|v| if Some(v) == center { 2 } else { 1 })
        .collect();
    let mut next = vec![0u64; n];
    let mut neigh = Vec::new();
    for _ in 0..n {
        for v in 0..n {
            neigh.clear();
            neigh.extend(g.neighbors(v).map(|w| colors[w]));
            neigh.sort_unstable();
            let mut h = mix(0x5157_4c48, colors[v]);
            h = mix(h, neigh.len() as u64);
            for &c in &neigh {
                h = mix(h, c);
            }
            next[v] = h;
        }
        std::mem::swap(&mut colors, &mut next);
    }
    colors
}

pub fn wl_hash(g: &Graph, center: Option<usize>) -> StructHash {
    let mut colors = wl_colors(g, center);
    colors.sort_unstable();
    let mut hasher = Sha256::new();
    hasher.update((g.num_nodes() as u64).to_le_bytes());
    hasher.update((g.num_edges() as u64).to_le_bytes());
    for c in colors {
        hasher.update(c.to_le_bytes());
    }
    let digest = hasher.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    StructHash(hex)
}

/// Structural pattern of node `v`: the hash of its receptive field.
pub fn struct_pattern(g: &Graph, v: usize, radius: usize, anchor_center: bool) -> StructHash {
    let field = extract_receptive_field(g, v, radius);
    let center = anchor_center.then_some(field.center);
    wl_hash(&field.graph, center)
}
