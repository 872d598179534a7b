//! Canonical labeling and automorphism generators by individualization and
//! refinement.
//!
//! Colorings are ordered partitions stored as per-vertex cell offsets: the
//! color of a vertex is the number of vertices in strictly earlier cells. A
//! singleton keeps its offset under further refinement, which is what makes
//! leaf-to-leaf maps fix the common individualized prefix.
//!
//! The search explores the individualization tree depth first. Leaves whose
//! certificate equals the first leaf's yield automorphisms and trigger a
//! jump back to the level where the path left the first path; children that
//! are equivalent under already-found automorphisms fixing the current prefix
//! are skipped. The generators found generate the full automorphism group of
//! the colored graph, and the smallest certificate over the explored leaves
//! is canonical.

use std::cmp::Ordering;

use crate::graph::Graph;

/// Vertex and edge coloring used as the starting point of refinement.
#[derive(Debug, Clone)]
pub struct Coloring {
    /// Per-vertex class key; smaller keys come first.
    pub vertex_keys: Vec<u64>,
    /// Per-edge class key (by edge index), when edges are colored.
    pub edge_keys: Option<Vec<u64>>,
}

impl Coloring {
    pub fn uniform(g: &Graph) -> Self {
        Coloring {
            vertex_keys: vec![0; g.num_nodes()],
            edge_keys: None,
        }
    }

    /// Uniform coloring with `anchor` placed in its own first cell.
    pub fn anchored(g: &Graph, anchor: usize) -> Self {
        let mut keys = vec![1; g.num_nodes()];
        keys[anchor] = 0;
        Coloring {
            vertex_keys: keys,
            edge_keys: None,
        }
    }

    /// Coloring by node symbol (and edge symbol when `edge_labels`), with an
    /// optional anchor ahead of every other vertex. Symbols are ranked in
    /// sorted order, so isomorphic labeled graphs get identical colorings.
    pub fn labeled(g: &Graph, anchor: Option<usize>, edge_labels: bool) -> Self {
        let ranks = |labels: &[String]| -> Vec<u64> {
            let mut distinct: Vec<&String> = labels.iter().collect();
            distinct.sort();
            distinct.dedup();
            labels
                .iter()
                .map(|l| distinct.binary_search(&l).expect("present") as u64)
                .collect()
        };
        let mut vertex_keys = match g.node_labels() {
            Some(labels) => ranks(labels).into_iter().map(|r| r + 1).collect(),
            None => vec![1; g.num_nodes()],
        };
        if let Some(a) = anchor {
            vertex_keys[a] = 0;
        }
        let edge_keys = if edge_labels {
            g.edge_labels().map(ranks)
        } else {
            None
        };
        Coloring {
            vertex_keys,
            edge_keys,
        }
    }
}

/// Result of a canonical search.
#[derive(Debug, Clone)]
pub struct Canon {
    /// `labeling[v]` is the canonical position of vertex `v`.
    pub labeling: Vec<usize>,
    /// Canonical certificate; equal iff the colored graphs are isomorphic.
    pub certificate: Vec<u64>,
    /// Automorphisms of the colored graph, as vertex maps.
    pub generators: Vec<Vec<usize>>,
}

impl Canon {
    /// Vertices in canonical order: `order()[p]` sits at position `p`.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.labeling.len()];
        for (v, &p) in self.labeling.iter().enumerate() {
            order[p] = v;
        }
        order
    }

    /// Orbit representative (smallest vertex) for every vertex.
    pub fn orbit_ids(&self) -> Vec<usize> {
        orbits_from_generators(self.labeling.len(), &self.generators)
    }
}

pub fn canonical_form(g: &Graph, coloring: &Coloring) -> Canon {
    let n = g.num_nodes();
    assert_eq!(coloring.vertex_keys.len(), n);
    let mut search = Search {
        g,
        vertex_keys: &coloring.vertex_keys,
        edge_keys: coloring.edge_keys.as_deref(),
        first: None,
        best: None,
        generators: Vec::new(),
    };
    let mut colors = offsets_from_keys(&coloring.vertex_keys);
    search.refine(&mut colors);
    let mut prefix = Vec::new();
    search.descend(colors, &mut prefix);
    let (labeling, certificate) = search.best.expect("search reaches at least one leaf");
    Canon {
        labeling,
        certificate,
        generators: search.generators,
    }
}

/// Stable color refinement of an initial coloring (as cell offsets).
pub fn refine_coloring(g: &Graph, coloring: &Coloring) -> Vec<usize> {
    let search = Search {
        g,
        vertex_keys: &coloring.vertex_keys,
        edge_keys: coloring.edge_keys.as_deref(),
        first: None,
        best: None,
        generators: Vec::new(),
    };
    let mut colors = offsets_from_keys(&coloring.vertex_keys);
    search.refine(&mut colors);
    colors
}

fn offsets_from_keys<K: Ord + Copy>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&v| keys[v]);
    let mut colors = vec![0; keys.len()];
    let mut start = 0;
    for i in 0..order.len() {
        if i > 0 && keys[order[i]] != keys[order[i - 1]] {
            start = i;
        }
        colors[order[i]] = start;
    }
    colors
}

struct Search<'a> {
    g: &'a Graph,
    vertex_keys: &'a [u64],
    edge_keys: Option<&'a [u64]>,
    /// First leaf: (individualized path, labeling, certificate).
    first: Option<(Vec<usize>, Vec<usize>, Vec<u64>)>,
    best: Option<(Vec<usize>, Vec<u64>)>,
    generators: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn edge_key(&self, e: usize) -> u64 {
        self.edge_keys.map_or(0, |k| k[e])
    }

    fn refine(&self, colors: &mut [usize]) {
        let n = colors.len();
        let mut cells = count_distinct(colors);
        let mut signature: Vec<Vec<(u64, usize)>> = vec![Vec::new(); n];
        loop {
            if cells == n {
                return;
            }
            for (v, sig) in signature.iter_mut().enumerate() {
                sig.clear();
                sig.extend(
                    self.g
                        .incident(v)
                        .iter()
                        .map(|&(w, e)| (self.edge_key(e), colors[w])),
                );
                sig.sort_unstable();
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                colors[a]
                    .cmp(&colors[b])
                    .then_with(|| signature[a].cmp(&signature[b]))
            });
            let mut next = vec![0; n];
            let mut start = 0;
            for i in 0..n {
                if i > 0 {
                    let (a, b) = (order[i - 1], order[i]);
                    if colors[a] != colors[b] || signature[a] != signature[b] {
                        start = i;
                    }
                }
                next[order[i]] = start;
            }
            let refined = count_distinct(&next);
            colors.copy_from_slice(&next);
            if refined == cells {
                return;
            }
            cells = refined;
        }
    }

    fn certificate(&self, labeling: &[usize]) -> Vec<u64> {
        let n = labeling.len() as u64;
        let mut keys = vec![0; labeling.len()];
        for (v, &p) in labeling.iter().enumerate() {
            keys[p] = self.vertex_keys[v];
        }
        let mut edges: Vec<u64> = self
            .g
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(u, v))| {
                let (a, b) = (labeling[u] as u64, labeling[v] as u64);
                let (a, b) = (a.min(b), a.max(b));
                ((a * n + b) << 16) | self.edge_key(e)
            })
            .collect();
        edges.sort_unstable();
        let mut cert = Vec::with_capacity(keys.len() + edges.len() + 1);
        cert.push(n);
        cert.extend(keys);
        cert.extend(edges);
        cert
    }

    /// Returns `Some(level)` to jump back to the node with that prefix length.
    fn descend(&mut self, colors: Vec<usize>, prefix: &mut Vec<usize>) -> Option<usize> {
        let n = colors.len();
        let Some(cell_start) = first_nonsingleton_cell(&colors) else {
            return self.leaf(colors, prefix);
        };
        let level = prefix.len();
        let cell: Vec<usize> = (0..n).filter(|&v| colors[v] == cell_start).collect();
        let mut explored: Vec<usize> = Vec::new();
        for &w in &cell {
            if !explored.is_empty() && self.equivalent_to_explored(w, &explored, prefix) {
                continue;
            }
            let mut child = colors.clone();
            individualize(&mut child, w);
            self.refine(&mut child);
            prefix.push(w);
            let jump = self.descend(child, prefix);
            prefix.pop();
            explored.push(w);
            match jump {
                Some(target) if target < level => return Some(target),
                _ => {}
            }
        }
        None
    }

    fn equivalent_to_explored(&self, w: usize, explored: &[usize], prefix: &[usize]) -> bool {
        let n = self.g.num_nodes();
        let stabilizing: Vec<&Vec<usize>> = self
            .generators
            .iter()
            .filter(|gamma| prefix.iter().all(|&p| gamma[p] == p))
            .collect();
        if stabilizing.is_empty() {
            return false;
        }
        let mut uf = UnionFind::new(n);
        for gamma in stabilizing {
            for (v, &u) in gamma.iter().enumerate() {
                uf.union(v, u);
            }
        }
        let root = uf.find(w);
        explored.iter().any(|&x| uf.find(x) == root)
    }

    fn leaf(&mut self, labeling: Vec<usize>, prefix: &[usize]) -> Option<usize> {
        let cert = self.certificate(&labeling);
        let Some((first_path, first_labeling, first_cert)) = &self.first else {
            self.first = Some((prefix.to_vec(), labeling.clone(), cert.clone()));
            self.best = Some((labeling, cert));
            return None;
        };
        if cert == *first_cert {
            let gamma = leaf_map(first_labeling, &labeling);
            if gamma.iter().enumerate().any(|(v, &u)| v != u) {
                self.generators.push(gamma);
            }
            let diverge = first_path
                .iter()
                .zip(prefix)
                .take_while(|(a, b)| a == b)
                .count();
            return Some(diverge);
        }
        let (best_labeling, best_cert) = self.best.as_ref().expect("set with first leaf");
        match cert.cmp(best_cert) {
            Ordering::Less => self.best = Some((labeling, cert)),
            Ordering::Equal => {
                let gamma = leaf_map(best_labeling, &labeling);
                if gamma.iter().enumerate().any(|(v, &u)| v != u) {
                    self.generators.push(gamma);
                }
            }
            Ordering::Greater => {}
        }
        None
    }
}

/// Automorphism sending the vertex at position `p` of leaf `from` to the
/// vertex at position `p` of leaf `to`.
fn leaf_map(from: &[usize], to: &[usize]) -> Vec<usize> {
    let mut at_position = vec![0; to.len()];
    for (v, &p) in to.iter().enumerate() {
        at_position[p] = v;
    }
    from.iter().map(|&p| at_position[p]).collect()
}

fn count_distinct(colors: &[usize]) -> usize {
    let mut seen = vec![false; colors.len()];
    let mut count = 0;
    for &c in colors {
        if !seen[c] {
            seen[c] = true;
            count += 1;
        }
    }
    count
}

fn first_nonsingleton_cell(colors: &[usize]) -> Option<usize> {
    let mut size = vec![0usize; colors.len()];
    for &c in colors {
        size[c] += 1;
    }
    size.iter().position(|&s| s > 1)
}

fn individualize(colors: &mut [usize], v: usize) {
    let c = colors[v];
    for (u, color) in colors.iter_mut().enumerate() {
        if *color == c && u != v {
            *color = c + 1;
        }
    }
}

pub fn orbits_from_generators(n: usize, generators: &[Vec<usize>]) -> Vec<usize> {
    let mut uf = UnionFind::new(n);
    for gamma in generators {
        for (v, &u) in gamma.iter().enumerate() {
            uf.union(v, u);
        }
    }
    (0..n).map(|v| uf.find(v)).collect()
}

/// Disjoint sets whose representative is always the smallest member.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}
