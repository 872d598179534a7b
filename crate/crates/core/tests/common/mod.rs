//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use logicx::canon::{canonical_form, Coloring};
use logicx::graph::{EmbeddingTable, FeatureKind, Graph, LabeledDataset, Split};

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges("r", n, &edges).unwrap()
}

pub fn random_labeled_graph(rng: &mut impl Rng, n: usize, p: f64, alphabet: &[&str]) -> Graph {
    let g = random_graph(rng, n, p);
    let labels = (0..n)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string())
        .collect();
    Graph::new(
        "r",
        n,
        g.edges().to_vec(),
        vec![vec![]; n],
        Some(labels),
        None,
    )
    .unwrap()
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

/// Calls `f` on every permutation of `0..n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn edge_set(g: &Graph) -> BTreeSet<(usize, usize)> {
    g.edges()
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect()
}

/// Node and edge orbits by enumerating all automorphisms, each orbit as a
/// sorted list, orbits sorted by their first element. Edge orbits hold edge
/// indices into `g.edges()`.
pub fn brute_orbits(g: &Graph, fixed: Option<usize>) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let n = g.num_nodes();
    let edges = edge_set(g);
    let index: BTreeMap<(usize, usize), usize> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| ((a.min(b), a.max(b)), i))
        .collect();
    let mut node_orbit: Vec<BTreeSet<usize>> = (0..n).map(|v| BTreeSet::from([v])).collect();
    let mut edge_orbit: Vec<BTreeSet<usize>> =
        (0..g.num_edges()).map(|e| BTreeSet::from([e])).collect();
    for_each_permutation(n, |pi| {
        if let Some(a) = fixed {
            if pi[a] != a {
                return;
            }
        }
        let is_auto = edges
            .iter()
            .all(|&(a, b)| edges.contains(&(pi[a].min(pi[b]), pi[a].max(pi[b]))));
        if !is_auto {
            return;
        }
        for v in 0..n {
            node_orbit[v].insert(pi[v]);
        }
        for (&(a, b), &e) in &index {
            edge_orbit[e].insert(index[&(pi[a].min(pi[b]), pi[a].max(pi[b]))]);
        }
    });
    let collect = |sets: Vec<BTreeSet<usize>>| -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = sets
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        out.sort_by_key(|o: &Vec<usize>| o[0]);
        out
    };
    (collect(node_orbit), collect(edge_orbit))
}

/// Exhaustive injective-map search for `pattern` inside `target`.
pub fn brute_match(pattern: &Graph, target: &Graph, induced: bool, labels: bool) -> bool {
    let (k, n) = (pattern.num_nodes(), target.num_nodes());
    if k > n {
        return false;
    }
    let mut map = vec![usize::MAX; k];
    let mut used = vec![false; n];
    fn rec(
        i: usize,
        p: &Graph,
        t: &Graph,
        induced: bool,
        labels: bool,
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        let k = p.num_nodes();
        if i == k {
            for a in 0..k {
                for b in a + 1..k {
                    let pe = p.has_edge(a, b);
                    let te = t.has_edge(map[a], map[b]);
                    if pe && !te || induced && te && !pe {
                        return false;
                    }
                }
            }
            return true;
        }
        for x in 0..t.num_nodes() {
            if used[x] {
                continue;
            }
            if labels && p.node_label(i) != t.node_label(x) {
                continue;
            }
            used[x] = true;
            map[i] = x;
            if rec(i + 1, p, t, induced, labels, map, used) {
                return true;
            }
            used[x] = false;
        }
        map[i] = usize::MAX;
        false
    }
    rec(0, pattern, target, induced, labels, &mut map, &mut used)
}

/// 1-WL by explicit multisets: every color is the string of its own color
/// and the sorted neighbor colors, re-interned per round across `graphs`
/// jointly. Returns, per graph, the sorted final color multiset together
/// with all intermediate ones.
pub fn wl_oracle(graphs: &[&Graph], centers: &[Option<usize>]) -> Vec<Vec<Vec<usize>>> {
    let rounds = graphs.iter().map(|g| g.num_nodes()).max().unwrap_or(0);
    let mut colors: Vec<Vec<usize>> = graphs
        .iter()
        .zip(centers)
        .map(|(g, c)| {
            (0..g.num_nodes())
                .map(|v| usize::from(Some(v) == *c))
                .collect()
        })
        .collect();
    let mut history: Vec<Vec<Vec<usize>>> = colors
        .iter()
        .map(|c| {
            let mut s = c.clone();
            s.sort_unstable();
            vec![s]
        })
        .collect();
    for _ in 0..rounds {
        let mut palette: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let sigs: Vec<Vec<(usize, Vec<usize>)>> = graphs
            .iter()
            .zip(&colors)
            .map(|(g, col)| {
                (0..g.num_nodes())
                    .map(|v| {
                        let mut nb: Vec<usize> = g.neighbors(v).map(|w| col[w]).collect();
                        nb.sort_unstable();
                        (col[v], nb)
                    })
                    .collect()
            })
            .collect();
        for s in sigs.iter().flatten() {
            let next = palette.len();
            palette.entry(s.clone()).or_insert(next);
        }
        colors = sigs
            .iter()
            .map(|s| s.iter().map(|x| palette[x]).collect())
            .collect();
        for (h, c) in history.iter_mut().zip(&colors) {
            let mut s = c.clone();
            s.sort_unstable();
            h.push(s);
        }
    }
    history
}

/// All connected graphs on `n` nodes up to isomorphism.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| pairs[i])
            .collect();
        let g = Graph::from_edges("c", n, &edges).unwrap();
        if g.bfs_distances(0).iter().any(Option::is_none) {
            continue;
        }
        let cert = canonical_form(&g, &Coloring::uniform(&g)).certificate;
        if seen.insert(cert) {
            out.push(g);
        }
    }
    out
}

fn node(symbol: &str) -> Vec<f64> {
    match symbol {
        "C" => vec![1.0, 0.0],
        _ => vec![0.0, 1.0],
    }
}

fn labeled(id: &str, symbols: &[&str], edges: &[(usize, usize)]) -> Graph {
    Graph::new(
        id,
        symbols.len(),
        edges.to_vec(),
        symbols.iter().map(|s| node(s)).collect(),
        Some(symbols.iter().map(|s| s.to_string()).collect()),
        None,
    )
    .unwrap()
}

/// Five hand-built molecules-like graphs over {C, O}; class 1 graphs carry an
/// O leaf. One-layer embeddings put 0.1 in dimension 1 for every node except
/// the O leaves of class-1 graphs, scaled so every class-1 graph embedding has
/// 0.26 there and every class-0 one 0.1.
pub fn toy_fixture() -> (LabeledDataset, EmbeddingTable) {
    let graphs = vec![
        labeled("g0", &["C", "C", "C"], &[(0, 1), (1, 2)]),
        labeled("g1", &["C", "C", "C"], &[(0, 1), (1, 2), (2, 0)]),
        labeled("g2", &["C", "O"], &[(0, 1)]),
        labeled("g3", &["C", "C", "C", "O"], &[(0, 1), (0, 2), (0, 3)]),
        labeled(
            "g4",
            &["C", "C", "C", "O"],
            &[(0, 1), (1, 2), (2, 0), (0, 3)],
        ),
    ];
    let labels = vec![0, 0, 1, 1, 1];
    let o_value = [0.0, 0.0, 0.42, 0.74, 0.74];
    let nodes: Vec<Vec<Vec<f64>>> = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            (0..g.num_nodes())
                .map(|v| {
                    let d1 = if g.node_label(v) == Some("O") {
                        o_value[i]
                    } else {
                        0.1
                    };
                    vec![0.5, d1]
                })
                .collect()
        })
        .collect();
    let dataset = LabeledDataset::new(
        graphs,
        labels.clone(),
        vec![Split::Train; 5],
        vec![FeatureKind::DiscreteOneHot; 2],
        Some(vec!["C".into(), "O".into()]),
    )
    .unwrap();
    let emb = EmbeddingTable::new(2, 1, nodes, labels).unwrap();
    (dataset, emb)
}
