//! Barabási-Albert graphs with planted motifs, labeled by a DNF over motif
//! presence, plus oracle embeddings that mark motif membership.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EmbeddingTable, FeatureKind, Graph, LabeledDataset};
use crate::io::stratified_split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motif {
    House,
    Wheel,
    Grid,
}

impl Motif {
    pub const ALL: [Motif; 3] = [Motif::House, Motif::Wheel, Motif::Grid];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Motif::House => "H",
            Motif::Wheel => "W",
            Motif::Grid => "G",
        }
    }

    /// Node count and edge list of the template.
    pub fn template(self) -> (usize, Vec<(usize, usize)>) {
        match self {
            // square 0-1-2-3 with roof node 4 over edge 0-1
            Motif::House => (5, vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)]),
            // hub 0 joined to a 6-cycle 1..6
            Motif::Wheel => {
                let mut e: Vec<(usize, usize)> = (1..=6).map(|i| (0, i)).collect();
                e.extend((1..=6).map(|i| (i, if i == 6 { 1 } else { i + 1 })));
                (7, e)
            }
            Motif::Grid => {
                let mut e = Vec::new();
                for r in 0..3 {
                    for c in 0..3 {
                        let v = 3 * r + c;
                        if c < 2 {
                            e.push((v, v + 1));
                        }
                        if r < 2 {
                            e.push((v, v + 3));
                        }
                    }
                }
                (9, e)
            }
        }
    }

    pub fn graph(self) -> Graph {
        let (n, e) = self.template();
        Graph::from_edges(self.symbol(), n, &e).expect("motif templates are simple graphs")
    }
}

impl FromStr for Motif {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "house" => Ok(Motif::House),
            "w" | "wheel" => Ok(Motif::Wheel),
            "g" | "grid" => Ok(Motif::Grid),
            _ => Err(Error::Config(format!("unknown motif {s:?}"))),
        }
    }
}

/// Node role: which motif (if any) a node was planted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Base,
    Motif(Motif),
}

impl Role {
    /// One-hot position: house, wheel, grid, base.
    pub fn index(self) -> usize {
        match self {
            Role::Motif(m) => m.index(),
            Role::Base => 3,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Role::Motif(m) => m.symbol(),
            Role::Base => "B",
        }
    }
}

/// DNF over motif presence, e.g. `H&W | H&G | W&G`; `!` negates, `true` and
/// `false` are constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifRule {
    /// Disjunction of conjunctions of (motif, negated).
    pub terms: Vec<Vec<(Motif, bool)>>,
}

impl MotifRule {
    pub fn two_of_three() -> Self {
        "H&W|H&G|W&G".parse().expect("valid rule")
    }

    pub fn eval(&self, present: &[bool; 3]) -> bool {
        self.terms
            .iter()
            .any(|t| t.iter().all(|&(m, neg)| present[m.index()] != neg))
    }
}

impl FromStr for MotifRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for raw in s.split('|') {
            let term = raw.trim();
            match term {
                "false" => continue,
                "true" => {
                    terms.push(Vec::new());
                    continue;
                }
                "" => return Err(Error::Config(format!("empty term in rule {s:?}"))),
                _ => {}
            }
            let mut lits = Vec::new();
            for lit in term.split('&') {
                let lit = lit.trim();
                let (neg, name) = match lit.strip_prefix('!') {
                    Some(rest) => (true, rest.trim()),
                    None => (false, lit),
                };
                if name == "true" && !neg {
                    continue;
                }
                lits.push((name.parse::<Motif>()?, neg));
            }
            terms.push(lits);
        }
        Ok(MotifRule { terms })
    }
}

impl fmt::Display for MotifRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("false");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                if t.is_empty() {
                    "true".to_string()
                } else {
                    t.iter()
                        .map(|&(m, neg)| format!("{}{}", if neg { "!" } else { "" }, m.symbol()))
                        .collect::<Vec<_>>()
                        .join("&")
                }
            })
            .collect();
        f.write_str(&parts.join("|"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_graphs: usize,
    pub base_nodes: usize,
    /// Edges added per new base node.
    pub attachment: usize,
    pub motifs: Vec<Motif>,
    pub plant_probability: f64,
    pub rule: MotifRule,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_graphs: 200,
            base_nodes: 20,
            attachment: 1,
            motifs: Motif::ALL.to_vec(),
            plant_probability: 0.5,
            rule: MotifRule::two_of_three(),
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub dataset: LabeledDataset,
    /// Planted motifs per graph, indexed by [`Motif::index`].
    pub motif_bits: Vec<[bool; 3]>,
    pub roles: Vec<Vec<Role>>,
}

const ROLE_SYMBOLS: [&str; 4] = ["H", "W", "G", "B"];

/// Preferential-attachment graph: a clique on `m + 1` nodes, then each new
/// node links to `m` distinct nodes chosen with probability proportional to
/// degree.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let m = m.max(1);
    let start = (m + 1).min(n);
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for a in 0..start {
        for b in a + 1..start {
            edges.push((a, b));
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    for v in start..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m.min(v) {
            let weights: Vec<usize> = (0..v)
                .map(|u| {
                    if targets.contains(&u) {
                        0
                    } else {
                        degree[u].max(1)
                    }
                })
                .collect();
            let dist = WeightedIndex::new(&weights).expect("positive weights remain");
            targets.push(dist.sample(rng));
        }
        for &u in &targets {
            edges.push((u, v));
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    edges
}

fn generate_one(i: usize, config: &SynthConfig) -> Result<(Graph, [bool; 3], Vec<Role>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(i as u64 + 1);
    let mut edges = barabasi_albert(config.base_nodes, config.attachment, &mut rng);
    let mut roles = vec![Role::Base; config.base_nodes];
    let mut bits = [false; 3];
    for m in Motif::ALL {
        if !config.motifs.contains(&m) || !rng.gen_bool(config.plant_probability) {
            continue;
        }
        bits[m.index()] = true;
        let (k, motif_edges) = m.template();
        let offset = roles.len();
        edges.extend(motif_edges.iter().map(|&(a, b)| (a + offset, b + offset)));
        roles.extend(std::iter::repeat_n(Role::Motif(m), k));
        let from = offset + rng.gen_range(0..k);
        let to = rng.gen_range(0..config.base_nodes);
        edges.push((to, from));
    }
    let n = roles.len();
    let features = roles
        .iter()
        .map(|r| {
            let mut x = vec![0.0; 4];
            x[r.index()] = 1.0;
            x
        })
        .collect();
    let labels = roles.iter().map(|r| r.symbol().to_string()).collect();
    let g = Graph::new(format!("synth-{i}"), n, edges, features, Some(labels), None)?;
    Ok((g, bits, roles))
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    if config.base_nodes < 2 {
        return Err(Error::Config("base graph needs at least two nodes".into()));
    }
    if config.attachment >= config.base_nodes {
        return Err(Error::Config(format!(
            "attachment {} must be below the base size {}",
            config.attachment, config.base_nodes
        )));
    }
    if !(0.0..=1.0).contains(&config.plant_probability) {
        return Err(Error::Config("plant probability must lie in [0, 1]".into()));
    }
    let parts: Vec<(Graph, [bool; 3], Vec<Role>)> = (0..config.n_graphs)
        .into_par_iter()
        .map(|i| generate_one(i, config))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = parts
        .iter()
        .map(|p| usize::from(config.rule.eval(&p.1)))
        .collect();
    if labels.iter().all(|&l| l == 0) {
        return Err(Error::Config(format!(
            "rule {} labels all {} graphs as class 0",
            config.rule, config.n_graphs
        )));
    }
    let splits = stratified_split(&labels, config.test_fraction, config.seed);
    let mut graphs = Vec::with_capacity(parts.len());
    let mut motif_bits = Vec::with_capacity(parts.len());
    let mut roles = Vec::with_capacity(parts.len());
    for (g, b, r) in parts {
        graphs.push(g);
        motif_bits.push(b);
        roles.push(r);
    }
    let symbols = ROLE_SYMBOLS.iter().map(|s| s.to_string()).collect();
    let dataset = LabeledDataset::new(
        graphs,
        labels,
        splits,
        vec![FeatureKind::DiscreteOneHot; 4],
        Some(symbols),
    )?;
    Ok(SynthDataset {
        dataset,
        motif_bits,
        roles,
    })
}

/// Embeddings that encode each node's role as a one-hot vector whose active
/// coordinate is perturbed by uniform noise in `[-noise, noise]`;
/// predictions equal the true labels.
pub fn oracle_embeddings(
    synth: &SynthDataset,
    noise: f64,
    layers: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = synth
        .roles
        .iter()
        .map(|roles| {
            roles
                .iter()
                .map(|r| {
                    let mut h = vec![0.0; 4];
                    let jitter = if noise > 0.0 {
                        rng.gen_range(-noise..=noise)
                    } else {
                        0.0
                    };
                    h[r.index()] = 1.0 + jitter;
                    h
                })
                .collect()
        })
        .collect();
    EmbeddingTable::new(
        4,
        layers.max(1),
        nodes,
        synth.dataset.class_labels().to_vec(),
    )
}
