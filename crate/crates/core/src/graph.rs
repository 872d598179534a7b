//! Graph, dataset and embedding-table data model.
//!
//! Graphs are simple and undirected. Every node carries a feature vector of
//! the same dimension (possibly zero) and optionally a categorical symbol;
//! edges optionally carry a categorical symbol too. All types are immutable
//! once validated.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct Graph {
    id: String,
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Vec<Vec<f64>>,
    feature_dim: usize,
    node_labels: Option<Vec<String>>,
    edge_labels: Option<Vec<String>>,
    /// Sorted `(neighbor, edge index)` lists.
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Plain serialized shape of a [`Graph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub x: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_labels: Option<Vec<String>>,
}

impl TryFrom<GraphRecord> for Graph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        Graph::new(
            r.id,
            r.num_nodes,
            r.edges,
            r.x,
            r.node_labels,
            r.edge_labels,
        )
    }
}

impl From<Graph> for GraphRecord {
    fn from(g: Graph) -> Self {
        GraphRecord {
            id: g.id,
            num_nodes: g.num_nodes,
            edges: g.edges,
            x: g.features,
            node_labels: g.node_labels,
            edge_labels: g.edge_labels,
        }
    }
}

impl Graph {
    pub fn new(
        id: impl Into<String>,
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<Vec<f64>>,
        node_labels: Option<Vec<String>>,
        edge_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let id = id.into();
        if features.len() != num_nodes {
            return Err(Error::validation(
                &id,
                format!("{} feature rows for {num_nodes} nodes", features.len()),
            ));
        }
        let feature_dim = features.first().map_or(0, Vec::len);
        if let Some((v, row)) = features
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != feature_dim)
        {
            return Err(Error::validation(
                &id,
                format!(
                    "node {v} has feature dimension {}, expected {feature_dim}",
                    row.len()
                ),
            ));
        }
        if features.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::validation(&id, "non-finite feature value"));
        }
        if let Some(labels) = &node_labels {
            if labels.len() != num_nodes {
                return Err(Error::validation(
                    &id,
                    format!("{} node labels for {num_nodes} nodes", labels.len()),
                ));
            }
        }
        if let Some(labels) = &edge_labels {
            if labels.len() != edges.len() {
                return Err(Error::validation(
                    &id,
                    format!("{} edge labels for {} edges", labels.len(), edges.len()),
                ));
            }
        }
        let mut adjacency = vec![Vec::new(); num_nodes];
        let mut seen = BTreeSet::new();
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::validation(
                    &id,
                    format!("edge ({u}, {v}) references a node outside 0..{num_nodes}"),
                ));
            }
            if u == v {
                return Err(Error::validation(&id, format!("self-loop at node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::validation(&id, format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push((v, e));
            adjacency[v].push((u, e));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            id,
            num_nodes,
            edges,
            features,
            feature_dim,
            node_labels,
            edge_labels,
            adjacency,
        })
    }

    /// Structure-only graph with zero-dimensional features.
    pub fn from_edges(
        id: impl Into<String>,
        num_nodes: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        Graph::new(
            id,
            num_nodes,
            edges.to_vec(),
            vec![Vec::new(); num_nodes],
            None,
            None,
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature(&self, v: usize) -> &[f64] {
        &self.features[v]
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn node_labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    pub fn node_label(&self, v: usize) -> Option<&str> {
        self.node_labels.as_ref().map(|l| l[v].as_str())
    }

    pub fn edge_labels(&self) -> Option<&[String]> {
        self.edge_labels.as_deref()
    }

    pub fn edge_label(&self, e: usize) -> Option<&str> {
        self.edge_labels.as_ref().map(|l| l[e].as_str())
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().map(|&(u, _)| u)
    }

    /// `(neighbor, edge index)` pairs sorted by neighbor.
    pub fn incident(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let list = &self.adjacency[u];
        list.binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| list[i].1)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_between(u, v).is_some()
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_nodes];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Node-induced subgraph on `nodes`, in the given order; local node `i`
    /// is `nodes[i]`. Features and labels are carried over.
    pub fn induced_subgraph(&self, id: impl Into<String>, nodes: &[usize]) -> Graph {
        let mut local = HashMap::with_capacity(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            local.insert(v, i);
        }
        let mut edges = Vec::new();
        let mut edge_labels = self.edge_labels.as_ref().map(|_| Vec::new());
        for (i, &v) in nodes.iter().enumerate() {
            for &(w, e) in &self.adjacency[v] {
                if let Some(&j) = local.get(&w) {
                    if i < j {
                        edges.push((i, j));
                        if let (Some(out), Some(src)) = (&mut edge_labels, &self.edge_labels) {
                            out.push(src[e].clone());
                        }
                    }
                }
            }
        }
        let features = nodes.iter().map(|&v| self.features[v].clone()).collect();
        let node_labels = self
            .node_labels
            .as_ref()
            .map(|l| nodes.iter().map(|&v| l[v].clone()).collect());
        Graph::new(id, nodes.len(), edges, features, node_labels, edge_labels)
            .expect("induced subgraph of a valid graph is valid")
    }

    /// Copy of the graph where old node `v` becomes node `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.num_nodes);
        let mut inverse = vec![0; self.num_nodes];
        for (v, &p) in perm.iter().enumerate() {
            inverse[p] = v;
        }
        let features = inverse.iter().map(|&v| self.features[v].clone()).collect();
        let node_labels = self
            .node_labels
            .as_ref()
            .map(|l| inverse.iter().map(|&v| l[v].clone()).collect());
        let edges = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        Graph::new(
            self.id.clone(),
            self.num_nodes,
            edges,
            features,
            node_labels,
            self.edge_labels.clone(),
        )
        .expect("permutation of a valid graph is valid")
    }

    pub(crate) fn with_node_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::validation(&self.id, "node label count mismatch"));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    DiscreteOneHot,
    Continuous,
}

/// Graphs with class labels, a train/test split and per-dimension feature kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    graphs: Vec<Graph>,
    class_labels: Vec<usize>,
    splits: Vec<Split>,
    feature_kinds: Vec<FeatureKind>,
    num_classes: usize,
    /// Symbol for each one-hot feature dimension, when known.
    symbol_table: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(
        graphs: Vec<Graph>,
        class_labels: Vec<usize>,
        splits: Vec<Split>,
        feature_kinds: Vec<FeatureKind>,
        symbol_table: Option<Vec<String>>,
    ) -> Result<Self> {
        if graphs.len() != class_labels.len() || graphs.len() != splits.len() {
            return Err(Error::Contract(format!(
                "{} graphs, {} class labels, {} split tags",
                graphs.len(),
                class_labels.len(),
                splits.len()
            )));
        }
        let num_classes = class_labels.iter().max().map_or(0, |&m| m + 1);
        if num_classes < 2 {
            return Err(Error::Contract(format!(
                "dataset needs at least 2 classes, found {num_classes}"
            )));
        }
        let dim = graphs
            .first()
            .map_or(feature_kinds.len(), Graph::feature_dim);
        if feature_kinds.len() != dim {
            return Err(Error::Contract(format!(
                "{} feature kinds for feature dimension {dim}",
                feature_kinds.len()
            )));
        }
        let mut ids = BTreeSet::new();
        for g in &graphs {
            if g.feature_dim() != dim && g.num_nodes() > 0 {
                return Err(Error::validation(
                    g.id(),
                    format!("feature dimension {} differs from {dim}", g.feature_dim()),
                ));
            }
            if !ids.insert(g.id().to_string()) {
                return Err(Error::validation(g.id(), "duplicate graph id"));
            }
        }
        if let Some(table) = &symbol_table {
            if table.len() != dim {
                return Err(Error::Contract(format!(
                    "symbol table has {} entries for feature dimension {dim}",
                    table.len()
                )));
            }
        }
        Ok(LabeledDataset {
            graphs,
            class_labels,
            splits,
            feature_kinds,
            num_classes,
            symbol_table,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn graph(&self, i: usize) -> &Graph {
        &self.graphs[i]
    }

    pub fn class_labels(&self) -> &[usize] {
        &self.class_labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_kinds.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn symbol_table(&self) -> Option<&[String]> {
        self.symbol_table.as_deref()
    }

    /// Indices of graphs tagged with `split`, in dataset order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.graphs.len())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    pub fn position(&self, graph_id: &str) -> Option<usize> {
        self.graphs.iter().position(|g| g.id() == graph_id)
    }

    /// Sorted distinct node symbols over all graphs.
    pub fn node_vocabulary(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for g in &self.graphs {
            if let Some(labels) = g.node_labels() {
                set.extend(labels.iter().cloned());
            }
        }
        set.into_iter().collect()
    }

    /// Same dataset with a different split assignment.
    pub fn with_splits(mut self, splits: Vec<Split>) -> Result<Self> {
        if splits.len() != self.graphs.len() {
            return Err(Error::Contract("split vector length mismatch".into()));
        }
        self.splits = splits;
        Ok(self)
    }
}

/// Final-layer node embeddings and GNN predictions aligned with a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    layers: usize,
    nodes: Vec<Vec<Vec<f64>>>,
    predictions: Vec<usize>,
}

impl EmbeddingTable {
    pub fn new(
        dim: usize,
        layers: usize,
        nodes: Vec<Vec<Vec<f64>>>,
        predictions: Vec<usize>,
    ) -> Result<Self> {
        if nodes.len() != predictions.len() {
            return Err(Error::Contract(format!(
                "{} embedded graphs but {} predictions",
                nodes.len(),
                predictions.len()
            )));
        }
        if layers == 0 {
            return Err(Error::Contract(
                "embedding layer count must be at least 1".into(),
            ));
        }
        for (g, rows) in nodes.iter().enumerate() {
            if let Some(bad) = rows.iter().find(|h| h.len() != dim) {
                return Err(Error::Contract(format!(
                    "graph #{g}: embedding dimension {} differs from {dim}",
                    bad.len()
                )));
            }
        }
        Ok(EmbeddingTable {
            dim,
            layers,
            nodes,
            predictions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn graph(&self, g: usize) -> &[Vec<f64>] {
        &self.nodes[g]
    }

    pub fn node(&self, g: usize, v: usize) -> &[f64] {
        &self.nodes[g][v]
    }

    pub fn predictions(&self) -> &[usize] {
        &self.predictions
    }

    pub fn prediction(&self, g: usize) -> usize {
        self.predictions[g]
    }

    pub fn num_graphs(&self) -> usize {
        self.nodes.len()
    }

    /// Mean of node embeddings (zero vector for an empty graph).
    pub fn graph_embedding(&self, g: usize) -> Vec<f64> {
        let rows = &self.nodes[g];
        let mut mean = vec![0.0; self.dim];
        if rows.is_empty() {
            return mean;
        }
        for h in rows {
            for (m, x) in mean.iter_mut().zip(h) {
                *m += x;
            }
        }
        let n = rows.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Checks that the table has one row per node of every dataset graph.
    pub fn check_aligned(&self, dataset: &LabeledDataset) -> Result<()> {
        if self.nodes.len() != dataset.len() {
            return Err(Error::Contract(format!(
                "embedding table covers {} graphs, dataset has {}",
                self.nodes.len(),
                dataset.len()
            )));
        }
        for (g, graph) in dataset.graphs().iter().enumerate() {
            if self.nodes[g].len() != graph.num_nodes() {
                return Err(Error::Alignment {
                    graph: graph.id().to_string(),
                    node: self.nodes[g].len().min(graph.num_nodes()),
                    message: format!(
                        "{} embeddings for {} nodes",
                        self.nodes[g].len(),
                        graph.num_nodes()
                    ),
                });
            }
        }
        Ok(())
    }
}
