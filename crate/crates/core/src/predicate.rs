//! Hidden predicates: (structural hash, embedding activation pattern) pairs.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{fit_until_accurate, GrownTree};
use crate::error::{Error, Result};
use crate::graph::{EmbeddingTable, LabeledDataset, Split};
use crate::wl::{struct_pattern, StructHash};

/// Informative embedding dimensions, ascending, with their thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl Thresholds {
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(d, _)| d);
        Thresholds {
            dims: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }
}

/// Result of fitting the embedding tree on mean-pooled graph embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddingSplit {
    pub thresholds: Thresholds,
    pub grown: GrownTree,
}

/// Grows a tree on train-split graph embeddings against the GNN's
/// predictions until `target` train accuracy or `max_depth`.
pub fn informative_dims(
    dataset: &LabeledDataset,
    embeddings: &EmbeddingTable,
    target: f64,
    max_depth: usize,
    min_leaf: usize,
) -> Result<EmbeddingSplit> {
    embeddings.check_aligned(dataset)?;
    let rows = dataset.indices(Split::Train);
    if rows.is_empty() {
        return Err(Error::Config("no training graphs".into()));
    }
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|&g| embeddings.graph_embedding(g))
        .collect();
    let y: Vec<usize> = rows.iter().map(|&g| embeddings.prediction(g)).collect();
    let classes = y
        .iter()
        .max()
        .map_or(0, |m| m + 1)
        .max(dataset.num_classes());
    let grown = fit_until_accurate(&x, &y, classes, target, max_depth, min_leaf)?;
    if !grown.reached_target {
        log::warn!(
            "embedding tree reached only {:.3} train accuracy at depth {}",
            grown.train_accuracy,
            grown.depth
        );
    }
    let thresholds = Thresholds::new(grown.tree.informative_dims());
    if thresholds.is_empty() {
        log::warn!("embedding tree has no splits; predicates will be structure-only");
    }
    Ok(EmbeddingSplit { thresholds, grown })
}

/// Activation bits: bit i is set iff `h[dims[i]] >= values[i]`.
pub fn emb_pattern(h: &[f64], thresholds: &Thresholds) -> Vec<bool> {
    thresholds
        .dims
        .iter()
        .zip(&thresholds.values)
        .map(|(&k, &t)| h[k] >= t)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub id: usize,
    pub struct_hash: StructHash,
    pub emb_pattern: Vec<bool>,
    pub support: usize,
    /// Supporting training nodes per predicted class of their graph.
    pub class_support: Vec<usize>,
}

impl Predicate {
    pub fn name(&self) -> String {
        format!("p{}", self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub radius: usize,
    pub anchor_center: bool,
    pub min_support: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            radius: 2,
            anchor_center: true,
            min_support: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredicateSet {
    pub predicates: Vec<Predicate>,
    pub thresholds: Thresholds,
    pub config: MinerConfig,
    #[serde(skip)]
    index: HashMap<(StructHash, Vec<bool>), usize>,
}

impl PartialEq for PredicateSet {
    fn eq(&self, other: &Self) -> bool {
        self.predicates == other.predicates
            && self.thresholds == other.thresholds
            && self.config == other.config
    }
}

impl PredicateSet {
    pub fn new(
        predicates: Vec<Predicate>,
        thresholds: Thresholds,
        config: MinerConfig,
    ) -> Result<Self> {
        let mut set = PredicateSet {
            predicates,
            thresholds,
            config,
            index: HashMap::new(),
        };
        set.reindex()?;
        Ok(set)
    }

    /// Rebuilds the lookup table; needed after deserialization.
    pub fn reindex(&mut self) -> Result<()> {
        self.index.clear();
        for (i, p) in self.predicates.iter().enumerate() {
            if p.id != i {
                return Err(Error::Contract(format!(
                    "predicate at position {i} has id {}",
                    p.id
                )));
            }
            if p.emb_pattern.len() != self.thresholds.dims.len() {
                return Err(Error::Contract(format!(
                    "predicate {i} has a pattern of wrong width"
                )));
            }
            if self
                .index
                .insert((p.struct_hash.clone(), p.emb_pattern.clone()), i)
                .is_some()
            {
                return Err(Error::Contract(format!(
                    "predicate {i} duplicates an earlier pair"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn get(&self, id: usize) -> &Predicate {
        &self.predicates[id]
    }

    pub fn lookup(&self, hash: &StructHash, pattern: &[bool]) -> Option<usize> {
        self.index.get(&(hash.clone(), pattern.to_vec())).copied()
    }

    /// Predicate ids grouped by structural hash, in first-id order.
    pub fn hash_groups(&self) -> Vec<(StructHash, Vec<usize>)> {
        let mut groups: Vec<(StructHash, Vec<usize>)> = Vec::new();
        let mut at: HashMap<&StructHash, usize> = HashMap::new();
        for p in &self.predicates {
            match at.get(&p.struct_hash) {
                Some(&i) => groups[i].1.push(p.id),
                None => {
                    at.insert(&p.struct_hash, groups.len());
                    groups.push((p.struct_hash.clone(), vec![p.id]));
                }
            }
        }
        groups
    }

    /// Predicate of every node of a graph (None for unseen pairs).
    pub fn node_predicates(
        &self,
        hashes: &[StructHash],
        embeddings: &[Vec<f64>],
    ) -> Vec<Option<usize>> {
        hashes
            .iter()
            .zip(embeddings)
            .map(|(h, e)| self.lookup(h, &emb_pattern(e, &self.thresholds)))
            .collect()
    }

    /// Activation bits of a graph from its per-node hashes and embeddings.
    pub fn graph_bits(&self, hashes: &[StructHash], embeddings: &[Vec<f64>]) -> Vec<bool> {
        let mut bits = vec![false; self.len()];
        for p in self
            .node_predicates(hashes, embeddings)
            .into_iter()
            .flatten()
        {
            bits[p] = true;
        }
        bits
    }
}

/// Structural hash of every node of every graph.
pub fn node_hashes(
    dataset: &LabeledDataset,
    radius: usize,
    anchor_center: bool,
) -> Vec<Vec<StructHash>> {
    dataset
        .graphs()
        .par_iter()
        .map(|g| {
            (0..g.num_nodes())
                .map(|v| struct_pattern(g, v, radius, anchor_center))
                .collect()
        })
        .collect()
}

/// Collects one predicate per distinct (hash, pattern) pair over the train
/// split, ids in order of first occurrence.
pub fn mine(
    dataset: &LabeledDataset,
    embeddings: &EmbeddingTable,
    hashes: &[Vec<StructHash>],
    thresholds: &Thresholds,
    config: MinerConfig,
) -> Result<PredicateSet> {
    embeddings.check_aligned(dataset)?;
    if thresholds.dims.iter().any(|&k| k >= embeddings.dim()) {
        return Err(Error::Contract(
            "informative dimension outside embedding width".into(),
        ));
    }
    let classes = dataset
        .num_classes()
        .max(embeddings.predictions().iter().max().map_or(0, |m| m + 1));
    let mut found: Vec<Predicate> = Vec::new();
    let mut index: HashMap<(StructHash, Vec<bool>), usize> = HashMap::new();
    for g in dataset.indices(Split::Train) {
        let y_hat = embeddings.prediction(g);
        for (v, hash) in hashes[g].iter().enumerate() {
            let pattern = emb_pattern(embeddings.node(g, v), thresholds);
            let key = (hash.clone(), pattern);
            let id = *index.entry(key.clone()).or_insert_with(|| {
                found.push(Predicate {
                    id: found.len(),
                    struct_hash: key.0,
                    emb_pattern: key.1,
                    support: 0,
                    class_support: vec![0; classes],
                });
                found.len() - 1
            });
            found[id].support += 1;
            found[id].class_support[y_hat] += 1;
        }
    }
    let before = found.len();
    found.retain(|p| p.support >= config.min_support.max(1));
    if found.len() < before {
        log::info!(
            "dropped {} predicates below support {}",
            before - found.len(),
            config.min_support
        );
    }
    for (i, p) in found.iter_mut().enumerate() {
        p.id = i;
    }
    PredicateSet::new(found, thresholds.clone(), config)
}
