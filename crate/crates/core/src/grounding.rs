//! Input-space grounding of predicates.
//!
//! Every receptive field that supports a predicate is put in canonical
//! structural order (anchor first), so all supporters of one structure share
//! a single orbit template. Orbit-aggregated features `Z` computed on that
//! template feed a decision tree that tells apart predicates with the same
//! structural hash. Supporters are also grouped by their labeled canonical
//! form to yield ranked representative subgraphs.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canon::{canonical_form, Coloring, UnionFind};
use crate::cart::{Condition, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::graph::{FeatureKind, Graph, LabeledDataset, Split};
use crate::predicate::PredicateSet;
use crate::wl::{extract_receptive_field, ReceptiveField, StructHash};

/// Sort key of a node orbit; the derived order is the orbit order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrbitKey {
    /// `false` for the anchor's orbit, so it sorts first.
    pub not_anchor: bool,
    pub size: usize,
    pub degrees: Vec<usize>,
    /// Distances to the anchor; `u32::MAX` marks unreachable nodes.
    pub distances: Vec<u32>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeOrbitKey {
    pub size: usize,
    pub degrees: Vec<(usize, usize)>,
    pub distances: Vec<(u32, u32)>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitDecomposition {
    pub anchor: usize,
    pub orbits: Vec<Vec<usize>>,
    pub keys: Vec<OrbitKey>,
    /// Edge orbits as lists of edge indices.
    pub edge_orbits: Vec<Vec<usize>>,
    pub edge_keys: Vec<EdgeOrbitKey>,
}

impl OrbitDecomposition {
    /// Orbit position of every node.
    pub fn orbit_of(&self, n: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for (i, orbit) in self.orbits.iter().enumerate() {
            for &v in orbit {
                out[v] = i;
            }
        }
        out
    }
}

fn dist_u32(d: Option<usize>) -> u32 {
    d.map_or(u32::MAX, |x| x as u32)
}

/// Orbits of the automorphism group (or the anchor's stabilizer when
/// `fix_anchor`), sorted by [`OrbitKey`], plus the induced edge orbits.
pub fn orbit_decompose(
    g: &Graph,
    anchor: usize,
    cap: usize,
    fix_anchor: bool,
) -> Result<OrbitDecomposition> {
    let n = g.num_nodes();
    if n > cap {
        return Err(Error::CapExceeded { nodes: n, cap });
    }
    let coloring = if fix_anchor {
        Coloring::anchored(g, anchor)
    } else {
        Coloring::uniform(g)
    };
    let canon = canonical_form(g, &coloring);
    let ids = canon.orbit_ids();
    let dist = g.bfs_distances(anchor);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &id) in ids.iter().enumerate() {
        groups.entry(id).or_default().push(v);
    }
    let mut node_orbits: Vec<(OrbitKey, Vec<usize>)> = groups
        .into_values()
        .map(|nodes| {
            let mut degrees: Vec<usize> = nodes.iter().map(|&v| g.degree(v)).collect();
            degrees.sort_unstable();
            let mut distances: Vec<u32> = nodes.iter().map(|&v| dist_u32(dist[v])).collect();
            distances.sort_unstable();
            let key = OrbitKey {
                not_anchor: !nodes.contains(&anchor),
                size: nodes.len(),
                degrees,
                distances,
                nodes: nodes.clone(),
            };
            (key, nodes)
        })
        .collect();
    node_orbits.sort_by(|a, b| a.0.cmp(&b.0));

    let mut uf = UnionFind::new(g.num_edges());
    for pi in &canon.generators {
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            let f = g
                .edge_between(pi[u], pi[v])
                .expect("automorphisms map edges to edges");
            uf.union(e, f);
        }
    }
    let mut egroups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in 0..g.num_edges() {
        egroups.entry(uf.find(e)).or_default().push(e);
    }
    let mut edge_orbits: Vec<(EdgeOrbitKey, Vec<usize>)> = egroups
        .into_values()
        .map(|edges| {
            let ends: Vec<(usize, usize)> = edges
                .iter()
                .map(|&e| {
                    let (a, b) = g.edges()[e];
                    (a.min(b), a.max(b))
                })
                .collect();
            let mut degrees: Vec<(usize, usize)> = ends
                .iter()
                .map(|&(a, b)| {
                    let (x, y) = (g.degree(a), g.degree(b));
                    (x.min(y), x.max(y))
                })
                .collect();
            degrees.sort_unstable();
            let mut distances: Vec<(u32, u32)> = ends
                .iter()
                .map(|&(a, b)| {
                    let (x, y) = (dist_u32(dist[a]), dist_u32(dist[b]));
                    (x.min(y), x.max(y))
                })
                .collect();
            distances.sort_unstable();
            let mut sorted_ends = ends;
            sorted_ends.sort_unstable();
            let key = EdgeOrbitKey {
                size: edges.len(),
                degrees,
                distances,
                edges: sorted_ends,
            };
            (key, edges)
        })
        .collect();
    edge_orbits.sort_by(|a, b| a.0.cmp(&b.0));

    Ok(OrbitDecomposition {
        anchor,
        keys: node_orbits.iter().map(|o| o.0.clone()).collect(),
        orbits: node_orbits.into_iter().map(|o| o.1).collect(),
        edge_keys: edge_orbits.iter().map(|o| o.0.clone()).collect(),
        edge_orbits: edge_orbits.into_iter().map(|o| o.1).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Raw value of the single node in the orbit.
    Identity,
    /// Sum of a one-hot dimension: how many orbit nodes carry the symbol.
    Frequency,
    /// Mean of a continuous dimension.
    Mean,
    /// Number of orbit edges joining two given node symbols.
    PairCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    /// Orbit number: node orbits first, then edge orbits.
    pub orbit: usize,
    /// Feature dimension for node orbits.
    pub feature: Option<usize>,
    /// Endpoint symbols for edge orbits.
    pub pair: Option<(String, String)>,
    pub aggregation: Aggregation,
    pub discrete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub orbit: usize,
    pub offset: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub columns: Vec<Column>,
}

impl Layout {
    pub fn new(
        decomposition: &OrbitDecomposition,
        kinds: &[FeatureKind],
        vocabulary: &[String],
    ) -> Self {
        let mut columns = Vec::new();
        for (i, orbit) in decomposition.orbits.iter().enumerate() {
            for (k, kind) in kinds.iter().enumerate() {
                let discrete = *kind == FeatureKind::DiscreteOneHot;
                let aggregation = match (orbit.len(), discrete) {
                    (1, _) => Aggregation::Identity,
                    (_, true) => Aggregation::Frequency,
                    (_, false) => Aggregation::Mean,
                };
                columns.push(Column {
                    orbit: i,
                    feature: Some(k),
                    pair: None,
                    aggregation,
                    discrete,
                });
            }
        }
        let base = decomposition.orbits.len();
        for j in 0..decomposition.edge_orbits.len() {
            for (a, x) in vocabulary.iter().enumerate() {
                for y in &vocabulary[a..] {
                    columns.push(Column {
                        orbit: base + j,
                        feature: None,
                        pair: Some((x.clone(), y.clone())),
                        aggregation: Aggregation::PairCount,
                        discrete: true,
                    });
                }
            }
        }
        Layout { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Contiguous column ranges per orbit.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        for (i, c) in self.columns.iter().enumerate() {
            match out.last_mut() {
                Some(s) if s.orbit == c.orbit => s.width += 1,
                _ => out.push(Segment {
                    orbit: c.orbit,
                    offset: i,
                    width: 1,
                }),
            }
        }
        out
    }

    /// Human-readable name of a column, e.g. `#O(orbit 2)` or `f_0(orbit 0)`.
    pub fn column_name(&self, i: usize, symbols: Option<&[String]>) -> String {
        let c = &self.columns[i];
        match (&c.pair, c.feature) {
            (Some((a, b)), _) => format!("#({a}, {b})(orbit {})", c.orbit),
            (None, Some(k)) => match symbols {
                Some(s) if c.discrete => format!("#{}(orbit {})", s[k], c.orbit),
                _ => format!("f_{k}(orbit {})", c.orbit),
            },
            (None, None) => format!("z_{i}"),
        }
    }
}

/// Orbit-aggregated feature vector of `g` under `decomposition`.
pub fn build_z(g: &Graph, decomposition: &OrbitDecomposition, layout: &Layout) -> Vec<f64> {
    let mut z = Vec::with_capacity(layout.width());
    let base = decomposition.orbits.len();
    for c in &layout.columns {
        let value = match (&c.pair, c.feature) {
            (None, Some(k)) => {
                let orbit = &decomposition.orbits[c.orbit];
                let sum: f64 = orbit.iter().map(|&v| g.feature(v)[k]).sum();
                match c.aggregation {
                    Aggregation::Mean => sum / orbit.len() as f64,
                    _ => sum,
                }
            }
            (Some((a, b)), _) => {
                let edges = &decomposition.edge_orbits[c.orbit - base];
                edges
                    .iter()
                    .filter(|&&e| {
                        let (u, v) = g.edges()[e];
                        match (g.node_label(u), g.node_label(v)) {
                            (Some(x), Some(y)) => (x == a && y == b) || (x == b && y == a),
                            _ => false,
                        }
                    })
                    .count() as f64
            }
            (None, None) => 0.0,
        };
        z.push(value);
    }
    z
}

/// Labeled canonical form of a receptive field: anchored at position 0,
/// with node symbols and edge symbols in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledForm {
    pub num_nodes: usize,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, Option<String>)>,
}

impl LabeledForm {
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("form serializes")
    }

    pub fn digest(&self) -> String {
        let d = Sha256::digest(self.key().as_bytes());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Relabels `g` canonically under the labeled coloring; returns the graph
/// and its form.
pub fn labeled_canonical(g: &Graph, anchor: usize) -> (Graph, LabeledForm) {
    let canon = canonical_form(g, &Coloring::labeled(g, Some(anchor), true));
    let cg = g.permuted(&canon.labeling);
    let labels = (0..cg.num_nodes())
        .map(|v| cg.node_label(v).unwrap_or("").to_string())
        .collect();
    let mut edges: Vec<(usize, usize, Option<String>)> = cg
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(a, b))| (a.min(b), a.max(b), cg.edge_label(e).map(str::to_string)))
        .collect();
    edges.sort();
    let form = LabeledForm {
        num_nodes: cg.num_nodes(),
        labels,
        edges,
    };
    (cg, form)
}

/// Structure-only canonical relabeling with the anchor fixed at position 0.
fn structural_canonical(field: &ReceptiveField) -> (Vec<u64>, Graph) {
    let canon = canonical_form(
        &field.graph,
        &Coloring::anchored(&field.graph, field.center),
    );
    (canon.certificate, field.graph.permuted(&canon.labeling))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingConfig {
    pub radius: usize,
    pub anchor_center: bool,
    pub orbit_cap: usize,
    pub depth: usize,
    pub top_k: usize,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig {
            radius: 2,
            anchor_center: true,
            orbit_cap: 30,
            depth: 8,
            top_k: 5,
        }
    }
}

/// One canonical structure among the receptive fields of a hash group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    /// Structural certificate; `None` for fields above the orbit cap.
    pub certificate: Option<Vec<u64>>,
    pub template: Option<Graph>,
    pub decomposition: Option<OrbitDecomposition>,
    pub layout: Option<Layout>,
    pub tree: Option<DecisionTree>,
    /// Predicates with supporters of this structure; tree classes index it.
    pub predicate_ids: Vec<usize>,
    pub supporters: usize,
    pub train_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashGroup {
    pub struct_hash: StructHash,
    pub predicate_ids: Vec<usize>,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundingKind {
    FeatureRule,
    StructureOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub form: String,
    pub graph: Graph,
    pub coverage: f64,
    /// Activating graphs containing this form.
    pub graphs: usize,
    pub source_graph: String,
    pub source_node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedPredicate {
    pub id: usize,
    pub struct_hash: StructHash,
    pub kind: GroundingKind,
    /// Grounding cases, one line each.
    pub rule: Vec<String>,
    pub representatives: Vec<Representative>,
    pub cap_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub config: GroundingConfig,
    pub groups: Vec<HashGroup>,
    pub predicates: Vec<GroundedPredicate>,
    pub feature_kinds: Vec<FeatureKind>,
    pub vocabulary: Vec<String>,
    pub symbols: Option<Vec<String>>,
    #[serde(skip)]
    index: HashMap<StructHash, usize>,
}

/// Per-node bits with a note of how many nodes fell back to structure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundedBits {
    pub bits: Vec<bool>,
    pub fallback_nodes: usize,
}

/// Grounding cases of one predicate: (variant, path conditions) pairs,
/// whether it sits in a tree-grounded variant, and whether any of its
/// fields exceeded the orbit cap.
struct PredicateCases {
    id: usize,
    cases: Vec<(usize, Vec<Condition>)>,
    in_tree: bool,
    cap_exceeded: bool,
}

struct Supporter {
    graph: usize,
    node: usize,
    pred: usize,
}

fn render_conditions(conds: &[Condition], layout: &Layout, symbols: Option<&[String]>) -> String {
    let mut bounds: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for c in conds {
        let e = bounds.entry(c.feature).or_default();
        if c.at_least {
            e.0 = Some(e.0.map_or(c.threshold, |t: f64| t.max(c.threshold)));
        } else {
            e.1 = Some(e.1.map_or(c.threshold, |t: f64| t.min(c.threshold)));
        }
    }
    let mut parts = Vec::new();
    for (col, (lo, hi)) in bounds {
        let name = layout.column_name(col, symbols);
        if layout.columns[col].discrete {
            let lo = lo.map(|t| t.ceil() as i64);
            let hi = hi.map(|t| t.ceil() as i64 - 1);
            match (lo, hi) {
                (Some(a), Some(b)) if a == b => parts.push(format!("{name} = {a}")),
                (Some(a), Some(b)) => parts.push(format!("{a} <= {name} <= {b}")),
                (Some(a), None) => parts.push(format!("{name} >= {a}")),
                (None, Some(b)) if b <= 0 => parts.push(format!("{name} = 0")),
                (None, Some(b)) => parts.push(format!("{name} <= {b}")),
                (None, None) => {}
            }
        } else {
            if let Some(t) = lo {
                parts.push(format!("{name} >= {t:.4}"));
            }
            if let Some(t) = hi {
                parts.push(format!("{name} < {t:.4}"));
            }
        }
    }
    if parts.is_empty() {
        "true".into()
    } else {
        parts.join(" and ")
    }
}

impl Grounding {
    fn reindex(&mut self) {
        self.index = self
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.struct_hash.clone(), i))
            .collect();
    }

    /// Restores lookup tables after deserialization.
    pub fn rebuild(mut self) -> Self {
        self.reindex();
        self
    }

    pub fn group(&self, hash: &StructHash) -> Option<&HashGroup> {
        self.index.get(hash).map(|&i| &self.groups[i])
    }

    /// Predicate bits of a graph under grounded evaluation: a node fires the
    /// predicate its hash group's grounding tree assigns to its receptive
    /// field; structure-only variants fire all their predicates.
    pub fn graph_bits(&self, g: &Graph, hashes: &[StructHash]) -> GroundedBits {
        let mut out = GroundedBits {
            bits: vec![false; self.predicates.len()],
            fallback_nodes: 0,
        };
        for (v, hash) in hashes.iter().enumerate().take(g.num_nodes()) {
            let Some(group) = self.group(hash) else {
                continue;
            };
            let field = extract_receptive_field(g, v, self.config.radius);
            let variant = if field.graph.num_nodes() > self.config.orbit_cap {
                out.fallback_nodes += 1;
                group.variants.iter().find(|x| x.certificate.is_none())
            } else {
                let (cert, canonical) = structural_canonical(&field);
                let found = group
                    .variants
                    .iter()
                    .find(|x| x.certificate.as_ref() == Some(&cert));
                match found {
                    Some(Variant {
                        tree: Some(tree),
                        decomposition: Some(dec),
                        layout: Some(layout),
                        predicate_ids,
                        ..
                    }) => {
                        let z = build_z(&canonical, dec, layout);
                        let class = tree.predict(&z).unwrap_or(0);
                        out.bits[predicate_ids[class]] = true;
                        None
                    }
                    other => other,
                }
            };
            if let Some(x) = variant {
                for &p in &x.predicate_ids {
                    out.bits[p] = true;
                }
            }
        }
        out
    }

    /// Forms of the top representative of each listed predicate.
    pub fn top_forms(&self, ids: &[usize]) -> Vec<String> {
        let mut out: Vec<String> = ids
            .iter()
            .filter_map(|&p| {
                self.predicates[p]
                    .representatives
                    .first()
                    .map(|r| r.form.clone())
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Grounds every predicate: per hash group, splits supporters by canonical
/// structure, fits grounding trees where several predicates share one, and
/// collects representatives.
pub fn learn_grounding(
    dataset: &LabeledDataset,
    predicates: &PredicateSet,
    node_predicates: &[Vec<Option<usize>>],
    config: GroundingConfig,
) -> Result<Grounding> {
    let vocabulary = dataset.node_vocabulary();
    let kinds = dataset.feature_kinds().to_vec();
    let symbols = dataset.symbol_table().map(<[String]>::to_vec);
    let train = dataset.indices(Split::Train);
    let group_of: HashMap<usize, usize> = predicates
        .hash_groups()
        .iter()
        .enumerate()
        .flat_map(|(gi, (_, ids))| ids.iter().map(move |&p| (p, gi)))
        .collect();
    let hash_groups = predicates.hash_groups();
    let mut supporters: Vec<Vec<Supporter>> = (0..hash_groups.len()).map(|_| Vec::new()).collect();
    for &g in &train {
        for (v, p) in node_predicates[g].iter().enumerate() {
            if let Some(p) = *p {
                supporters[group_of[&p]].push(Supporter {
                    graph: g,
                    node: v,
                    pred: p,
                });
            }
        }
    }

    type GroupResult = (HashGroup, Vec<PredicateCases>);
    let results: Vec<GroupResult> = hash_groups
        .par_iter()
        .zip(supporters.par_iter())
        .map(|((hash, ids), sup)| {
            ground_group(dataset, hash, ids, sup, &config, &kinds, &vocabulary)
        })
        .collect::<Result<_>>()?;

    let representatives: Vec<Vec<Representative>> = (0..predicates.len())
        .into_par_iter()
        .map(|p| collect_representatives(dataset, p, node_predicates, &config))
        .collect();

    let mut grounded: Vec<Option<GroundedPredicate>> = vec![None; predicates.len()];
    let mut groups = Vec::with_capacity(results.len());
    for (group, per_pred) in results {
        for pc in per_pred {
            let p = pc.id;
            let cap_exceeded = pc.cap_exceeded;
            let kind = if pc.in_tree {
                GroundingKind::FeatureRule
            } else {
                GroundingKind::StructureOnly
            };
            let tree_variants: Vec<usize> = {
                let mut v: Vec<usize> = pc.cases.iter().map(|c| c.0).collect();
                v.dedup();
                v
            };
            let rule = if !pc.in_tree {
                vec![format!("structure {} present", group.struct_hash)]
            } else if pc.cases.is_empty() {
                vec!["never selected by the grounding tree".to_string()]
            } else {
                pc.cases
                    .iter()
                    .enumerate()
                    .map(|(i, (vi, conds))| {
                        let layout = group.variants[*vi]
                            .layout
                            .as_ref()
                            .expect("tree variants have layouts");
                        let text = render_conditions(conds, layout, symbols.as_deref());
                        if tree_variants.len() > 1 {
                            format!("Case {} [structure {vi}]: {text}", i + 1)
                        } else {
                            format!("Case {}: {text}", i + 1)
                        }
                    })
                    .collect()
            };
            grounded[p] = Some(GroundedPredicate {
                id: p,
                struct_hash: group.struct_hash.clone(),
                kind,
                rule,
                representatives: Vec::new(),
                cap_exceeded,
            });
        }
        groups.push(group);
    }
    let mut out_preds: Vec<GroundedPredicate> = grounded
        .into_iter()
        .enumerate()
        .map(|(p, g)| g.ok_or_else(|| Error::Contract(format!("predicate {p} has no supporters"))))
        .collect::<Result<_>>()?;
    for (gp, reps) in out_preds.iter_mut().zip(representatives) {
        gp.representatives = reps;
    }
    let mut grounding = Grounding {
        config,
        groups,
        predicates: out_preds,
        feature_kinds: kinds,
        vocabulary,
        symbols,
        index: HashMap::new(),
    };
    grounding.reindex();
    Ok(grounding)
}

fn ground_group(
    dataset: &LabeledDataset,
    hash: &StructHash,
    ids: &[usize],
    supporters: &[Supporter],
    config: &GroundingConfig,
    kinds: &[FeatureKind],
    vocabulary: &[String],
) -> Result<(HashGroup, Vec<PredicateCases>)> {
    struct Pending {
        certificate: Option<Vec<u64>>,
        members: Vec<(Graph, usize)>,
    }
    let mut pending: Vec<Pending> = Vec::new();
    let mut at: HashMap<Option<Vec<u64>>, usize> = HashMap::new();
    for s in supporters {
        let field = extract_receptive_field(dataset.graph(s.graph), s.node, config.radius);
        let (cert, canonical) = if field.graph.num_nodes() > config.orbit_cap {
            (None, field.graph)
        } else {
            let (c, g) = structural_canonical(&field);
            (Some(c), g)
        };
        let slot = *at.entry(cert.clone()).or_insert_with(|| {
            pending.push(Pending {
                certificate: cert,
                members: Vec::new(),
            });
            pending.len() - 1
        });
        pending[slot].members.push((canonical, s.pred));
    }

    let mut variants = Vec::with_capacity(pending.len());
    let mut cases: BTreeMap<usize, Vec<(usize, Vec<Condition>)>> = BTreeMap::new();
    let mut capped: BTreeMap<usize, bool> = ids.iter().map(|&p| (p, false)).collect();
    let mut in_tree: BTreeMap<usize, bool> = ids.iter().map(|&p| (p, false)).collect();
    for pv in pending {
        let mut pred_ids: Vec<usize> = pv.members.iter().map(|m| m.1).collect();
        pred_ids.sort_unstable();
        pred_ids.dedup();
        let mut variant = Variant {
            certificate: pv.certificate.clone(),
            template: None,
            decomposition: None,
            layout: None,
            tree: None,
            predicate_ids: pred_ids.clone(),
            supporters: pv.members.len(),
            train_accuracy: None,
        };
        if pv.certificate.is_none() {
            for p in &pred_ids {
                capped.insert(*p, true);
            }
            log::debug!("hash {hash}: receptive field above orbit cap, structure-only");
        } else if pred_ids.len() > 1 {
            let first = &pv.members[0].0;
            let template = Graph::from_edges(format!("{hash}"), first.num_nodes(), first.edges())?;
            let dec = orbit_decompose(&template, 0, config.orbit_cap, config.anchor_center)?;
            let layout = Layout::new(&dec, kinds, vocabulary);
            let x: Vec<Vec<f64>> = pv
                .members
                .iter()
                .map(|(g, _)| build_z(g, &dec, &layout))
                .collect();
            let y: Vec<usize> = pv
                .members
                .iter()
                .map(|(_, p)| pred_ids.binary_search(p).expect("listed"))
                .collect();
            let x_fit = if layout.width() == 0 {
                vec![vec![0.0]; x.len()]
            } else {
                x.clone()
            };
            let tree =
                DecisionTree::fit(&x_fit, &y, pred_ids.len(), &TreeParams::new(config.depth))?;
            let acc = tree.accuracy(&x_fit, &y);
            if acc < 1.0 {
                log::debug!("hash {hash}: grounding tree reaches {acc:.3} on its supporters");
            }
            for path in tree.paths() {
                cases
                    .entry(pred_ids[path.class])
                    .or_default()
                    .push((variants.len(), path.conditions));
            }
            for p in &pred_ids {
                in_tree.insert(*p, true);
            }
            variant.template = Some(template);
            variant.decomposition = Some(dec);
            variant.layout = Some(layout);
            variant.tree = Some(tree);
            variant.train_accuracy = Some(acc);
        } else {
            let first = &pv.members[0].0;
            variant.template = Some(Graph::from_edges(
                format!("{hash}"),
                first.num_nodes(),
                first.edges(),
            )?);
        }
        variants.push(variant);
    }
    let per_pred = ids
        .iter()
        .map(|&p| PredicateCases {
            id: p,
            cases: cases.remove(&p).unwrap_or_default(),
            in_tree: in_tree[&p],
            cap_exceeded: capped[&p],
        })
        .collect();
    Ok((
        HashGroup {
            struct_hash: hash.clone(),
            predicate_ids: ids.to_vec(),
            variants,
        },
        per_pred,
    ))
}

/// Representative subgraphs of predicate `p`: supporting receptive fields
/// grouped by labeled canonical form, ranked by the fraction of activating
/// training graphs that contain the form.
pub fn collect_representatives(
    dataset: &LabeledDataset,
    p: usize,
    node_predicates: &[Vec<Option<usize>>],
    config: &GroundingConfig,
) -> Vec<Representative> {
    struct Entry {
        graph: Graph,
        graphs: usize,
        last_graph: usize,
        source: (usize, usize),
    }
    let mut forms: BTreeMap<String, Entry> = BTreeMap::new();
    let mut activating = 0usize;
    for g in dataset.indices(Split::Train) {
        let nodes: Vec<usize> = node_predicates[g]
            .iter()
            .enumerate()
            .filter(|(_, q)| **q == Some(p))
            .map(|(v, _)| v)
            .collect();
        if nodes.is_empty() {
            continue;
        }
        activating += 1;
        for v in nodes {
            let field = extract_receptive_field(dataset.graph(g), v, config.radius);
            let (cg, form) = labeled_canonical(&field.graph, field.center);
            let digest = form.digest();
            let e = forms.entry(digest).or_insert_with(|| Entry {
                graph: cg,
                graphs: 0,
                last_graph: usize::MAX,
                source: (g, v),
            });
            if e.last_graph != g {
                e.graphs += 1;
                e.last_graph = g;
            }
        }
    }
    let mut reps: Vec<Representative> = forms
        .into_iter()
        .map(|(form, e)| {
            let mut graph = e.graph;
            let id = format!("{}:{}#{}", form, dataset.graph(e.source.0).id(), e.source.1);
            graph = Graph::new(
                id,
                graph.num_nodes(),
                graph.edges().to_vec(),
                graph.features().to_vec(),
                graph.node_labels().map(<[String]>::to_vec),
                graph.edge_labels().map(<[String]>::to_vec),
            )
            .expect("relabeled field is valid");
            Representative {
                form,
                graph,
                coverage: e.graphs as f64 / activating.max(1) as f64,
                graphs: e.graphs,
                source_graph: dataset.graph(e.source.0).id().to_string(),
                source_node: e.source.1,
            }
        })
        .collect();
    reps.sort_by(|a, b| b.graphs.cmp(&a.graphs).then_with(|| a.form.cmp(&b.form)));
    reps.truncate(config.top_k);
    reps
}

/// Human-readable case listing for one grounded predicate.
pub fn describe(gp: &GroundedPredicate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "p{} [{}] {:?}", gp.id, gp.struct_hash, gp.kind);
    for line in &gp.rule {
        let _ = writeln!(s, "  {line}");
    }
    for (i, r) in gp.representatives.iter().enumerate() {
        let _ = writeln!(
            s,
            "  #{} {} coverage {:.3} ({} nodes, from {} node {})",
            i + 1,
            r.form,
            r.coverage,
            r.graph.num_nodes(),
            r.source_graph,
            r.source_node
        );
    }
    s
}
