//! Activation matrix, DNF rule learning and rule evaluation.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::graph::{EmbeddingTable, LabeledDataset, Split};
use crate::predicate::PredicateSet;
use crate::wl::StructHash;

/// Rows are correctly predicted training graphs, columns are predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMatrix {
    pub rows: Vec<Vec<bool>>,
    /// GNN prediction of each row's graph.
    pub labels: Vec<usize>,
    pub graph_ids: Vec<String>,
    /// Dataset position of each row's graph.
    pub graph_index: Vec<usize>,
    pub num_predicates: usize,
    pub num_classes: usize,
}

pub fn build_matrix(
    predicates: &PredicateSet,
    dataset: &LabeledDataset,
    embeddings: &EmbeddingTable,
    hashes: &[Vec<StructHash>],
) -> Result<ActivationMatrix> {
    embeddings.check_aligned(dataset)?;
    let chosen: Vec<usize> = dataset
        .indices(Split::Train)
        .into_iter()
        .filter(|&g| embeddings.prediction(g) == dataset.class_labels()[g])
        .collect();
    let mut present: Vec<usize> = dataset
        .indices(Split::Train)
        .into_iter()
        .map(|g| dataset.class_labels()[g])
        .collect();
    present.sort_unstable();
    present.dedup();
    for c in present {
        if !chosen.iter().any(|&g| dataset.class_labels()[g] == c) {
            return Err(Error::RuleLearning(format!(
                "class {c} has no correctly predicted training graph"
            )));
        }
    }
    let rows: Vec<Vec<bool>> = chosen
        .par_iter()
        .map(|&g| predicates.graph_bits(&hashes[g], embeddings.graph(g)))
        .collect();
    Ok(ActivationMatrix {
        rows,
        labels: chosen.iter().map(|&g| embeddings.prediction(g)).collect(),
        graph_ids: chosen
            .iter()
            .map(|&g| dataset.graph(g).id().to_string())
            .collect(),
        graph_index: chosen,
        num_predicates: predicates.len(),
        num_classes: dataset.num_classes(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub pred_id: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(pred_id: usize) -> Self {
        Literal {
            pred_id,
            negated: false,
        }
    }

    pub fn neg(pred_id: usize) -> Self {
        Literal {
            pred_id,
            negated: true,
        }
    }

    pub fn eval(&self, bits: &[bool]) -> bool {
        bits[self.pred_id] != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬p{}", self.pred_id)
        } else {
            write!(f, "p{}", self.pred_id)
        }
    }
}

pub type Conjunction = Vec<Literal>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnfRuleSet {
    /// `classes[c]` is the disjunction of conjunctions for class `c`.
    pub classes: Vec<Vec<Conjunction>>,
    pub depth: usize,
    pub num_predicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Class(usize),
    Ambiguous,
}

impl Verdict {
    pub fn class(self) -> Option<usize> {
        match self {
            Verdict::Class(c) => Some(c),
            Verdict::Ambiguous => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Class(c) => write!(f, "{c}"),
            Verdict::Ambiguous => f.write_str("AMBIGUOUS"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEvaluation {
    pub satisfied: Vec<bool>,
    pub verdict: Verdict,
}

fn verdict_of(satisfied: &[bool]) -> Verdict {
    let mut it = satisfied.iter().enumerate().filter(|(_, &s)| s);
    match (it.next(), it.next()) {
        (Some((c, _)), None) => Verdict::Class(c),
        _ => Verdict::Ambiguous,
    }
}

fn conj_holds(conj: &[Literal], bits: &[bool]) -> bool {
    conj.iter().all(|l| l.eval(bits))
}

pub fn eval_rules(rules: &DnfRuleSet, bits: &[bool]) -> Result<RuleEvaluation> {
    if bits.len() != rules.num_predicates {
        return Err(Error::Contract(format!(
            "{} predicate bits for a rule set over {} predicates",
            bits.len(),
            rules.num_predicates
        )));
    }
    let satisfied: Vec<bool> = rules
        .classes
        .iter()
        .map(|disj| disj.iter().any(|c| conj_holds(c, bits)))
        .collect();
    Ok(RuleEvaluation {
        verdict: verdict_of(&satisfied),
        satisfied,
    })
}

/// Like `eval_rules`, but every conjunction that mentions a predicate with
/// `usable[p] == false` is treated as false.
pub fn eval_rules_restricted(
    rules: &DnfRuleSet,
    bits: &[bool],
    usable: &[bool],
) -> Result<RuleEvaluation> {
    if bits.len() != rules.num_predicates || usable.len() != rules.num_predicates {
        return Err(Error::Contract("bit width does not match rule set".into()));
    }
    let satisfied: Vec<bool> = rules
        .classes
        .iter()
        .map(|disj| {
            disj.iter()
                .any(|c| c.iter().all(|l| usable[l.pred_id]) && conj_holds(c, bits))
        })
        .collect();
    Ok(RuleEvaluation {
        verdict: verdict_of(&satisfied),
        satisfied,
    })
}

/// Learns a rule tree over the matrix and returns one conjunction per leaf,
/// grouped by leaf class. Rows are weighted inversely to class frequency.
pub fn learn_rules(matrix: &ActivationMatrix, depth: usize) -> Result<(DnfRuleSet, DecisionTree)> {
    let mut present: Vec<usize> = matrix.labels.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        log::warn!("activation matrix holds a single class; rules are trivial");
    }
    if matrix.rows.is_empty() {
        return Err(Error::RuleLearning("activation matrix has no rows".into()));
    }
    let classes = matrix.num_classes.max(present.last().map_or(0, |m| m + 1));
    let mut counts = vec![0usize; classes];
    for &c in &matrix.labels {
        counts[c] += 1;
    }
    let n = matrix.labels.len() as f64;
    let k = present.len() as f64;
    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| if c == 0 { 1.0 } else { n / (k * c as f64) })
        .collect();
    let x: Vec<Vec<f64>> = if matrix.num_predicates == 0 {
        vec![vec![0.0]; matrix.rows.len()]
    } else {
        matrix
            .rows
            .iter()
            .map(|r| r.iter().map(|&b| f64::from(u8::from(b))).collect())
            .collect()
    };
    let tree = DecisionTree::fit(
        &x,
        &matrix.labels,
        classes,
        &TreeParams::new(depth).class_weights(weights),
    )?;
    let mut rules = DnfRuleSet {
        classes: vec![Vec::new(); classes],
        depth,
        num_predicates: matrix.num_predicates,
    };
    for path in tree.paths() {
        let conj = path
            .conditions
            .iter()
            .map(|c| Literal {
                pred_id: c.feature,
                negated: !c.at_least,
            })
            .collect();
        rules.classes[path.class].push(conj);
    }
    Ok((rules, tree))
}

impl DnfRuleSet {
    /// Predicate ids referenced by any literal, ascending.
    pub fn used_predicates(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .classes
            .iter()
            .flatten()
            .flatten()
            .map(|l| l.pred_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Logically equivalent rule set with redundant literals and
    /// conjunctions removed.
    pub fn simplified(&self) -> DnfRuleSet {
        let classes = self
            .classes
            .iter()
            .map(|d| simplify_disjunction(d))
            .collect();
        DnfRuleSet {
            classes,
            depth: self.depth,
            num_predicates: self.num_predicates,
        }
    }

    pub fn render_class(&self, c: usize) -> String {
        let disj = &self.classes[c];
        let body = if disj.is_empty() {
            "⊥".to_string()
        } else {
            let parts: Vec<String> = disj
                .iter()
                .map(|conj| {
                    if conj.is_empty() {
                        "⊤".to_string()
                    } else {
                        let lits: Vec<String> = conj.iter().map(Literal::to_string).collect();
                        if conj.len() > 1 && disj.len() > 1 {
                            format!("({})", lits.join(" ∧ "))
                        } else {
                            lits.join(" ∧ ")
                        }
                    }
                })
                .collect();
            parts.join(" ∨ ")
        };
        format!("{body} ⇒ class {c}")
    }
}

impl fmt::Display for DnfRuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in 0..self.classes.len() {
            writeln!(f, "{}", self.render_class(c))?;
        }
        Ok(())
    }
}

fn normalize(conj: &[Literal]) -> Option<Conjunction> {
    let mut lits = conj.to_vec();
    lits.sort_unstable();
    lits.dedup();
    if lits.windows(2).any(|w| w[0].pred_id == w[1].pred_id) {
        return None;
    }
    Some(lits)
}

fn is_subset(a: &[Literal], b: &[Literal]) -> bool {
    a.iter().all(|l| b.binary_search(l).is_ok())
}

fn simplify_disjunction(disj: &[Conjunction]) -> Vec<Conjunction> {
    let mut conjs: Vec<Conjunction> = disj.iter().filter_map(|c| normalize(c)).collect();
    loop {
        conjs.sort();
        conjs.dedup();
        let mut changed = false;
        // absorption: drop any conjunction implied by a shorter one
        let mut keep = vec![true; conjs.len()];
        for i in 0..conjs.len() {
            for j in 0..conjs.len() {
                if i != j
                    && keep[j]
                    && keep[i]
                    && conjs[j].len() < conjs[i].len()
                    && is_subset(&conjs[j], &conjs[i])
                {
                    keep[i] = false;
                    changed = true;
                }
            }
        }
        conjs = conjs
            .into_iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(c, _)| c)
            .collect();
        // merge A ∧ p with A ∧ ¬p into A
        'outer: for i in 0..conjs.len() {
            for j in i + 1..conjs.len() {
                if conjs[i].len() != conjs[j].len() {
                    continue;
                }
                let diff: Vec<usize> = (0..conjs[i].len())
                    .filter(|&k| conjs[i][k] != conjs[j][k])
                    .collect();
                if diff.len() == 1 {
                    let k = diff[0];
                    if conjs[i][k].pred_id == conjs[j][k].pred_id {
                        let mut merged = conjs[i].clone();
                        merged.remove(k);
                        conjs.swap_remove(j);
                        conjs[i] = merged;
                        changed = true;
                        break 'outer;
                    }
                }
            }
        }
        if !changed {
            return conjs;
        }
    }
}
