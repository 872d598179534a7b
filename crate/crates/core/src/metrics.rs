//! Rule-based inference on whole graphs and explanation metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LabeledDataset, Split};
use crate::grounding::{Grounding, Representative};
use crate::matching::{subgraph_isomorphic, MatchMode, MatchOptions, MatchOutcome};
use crate::rules::{eval_rules, eval_rules_restricted, DnfRuleSet, Verdict};
use crate::wl::StructHash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// A predicate holds if some representative subgraph occurs in the graph.
    Structural,
    /// A predicate holds if a node with the predicate's structure satisfies
    /// the grounding rule on its orbit features.
    #[default]
    Grounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOutcome {
    pub graph_id: String,
    pub graph_index: usize,
    pub bits: Vec<bool>,
    pub satisfied: Vec<bool>,
    pub verdict: Verdict,
    pub y_hat: usize,
    pub timed_out: bool,
}

impl InferenceOutcome {
    pub fn correct(&self) -> bool {
        !self.timed_out && self.verdict == Verdict::Class(self.y_hat)
    }
}

/// Predicate bits of one graph in structural mode, plus whether any match
/// timed out. Only predicates flagged in `needed` are matched; the rest stay
/// false.
pub fn structural_bits(
    grounding: &Grounding,
    g: &Graph,
    needed: &[bool],
    opts: &MatchOptions,
) -> (Vec<bool>, bool) {
    let mut timed_out = false;
    let bits = grounding
        .predicates
        .iter()
        .map(|gp| {
            needed.get(gp.id).copied().unwrap_or(false)
                && gp.representatives.iter().any(|r| {
                    if opts.respect_labels && !could_contain(&r.graph, g) {
                        return false;
                    }
                    match subgraph_isomorphic(&r.graph, g, opts) {
                        MatchOutcome::Yes => true,
                        MatchOutcome::No => false,
                        MatchOutcome::Timeout => {
                            timed_out = true;
                            false
                        }
                    }
                })
        })
        .collect();
    (bits, timed_out)
}

pub fn evaluate_predicates(
    grounding: &Grounding,
    g: &Graph,
    hashes: &[StructHash],
    needed: &[bool],
    mode: InferenceMode,
    opts: &MatchOptions,
) -> (Vec<bool>, bool) {
    match mode {
        InferenceMode::Grounded => {
            let r = grounding.graph_bits(g, hashes);
            if r.fallback_nodes > 0 {
                log::debug!(
                    "graph {}: {} nodes above the orbit cap used structural matching",
                    g.id(),
                    r.fallback_nodes
                );
            }
            (r.bits, false)
        }
        InferenceMode::Structural => structural_bits(grounding, g, needed, opts),
    }
}

/// Rule verdicts for the given graphs against the GNN's predictions.
#[allow(clippy::too_many_arguments)]
pub fn infer(
    rules: &DnfRuleSet,
    grounding: &Grounding,
    dataset: &LabeledDataset,
    hashes: &[Vec<StructHash>],
    predictions: &[usize],
    graphs: &[usize],
    mode: InferenceMode,
    opts: &MatchOptions,
) -> Result<Vec<InferenceOutcome>> {
    let mut needed = vec![false; grounding.predicates.len()];
    for p in rules.used_predicates() {
        if let Some(slot) = needed.get_mut(p) {
            *slot = true;
        }
    }
    graphs
        .par_iter()
        .map(|&i| {
            let g = dataset.graph(i);
            let (bits, timed_out) =
                evaluate_predicates(grounding, g, &hashes[i], &needed, mode, opts);
            let e = eval_rules(rules, &bits)?;
            Ok(InferenceOutcome {
                graph_id: g.id().to_string(),
                graph_index: i,
                bits,
                satisfied: e.satisfied,
                verdict: e.verdict,
                y_hat: predictions[i],
                timed_out,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightBasis {
    /// Class frequencies among the evaluated graphs.
    #[default]
    Test,
    /// Class frequencies of the GNN's predictions on the train split.
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub value: f64,
    /// Match rate per class (None when the class has no evaluated graph).
    pub per_class: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub evaluated: usize,
    pub timeouts: usize,
}

/// Class-weighted agreement between rule verdicts and GNN predictions,
/// `sum_G w(ŷ_G) [verdict_G = ŷ_G] / sum_G w(ŷ_G)` with `w_c = 1 / n_c`.
/// Ambiguous verdicts count as wrong; timed-out graphs are excluded.
pub fn fid_d(
    outcomes: &[InferenceOutcome],
    num_classes: usize,
    basis_counts: Option<&[usize]>,
) -> Result<Fidelity> {
    let kept: Vec<&InferenceOutcome> = outcomes.iter().filter(|o| !o.timed_out).collect();
    if kept.is_empty() {
        return Err(Error::Contract("no evaluable outcomes for fidelity".into()));
    }
    let classes = num_classes.max(kept.iter().map(|o| o.y_hat + 1).max().unwrap_or(0));
    let mut counts = vec![0usize; classes];
    let mut hits = vec![0usize; classes];
    for o in &kept {
        counts[o.y_hat] += 1;
        hits[o.y_hat] += usize::from(o.correct());
    }
    let weight_counts: Vec<usize> = match basis_counts {
        Some(b) => (0..classes)
            .map(|c| b.get(c).copied().unwrap_or(0))
            .collect(),
        None => counts.clone(),
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..classes {
        if counts[c] == 0 {
            continue;
        }
        if weight_counts[c] == 0 {
            log::warn!("class {c} has no weight basis; its graphs are dropped from fidelity");
            continue;
        }
        let w = 1.0 / weight_counts[c] as f64;
        num += w * hits[c] as f64;
        den += w * counts[c] as f64;
    }
    if den == 0.0 {
        return Err(Error::Contract("fidelity has no weighted graphs".into()));
    }
    Ok(Fidelity {
        value: num / den,
        per_class: (0..classes)
            .map(|c| (counts[c] > 0).then(|| hits[c] as f64 / counts[c] as f64))
            .collect(),
        counts,
        evaluated: kept.len(),
        timeouts: outcomes.len() - kept.len(),
    })
}

/// Fraction of outcomes with `ŷ = c` still uniquely and correctly classified
/// when conjunctions mentioning unusable predicates are dropped.
pub fn coverage(
    rules: &DnfRuleSet,
    outcomes: &[InferenceOutcome],
    usable: &[bool],
    class: usize,
) -> Result<Option<f64>> {
    let d_c: Vec<&InferenceOutcome> = outcomes
        .iter()
        .filter(|o| !o.timed_out && o.y_hat == class)
        .collect();
    if d_c.is_empty() {
        return Ok(None);
    }
    let mut hit = 0usize;
    for o in &d_c {
        let e = eval_rules_restricted(rules, &o.bits, usable)?;
        hit += usize::from(e.verdict == Verdict::Class(class));
    }
    Ok(Some(hit as f64 / d_c.len() as f64))
}

/// `|∩ φ_i| / max |φ_i|` over the explanation subgraph sets of several runs.
pub fn stability(runs: &[BTreeSet<String>]) -> Result<f64> {
    if runs.len() < 2 {
        return Err(Error::Contract("stability needs at least two runs".into()));
    }
    if runs.iter().any(BTreeSet::is_empty) {
        log::warn!("a run produced no explanation subgraphs; stability is 0");
        return Ok(0.0);
    }
    let mut common = runs[0].clone();
    for r in &runs[1..] {
        common = common.intersection(r).cloned().collect();
    }
    let largest = runs.iter().map(BTreeSet::len).max().expect("non-empty");
    Ok(common.len() as f64 / largest as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub valid: usize,
    pub invalid: usize,
    pub timeouts: usize,
    /// `valid / (valid + invalid)`; timed-out fragments are excluded.
    pub fraction: f64,
    pub per_fragment: Vec<MatchOutcome>,
}

/// Options for validity checks: induced, label-respecting matching.
pub fn validity_options(timeout: Option<std::time::Duration>) -> MatchOptions {
    MatchOptions {
        mode: MatchMode::Induced,
        respect_labels: true,
        edge_labels: true,
        timeout,
    }
}

/// A fragment to validate, optionally naming the graph it was cut from so
/// that graph is searched first.
#[derive(Debug, Clone, Copy)]
pub struct Fragment<'a> {
    pub graph: &'a Graph,
    pub source: Option<&'a str>,
}

/// Node/edge counts and node-label multiset of `target` dominate those of
/// `pattern`; a cheap necessary condition for any embedding.
fn could_contain(pattern: &Graph, target: &Graph) -> bool {
    if pattern.num_nodes() > target.num_nodes() || pattern.num_edges() > target.num_edges() {
        return false;
    }
    match (pattern.node_labels(), target.node_labels()) {
        (Some(p), Some(t)) => {
            let mut need: BTreeMap<&str, usize> = BTreeMap::new();
            for l in p {
                *need.entry(l).or_default() += 1;
            }
            for l in t {
                if let Some(c) = need.get_mut(l.as_str()) {
                    *c = c.saturating_sub(1);
                }
            }
            need.values().all(|&c| c == 0)
        }
        _ => true,
    }
}

/// Whether a fragment occurs as an induced labeled subgraph of some graph.
pub fn fragment_valid(fragment: &Graph, graphs: &[&Graph], opts: &MatchOptions) -> MatchOutcome {
    let mut timed_out = false;
    for g in graphs {
        if opts.respect_labels && !could_contain(fragment, g) {
            continue;
        }
        match subgraph_isomorphic(fragment, g, opts) {
            MatchOutcome::Yes => return MatchOutcome::Yes,
            MatchOutcome::Timeout => timed_out = true,
            MatchOutcome::No => {}
        }
    }
    if timed_out {
        MatchOutcome::Timeout
    } else {
        MatchOutcome::No
    }
}

pub fn validity(
    fragments: &[Fragment<'_>],
    dataset: &LabeledDataset,
    opts: &MatchOptions,
) -> Validity {
    let train: Vec<&Graph> = dataset
        .indices(Split::Train)
        .into_iter()
        .map(|i| dataset.graph(i))
        .collect();
    let per_fragment: Vec<MatchOutcome> = fragments
        .par_iter()
        .map(|f| {
            let mut order = train.clone();
            if let Some(pos) = f
                .source
                .and_then(|s| order.iter().position(|g| g.id() == s))
            {
                order[..=pos].rotate_right(1);
            }
            fragment_valid(f.graph, &order, opts)
        })
        .collect();
    let count = |m: MatchOutcome| per_fragment.iter().filter(|&&x| x == m).count();
    let (valid, invalid, timeouts) = (
        count(MatchOutcome::Yes),
        count(MatchOutcome::No),
        count(MatchOutcome::Timeout),
    );
    Validity {
        valid,
        invalid,
        timeouts,
        fraction: if valid + invalid == 0 {
            0.0
        } else {
            valid as f64 / (valid + invalid) as f64
        },
        per_fragment,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CoverageBasis {
    /// A predicate is usable if its top representative is valid.
    #[default]
    Top1,
    /// A predicate is usable if any of its representatives is valid.
    Any,
}

/// Usability of each predicate from per-representative validity outcomes.
pub fn usable_predicates(
    reps: &[Vec<Representative>],
    valid: &[Vec<bool>],
    basis: CoverageBasis,
) -> Vec<bool> {
    reps.iter()
        .zip(valid)
        .map(|(r, v)| match basis {
            CoverageBasis::Top1 => !r.is_empty() && v[0],
            CoverageBasis::Any => v.iter().any(|&x| x),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    /// Class-balanced accuracy (mean per-class recall).
    pub accuracy: f64,
    pub raw_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Classes whose precision is undefined (never predicted).
    pub undefined_precision: Vec<usize>,
}

/// Macro-averaged metrics over the classes present in `ŷ`, with ambiguous
/// verdicts never counting as a prediction of any class.
pub fn weighted_prf(outcomes: &[InferenceOutcome], num_classes: usize) -> Prf {
    let kept: Vec<&InferenceOutcome> = outcomes.iter().filter(|o| !o.timed_out).collect();
    let classes = num_classes.max(kept.iter().map(|o| o.y_hat + 1).max().unwrap_or(0));
    let mut support = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut tp = vec![0usize; classes];
    for o in &kept {
        support[o.y_hat] += 1;
        if let Verdict::Class(c) = o.verdict {
            if c < classes {
                predicted[c] += 1;
                if c == o.y_hat {
                    tp[c] += 1;
                }
            }
        }
    }
    let present: Vec<usize> = (0..classes).filter(|&c| support[c] > 0).collect();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let recalls: Vec<f64> = present
        .iter()
        .map(|&c| tp[c] as f64 / support[c] as f64)
        .collect();
    let mut undefined = Vec::new();
    let mut precisions = Vec::new();
    let mut f1s = Vec::new();
    for (&c, &r) in present.iter().zip(&recalls) {
        if predicted[c] == 0 {
            log::warn!("precision undefined for class {c}: never predicted");
            undefined.push(c);
            continue;
        }
        let p = tp[c] as f64 / predicted[c] as f64;
        precisions.push(p);
        f1s.push(if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        });
    }
    let recall = mean(&recalls);
    Prf {
        accuracy: recall,
        raw_accuracy: if kept.is_empty() {
            0.0
        } else {
            tp.iter().sum::<usize>() as f64 / kept.len() as f64
        },
        precision: mean(&precisions),
        recall,
        f1: mean(&f1s),
        undefined_precision: undefined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fid_d: Fidelity,
    pub coverage: Vec<Option<f64>>,
    pub coverage_basis: CoverageBasis,
    pub stability: Option<f64>,
    pub validity: Validity,
    pub prf: Prf,
    pub ambiguous: usize,
    pub mode: InferenceMode,
    pub seconds: Option<f64>,
}

impl EvaluationReport {
    pub fn table(&self) -> String {
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        let mut s = String::new();
        let _ = writeln!(s, "{:<22} {:>10}", "metric", "value");
        let _ = writeln!(s, "{:<22} {:>10}", "Fid_D (%)", pct(self.fid_d.value));
        for (c, f) in self.fid_d.per_class.iter().enumerate() {
            if let Some(f) = f {
                let _ = writeln!(
                    s,
                    "{:<22} {:>10}",
                    format!("  class {c} match (%)"),
                    pct(*f)
                );
            }
        }
        if let Some(t) = self.seconds {
            let _ = writeln!(s, "{:<22} {:>10.3}", "time (s)", t);
        }
        for (c, cov) in self.coverage.iter().enumerate() {
            let v = cov.map_or("n/a".to_string(), pct);
            let _ = writeln!(s, "{:<22} {:>10}", format!("coverage class {c} (%)"), v);
        }
        let stab = self.stability.map_or("n/a".to_string(), pct);
        let _ = writeln!(s, "{:<22} {:>10}", "stability (%)", stab);
        let _ = writeln!(
            s,
            "{:<22} {:>10}",
            "validity (%)",
            pct(self.validity.fraction)
        );
        let _ = writeln!(s, "{:<22} {:>10}", "accuracy (%)", pct(self.prf.accuracy));
        let _ = writeln!(s, "{:<22} {:>10}", "precision (%)", pct(self.prf.precision));
        let _ = writeln!(s, "{:<22} {:>10}", "recall (%)", pct(self.prf.recall));
        let _ = writeln!(s, "{:<22} {:>10}", "F1 (%)", pct(self.prf.f1));
        let _ = writeln!(
            s,
            "{:<22} {:>10}",
            "graphs / timeouts",
            format!("{}/{}", self.fid_d.evaluated, self.fid_d.timeouts)
        );
        let _ = writeln!(s, "{:<22} {:>10}", "ambiguous", self.ambiguous);
        s
    }
}
