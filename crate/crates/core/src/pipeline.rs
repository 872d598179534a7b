//! End-to-end orchestration: predicate extraction, rule learning,
//! grounding and evaluation, with per-stage wall times.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cart::DecisionTree;
use crate::error::Result;
use crate::graph::{EmbeddingTable, LabeledDataset, Split};
use crate::grounding::{learn_grounding, Grounding, GroundingConfig};
use crate::matching::{MatchMode, MatchOptions};
use crate::metrics::{
    coverage, fid_d, infer, usable_predicates, validity, validity_options, weighted_prf,
    CoverageBasis, EvaluationReport, Fragment, InferenceMode, InferenceOutcome, WeightBasis,
};
use crate::predicate::{
    informative_dims, mine, node_hashes, MinerConfig, PredicateSet, Thresholds,
};
use crate::rules::{build_matrix, learn_rules, ActivationMatrix, DnfRuleSet, Verdict};
use crate::wl::StructHash;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub radius: usize,
    pub anchor_center: bool,
    pub min_support: usize,
    /// Depth of the rule tree over the activation matrix.
    pub depth: usize,
    pub emb_target_accuracy: f64,
    pub emb_max_depth: usize,
    pub emb_min_leaf: usize,
    pub grounding: GroundingConfig,
    pub mode: InferenceMode,
    pub match_timeout: Option<Duration>,
    pub coverage_basis: CoverageBasis,
    pub weight_basis: WeightBasis,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            radius: 2,
            anchor_center: true,
            min_support: 1,
            depth: 10,
            emb_target_accuracy: 0.95,
            emb_max_depth: 8,
            emb_min_leaf: 5,
            grounding: GroundingConfig::default(),
            mode: InferenceMode::Grounded,
            match_timeout: Some(Duration::from_secs(10)),
            coverage_basis: CoverageBasis::Top1,
            weight_basis: WeightBasis::Test,
        }
    }
}

impl PipelineConfig {
    pub fn with_radius(mut self, radius: usize) -> Self {
        self.radius = radius;
        self.grounding.radius = radius;
        self
    }

    pub fn miner(&self) -> MinerConfig {
        MinerConfig {
            radius: self.radius,
            anchor_center: self.anchor_center,
            min_support: self.min_support,
        }
    }

    pub fn grounding(&self) -> GroundingConfig {
        GroundingConfig {
            radius: self.radius,
            anchor_center: self.anchor_center,
            ..self.grounding
        }
    }

    pub fn match_options(&self) -> MatchOptions {
        MatchOptions {
            mode: MatchMode::Monomorphism,
            respect_labels: true,
            edge_labels: true,
            timeout: self.match_timeout,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub predicates: f64,
    pub rules: f64,
    pub grounding: f64,
    pub inference: f64,
    pub validity: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.predicates + self.rules + self.grounding + self.inference + self.validity
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub thresholds: Thresholds,
    pub embedding_tree_depth: usize,
    pub embedding_tree_accuracy: f64,
    pub embedding_tree_reached: bool,
    pub hashes: Vec<Vec<StructHash>>,
    pub predicates: PredicateSet,
    /// Predicate of every node of every graph under its embedding.
    pub node_predicates: Vec<Vec<Option<usize>>>,
    pub matrix: ActivationMatrix,
    pub rules: DnfRuleSet,
    pub rule_tree: DecisionTree,
}

/// Mines predicates and learns rules at `config.depth`.
pub fn extract(
    dataset: &LabeledDataset,
    embeddings: &EmbeddingTable,
    config: &PipelineConfig,
    timings: &mut Timings,
) -> Result<Extraction> {
    let t = Instant::now();
    let split = informative_dims(
        dataset,
        embeddings,
        config.emb_target_accuracy,
        config.emb_max_depth,
        config.emb_min_leaf,
    )?;
    let hashes = node_hashes(dataset, config.radius, config.anchor_center);
    let predicates = mine(
        dataset,
        embeddings,
        &hashes,
        &split.thresholds,
        config.miner(),
    )?;
    let node_predicates: Vec<Vec<Option<usize>>> = (0..dataset.len())
        .map(|g| predicates.node_predicates(&hashes[g], embeddings.graph(g)))
        .collect();
    timings.predicates += t.elapsed().as_secs_f64();
    log::info!(
        "{} predicates over {} informative dimensions",
        predicates.len(),
        split.thresholds.dims.len()
    );

    let t = Instant::now();
    let matrix = build_matrix(&predicates, dataset, embeddings, &hashes)?;
    let (rules, rule_tree) = learn_rules(&matrix, config.depth)?;
    timings.rules += t.elapsed().as_secs_f64();

    Ok(Extraction {
        thresholds: split.thresholds,
        embedding_tree_depth: split.grown.depth,
        embedding_tree_accuracy: split.grown.train_accuracy,
        embedding_tree_reached: split.grown.reached_target,
        hashes,
        predicates,
        node_predicates,
        matrix,
        rules,
        rule_tree,
    })
}

pub fn ground(
    dataset: &LabeledDataset,
    extraction: &Extraction,
    config: &PipelineConfig,
    timings: &mut Timings,
) -> Result<Grounding> {
    let t = Instant::now();
    let g = learn_grounding(
        dataset,
        &extraction.predicates,
        &extraction.node_predicates,
        config.grounding(),
    )?;
    timings.grounding += t.elapsed().as_secs_f64();
    Ok(g)
}

/// Top-representative forms of every predicate the rules mention.
pub fn explanation_forms(rules: &DnfRuleSet, grounding: &Grounding) -> BTreeSet<String> {
    grounding
        .top_forms(&rules.used_predicates())
        .into_iter()
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    dataset: &LabeledDataset,
    embeddings: &EmbeddingTable,
    hashes: &[Vec<StructHash>],
    rules: &DnfRuleSet,
    grounding: &Grounding,
    config: &PipelineConfig,
    other_runs: &[BTreeSet<String>],
    timings: &mut Timings,
) -> Result<(EvaluationReport, Vec<InferenceOutcome>)> {
    let t = Instant::now();
    let test = dataset.indices(Split::Test);
    let outcomes = infer(
        rules,
        grounding,
        dataset,
        hashes,
        embeddings.predictions(),
        &test,
        config.mode,
        &config.match_options(),
    )?;
    timings.inference += t.elapsed().as_secs_f64();

    let classes = dataset.num_classes();
    let basis_counts: Option<Vec<usize>> = match config.weight_basis {
        WeightBasis::Test => None,
        WeightBasis::Train => {
            let mut c = vec![0usize; classes];
            for g in dataset.indices(Split::Train) {
                if let Some(slot) = c.get_mut(embeddings.prediction(g)) {
                    *slot += 1;
                }
            }
            Some(c)
        }
    };
    let fid = fid_d(&outcomes, classes, basis_counts.as_deref())?;

    let t = Instant::now();
    let used = rules.used_predicates();
    let opts = validity_options(config.match_timeout);
    let mut fragments = Vec::new();
    for &p in &used {
        for r in &grounding.predicates[p].representatives {
            fragments.push(Fragment {
                graph: &r.graph,
                source: Some(&r.source_graph),
            });
        }
    }
    let val = validity(&fragments, dataset, &opts);
    timings.validity += t.elapsed().as_secs_f64();
    let mut cursor = 0;
    let mut reps = Vec::with_capacity(grounding.predicates.len());
    let mut valid = Vec::with_capacity(grounding.predicates.len());
    for gp in &grounding.predicates {
        if used.binary_search(&gp.id).is_ok() {
            let k = gp.representatives.len();
            let flags = val.per_fragment[cursor..cursor + k]
                .iter()
                .map(|m| *m == crate::matching::MatchOutcome::Yes)
                .collect();
            cursor += k;
            reps.push(gp.representatives.clone());
            valid.push(flags);
        } else {
            reps.push(vec![]);
            valid.push(vec![]);
        }
    }
    let mut usable = usable_predicates(&reps, &valid, config.coverage_basis);
    for (p, u) in usable.iter_mut().enumerate() {
        if used.binary_search(&p).is_err() {
            *u = true;
        }
    }
    let coverage = (0..classes)
        .map(|c| coverage(rules, &outcomes, &usable, c))
        .collect::<Result<Vec<_>>>()?;

    let stability = if other_runs.is_empty() {
        None
    } else {
        let mut runs = vec![explanation_forms(rules, grounding)];
        runs.extend(other_runs.iter().cloned());
        Some(crate::metrics::stability(&runs)?)
    };
    let report = EvaluationReport {
        fid_d: fid,
        coverage,
        coverage_basis: config.coverage_basis,
        stability,
        validity: val,
        prf: weighted_prf(&outcomes, classes),
        ambiguous: outcomes
            .iter()
            .filter(|o| o.verdict == Verdict::Ambiguous)
            .count(),
        mode: config.mode,
        seconds: Some(timings.total()),
    };
    Ok((report, outcomes))
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub extraction: Extraction,
    pub grounding: Grounding,
    pub report: EvaluationReport,
    pub outcomes: Vec<InferenceOutcome>,
    pub timings: Timings,
}

pub fn run(
    dataset: &LabeledDataset,
    embeddings: &EmbeddingTable,
    config: &PipelineConfig,
) -> Result<PipelineRun> {
    let mut timings = Timings::default();
    let extraction = extract(dataset, embeddings, config, &mut timings)?;
    let grounding = ground(dataset, &extraction, config, &mut timings)?;
    let (report, outcomes) = evaluate(
        dataset,
        embeddings,
        &extraction.hashes,
        &extraction.rules,
        &grounding,
        config,
        &[],
        &mut timings,
    )?;
    Ok(PipelineRun {
        extraction,
        grounding,
        report,
        outcomes,
        timings,
    })
}
