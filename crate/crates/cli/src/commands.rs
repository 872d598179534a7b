use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use logicx::cart::DecisionTree;
use logicx::dot::{graph_to_dot, orbits_to_dot};
use logicx::gnn::{embed, train, TrainConfig};
use logicx::grounding::{learn_grounding, Grounding, GroundingConfig};
use logicx::io::{
    load_dataset, load_embeddings, save_embeddings, save_jsonl, DatasetFormat, LoadOptions,
};
use logicx::metrics::{infer, CoverageBasis, InferenceMode, InferenceOutcome, WeightBasis};
use logicx::pipeline::{self, explanation_forms, PipelineConfig, Timings};
use logicx::predicate::{node_hashes, PredicateSet, Thresholds};
use logicx::rules::DnfRuleSet;
use logicx::synth::{generate, oracle_embeddings, Motif, SynthConfig};
use logicx::{EmbeddingTable, LabeledDataset, Split};

use crate::artifact::{self, RunEntry, StageTime};
use crate::{
    BasisArg, Cli, Command, DataArgs, EvaluateArgs, ExplanationArgs, ExportDotArgs, ExtractArgs,
    Global, GroundArgs, InferArgs, IngestArgs, ModeArg, SplitArg, SynthArgs, TrainArgs, WeightArg,
};

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub graphs: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub train: usize,
    pub test: usize,
    pub symbols: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredicatesPayload {
    pub radius: usize,
    pub embedding_tree_depth: usize,
    pub embedding_tree_accuracy: f64,
    pub embedding_tree_reached_target: bool,
    pub thresholds: Thresholds,
    pub predicates: PredicateSet,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RulesPayload {
    pub text: Vec<String>,
    pub rules: DnfRuleSet,
    pub tree: DecisionTree,
    pub matrix_rows: usize,
    pub matrix_columns: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InferencePayload {
    pub mode: InferenceMode,
    pub outcomes: Vec<InferenceOutcome>,
}

struct Run {
    command: &'static str,
    timings: Vec<StageTime>,
    artifacts: Vec<PathBuf>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Run {
            command,
            timings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn time(&mut self, stage: &str, seconds: f64) {
        self.timings.push(StageTime {
            stage: stage.to_string(),
            seconds,
        });
    }

    fn write<T: Serialize>(
        &mut self,
        g: &Global,
        name: &str,
        kind: &str,
        payload: &T,
    ) -> Result<PathBuf> {
        let path = g.out_dir.join(name);
        artifact::write(&path, kind, self.command, g.seed, payload)?;
        self.artifacts.push(path.clone());
        Ok(path)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    let jobs = g
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        bail!(logicx::Error::Config("--jobs must be positive".into()));
    }
    // A second global pool in the same process is an error; ignore it.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global();
    fs::create_dir_all(&g.out_dir).with_context(|| format!("creating {}", g.out_dir.display()))?;

    let mut run = match &cli.command {
        Command::Ingest(a) => ingest(&g, a)?,
        Command::TrainRefGnn(a) => train_ref_gnn(&g, a)?,
        Command::Extract(a) => extract(&g, a)?,
        Command::Ground(a) => ground(&g, a)?,
        Command::Infer(a) => infer_cmd(&g, a)?,
        Command::Evaluate(a) => evaluate(&g, a)?,
        Command::Synth(a) => synth(&g, a)?,
        Command::ExportDot(a) => export_dot(&g, a)?,
    };
    run.artifacts.sort();
    artifact::record_run(
        &g.out_dir,
        RunEntry {
            command: run.command.to_string(),
            args: std::env::args().skip(1).collect(),
            seed: g.seed,
            jobs,
            timings: run.timings,
            artifacts: run.artifacts,
        },
    )
}

fn or_default(path: &Option<PathBuf>, g: &Global, name: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| g.out_dir.join(name))
}

fn load_jsonl(path: &Path, seed: u64) -> Result<LabeledDataset> {
    let opts = LoadOptions {
        seed,
        ..LoadOptions::default()
    };
    load_dataset(path, DatasetFormat::Jsonl, &opts)
        .with_context(|| format!("loading dataset {}", path.display()))
}

fn load_data(g: &Global, d: &DataArgs) -> Result<(LabeledDataset, EmbeddingTable)> {
    let dataset = load_jsonl(&or_default(&d.dataset, g, "dataset.jsonl"), g.seed)?;
    let path = or_default(&d.embeddings, g, "embeddings.jsonl");
    let emb = load_embeddings(&path, &dataset)
        .with_context(|| format!("loading embeddings {}", path.display()))?;
    Ok((dataset, emb))
}

fn summary(d: &LabeledDataset) -> DatasetSummary {
    DatasetSummary {
        graphs: d.len(),
        classes: d.num_classes(),
        feature_dim: d.feature_dim(),
        train: d.indices(Split::Train).len(),
        test: d.indices(Split::Test).len(),
        symbols: d.symbol_table().map(<[String]>::to_vec),
    }
}

fn write_dataset(g: &Global, run: &mut Run, dataset: &LabeledDataset) -> Result<()> {
    let path = g.out_dir.join("dataset.jsonl");
    save_jsonl(dataset, &path)?;
    run.artifacts.push(path);
    run.write(g, "dataset.json", "dataset-summary", &summary(dataset))?;
    Ok(())
}

fn ingest(g: &Global, a: &IngestArgs) -> Result<Run> {
    let mut run = Run::new("ingest");
    let t = Instant::now();
    let format: DatasetFormat = a.format.parse()?;
    let opts = LoadOptions {
        seed: g.seed,
        test_fraction: a.test_fraction,
        symbols: a.symbols.clone(),
    };
    let dataset = load_dataset(&a.dataset, format, &opts)
        .with_context(|| format!("loading {}", a.dataset.display()))?;
    run.time("ingest", t.elapsed().as_secs_f64());
    write_dataset(g, &mut run, &dataset)?;
    println!(
        "{} graphs, {} classes",
        dataset.len(),
        dataset.num_classes()
    );
    Ok(run)
}

fn train_ref_gnn(g: &Global, a: &TrainArgs) -> Result<Run> {
    let mut run = Run::new("train-ref-gnn");
    let dataset = load_jsonl(&or_default(&a.dataset, g, "dataset.jsonl"), g.seed)?;
    let config = TrainConfig {
        hidden: a.hidden,
        layers: a.layers,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed: g.seed,
    };
    let t = Instant::now();
    let (model, report) = train(&dataset, &config)?;
    run.time("train", t.elapsed().as_secs_f64());
    let model_path = or_default(&a.out, g, "model.json");
    let mut text = serde_json::to_string(&model)?;
    text.push('\n');
    fs::write(&model_path, text).with_context(|| format!("writing {}", model_path.display()))?;
    run.artifacts.push(model_path);
    let emb = embed(&model, &dataset)?;
    let emb_path = or_default(&a.emb_out, g, "embeddings.jsonl");
    save_embeddings(&emb, &dataset, &emb_path)?;
    run.artifacts.push(emb_path);
    run.write(g, "train_report.json", "train-report", &report)?;
    println!(
        "train accuracy {:.4}, final loss {:.6}",
        report.train_accuracy, report.final_loss
    );
    Ok(run)
}

fn extract(g: &Global, a: &ExtractArgs) -> Result<Run> {
    let mut run = Run::new("extract");
    let (dataset, emb) = load_data(g, &a.data)?;
    let radius = a.layers.unwrap_or(emb.layers());
    let config = PipelineConfig {
        anchor_center: a.anchor_center,
        min_support: a.min_support,
        depth: a.depth,
        emb_target_accuracy: a.emb_target,
        emb_max_depth: a.emb_max_depth,
        emb_min_leaf: a.emb_min_leaf,
        ..PipelineConfig::default()
    }
    .with_radius(radius);
    let mut timings = Timings::default();
    let x = pipeline::extract(&dataset, &emb, &config, &mut timings)?;
    run.time("predicates", timings.predicates);
    run.time("rules", timings.rules);
    run.write(
        g,
        "predicates.json",
        "predicates",
        &PredicatesPayload {
            radius,
            embedding_tree_depth: x.embedding_tree_depth,
            embedding_tree_accuracy: x.embedding_tree_accuracy,
            embedding_tree_reached_target: x.embedding_tree_reached,
            thresholds: x.thresholds.clone(),
            predicates: x.predicates.clone(),
        },
    )?;
    let text: Vec<String> = (0..x.rules.classes.len())
        .map(|c| x.rules.render_class(c))
        .collect();
    for line in &text {
        println!("{line}");
    }
    run.write(
        g,
        "rules.json",
        "rules",
        &RulesPayload {
            text,
            rules: x.rules.clone(),
            tree: x.rule_tree.clone(),
            matrix_rows: x.matrix.rows.len(),
            matrix_columns: x.matrix.num_predicates,
        },
    )?;
    Ok(run)
}

fn load_predicates(path: &Path) -> Result<PredicatesPayload> {
    let mut p: PredicatesPayload = artifact::read(path, "predicates")?.payload;
    p.predicates.reindex()?;
    Ok(p)
}

fn load_rules(path: &Path) -> Result<RulesPayload> {
    Ok(artifact::read(path, "rules")?.payload)
}

fn load_grounding(path: &Path) -> Result<Grounding> {
    let g: Grounding = artifact::read(path, "grounding")?.payload;
    Ok(g.rebuild())
}

fn ground(g: &Global, a: &GroundArgs) -> Result<Run> {
    let mut run = Run::new("ground");
    let (dataset, emb) = load_data(g, &a.data)?;
    let preds = load_predicates(&or_default(&a.predicates, g, "predicates.json"))?;
    let config = GroundingConfig {
        radius: preds.radius,
        anchor_center: preds.predicates.config.anchor_center,
        orbit_cap: a.orbit_cap,
        depth: a.ground_depth,
        top_k: a.top_k,
    };
    let t = Instant::now();
    let hashes = node_hashes(&dataset, config.radius, config.anchor_center);
    let node_preds: Vec<Vec<Option<usize>>> = (0..dataset.len())
        .map(|i| preds.predicates.node_predicates(&hashes[i], emb.graph(i)))
        .collect();
    let grounding = learn_grounding(&dataset, &preds.predicates, &node_preds, config)?;
    run.time("grounding", t.elapsed().as_secs_f64());
    run.write(g, "grounding.json", "grounding", &grounding)?;
    println!("{} predicates grounded", grounding.predicates.len());
    Ok(run)
}

fn timeout(seconds: f64) -> Result<Option<Duration>> {
    if !seconds.is_finite() || seconds < 0.0 {
        bail!(logicx::Error::Config(format!(
            "invalid match timeout {seconds}"
        )));
    }
    Ok((seconds > 0.0).then(|| Duration::from_secs_f64(seconds)))
}

struct Loaded {
    dataset: LabeledDataset,
    emb: EmbeddingTable,
    rules: DnfRuleSet,
    grounding: Grounding,
    config: PipelineConfig,
}

fn load_explanation(g: &Global, a: &ExplanationArgs) -> Result<Loaded> {
    let (dataset, emb) = load_data(g, &a.data)?;
    let rules = load_rules(&or_default(&a.rules, g, "rules.json"))?.rules;
    let grounding = load_grounding(&or_default(&a.grounding, g, "grounding.json"))?;
    let mut config = PipelineConfig {
        anchor_center: grounding.config.anchor_center,
        grounding: grounding.config,
        match_timeout: timeout(a.match_timeout)?,
        mode: match a.match_mode {
            ModeArg::Grounded => InferenceMode::Grounded,
            ModeArg::Structural => InferenceMode::Structural,
        },
        ..PipelineConfig::default()
    };
    config = config.with_radius(grounding.config.radius);
    Ok(Loaded {
        dataset,
        emb,
        rules,
        grounding,
        config,
    })
}

fn infer_cmd(g: &Global, a: &InferArgs) -> Result<Run> {
    let mut run = Run::new("infer");
    let l = load_explanation(g, &a.explanation)?;
    let rows: Vec<usize> = match a.split {
        SplitArg::Train => l.dataset.indices(Split::Train),
        SplitArg::Test => l.dataset.indices(Split::Test),
        SplitArg::All => (0..l.dataset.len()).collect(),
    };
    let t = Instant::now();
    let hashes = node_hashes(&l.dataset, l.config.radius, l.config.anchor_center);
    let outcomes = infer(
        &l.rules,
        &l.grounding,
        &l.dataset,
        &hashes,
        l.emb.predictions(),
        &rows,
        l.config.mode,
        &l.config.match_options(),
    )?;
    run.time("inference", t.elapsed().as_secs_f64());
    let correct = outcomes.iter().filter(|o| o.correct()).count();
    println!("{correct}/{} verdicts agree with the model", outcomes.len());
    run.write(
        g,
        "inference.json",
        "inference",
        &InferencePayload {
            mode: l.config.mode,
            outcomes,
        },
    )?;
    Ok(run)
}

fn evaluate(g: &Global, a: &EvaluateArgs) -> Result<Run> {
    let mut run = Run::new("evaluate");
    let l = load_explanation(g, &a.explanation)?;
    let config = PipelineConfig {
        coverage_basis: match a.coverage_basis {
            BasisArg::Top1 => CoverageBasis::Top1,
            BasisArg::Any => CoverageBasis::Any,
        },
        weight_basis: match a.weight_basis {
            WeightArg::Test => WeightBasis::Test,
            WeightArg::Train => WeightBasis::Train,
        },
        ..l.config
    };
    let mut others = Vec::with_capacity(a.compare.len());
    for path in &a.compare {
        let forms: BTreeSet<String> = artifact::read(path, "forms")?.payload;
        others.push(forms);
    }
    let mut timings = Timings::default();
    let hashes = node_hashes(&l.dataset, config.radius, config.anchor_center);
    let (mut report, _) = pipeline::evaluate(
        &l.dataset,
        &l.emb,
        &hashes,
        &l.rules,
        &l.grounding,
        &config,
        &others,
        &mut timings,
    )?;
    run.time("inference", timings.inference);
    run.time("validity", timings.validity);
    print!("{}", report.table());
    report.seconds = None;
    run.write(g, "report.json", "evaluation-report", &report)?;
    let forms = explanation_forms(&l.rules, &l.grounding);
    run.write(g, "forms.json", "forms", &forms)?;
    Ok(run)
}

fn synth(g: &Global, a: &SynthArgs) -> Result<Run> {
    let mut run = Run::new("synth");
    let motifs = a
        .motifs
        .iter()
        .filter(|m| !m.is_empty())
        .map(|m| m.parse::<Motif>())
        .collect::<logicx::Result<Vec<_>>>()?;
    let config = SynthConfig {
        n_graphs: a.n_graphs,
        base_nodes: a.base_nodes,
        attachment: a.attachment,
        motifs,
        plant_probability: a.plant_probability,
        rule: a.rule.parse()?,
        test_fraction: a.test_fraction,
        seed: g.seed,
    };
    let t = Instant::now();
    let s = generate(&config)?;
    run.time("generate", t.elapsed().as_secs_f64());
    write_dataset(g, &mut run, &s.dataset)?;
    #[derive(Serialize)]
    struct Truth<'a> {
        config: &'a SynthConfig,
        motif_bits: &'a [[bool; 3]],
    }
    run.write(
        g,
        "synth.json",
        "synth-truth",
        &Truth {
            config: &config,
            motif_bits: &s.motif_bits,
        },
    )?;
    if let Some(noise) = a.oracle_noise {
        let emb = oracle_embeddings(&s, noise, a.layers, g.seed)?;
        let path = g.out_dir.join("embeddings.jsonl");
        save_embeddings(&emb, &s.dataset, &path)?;
        run.artifacts.push(path);
    }
    let positives = s.dataset.class_labels().iter().filter(|&&c| c == 1).count();
    println!("{} graphs, {positives} in class 1", s.dataset.len());
    Ok(run)
}

fn export_dot(g: &Global, a: &ExportDotArgs) -> Result<Run> {
    let mut run = Run::new("export-dot");
    let grounding = load_grounding(&or_default(&a.grounding, g, "grounding.json"))?;
    let dir = g.out_dir.join("dot");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    if let Some(p) = a.predicate {
        if p >= grounding.predicates.len() {
            bail!(logicx::Error::Config(format!(
                "predicate {p} out of range ({} predicates)",
                grounding.predicates.len()
            )));
        }
    }
    let mut emit = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        run.artifacts.push(path);
        Ok(())
    };
    for gp in &grounding.predicates {
        if a.predicate.is_some_and(|p| p != gp.id) {
            continue;
        }
        for (k, r) in gp.representatives.iter().enumerate() {
            let name = format!("p{}_rep{k}", gp.id);
            emit(
                format!("{name}.dot"),
                graph_to_dot(&r.graph, &name, Some(0)),
            )?;
        }
    }
    for (gi, group) in grounding.groups.iter().enumerate() {
        if a.predicate
            .is_some_and(|p| !group.predicate_ids.contains(&p))
        {
            continue;
        }
        for (vi, v) in group.variants.iter().enumerate() {
            if let (Some(t), Some(d)) = (&v.template, &v.decomposition) {
                let name = format!("group{gi}_structure{vi}");
                emit(format!("{name}.dot"), orbits_to_dot(t, d, &name))?;
            }
        }
    }
    let count = run.artifacts.len();
    println!("{count} DOT files in {}", dir.display());
    Ok(run)
}
