//! Dataset and embedding file formats.
//!
//! * JSONL graphs: one object per line with `id`, `num_nodes`, `edges`, `x`
//!   and optional `node_labels`, `edge_labels`, `y`, `split`.
//! * TU directories: `DS_A.txt`, `DS_graph_indicator.txt`,
//!   `DS_graph_labels.txt` and optional `DS_node_labels.txt`, 1-indexed.
//! * Embedding JSONL: one `{"d_L", "L"}` header, one `{"graph_id", "node_id", "h"}`
//!   line per node and one `{"graph_id", "y_hat"}` line per graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EmbeddingTable, FeatureKind, Graph, GraphRecord, LabeledDataset, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    TuDir,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "tu-dir" | "tu" => Ok(DatasetFormat::TuDir),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Seed for the stratified split used when the input carries no split tags.
    pub seed: u64,
    pub test_fraction: f64,
    /// Symbols for one-hot feature dimensions.
    pub symbols: Option<Vec<String>>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            seed: 0,
            test_fraction: 0.2,
            symbols: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonlRecord {
    #[serde(flatten)]
    graph: GraphRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    options: &LoadOptions,
) -> Result<LabeledDataset> {
    let (graphs, labels, splits) = match format {
        DatasetFormat::Jsonl => read_jsonl(path)?,
        DatasetFormat::TuDir => {
            let (graphs, labels) = read_tu_dir(path)?;
            (graphs, labels, None)
        }
    };
    assemble(graphs, labels, splits, options)
}

fn assemble(
    graphs: Vec<Graph>,
    labels: Vec<usize>,
    splits: Option<Vec<Split>>,
    options: &LoadOptions,
) -> Result<LabeledDataset> {
    let dim = graphs.first().map_or(0, Graph::feature_dim);
    let feature_kinds = infer_feature_kinds(&graphs, dim);
    let (graphs, symbol_table) = attach_symbols(graphs, &feature_kinds, options.symbols.clone())?;
    let splits = match splits {
        Some(s) => s,
        None => stratified_split(&labels, options.test_fraction, options.seed),
    };
    LabeledDataset::new(graphs, labels, splits, feature_kinds, symbol_table)
}

/// A dimension is discrete when every value in it is exactly 0 or 1.
pub fn infer_feature_kinds(graphs: &[Graph], dim: usize) -> Vec<FeatureKind> {
    (0..dim)
        .map(|d| {
            let binary = graphs
                .iter()
                .flat_map(|g| g.features().iter().map(move |row| row[d]))
                .all(|x| x == 0.0 || x == 1.0);
            if binary {
                FeatureKind::DiscreteOneHot
            } else {
                FeatureKind::Continuous
            }
        })
        .collect()
}

fn is_one_hot(graphs: &[Graph]) -> bool {
    graphs.iter().all(|g| {
        g.features()
            .iter()
            .all(|row| row.iter().all(|&x| x == 0.0 || x == 1.0) && row.iter().sum::<f64>() == 1.0)
    })
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        })
        .0
}

/// Derives node symbols from one-hot features when absent, and infers the
/// dimension→symbol table when the labels are a consistent function of the
/// one-hot dimension.
fn attach_symbols(
    graphs: Vec<Graph>,
    kinds: &[FeatureKind],
    symbols: Option<Vec<String>>,
) -> Result<(Vec<Graph>, Option<Vec<String>>)> {
    let dim = kinds.len();
    if let Some(table) = &symbols {
        if table.len() != dim {
            return Err(Error::Config(format!(
                "symbol table has {} entries, features have {dim} dimensions",
                table.len()
            )));
        }
    }
    let one_hot = dim > 0 && is_one_hot(&graphs);
    if !one_hot {
        return Ok((graphs, None));
    }
    let all_unlabeled = graphs.iter().all(|g| g.node_labels().is_none());
    if all_unlabeled {
        let table = symbols.unwrap_or_else(|| (0..dim).map(|d| d.to_string()).collect());
        let graphs = graphs
            .into_iter()
            .map(|g| {
                let labels = g
                    .features()
                    .iter()
                    .map(|r| table[argmax(r)].clone())
                    .collect();
                g.with_node_labels(labels)
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((graphs, Some(table)));
    }
    if symbols.is_some() {
        return Ok((graphs, symbols));
    }
    let mut table: Vec<Option<String>> = vec![None; dim];
    for g in &graphs {
        let Some(labels) = g.node_labels() else {
            return Ok((graphs, None));
        };
        for (row, label) in g.features().iter().zip(labels) {
            let slot = &mut table[argmax(row)];
            match slot {
                Some(s) if s != label => return Ok((graphs, None)),
                Some(_) => {}
                None => *slot = Some(label.clone()),
            }
        }
    }
    let table = table
        .into_iter()
        .enumerate()
        .map(|(d, s)| s.unwrap_or_else(|| d.to_string()))
        .collect();
    Ok((graphs, Some(table)))
}

/// Stratified split: per class, a seeded shuffle puts `round(fraction * n_c)`
/// graphs in the test split.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> Vec<Split> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = vec![Split::Train; labels.len()];
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        for &i in members.iter().take(n_test) {
            splits[i] = Split::Test;
        }
    }
    splits
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

type RawDataset = (Vec<Graph>, Vec<usize>, Option<Vec<Split>>);

fn read_jsonl(path: &Path) -> Result<RawDataset> {
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let record: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let id = record.graph.id.clone();
        let y = record
            .y
            .ok_or_else(|| Error::validation(&id, "missing class label `y`"))?;
        graphs.push(Graph::try_from(record.graph)?);
        labels.push(y);
        splits.push(record.split);
    }
    let tagged = splits.iter().filter(|s| s.is_some()).count();
    let splits = if tagged == 0 {
        None
    } else if tagged == splits.len() {
        Some(splits.into_iter().flatten().collect())
    } else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "either every record or no record must carry `split`".into(),
        });
    };
    Ok((graphs, labels, splits))
}

fn tu_file(dir: &Path, prefix: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{prefix}_{suffix}.txt"))
}

fn tu_prefix(dir: &Path) -> Result<String> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(prefix) = name.strip_suffix("_graph_indicator.txt") {
            return Ok(prefix.to_string());
        }
    }
    Err(Error::Parse {
        path: dir.to_path_buf(),
        line: 0,
        message: "no *_graph_indicator.txt in directory".into(),
    })
}

fn parse_ints(path: &Path, expect: usize) -> Result<Vec<(usize, Vec<i64>)>> {
    read_lines(path)?
        .into_iter()
        .map(|(line_no, line)| {
            let values = line
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })?;
            if values.len() != expect {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("expected {expect} values, found {}", values.len()),
                });
            }
            Ok((line_no, values))
        })
        .collect()
}

/// Reads a TU-collection directory. Node labels become one-hot features over
/// the sorted distinct label values and also the node symbols; graph labels
/// are mapped to `0..C` in sorted order.
fn read_tu_dir(dir: &Path) -> Result<(Vec<Graph>, Vec<usize>)> {
    let prefix = tu_prefix(dir)?;
    let indicator_path = tu_file(dir, &prefix, "graph_indicator");
    let indicator = parse_ints(&indicator_path, 1)?;
    let labels_path = tu_file(dir, &prefix, "graph_labels");
    let raw_labels = parse_ints(&labels_path, 1)?;
    let num_graphs = raw_labels.len();

    // node -> (graph, local index)
    let mut node_graph = Vec::with_capacity(indicator.len());
    let mut counts = vec![0usize; num_graphs];
    for (line_no, v) in &indicator {
        let g = v[0];
        if g < 1 || g as usize > num_graphs {
            return Err(Error::Parse {
                path: indicator_path.clone(),
                line: *line_no,
                message: format!("graph index {g} outside 1..={num_graphs}"),
            });
        }
        let g = g as usize - 1;
        node_graph.push((g, counts[g]));
        counts[g] += 1;
    }

    let node_labels_path = tu_file(dir, &prefix, "node_labels");
    let node_labels = if node_labels_path.exists() {
        let raw = parse_ints(&node_labels_path, 1)?;
        if raw.len() != node_graph.len() {
            return Err(Error::Parse {
                path: node_labels_path,
                line: raw.len(),
                message: format!("{} node labels for {} nodes", raw.len(), node_graph.len()),
            });
        }
        Some(raw.into_iter().map(|(_, v)| v[0]).collect::<Vec<_>>())
    } else {
        None
    };

    let edges_path = tu_file(dir, &prefix, "A");
    let mut edges: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    let mut edge_seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (line_no, v) in parse_ints(&edges_path, 2)? {
        let (a, b) = (v[0], v[1]);
        let in_range = |x: i64| x >= 1 && (x as usize) <= node_graph.len();
        if !in_range(a) || !in_range(b) {
            return Err(Error::Parse {
                path: edges_path.clone(),
                line: line_no,
                message: format!("edge ({a}, {b}) references an unknown node"),
            });
        }
        let (ga, la) = node_graph[a as usize - 1];
        let (gb, lb) = node_graph[b as usize - 1];
        if ga != gb {
            return Err(Error::Parse {
                path: edges_path.clone(),
                line: line_no,
                message: format!("edge ({a}, {b}) crosses graphs"),
            });
        }
        if la == lb {
            return Err(Error::validation(
                (ga + 1).to_string(),
                format!("self-loop at node {la}"),
            ));
        }
        // Undirected edges are listed once per direction in TU files.
        let key = (a.min(b) as usize, a.max(b) as usize);
        let seen = edge_seen.entry(key).or_insert(0);
        *seen += 1;
        if *seen > 2 {
            return Err(Error::validation(
                (ga + 1).to_string(),
                format!("duplicate edge ({la}, {lb})"),
            ));
        }
        edges[ga].insert((la.min(lb), la.max(lb)));
    }

    let distinct_node_labels: Vec<i64> = node_labels
        .as_ref()
        .map(|l| {
            l.iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .unwrap_or_default();
    let mut features: Vec<Vec<Vec<f64>>> = counts.iter().map(|&n| Vec::with_capacity(n)).collect();
    let mut symbols: Vec<Vec<String>> = counts.iter().map(|&n| Vec::with_capacity(n)).collect();
    for (node, &(g, _)) in node_graph.iter().enumerate() {
        match &node_labels {
            Some(l) => {
                let pos = distinct_node_labels
                    .binary_search(&l[node])
                    .expect("label in set");
                let mut row = vec![0.0; distinct_node_labels.len()];
                row[pos] = 1.0;
                features[g].push(row);
                symbols[g].push(l[node].to_string());
            }
            None => features[g].push(Vec::new()),
        }
    }

    let distinct_graph_labels: Vec<i64> = raw_labels
        .iter()
        .map(|(_, v)| v[0])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = raw_labels
        .iter()
        .map(|(_, v)| {
            distinct_graph_labels
                .binary_search(&v[0])
                .expect("label in set")
        })
        .collect();

    let graphs = features
        .into_iter()
        .zip(symbols)
        .zip(edges)
        .enumerate()
        .map(|(g, ((x, sym), e))| {
            let n = counts[g];
            let labels = node_labels.as_ref().map(|_| sym);
            Graph::new(
                (g + 1).to_string(),
                n,
                e.into_iter().collect(),
                x,
                labels,
                None,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((graphs, labels))
}

/// Writes a dataset as JSONL including split tags, so that a reload is exact.
pub fn save_jsonl(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (i, g) in dataset.graphs().iter().enumerate() {
        let record = JsonlRecord {
            graph: GraphRecord::from(g.clone()),
            y: Some(dataset.class_labels()[i]),
            split: Some(dataset.splits()[i]),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbeddingLine {
    Header {
        #[serde(rename = "d_L")]
        dim: usize,
        #[serde(rename = "L")]
        layers: usize,
    },
    Node {
        graph_id: String,
        node_id: usize,
        h: Vec<f64>,
    },
    Prediction {
        graph_id: String,
        y_hat: usize,
    },
}

pub fn load_embeddings(path: &Path, dataset: &LabeledDataset) -> Result<EmbeddingTable> {
    let index: HashMap<&str, usize> = dataset
        .graphs()
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id(), i))
        .collect();
    let mut header = None;
    let mut rows: Vec<Vec<Option<Vec<f64>>>> = dataset
        .graphs()
        .iter()
        .map(|g| vec![None; g.num_nodes()])
        .collect();
    let mut predictions: Vec<Option<usize>> = vec![None; dataset.len()];
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (line_no, line) in read_lines(path)? {
        let parsed: EmbeddingLine =
            serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
        match parsed {
            EmbeddingLine::Header { dim, layers } => {
                if header.replace((dim, layers)).is_some() {
                    return Err(parse_err(line_no, "second header line".into()));
                }
            }
            EmbeddingLine::Node {
                graph_id,
                node_id,
                h,
            } => {
                let g = *index
                    .get(graph_id.as_str())
                    .ok_or_else(|| Error::Alignment {
                        graph: graph_id.clone(),
                        node: node_id,
                        message: "graph not in dataset".into(),
                    })?;
                let slot = rows[g].get_mut(node_id).ok_or_else(|| Error::Alignment {
                    graph: graph_id.clone(),
                    node: node_id,
                    message: "node index out of range".into(),
                })?;
                if slot.replace(h).is_some() {
                    return Err(Error::Alignment {
                        graph: graph_id,
                        node: node_id,
                        message: "embedding listed twice".into(),
                    });
                }
            }
            EmbeddingLine::Prediction { graph_id, y_hat } => {
                let g = *index
                    .get(graph_id.as_str())
                    .ok_or_else(|| Error::Alignment {
                        graph: graph_id.clone(),
                        node: 0,
                        message: "graph not in dataset".into(),
                    })?;
                if predictions[g].replace(y_hat).is_some() {
                    return Err(parse_err(
                        line_no,
                        format!("second y_hat for graph {graph_id}"),
                    ));
                }
            }
        }
    }
    let (dim, layers) =
        header.ok_or_else(|| parse_err(0, "missing {\"d_L\", \"L\"} header".into()))?;
    let mut nodes = Vec::with_capacity(rows.len());
    for (g, graph_rows) in rows.into_iter().enumerate() {
        let id = dataset.graph(g).id();
        let mut out = Vec::with_capacity(graph_rows.len());
        for (v, h) in graph_rows.into_iter().enumerate() {
            let h = h.ok_or_else(|| Error::Alignment {
                graph: id.to_string(),
                node: v,
                message: "missing embedding".into(),
            })?;
            if h.len() != dim {
                return Err(Error::validation(
                    id,
                    format!(
                        "node {v} embedding has dimension {}, header says {dim}",
                        h.len()
                    ),
                ));
            }
            out.push(h);
        }
        nodes.push(out);
    }
    let predictions = predictions
        .into_iter()
        .enumerate()
        .map(|(g, p)| {
            p.ok_or_else(|| Error::Alignment {
                graph: dataset.graph(g).id().to_string(),
                node: 0,
                message: "missing y_hat".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingTable::new(dim, layers, nodes, predictions)
}

/// Formats a value with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.8e}")
}

pub fn save_embeddings(
    table: &EmbeddingTable,
    dataset: &LabeledDataset,
    path: &Path,
) -> Result<()> {
    table.check_aligned(dataset)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(out, "{{\"d_L\":{},\"L\":{}}}", table.dim(), table.layers()).map_err(io_err)?;
    let mut line = String::new();
    for (g, graph) in dataset.graphs().iter().enumerate() {
        let id = serde_json::to_string(graph.id())?;
        for v in 0..graph.num_nodes() {
            line.clear();
            write!(line, "{{\"graph_id\":{id},\"node_id\":{v},\"h\":[").expect("string write");
            for (k, x) in table.node(g, v).iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format_sig9(*x));
            }
            line.push_str("]}");
            writeln!(out, "{line}").map_err(io_err)?;
        }
        writeln!(
            out,
            "{{\"graph_id\":{id},\"y_hat\":{}}}",
            table.prediction(g)
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
