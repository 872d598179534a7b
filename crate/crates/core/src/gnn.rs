//! Minimal GCN reference model with hand-derived gradients.
//!
//! Each layer computes `H <- ReLU(Â H W)` with `Â = D^-1/2 (A + I) D^-1/2`;
//! the graph embedding is the mean of final node embeddings, followed by a
//! linear readout trained with softmax cross-entropy.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EmbeddingTable, Graph, LabeledDataset, Split};
use crate::io::save_embeddings;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub layers: Vec<Array2<f64>>,
    pub readout: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    layers: Vec<Vec<Vec<f64>>>,
    readout: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], expect_cols: Option<usize>) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(expect_cols.unwrap_or(0), Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Contract("ragged weight matrix".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((r, c), flat).map_err(|e| Error::Contract(e.to_string()))
}

impl Serialize for GcnModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelRecord {
            layers: self.layers.iter().map(to_rows).collect(),
            readout: to_rows(&self.readout),
            bias: self.bias.to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GcnModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = ModelRecord::deserialize(d)?;
        let layers = rec
            .layers
            .iter()
            .map(|l| from_rows(l, None))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let readout = from_rows(&rec.readout, Some(rec.bias.len())).map_err(D::Error::custom)?;
        let model = GcnModel {
            layers,
            readout,
            bias: Array1::from(rec.bias),
        };
        model.validate().map_err(D::Error::custom)?;
        Ok(model)
    }
}

/// Per-graph forward result.
#[derive(Debug, Clone)]
pub struct Forward {
    pub node_embeddings: Array2<f64>,
    pub graph_embedding: Array1<f64>,
    pub logits: Array1<f64>,
    pub predicted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 16,
            layers: 2,
            learning_rate: 0.1,
            epochs: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Array2<f64>>,
    pub readout: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Gradients {
    fn zeros_like(m: &GcnModel) -> Self {
        Gradients {
            layers: m
                .layers
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            readout: Array2::zeros(m.readout.raw_dim()),
            bias: Array1::zeros(m.bias.len()),
        }
    }

    fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.scaled_add(scale, b);
        }
        self.readout.scaled_add(scale, &other.readout);
        self.bias.scaled_add(scale, &other.bias);
    }

    /// All entries flattened in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.layers.iter().flat_map(|w| w.iter().copied()).collect();
        out.extend(self.readout.iter().copied());
        out.extend(self.bias.iter().copied());
        out
    }
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let s = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-s..=s))
}

/// Â X for one graph, using symmetric normalization with self-loops.
pub fn propagate(g: &Graph, x: &Array2<f64>) -> Array2<f64> {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut out = Array2::zeros(x.raw_dim());
    for v in 0..n {
        let mut row = out.row_mut(v);
        row.scaled_add(inv_sqrt[v] * inv_sqrt[v], &x.row(v));
        for w in g.neighbors(v) {
            row.scaled_add(inv_sqrt[v] * inv_sqrt[w], &x.row(w));
        }
    }
    out
}

fn feature_matrix(g: &Graph) -> Array2<f64> {
    let d = g.feature_dim();
    Array2::from_shape_fn((g.num_nodes(), d), |(v, k)| g.feature(v)[k])
}

fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(v: &Array1<f64>) -> Array1<f64> {
    let m = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = v.mapv(|x| (x - m).exp());
    let s = e.sum();
    e / s
}

struct Trace {
    propagated: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    forward: Forward,
}

impl GcnModel {
    /// Glorot-uniform weights and zero bias.
    pub fn init(input_dim: usize, hidden: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::Config("a GCN needs at least one layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len());
        let mut fan_in = input_dim;
        for &h in hidden {
            layers.push(glorot(&mut rng, fan_in, h));
            fan_in = h;
        }
        let readout = glorot(&mut rng, fan_in, num_classes);
        Ok(GcnModel {
            layers,
            readout,
            bias: Array1::zeros(num_classes),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Contract("model has no layers".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::Contract("layer dimensions do not chain".into()));
            }
        }
        let last = self.layers.last().expect("non-empty");
        if last.ncols() != self.readout.nrows() || self.readout.ncols() != self.bias.len() {
            return Err(Error::Contract("readout dimensions do not match".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.readout.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn trace(&self, g: &Graph) -> Result<Trace> {
        if g.feature_dim() != self.input_dim() && g.num_nodes() > 0 {
            return Err(Error::Contract(format!(
                "graph {} has feature dimension {}, model expects {}",
                g.id(),
                g.feature_dim(),
                self.input_dim()
            )));
        }
        let mut h = feature_matrix(g);
        if g.num_nodes() == 0 {
            h = Array2::zeros((0, self.input_dim()));
        }
        let mut propagated = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for w in &self.layers {
            let p = propagate(g, &h);
            let z = p.dot(w);
            h = z.mapv(|x| x.max(0.0));
            propagated.push(p);
            pre_activations.push(z);
        }
        let graph_embedding = if g.num_nodes() == 0 {
            Array1::zeros(self.embedding_dim())
        } else {
            h.mean_axis(Axis(0)).expect("non-empty")
        };
        let logits = graph_embedding.dot(&self.readout) + &self.bias;
        let predicted = argmax(&logits);
        Ok(Trace {
            propagated,
            pre_activations,
            forward: Forward {
                node_embeddings: h,
                graph_embedding,
                logits,
                predicted,
            },
        })
    }

    pub fn forward(&self, g: &Graph) -> Result<Forward> {
        Ok(self.trace(g)?.forward)
    }

    /// Cross-entropy loss and parameter gradients for one graph.
    fn graph_gradients(&self, g: &Graph, label: usize) -> Result<(f64, Gradients, bool)> {
        let t = self.trace(g)?;
        let probs = softmax(&t.forward.logits);
        let loss = -probs[label].max(1e-300).ln();
        let mut dlogits = probs;
        dlogits[label] -= 1.0;
        let mut grads = Gradients::zeros_like(self);
        let ge = &t.forward.graph_embedding;
        for i in 0..ge.len() {
            for c in 0..dlogits.len() {
                grads.readout[[i, c]] = ge[i] * dlogits[c];
            }
        }
        grads.bias.assign(&dlogits);
        let n = g.num_nodes();
        if n > 0 {
            let dg = self.readout.dot(&dlogits) / n as f64;
            let mut dh = Array2::from_shape_fn((n, dg.len()), |(_, k)| dg[k]);
            for l in (0..self.layers.len()).rev() {
                let z = &t.pre_activations[l];
                let dz = &dh * &z.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                grads.layers[l] = t.propagated[l].t().dot(&dz);
                if l > 0 {
                    dh = propagate(g, &dz.dot(&self.layers[l].t()));
                }
            }
        }
        Ok((loss, grads, t.forward.predicted == label))
    }

    /// Mean loss and gradients over the given graphs.
    pub fn loss_and_gradients(
        &self,
        dataset: &LabeledDataset,
        rows: &[usize],
    ) -> Result<(f64, Gradients)> {
        let (loss, grads, _) = self.batch(dataset, rows)?;
        Ok((loss, grads))
    }

    fn batch(&self, dataset: &LabeledDataset, rows: &[usize]) -> Result<(f64, Gradients, usize)> {
        let per_graph: Vec<(f64, Gradients, bool)> = rows
            .par_iter()
            .map(|&i| self.graph_gradients(dataset.graph(i), dataset.class_labels()[i]))
            .collect::<Result<_>>()?;
        let scale = 1.0 / rows.len().max(1) as f64;
        let mut total = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let mut correct = 0;
        for (l, g, hit) in &per_graph {
            loss += l * scale;
            total.add_scaled(g, scale);
            correct += usize::from(*hit);
        }
        Ok((loss, total, correct))
    }

    /// Parameters flattened in the same order as `Gradients::flatten`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.layers.iter().flat_map(|w| w.iter().copied()).collect();
        out.extend(self.readout.iter().copied());
        out.extend(self.bias.iter().copied());
        out
    }

    /// Mutable access to the `i`-th flattened parameter.
    pub fn parameter_mut(&mut self, mut i: usize) -> &mut f64 {
        for w in &mut self.layers {
            if i < w.len() {
                let c = w.ncols();
                return &mut w[[i / c, i % c]];
            }
            i -= w.len();
        }
        if i < self.readout.len() {
            let c = self.readout.ncols();
            return &mut self.readout[[i / c, i % c]];
        }
        i -= self.readout.len();
        &mut self.bias[i]
    }

    fn step(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.layers.iter_mut().zip(&grads.layers) {
            w.scaled_add(-lr, g);
        }
        self.readout.scaled_add(-lr, &grads.readout);
        self.bias.scaled_add(-lr, &grads.bias);
    }
}

/// Full-batch gradient descent on the train split.
pub fn train(dataset: &LabeledDataset, config: &TrainConfig) -> Result<(GcnModel, TrainReport)> {
    let rows = dataset.indices(Split::Train);
    let mut classes: Vec<usize> = rows.iter().map(|&i| dataset.class_labels()[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Config(
            "training split needs at least two classes".into(),
        ));
    }
    if config.layers == 0 {
        return Err(Error::Config("layer count must be at least 1".into()));
    }
    let hidden = vec![config.hidden; config.layers];
    let mut model = GcnModel::init(
        dataset.feature_dim(),
        &hidden,
        dataset.num_classes(),
        config.seed,
    )?;
    let mut final_loss = f64::NAN;
    for epoch in 0..config.epochs {
        let (loss, grads, _) = model.batch(dataset, &rows)?;
        if !loss.is_finite() || grads.flatten().iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch, loss });
        }
        model.step(&grads, config.learning_rate);
        final_loss = loss;
        if epoch % 50 == 0 {
            log::debug!("epoch {epoch}: loss {loss:.6}");
        }
    }
    let (loss, _, correct) = model.batch(dataset, &rows)?;
    if config.epochs > 0 {
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch: config.epochs,
                loss,
            });
        }
        final_loss = loss;
    }
    let report = TrainReport {
        epochs: config.epochs,
        final_loss,
        train_accuracy: correct as f64 / rows.len() as f64,
    };
    log::info!(
        "trained GCN: loss {:.6}, train accuracy {:.4}",
        report.final_loss,
        report.train_accuracy
    );
    Ok((model, report))
}

/// Final-layer node embeddings and predictions for every graph.
pub fn embed(model: &GcnModel, dataset: &LabeledDataset) -> Result<EmbeddingTable> {
    let outputs: Vec<Forward> = dataset
        .graphs()
        .par_iter()
        .map(|g| model.forward(g))
        .collect::<Result<_>>()?;
    let nodes = outputs
        .iter()
        .map(|f| {
            f.node_embeddings
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect()
        })
        .collect();
    let predictions = outputs.iter().map(|f| f.predicted).collect();
    EmbeddingTable::new(
        model.embedding_dim(),
        model.num_layers(),
        nodes,
        predictions,
    )
}

/// Writes the embedding file for `dataset` and returns the in-memory table.
pub fn export_embeddings(
    model: &GcnModel,
    dataset: &LabeledDataset,
    path: &Path,
) -> Result<EmbeddingTable> {
    let table = embed(model, dataset)?;
    save_embeddings(&table, dataset, path)?;
    Ok(table)
}
