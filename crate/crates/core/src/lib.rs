//! Logic-rule explanations for graph neural networks.
//!
//! The pipeline mines hidden predicates from a trained GNN's node embeddings
//! (structural hash of the receptive field paired with a thresholded
//! activation pattern), learns class-wise DNF rules over those predicates,
//! grounds every predicate in the input space through orbit-aggregated
//! feature vectors and representative subgraphs, and evaluates the result
//! with data-grounded fidelity, coverage, stability and validity.

pub mod canon;
pub mod cart;
pub mod dot;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod grounding;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod predicate;
pub mod rules;
pub mod synth;
pub mod wl;

pub use cart::{DecisionTree, TreeParams};
pub use error::{Error, Result};
pub use graph::{EmbeddingTable, FeatureKind, Graph, LabeledDataset, Split};
pub use grounding::{Grounding, GroundingConfig};
pub use metrics::{EvaluationReport, InferenceMode};
pub use pipeline::{PipelineConfig, PipelineRun};
pub use predicate::{Predicate, PredicateSet};
pub use rules::{DnfRuleSet, Literal, Verdict};
pub use wl::StructHash;
