//! Zero-day aware intrusion detection with a meta-ensemble of isolation forests.
//!
//! One [`IsolationForest`] is grown per known attack class. Each forest gets its
//! own anomaly threshold, tuned jointly by particle swarm optimization, and the
//! [`MetaClassifier`] labels a flow with the lowest-scoring forest that accepts it,
//! or rejects it as unknown when none does.

pub mod data;
pub mod ensemble;
mod error;
pub mod eval;
pub mod iforest;
pub mod pso;
pub mod seeding;

pub use data::{Dataset, DatasetSchema, LabeledRecord, NormalizationParams, ScenarioSplit};
pub use ensemble::{ClassId, ClassifierEntry, MetaClassifier, ModelSchema, Prediction, Provenance};
pub use error::{Error, Result};
pub use eval::{ExperimentConfig, ExperimentReport, MetricsReport};
pub use iforest::{FeatureVector, ForestParams, ITreeNode, IsolationForest, IsolationTree};
pub use pso::{FitnessContext, OptimizeResult, PsoConfig};
