//! The meta-ensemble: one isolation forest per attack class, each with its own
//! anomaly threshold, combined by a min-score rule with zero-day rejection.

mod document;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{is_benign, LabeledRecord, NormalizationParams, BENIGN};
use crate::error::{Error, Result};
use crate::eval::metrics::{f1, precision, recall};
use crate::iforest::{build_forest, ForestParams, IsolationForest};
use crate::seeding::derive_seed;

pub use document::{export_model, import_model, load_model, save_model, ModelDocument, FORMAT_NAME, FORMAT_VERSION};

/// Threshold given to freshly trained entries before optimization.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId {
    pub name: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierEntry {
    pub class_id: ClassId,
    pub forest: IsolationForest,
    pub threshold: f64,
    pub weight: f64,
}

/// Preprocessing contract shared by every forest in a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSchema {
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams,
}

impl ModelSchema {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        if self.normalization.num_features() != self.feature_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} feature names but {} normalization ranges",
                self.feature_names.len(),
                self.normalization.num_features()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub training_seed: u64,
    pub forest_params: ForestParams,
    #[serde(default)]
    pub source_node: String,
    #[serde(default)]
    pub created_at_unix: Option<u64>,
    /// Set when entries were added without re-tuning thresholds.
    #[serde(default)]
    pub needs_reoptimization: bool,
    #[serde(default)]
    pub merged_from: Vec<String>,
    #[serde(default)]
    pub benign_forest: bool,
    /// Free-form effective settings echoed by the tooling that produced the model.
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Known {
        class: ClassId,
        score: f64,
    },
    /// Rejected by every forest: a zero-day candidate.
    Unknown,
}

impl Prediction {
    pub fn label(&self) -> &str {
        match self {
            Prediction::Known { class, .. } => &class.name,
            Prediction::Unknown => UNKNOWN_LABEL,
        }
    }

    pub fn class_index(&self) -> Option<usize> {
        match self {
            Prediction::Known { class, .. } => Some(class.index),
            Prediction::Unknown => None,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Prediction::Unknown)
    }
}

pub const UNKNOWN_LABEL: &str = "unknown";

/// The thresholded min-score rule.
///
/// Entry `i` accepts when `scores[i] <= thresholds[i]`. Among accepting entries the
/// smallest score wins; exact ties go to the larger weight, then the lower index.
/// `None` when nothing accepts.
pub fn decision_rule(scores: &[f64], thresholds: &[f64], weights: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..scores.len() {
        if scores[i] > thresholds[i] {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) if scores[i] < scores[b] || (scores[i] == scores[b] && weights[i] > weights[b]) => Some(i),
            keep => keep,
        };
    }
    best
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainOptions {
    /// Also grow a forest on benign records. Off by default: benign traffic is
    /// expected to be rejected as unknown.
    pub benign_forest: bool,
}

/// Grows one forest per class in `classes`, each on that class's records only.
pub fn train_per_class(
    records: &[LabeledRecord],
    classes: &[String],
    params: ForestParams,
    opts: TrainOptions,
) -> Result<Vec<(ClassId, IsolationForest)>> {
    let mut classes: Vec<String> = classes.iter().filter(|c| opts.benign_forest || !is_benign(c)).cloned().collect();
    if opts.benign_forest && !classes.iter().any(|c| is_benign(c)) {
        classes.push(BENIGN.to_owned());
    }
    if classes.is_empty() {
        return Err(Error::EmptyTrainingSet { class: None });
    }
    classes
        .into_par_iter()
        .enumerate()
        .map(|(index, name)| {
            let rows: Vec<&[f64]> = records.iter().filter(|r| r.label == name).map(|r| &*r.features).collect();
            if rows.is_empty() {
                return Err(Error::EmptyTrainingSet { class: Some(name) });
            }
            let forest = build_forest(&rows, params.with_seed(derive_seed(params.seed, index as u64)))?;
            Ok((ClassId { name, index }, forest))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaClassifier {
    entries: Vec<ClassifierEntry>,
    schema: ModelSchema,
    provenance: Provenance,
}

fn check_unit(what: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange { what: what.to_owned(), value });
    }
    Ok(())
}

impl MetaClassifier {
    pub fn new(entries: Vec<ClassifierEntry>, schema: ModelSchema, provenance: Provenance) -> Result<Self> {
        schema.validate()?;
        if entries.is_empty() {
            return Err(Error::InvalidConfig("a meta-classifier needs at least one entry".into()));
        }
        let mut names = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !names.insert(e.class_id.name.as_str()) {
                return Err(Error::DuplicateClass(e.class_id.name.clone()));
            }
            if is_benign(&e.class_id.name) && !provenance.benign_forest {
                return Err(Error::InvalidConfig("`benign` entry present but benign forests are disabled".into()));
            }
            if e.class_id.index != i {
                return Err(Error::InvalidConfig(format!("entry {i} carries index {}", e.class_id.index)));
            }
            if e.forest.num_features != schema.num_features() {
                return Err(Error::SchemaMismatch(format!(
                    "forest for `{}` expects {} features, schema has {}",
                    e.class_id.name,
                    e.forest.num_features,
                    schema.num_features()
                )));
            }
            check_unit(&format!("threshold of `{}`", e.class_id.name), e.threshold)?;
            check_unit(&format!("weight of `{}`", e.class_id.name), e.weight)?;
        }
        Ok(Self { entries, schema, provenance })
    }

    /// Wraps trained forests with a uniform initial threshold and zero weights.
    pub fn from_forests(
        forests: Vec<(ClassId, IsolationForest)>,
        schema: ModelSchema,
        provenance: Provenance,
        threshold: f64,
    ) -> Result<Self> {
        let entries = forests
            .into_iter()
            .map(|(class_id, forest)| ClassifierEntry { class_id, forest, threshold, weight: 0.0 })
            .collect();
        Self::new(entries, schema, provenance)
    }

    pub fn entries(&self) -> &[ClassifierEntry] {
        &self.entries
    }

    pub fn schema(&self) -> &ModelSchema {
        &self.schema
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.schema.num_features()
    }

    pub fn class_names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.class_id.name.as_str()).collect()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.class_id.name == name)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.threshold).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features() {
            return Err(Error::DimensionMismatch { expected: self.num_features(), actual: x.len() });
        }
        Ok(())
    }

    /// Per-entry anomaly scores, in entry order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        self.entries.iter().map(|e| e.forest.anomaly_score(x)).collect()
    }

    /// Applies the decision rule to precomputed scores.
    pub fn decide(&self, scores: &[f64]) -> Prediction {
        let thresholds = self.thresholds();
        let weights = self.weights();
        match decision_rule(scores, &thresholds, &weights) {
            Some(i) => Prediction::Known { class: self.entries[i].class_id.clone(), score: scores[i] },
            None => Prediction::Unknown,
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<Prediction> {
        Ok(self.decide(&self.scores(x)?))
    }

    /// Score matrix for a batch, one row per input. Dimensions are checked in order
    /// before any scoring so the first mismatch is the one reported.
    pub fn score_batch<V: AsRef<[f64]> + Sync>(&self, xs: &[V]) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            self.check_dims(x.as_ref())?;
        }
        xs.par_iter().map(|x| self.scores(x.as_ref())).collect()
    }

    pub fn classify_batch<V: AsRef<[f64]> + Sync>(&self, xs: &[V]) -> Result<Vec<Prediction>> {
        Ok(self.score_batch(xs)?.iter().map(|s| self.decide(s)).collect())
    }

    pub fn set_thresholds(&self, thresholds: &[f64]) -> Result<Self> {
        if thresholds.len() != self.entries.len() {
            return Err(Error::LengthMismatch { expected: self.entries.len(), actual: thresholds.len() });
        }
        for (e, &t) in self.entries.iter().zip(thresholds) {
            check_unit(&format!("threshold of `{}`", e.class_id.name), t)?;
        }
        let mut next = self.clone();
        for (e, &t) in next.entries.iter_mut().zip(thresholds) {
            e.threshold = t;
        }
        Ok(next)
    }

    pub fn set_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.entries.len() {
            return Err(Error::LengthMismatch { expected: self.entries.len(), actual: weights.len() });
        }
        for (e, &w) in self.entries.iter().zip(weights) {
            check_unit(&format!("weight of `{}`", e.class_id.name), w)?;
        }
        let mut next = self.clone();
        for (e, &w) in next.entries.iter_mut().zip(weights) {
            e.weight = w;
        }
        Ok(next)
    }

    /// Per-class F1 of the current classifier on `validation`.
    ///
    /// Records whose label owns no entry (benign, for instance) count only as
    /// false positives when some entry claims them.
    pub fn compute_weights(&self, validation: &[LabeledRecord]) -> Result<Vec<f64>> {
        for e in &self.entries {
            if !validation.iter().any(|r| r.label == e.class_id.name) {
                return Err(Error::MissingClassInValidation(e.class_id.name.clone()));
            }
        }
        let predictions = self.classify_batch(&validation.iter().map(|r| &*r.features).collect::<Vec<_>>())?;
        let k = self.entries.len();
        let (mut tp, mut fp, mut fns) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
        for (r, p) in validation.iter().zip(&predictions) {
            let truth = self.class_index(&r.label);
            let predicted = p.class_index();
            match (truth, predicted) {
                (Some(t), Some(q)) if t == q => tp[t] += 1,
                (t, q) => {
                    if let Some(t) = t {
                        fns[t] += 1;
                    }
                    if let Some(q) = q {
                        fp[q] += 1;
                    }
                }
            }
        }
        Ok((0..k).map(|i| f1(precision(tp[i], fp[i]), recall(tp[i], fns[i]))).collect())
    }

    /// Adds the entries of `external`, flagging the result for threshold re-optimization.
    pub fn merge(&self, external: &MetaClassifier) -> Result<Self> {
        if external.schema.feature_names != self.schema.feature_names {
            return Err(Error::SchemaMismatch("feature names differ".into()));
        }
        if external.schema.normalization != self.schema.normalization {
            return Err(Error::SchemaMismatch("normalization parameters differ".into()));
        }
        let mut entries = self.entries.clone();
        for e in &external.entries {
            if self.class_index(&e.class_id.name).is_some() {
                return Err(Error::DuplicateClass(e.class_id.name.clone()));
            }
            let mut e = e.clone();
            e.class_id.index = entries.len();
            entries.push(e);
        }
        let mut provenance = self.provenance.clone();
        provenance.needs_reoptimization = true;
        provenance.benign_forest |= external.provenance.benign_forest;
        let source = if external.provenance.source_node.is_empty() {
            external.class_names().join("+")
        } else {
            external.provenance.source_node.clone()
        };
        provenance.merged_from.push(source);
        Self::new(entries, self.schema.clone(), provenance)
    }
}
