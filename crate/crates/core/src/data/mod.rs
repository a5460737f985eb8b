//! Datasets: ingestion, normalization, scenario construction and synthetic data.

mod csv_io;
mod normalize;
mod split;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iforest::FeatureVector;

pub use csv_io::{load_csv, load_feature_rows, read_csv, read_feature_rows, write_csv, CsvOptions, FeatureRow};
pub use normalize::{normalize_apply, normalize_fit, NormalizationParams};
pub use split::{audit_split, fold_scenario, kfold_split, make_scenarios, ScenarioSplit, SplitRatios};
pub use synth::{
    gen_synthetic, ClassSpec, SyntheticConfig, BENIGN_PROFILES, DEFAULT_ATTACK_NAMES, DEFAULT_HALO_SPREAD,
    DEFAULT_HALO_WEIGHT, DEFAULT_SPREAD,
};

/// Label reserved for normal traffic.
pub const BENIGN: &str = "benign";
pub const DEFAULT_LABEL_COLUMN: &str = "label";

pub fn is_benign(label: &str) -> bool {
    label == BENIGN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    /// Stable identifier, the row index at load or generation time.
    pub id: usize,
    pub features: FeatureVector,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_names: Vec<String>,
    pub label_column: String,
    pub class_names: BTreeSet<String>,
}

impl DatasetSchema {
    pub fn new(feature_names: Vec<String>, label_column: impl Into<String>) -> Result<Self> {
        let label_column = label_column.into();
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate feature name `{name}`")));
            }
        }
        if seen.contains(label_column.as_str()) {
            return Err(Error::InvalidConfig(format!("label column `{label_column}` is also a feature")));
        }
        Ok(Self { feature_names, label_column, class_names: BTreeSet::new() })
    }

    pub fn with_classes<I, S>(mut self, classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.class_names = classes.into_iter().map(Into::into).collect();
        self
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub records: Vec<LabeledRecord>,
}

impl Dataset {
    /// Non-benign class names, sorted.
    pub fn attack_classes(&self) -> Vec<String> {
        let mut set: BTreeSet<&str> = self.records.iter().map(|r| r.label.as_str()).collect();
        set.extend(self.schema.class_names.iter().map(String::as_str));
        set.into_iter().filter(|c| !is_benign(c)).map(str::to_owned).collect()
    }

    pub fn has_benign(&self) -> bool {
        self.records.iter().any(|r| is_benign(&r.label))
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        class_counts(&self.records)
    }
}

pub fn class_counts(records: &[LabeledRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.label.clone()).or_insert(0) += 1;
    }
    counts
}

/// Groups records by label, preserving record order within each group.
pub fn group_by_label(records: &[LabeledRecord]) -> BTreeMap<String, Vec<&LabeledRecord>> {
    let mut groups: BTreeMap<String, Vec<&LabeledRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.label.clone()).or_default().push(r);
    }
    groups
}
