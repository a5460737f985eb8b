use serde::{Deserialize, Serialize};

use super::LabeledRecord;
use crate::error::{Error, Result};
use crate::iforest::FeatureVector;

/// Per-feature min/max fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationParams {
    /// Identity transform for data already in `[0, 1]`.
    pub fn unit(num_features: usize) -> Self {
        Self { mins: vec![0.0; num_features], maxs: vec![1.0; num_features] }
    }

    pub fn num_features(&self) -> usize {
        self.mins.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mins.len() != self.maxs.len() {
            return Err(Error::SchemaMismatch("normalization min/max lengths differ".into()));
        }
        if let Some(i) = (0..self.mins.len())
            .find(|&i| self.mins[i].is_nan() || self.maxs[i].is_nan() || self.mins[i] > self.maxs[i])
        {
            return Err(Error::SchemaMismatch(format!("normalization min > max for feature {i}")));
        }
        Ok(())
    }

    /// Min-max scales into `[0, 1]`, clamping out-of-range values.
    /// Constant features map to 0.
    pub fn apply_values(&self, values: &[f64]) -> Result<FeatureVector> {
        if values.len() != self.mins.len() {
            return Err(Error::DimensionMismatch { expected: self.mins.len(), actual: values.len() });
        }
        let scaled = values
            .iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        FeatureVector::new(scaled)
    }
}

pub fn normalize_fit(train: &[LabeledRecord]) -> Result<NormalizationParams> {
    let first = train.first().ok_or(Error::EmptyTrainingSet { class: None })?;
    let d = first.features.len();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for r in train {
        if r.features.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: r.features.len() });
        }
        for (j, &v) in r.features.iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    Ok(NormalizationParams { mins, maxs })
}

pub fn normalize_apply(params: &NormalizationParams, records: &[LabeledRecord]) -> Result<Vec<LabeledRecord>> {
    records
        .iter()
        .map(|r| Ok(LabeledRecord { id: r.id, features: params.apply_values(&r.features)?, label: r.label.clone() }))
        .collect()
}
