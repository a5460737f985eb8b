//! Isolation trees and forests.
//!
//! Trees are grown on uniform subsamples drawn without replacement. Each tree
//! owns an independent ChaCha stream derived from the forest seed and its tree
//! index, so building in parallel yields the same forest as building serially.

use std::ops::Deref;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler-Mascheroni constant, as used by the harmonic-number approximation.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const DEFAULT_NUM_TREES: usize = 100;
pub const DEFAULT_SAMPLE_SIZE: usize = 256;

/// A row of finite feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Average path length of an unsuccessful BST search over `n` points.
///
/// Uses `H(i) ~ ln(i) + gamma`; zero for `n <= 1`.
pub fn c_factor(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let n = n as f64;
    2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
}

/// `ceil(log2(n))`, with 0 for `n <= 1`.
pub fn height_limit_for(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum ITreeNode {
    /// Points with `x[split_feature] < split_value` go left.
    Internal {
        split_feature: usize,
        split_value: f64,
        left: Box<ITreeNode>,
        right: Box<ITreeNode>,
    },
    External {
        size: usize,
    },
}

impl ITreeNode {
    pub fn depth(&self) -> usize {
        match self {
            ITreeNode::External { .. } => 0,
            ITreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Sum of external-node sizes, i.e. the number of training points.
    pub fn leaf_total(&self) -> usize {
        match self {
            ITreeNode::External { size } => *size,
            ITreeNode::Internal { left, right, .. } => left.leaf_total() + right.leaf_total(),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            ITreeNode::External { .. } => None,
            ITreeNode::Internal { split_feature, left, right, .. } => {
                [Some(*split_feature), left.max_feature(), right.max_feature()].into_iter().flatten().max()
            }
        }
    }
}

/// Recursively grows an isolation tree over `sample`.
pub fn build_itree<R: Rng + ?Sized>(sample: &[&[f64]], depth: usize, height_limit: usize, rng: &mut R) -> ITreeNode {
    if depth >= height_limit || sample.len() <= 1 {
        return ITreeNode::External { size: sample.len() };
    }

    let dims = sample[0].len();
    let mut splittable: Vec<(usize, f64, f64)> = Vec::with_capacity(dims);
    for f in 0..dims {
        let (lo, hi) =
            sample.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[f]), hi.max(x[f])));
        if hi > lo {
            splittable.push((f, lo, hi));
        }
    }
    if splittable.is_empty() {
        return ITreeNode::External { size: sample.len() };
    }

    let (feature, lo, hi) = splittable[rng.random_range(0..splittable.len())];
    let split_value = loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            break v;
        }
    };

    let (left, right): (Vec<&[f64]>, Vec<&[f64]>) = sample.iter().copied().partition(|x| x[feature] < split_value);

    ITreeNode::Internal {
        split_feature: feature,
        split_value,
        left: Box::new(build_itree(&left, depth + 1, height_limit, rng)),
        right: Box::new(build_itree(&right, depth + 1, height_limit, rng)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub root: ITreeNode,
    pub height_limit: usize,
    pub sample_size: usize,
}

impl IsolationTree {
    /// Edges from the root to the reached leaf plus `c_factor(leaf size)`.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        let mut edges = 0usize;
        loop {
            match node {
                ITreeNode::External { size } => return edges as f64 + c_factor(*size),
                ITreeNode::Internal { split_feature, split_value, left, right } => {
                    node = if x[*split_feature] < *split_value { left } else { right };
                    edges += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { num_trees: DEFAULT_NUM_TREES, sample_size: DEFAULT_SAMPLE_SIZE, seed: 0 }
    }
}

impl ForestParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    /// Effective subsample size, `min(S, |data|)`.
    pub sample_size: usize,
    pub num_trees: usize,
    pub num_features: usize,
    pub rng_seed: u64,
    pub trees: Vec<IsolationTree>,
}

/// Random stream for tree `tree_index` of a forest seeded with `seed`.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

/// Builds `num_trees` trees, each on its own subsample of `min(S, |data|)` rows.
pub fn build_forest<V: AsRef<[f64]> + Sync>(data: &[V], params: ForestParams) -> Result<IsolationForest> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet { class: None });
    }
    if params.num_trees == 0 || params.sample_size == 0 {
        return Err(Error::InvalidConfig("num_trees and sample_size must be at least 1".into()));
    }
    let num_features = data[0].as_ref().len();
    if let Some(bad) = data.iter().find(|x| x.as_ref().len() != num_features) {
        return Err(Error::DimensionMismatch { expected: num_features, actual: bad.as_ref().len() });
    }

    let sample_size = params.sample_size.min(data.len());
    let height_limit = height_limit_for(sample_size);

    let trees = (0..params.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let sample: Vec<&[f64]> =
                index::sample(&mut rng, data.len(), sample_size).into_iter().map(|i| data[i].as_ref()).collect();
            IsolationTree { root: build_itree(&sample, 0, height_limit, &mut rng), height_limit, sample_size }
        })
        .collect();

    Ok(IsolationForest { sample_size, num_trees: params.num_trees, num_features, rng_seed: params.seed, trees })
}

impl IsolationForest {
    pub fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(Error::DimensionMismatch { expected: self.num_features, actual: x.len() });
        }
        Ok(())
    }

    /// Mean path length over all trees, `E(h(x))`.
    pub fn mean_path_length(&self, x: &[f64]) -> Result<f64> {
        self.check_dims(x)?;
        let total: f64 = self.trees.iter().map(|t| t.path_length(x)).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub fn anomaly_score(&self, x: &[f64]) -> Result<f64> {
        Ok(score_from_path_length(self.mean_path_length(x)?, self.sample_size))
    }

    /// Structural consistency check used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() || self.trees.len() != self.num_trees {
            return Err(Error::CorruptDocument(format!(
                "forest declares {} trees but holds {}",
                self.num_trees,
                self.trees.len()
            )));
        }
        let height_limit = height_limit_for(self.sample_size);
        for (i, tree) in self.trees.iter().enumerate() {
            if tree.sample_size != self.sample_size || tree.height_limit != height_limit {
                return Err(Error::CorruptDocument(format!("tree {i} disagrees with forest sample size")));
            }
            if tree.root.depth() > tree.height_limit {
                return Err(Error::CorruptDocument(format!("tree {i} exceeds its height limit")));
            }
            if tree.root.max_feature().is_some_and(|f| f >= self.num_features) {
                return Err(Error::CorruptDocument(format!("tree {i} splits on an unknown feature")));
            }
        }
        Ok(())
    }
}

/// `2^(-E(h(x)) / c(n))`.
///
/// With `n <= 1` every path has length zero and the score is 1.
pub fn score_from_path_length(mean_path_length: f64, n: usize) -> f64 {
    let c = c_factor(n);
    if c == 0.0 {
        return 1.0;
    }
    (-mean_path_length / c).exp2()
}
