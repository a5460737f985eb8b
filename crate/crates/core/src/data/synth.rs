//! Gaussian flow-feature clusters for desk-scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetSchema, LabeledRecord, BENIGN, DEFAULT_LABEL_COLUMN};
use crate::error::{Error, Result};
use crate::iforest::FeatureVector;

/// Attack names used when classes are generated by count.
pub const DEFAULT_ATTACK_NAMES: [&str; 4] = ["eavesdropping", "gps_tracking", "wsmp_flood", "geo_wsmp_flood"];

/// Flow counts per class in the reference vehicular botnet capture (benign merges
/// normal IP and WSMP traffic).
const REFERENCE_FLOW_COUNTS: [(&str, usize); 5] =
    [(BENIGN, 1514), ("gps_tracking", 429), ("eavesdropping", 320), ("wsmp_flood", 143), ("geo_wsmp_flood", 24)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub count: usize,
    /// Generated from the layout when absent.
    pub center: Option<Vec<f64>>,
    /// Per-feature standard deviation of the cluster core.
    pub spread: f64,
    /// Sub-populations, each with its own signature features. Records cycle through them.
    #[serde(default = "one")]
    pub profiles: usize,
}

fn one() -> usize {
    1
}

/// Every class profile shares a background value on all features except its own
/// `signature_dims` features, where it sits far from the background. Each
/// coordinate comes from a tight core or, with probability `halo_weight`, a wider halo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub classes: Vec<ClassSpec>,
    /// 0 keeps signature values at full distance; 1 collapses them onto the background.
    pub overlap: f64,
    pub signature_dims: usize,
    pub background: f64,
    /// Fraction of coordinates drawn from the wide halo instead of the core.
    pub halo_weight: f64,
    pub halo_spread: f64,
    pub seed: u64,
}

pub const DEFAULT_SPREAD: f64 = 0.01;
pub const DEFAULT_HALO_WEIGHT: f64 = 0.1;
pub const DEFAULT_HALO_SPREAD: f64 = 0.08;
/// Generated benign traffic mixes two kinds of normal flows.
pub const BENIGN_PROFILES: usize = 2;

impl SyntheticConfig {
    pub fn new(dim: usize, classes: Vec<ClassSpec>, seed: u64) -> Self {
        Self {
            dim,
            classes,
            overlap: 0.0,
            signature_dims: 1,
            background: 0.5,
            halo_weight: DEFAULT_HALO_WEIGHT,
            halo_spread: DEFAULT_HALO_SPREAD,
            seed,
        }
    }

    /// `attacks` attack classes plus benign, `per_class` records each.
    pub fn balanced(attacks: usize, per_class: usize, dim: usize, seed: u64) -> Self {
        let mut classes: Vec<ClassSpec> = (0..attacks)
            .map(|i| ClassSpec {
                name: DEFAULT_ATTACK_NAMES.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("attack_{}", i + 1)),
                count: per_class,
                center: None,
                spread: DEFAULT_SPREAD,
                profiles: 1,
            })
            .collect();
        classes.push(ClassSpec {
            name: BENIGN.into(),
            count: per_class,
            center: None,
            spread: DEFAULT_SPREAD,
            profiles: BENIGN_PROFILES,
        });
        Self::new(dim, classes, seed)
    }

    /// Class sizes proportional to the reference flow counts, scaled to `total` records.
    pub fn reference_proportions(total: usize, dim: usize, seed: u64) -> Self {
        let sum: usize = REFERENCE_FLOW_COUNTS.iter().map(|(_, n)| n).sum();
        let classes = REFERENCE_FLOW_COUNTS
            .iter()
            .map(|(name, n)| ClassSpec {
                name: (*name).into(),
                count: ((total * n) as f64 / sum as f64).round().max(1.0) as usize,
                center: None,
                spread: DEFAULT_SPREAD,
                profiles: if *name == BENIGN { BENIGN_PROFILES } else { 1 },
            })
            .collect();
        Self::new(dim, classes, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::InvalidConfig("at least one class required".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::InvalidConfig(format!("overlap {} outside [0, 1]", self.overlap)));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::InvalidConfig(format!("background {} outside [0, 1]", self.background)));
        }
        if !(0.0..=1.0).contains(&self.halo_weight) || !(self.halo_spread >= 0.0 && self.halo_spread.is_finite()) {
            return Err(Error::InvalidConfig(
                "halo weight must lie in [0, 1] and halo spread be finite and non-negative".into(),
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.classes {
            if c.profiles == 0 {
                return Err(Error::InvalidConfig(format!("class `{}` needs at least one profile", c.name)));
            }
            if c.count == 0 {
                return Err(Error::InvalidConfig(format!("class `{}` has zero records", c.name)));
            }
            if c.name.is_empty() || !names.insert(c.name.as_str()) {
                return Err(Error::InvalidConfig(format!("class name `{}` empty or repeated", c.name)));
            }
            if !(c.spread >= 0.0 && c.spread.is_finite()) {
                return Err(Error::InvalidConfig(format!("class `{}` has invalid spread", c.name)));
            }
            if c.center.as_ref().is_some_and(|v| v.len() != self.dim) {
                return Err(Error::InvalidConfig(format!("class `{}` center has wrong dimension", c.name)));
            }
        }
        Ok(())
    }

    /// Profile centers per class: a given center is used for every profile,
    /// the rest come from the signature layout.
    pub fn centers(&self) -> Vec<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shrink = 1.0 - self.overlap;
        let mut slot = 0;
        self.classes
            .iter()
            .map(|spec| {
                (0..spec.profiles)
                    .map(|_| {
                        let mut center = vec![self.background; self.dim];
                        for _ in 0..self.signature_dims {
                            let far = rng.random_range(0.02..0.12);
                            let value = if rng.random_bool(0.5) { far } else { 1.0 - far };
                            center[slot % self.dim] = self.background + shrink * (value - self.background);
                            slot += 1;
                        }
                        spec.center.clone().unwrap_or(center)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Draws one clipped core-plus-halo Gaussian cluster per class. Records are
/// emitted class by class.
pub fn gen_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    config.validate()?;
    let centers = config.centers();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_DA7A);
    let unit = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut records = Vec::new();
    for (spec, profiles) in config.classes.iter().zip(&centers) {
        for n in 0..spec.count {
            let values: Vec<f64> = profiles[n % profiles.len()]
                .iter()
                .map(|&m| {
                    let halo = rng.random_bool(config.halo_weight);
                    let sd = if halo { config.halo_spread } else { spec.spread };
                    (m + sd * unit.sample(&mut rng)).clamp(0.0, 1.0)
                })
                .collect();
            records.push(LabeledRecord {
                id: records.len(),
                features: FeatureVector::new(values)?,
                label: spec.name.clone(),
            });
        }
    }

    let feature_names = (0..config.dim).map(|j| format!("f{j}")).collect();
    let schema = DatasetSchema::new(feature_names, DEFAULT_LABEL_COLUMN)?
        .with_classes(config.classes.iter().map(|c| c.name.clone()));
    Ok(Dataset { schema, records })
}
