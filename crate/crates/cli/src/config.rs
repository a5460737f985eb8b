use std::fs;
use std::path::Path;

use isoswarm::data::SplitRatios;
use isoswarm::eval::{ProtocolConfig, DEFAULT_NAIVE_THRESHOLD};
use isoswarm::{Error, ForestParams, PsoConfig, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub trees: usize,
    pub sample_size: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        let f = ForestParams::default();
        Self { trees: f.num_trees, sample_size: f.sample_size }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSection {
    pub population: usize,
    pub generations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max: f64,
    pub warm_start: bool,
}

impl Default for PsoSection {
    fn default() -> Self {
        let p = PsoConfig::default();
        Self {
            population: p.population,
            generations: p.generations,
            inertia: p.inertia,
            c1: p.c1,
            c2: p.c2,
            v_max: p.v_max,
            warm_start: p.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub folds: usize,
    pub ratios: SplitRatios,
    pub naive_threshold: f64,
    pub scenarios: Option<Vec<String>>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self { folds: p.folds, ratios: p.ratios, naive_threshold: p.naive_threshold, scenarios: p.scenarios }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub label_column: String,
    pub drop_invalid_rows: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { label_column: isoswarm::data::DEFAULT_LABEL_COLUMN.into(), drop_invalid_rows: false }
    }
}

/// Every tunable the commands consume. Loaded from `--config`, then overridden by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub threshold: Option<f64>,
    pub forest: ForestSection,
    pub pso: PsoSection,
    pub protocol: ProtocolSection,
    pub data: DataSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams { num_trees: self.forest.trees, sample_size: self.forest.sample_size, seed: self.seed }
    }

    pub fn pso_config(&self) -> PsoConfig {
        let p = &self.pso;
        PsoConfig {
            population: p.population,
            generations: p.generations,
            inertia: p.inertia,
            c1: p.c1,
            c2: p.c2,
            v_max: p.v_max,
            seed: self.seed,
            warm_start: p.warm_start,
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let p = &self.protocol;
        ProtocolConfig {
            folds: p.folds,
            ratios: p.ratios,
            scenarios: p.scenarios.clone(),
            naive_threshold: p.naive_threshold,
        }
    }

    pub fn initial_threshold(&self) -> f64 {
        self.threshold.unwrap_or(DEFAULT_NAIVE_THRESHOLD)
    }

    pub fn validate(&self) -> Result<()> {
        if self.forest.trees == 0 || self.forest.sample_size == 0 {
            return Err(Error::InvalidConfig("trees and sample size must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        self.pso_config().validate()?;
        self.protocol.ratios.validate()?;
        if self.protocol.folds < 2 {
            return Err(Error::InvalidConfig(format!("folds must be at least 2, got {}", self.protocol.folds)));
        }
        for (what, v) in [("naive threshold", Some(self.protocol.naive_threshold)), ("threshold", self.threshold)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidConfig(format!("{what} {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
