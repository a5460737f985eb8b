use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, MetricsReport};
use crate::data::{audit_split, fold_scenario, kfold_split, normalize_apply, normalize_fit, Dataset, SplitRatios};
use crate::ensemble::{
    decision_rule, train_per_class, MetaClassifier, ModelSchema, Prediction, Provenance, TrainOptions,
};
use crate::error::{Error, Result};
use crate::iforest::ForestParams;
use crate::pso::{optimize, FitnessContext, PsoConfig};
use crate::seeding::derive_seed;

pub const DEFAULT_NAIVE_THRESHOLD: f64 = 0.5;

/// The same thresholds for every entry.
pub fn naive_baseline(meta: &MetaClassifier, fixed_threshold: f64) -> Result<MetaClassifier> {
    meta.set_thresholds(&vec![fixed_threshold; meta.len()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub folds: usize,
    pub ratios: SplitRatios,
    /// Zero-day classes to evaluate; every attack class when `None`.
    pub scenarios: Option<Vec<String>>,
    pub naive_threshold: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { folds: 5, ratios: SplitRatios::default(), scenarios: None, naive_threshold: DEFAULT_NAIVE_THRESHOLD }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// `seed` is ignored; every cell derives its own.
    pub forest: ForestParams,
    pub pso: PsoConfig,
    pub protocol: ProtocolConfig,
}

/// One approach (naive or PSO) evaluated on one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachResult {
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
    pub validation_fitness: f64,
    pub validation_accuracy: f64,
    pub validation_detection: f64,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub fold: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub naive: ApproachResult,
    pub pso: ApproachResult,
    pub pso_history: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub zero_day_detection_rate: f64,
    pub benign_rejection_rate: f64,
    pub validation_fitness: f64,
    /// Per-class `[precision, recall, f1]` averaged over the cells containing the class.
    pub per_class: BTreeMap<String, [f64; 3]>,
}

impl Summary {
    pub fn mean<'a>(results: impl IntoIterator<Item = &'a ApproachResult>) -> Self {
        let results: Vec<&ApproachResult> = results.into_iter().collect();
        let n = results.len().max(1) as f64;
        let avg = |f: &dyn Fn(&ApproachResult) -> f64| results.iter().map(|r| f(r)).sum::<f64>() / n;
        let mut sums: BTreeMap<String, ([f64; 3], usize)> = BTreeMap::new();
        for r in &results {
            for m in &r.test.per_class {
                let e = sums.entry(m.class.clone()).or_insert(([0.0; 3], 0));
                e.0[0] += m.precision;
                e.0[1] += m.recall;
                e.0[2] += m.f1;
                e.1 += 1;
            }
        }
        Summary {
            macro_precision: avg(&|r| r.test.macro_precision),
            macro_recall: avg(&|r| r.test.macro_recall),
            macro_f1: avg(&|r| r.test.macro_f1),
            accuracy: avg(&|r| r.test.accuracy),
            zero_day_detection_rate: avg(&|r| r.test.zero_day_detection_rate),
            benign_rejection_rate: avg(&|r| r.test.benign_rejection_rate),
            validation_fitness: avg(&|r| r.validation_fitness),
            per_class: sums
                .into_iter()
                .map(|(k, (s, c))| (k, [s[0] / c as f64, s[1] / c as f64, s[2] / c as f64]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub naive: Summary,
    pub pso: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub zero_day_class: String,
    pub known_classes: Vec<String>,
    pub folds: Vec<CellReport>,
    pub averages: Averages,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: u64,
    /// Per scenario, per fold.
    pub cells_ms: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub scenarios: Vec<ScenarioReport>,
    /// Means over every scenario x fold cell.
    pub totals: Averages,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl ExperimentReport {
    pub fn cells(&self) -> impl Iterator<Item = (&ScenarioReport, &CellReport)> {
        self.scenarios.iter().flat_map(|s| s.folds.iter().map(move |c| (s, c)))
    }

    /// Copy without wall-clock data, for byte-stable output.
    pub fn without_timings(&self) -> Self {
        Self { timings: None, ..self.clone() }
    }
}

fn approach(
    scores: &[Vec<f64>],
    ctx: &FitnessContext,
    meta: &MetaClassifier,
    split: &crate::data::ScenarioSplit,
    thresholds: Vec<f64>,
) -> Result<ApproachResult> {
    let tuned = meta.set_thresholds(&thresholds)?;
    let mut validation = split.attack_validation.clone();
    validation.extend(split.benign_validation.iter().cloned());
    let weights = tuned.compute_weights(&validation)?;
    let tuned = tuned.set_weights(&weights)?;

    let predictions: Vec<Prediction> = scores
        .iter()
        .map(|s| match decision_rule(s, &thresholds, &weights) {
            Some(i) => Prediction::Known { class: tuned.entries()[i].class_id.clone(), score: s[i] },
            None => Prediction::Unknown,
        })
        .collect();
    let classes: Vec<String> = tuned.class_names().iter().map(|s| s.to_string()).collect();
    let counts = ConfusionCounts::tally(&classes, Some(&split.zero_day_class), &split.test, &predictions);

    Ok(ApproachResult {
        validation_fitness: ctx.fitness(&thresholds)?,
        validation_accuracy: ctx.accuracy(&thresholds),
        validation_detection: ctx.detection(&thresholds),
        thresholds,
        weights,
        test: counts.report(),
    })
}

fn run_cell(
    folds: &[Vec<crate::data::LabeledRecord>],
    fold: usize,
    zero_day: &str,
    classes: &[String],
    feature_names: &[String],
    config: &ExperimentConfig,
    cell_seed: u64,
) -> Result<CellReport> {
    let split = fold_scenario(folds, fold, zero_day, classes, config.protocol.ratios, derive_seed(cell_seed, 0))?;
    audit_split(&split)?;

    let norm = normalize_fit(&split.train)?;
    let split = crate::data::ScenarioSplit {
        train: normalize_apply(&norm, &split.train)?,
        attack_validation: normalize_apply(&norm, &split.attack_validation)?,
        benign_validation: normalize_apply(&norm, &split.benign_validation)?,
        test: normalize_apply(&norm, &split.test)?,
        ..split
    };

    let forest_params = config.forest.with_seed(derive_seed(cell_seed, 1));
    let forests = train_per_class(&split.train, &split.known_classes, forest_params, TrainOptions::default())?;
    let schema = ModelSchema { feature_names: feature_names.to_vec(), normalization: norm };
    let provenance = Provenance { training_seed: forest_params.seed, forest_params, ..Default::default() };
    let meta = MetaClassifier::from_forests(forests, schema, provenance, config.protocol.naive_threshold)?;

    let ctx = FitnessContext::new(&meta, &split.attack_validation, &split.benign_validation)?;
    let pso_config = config.pso.with_seed(derive_seed(cell_seed, 2));
    let optimized = optimize(&pso_config, &ctx)?;

    let test_scores = meta.score_batch(&split.test.iter().map(|r| &*r.features).collect::<Vec<_>>())?;
    let naive = approach(&test_scores, &ctx, &meta, &split, vec![config.protocol.naive_threshold; meta.len()])?;
    let pso = approach(&test_scores, &ctx, &meta, &split, optimized.best_position)?;

    Ok(CellReport {
        fold,
        train_size: split.train.len(),
        validation_size: split.attack_validation.len() + split.benign_validation.len(),
        test_size: split.test.len(),
        naive,
        pso,
        pso_history: optimized.history,
    })
}

/// Leave-one-attack-out x k-fold evaluation of the PSO-tuned ensemble against the
/// fixed-threshold baseline on identical splits and forests.
pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.pso.validate()?;
    config.protocol.ratios.validate()?;
    if !(0.0..=1.0).contains(&config.protocol.naive_threshold) {
        return Err(Error::OutOfRange { what: "naive threshold".into(), value: config.protocol.naive_threshold });
    }

    let classes = dataset.attack_classes();
    if classes.len() < 2 {
        return Err(Error::TooFewClasses { needed: 2, found: classes.len() });
    }
    if !dataset.has_benign() {
        return Err(Error::MissingBenign);
    }
    let scenarios: Vec<String> = match &config.protocol.scenarios {
        Some(list) => {
            if let Some(bad) = list.iter().find(|c| !classes.contains(c)) {
                return Err(Error::InvalidConfig(format!("scenario class `{bad}` not in dataset")));
            }
            list.clone()
        }
        None => classes.clone(),
    };

    let folds = kfold_split(&dataset.records, config.protocol.folds, derive_seed(config.master_seed, u64::MAX))?;
    let k = config.protocol.folds;

    let cells: Vec<(usize, usize)> = (0..scenarios.len()).flat_map(|s| (0..k).map(move |f| (s, f))).collect();
    let results: Vec<Result<(CellReport, u64)>> = cells
        .par_iter()
        .map(|&(s, f)| {
            let t0 = Instant::now();
            let cell_seed = derive_seed(config.master_seed, (s * k + f) as u64);
            run_cell(&folds, f, &scenarios[s], &classes, &dataset.schema.feature_names, config, cell_seed)
                .map(|c| (c, t0.elapsed().as_millis() as u64))
                .map_err(|e| e.context(format!("scenario `{}`, fold {f}", scenarios[s])))
        })
        .collect();

    let mut by_scenario: Vec<Vec<CellReport>> = vec![Vec::with_capacity(k); scenarios.len()];
    let mut cells_ms = vec![Vec::with_capacity(k); scenarios.len()];
    for ((s, _), r) in cells.iter().zip(results) {
        let (cell, ms) = r?;
        by_scenario[*s].push(cell);
        cells_ms[*s].push(ms);
    }

    let scenario_reports: Vec<ScenarioReport> = scenarios
        .iter()
        .zip(by_scenario)
        .map(|(zd, folds)| ScenarioReport {
            zero_day_class: zd.clone(),
            known_classes: classes.iter().filter(|c| *c != zd).cloned().collect(),
            averages: Averages {
                naive: Summary::mean(folds.iter().map(|c| &c.naive)),
                pso: Summary::mean(folds.iter().map(|c| &c.pso)),
            },
            folds,
        })
        .collect();

    let all: Vec<&CellReport> = scenario_reports.iter().flat_map(|s| &s.folds).collect();
    let totals =
        Averages { naive: Summary::mean(all.iter().map(|c| &c.naive)), pso: Summary::mean(all.iter().map(|c| &c.pso)) };

    Ok(ExperimentReport {
        config: config.clone(),
        scenarios: scenario_reports,
        totals,
        timings: Some(Timings { total_ms: started.elapsed().as_millis() as u64, cells_ms }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 11,
            forest: ForestParams { num_trees: 20, sample_size: 64, seed: 0 },
            pso: PsoConfig { population: 10, generations: 10, ..Default::default() },
            protocol: ProtocolConfig { folds: 3, ..Default::default() },
        }
    }

    #[test]
    fn report_shape_and_averages() {
        let ds = gen_synthetic(&SyntheticConfig::balanced(3, 45, 4, 2)).unwrap();
        let report = run_experiment(&ds, &small_config()).unwrap();
        assert_eq!(report.scenarios.len(), 3);
        assert!(report.scenarios.iter().all(|s| s.folds.len() == 3));
        for s in &report.scenarios {
            let mean = s.folds.iter().map(|c| c.pso.test.macro_f1).sum::<f64>() / 3.0;
            assert!((mean - s.averages.pso.macro_f1).abs() < 1e-12);
            let mean = s.folds.iter().map(|c| c.naive.test.zero_day_detection_rate).sum::<f64>() / 3.0;
            assert!((mean - s.averages.naive.zero_day_detection_rate).abs() < 1e-12);
            for c in &s.folds {
                assert!(c.pso.test.zero_day_support > 0);
                assert_eq!(c.naive.thresholds, vec![0.5; 2]);
                assert_eq!(c.pso_history.len(), 11);
            }
        }
    }

    #[test]
    fn deterministic() {
        let ds = gen_synthetic(&SyntheticConfig::balanced(3, 30, 3, 5)).unwrap();
        let a = run_experiment(&ds, &small_config()).unwrap().without_timings();
        let b = run_experiment(&ds, &small_config()).unwrap().without_timings();
        assert_eq!(a, b);
    }

    #[test]
    fn protocol_errors_carry_context() {
        let ds = gen_synthetic(&SyntheticConfig::balanced(1, 30, 3, 5)).unwrap();
        assert!(matches!(run_experiment(&ds, &small_config()), Err(Error::TooFewClasses { .. })));
        let mut cfg = small_config();
        cfg.protocol.scenarios = Some(vec!["nope".into()]);
        let ds = gen_synthetic(&SyntheticConfig::balanced(2, 30, 3, 5)).unwrap();
        assert!(matches!(run_experiment(&ds, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn naive_examples() {
        let ds = gen_synthetic(&SyntheticConfig::balanced(4, 30, 3, 1)).unwrap();
        let classes = ds.attack_classes();
        let forests = train_per_class(
            &ds.records,
            &classes,
            ForestParams { num_trees: 5, sample_size: 16, seed: 1 },
            TrainOptions::default(),
        )
        .unwrap();
        let schema = ModelSchema {
            feature_names: ds.schema.feature_names.clone(),
            normalization: crate::data::NormalizationParams::unit(3),
        };
        let meta = MetaClassifier::from_forests(forests, schema, Provenance::default(), 0.3).unwrap();
        assert_eq!(naive_baseline(&meta, 0.5).unwrap().thresholds(), vec![0.5; 4]);
        assert!(matches!(naive_baseline(&meta, 1.2), Err(Error::OutOfRange { .. })));
        let open = naive_baseline(&meta, 1.0).unwrap();
        assert!(ds.records.iter().all(|r| !open.classify(&r.features).unwrap().is_unknown()));
    }
}
