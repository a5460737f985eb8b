use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{group_by_label, is_benign, Dataset, LabeledRecord};
use crate::error::{Error, Result};

/// Per-class train / validation / test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("split ratios {parts:?} must be in [0,1] and sum to 1")));
        }
        if self.train == 0.0 || self.validation == 0.0 {
            return Err(Error::InvalidConfig("train and validation shares must be positive".into()));
        }
        Ok(())
    }

    /// Validation share of the non-test portion.
    pub fn validation_share(&self) -> f64 {
        self.validation / (self.train + self.validation)
    }

    fn counts(&self, n: usize) -> (usize, usize) {
        let train = ((self.train * n as f64).round() as usize).min(n);
        let val = ((self.validation * n as f64).round() as usize).min(n - train);
        (train, val)
    }
}

/// One leave-one-attack-out evaluation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSplit {
    pub zero_day_class: String,
    pub known_classes: Vec<String>,
    /// Known-attack records used to grow the forests.
    pub train: Vec<LabeledRecord>,
    pub attack_validation: Vec<LabeledRecord>,
    pub benign_validation: Vec<LabeledRecord>,
    /// Known attacks, benign and the zero-day class.
    pub test: Vec<LabeledRecord>,
}

fn class_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_protocol(dataset: &Dataset, attack_classes: &[String]) -> Result<()> {
    if attack_classes.len() < 2 {
        return Err(Error::TooFewClasses { needed: 2, found: attack_classes.len() });
    }
    if !dataset.has_benign() {
        return Err(Error::MissingBenign);
    }
    Ok(())
}

/// Builds one scenario per attack class, with that class held out as the zero-day attack.
///
/// Every class is shuffled once and cut by `ratios`. Benign records never reach
/// `train`: their train and validation shares both go to `benign_validation`.
/// The zero-day class goes to `test` in full.
pub fn make_scenarios(
    dataset: &Dataset,
    attack_classes: &[String],
    ratios: SplitRatios,
    seed: u64,
) -> Result<Vec<ScenarioSplit>> {
    check_protocol(dataset, attack_classes)?;
    ratios.validate()?;

    let groups = group_by_label(&dataset.records);
    let mut cuts: BTreeMap<&str, [Vec<LabeledRecord>; 3]> = BTreeMap::new();
    for (stream, (label, recs)) in groups.iter().enumerate() {
        let mut recs: Vec<LabeledRecord> = recs.iter().map(|r| (*r).clone()).collect();
        recs.shuffle(&mut class_rng(seed, stream as u64));
        let (n_train, n_val) = ratios.counts(recs.len());
        let test = recs.split_off(n_train + n_val);
        let val = recs.split_off(n_train);
        cuts.insert(label.as_str(), [recs, val, test]);
    }

    let scenarios = attack_classes
        .iter()
        .map(|zero_day| {
            let known: Vec<String> = attack_classes.iter().filter(|c| *c != zero_day).cloned().collect();
            let mut split = ScenarioSplit {
                zero_day_class: zero_day.clone(),
                known_classes: known.clone(),
                train: Vec::new(),
                attack_validation: Vec::new(),
                benign_validation: Vec::new(),
                test: Vec::new(),
            };
            for (label, [train, val, test]) in &cuts {
                if is_benign(label) {
                    split.benign_validation.extend(train.iter().chain(val).cloned());
                    split.test.extend(test.iter().cloned());
                } else if *label == zero_day.as_str() {
                    split.test.extend(train.iter().chain(val).chain(test).cloned());
                } else if known.iter().any(|k| k == label) {
                    split.train.extend(train.iter().cloned());
                    split.attack_validation.extend(val.iter().cloned());
                    split.test.extend(test.iter().cloned());
                }
            }
            split
        })
        .collect();
    Ok(scenarios)
}

/// Stratified k-fold partition. Within every class, fold sizes differ by at most one.
pub fn kfold_split(records: &[LabeledRecord], k: usize, seed: u64) -> Result<Vec<Vec<LabeledRecord>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
    }
    let groups = group_by_label(records);
    if let Some((class, recs)) = groups.iter().find(|(_, recs)| recs.len() < k) {
        return Err(Error::ClassTooSmall { class: class.clone(), count: recs.len(), k });
    }

    let mut folds = vec![Vec::new(); k];
    let mut offset = 0usize;
    for (stream, (_, recs)) in groups.iter().enumerate() {
        let mut recs: Vec<&LabeledRecord> = recs.clone();
        recs.shuffle(&mut class_rng(seed, stream as u64));
        for (i, r) in recs.iter().enumerate() {
            folds[(offset + i) % k].push((*r).clone());
        }
        offset = (offset + recs.len()) % k;
    }
    Ok(folds)
}

/// Scenario for fold `test_fold` with `zero_day` held out.
///
/// The test fold supplies `test`. In the remaining folds, each known attack class is
/// split into train and attack validation using `ratios.validation_share()`, benign
/// records go to benign validation and zero-day records are dropped.
pub fn fold_scenario(
    folds: &[Vec<LabeledRecord>],
    test_fold: usize,
    zero_day: &str,
    attack_classes: &[String],
    ratios: SplitRatios,
    seed: u64,
) -> Result<ScenarioSplit> {
    if test_fold >= folds.len() {
        return Err(Error::InvalidConfig(format!("fold {test_fold} out of {} folds", folds.len())));
    }
    ratios.validate()?;
    let known: Vec<String> = attack_classes.iter().filter(|c| *c != zero_day).cloned().collect();
    let in_scope = |label: &str| is_benign(label) || label == zero_day || known.iter().any(|k| k == label);

    let test: Vec<LabeledRecord> = folds[test_fold].iter().filter(|r| in_scope(&r.label)).cloned().collect();
    let rest: Vec<LabeledRecord> =
        folds.iter().enumerate().filter(|(i, _)| *i != test_fold).flat_map(|(_, f)| f.iter().cloned()).collect();

    let mut split = ScenarioSplit {
        zero_day_class: zero_day.to_owned(),
        known_classes: known.clone(),
        train: Vec::new(),
        attack_validation: Vec::new(),
        benign_validation: Vec::new(),
        test,
    };
    let share = ratios.validation_share();
    for (stream, (label, recs)) in group_by_label(&rest).into_iter().enumerate() {
        if is_benign(&label) {
            split.benign_validation.extend(recs.into_iter().cloned());
        } else if known.contains(&label) {
            let mut recs: Vec<LabeledRecord> = recs.into_iter().cloned().collect();
            recs.sort_by_key(|r| r.id);
            recs.shuffle(&mut class_rng(seed, stream as u64));
            let n_val = ((share * recs.len() as f64).round() as usize).clamp(1, recs.len().saturating_sub(1).max(1));
            let train = recs.split_off(n_val);
            split.attack_validation.extend(recs);
            split.train.extend(train);
        }
    }
    Ok(split)
}

/// Checks that a split is free of leakage.
pub fn audit_split(split: &ScenarioSplit) -> Result<()> {
    let zd = split.zero_day_class.as_str();
    for (name, part) in [("train", &split.train), ("attack validation", &split.attack_validation)] {
        if part.iter().any(|r| r.label == zd) {
            return Err(Error::Leakage(format!("zero-day class `{zd}` present in {name}")));
        }
    }
    if split.benign_validation.iter().any(|r| !is_benign(&r.label)) {
        return Err(Error::Leakage("non-benign record in benign validation".into()));
    }
    if split.train.iter().chain(&split.attack_validation).any(|r| is_benign(&r.label)) {
        return Err(Error::Leakage("benign record in forest training or attack validation".into()));
    }
    let mut seen = BTreeSet::new();
    let parts = [&split.train, &split.attack_validation, &split.benign_validation, &split.test];
    for r in parts.into_iter().flatten() {
        if !seen.insert(r.id) {
            return Err(Error::Leakage(format!("record {} appears in more than one partition", r.id)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{class_counts, DatasetSchema};
    use crate::iforest::FeatureVector;

    fn dataset(counts: &[(&str, usize)]) -> Dataset {
        let mut records = Vec::new();
        for (label, n) in counts {
            for _ in 0..*n {
                let id = records.len();
                records.push(LabeledRecord {
                    id,
                    features: FeatureVector::new(vec![id as f64]).unwrap(),
                    label: (*label).into(),
                });
            }
        }
        Dataset { schema: DatasetSchema::new(vec!["f".into()], "label").unwrap(), records }
    }

    fn four_class() -> Dataset {
        dataset(&[("a", 100), ("b", 57), ("c", 23), ("d", 200), ("benign", 131)])
    }

    #[test]
    fn one_scenario_per_attack() {
        let ds = four_class();
        let s = make_scenarios(&ds, &ds.attack_classes(), SplitRatios::default(), 3).unwrap();
        assert_eq!(s.len(), 4);
        for split in &s {
            audit_split(split).unwrap();
            let test_counts = class_counts(&split.test);
            assert_eq!(test_counts[&split.zero_day_class], ds.class_counts()[&split.zero_day_class]);
        }
    }

    #[test]
    fn scenario_proportions() {
        let ds = four_class();
        let s = make_scenarios(&ds, &ds.attack_classes(), SplitRatios::default(), 3).unwrap();
        let split = &s[0];
        let (tr, va, te) =
            (class_counts(&split.train), class_counts(&split.attack_validation), class_counts(&split.test));
        for class in &split.known_classes {
            let n = ds.class_counts()[class] as f64;
            assert!((tr[class] as f64 - 0.70 * n).abs() <= 1.0, "{class}");
            assert!((va[class] as f64 - 0.15 * n).abs() <= 1.0, "{class}");
            assert!((te[class] as f64 - 0.15 * n).abs() <= 1.0, "{class}");
        }
    }

    #[test]
    fn protocol_errors() {
        let ds = dataset(&[("a", 10), ("benign", 10)]);
        assert!(matches!(
            make_scenarios(&ds, &ds.attack_classes(), SplitRatios::default(), 0),
            Err(Error::TooFewClasses { found: 1, .. })
        ));
        let ds = dataset(&[("a", 10), ("b", 10)]);
        assert!(matches!(
            make_scenarios(&ds, &ds.attack_classes(), SplitRatios::default(), 0),
            Err(Error::MissingBenign)
        ));
    }

    #[test]
    fn kfold_sizes() {
        let ds = dataset(&[("a", 100)]);
        let folds = kfold_split(&ds.records, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 20));

        let ds = dataset(&[("a", 3)]);
        assert!(matches!(kfold_split(&ds.records, 5, 1), Err(Error::ClassTooSmall { count: 3, k: 5, .. })));
    }

    #[test]
    fn kfold_stratified_and_complete() {
        let ds = four_class();
        let folds = kfold_split(&ds.records, 5, 9).unwrap();
        let per_fold: Vec<_> = folds.iter().map(|f| class_counts(f)).collect();
        for class in ds.class_counts().keys() {
            let counts: Vec<usize> = per_fold.iter().map(|c| c.get(class).copied().unwrap_or(0)).collect();
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1, "{class}: {counts:?}");
        }
        let mut all: Vec<LabeledRecord> = folds.concat();
        all.sort_by_key(|r| r.id);
        assert_eq!(all, ds.records);
        assert_eq!(folds, kfold_split(&ds.records, 5, 9).unwrap());
    }

    #[test]
    fn fold_scenarios_are_clean() {
        let ds = four_class();
        let classes = ds.attack_classes();
        let folds = kfold_split(&ds.records, 5, 2).unwrap();
        for zd in &classes {
            for f in 0..5 {
                let split = fold_scenario(&folds, f, zd, &classes, SplitRatios::default(), 4).unwrap();
                audit_split(&split).unwrap();
                assert!(split.test.iter().any(|r| &r.label == zd));
                assert_eq!(split.known_classes.len(), 3);
            }
        }
    }

    #[test]
    fn audit_catches_leaks() {
        let ds = four_class();
        let s = make_scenarios(&ds, &ds.attack_classes(), SplitRatios::default(), 3).unwrap();
        let mut bad = s[0].clone();
        bad.train.push(bad.test[0].clone());
        assert!(matches!(audit_split(&bad), Err(Error::Leakage(_))));
        let mut bad = s[0].clone();
        let zd = bad.test.iter().find(|r| r.label == bad.zero_day_class).unwrap().clone();
        bad.attack_validation.push(zd);
        assert!(matches!(audit_split(&bad), Err(Error::Leakage(_))));
    }
}
