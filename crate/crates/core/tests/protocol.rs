use std::collections::BTreeMap;

use isoswarm::data::{
    audit_split, class_counts, fold_scenario, gen_synthetic, kfold_split, make_scenarios, read_csv, write_csv,
    CsvOptions, SplitRatios, SyntheticConfig,
};
use isoswarm::eval::{render_json, run_experiment, ProtocolConfig};
use isoswarm::{ExperimentConfig, ForestParams, PsoConfig};

#[test]
fn every_split_passes_the_audit() {
    let ds = gen_synthetic(&SyntheticConfig::balanced(4, 60, 5, 3)).unwrap();
    let classes = ds.attack_classes();
    for split in make_scenarios(&ds, &classes, SplitRatios::default(), 1).unwrap() {
        audit_split(&split).unwrap();
    }
    let folds = kfold_split(&ds.records, 5, 2).unwrap();
    for zd in &classes {
        for f in 0..5 {
            let split = fold_scenario(&folds, f, zd, &classes, SplitRatios::default(), 9).unwrap();
            audit_split(&split).unwrap();
            assert!(split.train.iter().chain(&split.attack_validation).all(|r| &r.label != zd));
            assert!(split.test.iter().any(|r| &r.label == zd));
        }
    }
}

#[test]
fn folds_are_stratified_within_one() {
    let mut cfg = SyntheticConfig::reference_proportions(700, 4, 5);
    cfg.classes[0].count += 3;
    let ds = gen_synthetic(&cfg).unwrap();
    let totals = class_counts(&ds.records);
    for k in [2, 3, 5, 7] {
        let folds = kfold_split(&ds.records, k, 11).unwrap();
        let per_fold: Vec<BTreeMap<String, usize>> = folds.iter().map(|f| class_counts(f)).collect();
        for (class, &n) in &totals {
            let counts: Vec<usize> = per_fold.iter().map(|m| m.get(class).copied().unwrap_or(0)).collect();
            let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{class}: {counts:?}");
            assert_eq!(counts.iter().sum::<usize>(), n);
        }
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{sizes:?}");
    }
}

#[test]
fn csv_round_trip_preserves_dataset() {
    let ds = gen_synthetic(&SyntheticConfig::balanced(2, 15, 4, 0)).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &ds.schema, &ds.records).unwrap();
    let back = read_csv(buf.as_slice(), &CsvOptions::default()).unwrap();
    assert_eq!(back.records.len(), ds.records.len());
    for (a, b) in ds.records.iter().zip(&back.records) {
        assert_eq!(a.label, b.label);
        assert!(a.features.iter().zip(b.features.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn experiment_report_is_thread_independent() {
    let ds = gen_synthetic(&SyntheticConfig::balanced(3, 40, 5, 6)).unwrap();
    let cfg = ExperimentConfig {
        master_seed: 99,
        forest: ForestParams { num_trees: 20, sample_size: 64, seed: 0 },
        pso: PsoConfig { population: 8, generations: 8, ..Default::default() },
        protocol: ProtocolConfig { folds: 3, ..Default::default() },
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(5).build().unwrap();
    let a = one.install(|| run_experiment(&ds, &cfg).unwrap()).without_timings();
    let b = many.install(|| run_experiment(&ds, &cfg).unwrap()).without_timings();
    assert_eq!(render_json(&a), render_json(&b));
    assert_eq!(a.scenarios.len(), 3);
    assert!(a.cells().all(|(_, c)| c.pso.validation_fitness >= c.naive.validation_fitness));
}

#[test]
fn far_apart_clusters_separate_pairwise() {
    use isoswarm::iforest::build_forest;
    // every feature carries a class-specific value
    let ds =
        gen_synthetic(&SyntheticConfig { signature_dims: 10, ..SyntheticConfig::balanced(4, 200, 10, 1) }).unwrap();
    let groups = isoswarm::data::group_by_label(&ds.records);
    for (class, recs) in &groups {
        let (train, held): (Vec<_>, Vec<_>) = recs.iter().enumerate().partition(|(i, _)| i % 10 < 7);
        let rows: Vec<&[f64]> = train.iter().map(|(_, r)| &*r.features).collect();
        let forest = build_forest(&rows, ForestParams { seed: 5, ..Default::default() }).unwrap();
        let own: Vec<f64> = held.iter().map(|(_, r)| forest.anomaly_score(&r.features).unwrap()).collect();
        let other: Vec<f64> = ds
            .records
            .iter()
            .filter(|r| &r.label != class)
            .map(|r| forest.anomaly_score(&r.features).unwrap())
            .collect();
        let wins = own.iter().map(|a| other.iter().filter(|b| a < b).count()).sum::<usize>();
        let share = wins as f64 / (own.len() * other.len()) as f64;
        assert!(share >= 0.99, "{class}: {share}");
    }
}
