use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use isoswarm::data::{gen_synthetic, is_benign, SyntheticConfig};
use isoswarm::ensemble::{train_per_class, TrainOptions};
use isoswarm::iforest::build_forest;
use isoswarm::pso::optimize;
use isoswarm::{
    FitnessContext, ForestParams, LabeledRecord, MetaClassifier, ModelSchema, NormalizationParams, Provenance,
    PsoConfig,
};

fn dataset() -> Vec<LabeledRecord> {
    gen_synthetic(&SyntheticConfig::balanced(4, 500, 10, 1)).unwrap().records
}

fn model(records: &[LabeledRecord]) -> MetaClassifier {
    let classes: Vec<String> =
        ["eavesdropping", "gps_tracking", "wsmp_flood", "geo_wsmp_flood"].map(String::from).to_vec();
    let forests = train_per_class(records, &classes, ForestParams::default(), TrainOptions::default()).unwrap();
    let schema = ModelSchema {
        feature_names: (0..10).map(|i| format!("f{i}")).collect(),
        normalization: NormalizationParams::unit(10),
    };
    MetaClassifier::from_forests(forests, schema, Provenance::default(), 0.5).unwrap()
}

fn forests(c: &mut Criterion) {
    let records = dataset();
    let rows: Vec<&[f64]> = records.iter().filter(|r| r.label == "gps_tracking").map(|r| &*r.features).collect();
    c.bench_function("build_forest 100x256", |b| {
        b.iter(|| build_forest(black_box(&rows), ForestParams::default()).unwrap())
    });
    let forest = build_forest(&rows, ForestParams::default()).unwrap();
    let probe = records[0].features.to_vec();
    c.bench_function("anomaly_score", |b| b.iter(|| forest.anomaly_score(black_box(&probe)).unwrap()));
}

fn ensemble(c: &mut Criterion) {
    let records = dataset();
    let meta = model(&records);
    let probes: Vec<&[f64]> = records.iter().map(|r| &*r.features).collect();
    c.bench_function("classify_batch 2500", |b| b.iter(|| meta.classify_batch(black_box(&probes)).unwrap()));

    let (attack, benign): (Vec<LabeledRecord>, Vec<LabeledRecord>) =
        records.iter().cloned().partition(|r| !is_benign(&r.label));
    let ctx = FitnessContext::new(&meta, &attack, &benign).unwrap();
    c.bench_function("pso optimize 30x50", |b| {
        b.iter_batched(PsoConfig::default, |cfg| optimize(&cfg, black_box(&ctx)).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, forests, ensemble);
criterion_main!(benches);
