use isoswarm::data::{gen_synthetic, normalize_fit, SyntheticConfig, BENIGN};
use isoswarm::ensemble::{train_per_class, TrainOptions};
use isoswarm::{ForestParams, MetaClassifier, ModelSchema, Provenance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn batch_equals_serial_on_ten_thousand_rows() {
    let ds = gen_synthetic(&SyntheticConfig::balanced(4, 100, 10, 21)).unwrap();
    let attacks: Vec<_> = ds.records.iter().filter(|r| r.label != BENIGN).cloned().collect();
    let forests = train_per_class(
        &attacks,
        &ds.attack_classes(),
        ForestParams { seed: 4, ..Default::default() },
        TrainOptions::default(),
    )
    .unwrap();
    let schema =
        ModelSchema { feature_names: ds.schema.feature_names.clone(), normalization: normalize_fit(&attacks).unwrap() };
    let meta = MetaClassifier::from_forests(forests, schema, Provenance::default(), 0.5).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rows: Vec<Vec<f64>> = (0..10_000)
        .map(|i| {
            let base = &ds.records[i % ds.records.len()].features;
            base.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect()
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let batch = pool.install(|| meta.classify_batch(&rows).unwrap());
    for (x, p) in rows.iter().zip(&batch) {
        assert_eq!(&meta.classify(x).unwrap(), p);
    }
    assert!(matches!(
        meta.classify_batch(&[vec![0.0; 3]]),
        Err(isoswarm::Error::DimensionMismatch { expected: 10, actual: 3 })
    ));
}
