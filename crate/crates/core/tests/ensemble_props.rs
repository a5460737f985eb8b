use isoswarm::data::{gen_synthetic, normalize_fit, SyntheticConfig, BENIGN};
use isoswarm::ensemble::{decision_rule, export_model, import_model, train_per_class, TrainOptions};
use isoswarm::{Error, ForestParams, MetaClassifier, ModelSchema, Prediction, Provenance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|k| {
        let unit = prop::collection::vec(prop_oneof![0.0f64..=1.0, Just(0.5), Just(0.25)], k);
        (unit.clone(), unit.clone(), unit)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn rejection_completeness((scores, thresholds, weights) in case()) {
        let none_accept = scores.iter().zip(&thresholds).all(|(s, t)| s > t);
        prop_assert_eq!(decision_rule(&scores, &thresholds, &weights).is_none(), none_accept);
    }

    #[test]
    fn argmin_consistency((scores, thresholds, weights) in case()) {
        if let Some(i) = decision_rule(&scores, &thresholds, &weights) {
            prop_assert!(scores[i] <= thresholds[i]);
            for j in 0..scores.len() {
                if scores[j] <= thresholds[j] {
                    prop_assert!(scores[j] >= scores[i]);
                }
            }
        }
    }

    #[test]
    fn threshold_monotonicity((scores, thresholds, weights) in case(), pick in any::<prop::sample::Index>(), bump in 0.0f64..1.0) {
        let i = pick.index(scores.len());
        let mut raised = thresholds.clone();
        raised[i] = (raised[i] + bump).min(1.0);
        let before = decision_rule(&scores, &thresholds, &weights);
        let after = decision_rule(&scores, &raised, &weights);
        if before == Some(i) {
            prop_assert_eq!(after, Some(i));
        }
        if let Some(j) = before {
            if j != i && scores[j] < scores[i] {
                prop_assert_eq!(after, Some(j));
            }
        }
    }

    #[test]
    fn modularity((scores, thresholds, weights) in case(), pick in any::<prop::sample::Index>(), worse in 0.0f64..1.0) {
        let Some(j) = decision_rule(&scores, &thresholds, &weights) else { return Ok(()) };
        let k = pick.index(scores.len());
        if k == j || scores[k] <= scores[j] {
            return Ok(());
        }
        let mut degraded = scores.clone();
        degraded[k] = (degraded[k] + worse).min(1.0);
        prop_assert_eq!(decision_rule(&degraded, &thresholds, &weights), Some(j));

        let keep: Vec<usize> = (0..scores.len()).filter(|&i| i != k).collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let removed = decision_rule(&pick(&scores), &pick(&thresholds), &pick(&weights)).map(|r| keep[r]);
        prop_assert_eq!(removed, Some(j));
    }
}

fn trained() -> (MetaClassifier, Vec<isoswarm::LabeledRecord>) {
    let ds = gen_synthetic(&SyntheticConfig::balanced(3, 80, 6, 4)).unwrap();
    let attacks: Vec<_> = ds.records.iter().filter(|r| r.label != BENIGN).cloned().collect();
    let norm = normalize_fit(&attacks).unwrap();
    let forests = train_per_class(
        &attacks,
        &ds.attack_classes(),
        ForestParams { num_trees: 30, sample_size: 64, seed: 9 },
        TrainOptions::default(),
    )
    .unwrap();
    let schema = ModelSchema { feature_names: ds.schema.feature_names.clone(), normalization: norm };
    let meta = MetaClassifier::from_forests(forests, schema, Provenance::default(), 0.5).unwrap();
    let meta = meta.set_thresholds(&[0.47, 0.52, 0.5]).unwrap().set_weights(&[0.9, 0.8, 1.0]).unwrap();
    (meta, ds.records)
}

#[test]
fn serialization_is_identity_on_predictions() {
    let (meta, records) = trained();
    let back = import_model(&export_model(&meta)).unwrap();
    assert_eq!(back, meta);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut probes: Vec<Vec<f64>> = (0..300).map(|_| (0..6).map(|_| rng.random_range(-0.2..1.2)).collect()).collect();
    probes.extend(records.iter().map(|r| r.features.to_vec()));
    for x in &probes {
        let (a, b) = (meta.scores(x).unwrap(), back.scores(x).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert_eq!(meta.classify(x).unwrap(), back.classify(x).unwrap());
    }
}

#[test]
fn classify_matches_rule_on_real_forests() {
    let (meta, records) = trained();
    for r in &records {
        let scores = meta.scores(&r.features).unwrap();
        let expected = decision_rule(&scores, &meta.thresholds(), &meta.weights());
        let got = meta.classify(&r.features).unwrap();
        assert_eq!(got.class_index(), expected);
        if let Prediction::Known { score, .. } = got {
            assert_eq!(score, scores[expected.unwrap()]);
        }
    }
}

#[test]
fn merge_keeps_existing_entries() {
    let (meta, records) = trained();
    let single = {
        let kept = meta.entries()[2].clone();
        let mut e = kept;
        e.class_id = isoswarm::ClassId { name: "newcomer".into(), index: 0 };
        MetaClassifier::new(vec![e], meta.schema().clone(), Provenance::default()).unwrap()
    };
    let merged = meta.merge(&single).unwrap();
    assert_eq!(merged.len(), 4);
    assert_eq!(&merged.thresholds()[..3], &meta.thresholds()[..]);
    assert!(merged.provenance().needs_reoptimization);
    assert_eq!(merged.class_index("newcomer"), Some(3));
    assert!(matches!(merged.merge(&single), Err(Error::DuplicateClass(_))));
    assert_eq!(
        merged.classify(&records[0].features).unwrap().label(),
        meta.classify(&records[0].features).unwrap().label()
    );
}
