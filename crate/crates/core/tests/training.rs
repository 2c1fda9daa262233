mod common;

use cascade_core::toy::{
    pairwise_examples, train_toy_pairwise, train_toy_pointwise, LabeledExample, ToyPairwiseModel, ToyPointwiseModel,
    TrainConfig, TrainError,
};
use common::*;

/// Positives contain the query term; negatives share nothing with the query.
fn separable() -> (Vec<(String, String)>, Vec<LabeledExample>) {
    let mut docs = Vec::new();
    let mut data = Vec::new();
    for q in 0..6 {
        let term = format!("topic{q}");
        for k in 0..8 {
            let id = format!("q{q}d{k}");
            let relevant = k < 3;
            let text = if relevant {
                format!("{term} filler{k} words about {term} here")
            } else {
                format!("unrelated filler{k} text number {k} more words")
            };
            docs.push((id, text.clone()));
            data.push(LabeledExample {
                query_id: format!("q{q}"),
                query: format!("{term} question"),
                doc: text,
                label: u8::from(relevant),
            });
        }
    }
    (docs, data)
}

#[test]
fn pointwise_model_fits_separable_data() {
    let (docs, data) = separable();
    let (_, index) = build(&docs);
    let cfg = TrainConfig { lr: 0.5, iterations: 400, batch_size: 8, seed: 3 };
    let model = train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &cfg).unwrap();
    for e in &data {
        let p = model.score_features(&model.features(&index, &e.query, &e.doc));
        assert_eq!(p > 0.5, e.label == 1, "{:?} scored {p}", e.doc);
    }
}

#[test]
fn pairwise_model_orders_every_mixed_pair() {
    let (docs, data) = separable();
    let (_, index) = build(&docs);
    let pairs = pairwise_examples(&data);
    assert_eq!(pairs.len(), 6 * 3 * 5 * 2);
    let cfg = TrainConfig { lr: 0.5, iterations: 400, batch_size: 8, seed: 4 };
    let model = train_toy_pairwise(&ToyPairwiseModel::default(), &index, &pairs, &cfg).unwrap();
    for e in &pairs {
        let fi = model.features(&index, &e.query, &e.doc_i);
        let fj = model.features(&index, &e.query, &e.doc_j);
        let p = model.prob(&fi, &fj);
        assert_eq!(p > 0.5, e.label == 1);
        assert!((p + model.prob(&fj, &fi) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let mut r = rng(21);
    let docs = random_docs(&mut r, 40);
    let (_, index) = build(&docs);
    let data: Vec<LabeledExample> = docs
        .iter()
        .enumerate()
        .map(|(i, (_, text))| LabeledExample {
            query_id: "q".into(),
            query: "w0 w3".into(),
            doc: text.clone(),
            label: (i % 2) as u8,
        })
        .collect();
    let cfg = TrainConfig { lr: 0.2, iterations: 50, batch_size: 4, seed: 9 };
    let a = train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &cfg).unwrap();
    let b = train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.weights, c.weights);
}

#[test]
fn zero_iterations_returns_the_initial_model() {
    let (docs, data) = separable();
    let (_, index) = build(&docs);
    let init = ToyPointwiseModel { weights: [0.1, 0.2, 0.3, 0.4], ..Default::default() };
    let cfg = TrainConfig { iterations: 0, ..TrainConfig::default() };
    assert_eq!(train_toy_pointwise(&init, &index, &data, &cfg).unwrap(), init);
}

#[test]
fn single_class_and_bad_config_are_rejected() {
    let (docs, mut data) = separable();
    let (_, index) = build(&docs);
    let bad_lr = TrainConfig { lr: 0.0, ..TrainConfig::default() };
    assert!(matches!(
        train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &bad_lr),
        Err(TrainError::Config(_))
    ));
    data.retain(|e| e.label == 1);
    assert!(matches!(
        train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &TrainConfig::default()),
        Err(TrainError::SingleClass)
    ));
}

#[test]
fn model_files_round_trip_and_check_kind() {
    let (docs, data) = separable();
    let (_, index) = build(&docs);
    let cfg = TrainConfig { iterations: 30, ..TrainConfig::default() };
    let mono = train_toy_pointwise(&ToyPointwiseModel::default(), &index, &data, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mono.json");
    mono.save(&path).unwrap();
    assert_eq!(ToyPointwiseModel::load(&path).unwrap(), mono);
    assert!(ToyPairwiseModel::load(&path).is_err());
    std::fs::write(&path, "{\"format\": \"something-else\"}").unwrap();
    assert!(ToyPointwiseModel::load(&path).is_err());
}
