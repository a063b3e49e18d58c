mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use termex::classifier::{loss, objective_gradient, softmax, train_classifier, ClassifierConfig, ClassifierModel};
use termex::corpus::SentenceLabel;
use termex::embeddings::SentenceVector;

type Batch = Vec<(SentenceVector, SentenceLabel)>;

fn random_batch<R: Rng>(rng: &mut R, n: usize, d: usize) -> Batch {
    (0..n)
        .map(|_| {
            let values = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let label = if rng.gen_bool(0.5) { SentenceLabel::ContainsTech } else { SentenceLabel::NoTech };
            (SentenceVector { values, contributing_count: 1 }, label)
        })
        .collect()
}

fn params(m: &ClassifierModel) -> Vec<f64> {
    m.a.iter().chain(&m.b).chain(&m.bias).copied().collect()
}

fn with_params(template: &ClassifierModel, p: &[f64]) -> ClassifierModel {
    let mut m = template.clone();
    let (a, rest) = p.split_at(m.a.len());
    let (b, bias) = rest.split_at(m.b.len());
    m.a.copy_from_slice(a);
    m.b.copy_from_slice(b);
    m.bias.copy_from_slice(bias);
    m
}

fn accuracy(m: &ClassifierModel, data: &Batch) -> f64 {
    let correct = data.iter().filter(|(x, y)| m.predict(x).unwrap().label == *y).count();
    correct as f64 / data.len() as f64
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = rng(21);
    for case in 0..12 {
        let d = rng.gen_range(1..6);
        let use_hidden = case % 2 == 1;
        let mut model = ClassifierModel::zeros(d, use_hidden);
        let random: Vec<f64> = params(&model).iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        model = with_params(&model, &random);
        let batch = random_batch(&mut rng, 7, d);
        let l2 = if case % 3 == 0 { 0.0 } else { 0.3 };
        let (objective, grad) = objective_gradient(&model, &batch, l2).unwrap();
        let numeric = central_difference(
            |p| objective_gradient(&with_params(&model, p), &batch, l2).unwrap().0,
            &params(&model),
            1e-5,
        );
        let analytic: Vec<f64> = grad.a.iter().chain(&grad.b).chain(&grad.bias).copied().collect();
        // A is frozen without the hidden layer: its gradient is reported as
        // zero even though the objective depends on it.
        let skip = if use_hidden { 0 } else { model.a.len() };
        let err = max_relative_error(&analytic[skip..], &numeric[skip..], 1e-7);
        assert!(err < 1e-4, "case {case}: relative error {err}");
        assert!(objective.is_finite());
    }
}

#[test]
fn zero_model_is_uniform() {
    let mut rng = rng(2);
    let batch = random_batch(&mut rng, 50, 6);
    let m = ClassifierModel::zeros(6, false);
    assert!((loss(&m, &batch).unwrap() - 2f64.ln()).abs() <= 1e-9);
    for (x, _) in &batch {
        assert_eq!(m.predict(x).unwrap().probabilities, [0.5, 0.5]);
    }
}

#[test]
fn separable_toy_set_is_learned_within_fifty_epochs() {
    let data = toy_clusters(4, 200, 10, 0.1);
    let config = ClassifierConfig { epochs: 50, ..ClassifierConfig::default() };
    let (model, report) = train_classifier(&data, &[], &config).unwrap();
    assert_eq!(accuracy(&model, &data), 1.0);
    assert!(report.best_epoch.unwrap() < 50);
}

#[test]
fn small_rate_loss_is_non_increasing() {
    let data = toy_clusters(9, 200, 10, 0.1);
    for lr in [0.01, 0.003] {
        let config = ClassifierConfig { epochs: 40, learning_rate: lr, ..ClassifierConfig::default() };
        let (_, report) = train_classifier(&data, &[], &config).unwrap();
        let start = loss(&ClassifierModel::initialize(10, false, config.seed), &data).unwrap();
        let mut prev = start;
        for (epoch, &l) in report.train_loss.iter().enumerate() {
            assert!(l <= prev + 1e-6, "lr {lr} epoch {epoch}: {prev} -> {l}");
            prev = l;
        }
    }
}

#[test]
fn duplicated_examples_leave_the_loss_unchanged() {
    let mut rng = rng(6);
    let batch = random_batch(&mut rng, 40, 4);
    let doubled: Batch = batch.iter().chain(&batch).cloned().collect();
    let m = ClassifierModel::initialize(4, false, 3);
    assert!((loss(&m, &batch).unwrap() - loss(&m, &doubled).unwrap()).abs() < 1e-12);
}

#[test]
fn hidden_layer_training_also_separates() {
    let data = toy_clusters(12, 200, 4, 0.1);
    let config = ClassifierConfig { use_hidden: true, ..ClassifierConfig::default() };
    let (model, _) = train_classifier(&data, &[], &config).unwrap();
    assert_eq!(accuracy(&model, &data), 1.0);
    assert!(model.a.iter().enumerate().any(|(i, &v)| v != if i % 5 == 0 { 1.0 } else { 0.0 }));
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant(a in -30.0f64..30.0, b in -30.0f64..30.0, c in -500.0f64..500.0) {
        let p = softmax([a, b]);
        let q = softmax([a + c, b + c]);
        prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }
}
