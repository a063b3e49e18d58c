mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use termex::corpus::TokenLabel;
use termex::crf::{
    fit, gradient, log_likelihood, log_partition, marginals, sequence_log_prob, train_crf, viterbi, CrfConfig,
    CrfWeights, EncodedSequence, PotentialTable,
};
use termex::features::sentence_features;
use termex::pipeline::crf_dataset;
use termex::synth::{default_gazetteer, generate, SynthConfig};

#[test]
fn decoding_matches_enumeration() {
    let mut rng = rng(11);
    for case in 0..300 {
        let num_features = rng.gen_range(1..=10);
        let len = rng.gen_range(1..=10);
        let (w, features) = random_crf(&mut rng, num_features, len, 2.0);
        let table = w.potentials(&features);
        let oracle = enumerate(&w, &features);

        // Repeated feature sets can tie exactly; any maximizer is correct.
        let path = viterbi(&table);
        assert!((brute_score(&w, &features, &path) - oracle.best_score).abs() <= 1e-12, "case {case}");

        assert!((log_partition(&table) - oracle.log_z).abs() < 1e-8, "case {case}");
        let m = marginals(&table);
        assert!((m.log_z - oracle.log_z).abs() < 1e-8);
        for (a, b) in m.nodes.iter().flatten().zip(oracle.nodes.iter().flatten()) {
            assert!((a - b).abs() < 1e-8, "case {case}: node {a} vs {b}");
        }
        for (a, b) in m.edges.iter().flatten().flatten().zip(oracle.edges.iter().flatten().flatten()) {
            assert!((a - b).abs() < 1e-8, "case {case}: edge {a} vs {b}");
        }

        let y = random_labels(&mut rng, len);
        let lp = sequence_log_prob(&table, &y).unwrap();
        assert!((lp - (brute_score(&w, &features, &y) - oracle.log_z)).abs() < 1e-8);
    }
}

#[test]
fn viterbi_prefers_o_on_ties() {
    let w = CrfWeights::zeros(1);
    let features = vec![vec![]; 4];
    assert_eq!(viterbi(&w.potentials(&features)), vec![TokenLabel::O; 4]);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = rng(5);
    for case in 0..20 {
        let num_features = rng.gen_range(1..=6);
        let (w, _) = random_crf(&mut rng, num_features, 1, 1.0);
        let data = random_dataset(&mut rng, num_features, 8, 7);
        let l2 = if case % 2 == 0 { 0.0 } else { 0.7 };
        let (objective, grad) = gradient(&w, &data, l2);
        assert!((objective - log_likelihood(&w, &data, l2)).abs() < 1e-9);
        let numeric = central_difference(
            |p| log_likelihood(&CrfWeights::from_slice(num_features, p), &data, l2),
            &w.to_vec(),
            1e-5,
        );
        let err = max_relative_error(&grad.to_vec(), &numeric, 1e-6);
        assert!(err < 1e-4, "case {case}: relative error {err}");
    }
}

#[test]
fn duplicated_data_with_half_rate_gives_identical_first_update() {
    let mut rng = rng(8);
    let data = random_dataset(&mut rng, 5, 64, 6);
    let doubled: Vec<EncodedSequence> = data.iter().chain(&data).cloned().collect();
    let config = CrfConfig { epochs: 1, learning_rate: 0.01, ..CrfConfig::default() };
    let (a, _) = fit(&data, 5, &config).unwrap();
    let (b, _) = fit(&doubled, 5, &CrfConfig { learning_rate: 0.005, ..config }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn long_chain_with_large_potentials_is_stable() {
    let mut rng = rng(3);
    let n = 10_000;
    let steps = (0..n - 1)
        .map(|_| {
            let mut s = [[0.0; 2]; 2];
            s.iter_mut().flatten().for_each(|v| *v = rng.gen_range(-50.0..=50.0));
            s
        })
        .collect();
    let table = PotentialTable::new([rng.gen_range(-50.0..=50.0), rng.gen_range(-50.0..=50.0)], steps);
    let m = marginals(&table);
    assert!(m.log_z.is_finite());
    for node in &m.nodes {
        assert!(node.iter().all(|p| p.is_finite() && (-1e-12..=1.0 + 1e-12).contains(p)), "{node:?} logz {}", m.log_z);
        assert!((node[0] + node[1] - 1.0).abs() < 1e-9);
    }
    assert_eq!(viterbi(&table).len(), n);
}

#[test]
fn training_nll_never_increases_on_synthetic_data() {
    let corpus = generate(&default_gazetteer(), &SynthConfig { n_sentences: 600, ..Default::default() }).unwrap();
    let config = CrfConfig::default();
    let data = crf_dataset(&corpus.gold, &config.features);
    let (model, report) = train_crf(&data, &config).unwrap();
    let nll: Vec<f64> = report.negative_log_likelihood().collect();
    assert_eq!(nll.len(), config.epochs);
    for (t, pair) in nll.windows(2).enumerate() {
        assert!(pair[1] <= pair[0], "epoch {}: {} -> {}", t + 1, pair[0], pair[1]);
    }
    let (features, labels) = &data[0];
    assert_eq!(model.viterbi(features), *labels);
    let again = sentence_features(corpus.gold[0].sentence(), &model.features);
    assert_eq!(again.len(), corpus.gold[0].sentence().len());
}

fn table_strategy() -> impl Strategy<Value = PotentialTable> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::array::uniform2(-5.0f64..5.0),
            prop::collection::vec(prop::array::uniform2(prop::array::uniform2(-5.0f64..5.0)), n - 1),
        )
            .prop_map(|(init, steps)| PotentialTable::new(init, steps))
    })
}

proptest! {
    #[test]
    fn shifting_one_position_shifts_log_z(table in table_strategy(), c in -20.0f64..20.0, pick in 0usize..100) {
        let i = pick % table.len();
        let mut shifted = table.clone();
        shifted.shift_position(i, c);
        prop_assert!((log_partition(&shifted) - log_partition(&table) - c).abs() < 1e-9);
        prop_assert_eq!(viterbi(&shifted), viterbi(&table));
    }

    #[test]
    fn marginals_are_distributions(table in table_strategy()) {
        let m = marginals(&table);
        for node in &m.nodes {
            prop_assert!((node[0] + node[1] - 1.0).abs() < 1e-9);
        }
        for (i, edge) in m.edges.iter().enumerate() {
            for p in 0..2 {
                prop_assert!((edge[p][0] + edge[p][1] - m.nodes[i][p]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn duplication_scales_gradient(seed in 0u64..1000, l2 in 0.0f64..2.0) {
        let mut rng = rng(seed);
        let n = rng.gen_range(1..90);
        let data = random_dataset(&mut rng, 4, n, 5);
        let doubled: Vec<EncodedSequence> = data.iter().chain(&data).cloned().collect();
        let zero = CrfWeights::zeros(4);
        let (_, g1) = gradient(&zero, &data, l2);
        let (_, g2) = gradient(&zero, &doubled, l2);
        for (a, b) in g1.to_vec().iter().zip(g2.to_vec()) {
            prop_assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
