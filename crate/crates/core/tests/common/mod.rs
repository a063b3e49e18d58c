//! Reference implementations used by the integration tests. None of these
//! share code with the library: the CRF oracle enumerates every labelling,
//! the F-score oracle works in exact rationals from the textbook
//! definition, and gradients are checked by central differences.

#![allow(dead_code)]

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use termex::corpus::{Sentence, SentenceLabel, TokenLabel};
use termex::crf::{CrfWeights, EncodedSequence, LABELS, PREV_STATES};
use termex::embeddings::SentenceVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every labelling of length `n`, position 0 first, bit set = O.
pub fn all_labellings(n: usize) -> impl Iterator<Item = Vec<TokenLabel>> {
    (0..1u32 << n).map(move |bits| {
        (0..n).map(|i| if bits >> i & 1 == 1 { TokenLabel::O } else { TokenLabel::T }).collect()
    })
}

/// Unnormalized log score computed straight from the weights.
pub fn brute_score(w: &CrfWeights, features: &[Vec<usize>], labels: &[TokenLabel]) -> f64 {
    let mut score = 0.0;
    for (i, (ids, &y)) in features.iter().zip(labels).enumerate() {
        let prev_row = if i == 0 { 0 } else { labels[i - 1].index() + 1 };
        score += w.transition[prev_row][y.index()];
        for &f in ids {
            score += w.emission[f][y.index()];
        }
    }
    score
}

pub struct Enumeration {
    pub best: Vec<TokenLabel>,
    pub best_score: f64,
    pub log_z: f64,
    pub nodes: Vec<[f64; LABELS]>,
    pub edges: Vec<[[f64; LABELS]; LABELS]>,
}

/// Exhaustive inference over all `2^L` labellings.
pub fn enumerate(w: &CrfWeights, features: &[Vec<usize>]) -> Enumeration {
    let n = features.len();
    let scored: Vec<(Vec<TokenLabel>, f64)> = all_labellings(n).map(|y| {
        let s = brute_score(w, features, &y);
        (y, s)
    }).collect();
    let max = scored.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scored.iter().map(|(_, s)| (s - max).exp()).sum();
    let log_z = max + z.ln();
    let (best, best_score) = scored.iter().max_by(|a, b| a.1.total_cmp(&b.1)).cloned().unwrap();
    let mut nodes = vec![[0.0; LABELS]; n];
    let mut edges = vec![[[0.0; LABELS]; LABELS]; n.saturating_sub(1)];
    for (y, s) in &scored {
        let p = (s - log_z).exp();
        for i in 0..n {
            nodes[i][y[i].index()] += p;
            if i + 1 < n {
                edges[i][y[i].index()][y[i + 1].index()] += p;
            }
        }
    }
    Enumeration { best, best_score, log_z, nodes, edges }
}

/// Random weights in `[-scale, scale]` and random feature sets.
pub fn random_crf<R: Rng>(rng: &mut R, num_features: usize, len: usize, scale: f64) -> (CrfWeights, Vec<Vec<usize>>) {
    let mut w = CrfWeights::zeros(num_features);
    for row in w.emission.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
    }
    for row in w.transition.iter_mut().take(PREV_STATES) {
        for v in row.iter_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
    }
    let features = (0..len)
        .map(|_| (0..num_features).filter(|_| rng.gen_bool(0.4)).collect())
        .collect();
    (w, features)
}

pub fn random_labels<R: Rng>(rng: &mut R, len: usize) -> Vec<TokenLabel> {
    (0..len).map(|_| if rng.gen_bool(0.5) { TokenLabel::T } else { TokenLabel::O }).collect()
}

pub fn random_dataset<R: Rng>(rng: &mut R, num_features: usize, sequences: usize, max_len: usize) -> Vec<EncodedSequence> {
    (0..sequences)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let features = (0..len).map(|_| (0..num_features).filter(|_| rng.gen_bool(0.4)).collect()).collect();
            EncodedSequence { features, labels: random_labels(rng, len) }
        })
        .collect()
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + eps;
            let up = f(&probe);
            probe[i] = x[i] - eps;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest componentwise `|a − b| / max(|a|, |b|)`, skipping pairs where
/// both magnitudes are below `floor` (pure finite-difference noise).
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, b)| a.abs().max(b.abs()) >= floor)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
        .fold(0.0, f64::max)
}

/// F1 from its definition as the harmonic mean of precision and recall,
/// with every undefined ratio taken as zero.
pub fn rational_f1(tp: u64, fp: u64, fn_: u64) -> Ratio<u128> {
    let zero = Ratio::from_integer(0u128);
    if tp == 0 {
        return zero;
    }
    let p = Ratio::new(tp as u128, (tp + fp) as u128);
    let r = Ratio::new(tp as u128, (tp + fn_) as u128);
    Ratio::from_integer(2u128) * p * r / (p + r)
}

/// Two Gaussian clusters at `±(1, …, 1)` with standard deviation `sigma`,
/// alternating labels.
pub fn toy_clusters(seed: u64, n: usize, dim: usize, sigma: f64) -> Vec<(SentenceVector, SentenceLabel)> {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|i| {
            let (sign, label) = if i % 2 == 0 { (1.0, SentenceLabel::ContainsTech) } else { (-1.0, SentenceLabel::NoTech) };
            let values = (0..dim).map(|_| sign + noise.sample(&mut rng)).collect();
            (SentenceVector { values, contributing_count: 1 }, label)
        })
        .collect()
}

/// 500 sentences in which `alpha` and `beta` appear among the same
/// context words and `unrelated` among a disjoint set.
pub fn shared_context_corpus(seed: u64) -> Vec<Sentence> {
    const SHARED: &[&str] = &["river", "boat", "water", "fish", "bridge", "shore", "net", "dock"];
    const OTHER: &[&str] = &["piano", "violin", "concert", "melody", "choir", "drum", "stage", "song"];
    let mut rng = rng(seed);
    (0..500)
        .map(|i| {
            let (target, pool) = match i % 3 {
                0 => ("alpha", SHARED),
                1 => ("beta", SHARED),
                _ => ("unrelated", OTHER),
            };
            let mut words: Vec<&str> = (0..5).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
            words.insert(rng.gen_range(0..=words.len()), target);
            Sentence::from_words("ctx", i, &words)
        })
        .collect()
}

/// A quick configuration that still trains every stage to near-perfect
/// accuracy on the synthetic corpus.
pub fn small_config(seed: u64) -> termex::config::RunConfig {
    let mut config = termex::config::RunConfig::default();
    config.synth.n_sentences = 600;
    config.embeddings.dim = 20;
    config.crf.epochs = 150;
    config.set_seed(seed);
    config
}

pub fn small_run(seed: u64) -> termex::pipeline::PipelineOutcome {
    termex::pipeline::run(&termex::synth::default_gazetteer(), None, &small_config(seed)).unwrap()
}
