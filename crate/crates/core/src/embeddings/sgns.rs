use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_vocab, encoded_pairs, EmbeddingError, EmbeddingModel};
use crate::corpus::Sentence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
    pub seed: u64,
    /// 1 trains deterministically; more workers apply lock-free updates
    /// to shared matrices and are not reproducible.
    pub threads: usize,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 1,
            threads: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let checks = [
            (self.dim == 0, "dim"),
            (self.window == 0, "window"),
            (self.negatives == 0, "negatives"),
            (self.min_count == 0, "min_count"),
            (self.threads == 0, "threads"),
            (!(self.learning_rate.is_finite() && self.learning_rate > 0.0), "learning_rate"),
        ];
        match checks.iter().find(|(bad, _)| *bad) {
            Some((_, name)) => Err(EmbeddingError::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

/// Draws negative words with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Self {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / total).collect();
        let dist = WeightedIndex::new(&weights).expect("positive counts");
        NegativeSampler { dist, probs }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `−log σ(u_ctx·v) − Σ_k log σ(−u_k·v)` for one (center, context) pair.
pub fn negative_sampling_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    -log_sigmoid(dot(context, center)) - negatives.iter().map(|u| log_sigmoid(-dot(u, center))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Gradient of [`negative_sampling_loss`] with respect to every vector.
pub fn negative_sampling_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let mut d_center = vec![0.0; center.len()];
    // d/dx of −log σ(x) is σ(x) − 1; of −log σ(−x) is σ(x).
    let g = sigmoid(dot(context, center)) - 1.0;
    d_center.iter_mut().zip(context).for_each(|(d, u)| *d += g * u);
    let d_context = center.iter().map(|v| g * v).collect();
    let d_negatives = negatives
        .iter()
        .map(|u| {
            let g = sigmoid(dot(u, center));
            d_center.iter_mut().zip(u.iter()).for_each(|(d, x)| *d += g * x);
            center.iter().map(|v| g * v).collect()
        })
        .collect();
    PairGradient {
        loss: negative_sampling_loss(center, context, negatives),
        center: d_center,
        context: d_context,
        negatives: d_negatives,
    }
}

/// One SGD step against a single target (the context word with label 1,
/// or a negative with label 0): moves `target` and accumulates the center
/// word's step into `center_step`, both evaluated at the current vectors.
fn target_step(target: &mut [f64], center: &[f64], center_step: &mut [f64], label: f64, lr: f64) {
    let g = lr * (label - sigmoid(dot(target, center)));
    center_step.iter_mut().zip(target.iter()).for_each(|(a, x)| *a += g * x);
    target.iter_mut().zip(center).for_each(|(x, c)| *x += g * c);
}

/// Row-major matrix of f64 bit patterns. Workers load and store rows
/// without locking; with one worker this is ordinary sequential SGD.
struct SharedMatrix {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl SharedMatrix {
    fn from_values(values: Vec<f64>, dim: usize) -> Self {
        SharedMatrix { data: values.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect(), dim }
    }

    fn read(&self, row: usize, out: &mut [f64]) {
        let cells = &self.data[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn write(&self, row: usize, values: &[f64]) {
        let cells = &self.data[row * self.dim..(row + 1) * self.dim];
        for (c, v) in cells.iter().zip(values) {
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_values(self) -> Vec<f64> {
        self.data.into_iter().map(|c| f64::from_bits(c.into_inner())).collect()
    }
}

struct Trainer<'a> {
    input: SharedMatrix,
    output: SharedMatrix,
    sampler: NegativeSampler,
    config: &'a SkipgramConfig,
    processed: AtomicU64,
    total_pairs: u64,
}

impl Trainer<'_> {
    fn learning_rate(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64 / self.total_pairs.max(1) as f64;
        self.config.learning_rate * (1.0 - (1.0 - 1e-4) * done.min(1.0))
    }

    fn run<R: Rng>(&self, sentences: &[&[Option<usize>]], rng: &mut R) {
        let dim = self.config.dim;
        let (mut v, mut u, mut grad_v) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
        for ids in sentences {
            for (center, ctx) in encoded_pairs(ids, self.config.window) {
                let lr = self.learning_rate();
                self.input.read(center, &mut v);
                grad_v.fill(0.0);
                let targets = std::iter::once((ctx, 1.0))
                    .chain((0..self.config.negatives).map(|_| (self.sampler.sample(rng), 0.0)));
                for (target, label) in targets {
                    if label == 0.0 && target == ctx {
                        continue;
                    }
                    self.output.read(target, &mut u);
                    target_step(&mut u, &v, &mut grad_v, label, lr);
                    self.output.write(target, &u);
                }
                v.iter_mut().zip(&grad_v).for_each(|(a, g)| *a += g);
                self.input.write(center, &v);
                self.processed.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

/// Trains skipgram vectors on `corpus`.
///
/// Input vectors start uniform in `[−0.5/dim, 0.5/dim]`, output vectors at
/// zero. Each epoch visits the sentences in a seeded random order; the
/// learning rate decays linearly to `1e-4` of its initial value over all
/// pairs. Negatives equal to the context word are skipped.
pub fn train_skipgram(corpus: &[Sentence], config: &SkipgramConfig) -> Result<EmbeddingModel, EmbeddingError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(EmbeddingError::Config("empty corpus".into()));
    }
    let vocab = build_vocab(corpus, config.min_count)?;
    let encoded: Vec<Vec<Option<usize>>> = corpus.iter().map(|s| vocab.encode(s)).collect();
    let per_epoch: u64 = encoded.iter().map(|ids| encoded_pairs(ids, config.window).len() as u64).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let half = 0.5 / dim as f64;
    let init: Vec<f64> = (0..vocab.len() * dim).map(|_| rng.gen_range(-half..=half)).collect();
    let trainer = Trainer {
        input: SharedMatrix::from_values(init, dim),
        output: SharedMatrix::from_values(vec![0.0; vocab.len() * dim], dim),
        sampler: NegativeSampler::new(vocab.counts()),
        config,
        processed: AtomicU64::new(0),
        total_pairs: per_epoch * config.epochs as u64,
    };

    let mut order: Vec<&[Option<usize>]> = encoded.iter().map(Vec::as_slice).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        if config.threads == 1 {
            let mut worker_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            trainer.run(&order, &mut worker_rng);
        } else {
            let shard = order.len().div_ceil(config.threads);
            let seeds: Vec<u64> = (0..config.threads).map(|_| rng.gen()).collect();
            std::thread::scope(|scope| {
                for (part, seed) in order.chunks(shard.max(1)).zip(&seeds) {
                    let trainer = &trainer;
                    scope.spawn(move || trainer.run(part, &mut ChaCha8Rng::seed_from_u64(*seed)));
                }
            });
        }
    }

    let Trainer { input, output, .. } = trainer;
    let (input, output) = (input.into_values(), output.into_values());
    if !input.iter().chain(&output).all(|v| v.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    Ok(EmbeddingModel { dim, vocab, input_vectors: input, output_vectors: output })
}
