//! Linear-chain CRF over the labels {T, O}.
//!
//! The log clique potential at position `i` is the transition weight from
//! the previous state (BOS at `i = 0`) plus the emission weights of every
//! feature fired at `i` for the current label. Training maximizes the
//! L2-regularized conditional log-likelihood by batch gradient ascent.

mod inference;

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binio::{ModelIoError, Reader, Writer};
use crate::corpus::TokenLabel;
use crate::features::{FeatureConfig, FeatureIndex, SparseFeatures};

pub use inference::{
    backward, forward, log_partition, marginals, sequence_log_prob, sequence_score, viterbi, Marginals,
    PotentialTable,
};

pub const LABELS: usize = 2;
/// Rows of the transition matrix: BOS, then one per label.
pub const PREV_STATES: usize = LABELS + 1;
const BOS_ROW: usize = 0;

fn prev_row(label: TokenLabel) -> usize {
    label.index() + 1
}

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("expected {expected} labels, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: objective is {0}")]
    NonFinite(f64),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
}

/// Emission weights (one row per feature id, one column per label) and
/// transition weights (rows BOS, T, O; columns T, O).
#[derive(Debug, Clone, PartialEq)]
pub struct CrfWeights {
    pub emission: Vec<[f64; LABELS]>,
    pub transition: [[f64; LABELS]; PREV_STATES],
}

impl CrfWeights {
    pub fn zeros(num_features: usize) -> Self {
        CrfWeights { emission: vec![[0.0; LABELS]; num_features], transition: [[0.0; LABELS]; PREV_STATES] }
    }

    pub fn num_features(&self) -> usize {
        self.emission.len()
    }

    pub fn num_params(&self) -> usize {
        self.emission.len() * LABELS + PREV_STATES * LABELS
    }

    /// Flat parameter vector: emissions row-major, then transitions.
    pub fn to_vec(&self) -> Vec<f64> {
        self.emission.iter().chain(self.transition.iter()).flatten().copied().collect()
    }

    pub fn from_slice(num_features: usize, params: &[f64]) -> Self {
        assert_eq!(params.len(), num_features * LABELS + PREV_STATES * LABELS);
        let mut w = CrfWeights::zeros(num_features);
        let (em, tr) = params.split_at(num_features * LABELS);
        for (row, chunk) in w.emission.iter_mut().zip(em.chunks_exact(LABELS)) {
            row.copy_from_slice(chunk);
        }
        for (row, chunk) in w.transition.iter_mut().zip(tr.chunks_exact(LABELS)) {
            row.copy_from_slice(chunk);
        }
        w
    }

    pub fn squared_norm(&self) -> f64 {
        self.emission.iter().chain(self.transition.iter()).flatten().map(|v| v * v).sum()
    }

    fn add_scaled(&mut self, other: &CrfWeights, scale: f64) {
        for (a, b) in self.emission.iter_mut().zip(&other.emission) {
            a[0] += scale * b[0];
            a[1] += scale * b[1];
        }
        for (a, b) in self.transition.iter_mut().zip(&other.transition) {
            a[0] += scale * b[0];
            a[1] += scale * b[1];
        }
    }

    fn is_finite(&self) -> bool {
        self.emission.iter().chain(self.transition.iter()).flatten().all(|v| v.is_finite())
    }

    /// Potential table for a sentence given the feature ids fired at each
    /// position. Ids outside the emission table are ignored.
    pub fn potentials(&self, features: &[Vec<usize>]) -> PotentialTable {
        if features.is_empty() {
            return PotentialTable::empty();
        }
        let node = |ids: &[usize]| {
            let mut score = [0.0; LABELS];
            for row in ids.iter().filter_map(|&f| self.emission.get(f)) {
                score[0] += row[0];
                score[1] += row[1];
            }
            score
        };
        let first = node(&features[0]);
        let initial = [self.transition[BOS_ROW][0] + first[0], self.transition[BOS_ROW][1] + first[1]];
        let steps = features[1..]
            .iter()
            .map(|ids| {
                let n = node(ids);
                let mut step = [[0.0; LABELS]; LABELS];
                for p in TokenLabel::ALL {
                    for s in 0..LABELS {
                        step[p.index()][s] = self.transition[prev_row(p)][s] + n[s];
                    }
                }
                step
            })
            .collect();
        PotentialTable::new(initial, steps)
    }
}

/// A training sequence with features already mapped to ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub features: Vec<Vec<usize>>,
    pub labels: Vec<TokenLabel>,
}

/// `Σ log p(gold) − (l2/2)‖w‖²`.
pub fn log_likelihood(weights: &CrfWeights, data: &[EncodedSequence], l2: f64) -> f64 {
    let ll: f64 = data
        .iter()
        .map(|s| sequence_log_prob(&weights.potentials(&s.features), &s.labels).expect("aligned sequence"))
        .sum();
    ll - 0.5 * l2 * weights.squared_norm()
}

fn accumulate(weights: &CrfWeights, seq: &EncodedSequence, grad: &mut CrfWeights) -> f64 {
    let table = weights.potentials(&seq.features);
    let m = marginals(&table);
    let score = sequence_score(&table, &seq.labels).expect("aligned sequence");
    for (i, ids) in seq.features.iter().enumerate() {
        let gold = seq.labels[i].index();
        let n = grad.emission.len();
        for &f in ids.iter().filter(|&&f| f < n) {
            grad.emission[f][gold] += 1.0;
            grad.emission[f][0] -= m.nodes[i][0];
            grad.emission[f][1] -= m.nodes[i][1];
        }
    }
    if let Some(first) = seq.labels.first() {
        grad.transition[BOS_ROW][first.index()] += 1.0;
        grad.transition[BOS_ROW][0] -= m.nodes[0][0];
        grad.transition[BOS_ROW][1] -= m.nodes[0][1];
    }
    for (i, edge) in m.edges.iter().enumerate() {
        grad.transition[prev_row(seq.labels[i])][seq.labels[i + 1].index()] += 1.0;
        for p in TokenLabel::ALL {
            for s in 0..LABELS {
                grad.transition[prev_row(p)][s] -= edge[p.index()][s];
            }
        }
    }
    score - m.log_z
}

const GRADIENT_CHUNK: usize = 64;

/// Regularized log-likelihood and its gradient (observed minus expected
/// feature counts minus `l2 · w`).
///
/// Sequences are processed in fixed chunks that may run in parallel; the
/// chunk results are summed in dataset order, so the result does not
/// depend on the number of threads.
pub fn gradient(weights: &CrfWeights, data: &[EncodedSequence], l2: f64) -> (f64, CrfWeights) {
    let partials: Vec<(f64, CrfWeights)> = data
        .par_chunks(GRADIENT_CHUNK)
        .map(|chunk| {
            let mut g = CrfWeights::zeros(weights.num_features());
            let ll = chunk.iter().map(|s| accumulate(weights, s, &mut g)).sum::<f64>();
            (ll, g)
        })
        .collect();
    let mut grad = CrfWeights::zeros(weights.num_features());
    let mut ll = 0.0;
    for (l, g) in &partials {
        ll += l;
        grad.add_scaled(g, 1.0);
    }
    grad.add_scaled(weights, -l2);
    (ll - 0.5 * l2 * weights.squared_norm(), grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrfConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Kept for interface symmetry with the other trainers; batch ascent
    /// from zero weights has no random component.
    pub seed: u64,
    /// Features seen fewer times than this in training are not indexed.
    pub min_feature_count: usize,
    pub features: FeatureConfig,
}

impl Default for CrfConfig {
    fn default() -> Self {
        CrfConfig {
            epochs: 300,
            learning_rate: 2e-4,
            l2: 1.0,
            seed: 0,
            min_feature_count: 2,
            features: FeatureConfig::default(),
        }
    }
}

impl CrfConfig {
    pub fn validate(&self) -> Result<(), CrfError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(CrfError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(CrfError::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if self.min_feature_count == 0 {
            return Err(CrfError::Config("min_feature_count must be at least 1".into()));
        }
        let f = &self.features;
        if f.ngram_min == 0 || f.ngram_min > f.ngram_max {
            return Err(CrfError::Config(format!("bad n-gram range {}..={}", f.ngram_min, f.ngram_max)));
        }
        Ok(())
    }
}

/// Per-epoch regularized log-likelihood, measured before that epoch's
/// update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrfTrainingReport {
    pub objective: Vec<f64>,
}

impl CrfTrainingReport {
    pub fn negative_log_likelihood(&self) -> impl Iterator<Item = f64> + '_ {
        self.objective.iter().map(|v| -v)
    }
}

/// Batch gradient ascent from zero weights.
pub fn fit(
    data: &[EncodedSequence],
    num_features: usize,
    config: &CrfConfig,
) -> Result<(CrfWeights, CrfTrainingReport), CrfError> {
    config.validate()?;
    let mut weights = CrfWeights::zeros(num_features);
    let mut report = CrfTrainingReport::default();
    for _ in 0..config.epochs {
        let (objective, grad) = gradient(&weights, data, config.l2);
        if !objective.is_finite() {
            return Err(CrfError::NonFinite(objective));
        }
        report.objective.push(objective);
        weights.add_scaled(&grad, config.learning_rate);
        if !weights.is_finite() {
            return Err(CrfError::NonFinite(f64::NAN));
        }
    }
    Ok((weights, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    pub feature_index: FeatureIndex,
    pub weights: CrfWeights,
    pub l2: f64,
    pub features: FeatureConfig,
}

impl CrfModel {
    pub fn encode(&self, features: &[SparseFeatures]) -> Vec<Vec<usize>> {
        features.iter().map(|f| self.feature_index.encode(f)).collect()
    }

    pub fn potentials(&self, features: &[SparseFeatures]) -> PotentialTable {
        self.weights.potentials(&self.encode(features))
    }

    pub fn viterbi(&self, features: &[SparseFeatures]) -> Vec<TokenLabel> {
        viterbi(&self.potentials(features))
    }

    pub fn emission(&self, feature: &str) -> Option<[f64; LABELS]> {
        self.feature_index.get(feature).map(|id| self.weights.emission[id])
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), ModelIoError> {
        let mut w = Writer::new(writer);
        w.header(CRF_MAGIC, CRF_VERSION)?;
        for label in TokenLabel::ALL {
            w.str(label.as_str())?;
        }
        w.f64(self.l2)?;
        w.u32(self.features.ngram_min as u32)?;
        w.u32(self.features.ngram_max as u32)?;
        w.u32(self.features.window as u32)?;
        w.u64(self.feature_index.len() as u64)?;
        for name in self.feature_index.names() {
            w.str(name)?;
        }
        for row in &self.weights.emission {
            w.f64s(row)?;
        }
        for row in &self.weights.transition {
            w.f64s(row)?;
        }
        w.finish()?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, ModelIoError> {
        let mut r = Reader::new(reader);
        r.header(CRF_MAGIC, CRF_VERSION)?;
        for label in TokenLabel::ALL {
            let got = r.str()?;
            if got != label.as_str() {
                return Err(ModelIoError::Invalid(format!("label order: expected {label}, found {got:?}")));
            }
        }
        let l2 = r.f64()?;
        let features = FeatureConfig {
            ngram_min: r.u32()? as usize,
            ngram_max: r.u32()? as usize,
            window: r.u32()? as usize,
        };
        let n = r.u64()? as usize;
        let names = (0..n).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
        let feature_index = FeatureIndex::from_names(names);
        if feature_index.len() != n {
            return Err(ModelIoError::Invalid("duplicate feature names".into()));
        }
        let emission_flat = r.f64s(n * LABELS)?;
        let transition_flat = r.f64s(PREV_STATES * LABELS)?;
        r.end()?;
        let mut flat = emission_flat;
        flat.extend(transition_flat);
        Ok(CrfModel { feature_index, weights: CrfWeights::from_slice(n, &flat), l2, features })
    }
}

const CRF_MAGIC: &[u8; 4] = b"TXCR";
const CRF_VERSION: u32 = 1;

/// Builds the feature index from the training data, then fits the weights.
pub fn train_crf(
    dataset: &[(Vec<SparseFeatures>, Vec<TokenLabel>)],
    config: &CrfConfig,
) -> Result<(CrfModel, CrfTrainingReport), CrfError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(CrfError::Config("empty training set".into()));
    }
    for (feats, labels) in dataset {
        if feats.len() != labels.len() {
            return Err(CrfError::LengthMismatch { expected: feats.len(), got: labels.len() });
        }
    }
    let index = FeatureIndex::build(dataset.iter().flat_map(|(f, _)| f), config.min_feature_count);
    let encoded: Vec<EncodedSequence> = dataset
        .iter()
        .map(|(f, l)| EncodedSequence { features: f.iter().map(|x| index.encode(x)).collect(), labels: l.clone() })
        .collect();
    let (weights, report) = fit(&encoded, index.len(), config)?;
    Ok((CrfModel { feature_index: index, weights, l2: config.l2, features: config.features }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenLabel::{O, T};

    fn feats(names: &[&[&str]]) -> Vec<SparseFeatures> {
        names
            .iter()
            .map(|ns| SparseFeatures { fired: ns.iter().map(|s| s.to_string()).collect() })
            .collect()
    }

    fn model_with(names: &[&str], emission: Vec<[f64; 2]>) -> CrfModel {
        CrfModel {
            feature_index: FeatureIndex::from_names(names.iter().map(|s| s.to_string()).collect()),
            weights: CrfWeights { emission, transition: [[0.0; 2]; 3] },
            l2: 1.0,
            features: FeatureConfig::default(),
        }
    }

    #[test]
    fn zero_model_potentials() {
        let m = model_with(&["a"], vec![[0.0, 0.0]]);
        let t = m.potentials(&feats(&[&["a"], &["b"]]));
        assert_eq!(t.initial(), Some(&[0.0, 0.0]));
        assert!(t.steps().iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn emission_additivity() {
        let m = model_with(&["hot"], vec![[2.0, 0.0]]);
        let t = m.potentials(&feats(&[&[], &["hot", "unknown"]]));
        for p in TokenLabel::ALL {
            assert_eq!(t.log_phi(1, p, T) - t.log_phi(1, p, O), 2.0);
        }
        assert_eq!(t.log_phi(0, O, T), t.log_phi(0, O, O));
    }

    #[test]
    fn transition_shift_leaves_probabilities() {
        let mut m = model_with(&["a", "b"], vec![[0.4, -0.3], [1.1, 0.2]]);
        m.weights.transition = [[0.1, -0.2], [0.5, 0.3], [-0.7, 0.9]];
        let fs = feats(&[&["a"], &["b"], &["a", "b"]]);
        let labels = [T, O, T];
        let before = sequence_log_prob(&m.potentials(&fs), &labels).unwrap();
        let t0 = m.potentials(&fs);
        m.weights.transition.iter_mut().flatten().for_each(|v| *v += 3.0);
        let t1 = m.potentials(&fs);
        for i in 0..3 {
            for p in TokenLabel::ALL {
                for s in TokenLabel::ALL {
                    assert!((t1.log_phi(i, p, s) - t0.log_phi(i, p, s) - 3.0).abs() < 1e-12);
                }
            }
        }
        let after = sequence_log_prob(&t1, &labels).unwrap();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn viterbi_dominance() {
        let m = model_with(&["x"], vec![[10.0, 0.0]]);
        assert_eq!(m.viterbi(&feats(&[&[], &["x"], &[]])), [O, T, O]);
        let zero = model_with(&[], vec![]);
        assert_eq!(zero.viterbi(&feats(&[&["q"], &[], &[]])), [O, O, O]);
    }

    #[test]
    fn zero_epochs_gives_zero_model() {
        let data = vec![(feats(&[&["a"], &["a"]]), vec![T, O])];
        let config = CrfConfig { epochs: 0, min_feature_count: 1, ..Default::default() };
        let (m, report) = train_crf(&data, &config).unwrap();
        assert!(m.weights.to_vec().iter().all(|&v| v == 0.0));
        assert!(report.objective.is_empty());
    }

    #[test]
    fn config_errors() {
        let data = vec![(feats(&[&["a"]]), vec![T])];
        for bad in [
            CrfConfig { learning_rate: 0.0, ..Default::default() },
            CrfConfig { l2: -1.0, ..Default::default() },
            CrfConfig { min_feature_count: 0, ..Default::default() },
        ] {
            assert!(matches!(train_crf(&data, &bad), Err(CrfError::Config(_))));
        }
        assert!(matches!(train_crf(&[], &CrfConfig::default()), Err(CrfError::Config(_))));
        let ragged = vec![(feats(&[&["a"]]), vec![T, O])];
        assert!(matches!(train_crf(&ragged, &CrfConfig::default()), Err(CrfError::LengthMismatch { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let mut m = model_with(&["a", "b=c"], vec![[0.25, -1.5], [3.0, 0.0]]);
        m.weights.transition = [[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]];
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(CrfModel::load(&buf[..]).unwrap(), m);

        buf[0] = b'X';
        assert!(matches!(CrfModel::load(&buf[..]), Err(ModelIoError::BadMagic { .. })));
        let mut short = Vec::new();
        m.save(&mut short).unwrap();
        short.truncate(short.len() - 3);
        assert!(CrfModel::load(&short[..]).is_err());
    }
}
