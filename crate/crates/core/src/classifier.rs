//! Stage I: softmax classifier over averaged sentence vectors.
//!
//! Logits are `B · A · x + bias`, where `A` is either fixed to the
//! identity or trained as a hidden projection. Training minimizes the
//! mean cross-entropy plus `(l2/2)(‖A‖² + ‖B‖²)` with mini-batch SGD and
//! keeps the epoch with the best validation F-score.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binio::{ModelIoError, Reader, Writer};
use crate::corpus::SentenceLabel;
use crate::embeddings::SentenceVector;
use crate::eval::ConfusionCounts;

pub const CLASSES: usize = 2;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("expected input dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: loss is {0}")]
    NonFinite(f64),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub d: usize,
    pub h: usize,
    pub use_hidden: bool,
    /// `h × d`, row-major. Identity unless `use_hidden`.
    pub a: Vec<f64>,
    /// `2 × h`, row-major; row 0 scores ContainsTech, row 1 NoTech.
    pub b: Vec<f64>,
    pub bias: [f64; CLASSES],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: SentenceLabel,
    /// Indexed by [`SentenceLabel::index`].
    pub probabilities: [f64; CLASSES],
}

/// Softmax over two logits, computed from the max-shifted values.
pub fn softmax(z: [f64; CLASSES]) -> [f64; CLASSES] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

fn log_softmax(z: [f64; CLASSES]) -> [f64; CLASSES] {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    [z[0] - lse, z[1] - lse]
}

/// Label for a pair of logits; ties go to NoTech.
pub fn label_of(logits: [f64; CLASSES]) -> SentenceLabel {
    let pos = SentenceLabel::ContainsTech.index();
    let neg = SentenceLabel::NoTech.index();
    if logits[pos] > logits[neg] {
        SentenceLabel::ContainsTech
    } else {
        SentenceLabel::NoTech
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    a
}

impl ClassifierModel {
    /// All-zero output layer with `A` = identity.
    pub fn zeros(d: usize, use_hidden: bool) -> Self {
        ClassifierModel { d, h: d, use_hidden, a: identity(d), b: vec![0.0; CLASSES * d], bias: [0.0; CLASSES] }
    }

    /// Identity `A`, `B` uniform in `[−0.01, 0.01]`, zero bias.
    pub fn initialize(d: usize, use_hidden: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ClassifierModel::zeros(d, use_hidden);
        m.b.iter_mut().for_each(|w| *w = rng.gen_range(-0.01..=0.01));
        m
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ClassifierError> {
        if x.len() != self.d {
            return Err(ClassifierError::DimensionMismatch { expected: self.d, got: x.len() });
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        if !self.use_hidden {
            return x.to_vec();
        }
        self.a.chunks_exact(self.d).map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum()).collect()
    }

    fn logits_of_hidden(&self, hidden: &[f64]) -> [f64; CLASSES] {
        let mut z = self.bias;
        for (c, row) in self.b.chunks_exact(self.h).enumerate() {
            z[c] += row.iter().zip(hidden).map(|(w, v)| w * v).sum::<f64>();
        }
        z
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; CLASSES], ClassifierError> {
        self.check_dim(x)?;
        Ok(self.logits_of_hidden(&self.hidden(x)))
    }

    pub fn predict(&self, v: &SentenceVector) -> Result<Prediction, ClassifierError> {
        let z = self.logits(&v.values)?;
        Ok(Prediction { label: label_of(z), probabilities: softmax(z) })
    }

    pub fn squared_norm(&self) -> f64 {
        let b: f64 = self.b.iter().map(|w| w * w).sum();
        let a: f64 = if self.use_hidden { self.a.iter().map(|w| w * w).sum() } else { 0.0 };
        a + b
    }

    fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.b).chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), ModelIoError> {
        let mut w = Writer::new(writer);
        w.header(CLF_MAGIC, CLF_VERSION)?;
        w.u32(self.d as u32)?;
        w.u32(self.h as u32)?;
        w.u8(self.use_hidden as u8)?;
        w.f64s(&self.a)?;
        w.f64s(&self.b)?;
        w.f64s(&self.bias)?;
        w.finish()?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, ModelIoError> {
        let mut r = Reader::new(reader);
        r.header(CLF_MAGIC, CLF_VERSION)?;
        let d = r.u32()? as usize;
        let h = r.u32()? as usize;
        let use_hidden = match r.u8()? {
            0 => false,
            1 => true,
            x => return Err(ModelIoError::Invalid(format!("use_hidden flag {x}"))),
        };
        if d == 0 || h == 0 || (!use_hidden && h != d) {
            return Err(ModelIoError::Invalid(format!("shape d={d} h={h} use_hidden={use_hidden}")));
        }
        let a = r.f64s(h * d)?;
        let b = r.f64s(CLASSES * h)?;
        let bias = r.f64s(CLASSES)?;
        r.end()?;
        Ok(ClassifierModel { d, h, use_hidden, a, b, bias: [bias[0], bias[1]] })
    }
}

const CLF_MAGIC: &[u8; 4] = b"TXCL";
const CLF_VERSION: u32 = 1;

/// Mean cross-entropy `−(1/N) Σ log softmax(B·A·x_n + bias)[y_n]`.
pub fn loss(model: &ClassifierModel, batch: &[(SentenceVector, SentenceLabel)]) -> Result<f64, ClassifierError> {
    if batch.is_empty() {
        return Err(ClassifierError::Config("empty batch".into()));
    }
    let mut total = 0.0;
    for (x, y) in batch {
        total -= log_softmax(model.logits(&x.values)?)[y.index()];
    }
    Ok(total / batch.len() as f64)
}

/// Gradient with the same shape as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierGradient {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub bias: [f64; CLASSES],
}

/// Regularized objective `loss + (l2/2)‖weights‖²` and its gradient. The
/// `a` gradient is all zeros when the hidden layer is fixed.
pub fn objective_gradient(
    model: &ClassifierModel,
    batch: &[(SentenceVector, SentenceLabel)],
    l2: f64,
) -> Result<(f64, ClassifierGradient), ClassifierError> {
    let n = batch.len() as f64;
    let mut grad = ClassifierGradient { a: vec![0.0; model.a.len()], b: vec![0.0; model.b.len()], bias: [0.0; CLASSES] };
    let mut total = 0.0;
    for (x, y) in batch {
        model.check_dim(&x.values)?;
        let hidden = model.hidden(&x.values);
        let z = model.logits_of_hidden(&hidden);
        total -= log_softmax(z)[y.index()];
        let p = softmax(z);
        let dz = [(p[0] - (y.index() == 0) as u8 as f64) / n, (p[1] - (y.index() == 1) as u8 as f64) / n];
        for c in 0..CLASSES {
            grad.bias[c] += dz[c];
            for (g, hv) in grad.b[c * model.h..(c + 1) * model.h].iter_mut().zip(&hidden) {
                *g += dz[c] * hv;
            }
        }
        if model.use_hidden {
            for k in 0..model.h {
                let dh = dz[0] * model.b[k] + dz[1] * model.b[model.h + k];
                for (g, xv) in grad.a[k * model.d..(k + 1) * model.d].iter_mut().zip(&x.values) {
                    *g += dh * xv;
                }
            }
        }
    }
    grad.b.iter_mut().zip(&model.b).for_each(|(g, w)| *g += l2 * w);
    if model.use_hidden {
        grad.a.iter_mut().zip(&model.a).for_each(|(g, w)| *g += l2 * w);
    }
    Ok((total / n + 0.5 * l2 * model.squared_norm(), grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub use_hidden: bool,
    pub batch_size: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { epochs: 50, learning_rate: 0.5, l2: 0.0, seed: 1, use_hidden: false, batch_size: 32 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ClassifierError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(ClassifierError::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if self.batch_size == 0 {
            return Err(ClassifierError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifierTrainingReport {
    /// Unregularized mean training loss after each epoch.
    pub train_loss: Vec<f64>,
    /// Validation (or training, when no validation set is given) F-score
    /// after each epoch.
    pub validation_f: Vec<f64>,
    /// Epoch whose parameters were returned; `None` for the initialization.
    pub best_epoch: Option<usize>,
}

fn f_score(model: &ClassifierModel, data: &[(SentenceVector, SentenceLabel)]) -> f64 {
    let mut counts = ConfusionCounts::default();
    for (x, y) in data {
        let pred = label_of(model.logits_of_hidden(&model.hidden(&x.values)));
        counts.record(y.is_positive(), pred.is_positive());
    }
    counts.f_score()
}

/// Mini-batch SGD from a seeded initialization, returning the parameters
/// of the epoch with the best validation F-score (earliest on ties).
pub fn train_classifier(
    train: &[(SentenceVector, SentenceLabel)],
    validation: &[(SentenceVector, SentenceLabel)],
    config: &ClassifierConfig,
) -> Result<(ClassifierModel, ClassifierTrainingReport), ClassifierError> {
    config.validate()?;
    let d = train.first().ok_or_else(|| ClassifierError::Config("empty training set".into()))?.0.dim();
    let mut model = ClassifierModel::initialize(d, config.use_hidden, config.seed);
    for (x, _) in train.iter().chain(validation) {
        model.check_dim(&x.values)?;
    }
    let select_on = if validation.is_empty() { train } else { validation };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = ClassifierTrainingReport::default();
    let mut best = (f64::NEG_INFINITY, model.clone());
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (_, g) = objective_gradient(&model, &batch, config.l2)?;
            apply(&mut model, &g, config.learning_rate);
        }
        if !model.is_finite() {
            return Err(ClassifierError::NonFinite(f64::NAN));
        }
        let l = loss(&model, train)?;
        if !l.is_finite() {
            return Err(ClassifierError::NonFinite(l));
        }
        report.train_loss.push(l);
        let f = f_score(&model, select_on);
        report.validation_f.push(f);
        if f > best.0 {
            best = (f, model.clone());
            report.best_epoch = Some(epoch);
        }
    }
    Ok((if config.epochs == 0 { model } else { best.1 }, report))
}

fn apply(model: &mut ClassifierModel, g: &ClassifierGradient, lr: f64) {
    model.b.iter_mut().zip(&g.b).for_each(|(w, d)| *w -= lr * d);
    model.bias.iter_mut().zip(&g.bias).for_each(|(w, d)| *w -= lr * d);
    if model.use_hidden {
        model.a.iter_mut().zip(&g.a).for_each(|(w, d)| *w -= lr * d);
    }
}
