use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabeledSentence, SentenceLabel};

/// Indices of a class-balanced subset of `labels`: every minority sentence
/// plus an equal-sized uniform sample (without replacement) of the
/// majority, returned in seeded shuffled order.
pub fn balanced_indices(labels: &[SentenceLabel], seed: u64) -> Result<Vec<usize>, CorpusError> {
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| labels[i].is_positive());
    if pos.is_empty() || neg.is_empty() {
        return Err(CorpusError::Degenerate { positives: pos.len(), negatives: neg.len() });
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = minority;
    let keep = index::sample(&mut rng, majority.len(), out.len());
    let mut picked: Vec<usize> = keep.into_iter().map(|k| majority[k]).collect();
    picked.sort_unstable();
    out.extend(picked);
    out.shuffle(&mut rng);
    Ok(out)
}

/// Random downsampling of the majority class to the minority count.
pub fn balance(sentences: &[LabeledSentence], seed: u64) -> Result<Vec<LabeledSentence>, CorpusError> {
    let labels: Vec<SentenceLabel> = sentences.iter().map(LabeledSentence::sentence_label).collect();
    Ok(balanced_indices(&labels, seed)?.into_iter().map(|i| sentences[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.7, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, CorpusError> {
        let r = SplitRatios { train, validation, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(CorpusError::Ratio(format!("ratios must be positive, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Ratio(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items; each part is within 1
    /// of its exact share and the parts always sum to `n`.
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let exact = [self.train, self.validation, self.test].map(|r| r * n as f64);
        let mut counts = exact.map(|x| x.floor() as usize);
        let mut left = n - counts.iter().sum::<usize>().min(n);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledSentence>,
    pub validation: Vec<LabeledSentence>,
    pub test: Vec<LabeledSentence>,
    pub seed: u64,
}

/// Stratified train/validation/test split. Each class is shuffled and
/// apportioned separately, then every part is shuffled.
pub fn split_dataset(
    sentences: Vec<LabeledSentence>,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<LabeledSentence>; 3] = Default::default();
    let mut slots: Vec<Option<LabeledSentence>> = sentences.into_iter().map(Some).collect();
    for class in SentenceLabel::ALL {
        let mut members: Vec<usize> = (0..slots.len())
            .filter(|&i| slots[i].as_ref().is_some_and(|s| s.sentence_label() == class))
            .collect();
        members.shuffle(&mut rng);
        let counts = ratios.apportion(members.len());
        let mut it = members.into_iter();
        for (part, count) in parts.iter_mut().zip(counts) {
            part.extend(it.by_ref().take(count).map(|i| slots[i].take().expect("index used once")));
        }
    }
    for part in parts.iter_mut() {
        part.shuffle(&mut rng);
    }
    let [train, validation, test] = parts;
    Ok(DatasetSplit { train, validation, test, seed })
}
