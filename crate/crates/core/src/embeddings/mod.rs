//! Word-level skipgram embeddings trained with negative sampling, and
//! sentence vectors built by averaging word vectors.

mod sgns;

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use thiserror::Error;

use crate::binio::{ModelIoError, Reader, Writer};
use crate::corpus::Sentence;

pub use sgns::{
    negative_sampling_gradient, negative_sampling_loss, train_skipgram, NegativeSampler, PairGradient,
    SkipgramConfig,
};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("no word reaches the minimum count")]
    EmptyVocabulary,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: embedding values are not finite")]
    NonFinite,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Words ordered by descending count, ties alphabetically.
    fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self, EmbeddingError> {
        let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        if kept.is_empty() {
            return Err(EmbeddingError::EmptyVocabulary);
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (words, counts): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Vocabulary { words, counts, index, min_count })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Index of an already case-folded word.
    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Index of a token, case-folding it first.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.get(&token.to_lowercase())
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn encode(&self, sentence: &Sentence) -> Vec<Option<usize>> {
        sentence.tokens.iter().map(|t| self.lookup(&t.text)).collect()
    }
}

/// Case-folded token counts, keeping words seen at least `min_count` times.
pub fn build_vocab(corpus: &[Sentence], min_count: u64) -> Result<Vocabulary, EmbeddingError> {
    if min_count == 0 {
        return Err(EmbeddingError::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for token in corpus.iter().flat_map(|s| &s.tokens) {
        *counts.entry(token.folded()).or_default() += 1;
    }
    Vocabulary::from_counts(counts, min_count)
}

/// Skipgram (center, context) pairs over encoded positions. Out-of-vocabulary
/// positions keep their slot in the window but emit nothing.
pub fn encoded_pairs(ids: &[Option<usize>], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, center) in ids.iter().enumerate() {
        let Some(center) = *center else { continue };
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(ids.len().saturating_sub(1));
        for j in lo..=hi {
            if j != i {
                if let Some(ctx) = ids[j] {
                    pairs.push((center, ctx));
                }
            }
        }
    }
    pairs
}

pub fn generate_pairs(vocab: &Vocabulary, sentence: &Sentence, window: usize) -> Vec<(usize, usize)> {
    encoded_pairs(&vocab.encode(sentence), window)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector {
    pub values: Vec<f64>,
    /// Number of in-vocabulary tokens averaged; 0 means the zero vector.
    pub contributing_count: usize,
}

impl SentenceVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub dim: usize,
    pub vocab: Vocabulary,
    /// `|V| × dim`, row-major.
    pub input_vectors: Vec<f64>,
    /// `|V| × dim`, row-major.
    pub output_vectors: Vec<f64>,
}

impl EmbeddingModel {
    pub fn vector(&self, id: usize) -> &[f64] {
        &self.input_vectors[id * self.dim..(id + 1) * self.dim]
    }

    pub fn word_vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.lookup(word).map(|id| self.vector(id))
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.word_vector(a)?, self.word_vector(b)?))
    }

    /// Mean of the input vectors of in-vocabulary tokens.
    pub fn embed_sentence(&self, sentence: &Sentence) -> SentenceVector {
        let mut values = vec![0.0; self.dim];
        let mut n = 0;
        for id in self.vocab.encode(sentence).into_iter().flatten() {
            for (acc, v) in values.iter_mut().zip(self.vector(id)) {
                *acc += v;
            }
            n += 1;
        }
        if n > 0 {
            values.iter_mut().for_each(|v| *v /= n as f64);
        }
        SentenceVector { values, contributing_count: n }
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), ModelIoError> {
        let mut w = Writer::new(writer);
        w.header(EMB_MAGIC, EMB_VERSION)?;
        w.u32(self.dim as u32)?;
        w.u64(self.vocab.len() as u64)?;
        w.u64(self.vocab.min_count)?;
        for (word, &count) in self.vocab.words.iter().zip(&self.vocab.counts) {
            w.str(word)?;
            w.u64(count)?;
        }
        w.f64s(&self.input_vectors)?;
        w.f64s(&self.output_vectors)?;
        w.finish()?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, ModelIoError> {
        let mut r = Reader::new(reader);
        r.header(EMB_MAGIC, EMB_VERSION)?;
        let dim = r.u32()? as usize;
        let n = r.u64()? as usize;
        let min_count = r.u64()?;
        if dim == 0 || n == 0 {
            return Err(ModelIoError::Invalid(format!("dim {dim}, vocabulary {n}")));
        }
        let mut counts = HashMap::with_capacity(n);
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let word = r.str()?;
            let count = r.u64()?;
            if count < min_count || counts.insert(word.clone(), count).is_some() {
                return Err(ModelIoError::Invalid(format!("bad vocabulary entry {word:?}")));
            }
            order.push(word);
        }
        let vocab = Vocabulary::from_counts(counts, min_count).map_err(|e| ModelIoError::Invalid(e.to_string()))?;
        if vocab.words != order {
            return Err(ModelIoError::Invalid("vocabulary is not in canonical order".into()));
        }
        let input_vectors = r.f64s(n * dim)?;
        let output_vectors = r.f64s(n * dim)?;
        r.end()?;
        Ok(EmbeddingModel { dim, vocab, input_vectors, output_vectors })
    }

    /// Reads plain-text vectors, one `word v1 … vdim` per line. A leading
    /// `count dim` header line is accepted. Output vectors are zero.
    pub fn import_text<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut dim = None;
        for (n, line) in reader.lines().enumerate() {
            let err = |message: String| EmbeddingError::Parse { line: n + 1, message };
            let line = line.map_err(|e| err(e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() || (n == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| err("non-numeric vector component".into()))?;
            match dim {
                None if values.is_empty() => return Err(err("missing vector".into())),
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => return Err(err(format!("expected {d} components, got {}", values.len()))),
                _ => {}
            }
            rows.push((fields[0].to_lowercase(), values));
        }
        let dim = dim.ok_or(EmbeddingError::EmptyVocabulary)?;
        let mut counts = HashMap::new();
        for (w, _) in &rows {
            if counts.insert(w.clone(), 1).is_some() {
                return Err(EmbeddingError::Config(format!("duplicate word {w:?}")));
            }
        }
        let vocab = Vocabulary::from_counts(counts, 1)?;
        let mut input_vectors = vec![0.0; vocab.len() * dim];
        for (w, v) in rows {
            let id = vocab.get(&w).expect("inserted");
            input_vectors[id * dim..(id + 1) * dim].copy_from_slice(&v);
        }
        let output_vectors = vec![0.0; vocab.len() * dim];
        Ok(EmbeddingModel { dim, vocab, input_vectors, output_vectors })
    }
}

const EMB_MAGIC: &[u8; 4] = b"TXEM";
const EMB_VERSION: u32 = 1;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
