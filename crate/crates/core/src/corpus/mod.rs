//! Corpus handling: tokenization, sentence splitting, gazetteer annotation,
//! class balancing and train/validation/test splitting.

mod gazetteer;
pub mod io;
mod sampling;
mod tokenize;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gazetteer::{annotate, load_gazetteer, Gazetteer};
pub use sampling::{balance, balanced_indices, split_dataset, DatasetSplit, SplitRatios};
pub use tokenize::{is_edge_punct, split_sentences, tokenize};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("gazetteer has no entries")]
    EmptyGazetteer,
    #[error("cannot balance: {positives} positive and {negatives} negative sentences")]
    Degenerate { positives: usize, negatives: usize },
    #[error("invalid split ratios: {0}")]
    Ratio(String),
    #[error("{labels} labels for {tokens} tokens")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A token with its byte range in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub(crate) fn new(source: &str, start: usize, end: usize) -> Self {
        Token { text: source[start..end].to_string(), start, end }
    }

    pub fn folded(&self) -> String {
        self.text.to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    /// Ordinal within the document.
    pub index: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Builds a sentence from bare words, laying them out as if joined by
    /// single spaces.
    pub fn from_words<S: AsRef<str>>(doc_id: &str, index: usize, words: &[S]) -> Self {
        let mut tokens = Vec::with_capacity(words.len());
        let mut pos = 0;
        for w in words {
            let w = w.as_ref();
            tokens.push(Token { text: w.to_string(), start: pos, end: pos + w.len() });
            pos += w.len() + 1;
        }
        Sentence { doc_id: doc_id.to_string(), index, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Byte range covered by the sentence in its document.
    pub fn span(&self) -> Option<(usize, usize)> {
        Some((self.tokens.first()?.start, self.tokens.last()?.end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenLabel {
    /// Part of a technology term.
    T,
    O,
}

impl TokenLabel {
    pub const ALL: [TokenLabel; 2] = [TokenLabel::T, TokenLabel::O];

    pub fn index(self) -> usize {
        match self {
            TokenLabel::T => 0,
            TokenLabel::O => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenLabel::T => "T",
            TokenLabel::O => "O",
        }
    }
}

impl fmt::Display for TokenLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TokenLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(TokenLabel::T),
            "O" => Ok(TokenLabel::O),
            other => Err(format!("unknown label {other:?}, expected T or O")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SentenceLabel {
    ContainsTech,
    NoTech,
}

impl SentenceLabel {
    pub const ALL: [SentenceLabel; 2] = [SentenceLabel::ContainsTech, SentenceLabel::NoTech];

    /// Class index used by the sentence classifier: 0 = ContainsTech, 1 = NoTech.
    pub fn index(self) -> usize {
        match self {
            SentenceLabel::ContainsTech => 0,
            SentenceLabel::NoTech => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn of_labels(labels: &[TokenLabel]) -> Self {
        if labels.contains(&TokenLabel::T) {
            SentenceLabel::ContainsTech
        } else {
            SentenceLabel::NoTech
        }
    }

    pub fn is_positive(self) -> bool {
        self == SentenceLabel::ContainsTech
    }
}

/// A sentence with one T/O label per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    sentence: Sentence,
    labels: Vec<TokenLabel>,
}

impl LabeledSentence {
    pub fn new(sentence: Sentence, labels: Vec<TokenLabel>) -> Result<Self, CorpusError> {
        if sentence.tokens.len() != labels.len() {
            return Err(CorpusError::LengthMismatch { tokens: sentence.tokens.len(), labels: labels.len() });
        }
        Ok(LabeledSentence { sentence, labels })
    }

    pub fn sentence(&self) -> &Sentence {
        &self.sentence
    }

    pub fn token_labels(&self) -> &[TokenLabel] {
        &self.labels
    }

    pub fn sentence_label(&self) -> SentenceLabel {
        SentenceLabel::of_labels(&self.labels)
    }

    pub fn into_parts(self) -> (Sentence, Vec<TokenLabel>) {
        (self.sentence, self.labels)
    }
}

/// One input document of the JSON-lines corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn sentences(&self) -> Vec<Sentence> {
        split_sentences(&self.id, &self.text)
    }
}
