//! Token feature templates for the CRF tagger.
//!
//! Each position fires a set of `TEMPLATE=value` strings: the current,
//! previous and next word, character n-grams of the current word, a coarse
//! part-of-speech tag and the tag trigram around it, the word shape and the
//! shape trigram, and the presence of words in a left and right window.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_edge_punct, Sentence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("position {position} out of range for sentence of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
}

const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Width of the left and right word-presence windows (current token
    /// excluded).
    pub window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { ngram_min: 2, ngram_max: 4, window: 4 }
    }
}

/// Orthographic stand-in for a part-of-speech tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoarsePosTag {
    Cap,
    Lower,
    Mixed,
    Num,
    Punct,
    Sym,
}

impl CoarsePosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CoarsePosTag::Cap => "CAP",
            CoarsePosTag::Lower => "LOWER",
            CoarsePosTag::Mixed => "MIXED",
            CoarsePosTag::Num => "NUM",
            CoarsePosTag::Punct => "PUNCT",
            CoarsePosTag::Sym => "SYM",
        }
    }

    pub fn of(text: &str) -> Self {
        let is_num = text.chars().any(|c| c.is_ascii_digit())
            && text.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.');
        if is_num {
            return CoarsePosTag::Num;
        }
        if !text.is_empty() && text.chars().all(|c| c.is_ascii_punctuation() || is_edge_punct(c)) {
            return CoarsePosTag::Punct;
        }
        let mut chars = text.chars();
        if let Some(first) = chars.next() {
            if first.is_uppercase() && chars.all(char::is_lowercase) {
                return CoarsePosTag::Cap;
            }
        }
        if !text.is_empty() && text.chars().all(char::is_lowercase) {
            return CoarsePosTag::Lower;
        }
        if text.chars().any(char::is_alphabetic) && text.chars().all(char::is_alphanumeric) {
            return CoarsePosTag::Mixed;
        }
        CoarsePosTag::Sym
    }
}

impl AsRef<str> for CoarsePosTag {
    fn as_ref(&self) -> &str {
        self.as_str()
    }
}

impl fmt::Display for CoarsePosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Source of per-token tags for the `P0` and `PSEQ` templates.
pub trait PosTagger {
    type Tag: AsRef<str>;

    fn tag(&self, sentence: &Sentence) -> Vec<Self::Tag>;
}

/// The built-in rule-based tagger, see [`CoarsePosTag::of`].
#[derive(Debug, Clone, Copy, Default)]
pub struct OrthographicTagger;

impl PosTagger for OrthographicTagger {
    type Tag = CoarsePosTag;

    fn tag(&self, sentence: &Sentence) -> Vec<CoarsePosTag> {
        pos_tag(sentence)
    }
}

pub fn pos_tag(sentence: &Sentence) -> Vec<CoarsePosTag> {
    sentence.tokens.iter().map(|t| CoarsePosTag::of(&t.text)).collect()
}

/// Maps characters to X/x/d/s and collapses repeats: "TensorFlow" → "XxXx".
pub fn word_shape(text: &str) -> String {
    let mut shape = String::new();
    let mut last = None;
    for c in text.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            's'
        };
        if last != Some(class) {
            shape.push(class);
            last = Some(class);
        }
    }
    shape
}

/// Character n-grams of the lowercased, `<`/`>` boundary-marked word.
pub fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> BTreeSet<String> {
    let marked: Vec<char> = std::iter::once('<').chain(text.to_lowercase().chars()).chain(std::iter::once('>')).collect();
    let mut grams = BTreeSet::new();
    for n in n_min.max(1)..=n_max.min(marked.len()) {
        for w in marked.windows(n) {
            grams.insert(w.iter().collect());
        }
    }
    grams
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseFeatures {
    pub fired: BTreeSet<String>,
}

impl SparseFeatures {
    pub fn contains(&self, feature: &str) -> bool {
        self.fired.contains(feature)
    }

    pub fn len(&self) -> usize {
        self.fired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fired.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.fired.iter().map(String::as_str)
    }

    fn add(&mut self, template: &str, value: impl fmt::Display) {
        self.fired.insert(format!("{template}={value}"));
    }
}

/// Splits a feature string into `(template, value)` at the first `=`.
pub fn parse_feature(feature: &str) -> Option<(&str, &str)> {
    feature.split_once('=')
}

/// Features fired at position `i` of `sentence`.
pub fn extract_features<S: AsRef<str>>(
    sentence: &Sentence,
    tags: &[S],
    i: usize,
    config: &FeatureConfig,
) -> Result<SparseFeatures, FeatureError> {
    let n = sentence.tokens.len();
    if i >= n {
        return Err(FeatureError::PositionOutOfRange { position: i, len: n });
    }
    assert_eq!(tags.len(), n, "one tag per token");
    let word = |j: usize| sentence.tokens[j].folded();
    let text = &sentence.tokens[i].text;

    let mut f = SparseFeatures::default();
    f.add("W0", word(i));
    f.add("W-1", if i > 0 { word(i - 1) } else { BOS.to_string() });
    f.add("W+1", if i + 1 < n { word(i + 1) } else { EOS.to_string() });
    for g in char_ngrams(text, config.ngram_min, config.ngram_max) {
        f.add("NG", g);
    }

    let around = |get: &dyn Fn(usize) -> String| {
        let prev = if i > 0 { get(i - 1) } else { BOS.to_string() };
        let next = if i + 1 < n { get(i + 1) } else { EOS.to_string() };
        format!("{prev}_{}_{next}", get(i))
    };
    let tag = |j: usize| tags[j].as_ref().to_string();
    let shape = |j: usize| word_shape(&sentence.tokens[j].text);
    f.add("P0", tag(i));
    f.add("PSEQ", around(&tag));
    f.add("SH0", shape(i));
    f.add("SHSEQ", around(&shape));

    for j in i.saturating_sub(config.window)..i {
        f.add("LW", word(j));
    }
    for j in i + 1..n.min(i + 1 + config.window) {
        f.add("RW", word(j));
    }
    Ok(f)
}

/// Features for every position of a sentence, using the built-in tagger.
pub fn sentence_features(sentence: &Sentence, config: &FeatureConfig) -> Vec<SparseFeatures> {
    let tags = pos_tag(sentence);
    (0..sentence.len())
        .map(|i| extract_features(sentence, &tags, i, config).expect("position in range"))
        .collect()
}

/// Dense ids for feature strings. Once frozen, unknown strings map to
/// nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureIndex {
    ids: HashMap<String, usize>,
    names: Vec<String>,
    frozen: bool,
}

impl FeatureIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Frozen index over features fired at least `min_count` times,
    /// numbered in lexicographic order.
    pub fn build<'a, I>(features: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a SparseFeatures>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for f in features {
            for name in f.iter() {
                *counts.entry(name).or_default() += 1;
            }
        }
        let mut index = FeatureIndex::new();
        for (name, _) in counts.into_iter().filter(|&(_, c)| c >= min_count) {
            index.intern(name);
        }
        index.freeze();
        index
    }

    pub fn from_names(names: Vec<String>) -> Self {
        let mut index = FeatureIndex::new();
        for name in names {
            index.intern(&name);
        }
        index.freeze();
        index
    }

    /// Returns the id of `name`, assigning a new one unless frozen.
    pub fn intern(&mut self, name: &str) -> Option<usize> {
        if let Some(&id) = self.ids.get(name) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.names.len();
        self.ids.insert(name.to_string(), id);
        self.names.push(name.to_string());
        Some(id)
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Ids of the known features in `features`, unknown ones dropped.
    pub fn encode(&self, features: &SparseFeatures) -> Vec<usize> {
        features.iter().filter_map(|f| self.get(f)).collect()
    }
}
