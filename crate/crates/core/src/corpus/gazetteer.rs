use std::collections::HashMap;

use super::{tokenize, CorpusError, LabeledSentence, Sentence, TokenLabel};

/// Curated list of technology terms, matched case-insensitively on token
/// boundaries.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<Vec<String>>,
    surface: Vec<String>,
    lookup: HashMap<Vec<String>, usize>,
    max_len: usize,
}

impl Gazetteer {
    /// Builds a gazetteer from surface forms. Terms that tokenize to nothing
    /// are dropped, and the first surface form wins among case-folded
    /// duplicates.
    pub fn from_terms<I, S>(terms: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut gaz = Gazetteer::default();
        for term in terms {
            let term = term.as_ref().trim();
            let key: Vec<String> = tokenize(term).iter().map(|t| t.folded()).collect();
            if key.is_empty() || gaz.lookup.contains_key(&key) {
                continue;
            }
            gaz.max_len = gaz.max_len.max(key.len());
            gaz.lookup.insert(key.clone(), gaz.entries.len());
            gaz.entries.push(key);
            gaz.surface.push(term.to_string());
        }
        if gaz.entries.is_empty() {
            return Err(CorpusError::EmptyGazetteer);
        }
        Ok(gaz)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-folded token sequences, in load order.
    pub fn entries(&self) -> &[Vec<String>] {
        &self.entries
    }

    /// Original spellings, parallel to [`Gazetteer::entries`].
    pub fn surface_forms(&self) -> &[String] {
        &self.surface
    }

    pub fn contains(&self, folded: &[String]) -> bool {
        self.lookup.contains_key(folded)
    }

    /// Length of the longest entry matching `folded` at `start`.
    pub fn longest_match(&self, folded: &[String], start: usize) -> Option<usize> {
        let avail = folded.len().saturating_sub(start).min(self.max_len);
        (1..=avail).rev().find(|&len| self.lookup.contains_key(&folded[start..start + len]))
    }
}

/// Parses a line-oriented gazetteer: one term per line, blank lines and
/// `#` comments skipped.
pub fn load_gazetteer(source: &str) -> Result<Gazetteer, CorpusError> {
    Gazetteer::from_terms(
        source.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')),
    )
}

/// Labels tokens by left-to-right, longest-match, non-overlapping lookup.
pub fn annotate(sentence: &Sentence, gazetteer: &Gazetteer) -> LabeledSentence {
    let folded: Vec<String> = sentence.tokens.iter().map(|t| t.folded()).collect();
    let mut labels = vec![TokenLabel::O; folded.len()];
    let mut i = 0;
    while i < folded.len() {
        match gazetteer.longest_match(&folded, i) {
            Some(len) => {
                labels[i..i + len].fill(TokenLabel::T);
                i += len;
            }
            None => i += 1,
        }
    }
    LabeledSentence { sentence: sentence.clone(), labels }
}
