//! Template-based synthetic news corpus with gold T/O labels.
//!
//! Positive sentences embed one or two gazetteer terms in a short news
//! clause; distractor sentences use the same subjects and adverbs around
//! ordinary nouns. Template words that collide with any gazetteer token are
//! dropped, so string-matching the output against the same gazetteer
//! reproduces the gold labels exactly.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_gazetteer, split_sentences, tokenize, Document, Gazetteer, LabeledSentence, TokenLabel};

/// The bundled 50-term list.
pub const DEFAULT_GAZETTEER: &str = include_str!("../data/tech_terms.txt");

pub fn default_gazetteer() -> Gazetteer {
    load_gazetteer(DEFAULT_GAZETTEER).expect("bundled gazetteer parses")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

const SUBJECTS: &[&str] = &[
    "The team", "Our engineers", "Researchers", "The company", "Developers", "Analysts", "The startup",
    "Many users", "The bank", "Their lab", "The agency", "Several hospitals", "The retailer",
    "Data scientists", "The university", "Our partners", "The ministry", "Most vendors",
];
const TECH_VERBS: &[&str] = &[
    "released", "adopted", "integrated", "deployed", "benchmarked", "open-sourced", "announced",
    "migrated to", "replaced their stack with", "started using", "evaluated", "upgraded",
];
const OTHER_VERBS: &[&str] = &[
    "reported", "discussed", "hired", "visited", "criticised", "celebrated", "announced", "postponed",
    "reviewed", "cancelled", "expanded", "evaluated",
];
const OBJECTS: &[&str] = &[
    "quarterly earnings", "the new office", "a record profit", "the annual meeting", "several managers",
    "the merger", "a hiring freeze", "the budget", "their strategy", "a charity event", "new premises",
    "the board", "the pension plan", "a marketing campaign", "the sales figures", "a lawsuit",
];
const ADVERBS: &[&str] = &[
    "yesterday", "last week", "this year", "on Monday", "again", "in London", "last month",
    "this morning", "without delay", "after months of debate", "in Dublin", "at short notice",
    "on Friday", "for the first time",
];
const TECH_PREDICATES: &[&str] = &[
    "now runs in production", "was released", "is getting popular", "reached a new version",
    "handles most workloads", "was deprecated",
];
const OTHER_PREDICATES: &[&str] = &[
    "was approved", "went well", "was delayed", "drew criticism", "was well attended", "ended early",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_sentences: usize,
    pub sentences_per_doc: usize,
    pub positive_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n_sentences: 2000, sentences_per_doc: 8, positive_rate: 0.5, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    /// Gold labels by construction, one entry per sentence, in document
    /// order.
    pub gold: Vec<LabeledSentence>,
}

struct Vocab<'a> {
    subjects: Vec<&'a str>,
    tech_verbs: Vec<&'a str>,
    other_verbs: Vec<&'a str>,
    objects: Vec<&'a str>,
    adverbs: Vec<&'a str>,
    tech_predicates: Vec<&'a str>,
    other_predicates: Vec<&'a str>,
}

fn filtered<'a>(list: &[&'a str], banned: &HashSet<String>, name: &str) -> Result<Vec<&'a str>, SynthError> {
    let kept: Vec<&str> =
        list.iter().copied().filter(|p| tokenize(p).iter().all(|t| !banned.contains(&t.folded()))).collect();
    if kept.is_empty() {
        return Err(SynthError::Config(format!("every {name} template collides with the gazetteer")));
    }
    Ok(kept)
}

impl<'a> Vocab<'a> {
    fn new(gazetteer: &Gazetteer) -> Result<Self, SynthError> {
        let mut banned: HashSet<String> = gazetteer.entries().iter().flatten().cloned().collect();
        banned.extend(["and", "said", "."].map(String::from));
        Ok(Vocab {
            subjects: filtered(SUBJECTS, &banned, "subject")?,
            tech_verbs: filtered(TECH_VERBS, &banned, "verb")?,
            other_verbs: filtered(OTHER_VERBS, &banned, "verb")?,
            objects: filtered(OBJECTS, &banned, "object")?,
            adverbs: filtered(ADVERBS, &banned, "adverb")?,
            tech_predicates: filtered(TECH_PREDICATES, &banned, "predicate")?,
            other_predicates: filtered(OTHER_PREDICATES, &banned, "predicate")?,
        })
    }
}

/// Sentence text plus byte ranges of the embedded terms.
struct Draft {
    text: String,
    terms: Vec<(usize, usize)>,
}

impl Draft {
    fn new() -> Self {
        Draft { text: String::new(), terms: Vec::new() }
    }

    fn word(&mut self, w: &str) -> &mut Self {
        if !self.text.is_empty() {
            self.text.push(' ');
        }
        self.text.push_str(w);
        self
    }

    fn term(&mut self, w: &str) -> &mut Self {
        self.word("");
        let start = self.text.len();
        self.text.push_str(w);
        self.terms.push((start, self.text.len()));
        self
    }
}

fn pick<'a, R: Rng>(rng: &mut R, list: &[&'a str]) -> &'a str {
    list.choose(rng).expect("non-empty list")
}

fn positive<R: Rng>(rng: &mut R, v: &Vocab, terms: &[String]) -> Draft {
    let term = |rng: &mut R| terms.choose(rng).expect("non-empty gazetteer").clone();
    let mut d = Draft::new();
    match rng.gen_range(0..10) {
        0..=5 => {
            let t = term(rng);
            d.word(pick(rng, &v.subjects)).word(pick(rng, &v.tech_verbs)).term(&t).word(pick(rng, &v.adverbs));
        }
        6..=7 => {
            let (a, b) = (term(rng), term(rng));
            d.word(pick(rng, &v.subjects)).word(pick(rng, &v.tech_verbs)).term(&a).word("and").term(&b);
            d.word(pick(rng, &v.adverbs));
        }
        _ => {
            let t = term(rng);
            d.word(pick(rng, &v.subjects)).word("said").term(&t).word(pick(rng, &v.tech_predicates));
            d.word(pick(rng, &v.adverbs));
        }
    }
    d
}

fn negative<R: Rng>(rng: &mut R, v: &Vocab) -> Draft {
    let mut d = Draft::new();
    if rng.gen_bool(0.75) {
        d.word(pick(rng, &v.subjects)).word(pick(rng, &v.other_verbs)).word(pick(rng, &v.objects));
    } else {
        d.word(pick(rng, &v.subjects)).word("said").word(pick(rng, &v.objects)).word(pick(rng, &v.other_predicates));
    }
    d.word(pick(rng, &v.adverbs));
    d
}

/// Generates `n_sentences` sentences grouped into documents, with gold
/// labels taken from the term positions recorded during generation.
pub fn generate(gazetteer: &Gazetteer, config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    if config.n_sentences == 0 || config.sentences_per_doc == 0 {
        return Err(SynthError::Config("n_sentences and sentences_per_doc must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.positive_rate) {
        return Err(SynthError::Config(format!("positive_rate {} outside [0, 1]", config.positive_rate)));
    }
    let vocab = Vocab::new(gazetteer)?;
    let terms = gazetteer.surface_forms();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut documents = Vec::new();
    let mut gold = Vec::new();
    let mut remaining = config.n_sentences;
    while remaining > 0 {
        let count = remaining.min(config.sentences_per_doc);
        remaining -= count;
        let id = format!("synth-{:05}", documents.len());
        let mut text = String::new();
        let mut term_ranges = Vec::new();
        for _ in 0..count {
            let draft = if rng.gen_bool(config.positive_rate) { positive(&mut rng, &vocab, terms) } else { negative(&mut rng, &vocab) };
            if !text.is_empty() {
                text.push(' ');
            }
            let offset = text.len();
            text.push_str(&draft.text);
            text.push('.');
            term_ranges.extend(draft.terms.iter().map(|(s, e)| (s + offset, e + offset)));
        }
        for sentence in split_sentences(&id, &text) {
            let labels = sentence
                .tokens
                .iter()
                .map(|t| {
                    let inside = term_ranges.iter().any(|&(s, e)| s <= t.start && t.end <= e);
                    if inside {
                        TokenLabel::T
                    } else {
                        TokenLabel::O
                    }
                })
                .collect();
            gold.push(LabeledSentence::new(sentence, labels).expect("one label per token"));
        }
        documents.push(Document { id, text });
    }
    Ok(SynthCorpus { documents, gold })
}
