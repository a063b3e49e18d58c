//! The two-stage extraction pipeline: the sentence classifier decides
//! which sentences are worth tagging, and the CRF tags only those.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, ClassifierModel, Prediction};
use crate::corpus::{Document, LabeledSentence, Sentence, Token, TokenLabel};
use crate::crf::CrfModel;
use crate::embeddings::EmbeddingModel;
use crate::eval::{evaluate_end_to_end, evaluate_spans, evaluate_stage1, evaluate_stage2, EvalMode, EvalReport};
use crate::features::sentence_features;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("classifier expects {classifier}-dim input, embeddings are {embeddings}-dim")]
    ModelMismatch { embeddings: usize, classifier: usize },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// A maximal run of T-labelled tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSpan {
    pub start_token: usize,
    /// Inclusive.
    pub end_token: usize,
    /// Token texts joined by single spaces.
    pub text: String,
    /// Byte range in the source document.
    #[serde(skip)]
    pub byte_start: usize,
    #[serde(skip)]
    pub byte_end: usize,
}

pub fn spans_from_labels(tokens: &[Token], labels: &[TokenLabel]) -> Result<Vec<TermSpan>, CascadeError> {
    if tokens.len() != labels.len() {
        return Err(CascadeError::LengthMismatch { tokens: tokens.len(), labels: labels.len() });
    }
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        if labels[i] != TokenLabel::T {
            i += 1;
            continue;
        }
        let start = i;
        while i < labels.len() && labels[i] == TokenLabel::T {
            i += 1;
        }
        let run = &tokens[start..i];
        spans.push(TermSpan {
            start_token: start,
            end_token: i - 1,
            text: run.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "),
            byte_start: run[0].start,
            byte_end: run[run.len() - 1].end,
        });
    }
    Ok(spans)
}

/// Result for one sentence. Serializes to the JSON-lines extraction
/// format `{"doc_id", "sentence_index", "positive", "spans"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub doc_id: String,
    pub sentence_index: usize,
    pub positive: bool,
    pub spans: Vec<TermSpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModels {
    pub embeddings: EmbeddingModel,
    pub classifier: ClassifierModel,
    pub crf: CrfModel,
}

impl PipelineModels {
    pub fn check(&self) -> Result<(), CascadeError> {
        if self.embeddings.dim != self.classifier.d {
            return Err(CascadeError::ModelMismatch { embeddings: self.embeddings.dim, classifier: self.classifier.d });
        }
        Ok(())
    }
}

/// Validated models plus a count of how many sentences reached stage II.
#[derive(Debug)]
pub struct Cascade {
    models: PipelineModels,
    stage2_calls: AtomicUsize,
}

impl Cascade {
    pub fn new(models: PipelineModels) -> Result<Self, CascadeError> {
        models.check()?;
        Ok(Cascade { models, stage2_calls: AtomicUsize::new(0) })
    }

    pub fn models(&self) -> &PipelineModels {
        &self.models
    }

    pub fn into_models(self) -> PipelineModels {
        self.models
    }

    pub fn stage2_calls(&self) -> usize {
        self.stage2_calls.load(Ordering::Relaxed)
    }

    pub fn classify(&self, sentence: &Sentence) -> Prediction {
        let v = self.models.embeddings.embed_sentence(sentence);
        self.models.classifier.predict(&v).expect("dimensions checked in Cascade::new")
    }

    pub fn tag(&self, sentence: &Sentence) -> Vec<TokenLabel> {
        self.stage2_calls.fetch_add(1, Ordering::Relaxed);
        let features = sentence_features(sentence, &self.models.crf.features);
        self.models.crf.viterbi(&features)
    }

    pub fn extract_sentence(&self, sentence: &Sentence) -> Extraction {
        let positive = self.classify(sentence).label.is_positive();
        let spans = if positive {
            spans_from_labels(&sentence.tokens, &self.tag(sentence)).expect("one label per token")
        } else {
            Vec::new()
        };
        Extraction { doc_id: sentence.doc_id.clone(), sentence_index: sentence.index, positive, spans }
    }

    pub fn extract_from_document(&self, doc: &Document) -> Vec<Extraction> {
        doc.sentences().iter().map(|s| self.extract_sentence(s)).collect()
    }

    pub fn evaluate(&self, mode: EvalMode, test: &[LabeledSentence]) -> EvalReport {
        let classify = |s: &Sentence| self.classify(s).label;
        let tag = |s: &Sentence| self.tag(s);
        match mode {
            EvalMode::Sentence => evaluate_stage1(test, classify),
            EvalMode::Token => evaluate_stage2(test, tag),
            EvalMode::EndToEnd => evaluate_end_to_end(test, classify, tag),
            EvalMode::Span => evaluate_spans(test, tag),
        }
    }
}

/// Convenience wrapper over [`Cascade`] for one-off calls.
pub fn extract_from_document(doc: &Document, models: &PipelineModels) -> Result<Vec<Extraction>, CascadeError> {
    models.check()?;
    let cascade = Cascade { models: models.clone(), stage2_calls: AtomicUsize::new(0) };
    Ok(cascade.extract_from_document(doc))
}
