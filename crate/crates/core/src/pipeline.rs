//! End-to-end training: corpus, annotation, balancing, splitting, the
//! three stages, and test-split evaluation.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cascade::{Cascade, CascadeError, PipelineModels};
use crate::classifier::{train_classifier, ClassifierError, ClassifierTrainingReport};
use crate::config::RunConfig;
use crate::corpus::{annotate, balance, split_dataset, CorpusError, DatasetSplit, Document, Gazetteer, LabeledSentence, Sentence, SentenceLabel, TokenLabel};
use crate::crf::{train_crf, CrfError, CrfTrainingReport};
use crate::embeddings::{train_skipgram, EmbeddingError, EmbeddingModel, SentenceVector};
use crate::eval::{EvalMode, EvalReport};
use crate::features::{sentence_features, FeatureConfig, SparseFeatures};
use crate::synth::{generate, SynthError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error("no positive sentences to train the tagger on")]
    NoPositives,
}

impl PipelineError {
    /// Training produced NaN or infinity, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            PipelineError::Embedding(EmbeddingError::NonFinite)
                | PipelineError::Classifier(ClassifierError::NonFinite(_))
                | PipelineError::Crf(CrfError::NonFinite(_))
        )
    }
}

/// Class counts of the annotated corpus and of the balanced subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalanceStats {
    pub positives: usize,
    pub negatives: usize,
    pub balanced: usize,
}

pub fn class_counts(sentences: &[LabeledSentence]) -> (usize, usize) {
    let pos = sentences.iter().filter(|s| s.sentence_label().is_positive()).count();
    (pos, sentences.len() - pos)
}

/// Labels every sentence of every document by gazetteer matching.
pub fn annotate_documents(documents: &[Document], gazetteer: &Gazetteer) -> Vec<LabeledSentence> {
    documents.iter().flat_map(Document::sentences).map(|s| annotate(&s, gazetteer)).collect()
}

/// Annotates, balances, then splits.
pub fn prepare(
    documents: &[Document],
    gazetteer: &Gazetteer,
    config: &RunConfig,
) -> Result<(Vec<LabeledSentence>, DatasetSplit, BalanceStats), PipelineError> {
    let annotated = annotate_documents(documents, gazetteer);
    let (positives, negatives) = class_counts(&annotated);
    let balanced = balance(&annotated, config.data_seed())?;
    let stats = BalanceStats { positives, negatives, balanced: balanced.len() };
    let split = split_dataset(balanced, config.split, config.data_seed())?;
    Ok((annotated, split, stats))
}

pub fn embed_all(embeddings: &EmbeddingModel, data: &[LabeledSentence]) -> Vec<(SentenceVector, SentenceLabel)> {
    data.iter().map(|s| (embeddings.embed_sentence(s.sentence()), s.sentence_label())).collect()
}

/// Tagger training data: features and gold labels of the sentences that
/// contain at least one term.
pub fn crf_dataset(data: &[LabeledSentence], features: &FeatureConfig) -> Vec<(Vec<SparseFeatures>, Vec<TokenLabel>)> {
    data.iter()
        .filter(|s| s.sentence_label().is_positive())
        .map(|s| (sentence_features(s.sentence(), features), s.token_labels().to_vec()))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct TrainingReports {
    pub classifier: ClassifierTrainingReport,
    pub crf: CrfTrainingReport,
    pub embeddings_time: Duration,
    pub classifier_time: Duration,
    pub crf_time: Duration,
}

/// Trains the embeddings on `embedding_corpus`, then the classifier and the
/// tagger on the training split.
pub fn train_models(
    embedding_corpus: &[Sentence],
    split: &DatasetSplit,
    config: &RunConfig,
) -> Result<(PipelineModels, TrainingReports), PipelineError> {
    let mut reports = TrainingReports::default();
    let clock = Instant::now();
    let embeddings = train_skipgram(embedding_corpus, &config.embeddings)?;
    reports.embeddings_time = clock.elapsed();

    let clock = Instant::now();
    let (classifier, report) =
        train_classifier(&embed_all(&embeddings, &split.train), &embed_all(&embeddings, &split.validation), &config.classifier)?;
    reports.classifier = report;
    reports.classifier_time = clock.elapsed();

    let clock = Instant::now();
    let crf_data = crf_dataset(&split.train, &config.crf.features);
    if crf_data.is_empty() {
        return Err(PipelineError::NoPositives);
    }
    let (crf, report) = train_crf(&crf_data, &config.crf)?;
    reports.crf = report;
    reports.crf_time = clock.elapsed();

    let models = PipelineModels { embeddings, classifier, crf };
    models.check()?;
    Ok((models, reports))
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub documents: Vec<Document>,
    /// Generator labels; `None` for a corpus read from disk.
    pub gold: Option<Vec<LabeledSentence>>,
    pub annotated: Vec<LabeledSentence>,
    pub split: DatasetSplit,
    pub balance: BalanceStats,
    pub models: PipelineModels,
    pub training: TrainingReports,
    /// Test-split reports in sentence, token, end-to-end order.
    pub evaluation: Vec<EvalReport>,
    pub elapsed: Duration,
}

impl PipelineOutcome {
    pub fn report(&self, mode: EvalMode) -> Option<&EvalReport> {
        self.evaluation.iter().find(|r| r.mode == mode)
    }
}

/// Runs every stage. Without `documents` a synthetic corpus is generated
/// from `gazetteer`.
pub fn run(
    gazetteer: &Gazetteer,
    documents: Option<Vec<Document>>,
    config: &RunConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let clock = Instant::now();
    let (documents, gold) = match documents {
        Some(docs) => (docs, None),
        None => {
            let synth = generate(gazetteer, &config.synth)?;
            (synth.documents, Some(synth.gold))
        }
    };
    let (annotated, split, balance) = prepare(&documents, gazetteer, config)?;
    let embedding_corpus: Vec<Sentence> = annotated.iter().map(|s| s.sentence().clone()).collect();
    let (models, training) = train_models(&embedding_corpus, &split, config)?;
    let cascade = Cascade::new(models)?;
    let evaluation =
        [EvalMode::Sentence, EvalMode::Token, EvalMode::EndToEnd].map(|m| cascade.evaluate(m, &split.test)).to_vec();
    let models = cascade.into_models();
    Ok(PipelineOutcome {
        documents,
        gold,
        annotated,
        split,
        balance,
        models,
        training,
        evaluation,
        elapsed: clock.elapsed(),
    })
}
