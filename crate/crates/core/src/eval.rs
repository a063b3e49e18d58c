//! Precision, recall and F-score, plus the stage-wise and end-to-end
//! evaluation harness.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cascade::{spans_from_labels, TermSpan};
use crate::corpus::{LabeledSentence, Sentence, SentenceLabel, TokenLabel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    /// Counts one (gold, predicted) decision.
    pub fn record(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when either is 0.
    pub fn f_score(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// F-score as a reduced fraction `(numerator, denominator)`, i.e.
    /// `2tp / (2tp + fp + fn)`. Degenerate counts give `(0, 1)`.
    pub fn f_score_fraction(&self) -> (u64, u64) {
        let num = 2 * self.tp;
        let den = 2 * self.tp + self.fp + self.fn_;
        if num == 0 {
            return (0, 1);
        }
        let g = gcd(num, den);
        (num / g, den / g)
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Stage I, one unit per sentence.
    Sentence,
    /// Stage II, one unit per token of gold-positive sentences.
    Token,
    /// Token level over all sentences with stage I gating stage II.
    EndToEnd,
    /// Exact term-span matches (no true negatives).
    Span,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Sentence => "sentence",
            EvalMode::Token => "token",
            EvalMode::EndToEnd => "end_to_end",
            EvalMode::Span => "span",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sentence" => Ok(EvalMode::Sentence),
            "token" => Ok(EvalMode::Token),
            "end_to_end" | "end-to-end" => Ok(EvalMode::EndToEnd),
            "span" => Ok(EvalMode::Span),
            _ => Err(format!("unknown evaluation mode {s:?}")),
        }
    }
}

/// Flat report, serialized as
/// `{mode, tp, fp, tn, fn, precision, recall, f_score}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl EvalReport {
    pub fn new(mode: EvalMode, counts: ConfusionCounts) -> Self {
        EvalReport {
            mode,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f_score: counts.f_score(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        writeln!(f, "mode       {}", self.mode.as_str())?;
        writeln!(f, "tp {:>8}   fp {:>8}", c.tp, c.fp)?;
        writeln!(f, "fn {:>8}   tn {:>8}", c.fn_, c.tn)?;
        writeln!(f, "precision  {:.4}", self.precision)?;
        writeln!(f, "recall     {:.4}", self.recall)?;
        write!(f, "f-score    {:.4}", self.f_score)
    }
}

/// Sentence-level evaluation with ContainsTech as the positive class.
pub fn evaluate_stage1<F>(test: &[LabeledSentence], mut classify: F) -> EvalReport
where
    F: FnMut(&Sentence) -> SentenceLabel,
{
    let mut counts = ConfusionCounts::default();
    for s in test {
        let predicted = classify(s.sentence());
        counts.record(s.sentence_label().is_positive(), predicted.is_positive());
    }
    EvalReport::new(EvalMode::Sentence, counts)
}

fn count_tokens(counts: &mut ConfusionCounts, gold: &[TokenLabel], predicted: &[TokenLabel]) {
    assert_eq!(gold.len(), predicted.len(), "decoder returned wrong number of labels");
    for (g, p) in gold.iter().zip(predicted) {
        counts.record(*g == TokenLabel::T, *p == TokenLabel::T);
    }
}

/// Token-level evaluation of the tagger on gold-positive sentences.
/// Gold-negative sentences in `test` are skipped.
pub fn evaluate_stage2<F>(test: &[LabeledSentence], mut decode: F) -> EvalReport
where
    F: FnMut(&Sentence) -> Vec<TokenLabel>,
{
    let mut counts = ConfusionCounts::default();
    for s in test.iter().filter(|s| s.sentence_label().is_positive()) {
        count_tokens(&mut counts, s.token_labels(), &decode(s.sentence()));
    }
    EvalReport::new(EvalMode::Token, counts)
}

/// Token-level evaluation over every sentence with stage I gating stage II:
/// sentences predicted negative contribute all-O predictions.
pub fn evaluate_end_to_end<C, D>(test: &[LabeledSentence], mut classify: C, mut decode: D) -> EvalReport
where
    C: FnMut(&Sentence) -> SentenceLabel,
    D: FnMut(&Sentence) -> Vec<TokenLabel>,
{
    let mut counts = ConfusionCounts::default();
    for s in test {
        let predicted = if classify(s.sentence()).is_positive() {
            decode(s.sentence())
        } else {
            vec![TokenLabel::O; s.sentence().len()]
        };
        count_tokens(&mut counts, s.token_labels(), &predicted);
    }
    EvalReport::new(EvalMode::EndToEnd, counts)
}

/// Exact-span view of the tagger on gold-positive sentences: a predicted
/// span is a true positive only if a gold span has the same boundaries.
pub fn evaluate_spans<F>(test: &[LabeledSentence], mut decode: F) -> EvalReport
where
    F: FnMut(&Sentence) -> Vec<TokenLabel>,
{
    let key = |s: &TermSpan| (s.start_token, s.end_token);
    let mut counts = ConfusionCounts::default();
    for s in test.iter().filter(|s| s.sentence_label().is_positive()) {
        let tokens = &s.sentence().tokens;
        let gold: Vec<_> = spans_from_labels(tokens, s.token_labels()).expect("aligned").iter().map(key).collect();
        let predicted = decode(s.sentence());
        let pred: Vec<_> = spans_from_labels(tokens, &predicted).expect("aligned").iter().map(key).collect();
        let hits = pred.iter().filter(|p| gold.contains(p)).count() as u64;
        counts.tp += hits;
        counts.fp += pred.len() as u64 - hits;
        counts.fn_ += gold.len() as u64 - hits;
    }
    EvalReport::new(EvalMode::Span, counts)
}
