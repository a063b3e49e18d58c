//! JSON-lines corpus files and CoNLL-style `token<TAB>label` datasets.

use std::io::{BufRead, Write};

use super::{CorpusError, Document, LabeledSentence, Sentence, Token, TokenLabel};

const DOCSTART: &str = "-DOCSTART-";

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Parse { line: n + 1, message: e.to_string() })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(mut writer: W, docs: &[Document]) -> Result<(), CorpusError> {
    for doc in docs {
        serde_json::to_writer(&mut writer, doc).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes sentences as CoNLL-style TSV. A `-DOCSTART- <id>` line is
/// emitted whenever the document id changes.
pub fn write_conll<W: Write>(mut writer: W, sentences: &[LabeledSentence]) -> Result<(), CorpusError> {
    let mut current: Option<&str> = None;
    for s in sentences {
        let doc = s.sentence().doc_id.as_str();
        if current != Some(doc) {
            writeln!(writer, "{DOCSTART} {doc}")?;
            writeln!(writer)?;
            current = Some(doc);
        }
        for (tok, label) in s.sentence().tokens.iter().zip(s.token_labels()) {
            writeln!(writer, "{}\t{}", tok.text, label)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Reads a CoNLL-style TSV. Token offsets are reconstructed as if the
/// sentence's tokens were joined by single spaces; sentence indices count
/// up within each document.
pub fn read_conll<R: BufRead>(reader: R) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut out = Vec::new();
    let mut doc_id = String::new();
    let mut index = 0;
    let mut tokens: Vec<Token> = Vec::new();
    let mut labels = Vec::new();

    fn flush(
        out: &mut Vec<LabeledSentence>,
        doc_id: &str,
        index: &mut usize,
        tokens: &mut Vec<Token>,
        labels: &mut Vec<TokenLabel>,
    ) {
        if tokens.is_empty() {
            return;
        }
        let sentence = Sentence { doc_id: doc_id.to_string(), index: *index, tokens: std::mem::take(tokens) };
        out.push(LabeledSentence { sentence, labels: std::mem::take(labels) });
        *index += 1;
    }

    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut out, &doc_id, &mut index, &mut tokens, &mut labels);
            continue;
        }
        if let Some(rest) = line.strip_prefix(DOCSTART) {
            flush(&mut out, &doc_id, &mut index, &mut tokens, &mut labels);
            doc_id = rest.trim().to_string();
            index = 0;
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse { line: n + 1, message };
        let (text, label) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected token<TAB>label".to_string()))?;
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(parse_err(format!("invalid token {text:?}")));
        }
        let label: TokenLabel = label.trim().parse().map_err(parse_err)?;
        let start = tokens.last().map_or(0, |t: &Token| t.end + 1);
        tokens.push(Token { text: text.to_string(), start, end: start + text.len() });
        labels.push(label);
    }
    flush(&mut out, &doc_id, &mut index, &mut tokens, &mut labels);
    Ok(out)
}
