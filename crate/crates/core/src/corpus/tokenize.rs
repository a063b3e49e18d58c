use super::{Sentence, Token};

/// Characters peeled off the edges of a whitespace chunk.
///
/// Symbols that commonly live inside technology names (`+`, `#`, `-`, `/`,
/// `@`, `&`) are left attached so that "C++" or "C#" survive as one token.
pub fn is_edge_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '"'
            | '\''
            | '('
            | ')'
            | '['
            | ']'
            | '{'
            | '}'
            | '<'
            | '>'
            | '«'
            | '»'
            | '“'
            | '”'
            | '‘'
            | '’'
            | '…'
            | '–'
            | '\u{2014}'
    )
}

fn is_closing(text: &str) -> bool {
    matches!(text, "\"" | "'" | ")" | "]" | "}" | "”" | "’" | "»")
}

fn is_terminator(text: &str) -> bool {
    matches!(text, "." | "!" | "?")
}

const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "etc", "vs", "cf", "approx", "mr", "mrs", "ms", "dr", "prof", "inc", "ltd",
    "corp", "no", "fig", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec",
];

fn is_abbreviation(word: &str) -> bool {
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_uppercase() {
            return true;
        }
    }
    let folded = word.to_lowercase();
    ABBREVIATIONS.contains(&folded.as_str())
}

/// Splits `text` on whitespace, then peels leading and trailing punctuation
/// into single-character tokens. Internal punctuation is kept, so
/// "theregister.co.uk" is one token while "PyTorch," is two.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chunk_start = None;
    for (pos, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if c.is_whitespace() {
            if let Some(start) = chunk_start.take() {
                split_chunk(text, start, pos, &mut tokens);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(pos);
        }
    }
    tokens
}

fn split_chunk(text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let chunk = &text[start..end];
    let mut lead_end = start;
    for (off, c) in chunk.char_indices() {
        if !is_edge_punct(c) {
            break;
        }
        let s = start + off;
        out.push(Token::new(text, s, s + c.len_utf8()));
        lead_end = s + c.len_utf8();
    }
    if lead_end == end {
        return;
    }
    let mut trail = Vec::new();
    let mut core_end = end;
    for (off, c) in text[lead_end..end].char_indices().rev() {
        if !is_edge_punct(c) {
            break;
        }
        let s = lead_end + off;
        trail.push(Token::new(text, s, s + c.len_utf8()));
        core_end = s;
    }
    out.push(Token::new(text, lead_end, core_end));
    out.extend(trail.into_iter().rev());
}

/// Rule-based sentence splitter.
///
/// A sentence ends at ".", "!" or "?" (plus any directly attached closing
/// quotes or brackets) when the next token is separated by whitespace and
/// starts with an uppercase letter, or when the text ends. A "." preceded
/// by a known abbreviation or a single capital letter never ends a
/// sentence.
pub fn split_sentences(doc_id: &str, text: &str) -> Vec<Sentence> {
    let tokens = tokenize(text);
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        current.push(tokens[i].clone());
        if is_terminator(&tokens[i].text) && !suppressed(&tokens, i) {
            let mut j = i + 1;
            while j < tokens.len() && is_closing(&tokens[j].text) && tokens[j].start == tokens[j - 1].end {
                j += 1;
            }
            let boundary = j == tokens.len()
                || (tokens[j].start > tokens[j - 1].end
                    && tokens[j].text.chars().next().is_some_and(char::is_uppercase));
            if boundary {
                current.extend(tokens[i + 1..j].iter().cloned());
                sentences.push(Sentence {
                    doc_id: doc_id.to_string(),
                    index: sentences.len(),
                    tokens: std::mem::take(&mut current),
                });
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if !current.is_empty() {
        sentences.push(Sentence { doc_id: doc_id.to_string(), index: sentences.len(), tokens: current });
    }
    sentences
}

fn suppressed(tokens: &[Token], i: usize) -> bool {
    if tokens[i].text != "." || i == 0 {
        return false;
    }
    let prev = &tokens[i - 1];
    prev.end == tokens[i].start && is_abbreviation(&prev.text)
}
