//! Terminal and HTML highlighting of extraction results.
//!
//! Sentences flagged by stage I get a green background, extracted terms a
//! yellow one, and gold terms the cascade missed entirely a red one. Both
//! renderers only add markup, so the strip functions give back the input.

use std::collections::BTreeSet;

use crate::cascade::{spans_from_labels, Extraction};
use crate::corpus::{LabeledSentence, Sentence};

const ANSI_SENTENCE: &str = "\x1b[42m";
const ANSI_TERM: &str = "\x1b[43m";
const ANSI_MISSED: &str = "\x1b[41m";
const ANSI_RESET: &str = "\x1b[0m";

/// Byte ranges into one document's text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Highlights {
    pub sentences: Vec<(usize, usize)>,
    pub terms: Vec<(usize, usize)>,
    pub missed: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    None,
    Term,
    Missed,
}

fn covered(ranges: &[(usize, usize)], start: usize, end: usize) -> bool {
    ranges.iter().any(|&(s, e)| s <= start && end <= e)
}

impl Highlights {
    /// Builds highlights for one document. `sentences` and `extractions`
    /// must be aligned. With `gold`, any gold term that no predicted span
    /// overlaps is marked as missed; gold sentences are matched by document
    /// id and sentence index, and skipped when their length differs.
    pub fn build(sentences: &[Sentence], extractions: &[Extraction], gold: Option<&[LabeledSentence]>) -> Self {
        let mut h = Highlights::default();
        for (sentence, ex) in sentences.iter().zip(extractions) {
            if ex.positive {
                if let Some(span) = sentence.span() {
                    h.sentences.push(span);
                }
            }
            h.terms.extend(ex.spans.iter().map(|s| (s.byte_start, s.byte_end)));
        }
        if let Some(gold) = gold {
            for g in gold {
                let key = g.sentence();
                let Some((sentence, ex)) =
                    sentences.iter().zip(extractions).find(|(p, _)| p.doc_id == key.doc_id && p.index == key.index)
                else {
                    continue;
                };
                // Offsets come from the document's own tokens; the gold file
                // may have been read from a TSV without them.
                let Ok(gold_spans) = spans_from_labels(&sentence.tokens, g.token_labels()) else {
                    continue;
                };
                for span in gold_spans {
                    let hit = ex.spans.iter().any(|p| p.byte_start < span.byte_end && span.byte_start < p.byte_end);
                    if !hit {
                        h.missed.push((span.byte_start, span.byte_end));
                    }
                }
            }
        }
        h
    }

    /// Splits `[0, len)` at every range boundary and reports the marks
    /// active on each piece.
    fn segments(&self, len: usize) -> Vec<(usize, usize, bool, Mark)> {
        let mut cuts: BTreeSet<usize> = BTreeSet::from([0, len]);
        for &(s, e) in self.sentences.iter().chain(&self.terms).chain(&self.missed) {
            cuts.insert(s.min(len));
            cuts.insert(e.min(len));
        }
        let cuts: Vec<usize> = cuts.into_iter().collect();
        cuts.windows(2)
            .map(|w| {
                let (s, e) = (w[0], w[1]);
                let mark = if covered(&self.missed, s, e) {
                    Mark::Missed
                } else if covered(&self.terms, s, e) {
                    Mark::Term
                } else {
                    Mark::None
                };
                (s, e, covered(&self.sentences, s, e), mark)
            })
            .collect()
    }
}

pub fn render_ansi(text: &str, highlights: &Highlights) -> String {
    let mut out = String::with_capacity(text.len());
    for (s, e, in_sentence, mark) in highlights.segments(text.len()) {
        let code = match mark {
            Mark::Missed => Some(ANSI_MISSED),
            Mark::Term => Some(ANSI_TERM),
            Mark::None if in_sentence => Some(ANSI_SENTENCE),
            Mark::None => None,
        };
        match code {
            Some(code) => {
                out.push_str(code);
                out.push_str(&text[s..e]);
                out.push_str(ANSI_RESET);
            }
            None => out.push_str(&text[s..e]),
        }
    }
    out
}

fn escape_html(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
}

/// HTML fragment; style the `tech-sentence`, `term` and `missed` classes.
pub fn render_html(text: &str, highlights: &Highlights) -> String {
    let mut out = String::with_capacity(text.len() * 2);
    for (s, e, in_sentence, mark) in highlights.segments(text.len()) {
        if in_sentence {
            out.push_str("<span class=\"tech-sentence\">");
        }
        match mark {
            Mark::Missed => out.push_str("<mark class=\"missed\">"),
            Mark::Term => out.push_str("<mark class=\"term\">"),
            Mark::None => {}
        }
        escape_html(&text[s..e], &mut out);
        if mark != Mark::None {
            out.push_str("</mark>");
        }
        if in_sentence {
            out.push_str("</span>");
        }
    }
    out
}

/// Removes SGR escape sequences.
pub fn strip_ansi(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\x1b' && chars.peek() == Some(&'[') {
            for c in chars.by_ref() {
                if c == 'm' {
                    break;
                }
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Removes tags and decodes the entities [`render_html`] produces.
pub fn strip_html(html: &str) -> String {
    let mut text = String::with_capacity(html.len());
    let mut in_tag = false;
    for c in html.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => text.push(c),
            _ => {}
        }
    }
    text.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (&'static str, Highlights) {
        let text = "We use <Apache Hive> & more. Nothing here.";
        let h = Highlights { sentences: vec![(0, 28)], terms: vec![(8, 19)], missed: vec![(29, 36)] };
        (text, h)
    }

    #[test]
    fn ansi_round_trip() {
        let (text, h) = sample();
        let out = render_ansi(text, &h);
        assert!(out.contains("\x1b[43mApache Hive\x1b[0m"));
        assert!(out.contains("\x1b[41mNothing\x1b[0m"));
        assert!(out.starts_with("\x1b[42mWe use <"));
        assert_eq!(strip_ansi(&out), text);
    }

    #[test]
    fn html_round_trip() {
        let (text, h) = sample();
        let out = render_html(text, &h);
        assert!(out.contains("<mark class=\"term\">Apache Hive</mark>"));
        assert!(out.contains("&lt;"));
        assert!(out.contains("<mark class=\"missed\">Nothing</mark>"));
        assert_eq!(strip_html(&out), text);
    }

    #[test]
    fn tricky_entities() {
        let text = "a &lt; b 'q' \"r\"";
        let h = Highlights { sentences: vec![(0, text.len())], ..Default::default() };
        assert_eq!(strip_html(&render_html(text, &h)), text);
        assert_eq!(render_ansi(text, &Highlights::default()), text);
    }
}
