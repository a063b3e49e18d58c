//! Technology term extraction from news text.
//!
//! A sentence classifier over averaged skipgram embeddings filters out
//! sentences unlikely to mention technology; a linear-chain CRF then tags
//! the remaining tokens as term (`T`) or other (`O`).

pub(crate) mod binio;
pub mod cascade;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod render;
pub mod synth;

pub use binio::ModelIoError;
pub use cascade::{Cascade, Extraction, PipelineModels, TermSpan};
pub use corpus::{Document, LabeledSentence, Sentence, SentenceLabel, Token, TokenLabel};
