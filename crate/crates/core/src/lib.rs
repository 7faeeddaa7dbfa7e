//! Component-enhanced Chinese character embeddings.
//!
//! The crate covers the whole pipeline:
//!
//! - [`lexicon`]: character → component lists with radical-variant normalization,
//! - [`corpus`]: text preprocessing, uni/bi-character tokens, vocabularies,
//! - [`models`]: CBOW, SkipGram, charCBOW and charSkipGram with negative sampling,
//! - [`trainer`]: epochs, learning-rate decay, lock-free workers, persistence,
//! - [`eval`]: word similarity (Spearman) and title classification (logistic regression),
//! - [`manifest`]: reproducible run records.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod manifest;
pub mod models;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
