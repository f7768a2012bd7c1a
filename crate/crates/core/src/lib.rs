//! Content classification of GitHub README sections.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`parser`] splits markdown into heading-delimited sections.
//! 2. [`abstraction`] replaces code, tables, links, lists, numbers and the
//!    like with fixed placeholder tokens.
//! 3. [`text`] tokenizes, drops stop words, lemmatizes and encodes sections
//!    into fixed-length id sequences.
//! 4. [`dataset`] loads labeled sections and builds stratified splits,
//!    folds and oversampled training sets.
//! 5. [`model`] is a transformer encoder trained from scratch with either
//!    full fine-tuning or LoRA adapters.
//! 6. [`metrics`] scores multi-label predictions (weighted F1, ROC AUC,
//!    MCC, Cohen's kappa).
//!
//! [`pipeline`] wires the stages together behind the command-line tool.

pub mod abstraction;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod seed;
pub mod text;

pub use error::{Error, Result};
