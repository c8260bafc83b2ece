//! Grid-tagging aspect sentiment quadruple extraction.
//!
//! This crate provides the full pipeline for extracting
//! (target, aspect, opinion, sentiment) quadruples from token-level
//! annotated documents:
//!
//! * [`corpus`] — the document data model, JSONL corpus format, validation
//!   and corpus analytics,
//! * [`synth`] — a seeded synthetic corpus generator with planted ground
//!   truth for end-to-end testing,
//! * [`brat`] — BRAT standoff (`.ann`) ingestion and conversion to documents,
//! * [`split`] — seeded train/dev/test splitting,
//! * [`agreement`] — Cohen's kappa inter-annotator agreement,
//! * [`grid`] — the entity/relation grid tagging codec (encode documents to
//!   label grids, decode predicted grids back to quadruples),
//! * [`nn`] — the scoring model: token + POS embeddings, dependency graph
//!   convolution, biaffine entity scorer and triaffine-bridged relation
//!   scorer, with reverse-mode gradients,
//! * [`train`] — the training loop and prediction,
//! * [`eval`] — exact-match evaluation, error taxonomy and throughput,
//! * [`checkpoint`] — binary parameter checkpoints.

pub mod agreement;
pub mod brat;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod grid;
pub mod nn;
pub mod split;
pub mod synth;
pub mod train;

pub use config::TrainConfig;
pub use corpus::{Document, Quadruple, Sentiment, Span};
