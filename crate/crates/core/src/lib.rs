//! Data augmentation and evaluation toolkit for source-to-source code translation.
//!
//! The crate covers two pipelines and a metrics suite:
//!
//! * comparable corpora ([`compcorp`]): cross-language program pairs built from
//!   shared problem ids, model generation, TF-IDF nearest neighbours, or random pairing;
//! * multiple references ([`client`], [`signature`], [`testgen`], [`sandbox`],
//!   [`refselect`]): generate candidate translations, execute them against
//!   automatically generated unit tests, and keep the most distinct correct ones;
//! * evaluation ([`metrics`]): CA@k, corpus BLEU, syntax accuracy, construct match,
//!   unique-correct histograms and Welch's t-test.
//!
//! [`pipeline`] wires the stages into the commands exposed by the `transaug` binary.

pub mod client;
pub mod compcorp;
pub mod corpus;
pub mod lexer;
pub mod metrics;
pub mod pipeline;
pub mod refselect;
pub mod sandbox;
pub mod signature;
pub mod testgen;
pub mod tokenize;

pub use corpus::{ComparableExample, Dataset, DatasetKind, Lang, Origin, ParallelExample, Program, Records};
