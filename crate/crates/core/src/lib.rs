//! Coarse-to-fine knowledge graph domain adaptation.
//!
//! Starting from a coarse-domain knowledge graph and unlabeled fine-domain
//! text, the pipeline builds distantly-supervised NER and RE corpora, trains
//! pluggable extraction models, and iteratively discovers fine-domain
//! entities and triples that pass a probability + frequency filter. The
//! result is a fine-domain graph made of the overlap triples plus the
//! confidently discovered ones.
//!
//! Module map:
//! - [`kg`]: graph data model, TSV storage, surface/pair indexes.
//! - [`corpus`]: preprocessing, tokenization, partitioning.
//! - [`distant`]: gazetteer matching and distant corpus construction.
//! - [`models`]: NER/RE model contracts, baselines, external plugins.
//! - [`discovery`]: candidate pools and confidence filtering.
//! - [`pipeline`]: the iterative training loop, checkpoints, ablations.
//! - [`eval`]: held-out scoring and manual-evaluation tooling.

pub mod corpus;
pub mod discovery;
pub mod distant;
mod error;
pub mod eval;
pub mod kg;
pub mod models;
pub mod pipeline;
pub mod synth;
#[cfg(test)]
mod testutil;
pub mod util;

pub use error::{Error, Result};
