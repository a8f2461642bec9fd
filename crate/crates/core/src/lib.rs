//! A sentence-level language model over pre-computed sentence embeddings.
//!
//! A feed-forward network maps the embeddings of a story's context sentences
//! to a predicted embedding `h`; every candidate next sentence `i` is scored
//! by `e_i . h` and normalized with a softmax over the candidate set.

pub mod checkpoint;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod scoring;
pub mod store;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
