//! Asymmetric entailment word embeddings.
//!
//! The crate covers the whole pipeline: parsing NLI corpora, mining directional
//! (premise word, hypothesis word) pairs with pretrained-vector cosine thresholds,
//! training separate premise-side and hypothesis-side embeddings with a
//! negative-sampling objective, and using them inside word-word interaction
//! models (interaction matrices and a decomposable-attention classifier).

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod interaction;
pub mod math;
pub mod neural;
pub mod pairs;
pub mod synthetic;
pub mod trainer;

pub use corpus::{Label, SentencePair};
pub use embedding::{cosine, EmbeddingTable, Vocabulary};
pub use error::{Error, Result};
pub use interaction::InteractionMatrix;
pub use pairs::{WordPair, WordPairSet};
pub use trainer::{AsymmetricEmbeddings, TrainConfig};
