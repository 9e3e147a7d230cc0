//! End-to-end comparisons of the plain and embedding-augmented classifiers.

use serde::{Deserialize, Serialize};

use crate::corpus::SentencePair;
use crate::embedding::EmbeddingTable;
use crate::error::Result;
use crate::neural::{encode_pairs, evaluate, train_model, ModelConfig, Variant};
use crate::pairs::{extract, ExtractStats, DEFAULT_T_MINUS, DEFAULT_T_PLUS};
use crate::trainer::{train, AsymmetricEmbeddings, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub t_plus: f64,
    pub t_minus: f64,
    pub awe: TrainConfig,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            t_plus: DEFAULT_T_PLUS,
            t_minus: DEFAULT_T_MINUS,
            awe: TrainConfig {
                dim: 16,
                negatives: 5,
                epochs: 20,
                initial_step_size: 0.05,
                ..TrainConfig::default()
            },
            model: ModelConfig {
                class_count: 2,
                learning_rate: 0.003,
                epochs: 12,
                ..ModelConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantScores {
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

/// Mines pairs from `train` and fits asymmetric embeddings on them.
pub fn fit_embeddings(
    train_pairs: &[SentencePair],
    vectors: &EmbeddingTable,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(AsymmetricEmbeddings, ExtractStats)> {
    let extraction = extract(train_pairs, vectors, config.t_plus, config.t_minus)?;
    let awe_config = TrainConfig {
        seed,
        ..config.awe.clone()
    };
    let outcome = train(&extraction.pairs, &awe_config)?;
    Ok((outcome.embeddings, extraction.stats))
}

/// Trains one classifier variant and scores it on `dev` and `test`.
pub fn score_variant(
    splits: (&[SentencePair], &[SentencePair], &[SentencePair]),
    vectors: &EmbeddingTable,
    awe: Option<&AsymmetricEmbeddings>,
    model: &ModelConfig,
    seed: u64,
) -> Result<VariantScores> {
    let (train, dev, test) = splits;
    let c = model.class_count;
    let train = encode_pairs(train, vectors, awe, c)?;
    let dev = encode_pairs(dev, vectors, awe, c)?;
    let test = encode_pairs(test, vectors, awe, c)?;
    let config = ModelConfig {
        variant: if awe.is_some() {
            Variant::Awe
        } else {
            Variant::Plain
        },
        seed,
        ..model.clone()
    };
    let trained = train_model(&train, None, &config)?;
    Ok(VariantScores {
        dev_accuracy: evaluate(&trained.params, &dev)?.accuracy,
        test_accuracy: evaluate(&trained.params, &test)?.accuracy,
    })
}
