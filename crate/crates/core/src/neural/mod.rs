//! Toy-scale decomposable-attention entailment classifier with hand-derived
//! gradients, in a plain variant and one that mixes in alignments from
//! asymmetric entailment embeddings.

mod adam;
mod checkpoint;
mod feedforward;
mod model;
mod train;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_FORMAT};
pub use feedforward::{FeedForward, FfTrace};
pub use model::{loss_and_gradients, AweVectors, ForwardCache, Instance, ModelParams};
pub use train::{
    encode_pairs, evaluate, history_tsv, train_model, EpochStats, Evaluation, ModelConfig,
    TrainedModel, Variant,
};
