use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::model::{batch_loss, AweVectors, Dropout, Instance, ModelParams};
use crate::corpus::SentencePair;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::math::argmax;
use crate::trainer::AsymmetricEmbeddings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Awe,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Awe => "awe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub hidden: usize,
    pub class_count: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Plain,
            hidden: 32,
            class_count: 3,
            dropout: 0.2,
            learning_rate: 0.05,
            batch_size: 4,
            epochs: 30,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden must be at least 1".into()));
        }
        if !(2..=3).contains(&self.class_count) {
            return Err(Error::Config("class_count must be 2 or 3".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Looks up model inputs for tokenized pairs. Tokens missing from `input`
/// become zero vectors; `awe` rows fall back to the UNK rows.
pub fn encode_pairs(
    pairs: &[SentencePair],
    input: &EmbeddingTable,
    awe: Option<&AsymmetricEmbeddings>,
    class_count: usize,
) -> Result<Vec<Instance>> {
    let zero = vec![0.0; input.dim()];
    let lookup = |t: &String| input.get(t).unwrap_or(&zero).to_vec();
    pairs
        .iter()
        .map(|pair| {
            Ok(Instance {
                premise: pair.premise.iter().map(lookup).collect(),
                hypothesis: pair.hypothesis.iter().map(lookup).collect(),
                awe: awe.map(|emb| AweVectors {
                    u: pair.premise.iter().map(|t| emb.u(t).to_vec()).collect(),
                    v: pair.hypothesis.iter().map(|t| emb.v(t).to_vec()).collect(),
                }),
                label: pair.label.class_index(class_count)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy on the training set, measured without dropout.
    pub loss: f64,
    pub train_accuracy: f64,
    pub dev_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[gold][predicted]`
    pub confusion: Vec<Vec<u64>>,
}

impl Evaluation {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

/// Argmax predictions (ties towards the lower class) and confusion counts.
pub fn evaluate(params: &ModelParams, dataset: &[Instance]) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Empty("evaluation set is empty".into()));
    }
    let c = params.class_count;
    let mut confusion = vec![vec![0u64; c]; c];
    let mut loss = 0.0;
    for inst in dataset {
        if inst.label >= c {
            return Err(Error::Domain(format!("label {} out of range", inst.label)));
        }
        let (log_probs, _) = params.forward(&inst.premise, &inst.hypothesis, inst.awe.as_ref())?;
        loss -= log_probs[inst.label];
        confusion[inst.label][argmax(&log_probs)] += 1;
    }
    let correct: u64 = (0..c).map(|k| confusion[k][k]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / dataset.len() as f64,
        loss: loss / dataset.len() as f64,
        confusion,
    })
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
}

fn check_variant(config: &ModelConfig, data: &[Instance]) -> Result<()> {
    let want_awe = config.variant == Variant::Awe;
    if data.iter().any(|i| i.awe.is_some() != want_awe) {
        return Err(Error::Config(format!(
            "{} variant needs instances {} entailment vectors",
            config.variant.as_str(),
            if want_awe { "with" } else { "without" }
        )));
    }
    Ok(())
}

/// Seeded mini-batch Adam training with inverted dropout on every
/// feed-forward input.
pub fn train_model(
    train: &[Instance],
    dev: Option<&[Instance]>,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    check_variant(config, train)?;
    if let Some(dev) = dev {
        check_variant(config, dev)?;
    }
    let input_dim = train[0].premise.first().map_or(0, Vec::len);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(&mut rng, input_dim, config.hidden, config.class_count);
    let mut adam = Adam::new(params.param_count(), config.learning_rate);
    let mut flat = params.to_flat();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch: Vec<&Instance> = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train[i]));
            let mut dropout = Dropout {
                rate: config.dropout,
                rng: &mut rng,
            };
            let (_, grad) = batch_loss(&params, &batch, Some(&mut dropout))?;
            adam.step(&mut flat, &grad.to_flat());
            params.set_flat(&flat);
        }
        let train_eval = evaluate(&params, train)?;
        let dev_accuracy = match dev {
            Some(d) if !d.is_empty() => Some(evaluate(&params, d)?.accuracy),
            _ => None,
        };
        log::debug!(
            "epoch {epoch}: loss {:.4} train acc {:.4}",
            train_eval.loss,
            train_eval.accuracy
        );
        history.push(EpochStats {
            epoch,
            loss: train_eval.loss,
            train_accuracy: train_eval.accuracy,
            dev_accuracy,
        });
    }
    Ok(TrainedModel { params, history })
}

/// Tab-separated `epoch loss train_acc dev_acc` rows with a header line.
pub fn history_tsv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch\tloss\ttrain_acc\tdev_acc\n");
    for h in history {
        let dev = h
            .dev_accuracy
            .map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{}\n",
            h.epoch, h.loss, h.train_accuracy, dev
        ));
    }
    out
}
