//! Flat-text JSON checkpoints: named row-major tensors at nine significant digits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::feedforward::FeedForward;
use super::model::ModelParams;
use super::train::ModelConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "decomposable-attention/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub input_dim: usize,
    pub tensors: Vec<Tensor>,
}

fn round9(x: f64) -> f64 {
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn ff_tensors(prefix: &str, ff: &FeedForward) -> Vec<Tensor> {
    let shapes = [
        vec![ff.hidden, ff.input],
        vec![ff.hidden],
        vec![ff.output, ff.hidden],
        vec![ff.output],
    ];
    ff.tensors()
        .into_iter()
        .zip(shapes)
        .map(|((name, values), shape)| Tensor {
            name: format!("{prefix}.{name}"),
            shape,
            values: values.iter().copied().map(round9).collect(),
        })
        .collect()
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams, config: &ModelConfig) -> Self {
        let mut tensors = ff_tensors("F", &params.f);
        tensors.extend(ff_tensors("G", &params.g));
        tensors.extend(ff_tensors("H", &params.h));
        tensors.push(Tensor {
            name: "eta_raw".into(),
            shape: vec![],
            values: vec![round9(params.eta_raw)],
        });
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config: config.clone(),
            input_dim: params.input_dim(),
            tensors,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Domain(format!(
                "unsupported checkpoint format {:?}",
                self.format
            )));
        }
        self.config.validate()?;
        let mut params =
            ModelParams::zeros(self.input_dim, self.config.hidden, self.config.class_count);
        let expected = Checkpoint::from_params(&params, &self.config);
        if expected.tensors.len() != self.tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint has {} tensors, expected {}",
                self.tensors.len(),
                expected.tensors.len()
            )));
        }
        let mut flat = Vec::with_capacity(params.param_count());
        for (want, got) in expected.tensors.iter().zip(&self.tensors) {
            if want.name != got.name
                || want.shape != got.shape
                || want.values.len() != got.values.len()
            {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
            if got.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite value in {}", got.name)));
            }
            flat.extend_from_slice(&got.values);
        }
        params.set_flat(&flat);
        Ok(params)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}
