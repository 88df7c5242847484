//! Minibatch training and checkpoints.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::NormParams;
use crate::error::{Error, Result};
use crate::nn::{AdamState, Classifier, CnnModel, MlpModel};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EPOCHS: usize = 1200;
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shuffle_seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, shuffle_seed: u64) -> Self {
        TrainConfig {
            epochs,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: crate::nn::adam::DEFAULT_LEARNING_RATE,
            shuffle_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Domain("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!("learning rate {} is not positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// Runs `config.epochs` passes over the data, reshuffling each epoch from a
/// single seeded stream. Returns the mean training loss of every epoch.
pub fn train<M: Classifier>(
    model: &mut M,
    adam: &mut AdamState,
    inputs: &[&M::Input],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Shape(format!("{} training inputs with {} labels", inputs.len(), labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut batch_inputs = Vec::with_capacity(config.batch_size);
    let mut batch_labels = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            batch_inputs.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_inputs.push(inputs[i]);
                batch_labels.push(labels[i]);
            }
            let located = |e: Error| match e {
                Error::NumericFault(what) => Error::NumericFault(format!("{what} (epoch {epoch}, batch {b})")),
                other => other,
            };
            let (loss, grads) = model.loss_and_gradients(&batch_inputs, &batch_labels).map_err(located)?;
            adam.step(model.params_mut(), &grads)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        trace.push(epoch_loss / inputs.len() as f64);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Cnn(CnnModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn name(&self) -> &'static str {
        match self {
            TrainedModel::Cnn(_) => "CNN",
            TrainedModel::Mlp(_) => "MLP",
        }
    }
}

/// Everything needed to resume training or evaluate without the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub model: TrainedModel,
    pub adam: AdamState,
    pub norm_params: NormParams,
    pub split_id: String,
    pub train_config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

impl Checkpoint {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "checkpoint",
                found: ckpt.schema_version,
                expected: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        Ok(ckpt)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}
