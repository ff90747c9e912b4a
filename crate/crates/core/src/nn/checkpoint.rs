//! JSON parameter checkpoints.
//!
//! One file per network: per-layer dimensions, activation name and flat
//! row-major weight/bias arrays, plus the run seed and a config snapshot.
//! Floats are written in shortest round-trip form, so `load(save(net))`
//! reproduces the parameters bit for bit.

use super::dense::{Activation, DenseNet, Layer};
use super::matrix::Matrix;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    /// Which network this is (`transmitter`, `receiver`, `generator`, `discriminator`).
    pub role: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub layers: Vec<LayerRecord>,
}

impl Checkpoint {
    pub fn from_net(role: &str, net: &DenseNet, seed: u64, config: serde_json::Value) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                input_dim: l.input_dim(),
                output_dim: l.output_dim(),
                activation: l.activation,
                weights: l.weight.data().to_vec(),
                bias: l.bias.clone(),
            })
            .collect();
        Checkpoint {
            role: role.to_string(),
            seed,
            config,
            layers,
        }
    }

    pub fn to_net(&self) -> Result<DenseNet> {
        let layers = self
            .layers
            .iter()
            .map(|r| {
                Ok(Layer {
                    weight: Matrix::from_vec(r.input_dim, r.output_dim, r.weights.clone())?,
                    bias: r.bias.clone(),
                    activation: r.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DenseNet::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}
