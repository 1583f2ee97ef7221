//! Versioned JSON parameter containers. Loading validates the declared
//! shapes before constructing a network.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mlp::{Activation, Mlp};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Row-major weight matrices, one per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_net(net: &Mlp) -> Self {
        let data = net.layer_data();
        Self {
            version: CHECKPOINT_VERSION,
            sizes: net.sizes().to_vec(),
            activations: data.iter().map(|(_, _, a)| *a).collect(),
            weights: data.iter().map(|(w, _, _)| w.clone()).collect(),
            biases: data.into_iter().map(|(_, b, _)| b).collect(),
        }
    }

    pub fn into_net(self) -> Result<Mlp> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let n = self.weights.len();
        if self.biases.len() != n || self.activations.len() != n {
            return Err(Error::Shape("checkpoint layer counts disagree".into()));
        }
        let data = self
            .weights
            .into_iter()
            .zip(self.biases)
            .zip(self.activations)
            .map(|((w, b), a)| (w, b, a))
            .collect();
        Mlp::from_layer_data(self.sizes, data)
    }
}

pub fn save_checkpoint(net: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string(&Checkpoint::from_net(net))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Mlp> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.into_net()
}
