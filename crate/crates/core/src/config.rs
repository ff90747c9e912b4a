//! Training configuration.
//!
//! Every field has a default; an empty JSON object yields the reference setup
//! (hidden layers 32-32 / 32-32 / 128-128-128 / 32-32-32, learning rates
//! 1e-3 for the transceiver and 1e-4 for the generator, batch size 320, Adam).
//! The discriminator uses its own, larger learning rate.
//! Unknown keys are rejected.

use crate::channel::{ChannelKind, SnrSpec};
use crate::error::{Error, Result};
use crate::nn::Activation;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Information bits per block; the alphabet has `2^k` messages.
    pub k: usize,
    /// Complex channel uses per block.
    pub n: usize,
    /// Pilot uses per block on fading channels (ignored for AWGN).
    pub n_pilot: usize,
    pub channel: ChannelKind,
    /// Training Eb/N0; `None` picks 4 dB on AWGN and 10 dB on Rayleigh.
    pub train_ebn0_db: Option<f64>,
    pub batch_size: usize,
    pub lr_transceiver: f64,
    /// Generator learning rate.
    pub lr_gan: f64,
    pub lr_discriminator: f64,
    pub outer_iterations: usize,
    pub gan_steps: usize,
    pub rx_steps: usize,
    pub tx_steps: usize,
    /// Receiver steps on the real channel after the last outer iteration.
    pub final_rx_steps: usize,
    /// Discriminator updates per GAN step.
    pub d_steps: usize,
    /// Generator updates per GAN step.
    pub g_steps: usize,
    pub seed: u64,
    pub z_dim: usize,
    pub tx_hidden: Vec<usize>,
    pub rx_hidden: Vec<usize>,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
    pub activation: Activation,
    /// Discriminator target for real samples; 0.9 enables one-sided label smoothing.
    pub real_label: f64,
    /// Std of Gaussian jitter on transmitted blocks fed to the GAN.
    pub gan_jitter: f64,
    /// Consecutive perfect-accuracy discriminator steps before its optimizer is reset.
    pub divergence_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 4,
            n: 7,
            n_pilot: 1,
            channel: ChannelKind::Awgn,
            train_ebn0_db: None,
            batch_size: 320,
            lr_transceiver: 0.001,
            lr_gan: 0.0001,
            lr_discriminator: 0.001,
            outer_iterations: 500,
            gan_steps: 40,
            rx_steps: 10,
            tx_steps: 10,
            final_rx_steps: 3000,
            d_steps: 5,
            g_steps: 1,
            seed: 1,
            z_dim: 16,
            tx_hidden: vec![32, 32],
            rx_hidden: vec![32, 32],
            g_hidden: vec![128, 128, 128],
            d_hidden: vec![32, 32, 32],
            activation: Activation::Relu,
            real_label: 1.0,
            gan_jitter: 0.3,
            divergence_window: 200,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl TrainConfig {
    pub fn alphabet(&self) -> usize {
        1 << self.k
    }

    /// Pilot uses actually transmitted (zero on AWGN).
    pub fn pilots(&self) -> usize {
        if self.channel.is_fading() {
            self.n_pilot
        } else {
            0
        }
    }

    pub fn train_ebn0_db(&self) -> f64 {
        self.train_ebn0_db.unwrap_or(match self.channel {
            ChannelKind::Awgn => 4.0,
            ChannelKind::Rayleigh => 10.0,
        })
    }

    pub fn snr_train(&self) -> SnrSpec {
        SnrSpec::new(self.train_ebn0_db(), self.k, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=12).contains(&self.k) {
            return Err(invalid("k", "must be in 1..=12"));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be >= 1"));
        }
        if self.channel.is_fading() && self.n_pilot == 0 {
            return Err(invalid("n_pilot", "fading channels need at least one pilot"));
        }
        if let Some(db) = self.train_ebn0_db {
            if !db.is_finite() {
                return Err(invalid("train_ebn0_db", "must be finite"));
            }
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be >= 1"));
        }
        for (key, lr) in [
            ("lr_transceiver", self.lr_transceiver),
            ("lr_gan", self.lr_gan),
            ("lr_discriminator", self.lr_discriminator),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(invalid(key, "must be a positive finite number"));
            }
        }
        if self.d_steps == 0 || self.g_steps == 0 {
            let key = if self.d_steps == 0 { "d_steps" } else { "g_steps" };
            return Err(invalid(key, "must be >= 1"));
        }
        if self.z_dim == 0 {
            return Err(invalid("z_dim", "must be >= 1"));
        }
        for (key, h) in [
            ("tx_hidden", &self.tx_hidden),
            ("rx_hidden", &self.rx_hidden),
            ("g_hidden", &self.g_hidden),
            ("d_hidden", &self.d_hidden),
        ] {
            if let Some(i) = h.iter().position(|&w| w == 0) {
                return Err(invalid(&format!("{key}[{i}]"), "layer width must be >= 1"));
            }
        }
        if !(self.real_label > 0.0 && self.real_label <= 1.0) {
            return Err(invalid("real_label", "must be in (0, 1]"));
        }
        if !(self.gan_jitter.is_finite() && self.gan_jitter >= 0.0) {
            return Err(invalid("gan_jitter", "must be a finite number >= 0"));
        }
        if self.divergence_window == 0 {
            return Err(invalid("divergence_window", "must be >= 1"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TrainConfig> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|e| invalid("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads and validates a JSON config file.
pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_reference_setup() {
        let cfg = TrainConfig::from_json("{}").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!(cfg.tx_hidden, vec![32, 32]);
        assert_eq!(cfg.rx_hidden, vec![32, 32]);
        assert_eq!(cfg.g_hidden, vec![128, 128, 128]);
        assert_eq!(cfg.d_hidden, vec![32, 32, 32]);
        assert_eq!(cfg.lr_transceiver, 0.001);
        assert_eq!(cfg.lr_gan, 0.0001);
        assert_eq!(cfg.batch_size, 320);
        assert_eq!(cfg.train_ebn0_db(), 4.0);
    }

    #[test]
    fn range_errors_name_the_key() {
        let err = TrainConfig::from_json(r#"{"batch_size": 0}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "batch_size"), "{err}");
        let err = TrainConfig::from_json(r#"{"lr_gan": -1}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "lr_gan"));
        let err = TrainConfig::from_json(r#"{"g_hidden": [128, 0]}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "g_hidden[1]"));
    }

    #[test]
    fn unknown_and_malformed_are_rejected() {
        let err = TrainConfig::from_json(r#"{"batchsize": 10}"#).unwrap_err();
        assert!(err.to_string().contains("batchsize"));
        assert!(TrainConfig::from_json("{").is_err());
        assert!(TrainConfig::from_json(r#"{"channel": "rician"}"#).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let cfg = TrainConfig {
            channel: ChannelKind::Rayleigh,
            train_ebn0_db: Some(12.5),
            seed: 77,
            ..TrainConfig::default()
        };
        assert_eq!(TrainConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(cfg.pilots(), 1);
        assert_eq!(TrainConfig::default().pilots(), 0);
        assert_eq!(TrainConfig::from_json(r#"{"channel":"rayleigh"}"#).unwrap().train_ebn0_db(), 10.0);
    }
}
