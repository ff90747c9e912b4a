//! Channel-agnostic end-to-end learned communication.
//!
//! A transmitter and a receiver network are trained jointly while the channel
//! stays a black box: the receiver learns from real channel outputs, and the
//! transmitter learns through a conditional GAN that imitates the channel.
//! Classical baselines (Hamming(7,4) with ML decoding, 16-QAM with perfect or
//! pilot-estimated CSI) and a Monte-Carlo BLER harness are included for
//! comparison.

pub mod baseline;
pub mod channel;
pub mod config;
pub mod eval;
mod error;
pub mod gan;
pub mod nn;
pub mod seed;
pub mod train;
pub mod transceiver;

pub use channel::{ChannelKind, RealChannel, SnrSpec};
pub use config::{load_config, TrainConfig};
pub use error::{Error, Result};
pub use nn::{DenseNet, Matrix};
pub use train::{train_full, Models, Trainer};
pub use transceiver::{BlockEncoder, Receiver, Transmitter};
