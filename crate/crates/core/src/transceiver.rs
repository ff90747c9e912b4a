//! Learned transmitter and receiver.
//!
//! The transmitter maps a one-hot message to `n` complex uses and normalizes
//! every block to unit mean power per use. The receiver sees the received
//! block, plus the raw received pilot on fading channels, and outputs logits
//! over the `M = 2^k` messages.

use crate::channel::uses;
use crate::error::{Error, Result};
use crate::nn::{softmax, Activation, DenseNet, Gradients, Matrix, Tape};
use rand::Rng;
use std::io::Write;
use std::path::Path;

/// Blocks whose squared norm falls below this cannot be normalized.
pub const NORMALIZATION_FLOOR: f64 = 1e-12;

/// A message index in `[0, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Message {
    index: usize,
    alphabet: usize,
}

impl Message {
    pub fn new(index: usize, alphabet: usize) -> Result<Self> {
        if index >= alphabet {
            return Err(Error::Validation(format!(
                "message {index} outside alphabet of size {alphabet}"
            )));
        }
        Ok(Message { index, alphabet })
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn alphabet(self) -> usize {
        self.alphabet
    }
}

pub fn to_onehot(msg: Message) -> Vec<f64> {
    let mut v = vec![0.0; msg.alphabet];
    v[msg.index] = 1.0;
    v
}

pub fn onehot_batch(indices: &[usize], alphabet: usize) -> Result<Matrix> {
    let mut out = Matrix::zeros(indices.len(), alphabet);
    for (r, &i) in indices.iter().enumerate() {
        Message::new(i, alphabet)?;
        out.set(r, i, 1.0);
    }
    Ok(out)
}

/// Argmax with ties going to the lowest index.
pub fn hard_decision(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps message indices to channel blocks.
///
/// Implemented by the learned [`Transmitter`] and by fixed constellations,
/// so GAN training and evaluation can be driven by either.
pub trait BlockEncoder {
    /// Number of distinct messages `M`.
    fn alphabet(&self) -> usize;
    /// Complex channel uses per block.
    fn block_uses(&self) -> usize;
    /// One block per message, shape `(msgs.len(), 2n)`.
    fn encode(&self, msgs: &[usize]) -> Result<Matrix>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmitter {
    net: DenseNet,
    k: usize,
    n: usize,
}

/// Intermediate values from [`Transmitter::encode_with_tape`].
#[derive(Debug, Clone)]
pub struct TxTape {
    net: Tape,
    x: Matrix,
    norms: Vec<f64>,
}

impl Transmitter {
    pub fn new<R: Rng + ?Sized>(
        k: usize,
        n: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let net = DenseNet::mlp(1 << k, hidden, 2 * n, activation, Activation::Linear, rng);
        Transmitter { net, k, n }
    }

    pub fn from_net(net: DenseNet, k: usize, n: usize) -> Result<Self> {
        if net.input_dim() != 1 << k || net.output_dim() != 2 * n {
            return Err(Error::shape(
                "transmitter network",
                format!("{} -> {}", 1 << k, 2 * n),
                format!("{} -> {}", net.input_dim(), net.output_dim()),
            ));
        }
        Ok(Transmitter { net, k, n })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn normalize(&self, raw: Matrix) -> Result<(Matrix, Vec<f64>)> {
        let target = (self.n as f64).sqrt();
        let mut x = raw;
        let mut norms = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row_mut(r);
            let sq: f64 = row.iter().map(|v| v * v).sum();
            if !(sq >= NORMALIZATION_FLOOR) {
                return Err(Error::DegenerateBlock(sq));
            }
            let norm = sq.sqrt();
            row.iter_mut().for_each(|v| *v *= target / norm);
            norms.push(norm);
        }
        Ok((x, norms))
    }

    /// Encodes and keeps what [`Transmitter::backward`] needs.
    pub fn encode_with_tape(&self, msgs: &[usize]) -> Result<(Matrix, TxTape)> {
        let input = onehot_batch(msgs, self.alphabet())?;
        let (raw, net) = self.net.forward(&input)?;
        let (x, norms) = self.normalize(raw)?;
        Ok((x.clone(), TxTape { net, x, norms }))
    }

    /// Parameter gradients given `d loss / d x` for the normalized blocks.
    ///
    /// With `x = sqrt(n) * u / |u|`, the Jacobian is
    /// `sqrt(n) / |u| * (I - x x^T / n)`.
    pub fn backward(&self, tape: &TxTape, grad_x: &Matrix) -> Result<Gradients> {
        if grad_x.rows() != tape.x.rows() || grad_x.cols() != tape.x.cols() {
            return Err(Error::shape(
                "transmitter upstream gradient",
                format!("{}x{}", tape.x.rows(), tape.x.cols()),
                format!("{}x{}", grad_x.rows(), grad_x.cols()),
            ));
        }
        let nf = self.n as f64;
        let mut grad_u = grad_x.clone();
        for r in 0..grad_u.rows() {
            let x = tape.x.row(r);
            let g = grad_u.row_mut(r);
            let proj: f64 = x.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>() / nf;
            let scale = nf.sqrt() / tape.norms[r];
            for (gv, &xv) in g.iter_mut().zip(x) {
                *gv = scale * (*gv - proj * xv);
            }
        }
        let (grads, _) = self.net.backward(&tape.net, &grad_u)?;
        Ok(grads)
    }

    /// Blocks for every message in index order, shape `(M, 2n)`.
    pub fn constellation(&self) -> Result<Matrix> {
        let all: Vec<usize> = (0..self.alphabet()).collect();
        self.encode(&all)
    }
}

impl BlockEncoder for Transmitter {
    fn alphabet(&self) -> usize {
        1 << self.k
    }

    fn block_uses(&self) -> usize {
        self.n
    }

    fn encode(&self, msgs: &[usize]) -> Result<Matrix> {
        let input = onehot_batch(msgs, self.alphabet())?;
        let raw = self.net.predict(&input)?;
        Ok(self.normalize(raw)?.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    net: DenseNet,
    k: usize,
    n: usize,
    n_pilot: usize,
}

impl Receiver {
    /// `n_pilot = 0` builds a receiver without pilot input (AWGN).
    pub fn new<R: Rng + ?Sized>(
        k: usize,
        n: usize,
        n_pilot: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let net = DenseNet::mlp(
            2 * n + 2 * n_pilot,
            hidden,
            1 << k,
            activation,
            Activation::Linear,
            rng,
        );
        Receiver { net, k, n, n_pilot }
    }

    pub fn from_net(net: DenseNet, k: usize, n: usize, n_pilot: usize) -> Result<Self> {
        let input = 2 * n + 2 * n_pilot;
        if net.input_dim() != input || net.output_dim() != 1 << k {
            return Err(Error::shape(
                "receiver network",
                format!("{input} -> {}", 1 << k),
                format!("{} -> {}", net.input_dim(), net.output_dim()),
            ));
        }
        Ok(Receiver { net, k, n, n_pilot })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_pilot(&self) -> usize {
        self.n_pilot
    }

    pub fn alphabet(&self) -> usize {
        1 << self.k
    }

    /// Concatenates `y` and the pilot observation into the network input.
    pub fn assemble_input(&self, y: &Matrix, pilots: Option<&Matrix>) -> Result<Matrix> {
        if y.cols() != 2 * self.n {
            return Err(Error::shape("received block", 2 * self.n, y.cols()));
        }
        match (self.n_pilot, pilots) {
            (0, None) => Ok(y.clone()),
            (0, Some(_)) => Err(Error::Config {
                key: "n_pilot".into(),
                message: "pilot supplied to a receiver configured without pilots".into(),
            }),
            (_, None) => Err(Error::Config {
                key: "n_pilot".into(),
                message: "fading receiver requires the received pilot".into(),
            }),
            (np, Some(p)) => {
                if p.cols() != 2 * np {
                    return Err(Error::shape("pilot block", 2 * np, p.cols()));
                }
                Matrix::hcat(&[y, p])
            }
        }
    }

    pub fn logits(&self, y: &Matrix, pilots: Option<&Matrix>) -> Result<Matrix> {
        self.net.predict(&self.assemble_input(y, pilots)?)
    }

    /// Probability vectors over the `M` messages, one row per block.
    pub fn decode(&self, y: &Matrix, pilots: Option<&Matrix>) -> Result<Matrix> {
        Ok(softmax(&self.logits(y, pilots)?))
    }

    pub fn forward(&self, y: &Matrix, pilots: Option<&Matrix>) -> Result<(Matrix, Tape)> {
        self.net.forward(&self.assemble_input(y, pilots)?)
    }
}

/// Writes `message_index,use_index,re,im` for all `M` messages.
pub fn write_constellation_csv(tx: &Transmitter, path: &Path) -> Result<()> {
    let blocks = tx.constellation()?;
    let mut s = String::from("message_index,use_index,re,im\n");
    for (m, row) in blocks.row_iter().enumerate() {
        for (i, u) in uses(row).enumerate() {
            s.push_str(&format!("{m},{i},{},{}\n", u.re, u.im));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}
