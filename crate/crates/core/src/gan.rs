//! Conditional GAN channel surrogate.
//!
//! The generator maps `[z, m]` to a fake channel output and the discriminator
//! scores `[y, m]`. The conditioning `m` is the transmitted block `x`, followed
//! by the received pilot on fading channels.
//!
//! Losses are binary cross-entropy on discriminator logits: the discriminator
//! targets 1 on real and 0 on fake, and the generator uses the non-saturating
//! objective (fake targeted as 1).

use crate::error::{Error, Result};
use crate::nn::{sigmoid_bce, Activation, DenseNet, Gradients, Matrix, Tape};
use rand::Rng;
use rand_distr::StandardNormal;

/// Conditioning information for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    pub x: Matrix,
    pub pilots: Option<Matrix>,
}

impl Conditioning {
    pub fn new(x: Matrix, pilots: Option<Matrix>) -> Result<Self> {
        if let Some(p) = &pilots {
            if p.rows() != x.rows() {
                return Err(Error::shape("conditioning pilots", x.rows(), p.rows()));
            }
        }
        Ok(Conditioning { x, pilots })
    }

    pub fn batch_size(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols() + self.pilots.as_ref().map_or(0, |p| p.cols())
    }

    fn parts(&self) -> Vec<&Matrix> {
        let mut v = vec![&self.x];
        if let Some(p) = &self.pilots {
            v.push(p);
        }
        v
    }
}

/// Draws a `(batch, z_dim)` matrix of standard Gaussian noise.
pub fn sample_noise<R: Rng + ?Sized>(batch: usize, z_dim: usize, rng: &mut R) -> Matrix {
    let data = (0..batch * z_dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(batch, z_dim, data).expect("sized above")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    net: DenseNet,
    z_dim: usize,
    block_dim: usize,
    pilot_dim: usize,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(
        z_dim: usize,
        block_uses: usize,
        n_pilot: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let block_dim = 2 * block_uses;
        let pilot_dim = 2 * n_pilot;
        let net = DenseNet::mlp(
            z_dim + block_dim + pilot_dim,
            hidden,
            block_dim,
            activation,
            Activation::Linear,
            rng,
        );
        Generator {
            net,
            z_dim,
            block_dim,
            pilot_dim,
        }
    }

    pub fn from_net(net: DenseNet, z_dim: usize, block_uses: usize, n_pilot: usize) -> Result<Self> {
        let (block_dim, pilot_dim) = (2 * block_uses, 2 * n_pilot);
        let input = z_dim + block_dim + pilot_dim;
        if net.input_dim() != input || net.output_dim() != block_dim {
            return Err(Error::shape(
                "generator network",
                format!("{input} -> {block_dim}"),
                format!("{} -> {}", net.input_dim(), net.output_dim()),
            ));
        }
        Ok(Generator {
            net,
            z_dim,
            block_dim,
            pilot_dim,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn z_dim(&self) -> usize {
        self.z_dim
    }

    fn assemble(&self, z: &Matrix, m: &Conditioning) -> Result<Matrix> {
        if z.cols() != self.z_dim {
            return Err(Error::shape("generator noise", self.z_dim, z.cols()));
        }
        if z.rows() != m.batch_size() {
            return Err(Error::shape("generator batch", m.batch_size(), z.rows()));
        }
        if m.x.cols() != self.block_dim || m.dim() != self.block_dim + self.pilot_dim {
            return Err(Error::shape(
                "generator conditioning",
                self.block_dim + self.pilot_dim,
                m.dim(),
            ));
        }
        let mut parts = vec![z];
        parts.extend(m.parts());
        Matrix::hcat(&parts)
    }

    /// Fake channel outputs, same shape as the conditioning block.
    pub fn generate(&self, z: &Matrix, m: &Conditioning) -> Result<Matrix> {
        self.net.predict(&self.assemble(z, m)?)
    }

    pub fn forward(&self, z: &Matrix, m: &Conditioning) -> Result<(Matrix, Tape)> {
        self.net.forward(&self.assemble(z, m)?)
    }

    /// `d loss / d x` through the generator, for a loss whose gradient w.r.t.
    /// the generated output is `upstream`. This is the path that carries the
    /// end-to-end loss back into the transmitter.
    pub fn block_gradient(&self, tape: &Tape, upstream: &Matrix) -> Result<Matrix> {
        let full = self.net.backward_input(tape, upstream)?;
        Ok(full.columns(self.z_dim, self.z_dim + self.block_dim))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    net: DenseNet,
    block_dim: usize,
    pilot_dim: usize,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        block_uses: usize,
        n_pilot: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let block_dim = 2 * block_uses;
        let pilot_dim = 2 * n_pilot;
        let net = DenseNet::mlp(
            2 * block_dim + pilot_dim,
            hidden,
            1,
            activation,
            Activation::Linear,
            rng,
        );
        Discriminator {
            net,
            block_dim,
            pilot_dim,
        }
    }

    pub fn from_net(net: DenseNet, block_uses: usize, n_pilot: usize) -> Result<Self> {
        let (block_dim, pilot_dim) = (2 * block_uses, 2 * n_pilot);
        if net.input_dim() != 2 * block_dim + pilot_dim || net.output_dim() != 1 {
            return Err(Error::shape(
                "discriminator network",
                format!("{} -> 1", 2 * block_dim + pilot_dim),
                format!("{} -> {}", net.input_dim(), net.output_dim()),
            ));
        }
        Ok(Discriminator {
            net,
            block_dim,
            pilot_dim,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    fn assemble(&self, y: &Matrix, m: &Conditioning) -> Result<Matrix> {
        if y.cols() != self.block_dim {
            return Err(Error::shape("discriminator sample", self.block_dim, y.cols()));
        }
        if y.rows() != m.batch_size() {
            return Err(Error::shape("discriminator batch", m.batch_size(), y.rows()));
        }
        if m.dim() != self.block_dim + self.pilot_dim {
            return Err(Error::shape(
                "discriminator conditioning",
                self.block_dim + self.pilot_dim,
                m.dim(),
            ));
        }
        let mut parts = vec![y];
        parts.extend(m.parts());
        Matrix::hcat(&parts)
    }

    /// One logit per sample; `sigmoid(logit)` is the probability of "real".
    pub fn discriminate(&self, y: &Matrix, m: &Conditioning) -> Result<Vec<f64>> {
        Ok(self.net.predict(&self.assemble(y, m)?)?.into_vec())
    }

    pub fn forward(&self, y: &Matrix, m: &Conditioning) -> Result<(Vec<f64>, Tape)> {
        let (out, tape) = self.net.forward(&self.assemble(y, m)?)?;
        Ok((out.into_vec(), tape))
    }

    /// `d loss / d y` for a loss with gradient `upstream` w.r.t. the logits.
    pub fn sample_gradient(&self, tape: &Tape, upstream: &[f64]) -> Result<Matrix> {
        let up = Matrix::from_vec(upstream.len(), 1, upstream.to_vec())?;
        let full = self.net.backward_input(tape, &up)?;
        Ok(full.columns(0, self.block_dim))
    }
}

/// Discriminator result for one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorLoss {
    pub loss: f64,
    /// Fraction of real and fake samples classified correctly (logit sign).
    pub accuracy: f64,
}

/// `BCE(d(real|m), real_target) + BCE(d(fake|m), 0)` and its gradient w.r.t.
/// the discriminator parameters only. `real_target` is 1 unless label
/// smoothing is used.
pub fn d_loss(
    d: &Discriminator,
    real_y: &Matrix,
    fake_y: &Matrix,
    m: &Conditioning,
    real_target: f64,
) -> Result<(DiscriminatorLoss, Gradients)> {
    if real_y.rows() != fake_y.rows() {
        return Err(Error::shape("d_loss fake batch", real_y.rows(), fake_y.rows()));
    }
    let b = real_y.rows();
    let (real_logits, real_tape) = d.forward(real_y, m)?;
    let (fake_logits, fake_tape) = d.forward(fake_y, m)?;
    let (loss_r, grad_r) = sigmoid_bce(&real_logits, &vec![real_target; b])?;
    let (loss_f, grad_f) = sigmoid_bce(&fake_logits, &vec![0.0; b])?;
    let loss = loss_r + loss_f;
    if !loss.is_finite() {
        return Err(Error::NonFinite("discriminator loss".into()));
    }
    let (mut grads, _) = d.net.backward(&real_tape, &Matrix::from_vec(b, 1, grad_r)?)?;
    let (gf, _) = d.net.backward(&fake_tape, &Matrix::from_vec(b, 1, grad_f)?)?;
    grads.add_assign(&gf);
    let correct = real_logits.iter().filter(|&&z| z > 0.0).count()
        + fake_logits.iter().filter(|&&z| z < 0.0).count();
    Ok((
        DiscriminatorLoss {
            loss,
            accuracy: correct as f64 / (2 * b) as f64,
        },
        grads,
    ))
}

/// Non-saturating generator loss `BCE(d(g(z|m)|m), 1)` and its gradient
/// w.r.t. the generator parameters. The discriminator is only read.
pub fn g_loss(
    g: &Generator,
    d: &Discriminator,
    z: &Matrix,
    m: &Conditioning,
) -> Result<(f64, Gradients)> {
    let (fake, g_tape) = g.forward(z, m)?;
    let (logits, d_tape) = d.forward(&fake, m)?;
    let (loss, grad_logits) = sigmoid_bce(&logits, &vec![1.0; logits.len()])?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("generator loss".into()));
    }
    let grad_fake = d.sample_gradient(&d_tape, &grad_logits)?;
    let (grads, _) = g.net.backward(&g_tape, &grad_fake)?;
    Ok((loss, grads))
}
