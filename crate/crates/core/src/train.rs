//! Alternating training of receiver, transmitter and channel GAN.
//!
//! Each outer iteration runs a GAN phase, a receiver phase and a transmitter
//! phase. In every phase exactly one component (or the generator and
//! discriminator pair) is updated while the others are read-only:
//!
//! * receiver: messages go through the transmitter and the *real* channel;
//! * transmitter: the generator stands in for the channel so the loss
//!   gradient can reach the transmitter through the generator's input;
//! * GAN: real channel outputs versus generated ones for the same blocks.

use crate::channel::{pilot_receive, rayleigh_sample, ChannelRealization, RealChannel};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::gan::{d_loss, g_loss, sample_noise, Conditioning, Discriminator, Generator};
use crate::nn::{adam_step, softmax_cross_entropy, Activation, AdamConfig, AdamState, Checkpoint, Matrix};
use crate::seed::{substream, Rng};
use crate::transceiver::{onehot_batch, BlockEncoder, Receiver, Transmitter};
use rand::Rng as _;
use rand_distr::StandardNormal;
use std::io::Write;
use std::path::Path;

pub const TX_FILE: &str = "tx.json";
pub const RX_FILE: &str = "rx.json";
pub const G_FILE: &str = "g.json";
pub const D_FILE: &str = "d.json";
pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.json";

/// One training batch: messages and, on fading channels, one realization per block.
#[derive(Debug, Clone)]
pub struct Batch {
    pub messages: Vec<usize>,
    pub realizations: Option<Vec<ChannelRealization>>,
}

/// Uniform messages, plus a fresh `h ~ CN(0, 1)` per block on fading channels.
pub fn sample_batch<R: rand::Rng + ?Sized>(
    alphabet: usize,
    batch_size: usize,
    channel: &RealChannel,
    rng: &mut R,
) -> Batch {
    let messages = (0..batch_size).map(|_| rng.random_range(0..alphabet)).collect();
    let realizations = channel.kind.is_fading().then(|| {
        (0..batch_size)
            .map(|_| ChannelRealization {
                h: rayleigh_sample(rng),
                noise_std: channel.noise_std,
            })
            .collect()
    });
    Batch {
        messages,
        realizations,
    }
}

/// Real channel output for `x` using the batch's realizations.
fn through_real_channel<R: rand::Rng + ?Sized>(
    channel: &RealChannel,
    x: &Matrix,
    batch: &Batch,
    rng: &mut R,
) -> (Matrix, Option<Matrix>) {
    match &batch.realizations {
        None => (channel.transmit(x, rng).y, None),
        Some(real) => {
            let h: Vec<_> = real.iter().map(|r| r.h).collect();
            let out = channel.transmit_with(x, &h, rng);
            (out.y, out.pilots)
        }
    }
}

/// Received pilots only, for when the data path goes through the surrogate.
fn pilots_only<R: rand::Rng + ?Sized>(
    channel: &RealChannel,
    batch: &Batch,
    rng: &mut R,
) -> Option<Matrix> {
    batch.realizations.as_ref().map(|real| {
        let mut p = Matrix::zeros(real.len(), 2 * channel.n_pilot);
        for (r, re) in real.iter().enumerate() {
            p.row_mut(r).copy_from_slice(&pilot_receive(re, channel.n_pilot, rng));
        }
        p
    })
}

fn check_loss(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(format!("{what} loss")))
    }
}

/// One Adam step on the receiver over a fresh batch through the real channel.
pub fn train_receiver_step(
    rx: &mut Receiver,
    opt: &mut AdamState,
    tx: &Transmitter,
    channel: &RealChannel,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let batch = sample_batch(tx.alphabet(), batch_size, channel, rng);
    let x = tx.encode(&batch.messages)?;
    let (y, pilots) = through_real_channel(channel, &x, &batch, rng);
    let (logits, tape) = rx.forward(&y, pilots.as_ref())?;
    let (loss, grad) = softmax_cross_entropy(&logits, &onehot_batch(&batch.messages, tx.alphabet())?)?;
    check_loss(loss, "receiver")?;
    let (grads, _) = rx.net().backward(&tape, &grad)?;
    adam_step(rx.net_mut(), &grads, opt)?;
    Ok(loss)
}

/// Gradient of the end-to-end loss w.r.t. the transmitter parameters, with
/// the generator standing in for the channel. Returns `(loss, gradients)`.
pub fn transmitter_gradient(
    tx: &Transmitter,
    rx: &Receiver,
    g: &Generator,
    messages: &[usize],
    pilots: Option<&Matrix>,
    z: &Matrix,
) -> Result<(f64, crate::nn::Gradients)> {
    let (x, tx_tape) = tx.encode_with_tape(messages)?;
    let m = Conditioning::new(x, pilots.cloned())?;
    let (y_fake, g_tape) = g.forward(z, &m)?;
    let (logits, rx_tape) = rx.forward(&y_fake, pilots)?;
    let (loss, grad_logits) = softmax_cross_entropy(&logits, &onehot_batch(messages, tx.alphabet())?)?;
    check_loss(loss, "transmitter")?;
    let grad_in = rx.net().backward_input(&rx_tape, &grad_logits)?;
    let grad_y = grad_in.columns(0, 2 * rx.n());
    let grad_x = g.block_gradient(&g_tape, &grad_y)?;
    Ok((loss, tx.backward(&tx_tape, &grad_x)?))
}

/// One Adam step on the transmitter through the frozen generator and receiver.
///
/// On fading channels the conditioning pilot is a real pilot observation over
/// the sampled `h`.
pub fn train_transmitter_step(
    tx: &mut Transmitter,
    opt: &mut AdamState,
    rx: &Receiver,
    g: &Generator,
    channel: &RealChannel,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let batch = sample_batch(tx.alphabet(), batch_size, channel, rng);
    let pilots = pilots_only(channel, &batch, rng);
    let z = sample_noise(batch_size, g.z_dim(), rng);
    let (loss, grads) = transmitter_gradient(tx, rx, g, &batch.messages, pilots.as_ref(), &z)?;
    adam_step(tx.net_mut(), &grads, opt)?;
    Ok(loss)
}

/// Default generator weight-average decay for [`fit_channel_gan`].
pub const FIT_EMA_DECAY: f64 = 0.999;

/// GAN hyper-parameters independent of the transceiver.
#[derive(Debug, Clone, PartialEq)]
pub struct GanSettings {
    pub batch_size: usize,
    pub z_dim: usize,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
    pub activation: Activation,
    /// Generator learning rate.
    pub learning_rate: f64,
    pub d_learning_rate: f64,
    pub real_label: f64,
    pub d_steps: usize,
    pub g_steps: usize,
    /// Std of Gaussian jitter added to transmitted blocks during GAN training.
    pub jitter: f64,
    /// Decay of the generator weight average returned by [`fit_channel_gan`]; 0 disables it.
    pub ema_decay: f64,
}

impl From<&TrainConfig> for GanSettings {
    fn from(cfg: &TrainConfig) -> Self {
        GanSettings {
            batch_size: cfg.batch_size,
            z_dim: cfg.z_dim,
            g_hidden: cfg.g_hidden.clone(),
            d_hidden: cfg.d_hidden.clone(),
            activation: cfg.activation,
            learning_rate: cfg.lr_gan,
            d_learning_rate: cfg.lr_discriminator,
            real_label: cfg.real_label,
            d_steps: cfg.d_steps,
            g_steps: cfg.g_steps,
            jitter: cfg.gan_jitter,
            ema_decay: FIT_EMA_DECAY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanStepStats {
    pub d_loss: f64,
    pub d_accuracy: f64,
    pub g_loss: f64,
}

/// Discriminator update(s) followed by generator update(s).
///
/// Real samples are `source` blocks through the real channel; fake samples
/// are the same blocks (and pilots) through the generator.
#[allow(clippy::too_many_arguments)]
pub fn train_gan_step(
    g: &mut Generator,
    d: &mut Discriminator,
    g_opt: &mut AdamState,
    d_opt: &mut AdamState,
    source: &dyn BlockEncoder,
    channel: &RealChannel,
    settings: &GanSettings,
    rng: &mut Rng,
) -> Result<GanStepStats> {
    let mut stats = GanStepStats {
        d_loss: 0.0,
        d_accuracy: 0.0,
        g_loss: 0.0,
    };
    let mut m = None;
    for _ in 0..settings.d_steps {
        let batch = sample_batch(source.alphabet(), settings.batch_size, channel, rng);
        let mut x = source.encode(&batch.messages)?;
        if settings.jitter > 0.0 {
            x.data_mut()
                .iter_mut()
                .for_each(|v| *v += settings.jitter * rng.sample::<f64, _>(StandardNormal));
        }
        let (real_y, pilots) = through_real_channel(channel, &x, &batch, rng);
        let cond = Conditioning::new(x, pilots)?;
        let z = sample_noise(settings.batch_size, settings.z_dim, rng);
        let fake_y = g.generate(&z, &cond)?;
        let (dl, grads) = d_loss(d, &real_y, &fake_y, &cond, settings.real_label)?;
        adam_step(d.net_mut(), &grads, d_opt)?;
        stats.d_loss += dl.loss / settings.d_steps as f64;
        stats.d_accuracy += dl.accuracy / settings.d_steps as f64;
        m = Some(cond);
    }
    let cond = m.expect("d_steps >= 1");
    for _ in 0..settings.g_steps {
        let z = sample_noise(settings.batch_size, settings.z_dim, rng);
        let (gl, grads) = g_loss(g, d, &z, &cond)?;
        adam_step(g.net_mut(), &grads, g_opt)?;
        stats.g_loss += gl / settings.g_steps as f64;
    }
    Ok(stats)
}

/// Trains a conditional GAN on a fixed block source, e.g. a 16-QAM mapper.
pub fn fit_channel_gan(
    source: &dyn BlockEncoder,
    channel: &RealChannel,
    settings: &GanSettings,
    steps: usize,
    seed: u64,
) -> Result<(Generator, Discriminator)> {
    let mut init = substream(seed, "init-gan", 0);
    let mut g = Generator::new(
        settings.z_dim,
        source.block_uses(),
        if channel.kind.is_fading() { channel.n_pilot } else { 0 },
        &settings.g_hidden,
        settings.activation,
        &mut init,
    );
    let mut d = Discriminator::new(
        source.block_uses(),
        if channel.kind.is_fading() { channel.n_pilot } else { 0 },
        &settings.d_hidden,
        settings.activation,
        &mut init,
    );
    let mut g_opt = AdamState::new(g.net(), AdamConfig::with_learning_rate(settings.learning_rate));
    let mut d_opt = AdamState::new(d.net(), AdamConfig::with_learning_rate(settings.d_learning_rate));
    let mut rng = substream(seed, "gan-data", 0);
    let mut avg = g.clone();
    for _ in 0..steps {
        train_gan_step(&mut g, &mut d, &mut g_opt, &mut d_opt, source, channel, settings, &mut rng)?;
        if settings.ema_decay > 0.0 {
            avg.net_mut().ema_update(g.net(), settings.ema_decay)?;
        }
    }
    Ok((if settings.ema_decay > 0.0 { avg } else { g }, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Discriminator,
    Generator,
    Receiver,
    Transmitter,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Discriminator => "d",
            Phase::Generator => "g",
            Phase::Receiver => "rx",
            Phase::Transmitter => "tx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub global_step: u64,
    pub iteration: usize,
    pub phase: Phase,
    pub step: usize,
    pub loss: f64,
    pub d_accuracy: Option<f64>,
}

/// Per-step training log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    /// Number of times the discriminator optimizer was reset after saturating.
    pub d_resets: usize,
}

impl TrainLog {
    /// Mean loss of the last `count` records of `phase`.
    pub fn recent_loss(&self, phase: Phase, count: usize) -> Option<f64> {
        let tail: Vec<f64> = self
            .records
            .iter()
            .rev()
            .filter(|r| r.phase == phase)
            .take(count)
            .map(|r| r.loss)
            .collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("global_step,iteration,phase,step,loss,d_accuracy\n");
        for r in &self.records {
            let acc = r.d_accuracy.map(|a| a.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.global_step,
                r.iteration,
                r.phase.name(),
                r.step,
                r.loss,
                acc
            ));
        }
        s
    }
}

/// Mean loss of one phase of one outer iteration, for progress output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSummary {
    pub iteration: usize,
    pub phase: &'static str,
    pub loss: f64,
}

/// All trained components.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub cfg: TrainConfig,
    pub tx: Transmitter,
    pub rx: Receiver,
    pub g: Generator,
    pub d: Discriminator,
}

impl Models {
    pub fn init(cfg: &TrainConfig) -> Result<Models> {
        cfg.validate()?;
        let np = cfg.pilots();
        let tx = Transmitter::new(cfg.k, cfg.n, &cfg.tx_hidden, cfg.activation, &mut substream(cfg.seed, "init-tx", 0));
        let rx = Receiver::new(cfg.k, cfg.n, np, &cfg.rx_hidden, cfg.activation, &mut substream(cfg.seed, "init-rx", 0));
        let g = Generator::new(cfg.z_dim, cfg.n, np, &cfg.g_hidden, cfg.activation, &mut substream(cfg.seed, "init-g", 0));
        let d = Discriminator::new(cfg.n, np, &cfg.d_hidden, cfg.activation, &mut substream(cfg.seed, "init-d", 0));
        Ok(Models {
            cfg: cfg.clone(),
            tx,
            rx,
            g,
            d,
        })
    }

    pub fn checkpoints(&self) -> [(&'static str, Checkpoint); 4] {
        let cfg = serde_json::to_value(&self.cfg).expect("config serializes");
        let seed = self.cfg.seed;
        [
            (TX_FILE, Checkpoint::from_net("transmitter", self.tx.net(), seed, cfg.clone())),
            (RX_FILE, Checkpoint::from_net("receiver", self.rx.net(), seed, cfg.clone())),
            (G_FILE, Checkpoint::from_net("generator", self.g.net(), seed, cfg.clone())),
            (D_FILE, Checkpoint::from_net("discriminator", self.d.net(), seed, cfg)),
        ]
    }

    /// Writes the four network checkpoints and the config snapshot into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (file, ck) in self.checkpoints() {
            ck.save(&dir.join(file))?;
        }
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, self.cfg.to_json() + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Loads checkpoints written by [`Models::save`].
    pub fn load(dir: &Path) -> Result<Models> {
        let tx_ck = Checkpoint::load(&dir.join(TX_FILE))?;
        let cfg: TrainConfig = serde_json::from_value(tx_ck.config.clone()).map_err(|source| Error::Json {
            path: dir.join(TX_FILE),
            source,
        })?;
        cfg.validate()?;
        let mut nets = Vec::new();
        for file in [RX_FILE, G_FILE, D_FILE] {
            let ck = Checkpoint::load(&dir.join(file))?;
            if ck.config != tx_ck.config {
                return Err(Error::Config {
                    key: file.to_string(),
                    message: "config snapshot differs from the transmitter checkpoint".into(),
                });
            }
            nets.push(ck.to_net()?);
        }
        let np = cfg.pilots();
        let d = Discriminator::from_net(nets.pop().expect("3"), cfg.n, np)?;
        let g = Generator::from_net(nets.pop().expect("2"), cfg.z_dim, cfg.n, np)?;
        let rx = Receiver::from_net(nets.pop().expect("1"), cfg.k, cfg.n, np)?;
        let tx = Transmitter::from_net(tx_ck.to_net()?, cfg.k, cfg.n)?;
        Ok(Models { cfg, tx, rx, g, d })
    }
}

/// Stateful driver for the alternating schedule.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub models: Models,
    pub log: TrainLog,
    channel: RealChannel,
    gan: GanSettings,
    tx_opt: AdamState,
    rx_opt: AdamState,
    g_opt: AdamState,
    d_opt: AdamState,
    rng: Rng,
    global_step: u64,
    saturated_run: usize,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig) -> Result<Trainer> {
        let models = Models::init(cfg)?;
        let channel = RealChannel::new(cfg.channel, cfg.snr_train().noise_std(), cfg.pilots().max(1))?;
        let transceiver = AdamConfig::with_learning_rate(cfg.lr_transceiver);
        let g_adam = AdamConfig::with_learning_rate(cfg.lr_gan);
        let d_adam = AdamConfig::with_learning_rate(cfg.lr_discriminator);
        Ok(Trainer {
            tx_opt: AdamState::new(models.tx.net(), transceiver),
            rx_opt: AdamState::new(models.rx.net(), transceiver),
            g_opt: AdamState::new(models.g.net(), g_adam),
            d_opt: AdamState::new(models.d.net(), d_adam),
            gan: GanSettings::from(cfg),
            channel,
            models,
            log: TrainLog::default(),
            rng: substream(cfg.seed, "train-data", 0),
            global_step: 0,
            saturated_run: 0,
        })
    }

    pub fn channel(&self) -> &RealChannel {
        &self.channel
    }

    fn record(&mut self, iteration: usize, phase: Phase, step: usize, loss: f64, d_accuracy: Option<f64>) {
        self.global_step += 1;
        self.log.records.push(LogRecord {
            global_step: self.global_step,
            iteration,
            phase,
            step,
            loss,
            d_accuracy,
        });
    }

    pub fn receiver_step(&mut self) -> Result<f64> {
        let m = &mut self.models;
        train_receiver_step(&mut m.rx, &mut self.rx_opt, &m.tx, &self.channel, self.gan.batch_size, &mut self.rng)
    }

    pub fn transmitter_step(&mut self) -> Result<f64> {
        let m = &mut self.models;
        train_transmitter_step(
            &mut m.tx,
            &mut self.tx_opt,
            &m.rx,
            &m.g,
            &self.channel,
            self.gan.batch_size,
            &mut self.rng,
        )
    }

    pub fn gan_step(&mut self) -> Result<GanStepStats> {
        let m = &mut self.models;
        let stats = train_gan_step(
            &mut m.g,
            &mut m.d,
            &mut self.g_opt,
            &mut self.d_opt,
            &m.tx,
            &self.channel,
            &self.gan,
            &mut self.rng,
        )?;
        if stats.d_accuracy >= 1.0 {
            self.saturated_run += 1;
            if self.saturated_run >= self.models.cfg.divergence_window {
                self.d_opt.reset();
                self.saturated_run = 0;
                self.log.d_resets += 1;
            }
        } else {
            self.saturated_run = 0;
        }
        Ok(stats)
    }

    /// Runs the full schedule. On error the partially trained models stay in
    /// `self.models` so the caller can still write checkpoints.
    pub fn run(&mut self, mut progress: impl FnMut(&PhaseSummary)) -> Result<()> {
        let cfg = self.models.cfg.clone();
        for it in 0..cfg.outer_iterations {
            let mut d_sum = 0.0;
            let mut g_sum = 0.0;
            for s in 0..cfg.gan_steps {
                let st = self.gan_step()?;
                self.record(it, Phase::Discriminator, s, st.d_loss, Some(st.d_accuracy));
                self.record(it, Phase::Generator, s, st.g_loss, None);
                d_sum += st.d_loss;
                g_sum += st.g_loss;
            }
            if cfg.gan_steps > 0 {
                let n = cfg.gan_steps as f64;
                progress(&PhaseSummary { iteration: it, phase: "d", loss: d_sum / n });
                progress(&PhaseSummary { iteration: it, phase: "g", loss: g_sum / n });
            }
            let mut sum = 0.0;
            for s in 0..cfg.rx_steps {
                let loss = self.receiver_step()?;
                self.record(it, Phase::Receiver, s, loss, None);
                sum += loss;
            }
            if cfg.rx_steps > 0 {
                progress(&PhaseSummary { iteration: it, phase: "rx", loss: sum / cfg.rx_steps as f64 });
            }
            let mut sum = 0.0;
            for s in 0..cfg.tx_steps {
                let loss = self.transmitter_step()?;
                self.record(it, Phase::Transmitter, s, loss, None);
                sum += loss;
            }
            if cfg.tx_steps > 0 {
                progress(&PhaseSummary { iteration: it, phase: "tx", loss: sum / cfg.tx_steps as f64 });
            }
        }
        let it = cfg.outer_iterations;
        let mut sum = 0.0;
        for s in 0..cfg.final_rx_steps {
            let loss = self.receiver_step()?;
            self.record(it, Phase::Receiver, s, loss, None);
            sum += loss;
        }
        if cfg.final_rx_steps > 0 {
            progress(&PhaseSummary { iteration: it, phase: "rx", loss: sum / cfg.final_rx_steps as f64 });
        }
        Ok(())
    }

    /// Writes checkpoints, config snapshot and the training log.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.models.save(dir)?;
        let path = dir.join(LOG_FILE);
        let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(self.log.to_csv().as_bytes()).map_err(|e| Error::io(&path, e))
    }
}

/// Runs the whole schedule and returns the trained components and log.
pub fn train_full(cfg: &TrainConfig) -> Result<(Models, TrainLog)> {
    let mut trainer = Trainer::new(cfg)?;
    trainer.run(|_| {})?;
    Ok((trainer.models, trainer.log))
}
