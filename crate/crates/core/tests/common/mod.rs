#![allow(dead_code)]

use gancomm::gan::{sample_noise, Conditioning, Discriminator, Generator};
use gancomm::nn::{Activation, DenseNet, Gradients, Matrix};
use gancomm::seed::Rng;
use gancomm::train::transmitter_gradient;
use gancomm::transceiver::{onehot_batch, Receiver, Transmitter};
use gancomm::{BlockEncoder, TrainConfig};
use rand::Rng as _;

pub const STEP: f64 = 1e-5;
/// Denominator floor so gradients near round-off level are compared absolutely.
pub const FLOOR: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    pub checked: usize,
    /// Perturbations that moved a ReLU across its kink, where no derivative exists.
    pub kinks: usize,
    pub worst: f64,
}

impl FdReport {
    pub fn merge(&mut self, o: FdReport) {
        self.checked += o.checked;
        self.kinks += o.kinks;
        self.worst = self.worst.max(o.worst);
    }

    pub fn passes(&self) -> bool {
        self.checked > 0 && self.worst < TOLERANCE && self.kinks * 100 <= self.checked
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// ReLU on/off pattern of `net` on `input`.
pub fn relu_pattern(net: &DenseNet, input: &Matrix) -> Vec<bool> {
    let mut pattern = Vec::new();
    let mut x = input.clone();
    for l in net.layers() {
        let mut z = Matrix::zeros(x.rows(), l.output_dim());
        for (xr, zr) in x.row_iter().zip(z.data_mut().chunks_mut(l.output_dim())) {
            zr.copy_from_slice(&l.bias);
            for (&xv, wr) in xr.iter().zip(l.weight.data().chunks(l.output_dim())) {
                zr.iter_mut().zip(wr).for_each(|(zv, &w)| *zv += xv * w);
            }
        }
        if l.activation == Activation::Relu {
            pattern.extend(z.data().iter().map(|&v| v > 0.0));
            z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        } else if l.activation == Activation::Tanh {
            z.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        }
        x = z;
    }
    pattern
}

/// Parameter `i` of layer `li`: weights in row-major order, then biases.
fn param_mut(net: &mut DenseNet, li: usize, i: usize) -> &mut f64 {
    let l = &mut net.layers_mut()[li];
    let nw = l.weight.data().len();
    if i < nw {
        &mut l.weight.data_mut()[i]
    } else {
        &mut l.bias[i - nw]
    }
}

fn param(net: &mut DenseNet, li: usize, i: usize) -> f64 {
    *param_mut(net, li, i)
}

/// Central differences over every parameter of the network selected by `net`.
/// An entry whose perturbation moves a ReLU across its kink is retried once
/// with a ten times smaller step before it is counted as a kink.
pub fn check_params<T>(
    model: &mut T,
    net: fn(&mut T) -> &mut DenseNet,
    analytic: &Gradients,
    loss: impl Fn(&T) -> (f64, Vec<bool>),
) -> FdReport {
    let mut report = FdReport::default();
    let base = loss(model).1;
    let n_layers = net(model).layers().len();
    for li in 0..n_layers {
        let (nw, nb) = {
            let l = &net(model).layers()[li];
            (l.weight.data().len(), l.bias.len())
        };
        for i in 0..nw + nb {
            let orig = param(net(model), li, i);
            let mut fd = None;
            for step in [STEP, STEP / 10.0] {
                *param_mut(net(model), li, i) = orig + step;
                let (lp, sp) = loss(model);
                *param_mut(net(model), li, i) = orig - step;
                let (lm, sm) = loss(model);
                *param_mut(net(model), li, i) = orig;
                if sp == base && sm == base {
                    fd = Some((lp - lm) / (2.0 * step));
                    break;
                }
            }
            let Some(fd) = fd else {
                report.kinks += 1;
                continue;
            };
            let a = if i < nw {
                analytic.layers[li].weight.data()[i]
            } else {
                analytic.layers[li].bias[i - nw]
            };
            report.checked += 1;
            report.worst = report.worst.max(rel_err(a, fd));
        }
    }
    report
}

/// Central differences over every entry of `x`.
pub fn check_input(x: &Matrix, analytic: &Matrix, loss: impl Fn(&Matrix) -> (f64, Vec<bool>)) -> FdReport {
    let mut report = FdReport::default();
    let base = loss(x).1;
    let mut xp = x.clone();
    for i in 0..x.data().len() {
        let orig = x.data()[i];
        let mut fd = None;
        for step in [STEP, STEP / 10.0] {
            xp.data_mut()[i] = orig + step;
            let (lp, sp) = loss(&xp);
            xp.data_mut()[i] = orig - step;
            let (lm, sm) = loss(&xp);
            xp.data_mut()[i] = orig;
            if sp == base && sm == base {
                fd = Some((lp - lm) / (2.0 * step));
                break;
            }
        }
        let Some(fd) = fd else {
            report.kinks += 1;
            continue;
        };
        report.checked += 1;
        report.worst = report.worst.max(rel_err(analytic.data()[i], fd));
    }
    report
}

pub fn weighted_sum(y: &Matrix, w: &Matrix) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

/// Full network set with the default layer sizes for `cfg`.
pub struct Nets {
    pub tx: Transmitter,
    pub rx: Receiver,
    pub g: Generator,
    pub d: Discriminator,
}

pub fn nets(cfg: &TrainConfig, rng: &mut Rng) -> Nets {
    let np = cfg.pilots();
    Nets {
        tx: Transmitter::new(cfg.k, cfg.n, &cfg.tx_hidden, cfg.activation, rng),
        rx: Receiver::new(cfg.k, cfg.n, np, &cfg.rx_hidden, cfg.activation, rng),
        g: Generator::new(cfg.z_dim, cfg.n, np, &cfg.g_hidden, cfg.activation, rng),
        d: Discriminator::new(cfg.n, np, &cfg.d_hidden, cfg.activation, rng),
    }
}

/// Gradient-check every network and the composite transmitter path.
/// Returns one labelled report per check.
pub fn gradient_suite(cfg: &TrainConfig, batch: usize, rng: &mut Rng) -> Vec<(String, FdReport)> {
    let mut n = nets(cfg, rng);
    let m_count = cfg.alphabet();
    let msgs: Vec<usize> = (0..batch).map(|i| (i * 7 + 3) % m_count).collect();
    let onehot = onehot_batch(&msgs, m_count).unwrap();
    let pilots = (cfg.pilots() > 0).then(|| sample_noise(batch, 2 * cfg.pilots(), rng));
    let z = sample_noise(batch, cfg.z_dim, rng);
    let y = sample_noise(batch, 2 * cfg.n, rng);
    let mut out = Vec::new();
    let tag = |s: &str| format!("{s} ({})", cfg.channel);

    // transmitter with normalization, against a random linear readout
    let w = sample_noise(batch, 2 * cfg.n, rng);
    let (_, tape) = n.tx.encode_with_tape(&msgs).unwrap();
    let ga = n.tx.backward(&tape, &w).unwrap();
    let r = check_params(&mut n.tx, |t| t.net_mut(), &ga, |t| {
        let (x, _) = t.encode_with_tape(&msgs).unwrap();
        (weighted_sum(&x, &w), relu_pattern(t.net(), &onehot))
    });
    out.push((tag("transmitter params"), r));

    // receiver cross-entropy, parameters and input
    let (logits, tape) = n.rx.forward(&y, pilots.as_ref()).unwrap();
    let (_, gl) = gancomm::nn::softmax_cross_entropy(&logits, &onehot).unwrap();
    let (ga, gin) = n.rx.net().backward(&tape, &gl).unwrap();
    let rx_loss = |rx: &Receiver, y: &Matrix| {
        let l = rx.logits(y, pilots.as_ref()).unwrap();
        let inp = rx.assemble_input(y, pilots.as_ref()).unwrap();
        (gancomm::nn::softmax_cross_entropy(&l, &onehot).unwrap().0, relu_pattern(rx.net(), &inp))
    };
    out.push((tag("receiver params"), check_params(&mut n.rx, |r| r.net_mut(), &ga, |r| rx_loss(r, &y))));
    let inp = n.rx.assemble_input(&y, pilots.as_ref()).unwrap();
    let r = check_input(&inp, &gin, |xi| {
        let l = n.rx.net().predict(xi).unwrap();
        (gancomm::nn::softmax_cross_entropy(&l, &onehot).unwrap().0, relu_pattern(n.rx.net(), xi))
    });
    out.push((tag("receiver input"), r));

    // generator against a random linear readout
    let x = n.tx.encode(&msgs).unwrap();
    let cond = Conditioning::new(x.clone(), pilots.clone()).unwrap();
    let g_in = |x: &Matrix| {
        let mut parts = vec![&z, x];
        if let Some(p) = &pilots {
            parts.push(p);
        }
        Matrix::hcat(&parts).unwrap()
    };
    let (_, tape) = n.g.forward(&z, &cond).unwrap();
    let (ga, _) = n.g.net().backward(&tape, &w).unwrap();
    let r = check_params(&mut n.g, |g| g.net_mut(), &ga, |g| {
        let (out, tape) = g.forward(&z, &cond).unwrap();
        (weighted_sum(&out, &w), g.net().active_units(&tape))
    });
    out.push((tag("generator params"), r));
    let gx = n.g.block_gradient(&tape, &w).unwrap();
    let r = check_input(&x, &gx, |xv| {
        let c = Conditioning::new(xv.clone(), pilots.clone()).unwrap();
        (weighted_sum(&n.g.generate(&z, &c).unwrap(), &w), relu_pattern(n.g.net(), &g_in(xv)))
    });
    out.push((tag("generator input x"), r));

    // discriminator loss and generator loss through the discriminator
    let fake = n.g.generate(&z, &cond).unwrap();
    let d_in = |y: &Matrix| {
        let mut parts = vec![y, &x];
        if let Some(p) = &pilots {
            parts.push(p);
        }
        Matrix::hcat(&parts).unwrap()
    };
    let (_, ga) = gancomm::gan::d_loss(&n.d, &y, &fake, &cond, 0.9).unwrap();
    let r = check_params(&mut n.d, |d| d.net_mut(), &ga, |d| {
        let mut sig = relu_pattern(d.net(), &d_in(&y));
        sig.extend(relu_pattern(d.net(), &d_in(&fake)));
        (gancomm::gan::d_loss(d, &y, &fake, &cond, 0.9).unwrap().0.loss, sig)
    });
    out.push((tag("discriminator params"), r));
    let (_, ga) = gancomm::gan::g_loss(&n.g, &n.d, &z, &cond).unwrap();
    let d = n.d.clone();
    let r = check_params(&mut n.g, |g| g.net_mut(), &ga, |g| {
        let (f, g_tape) = g.forward(&z, &cond).unwrap();
        let (logits, d_tape) = d.forward(&f, &cond).unwrap();
        let mut sig = g.net().active_units(&g_tape);
        sig.extend(d.net().active_units(&d_tape));
        (gancomm::nn::sigmoid_bce(&logits, &vec![1.0; logits.len()]).unwrap().0, sig)
    });
    out.push((tag("generator loss params"), r));

    // composite: loss -> receiver -> generator -> transmitter
    let (_, ga) = transmitter_gradient(&n.tx, &n.rx, &n.g, &msgs, pilots.as_ref(), &z).unwrap();
    let (rx, g) = (n.rx.clone(), n.g.clone());
    let r = check_params(&mut n.tx, |t| t.net_mut(), &ga, |t| {
        let x = t.encode(&msgs).unwrap();
        let c = Conditioning::new(x.clone(), pilots.clone()).unwrap();
        let yf = g.generate(&z, &c).unwrap();
        let mut sig = relu_pattern(t.net(), &onehot);
        sig.extend(relu_pattern(g.net(), &g_in(&x)));
        sig.extend(relu_pattern(rx.net(), &rx.assemble_input(&yf, pilots.as_ref()).unwrap()));
        let l = rx.logits(&yf, pilots.as_ref()).unwrap();
        (gancomm::nn::softmax_cross_entropy(&l, &onehot).unwrap().0, sig)
    });
    out.push((tag("composite transmitter path"), r));
    out
}

/// Monte-Carlo checks of the channel simulators with fixed seeds.
/// Each entry is `(name, passed, observed value)`.
pub fn channel_invariants() -> Vec<(&'static str, bool, String)> {
    use gancomm::baseline::ls_estimate;
    use gancomm::channel::{awgn_apply, fading_apply, pilot_receive, rayleigh_sample, ChannelRealization};
    use gancomm::seed::substream;
    use num_complex::Complex64;

    const N: usize = 100_000;
    let mut out = Vec::new();
    let mut rng = substream(2024, "channel-stats", 0);

    let h: Vec<Complex64> = (0..N).map(|_| rayleigh_sample(&mut rng)).collect();
    let power = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / N as f64;
    out.push(("E|h|^2 = 1 +- 2%", (power - 1.0).abs() <= 0.02, format!("{power:.4}")));
    let mean = h.iter().sum::<Complex64>() / N as f64;
    out.push((
        "E[h] = 0 (|re|, |im| < 0.01)",
        mean.re.abs() < 0.01 && mean.im.abs() < 0.01,
        format!("{mean:.4}"),
    ));

    let std = 0.7;
    let y = awgn_apply(&vec![0.0; N], std, &mut rng);
    let var = y.iter().map(|v| v * v).sum::<f64>() / N as f64;
    out.push(("noise variance = std^2 +- 2%", (var / (std * std) - 1.0).abs() <= 0.02, format!("{:.4}", var / (std * std))));

    let x: Vec<f64> = (0..N).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let w: Vec<f64> = awgn_apply(&x, std, &mut rng).iter().zip(&x).map(|(a, b)| a - b).collect();
    let corr = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / N as f64 / std;
    out.push(("noise uncorrelated with input (< 0.01)", corr.abs() < 0.01, format!("{corr:.4}")));

    let two = ChannelRealization { h: Complex64::new(2.0, 0.0), noise_std: 0.3 };
    let block = [0.6, 0.8, -1.0, 0.0];
    let mut e = 0.0;
    for _ in 0..N / 2 {
        e += fading_apply(&block, &two, &mut rng).iter().map(|v| v * v).sum::<f64>() / 2.0;
    }
    let e = e / (N / 2) as f64;
    let expect = 4.0 + 2.0 * 0.09;
    out.push(("E|y|^2 per use = |h|^2 + 2 std^2 +- 2%", (e / expect - 1.0).abs() <= 0.02, format!("{e:.4} vs {expect:.4}")));

    let (mut bias, mut err2, mut pmean) = (Complex64::new(0.0, 0.0), 0.0, Complex64::new(0.0, 0.0));
    let sigma = 0.5;
    for &hv in &h {
        let real = ChannelRealization { h: hv, noise_std: sigma };
        let yp = pilot_receive(&real, 1, &mut rng);
        let est = ls_estimate(&yp);
        bias += (est - hv) / N as f64;
        err2 += (est - hv).norm_sqr() / N as f64;
        pmean += Complex64::new(yp[0], yp[1]) / N as f64;
    }
    out.push((
        "LS estimate unbiased (|bias| < 0.01)",
        bias.norm() < 0.01,
        format!("{bias:.4}"),
    ));
    let expect = 2.0 * sigma * sigma;
    out.push((
        "LS error variance = 2 std^2 +- 2%",
        (err2 / expect - 1.0).abs() <= 0.02,
        format!("{err2:.4} vs {expect:.4}"),
    ));
    out.push(("E[y_p] = 0 (< 0.01)", pmean.norm() < 0.01, format!("{pmean:.4}")));
    out
}

/// Compares the ML decoder with a brute-force nearest-codeword search on
/// `trials` noisy blocks. Returns the number of disagreements.
pub fn mld_mismatches(trials: usize, seed: u64) -> usize {
    use gancomm::baseline::{hamming74_codebook, hamming74_mld_decode};
    use gancomm::seed::substream;
    use rand_distr::StandardNormal;

    let book = hamming74_codebook();
    let mut rng = substream(seed, "mld-oracle", 0);
    let mut mismatches = 0;
    for _ in 0..trials {
        let m = rng.random_range(0..16);
        let std: f64 = rng.random_range(0.2..1.5);
        let y: [f64; 7] = std::array::from_fn(|i| book[m].bpsk()[i] + std * rng.sample::<f64, _>(StandardNormal));
        let mut best = (f64::INFINITY, 0);
        for (i, c) in book.iter().enumerate() {
            let d: f64 = y.iter().zip(c.bpsk()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        if hamming74_mld_decode(&y) != book[best.1].data_bits() {
            mismatches += 1;
        }
    }
    mismatches
}
