//! Monte-Carlo BLER sweeps, GAN fidelity statistics and CSV/SVG output.
//!
//! Evaluation of the learned system always uses the real channel. The only
//! functions here that touch a generator are [`gan_fidelity`] and
//! [`gan_scatter_dump`].
//!
//! Trials are split into fixed-size shards seeded from
//! `(seed, system, point, shard)`. Shards of a round run in parallel and are
//! merged in index order, and the stopping rule is checked between rounds, so
//! results do not depend on the thread count.

use crate::baseline::{
    bits_from_index, hamming74_codebook, hamming74_mld_decode, index_from_bits, ls_estimate,
    qam16_demod_coherent, qam16_point,
};
use crate::channel::{rayleigh_sample, uses, ChannelKind, RealChannel, SnrSpec};
use crate::error::{Error, Result};
use crate::gan::{sample_noise, Conditioning, Generator};
use crate::nn::Matrix;
use crate::seed::{substream, Rng};
use crate::transceiver::{hard_decision, BlockEncoder, Receiver, Transmitter};
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

pub use crate::transceiver::write_constellation_csv as constellation_dump;

const SHARD_TRIALS: u64 = 4096;
const MAX_SHARDS_PER_ROUND: u64 = 16;

/// SNR points and stopping rule for a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Eb/N0 values in dB.
    pub snr_db: Vec<f64>,
    pub min_trials: u64,
    pub max_trials: u64,
    /// Stop a point once this many block errors are seen (after `min_trials`).
    pub target_errors: u64,
    /// Root seed; callers fall back to the training seed when absent.
    pub seed: Option<u64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            snr_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            min_trials: 10_000,
            max_trials: 10_000_000,
            target_errors: 200,
            seed: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Error::Config {
            key: key.into(),
            message: message.into(),
        };
        if self.max_trials == 0 {
            return Err(bad("max_trials", "must be >= 1"));
        }
        if self.min_trials > self.max_trials {
            return Err(bad("min_trials", "must not exceed max_trials"));
        }
        if self.snr_db.iter().any(|v| v.is_nan()) {
            return Err(bad("snr_db", "NaN SNR"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<SweepSpec> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| Error::Config {
            key: "<document>".into(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SweepSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SweepSpec::from_json(&text)
    }
}

/// One point of a BLER curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlerPoint {
    pub ebn0_db: f64,
    pub trials: u64,
    pub errors: u64,
    pub bler: f64,
    pub ci95_halfwidth: f64,
}

impl BlerPoint {
    pub fn new(ebn0_db: f64, trials: u64, errors: u64) -> Self {
        let bler = errors as f64 / trials as f64;
        BlerPoint {
            ebn0_db,
            trials,
            errors,
            bler,
            ci95_halfwidth: 1.96 * (bler * (1.0 - bler) / trials as f64).sqrt(),
        }
    }
}

/// Estimates one point. `shard` gets a trial count and an RNG and returns the
/// number of block errors among those trials.
pub fn estimate_point<F>(spec: &SweepSpec, seed: u64, system: &str, point: usize, ebn0_db: f64, shard: F) -> Result<BlerPoint>
where
    F: Fn(u64, &mut Rng) -> Result<u64> + Sync,
{
    spec.validate()?;
    let stream = format!("sweep/{system}/{point}");
    let (mut trials, mut errors, mut next_shard) = (0u64, 0u64, 0u64);
    let mut round = 0u32;
    loop {
        let n_shards = (1u64 << round.min(4)).min(MAX_SHARDS_PER_ROUND);
        let jobs: Vec<(u64, u64)> = (0..n_shards)
            .scan(trials, |done, i| {
                let size = SHARD_TRIALS.min(spec.max_trials - *done);
                *done += size;
                (size > 0).then_some((next_shard + i, size))
            })
            .collect();
        next_shard += n_shards;
        round += 1;
        let results: Vec<Result<u64>> = jobs
            .par_iter()
            .map(|&(idx, size)| shard(size, &mut substream(seed, &stream, idx)))
            .collect();
        for (r, &(_, size)) in results.into_iter().zip(&jobs) {
            errors += r?;
            trials += size;
        }
        let enough = trials >= spec.min_trials && errors >= spec.target_errors;
        if enough || trials >= spec.max_trials {
            return Ok(BlerPoint::new(ebn0_db, trials, errors));
        }
    }
}

/// BLER of a learned transmitter/receiver pair over the real channel.
///
/// `+inf` dB in the sweep means a noiseless channel.
pub fn bler_sweep_learned(
    tx: &Transmitter,
    rx: &Receiver,
    channel: ChannelKind,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Vec<BlerPoint>> {
    let mismatch = |key: &str, message: String| Error::Config {
        key: key.into(),
        message,
    };
    if tx.k() != rx.k() {
        return Err(mismatch("k", format!("transmitter k={} but receiver k={}", tx.k(), rx.k())));
    }
    if tx.n() != rx.n() {
        return Err(mismatch("n", format!("transmitter n={} but receiver n={}", tx.n(), rx.n())));
    }
    if channel.is_fading() != (rx.n_pilot() > 0) {
        return Err(mismatch(
            "channel",
            format!("receiver with {} pilot uses cannot run on {channel}", rx.n_pilot()),
        ));
    }
    let table = tx.constellation()?;
    let alphabet = tx.alphabet();
    spec.snr_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let std = SnrSpec::new(db, tx.k(), tx.n()).noise_std();
            let ch = RealChannel::new(channel, std, rx.n_pilot().max(1))?;
            estimate_point(spec, seed, "learned", i, db, |trials, rng| {
                let mut errors = 0;
                let mut left = trials as usize;
                while left > 0 {
                    let b = left.min(1024);
                    left -= b;
                    let msgs: Vec<usize> = (0..b).map(|_| rng.random_range(0..alphabet)).collect();
                    let x = table.select_rows(&msgs);
                    let out = ch.transmit(&x, rng);
                    let probs = rx.decode(&out.y, out.pilots.as_ref())?;
                    errors += probs
                        .row_iter()
                        .zip(&msgs)
                        .filter(|(p, &m)| hard_decision(p) != m)
                        .count() as u64;
                }
                Ok(errors)
            })
        })
        .collect()
}

/// Classical reference chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineSystem {
    /// Hamming(7,4), BPSK on the real axis, soft ML decoding.
    Hamming74MldAwgn,
    /// 16-QAM with the true fading coefficient.
    Qam16RayleighPerfectCsi,
    /// 16-QAM with a least-squares estimate from one unit pilot.
    Qam16RayleighLs,
}

impl BaselineSystem {
    pub const ALL: [BaselineSystem; 3] = [
        BaselineSystem::Hamming74MldAwgn,
        BaselineSystem::Qam16RayleighPerfectCsi,
        BaselineSystem::Qam16RayleighLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineSystem::Hamming74MldAwgn => "hamming74-mld-awgn",
            BaselineSystem::Qam16RayleighPerfectCsi => "qam16-rayleigh-perfect-csi",
            BaselineSystem::Qam16RayleighLs => "qam16-rayleigh-ls",
        }
    }

    pub fn channel(self) -> ChannelKind {
        match self {
            BaselineSystem::Hamming74MldAwgn => ChannelKind::Awgn,
            _ => ChannelKind::Rayleigh,
        }
    }
}

impl FromStr for BaselineSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineSystem::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config {
                key: "system".into(),
                message: format!(
                    "unknown baseline `{s}` (expected one of: {})",
                    BaselineSystem::ALL.map(|b| b.name()).join(", ")
                ),
            })
    }
}

fn hamming_shard(std: f64, trials: u64, rng: &mut Rng) -> u64 {
    let book = hamming74_codebook();
    let mut errors = 0;
    for _ in 0..trials {
        let m = rng.random_range(0..16);
        let y = book[m].bpsk().map(|s| s + std * rng.sample::<f64, _>(StandardNormal));
        if index_from_bits(hamming74_mld_decode(&y)) != m {
            errors += 1;
        }
    }
    errors
}

fn qam_shard(std: f64, perfect: bool, trials: u64, rng: &mut Rng) -> u64 {
    let mut errors = 0;
    let noise = |rng: &mut Rng| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * std
    };
    for _ in 0..trials {
        let m = rng.random_range(0..16);
        let h = rayleigh_sample(rng);
        let y = h * qam16_point(m) + noise(rng);
        let yp = h + noise(rng);
        let h_est = if perfect { h } else { ls_estimate(&[yp.re, yp.im]) };
        match qam16_demod_coherent(y, h_est) {
            Ok(bits) if bits == bits_from_index(m) => {}
            _ => errors += 1,
        }
    }
    errors
}

/// BLER of a classical chain. `channel` must be the system's own channel.
pub fn bler_sweep_baseline(
    system: BaselineSystem,
    channel: ChannelKind,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Vec<BlerPoint>> {
    if system.channel() != channel {
        return Err(Error::Config {
            key: "system".into(),
            message: format!("{} runs on {}, not {channel}", system.name(), system.channel()),
        });
    }
    spec.snr_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            estimate_point(spec, seed, system.name(), i, db, |trials, rng| {
                Ok(match system {
                    BaselineSystem::Hamming74MldAwgn => {
                        hamming_shard(SnrSpec::new(db, 4, 7).noise_std(), trials, rng)
                    }
                    BaselineSystem::Qam16RayleighPerfectCsi => {
                        qam_shard(SnrSpec::new(db, 4, 1).noise_std(), true, trials, rng)
                    }
                    BaselineSystem::Qam16RayleighLs => {
                        qam_shard(SnrSpec::new(db, 4, 1).noise_std(), false, trials, rng)
                    }
                })
            })
        })
        .collect()
}

pub fn bler_csv(points: &[BlerPoint]) -> String {
    let mut s = String::from("ebn0_db,trials,errors,bler,ci95_halfwidth\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{},{}", p.ebn0_db, p.trials, p.errors, p.bler, p.ci95_halfwidth);
    }
    s
}

pub fn write_bler_csv(path: &Path, points: &[BlerPoint]) -> Result<()> {
    std::fs::write(path, bler_csv(points)).map_err(|e| Error::io(path, e))
}

/// Self-contained SVG chart of BLER curves on a log axis.
pub fn bler_svg(series: &[(&str, &[BlerPoint])]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|p| p.ebn0_db.is_finite());
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ymin = 1.0f64;
    for p in pts {
        x0 = x0.min(p.ebn0_db);
        x1 = x1.max(p.ebn0_db);
        if p.bler > 0.0 {
            ymin = ymin.min(p.bler);
        }
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let decades = (-ymin.log10()).ceil().max(1.0);
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| M + (-y.max(10f64.powf(-decades)).log10()) / decades * (H - 2.0 * M);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for d in 0..=decades as i32 {
        let y = sy(10f64.powi(-d));
        let _ = writeln!(
            s,
            "<line x1=\"{M}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e-{d}</text>",
            W - M,
            M - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">Eb/N0 (dB): {x0} .. {x1}</text><text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">BLER</text>",
        W / 2.0,
        H - 16.0,
        H / 2.0,
        H / 2.0
    );
    for (i, (name, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|p| p.ebn0_db.is_finite() && p.bler > 0.0)
            .map(|p| format!("{:.1},{:.1}", sx(p.ebn0_db), sy(p.bler)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            path.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{name}</text>",
            W - M - 150.0,
            M + 16.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One conditioning value for fidelity checks: a message and, on fading
/// channels, the fading coefficient observed through a noiseless pilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityCondition {
    pub message: usize,
    pub h: Option<Complex64>,
}

/// Real versus generated statistics for one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionStats {
    pub condition: FidelityCondition,
    /// Noise-free channel output `x` or `h x`.
    pub expected_mean: Vec<f64>,
    pub real_mean: Vec<f64>,
    pub fake_mean: Vec<f64>,
    pub real_cov: Matrix,
    pub fake_cov: Matrix,
    /// Noise variance per real dimension.
    pub true_var: f64,
    /// Largest `|fake_mean - expected_mean|` over real dimensions.
    pub mean_error: f64,
    /// Smallest and largest ratio of generated to true variance over real dimensions.
    pub var_ratio: (f64, f64),
    pub energy_distance: f64,
    pub p_value: f64,
}

impl ConditionStats {
    /// The generated distribution is distinguishable from the real one.
    pub fn flagged(&self) -> bool {
        self.p_value < FIDELITY_ALPHA
    }
}

/// Significance level of the energy-distance permutation test.
pub const FIDELITY_ALPHA: f64 = 0.01;
const ENERGY_SAMPLES: usize = 200;
const ENERGY_PERMUTATIONS: usize = 199;

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub conditions: Vec<ConditionStats>,
}

impl FidelityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "condition,message_index,h_re,h_im,mean_error,var_ratio_min,var_ratio_max,energy_distance,p_value,flagged\n",
        );
        for (i, c) in self.conditions.iter().enumerate() {
            let (hr, hi) = c
                .condition
                .h
                .map(|h| (h.re.to_string(), h.im.to_string()))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{i},{},{hr},{hi},{},{},{},{},{},{}",
                c.condition.message,
                c.mean_error,
                c.var_ratio.0,
                c.var_ratio.1,
                c.energy_distance,
                c.p_value,
                c.flagged()
            );
        }
        s
    }
}

fn mean_and_cov(samples: &Matrix) -> (Vec<f64>, Matrix) {
    let (n, d) = (samples.rows() as f64, samples.cols());
    let mut mean = vec![0.0; d];
    for r in samples.row_iter() {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
    }
    let mut cov = Matrix::zeros(d, d);
    for r in samples.row_iter() {
        for i in 0..d {
            for j in 0..d {
                let v = cov.get(i, j) + (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
                cov.set(i, j, v);
            }
        }
    }
    (mean, cov)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Two-sample energy distance and its permutation-test p-value.
///
/// At most 200 rows of each sample are used.
pub fn energy_distance_test(a: &Matrix, b: &Matrix, rng: &mut Rng) -> (f64, f64) {
    let na = a.rows().min(ENERGY_SAMPLES);
    let nb = b.rows().min(ENERGY_SAMPLES);
    let pooled: Vec<&[f64]> = (0..na).map(|i| a.row(i)).chain((0..nb).map(|i| b.row(i))).collect();
    let n = pooled.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(pooled[i], pooled[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let stat = |labels: &[bool]| {
        let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                match (labels[i], labels[j]) {
                    (true, true) => xx += d,
                    (false, false) => yy += d,
                    _ => xy += d,
                }
            }
        }
        let (fa, fb) = (na as f64, nb as f64);
        // xy counts each cross pair twice
        xy / (fa * fb) - xx / (fa * fa) - yy / (fb * fb)
    };
    let mut labels: Vec<bool> = (0..n).map(|i| i < na).collect();
    let observed = stat(&labels);
    let mut at_least = 0;
    for _ in 0..ENERGY_PERMUTATIONS {
        for i in (1..n).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        if stat(&labels) >= observed {
            at_least += 1;
        }
    }
    (observed, (1 + at_least) as f64 / (1 + ENERGY_PERMUTATIONS) as f64)
}

/// Real and generated samples for one condition.
fn condition_samples(
    g: &Generator,
    source: &dyn BlockEncoder,
    channel: &RealChannel,
    cond: FidelityCondition,
    n_samples: usize,
    rng: &mut Rng,
) -> Result<(Matrix, Matrix, Matrix, Vec<f64>)> {
    let x = source.encode(&vec![cond.message; n_samples])?;
    let (real, pilots, expected) = match (channel.kind, cond.h) {
        (ChannelKind::Awgn, None) => {
            let real = channel.transmit(&x, rng).y;
            (real, None, x.row(0).to_vec())
        }
        (ChannelKind::Rayleigh, Some(h)) => {
            let out = channel.transmit_with(&x, &vec![h; n_samples], rng);
            let mut pilots = Matrix::zeros(n_samples, 2 * channel.n_pilot);
            for r in 0..n_samples {
                for u in pilots.row_mut(r).chunks_exact_mut(2) {
                    u.copy_from_slice(&[h.re, h.im]);
                }
            }
            let expected = uses(x.row(0)).flat_map(|u| {
                let v = h * u;
                [v.re, v.im]
            });
            (out.y, Some(pilots), expected.collect())
        }
        _ => {
            return Err(Error::Config {
                key: "condition".into(),
                message: "fading conditions need h; AWGN conditions must not set it".into(),
            })
        }
    };
    let m = Conditioning::new(x.clone(), pilots)?;
    let z = sample_noise(n_samples, g.z_dim(), rng);
    let fake = g.generate(&z, &m)?;
    Ok((real, fake, x, expected))
}

/// Compares generated channel outputs against the real channel per condition.
pub fn gan_fidelity(
    g: &Generator,
    source: &dyn BlockEncoder,
    channel: &RealChannel,
    conditions: &[FidelityCondition],
    n_samples: usize,
    seed: u64,
) -> Result<FidelityReport> {
    if n_samples < 2 {
        return Err(Error::Validation("fidelity needs at least 2 samples".into()));
    }
    let true_var = channel.noise_std * channel.noise_std;
    let mut out = Vec::with_capacity(conditions.len());
    for (i, &cond) in conditions.iter().enumerate() {
        let mut rng = substream(seed, "fidelity", i as u64);
        let (real, fake, _, expected) = condition_samples(g, source, channel, cond, n_samples, &mut rng)?;
        let (real_mean, real_cov) = mean_and_cov(&real);
        let (fake_mean, fake_cov) = mean_and_cov(&fake);
        let mean_error = fake_mean
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ratios = (0..fake_cov.rows()).map(|d| fake_cov.get(d, d) / true_var);
        let var_ratio = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
        let (energy_distance, p_value) = energy_distance_test(&real, &fake, &mut rng);
        out.push(ConditionStats {
            condition: cond,
            expected_mean: expected,
            real_mean,
            fake_mean,
            real_cov,
            fake_cov,
            true_var,
            mean_error,
            var_ratio,
            energy_distance,
            p_value,
        });
    }
    Ok(FidelityReport { conditions: out })
}

/// Every message of `source`, without fading.
pub fn awgn_conditions(source: &dyn BlockEncoder) -> Vec<FidelityCondition> {
    (0..source.alphabet())
        .map(|message| FidelityCondition { message, h: None })
        .collect()
}

/// Writes real and generated samples for each condition as CSV:
/// `source,condition,message_index,sample_index,use_index,re,im,x_re,x_im,h_re,h_im`.
pub fn gan_scatter_dump(
    g: &Generator,
    source: &dyn BlockEncoder,
    channel: &RealChannel,
    conditions: &[FidelityCondition],
    n_samples: usize,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let mut s = String::from("source,condition,message_index,sample_index,use_index,re,im,x_re,x_im,h_re,h_im\n");
    for (ci, &cond) in conditions.iter().enumerate() {
        let mut rng = substream(seed, "scatter", ci as u64);
        let (real, fake, x, _) = condition_samples(g, source, channel, cond, n_samples, &mut rng)?;
        let (hr, hi) = cond.h.map(|h| (h.re.to_string(), h.im.to_string())).unwrap_or_default();
        for (label, samples) in [("real", &real), ("fake", &fake)] {
            for (si, row) in samples.row_iter().enumerate() {
                for (ui, (y, xu)) in uses(row).zip(uses(x.row(si))).enumerate() {
                    let _ = writeln!(
                        s,
                        "{label},{ci},{},{si},{ui},{},{},{},{},{hr},{hi}",
                        cond.message, y.re, y.im, xu.re, xu.im
                    );
                }
            }
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::Qam16Mapper;
    use crate::nn::Activation;

    #[test]
    fn bler_point_invariants() {
        let p = BlerPoint::new(3.0, 1000, 50);
        assert_eq!(p.bler, 0.05);
        assert!((p.ci95_halfwidth - 1.96 * (0.05f64 * 0.95 / 1000.0).sqrt()).abs() < 1e-15);
        assert_eq!(BlerPoint::new(0.0, 10, 0).ci95_halfwidth, 0.0);
    }

    #[test]
    fn spec_validation() {
        let spec = SweepSpec {
            max_trials: 0,
            min_trials: 0,
            ..SweepSpec::default()
        };
        assert!(bler_sweep_baseline(BaselineSystem::Hamming74MldAwgn, ChannelKind::Awgn, &spec, 0).is_err());
        assert!(SweepSpec::from_json(r#"{"min_trials": 10, "max_trials": 5}"#).is_err());
        assert!(SweepSpec::from_json(r#"{"snr": [1]}"#).is_err());
        let s = SweepSpec::from_json(r#"{"snr_db": [1, 2], "seed": 3}"#).unwrap();
        assert_eq!(s.snr_db, vec![1.0, 2.0]);
        assert_eq!(s.target_errors, 200);
    }

    #[test]
    fn early_stop_respects_min_and_max() {
        let spec = SweepSpec {
            snr_db: vec![0.0],
            min_trials: 50_000,
            max_trials: 60_000,
            target_errors: 10,
            seed: None,
        };
        // every trial is an error: target reached immediately, min_trials still honoured
        let p = estimate_point(&spec, 1, "t", 0, 0.0, |n, _| Ok(n)).unwrap();
        assert!(p.trials >= 50_000 && p.trials <= 60_000, "{}", p.trials);
        // never an error: runs to exactly max_trials
        let p = estimate_point(&spec, 1, "t", 0, 0.0, |_, _| Ok(0)).unwrap();
        assert_eq!(p.trials, 60_000);
    }

    #[test]
    fn pairing_and_names() {
        let spec = SweepSpec::default();
        assert!(bler_sweep_baseline(BaselineSystem::Qam16RayleighLs, ChannelKind::Awgn, &spec, 0).is_err());
        for b in BaselineSystem::ALL {
            assert_eq!(b.name().parse::<BaselineSystem>().unwrap(), b);
        }
        assert!("bpsk".parse::<BaselineSystem>().is_err());
    }

    #[test]
    fn learned_sweep_rejects_mismatched_pairs() {
        let mut rng = substream(0, "t", 0);
        let tx = Transmitter::new(4, 7, &[8], Activation::Relu, &mut rng);
        let rx_awgn = Receiver::new(4, 7, 0, &[8], Activation::Relu, &mut rng);
        let rx_k3 = Receiver::new(3, 7, 0, &[8], Activation::Relu, &mut rng);
        let rx_n6 = Receiver::new(4, 6, 0, &[8], Activation::Relu, &mut rng);
        let spec = SweepSpec::default();
        assert!(bler_sweep_learned(&tx, &rx_k3, ChannelKind::Awgn, &spec, 0).is_err());
        assert!(bler_sweep_learned(&tx, &rx_n6, ChannelKind::Awgn, &spec, 0).is_err());
        assert!(bler_sweep_learned(&tx, &rx_awgn, ChannelKind::Rayleigh, &spec, 0).is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let pts = [BlerPoint::new(0.0, 100, 50), BlerPoint::new(4.0, 10_000, 3)];
        let svg = bler_svg(&[("a", &pts), ("b", &pts[..1])]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn untrained_generator_is_flagged() {
        let mut rng = substream(0, "t", 0);
        let g = Generator::new(4, 1, 0, &[16], Activation::Relu, &mut rng);
        let ch = RealChannel::new(ChannelKind::Awgn, 0.1, 1).unwrap();
        let conds = awgn_conditions(&Qam16Mapper);
        let rep = gan_fidelity(&g, &Qam16Mapper, &ch, &conds[..2], 300, 1).unwrap();
        assert!(rep.conditions.iter().all(|c| c.flagged()));
        assert_eq!(rep.to_csv().lines().count(), 3);
    }
}
