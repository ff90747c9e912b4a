//! Ground-truth channel simulators.
//!
//! Blocks are `n` complex channel uses stored as `2n` interleaved reals
//! `(re, im)`. Batches are [`Matrix`] values with one block per row.
//!
//! Fading is block fading: one `h ~ CN(0, 1)` per block, shared by every data
//! use and by the pilot. The pilot symbol is `1`.

use crate::error::{Error, Result};
use crate::nn::Matrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

impl ChannelKind {
    pub fn is_fading(self) -> bool {
        matches!(self, ChannelKind::Rayleigh)
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        })
    }
}

/// Eb/N0 operating point for a code carrying `k` bits over `n` complex uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub ebn0_db: f64,
    pub k: usize,
    pub n: usize,
}

impl SnrSpec {
    pub fn new(ebn0_db: f64, k: usize, n: usize) -> Self {
        SnrSpec { ebn0_db, k, n }
    }

    pub fn noise_std(&self) -> f64 {
        noise_std_from_snr(self)
    }
}

/// Noise standard deviation per real dimension.
///
/// With unit average power per complex use and `R = k/n` bits per use,
/// `N0 = 1 / (R * 10^(Eb/N0 / 10))` and the result is `sqrt(N0 / 2)`.
/// `+inf` dB gives zero noise.
pub fn noise_std_from_snr(spec: &SnrSpec) -> f64 {
    let rate = spec.k as f64 / spec.n as f64;
    let n0 = 1.0 / (rate * 10f64.powf(spec.ebn0_db / 10.0));
    (n0 / 2.0).sqrt()
}

/// Complex view of an interleaved block.
pub fn uses(block: &[f64]) -> impl Iterator<Item = Complex64> + '_ {
    block.chunks_exact(2).map(|c| Complex64::new(c[0], c[1]))
}

/// Mean power per complex use, `(1/n) * sum |x_i|^2`.
pub fn block_power(block: &[f64]) -> f64 {
    let n = block.len() / 2;
    block.iter().map(|v| v * v).sum::<f64>() / n as f64
}

pub fn add_awgn<R: Rng + ?Sized>(block: &mut [f64], std: f64, rng: &mut R) {
    if std == 0.0 {
        return;
    }
    for v in block {
        *v += std * rng.sample::<f64, _>(StandardNormal);
    }
}

/// `y = x + w`, `w` i.i.d. `N(0, std^2)` per real dimension.
pub fn awgn_apply<R: Rng + ?Sized>(x: &[f64], std: f64, rng: &mut R) -> Vec<f64> {
    let mut y = x.to_vec();
    add_awgn(&mut y, std, rng);
    y
}

/// Draws `h ~ CN(0, 1)`.
pub fn rayleigh_sample<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Fading coefficient and noise level for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
    pub noise_std: f64,
}

/// `y_i = h * x_i + w_i` for every use of the block.
pub fn fading_apply<R: Rng + ?Sized>(
    x: &[f64],
    real: &ChannelRealization,
    rng: &mut R,
) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len());
    for u in uses(x) {
        let v = real.h * u;
        y.push(v.re);
        y.push(v.im);
    }
    add_awgn(&mut y, real.noise_std, rng);
    y
}

/// Received pilot block: `n_pilot` observations of `h * 1 + w`.
pub fn pilot_receive<R: Rng + ?Sized>(
    real: &ChannelRealization,
    n_pilot: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * n_pilot);
    for _ in 0..n_pilot {
        y.push(real.h.re);
        y.push(real.h.im);
    }
    add_awgn(&mut y, real.noise_std, rng);
    y
}

/// Output of one pass through the real channel.
#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub y: Matrix,
    /// Received pilots, one row per block; `None` on AWGN.
    pub pilots: Option<Matrix>,
    /// Per-block fading coefficients; `None` on AWGN.
    pub h: Option<Vec<Complex64>>,
}

/// The simulated physical channel.
///
/// It can be sampled but offers no gradient: [`RealChannel::input_gradient`]
/// always fails, so no training path can silently differentiate through it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealChannel {
    pub kind: ChannelKind,
    pub noise_std: f64,
    pub n_pilot: usize,
}

impl RealChannel {
    pub fn new(kind: ChannelKind, noise_std: f64, n_pilot: usize) -> Result<Self> {
        if !(noise_std >= 0.0) {
            return Err(Error::Validation(format!("noise std {noise_std} must be >= 0")));
        }
        if kind.is_fading() && n_pilot == 0 {
            return Err(Error::Validation("fading channel needs n_pilot >= 1".into()));
        }
        Ok(RealChannel {
            kind,
            noise_std,
            n_pilot,
        })
    }

    /// Pushes a batch of blocks through the channel with fresh fading per block.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &Matrix, rng: &mut R) -> ChannelOutput {
        match self.kind {
            ChannelKind::Awgn => {
                let mut y = x.clone();
                add_awgn(y.data_mut(), self.noise_std, rng);
                ChannelOutput {
                    y,
                    pilots: None,
                    h: None,
                }
            }
            ChannelKind::Rayleigh => {
                let h: Vec<Complex64> = (0..x.rows()).map(|_| rayleigh_sample(rng)).collect();
                self.transmit_with(x, &h, rng)
            }
        }
    }

    /// Fading transmission with caller-chosen coefficients, one per block.
    pub fn transmit_with<R: Rng + ?Sized>(
        &self,
        x: &Matrix,
        h: &[Complex64],
        rng: &mut R,
    ) -> ChannelOutput {
        assert_eq!(h.len(), x.rows(), "one fading coefficient per block");
        let mut y = Matrix::zeros(x.rows(), x.cols());
        let mut pilots = Matrix::zeros(x.rows(), 2 * self.n_pilot);
        for (r, &hr) in h.iter().enumerate() {
            let real = ChannelRealization {
                h: hr,
                noise_std: self.noise_std,
            };
            y.row_mut(r).copy_from_slice(&fading_apply(x.row(r), &real, rng));
            pilots
                .row_mut(r)
                .copy_from_slice(&pilot_receive(&real, self.n_pilot, rng));
        }
        ChannelOutput {
            y,
            pilots: Some(pilots),
            h: Some(h.to_vec()),
        }
    }

    /// The real channel is a black box.
    pub fn input_gradient(&self, _upstream: &Matrix) -> Result<Matrix> {
        Err(Error::NotDifferentiable)
    }
}

/// Writes a channel trace as CSV:
/// `block_id,use_index,x_re,x_im,y_re,y_im,h_re,h_im` (h columns empty on AWGN).
pub fn write_trace_csv(path: &Path, x: &Matrix, out: &ChannelOutput) -> Result<()> {
    let mut s = String::from("block_id,use_index,x_re,x_im,y_re,y_im,h_re,h_im\n");
    for b in 0..x.rows() {
        let (hre, him) = match &out.h {
            Some(h) => (h[b].re.to_string(), h[b].im.to_string()),
            None => (String::new(), String::new()),
        };
        for (i, (xu, yu)) in uses(x.row(b)).zip(uses(out.y.row(b))).enumerate() {
            s.push_str(&format!(
                "{b},{i},{},{},{},{},{hre},{him}\n",
                xu.re, xu.im, yu.re, yu.im
            ));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::substream;

    #[test]
    fn noise_std_reference_points() {
        let s = noise_std_from_snr(&SnrSpec::new(0.0, 4, 7));
        assert!((s * s - 0.875).abs() < 1e-12);
        assert!((s - 0.9354).abs() < 1e-4);
        let s = noise_std_from_snr(&SnrSpec::new(0.0, 3, 3));
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(noise_std_from_snr(&SnrSpec::new(f64::INFINITY, 4, 7)), 0.0);
        assert!(noise_std_from_snr(&SnrSpec::new(60.0, 4, 7)) < 1e-3);
    }

    #[test]
    fn zero_noise_is_identity() {
        let x = vec![0.5, -0.25, 1.0, 2.0];
        let mut rng = substream(1, "t", 0);
        assert_eq!(awgn_apply(&x, 0.0, &mut rng), x);
        let real = ChannelRealization {
            h: Complex64::new(1.0, 0.0),
            noise_std: 0.0,
        };
        assert_eq!(fading_apply(&x, &real, &mut rng), x);
    }

    #[test]
    fn quarter_turn_rotation() {
        let real = ChannelRealization {
            h: Complex64::new(0.0, 1.0),
            noise_std: 0.0,
        };
        let y = fading_apply(&[1.0, 0.0], &real, &mut substream(0, "t", 0));
        assert_eq!(y, vec![0.0, 1.0]);
    }

    #[test]
    fn noiseless_pilot_reveals_h() {
        let real = ChannelRealization {
            h: Complex64::new(0.3, -0.4),
            noise_std: 0.0,
        };
        let y = pilot_receive(&real, 1, &mut substream(0, "t", 0));
        assert_eq!(y, vec![0.3, -0.4]);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let x = vec![0.0; 32];
        let a = awgn_apply(&x, 0.7, &mut substream(5, "awgn", 0));
        let b = awgn_apply(&x, 0.7, &mut substream(5, "awgn", 0));
        assert_eq!(a, b);
        let h1 = rayleigh_sample(&mut substream(5, "h", 0));
        let h2 = rayleigh_sample(&mut substream(5, "h", 0));
        assert_eq!(h1, h2);
    }

    #[test]
    fn fading_is_linear_without_noise() {
        let x = [0.3, -1.1, 0.7, 0.2];
        let real = ChannelRealization {
            h: Complex64::new(-0.8, 0.45),
            noise_std: 0.0,
        };
        let mut rng = substream(0, "t", 0);
        let y = fading_apply(&x, &real, &mut rng);
        let ax: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
        let ay = fading_apply(&ax, &real, &mut rng);
        for (a, b) in ay.iter().zip(&y) {
            assert!((a - 2.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn real_channel_refuses_gradients() {
        let ch = RealChannel::new(ChannelKind::Awgn, 0.1, 0).unwrap();
        assert!(matches!(
            ch.input_gradient(&Matrix::zeros(1, 2)),
            Err(Error::NotDifferentiable)
        ));
        assert!(RealChannel::new(ChannelKind::Rayleigh, 0.1, 0).is_err());
        assert!(RealChannel::new(ChannelKind::Awgn, -1.0, 0).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let ch = RealChannel::new(ChannelKind::Rayleigh, 0.0, 1).unwrap();
        let x = Matrix::from_rows(&[[1.0, 0.0, 0.0, 1.0]]).unwrap();
        let out = ch.transmit(&x, &mut substream(3, "t", 0));
        write_trace_csv(&path, &x, &out).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "block_id,use_index,x_re,x_im,y_re,y_im,h_re,h_im");
        assert_eq!(lines.len(), 3);
    }
}
