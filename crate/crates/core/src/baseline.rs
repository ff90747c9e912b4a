//! Classical reference systems.
//!
//! * Hamming(7,4) with soft maximum-likelihood decoding, BPSK on the real axis.
//! * Gray-mapped 16-QAM with coherent detection from either the true fading
//!   coefficient or a least-squares pilot estimate.
//!
//! Messages map to bits MSB first: message `m` carries `[m>>3, m>>2, m>>1, m] & 1`.

use crate::channel::uses;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::transceiver::BlockEncoder;
use num_complex::Complex64;

pub type Bits4 = [u8; 4];

/// Parity contribution of each data bit (`p1 p2 p3`).
const PARITY_ROWS: [[u8; 3]; 4] = [[1, 1, 0], [0, 1, 1], [1, 1, 1], [1, 0, 1]];

/// A Hamming(7,4) codeword `[u1 u2 u3 u4 p1 p2 p3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Codeword(pub [u8; 7]);

impl Codeword {
    pub fn data_bits(&self) -> Bits4 {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    /// BPSK mapping `b -> 1 - 2b`.
    pub fn bpsk(&self) -> [f64; 7] {
        self.0.map(|b| 1.0 - 2.0 * f64::from(b))
    }
}

pub fn bits_from_index(m: usize) -> Bits4 {
    [(m >> 3) as u8 & 1, (m >> 2) as u8 & 1, (m >> 1) as u8 & 1, m as u8 & 1]
}

pub fn index_from_bits(b: Bits4) -> usize {
    b.iter().fold(0, |acc, &v| (acc << 1) | usize::from(v & 1))
}

/// Systematic encoding `c = u G`, `G = [I4 | P]`.
pub fn hamming74_encode(bits: Bits4) -> Codeword {
    let mut c = [0u8; 7];
    c[..4].copy_from_slice(&bits);
    for (u, row) in bits.iter().zip(PARITY_ROWS) {
        if *u & 1 == 1 {
            for (p, r) in c[4..].iter_mut().zip(row) {
                *p ^= r;
            }
        }
    }
    Codeword(c)
}

/// All 16 codewords, indexed by message.
pub fn hamming74_codebook() -> [Codeword; 16] {
    std::array::from_fn(|m| hamming74_encode(bits_from_index(m)))
}

/// Soft ML decoding: the codeword maximizing `sum y_i (1 - 2 c_i)`.
///
/// Ties go to the lowest codeword index.
pub fn hamming74_mld_decode(y: &[f64; 7]) -> Bits4 {
    let book = hamming74_codebook();
    let mut best = 0;
    let mut best_corr = f64::NEG_INFINITY;
    for (i, c) in book.iter().enumerate() {
        let corr: f64 = y.iter().zip(c.bpsk()).map(|(a, b)| a * b).sum();
        if corr > best_corr {
            best_corr = corr;
            best = i;
        }
    }
    bits_from_index(best)
}

/// Hard-decision syndrome decoding; corrects any single bit error.
pub fn hamming74_syndrome_decode(y: &[f64; 7]) -> Bits4 {
    let mut c = y.map(|v| u8::from(v < 0.0));
    let mut s = [0u8; 3];
    for (i, row) in PARITY_ROWS.iter().enumerate() {
        if c[i] == 1 {
            for (sv, r) in s.iter_mut().zip(row) {
                *sv ^= r;
            }
        }
    }
    for j in 0..3 {
        s[j] ^= c[4 + j];
    }
    if s != [0, 0, 0] {
        let col = |i: usize| -> [u8; 3] {
            if i < 4 {
                PARITY_ROWS[i]
            } else {
                let mut e = [0u8; 3];
                e[i - 4] = 1;
                e
            }
        };
        if let Some(i) = (0..7).find(|&i| col(i) == s) {
            c[i] ^= 1;
        }
    }
    [c[0], c[1], c[2], c[3]]
}

/// Gray-coded amplitude for a bit pair: `00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3`.
fn gray_level(b0: u8, b1: u8) -> f64 {
    match (b0 & 1, b1 & 1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

/// Unit-energy scale for the `{±1, ±3}^2` grid.
pub fn qam16_scale() -> f64 {
    1.0 / 10f64.sqrt()
}

/// 16-QAM: `(b0, b1)` select the in-phase level and `(b2, b3)` the quadrature level.
///
/// | bits | level |
/// |------|-------|
/// | 00   | -3    |
/// | 01   | -1    |
/// | 11   | +1    |
/// | 10   | +3    |
pub fn qam16_modulate(bits: Bits4) -> Complex64 {
    Complex64::new(gray_level(bits[0], bits[1]), gray_level(bits[2], bits[3])) * qam16_scale()
}

/// Constellation point for message `m`.
pub fn qam16_point(m: usize) -> Complex64 {
    qam16_modulate(bits_from_index(m))
}

/// Minimum-distance decision on `y / h_est`; ties go to the lowest index.
pub fn qam16_demod_coherent(y: Complex64, h_est: Complex64) -> Result<Bits4> {
    if h_est.norm_sqr() == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let z = y / h_est;
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for m in 0..16 {
        let d = (z - qam16_point(m)).norm_sqr();
        if d < best_d {
            best_d = d;
            best = m;
        }
    }
    Ok(bits_from_index(best))
}

/// Least-squares channel estimate from pilot observations of the symbol `1`.
pub fn ls_estimate(pilots: &[f64]) -> Complex64 {
    let n = pilots.len() / 2;
    assert!(n >= 1, "at least one pilot use");
    uses(pilots).sum::<Complex64>() / n as f64
}

/// Fixed 16-QAM mapper as a one-use block encoder.
#[derive(Debug, Clone, Copy, Default)]
pub struct Qam16Mapper;

impl BlockEncoder for Qam16Mapper {
    fn alphabet(&self) -> usize {
        16
    }

    fn block_uses(&self) -> usize {
        1
    }

    fn encode(&self, msgs: &[usize]) -> Result<Matrix> {
        let mut out = Matrix::zeros(msgs.len(), 2);
        for (r, &m) in msgs.iter().enumerate() {
            if m >= 16 {
                return Err(Error::Validation(format!("message {m} outside 16-QAM alphabet")));
            }
            let p = qam16_point(m);
            out.row_mut(r).copy_from_slice(&[p.re, p.im]);
        }
        Ok(out)
    }
}
