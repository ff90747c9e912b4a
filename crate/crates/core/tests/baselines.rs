mod common;

use gancomm::baseline::{
    bits_from_index, hamming74_codebook, hamming74_mld_decode, hamming74_syndrome_decode, qam16_demod_coherent,
    qam16_point,
};
use gancomm::channel::rayleigh_sample;
use gancomm::eval::{bler_sweep_baseline, BaselineSystem, SweepSpec};
use gancomm::seed::substream;
use gancomm::{ChannelKind, SnrSpec};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn mld_matches_exhaustive_search() {
    assert_eq!(common::mld_mismatches(10_000, 1), 0);
}

#[test]
fn soft_decoding_never_loses_to_hard_decoding() {
    let book = hamming74_codebook();
    let std = SnrSpec::new(3.0, 4, 7).noise_std();
    let mut rng = substream(2, "soft-vs-hard", 0);
    let (mut soft, mut hard) = (0, 0);
    for _ in 0..200_000 {
        let m = rng.random_range(0..16);
        let y = book[m].bpsk().map(|s| s + std * rng.sample::<f64, _>(StandardNormal));
        soft += usize::from(hamming74_mld_decode(&y) != bits_from_index(m));
        hard += usize::from(hamming74_syndrome_decode(&y) != bits_from_index(m));
    }
    assert!(soft < hard, "soft {soft} hard {hard}");
}

#[test]
fn perfect_csi_beats_ls_estimate() {
    let spec = SweepSpec {
        snr_db: vec![10.0, 20.0],
        min_trials: 50_000,
        max_trials: 200_000,
        target_errors: 500,
        seed: None,
    };
    let perfect = bler_sweep_baseline(BaselineSystem::Qam16RayleighPerfectCsi, ChannelKind::Rayleigh, &spec, 3).unwrap();
    let ls = bler_sweep_baseline(BaselineSystem::Qam16RayleighLs, ChannelKind::Rayleigh, &spec, 3).unwrap();
    for (p, l) in perfect.iter().zip(&ls) {
        assert!(p.bler < l.bler, "{p:?} vs {l:?}");
    }
}

#[test]
fn swept_qam_matches_independent_simulation() {
    let db = 15.0;
    let std = SnrSpec::new(db, 4, 1).noise_std();
    let mut rng = substream(9, "qam-direct", 0);
    let mut errors = 0;
    let trials = 200_000;
    for _ in 0..trials {
        let m = rng.random_range(0..16);
        let h = rayleigh_sample(&mut rng);
        let w = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * std;
        if qam16_demod_coherent(h * qam16_point(m) + w, h).unwrap() != bits_from_index(m) {
            errors += 1;
        }
    }
    let direct = errors as f64 / trials as f64;
    let spec = SweepSpec {
        snr_db: vec![db],
        min_trials: 200_000,
        max_trials: 200_000,
        target_errors: 0,
        seed: None,
    };
    let swept = bler_sweep_baseline(BaselineSystem::Qam16RayleighPerfectCsi, ChannelKind::Rayleigh, &spec, 4).unwrap()[0];
    assert!((swept.bler - direct).abs() < 3.0 * swept.ci95_halfwidth, "{swept:?} vs {direct}");
}

#[test]
fn hamming_bler_is_monotone_in_snr() {
    let spec = SweepSpec {
        snr_db: vec![0.0, 2.0, 4.0, 6.0],
        min_trials: 20_000,
        max_trials: 1_000_000,
        target_errors: 300,
        seed: Some(8),
    };
    let pts = bler_sweep_baseline(BaselineSystem::Hamming74MldAwgn, ChannelKind::Awgn, &spec, 8).unwrap();
    for w in pts.windows(2) {
        assert!(w[0].bler > w[1].bler, "{:?}", pts);
    }
    assert!(pts.iter().all(|p| p.errors >= 300));
}

#[test]
fn sweep_is_reproducible() {
    let spec = SweepSpec {
        snr_db: vec![1.0, 3.0],
        min_trials: 10_000,
        max_trials: 100_000,
        target_errors: 100,
        seed: None,
    };
    let a = bler_sweep_baseline(BaselineSystem::Hamming74MldAwgn, ChannelKind::Awgn, &spec, 5).unwrap();
    let b = bler_sweep_baseline(BaselineSystem::Hamming74MldAwgn, ChannelKind::Awgn, &spec, 5).unwrap();
    assert_eq!(a, b);
}
