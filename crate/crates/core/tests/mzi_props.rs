use std::f64::consts::PI;

use twinbeam::mzi::{measure, snl_reference, Bias, BeamField, InterferometerConfig};
use twinbeam::specan::{welch_psd, Window};

const DT: f64 = 5e-9;

fn interferometer(f: f64, bias: Bias) -> InterferometerConfig {
    InterferometerConfig::designed(f, 2.0, 1.55, 0.78, 0.9, bias).unwrap()
}

fn lossless(f: f64) -> InterferometerConfig {
    let mut c = interferometer(f, Bias::Phase);
    c.arm_transmission = 1.0;
    c.detector_qe = 1.0;
    c
}

fn tone(n: usize, f: f64, amp: f64) -> Vec<f64> {
    (0..n).map(|k| amp * (2.0 * PI * f * k as f64 * DT).sin()).collect()
}

/// Power of `x` at `f` relative to a unit-amplitude tone, by projection.
fn tone_power(x: &[f64], f: f64) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let ph = 2.0 * PI * f * k as f64 * DT;
        c += v * ph.cos();
        s += v * ph.sin();
    }
    let n = x.len() as f64;
    (c * c + s * s) * 4.0 / (n * n)
}

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[test]
fn phase_tone_transfer_follows_the_arm_delay() {
    let design = 5e6;
    let c = lossless(design);
    let n = 200_000;
    let p = vec![0.0; n];
    for (f, want) in [(design, 1.0), (2.0 * design, 0.0), (2.5e6, 0.5)] {
        let q = tone(n, f, 1e4);
        let beam = BeamField { mean_power: 0.02, p: &p, q: &q, dt: DT };
        let out = measure(&beam, &c, 1).unwrap();
        let got = tone_power(&out.diff, f) / 1e8;
        assert!((got - want).abs() < 1e-3, "{f} Hz: {got} vs {want}");
        assert!((c.phase_transfer(f) - want).abs() < 1e-9);
    }
}

#[test]
fn amplitude_noise_stays_out_of_the_phase_port() {
    // the sum port carries amplitude noise through cos²(πfΔT)
    let c = lossless(5e6);
    let n = 200_000;
    let q = vec![0.0; n];
    for (f, sum_transfer) in [(5e6, 0.0), (2.5e6, 0.5), (10e6, 1.0)] {
        let p = tone(n, f, 1e4);
        let beam = BeamField { mean_power: 0.02, p: &p, q: &q, dt: DT };
        let out = measure(&beam, &c, 2).unwrap();
        assert!(tone_power(&out.diff, f) / 1e8 < 1e-6, "{f} Hz leaks into diff");
        let got = tone_power(&out.sum, f) / 1e8;
        assert!((got - sum_transfer).abs() < 1e-3, "{f} Hz sum: {got}");
    }
}

#[test]
fn amplitude_mode_obeys_the_loss_law() {
    // white amplitude quadrature with variance v reads 1 − η(1 − v)
    let n = 4096 * 400;
    let c = interferometer(5e6, Bias::Amplitude);
    for v in [0.3f64, 3.0] {
        let p: Vec<f64> = gaussian(n, 4).iter().map(|x| x * v.sqrt()).collect();
        let q = gaussian(n, 5);
        let beam = BeamField { mean_power: 0.02, p: &p, q: &q, dt: DT };
        let out = measure(&beam, &c, 6).unwrap();
        let est = welch_psd(&out.sum, DT, 4096, 0.5, Window::Hann).unwrap();
        let mean = est.psd.iter().sum::<f64>() / est.psd.len() as f64;
        let want = 1.0 - c.efficiency() * (1.0 - v);
        assert!((mean - want).abs() < 0.02, "v {v}: {mean} vs {want}");
    }
}

#[test]
fn shot_noise_reference_is_flat_seeded_and_power_blind() {
    let n = 4096 * 400;
    let zero = vec![0.0; n];
    let c = interferometer(2e6, Bias::Phase);
    let at = |power: f64, seed: u64| {
        let beam = BeamField { mean_power: power, p: &zero, q: &zero, dt: DT };
        snl_reference(&beam, &c, seed).unwrap()
    };
    let a = at(0.02, 1);
    let est = welch_psd(&a, DT, 4096, 0.5, Window::Hann).unwrap();
    let worst = est.psd.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 6.0 * 1.03 / (est.n_segments as f64).sqrt(), "max dev {worst}");
    assert_eq!(a, at(2.0, 1));
    let b = at(0.02, 2);
    let r = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
        / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|x| x * x).sum::<f64>()).sqrt();
    assert!(r.abs() < 5.0 / (n as f64).sqrt(), "seed correlation {r}");
}
