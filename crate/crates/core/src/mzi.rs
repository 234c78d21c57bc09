//! Unbalanced fiber Mach-Zehnder interferometer with balanced detection.
//!
//! Linearized sideband model: the carrier is classical and photocurrent
//! fluctuations are linear in the quadrature fluctuations. With amplitude
//! quadrature `X` and phase quadrature `Y` of each arm at the recombining
//! beam splitter, relative arm phase `φ` and equal arm powers, the
//! SNL-normalized ports are
//!
//! ```text
//! sum  = (X_s + X_l) / √2
//! diff = [sin φ · (Y_s − Y_l) + cos φ · (X_s + X_l)] / √2
//! ```
//!
//! where the long-arm field is delayed by `ΔT`. At `φ = π/2` the difference
//! port reads `[q(t) − q(t − ΔT)]/2` plus vacuum, a transfer of
//! `sin²(π f ΔT)` on the input phase-noise PSD, which is 1 at the design
//! frequency `f = 1/(2ΔT)`. In amplitude mode all light takes the short arm:
//! the sum port reads `p` and the difference port sees only vacuum.
//!
//! Losses are beam-splitter admixtures of vacuum. The phase measurement is
//! charged one fiber transmission per arm fiber it passes, so its end-to-end
//! efficiency is `qe · t²`; the amplitude measurement passes one fiber,
//! `qe · t`.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::GaussianSource;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance on `ΔT/dt` being an integer.
const DELAY_ALIGNMENT_TOL: f64 = 1e-6;

/// Arm-length difference `c / (2 f n)` that puts the first transfer maximum
/// at `analysis_freq` (ordinary frequency, hertz).
pub fn design_arm_length(analysis_freq: f64, refractive_index: f64) -> Result<f64> {
    if !(analysis_freq > 0.0 && analysis_freq.is_finite()) {
        return Err(Error::OutOfRange {
            name: "analysis_freq",
            value: analysis_freq,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if !(refractive_index > 1.0 && refractive_index.is_finite()) {
        return Err(Error::OutOfRange {
            name: "refractive_index",
            value: refractive_index,
            min: 1.0,
            max: f64::INFINITY,
        });
    }
    Ok(SPEED_OF_LIGHT / (2.0 * analysis_freq * refractive_index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    /// All light through the short arm.
    Amplitude,
    /// Equal split, `π/2` relative phase.
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    pub short_len: f64,
    pub long_len: f64,
    pub refractive_index: f64,
    /// Power transmission of one fiber arm (couplers included).
    pub arm_transmission: f64,
    pub bias: Bias,
    pub detector_qe: f64,
    /// Static error on the `π/2` bias, radians.
    #[serde(default)]
    pub bias_error: f64,
}

impl InterferometerConfig {
    /// Short arm `short_len`, long arm sized for `analysis_freq`.
    pub fn designed(
        analysis_freq: f64,
        short_len: f64,
        refractive_index: f64,
        arm_transmission: f64,
        detector_qe: f64,
        bias: Bias,
    ) -> Result<Self> {
        let cfg = Self {
            short_len,
            long_len: short_len + design_arm_length(analysis_freq, refractive_index)?,
            refractive_index,
            arm_transmission,
            bias,
            detector_qe,
            bias_error: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_bias(self, bias: Bias) -> Self {
        Self { bias, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.short_len > 0.0) {
            return Err(Error::invalid("short_len", format!("{} must be > 0", self.short_len)));
        }
        if !(self.long_len > self.short_len) {
            return Err(Error::invalid(
                "long_len",
                format!("{} must exceed short_len {}", self.long_len, self.short_len),
            ));
        }
        if !(self.refractive_index > 1.0) {
            return Err(Error::invalid(
                "refractive_index",
                format!("{} must be > 1", self.refractive_index),
            ));
        }
        for (name, v) in [
            ("arm_transmission", self.arm_transmission),
            ("detector_qe", self.detector_qe),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("{v} not in (0, 1]")));
            }
        }
        if !self.bias_error.is_finite() {
            return Err(Error::invalid("bias_error", "must be finite"));
        }
        Ok(())
    }

    /// `ΔT = (L_long − L_short)·n / c`.
    pub fn delay(&self) -> f64 {
        (self.long_len - self.short_len) * self.refractive_index / SPEED_OF_LIGHT
    }

    /// Frequency where the phase-mode transfer peaks, `1/(2ΔT)`.
    pub fn design_frequency(&self) -> f64 {
        0.5 / self.delay()
    }

    /// `ΔT / dt`, required to be an integer.
    pub fn delay_samples(&self, dt: f64) -> Result<usize> {
        let ratio = self.delay() / dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > DELAY_ALIGNMENT_TOL * ratio.max(1.0) {
            return Err(Error::Configuration(format!(
                "arm delay {} s is not an integer number of {dt} s samples (ratio {ratio})",
                self.delay()
            )));
        }
        Ok(n as usize)
    }

    /// End-to-end power efficiency on the measured quadrature.
    pub fn efficiency(&self) -> f64 {
        match self.bias {
            Bias::Amplitude => self.detector_qe * self.arm_transmission,
            Bias::Phase => self.detector_qe * self.arm_transmission * self.arm_transmission,
        }
    }

    /// Power transfer of the difference port on input phase noise,
    /// `sin²(π f ΔT)` for a lossless phase-biased interferometer.
    pub fn phase_transfer(&self, freq_hz: f64) -> f64 {
        (std::f64::consts::PI * freq_hz * self.delay()).sin().powi(2)
    }

    fn phase(&self) -> f64 {
        FRAC_PI_2 + self.bias_error
    }
}

/// One beam entering an interferometer.
#[derive(Debug, Clone, Copy)]
pub struct BeamField<'a> {
    pub mean_power: f64,
    pub p: &'a [f64],
    pub q: &'a [f64],
    pub dt: f64,
}

impl BeamField<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.mean_power > 0.0 && self.mean_power.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "beam mean power {} W must be positive",
                self.mean_power
            )));
        }
        if self.p.len() != self.q.len() {
            return Err(Error::Configuration(format!(
                "quadrature lengths differ: {} vs {}",
                self.p.len(),
                self.q.len()
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("{} must be > 0", self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentPair {
    pub sum: Vec<f64>,
    pub diff: Vec<f64>,
    pub dt: f64,
}

/// Vacuum draws consumed by one interferometer for one block of samples.
#[derive(Debug, Clone, Default)]
pub struct MziNoise {
    /// Input-coupling admixture (phase mode only), `x` and `y`.
    coupling: [Vec<f64>; 2],
    /// Vacuum entering the unused polarization port of the splitter
    /// (phase mode) or the empty long arm (amplitude mode).
    port: [Vec<f64>; 2],
    /// Arm-loss vacuum: short `x, y`, long `x, y`.
    arm: [Vec<f64>; 4],
    /// Detector-loss vacuum projected onto the sum and difference ports.
    detector: [Vec<f64>; 2],
}

/// Per-input history of the long arm.
#[derive(Debug, Clone, Default)]
pub struct DelayState {
    x: VecDeque<f64>,
    y: VecDeque<f64>,
}

/// Streaming interferometer. Vacuum draws are taken once per block with
/// [`draw`](Self::draw) and may be applied to several inputs, which then
/// share the same detector and loss noise.
#[derive(Debug, Clone)]
pub struct MziStage {
    config: InterferometerConfig,
    delay: usize,
    source: GaussianSource,
    noise: MziNoise,
}

impl MziStage {
    pub fn new(config: InterferometerConfig, dt: f64, seed: u64, tag: u64) -> Result<Self> {
        config.validate()?;
        let delay = match config.bias {
            Bias::Phase => config.delay_samples(dt)?,
            Bias::Amplitude => 0,
        };
        Ok(Self {
            config,
            delay,
            source: GaussianSource::new(seed, tag),
            noise: MziNoise::default(),
        })
    }

    pub fn config(&self) -> &InterferometerConfig {
        &self.config
    }

    pub fn delay_samples(&self) -> usize {
        self.delay
    }

    /// Draws the vacuum for the next `n` input samples.
    pub fn draw(&mut self, n: usize) {
        let MziNoise {
            coupling,
            port,
            arm,
            detector,
        } = &mut self.noise;
        let mut bufs: Vec<&mut Vec<f64>> = Vec::with_capacity(10);
        if self.config.bias == Bias::Phase {
            bufs.extend(coupling.iter_mut());
            bufs.extend(port.iter_mut());
            bufs.extend(arm.iter_mut());
        } else {
            // the long arm holds vacuum only; its loss admixture is still vacuum
            bufs.extend(port.iter_mut());
            bufs.push(&mut arm[0]);
        }
        bufs.extend(detector.iter_mut());
        for b in bufs.iter_mut() {
            b.resize(n, 0.0);
        }
        // sample-major order keeps the draws independent of block boundaries
        let m = bufs.len();
        let mut flat = vec![0.0; n * m];
        self.source.fill(&mut flat);
        for (k, row) in flat.chunks_exact(m).enumerate() {
            for (b, v) in bufs.iter_mut().zip(row) {
                b[k] = *v;
            }
        }
    }

    /// Applies the interferometer to the next block of one input. The first
    /// `ΔT/dt` samples of a stream only fill the delay line and produce no
    /// output, so phase-mode outputs are shorter than the input by that much.
    pub fn apply(&self, p: &[f64], q: &[f64], state: &mut DelayState, out: &mut PhotocurrentBlock) {
        out.sum.clear();
        out.diff.clear();
        match self.config.bias {
            Bias::Phase => self.apply_phase(p, q, state, out),
            Bias::Amplitude => self.apply_amplitude(p, out),
        }
    }

    fn apply_phase(&self, p: &[f64], q: &[f64], state: &mut DelayState, out: &mut PhotocurrentBlock) {
        let c = &self.config;
        let t = c.arm_transmission;
        let (st, lt) = (t.sqrt(), (1.0 - t).sqrt());
        let (sq, lq) = (c.detector_qe.sqrt(), (1.0 - c.detector_qe).sqrt());
        let (sin_phi, cos_phi) = c.phase().sin_cos();
        let n = &self.noise;
        for k in 0..p.len() {
            // fiber coupling admixture
            let ax = st * p[k] + lt * n.coupling[0][k];
            let ay = st * q[k] + lt * n.coupling[1][k];
            // polarizing split with the vacuum of the orthogonal polarization
            let (bx, by) = (n.port[0][k], n.port[1][k]);
            let short_x = st * (ax + bx) * FRAC_1_SQRT_2 + lt * n.arm[0][k];
            let short_y = st * (ay + by) * FRAC_1_SQRT_2 + lt * n.arm[1][k];
            let long_x = st * (ax - bx) * FRAC_1_SQRT_2 + lt * n.arm[2][k];
            let long_y = st * (ay - by) * FRAC_1_SQRT_2 + lt * n.arm[3][k];
            state.x.push_back(long_x);
            state.y.push_back(long_y);
            if state.x.len() <= self.delay {
                continue;
            }
            let lx = state.x.pop_front().expect("delay line primed");
            let ly = state.y.pop_front().expect("delay line primed");
            let sum = (short_x + lx) * FRAC_1_SQRT_2;
            let diff = (sin_phi * (short_y - ly) + cos_phi * (short_x + lx)) * FRAC_1_SQRT_2;
            out.sum.push(sq * sum + lq * n.detector[0][k]);
            out.diff.push(sq * diff + lq * n.detector[1][k]);
        }
    }

    fn apply_amplitude(&self, p: &[f64], out: &mut PhotocurrentBlock) {
        let c = &self.config;
        let t = c.arm_transmission;
        let (st, lt) = (t.sqrt(), (1.0 - t).sqrt());
        let (sq, lq) = (c.detector_qe.sqrt(), (1.0 - c.detector_qe).sqrt());
        let (sin_phi, cos_phi) = c.phase().sin_cos();
        let n = &self.noise;
        for k in 0..p.len() {
            let sx = st * p[k] + lt * n.arm[0][k];
            // long arm carries no mean field: its quadratures are vacuum
            let diff = cos_phi * n.port[0][k] - sin_phi * n.port[1][k];
            out.sum.push(sq * sx + lq * n.detector[0][k]);
            out.diff.push(sq * diff + lq * n.detector[1][k]);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PhotocurrentBlock {
    pub sum: Vec<f64>,
    pub diff: Vec<f64>,
}

/// Runs one beam through the interferometer. `seed` drives the vacuum
/// admixtures; the same seed on the same beam gives identical currents.
pub fn measure(beam: &BeamField<'_>, config: &InterferometerConfig, seed: u64) -> Result<PhotocurrentPair> {
    beam.validate()?;
    let mut stage = MziStage::new(*config, beam.dt, seed, crate::rng::tag::MZI_SIGNAL_PHASE)?;
    let mut state = DelayState::default();
    let mut out = PhotocurrentBlock::default();
    stage.draw(beam.p.len());
    stage.apply(beam.p, beam.q, &mut state, &mut out);
    Ok(PhotocurrentPair {
        sum: out.sum,
        diff: out.diff,
        dt: beam.dt,
    })
}

/// Shot-noise reference: the signal-carrying port of `config` driven by
/// vacuum drawn from `seed`. Flat at 1 in SNL units whatever the beam power.
pub fn snl_reference(beam: &BeamField<'_>, config: &InterferometerConfig, seed: u64) -> Result<Vec<f64>> {
    beam.validate()?;
    let n = beam.p.len();
    let mut vac = GaussianSource::new(seed, crate::rng::tag::SNL);
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    vac.fill(&mut p);
    vac.fill(&mut q);
    let vacuum = BeamField {
        mean_power: beam.mean_power,
        p: &p,
        q: &q,
        dt: beam.dt,
    };
    let pair = measure(&vacuum, config, seed)?;
    Ok(match config.bias {
        Bias::Phase => pair.diff,
        Bias::Amplitude => pair.sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(f: f64, bias: Bias) -> InterferometerConfig {
        InterferometerConfig::designed(f, 2.0, 1.55, 0.78, 0.9, bias).unwrap()
    }

    #[test]
    fn arm_lengths_for_fiber_hardware() {
        let want = [(2e6, 48.0), (5e6, 19.0), (10e6, 10.0)];
        for (f, fiber) in want {
            let dl = design_arm_length(f, 1.55).unwrap();
            assert!((dl - fiber).abs() < 2.5, "{f}: {dl}");
        }
        assert_relative_eq!(design_arm_length(2e6, 1.55).unwrap(), 48.353_622_258_064_52, max_relative = 1e-14);
    }

    #[test]
    fn arm_length_is_inverse_linear() {
        for f in [1e5, 2e6, 7.3e6] {
            let a = design_arm_length(f, 1.55).unwrap();
            let b = design_arm_length(2.0 * f, 1.55).unwrap();
            assert!((b - a / 2.0).abs() <= 1e-12 * a);
        }
        assert!(design_arm_length(0.0, 1.55).is_err());
        assert!(design_arm_length(1e6, 1.0).is_err());
    }

    #[test]
    fn delay_alignment() {
        let dt = 5e-9;
        assert_eq!(cfg(2e6, Bias::Phase).delay_samples(dt).unwrap(), 50);
        assert_eq!(cfg(5e6, Bias::Phase).delay_samples(dt).unwrap(), 20);
        assert_eq!(cfg(10e6, Bias::Phase).delay_samples(dt).unwrap(), 10);
        let mut long_fiber = cfg(2e6, Bias::Phase);
        long_fiber.long_len = 50.0;
        assert!(matches!(
            long_fiber.delay_samples(dt),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn efficiency_bookkeeping() {
        assert_relative_eq!(cfg(2e6, Bias::Phase).efficiency(), 0.9 * 0.78 * 0.78, max_relative = 1e-12);
        assert_relative_eq!(cfg(2e6, Bias::Amplitude).efficiency(), 0.9 * 0.78, max_relative = 1e-12);
    }

    #[test]
    fn transfer_peaks_at_design_and_vanishes_at_twice() {
        let c = cfg(5e6, Bias::Phase);
        assert_relative_eq!(c.phase_transfer(5e6), 1.0, max_relative = 1e-12);
        assert!(c.phase_transfer(10e6) < 1e-3);
        assert!(c.phase_transfer(20e6) < 1e-3);
        assert_relative_eq!(c.design_frequency(), 5e6, max_relative = 1e-12);
    }

    #[test]
    fn zero_power_is_rejected() {
        let x = vec![0.0; 16];
        let beam = BeamField {
            mean_power: 0.0,
            p: &x,
            q: &x,
            dt: 5e-9,
        };
        assert!(matches!(
            measure(&beam, &cfg(10e6, Bias::Phase), 1),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn phase_mode_output_drops_delay_prefix() {
        let n = 1000;
        let x = vec![0.0; n];
        let beam = BeamField {
            mean_power: 0.02,
            p: &x,
            q: &x,
            dt: 5e-9,
        };
        let out = measure(&beam, &cfg(10e6, Bias::Phase), 1).unwrap();
        assert_eq!(out.sum.len(), n - 10);
        let amp = measure(&beam, &cfg(10e6, Bias::Amplitude), 1).unwrap();
        assert_eq!(amp.sum.len(), n);
    }

    #[test]
    fn lossless_phase_mode_is_a_delayed_difference() {
        // with no loss and no vacuum, diff = [q(t) − q(t−ΔT)]/2 + vacuum terms;
        // drive with a large deterministic q and check the linear part
        let mut c = cfg(10e6, Bias::Phase);
        c.arm_transmission = 1.0;
        c.detector_qe = 1.0;
        let n = 200;
        let q: Vec<f64> = (0..n).map(|k| 1e6 * ((k * 7919) % 101) as f64).collect();
        let p = vec![0.0; n];
        let beam = BeamField {
            mean_power: 0.02,
            p: &p,
            q: &q,
            dt: 5e-9,
        };
        let out = measure(&beam, &c, 3).unwrap();
        for k in 0..out.diff.len() {
            let want = (q[k + 10] - q[k]) / 2.0;
            assert!((out.diff[k] - want).abs() < 20.0, "{k}");
        }
    }

    #[test]
    fn streaming_matches_one_shot() {
        let n = 5000;
        let mut src = GaussianSource::new(8, 99);
        let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
        src.fill(&mut p);
        src.fill(&mut q);
        let c = cfg(5e6, Bias::Phase);
        let beam = BeamField {
            mean_power: 0.02,
            p: &p,
            q: &q,
            dt: 5e-9,
        };
        let whole = measure(&beam, &c, 4).unwrap();
        // same draws, cut into blocks
        let mut stage = MziStage::new(c, 5e-9, 4, crate::rng::tag::MZI_SIGNAL_PHASE).unwrap();
        let mut state = DelayState::default();
        let mut blk = PhotocurrentBlock::default();
        let mut diff = Vec::new();
        for (a, b) in [(0, 7), (7, 2500), (2500, n)] {
            stage.draw(b - a);
            stage.apply(&p[a..b], &q[a..b], &mut state, &mut blk);
            diff.extend_from_slice(&blk.diff);
        }
        assert_eq!(diff, whole.diff);
    }
}
