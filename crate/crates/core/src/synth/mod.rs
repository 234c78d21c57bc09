//! Stochastic quadrature streams for the signal and idler beams.
//!
//! Four independent unit white Gaussian sequences are shaped into the
//! collective modes `p±`, `q±` and rotated into the beam basis. Pump phase
//! noise is a fifth, independent stream added to `q₊`. A unit-variance white
//! sequence is the SNL in these units (see [`crate::specan::welch`]).

pub mod filter;
pub mod targets;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{tag, GaussianSource};
use crate::spectra::{OpoCavity, PumpDrive};
use filter::{DiscreteFilter, FilterState};
pub use filter::{design_squeeze_filter, ShapingFilter};
pub use targets::{CollectiveTargets, ModeTarget, PumpNoiseTerm};

/// Minimum stream length accepted by [`synthesize`].
pub const MIN_SAMPLES: usize = 1 << 16;

/// Warm-up runs until the slowest filter has decayed by `e^-40`.
const WARMUP_DECADES: f64 = 40.0;

/// Separates the warm-up draws from the main stream of the same channel.
const WARMUP_TAG: u64 = 0x8000;

#[derive(Debug, Clone)]
struct ModeChannel {
    source: GaussianSource,
    filter: Option<DiscreteFilter>,
    state: FilterState,
    white: Vec<f64>,
}

impl ModeChannel {
    fn new(
        filter: Option<ShapingFilter>,
        dt: f64,
        prewarp_hz: f64,
        seed: u64,
        tag: u64,
    ) -> Result<Self> {
        let filter = filter.map(|f| f.discretize(dt, prewarp_hz)).transpose()?;
        let mut state = FilterState::default();
        if let Some(f) = &filter {
            let pole = f.pole().abs();
            if pole > 0.0 {
                let n = (WARMUP_DECADES / -pole.ln()).ceil() as usize;
                let mut warm = vec![0.0; n];
                GaussianSource::new(seed, tag | WARMUP_TAG).fill(&mut warm);
                let mut sink = vec![0.0; n];
                f.process(&mut state, &warm, &mut sink);
            }
        }
        Ok(Self {
            source: GaussianSource::new(seed, tag),
            filter,
            state,
            white: Vec::new(),
        })
    }

    fn fill(&mut self, out: &mut [f64], keep_white: bool) {
        let n = out.len();
        match &self.filter {
            None => self.source.fill(out),
            Some(f) => {
                self.white.resize(n, 0.0);
                self.source.fill(&mut self.white);
                f.process(&mut self.state, &self.white, out);
            }
        }
        if keep_white && self.filter.is_none() {
            self.white.clear();
            self.white.extend_from_slice(out);
        }
    }
}

/// One block of collective-mode samples. `pump_unit` is the pump-noise
/// contribution for `E = 1`; scale it by `sqrt(E)`.
#[derive(Debug, Clone, Default)]
pub struct CollectiveBlock {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub pump_unit: Vec<f64>,
}

impl CollectiveBlock {
    pub fn len(&self) -> usize {
        self.p_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_plus.is_empty()
    }

    fn resize(&mut self, n: usize) {
        for c in [
            &mut self.p_plus,
            &mut self.p_minus,
            &mut self.q_plus,
            &mut self.q_minus,
            &mut self.pump_unit,
        ] {
            c.resize(n, 0.0);
        }
    }

    /// Beam-basis quadratures with pump noise `excess_noise` folded into `q₊`.
    pub fn to_beams(&self, excess_noise: f64, out: &mut BeamBlock) {
        let n = self.len();
        out.resize(n);
        let g = excess_noise.sqrt();
        for k in 0..n {
            let (pp, pm) = (self.p_plus[k], self.p_minus[k]);
            let qp = if g == 0.0 {
                self.q_plus[k]
            } else {
                self.q_plus[k] + g * self.pump_unit[k]
            };
            let qm = self.q_minus[k];
            out.p_s[k] = (pp + pm) * FRAC_1_SQRT_2;
            out.p_i[k] = (pp - pm) * FRAC_1_SQRT_2;
            out.q_s[k] = (qp + qm) * FRAC_1_SQRT_2;
            out.q_i[k] = (qp - qm) * FRAC_1_SQRT_2;
        }
    }
}

/// Signal and idler quadratures for one block.
#[derive(Debug, Clone, Default)]
pub struct BeamBlock {
    pub p_s: Vec<f64>,
    pub q_s: Vec<f64>,
    pub p_i: Vec<f64>,
    pub q_i: Vec<f64>,
}

impl BeamBlock {
    fn resize(&mut self, n: usize) {
        for c in [&mut self.p_s, &mut self.q_s, &mut self.p_i, &mut self.q_i] {
            c.resize(n, 0.0);
        }
    }
}

/// Block-wise synthesizer. Filter state carries across blocks, so the output
/// does not depend on how a stream is cut into blocks.
#[derive(Debug, Clone)]
pub struct QuadratureSynth {
    targets: CollectiveTargets,
    channels: Vec<ModeChannel>,
    pump: Option<ModeChannel>,
}

impl QuadratureSynth {
    pub fn new(targets: &CollectiveTargets, dt: f64, seed: u64) -> Result<Self> {
        check_sampling(targets, dt)?;
        let f = targets.design_freq_hz;
        let channels = [
            (targets.p_plus, tag::P_PLUS),
            (targets.p_minus, tag::P_MINUS),
            (targets.q_plus, tag::Q_PLUS),
            (targets.q_minus, tag::Q_MINUS),
        ]
        .iter()
        .map(|(t, tag)| ModeChannel::new(t.filter()?, dt, f, seed, *tag))
        .collect::<Result<Vec<_>>>()?;
        let pump = match targets.pump {
            Some(p) if p.unit_strength > 0.0 => Some(ModeChannel::new(
                Some(p.unit_filter()?),
                dt,
                f,
                seed,
                tag::PUMP,
            )?),
            _ => None,
        };
        Ok(Self {
            targets: *targets,
            channels,
            pump,
        })
    }

    pub fn targets(&self) -> &CollectiveTargets {
        &self.targets
    }

    /// Next `n` samples. When `raw` is given it receives the unshaped white
    /// draws, i.e. exactly what vacuum targets with the same seed produce.
    pub fn fill(&mut self, n: usize, out: &mut CollectiveBlock, raw: Option<&mut CollectiveBlock>) {
        out.resize(n);
        let keep = raw.is_some();
        {
            let mut jobs: Vec<(&mut ModeChannel, &mut Vec<f64>)> = self
                .channels
                .iter_mut()
                .zip([
                    &mut out.p_plus,
                    &mut out.p_minus,
                    &mut out.q_plus,
                    &mut out.q_minus,
                ])
                .collect();
            if let Some(p) = self.pump.as_mut() {
                jobs.push((p, &mut out.pump_unit));
            }
            par::for_each_mut(&mut jobs, |(ch, buf)| ch.fill(buf, keep));
        }
        if self.pump.is_none() {
            out.pump_unit.iter_mut().for_each(|v| *v = 0.0);
        }
        if let Some(raw) = raw {
            raw.resize(n);
            for (ch, dst) in self.channels.iter().zip([
                &mut raw.p_plus,
                &mut raw.p_minus,
                &mut raw.q_plus,
                &mut raw.q_minus,
            ]) {
                dst.copy_from_slice(&ch.white[..n]);
            }
            raw.pump_unit.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

fn check_sampling(targets: &CollectiveTargets, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    let limit = 0.25 / dt;
    if !(targets.design_freq_hz > 0.0 && targets.design_freq_hz <= limit) {
        return Err(Error::Configuration(format!(
            "analysis frequency {} Hz must be in (0, 1/(4·dt) = {limit} Hz]",
            targets.design_freq_hz
        )));
    }
    Ok(())
}

/// In-memory quadrature streams, channel order `δp_s, δq_s, δp_i, δq_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureStreams {
    pub dt: f64,
    pub seed: u64,
    pub p_s: Vec<f64>,
    pub q_s: Vec<f64>,
    pub p_i: Vec<f64>,
    pub q_i: Vec<f64>,
}

pub const CHANNEL_ORDER: [&str; 4] = ["p_s", "q_s", "p_i", "q_i"];

impl QuadratureStreams {
    pub fn n_samples(&self) -> usize {
        self.p_s.len()
    }

    /// Back to `(p₊, p₋, q₊, q₋)`.
    pub fn to_collective(&self) -> [Vec<f64>; 4] {
        let rot = |a: &[f64], b: &[f64], sign: f64| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x + sign * y) * FRAC_1_SQRT_2)
                .collect()
        };
        [
            rot(&self.p_s, &self.p_i, 1.0),
            rot(&self.p_s, &self.p_i, -1.0),
            rot(&self.q_s, &self.q_i, 1.0),
            rot(&self.q_s, &self.q_i, -1.0),
        ]
    }

    /// Little-endian f64 samples, channel-interleaved, plus a JSON sidecar
    /// at `<path>.json`.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for k in 0..self.n_samples() {
            for v in [self.p_s[k], self.q_s[k], self.p_i[k], self.q_i[k]] {
                w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let sidecar = RawSidecar {
            format: "f64le-interleaved".into(),
            dt: self.dt,
            n_samples: self.n_samples(),
            seed: self.seed,
            channels: CHANNEL_ORDER.iter().map(|s| s.to_string()).collect(),
        };
        let side_path = sidecar_path(path);
        let json = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))?;
        Ok(())
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let side_path = sidecar_path(path);
        let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
        let side: RawSidecar = serde_json::from_str(&text)?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != side.n_samples * 4 * 8 {
            return Err(Error::DegenerateInput(format!(
                "raw dump holds {} bytes, sidecar promises {} samples",
                bytes.len(),
                side.n_samples
            )));
        }
        let mut ch: [Vec<f64>; 4] = Default::default();
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            ch[i % 4].push(v);
        }
        let [p_s, q_s, p_i, q_i] = ch;
        Ok(Self {
            dt: side.dt,
            seed: side.seed,
            p_s,
            q_s,
            p_i,
            q_i,
        })
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSidecar {
    format: String,
    dt: f64,
    n_samples: usize,
    seed: u64,
    channels: Vec<String>,
}

/// Synthesizes `n_samples` of twin-beam quadratures whose collective modes
/// follow `targets` (pump noise included in `q₊`). Deterministic in `seed`.
pub fn synthesize(
    targets: &CollectiveTargets,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<QuadratureStreams> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: n_samples,
        });
    }
    let mut synth = QuadratureSynth::new(targets, dt, seed)?;
    let mut block = CollectiveBlock::default();
    synth.fill(n_samples, &mut block, None);
    let mut beams = BeamBlock::default();
    block.to_beams(targets.excess_noise(), &mut beams);
    Ok(QuadratureStreams {
        dt,
        seed,
        p_s: beams.p_s,
        q_s: beams.q_s,
        p_i: beams.p_i,
        q_i: beams.q_i,
    })
}

/// The pump-noise contribution to `q₊` on its own: white noise of density
/// `2TT′(σ−1)E` through the cavity Lorentzian. Same stream as the one
/// [`synthesize`] adds for the same seed.
pub fn pump_noise_component(
    excess_noise: f64,
    sigma: f64,
    cavity: &OpoCavity,
    dt: f64,
    prewarp_hz: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(excess_noise >= 0.0) {
        return Err(Error::OutOfRange {
            name: "excess_noise",
            value: excess_noise,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let pump = PumpDrive::new(sigma, excess_noise)?;
    let term = PumpNoiseTerm::new(cavity, &pump, cavity.round_trip_time);
    if term.is_silent() {
        return Ok(vec![0.0; n_samples]);
    }
    let mut ch = ModeChannel::new(Some(term.unit_filter()?), dt, prewarp_hz, seed, tag::PUMP)?;
    let mut out = vec![0.0; n_samples];
    ch.fill(&mut out, false);
    let g = excess_noise.sqrt();
    out.iter_mut().for_each(|v| *v *= g);
    Ok(out)
}
