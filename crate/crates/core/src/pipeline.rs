//! Streaming end-to-end measurement: synthesis, two interferometers per
//! bias, correlation combiners and spectrum analyzers, run block by block.
//!
//! One pass serves every excess-noise value: the pump contribution is drawn
//! once for `E = 1` and scaled by `sqrt(E)`. The SNL reference is the same
//! chain driven by the unshaped draws of the same seed (vacuum input), with
//! the interferometers' own vacuum shared. Numerator and reference then carry
//! the same estimation noise wherever the input is close to vacuum, which
//! keeps the normalized traces tight at modest segment counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mzi::{Bias, DelayState, InterferometerConfig, MziStage, PhotocurrentBlock};
use crate::par;
use crate::rng::tag;
use crate::spectra::{Correlation, DetectionChain, FrequencyConvention, OpoCavity, PumpDrive};
use crate::specan::{
    assemble_trace_set, combine_into, normalize_to_snl, CorrelationTraceSet, Normalization,
    PsdEstimate, TraceInputs, WelchAccumulator, Window,
};
use crate::synth::{BeamBlock, CollectiveBlock, CollectiveTargets, QuadratureSynth};

pub const DEFAULT_BLOCK_LEN: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerSettings {
    pub segment_len: usize,
    pub n_segments: usize,
    pub overlap: f64,
    pub window: Window,
}

impl Default for AnalyzerSettings {
    fn default() -> Self {
        Self {
            segment_len: 4096,
            n_segments: 400,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

impl AnalyzerSettings {
    fn accumulator(&self, dt: f64) -> Result<Capped> {
        let acc = WelchAccumulator::new(dt, self.segment_len, self.overlap, self.window)?;
        let remaining = acc.samples_for(self.n_segments);
        Ok(Capped { acc, remaining })
    }
}

/// What drives the interferometers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    TwinBeams,
    /// Coherent light: every quadrature at the SNL.
    Vacuum,
}

/// Optional extra estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Recording {
    /// `p₋` and `q₊` straight from the synthesizer.
    pub collective: bool,
    /// Raw sum and difference ports of the signal interferometers.
    pub ports: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub cavity: OpoCavity,
    pub sigma: f64,
    pub chain: DetectionChain,
    pub convention: FrequencyConvention,
    pub partner_excess: f64,
    pub design_freq_hz: f64,
    pub dt: f64,
    pub short_len: f64,
    pub long_len: f64,
    pub refractive_index: f64,
    pub bias_error: f64,
    pub excess_noise: Vec<f64>,
    pub analyzer: AnalyzerSettings,
    pub seed: u64,
    pub source: Source,
    pub recording: Recording,
    pub block_len: usize,
}

impl PipelineConfig {
    pub fn interferometer(&self, bias: Bias) -> InterferometerConfig {
        InterferometerConfig {
            short_len: self.short_len,
            long_len: self.long_len,
            refractive_index: self.refractive_index,
            arm_transmission: self.chain.fiber_pass,
            bias,
            detector_qe: self.chain.detector_qe,
            bias_error: self.bias_error,
        }
    }

    fn targets(&self) -> Result<CollectiveTargets> {
        match self.source {
            Source::TwinBeams => CollectiveTargets::twin_beams(
                &self.cavity,
                &PumpDrive::new(self.sigma, 0.0)?,
                self.partner_excess,
                self.design_freq_hz,
                self.convention,
            ),
            Source::Vacuum => Ok(CollectiveTargets::vacuum(self.design_freq_hz)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortEstimates {
    pub phase_sum_port: PsdEstimate,
    pub phase_diff_port: PsdEstimate,
    pub amplitude_sum_port: PsdEstimate,
    pub amplitude_diff_port: PsdEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveEstimates {
    pub p_minus: PsdEstimate,
    pub q_plus: Vec<(f64, PsdEstimate)>,
}

/// Unnormalized estimates of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub design_freq_hz: f64,
    pub phase_sum: Vec<(f64, PsdEstimate)>,
    pub phase_reference: PsdEstimate,
    pub intensity_diff: PsdEstimate,
    pub intensity_reference: PsdEstimate,
    pub collective: Option<CollectiveEstimates>,
    pub ports: Option<PortEstimates>,
    pub samples: usize,
}

impl PipelineOutput {
    /// SNL-normalized traces i to v.
    pub fn trace_set(&self) -> Result<CorrelationTraceSet> {
        let snl = normalize_to_snl(
            &self.phase_reference,
            &self.phase_reference,
            Normalization::FlatFit,
        )?;
        let phase_sum = self
            .phase_sum
            .iter()
            .map(|(e, p)| {
                normalize_to_snl(p, &self.phase_reference, Normalization::Pointwise)
                    .map(|n| (*e, n))
            })
            .collect::<Result<Vec<_>>>()?;
        let intensity = normalize_to_snl(
            &self.intensity_diff,
            &self.intensity_reference,
            Normalization::Pointwise,
        )?;
        // amplitude quadratures carry no pump noise: one trace serves every E
        let intensity_diff = phase_sum.iter().map(|(e, _)| (*e, intensity.clone())).collect();
        let required: Vec<f64> = self.phase_sum.iter().map(|(e, _)| *e).collect();
        assemble_trace_set(
            TraceInputs {
                snl: Some(snl),
                phase_sum,
                intensity_diff,
            },
            &required,
            self.design_freq_hz,
        )
    }
}

/// Accumulator that ignores everything past a fixed sample count.
struct Capped {
    acc: WelchAccumulator,
    remaining: usize,
}

impl Capped {
    fn push(&mut self, data: &[f64]) {
        let n = data.len().min(self.remaining);
        if n > 0 {
            self.acc.push(&data[..n]);
            self.remaining -= n;
        }
    }

    fn finish(self) -> Result<PsdEstimate> {
        self.acc.finish()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Input {
    Shaped(f64),
    Raw,
}

/// One combined measurement fed by one input world.
struct Lane {
    input: Input,
    bias: Bias,
    beams: BeamBlock,
    signal_delay: DelayState,
    idler_delay: DelayState,
    signal_out: PhotocurrentBlock,
    idler_out: PhotocurrentBlock,
    combined: Vec<f64>,
    acc: Capped,
    /// Signal-interferometer sum and difference ports.
    ports: Option<[Capped; 2]>,
}

struct Stages {
    signal_phase: MziStage,
    idler_phase: MziStage,
    signal_amp: MziStage,
    idler_amp: MziStage,
}

impl Lane {
    fn run(&mut self, shaped: &CollectiveBlock, raw: &CollectiveBlock, stages: &Stages) {
        match self.input {
            Input::Shaped(e) => shaped.to_beams(e, &mut self.beams),
            Input::Raw => raw.to_beams(0.0, &mut self.beams),
        }
        let (sig, idl, mode) = match self.bias {
            Bias::Phase => (&stages.signal_phase, &stages.idler_phase, Correlation::PhaseSum),
            Bias::Amplitude => (&stages.signal_amp, &stages.idler_amp, Correlation::IntensityDiff),
        };
        let b = &self.beams;
        sig.apply(&b.p_s, &b.q_s, &mut self.signal_delay, &mut self.signal_out);
        idl.apply(&b.p_i, &b.q_i, &mut self.idler_delay, &mut self.idler_out);
        let (x, y) = match mode {
            Correlation::PhaseSum => (&self.signal_out.diff, &self.idler_out.diff),
            Correlation::IntensityDiff => (&self.signal_out.sum, &self.idler_out.sum),
        };
        self.combined.resize(x.len(), 0.0);
        combine_into(x, y, mode, &mut self.combined);
        self.acc.push(&self.combined);
        if let Some([s, d]) = self.ports.as_mut() {
            s.push(&self.signal_out.sum);
            d.push(&self.signal_out.diff);
        }
    }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    if cfg.excess_noise.is_empty() {
        return Err(Error::Configuration("no excess-noise values to simulate".into()));
    }
    if let Some(e) = cfg.excess_noise.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::invalid("excess_noise", format!("{e} must be ≥ 0")));
    }
    if cfg.analyzer.n_segments == 0 {
        return Err(Error::invalid("n_segments", "must be ≥ 1"));
    }
    if cfg.block_len == 0 {
        return Err(Error::invalid("block_len", "must be ≥ 1"));
    }
    let targets = cfg.targets()?;
    let phase_cfg = cfg.interferometer(Bias::Phase);
    let amp_cfg = cfg.interferometer(Bias::Amplitude);
    let mut stages = Stages {
        signal_phase: MziStage::new(phase_cfg, cfg.dt, cfg.seed, tag::MZI_SIGNAL_PHASE)?,
        idler_phase: MziStage::new(phase_cfg, cfg.dt, cfg.seed, tag::MZI_IDLER_PHASE)?,
        signal_amp: MziStage::new(amp_cfg, cfg.dt, cfg.seed, tag::MZI_SIGNAL_AMP)?,
        idler_amp: MziStage::new(amp_cfg, cfg.dt, cfg.seed, tag::MZI_IDLER_AMP)?,
    };
    let mut synth = QuadratureSynth::new(&targets, cfg.dt, cfg.seed)?;

    let lane = |input, bias, ports: bool| -> Result<Lane> {
        Ok(Lane {
            input,
            bias,
            beams: BeamBlock::default(),
            signal_delay: DelayState::default(),
            idler_delay: DelayState::default(),
            signal_out: PhotocurrentBlock::default(),
            idler_out: PhotocurrentBlock::default(),
            combined: Vec::new(),
            acc: cfg.analyzer.accumulator(cfg.dt)?,
            ports: if ports {
                Some([
                    cfg.analyzer.accumulator(cfg.dt)?,
                    cfg.analyzer.accumulator(cfg.dt)?,
                ])
            } else {
                None
            },
        })
    };
    let ports = cfg.recording.ports;
    let mut lanes = Vec::new();
    for (i, &e) in cfg.excess_noise.iter().enumerate() {
        lanes.push(lane(Input::Shaped(e), Bias::Phase, ports && i == 0)?);
    }
    lanes.push(lane(Input::Raw, Bias::Phase, false)?);
    lanes.push(lane(Input::Shaped(0.0), Bias::Amplitude, ports)?);
    lanes.push(lane(Input::Raw, Bias::Amplitude, false)?);

    let mut collective = if cfg.recording.collective {
        let mut q = Vec::new();
        for _ in &cfg.excess_noise {
            q.push(cfg.analyzer.accumulator(cfg.dt)?);
        }
        Some((cfg.analyzer.accumulator(cfg.dt)?, q, Vec::new()))
    } else {
        None
    };

    let delay = stages.signal_phase.delay_samples();
    let total = lanes[0].acc.acc.samples_for(cfg.analyzer.n_segments) + delay;
    let mut shaped = CollectiveBlock::default();
    let mut raw = CollectiveBlock::default();
    let mut done = 0;
    while done < total {
        let n = cfg.block_len.min(total - done);
        synth.fill(n, &mut shaped, Some(&mut raw));
        stages.signal_phase.draw(n);
        stages.idler_phase.draw(n);
        stages.signal_amp.draw(n);
        stages.idler_amp.draw(n);
        par::for_each_mut(&mut lanes, |l| l.run(&shaped, &raw, &stages));
        if let Some((p_minus, q_plus, buf)) = collective.as_mut() {
            p_minus.push(&shaped.p_minus);
            for (acc, &e) in q_plus.iter_mut().zip(&cfg.excess_noise) {
                let g = e.sqrt();
                buf.clear();
                buf.extend(shaped.q_plus.iter().zip(&shaped.pump_unit).map(|(q, u)| q + g * u));
                acc.push(buf);
            }
        }
        done += n;
    }

    let mut lanes = lanes.into_iter();
    let mut port_parts = Vec::new();
    let mut phase_sum = Vec::new();
    for &e in &cfg.excess_noise {
        let l = lanes.next().expect("lane per E");
        if let Some([s, d]) = l.ports {
            port_parts.push(s.finish()?);
            port_parts.push(d.finish()?);
        }
        phase_sum.push((e, l.acc.finish()?));
    }
    let phase_reference = lanes.next().expect("phase reference").acc.finish()?;
    let amp = lanes.next().expect("amplitude lane");
    if let Some([s, d]) = amp.ports {
        port_parts.push(s.finish()?);
        port_parts.push(d.finish()?);
    }
    let intensity_diff = amp.acc.finish()?;
    let intensity_reference = lanes.next().expect("amplitude reference").acc.finish()?;
    let ports = if port_parts.len() == 4 {
        let mut it = port_parts.into_iter();
        Some(PortEstimates {
            phase_sum_port: it.next().expect("4"),
            phase_diff_port: it.next().expect("4"),
            amplitude_sum_port: it.next().expect("4"),
            amplitude_diff_port: it.next().expect("4"),
        })
    } else {
        None
    };
    let collective = match collective {
        Some((p, q, _)) => Some(CollectiveEstimates {
            p_minus: p.finish()?,
            q_plus: cfg
                .excess_noise
                .iter()
                .zip(q)
                .map(|(e, a)| a.finish().map(|est| (*e, est)))
                .collect::<Result<Vec<_>>>()?,
        }),
        None => None,
    };
    Ok(PipelineOutput {
        design_freq_hz: cfg.design_freq_hz,
        phase_sum,
        phase_reference,
        intensity_diff,
        intensity_reference,
        collective,
        ports,
        samples: total,
    })
}
