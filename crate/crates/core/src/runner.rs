//! Batch runs: analytic traces, simulated measurements and file emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format, PresetSpec, RunMode};
use crate::error::{Error, Result};
use crate::mzi::Bias;
use crate::output::{
    residuals_csv, roman, traces_csv, traces_svg, write_file, ResidualRecord, TraceRecord,
    RESULTS_SCHEMA_VERSION,
};
use crate::par;
use crate::pipeline::{run_pipeline, PipelineOutput, Recording};
use crate::specan::{CorrelationTraceSet, PsdEstimate, READOUT_BINS};
use crate::spectra::{
    intensity_diff_spectrum, intensity_diff_value, phase_sum_spectrum, phase_sum_value,
    FrequencyGrid, PumpDrive, TraceKind,
};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Design-frequency summary of one simulated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub label: String,
    pub kind: TraceKind,
    #[serde(rename = "E")]
    pub excess_noise: Option<f64>,
    pub freq_hz: f64,
    pub simulated: f64,
    pub published: f64,
    pub below_snl: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub label: String,
    pub preset: PresetSpec,
    pub output: PipelineOutput,
    pub traces: CorrelationTraceSet,
}

impl SimulationResult {
    /// Traces i to v in plot order: label, kind, `E`, estimate.
    pub fn labelled(&self) -> Vec<(String, TraceKind, Option<f64>, &PsdEstimate)> {
        let t = &self.traces;
        let mut out = vec![(roman(1), TraceKind::Snl, None, &t.snl)];
        for (e, est) in &t.phase_sum {
            out.push((roman(out.len() + 1), TraceKind::PhaseSum, Some(*e), est));
        }
        out.push((roman(out.len() + 1), TraceKind::IntensityDiff, None, &t.intensity_diff));
        out
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.labelled()
            .into_iter()
            .map(|(label, kind, e, est)| TraceRecord::from_estimate(label, kind, e, est))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResults {
    pub config: ExperimentConfig,
    pub analytic: Option<Vec<TraceRecord>>,
    pub simulations: Vec<SimulationResult>,
    pub timings: Vec<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Written files, relative to the output directory.
    pub outputs: Vec<PathBuf>,
    /// Absent from the results document so that it stays byte-reproducible.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<Timing>,
}

/// Intensity difference, then phase sum per `E` in ascending order.
pub fn analytic_traces(cfg: &ExperimentConfig, grid: &FrequencyGrid) -> Result<Vec<TraceRecord>> {
    let cavity = cfg.cavity()?;
    let chain = cfg.chain()?;
    let sigma = cfg.sigma()?;
    let mut out = vec![TraceRecord::from_analytic(
        roman(1),
        &intensity_diff_spectrum(&cavity, &chain, grid)?,
    )];
    let mut sweep = cfg.excess_noise.clone();
    sweep.sort_by(f64::total_cmp);
    for e in sweep {
        let t = phase_sum_spectrum(&cavity, &PumpDrive::new(sigma, e)?, &chain, grid)?;
        out.push(TraceRecord::from_analytic(roman(out.len() + 1), &t));
    }
    Ok(out)
}

pub fn simulate_preset(
    cfg: &ExperimentConfig,
    preset: &PresetSpec,
    recording: Recording,
) -> Result<SimulationResult> {
    let output = run_pipeline(&cfg.pipeline(preset, recording)?)?;
    let traces = output.trace_set()?;
    Ok(SimulationResult {
        label: preset.label(),
        preset: preset.clone(),
        output,
        traces,
    })
}

/// Validates and computes everything; writes nothing.
pub fn compute(cfg: &ExperimentConfig) -> Result<RunResults> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let analytic = if cfg.mode.analytic() {
        let t = Instant::now();
        let traces = analytic_traces(cfg, &cfg.grid()?)?;
        timings.push(Timing {
            stage: "analytic".into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Some(traces)
    } else {
        None
    };
    let simulations = if cfg.mode.simulate() {
        let runs = par::map_collect(&cfg.presets, |p| {
            let t = Instant::now();
            simulate_preset(cfg, p, Recording::default()).map(|r| (r, t.elapsed()))
        });
        let mut sims = Vec::new();
        for r in runs {
            let (sim, dt) = r?;
            timings.push(Timing {
                stage: format!("simulate {}", sim.label),
                seconds: dt.as_secs_f64(),
            });
            sims.push(sim);
        }
        sims
    } else {
        Vec::new()
    };
    Ok(RunResults {
        config: cfg.clone(),
        analytic,
        simulations,
        timings,
    })
}

/// Design-frequency readouts of a simulated preset against the published
/// formulas.
pub fn readouts(cfg: &ExperimentConfig, sim: &SimulationResult) -> Result<Vec<Readout>> {
    let cavity = cfg.cavity()?;
    let chain = cfg.chain()?;
    let sigma = cfg.sigma()?;
    let f = sim.preset.analysis_freq_hz;
    let w = cfg.convention.omega(f);
    let mut out = Vec::new();
    for (label, kind, e, est) in sim.labelled() {
        let published = match kind {
            TraceKind::Snl => 1.0,
            TraceKind::PhaseSum => {
                let pump = PumpDrive::new(sigma, e.expect("phase sum carries E"))?;
                phase_sum_value(&cavity, &pump, chain.eta_phase(), w)
            }
            TraceKind::IntensityDiff => intensity_diff_value(&cavity, chain.eta_amp(), w),
            TraceKind::PsdRaw => continue,
        };
        let simulated = est.readout(f, READOUT_BINS);
        out.push(Readout {
            label,
            kind,
            excess_noise: e,
            freq_hz: f,
            simulated,
            published,
            below_snl: simulated < 1.0,
        });
    }
    Ok(out)
}

/// Published formulas on the simulation bins, with and without the
/// interferometer transfer on the phase sum.
pub fn residuals(cfg: &ExperimentConfig, sim: &SimulationResult) -> Result<Vec<ResidualRecord>> {
    let cavity = cfg.cavity()?;
    let chain = cfg.chain()?;
    let sigma = cfg.sigma()?;
    let mzi = cfg.pipeline(&sim.preset, Recording::default())?.interferometer(Bias::Phase);
    let mut out = Vec::new();
    for rec in sim.records() {
        let published: Vec<f64> = match rec.kind {
            TraceKind::PhaseSum => {
                let pump = PumpDrive::new(sigma, rec.excess_noise.expect("E"))?;
                rec.freqs_hz
                    .iter()
                    .map(|f| phase_sum_value(&cavity, &pump, chain.eta_phase(), cfg.convention.omega(*f)))
                    .collect()
            }
            TraceKind::IntensityDiff => rec
                .freqs_hz
                .iter()
                .map(|f| intensity_diff_value(&cavity, chain.eta_amp(), cfg.convention.omega(*f)))
                .collect(),
            _ => continue,
        };
        let expected = match rec.kind {
            TraceKind::PhaseSum => rec
                .freqs_hz
                .iter()
                .zip(&published)
                .map(|(f, s)| 1.0 - mzi.phase_transfer(*f) * (1.0 - s))
                .collect(),
            _ => published.clone(),
        };
        out.push(ResidualRecord {
            kind: rec.kind,
            excess_noise: rec.excess_noise,
            freqs_hz: rec.freqs_hz,
            simulated: rec.values,
            published,
            expected,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct SimulationDoc<'a> {
    label: &'a str,
    analysis_freq_hz: f64,
    n_segments: usize,
    segment_len: usize,
    samples: usize,
    readouts: Vec<Readout>,
    traces: Vec<TraceRecord>,
}

#[derive(Serialize)]
struct ResultsDoc<'a> {
    schema_version: u32,
    manifest: &'a RunManifest,
    analytic: Option<&'a [TraceRecord]>,
    simulations: Vec<SimulationDoc<'a>>,
}

/// Writes the requested formats into `dir` and returns the manifest.
pub fn emit(results: &RunResults, dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = &results.config;
    let title = cfg.name.clone().unwrap_or_else(|| "twin-beam correlations".into());
    let wants = |f: Format| cfg.formats.contains(&f);
    let mut outputs = Vec::new();
    if let Some(traces) = &results.analytic {
        if wants(Format::Csv) {
            outputs.push(write_file(dir, "analytic.csv", &traces_csv(traces))?);
        }
        if wants(Format::Svg) {
            outputs.push(write_file(dir, "analytic.svg", &traces_svg(&format!("{title}: analytic"), traces))?);
        }
    }
    let mut sim_docs = Vec::new();
    for sim in &results.simulations {
        let records = sim.records();
        if wants(Format::Csv) {
            let name = format!("simulated_{}.csv", sim.label);
            outputs.push(write_file(dir, &name, &traces_csv(&records))?);
            if cfg.mode == RunMode::Both {
                let name = format!("residuals_{}.csv", sim.label);
                outputs.push(write_file(dir, &name, &residuals_csv(&residuals(cfg, sim)?))?);
            }
        }
        if wants(Format::Svg) {
            let name = format!("simulated_{}.svg", sim.label);
            let plot_title = format!("{title}: simulated at {}", sim.label);
            outputs.push(write_file(dir, &name, &traces_svg(&plot_title, &records))?);
        }
        sim_docs.push(SimulationDoc {
            label: &sim.label,
            analysis_freq_hz: sim.preset.analysis_freq_hz,
            n_segments: sim.traces.snl.n_segments,
            segment_len: sim.traces.snl.segment_len,
            samples: sim.output.samples,
            readouts: readouts(cfg, sim)?,
            traces: records,
        });
    }
    if wants(Format::Json) {
        outputs.push(PathBuf::from("results.json"));
    }
    outputs.push(PathBuf::from("run_manifest.json"));
    let mut manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        seed: cfg.seed,
        config: cfg.clone(),
        outputs,
        timings: Vec::new(),
    };
    if wants(Format::Json) {
        let doc = ResultsDoc {
            schema_version: RESULTS_SCHEMA_VERSION,
            manifest: &manifest,
            analytic: results.analytic.as_deref(),
            simulations: sim_docs,
        };
        let text = serde_json::to_string_pretty(&doc)? + "\n";
        write_file(dir, "results.json", &text)?;
    }
    manifest.timings = results.timings.clone();
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    write_file(dir, "run_manifest.json", &text)?;
    Ok(manifest)
}

/// Computes and writes; the output directory comes from the config
/// (default `out`).
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let results = compute(cfg)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    emit(&results, &dir)
}
