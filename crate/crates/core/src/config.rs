//! Experiment configuration files.
//!
//! Validation collects every problem before anything runs, each message
//! prefixed by the JSON path of the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mzi::{design_arm_length, Bias, InterferometerConfig};
use crate::pipeline::{AnalyzerSettings, PipelineConfig, Recording, Source, DEFAULT_BLOCK_LEN};
use crate::spectra::{DetectionChain, FrequencyConvention, FrequencyGrid, OpoCavity, PumpDrive};
use crate::specan::welch::MIN_SEGMENT_LEN;

pub const SCHEMA_VERSION: u32 = 1;

/// Bundled presets, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("analytic", include_str!("../presets/analytic.json")),
    ("measure_2MHz", include_str!("../presets/measure_2MHz.json")),
    ("measure_5MHz", include_str!("../presets/measure_5MHz.json")),
    ("measure_10MHz", include_str!("../presets/measure_10MHz.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Analytic,
    Simulate,
    Both,
}

impl RunMode {
    pub fn analytic(self) -> bool {
        matches!(self, RunMode::Analytic | RunMode::Both)
    }

    pub fn simulate(self) -> bool {
        matches!(self, RunMode::Simulate | RunMode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySpec {
    pub transmission: f64,
    pub extra_loss: f64,
    pub round_trip_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PumpSpec {
    Sigma {
        sigma: f64,
    },
    Powers {
        power_w: f64,
        threshold_w: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub detector_qe: f64,
    pub fiber_pass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List {
        frequencies_hz: Vec<f64>,
    },
    Log {
        start_hz: f64,
        stop_hz: f64,
        points: usize,
    },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Log {
            start_hz: 1.0e5,
            stop_hz: 1.0e7,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_partner_excess")]
    pub partner_excess: f64,
    #[serde(default)]
    pub analyzer: AnalyzerSettings,
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default)]
    pub source: Source,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            dt_s: default_dt(),
            partner_excess: default_partner_excess(),
            analyzer: AnalyzerSettings::default(),
            block_len: default_block_len(),
            source: Source::default(),
        }
    }
}

fn default_dt() -> f64 {
    5e-9
}

fn default_partner_excess() -> f64 {
    1.0
}

fn default_block_len() -> usize {
    DEFAULT_BLOCK_LEN
}

fn default_short_len() -> f64 {
    2.0
}

fn default_index() -> f64 {
    1.55
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub analysis_freq_hz: f64,
    #[serde(default = "default_short_len")]
    pub short_len_m: f64,
    /// Defaults to the short arm plus the designed length difference.
    #[serde(default)]
    pub long_len_m: Option<f64>,
    #[serde(default = "default_index")]
    pub refractive_index: f64,
    #[serde(default)]
    pub bias_error_rad: f64,
    /// Overrides the top-level sweep for this preset.
    #[serde(default)]
    pub excess_noise: Option<Vec<f64>>,
}

impl PresetSpec {
    pub fn label(&self) -> String {
        let f = self.analysis_freq_hz;
        if f >= 1e6 && (f / 1e6).fract() == 0.0 {
            format!("{}MHz", f / 1e6)
        } else if f >= 1e3 && (f / 1e3).fract() == 0.0 {
            format!("{}kHz", f / 1e3)
        } else {
            format!("{f}Hz")
        }
    }

    fn long_len(&self) -> Result<f64> {
        match self.long_len_m {
            Some(l) => Ok(l),
            None => Ok(self.short_len_m
                + design_arm_length(self.analysis_freq_hz, self.refractive_index)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub mode: RunMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub convention: FrequencyConvention,
    pub cavity: CavitySpec,
    pub pump: PumpSpec,
    pub chain: ChainSpec,
    #[serde(default = "default_sweep")]
    pub excess_noise: Vec<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub presets: Vec<PresetSpec>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

fn default_sweep() -> Vec<f64> {
    vec![0.0, 0.33, 1.0]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Validation(vec![format!("cannot read config {}: {e}", path.display())])
        })?;
        Self::from_json(&text)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_json(text).expect("bundled presets parse"))
    }

    /// A bundled name or a path to a JSON file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        match Self::bundled(name_or_path) {
            Some(cfg) => Ok(cfg),
            None => Self::from_path(Path::new(name_or_path)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn cavity(&self) -> Result<OpoCavity> {
        OpoCavity::new(
            self.cavity.transmission,
            self.cavity.extra_loss,
            self.cavity.round_trip_time_s,
        )
    }

    pub fn sigma(&self) -> Result<f64> {
        match self.pump {
            PumpSpec::Sigma { sigma } => PumpDrive::new(sigma, 0.0).map(|p| p.sigma),
            PumpSpec::Powers {
                power_w,
                threshold_w,
            } => PumpDrive::from_powers(power_w, threshold_w, 0.0).map(|p| p.sigma),
        }
    }

    pub fn chain(&self) -> Result<DetectionChain> {
        DetectionChain::new(self.chain.detector_qe, self.chain.fiber_pass)
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        match &self.grid {
            GridSpec::List { frequencies_hz } => {
                FrequencyGrid::new(frequencies_hz.clone(), self.convention)
            }
            GridSpec::Log {
                start_hz,
                stop_hz,
                points,
            } => FrequencyGrid::logspace(*start_hz, *stop_hz, *points, self.convention),
        }
    }

    pub fn sweep<'a>(&'a self, preset: &'a PresetSpec) -> &'a [f64] {
        preset.excess_noise.as_deref().unwrap_or(&self.excess_noise)
    }

    /// Every problem found, or `Ok` when the config can run.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut check = |field: &str, r: Result<()>| {
            if let Err(e) = r {
                errs.push(format!("{field}: {e}"));
            }
        };
        if self.schema_version != SCHEMA_VERSION {
            check(
                "schema_version",
                Err(Error::Configuration(format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ))),
            );
        }
        if self.formats.is_empty() {
            check("formats", Err(Error::Configuration("no output format".into())));
        }
        check("cavity", self.cavity().map(|_| ()));
        check("pump", self.sigma().map(|_| ()));
        check("chain", self.chain().map(|_| ()));
        check("excess_noise", check_sweep(&self.excess_noise));
        if self.mode.analytic() {
            check("grid", self.grid().map(|_| ()));
        }
        if self.mode.simulate() {
            let sim = &self.simulation;
            check("simulation.dt_s", positive(sim.dt_s));
            if !(sim.partner_excess >= 1.0 && sim.partner_excess.is_finite()) {
                check(
                    "simulation.partner_excess",
                    Err(Error::invalid("partner_excess", "must be ≥ 1")),
                );
            }
            check("simulation.analyzer", check_analyzer(&sim.analyzer));
            if sim.block_len == 0 {
                check("simulation.block_len", Err(Error::invalid("block_len", "must be ≥ 1")));
            }
            if self.presets.is_empty() {
                check(
                    "presets",
                    Err(Error::Configuration("simulation needs at least one preset".into())),
                );
            }
            for (i, p) in self.presets.iter().enumerate() {
                let at = |f: &str| format!("presets[{i}].{f}");
                if let Some(s) = &p.excess_noise {
                    check(&at("excess_noise"), check_sweep(s));
                }
                let limit = 0.25 / sim.dt_s;
                if !(p.analysis_freq_hz > 0.0 && p.analysis_freq_hz <= limit) {
                    check(
                        &at("analysis_freq_hz"),
                        Err(Error::Configuration(format!(
                            "{} Hz must lie in (0, 1/(4·dt) = {limit} Hz]",
                            p.analysis_freq_hz
                        ))),
                    );
                    continue;
                }
                let long = match p.long_len() {
                    Ok(l) => l,
                    Err(e) => {
                        check(&at("refractive_index"), Err(e));
                        continue;
                    }
                };
                let mzi = InterferometerConfig {
                    short_len: p.short_len_m,
                    long_len: long,
                    refractive_index: p.refractive_index,
                    arm_transmission: self.chain.fiber_pass,
                    bias: Bias::Phase,
                    detector_qe: self.chain.detector_qe,
                    bias_error: p.bias_error_rad,
                };
                let field = if p.long_len_m.is_some() {
                    "long_len_m"
                } else {
                    "short_len_m"
                };
                match mzi.validate() {
                    Err(e) => check(&at(field), Err(e)),
                    Ok(()) if sim.dt_s > 0.0 => {
                        check(&at(field), mzi.delay_samples(sim.dt_s).map(|_| ()))
                    }
                    Ok(()) => {}
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Pipeline settings for one preset; call after [`validate`](Self::validate).
    pub fn pipeline(&self, preset: &PresetSpec, recording: Recording) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            cavity: self.cavity()?,
            sigma: self.sigma()?,
            chain: self.chain()?,
            convention: self.convention,
            partner_excess: self.simulation.partner_excess,
            design_freq_hz: preset.analysis_freq_hz,
            dt: self.simulation.dt_s,
            short_len: preset.short_len_m,
            long_len: preset.long_len()?,
            refractive_index: preset.refractive_index,
            bias_error: preset.bias_error_rad,
            excess_noise: self.sweep(preset).to_vec(),
            analyzer: self.simulation.analyzer,
            seed: self.seed,
            source: self.simulation.source,
            recording,
            block_len: self.simulation.block_len,
        })
    }
}

fn positive(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("value", format!("{v} must be positive")))
    }
}

fn check_sweep(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("excess_noise", "list is empty"));
    }
    if let Some(e) = values.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::invalid("excess_noise", format!("{e} must be ≥ 0")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("excess_noise", "duplicate values"));
    }
    Ok(())
}

fn check_analyzer(a: &AnalyzerSettings) -> Result<()> {
    if a.segment_len < MIN_SEGMENT_LEN || !a.segment_len.is_power_of_two() {
        return Err(Error::invalid(
            "segment_len",
            format!("{} must be a power of two ≥ {MIN_SEGMENT_LEN}", a.segment_len),
        ));
    }
    if a.n_segments < 2 {
        return Err(Error::invalid("n_segments", "must be ≥ 2"));
    }
    if !(0.0..1.0).contains(&a.overlap) {
        return Err(Error::invalid("overlap", format!("{} not in [0, 1)", a.overlap)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_presets_validate() {
        for (name, _) in BUNDLED {
            let cfg = ExperimentConfig::bundled(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn designed_arms_are_sample_aligned() {
        for name in ["measure_2MHz", "measure_5MHz", "measure_10MHz"] {
            let cfg = ExperimentConfig::bundled(name).unwrap();
            let p = &cfg.presets[0];
            let pipe = cfg.pipeline(p, Recording::default()).unwrap();
            let d = pipe.interferometer(Bias::Phase).delay_samples(pipe.dt).unwrap();
            assert_eq!(d as f64, 0.5 / p.analysis_freq_hz / pipe.dt);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(BUNDLED[0].1).unwrap();
        v["cavity"]["finesse"] = 150.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(BUNDLED[0].1).unwrap();
        v["colour"] = "red".into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn all_problems_reported_at_once() {
        let mut cfg = ExperimentConfig::bundled("measure_2MHz").unwrap();
        cfg.cavity.transmission = 1.5;
        cfg.pump = PumpSpec::Sigma { sigma: 0.8 };
        cfg.presets[0].long_len_m = Some(50.0);
        cfg.simulation.analyzer.segment_len = 1000;
        match cfg.validate() {
            Err(Error::Validation(msgs)) => {
                let joined = msgs.join("\n");
                for field in ["cavity", "pump", "presets[0].long_len_m", "simulation.analyzer"] {
                    assert!(joined.contains(field), "{field} missing from\n{joined}");
                }
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_frequency_list_is_invalid() {
        let mut cfg = ExperimentConfig::bundled("analytic").unwrap();
        cfg.grid = GridSpec::List {
            frequencies_hz: vec![],
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("grid"));
    }

    #[test]
    fn sigma_from_powers_block() {
        let mut cfg = ExperimentConfig::bundled("analytic").unwrap();
        cfg.pump = PumpSpec::Powers {
            power_w: 0.194,
            threshold_w: 0.130,
        };
        assert!((cfg.sigma().unwrap() - (0.194f64 / 0.130).sqrt()).abs() < 1e-15);
        cfg.pump = PumpSpec::Powers {
            power_w: 0.1,
            threshold_w: 0.130,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn preset_labels() {
        let cfg = ExperimentConfig::bundled("measure_5MHz").unwrap();
        assert_eq!(cfg.presets[0].label(), "5MHz");
    }
}
