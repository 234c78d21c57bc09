//! Closed-form twin-beam correlation spectra of an above-threshold NOPO.
//!
//! All spectra are one-sided, dimensionless and normalized to the shot-noise
//! limit (SNL = 1). The intensity-difference spectrum is
//!
//! ```text
//! S_p(ω) = 1 − η · T·T′ / (T′² + ω²τ²)
//! ```
//!
//! and the phase-sum spectrum with a white excess pump phase noise `E` is
//!
//! ```text
//! S_q(ω) = 1 − η′ · T·T′ / (T′²σ² + ω²τ²) + η′ · 2·T·T′·(σ − 1)·E / (T′²σ² + ω²τ²)
//! ```
//!
//! with `T′ = T + δ`. Both have the shape `1 − A / (B² + ω²τ²)`, which is
//! what [`LorentzianDip`] captures and what the noise synthesizer factorizes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output-coupled NOPO cavity for the signal/idler modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpoCavity {
    /// Output-mirror power transmission `T`.
    pub transmission: f64,
    /// Extra intracavity round-trip loss `δ`.
    pub extra_loss: f64,
    /// Round-trip time `τ` in seconds.
    pub round_trip_time: f64,
}

impl OpoCavity {
    pub fn new(transmission: f64, extra_loss: f64, round_trip_time: f64) -> Result<Self> {
        let cavity = Self {
            transmission,
            extra_loss,
            round_trip_time,
        };
        cavity.validate()?;
        Ok(cavity)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            transmission: t,
            extra_loss: d,
            round_trip_time: tau,
        } = *self;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid("transmission", format!("{t} not in (0, 1)")));
        }
        if !(0.0..1.0).contains(&d) {
            return Err(Error::invalid("extra_loss", format!("{d} not in [0, 1)")));
        }
        if t + d >= 1.0 {
            return Err(Error::invalid(
                "extra_loss",
                format!("total loss T + δ = {} must stay below 1", t + d),
            ));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(
                "round_trip_time",
                format!("{tau} must be positive"),
            ));
        }
        Ok(())
    }

    /// Total round-trip loss `T′ = T + δ`.
    pub fn total_loss(&self) -> f64 {
        self.transmission + self.extra_loss
    }

    /// Finesse `2π / T′`.
    pub fn finesse(&self) -> f64 {
        2.0 * PI / self.total_loss()
    }

    /// Field decay rate `T′/τ` in 1/s; the Lorentzian half-width in rad/s.
    pub fn decay_rate(&self) -> f64 {
        self.total_loss() / self.round_trip_time
    }

    /// Escape fraction `T / T′`.
    pub fn escape_efficiency(&self) -> f64 {
        self.transmission / self.total_loss()
    }
}

/// Pump drive of the NOPO: pump parameter `σ = sqrt(P/P₀)` and the
/// normalized white excess phase noise `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpDrive {
    pub sigma: f64,
    pub excess_noise: f64,
}

impl PumpDrive {
    pub fn new(sigma: f64, excess_noise: f64) -> Result<Self> {
        let pump = Self {
            sigma,
            excess_noise,
        };
        pump.validate()?;
        Ok(pump)
    }

    pub fn from_powers(power: f64, threshold: f64, excess_noise: f64) -> Result<Self> {
        Self::new(sigma_from_powers(power, threshold)?, excess_noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 1.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "pump parameter σ = {} is below threshold (σ ≥ 1 required)",
                self.sigma
            )));
        }
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            return Err(Error::invalid(
                "excess_noise",
                format!("{} must be finite and ≥ 0", self.excess_noise),
            ));
        }
        Ok(())
    }

    pub fn with_excess_noise(self, excess_noise: f64) -> Result<Self> {
        Self::new(self.sigma, excess_noise)
    }
}

/// Detection efficiencies. The intensity measurement passes one fiber arm,
/// the phase measurement is charged for two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    pub detector_qe: f64,
    pub fiber_pass: f64,
}

impl DetectionChain {
    pub fn new(detector_qe: f64, fiber_pass: f64) -> Result<Self> {
        let chain = Self {
            detector_qe,
            fiber_pass,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("detector_qe", self.detector_qe),
            ("fiber_pass", self.fiber_pass),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("{v} not in (0, 1]")));
            }
        }
        Ok(())
    }

    /// `η` for the intensity-difference measurement.
    pub fn eta_amp(&self) -> f64 {
        self.detector_qe * self.fiber_pass
    }

    /// `η′` for the phase-sum measurement.
    pub fn eta_phase(&self) -> f64 {
        self.detector_qe * self.fiber_pass * self.fiber_pass
    }
}

/// How a grid frequency in hertz maps onto the `ω` of the spectrum formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// `ω = 2πf`.
    #[default]
    Angular,
    /// `ω = f`.
    Ordinary,
}

impl FrequencyConvention {
    pub fn omega(self, freq_hz: f64) -> f64 {
        match self {
            FrequencyConvention::Angular => 2.0 * PI * freq_hz,
            FrequencyConvention::Ordinary => freq_hz,
        }
    }

    /// Inverse of [`omega`](Self::omega).
    pub fn freq_hz(self, omega: f64) -> f64 {
        match self {
            FrequencyConvention::Angular => omega / (2.0 * PI),
            FrequencyConvention::Ordinary => omega,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    values: Vec<f64>,
    convention: FrequencyConvention,
}

impl FrequencyGrid {
    pub fn new(values: Vec<f64>, convention: FrequencyConvention) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("grid", "frequency list is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "grid",
                format!("frequency {bad} is not positive and finite"),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid", "frequencies must be strictly increasing"));
        }
        Ok(Self { values, convention })
    }

    /// `points` logarithmically spaced frequencies from `start` to `stop` inclusive.
    pub fn logspace(
        start: f64,
        stop: f64,
        points: usize,
        convention: FrequencyConvention,
    ) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid("grid", "a log grid needs at least 2 points"));
        }
        if !(start > 0.0 && stop > start) {
            return Err(Error::invalid(
                "grid",
                format!("need 0 < start < stop, got {start}..{stop}"),
            ));
        }
        let (a, b) = (start.ln(), stop.ln());
        let step = (b - a) / (points - 1) as f64;
        let mut values: Vec<f64> = (0..points).map(|i| (a + step * i as f64).exp()).collect();
        values[0] = start;
        values[points - 1] = stop;
        Self::new(values, convention)
    }

    /// 200 log-spaced points over 0.1–10 MHz.
    pub fn default_analytic() -> Self {
        Self::logspace(1.0e5, 1.0e7, 200, FrequencyConvention::Angular)
            .expect("static grid is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn convention(&self) -> FrequencyConvention {
        self.convention
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|&f| self.convention.omega(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    IntensityDiff,
    PhaseSum,
    Snl,
    PsdRaw,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::IntensityDiff => "intensity_diff",
            TraceKind::PhaseSum => "phase_sum",
            TraceKind::Snl => "snl",
            TraceKind::PsdRaw => "psd_raw",
        }
    }
}

impl std::fmt::Display for TraceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The two correlation observables with a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correlation {
    IntensityDiff,
    PhaseSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Decibel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamsSnapshot {
    pub cavity: Option<OpoCavity>,
    pub pump: Option<PumpDrive>,
    pub chain: Option<DetectionChain>,
    /// Efficiency applied to the lossless spectrum, when one was.
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrumTrace {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub kind: TraceKind,
    pub scale: Scale,
    pub params: ParamsSnapshot,
}

impl NoiseSpectrumTrace {
    pub fn excess_noise(&self) -> Option<f64> {
        match self.kind {
            TraceKind::PhaseSum => self.params.pump.map(|p| p.excess_noise),
            _ => None,
        }
    }
}

/// `1 − depth / (width² + ω²τ²)`: the common shape of both correlation spectra
/// before detection loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianDip {
    /// `A`; may be negative when excess noise lifts the spectrum above the SNL.
    pub depth: f64,
    /// `B` (dimensionless, > 0).
    pub width: f64,
    pub round_trip_time: f64,
}

impl LorentzianDip {
    /// Lossless intensity difference: `A = TT′`, `B = T′`.
    pub fn intensity_diff(cavity: &OpoCavity) -> Self {
        let tp = cavity.total_loss();
        Self {
            depth: cavity.transmission * tp,
            width: tp,
            round_trip_time: cavity.round_trip_time,
        }
    }

    /// Lossless phase sum: `A = TT′(1 − 2(σ−1)E)`, `B = T′σ`.
    pub fn phase_sum(cavity: &OpoCavity, pump: &PumpDrive) -> Self {
        let tp = cavity.total_loss();
        let tt = cavity.transmission * tp;
        Self {
            depth: tt * (1.0 - 2.0 * (pump.sigma - 1.0) * pump.excess_noise),
            width: tp * pump.sigma,
            round_trip_time: cavity.round_trip_time,
        }
    }

    pub fn value(&self, omega: f64) -> f64 {
        let wt = omega * self.round_trip_time;
        1.0 - self.depth / (self.width * self.width + wt * wt)
    }
}

/// Intensity-difference value at one angular argument `omega`.
pub fn intensity_diff_value(cavity: &OpoCavity, eta: f64, omega: f64) -> f64 {
    let tp = cavity.total_loss();
    let wt = omega * cavity.round_trip_time;
    1.0 - eta * cavity.transmission * tp / (tp * tp + wt * wt)
}

/// Phase-sum value at one angular argument `omega`, term by term.
pub fn phase_sum_value(cavity: &OpoCavity, pump: &PumpDrive, eta: f64, omega: f64) -> f64 {
    let t = cavity.transmission;
    let tp = cavity.total_loss();
    let wt = omega * cavity.round_trip_time;
    let denom = tp * tp * pump.sigma * pump.sigma + wt * wt;
    1.0 - eta * t * tp / denom + eta * 2.0 * t * tp * (pump.sigma - 1.0) * pump.excess_noise / denom
}

fn checked_trace(
    grid: &FrequencyGrid,
    values: Vec<f64>,
    kind: TraceKind,
    params: ParamsSnapshot,
) -> Result<NoiseSpectrumTrace> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("spectrum", format!("non-finite value {bad}")));
    }
    Ok(NoiseSpectrumTrace {
        grid: grid.clone(),
        values,
        kind,
        scale: Scale::Linear,
        params,
    })
}

pub fn intensity_diff_spectrum(
    cavity: &OpoCavity,
    chain: &DetectionChain,
    grid: &FrequencyGrid,
) -> Result<NoiseSpectrumTrace> {
    cavity.validate()?;
    chain.validate()?;
    let eta = chain.eta_amp();
    let values = grid
        .omegas()
        .map(|w| intensity_diff_value(cavity, eta, w))
        .collect();
    checked_trace(
        grid,
        values,
        TraceKind::IntensityDiff,
        ParamsSnapshot {
            cavity: Some(*cavity),
            pump: None,
            chain: Some(*chain),
            efficiency: Some(eta),
        },
    )
}

pub fn phase_sum_spectrum(
    cavity: &OpoCavity,
    pump: &PumpDrive,
    chain: &DetectionChain,
    grid: &FrequencyGrid,
) -> Result<NoiseSpectrumTrace> {
    cavity.validate()?;
    pump.validate()?;
    chain.validate()?;
    let eta = chain.eta_phase();
    let values = grid
        .omegas()
        .map(|w| phase_sum_value(cavity, pump, eta, w))
        .collect();
    checked_trace(
        grid,
        values,
        TraceKind::PhaseSum,
        ParamsSnapshot {
            cavity: Some(*cavity),
            pump: Some(*pump),
            chain: Some(*chain),
            efficiency: Some(eta),
        },
    )
}

/// Excess pump noise at which the phase sum sits exactly at the SNL for
/// every analysis frequency: `E* = 1 / (2(σ − 1))`.
pub fn critical_excess_noise(sigma: f64) -> Result<f64> {
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "critical excess noise needs σ > 1, got {sigma}"
        )));
    }
    Ok(1.0 / (2.0 * (sigma - 1.0)))
}

/// Cavity-output spectrum with unit detection efficiency.
pub fn lossless_spectrum(
    kind: Correlation,
    cavity: &OpoCavity,
    pump: &PumpDrive,
    grid: &FrequencyGrid,
) -> Result<NoiseSpectrumTrace> {
    cavity.validate()?;
    let (values, trace_kind, pump) = match kind {
        Correlation::IntensityDiff => (
            grid.omegas()
                .map(|w| intensity_diff_value(cavity, 1.0, w))
                .collect(),
            TraceKind::IntensityDiff,
            None,
        ),
        Correlation::PhaseSum => {
            pump.validate()?;
            (
                grid.omegas()
                    .map(|w| phase_sum_value(cavity, pump, 1.0, w))
                    .collect(),
                TraceKind::PhaseSum,
                Some(*pump),
            )
        }
    };
    checked_trace(
        grid,
        values,
        trace_kind,
        ParamsSnapshot {
            cavity: Some(*cavity),
            pump,
            chain: None,
            efficiency: Some(1.0),
        },
    )
}

/// Passive loss on an SNL-normalized spectrum: `v ↦ 1 − η(1 − v)`.
pub fn apply_loss(trace: &NoiseSpectrumTrace, eta: f64) -> Result<NoiseSpectrumTrace> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            min: 0.0,
            max: 1.0,
        });
    }
    if trace.scale != Scale::Linear {
        return Err(Error::Domain("loss applies to linear spectra only".into()));
    }
    let mut out = trace.clone();
    for v in &mut out.values {
        *v = 1.0 - eta * (1.0 - *v);
    }
    out.params.efficiency = Some(trace.params.efficiency.unwrap_or(1.0) * eta);
    Ok(out)
}

pub fn to_decibels(trace: &NoiseSpectrumTrace) -> Result<NoiseSpectrumTrace> {
    if trace.scale == Scale::Decibel {
        return Ok(trace.clone());
    }
    if let Some((i, v)) = trace.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::Domain(format!(
            "cannot take dB of non-positive value {v} at index {i}"
        )));
    }
    let mut out = trace.clone();
    out.values.iter_mut().for_each(|v| *v = linear_to_db(*v));
    out.scale = Scale::Decibel;
    Ok(out)
}

pub fn linear_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn sigma_from_powers(power: f64, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::invalid("threshold", format!("{threshold} must be positive")));
    }
    if !(power >= threshold) {
        return Err(Error::BelowThreshold { power, threshold });
    }
    Ok((power / threshold).sqrt())
}
