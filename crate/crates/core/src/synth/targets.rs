use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectra::{FrequencyConvention, LorentzianDip, OpoCavity, PumpDrive};
use crate::synth::filter::{design_antisqueeze_filter, design_squeeze_filter, ShapingFilter};

/// Target PSD of one collective mode, in SNL units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeTarget {
    Vacuum,
    Squeezed(LorentzianDip),
    /// `excess / dip(ω)`, the minimum-uncertainty partner of a squeezed mode
    /// when `excess = 1`.
    AntiSqueezed { dip: LorentzianDip, excess: f64 },
}

impl ModeTarget {
    pub fn psd(&self, omega: f64) -> f64 {
        match self {
            ModeTarget::Vacuum => 1.0,
            ModeTarget::Squeezed(dip) => dip.value(omega),
            ModeTarget::AntiSqueezed { dip, excess } => excess / dip.value(omega),
        }
    }

    /// Shaping filter, or `None` for the identity.
    pub fn filter(&self) -> Result<Option<ShapingFilter>> {
        match self {
            ModeTarget::Vacuum => Ok(None),
            ModeTarget::Squeezed(d) => {
                design_squeeze_filter(d.depth, d.width, d.round_trip_time).map(Some)
            }
            ModeTarget::AntiSqueezed { dip: d, excess } => {
                design_antisqueeze_filter(d.depth, d.width, d.round_trip_time, *excess).map(Some)
            }
        }
    }
}

/// Extra `q₊` noise from white pump phase noise:
/// `2·T·T′·(σ−1)·E / (T′²σ² + ω²τ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpNoiseTerm {
    /// `2·T·T′·(σ−1)`, the strength per unit `E`.
    pub unit_strength: f64,
    /// `T′σ`.
    pub width: f64,
    pub round_trip_time: f64,
    pub excess_noise: f64,
}

impl PumpNoiseTerm {
    pub fn new(cavity: &OpoCavity, pump: &PumpDrive, round_trip_time: f64) -> Self {
        let tp = cavity.total_loss();
        Self {
            unit_strength: 2.0 * cavity.transmission * tp * (pump.sigma - 1.0),
            width: tp * pump.sigma,
            round_trip_time,
            excess_noise: pump.excess_noise,
        }
    }

    pub fn psd(&self, omega: f64) -> f64 {
        self.psd_per_unit_e(omega) * self.excess_noise
    }

    pub fn psd_per_unit_e(&self, omega: f64) -> f64 {
        let wt = omega * self.round_trip_time;
        self.unit_strength / (self.width * self.width + wt * wt)
    }

    /// Lorentzian factor for `E = 1`; scale the output by `sqrt(E)`.
    pub fn unit_filter(&self) -> Result<ShapingFilter> {
        let tau = self.round_trip_time;
        ShapingFilter::lorentzian(self.unit_strength.sqrt() / tau, self.width / tau)
    }

    pub fn is_silent(&self) -> bool {
        self.unit_strength == 0.0 || self.excess_noise == 0.0
    }
}

/// Target spectra of the four collective modes `p± = (p_s ± p_i)/√2`,
/// `q± = (q_s ± q_i)/√2`, plus the analysis frequency the discretization
/// is pre-warped at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveTargets {
    pub p_plus: ModeTarget,
    pub p_minus: ModeTarget,
    /// Intrinsic `q₊` spectrum (no pump noise).
    pub q_plus: ModeTarget,
    pub q_minus: ModeTarget,
    pub pump: Option<PumpNoiseTerm>,
    pub design_freq_hz: f64,
}

impl CollectiveTargets {
    /// Coherent light in all four modes.
    pub fn vacuum(design_freq_hz: f64) -> Self {
        Self {
            p_plus: ModeTarget::Vacuum,
            p_minus: ModeTarget::Vacuum,
            q_plus: ModeTarget::Vacuum,
            q_minus: ModeTarget::Vacuum,
            pump: None,
            design_freq_hz,
        }
    }

    /// Lossless NOPO output. `p₋` follows the intensity-difference spectrum,
    /// `q₊` the phase-sum spectrum; the anti-squeezed partners are
    /// `excess / S` of the matching squeezed mode at `E = 0`.
    pub fn twin_beams(
        cavity: &OpoCavity,
        pump: &PumpDrive,
        partner_excess: f64,
        design_freq_hz: f64,
        convention: FrequencyConvention,
    ) -> Result<Self> {
        cavity.validate()?;
        pump.validate()?;
        if !(partner_excess >= 1.0 && partner_excess.is_finite()) {
            return Err(Error::invalid(
                "partner_excess",
                format!("{partner_excess} must be ≥ 1 to respect the uncertainty bound"),
            ));
        }
        // Filters run in physical time; with the ordinary convention the
        // formula argument is f rather than 2πf.
        let tau = match convention {
            FrequencyConvention::Angular => cavity.round_trip_time,
            FrequencyConvention::Ordinary => cavity.round_trip_time / (2.0 * PI),
        };
        let mut p_dip = LorentzianDip::intensity_diff(cavity);
        p_dip.round_trip_time = tau;
        let intrinsic = PumpDrive {
            sigma: pump.sigma,
            excess_noise: 0.0,
        };
        let mut q_dip = LorentzianDip::phase_sum(cavity, &intrinsic);
        q_dip.round_trip_time = tau;
        let targets = Self {
            p_plus: ModeTarget::AntiSqueezed {
                dip: q_dip,
                excess: partner_excess,
            },
            p_minus: ModeTarget::Squeezed(p_dip),
            q_plus: ModeTarget::Squeezed(q_dip),
            q_minus: ModeTarget::AntiSqueezed {
                dip: p_dip,
                excess: partner_excess,
            },
            pump: Some(PumpNoiseTerm::new(cavity, pump, tau)),
            design_freq_hz,
        };
        Ok(targets)
    }

    pub fn excess_noise(&self) -> f64 {
        self.pump.map_or(0.0, |p| p.excess_noise)
    }

    pub fn with_excess_noise(mut self, excess_noise: f64) -> Result<Self> {
        if !(excess_noise >= 0.0 && excess_noise.is_finite()) {
            return Err(Error::invalid(
                "excess_noise",
                format!("{excess_noise} must be ≥ 0"),
            ));
        }
        if let Some(p) = self.pump.as_mut() {
            p.excess_noise = excess_noise;
        } else if excess_noise != 0.0 {
            return Err(Error::Configuration(
                "vacuum targets carry no pump noise term".into(),
            ));
        }
        Ok(self)
    }

    pub fn psd_p_plus(&self, omega: f64) -> f64 {
        self.p_plus.psd(omega)
    }

    pub fn psd_p_minus(&self, omega: f64) -> f64 {
        self.p_minus.psd(omega)
    }

    pub fn psd_q_plus(&self, omega: f64) -> f64 {
        self.q_plus.psd(omega) + self.pump.map_or(0.0, |p| p.psd(omega))
    }

    pub fn psd_q_minus(&self, omega: f64) -> f64 {
        self.q_minus.psd(omega)
    }

    /// `(S_{p−}·S_{q−}, S_{q+}·S_{p+})`; both must be ≥ 1.
    pub fn uncertainty_products(&self, omega: f64) -> (f64, f64) {
        (
            self.psd_p_minus(omega) * self.psd_q_minus(omega),
            self.psd_q_plus(omega) * self.psd_p_plus(omega),
        )
    }

    /// Checks positivity and the uncertainty products on `probe` (rad/s).
    pub fn validate(&self, probe: &[f64]) -> Result<()> {
        for &w in probe {
            let psd = [
                self.psd_p_plus(w),
                self.psd_p_minus(w),
                self.psd_q_plus(w),
                self.psd_q_minus(w),
            ];
            if psd.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid(
                    "targets",
                    format!("non-positive target PSD at ω = {w}: {psd:?}"),
                ));
            }
            let (a, b) = self.uncertainty_products(w);
            if a < 1.0 - 1e-12 || b < 1.0 - 1e-12 {
                return Err(Error::invalid(
                    "targets",
                    format!("uncertainty product below 1 at ω = {w}: ({a}, {b})"),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn targets(e: f64) -> CollectiveTargets {
        let cavity = OpoCavity::new(0.032, 0.01, 39.5e-9).unwrap();
        let pump = PumpDrive::new(1.39, e).unwrap();
        CollectiveTargets::twin_beams(&cavity, &pump, 1.0, 2e6, FrequencyConvention::Angular)
            .unwrap()
    }

    #[test]
    fn q_plus_matches_lossless_phase_sum() {
        let cavity = OpoCavity::new(0.032, 0.01, 39.5e-9).unwrap();
        for e in [0.0, 0.33, 1.0] {
            let t = targets(e);
            let pump = PumpDrive::new(1.39, e).unwrap();
            for w in [0.0, 1e5, 1e6, 1.2e7, 6e7] {
                let want = crate::spectra::phase_sum_value(&cavity, &pump, 1.0, w);
                assert_relative_eq!(t.psd_q_plus(w), want, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn partners_saturate_uncertainty_bound() {
        let t = targets(0.0);
        let probe: Vec<f64> = (0..50).map(|i| 1e4 * 1.3f64.powi(i)).collect();
        t.validate(&probe).unwrap();
        for &w in &probe {
            let (a, b) = t.uncertainty_products(w);
            assert_relative_eq!(a, 1.0, max_relative = 1e-13);
            assert_relative_eq!(b, 1.0, max_relative = 1e-13);
        }
        // pump noise only raises q+, so the product grows
        let (_, b) = targets(1.0).uncertainty_products(1e6);
        assert!(b > 1.0);
    }

    #[test]
    fn rejects_sub_unity_excess() {
        let cavity = OpoCavity::new(0.032, 0.01, 39.5e-9).unwrap();
        let pump = PumpDrive::new(1.39, 0.0).unwrap();
        assert!(CollectiveTargets::twin_beams(
            &cavity,
            &pump,
            0.5,
            2e6,
            FrequencyConvention::Angular
        )
        .is_err());
    }

    #[test]
    fn pump_term_vanishes_at_threshold() {
        let cavity = OpoCavity::new(0.032, 0.01, 39.5e-9).unwrap();
        let pump = PumpDrive::new(1.0, 1.0).unwrap();
        let term = PumpNoiseTerm::new(&cavity, &pump, cavity.round_trip_time);
        assert!(term.is_silent());
        assert_eq!(term.psd(1e6), 0.0);
    }

    #[test]
    fn ordinary_convention_rescales_time() {
        let cavity = OpoCavity::new(0.032, 0.01, 39.5e-9).unwrap();
        let pump = PumpDrive::new(1.39, 0.0).unwrap();
        let t = CollectiveTargets::twin_beams(
            &cavity,
            &pump,
            1.0,
            2e6,
            FrequencyConvention::Ordinary,
        )
        .unwrap();
        // physical angular frequency 2πf must reproduce the formula at ω = f
        let f = 3e6;
        let want = crate::spectra::intensity_diff_value(&cavity, 1.0, f);
        assert_relative_eq!(t.psd_p_minus(2.0 * PI * f), want, max_relative = 1e-13);
    }
}
