//! First-order shaping filters realizing `1 − A/(B² + ω²τ²)` spectra.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Continuous-time first-order filter `H(s) = (b1·s + b0) / (s + pole_rate)`.
///
/// Driven by unit white noise its output PSD is `|H(iω)|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingFilter {
    pub b1: f64,
    pub b0: f64,
    pub pole_rate: f64,
}

impl ShapingFilter {
    /// `(s + zero_rate) / (s + pole_rate)`.
    pub fn zero_pole(zero_rate: f64, pole_rate: f64) -> Result<Self> {
        if !(pole_rate > 0.0 && pole_rate.is_finite()) {
            return Err(Error::invalid("pole_rate", format!("{pole_rate} must be > 0")));
        }
        if !(zero_rate >= 0.0 && zero_rate.is_finite()) {
            return Err(Error::invalid("zero_rate", format!("{zero_rate} must be ≥ 0")));
        }
        Ok(Self {
            b1: 1.0,
            b0: zero_rate,
            pole_rate,
        })
    }

    /// `gain / (s + pole_rate)`: a Lorentzian of height `gain²/pole_rate²` at DC.
    pub fn lorentzian(gain: f64, pole_rate: f64) -> Result<Self> {
        if !(pole_rate > 0.0 && pole_rate.is_finite()) {
            return Err(Error::invalid("pole_rate", format!("{pole_rate} must be > 0")));
        }
        Ok(Self {
            b1: 0.0,
            b0: gain,
            pole_rate,
        })
    }

    pub fn zero_rate(&self) -> Option<f64> {
        (self.b1 != 0.0).then(|| self.b0 / self.b1)
    }

    /// Multiply the transfer function by `k` (PSD by `k²`).
    pub fn scaled(self, k: f64) -> Self {
        Self {
            b1: self.b1 * k,
            b0: self.b0 * k,
            ..self
        }
    }

    pub fn power_response(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        (self.b1 * self.b1 * w2 + self.b0 * self.b0) / (w2 + self.pole_rate * self.pole_rate)
    }

    /// Bilinear transform at sample interval `dt`, pre-warped so the discrete
    /// response matches the analog one exactly at `prewarp_hz` (and at DC).
    pub fn discretize(&self, dt: f64, prewarp_hz: f64) -> Result<DiscreteFilter> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", format!("{dt} must be > 0")));
        }
        let nyquist = 0.5 / dt;
        if !(prewarp_hz > 0.0 && prewarp_hz < nyquist) {
            return Err(Error::Configuration(format!(
                "pre-warp frequency {prewarp_hz} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
        let w0 = 2.0 * PI * prewarp_hz;
        let k = w0 / (0.5 * w0 * dt).tan();
        let den = k + self.pole_rate;
        Ok(DiscreteFilter {
            b0: (self.b1 * k + self.b0) / den,
            b1: (self.b0 - self.b1 * k) / den,
            a1: (self.pole_rate - k) / den,
            warp: k,
            dt,
        })
    }
}

/// Designs the stable minimum-phase factor of `1 − A/(B² + ω²τ²)`:
/// `zero_rate = sqrt(B² − A)/τ`, `pole_rate = B/τ`.
pub fn design_squeeze_filter(depth: f64, width: f64, tau: f64) -> Result<ShapingFilter> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid("width", format!("B = {width} must be > 0")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("{tau} must be > 0")));
    }
    let residual = width * width - depth;
    if !(residual >= 0.0) {
        return Err(Error::NonFactorizable { residual });
    }
    ShapingFilter::zero_pole(residual.sqrt() / tau, width / tau)
}

/// Factor of the reciprocal spectrum `(B² + ω²τ²)/(B² − A + ω²τ²)`, scaled
/// by `sqrt(excess)`. Needs `B² − A > 0` strictly.
pub fn design_antisqueeze_filter(
    depth: f64,
    width: f64,
    tau: f64,
    excess: f64,
) -> Result<ShapingFilter> {
    let squeeze = design_squeeze_filter(depth, width, tau)?;
    let zero = squeeze.b0;
    if zero <= 0.0 {
        return Err(Error::NonFactorizable { residual: 0.0 });
    }
    Ok(ShapingFilter::zero_pole(squeeze.pole_rate, zero)?.scaled(excess.sqrt()))
}

/// `y[n] = b0·x[n] + b1·x[n−1] − a1·y[n−1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteFilter {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
    warp: f64,
    dt: f64,
}

impl DiscreteFilter {
    pub fn power_response(&self, freq_hz: f64) -> f64 {
        let theta = 2.0 * PI * freq_hz * self.dt;
        let (s, c) = theta.sin_cos();
        // H(e^{iθ}) = (b0 + b1 e^{-iθ}) / (1 + a1 e^{-iθ})
        let num = (self.b0 + self.b1 * c).powi(2) + (self.b1 * s).powi(2);
        let den = (1.0 + self.a1 * c).powi(2) + (self.a1 * s).powi(2);
        num / den
    }

    /// Analog angular frequency that maps onto `freq_hz` under the transform.
    pub fn warped_omega(&self, freq_hz: f64) -> f64 {
        self.warp * (PI * freq_hz * self.dt).tan()
    }

    /// Impulse-response decay factor per sample.
    pub fn pole(&self) -> f64 {
        -self.a1
    }

    pub fn process(&self, state: &mut FilterState, input: &[f64], output: &mut [f64]) {
        debug_assert_eq!(input.len(), output.len());
        let (mut x1, mut y1) = (state.x1, state.y1);
        for (x, y) in input.iter().zip(output.iter_mut()) {
            let v = self.b0 * x + self.b1 * x1 - self.a1 * y1;
            x1 = *x;
            y1 = v;
            *y = v;
        }
        state.x1 = x1;
        state.y1 = y1;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FilterState {
    x1: f64,
    y1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TAU: f64 = 39.5e-9;

    #[test]
    fn nominal_cavity_rates() {
        let (t, tp) = (0.032, 0.042);
        let f = design_squeeze_filter(t * tp, tp, TAU).unwrap();
        assert_relative_eq!(f.zero_rate().unwrap(), 518_832.950_175_169_5, max_relative = 1e-12);
        assert_relative_eq!(f.pole_rate, 1_063_291.139_240_506_3, max_relative = 1e-12);
    }

    #[test]
    fn no_depth_is_white() {
        let f = design_squeeze_filter(0.0, 0.05, TAU).unwrap();
        assert_eq!(f.zero_rate(), Some(f.pole_rate));
        for w in [0.0, 1e5, 1e7, 1e9] {
            assert_relative_eq!(f.power_response(w), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn deep_squeezing_limit() {
        let b: f64 = 0.05;
        let f = design_squeeze_filter(b * b * (1.0 - 1e-6), b, TAU).unwrap();
        assert_relative_eq!(f.power_response(0.0), 1e-6, max_relative = 1e-6);
    }

    #[test]
    fn rejects_non_factorizable() {
        assert!(matches!(
            design_squeeze_filter(0.01, 0.05, TAU),
            Err(Error::NonFactorizable { .. })
        ));
        assert!(design_squeeze_filter(0.0, 0.0, TAU).is_err());
    }

    #[test]
    fn antisqueeze_is_reciprocal() {
        let (a, b) = (1.344e-3, 0.042);
        let sq = design_squeeze_filter(a, b, TAU).unwrap();
        let anti = design_antisqueeze_filter(a, b, TAU, 1.0).unwrap();
        for w in [0.0, 3e5, 1e6, 1e8] {
            assert_relative_eq!(sq.power_response(w) * anti.power_response(w), 1.0, max_relative = 1e-12);
        }
        let anti2 = design_antisqueeze_filter(a, b, TAU, 2.0).unwrap();
        assert_relative_eq!(anti2.power_response(1e6), 2.0 * anti.power_response(1e6), max_relative = 1e-12);
    }

    #[test]
    fn bilinear_preserves_dc_and_design_frequency() {
        let f = design_squeeze_filter(1.344e-3, 0.042, TAU).unwrap();
        let dt = 5e-9;
        for design in [2e6, 5e6, 10e6] {
            let d = f.discretize(dt, design).unwrap();
            let dc = d.power_response(0.0);
            assert!((dc / f.power_response(0.0) - 1.0).abs() < 1e-9, "dc {dc}");
            let at = d.power_response(design);
            let want = f.power_response(2.0 * PI * design);
            assert!((at / want - 1.0).abs() < 1e-9, "{at} vs {want}");
            assert!(d.pole().abs() < 1.0);
        }
    }

    #[test]
    fn discretize_rejects_bad_prewarp() {
        let f = design_squeeze_filter(0.0, 0.042, TAU).unwrap();
        assert!(f.discretize(5e-9, 1e8).is_err());
        assert!(f.discretize(5e-9, 0.0).is_err());
    }

    #[test]
    fn identity_filter_passes_input_through_to_rounding() {
        let f = design_squeeze_filter(0.0, 0.042, TAU).unwrap();
        let d = f.discretize(5e-9, 2e6).unwrap();
        let input: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut out = vec![0.0; 64];
        d.process(&mut FilterState::default(), &input, &mut out);
        for (a, b) in input.iter().zip(&out) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn impulse_response_decays() {
        let f = design_squeeze_filter(1.344e-3, 0.042, TAU).unwrap();
        let d = f.discretize(5e-9, 2e6).unwrap();
        let mut input = vec![0.0; 20_000];
        input[0] = 1.0;
        let mut out = vec![0.0; input.len()];
        d.process(&mut FilterState::default(), &input, &mut out);
        assert!(out.iter().all(|v| v.is_finite()));
        assert!(out[19_999].abs() < 1e-40);
    }
}
