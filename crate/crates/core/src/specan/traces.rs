use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mzi::PhotocurrentPair;
use crate::spectra::Correlation;
use crate::specan::welch::PsdEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Bin-by-bin ratio.
    #[default]
    Pointwise,
    /// Divide by the mean of the reference, which is flat by construction.
    FlatFit,
}

/// `signal / reference` on a shared grid; the SNL maps to 1.
pub fn normalize_to_snl(
    signal: &PsdEstimate,
    reference: &PsdEstimate,
    mode: Normalization,
) -> Result<PsdEstimate> {
    if !signal.same_grid(reference) {
        return Err(Error::GridMismatch(format!(
            "signal has {} bins at dt = {}, reference {} bins at dt = {}",
            signal.psd.len(),
            signal.dt,
            reference.psd.len(),
            reference.dt
        )));
    }
    if let Some(bin) = reference.psd.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateReference { bin });
    }
    let psd = match mode {
        Normalization::Pointwise => signal
            .psd
            .iter()
            .zip(&reference.psd)
            .map(|(s, r)| s / r)
            .collect(),
        Normalization::FlatFit => {
            let level = reference.psd.iter().sum::<f64>() / reference.psd.len() as f64;
            signal.psd.iter().map(|s| s / level).collect()
        }
    };
    Ok(PsdEstimate {
        psd,
        ..signal.clone()
    })
}

/// Correlation series of the two interferometers. Intensity difference takes
/// the sum ports of amplitude-mode currents, phase sum the difference ports
/// of phase-mode currents; the `1/√2` keeps two independent vacua at 1.
pub fn combine_correlations(
    mzi1: &PhotocurrentPair,
    mzi2: &PhotocurrentPair,
    mode: Correlation,
) -> Result<Vec<f64>> {
    if mzi1.dt != mzi2.dt {
        return Err(Error::Configuration(format!(
            "sample intervals differ: {} vs {}",
            mzi1.dt, mzi2.dt
        )));
    }
    let (a, b) = match mode {
        Correlation::IntensityDiff => (&mzi1.sum, &mzi2.sum),
        Correlation::PhaseSum => (&mzi1.diff, &mzi2.diff),
    };
    if a.len() != b.len() {
        return Err(Error::Configuration(format!(
            "photocurrent lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut out = vec![0.0; a.len()];
    combine_into(a, b, mode, &mut out);
    Ok(out)
}

/// Block form of [`combine_correlations`] on raw port series.
pub fn combine_into(a: &[f64], b: &[f64], mode: Correlation, out: &mut [f64]) {
    match mode {
        Correlation::IntensityDiff => {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = (x - y) * FRAC_1_SQRT_2;
            }
        }
        Correlation::PhaseSum => {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = (x + y) * FRAC_1_SQRT_2;
            }
        }
    }
}

/// Normalized traces of one analysis frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTraceSet {
    pub design_freq_hz: f64,
    /// Trace i.
    pub snl: PsdEstimate,
    /// Phase sum per excess noise, largest `E` first (traces ii, iii, iv).
    pub phase_sum: Vec<(f64, PsdEstimate)>,
    /// Trace v.
    pub intensity_diff: PsdEstimate,
}

impl CorrelationTraceSet {
    pub fn phase_sum_at(&self, excess_noise: f64) -> Option<&PsdEstimate> {
        self.phase_sum
            .iter()
            .find(|(e, _)| *e == excess_noise)
            .map(|(_, p)| p)
    }
}

/// Normalized estimates from one preset run, before assembly.
#[derive(Debug, Clone, Default)]
pub struct TraceInputs {
    pub snl: Option<PsdEstimate>,
    pub phase_sum: Vec<(f64, PsdEstimate)>,
    /// Intensity difference per excess noise it was recorded with.
    pub intensity_diff: Vec<(f64, PsdEstimate)>,
}

/// Orders the traces and checks that the set is complete and consistent:
/// every `E` in `required` has a phase-sum trace, all share one grid, and the
/// intensity-difference traces agree across `E` within six standard errors.
pub fn assemble_trace_set(
    inputs: TraceInputs,
    required: &[f64],
    design_freq_hz: f64,
) -> Result<CorrelationTraceSet> {
    let snl = inputs
        .snl
        .ok_or_else(|| Error::IncompleteSet("SNL trace".into()))?;
    let mut missing: Vec<String> = required
        .iter()
        .filter(|e| !inputs.phase_sum.iter().any(|(x, _)| x == *e))
        .map(|e| format!("phase sum at E = {e}"))
        .collect();
    if inputs.intensity_diff.is_empty() {
        missing.push("intensity difference".into());
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteSet(missing.join(", ")));
    }
    let all = inputs
        .phase_sum
        .iter()
        .chain(&inputs.intensity_diff)
        .map(|(_, p)| p);
    for p in all {
        if !p.same_grid(&snl) {
            return Err(Error::GridMismatch("trace set mixes frequency grids".into()));
        }
    }
    let first = &inputs.intensity_diff[0].1;
    for (e, other) in &inputs.intensity_diff[1..] {
        let k = first.n_segments.min(other.n_segments) as f64;
        let tol = 6.0 / k.sqrt();
        for (i, (a, b)) in first.psd.iter().zip(&other.psd).enumerate() {
            if (a - b).abs() > tol * a.max(*b) {
                return Err(Error::Domain(format!(
                    "intensity difference at E = {e} departs from E = {} at {} Hz",
                    inputs.intensity_diff[0].0, first.freqs[i]
                )));
            }
        }
    }
    let mut phase_sum = inputs.phase_sum;
    phase_sum.sort_by(|a, b| b.0.total_cmp(&a.0));
    let intensity_diff = inputs.intensity_diff.into_iter().next().expect("checked").1;
    Ok(CorrelationTraceSet {
        design_freq_hz,
        snl,
        phase_sum,
        intensity_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianSource;
    use crate::specan::welch::{welch_psd, Window};

    fn white(n: usize, seed: u64, tag: u64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        GaussianSource::new(seed, tag).fill(&mut v);
        v
    }

    fn est(x: &[f64]) -> PsdEstimate {
        welch_psd(x, 5e-9, 1024, 0.5, Window::Hann).unwrap()
    }

    #[test]
    fn self_normalization_is_one() {
        let e = est(&white(50_000, 1, 1));
        let n = normalize_to_snl(&e, &e, Normalization::Pointwise).unwrap();
        assert!(n.psd.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn half_power_signal_against_flat_reference() {
        let r = est(&white(400_000, 1, 1));
        let s: Vec<f64> = white(400_000, 2, 1)
            .iter()
            .map(|v| v * 0.5f64.sqrt())
            .collect();
        let n = normalize_to_snl(&est(&s), &r, Normalization::FlatFit).unwrap();
        let mean = n.psd.iter().sum::<f64>() / n.psd.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn normalization_errors() {
        let a = est(&white(50_000, 1, 1));
        let b = welch_psd(&white(50_000, 1, 1), 5e-9, 2048, 0.5, Window::Hann).unwrap();
        assert!(matches!(
            normalize_to_snl(&a, &b, Normalization::Pointwise),
            Err(Error::GridMismatch(_))
        ));
        let mut z = a.clone();
        z.psd[7] = 0.0;
        assert!(matches!(
            normalize_to_snl(&a, &z, Normalization::Pointwise),
            Err(Error::DegenerateReference { bin: 7 })
        ));
    }

    fn pair(sum: Vec<f64>, diff: Vec<f64>) -> PhotocurrentPair {
        PhotocurrentPair { sum, diff, dt: 5e-9 }
    }

    #[test]
    fn independent_vacua_combine_to_unit_density() {
        let n = 200_000;
        let a = pair(white(n, 1, 1), white(n, 1, 2));
        let b = pair(white(n, 1, 3), white(n, 1, 4));
        for mode in [Correlation::IntensityDiff, Correlation::PhaseSum] {
            let c = combine_correlations(&a, &b, mode).unwrap();
            let e = est(&c);
            let mean = e.psd.iter().sum::<f64>() / e.psd.len() as f64;
            assert!((mean - 1.0).abs() < 0.02, "{mode:?} {mean}");
        }
    }

    #[test]
    fn identical_amplitude_currents_cancel() {
        let x = white(10_000, 1, 1);
        let a = pair(x.clone(), x.clone());
        let c = combine_correlations(&a, &a, Correlation::IntensityDiff).unwrap();
        assert!(c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_streams_rejected() {
        let a = pair(vec![0.0; 10], vec![0.0; 10]);
        let b = pair(vec![0.0; 11], vec![0.0; 11]);
        assert!(combine_correlations(&a, &b, Correlation::PhaseSum).is_err());
        let mut c = a.clone();
        c.dt = 1e-9;
        assert!(combine_correlations(&a, &c, Correlation::PhaseSum).is_err());
    }

    #[test]
    fn assembly_orders_and_validates() {
        let base = est(&white(50_000, 1, 1));
        let scaled = |k: f64| PsdEstimate {
            psd: base.psd.iter().map(|v| v * k).collect(),
            ..base.clone()
        };
        let inputs = TraceInputs {
            snl: Some(scaled(1.0)),
            phase_sum: vec![(0.0, scaled(0.7)), (1.0, scaled(0.9)), (0.33, scaled(0.8))],
            intensity_diff: vec![(0.0, scaled(0.5)), (1.0, scaled(0.5))],
        };
        let set = assemble_trace_set(inputs.clone(), &[0.0, 0.33, 1.0], 2e6).unwrap();
        let order: Vec<f64> = set.phase_sum.iter().map(|(e, _)| *e).collect();
        assert_eq!(order, vec![1.0, 0.33, 0.0]);
        assert_eq!(set.phase_sum_at(0.33).unwrap().psd, scaled(0.8).psd);

        let mut short = inputs.clone();
        short.phase_sum.pop();
        assert!(matches!(
            assemble_trace_set(short, &[0.0, 0.33, 1.0], 2e6),
            Err(Error::IncompleteSet(_))
        ));
        let mut no_snl = inputs.clone();
        no_snl.snl = None;
        assert!(matches!(
            assemble_trace_set(no_snl, &[0.0], 2e6),
            Err(Error::IncompleteSet(_))
        ));
        let mut drift = inputs;
        drift.intensity_diff[1] = (1.0, scaled(2.0));
        assert!(assemble_trace_set(drift, &[0.0], 2e6).is_err());
    }
}
