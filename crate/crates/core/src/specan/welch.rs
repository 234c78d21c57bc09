//! Averaged-periodogram (Welch) PSD estimation in SNL units.
//!
//! Scaling: bin `k` of a segment contributes `|X_k|² / Σ w²`. A unit-variance
//! white sequence then estimates to 1 in every bin, which is the SNL for the
//! quadrature streams of [`crate::synth`]. Multiply by `2·dt` to get the
//! conventional one-sided density in units²/Hz.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub const MIN_SEGMENT_LEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic (DFT-even) window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// `k / (segment_len·dt)` for `k = 1 ..= segment_len/2`.
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub n_segments: usize,
    pub segment_len: usize,
    pub window: Window,
    pub overlap: f64,
    pub dt: f64,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        1.0 / (self.segment_len as f64 * self.dt)
    }

    /// Indices of the `count` bins closest to `freq_hz`, ascending.
    pub fn nearest_bins(&self, freq_hz: f64, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.freqs.len()).collect();
        idx.sort_by(|&a, &b| {
            let da = (self.freqs[a] - freq_hz).abs();
            let db = (self.freqs[b] - freq_hz).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        idx.truncate(count);
        idx.sort_unstable();
        idx
    }

    /// Mean over the `count` bins nearest `freq_hz`.
    pub fn readout(&self, freq_hz: f64, count: usize) -> f64 {
        let bins = self.nearest_bins(freq_hz, count);
        bins.iter().map(|&i| self.psd[i]).sum::<f64>() / bins.len() as f64
    }

    /// Variance implied by the estimate (DC excluded): the integral of the
    /// one-sided density over `(0, 1/(2dt)]`.
    pub fn integrated_variance(&self) -> f64 {
        let n = self.segment_len as f64;
        let last = self.psd.len() - 1;
        let inner: f64 = self.psd[..last].iter().sum();
        (2.0 * inner + self.psd[last]) / n
    }

    pub fn same_grid(&self, other: &PsdEstimate) -> bool {
        self.segment_len == other.segment_len && self.dt == other.dt && self.freqs == other.freqs
    }
}

/// Streaming Welch estimator. Feed samples in any block sizes; the result
/// depends only on the concatenated stream.
pub struct WelchAccumulator {
    segment_len: usize,
    hop: usize,
    overlap: f64,
    window_kind: Window,
    window: Arc<Vec<f64>>,
    window_power: f64,
    dt: f64,
    fft: Arc<dyn Fft<f64>>,
    pending: Vec<f64>,
    /// Start of the next unprocessed segment within `pending`.
    cursor: usize,
    sum: Vec<f64>,
    n_segments: usize,
}

impl std::fmt::Debug for WelchAccumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WelchAccumulator")
            .field("segment_len", &self.segment_len)
            .field("hop", &self.hop)
            .field("n_segments", &self.n_segments)
            .finish_non_exhaustive()
    }
}

impl Clone for WelchAccumulator {
    fn clone(&self) -> Self {
        Self {
            segment_len: self.segment_len,
            hop: self.hop,
            overlap: self.overlap,
            window_kind: self.window_kind,
            window: Arc::clone(&self.window),
            window_power: self.window_power,
            dt: self.dt,
            fft: Arc::clone(&self.fft),
            pending: self.pending.clone(),
            cursor: self.cursor,
            sum: self.sum.clone(),
            n_segments: self.n_segments,
        }
    }
}

impl WelchAccumulator {
    pub fn new(dt: f64, segment_len: usize, overlap: f64, window: Window) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{dt} must be > 0")));
        }
        if segment_len < MIN_SEGMENT_LEN || !segment_len.is_power_of_two() {
            return Err(Error::invalid(
                "segment_len",
                format!("{segment_len} must be a power of two ≥ {MIN_SEGMENT_LEN}"),
            ));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::invalid("overlap", format!("{overlap} not in [0, 1)")));
        }
        let hop = ((segment_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
        let coeffs = window.coefficients(segment_len);
        let window_power = coeffs.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(segment_len);
        Ok(Self {
            segment_len,
            hop,
            overlap,
            window_kind: window,
            window: Arc::new(coeffs),
            window_power,
            dt,
            fft,
            pending: Vec::new(),
            cursor: 0,
            sum: vec![0.0; segment_len / 2 + 1],
            n_segments: 0,
        })
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Samples needed for `segments` full segments.
    pub fn samples_for(&self, segments: usize) -> usize {
        if segments == 0 {
            0
        } else {
            self.segment_len + (segments - 1) * self.hop
        }
    }

    pub fn push(&mut self, data: &[f64]) {
        self.pending.extend_from_slice(data);
        self.drain(false);
    }

    /// Segments are transformed in pairs packed into one complex FFT. A
    /// trailing unpaired segment waits for the next push so the pairing,
    /// and hence the rounding, never depends on block boundaries.
    fn drain(&mut self, flush: bool) {
        let l = self.segment_len;
        let mut starts = Vec::new();
        let mut s = self.cursor;
        while s + l <= self.pending.len() {
            starts.push(s);
            s += self.hop;
        }
        if !flush && starts.len() % 2 == 1 {
            starts.pop();
        }
        if starts.is_empty() {
            self.compact();
            return;
        }
        let pairs: Vec<(usize, Option<usize>)> = starts
            .chunks(2)
            .map(|c| (c[0], c.get(1).copied()))
            .collect();
        let pending = &self.pending;
        let window = &self.window;
        let fft = &self.fft;
        let spectra = par::map_collect(&pairs, |&(a, b)| {
            pair_periodogram(
                fft.as_ref(),
                window,
                &pending[a..a + l],
                b.map(|b| &pending[b..b + l]),
            )
        });
        for (first, second) in spectra {
            add_into(&mut self.sum, &first);
            self.n_segments += 1;
            if let Some(second) = second {
                add_into(&mut self.sum, &second);
                self.n_segments += 1;
            }
        }
        self.cursor = starts.last().expect("non-empty") + self.hop;
        self.compact();
    }

    fn compact(&mut self) {
        if self.cursor > 0 && self.cursor >= self.pending.len() / 2 {
            let cut = self.cursor.min(self.pending.len());
            self.pending.drain(..cut);
            self.cursor -= cut;
        }
    }

    pub fn finish(mut self) -> Result<PsdEstimate> {
        self.drain(true);
        if self.n_segments == 0 {
            return Err(Error::InsufficientData {
                needed: self.segment_len,
                got: self.pending.len(),
            });
        }
        let scale = 1.0 / (self.n_segments as f64 * self.window_power);
        let half = self.segment_len / 2;
        let df = 1.0 / (self.segment_len as f64 * self.dt);
        Ok(PsdEstimate {
            freqs: (1..=half).map(|k| k as f64 * df).collect(),
            psd: self.sum[1..=half].iter().map(|v| v * scale).collect(),
            n_segments: self.n_segments,
            segment_len: self.segment_len,
            window: self.window_kind,
            overlap: self.overlap,
            dt: self.dt,
        })
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

/// `|X_k|²` for `k = 0 ..= L/2` of one or two windowed real segments.
fn pair_periodogram(
    fft: &dyn Fft<f64>,
    window: &[f64],
    a: &[f64],
    b: Option<&[f64]>,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let l = a.len();
    let mut buf: Vec<Complex64> = match b {
        Some(b) => (0..l)
            .map(|i| Complex64::new(window[i] * a[i], window[i] * b[i]))
            .collect(),
        None => (0..l).map(|i| Complex64::new(window[i] * a[i], 0.0)).collect(),
    };
    fft.process(&mut buf);
    let half = l / 2;
    let mut pa = Vec::with_capacity(half + 1);
    let mut pb = b.map(|_| Vec::with_capacity(half + 1));
    for k in 0..=half {
        let x = buf[k];
        let y = buf[(l - k) % l].conj();
        // A_k = (X_k + conj X_{L−k})/2,  B_k = (X_k − conj X_{L−k})/(2i)
        pa.push((x + y).norm_sqr() * 0.25);
        if let Some(pb) = pb.as_mut() {
            pb.push((x - y).norm_sqr() * 0.25);
        }
    }
    (pa, pb)
}

/// Welch PSD of a whole series.
pub fn welch_psd(
    series: &[f64],
    dt: f64,
    segment_len: usize,
    overlap: f64,
    window: Window,
) -> Result<PsdEstimate> {
    let mut acc = WelchAccumulator::new(dt, segment_len, overlap, window)?;
    if series.len() < 2 * segment_len {
        return Err(Error::InsufficientData {
            needed: 2 * segment_len,
            got: series.len(),
        });
    }
    acc.push(series);
    acc.finish()
}
