//! Windowed periodogram estimation and per-channel spectral statistics.
//!
//! A [`SignalPanel`] holds `M` equally sampled real channels. For a window of
//! width `N` starting at sample `t`, the periodogram of channel `j` is
//!
//! ```text
//! P_j(f_n, t) = |Σ_k w(k) x_j(k + t) exp(-2πi k n / N)|² / N²,   f_n = n / (N Δt)
//! ```
//!
//! with `w` the Hanning taper. Dropping the DC bin and rescaling the rest to
//! unit mass gives a [`NormalizedSpectrum`], whose Shannon entropy (in nats)
//! and argmax frequency are the per-channel statistics used downstream.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Milliseconds in one panel time unit (panel `dt` is expressed in minutes).
pub const MS_PER_TIME_UNIT: f64 = 60_000.0;

/// Probabilities below this are treated as exact zeros in entropy sums.
pub const PROB_FLOOR: f64 = 1e-300;

/// Tolerance on the unit-mass constraint of a normalized spectrum.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// `M` named real channels of common length `L`, sampled every `dt` minutes.
#[derive(Clone, PartialEq)]
pub struct SignalPanel {
    labels: Vec<String>,
    channels: Vec<Vec<f64>>,
    dt: f64,
    origin_ms: i64,
}

impl SignalPanel {
    pub fn new(labels: Vec<String>, channels: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidPanel("panel needs at least one channel".into()));
        }
        if labels.len() != channels.len() {
            return Err(Error::InvalidPanel(format!(
                "{} labels for {} channels",
                labels.len(),
                channels.len()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidPanel(format!("sampling period must be positive, got {dt}")));
        }
        let len = channels[0].len();
        if len < 2 {
            return Err(Error::InvalidPanel(format!("panel needs at least 2 samples, got {len}")));
        }
        for (label, ch) in labels.iter().zip(&channels) {
            if ch.len() != len {
                return Err(Error::InvalidPanel(format!(
                    "channel {label} has {} samples, expected {len}",
                    ch.len()
                )));
            }
            if let Some(k) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidPanel(format!("channel {label} has non-finite sample at {k}")));
            }
        }
        Ok(Self {
            labels,
            channels,
            dt,
            origin_ms: 0,
        })
    }

    /// A zero-length panel; produced by simulations with no recorded steps.
    pub fn empty(labels: Vec<String>, dt: f64) -> Self {
        let channels = labels.iter().map(|_| Vec::new()).collect();
        Self {
            labels,
            channels,
            dt,
            origin_ms: 0,
        }
    }

    /// Sets the wall-clock time (ms since epoch) of sample 0.
    pub fn with_origin(mut self, origin_ms: i64) -> Self {
        self.origin_ms = origin_ms;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn origin_ms(&self) -> i64 {
        self.origin_ms
    }

    pub fn nyquist(&self) -> f64 {
        1.0 / (2.0 * self.dt)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Timestamp (ms since epoch) of sample `k`.
    pub fn time_ms(&self, k: usize) -> i64 {
        self.origin_ms + (k as f64 * self.dt * MS_PER_TIME_UNIT).round() as i64
    }

    /// Sub-panel with the named channels, in the order given.
    pub fn select(&self, labels: &[String]) -> Result<SignalPanel> {
        let mut channels = Vec::with_capacity(labels.len());
        for label in labels {
            let idx = self
                .channel_index(label)
                .ok_or_else(|| Error::InvalidPanel(format!("unknown channel {label}")))?;
            channels.push(self.channels[idx].clone());
        }
        Ok(Self {
            labels: labels.to_vec(),
            channels,
            dt: self.dt,
            origin_ms: self.origin_ms,
        })
    }
}

impl fmt::Debug for SignalPanel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignalPanel")
            .field("labels", &self.labels)
            .field("len", &self.len())
            .field("dt", &self.dt)
            .field("origin_ms", &self.origin_ms)
            .finish()
    }
}

/// Window width `N` and the step between successive window starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub width: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(width: usize, stride: usize) -> Result<Self> {
        if width < 2 {
            return Err(Error::InvalidWindow(format!("width must be >= 2, got {width}")));
        }
        if stride < 1 {
            return Err(Error::InvalidWindow("stride must be >= 1".into()));
        }
        Ok(Self { width, stride })
    }

    /// Start offsets of every full window over a series of `len` samples.
    pub fn starts(&self, len: usize) -> impl Iterator<Item = usize> {
        let last = len.checked_sub(self.width);
        let stride = self.stride;
        (0..).map(move |i| i * stride).take_while(move |&s| last.is_some_and(|l| s <= l))
    }

    pub fn count(&self, len: usize) -> usize {
        if len < self.width {
            0
        } else {
            (len - self.width) / self.stride + 1
        }
    }
}

/// Hanning taper `w(k) = ½(1 − cos(2πk/(N−1)))`, `k = 0..N−1`.
pub fn hanning_window(width: usize) -> Result<Vec<f64>> {
    if width < 2 {
        return Err(Error::InvalidWindow(format!("width must be >= 2, got {width}")));
    }
    let denom = (width - 1) as f64;
    Ok((0..width)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / denom).cos()))
        .collect())
}

/// Periodogram values `P(f_n)` for `n = 0..N−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    values: Vec<f64>,
    dt: f64,
}

impl PowerSpectrum {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidWindow("power spectrum needs at least 2 bins".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::DegenerateSpectrum(format!("invalid power value {v}")));
        }
        Ok(Self { values, dt })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn bin_freq(&self, n: usize) -> f64 {
        n as f64 / (self.width() as f64 * self.dt)
    }

    /// `(frequency, power)` for every bin including DC.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(n, &v)| (self.bin_freq(n), v))
    }
}

/// Probability mass over bins `n = 1..N−1`; the DC bin is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSpectrum {
    probs: Vec<f64>,
    dt: f64,
}

impl NormalizedSpectrum {
    /// `probs[i]` is the mass at bin `n = i + 1`.
    pub fn new(probs: Vec<f64>, dt: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::DegenerateSpectrum("no AC bins".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::DegenerateSpectrum(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::DegenerateSpectrum(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs, dt })
    }

    pub(crate) fn from_normalized(probs: Vec<f64>, dt: f64) -> Self {
        Self { probs, dt }
    }

    pub fn uniform(width: usize, dt: f64) -> Result<Self> {
        if width < 2 {
            return Err(Error::InvalidWindow(format!("width must be >= 2, got {width}")));
        }
        let bins = width - 1;
        Ok(Self {
            probs: vec![1.0 / bins as f64; bins],
            dt,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Window width `N` (one more than the number of stored bins).
    pub fn width(&self) -> usize {
        self.probs.len() + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Frequency of stored index `i` (bin `n = i + 1`).
    pub fn bin_freq(&self, i: usize) -> f64 {
        (i + 1) as f64 / (self.width() as f64 * self.dt)
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.bin_freq(i), p))
    }

    pub fn same_grid(&self, other: &NormalizedSpectrum) -> bool {
        self.probs.len() == other.probs.len() && self.dt == other.dt
    }
}

/// Reusable periodogram estimator for a fixed window width.
#[derive(Clone)]
pub struct PeriodogramEstimator {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl PeriodogramEstimator {
    pub fn new(width: usize) -> Result<Self> {
        let window = hanning_window(width)?;
        let fft = FftPlanner::new().plan_fft_forward(width);
        Ok(Self { window, fft })
    }

    pub fn width(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Periodogram of one window of samples; `segment.len()` must equal the width.
    pub fn estimate(&self, segment: &[f64], dt: f64) -> Result<PowerSpectrum> {
        let n = self.width();
        if segment.len() != n {
            return Err(Error::Dimension(format!(
                "segment of {} samples for window width {n}",
                segment.len()
            )));
        }
        let mut buf: Vec<Complex<f64>> = segment
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| Complex::new(w * x, 0.0))
            .collect();
        self.fft.process(&mut buf);

        let scale = 1.0 / (n as f64 * n as f64);
        let mut values = vec![0.0; n];
        values[0] = buf[0].norm_sqr() * scale;
        // real input: P(f_n) = P(f_{N-n}); copy the lower half so the symmetry is exact
        for k in 1..=n / 2 {
            let p = buf[k].norm_sqr() * scale;
            values[k] = p;
            values[n - k] = p;
        }
        PowerSpectrum::new(values, dt)
    }
}

impl fmt::Debug for PeriodogramEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodogramEstimator").field("width", &self.width()).finish()
    }
}

/// Hanning-windowed periodogram of `channel` over `[start, start + width)`.
pub fn periodogram(panel: &SignalPanel, channel: usize, start: usize, window: WindowSpec) -> Result<PowerSpectrum> {
    if channel >= panel.n_channels() {
        return Err(Error::Dimension(format!(
            "channel {channel} out of {} channels",
            panel.n_channels()
        )));
    }
    let end = start + window.width;
    if end > panel.len() {
        return Err(Error::OutOfRange {
            start,
            end,
            len: panel.len(),
        });
    }
    PeriodogramEstimator::new(window.width)?.estimate(&panel.channel(channel)[start..end], panel.dt())
}

/// Drops the DC bin and rescales the remaining bins to unit mass.
pub fn normalize_spectrum(ps: &PowerSpectrum) -> Result<NormalizedSpectrum> {
    let ac = &ps.values()[1..];
    let total: f64 = ac.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateSpectrum(format!("AC power is {total}")));
    }
    Ok(NormalizedSpectrum::from_normalized(
        ac.iter().map(|p| p / total).collect(),
        ps.dt(),
    ))
}

pub(crate) fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > PROB_FLOOR)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Shannon entropy of a normalized spectrum in nats, with `0 log 0 = 0`.
pub fn spectral_entropy(p: &NormalizedSpectrum) -> f64 {
    shannon_entropy(p.probs())
}

/// Bin index `n` (1-based, DC excluded) of maximal mass; ties go to the lowest bin.
pub fn mode_bin(p: &NormalizedSpectrum) -> usize {
    let mut best = 0;
    for (i, &v) in p.probs().iter().enumerate() {
        if v > p.probs()[best] {
            best = i;
        }
    }
    best + 1
}

/// Frequency of maximal normalized power.
pub fn mode_frequency(p: &NormalizedSpectrum) -> f64 {
    p.bin_freq(mode_bin(p) - 1)
}
