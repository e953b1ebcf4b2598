//! Spectral entropy and spectral distances for multi-channel time series.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectra`]: Hanning-windowed periodograms, normalized spectra, spectral
//!   entropy and mode frequency.
//! - [`distances`]: Jensen-Shannon divergence of a spectrum ensemble, the
//!   Kullback-Leibler matrix and its mean, correlation and proportionality fits.
//! - [`ingest`]: quote tick parsing and resampling into quotation-frequency and
//!   best-rate series.
//! - [`simulator`]: a threshold agent-based market producing rate and activity
//!   panels.
//! - [`pipeline`]: sliding-window analysis, metric CSVs and parameter sweeps.
//! - [`cli`]: the `specdist` command line.

pub mod cli;
pub mod csvio;
pub mod distances;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod simulator;
pub mod spectra;

pub use distances::{
    cross_correlation, fit_proportionality, js_spectral_divergence, kl_matrix, kl_spectral_distance, mean_kl,
    DistanceReport, KlMatrix, MetricSeries, SpectrumEnsemble, WeightVector,
};
pub use error::{Error, Result};
pub use ingest::{Side, TickRecord, Transform};
pub use pipeline::{analyze, compare_metric_series, Analysis, AnalysisConfig, WindowedMetricsRow};
pub use simulator::{run_simulation, SimConfig, SimPanels};
pub use spectra::{
    hanning_window, mode_frequency, normalize_spectrum, periodogram, spectral_entropy, NormalizedSpectrum,
    PowerSpectrum, SignalPanel, WindowSpec,
};
