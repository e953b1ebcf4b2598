//! Sliding-window analysis of a panel and the metric-series tooling built on it.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use log::warn;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::csvio::format_time;
use crate::distances::{
    cross_correlation, fit_proportionality, DistanceReport, MetricSeries, SpectrumEnsemble, WeightVector,
    DEFAULT_KL_FLOOR,
};
use crate::error::{Error, Result};
use crate::ingest::{parse_timestamp, Transform};
use crate::simulator::{run_simulation, SimConfig};
use crate::spectra::{normalize_spectrum, NormalizedSpectrum, PeriodogramEstimator, PowerSpectrum, SignalPanel, WindowSpec};

pub const METRICS_MARKER: &str = "specdist-metrics v1";

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub window: WindowSpec,
    /// Channels to analyse, in order; all channels when `None`.
    pub channels: Option<Vec<String>>,
    pub transform: Transform,
    /// Leading input samples dropped before the transform, e.g. to line a
    /// raw panel up with a log-return panel of the same origin.
    pub skip: usize,
    /// Mixture weights for JS; uniform when `None`.
    pub weights: Option<WeightVector>,
    pub kl_floor: f64,
    /// Retain per-window spectra for dumping.
    pub keep_spectra: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec { width: 128, stride: 64 },
            channels: None,
            transform: Transform::Raw,
            skip: 0,
            weights: None,
            kl_floor: DEFAULT_KL_FLOOR,
            keep_spectra: false,
        }
    }
}

impl AnalysisConfig {
    /// Width `N` with the default stride `N/2`.
    pub fn with_width(width: usize) -> Result<Self> {
        Ok(Self {
            window: WindowSpec::new(width, (width / 2).max(1))?,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.width < 4 {
            return Err(Error::Config(format!("window width must be >= 4, got {}", self.window.width)));
        }
        if self.window.stride < 1 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if !(self.kl_floor >= 0.0 && self.kl_floor.is_finite()) {
            return Err(Error::Config(format!("KL floor must be >= 0, got {}", self.kl_floor)));
        }
        Ok(())
    }
}

/// Per-channel spectra kept for `--dump-spectra`.
#[derive(Debug, Clone)]
pub struct WindowSpectra {
    pub power: Vec<PowerSpectrum>,
    pub normalized: Vec<NormalizedSpectrum>,
}

/// Metrics of one window; `start_time_ms` is the time of its first sample.
#[derive(Debug, Clone)]
pub struct WindowedMetricsRow {
    pub start_time_ms: i64,
    pub report: DistanceReport,
    pub spectra: Option<WindowSpectra>,
}

/// A skipped window and the channel that made it unusable.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowGap {
    pub window_start: usize,
    pub start_time_ms: i64,
    pub channel: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub labels: Vec<String>,
    pub dt: f64,
    pub rows: Vec<WindowedMetricsRow>,
    pub gaps: Vec<WindowGap>,
}

impl Analysis {
    pub fn js_series(&self) -> MetricSeries {
        self.series(|r| r.report.js)
    }

    pub fn mean_kl_series(&self) -> MetricSeries {
        self.series(|r| r.report.mean_kl)
    }

    fn series(&self, f: impl Fn(&WindowedMetricsRow) -> f64) -> MetricSeries {
        MetricSeries {
            timestamps: self.rows.iter().map(|r| r.start_time_ms).collect(),
            values: self.rows.iter().map(f).collect(),
        }
    }
}

enum WindowOutcome {
    Row(WindowedMetricsRow),
    Gap(WindowGap),
}

fn prepare_panel(panel: &SignalPanel, cfg: &AnalysisConfig) -> Result<SignalPanel> {
    let mut selected = match &cfg.channels {
        Some(labels) => panel.select(labels)?,
        None => panel.clone(),
    };
    if cfg.skip > 0 {
        if cfg.skip + 2 > selected.len() {
            return Err(Error::Analysis(format!(
                "cannot skip {} of {} samples",
                cfg.skip,
                selected.len()
            )));
        }
        let origin = selected.time_ms(cfg.skip);
        let channels = selected.channels().iter().map(|c| c[cfg.skip..].to_vec()).collect();
        selected = SignalPanel::new(selected.labels().to_vec(), channels, selected.dt())?.with_origin(origin);
    }
    if cfg.transform == Transform::Raw {
        return Ok(selected);
    }
    let channels = selected
        .channels()
        .iter()
        .map(|c| cfg.transform.apply(c))
        .collect::<Result<Vec<_>>>()?;
    let origin = selected.time_ms(cfg.transform.lag());
    Ok(SignalPanel::new(selected.labels().to_vec(), channels, selected.dt())?.with_origin(origin))
}

fn analyze_window(
    panel: &SignalPanel,
    est: &PeriodogramEstimator,
    weights: &WeightVector,
    cfg: &AnalysisConfig,
    start: usize,
) -> Result<WindowOutcome> {
    let width = cfg.window.width;
    let start_time_ms = panel.time_ms(start);
    let mut power = Vec::with_capacity(panel.n_channels());
    let mut normalized = Vec::with_capacity(panel.n_channels());
    for (label, ch) in panel.labels().iter().zip(panel.channels()) {
        let seg = &ch[start..start + width];
        let gap = |reason: String| {
            Ok(WindowOutcome::Gap(WindowGap {
                window_start: start,
                start_time_ms,
                channel: label.clone(),
                reason,
            }))
        };
        if seg.iter().all(|&v| v == seg[0]) {
            return gap(format!("constant value {}", seg[0]));
        }
        let ps = est.estimate(seg, panel.dt())?;
        match normalize_spectrum(&ps) {
            Ok(p) => normalized.push(p),
            Err(Error::DegenerateSpectrum(msg)) => return gap(msg),
            Err(e) => return Err(e),
        }
        power.push(ps);
    }
    let ens = SpectrumEnsemble::new(normalized, panel.labels().to_vec())?;
    let report = DistanceReport::compute(&ens, weights, cfg.kl_floor, start)?;
    let spectra = cfg.keep_spectra.then(|| WindowSpectra {
        power,
        normalized: ens.spectra().to_vec(),
    });
    Ok(WindowOutcome::Row(WindowedMetricsRow {
        start_time_ms,
        report,
        spectra,
    }))
}

/// Slides the window over the panel and computes spectra, entropies, modes,
/// JS and the KL matrix for every window. Windows where any channel is
/// constant (or has no AC power) are skipped and reported as gaps.
pub fn analyze(panel: &SignalPanel, cfg: &AnalysisConfig) -> Result<Analysis> {
    cfg.validate()?;
    let panel = prepare_panel(panel, cfg)?;
    if panel.n_channels() < 2 {
        return Err(Error::Analysis(format!(
            "need at least 2 channels, got {}",
            panel.n_channels()
        )));
    }
    if panel.len() < cfg.window.width {
        return Err(Error::Analysis(format!(
            "panel has {} samples, window needs {}",
            panel.len(),
            cfg.window.width
        )));
    }
    let weights = match &cfg.weights {
        Some(w) if w.len() != panel.n_channels() => {
            return Err(Error::Dimension(format!(
                "{} weights for {} channels",
                w.len(),
                panel.n_channels()
            )))
        }
        Some(w) => w.clone(),
        None => WeightVector::uniform(panel.n_channels()),
    };
    let est = PeriodogramEstimator::new(cfg.window.width)?;
    let starts: Vec<usize> = cfg.window.starts(panel.len()).collect();
    let outcomes = starts
        .par_iter()
        .map(|&s| analyze_window(&panel, &est, &weights, cfg, s))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for o in outcomes {
        match o {
            WindowOutcome::Row(r) => rows.push(r),
            WindowOutcome::Gap(g) => {
                warn!(
                    "skipping window at {} ({}): channel {} {}",
                    g.window_start,
                    format_time(g.start_time_ms),
                    g.channel,
                    g.reason
                );
                gaps.push(g);
            }
        }
    }
    Ok(Analysis {
        labels: panel.labels().to_vec(),
        dt: panel.dt(),
        rows,
        gaps,
    })
}

/// Cross-correlation and origin-constrained slope of `b` against `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub correlation: f64,
    pub slope: f64,
}

pub fn compare_metric_series(a: &MetricSeries, b: &MetricSeries) -> Result<Comparison> {
    if a.timestamps != b.timestamps {
        return Err(Error::Alignment("metric series are on different window grids".into()));
    }
    Ok(Comparison {
        correlation: cross_correlation(a, b)?,
        slope: fit_proportionality(a, b)?,
    })
}

/// Parameters recorded in the first line of a metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub fields: BTreeMap<String, String>,
}

impl Provenance {
    pub fn from_config(cfg: &AnalysisConfig, labels: &[String], dt: f64) -> Self {
        let weights = match &cfg.weights {
            None => "uniform".to_string(),
            Some(w) => w.as_slice().iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
        };
        let mut fields = BTreeMap::new();
        fields.insert("width".into(), cfg.window.width.to_string());
        fields.insert("stride".into(), cfg.window.stride.to_string());
        fields.insert("dt".into(), dt.to_string());
        fields.insert("transform".into(), cfg.transform.to_string());
        fields.insert("skip".into(), cfg.skip.to_string());
        fields.insert("floor".into(), cfg.kl_floor.to_string());
        fields.insert("weights".into(), weights);
        fields.insert("channels".into(), labels.join(";"));
        let canonical = fields.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("\n");
        let digest = Sha256::digest(canonical.as_bytes());
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        fields.insert("config".into(), hash);
        Self { fields }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    fn line(&self) -> String {
        let body: Vec<String> = self.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# {METRICS_MARKER} {}", body.join(" "))
    }

    fn parse(line: &str) -> Result<Self> {
        let rest = line
            .trim_start_matches('#')
            .trim()
            .strip_prefix(METRICS_MARKER)
            .ok_or_else(|| Error::Format("missing metrics provenance line".into()))?;
        let mut fields = BTreeMap::new();
        for tok in rest.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad provenance token {tok:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        Ok(Self { fields })
    }

    /// Whether two metric files were produced on the same window grid.
    pub fn check_aligned(&self, other: &Provenance) -> Result<()> {
        for key in ["width", "stride", "dt"] {
            if self.get(key) != other.get(key) {
                return Err(Error::Alignment(format!(
                    "{key} differs: {:?} vs {:?}",
                    self.get(key),
                    other.get(key)
                )));
            }
        }
        Ok(())
    }
}

/// Writes the per-window metrics CSV: provenance line, then
/// `window_start_time,js,mean_kl,H_<ch>…,mode_<ch>…`.
pub fn write_metrics<W: Write>(analysis: &Analysis, cfg: &AnalysisConfig, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "{}", Provenance::from_config(cfg, &analysis.labels, analysis.dt).line())?;
    writeln!(out, "# window_start_time is the first sample of each window")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["window_start_time".to_string(), "js".into(), "mean_kl".into()];
    header.extend(analysis.labels.iter().map(|l| format!("H_{l}")));
    header.extend(analysis.labels.iter().map(|l| format!("mode_{l}")));
    w.write_record(&header)?;
    for row in &analysis.rows {
        let r = &row.report;
        let mut rec = vec![format_time(row.start_time_ms), r.js.to_string(), r.mean_kl.to_string()];
        rec.extend(r.entropies.iter().map(f64::to_string));
        rec.extend(r.modes.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format spectra: `window_start_time,channel,bin,frequency,power,probability`.
/// The DC bin has an empty probability.
pub fn write_spectra_dump<W: Write>(analysis: &Analysis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window_start_time", "channel", "bin", "frequency", "power", "probability"])?;
    for row in &analysis.rows {
        let Some(spectra) = &row.spectra else {
            return Err(Error::Analysis("analysis ran without keep_spectra".into()));
        };
        let t = format_time(row.start_time_ms);
        for ((label, ps), ns) in analysis.labels.iter().zip(&spectra.power).zip(&spectra.normalized) {
            for (n, (f, p)) in ps.rows().enumerate() {
                let prob = if n == 0 { String::new() } else { ns.probs()[n - 1].to_string() };
                w.write_record([t.clone(), label.clone(), n.to_string(), f.to_string(), p.to_string(), prob])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format KL matrices: `window_start_time,l,m,kl`.
pub fn write_kl_dump<W: Write>(analysis: &Analysis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window_start_time", "l", "m", "kl"])?;
    for row in &analysis.rows {
        let t = format_time(row.start_time_ms);
        for (l, m, v) in row.report.kl_matrix.entries() {
            w.write_record([t.clone(), analysis.labels[l].clone(), analysis.labels[m].clone(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A parsed metrics CSV.
#[derive(Debug, Clone)]
pub struct MetricsTable {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub times: Vec<i64>,
    pub values: Vec<Vec<f64>>,
}

impl MetricsTable {
    pub fn column(&self, name: &str) -> Result<MetricSeries> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format(format!("no column {name:?} in metrics file")))?;
        MetricSeries::new(self.times.clone(), self.values.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_metrics<R: Read>(input: R) -> Result<MetricsTable> {
    let mut input = input;
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or_default();
    let provenance = Provenance::parse(first)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("window_start_time") {
        return Err(Error::Format("metrics header must start with window_start_time".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        times.push(parse_timestamp(&rec[0])?);
        let row = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|_| Error::Format(format!("bad metric value {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != columns.len() {
            return Err(Error::Format(format!("metrics row with {} values", row.len())));
        }
        values.push(row);
    }
    Ok(MetricsTable {
        provenance,
        columns,
        times,
        values,
    })
}

/// Restricts two series to their common timestamps.
pub fn align_series(a: &MetricSeries, b: &MetricSeries) -> (MetricSeries, MetricSeries) {
    let index: BTreeMap<i64, f64> = b.timestamps.iter().copied().zip(b.values.iter().copied()).collect();
    let (mut ts, mut va, mut vb) = (Vec::new(), Vec::new(), Vec::new());
    for (&t, &v) in a.timestamps.iter().zip(&a.values) {
        if let Some(&w) = index.get(&t) {
            ts.push(t);
            va.push(v);
            vb.push(w);
        }
    }
    (
        MetricSeries {
            timestamps: ts.clone(),
            values: va,
        },
        MetricSeries {
            timestamps: ts,
            values: vb,
        },
    )
}

/// One point of a parameter-entropy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub h_a: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Time-averaged JS of the activity panel, per seed.
    pub per_seed: Vec<f64>,
    pub mean_js: f64,
}

/// Mean JS of the activity panel for each `H_a`, with the sensitivity
/// range centred on `center`. Runs are independent and execute in parallel.
pub fn sweep_parameter_entropy(
    base: &SimConfig,
    h_values: &[f64],
    seeds: &[u64],
    center: f64,
    analysis: &AnalysisConfig,
) -> Result<Vec<SweepPoint>> {
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let configs = h_values
        .iter()
        .map(|&h| base.clone().with_parameter_entropy(h, center))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let cfg = SimConfig {
                rng_seed: seed,
                ..configs[i].clone()
            };
            let panels = run_simulation(&cfg)?;
            let a = analyze(&panels.activity, analysis)?;
            if a.rows.is_empty() {
                return Err(Error::Analysis(format!("no usable windows for H_a={}", h_values[i])));
            }
            Ok(a.rows.iter().map(|r| r.report.js).sum::<f64>() / a.rows.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(configs
        .iter()
        .zip(h_values)
        .zip(results.chunks(seeds.len()))
        .map(|((cfg, &h_a), js)| SweepPoint {
            h_a,
            a_min: cfg.a_min,
            a_max: cfg.a_max,
            per_seed: js.to_vec(),
            mean_js: js.iter().sum::<f64>() / js.len() as f64,
        })
        .collect())
}

pub fn write_sweep<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h_a", "a_min", "a_max", "mean_js", "seeds"])?;
    for p in points {
        w.write_record([
            p.h_a.to_string(),
            p.a_min.to_string(),
            p.a_max.to_string(),
            p.mean_js.to_string(),
            p.per_seed.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
