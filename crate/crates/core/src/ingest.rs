//! Quote tick parsing and resampling into quotation-frequency and best-rate
//! series.
//!
//! Ticks are bucketed on a half-open grid `[kΔt, (k+1)Δt)`. The activity of
//! instrument `j` in bucket `k` is the number of side-matching quotes divided
//! by `Δt` (in minutes). The best rate is the bucket minimum ask (or maximum
//! bid), carried forward through empty buckets; buckets before an
//! instrument's first quote have no rate.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use chrono::DateTime;
use flate2::read::GzDecoder;
use log::warn;

use crate::error::{Error, Result};
use crate::spectra::{SignalPanel, MS_PER_TIME_UNIT};

pub const TICK_HEADER: [&str; 4] = ["timestamp", "instrument", "side", "price"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Ask,
    Bid,
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ask" => Ok(Side::Ask),
            "bid" => Ok(Side::Bid),
            other => Err(Error::Format(format!("unknown side {other:?}"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Ask => "ask",
            Side::Bid => "bid",
        })
    }
}

/// One quote event.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    /// Milliseconds since the Unix epoch, UTC.
    pub timestamp_ms: i64,
    pub instrument: String,
    pub side: Side,
    pub price: f64,
}

/// Tick CSV dialect options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickCsvFormat {
    /// Parsing aborts when more than this fraction of data rows is malformed.
    pub max_malformed_fraction: f64,
}

impl Default for TickCsvFormat {
    fn default() -> Self {
        Self {
            max_malformed_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalformedRow {
    /// 1-based line number in the input.
    pub line: u64,
    pub reason: String,
}

/// Parse outcome: good records in file order plus every rejected row.
#[derive(Debug, Clone, Default)]
pub struct ParsedTicks {
    pub records: Vec<TickRecord>,
    pub malformed: Vec<MalformedRow>,
}

impl ParsedTicks {
    pub fn total_rows(&self) -> usize {
        self.records.len() + self.malformed.len()
    }
}

/// Accepts RFC 3339 timestamps or integer milliseconds since the epoch.
pub fn parse_timestamp(s: &str) -> Result<i64> {
    let s = s.trim();
    if let Ok(ms) = s.parse::<i64>() {
        return Ok(ms);
    }
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.timestamp_millis())
        .map_err(|e| Error::Format(format!("bad timestamp {s:?}: {e}")))
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<TickRecord, String> {
    if row.len() != 4 {
        return Err(format!("expected 4 fields, got {}", row.len()));
    }
    let timestamp_ms = parse_timestamp(&row[0]).map_err(|e| e.to_string())?;
    let instrument = row[1].trim();
    if instrument.is_empty() {
        return Err("empty instrument".into());
    }
    let side = row[2].parse::<Side>().map_err(|e| e.to_string())?;
    let price: f64 = row[3]
        .trim()
        .parse()
        .map_err(|_| format!("bad price {:?}", &row[3]))?;
    if !(price.is_finite() && price > 0.0) {
        return Err(format!("price must be positive, got {price}"));
    }
    Ok(TickRecord {
        timestamp_ms,
        instrument: instrument.to_string(),
        side,
        price,
    })
}

/// Parses a `timestamp,instrument,side,price` CSV stream.
pub fn parse_ticks<R: Read>(reader: R, format: &TickCsvFormat) -> Result<ParsedTicks> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TICK_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "expected header {:?}, got {:?}",
            TICK_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut out = ParsedTicks::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => match parse_row(&row) {
                Ok(rec) => out.records.push(rec),
                Err(reason) => out.malformed.push(MalformedRow { line, reason }),
            },
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => out.malformed.push(MalformedRow {
                line,
                reason: e.to_string(),
            }),
        }
    }

    let total = out.total_rows();
    if total > 0 && out.malformed.len() as f64 > format.max_malformed_fraction * total as f64 {
        let first = &out.malformed[0];
        return Err(Error::TooManyMalformed {
            malformed: out.malformed.len(),
            total,
            limit: format.max_malformed_fraction * 100.0,
            first: format!("line {}: {}", first.line, first.reason),
        });
    }
    for m in &out.malformed {
        warn!("skipping malformed tick row at line {}: {}", m.line, m.reason);
    }
    Ok(out)
}

/// Opens a tick file, decompressing when the name ends in `.gz`.
pub fn read_tick_file(path: &Path, format: &TickCsvFormat) -> Result<ParsedTicks> {
    let file = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        parse_ticks(GzDecoder::new(file), format)
    } else {
        parse_ticks(file, format)
    }
}

/// Bucket layout: `bucket_count` buckets of `dt_ms` starting at `origin_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleGrid {
    pub origin_ms: i64,
    pub dt_ms: i64,
    pub bucket_count: usize,
}

impl ResampleGrid {
    pub fn new(origin_ms: i64, dt_ms: i64, bucket_count: usize) -> Result<Self> {
        if dt_ms <= 0 {
            return Err(Error::Config(format!("bucket width must be positive, got {dt_ms} ms")));
        }
        if bucket_count == 0 {
            return Err(Error::Config("grid needs at least one bucket".into()));
        }
        Ok(Self {
            origin_ms,
            dt_ms,
            bucket_count,
        })
    }

    /// Smallest grid aligned to multiples of `dt_ms` that contains every tick.
    pub fn covering(ticks: &[TickRecord], dt_ms: i64) -> Result<Self> {
        if dt_ms <= 0 {
            return Err(Error::Config(format!("bucket width must be positive, got {dt_ms} ms")));
        }
        let lo = ticks.iter().map(|t| t.timestamp_ms).min();
        let hi = ticks.iter().map(|t| t.timestamp_ms).max();
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Err(Error::Config("cannot derive a grid from zero ticks".into()));
        };
        let origin = lo.div_euclid(dt_ms) * dt_ms;
        let count = (hi - origin).div_euclid(dt_ms) + 1;
        Self::new(origin, dt_ms, count as usize)
    }

    /// Bucket width in panel time units (minutes).
    pub fn dt_units(&self) -> f64 {
        self.dt_ms as f64 / MS_PER_TIME_UNIT
    }

    /// Half-open bucket index of a timestamp, if it falls on the grid.
    pub fn bucket_of(&self, ts: i64) -> Option<usize> {
        let offset = ts - self.origin_ms;
        if offset < 0 {
            return None;
        }
        let k = (offset / self.dt_ms) as usize;
        (k < self.bucket_count).then_some(k)
    }

    pub fn bucket_start(&self, k: usize) -> i64 {
        self.origin_ms + k as i64 * self.dt_ms
    }
}

fn instruments(ticks: &[TickRecord]) -> Vec<String> {
    let mut names: Vec<String> = ticks.iter().map(|t| t.instrument.clone()).collect();
    names.sort();
    names.dedup();
    names
}

/// Quotes per time unit, `A_j(k) = C_j(k)/Δt`, for every instrument that
/// appears in `ticks` (on either side).
pub fn quotation_frequency(ticks: &[TickRecord], grid: &ResampleGrid, side: Side) -> BTreeMap<String, Vec<f64>> {
    let mut out: BTreeMap<String, Vec<f64>> = instruments(ticks)
        .into_iter()
        .map(|name| (name, vec![0.0; grid.bucket_count]))
        .collect();
    for t in ticks.iter().filter(|t| t.side == side) {
        if let Some(k) = grid.bucket_of(t.timestamp_ms) {
            if let Some(series) = out.get_mut(&t.instrument) {
                series[k] += 1.0;
            }
        }
    }
    let dt = grid.dt_units();
    for series in out.values_mut() {
        for v in series.iter_mut() {
            *v /= dt;
        }
    }
    out
}

/// Best ask (bucket minimum) or best bid (bucket maximum), forward-filled.
/// `None` marks buckets before the instrument's first quote. Instruments
/// without any side-matching quote on the grid are left out.
pub fn best_rates(ticks: &[TickRecord], grid: &ResampleGrid, side: Side) -> BTreeMap<String, Vec<Option<f64>>> {
    let mut extrema: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for t in ticks.iter().filter(|t| t.side == side) {
        let Some(k) = grid.bucket_of(t.timestamp_ms) else {
            continue;
        };
        let series = extrema
            .entry(t.instrument.clone())
            .or_insert_with(|| vec![None; grid.bucket_count]);
        series[k] = Some(match (series[k], side) {
            (None, _) => t.price,
            (Some(v), Side::Ask) => v.min(t.price),
            (Some(v), Side::Bid) => v.max(t.price),
        });
    }
    for name in instruments(ticks) {
        if !extrema.contains_key(&name) {
            warn!("instrument {name} has no {side} quotes on the grid; excluded from best rates");
        }
    }
    for series in extrema.values_mut() {
        for k in 1..series.len() {
            if series[k].is_none() {
                series[k] = series[k - 1];
            }
        }
    }
    extrema
}

/// Activity and best-rate series for one quote side on a common grid.
#[derive(Debug, Clone)]
pub struct MarketSeries {
    pub side: Side,
    pub grid: ResampleGrid,
    pub activity: BTreeMap<String, Vec<f64>>,
    pub best_rate: BTreeMap<String, Vec<Option<f64>>>,
}

impl MarketSeries {
    pub fn from_ticks(ticks: &[TickRecord], grid: ResampleGrid, side: Side) -> Self {
        Self {
            side,
            activity: quotation_frequency(ticks, &grid, side),
            best_rate: best_rates(ticks, &grid, side),
            grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    Raw,
    /// `log x(k) − log x(k−1)`; one sample shorter than the input.
    LogReturn,
}

impl Transform {
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        match self {
            Transform::Raw => Ok(values.to_vec()),
            Transform::LogReturn => {
                if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::Transform(format!("log-return needs positive values, got {v}")));
                }
                Ok(values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
            }
        }
    }

    /// Number of leading samples consumed by the transform.
    pub fn lag(&self) -> usize {
        match self {
            Transform::Raw => 0,
            Transform::LogReturn => 1,
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Transform::Raw),
            "log-return" => Ok(Transform::LogReturn),
            other => Err(Error::Config(format!("unknown transform {other:?} (raw | log-return)"))),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Raw => "raw",
            Transform::LogReturn => "log-return",
        })
    }
}

/// Which [`MarketSeries`] quantity to turn into a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelField {
    Activity,
    BestRate,
}

/// Builds a panel from one field of a [`MarketSeries`].
///
/// Activity is always passed through raw over the full grid. Best rates are
/// trimmed to the first bucket where every instrument has a rate, then
/// transformed.
pub fn build_panel(series: &MarketSeries, field: PanelField, transform: Transform) -> Result<SignalPanel> {
    let dt = series.grid.dt_units();
    match field {
        PanelField::Activity => {
            let (labels, channels): (Vec<_>, Vec<_>) =
                series.activity.iter().map(|(k, v)| (k.clone(), v.clone())).unzip();
            if labels.is_empty() {
                return Err(Error::InvalidPanel("no instruments".into()));
            }
            Ok(SignalPanel::new(labels, channels, dt)?.with_origin(series.grid.origin_ms))
        }
        PanelField::BestRate => {
            if series.best_rate.is_empty() {
                return Err(Error::InvalidPanel("no instrument has quotes on this side".into()));
            }
            let first_full = series
                .best_rate
                .values()
                .map(|v| v.iter().position(Option::is_some).unwrap_or(v.len()))
                .max()
                .unwrap_or(0);
            let mut labels = Vec::new();
            let mut channels = Vec::new();
            for (name, values) in &series.best_rate {
                let trimmed: Vec<f64> = values[first_full..].iter().map(|v| v.unwrap_or(f64::NAN)).collect();
                labels.push(name.clone());
                channels.push(transform.apply(&trimmed)?);
            }
            let origin = series.grid.bucket_start(first_full + transform.lag());
            Ok(SignalPanel::new(labels, channels, dt)?.with_origin(origin))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: i64 = 60_000;

    fn tick(ts: i64, inst: &str, side: Side, price: f64) -> TickRecord {
        TickRecord {
            timestamp_ms: ts,
            instrument: inst.into(),
            side,
            price,
        }
    }

    #[test]
    fn parses_reference_row() {
        let csv = "timestamp,instrument,side,price\n2006-10-16T00:00:01Z,EUR/USD,ask,1.2612\n";
        let parsed = parse_ticks(csv.as_bytes(), &TickCsvFormat::default()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let r = &parsed.records[0];
        assert_eq!(r.side, Side::Ask);
        assert_eq!(r.instrument, "EUR/USD");
        assert_eq!(r.price, 1.2612);
        assert_eq!(r.timestamp_ms, 1_160_956_801_000);
    }

    #[test]
    fn empty_body() {
        let parsed = parse_ticks("timestamp,instrument,side,price\n".as_bytes(), &TickCsvFormat::default()).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parsed.malformed.is_empty());
    }

    #[test]
    fn bad_header_is_format_error() {
        let err = parse_ticks("time,pair,side,px\n".as_bytes(), &TickCsvFormat::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn negative_price_is_malformed() {
        let mut csv = String::from("timestamp,instrument,side,price\n");
        for i in 0..120 {
            csv.push_str(&format!("{},EUR/USD,bid,1.26\n", i * 1000));
        }
        csv.push_str("5000,EUR/USD,ask,-1\n");
        let parsed = parse_ticks(csv.as_bytes(), &TickCsvFormat::default()).unwrap();
        assert_eq!(parsed.records.len(), 120);
        assert_eq!(parsed.malformed.len(), 1);
        assert_eq!(parsed.malformed[0].line, 122);
    }

    #[test]
    fn too_many_malformed_aborts() {
        let csv = "timestamp,instrument,side,price\n0,EUR/USD,ask,1.2\n1,EUR/USD,ask,-1\n";
        let err = parse_ticks(csv.as_bytes(), &TickCsvFormat::default()).unwrap_err();
        assert!(matches!(err, Error::TooManyMalformed { malformed: 1, total: 2, .. }));
        let lenient = TickCsvFormat {
            max_malformed_fraction: 0.5,
        };
        assert_eq!(parse_ticks(csv.as_bytes(), &lenient).unwrap().records.len(), 1);
    }

    #[test]
    fn counts_per_bucket() {
        let ticks = vec![
            tick(0, "EUR/USD", Side::Ask, 1.0),
            tick(10_000, "EUR/USD", Side::Ask, 1.0),
            tick(59_999, "EUR/USD", Side::Ask, 1.0),
            tick(30_000, "EUR/USD", Side::Bid, 1.0),
            tick(MIN, "EUR/USD", Side::Ask, 1.0),
        ];
        let grid = ResampleGrid::new(0, MIN, 3).unwrap();
        let a = quotation_frequency(&ticks, &grid, Side::Ask);
        assert_eq!(a["EUR/USD"], vec![3.0, 1.0, 0.0]);
    }

    #[test]
    fn frequency_scales_with_bucket_width() {
        let ticks: Vec<_> = (0..4).map(|i| tick(i * 1000, "X", Side::Ask, 1.0)).collect();
        let grid = ResampleGrid::new(0, 2 * MIN, 1).unwrap();
        assert_eq!(quotation_frequency(&ticks, &grid, Side::Ask)["X"], vec![2.0]);
    }

    #[test]
    fn one_tick_per_minute_for_a_day() {
        let ticks: Vec<_> = (0..1440).map(|i| tick(i * MIN + 500, "X", Side::Ask, 1.0)).collect();
        let grid = ResampleGrid::covering(&ticks, MIN).unwrap();
        assert_eq!(grid.bucket_count, 1440);
        assert!(quotation_frequency(&ticks, &grid, Side::Ask)["X"].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn best_ask_bid_and_forward_fill() {
        let ticks = vec![
            tick(1_000, "EUR/USD", Side::Ask, 1.2613),
            tick(2_000, "EUR/USD", Side::Ask, 1.2611),
            tick(3_000, "EUR/USD", Side::Ask, 1.2615),
            tick(1_000, "USD/JPY", Side::Bid, 116.21),
            tick(2_000, "USD/JPY", Side::Bid, 116.25),
        ];
        let grid = ResampleGrid::new(0, MIN, 3).unwrap();
        let ask = best_rates(&ticks, &grid, Side::Ask);
        assert_eq!(ask["EUR/USD"], vec![Some(1.2611); 3]);
        assert!(!ask.contains_key("USD/JPY"));
        let bid = best_rates(&ticks, &grid, Side::Bid);
        assert_eq!(bid["USD/JPY"][0], Some(116.25));
    }

    #[test]
    fn leading_gap_is_missing() {
        let ticks = vec![tick(2 * MIN, "X", Side::Ask, 2.0), tick(0, "Y", Side::Ask, 3.0)];
        let grid = ResampleGrid::new(0, MIN, 4).unwrap();
        let rates = best_rates(&ticks, &grid, Side::Ask);
        assert_eq!(rates["X"], vec![None, None, Some(2.0), Some(2.0)]);
        let series = MarketSeries::from_ticks(&ticks, grid, Side::Ask);
        let panel = build_panel(&series, PanelField::BestRate, Transform::Raw).unwrap();
        assert_eq!(panel.len(), 2);
        assert_eq!(panel.origin_ms(), 2 * MIN);
        assert_eq!(panel.channel(1), &[3.0, 3.0]);
    }

    #[test]
    fn transforms() {
        assert_eq!(Transform::Raw.apply(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        let e = std::f64::consts::E;
        let lr = Transform::LogReturn.apply(&[1.0, e, e]).unwrap();
        assert!((lr[0] - 1.0).abs() < 1e-15 && lr[1] == 0.0);
        assert!(matches!(Transform::LogReturn.apply(&[1.0, 0.0]), Err(Error::Transform(_))));
    }

    #[test]
    fn activity_panel_is_raw() {
        let ticks = vec![tick(0, "X", Side::Ask, 1.0), tick(MIN, "X", Side::Ask, 1.0), tick(MIN, "X", Side::Ask, 1.0)];
        let series = MarketSeries::from_ticks(&ticks, ResampleGrid::covering(&ticks, MIN).unwrap(), Side::Ask);
        let p = build_panel(&series, PanelField::Activity, Transform::LogReturn).unwrap();
        assert_eq!(p.channel(0), &[1.0, 2.0]);
    }

    #[test]
    fn grid_validation() {
        assert!(ResampleGrid::new(0, 0, 1).is_err());
        assert!(ResampleGrid::new(0, MIN, 0).is_err());
        let g = ResampleGrid::new(MIN, MIN, 2).unwrap();
        assert_eq!(g.bucket_of(MIN - 1), None);
        assert_eq!(g.bucket_of(2 * MIN), Some(1));
        assert_eq!(g.bucket_of(3 * MIN), None);
    }
}
