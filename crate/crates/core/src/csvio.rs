//! Panel CSV files: `time,<channel>…`, one row per sample, RFC 3339 UTC times.
//! Lines starting with `#` are provenance comments and are skipped on read.

use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::ingest::parse_timestamp;
use crate::spectra::{SignalPanel, MS_PER_TIME_UNIT};

pub fn format_time(ms: i64) -> String {
    DateTime::<Utc>::from_timestamp_millis(ms)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
        .unwrap_or_else(|| ms.to_string())
}

pub fn write_panel<W: Write>(panel: &SignalPanel, comments: &[String], out: W) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(panel.labels().iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(panel.n_channels() + 1);
    for k in 0..panel.len() {
        row.clear();
        row.push(format_time(panel.time_ms(k)));
        row.extend(panel.channels().iter().map(|ch| ch[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a panel; the sampling period is taken from the first two rows and
/// every later row must keep that spacing.
pub fn read_panel<R: Read>(input: R) -> Result<SignalPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("time") || header.len() < 2 {
        return Err(Error::Format("panel header must be time,<channel>...".into()));
    }
    let labels: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut times = Vec::new();
    let mut channels = vec![Vec::new(); labels.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Format(format!("row {} has {} fields", i + 1, rec.len())));
        }
        times.push(parse_timestamp(&rec[0])?);
        for (ch, field) in channels.iter_mut().zip(rec.iter().skip(1)) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad value {field:?}", i + 1)))?;
            ch.push(v);
        }
    }
    if times.len() < 2 {
        return Err(Error::Format("panel needs at least 2 rows".into()));
    }
    let step = times[1] - times[0];
    if step <= 0 {
        return Err(Error::Format("panel times must increase".into()));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] - w[0] != step) {
        return Err(Error::Format(format!("non-uniform time step at row {}", i + 2)));
    }
    Ok(SignalPanel::new(labels, channels, step as f64 / MS_PER_TIME_UNIT)?.with_origin(times[0]))
}
