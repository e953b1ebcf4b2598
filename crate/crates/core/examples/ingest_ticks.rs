//! Resample a tick file into quotation-frequency and best-ask panels.
//!
//! cargo run --example ingest_ticks [ticks.csv[.gz]] [dt_minutes]

use std::path::PathBuf;

use specdist::csvio::write_panel;
use specdist::ingest::{build_panel, read_tick_file, MarketSeries, PanelField, ResampleGrid, TickCsvFormat};
use specdist::{Side, Transform};

fn main() -> specdist::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ticks_50.csv"));
    let dt_minutes: f64 = args.next().map(|s| s.parse().expect("dt_minutes")).unwrap_or(1.0);

    let parsed = read_tick_file(&path, &TickCsvFormat::default())?;
    println!("{} ticks, {} malformed rows", parsed.records.len(), parsed.malformed.len());
    let grid = ResampleGrid::covering(&parsed.records, (dt_minutes * 60_000.0) as i64)?;
    let series = MarketSeries::from_ticks(&parsed.records, grid, Side::Ask);

    let stdout = std::io::stdout();
    println!("\nquotes per minute:");
    write_panel(&build_panel(&series, PanelField::Activity, Transform::Raw)?, &[], stdout.lock())?;
    println!("\nbest ask, log returns:");
    write_panel(&build_panel(&series, PanelField::BestRate, Transform::LogReturn)?, &[], stdout.lock())?;
    Ok(())
}
