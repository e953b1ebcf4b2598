//! Correlate the JS series of log-return rates with that of activity.
//!
//! cargo run --release --example compare_series

use specdist::{analyze, compare_metric_series, run_simulation, AnalysisConfig, SimConfig, Transform};

fn main() -> specdist::Result<()> {
    let panels = run_simulation(&SimConfig {
        horizon: 10_000,
        ..SimConfig::default()
    })?;
    let rates = analyze(
        &panels.rates,
        &AnalysisConfig {
            transform: Transform::LogReturn,
            ..AnalysisConfig::default()
        },
    )?;
    // Log returns lose the first sample; skip it on the raw side so both
    // series share window start times.
    let activity = analyze(
        &panels.activity,
        &AnalysisConfig {
            skip: 1,
            ..AnalysisConfig::default()
        },
    )?;
    let c = compare_metric_series(&rates.js_series(), &activity.js_series())?;
    println!("windows     = {}", rates.rows.len());
    println!("correlation = {:.4}", c.correlation);
    println!("slope       = {:.4}", c.slope);
    Ok(())
}
