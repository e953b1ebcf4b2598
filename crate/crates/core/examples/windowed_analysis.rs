//! Sliding-window JS and <KL> over a simulated activity panel, with the
//! proportionality fit between them.
//!
//! cargo run --release --example windowed_analysis

use specdist::csvio::format_time;
use specdist::{analyze, cross_correlation, fit_proportionality, run_simulation, AnalysisConfig, SimConfig};

fn main() -> specdist::Result<()> {
    let cfg = SimConfig {
        horizon: 8192,
        ..SimConfig::default()
    };
    let panels = run_simulation(&cfg)?;
    let analysis = analyze(&panels.activity, &AnalysisConfig::default())?;

    println!("{} windows, {} skipped", analysis.rows.len(), analysis.gaps.len());
    for row in analysis.rows.iter().take(5) {
        println!(
            "{}  JS={:.3e}  <KL>={:.3e}  H(C01)={:.3}",
            format_time(row.start_time_ms),
            row.report.js,
            row.report.mean_kl,
            row.report.entropies[0]
        );
    }
    let js = analysis.js_series();
    let kl = analysis.mean_kl_series();
    println!("JS ~ k <KL>: k = {:.3}", fit_proportionality(&kl, &js)?);
    println!("correlation  = {:.3}", cross_correlation(&kl, &js)?);
    Ok(())
}
