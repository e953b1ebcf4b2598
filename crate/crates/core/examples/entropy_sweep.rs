//! Mean activity JS as the spread of agent sensitivities grows.
//!
//! cargo run --release --example entropy_sweep

use specdist::pipeline::sweep_parameter_entropy;
use specdist::{AnalysisConfig, SimConfig};

fn main() -> specdist::Result<()> {
    let base = SimConfig {
        horizon: 3000,
        ..SimConfig::default()
    };
    let h = [-2.5, -1.75, -1.0, -0.25, 0.5];
    let points = sweep_parameter_entropy(&base, &h, &[0, 1, 2], 1.0, &AnalysisConfig::default())?;
    println!("{:>6} {:>14} {:>12}", "H_a", "a range", "mean JS");
    for p in &points {
        println!("{:>6.2} [{:.3}, {:.3}] {:>12.4e}", p.h_a, p.a_min, p.a_max, p.mean_js);
    }
    Ok(())
}
