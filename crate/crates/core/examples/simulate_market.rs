//! Run the threshold agent market and summarise the recorded panels.
//!
//! cargo run --release --example simulate_market [seed]

use specdist::simulator::Simulation;
use specdist::{run_simulation, SimConfig};

fn main() -> specdist::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse().expect("seed")).unwrap_or(0);
    let cfg = SimConfig {
        horizon: 2000,
        rng_seed: seed,
        ..SimConfig::default()
    };
    println!("config:\n{}", cfg.to_kv_string());

    let panels = run_simulation(&cfg)?;
    for j in 0..3 {
        let a = panels.activity.channel(j);
        let r = panels.rates.channel(j);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        println!(
            "{}: mean activity {:.1} of {} agents, final rate {:.6}",
            panels.activity.labels()[j],
            mean,
            cfg.n_agents,
            r[r.len() - 1]
        );
    }

    // Stepping by hand exposes the full state, including attitudes.
    let mut sim = Simulation::new(SimConfig { n_agents: 10, n_commodities: 3, ..cfg })?;
    for _ in 0..3 {
        let st = sim.step()?;
        println!("t={} returns {:?} buyers of C01: {}", st.t, st.last_returns(), st.attitudes.iter().step_by(3).filter(|&&y| y == 1).count());
    }
    Ok(())
}
