mod common;

use common::{ReferenceConfig, ReferenceMarket};
use specdist::simulator::{commodity_labels, Simulation};
use specdist::{run_simulation, SimConfig};

fn small(seed: u64) -> SimConfig {
    SimConfig {
        n_agents: 200,
        n_commodities: 5,
        ma_span: 3,
        gamma: 2e-6,
        rng_seed: seed,
        horizon: 256,
        warmup: 32,
        ..SimConfig::default()
    }
}

fn reference(cfg: &SimConfig) -> ReferenceMarket {
    ReferenceMarket::new(&ReferenceConfig {
        n: cfg.n_agents,
        m: cfg.n_commodities,
        span: cfg.ma_span,
        gamma: cfg.gamma,
        sig_s: cfg.noise_sigma_s,
        sig_xi: cfg.noise_sigma_xi,
        a: (cfg.a_min, cfg.a_max),
        theta_b: (cfg.theta_buy_min, cfg.theta_buy_max),
        theta_s: (cfg.theta_sell_min, cfg.theta_sell_max),
        seed: cfg.rng_seed,
        dt: cfg.dt,
    })
}

#[test]
fn steps_match_scalar_reference() {
    for seed in [0, 1, 2] {
        let cfg = small(seed);
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        let mut oracle = reference(&cfg);
        for _ in 0..10 {
            let st = sim.step().unwrap().clone();
            oracle.step();
            assert_eq!(st.activity, oracle.activity);
            for (a, b) in st.rates.iter().zip(&oracle.rates) {
                assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }
}

#[test]
fn returns_bounded_and_rates_telescope() {
    let cfg = small(4);
    let mut sim = Simulation::new(cfg.clone()).unwrap();
    let mut cum = vec![0.0; cfg.n_commodities];
    for _ in 0..10_000 {
        let st = sim.step().unwrap();
        for (c, r) in cum.iter_mut().zip(st.last_returns()) {
            assert!(r.abs() <= cfg.gamma);
            *c += r;
        }
        for a in &st.activity {
            let count = a * cfg.dt;
            assert!(count.fract() == 0.0 && count >= 0.0 && count <= cfg.n_agents as f64);
        }
    }
    for (r, c) in sim.state().rates.iter().zip(&cum) {
        assert!((r - c.exp()).abs() <= 1e-9 * r);
    }
}

#[test]
fn same_seed_same_panels() {
    let a = run_simulation(&small(7)).unwrap();
    let b = run_simulation(&small(7)).unwrap();
    assert_eq!(a.rates, b.rates);
    assert_eq!(a.activity, b.activity);
    let c = run_simulation(&small(8)).unwrap();
    assert_ne!(a.activity, c.activity);
}

#[test]
fn panels_start_at_unit_rates() {
    let cfg = small(3);
    let p = run_simulation(&cfg).unwrap();
    assert_eq!(p.rates.len(), cfg.horizon);
    assert_eq!(p.rates.labels(), commodity_labels(5).as_slice());
    assert!(p.rates.channels().iter().all(|c| c[0] == 1.0));
}

#[test]
fn nonpositive_gain_is_rejected() {
    for gamma in [0.0, -1e-3, f64::NAN] {
        let cfg = SimConfig { gamma, ..small(5) };
        assert!(matches!(run_simulation(&cfg), Err(specdist::Error::Config(_))));
    }
}
