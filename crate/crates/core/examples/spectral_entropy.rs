//! Spectral entropy of a pure tone versus white noise.
//!
//! cargo run --example spectral_entropy

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use specdist::spectra::PeriodogramEstimator;
use specdist::{mode_frequency, normalize_spectrum, spectral_entropy};

fn main() -> specdist::Result<()> {
    let n = 1024;
    let est = PeriodogramEstimator::new(n)?;

    let tone: Vec<f64> = (0..n).map(|k| (2.0 * PI * 37.0 * k as f64 / n as f64).sin()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let noise: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();

    println!("max entropy log(N-1) = {:.4}", ((n - 1) as f64).ln());
    for (name, x) in [("tone", &tone), ("noise", &noise)] {
        let p = normalize_spectrum(&est.estimate(x, 1.0)?)?;
        println!(
            "{name:>5}: H = {:.4} nats, mode = {:.5} cycles/min",
            spectral_entropy(&p),
            mode_frequency(&p)
        );
    }
    Ok(())
}
