//! Jensen-Shannon divergence and the KL matrix for a small ensemble.
//!
//! cargo run --example spectral_distances

use specdist::distances::{DistanceReport, DEFAULT_KL_FLOOR};
use specdist::{NormalizedSpectrum, SpectrumEnsemble, WeightVector};

fn main() -> specdist::Result<()> {
    let spectra = vec![
        NormalizedSpectrum::new(vec![0.7, 0.2, 0.1], 1.0)?,
        NormalizedSpectrum::new(vec![0.1, 0.2, 0.7], 1.0)?,
        NormalizedSpectrum::new(vec![0.3, 0.4, 0.3], 1.0)?,
    ];
    let ens = SpectrumEnsemble::new(spectra, vec!["low".into(), "high".into(), "flat".into()])?;
    let report = DistanceReport::compute(&ens, &WeightVector::uniform(3), DEFAULT_KL_FLOOR, 0)?;

    println!("JS     = {:.6}", report.js);
    println!("<KL>   = {:.6}", report.mean_kl);
    for (l, name) in ens.labels().iter().enumerate() {
        let row: Vec<String> = (0..3).map(|m| format!("{:8.4}", report.kl_matrix.get(l, m))).collect();
        println!("KL({name:>4} || .) {}", row.join(" "));
    }

    // Weights shift the mixture; the divergence is capped by their entropy.
    let w = WeightVector::new(vec![0.8, 0.1, 0.1])?;
    let skewed = specdist::js_spectral_divergence(&ens, &w)?;
    println!("JS with weights (0.8, 0.1, 0.1) = {skewed:.6} <= H(w) = {:.6}", w.entropy());
    Ok(())
}
