//! Spectral similarity across channels: Jensen-Shannon divergence of an
//! ensemble, the pairwise Kullback-Leibler matrix and its mean, plus the
//! cross-correlation and proportionality fits used to compare metric series.

use crate::error::{Error, Result};
use crate::spectra::{mode_frequency, shannon_entropy, spectral_entropy, NormalizedSpectrum};

/// Default lower clamp applied to both KL arguments before renormalizing.
pub const DEFAULT_KL_FLOOR: f64 = 1e-12;

/// `M ≥ 2` normalized spectra on one frequency grid.
#[derive(Debug, Clone)]
pub struct SpectrumEnsemble {
    spectra: Vec<NormalizedSpectrum>,
    labels: Vec<String>,
}

impl SpectrumEnsemble {
    pub fn new(spectra: Vec<NormalizedSpectrum>, labels: Vec<String>) -> Result<Self> {
        if spectra.len() < 2 {
            return Err(Error::Dimension(format!("ensemble needs >= 2 spectra, got {}", spectra.len())));
        }
        if labels.len() != spectra.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} spectra",
                labels.len(),
                spectra.len()
            )));
        }
        let first = &spectra[0];
        if let Some(i) = spectra.iter().position(|s| !s.same_grid(first)) {
            return Err(Error::Dimension(format!("spectrum {i} is on a different frequency grid")));
        }
        Ok(Self { spectra, labels })
    }

    /// Ensemble with labels `0..M`.
    pub fn unlabeled(spectra: Vec<NormalizedSpectrum>) -> Result<Self> {
        let labels = (0..spectra.len()).map(|i| i.to_string()).collect();
        Self::new(spectra, labels)
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn spectra(&self) -> &[NormalizedSpectrum] {
        &self.spectra
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Mixture weights `π_j > 0` with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Dimension("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Config(format!("weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Shannon entropy of the weights; an upper bound on JS.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.0)
    }
}

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KlMatrix {
    size: usize,
    data: Vec<f64>,
}

impl KlMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != size) {
            return Err(Error::Dimension(format!("row of length {} in {size}x{size} matrix", r.len())));
        }
        Ok(Self {
            size,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, l: usize, m: usize) -> f64 {
        self.data[l * self.size + m]
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i / self.size, i % self.size, v))
    }
}

fn floored(p: &[f64], floor: f64) -> Vec<f64> {
    if floor <= 0.0 {
        return p.to_vec();
    }
    let clamped: Vec<f64> = p.iter().map(|&v| v.max(floor)).collect();
    let total: f64 = clamped.iter().sum();
    clamped.into_iter().map(|v| v / total).collect()
}

fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        acc += a * (a / b).ln();
    }
    // rounding can leave tiny negatives when p and q agree
    acc.max(0.0)
}

/// `KL(p‖q) = Σ p log(p/q)` after clamping both arguments below by `floor`
/// and renormalizing. `floor = 0` is the literal definition and returns
/// `+∞` when `q` vanishes where `p` does not.
pub fn kl_spectral_distance(p: &NormalizedSpectrum, q: &NormalizedSpectrum, floor: f64) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::Dimension(format!(
            "spectra with {} and {} bins",
            p.probs().len(),
            q.probs().len()
        )));
    }
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::Config(format!("KL floor must be >= 0, got {floor}")));
    }
    Ok(kl_raw(&floored(p.probs(), floor), &floored(q.probs(), floor)))
}

/// Weighted mixture `Σ_j π_j p_j`.
pub fn mixture(ens: &SpectrumEnsemble, w: &WeightVector) -> Result<NormalizedSpectrum> {
    if ens.len() != w.len() {
        return Err(Error::Dimension(format!("{} spectra but {} weights", ens.len(), w.len())));
    }
    let bins = ens.spectra()[0].probs().len();
    let mut mix = vec![0.0; bins];
    for (s, &pi) in ens.spectra().iter().zip(w.as_slice()) {
        for (m, &p) in mix.iter_mut().zip(s.probs()) {
            *m += pi * p;
        }
    }
    Ok(NormalizedSpectrum::from_normalized(mix, ens.spectra()[0].dt()))
}

/// `JS = H(Σ π_j p_j) − Σ π_j H(p_j)`.
pub fn js_spectral_divergence(ens: &SpectrumEnsemble, w: &WeightVector) -> Result<f64> {
    let mix = mixture(ens, w)?;
    let mean_entropy: f64 = ens
        .spectra()
        .iter()
        .zip(w.as_slice())
        .map(|(s, &pi)| pi * spectral_entropy(s))
        .sum();
    Ok((spectral_entropy(&mix) - mean_entropy).max(0.0))
}

/// Pairwise `KL(p_l‖p_m)`; the diagonal is exactly zero. Not symmetric in general.
pub fn kl_matrix(ens: &SpectrumEnsemble, floor: f64) -> Result<KlMatrix> {
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::Config(format!("KL floor must be >= 0, got {floor}")));
    }
    let m = ens.len();
    let prepared: Vec<Vec<f64>> = ens.spectra().iter().map(|s| floored(s.probs(), floor)).collect();
    let mut data = vec![0.0; m * m];
    for l in 0..m {
        for k in 0..m {
            if l != k {
                data[l * m + k] = kl_raw(&prepared[l], &prepared[k]);
            }
        }
    }
    Ok(KlMatrix { size: m, data })
}

/// `⟨KL⟩ = (1/M²) Σ_l Σ_m KL_lm`; the zero diagonal counts towards `M²`.
pub fn mean_kl(matrix: &KlMatrix) -> f64 {
    let m = matrix.size() as f64;
    matrix.data.iter().sum::<f64>() / (m * m)
}

/// Distances for one analysis window.
#[derive(Debug, Clone)]
pub struct DistanceReport {
    pub window_start: usize,
    pub js: f64,
    pub kl_matrix: KlMatrix,
    pub mean_kl: f64,
    pub entropies: Vec<f64>,
    pub modes: Vec<f64>,
}

impl DistanceReport {
    pub fn compute(ens: &SpectrumEnsemble, w: &WeightVector, floor: f64, window_start: usize) -> Result<Self> {
        let js = js_spectral_divergence(ens, w)?;
        let kl_matrix = kl_matrix(ens, floor)?;
        let mean_kl = mean_kl(&kl_matrix);
        Ok(Self {
            window_start,
            js,
            mean_kl,
            kl_matrix,
            entropies: ens.spectra().iter().map(spectral_entropy).collect(),
            modes: ens.spectra().iter().map(mode_frequency).collect(),
        })
    }
}

/// Values of one metric on a time grid (ms since epoch).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("non-finite metric value {v}")));
        }
        Ok(Self { timestamps, values })
    }

    /// Series on an implicit grid `0, 1, 2, …`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let ts = (0..values.len() as i64).collect();
        Self::new(ts, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_pair(a: &MetricSeries, b: &MetricSeries) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("series of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Dimension("series need at least 2 points".into()));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson cross-correlation with population moments,
/// `(⟨ab⟩ − ⟨a⟩⟨b⟩) / (σ_a σ_b)`.
pub fn cross_correlation(a: &MetricSeries, b: &MetricSeries) -> Result<f64> {
    check_pair(a, b)?;
    if is_constant(&a.values) || is_constant(&b.values) {
        return Err(Error::UndefinedCorrelation("series has zero variance".into()));
    }
    // shifting by the first sample leaves every moment difference unchanged
    let (sa, sb) = (a.values[0], b.values[0]);
    let n = a.len() as f64;
    let (mut ma, mut mb, mut mab, mut maa, mut mbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (x, y) = (x - sa, y - sb);
        ma += x;
        mb += y;
        mab += x * y;
        maa += x * x;
        mbb += y * y;
    }
    let (ma, mb, mab, maa, mbb) = (ma / n, mb / n, mab / n, maa / n, mbb / n);
    let var_a = maa - ma * ma;
    let var_b = mbb - mb * mb;
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(Error::UndefinedCorrelation("series has zero variance".into()));
    }
    Ok(((mab - ma * mb) / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}

/// Least-squares slope of `y = k·x` through the origin: `Σxy / Σx²`.
pub fn fit_proportionality(x: &MetricSeries, y: &MetricSeries) -> Result<f64> {
    check_pair(x, y)?;
    let sxx: f64 = x.values.iter().map(|v| v * v).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all-zero regressor".into()));
    }
    let sxy: f64 = x.values.iter().zip(&y.values).map(|(a, b)| a * b).sum();
    Ok(sxy / sxx)
}

/// Ordinary least squares `y = slope·x + intercept`, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_linear(x: &MetricSeries, y: &MetricSeries) -> Result<LinearFit> {
    check_pair(x, y)?;
    if is_constant(&x.values) {
        return Err(Error::DegenerateFit("constant regressor".into()));
    }
    let n = x.len() as f64;
    let mx = x.values.iter().sum::<f64>() / n;
    let my = y.values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&a, &b) in x.values.iter().zip(&y.values) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ns(p: &[f64]) -> NormalizedSpectrum {
        NormalizedSpectrum::new(p.to_vec(), 1.0).unwrap()
    }

    fn series(v: &[f64]) -> MetricSeries {
        MetricSeries::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn kl_reference_values() {
        let p = ns(&[0.2, 0.3, 0.5]);
        assert!(kl_spectral_distance(&p, &p, 1e-12).unwrap().abs() < 1e-12);

        let a = ns(&[1.0, 0.0, 0.0]);
        let b = ns(&[0.0, 1.0, 0.0]);
        assert_eq!(kl_spectral_distance(&a, &b, 0.0).unwrap(), f64::INFINITY);
        assert!(kl_spectral_distance(&a, &b, 1e-12).unwrap().is_finite());

        let p = ns(&[0.75, 0.25]);
        let q = ns(&[0.5, 0.5]);
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        let got = kl_spectral_distance(&p, &q, 0.0).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.13081).abs() < 1e-5);
    }

    #[test]
    fn kl_grid_mismatch() {
        let p = ns(&[0.5, 0.5]);
        let q = ns(&[0.2, 0.3, 0.5]);
        assert!(matches!(kl_spectral_distance(&p, &q, 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn js_reference_values() {
        let same = SpectrumEnsemble::unlabeled(vec![ns(&[0.1, 0.2, 0.7]); 4]).unwrap();
        assert!(js_spectral_divergence(&same, &WeightVector::uniform(4)).unwrap().abs() < 1e-12);

        let disjoint = SpectrumEnsemble::unlabeled(vec![ns(&[1.0, 0.0]), ns(&[0.0, 1.0])]).unwrap();
        let js = js_spectral_divergence(&disjoint, &WeightVector::uniform(2)).unwrap();
        assert!((js - 2f64.ln()).abs() < 1e-15);

        let ens = SpectrumEnsemble::unlabeled(vec![ns(&[1.0, 0.0]), ns(&[0.5, 0.5])]).unwrap();
        let js = js_spectral_divergence(&ens, &WeightVector::uniform(2)).unwrap();
        assert!((js - 0.21576).abs() < 1e-5);
    }

    #[test]
    fn js_weight_mismatch() {
        let ens = SpectrumEnsemble::unlabeled(vec![ns(&[1.0, 0.0]), ns(&[0.5, 0.5])]).unwrap();
        assert!(matches!(
            js_spectral_divergence(&ens, &WeightVector::uniform(3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn ensemble_rejects_mixed_grids() {
        assert!(SpectrumEnsemble::unlabeled(vec![ns(&[1.0, 0.0]), ns(&[0.2, 0.3, 0.5])]).is_err());
        assert!(SpectrumEnsemble::unlabeled(vec![ns(&[1.0, 0.0])]).is_err());
    }

    #[test]
    fn weights_validated() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!((WeightVector::uniform(4).entropy() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kl_matrix_identical_is_zero() {
        let ens = SpectrumEnsemble::unlabeled(vec![ns(&[0.1, 0.2, 0.7]); 3]).unwrap();
        let m = kl_matrix(&ens, DEFAULT_KL_FLOOR).unwrap();
        assert!(m.entries().all(|(_, _, v)| v.abs() < 1e-15));
        assert_eq!(mean_kl(&m), 0.0);
    }

    #[test]
    fn kl_matrix_is_asymmetric() {
        let ens = SpectrumEnsemble::unlabeled(vec![ns(&[0.9, 0.1]), ns(&[0.5, 0.5])]).unwrap();
        let m = kl_matrix(&ens, 0.0).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        assert!((m.get(0, 1) - m.get(1, 0)).abs() > 1e-3);
    }

    #[test]
    fn mean_kl_divides_by_m_squared() {
        let m = KlMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(mean_kl(&m), 0.5);
        let z = KlMatrix::from_rows(vec![vec![0.0; 3]; 3]).unwrap();
        assert_eq!(mean_kl(&z), 0.0);
        assert!(matches!(
            KlMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0]]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn correlation_reference_values() {
        let a = series(&[1.0, 3.0, 2.0, 5.0]);
        assert!((cross_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg = series(&[-1.0, -3.0, -2.0, -5.0]);
        assert!((cross_correlation(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        let c = series(&[2.0, 2.0, 2.0, 2.0]);
        assert!(matches!(cross_correlation(&a, &c), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(cross_correlation(&a, &series(&[1.0, 2.0])), Err(Error::Dimension(_))));
    }

    #[test]
    fn proportionality_reference_values() {
        let x = series(&[0.3, 1.1, 2.5, 0.7]);
        let y = series(&x.values.iter().map(|v| 0.42 * v).collect::<Vec<_>>());
        assert!((fit_proportionality(&x, &y).unwrap() - 0.42).abs() < 1e-12);
        assert!((fit_proportionality(&series(&[1.0, 2.0]), &series(&[1.0, 1.0])).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(
            fit_proportionality(&series(&[0.0, 0.0]), &series(&[1.0, 1.0])),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn linear_fit_recovers_intercept() {
        let x = series(&[0.0, 1.0, 2.0, 3.0]);
        let y = series(&[1.0, 3.0, 5.0, 7.0]);
        let fit = fit_linear(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
    }
}
