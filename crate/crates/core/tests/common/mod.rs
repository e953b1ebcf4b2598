//! Independent reference computations used as test oracles. Nothing here
//! calls into the library's numerical paths.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

/// Hanning-windowed periodogram by direct O(N²) summation.
pub fn direct_periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|bin| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &v) in x.iter().enumerate() {
                let w = 0.5 * (1.0 - (2.0 * PI * k as f64 / (nf - 1.0)).cos());
                let ang = -2.0 * PI * ((k * bin) % n) as f64 / nf;
                re += w * v * ang.cos();
                im += w * v * ang.sin();
            }
            (re * re + im * im) / (nf * nf)
        })
        .collect()
}

pub fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.ln();
        }
    }
    h
}

pub fn kl(p: &[f64], q: &[f64], floor: f64) -> f64 {
    let prep = |v: &[f64]| {
        let c: Vec<f64> = v.iter().map(|&x| if x < floor { floor } else { x }).collect();
        let s: f64 = c.iter().sum();
        c.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (p, q) = (prep(p), prep(q));
    let mut acc = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            acc += p[i] * (p[i].ln() - q[i].ln());
        }
    }
    acc
}

pub fn two_pass_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma).powi(2);
        vb += (b[i] - mb).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Random probability vector; with `sparse`, roughly a quarter of bins are exact zeros.
pub fn random_probs(rng: &mut impl Rng, bins: usize, sparse: bool) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..bins)
            .map(|_| {
                if sparse && rng.random::<f64>() < 0.25 {
                    0.0
                } else {
                    -rng.random::<f64>().max(1e-300).ln()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.into_iter().map(|v| v / total).collect();
        }
    }
}

pub fn gaussian_noise(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// Scalar re-implementation of the market model, written with plain loops
/// and the same random draw order (population: θB, θS, a per agent and
/// commodity; each step: all s_i, then all ξ_i).
pub struct ReferenceMarket {
    n: usize,
    m: usize,
    gamma: f64,
    dt: f64,
    theta_b: Vec<Vec<f64>>,
    theta_s: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    history: Vec<Vec<f64>>,
    span: usize,
    sig_s: f64,
    sig_xi: f64,
    rng: ChaCha8Rng,
    pub rates: Vec<f64>,
    pub activity: Vec<f64>,
}

pub struct ReferenceConfig {
    pub n: usize,
    pub m: usize,
    pub span: usize,
    pub gamma: f64,
    pub sig_s: f64,
    pub sig_xi: f64,
    pub a: (f64, f64),
    pub theta_b: (f64, f64),
    pub theta_s: (f64, f64),
    pub seed: u64,
    pub dt: f64,
}

impl ReferenceMarket {
    pub fn new(c: &ReferenceConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let ub = Uniform::new_inclusive(c.theta_b.0, c.theta_b.1).unwrap();
        let us = Uniform::new_inclusive(c.theta_s.0, c.theta_s.1).unwrap();
        let ua = Uniform::new_inclusive(c.a.0, c.a.1).unwrap();
        let mut theta_b = vec![vec![0.0; c.m]; c.n];
        let mut theta_s = vec![vec![0.0; c.m]; c.n];
        let mut a = vec![vec![0.0; c.m]; c.n];
        for i in 0..c.n {
            for j in 0..c.m {
                theta_b[i][j] = ub.sample(&mut rng);
                theta_s[i][j] = us.sample(&mut rng);
                a[i][j] = ua.sample(&mut rng);
            }
        }
        Self {
            n: c.n,
            m: c.m,
            gamma: c.gamma,
            dt: c.dt,
            theta_b,
            theta_s,
            a,
            history: vec![vec![0.0; c.m]; c.span],
            span: c.span,
            sig_s: c.sig_s,
            sig_xi: c.sig_xi,
            rng,
            rates: vec![1.0; c.m],
            activity: vec![0.0; c.m],
        }
    }

    pub fn step(&mut self) {
        let ns = Normal::new(0.0, self.sig_s).unwrap();
        let nx = Normal::new(0.0, self.sig_xi).unwrap();
        let s: Vec<f64> = (0..self.n).map(|_| ns.sample(&mut self.rng)).collect();
        let xi: Vec<f64> = (0..self.n).map(|_| nx.sample(&mut self.rng)).collect();
        let mut buy_minus_sell = vec![0.0; self.m];
        let mut active = vec![0.0; self.m];
        for i in 0..self.n {
            let mut x = 0.0;
            for k in 0..self.m {
                let c = 1.0 / (self.theta_s[i][k].powi(2) + self.theta_b[i][k].powi(2));
                let mut avg = 0.0;
                for tau in 0..self.span {
                    avg += self.history[tau][k];
                }
                x += c * avg / self.span as f64;
            }
            x += s[i];
            for j in 0..self.m {
                let phi = self.a[i][j] * (x + xi[i]);
                if phi >= self.theta_b[i][j] {
                    buy_minus_sell[j] += 1.0;
                    active[j] += 1.0;
                } else if phi <= self.theta_s[i][j] {
                    buy_minus_sell[j] -= 1.0;
                    active[j] += 1.0;
                }
            }
        }
        let r: Vec<f64> = buy_minus_sell.iter().map(|b| self.gamma / self.n as f64 * b).collect();
        for j in 0..self.m {
            self.rates[j] *= r[j].exp();
            self.activity[j] = active[j] / self.dt;
        }
        self.history.remove(0);
        self.history.push(r);
    }
}
