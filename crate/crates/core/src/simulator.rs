//! Threshold agent-based market with `N` agents trading `M` commodities.
//!
//! Each step, agent `i` forms one scalar perception
//!
//! ```text
//! x_i(t) = Σ_k c(|θS_ik|, |θB_ik|) · (1/T) Σ_{τ=1..T} r_k(t−τ) + s_i(t),   c(x, y) = 1/(x² + y²)
//! ```
//!
//! and takes attitude `y_ij ∈ {−1, 0, 1}` per commodity by comparing
//! `Φ_ij = a_ij (x_i + ξ_i)` with its sell/buy thresholds. Returns are
//! `r_j = γ/N Σ_i y_ij`, rates evolve as `R_j ← R_j·exp(r_j)` and activity is
//! `A_j = Σ_i |y_ij| / Δt`.
//!
//! Simulation is sequential in time. All randomness comes from one ChaCha8
//! stream seeded by `rng_seed`: the population is drawn first (per agent,
//! per commodity: θB, θS, a), then every step draws `s_1..s_N` followed by
//! `ξ_1..ξ_N`.

use std::collections::VecDeque;
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SignalPanel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_agents: usize,
    pub n_commodities: usize,
    /// Recorded steps after warm-up.
    pub horizon: usize,
    /// Steps run and discarded before recording.
    pub warmup: usize,
    /// Moving-average span `T` of past returns in the perception.
    pub ma_span: usize,
    pub gamma: f64,
    pub noise_sigma_xi: f64,
    pub noise_sigma_s: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub theta_buy_min: f64,
    pub theta_buy_max: f64,
    pub theta_sell_min: f64,
    pub theta_sell_max: f64,
    pub rng_seed: u64,
    /// Model tick in minutes.
    pub dt: f64,
    /// Redraw every agent parameter at each step instead of once at start.
    pub resample_params: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_agents: 2000,
            n_commodities: 20,
            horizon: 4096,
            warmup: 512,
            ma_span: 1,
            gamma: 1.2e-6,
            noise_sigma_xi: 0.02,
            noise_sigma_s: 0.02,
            a_min: 0.5,
            a_max: 1.5,
            theta_buy_min: 0.01,
            theta_buy_max: 0.02,
            theta_sell_min: -0.02,
            theta_sell_max: -0.01,
            rng_seed: 0,
            dt: 1.0,
            resample_params: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_agents < 1 || self.n_commodities < 1 {
            return fail("n_agents and n_commodities must be >= 1".into());
        }
        if self.ma_span < 1 {
            return fail("ma_span must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.noise_sigma_xi >= 0.0 && self.noise_sigma_s >= 0.0) {
            return fail("noise sigmas must be >= 0".into());
        }
        if !(self.a_min > 0.0 && self.a_min < self.a_max && self.a_max.is_finite()) {
            return fail(format!(
                "sensitivity range must satisfy 0 < a_min < a_max, got [{}, {}]",
                self.a_min, self.a_max
            ));
        }
        if !(0.0 < self.theta_buy_min && self.theta_buy_min <= self.theta_buy_max) {
            return fail("buy thresholds must satisfy 0 < min <= max".into());
        }
        if !(self.theta_sell_min <= self.theta_sell_max && self.theta_sell_max < 0.0) {
            return fail("sell thresholds must satisfy min <= max < 0".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        Ok(())
    }

    /// Parses flat `key = value` text (TOML syntax); missing keys keep defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// Sensitivity range `[c − w/2, c + w/2]` with `w = exp(h_a)`.
    pub fn with_parameter_entropy(mut self, h_a: f64, center: f64) -> Result<Self> {
        let width = h_a.exp();
        self.a_min = center - width / 2.0;
        self.a_max = center + width / 2.0;
        self.validate()?;
        Ok(self)
    }
}

/// Diversity of the sensitivity range, `H_a = log(a₂ − a₁)`.
pub fn parameter_entropy(a_min: f64, a_max: f64) -> Result<f64> {
    if !(a_max > a_min) {
        return Err(Error::Config(format!("need a_max > a_min, got [{a_min}, {a_max}]")));
    }
    Ok((a_max - a_min).ln())
}

/// Per (agent, commodity) thresholds and sensitivities, row-major by agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub n_agents: usize,
    pub n_commodities: usize,
    pub theta_buy: Vec<f64>,
    pub theta_sell: Vec<f64>,
    pub sensitivity: Vec<f64>,
    /// `c_ij = 1/(θS_ij² + θB_ij²)`.
    pub attention: Vec<f64>,
}

impl AgentParams {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_commodities + j
    }

    pub fn theta_buy(&self, i: usize, j: usize) -> f64 {
        self.theta_buy[self.idx(i, j)]
    }

    pub fn theta_sell(&self, i: usize, j: usize) -> f64 {
        self.theta_sell[self.idx(i, j)]
    }

    pub fn sensitivity(&self, i: usize, j: usize) -> f64 {
        self.sensitivity[self.idx(i, j)]
    }

    pub fn attention(&self, i: usize, j: usize) -> f64 {
        self.attention[self.idx(i, j)]
    }
}

/// Attention weight `c(x, y) = 1/(x² + y²)`.
pub fn attention(sell_mag: f64, buy_mag: f64) -> f64 {
    1.0 / (sell_mag * sell_mag + buy_mag * buy_mag)
}

fn draw_population(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<AgentParams> {
    let uni = |lo: f64, hi: f64| Uniform::new_inclusive(lo, hi).map_err(|e| Error::Config(e.to_string()));
    let buy = uni(cfg.theta_buy_min, cfg.theta_buy_max)?;
    let sell = uni(cfg.theta_sell_min, cfg.theta_sell_max)?;
    let sens = uni(cfg.a_min, cfg.a_max)?;
    let size = cfg.n_agents * cfg.n_commodities;
    let mut p = AgentParams {
        n_agents: cfg.n_agents,
        n_commodities: cfg.n_commodities,
        theta_buy: Vec::with_capacity(size),
        theta_sell: Vec::with_capacity(size),
        sensitivity: Vec::with_capacity(size),
        attention: Vec::with_capacity(size),
    };
    for _ in 0..size {
        let b = buy.sample(rng);
        let s = sell.sample(rng);
        p.theta_buy.push(b);
        p.theta_sell.push(s);
        p.sensitivity.push(sens.sample(rng));
        p.attention.push(attention(s.abs(), b.abs()));
    }
    Ok(p)
}

/// Samples a population from a fresh stream seeded with `cfg.rng_seed`.
pub fn init_population(cfg: &SimConfig) -> Result<AgentParams> {
    cfg.validate()?;
    draw_population(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.rng_seed))
}

/// Rates, last attitudes, the moving-average return ring and the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub rates: Vec<f64>,
    /// `y_ij`, row-major by agent.
    pub attitudes: Vec<i8>,
    /// Most recent `ma_span` return vectors, newest at the back.
    pub returns: VecDeque<Vec<f64>>,
    /// `A_j(t)` of the most recent step.
    pub activity: Vec<f64>,
    pub t: u64,
}

impl MarketState {
    pub fn initial(cfg: &SimConfig) -> Self {
        let m = cfg.n_commodities;
        Self {
            rates: vec![1.0; m],
            attitudes: vec![0; cfg.n_agents * m],
            returns: (0..cfg.ma_span).map(|_| vec![0.0; m]).collect(),
            activity: vec![0.0; m],
            t: 0,
        }
    }

    /// `(1/T) Σ_τ r_k(t−τ)` per commodity.
    pub fn mean_returns(&self) -> Vec<f64> {
        let m = self.rates.len();
        let span = self.returns.len() as f64;
        let mut mean = vec![0.0; m];
        for r in &self.returns {
            for (acc, v) in mean.iter_mut().zip(r) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= span);
        mean
    }

    pub fn last_returns(&self) -> &[f64] {
        self.returns.back().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Per-agent draws for one step: exogenous information `s_i` and
/// interpretation noise `ξ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise {
    pub exo: Vec<f64>,
    pub xi: Vec<f64>,
}

impl StepNoise {
    pub fn draw(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let s = Normal::new(0.0, cfg.noise_sigma_s).map_err(|e| Error::Config(e.to_string()))?;
        let xi = Normal::new(0.0, cfg.noise_sigma_xi).map_err(|e| Error::Config(e.to_string()))?;
        let exo = (0..cfg.n_agents).map(|_| s.sample(rng)).collect();
        let xi = (0..cfg.n_agents).map(|_| xi.sample(rng)).collect();
        Ok(Self { exo, xi })
    }

    pub fn zero(n_agents: usize) -> Self {
        Self {
            exo: vec![0.0; n_agents],
            xi: vec![0.0; n_agents],
        }
    }
}

/// Perception `x_i` of every agent.
pub fn perceive(state: &MarketState, params: &AgentParams, exo: &[f64]) -> Vec<f64> {
    let mean = state.mean_returns();
    let m = params.n_commodities;
    params
        .attention
        .chunks_exact(m)
        .zip(exo)
        .map(|(c, s)| c.iter().zip(&mean).map(|(c, r)| c * r).sum::<f64>() + s)
        .collect()
}

/// Attitude from stimulus `Φ` and thresholds; both bounds are inclusive.
pub fn attitude(phi: f64, theta_sell: f64, theta_buy: f64) -> i8 {
    if phi >= theta_buy {
        1
    } else if phi <= theta_sell {
        -1
    } else {
        0
    }
}

/// Attitudes `y_ij` of agent `agent` for every commodity.
pub fn decide(agent: usize, perception: f64, params: &AgentParams, noise: f64) -> Vec<i8> {
    let u = perception + noise;
    (0..params.n_commodities)
        .map(|j| {
            let phi = params.sensitivity(agent, j) * u;
            attitude(phi, params.theta_sell(agent, j), params.theta_buy(agent, j))
        })
        .collect()
}

/// One market step with the given noise draws.
pub fn step_market(state: &MarketState, params: &AgentParams, cfg: &SimConfig, noise: &StepNoise) -> MarketState {
    let n = params.n_agents;
    let m = params.n_commodities;
    let x = perceive(state, params, &noise.exo);

    let mut attitudes = Vec::with_capacity(n * m);
    let mut net = vec![0i64; m];
    let mut active = vec![0u64; m];
    for (i, (xi, nz)) in x.iter().zip(&noise.xi).enumerate() {
        let u = xi + nz;
        let row = i * m;
        for j in 0..m {
            let y = attitude(params.sensitivity[row + j] * u, params.theta_sell[row + j], params.theta_buy[row + j]);
            net[j] += y as i64;
            active[j] += y.unsigned_abs() as u64;
            attitudes.push(y);
        }
    }

    let scale = cfg.gamma / n as f64;
    let r: Vec<f64> = net.iter().map(|&s| scale * s as f64).collect();
    let rates = state.rates.iter().zip(&r).map(|(rate, r)| rate * r.exp()).collect();
    let activity = active.iter().map(|&a| a as f64 / cfg.dt).collect();

    let mut returns = state.returns.clone();
    returns.pop_front();
    returns.push_back(r);
    MarketState {
        rates,
        attitudes,
        returns,
        activity,
        t: state.t + 1,
    }
}

/// A running simulation: configuration, population, state and RNG stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    params: AgentParams,
    state: MarketState,
    rng: ChaCha8Rng,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let params = draw_population(&cfg, &mut rng)?;
        let state = MarketState::initial(&cfg);
        Ok(Self { cfg, params, state, rng })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    /// Advances one step and returns the new state.
    pub fn step(&mut self) -> Result<&MarketState> {
        if self.cfg.resample_params {
            self.params = draw_population(&self.cfg, &mut self.rng)?;
        }
        let noise = StepNoise::draw(&self.cfg, &mut self.rng)?;
        self.state = step_market(&self.state, &self.params, &self.cfg, &noise);
        Ok(&self.state)
    }

    /// Resets rates to 1 without touching attitudes or return history.
    pub fn rebase_rates(&mut self) {
        self.state.rates.iter_mut().for_each(|r| *r = 1.0);
    }
}

/// Rates and activity recorded over the horizon.
#[derive(Debug, Clone)]
pub struct SimPanels {
    pub rates: SignalPanel,
    pub activity: SignalPanel,
}

pub fn commodity_labels(m: usize) -> Vec<String> {
    let digits = m.to_string().len().max(2);
    (1..=m).map(|j| format!("C{j:0digits$}")).collect()
}

/// Runs warm-up, rebases rates to 1, then records `horizon` steps of
/// `R_j(t)` (before that step's update) and `A_j(t)`.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimPanels> {
    let mut sim = Simulation::new(cfg.clone())?;
    let labels = commodity_labels(cfg.n_commodities);
    if cfg.horizon == 0 {
        return Ok(SimPanels {
            rates: SignalPanel::empty(labels.clone(), cfg.dt),
            activity: SignalPanel::empty(labels, cfg.dt),
        });
    }
    if cfg.horizon < 2 {
        return Err(Error::Config("horizon must be 0 or >= 2".into()));
    }
    for _ in 0..cfg.warmup {
        sim.step()?;
    }
    sim.rebase_rates();

    let m = cfg.n_commodities;
    let mut rates = vec![Vec::with_capacity(cfg.horizon); m];
    let mut activity = vec![Vec::with_capacity(cfg.horizon); m];
    for _ in 0..cfg.horizon {
        let before: Vec<f64> = sim.state().rates.clone();
        let st = sim.step()?;
        for j in 0..m {
            rates[j].push(before[j]);
            activity[j].push(st.activity[j]);
        }
    }
    Ok(SimPanels {
        rates: SignalPanel::new(labels.clone(), rates, cfg.dt)?,
        activity: SignalPanel::new(labels, activity, cfg.dt)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_agents: 50,
            n_commodities: 3,
            horizon: 64,
            warmup: 8,
            ..SimConfig::default()
        }
    }

    #[test]
    fn parameter_entropy_values() {
        assert_eq!(parameter_entropy(0.0, 1.0).unwrap(), 0.0);
        assert!((parameter_entropy(0.0, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert!((parameter_entropy(1.0, 1.5).unwrap() + 0.6931).abs() < 1e-4);
        assert!(parameter_entropy(1.0, 1.0).is_err());
    }

    #[test]
    fn population_support_and_determinism() {
        let cfg = SimConfig::default();
        let p = init_population(&cfg).unwrap();
        assert!(p.theta_buy.iter().all(|&b| (0.01..=0.02).contains(&b)));
        assert!(p.theta_sell.iter().all(|&s| (-0.02..=-0.01).contains(&s)));
        assert!(p.sensitivity.iter().all(|&a| (0.5..=1.5).contains(&a)));
        assert_eq!(p, init_population(&cfg).unwrap());
    }

    #[test]
    fn narrow_sensitivity_range() {
        let cfg = SimConfig {
            a_min: 1.0 - 1e-9,
            a_max: 1.0,
            n_agents: 10,
            ..SimConfig::default()
        };
        let p = init_population(&cfg).unwrap();
        assert!(p.sensitivity.iter().all(|&a| (a - 1.0).abs() <= 1e-9));
        let h = parameter_entropy(cfg.a_min, cfg.a_max).unwrap();
        assert!((h + 20.7).abs() < 0.05);
        let bad = SimConfig {
            a_min: 1.0,
            a_max: 1.0,
            ..SimConfig::default()
        };
        assert!(matches!(init_population(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn perception_examples() {
        let cfg = SimConfig {
            n_agents: 1,
            n_commodities: 1,
            ..SimConfig::default()
        };
        let params = AgentParams {
            n_agents: 1,
            n_commodities: 1,
            theta_buy: vec![0.01],
            theta_sell: vec![-0.01],
            sensitivity: vec![1.0],
            attention: vec![attention(0.01, 0.01)],
        };
        let mut st = MarketState::initial(&cfg);
        assert_eq!(perceive(&st, &params, &[0.0]), vec![0.0]);
        st.returns = VecDeque::from(vec![vec![1e-4]]);
        let x = perceive(&st, &params, &[0.0])[0];
        assert!((x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decision_boundaries() {
        assert_eq!(attitude(0.0, -0.01, 0.01), 0);
        assert_eq!(attitude(0.015, -0.01, 0.015), 1);
        assert_eq!(attitude(-0.01, -0.01, 0.015), -1);
        let params = AgentParams {
            n_agents: 1,
            n_commodities: 1,
            theta_buy: vec![0.02],
            theta_sell: vec![-0.02],
            sensitivity: vec![2.0],
            attention: vec![attention(0.02, 0.02)],
        };
        assert_eq!(decide(0, -0.011, &params, 0.0), vec![-1]);
    }

    #[test]
    fn all_waiting_keeps_rates() {
        let cfg = small();
        let params = init_population(&cfg).unwrap();
        let st = MarketState::initial(&cfg);
        let next = step_market(&st, &params, &cfg, &StepNoise::zero(cfg.n_agents));
        assert_eq!(next.rates, vec![1.0; 3]);
        assert_eq!(next.activity, vec![0.0; 3]);
        assert_eq!(next.last_returns(), &[0.0; 3]);
    }

    #[test]
    fn all_buying_saturates() {
        let cfg = small();
        let params = init_population(&cfg).unwrap();
        let st = MarketState::initial(&cfg);
        let noise = StepNoise {
            exo: vec![10.0; cfg.n_agents],
            xi: vec![0.0; cfg.n_agents],
        };
        let next = step_market(&st, &params, &cfg, &noise);
        for j in 0..3 {
            assert_eq!(next.last_returns()[j], cfg.gamma);
            assert_eq!(next.rates[j], cfg.gamma.exp());
            assert_eq!(next.activity[j], cfg.n_agents as f64);
        }
    }

    #[test]
    fn zero_noise_is_fixed_point() {
        let cfg = SimConfig {
            noise_sigma_s: 0.0,
            noise_sigma_xi: 0.0,
            ..small()
        };
        let out = run_simulation(&cfg).unwrap();
        for j in 0..3 {
            assert!(out.rates.channel(j).iter().all(|&r| r == 1.0));
            assert!(out.activity.channel(j).iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn zero_horizon_is_empty() {
        let cfg = SimConfig { horizon: 0, ..small() };
        let out = run_simulation(&cfg).unwrap();
        assert!(out.rates.is_empty() && out.activity.is_empty());
        assert_eq!(out.rates.n_channels(), 3);
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = SimConfig {
            rng_seed: 7,
            gamma: 2e-6,
            ..SimConfig::default()
        };
        assert_eq!(SimConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
        let partial = SimConfig::from_kv_str("n_agents = 10\n# comment\nrng_seed = 3\n").unwrap();
        assert_eq!(partial.n_agents, 10);
        assert_eq!(partial.rng_seed, 3);
        assert!(SimConfig::from_kv_str("bogus = 1").is_err());
        assert!(SimConfig::from_kv_str("ma_span = 0").is_err());
    }

    #[test]
    fn sensitivity_range_from_entropy() {
        let cfg = SimConfig::default().with_parameter_entropy(0.0, 1.0).unwrap();
        assert!((cfg.a_min - 0.5).abs() < 1e-15 && (cfg.a_max - 1.5).abs() < 1e-15);
        assert!(SimConfig::default().with_parameter_entropy(1.0, 1.0).is_err());
    }

    #[test]
    fn labels_are_padded() {
        assert_eq!(commodity_labels(3), vec!["C01", "C02", "C03"]);
        assert_eq!(commodity_labels(120)[0], "C001");
    }
}
