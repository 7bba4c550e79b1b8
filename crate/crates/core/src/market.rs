//! Risk-neutral geometric Brownian motion.
//!
//! Under the pricing measure the asset follows `dS = r S dt + σ S dW`. Paths are
//! produced by exact log-Euler stepping, so the only error in a simulated
//! `S(t_i)` is sampling error. Each path draws its normals from its own ChaCha8
//! stream (`stream = path index`), which keeps path `i` identical no matter how
//! many paths are requested or in which order they are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{PricingError, Result};

/// Constants of the risk-neutral model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub s0: f64,
    pub r: f64,
    pub sigma: f64,
    pub t_horizon: f64,
}

impl MarketParams {
    pub fn new(s0: f64, r: f64, sigma: f64, t_horizon: f64) -> Result<Self> {
        let p = MarketParams {
            s0,
            r,
            sigma,
            t_horizon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(PricingError::param(
                "market.s0",
                "spot must be finite and > 0",
            ));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(PricingError::param(
                "market.r",
                "rate must be finite and >= 0",
            ));
        }
        // sigma = 0 is rejected outright; deterministic cases use a tiny sigma.
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(PricingError::param(
                "market.sigma",
                "volatility must be finite and > 0",
            ));
        }
        if !(self.t_horizon.is_finite() && self.t_horizon > 0.0) {
            return Err(PricingError::param(
                "market.t_horizon",
                "horizon must be finite and > 0",
            ));
        }
        Ok(())
    }

    /// Drift of `ln S` under the pricing measure.
    pub fn log_drift(&self) -> f64 {
        self.r - 0.5 * self.sigma * self.sigma
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.t_horizon).exp()
    }
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Uniform time grid `t_i = i T / n` with the last node pinned to `T`.
pub fn uniform_times(t_horizon: f64, n_steps: usize) -> Vec<f64> {
    let dt = t_horizon / n_steps as f64;
    let mut times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
    times[n_steps] = t_horizon;
    times
}

/// Simulated price paths on a shared time grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub times: Vec<f64>,
    values: Vec<f64>,
    n_paths: usize,
    pub seed: u64,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.times.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.times.len())
    }
}

/// Streaming generator behind [`simulate_paths`] and the Monte Carlo engine.
#[derive(Debug, Clone)]
pub struct PathGenerator {
    s0: f64,
    seed: u64,
    drift_dt: Vec<f64>,
    vol_sqrt_dt: Vec<f64>,
}

impl PathGenerator {
    pub fn new(params: &MarketParams, times: &[f64], seed: u64) -> Result<Self> {
        params.validate()?;
        if times.len() < 2 {
            return Err(PricingError::param(
                "n_steps",
                "need at least one time step",
            ));
        }
        let mu = params.log_drift();
        let mut drift_dt = Vec::with_capacity(times.len() - 1);
        let mut vol_sqrt_dt = Vec::with_capacity(times.len() - 1);
        for w in times.windows(2) {
            let dt = w[1] - w[0];
            if dt.is_nan() || dt <= 0.0 {
                return Err(PricingError::param(
                    "times",
                    "grid must be strictly increasing",
                ));
            }
            drift_dt.push(mu * dt);
            vol_sqrt_dt.push(params.sigma * dt.sqrt());
        }
        Ok(PathGenerator {
            s0: params.s0,
            seed,
            drift_dt,
            vol_sqrt_dt,
        })
    }

    fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Fills `out` (length `n_steps + 1`) with the path drawn from substream `index`.
    pub fn fill(&self, index: u64, out: &mut [f64]) {
        let mut rng = self.stream(index);
        let mut log_s = self.s0.ln();
        out[0] = self.s0;
        for (k, slot) in out[1..].iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_s += self.drift_dt[k] + self.vol_sqrt_dt[k] * z;
            *slot = log_s.exp();
        }
    }

    /// Fills an antithetic pair from substream `index`: `plus` uses the draws
    /// `Z`, `minus` uses `-Z`. `plus` equals `fill(index)`.
    pub fn fill_pair(&self, index: u64, plus: &mut [f64], minus: &mut [f64]) {
        let mut rng = self.stream(index);
        let ln_s0 = self.s0.ln();
        let (mut lp, mut lm) = (ln_s0, ln_s0);
        plus[0] = self.s0;
        minus[0] = self.s0;
        for k in 0..self.drift_dt.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let shock = self.vol_sqrt_dt[k] * z;
            lp += self.drift_dt[k] + shock;
            lm += self.drift_dt[k] - shock;
            plus[k + 1] = lp.exp();
            minus[k + 1] = lm.exp();
        }
    }
}

/// Simulates `n_paths` risk-neutral paths on a uniform grid of `n_steps` steps.
pub fn simulate_paths(
    params: &MarketParams,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathSet> {
    if n_paths == 0 {
        return Err(PricingError::param("n_paths", "must be >= 1"));
    }
    if n_steps == 0 {
        return Err(PricingError::param("n_steps", "must be >= 1"));
    }
    let times = uniform_times(params.t_horizon, n_steps);
    let gen = PathGenerator::new(params, &times, seed)?;
    let w = n_steps + 1;
    let mut values = vec![0.0; n_paths * w];
    for (i, row) in values.chunks_mut(w).enumerate() {
        gen.fill(i as u64, row);
    }
    Ok(PathSet {
        times,
        values,
        n_paths,
        seed,
    })
}

/// Simulates `n_pairs` antithetic pairs; paths `2k` and `2k + 1` are the
/// `+Z` / `-Z` members of pair `k`. This is the exact path set the Monte Carlo
/// engine uses when antithetic sampling is on.
pub fn simulate_antithetic_paths(
    params: &MarketParams,
    n_pairs: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathSet> {
    if n_pairs == 0 {
        return Err(PricingError::param("n_paths", "must be >= 1"));
    }
    if n_steps == 0 {
        return Err(PricingError::param("n_steps", "must be >= 1"));
    }
    let times = uniform_times(params.t_horizon, n_steps);
    let gen = PathGenerator::new(params, &times, seed)?;
    let w = n_steps + 1;
    let mut values = vec![0.0; 2 * n_pairs * w];
    for (k, pair) in values.chunks_mut(2 * w).enumerate() {
        let (plus, minus) = pair.split_at_mut(w);
        gen.fill_pair(k as u64, plus, minus);
    }
    Ok(PathSet {
        times,
        values,
        n_paths: 2 * n_pairs,
        seed,
    })
}

/// Payoff kinds with a closed-form risk-neutral expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalKind {
    Call { strike: f64 },
    Put { strike: f64 },
    Identity,
}

impl TerminalKind {
    pub fn apply(&self, s: f64) -> f64 {
        match *self {
            TerminalKind::Call { strike } => (s - strike).max(0.0),
            TerminalKind::Put { strike } => (strike - s).max(0.0),
            TerminalKind::Identity => s,
        }
    }
}

/// `E*[h(S(t))]` under the pricing measure, in closed form.
pub fn bs_expected_payoff(params: &MarketParams, h: TerminalKind, t: f64) -> Result<f64> {
    params.validate()?;
    if !(0.0..=params.t_horizon).contains(&t) {
        return Err(PricingError::param("t", "must lie in [0, T]"));
    }
    if let TerminalKind::Call { strike } | TerminalKind::Put { strike } = h {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(PricingError::param("strike", "must be finite and > 0"));
        }
    }
    if t == 0.0 {
        return Ok(h.apply(params.s0));
    }
    let forward = params.s0 * (params.r * t).exp();
    let call = |k: f64| {
        let sd = params.sigma * t.sqrt();
        let d1 = ((params.s0 / k).ln() + (params.r + 0.5 * params.sigma * params.sigma) * t) / sd;
        let d2 = d1 - sd;
        forward * norm_cdf(d1) - k * norm_cdf(d2)
    };
    Ok(match h {
        TerminalKind::Identity => forward,
        TerminalKind::Call { strike } => call(strike),
        // put-call parity on the undiscounted expectation
        TerminalKind::Put { strike } => call(strike) - (forward - strike),
    })
}
