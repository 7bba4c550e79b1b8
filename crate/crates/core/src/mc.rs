//! Monte Carlo evaluation of feedback policies under the pricing measure.
//!
//! The controlled state `(x, y)` is advanced alongside each path. The control
//! is read at the left end of every step and held over it, so it only ever
//! sees information up to `t_i`. In the adapted weight mode the control is
//! projected onto the set that can still finish with `∫ u dt = 1`:
//!
//! ```text
//! (1 - y - d1 (T - t_{i+1})) / Δt  <=  u  <=  (1 - y - d0 (T - t_{i+1})) / Δt
//! ```
//!
//! which pins the final step to the exact remainder.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::estimate::{EstimateMeta, Method, PriceEstimate};
use crate::market::{uniform_times, MarketParams, PathGenerator};
use crate::payoff::{
    eval_f, normalized_from_integrals, PayoffSpec, WeightIntegrals, WeightMode, ADMISSIBILITY_TOL,
};
use crate::policy::{Policy, PolicyKind};

/// Samples per parallel work unit. Fixed so the reduction order, and hence
/// the result, does not depend on the thread count.
const BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            n_steps: 200,
            seed: 42,
            antithetic: true,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(PricingError::param(
                "mc.n_paths",
                "need at least 2 paths for a standard error",
            ));
        }
        if self.n_steps == 0 {
            return Err(PricingError::param("mc.n_steps", "must be >= 1"));
        }
        Ok(())
    }

    /// Number of independent samples: antithetic pairs or single paths.
    fn n_samples(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
    projected: usize,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        Moments {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / n as f64,
            projected: self.projected + other.projected,
        }
    }
}

struct PathRunner<'a> {
    policy: &'a Policy,
    spec: &'a PayoffSpec,
    params: &'a MarketParams,
    times: &'a [f64],
}

impl PathRunner<'_> {
    /// Undiscounted payoff of one path, and whether the projection moved the
    /// policy's control anywhere.
    fn run(&self, path: &[f64]) -> Result<(f64, bool)> {
        let (spec, params) = (self.spec, self.params);
        let t_end = params.t_horizon;
        let (d0, d1) = (spec.bounds.d0, spec.bounds.d1);
        let adapted = spec.weight_mode == WeightMode::AdaptedFixedCumulative;
        let tol = 1e-9 * d1.max(1.0);
        let mut acc = WeightIntegrals::default();
        let mut projected = false;
        let mut f_left = eval_f(spec, params, path[0], self.times[0]);
        for i in 0..self.times.len() - 1 {
            let (t, dt) = (self.times[i], self.times[i + 1] - self.times[i]);
            let mut u = self.policy.control(t, acc.x, acc.y, path[i]);
            if adapted {
                let rest = (t_end - self.times[i + 1]).max(0.0);
                let lo = ((1.0 - acc.y - d1 * rest) / dt).max(d0);
                let hi = ((1.0 - acc.y - d0 * rest) / dt).min(d1);
                let v = u.max(lo).min(hi);
                if (v - u).abs() > tol {
                    projected = true;
                }
                u = v;
            }
            let f_right = eval_f(spec, params, path[i + 1], self.times[i + 1]);
            acc.step(u, dt, f_left, f_right);
            f_left = f_right;
        }
        let s_end = path[path.len() - 1];
        let value = if adapted {
            if (acc.y - 1.0).abs() > ADMISSIBILITY_TOL {
                return Err(PricingError::Admissibility(format!(
                    "projected control integrates to {} instead of 1",
                    acc.y
                )));
            }
            spec.g.apply(acc.x)
        } else {
            normalized_from_integrals(spec, params, acc, s_end)
        };
        Ok((value, projected))
    }
}

/// `e^{-rT} E*[F_u]` for the feedback policy, with its standard error.
///
/// With antithetic sampling `n_paths` is rounded up to an even count and the
/// standard error is computed from pair averages.
pub fn evaluate_policy(
    policy: &Policy,
    spec: &PayoffSpec,
    params: &MarketParams,
    cfg: &McConfig,
) -> Result<PriceEstimate> {
    spec.validate(params)?;
    cfg.validate()?;
    if policy.bounds.d0 < spec.bounds.d0 - 1e-12 || policy.bounds.d1 > spec.bounds.d1 + 1e-12 {
        return Err(PricingError::Admissibility(format!(
            "policy '{}' bounds [{}, {}] exceed the contract bounds [{}, {}]",
            policy.name, policy.bounds.d0, policy.bounds.d1, spec.bounds.d0, spec.bounds.d1
        )));
    }
    let times = uniform_times(params.t_horizon, cfg.n_steps);
    let gen = PathGenerator::new(params, &times, cfg.seed)?;
    let runner = PathRunner {
        policy,
        spec,
        params,
        times: &times,
    };
    let n_samples = cfg.n_samples();
    let n_blocks = n_samples.div_ceil(BLOCK);
    let width = cfg.n_steps + 1;
    let blocks: Vec<Result<Moments>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut plus = vec![0.0; width];
            let mut minus = vec![0.0; width];
            let mut m = Moments::default();
            for k in b * BLOCK..((b + 1) * BLOCK).min(n_samples) {
                let sample = if cfg.antithetic {
                    gen.fill_pair(k as u64, &mut plus, &mut minus);
                    let (a, pa) = runner.run(&plus)?;
                    let (c, pc) = runner.run(&minus)?;
                    m.projected += pa as usize + pc as usize;
                    0.5 * (a + c)
                } else {
                    gen.fill(k as u64, &mut plus);
                    let (a, pa) = runner.run(&plus)?;
                    m.projected += pa as usize;
                    a
                };
                if !sample.is_finite() {
                    return Err(PricingError::NumericalFailure {
                        slice: k,
                        reason: "non-finite payoff".into(),
                    });
                }
                m.push(sample);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for b in blocks {
        total = total.merge(b?);
    }
    let disc = params.discount();
    let stderr = if total.n > 1 {
        disc * (total.m2 / (total.n - 1) as f64 / total.n as f64).sqrt()
    } else {
        0.0
    };
    let n_paths = if cfg.antithetic {
        2 * n_samples
    } else {
        n_samples
    };
    let mut meta = EstimateMeta {
        n_paths: Some(n_paths),
        n_steps: Some(cfg.n_steps),
        seed: Some(cfg.seed),
        policy: Some(policy.name.clone()),
        ..EstimateMeta::default()
    };
    meta.diagnostics
        .insert("projected_paths".into(), total.projected as f64);
    if cfg.antithetic {
        meta.flags.push("antithetic".into());
    }
    if total.projected > 0 {
        meta.flags.push("feasibility_projection".into());
    }
    Ok(PriceEstimate {
        value: disc * total.mean,
        stderr,
        method: Method::MonteCarlo,
        meta,
    })
}

/// Candidate controls for the supremum: uniform, tail (only when `d0 = 0`),
/// a ladder of thresholds on `f`, and the floor `u ≡ d0`.
pub fn builtin_policies(spec: &PayoffSpec, params: &MarketParams) -> Vec<Policy> {
    let b = spec.bounds;
    let t_end = params.t_horizon;
    let mut out = vec![Policy::new(
        "uniform",
        b,
        PolicyKind::Constant(b.clamp(1.0 / t_end)),
    )];
    if b.d0 == 0.0 {
        out.push(Policy::new(
            "tail",
            b,
            PolicyKind::Tail {
                switch_time: (t_end - 1.0 / b.d1).max(0.0),
                high: b.d1,
                low: 0.0,
            },
        ));
    }
    let base = eval_f(spec, params, params.s0, t_end);
    for step in [0.0, 0.05, 0.1] {
        let level = base + step * params.s0;
        out.push(Policy::new(
            format!("threshold@{level}"),
            b,
            PolicyKind::Threshold {
                level,
                high: b.d1,
                low: b.d0,
                spec: *spec,
                params: *params,
            },
        ));
    }
    if !b.is_singleton() {
        out.push(Policy::new("floor", b, PolicyKind::Constant(b.d0)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::simulate_antithetic_paths;
    use crate::payoff::{payoff_adapted, ControlBounds, ControlPath, FKind, GKind, PaymentTiming};

    fn spec(f: FKind, g: GKind, d0: f64, d1: f64) -> PayoffSpec {
        PayoffSpec {
            f,
            timing: PaymentTiming::TerminalCompounded,
            g,
            weight_mode: WeightMode::AdaptedFixedCumulative,
            bounds: ControlBounds::new(d0, d1).unwrap(),
        }
    }

    fn cfg(n_paths: usize) -> McConfig {
        McConfig {
            n_paths,
            n_steps: 50,
            seed: 7,
            antithetic: true,
        }
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.3).collect();
        let mut seq = Moments::default();
        xs.iter().for_each(|&x| seq.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - seq.mean).abs() < 1e-12);
        assert!((m.m2 - seq.m2).abs() < 1e-8 * seq.m2);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = MarketParams::new(100.0, 0.02, 0.2, 1.0).unwrap();
        let s = spec(FKind::Call { strike: 100.0 }, GKind::Identity, 0.0, 2.0);
        let pol = &builtin_policies(&s, &p)[2];
        let a = evaluate_policy(pol, &s, &p, &cfg(5000)).unwrap();
        let b = evaluate_policy(pol, &s, &p, &cfg(5000)).unwrap();
        assert_eq!(a, b);
        assert!(a.stderr > 0.0);
    }

    #[test]
    fn singleton_matches_direct_quadrature() {
        let p = MarketParams::new(100.0, 0.03, 0.25, 1.0).unwrap();
        let s = PayoffSpec {
            bounds: ControlBounds::singleton(1.0).unwrap(),
            ..spec(FKind::Call { strike: 95.0 }, GKind::Identity, 0.0, 2.0)
        };
        let pol = &builtin_policies(&s, &p)[0];
        let c = cfg(4000);
        let est = evaluate_policy(pol, &s, &p, &c).unwrap();
        let paths = simulate_antithetic_paths(&p, 2000, c.n_steps, c.seed).unwrap();
        let u = ControlPath::constant(&paths.times, 1.0);
        let mean = paths
            .paths()
            .map(|x| payoff_adapted(&s, &p, x, &u).unwrap())
            .sum::<f64>()
            / 4000.0;
        assert!((est.value - p.discount() * mean).abs() < 1e-10 * mean);
    }

    #[test]
    fn projection_keeps_unit_budget() {
        let p = MarketParams::new(100.0, 0.0, 0.3, 1.0).unwrap();
        let s = spec(FKind::Identity, GKind::Identity, 0.2, 3.0);
        for pol in builtin_policies(&s, &p) {
            let est = evaluate_policy(&pol, &s, &p, &cfg(2000)).unwrap();
            assert!(
                (est.value - 100.0).abs() < 4.0 * est.stderr + 1e-9,
                "{}: {}",
                pol.name,
                est.value
            );
        }
        // the floor control always needs the end ramp
        let floor = builtin_policies(&s, &p).pop().unwrap();
        let est = evaluate_policy(&floor, &s, &p, &cfg(200)).unwrap();
        assert_eq!(est.diagnostic("projected_paths"), Some(200.0));
    }

    #[test]
    fn builtin_catalogue() {
        let p = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
        let names = |s: &PayoffSpec| {
            builtin_policies(s, &p)
                .into_iter()
                .map(|x| x.name)
                .collect::<Vec<_>>()
        };
        let with_tail = names(&spec(FKind::Identity, GKind::Identity, 0.0, 2.0));
        assert!(with_tail.contains(&"tail".to_string()));
        let no_tail = names(&spec(FKind::Identity, GKind::Identity, 0.5, 2.0));
        assert!(!no_tail.contains(&"tail".to_string()));
        for pol in builtin_policies(
            &spec(FKind::Call { strike: 100.0 }, GKind::Identity, 0.0, 2.0),
            &p,
        ) {
            if let PolicyKind::Threshold { .. } = pol.kind {
                for s in [50.0, 100.0, 150.0] {
                    let u = pol.control(0.3, 0.0, 0.0, s);
                    assert!(u == 0.0 || u == 2.0);
                }
            }
        }
    }

    #[test]
    fn rejects_wider_policy_bounds() {
        let p = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
        let s = spec(FKind::Identity, GKind::Identity, 0.0, 2.0);
        let pol = Policy::new(
            "wide",
            ControlBounds::new(0.0, 5.0).unwrap(),
            PolicyKind::Constant(1.0),
        );
        assert!(matches!(
            evaluate_policy(&pol, &s, &p, &cfg(10)),
            Err(PricingError::Admissibility(_))
        ));
    }
}
