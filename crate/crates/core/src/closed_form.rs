//! Deferred-exercise ("tail") strategy and its closed-form price.
//!
//! With `f(S, t) = e^{r(T-t)} h(S)` for convex `h`, `u ∈ [0, L]` and
//! `∫ u dt <= 1`, spending the whole budget as late as possible is optimal when
//! either `α⁻¹ h(α x)` is nondecreasing in `α ∈ (0, 1]` or `r = 0`. The
//! strategy is `u = L` on `[T - 1/L, T]` and `0` before, and its price is
//!
//! ```text
//! e^{-rT} L ∫_{T-1/L}^{T} E*[f(S(t), t)] dt = L ∫_{T-1/L}^{T} e^{-rt} E*[h(S(t))] dt.
//! ```
//!
//! The factor in front is `L`: the strategy pays `L f` per unit time over an
//! interval of length `1/L`. The alternative `1/L` factor is reported as the
//! `inverse_factor_value` diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::estimate::{EstimateMeta, Method, PriceEstimate};
use crate::market::{bs_expected_payoff, MarketParams, TerminalKind};
use crate::payoff::{ControlBounds, FKind, GKind, PaymentTiming, PayoffSpec, WeightMode};
use crate::policy::{Policy, PolicyKind};
use crate::quadrature::AdaptiveGaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStrategyConfig {
    /// Control cap `L`.
    pub level: f64,
    pub h: TerminalKind,
    pub params: MarketParams,
}

impl TailStrategyConfig {
    /// Reads `L = d1`, `h` and the market off a contract, refusing contracts
    /// outside the theorem's setting.
    pub fn from_spec(spec: &PayoffSpec, params: &MarketParams) -> Result<Self> {
        spec.validate(params)?;
        if spec.g != GKind::Identity {
            return Err(PricingError::Refused(
                "the tail-strategy price needs g = identity".into(),
            ));
        }
        if spec.weight_mode != WeightMode::AdaptedFixedCumulative {
            return Err(PricingError::Refused(
                "the tail-strategy price needs the adapted weight mode".into(),
            ));
        }
        if spec.bounds.d0 != 0.0 {
            return Err(PricingError::Refused(
                "the tail-strategy price needs d0 = 0".into(),
            ));
        }
        if spec.timing == PaymentTiming::Spot && params.r != 0.0 {
            return Err(PricingError::Refused(
                "spot-paid benefits are not of the form e^{r(T-t)} h(S) when r > 0".into(),
            ));
        }
        let h = match spec.f {
            FKind::Identity => TerminalKind::Identity,
            FKind::Call { strike } => TerminalKind::Call { strike },
            FKind::Put { strike } => TerminalKind::Put { strike },
        };
        Ok(TailStrategyConfig {
            level: spec.bounds.d1,
            h,
            params: *params,
        })
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.level.is_finite() && self.level > 0.0) {
            return Err(PricingError::param(
                "level",
                "control cap L must be finite and > 0",
            ));
        }
        Ok(())
    }
}

/// The deterministic tail control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailStrategy {
    pub level: f64,
    pub switch_time: f64,
    /// `L T <= 1`: the whole horizon is spent at `u = L`.
    pub degenerate: bool,
}

impl TailStrategy {
    pub fn cumulative(&self, t_horizon: f64) -> f64 {
        self.level * (t_horizon - self.switch_time)
    }

    pub fn policy(&self) -> Policy {
        Policy::new(
            "tail",
            ControlBounds {
                d0: 0.0,
                d1: self.level,
            },
            PolicyKind::Tail {
                switch_time: self.switch_time,
                high: self.level,
                low: 0.0,
            },
        )
    }
}

pub fn tail_strategy(cfg: &TailStrategyConfig) -> Result<TailStrategy> {
    cfg.validate()?;
    let t_end = cfg.params.t_horizon;
    let degenerate = cfg.level * t_end <= 1.0;
    let switch_time = if degenerate {
        0.0
    } else {
        t_end - 1.0 / cfg.level
    };
    Ok(TailStrategy {
        level: cfg.level,
        switch_time,
        degenerate,
    })
}

/// Convexity hypotheses of the late-exercise optimality result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hypotheses {
    /// `α⁻¹ h(α x)` nondecreasing in `α`.
    pub scaling_monotone: bool,
    pub zero_rate: bool,
    /// `h` is convex and not affine.
    pub strictly_convex: bool,
}

impl Hypotheses {
    pub fn check(h: TerminalKind, params: &MarketParams) -> Self {
        Hypotheses {
            scaling_monotone: matches!(h, TerminalKind::Call { .. } | TerminalKind::Identity),
            zero_rate: params.r == 0.0,
            strictly_convex: !matches!(h, TerminalKind::Identity),
        }
    }

    pub fn hold(&self) -> bool {
        self.scaling_monotone || self.zero_rate
    }
}

/// Price of the tail strategy by adaptive Gauss–Legendre quadrature of the
/// closed-form expectation, relative tolerance 1e-8.
pub fn tail_strategy_price(cfg: &TailStrategyConfig) -> Result<PriceEstimate> {
    let strat = tail_strategy(cfg)?;
    let hyp = Hypotheses::check(cfg.h, &cfg.params);
    if !hyp.hold() {
        return Err(PricingError::Refused(
            "h = (K - x)^+ with r > 0: α⁻¹h(αx) is not nondecreasing in α and r ≠ 0".into(),
        ));
    }
    let p = cfg.params;
    let quad = AdaptiveGaussLegendre::with_tolerance(1e-8);
    // expectation errors are impossible here: t stays inside [0, T] and strikes were validated
    let integrand = |t: f64| {
        (-p.r * t).exp()
            * bs_expected_payoff(&p, cfg.h, t.clamp(0.0, p.t_horizon)).unwrap_or(f64::NAN)
    };
    if let TerminalKind::Call { strike } | TerminalKind::Put { strike } = cfg.h {
        bs_expected_payoff(&p, TerminalKind::Call { strike }, 0.0)?;
    }
    let integral = quad.integrate(integrand, strat.switch_time, p.t_horizon);
    if !integral.is_finite() {
        return Err(PricingError::NumericalFailure {
            slice: 0,
            reason: "non-finite closed-form integral".into(),
        });
    }
    let value = cfg.level * integral;
    let mut meta = EstimateMeta {
        policy: Some("tail".into()),
        ..EstimateMeta::default()
    };
    meta.diagnostics.insert("level".into(), cfg.level);
    meta.diagnostics
        .insert("switch_time".into(), strat.switch_time);
    meta.diagnostics
        .insert("inverse_factor_value".into(), integral / cfg.level);
    meta.diagnostics.insert("rel_tol".into(), 1e-8);
    if strat.degenerate {
        meta.flags.push("degenerate_regime".into());
    }
    if hyp.scaling_monotone {
        meta.flags.push("hypothesis_scaling".into());
    }
    if hyp.zero_rate {
        meta.flags.push("hypothesis_zero_rate".into());
    }
    if !hyp.strictly_convex {
        meta.flags.push("h_affine".into());
    }
    Ok(PriceEstimate::deterministic(
        value,
        Method::ClosedForm,
        meta,
    ))
}

/// Price of the uniform control `u ≡ 1/T` for the same `h`, the natural
/// baseline the tail strategy should dominate.
pub fn uniform_strategy_price(cfg: &TailStrategyConfig) -> Result<f64> {
    cfg.validate()?;
    let p = cfg.params;
    let quad = AdaptiveGaussLegendre::with_tolerance(1e-10);
    let integral = quad.integrate(
        |t: f64| {
            (-p.r * t).exp()
                * bs_expected_payoff(&p, cfg.h, t.clamp(0.0, p.t_horizon)).unwrap_or(f64::NAN)
        },
        0.0,
        p.t_horizon,
    );
    Ok(integral / p.t_horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(level: f64, h: TerminalKind, r: f64, sigma: f64) -> TailStrategyConfig {
        TailStrategyConfig {
            level,
            h,
            params: MarketParams::new(100.0, r, sigma, 1.0).unwrap(),
        }
    }

    #[test]
    fn switch_times() {
        let s = tail_strategy(&cfg(2.0, TerminalKind::Identity, 0.0, 0.2)).unwrap();
        assert_eq!(s.switch_time, 0.5);
        assert!(!s.degenerate);
        assert_eq!(s.cumulative(1.0), 1.0);
        let s = tail_strategy(&cfg(1.0, TerminalKind::Identity, 0.0, 0.2)).unwrap();
        assert_eq!(s.switch_time, 0.0);
        assert!(s.degenerate);
        let p = s.policy();
        assert_eq!(p.control(0.0, 0.0, 0.0, 100.0), 1.0);
        assert_eq!(p.control(0.99, 0.0, 0.0, 100.0), 1.0);
        for level in [1.3, 2.0, 7.5] {
            let s = tail_strategy(&cfg(level, TerminalKind::Identity, 0.0, 0.2)).unwrap();
            assert!((s.cumulative(1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_prices_to_spot_for_any_rate() {
        for r in [0.0, 0.03, 0.1] {
            let v = tail_strategy_price(&cfg(2.0, TerminalKind::Identity, r, 0.3)).unwrap();
            assert!((v.value - 100.0).abs() < 1e-6, "r={r}: {}", v.value);
            assert!(v.has_flag("h_affine"));
        }
    }

    #[test]
    fn deterministic_call_prices_intrinsic() {
        let mut c = cfg(2.0, TerminalKind::Call { strike: 90.0 }, 0.0, 1e-12);
        c.params.s0 = 100.0;
        let v = tail_strategy_price(&c).unwrap();
        assert!((v.value - 10.0).abs() < 1e-6);
    }

    #[test]
    fn put_with_positive_rate_is_refused() {
        let err = tail_strategy_price(&cfg(2.0, TerminalKind::Put { strike: 100.0 }, 0.03, 0.2))
            .unwrap_err();
        assert!(matches!(err, PricingError::Refused(_)));
        assert!(
            tail_strategy_price(&cfg(2.0, TerminalKind::Put { strike: 100.0 }, 0.0, 0.2)).is_ok()
        );
    }

    #[test]
    fn inverse_factor_diagnostic() {
        let v =
            tail_strategy_price(&cfg(2.0, TerminalKind::Call { strike: 100.0 }, 0.0, 0.2)).unwrap();
        let inv = v.diagnostic("inverse_factor_value").unwrap();
        assert!((inv * 4.0 - v.value).abs() < 1e-12);
    }

    #[test]
    fn tail_dominates_uniform_and_grows_with_cap() {
        let c = cfg(2.0, TerminalKind::Call { strike: 100.0 }, 0.0, 0.2);
        let tail = tail_strategy_price(&c).unwrap().value;
        assert!(tail > uniform_strategy_price(&c).unwrap());
        let mut prev = 0.0;
        for level in [1.0, 1.5, 2.0, 4.0, 10.0] {
            let v =
                tail_strategy_price(&cfg(level, TerminalKind::Call { strike: 100.0 }, 0.0, 0.2))
                    .unwrap()
                    .value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn from_spec_refusals() {
        let params = MarketParams::new(100.0, 0.05, 0.2, 1.0).unwrap();
        let spec = PayoffSpec {
            f: FKind::Call { strike: 100.0 },
            timing: PaymentTiming::TerminalCompounded,
            g: GKind::Identity,
            weight_mode: WeightMode::AdaptedFixedCumulative,
            bounds: ControlBounds::new(0.0, 2.0).unwrap(),
        };
        assert!(TailStrategyConfig::from_spec(&spec, &params).is_ok());
        let spot = PayoffSpec {
            timing: PaymentTiming::Spot,
            ..spec
        };
        assert!(TailStrategyConfig::from_spec(&spot, &params).is_err());
        let capped = PayoffSpec {
            g: GKind::Cap { level: 5.0 },
            ..spec
        };
        assert!(TailStrategyConfig::from_spec(&capped, &params).is_err());
        let floor = PayoffSpec {
            bounds: ControlBounds::new(0.2, 2.0).unwrap(),
            ..spec
        };
        assert!(TailStrategyConfig::from_spec(&floor, &params).is_err());
    }
}
