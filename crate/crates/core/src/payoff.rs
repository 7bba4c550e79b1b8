//! Payoff functionals `g(∫ w(t) f(S(t), t) dt)` evaluated on discrete paths.
//!
//! Controls are piecewise constant: `u_values[i]` is chosen at `t_i` and held on
//! `[t_i, t_{i+1})`. Within each step `f` is integrated by the trapezoidal rule,
//! so `∫ u f dt ≈ Σ u_i Δt_i (f_i + f_{i+1}) / 2` and `∫ u dt = Σ u_i Δt_i`.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::market::MarketParams;

/// Tolerance on `∫ u dt = 1` for the adapted weight mode.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// Below this cumulative weight the normalized payoff switches to `g(f(S(T), T))`.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FKind {
    Identity,
    Call { strike: f64 },
    Put { strike: f64 },
}

/// When the benefit of `f` is paid: at `t`, or at `T` with interest accrued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentTiming {
    Spot,
    TerminalCompounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GKind {
    Identity,
    Call { strike: f64 },
    Put { strike: f64 },
    Cap { level: f64 },
}

impl GKind {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            GKind::Identity => x,
            GKind::Call { strike } => (x - strike).max(0.0),
            GKind::Put { strike } => (strike - x).max(0.0),
            GKind::Cap { level } => x.min(level),
        }
    }

    /// Concave kinds are the ones for which an optimal adapted control is known to exist.
    pub fn is_concave(&self) -> bool {
        matches!(self, GKind::Identity | GKind::Cap { .. })
    }

    pub fn is_nondecreasing(&self) -> bool {
        !matches!(self, GKind::Put { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w = u`, adapted, with `∫ u dt = 1`.
    AdaptedFixedCumulative,
    /// `w = u / ∫ u ds`, fixed only at maturity.
    Normalized,
}

/// Pointwise bounds `d0 <= u(t) <= d1` on the holder's control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub d0: f64,
    pub d1: f64,
}

impl ControlBounds {
    pub fn new(d0: f64, d1: f64) -> Result<Self> {
        let b = ControlBounds { d0, d1 };
        b.validate()?;
        Ok(b)
    }

    /// The one-point control set `{u}`. Only reachable through this constructor;
    /// [`ControlBounds::new`] and config validation insist on `d0 < d1`.
    pub fn singleton(u: f64) -> Result<Self> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(PricingError::param(
                "bounds.d0",
                "control level must be finite and >= 0",
            ));
        }
        Ok(ControlBounds { d0: u, d1: u })
    }

    pub fn is_singleton(&self) -> bool {
        self.d0 == self.d1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0.is_finite() && self.d0 >= 0.0) {
            return Err(PricingError::param("bounds.d0", "must be finite and >= 0"));
        }
        if !self.d1.is_finite() {
            return Err(PricingError::param("bounds.d1", "must be finite"));
        }
        if self.d0 >= self.d1 {
            return Err(PricingError::param("bounds.d0", "must satisfy d0 < d1"));
        }
        Ok(())
    }

    /// Mode-specific admissibility of the bounds for horizon `t_horizon`.
    pub fn validate_for(&self, mode: WeightMode, t_horizon: f64) -> Result<()> {
        if self.is_singleton() {
            if !(self.d0.is_finite() && self.d0 >= 0.0) {
                return Err(PricingError::param("bounds.d0", "must be finite and >= 0"));
            }
        } else {
            self.validate()?;
        }
        if mode == WeightMode::AdaptedFixedCumulative {
            let (lo, hi) = (self.d0 * t_horizon, self.d1 * t_horizon);
            let ok_lo = if self.is_singleton() {
                lo <= 1.0 + ADMISSIBILITY_TOL
            } else {
                lo < 1.0
            };
            if !ok_lo {
                return Err(PricingError::param(
                    "bounds.d0",
                    "need d0 * T < 1 for a nonempty admissible set",
                ));
            }
            if hi < 1.0 - ADMISSIBILITY_TOL {
                return Err(PricingError::param(
                    "bounds.d1",
                    "need d1 * T >= 1 so that the cumulative weight can reach 1",
                ));
            }
        }
        Ok(())
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.d0, self.d1)
    }
}

/// Full description of a controlled-option contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub f: FKind,
    pub timing: PaymentTiming,
    pub g: GKind,
    pub weight_mode: WeightMode,
    pub bounds: ControlBounds,
}

impl PayoffSpec {
    pub fn validate(&self, params: &MarketParams) -> Result<()> {
        match self.f {
            FKind::Call { strike } | FKind::Put { strike }
                if !(strike.is_finite() && strike > 0.0) =>
            {
                return Err(PricingError::param(
                    "payoff.f.strike",
                    "must be finite and > 0",
                ));
            }
            _ => {}
        }
        match self.g {
            GKind::Call { strike } | GKind::Put { strike }
                if !(strike.is_finite() && strike > 0.0) =>
            {
                return Err(PricingError::param(
                    "payoff.g.strike",
                    "must be finite and > 0",
                ));
            }
            GKind::Cap { level } if !(level.is_finite() && level > 0.0) => {
                return Err(PricingError::param(
                    "payoff.g.level",
                    "cap must be finite and > 0",
                ));
            }
            _ => {}
        }
        self.bounds
            .validate_for(self.weight_mode, params.t_horizon)
            .map_err(|e| match e {
                PricingError::InvalidParameter { field, reason } => {
                    PricingError::InvalidParameter {
                        field: format!("payoff.{field}"),
                        reason,
                    }
                }
                other => other,
            })
    }

    /// Strike of the `f` kind, zero for the identity.
    pub fn f_strike(&self) -> f64 {
        match self.f {
            FKind::Identity => 0.0,
            FKind::Call { strike } | FKind::Put { strike } => strike,
        }
    }

    /// Constant `C` with `|F_u| <= C (1 + max_t S(t))` for every admissible control.
    pub fn growth_constant(&self, params: &MarketParams) -> f64 {
        let compounding = match self.timing {
            PaymentTiming::Spot => 1.0,
            PaymentTiming::TerminalCompounded => (params.r * params.t_horizon).exp(),
        };
        let f_const = compounding * self.f_strike().max(1.0);
        let g_offset = match self.g {
            GKind::Put { strike } => strike,
            _ => 0.0,
        };
        f_const + g_offset
    }
}

/// Benefit density `f(s, t)`.
pub fn eval_f(spec: &PayoffSpec, params: &MarketParams, s: f64, t: f64) -> f64 {
    let base = match spec.f {
        FKind::Identity => s,
        FKind::Call { strike } => (s - strike).max(0.0),
        FKind::Put { strike } => (strike - s).max(0.0),
    };
    match spec.timing {
        PaymentTiming::Spot => base,
        PaymentTiming::TerminalCompounded => base * (params.r * (params.t_horizon - t)).exp(),
    }
}

/// Running integrals `x = ∫ u f dt` and `y = ∫ u dt`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeightIntegrals {
    pub x: f64,
    pub y: f64,
}

impl WeightIntegrals {
    #[inline]
    pub fn step(&mut self, u: f64, dt: f64, f_left: f64, f_right: f64) {
        self.x += u * dt * 0.5 * (f_left + f_right);
        self.y += u * dt;
    }
}

/// Per-step control values on a path grid: `u_values[i]` acts on `[t_i, t_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub times: Vec<f64>,
    pub u_values: Vec<f64>,
}

impl ControlPath {
    pub fn new(times: Vec<f64>, u_values: Vec<f64>) -> Result<Self> {
        if times.len() != u_values.len() + 1 {
            return Err(PricingError::param(
                "u_values",
                "need exactly one control value per time step",
            ));
        }
        Ok(ControlPath { times, u_values })
    }

    /// Constant control `u` on the given grid.
    pub fn constant(times: &[f64], u: f64) -> Self {
        ControlPath {
            times: times.to_vec(),
            u_values: vec![u; times.len() - 1],
        }
    }

    pub fn cumulative(&self) -> f64 {
        self.times
            .windows(2)
            .zip(&self.u_values)
            .map(|(w, u)| u * (w[1] - w[0]))
            .sum()
    }

    fn check_bounds(&self, bounds: &ControlBounds) -> Result<()> {
        let tol = 1e-12 * bounds.d1.max(1.0);
        if let Some(u) = self
            .u_values
            .iter()
            .find(|&&u| !(u >= bounds.d0 - tol && u <= bounds.d1 + tol))
        {
            return Err(PricingError::Admissibility(format!(
                "control value {u} outside [{}, {}]",
                bounds.d0, bounds.d1
            )));
        }
        Ok(())
    }
}

fn integrate(
    spec: &PayoffSpec,
    params: &MarketParams,
    path: &[f64],
    u: &ControlPath,
) -> Result<WeightIntegrals> {
    if path.len() != u.times.len() {
        return Err(PricingError::param(
            "path",
            "path and control grids differ in length",
        ));
    }
    let mut acc = WeightIntegrals::default();
    let mut f_left = eval_f(spec, params, path[0], u.times[0]);
    for i in 0..u.u_values.len() {
        let f_right = eval_f(spec, params, path[i + 1], u.times[i + 1]);
        acc.step(u.u_values[i], u.times[i + 1] - u.times[i], f_left, f_right);
        f_left = f_right;
    }
    Ok(acc)
}

/// `g(∫ u f dt)` for an adapted control with `∫ u dt = 1`.
pub fn payoff_adapted(
    spec: &PayoffSpec,
    params: &MarketParams,
    path: &[f64],
    u: &ControlPath,
) -> Result<f64> {
    u.check_bounds(&spec.bounds)?;
    let acc = integrate(spec, params, path, u)?;
    if (acc.y - 1.0).abs() > ADMISSIBILITY_TOL {
        return Err(PricingError::Admissibility(format!(
            "cumulative weight {} differs from 1 by more than {ADMISSIBILITY_TOL}",
            acc.y
        )));
    }
    Ok(spec.g.apply(acc.x))
}

/// `g(∫ u f dt / ∫ u dt)`, or `g(f(S(T), T))` when the weight vanishes.
pub fn payoff_normalized(
    spec: &PayoffSpec,
    params: &MarketParams,
    path: &[f64],
    u: &ControlPath,
) -> Result<f64> {
    let acc = integrate(spec, params, path, u)?;
    Ok(normalized_from_integrals(
        spec,
        params,
        acc,
        path[path.len() - 1],
    ))
}

pub(crate) fn normalized_from_integrals(
    spec: &PayoffSpec,
    params: &MarketParams,
    acc: WeightIntegrals,
    s_terminal: f64,
) -> f64 {
    if acc.y < DEGENERACY_THRESHOLD {
        spec.g
            .apply(eval_f(spec, params, s_terminal, params.t_horizon))
    } else {
        spec.g.apply(acc.x / acc.y)
    }
}
