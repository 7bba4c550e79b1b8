//! Regularized Bellman equations on a tensor grid in `(x, y, z = ln S, t)`.
//!
//! Three variants share one scheme:
//!
//! * [`Variant::Adapted`]: budget-constrained weight, terminal reward `ĝ_ε(x)`;
//! * [`Variant::LinearReduced`]: the `g = identity` case with the benefit as a
//!   running reward, so the `x` axis drops out;
//! * [`Variant::Normalized`]: normalized weight, terminal reward `g_ε(x, y)`.
//!
//! The price of a contract is the `ε → 0` limit of `e^{-rT} J_ε(0, 0, ln S0, 0)`,
//! estimated by Richardson extrapolation over a ladder of `ε`.

mod extract;
mod grid;
mod solver;
mod zop;

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::estimate::{EstimateMeta, Method, PriceEstimate};
use crate::market::MarketParams;
use crate::payoff::PayoffSpec;
use crate::smoothing::build_family;

pub use extract::{extract_policy, switching_values};
pub use grid::{GridSpec, StateGrid};
pub use solver::{
    solve, solve_adapted, solve_linear_reduced, solve_normalized, Retention, ValueFunction,
};
pub use zop::{pure_diffusion, ZOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Adapted,
    LinearReduced,
    Normalized,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Adapted => "adapted",
            Variant::LinearReduced => "linear_reduced",
            Variant::Normalized => "normalized",
        }
    }
}

/// `e^{-rT} J_ε(0, 0, ln S0, 0)` by interpolation of the first slice.
pub fn price_from_value(vf: &ValueFunction, params: &MarketParams) -> Result<PriceEstimate> {
    let j = vf.interpolate(0, 0.0, 0.0, params.s0.ln())?;
    let mut meta = EstimateMeta {
        epsilon: Some(vf.epsilon),
        grid: Some(vf.grid.shape()),
        ..EstimateMeta::default()
    };
    meta.flags.push(vf.variant.name().into());
    Ok(PriceEstimate::deterministic(
        params.discount() * j,
        Method::Hjb,
        meta,
    ))
}

/// Builds the family and grid for one `ε` and prices.
pub fn price_at(
    variant: Variant,
    params: &MarketParams,
    spec: &PayoffSpec,
    epsilon: f64,
    grid: &GridSpec,
) -> Result<PriceEstimate> {
    let fam = build_family(epsilon, spec, params)?;
    let g = StateGrid::build(variant, &fam, grid)?;
    let vf = solve(variant, params, spec, &fam, &g, Retention::Endpoints)?;
    price_from_value(&vf, params)
}

/// Limit of a quantity linear in `ε`, from its values at two scales.
pub fn richardson(eps_coarse: f64, p_coarse: f64, eps_fine: f64, p_fine: f64) -> f64 {
    (eps_coarse * p_fine - eps_fine * p_coarse) / (eps_coarse - eps_fine)
}

/// Prices along an `ε` ladder, the extrapolated price and the grid allowance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub variant: Variant,
    pub raw: Vec<PriceEstimate>,
    /// Richardson extrapolation over the two finest rungs (the raw price when
    /// the ladder has one rung).
    pub price: PriceEstimate,
    /// Change of the finest-`ε` price when `Δz` and `Δt` are halved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<f64>,
}

pub fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(PricingError::config(
            "epsilon_ladder",
            "need at least one ε",
        ));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(PricingError::config(
            "epsilon_ladder",
            "ε values must be strictly decreasing",
        ));
    }
    Ok(())
}

pub fn price_ladder(
    variant: Variant,
    params: &MarketParams,
    spec: &PayoffSpec,
    ladder: &[f64],
    grid: &GridSpec,
    with_delta_grid: bool,
) -> Result<LadderReport> {
    check_ladder(ladder)?;
    let raw = ladder
        .iter()
        .map(|&e| price_at(variant, params, spec, e, grid))
        .collect::<Result<Vec<_>>>()?;
    let finest = raw.last().expect("ladder is not empty");
    let eps_fine = ladder[ladder.len() - 1];
    let delta_grid = if with_delta_grid {
        let refined = price_at(variant, params, spec, eps_fine, &grid.refined())?;
        Some((refined.value - finest.value).abs())
    } else {
        None
    };
    let value = if ladder.len() >= 2 {
        let k = ladder.len() - 2;
        richardson(ladder[k], raw[k].value, eps_fine, finest.value)
    } else {
        finest.value
    };
    let mut meta = finest.meta.clone();
    meta.epsilon = None;
    for (e, p) in ladder.iter().zip(&raw) {
        meta.diagnostics.insert(format!("raw_eps_{e}"), p.value);
    }
    if let Some(d) = delta_grid {
        meta.diagnostics.insert("delta_grid".into(), d);
    }
    if ladder.len() >= 2 {
        meta.flags.push("richardson".into());
    }
    Ok(LadderReport {
        variant,
        price: PriceEstimate::deterministic(value, Method::Hjb, meta),
        raw,
        delta_grid,
    })
}
