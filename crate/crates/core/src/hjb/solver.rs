//! Backward sweeps for the three regularized Bellman equations.
//!
//! One step from `t_{n+1}` to `t_n` is split in two:
//!
//! 1. implicit diffusion in `z`: `W = (I - Δt L)^{-1} V^{n+1}`;
//! 2. for each endpoint control `u ∈ {d0, d1}` the `(x, y)` state is moved
//!    along its characteristic over the step and `W` is read at the foot by
//!    bilinear interpolation; `V^n` is the larger of the two.
//!
//! The weight integrals over a step are exact: the cutoff enters through its
//! antiderivative `Ξ`, the terminal ramp through `∫ h_ε`, and the benefit
//! density is averaged over the step by the trapezoid rule. Feet beyond the
//! last node are clamped to it (all transport is outward).
//!
//! The normalized variant carries the running average `q = x / y` on its
//! first axis instead of `x`. Its terminal data `g_ε(q y, y)` is smooth in
//! `q`, whereas `g_ε(x, y)` behaves like `x / y` near `y = 0` and bilinear
//! interpolation there overshoots, which the maximization then exploits.
//! The foot is `q' = (q y + φ H) / (y + H)`, a convex combination, so `q`
//! stays in `[0, max φ]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::market::MarketParams;
use crate::payoff::{GKind, PayoffSpec, WeightMode};
use crate::smoothing::SmoothingFamily;

use super::grid::StateGrid;
use super::zop::ZOperator;
use super::Variant;

/// Which time slices a solve keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retention {
    /// Every slice; needed for policy extraction and slice export.
    #[default]
    Full,
    /// Only `t = 0` and `t = T`.
    Endpoints,
}

/// Grid-sampled value function `J_ε`.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub grid: StateGrid,
    pub variant: Variant,
    pub epsilon: f64,
    steps: Vec<usize>,
    slices: Vec<Vec<f64>>,
}

/// Bracketing node and weight of `v` on a strictly increasing axis, after
/// clamping `v` into the axis range.
#[inline]
pub(crate) fn locate(nodes: &[f64], v: f64) -> (usize, f64) {
    let n = nodes.len();
    if n == 1 {
        return (0, 0.0);
    }
    let v = v.clamp(nodes[0], nodes[n - 1]);
    let j = nodes
        .partition_point(|&a| a <= v)
        .saturating_sub(1)
        .min(n - 2);
    (j, (v - nodes[j]) / (nodes[j + 1] - nodes[j]))
}

impl ValueFunction {
    /// Retained step indices, ascending.
    pub fn retained_steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn slice(&self, step: usize) -> Option<&[f64]> {
        self.steps
            .binary_search(&step)
            .ok()
            .map(|i| self.slices[i].as_slice())
    }

    pub fn initial(&self) -> &[f64] {
        &self.slices[0]
    }

    pub fn terminal(&self) -> &[f64] {
        self.slices
            .last()
            .expect("a solve keeps the terminal slice")
    }

    /// Multilinear interpolation of a slice at `(x, y, z)`. For the normalized
    /// variant `x` is the running average `x / y`.
    pub fn interpolate(&self, step: usize, x: f64, y: f64, z: f64) -> Result<f64> {
        let g = &self.grid;
        let slice = self.slice(step).ok_or_else(|| {
            PricingError::Extrapolation(format!("time slice {step} was not retained"))
        })?;
        let inside =
            |nodes: &[f64], v: f64| v >= nodes[0] - 1e-12 && v <= nodes[nodes.len() - 1] + 1e-12;
        if !(inside(&g.x_nodes, x) && inside(&g.y_nodes, y) && inside(&g.z_nodes, z)) {
            return Err(PricingError::Extrapolation(format!(
                "query (x={x}, y={y}, z={z}) lies outside the grid"
            )));
        }
        let (jx, wx) = locate(&g.x_nodes, x);
        let (jy, wy) = locate(&g.y_nodes, y);
        let (jz, wz) = locate(&g.z_nodes, z);
        let mut acc = 0.0;
        for (dx, fx) in [(0, 1.0 - wx), (1, wx)] {
            if fx == 0.0 {
                continue;
            }
            for (dy, fy) in [(0, 1.0 - wy), (1, wy)] {
                if fy == 0.0 {
                    continue;
                }
                for (dz, fz) in [(0, 1.0 - wz), (1, wz)] {
                    if fz == 0.0 {
                        continue;
                    }
                    acc += fx * fy * fz * slice[g.index(jx + dx, jy + dy, jz + dz)];
                }
            }
        }
        Ok(acc)
    }
}

struct Sweep<'a> {
    variant: Variant,
    fam: &'a SmoothingFamily,
    grid: &'a StateGrid,
}

/// Foot of one control on the `y` axis for every `y` node, and the
/// per-unit-`φ` increment of `x` (or of the running reward).
struct Transport {
    y_foot: Vec<(usize, f64)>,
    gain: Vec<f64>,
}

impl Sweep<'_> {
    fn terminal(&self) -> Vec<f64> {
        let g = self.grid;
        let mut v = vec![0.0; g.n_nodes()];
        for ix in 0..g.nx() {
            for iy in 0..g.ny() {
                let value = match self.variant {
                    Variant::LinearReduced => 0.0,
                    Variant::Adapted => self.fam.g_hat(g.x_nodes[ix]),
                    Variant::Normalized => {
                        self.fam.g_two(g.x_nodes[ix] * g.y_nodes[iy], g.y_nodes[iy])
                    }
                };
                let start = g.index(ix, iy, 0);
                v[start..start + g.nz()].fill(value);
            }
        }
        v
    }

    fn transport(&self, u: f64, t0: f64, t1: f64) -> Transport {
        let g = self.grid;
        let fam = self.fam;
        let mut y_foot = Vec::with_capacity(g.ny());
        let mut gain = Vec::with_capacity(g.ny());
        for &y in &g.y_nodes {
            let (dy, dx) = match self.variant {
                Variant::Adapted | Variant::LinearReduced => {
                    let dy = u * (t1 - t0);
                    (dy, fam.xi_integral(y + dy) - fam.xi_integral(y))
                }
                Variant::Normalized => {
                    let h = fam.h_integral(u, t0, t1);
                    (h, h)
                }
            };
            y_foot.push(locate(&g.y_nodes, y + dy));
            gain.push(dx);
        }
        Transport { y_foot, gain }
    }

    /// Benefit density averaged over step `n`: the trapezoid of `φ_ε` at
    /// `t_n` and its conditional mean at `t_{n+1}`.
    fn step_density(&self, n: usize, op: &ZOperator) -> Vec<f64> {
        let g = self.grid;
        let (t0, t1) = (g.times[n], g.times[n + 1]);
        let mut next: Vec<f64> = g
            .z_nodes
            .iter()
            .map(|z| self.fam.phi(z.exp(), t1))
            .collect();
        op.solve_line(&mut next);
        g.z_nodes
            .iter()
            .zip(&next)
            .map(|(z, m)| 0.5 * (self.fam.phi(z.exp(), t0) + m))
            .collect()
    }

    fn step(&self, n: usize, w: &[f64], op: &ZOperator, out: &mut [f64]) {
        let g = self.grid;
        let (t0, t1) = (g.times[n], g.times[n + 1]);
        let b = self.fam.spec().bounds;
        let controls: Vec<Transport> = if b.is_singleton() {
            vec![self.transport(b.d0, t0, t1)]
        } else {
            vec![self.transport(b.d0, t0, t1), self.transport(b.d1, t0, t1)]
        };
        let phi = self.step_density(n, op);
        let (nx, ny, nz) = (g.nx(), g.ny(), g.nz());
        let x_max = g.x_nodes[nx - 1];
        let dx = if nx > 1 {
            g.x_nodes[1] - g.x_nodes[0]
        } else {
            1.0
        };
        let variant = self.variant;
        out.par_chunks_mut(ny * nz)
            .enumerate()
            .for_each(|(ix, plane)| {
                let x = g.x_nodes[ix];
                for iy in 0..ny {
                    for iz in 0..nz {
                        let mut best = f64::NEG_INFINITY;
                        for c in &controls {
                            let (jy, wy) = c.y_foot[iy];
                            let inc = phi[iz] * c.gain[iy];
                            let at = |jx: usize| {
                                let lo = w[g.index(jx, jy, iz)];
                                let hi = if wy > 0.0 {
                                    w[g.index(jx, jy + 1, iz)]
                                } else {
                                    lo
                                };
                                lo + wy * (hi - lo)
                            };
                            let value = match variant {
                                Variant::LinearReduced => inc + at(0),
                                Variant::Adapted | Variant::Normalized => {
                                    let xf = if variant == Variant::Adapted {
                                        x + inc
                                    } else {
                                        let y = g.y_nodes[iy];
                                        let y_next = y + c.gain[iy];
                                        if y_next > 0.0 {
                                            (x * y + inc) / y_next
                                        } else {
                                            x
                                        }
                                    };
                                    let xf = xf.min(x_max);
                                    let jx = ((xf / dx) as usize).min(nx - 2);
                                    let wx = ((xf - g.x_nodes[jx]) / dx).clamp(0.0, 1.0);
                                    let lo = at(jx);
                                    if wx > 0.0 {
                                        lo + wx * (at(jx + 1) - lo)
                                    } else {
                                        lo
                                    }
                                }
                            };
                            best = best.max(value);
                        }
                        plane[iy * nz + iz] = best;
                    }
                }
            });
    }
}

fn check_finite(values: &[f64], slice: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PricingError::NumericalFailure {
            slice,
            reason: "non-finite value".into(),
        })
    }
}

fn check_inputs(
    variant: Variant,
    params: &MarketParams,
    spec: &PayoffSpec,
    fam: &SmoothingFamily,
    grid: &StateGrid,
) -> Result<()> {
    spec.validate(params)?;
    if fam.spec() != spec || fam.params() != params {
        return Err(PricingError::config(
            "epsilon",
            "smoothing family was built for a different contract",
        ));
    }
    match variant {
        Variant::LinearReduced if spec.g != GKind::Identity => {
            return Err(PricingError::config(
                "method",
                "the linear reduced solve needs g = identity",
            ));
        }
        Variant::Adapted | Variant::LinearReduced
            if spec.weight_mode != WeightMode::AdaptedFixedCumulative =>
        {
            return Err(PricingError::config(
                "method",
                "this solve needs the adapted weight mode",
            ));
        }
        Variant::Normalized if spec.weight_mode != WeightMode::Normalized => {
            return Err(PricingError::config(
                "method",
                "the normalized solve needs the normalized weight mode",
            ));
        }
        _ => {}
    }
    let axes_ok = [&grid.x_nodes, &grid.y_nodes, &grid.z_nodes, &grid.times]
        .iter()
        .all(|a| a.windows(2).all(|w| w[1] > w[0]));
    if !axes_ok || grid.nz() < 3 || grid.ny() < 2 || grid.times.len() < 2 {
        return Err(PricingError::config(
            "grid",
            "axes must be strictly increasing with enough nodes",
        ));
    }
    if (variant == Variant::LinearReduced) != (grid.nx() == 1) {
        return Err(PricingError::config(
            "grid.nx",
            "the reduced solve uses a single x node, the others at least two",
        ));
    }
    if grid.nx() > 1 {
        let dx = grid.x_nodes[1] - grid.x_nodes[0];
        let uniform = grid
            .x_nodes
            .iter()
            .enumerate()
            .all(|(i, &x)| (x - i as f64 * dx).abs() <= 1e-9 * dx.max(x));
        if !uniform || grid.x_nodes[0] != 0.0 {
            return Err(PricingError::config(
                "grid.x",
                "x axis must be uniform from 0",
            ));
        }
    }
    let dz = grid.dz();
    if grid
        .z_nodes
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dz).abs() > 1e-9 * dz)
    {
        return Err(PricingError::config("grid.z", "z axis must be uniform"));
    }
    let dt = grid.dt();
    if grid
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt)
    {
        return Err(PricingError::config(
            "grid.nt",
            "time steps must be uniform",
        ));
    }
    if (grid.times[grid.nt()] - params.t_horizon).abs() > 1e-12 * params.t_horizon
        || grid.times[0] != 0.0
    {
        return Err(PricingError::config(
            "grid.nt",
            "time grid must span [0, T]",
        ));
    }
    Ok(())
}

/// Solves one variant on `grid`.
pub fn solve(
    variant: Variant,
    params: &MarketParams,
    spec: &PayoffSpec,
    fam: &SmoothingFamily,
    grid: &StateGrid,
    retention: Retention,
) -> Result<ValueFunction> {
    check_inputs(variant, params, spec, fam, grid)?;
    let sweep = Sweep { variant, fam, grid };
    let nt = grid.nt();
    let mut v = sweep.terminal();
    check_finite(&v, nt)?;
    let mut steps = vec![nt];
    let mut slices = vec![v.clone()];
    let op = ZOperator::new(params, grid.nz(), grid.dz(), grid.dt());
    let mut w = vec![0.0; v.len()];
    for n in (0..nt).rev() {
        w.copy_from_slice(&v);
        op.solve_all(&mut w);
        sweep.step(n, &w, &op, &mut v);
        check_finite(&v, n)?;
        if retention == Retention::Full || n == 0 {
            steps.push(n);
            slices.push(v.clone());
        }
    }
    steps.reverse();
    slices.reverse();
    Ok(ValueFunction {
        grid: grid.clone(),
        variant,
        epsilon: fam.epsilon(),
        steps,
        slices,
    })
}

/// Budget-constrained problem with terminal reward `ĝ_ε(x)`.
pub fn solve_adapted(
    params: &MarketParams,
    spec: &PayoffSpec,
    fam: &SmoothingFamily,
    grid: &StateGrid,
) -> Result<ValueFunction> {
    solve(Variant::Adapted, params, spec, fam, grid, Retention::Full)
}

/// `g = identity` problem on `(y, z)` with running reward `u ξ_ε(y) φ_ε`.
pub fn solve_linear_reduced(
    params: &MarketParams,
    spec: &PayoffSpec,
    fam: &SmoothingFamily,
    grid: &StateGrid,
) -> Result<ValueFunction> {
    solve(
        Variant::LinearReduced,
        params,
        spec,
        fam,
        grid,
        Retention::Full,
    )
}

/// Normalized-weight problem with transport rates `h_ε φ_ε` and `h_ε`.
pub fn solve_normalized(
    params: &MarketParams,
    spec: &PayoffSpec,
    fam: &SmoothingFamily,
    grid: &StateGrid,
) -> Result<ValueFunction> {
    solve(
        Variant::Normalized,
        params,
        spec,
        fam,
        grid,
        Retention::Full,
    )
}
