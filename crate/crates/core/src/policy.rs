//! Feedback controls `(t, x, y, S) -> u ∈ [d0, d1]`.
//!
//! `x` is the accumulated benefit and `y` the accumulated weight along the
//! path. Analytic rules ignore the parts of the state they do not need; grid
//! tables look up the nearest node in `(x, y, ln S)` on the time slice that
//! encloses `t`.

use std::sync::Arc;

use crate::market::MarketParams;
use crate::payoff::{eval_f, ControlBounds, PayoffSpec};

/// Bang-bang table extracted from a value function.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub z_nodes: Vec<f64>,
    /// Slice times `t_0 < … < t_{N-1}`; slice `n` covers `[t_n, t_{n+1})`.
    pub times: Vec<f64>,
    /// `true` → `d1`, `false` → `d0`; index `((n * nx + ix) * ny + iy) * nz + iz`.
    pub high: Vec<bool>,
    /// The x axis holds the running average `x / y` rather than `x`.
    pub x_is_average: bool,
}

fn nearest(nodes: &[f64], v: f64) -> usize {
    let i = nodes.partition_point(|&n| n < v);
    if i == 0 {
        0
    } else if i == nodes.len() {
        nodes.len() - 1
    } else if v - nodes[i - 1] <= nodes[i] - v {
        i - 1
    } else {
        i
    }
}

impl PolicyTable {
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (
            self.times.len(),
            self.x_nodes.len(),
            self.y_nodes.len(),
            self.z_nodes.len(),
        )
    }

    pub fn index(&self, n: usize, ix: usize, iy: usize, iz: usize) -> usize {
        let (_, nx, ny, nz) = self.shape();
        ((n * nx + ix) * ny + iy) * nz + iz
    }

    pub fn is_high_at(&self, n: usize, ix: usize, iy: usize, iz: usize) -> bool {
        self.high[self.index(n, ix, iy, iz)]
    }

    pub fn lookup(&self, t: f64, x: f64, y: f64, s: f64) -> bool {
        let n = self.times.partition_point(|&tn| tn <= t).saturating_sub(1);
        let x = if !self.x_is_average {
            x
        } else if y > 0.0 {
            x / y
        } else {
            0.0
        };
        let ix = nearest(&self.x_nodes, x);
        let iy = nearest(&self.y_nodes, y);
        let iz = nearest(&self.z_nodes, s.ln());
        self.high[self.index(n, ix, iy, iz)]
    }
}

#[derive(Debug, Clone)]
pub enum PolicyKind {
    Constant(f64),
    /// `high` from `switch_time` on, `low` before.
    Tail {
        switch_time: f64,
        high: f64,
        low: f64,
    },
    /// `high` while `f(S, t) > level`, `low` otherwise.
    Threshold {
        level: f64,
        high: f64,
        low: f64,
        spec: PayoffSpec,
        params: MarketParams,
    },
    Table(Arc<PolicyTable>),
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub name: String,
    pub bounds: ControlBounds,
    pub kind: PolicyKind,
}

impl Policy {
    pub fn new(name: impl Into<String>, bounds: ControlBounds, kind: PolicyKind) -> Self {
        Policy {
            name: name.into(),
            bounds,
            kind,
        }
    }

    /// Control at state `(t, x, y, s)`, clipped to the bounds.
    pub fn control(&self, t: f64, x: f64, y: f64, s: f64) -> f64 {
        let raw = match &self.kind {
            PolicyKind::Constant(u) => *u,
            PolicyKind::Tail {
                switch_time,
                high,
                low,
            } => {
                if t >= *switch_time {
                    *high
                } else {
                    *low
                }
            }
            PolicyKind::Threshold {
                level,
                high,
                low,
                spec,
                params,
            } => {
                if eval_f(spec, params, s, t) > *level {
                    *high
                } else {
                    *low
                }
            }
            PolicyKind::Table(table) => {
                if table.lookup(t, x, y, s) {
                    self.bounds.d1
                } else {
                    self.bounds.d0
                }
            }
        };
        self.bounds.clamp(raw)
    }

    pub fn table(&self) -> Option<&PolicyTable> {
        match &self.kind {
            PolicyKind::Table(t) => Some(t),
            _ => None,
        }
    }
}
