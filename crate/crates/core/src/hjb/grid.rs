//! Tensor grids in `(x, y, z = ln S, t)`.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::smoothing::SmoothingFamily;

use super::Variant;

/// Node counts and extents requested for a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    /// Half-width of the log-price axis in units of `σ √T`.
    pub z_width: f64,
    /// Overrides the upper end of the `y` axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    /// Budget-constrained variants only: space the `y` axis below the cutoff
    /// at exactly `d1 Δt`, so `u = d1` characteristics land on nodes and the
    /// budget kink is transported without smearing. `ny` is then ignored.
    pub align_y: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 41,
            ny: 41,
            nz: 81,
            nt: 200,
            z_width: 5.0,
            y_max: None,
            align_y: true,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad =
            |field: &str, reason: &str| Err(PricingError::config(format!("grid.{field}"), reason));
        if self.nx < 2 {
            return bad("nx", "need at least 2 nodes");
        }
        if self.ny < 2 || (!self.align_y && self.ny < 6) {
            return bad("ny", "need at least 6 nodes (2 with align_y)");
        }
        if self.nz < 5 {
            return bad("nz", "need at least 5 nodes");
        }
        if self.nt < 1 {
            return bad("nt", "need at least 1 time step");
        }
        if !(self.z_width.is_finite() && self.z_width > 0.0) {
            return bad("z_width", "must be finite and > 0");
        }
        if let Some(y) = self.y_max {
            if !(y.is_finite() && y > 0.0) {
                return bad("y_max", "must be finite and > 0");
            }
        }
        Ok(())
    }

    /// Halves `Δz` and `Δt`, keeping every existing node.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            nz: 2 * (self.nz - 1) + 1,
            nt: 2 * self.nt,
            ..*self
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.nx, self.ny, self.nz, self.nt]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub z_nodes: Vec<f64>,
    /// `nt + 1` uniform times from 0 to `T`.
    pub times: Vec<f64>,
    /// Index of `ln S0` in `z_nodes`.
    pub z_spot: usize,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
        .collect()
}

impl StateGrid {
    pub fn nx(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn ny(&self) -> usize {
        self.y_nodes.len()
    }

    pub fn nz(&self) -> usize {
        self.z_nodes.len()
    }

    pub fn nt(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn dz(&self) -> f64 {
        self.z_nodes[1] - self.z_nodes[0]
    }

    pub fn n_nodes(&self) -> usize {
        self.nx() * self.ny() * self.nz()
    }

    /// Flat index of node `(ix, iy, iz)` within a time slice.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.ny() + iy) * self.nz() + iz
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.nx(), self.ny(), self.nz(), self.nt()]
    }

    /// Log-price axis: uniform, centred on `ln S0` (an exact node), spanning
    /// `z_width σ √T` plus twice the drift over the horizon on either side, so
    /// a near-deterministic spot path stays clear of the held top node.
    fn z_axis(fam: &SmoothingFamily, spec: &GridSpec) -> (Vec<f64>, usize) {
        let p = fam.params();
        let centre = p.s0.ln();
        let half =
            spec.z_width * p.sigma * p.t_horizon.sqrt() + 2.0 * p.log_drift().abs() * p.t_horizon;
        let m = (spec.nz - 1) / 2;
        let dz = half / m as f64;
        let nodes = (0..spec.nz)
            .map(|i| centre + (i as f64 - m as f64) * dz)
            .collect();
        (nodes, m)
    }

    /// Builds the grid a variant needs at the family's `ε`.
    ///
    /// For the budget-constrained variants the `y` axis is either spaced at
    /// `d1 Δt` from 0 past the end of the cutoff transition, or has `ny - 3`
    /// uniform nodes on `[0, 1 - ε]` followed by the midpoint and end of the
    /// transition; both end at `1 + ε` or the override. The normalized variant
    /// uses a uniform `y` axis up to `d1 T` (or the override). The `x` axis
    /// reaches the largest accumulated benefit, capped where a saturating `g`
    /// goes flat; for the normalized variant it holds the running average and
    /// reaches the largest benefit density.
    pub fn build(variant: Variant, fam: &SmoothingFamily, spec: &GridSpec) -> Result<StateGrid> {
        spec.validate()?;
        let p = fam.params();
        let bounds = fam.spec().bounds;
        let (z_nodes, z_spot) = Self::z_axis(fam, spec);
        let phi_max = z_nodes
            .iter()
            .flat_map(|&z| [fam.phi(z.exp(), 0.0), fam.phi(z.exp(), p.t_horizon)])
            .fold(0.0f64, f64::max);
        let (y_nodes, reach) = match variant {
            Variant::Adapted | Variant::LinearReduced => {
                let eps = fam.epsilon();
                let cut = fam.cutoff_start();
                let mut y = if spec.align_y {
                    let c = bounds.d1 * p.t_horizon / spec.nt as f64;
                    let k_max = (fam.cutoff_end() / c - 1e-9).ceil() as usize;
                    if k_max > 100_000 {
                        return Err(PricingError::config(
                            "grid.align_y",
                            "aligned y axis would exceed 100000 nodes",
                        ));
                    }
                    (0..=k_max).map(|k| k as f64 * c).collect()
                } else {
                    let mut y = linspace(0.0, cut, spec.ny - 3);
                    y.push(fam.effective_budget());
                    y.push(fam.cutoff_end());
                    y
                };
                let top = spec.y_max.unwrap_or(1.0 + eps);
                if top <= fam.cutoff_end() {
                    return Err(PricingError::config(
                        "grid.y_max",
                        "must exceed the end of the cutoff transition",
                    ));
                }
                if top > y[y.len() - 1] {
                    y.push(top);
                }
                (y, fam.effective_budget())
            }
            Variant::Normalized => {
                let top = spec.y_max.unwrap_or(bounds.d1 * p.t_horizon);
                (linspace(0.0, top, spec.ny), 1.0)
            }
        };
        let x_nodes = match variant {
            Variant::LinearReduced => vec![0.0],
            _ => {
                let mut x_max = reach * phi_max;
                if let Some(sat) = fam.g_saturation().filter(|_| variant == Variant::Adapted) {
                    x_max = x_max.min(sat);
                }
                if x_max.is_nan() || x_max <= 0.0 {
                    x_max = 1.0;
                }
                linspace(0.0, x_max, spec.nx)
            }
        };
        Ok(StateGrid {
            x_nodes,
            y_nodes,
            z_nodes,
            times: linspace(0.0, p.t_horizon, spec.nt + 1),
            z_spot,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketParams;
    use crate::payoff::{ControlBounds, FKind, GKind, PaymentTiming, PayoffSpec, WeightMode};
    use crate::smoothing::build_family;

    fn family(g: GKind, mode: WeightMode) -> SmoothingFamily {
        let params = MarketParams::new(100.0, 0.02, 0.2, 1.0).unwrap();
        let spec = PayoffSpec {
            f: FKind::Call { strike: 100.0 },
            timing: PaymentTiming::TerminalCompounded,
            g,
            weight_mode: mode,
            bounds: ControlBounds::new(0.0, 2.0).unwrap(),
        };
        build_family(0.05, &spec, &params).unwrap()
    }

    #[test]
    fn axes_are_increasing_and_contain_spot() {
        let fam = family(GKind::Identity, WeightMode::AdaptedFixedCumulative);
        let uniform = GridSpec {
            align_y: false,
            ..GridSpec::default()
        };
        for v in [Variant::Adapted, Variant::LinearReduced] {
            let g = StateGrid::build(v, &fam, &uniform).unwrap();
            for axis in [&g.x_nodes, &g.y_nodes, &g.z_nodes, &g.times] {
                assert!(axis.windows(2).all(|w| w[1] > w[0]));
            }
            assert_eq!(g.z_nodes[g.z_spot], 100f64.ln());
            assert!(*g.y_nodes.last().unwrap() >= 1.05);
            assert!(g.y_nodes.contains(&fam.cutoff_start()));
            assert_eq!(g.ny(), 41);
        }
    }

    #[test]
    fn x_axis_covers_reach_or_saturation() {
        let fam = family(GKind::Identity, WeightMode::AdaptedFixedCumulative);
        let g = StateGrid::build(Variant::Adapted, &fam, &GridSpec::default()).unwrap();
        let phi_max = g
            .z_nodes
            .iter()
            .map(|z| fam.phi(z.exp(), 0.0))
            .fold(0.0, f64::max);
        assert!(*g.x_nodes.last().unwrap() >= fam.effective_budget() * phi_max * (1.0 - 1e-12));
        let capped = family(
            GKind::Cap { level: 3.0 },
            WeightMode::AdaptedFixedCumulative,
        );
        let g = StateGrid::build(Variant::Adapted, &capped, &GridSpec::default()).unwrap();
        assert!((g.x_nodes.last().unwrap() - 3.15).abs() < 1e-12);
    }

    #[test]
    fn normalized_axis_reaches_full_weight() {
        let fam = family(GKind::Identity, WeightMode::Normalized);
        let g = StateGrid::build(Variant::Normalized, &fam, &GridSpec::default()).unwrap();
        assert_eq!(*g.y_nodes.last().unwrap(), 2.0);
    }

    #[test]
    fn refinement_keeps_nodes() {
        let fam = family(GKind::Identity, WeightMode::AdaptedFixedCumulative);
        let s = GridSpec::default();
        let a = StateGrid::build(Variant::LinearReduced, &fam, &s).unwrap();
        let b = StateGrid::build(Variant::LinearReduced, &fam, &s.refined()).unwrap();
        assert_eq!(b.nz(), 161);
        assert_eq!(b.nt(), 400);
        for (i, z) in a.z_nodes.iter().enumerate() {
            assert!((b.z_nodes[2 * i] - z).abs() < 1e-12);
        }
    }

    #[test]
    fn aligned_axis_puts_feet_on_nodes() {
        let fam = family(GKind::Identity, WeightMode::AdaptedFixedCumulative);
        let g = StateGrid::build(Variant::LinearReduced, &fam, &GridSpec::default()).unwrap();
        // 0, 0.01, ..., 0.96 covers the transition [0.95, 0.9525], then 1.05
        assert_eq!(g.ny(), 98);
        for w in g.y_nodes[..97].windows(2) {
            assert!((w[1] - w[0] - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_tiny_grids() {
        let s = GridSpec {
            nz: 3,
            ..GridSpec::default()
        };
        assert_eq!(s.validate().unwrap_err().field(), Some("grid.nz"));
    }
}
