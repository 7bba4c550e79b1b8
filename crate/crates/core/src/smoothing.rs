//! ε-indexed regularization of the control problems.
//!
//! The dynamic-programming formulations need bounded, smooth coefficients and
//! terminal data. For a scale `ε` this module provides:
//!
//! * `ξ_ε(y)`: cumulative-weight cutoff, `1` below `1 - ε`, `0` above `1 - ε + ε²`;
//! * `ψ_ε(t)`: terminal ramp, `0` before `T - ε`, `1` after `T - ε + ε²`;
//! * `h_ε(u, t) = u (1 - ψ_ε(t)) + d1 ψ_ε(t)`;
//! * `φ_ε(s, t) <= f(s, t)`: `f` under a smooth cap at level `κ / ε`;
//! * `ĝ_ε(x) <= g(x)`: kinks of `g` replaced by a C² blend of half-width `ε k`,
//!   then smoothly clamped to `[-κ/ε, κ/ε]`;
//! * `g_ε(x, y) = ĝ_ε(x y / (y² + ε⁴))`.
//!
//! Both ramps are quintic smoothsteps (C² at the joins). `κ = 2 e^{rT} (S0 + K_f)`
//! sets the currency scale of the caps so that they sit far outside the region
//! a desk-scale grid resolves.

use crate::error::{PricingError, Result};
use crate::market::MarketParams;
use crate::payoff::{eval_f, GKind, PayoffSpec};

#[inline]
fn smoothstep(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

#[inline]
fn smoothstep_deriv(tau: f64) -> f64 {
    if !(0.0..=1.0).contains(&tau) {
        return 0.0;
    }
    30.0 * tau * tau * (1.0 - tau) * (1.0 - tau)
}

/// `∫_0^τ smoothstep`, for `τ ∈ [0, 1]`.
#[inline]
fn smoothstep_integral(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    let t4 = t * t * t * t;
    t4 * (t * t - 3.0 * t + 2.5)
}

/// C² lower approximation of `max(0, v)` whose slope ramps from 0 to 1 over `[0, w]`.
#[inline]
fn ramp(v: f64, w: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else if v >= w {
        v - 0.5 * w
    } else {
        w * smoothstep_integral(v / w)
    }
}

#[inline]
fn ramp_deriv(v: f64, w: f64) -> f64 {
    smoothstep(v / w)
}

/// Smooth minimum lying below `min(v, c)`, equal to `c` for `v >= c + w / 2`.
#[inline]
fn soft_upper(v: f64, c: f64, w: f64) -> (f64, f64) {
    let a = v - c + 0.5 * w;
    (v - ramp(a, w), 1.0 - ramp_deriv(a, w))
}

/// Smooth maximum lying above `max(v, c)`.
#[inline]
fn soft_lower(v: f64, c: f64, w: f64) -> (f64, f64) {
    let a = c - v + 0.5 * w;
    (v + ramp(a, w), 1.0 - ramp_deriv(a, w))
}

/// The regularization family for one `ε`. Immutable; evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingFamily {
    pub epsilon: f64,
    spec: PayoffSpec,
    params: MarketParams,
    cutoff: f64,
    ramp_start: f64,
    f_cap: f64,
    g_clamp: f64,
}

impl SmoothingFamily {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn spec(&self) -> &PayoffSpec {
        &self.spec
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    fn eps2(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// Start of the cutoff transition, `1 - ε`.
    pub fn cutoff_start(&self) -> f64 {
        self.cutoff
    }

    /// End of the cutoff transition, `1 - ε + ε²`.
    pub fn cutoff_end(&self) -> f64 {
        self.cutoff + self.eps2()
    }

    pub fn xi(&self, y: f64) -> f64 {
        1.0 - smoothstep((y - self.cutoff) / self.eps2())
    }

    pub fn xi_deriv(&self, y: f64) -> f64 {
        -smoothstep_deriv((y - self.cutoff) / self.eps2()) / self.eps2()
    }

    /// `∫_0^y ξ_ε`: the part of a cumulative weight `y` that still earns benefits.
    pub fn xi_integral(&self, y: f64) -> f64 {
        if y <= self.cutoff {
            return y;
        }
        let e2 = self.eps2();
        let tau = (y - self.cutoff) / e2;
        if tau >= 1.0 {
            self.cutoff + 0.5 * e2
        } else {
            self.cutoff + e2 * (tau - smoothstep_integral(tau))
        }
    }

    /// Total benefit-earning weight, `1 - ε + ε²/2`.
    pub fn effective_budget(&self) -> f64 {
        self.cutoff + 0.5 * self.eps2()
    }

    pub fn psi(&self, t: f64) -> f64 {
        smoothstep((t - self.ramp_start) / self.eps2())
    }

    pub fn psi_deriv(&self, t: f64) -> f64 {
        smoothstep_deriv((t - self.ramp_start) / self.eps2()) / self.eps2()
    }

    /// `∫_0^t ψ_ε`.
    pub fn psi_integral(&self, t: f64) -> f64 {
        if t <= self.ramp_start {
            return 0.0;
        }
        let e2 = self.eps2();
        let tau = (t - self.ramp_start) / e2;
        if tau >= 1.0 {
            0.5 * e2 + (t - self.ramp_start - e2)
        } else {
            e2 * smoothstep_integral(tau)
        }
    }

    pub fn h(&self, u: f64, t: f64) -> f64 {
        let p = self.psi(t);
        u * (1.0 - p) + self.spec.bounds.d1 * p
    }

    /// `∫_{t0}^{t1} h_ε(u, s) ds` for a control held at `u`.
    pub fn h_integral(&self, u: f64, t0: f64, t1: f64) -> f64 {
        let ramped = self.psi_integral(t1) - self.psi_integral(t0);
        u * (t1 - t0) + (self.spec.bounds.d1 - u) * ramped
    }

    /// Capped benefit density `φ_ε(s, t)`.
    pub fn phi(&self, s: f64, t: f64) -> f64 {
        let f = eval_f(&self.spec, &self.params, s, t);
        let e2 = self.eps2();
        let gap = (f - self.f_cap).abs();
        f.min(self.f_cap) - e2 * (-gap / e2).exp().ln_1p()
    }

    fn g_unclamped(&self, x: f64) -> (f64, f64) {
        let eps = self.epsilon;
        match self.spec.g {
            GKind::Identity => (x, 1.0),
            GKind::Call { strike } => {
                let w = 2.0 * eps * strike;
                (ramp(x - strike, w), ramp_deriv(x - strike, w))
            }
            GKind::Put { strike } => {
                let w = 2.0 * eps * strike;
                (ramp(strike - x, w), -ramp_deriv(strike - x, w))
            }
            GKind::Cap { level } => soft_upper(x, level, 2.0 * eps * level),
        }
    }

    /// Mollified terminal reward `ĝ_ε(x)`.
    pub fn g_hat(&self, x: f64) -> f64 {
        self.g_hat_with_deriv(x).0
    }

    pub fn g_hat_deriv(&self, x: f64) -> f64 {
        self.g_hat_with_deriv(x).1
    }

    fn g_hat_with_deriv(&self, x: f64) -> (f64, f64) {
        let (v, dv) = self.g_unclamped(x);
        let w = self.epsilon * self.g_clamp;
        let (hi, dhi) = soft_upper(v, self.g_clamp, w);
        let (lo, dlo) = soft_lower(hi, -self.g_clamp, w);
        (lo, dv * dhi * dlo)
    }

    /// Two-argument terminal reward `g_ε(x, y)` approximating `g(x / y)`.
    pub fn g_two(&self, x: f64, y: f64) -> f64 {
        let e4 = self.eps2() * self.eps2();
        self.g_hat(x * y / (y * y + e4))
    }

    /// Smallest `x` beyond which `ĝ_ε` is constant, if any.
    pub fn g_saturation(&self) -> Option<f64> {
        match self.spec.g {
            GKind::Cap { level } => Some(level * (1.0 + self.epsilon)),
            _ => None,
        }
    }

    pub fn f_cap(&self) -> f64 {
        self.f_cap
    }

    pub fn g_clamp(&self) -> f64 {
        self.g_clamp
    }

    /// Re-checks the family's invariants on a sample lattice.
    pub fn verify(&self, n: usize) -> Result<()> {
        let t_end = self.params.t_horizon;
        let fail = |what: &str| {
            Err(PricingError::param(
                "epsilon",
                format!("family invariant violated: {what}"),
            ))
        };
        let mut prev_xi = f64::INFINITY;
        let mut prev_psi = f64::NEG_INFINITY;
        for i in 0..=n {
            let a = i as f64 / n as f64;
            let y = 1.5 * a;
            let xi = self.xi(y);
            if xi > prev_xi + 1e-15 || !(0.0..=1.0).contains(&xi) {
                return fail("xi not a nonincreasing map into [0, 1]");
            }
            if (y <= self.cutoff && xi != 1.0) || (y >= self.cutoff_end() && xi != 0.0) {
                return fail("xi plateaus");
            }
            prev_xi = xi;
            let t = t_end * a;
            let psi = self.psi(t);
            if psi < prev_psi - 1e-15 || !(0.0..=1.0).contains(&psi) {
                return fail("psi not a nondecreasing map into [0, 1]");
            }
            if (t <= self.ramp_start && psi != 0.0)
                || (t >= self.ramp_start + self.eps2() && psi != 1.0)
            {
                return fail("psi plateaus");
            }
            prev_psi = psi;
            let s = self.params.s0 * (4.0 * (a - 0.5)).exp();
            if self.phi(s, t) > eval_f(&self.spec, &self.params, s, t) {
                return fail("phi above f");
            }
            let x = 3.0 * self.params.s0 * a;
            if self.g_hat(x) > self.spec.g.apply(x) + 1e-12 * (1.0 + x) {
                return fail("g_hat above g");
            }
        }
        Ok(())
    }
}

/// Builds the family for scale `epsilon`; requires `0 < ε < min(1/2, T/2)`.
pub fn build_family(
    epsilon: f64,
    spec: &PayoffSpec,
    params: &MarketParams,
) -> Result<SmoothingFamily> {
    params.validate()?;
    let upper = 0.5f64.min(0.5 * params.t_horizon);
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < upper) {
        return Err(PricingError::param(
            "epsilon",
            format!("must lie in (0, {upper})"),
        ));
    }
    let kappa = 2.0 * (params.r * params.t_horizon).exp() * (params.s0 + spec.f_strike());
    let fam = SmoothingFamily {
        epsilon,
        spec: *spec,
        params: *params,
        cutoff: 1.0 - epsilon,
        ramp_start: params.t_horizon - epsilon,
        f_cap: kappa / epsilon,
        g_clamp: kappa / epsilon,
    };
    fam.verify(64)?;
    Ok(fam)
}
