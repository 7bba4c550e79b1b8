//! Bang-bang policies read off a solved value function.
//!
//! The Hamiltonian is affine in `u`; its slope in `u` (the switching value)
//! is, with centred differences of `J`,
//!
//! * reduced: `J_y + ξ_ε(y) φ_ε`,
//! * adapted: `ξ_ε(y) φ_ε J_x + J_y`,
//! * normalized: `(1 - ψ_ε(t)) (φ_ε J_x + J_y)`.
//!
//! The normalized grid stores `J̃(q, y) = J(q y, y)`, where
//! `φ J_x + J_y = J̃_y + (φ - q) J̃_q / y`. On `y = 0` that is replaced by the
//! difference quotient along the characteristic, which jumps to `q = φ`.
//!
//! Positive slope picks `d1`, negative picks `d0`, and an exact zero picks `d1`.

use std::sync::Arc;

use crate::policy::{Policy, PolicyKind, PolicyTable};
use crate::smoothing::SmoothingFamily;

use super::solver::{locate, ValueFunction};
use super::Variant;

fn centred(nodes: &[f64], i: usize, at: impl Fn(usize) -> f64) -> f64 {
    let n = nodes.len();
    if n == 1 {
        return 0.0;
    }
    let (a, b) = if i == 0 {
        (0, 1)
    } else if i == n - 1 {
        (n - 2, n - 1)
    } else {
        (i - 1, i + 1)
    };
    (at(b) - at(a)) / (nodes[b] - nodes[a])
}

/// Switching values on retained slice `step`, indexed like the slice.
pub fn switching_values(
    vf: &ValueFunction,
    fam: &SmoothingFamily,
    step: usize,
) -> Option<Vec<f64>> {
    let j = vf.slice(step)?;
    let g = &vf.grid;
    let t = g.times[step];
    let psi = fam.psi(t);
    let phi: Vec<f64> = g.z_nodes.iter().map(|z| fam.phi(z.exp(), t)).collect();
    let mut out = Vec::with_capacity(j.len());
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let xi = fam.xi(g.y_nodes[iy]);
            for (iz, &phi) in phi.iter().enumerate() {
                let jy = centred(&g.y_nodes, iy, |k| j[g.index(ix, k, iz)]);
                let sv = match vf.variant {
                    Variant::LinearReduced => jy + xi * phi,
                    Variant::Adapted => {
                        xi * phi * centred(&g.x_nodes, ix, |k| j[g.index(k, iy, iz)]) + jy
                    }
                    Variant::Normalized => {
                        let q = g.x_nodes[ix];
                        let y = g.y_nodes[iy];
                        let slope = if iy == 0 {
                            let (jq, wq) = locate(&g.x_nodes, phi);
                            let lo = j[g.index(jq, 1, iz)];
                            let hi = j[g.index((jq + 1).min(g.nx() - 1), 1, iz)];
                            (lo + wq * (hi - lo) - j[g.index(ix, 0, iz)]) / g.y_nodes[1]
                        } else {
                            jy + (phi - q) * centred(&g.x_nodes, ix, |k| j[g.index(k, iy, iz)]) / y
                        };
                        (1.0 - psi) * slope
                    }
                };
                out.push(sv);
            }
        }
    }
    Some(out)
}

/// Bang-bang table over every retained slice before `T`.
pub fn extract_policy(vf: &ValueFunction, fam: &SmoothingFamily) -> Policy {
    let g = &vf.grid;
    let nt = g.nt();
    let steps: Vec<usize> = vf
        .retained_steps()
        .iter()
        .copied()
        .filter(|&n| n < nt)
        .collect();
    let mut high = Vec::with_capacity(steps.len() * g.n_nodes());
    for &n in &steps {
        let sv = switching_values(vf, fam, n).expect("step is retained");
        high.extend(sv.into_iter().map(|v| v >= 0.0));
    }
    let table = PolicyTable {
        x_nodes: g.x_nodes.clone(),
        y_nodes: g.y_nodes.clone(),
        z_nodes: g.z_nodes.clone(),
        times: steps.iter().map(|&n| g.times[n]).collect(),
        high,
        x_is_average: vf.variant == Variant::Normalized,
    };
    Policy::new("hjb", fam.spec().bounds, PolicyKind::Table(Arc::new(table)))
}
