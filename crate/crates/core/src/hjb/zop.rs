//! Implicit log-price diffusion `W = (I - Δt L)^{-1} V` along z lines.
//!
//! `L V = σ²/2 V_zz + (r - σ²/2) V_z`. The three-point stencil is fitted to
//! be exact on `1`, `z` and `e^z`, so the discrete price process keeps the
//! pricing drift exactly (`L S = r S` on the grid). When the cell Péclet
//! number is too large for that stencil to stay positive the drift is
//! upwinded instead; either way the matrix is an M-matrix. Boundaries assume the value is linear in `S`
//! there, which turns `L V` into `r S V_S`: at `z_min` that transport is
//! discretized implicitly in the upwind direction, at `z_max` the upwind
//! point is off the grid and the node is held fixed.

use rayon::prelude::*;

use crate::market::MarketParams;

#[derive(Debug, Clone)]
pub struct ZOperator {
    lower: Vec<f64>,
    /// Reciprocal pivots and modified upper diagonal of the LU factorization.
    inv_pivot: Vec<f64>,
    upper_mod: Vec<f64>,
    n: usize,
}

impl ZOperator {
    pub fn new(params: &MarketParams, nz: usize, dz: f64, dt: f64) -> Self {
        let sig2 = params.sigma * params.sigma;
        let mu = params.log_drift();
        let a = 0.5 * sig2 / (dz * dz);
        // lo (e^{-Δz} - 1) + up (e^{Δz} - 1) = r and (up - lo) Δz = μ
        // 2 (cosh Δz - 1), written without cancellation for tiny Δz
        let curv = 4.0 * (0.5 * dz).sinh().powi(2);
        let fitted_lo = (params.r - mu * dz.exp_m1() / dz) / curv;
        let fitted_up = fitted_lo + mu / dz;
        let (lo_c, up_c) = if fitted_lo >= 0.0 && fitted_up >= 0.0 {
            (fitted_lo, fitted_up)
        } else if mu > 0.0 {
            (a, a + mu / dz)
        } else {
            (a - mu / dz, a)
        };
        let mut lower = vec![0.0; nz];
        let mut diag = vec![1.0; nz];
        let mut upper = vec![0.0; nz];
        for i in 1..nz - 1 {
            lower[i] = -dt * lo_c;
            upper[i] = -dt * up_c;
            diag[i] = 1.0 + dt * (lo_c + up_c);
        }
        let beta = params.r / dz.exp_m1();
        diag[0] = 1.0 + dt * beta;
        upper[0] = -dt * beta;
        let mut inv_pivot = vec![0.0; nz];
        let mut upper_mod = vec![0.0; nz];
        let mut prev = 0.0;
        for i in 0..nz {
            let pivot = diag[i] - lower[i] * prev;
            inv_pivot[i] = 1.0 / pivot;
            prev = upper[i] * inv_pivot[i];
            upper_mod[i] = prev;
        }
        ZOperator {
            lower,
            inv_pivot,
            upper_mod,
            n: nz,
        }
    }

    /// Solves one line in place.
    #[inline]
    pub fn solve_line(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        v[0] *= self.inv_pivot[0];
        for i in 1..self.n {
            v[i] = (v[i] - self.lower[i] * v[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..self.n - 1).rev() {
            v[i] -= self.upper_mod[i] * v[i + 1];
        }
    }

    /// Solves every contiguous line of length `nz` in `values`.
    pub fn solve_all(&self, values: &mut [f64]) {
        values
            .par_chunks_mut(self.n)
            .for_each(|line| self.solve_line(line));
    }
}

/// Runs the z operator alone from terminal data over `nt` steps of `Δt` on
/// a uniform z axis: the diffusion sub-problem with every control term off.
pub fn pure_diffusion(
    params: &MarketParams,
    z_nodes: &[f64],
    nt: usize,
    dt: f64,
    terminal: &[f64],
) -> Vec<f64> {
    let op = ZOperator::new(params, z_nodes.len(), z_nodes[1] - z_nodes[0], dt);
    let mut v = terminal.to_vec();
    for _ in 0..nt {
        op.solve_line(&mut v);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(params: &MarketParams, nz: usize, dz: f64, dt: f64, w: &[f64]) -> Vec<f64> {
        // (I - Δt L) w written out row by row, with the fitted stencil solved for directly
        let mu = params.log_drift();
        let (em, ep) = ((-dz).exp() - 1.0, dz.exp() - 1.0);
        let det = em * dz - ep * (-dz);
        let lo = (params.r * dz - ep * mu) / det;
        let up = (em * mu - (-dz) * params.r) / det;
        let mut out = vec![0.0; nz];
        for i in 1..nz - 1 {
            let lv = lo * (w[i - 1] - w[i]) + up * (w[i + 1] - w[i]);
            out[i] = w[i] - dt * lv;
        }
        let beta = params.r / (dz.exp() - 1.0);
        out[0] = w[0] - dt * beta * (w[1] - w[0]);
        out[nz - 1] = w[nz - 1];
        out
    }

    #[test]
    fn inverts_the_operator() {
        let p = MarketParams::new(100.0, 0.05, 0.3, 1.0).unwrap();
        let (nz, dz, dt) = (21, 0.05, 0.01);
        let op = ZOperator::new(&p, nz, dz, dt);
        let rhs: Vec<f64> = (0..nz)
            .map(|i| ((i * 7) % 5) as f64 + 0.1 * i as f64)
            .collect();
        let mut w = rhs.clone();
        op.solve_line(&mut w);
        let back = dense_apply(&p, nz, dz, dt, &w);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_and_positivity_are_preserved() {
        let p = MarketParams::new(100.0, 0.05, 0.3, 1.0).unwrap();
        let op = ZOperator::new(&p, 31, 0.1, 0.02);
        let mut c = vec![3.5; 31];
        op.solve_line(&mut c);
        assert!(c.iter().all(|v| (v - 3.5).abs() < 1e-13));
        let mut spike = vec![0.0; 31];
        spike[15] = 1.0;
        op.solve_line(&mut spike);
        assert!(spike.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn spot_grows_at_rate_r() {
        // L S = r S, so one implicit step divides S by 1 - r Δt away from the held top node
        let p = MarketParams::new(100.0, 0.04, 0.25, 1.0).unwrap();
        let (nz, dz, dt) = (41, 0.02, 1e-3);
        let op = ZOperator::new(&p, nz, dz, dt);
        let z0 = 100f64.ln() - 20.0 * dz;
        let mut v: Vec<f64> = (0..nz).map(|i| (z0 + i as f64 * dz).exp()).collect();
        let want: Vec<f64> = v.iter().map(|s| s / (1.0 - p.r * dt)).collect();
        op.solve_line(&mut v);
        for i in 0..nz - 10 {
            assert!((v[i] - want[i]).abs() < 1e-12 * want[i], "node {i}");
        }
    }

    #[test]
    fn upwinds_when_the_fitted_stencil_goes_negative() {
        let p = MarketParams::new(100.0, 0.5, 0.05, 1.0).unwrap();
        let op = ZOperator::new(&p, 11, 0.5, 0.1);
        let mut spike = vec![0.0; 11];
        spike[5] = 1.0;
        op.solve_line(&mut spike);
        assert!(spike.iter().all(|&v| v >= 0.0));
    }
}
