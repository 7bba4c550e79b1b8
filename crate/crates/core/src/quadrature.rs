//! Adaptive Gauss–Legendre quadrature.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Adaptive integrator: a 10-point rule per panel, bisected until the panel
/// and its two halves agree to `rel_tol` of the running total.
#[derive(Debug, Clone)]
pub struct AdaptiveGaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    pub rel_tol: f64,
    pub max_depth: usize,
}

impl Default for AdaptiveGaussLegendre {
    fn default() -> Self {
        let (nodes, weights) = gauss_legendre(10);
        AdaptiveGaussLegendre {
            nodes,
            weights,
            rel_tol: 1e-8,
            max_depth: 30,
        }
    }
}

impl AdaptiveGaussLegendre {
    pub fn with_tolerance(rel_tol: f64) -> Self {
        AdaptiveGaussLegendre {
            rel_tol,
            ..Self::default()
        }
    }

    fn panel<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    fn recurse<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        scale: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.panel(f, a, m);
        let right = self.panel(f, m, b);
        let split = left + right;
        if depth >= self.max_depth || (split - whole).abs() <= self.rel_tol * scale {
            return split;
        }
        self.recurse(f, a, m, left, scale, depth + 1)
            + self.recurse(f, m, b, right, scale, depth + 1)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let whole = self.panel(&f, a, b);
        // absolute floor keeps integrals of ~0 from recursing to max depth
        let scale = whole.abs().max(1e-300);
        self.recurse(&f, a, b, whole, scale, 0)
    }
}
