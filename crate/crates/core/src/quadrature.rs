//! Gaussian expectations of piecewise-smooth integrands.
//!
//! Every stopping map in this crate is a step function, so the integrands
//! met in practice are smooth except at a handful of known points. Instead
//! of a global Gauss–Hermite rule (which converges like `O(1/nodes)` across
//! a jump) the standardized line is truncated to `[-10, 10]`, cut into
//! panels at those points, and each panel gets a Gauss–Legendre rule.

use std::f64::consts::PI;

use crate::normal;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫_a^b f`.
    #[inline]
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) const HALF_WIDTH: f64 = 10.0;
const MAX_PANEL: f64 = 2.0;
const MIN_PANEL_ORDER: usize = 10;

/// `E[f(ξ)]` for standard normal `ξ`, with `f` smooth between breakpoints.
#[derive(Debug, Clone)]
pub struct GaussianIntegrator {
    rule: GaussLegendre,
}

impl GaussianIntegrator {
    /// An integrator spending roughly `nodes` evaluations on a breakpoint-free
    /// integrand (at least ten per panel).
    pub fn with_nodes(nodes: usize) -> Self {
        let panels = (2.0 * HALF_WIDTH / MAX_PANEL) as usize;
        GaussianIntegrator {
            rule: GaussLegendre::new((nodes / panels).max(MIN_PANEL_ORDER)),
        }
    }

    pub fn panel_order(&self) -> usize {
        self.rule.order()
    }

    pub fn expect(&self, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        let edges = panel_edges(breaks);
        let mut acc = 0.0;
        for w in edges.windows(2) {
            acc += self.rule.integrate(w[0], w[1], |u| normal::pdf(u) * f(u));
        }
        acc
    }
}

fn panel_edges(breaks: &[f64]) -> Vec<f64> {
    let panels = (2.0 * HALF_WIDTH / MAX_PANEL) as usize;
    let mut edges: Vec<f64> = (0..=panels)
        .map(|k| -HALF_WIDTH + k as f64 * MAX_PANEL)
        .collect();
    edges.extend(
        breaks
            .iter()
            .copied()
            .filter(|b| b.is_finite() && b.abs() < HALF_WIDTH),
    );
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    edges
}

/// `E[f(ξ)]` for a step function `f` whose jumps (in ξ-space) are `breaks`:
/// each constant piece contributes its value times its normal mass.
pub fn step_expectation(breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.is_empty() {
        return f(0.0);
    }
    let mut acc = f(pts[0] - 1.0) * normal::cdf(pts[0]);
    for w in pts.windows(2) {
        acc += f(0.5 * (w[0] + w[1])) * normal::interval_mass(w[0], w[1]);
    }
    let last = pts[pts.len() - 1];
    acc + f(last + 1.0) * normal::cdf(-last)
}
