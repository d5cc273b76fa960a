//! Gauss–Legendre rules and the endpoint-graded composite rule used for
//! every time integral of fractional derivatives.
//!
//! Fractional derivatives of piecewise-linear data carry power-type
//! singularities `(t - t_k)^{1-α}` at every breakpoint. The graded rule maps
//! each piece through the quintic smoothstep `ψ(v) = v³(10 - 15v + 6v²)`,
//! whose Jacobian `30v²(1-v)²` flattens those endpoint singularities before
//! Gauss–Legendre is applied.

use std::sync::OnceLock;

use crate::scalar::Real;

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `q`-point Gauss–Legendre rule mapped to `[0, 1]`.
    pub fn legendre(q: usize) -> GaussRule {
        assert!(q >= 1, "need at least one node");
        if q == 1 {
            return GaussRule {
                nodes: vec![0.5],
                weights: vec![1.0],
            };
        }
        let mut nodes = vec![0.0; q];
        let mut weights = vec![0.0; q];
        let n = q as f64;
        for i in 0..q.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=q {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[q - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[q - 1 - i] = 0.5 * w;
        }
        GaussRule { nodes, weights }
    }

    /// Same rule composed with the quintic smoothstep grading.
    pub fn graded(q: usize) -> GaussRule {
        let base = GaussRule::legendre(q);
        let nodes = base.nodes.iter().map(|&v| smoothstep(v)).collect();
        let weights = base
            .nodes
            .iter()
            .zip(&base.weights)
            .map(|(&v, &w)| w * smoothstep_jacobian(v))
            .collect();
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[lo, hi]`.
    pub fn integrate<T: Real, F: FnMut(T) -> T>(&self, lo: T, hi: T, mut f: F) -> T {
        let len = hi - lo;
        let mut acc = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + T::lit(w) * f(lo + len * T::lit(x));
        }
        acc * len
    }
}

fn smoothstep(v: f64) -> f64 {
    v * v * v * (10.0 - 15.0 * v + 6.0 * v * v)
}

fn smoothstep_jacobian(v: f64) -> f64 {
    30.0 * v * v * (1.0 - v) * (1.0 - v)
}

macro_rules! cached_rule {
    ($name:ident, $ctor:ident) => {
        /// Cached rule for small orders (1..=32).
        pub fn $name(q: usize) -> &'static GaussRule {
            static CACHE: OnceLock<Vec<GaussRule>> = OnceLock::new();
            let rules = CACHE.get_or_init(|| (1..=32).map(GaussRule::$ctor).collect());
            &rules[q.clamp(1, 32) - 1]
        }
    };
}

cached_rule!(legendre, legendre);
cached_rule!(graded, graded);

/// Quadrature points of the graded composite rule over a partition.
///
/// Returns `(t, w)` pairs in increasing `t`; the weights already include the
/// piece length.
pub fn graded_points<T: Real>(breaks: &[T], q: usize) -> Vec<(T, T)> {
    let rule = graded(q);
    let mut out = Vec::with_capacity(breaks.len().saturating_sub(1) * q);
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = hi - lo;
        if len <= T::zero() {
            continue;
        }
        for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
            out.push((lo + len * T::lit(x), len * T::lit(wt)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for q in 1..=12 {
            let rule = GaussRule::legendre(q);
            for deg in 0..(2 * q) {
                let got = rule.integrate(0.0f64, 2.0, |x| x.powi(deg as i32));
                let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert!((got - exact).abs() < 1e-12 * exact, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn graded_rule_handles_endpoint_power_singularity() {
        let rule = graded(8);
        let got = rule.integrate(0.0f64, 1.0, |x| x.powf(-0.3));
        assert!((got - 1.0 / 0.7).abs() < 1e-4, "{got}");
        let got = rule.integrate(0.0f64, 1.0, |x| (1.0 - x).powf(0.3) * x.powf(0.6));
        let exact = statrs::function::beta::beta(1.3, 1.6);
        assert!((got - exact).abs() < 1e-6, "{got} {exact}");
    }

    #[test]
    fn graded_weights_sum_to_one_once_the_jacobian_is_integrated_exactly() {
        for q in [3, 5, 16, 32] {
            let s: f64 = GaussRule::graded(q).weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
