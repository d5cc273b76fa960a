//! Zähle's fractional Stieltjes integral and the Young-regime composition
//! integral.
//!
//! For vector paths the pairing is the inner product
//! `∫ X dY = Σ_i ∫ X^i dY^i`; a composed coefficient `φ(X) ∈ ℝ^d` is paired
//! component-wise with `Y ∈ ℝ^d`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bv::BVCoefficient;
use crate::error::{Error, Result};
use crate::frac_calc::{marchaud_at_sites, Side, Sites};
use crate::path::{check_open_unit, SampledPath};
use crate::scalar::Real;

/// Quadrature points per grid cell for the time integral of a pairing.
pub const DEFAULT_POINTS_PER_CELL: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub alpha: f64,
    pub value: Option<f64>,
    pub error: Option<String>,
}

/// Values of one integral at several orders `α`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub entries: Vec<SweepEntry>,
    /// Largest pairwise difference among the successful entries.
    pub max_deviation: f64,
    /// `max_deviation / max(1, max |value|)`.
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct YoungIntegralResult {
    pub value: f64,
    pub alpha_used: f64,
    pub boundary_term: f64,
    pub grid: usize,
    pub sweep: Option<SweepTable>,
}

#[derive(Debug, Clone, Copy)]
pub struct YoungOptions {
    /// Pair `D^α_{a+} X` with `D^{1-α}_{b-}(Y - Y(b))` without subtracting
    /// `X(a)` and without the boundary term (valid when `X` is
    /// `W^{γ,p}` with `γp < 1`).
    pub no_base_correction: bool,
    pub points_per_cell: usize,
}

impl Default for YoungOptions {
    fn default() -> Self {
        YoungOptions {
            no_base_correction: false,
            points_per_cell: DEFAULT_POINTS_PER_CELL,
        }
    }
}

pub(crate) fn check_same_interval<T: Real>(x: &SampledPath<T>, y: &SampledPath<T>) -> Result<()> {
    let tol = T::lit(1e-12) * (T::one() + x.end().abs());
    if (x.start() - y.start()).abs() > tol || (x.end() - y.end()).abs() > tol {
        return Err(Error::GridMismatch(format!(
            "paths live on [{}, {}] and [{}, {}]",
            x.start(),
            x.end(),
            y.start(),
            y.end()
        )));
    }
    Ok(())
}

/// Puts both paths on the union of their grids.
pub(crate) fn common_grid<T: Real>(x: &SampledPath<T>, y: &SampledPath<T>) -> Result<(SampledPath<T>, SampledPath<T>)> {
    check_same_interval(x, y)?;
    if x.times() == y.times() {
        return Ok((x.clone(), y.clone()));
    }
    Ok((x.with_extra_nodes(y.times()), y.with_extra_nodes(x.times())))
}

fn finite_or<T: Real>(vals: &[T], term: &str) -> Result<()> {
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: term.into(),
            detail: format!("derivative unbounded at quadrature node {i}"),
        });
    }
    Ok(())
}

/// `-∫ D^α_{a+}(f - base) · D^{1-α}_{b-}(g - g(b)) dt` for scalar components.
pub(crate) fn pairing<T: Real>(
    f: &SampledPath<T>,
    fc: usize,
    base: T,
    g: &SampledPath<T>,
    gc: usize,
    alpha: T,
    sites: &Sites<T>,
) -> Result<T> {
    let df = marchaud_at_sites(f, fc, Side::LeftAPlus, alpha, base, sites);
    finite_or(&df, "left derivative of the integrand")?;
    let gb = g.value(g.len() - 1, gc);
    let dg = marchaud_at_sites(g, gc, Side::RightBMinus, T::one() - alpha, gb, sites);
    finite_or(&dg, "right derivative of the integrator")?;
    Ok(-sites.pair(&df, &dg))
}

fn zahle_inner<T: Real>(x: &SampledPath<T>, y: &SampledPath<T>, alpha: T, opts: &YoungOptions) -> Result<(T, T)> {
    check_open_unit("alpha", alpha)?;
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!("X has dimension {}, Y has {}", x.dim(), y.dim())));
    }
    let (x, y) = common_grid(x, y)?;
    let sites = Sites::graded(x.times(), opts.points_per_cell);
    let mut pair = T::zero();
    let mut boundary = T::zero();
    let n = x.len() - 1;
    for c in 0..x.dim() {
        let base = if opts.no_base_correction { T::zero() } else { x.value(0, c) };
        pair = pair + pairing(&x, c, base, &y, c, alpha, &sites)?;
        if !opts.no_base_correction {
            boundary = boundary + x.value(0, c) * (y.value(n, c) - y.value(0, c));
        }
    }
    Ok((pair + boundary, boundary))
}

/// `∫_a^b X dY` as the fractional pairing of order `α` plus the boundary
/// term `X(a)(Y(b) - Y(a))`.
pub fn zahle_integral<T: Real>(x: &SampledPath<T>, y: &SampledPath<T>, alpha: T) -> Result<YoungIntegralResult> {
    zahle_integral_with(x, y, alpha, &YoungOptions::default())
}

pub fn zahle_integral_with<T: Real>(
    x: &SampledPath<T>,
    y: &SampledPath<T>,
    alpha: T,
    opts: &YoungOptions,
) -> Result<YoungIntegralResult> {
    let (value, boundary) = zahle_inner(x, y, alpha, opts)?;
    Ok(YoungIntegralResult {
        value: value.as_f64(),
        alpha_used: alpha.as_f64(),
        boundary_term: boundary.as_f64(),
        grid: x.len().max(y.len()),
        sweep: None,
    })
}

/// The path `t ↦ φ(X(t))` sampled at the nodes of `x`.
pub fn compose_path<T: Real>(x: &SampledPath<T>, phi: &BVCoefficient<T>) -> Result<SampledPath<T>> {
    phi.check_input(x)?;
    let d = phi.output_dim();
    x.map_points(d, |p| (0..d).map(|j| phi.value(p, j)).collect())
}

/// `Σ_j ∫ φ_j(X) dY^j` via [`zahle_integral`] on the composed path.
pub fn composition_integral<T: Real>(
    x: &SampledPath<T>,
    phi: &BVCoefficient<T>,
    y: &SampledPath<T>,
    alpha: T,
) -> Result<YoungIntegralResult> {
    let fx = compose_path(x, phi)?;
    if fx.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "coefficient has {} outputs, Y has dimension {}",
            fx.dim(),
            y.dim()
        )));
    }
    zahle_integral(&fx, y, alpha)
}

/// Evaluates `integral` at each order and reports the spread.
pub fn alpha_sweep<F>(integral: F, alphas: &[f64]) -> SweepTable
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let entries: Vec<SweepEntry> = alphas
        .par_iter()
        .map(|&alpha| match integral(alpha) {
            Ok(v) if v.is_finite() => SweepEntry {
                alpha,
                value: Some(v),
                error: None,
            },
            Ok(v) => SweepEntry {
                alpha,
                value: None,
                error: Some(format!("non-finite value {v}")),
            },
            Err(e) => SweepEntry {
                alpha,
                value: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let vals: Vec<f64> = entries.iter().filter_map(|e| e.value).collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let max_deviation = if vals.is_empty() { 0.0 } else { hi - lo };
    let scale = vals.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    SweepTable {
        entries,
        max_deviation,
        relative_deviation: max_deviation / scale,
    }
}

/// Outcome of the Young admissibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub margin: f64,
}

/// `γ + δ > 1` and `1/p + 1/q < γ + δ`; `p`, `q` may be infinite.
pub fn check_young_admissible(gamma: f64, delta: f64, p: f64, q: f64) -> Result<Admissibility> {
    check_open_unit("gamma", gamma)?;
    check_open_unit("delta", delta)?;
    for (name, v) in [("p", p), ("q", q)] {
        if v.is_nan() || v < 1.0 {
            return Err(Error::param(name, v, "[1, ∞]"));
        }
    }
    let s = gamma + delta;
    let margin = (s - 1.0).min(s - 1.0 / p - 1.0 / q);
    Ok(Admissibility {
        admissible: margin > 0.0,
        margin,
    })
}

/// Midpoint of the order window `(1 - δ, γ)` for Hölder exponents `γ` of
/// the integrand and `δ` of the integrator.
pub fn default_alpha(gamma: f64, delta: f64) -> Result<f64> {
    let (lo, hi) = (1.0 - delta, gamma);
    if !(lo < hi) {
        return Err(Error::EmptyWindow(format!("1 - δ = {lo} is not below γ = {hi}")));
    }
    Ok(0.5 * (lo + hi))
}

/// `default_alpha` with both exponents estimated from the sampled paths and
/// shrunk slightly, falling back to 1/2 when the estimates leave no window.
pub fn auto_alpha<T: Real>(x: &SampledPath<T>, y: &SampledPath<T>) -> f64 {
    let g = (x.roughness_exponent() - 0.02).clamp(0.01, 0.99);
    let d = (y.roughness_exponent() - 0.02).clamp(0.01, 0.99);
    default_alpha(g, d).unwrap_or(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::coefficient_library;
    use crate::path::uniform_grid;
    use proptest::prelude::*;

    fn lin(n: usize, f: impl Fn(f64) -> f64) -> SampledPath<f64> {
        SampledPath::from_fn(uniform_grid(0.0, 1.0, n), f).unwrap()
    }

    #[test]
    fn identity_against_identity_is_one_half() {
        let x = lin(64, |t| t);
        for alpha in [0.3, 0.5, 0.7] {
            let r = zahle_integral(&x, &x, alpha).unwrap();
            assert!((r.value - 0.5).abs() < 1e-6, "{alpha}: {}", r.value);
            assert_eq!(r.boundary_term, 0.0);
        }
    }

    #[test]
    fn constant_integrand_gives_boundary_term_only() {
        let x = lin(8, |_| 2.5);
        let y = lin(8, |t| (3.0 * t).sin());
        let r = zahle_integral(&x, &y, 0.4).unwrap();
        assert_eq!(r.value, 2.5 * 3f64.sin());
        assert_eq!(r.value, r.boundary_term);
    }

    #[test]
    fn piecewise_linear_pair_matches_exact_stieltjes_sum() {
        // both linear between the same nodes: ∫X dY = Σ (X_k + X_{k+1})/2 ΔY_k
        let x = lin(32, |t| (4.0 * t).cos() + 0.3);
        let y = lin(32, |t| t * t - t.sqrt());
        let exact: f64 = (0..32)
            .map(|k| 0.5 * (x.value(k, 0) + x.value(k + 1, 0)) * (y.value(k + 1, 0) - y.value(k, 0)))
            .sum();
        for alpha in [0.35, 0.5, 0.65] {
            let r = zahle_integral(&x, &y, alpha).unwrap();
            assert!((r.value - exact).abs() < 2e-5, "{alpha}: {} vs {exact}", r.value);
        }
    }

    #[test]
    fn dropping_the_base_correction_keeps_the_value() {
        let x = lin(32, |t| 1.0 + t);
        let y = lin(32, |t| t * t);
        let opts = YoungOptions {
            no_base_correction: true,
            ..Default::default()
        };
        let r = zahle_integral_with(&x, &y, 0.2, &opts).unwrap();
        let exact = 1.0 + 2.0 / 3.0;
        assert!((r.value - exact).abs() < 1e-3, "{}", r.value);
    }

    #[test]
    fn admissibility_examples() {
        let a = check_young_admissible(0.6, 0.6, f64::INFINITY, f64::INFINITY).unwrap();
        assert!(a.admissible && (a.margin - 0.2).abs() < 1e-12);
        assert!(!check_young_admissible(0.4, 0.5, 1.0, 1.0).unwrap().admissible);
        let a = check_young_admissible(0.6, 0.6, 2.0, 2.0).unwrap();
        assert!(a.admissible && (a.margin - 0.2).abs() < 1e-12);
        assert!(check_young_admissible(1.2, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn sweep_of_constant_integrand_has_zero_spread() {
        let x = lin(8, |_| -1.0);
        let y = lin(8, |t| t.powi(3));
        let t = alpha_sweep(|a| zahle_integral(&x, &y, a).map(|r| r.value), &[0.2, 0.5, 0.8]);
        assert_eq!(t.max_deviation, 0.0);
        let t = alpha_sweep(|a| zahle_integral(&x, &y, a).map(|r| r.value), &[0.5, 1.5]);
        assert!(t.entries[1].error.is_some());
    }

    #[test]
    fn composition_with_identity_is_zahle() {
        let x = lin(16, |t| t.sin());
        let y = lin(16, |t| t * t);
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        let a = composition_integral(&x, &id, &y, 0.5).unwrap();
        let b = zahle_integral(&x, &y, 0.5).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn vector_paths_pair_component_wise() {
        let t = uniform_grid(0.0, 1.0, 16);
        let pts: Vec<Vec<f64>> = t.iter().map(|&s| vec![s, 1.0]).collect();
        let x = SampledPath::new(t.clone(), pts).unwrap();
        let pts: Vec<Vec<f64>> = t.iter().map(|&s| vec![s, s]).collect();
        let y = SampledPath::new(t, pts).unwrap();
        let r = zahle_integral(&x, &y, 0.5).unwrap();
        assert!((r.value - 1.5).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn integral_is_linear_in_the_integrand(c in -2.0f64..2.0, alpha in 0.25f64..0.75) {
            let x1 = lin(12, |t| (2.0 * t).sin());
            let x2 = lin(12, |t| t * t);
            let y = lin(12, |t| (t + 0.5).ln());
            let comb = x1.add(&x2.scaled(c)).unwrap();
            let a = zahle_integral(&comb, &y, alpha).unwrap().value;
            let b = zahle_integral(&x1, &y, alpha).unwrap().value + c * zahle_integral(&x2, &y, alpha).unwrap().value;
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }
}
