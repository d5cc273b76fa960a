//! Rough integral `∫ φ(X) dY` against a multiplicative functional, built
//! from a compensated fractional derivative of `φ(X)` and a tensor term.
//!
//! The tensor term pairs `D^{2α-1}_{a+} ∂_iφ_j(X)` with the right-sided
//! derivative of order `2 - 2α` of `r ↦ (X⊗Y)_{r,b}`, realized as two nested
//! derivatives of order `1 - α`: the inner one acts on the first argument
//! of the tensor (Chen extension to `(r, s)`), the outer one on the
//! resulting function of `r`. On smooth paths this reproduces the
//! Riemann–Stieltjes value; the compensated term carries a minus sign and
//! the tensor term a plus sign.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bv::BVCoefficient;
use crate::error::{Error, Result};
use crate::frac_calc::{compensated_at_sites, marchaud_at_sites, partial_along_path, Side, Sites};
use crate::lift::{nested_tensor_derivative, nested_tensor_derivative_at, MultiplicativeFunctional};
use crate::path::SampledPath;
use crate::quadrature::graded_points;
use crate::potentials::{segment_functional, variability_norm, SegmentOptions};
use crate::scalar::Real;
use crate::young::{alpha_sweep, SweepTable, DEFAULT_POINTS_PER_CELL};

#[derive(Debug, Clone, Serialize)]
pub struct RoughIntegralResult {
    pub value: f64,
    pub alpha_used: f64,
    pub term_first: f64,
    pub term_second: f64,
    pub construction: String,
    pub grid: usize,
    pub sweep: Option<SweepTable>,
    pub bound_report: Option<BoundReport>,
}

/// Right-hand side of an a-priori estimate evaluated with constant 1.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub kind: String,
    pub rhs: f64,
    pub finite: bool,
    pub ingredients: BTreeMap<String, f64>,
    /// `|value| / rhs` once the integral is known.
    pub ratio: Option<f64>,
}

fn finite_or<T: Real>(vals: &[T], term: &str) -> Result<()> {
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: term.into(),
            detail: format!("unbounded at quadrature node {i}"),
        });
    }
    Ok(())
}

/// `(term_first, term_second)` at order `α`.
pub fn rough_terms<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    phi: &BVCoefficient<T>,
    alpha: T,
    points_per_cell: usize,
) -> Result<(T, T)> {
    if !(alpha >= T::lit(0.5) && alpha < T::one()) {
        return Err(Error::param("alpha", alpha.as_f64(), "[1/2, 1)"));
    }
    let x = mf.x();
    let y = mf.y();
    phi.check_input(x)?;
    if phi.output_dim() != mf.d() {
        return Err(Error::Dimension(format!(
            "coefficient has {} outputs, Y has dimension {}",
            phi.output_dim(),
            mf.d()
        )));
    }
    let (m, d) = (mf.m(), mf.d());
    let sites = Sites::graded(x.times(), points_per_cell);
    // cells where the path meets a kink of φ get sub-cell quadrature split
    // at the crossing times; the graded sites of those cells drop out
    let patch = crossing_patch(x, phi, points_per_cell)?;
    let mut w_main = sites.w.clone();
    if let Some((cells, _)) = &patch {
        for (i, w) in w_main.iter_mut().enumerate() {
            if cells[sites.cell[i]] {
                *w = T::zero();
            }
        }
    }
    let pair = |w: &[T], f: &[T], g: &[T]| {
        let mut acc = T::zero();
        for i in 0..w.len() {
            if w[i] != T::zero() {
                acc = acc + w[i] * f[i] * g[i];
            }
        }
        acc
    };
    let beta_right = T::one() - alpha;
    let mut first = T::zero();
    for j in 0..d {
        let yb = y.value(y.len() - 1, j);
        let comp = compensated_at_sites(x, phi, j, alpha, &sites);
        finite_or(&comp, "compensated derivative of phi(X)")?;
        let dy = marchaud_at_sites(y, j, Side::RightBMinus, beta_right, yb, &sites);
        finite_or(&dy, "right derivative of Y")?;
        first = first - pair(&w_main, &comp, &dy);
        if let Some((_, ps)) = &patch {
            let comp = compensated_at_sites(x, phi, j, alpha, ps);
            finite_or(&comp, "compensated derivative of phi(X)")?;
            let dy = marchaud_at_sites(y, j, Side::RightBMinus, beta_right, yb, ps);
            first = first - pair(&ps.w, &comp, &dy);
        }
    }
    let nested = nested_tensor_derivative(mf, beta_right, &sites);
    for col in &nested {
        finite_or(col, "tensor derivative")?;
    }
    let nested_patch = patch
        .as_ref()
        .map(|(_, ps)| nested_tensor_derivative_at(mf, beta_right, &sites, Some(ps)));
    let order = alpha + alpha - T::one();
    let mut second = T::zero();
    for i in 0..m {
        for j in 0..d {
            let jp = partial_along_path(phi, x, i, j)?;
            let dphi_at = |ss: &Sites<T>| -> Result<Vec<T>> {
                let v: Vec<T> = if order > T::zero() {
                    jp.left_derivative(order, T::zero(), ss)
                } else {
                    ss.t.iter().map(|&t| jp.eval(t)).collect()
                };
                finite_or(&v, "fractional derivative of the partials of phi(X)")?;
                Ok(v)
            };
            second = second + pair(&w_main, &dphi_at(&sites)?, &nested[i * d + j]);
            if let (Some((_, ps)), Some(np)) = (&patch, &nested_patch) {
                second = second + pair(&ps.w, &dphi_at(ps)?, &np[i * d + j]);
            }
        }
    }
    Ok((first, second))
}

/// Cells containing a kink crossing and the split quadrature covering them.
fn crossing_patch<T: Real>(
    x: &SampledPath<T>,
    phi: &BVCoefficient<T>,
    q: usize,
) -> Result<Option<(Vec<bool>, Sites<T>)>> {
    let crossings = phi.kink_crossings(x);
    if crossings.is_empty() {
        return Ok(None);
    }
    let times = x.times();
    let mut cells = vec![false; x.cells()];
    let mut pts = Vec::new();
    let mut idx = 0;
    while idx < crossings.len() {
        let k = crossings[idx].0;
        cells[k] = true;
        let mut breaks = vec![times[k]];
        while idx < crossings.len() && crossings[idx].0 == k {
            breaks.push(crossings[idx].1);
            idx += 1;
        }
        breaks.push(times[k + 1]);
        pts.extend(graded_points(&breaks, q));
    }
    let ts: Vec<T> = pts.iter().map(|p| p.0).collect();
    let mut ps = Sites::at(times, &ts)?;
    ps.w = pts.iter().map(|p| p.1).collect();
    Ok(Some((cells, ps)))
}

/// `∫_a^b φ(X) dY` at order `α`.
pub fn rough_integrate<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    phi: &BVCoefficient<T>,
    alpha: T,
) -> Result<RoughIntegralResult> {
    rough_integrate_with(mf, phi, alpha, DEFAULT_POINTS_PER_CELL)
}

pub fn rough_integrate_with<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    phi: &BVCoefficient<T>,
    alpha: T,
    points_per_cell: usize,
) -> Result<RoughIntegralResult> {
    let (first, second) = rough_terms(mf, phi, alpha, points_per_cell)?;
    Ok(RoughIntegralResult {
        value: (first + second).as_f64(),
        alpha_used: alpha.as_f64(),
        term_first: first.as_f64(),
        term_second: second.as_f64(),
        construction: mf.construction().to_string(),
        grid: mf.len(),
        sweep: None,
        bound_report: None,
    })
}

/// [`rough_integrate`] at each order.
pub fn rough_alpha_sweep<T: Real>(mf: &MultiplicativeFunctional<T>, phi: &BVCoefficient<T>, alphas: &[f64]) -> SweepTable {
    alpha_sweep(|a| rough_integrate(mf, phi, T::lit(a)).map(|r| r.value), alphas)
}

/// Open interval of admissible orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaWindow {
    pub lo: f64,
    pub hi: f64,
}

impl AlphaWindow {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, a: f64) -> bool {
        a > self.lo && a < self.hi
    }

    /// `k` equally spaced interior points.
    pub fn interior(&self, k: usize) -> Vec<f64> {
        (1..=k)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (k + 1) as f64)
            .collect()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 1.0 / 3.0 && beta < 0.5) {
        return Err(Error::param("beta", beta, "(1/3, 1/2)"));
    }
    Ok(())
}

/// `(1 - β, (λβ + 1)/2)` when `1/β - 2 < λ < 1`, otherwise `None`.
pub fn check_rough_admissible_smooth(beta: f64, lambda: f64) -> Result<Option<AlphaWindow>> {
    check_beta(beta)?;
    if !(lambda > 1.0 / beta - 2.0 && lambda < 1.0) {
        return Ok(None);
    }
    Ok(Some(AlphaWindow {
        lo: 1.0 - beta,
        hi: (lambda * beta + 1.0) / 2.0,
    }))
}

/// Parameter windows for BV coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BvAdmissibility {
    pub beta: f64,
    pub s: f64,
    /// `(½(β(1+s) - (1-β)), β(1+s) - (1-β))`, or `None` when
    /// `1/β - 2 < s < 1` fails.
    pub eps_window: Option<(f64, f64)>,
    /// `(1 - β, (sβ + 1)/2)`, the range swept by `α = β(1+s) - ε`.
    pub alpha_window: Option<AlphaWindow>,
}

impl BvAdmissibility {
    /// `α = β(1+s) - ε` for `ε` inside the window.
    pub fn alpha_for(&self, eps: f64) -> Result<f64> {
        let (lo, hi) = self
            .eps_window
            .ok_or_else(|| Error::EmptyWindow(format!("1/β - 2 < s < 1 fails for β = {}, s = {}", self.beta, self.s)))?;
        if !(eps > lo && eps < hi) {
            return Err(Error::param("eps", eps, format!("({lo}, {hi})")));
        }
        let alpha = self.beta * (1.0 + self.s) - eps;
        let w = self.alpha_window.expect("set with the eps window");
        debug_assert!(w.contains(alpha) && 2.0 * alpha - 1.0 < self.s * self.beta);
        Ok(alpha)
    }

    /// Middle of the `ε` window.
    pub fn default_eps(&self) -> Option<f64> {
        self.eps_window.map(|(lo, hi)| 0.5 * (lo + hi))
    }
}

pub fn check_rough_admissible_bv(beta: f64, s: f64) -> Result<BvAdmissibility> {
    check_beta(beta)?;
    let ok = s > 1.0 / beta - 2.0 && s < 1.0;
    let w = beta * (1.0 + s) - (1.0 - beta);
    Ok(BvAdmissibility {
        beta,
        s,
        eps_window: ok.then_some((0.5 * w, w)),
        alpha_window: ok.then_some(AlphaWindow {
            lo: 1.0 - beta,
            hi: (s * beta + 1.0) / 2.0,
        }),
    })
}

/// `∫ |f(t)| dt` by the graded rule.
fn l1_norm<T: Real>(times: &[T], mut f: impl FnMut(T) -> T) -> T {
    let sites = Sites::graded(times, 8);
    let mut acc = T::zero();
    for i in 0..sites.len() {
        acc = acc + sites.w[i] * f(sites.t[i]).abs();
    }
    acc
}

fn path_box<T: Real>(x: &SampledPath<T>) -> Vec<(T, T)> {
    (0..x.dim())
        .map(|i| {
            (0..x.len()).fold((T::infinity(), T::neg_infinity()), |(lo, hi), k| {
                let v = x.value(k, i);
                (lo.min(v), hi.max(v))
            })
        })
        .collect()
}

/// `[[r ↦ (X⊗Y)^{ij}_{r,b}]]_{2β}` over node pairs.
fn tensor_tail_seminorm<T: Real>(mf: &MultiplicativeFunctional<T>, beta: T, i: usize, j: usize) -> Result<T> {
    let n = mf.len() - 1;
    let vals: Vec<T> = (0..=n).map(|k| mf.node(k, n, i, j)).collect();
    let p = SampledPath::scalar(mf.times().to_vec(), vals)?;
    let e = beta + beta;
    if e >= T::one() {
        return Err(Error::param("2 beta", e.as_f64(), "(0, 1)"));
    }
    Ok(p.holder_seminorm(e)?.value)
}

struct Common<T> {
    hx: T,
    hy: Vec<T>,
    tail: Vec<T>,
    l1_phi: Vec<T>,
    l1_dphi: Vec<T>,
    lip: Vec<T>,
}

fn common<T: Real>(mf: &MultiplicativeFunctional<T>, phi: &BVCoefficient<T>, beta: T) -> Result<Common<T>> {
    let x = mf.x();
    let (m, d) = (mf.m(), mf.d());
    let hx = x.holder_seminorm(beta)?.value;
    let hy = (0..d)
        .map(|j| Ok(mf.y().component(j).holder_seminorm(beta)?.value))
        .collect::<Result<Vec<T>>>()?;
    let mut tail = Vec::with_capacity(m * d);
    let mut l1_dphi = Vec::with_capacity(m * d);
    for i in 0..m {
        for j in 0..d {
            tail.push(tensor_tail_seminorm(mf, beta, i, j)?);
            let jp = partial_along_path(phi, x, i, j)?;
            l1_dphi.push(l1_norm(x.times(), |t| jp.eval(t)));
        }
    }
    let mut buf = vec![T::zero(); m];
    let l1_phi = (0..d)
        .map(|j| {
            l1_norm(x.times(), |t| {
                x.eval_into(t, &mut buf);
                phi.value(&buf, j)
            })
        })
        .collect();
    let lip = (0..d).map(|j| phi.lip(j)).collect();
    Ok(Common {
        hx,
        hy,
        tail,
        l1_phi,
        l1_dphi,
        lip,
    })
}

fn finish(kind: &str, rhs: f64, ingredients: BTreeMap<String, f64>) -> BoundReport {
    BoundReport {
        kind: kind.into(),
        rhs,
        finite: rhs.is_finite(),
        ingredients,
        ratio: None,
    }
}

/// Estimate for coefficients with `λ`-Hölder partials, constant 1.
pub fn bound_smooth<T: Real>(mf: &MultiplicativeFunctional<T>, phi: &BVCoefficient<T>, lambda: T) -> Result<BoundReport> {
    let beta = mf.beta();
    let c = common(mf, phi, beta)?;
    let (m, d) = (mf.m(), mf.d());
    let range = path_box(mf.x());
    let mut ing = BTreeMap::new();
    ing.insert("holder_x".into(), c.hx.as_f64());
    let mut rhs = T::zero();
    for j in 0..d {
        let mut group = c.l1_phi[j] + c.lip[j] * c.hx;
        for i in 0..m {
            let hp = phi.partial_holder_seminorm(lambda, &range, i, j);
            ing.insert(format!("holder_partial[{i},{j}]"), hp.as_f64());
            if hp != T::zero() {
                group = group + hp * c.hx.powf(T::one() + lambda);
            }
            let ij = i * d + j;
            let mut second = c.l1_dphi[ij];
            if hp != T::zero() {
                second = second + hp * c.hx;
            }
            ing.insert(format!("l1_partial[{i},{j}]"), c.l1_dphi[ij].as_f64());
            ing.insert(format!("holder_tensor_tail[{i},{j}]"), c.tail[ij].as_f64());
            if c.tail[ij] != T::zero() {
                rhs = rhs + second * c.tail[ij];
            }
        }
        ing.insert(format!("l1_phi[{j}]"), c.l1_phi[j].as_f64());
        ing.insert(format!("lip[{j}]"), c.lip[j].as_f64());
        ing.insert(format!("holder_y[{j}]"), c.hy[j].as_f64());
        if c.hy[j] != T::zero() {
            rhs = rhs + group * c.hy[j];
        }
    }
    Ok(finish("smooth", rhs.as_f64(), ing))
}

/// Estimate for coefficients with BV partials, constant 1. The segment
/// functional is evaluated with `seg` (its resolution cap applies).
pub fn bound_bv<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    phi: &BVCoefficient<T>,
    s: T,
    eps: T,
    seg: &SegmentOptions,
) -> Result<BoundReport> {
    let beta = mf.beta();
    let c = common(mf, phi, beta)?;
    let (m, d) = (mf.m(), mf.d());
    let x = mf.x();
    let mut ing = BTreeMap::new();
    ing.insert("holder_x".into(), c.hx.as_f64());
    let hx_1s = c.hx.powf(T::one() + s);
    let hx_s = c.hx.powf(s);
    let mut rhs = T::zero();
    // an unbounded ingredient makes the estimate vacuous even against a zero factor
    let mul = |a: T, b: T| {
        if a.is_infinite() || b.is_infinite() {
            T::infinity()
        } else {
            a * b
        }
    };
    for j in 0..d {
        let mut group = c.l1_phi[j] + mul(c.lip[j], c.hx);
        for i in 0..m {
            let ij = i * d + j;
            let mu = phi.partial_gradient_measure(i, j);
            let (segv, var) = if mu.is_zero() {
                (T::zero(), T::zero())
            } else {
                let sv = segment_functional(x, &mu, s, eps, seg)?.value;
                let vv = variability_norm(x, &mu, s, T::one())?.norm;
                (sv, vv)
            };
            ing.insert(format!("segment[{i},{j}]"), segv.as_f64());
            ing.insert(format!("potential_l1[{i},{j}]"), var.as_f64());
            ing.insert(format!("l1_partial[{i},{j}]"), c.l1_dphi[ij].as_f64());
            ing.insert(format!("holder_tensor_tail[{i},{j}]"), c.tail[ij].as_f64());
            group = group + mul(segv, hx_1s) + mul(var, hx_1s);
            rhs = rhs + mul(c.l1_dphi[ij] + mul(var, hx_s), c.tail[ij]);
        }
        ing.insert(format!("l1_phi[{j}]"), c.l1_phi[j].as_f64());
        ing.insert(format!("lip[{j}]"), c.lip[j].as_f64());
        ing.insert(format!("holder_y[{j}]"), c.hy[j].as_f64());
        rhs = rhs + mul(group, c.hy[j]);
    }
    Ok(finish("bv", rhs.as_f64(), ing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::coefficient_library;
    use crate::lift::{lift_geometric_1d, lift_smooth};
    use crate::path::uniform_grid;

    fn lin(n: usize, f: impl Fn(f64) -> f64) -> SampledPath<f64> {
        SampledPath::from_fn(uniform_grid(0.0, 1.0, n), f).unwrap()
    }

    #[test]
    fn identity_on_smooth_paths_gives_one_half() {
        let x = lin(64, |t| t);
        let mf = lift_smooth(&x, &x).unwrap();
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        for alpha in [0.55, 0.62, 0.7] {
            let r = rough_integrate(&mf, &id, alpha).unwrap();
            assert!((r.value - 0.5).abs() < 1e-4, "{alpha}: {r:?}");
        }
    }

    #[test]
    fn identity_against_t_squared_gives_two_thirds() {
        let x = lin(128, |t| t);
        let y = lin(128, |t| t * t);
        let mf = lift_smooth(&x, &y).unwrap();
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        let r = rough_integrate(&mf, &id, 0.6).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn square_on_smooth_path_matches_chain_rule() {
        let x = lin(128, |t| (2.0 * t).sin());
        let mf = lift_geometric_1d(&x).unwrap();
        let sq = coefficient_library::<f64>("square", &[]).unwrap();
        let r = rough_integrate(&mf, &sq, 0.6).unwrap();
        let exact = (2f64).sin().powi(3) / 3.0;
        assert!((r.value - exact).abs() < 1e-3, "{} vs {exact}", r.value);
    }

    #[test]
    fn abs_on_crossing_path_matches_antiderivative() {
        let x = lin(128, |t| t - 0.37);
        let mf = lift_geometric_1d(&x).unwrap();
        let abs = coefficient_library::<f64>("abs", &[]).unwrap();
        let r = rough_integrate(&mf, &abs, 0.6).unwrap();
        let big = |v: f64| v * v.abs() / 2.0;
        let exact = big(0.63) - big(-0.37);
        assert!((r.value - exact).abs() < 1e-3, "{} vs {exact}", r.value);
    }

    #[test]
    fn windows_match_arithmetic() {
        let w = check_rough_admissible_smooth(0.4, 0.8).unwrap().unwrap();
        assert!((w.lo - 0.6).abs() < 1e-12 && (w.hi - 0.66).abs() < 1e-12);
        assert!(check_rough_admissible_smooth(0.4, 0.4).unwrap().is_none());
        let w = check_rough_admissible_smooth(0.45, 0.5).unwrap().unwrap();
        assert!((w.lo - 0.55).abs() < 1e-12 && (w.hi - 0.6125).abs() < 1e-12);
        assert!(check_rough_admissible_smooth(0.3, 0.9).is_err());

        let bv = check_rough_admissible_bv(0.4, 0.8).unwrap();
        let (lo, hi) = bv.eps_window.unwrap();
        assert!((lo - 0.06).abs() < 1e-12 && (hi - 0.12).abs() < 1e-12);
        assert!((bv.alpha_for(0.09).unwrap() - 0.63).abs() < 1e-12);
        assert!(check_rough_admissible_bv(0.4, 0.5).unwrap().eps_window.is_none());
        let (lo, hi) = check_rough_admissible_bv(0.45, 0.6).unwrap().eps_window.unwrap();
        assert!((lo - 0.085).abs() < 1e-12 && (hi - 0.17).abs() < 1e-12);
    }

    #[test]
    fn alpha_below_one_half_is_rejected() {
        let x = lin(8, |t| t);
        let mf = lift_smooth(&x, &x).unwrap();
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        assert!(rough_integrate(&mf, &id, 0.4).is_err());
    }

    #[test]
    fn bound_for_constant_coefficient_is_l1_times_holder() {
        let x = lin(32, |t| t * t);
        let mf = lift_geometric_1d(&x).unwrap().with_beta(0.4).unwrap();
        let c = crate::bv::BVCoefficient::<f64>::smooth("const", |_| 2.0, |_| 0.0, 1.0, 0.0).unwrap();
        let rep = bound_smooth(&mf, &c, 0.99).unwrap();
        let hy = x.holder_seminorm(0.4).unwrap().value;
        assert!((rep.rhs - 2.0 * hy).abs() < 1e-9, "{rep:?}");
    }

    #[test]
    fn bv_bound_is_infinite_on_the_atom() {
        let x = lin(16, |_| 0.0);
        let mf = lift_geometric_1d(&x).unwrap().with_beta(0.4).unwrap();
        let abs = coefficient_library::<f64>("abs", &[]).unwrap();
        let rep = bound_bv(&mf, &abs, 0.5, 0.25, &SegmentOptions::default()).unwrap();
        assert!(!rep.finite);
    }
}
