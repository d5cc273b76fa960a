//! Weyl–Marchaud fractional derivatives of sampled paths.
//!
//! For a piecewise-linear `g` the singular integral
//! `α ∫ (g(t) - g(s)) / |t - s|^{α+1} ds` splits into per-piece integrals of
//! `(d + k u) u^{-α-1}`, which have elementary antiderivatives. Everything
//! here is real-valued: the formal phase `(-1)^α` attached to right-sided
//! derivatives is dropped, and the integral pairings fix the overall sign.

use rayon::prelude::*;
use serde::Serialize;

use crate::bv::BVCoefficient;
use crate::error::{Error, Result};
use crate::path::{check_open_unit, SampledPath};
use crate::quadrature;
use crate::scalar::Real;

/// Which endpoint the derivative is anchored at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `D^α_{a+}`.
    LeftAPlus,
    /// `D^α_{b-}`.
    RightBMinus,
}

/// Constant subtracted from the path before differentiating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseCorrection {
    SubtractFa,
    SubtractFb,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FracDerivSpec<T> {
    pub side: Side,
    pub alpha: T,
    pub base: BaseCorrection,
}

impl<T: Real> FracDerivSpec<T> {
    pub fn new(side: Side, alpha: T, base: BaseCorrection) -> Result<Self> {
        check_open_unit("alpha", alpha)?;
        match (side, base) {
            (Side::LeftAPlus, BaseCorrection::SubtractFb) | (Side::RightBMinus, BaseCorrection::SubtractFa) => {
                Err(Error::Parse("base correction must match the derivative side".into()))
            }
            _ => Ok(FracDerivSpec { side, alpha, base }),
        }
    }

    /// `D^α_{a+}(f - f(a))`.
    pub fn left(alpha: T) -> Result<Self> {
        Self::new(Side::LeftAPlus, alpha, BaseCorrection::SubtractFa)
    }

    /// `D^α_{b-}(f - f(b))`.
    pub fn right(alpha: T) -> Result<Self> {
        Self::new(Side::RightBMinus, alpha, BaseCorrection::SubtractFb)
    }
}

/// `α ∫_{u1}^{u0} (d + k (u - u1)) u^{-α-1} du` with `p1 = u1^{-α}` and
/// `p0 = u0^{-α}`; `ratio = α / (1 - α)`.
#[inline]
pub(crate) fn piece_term<T: Real>(d: T, k: T, u1: T, u0: T, p1: T, p0: T, ratio: T) -> T {
    if u1 <= T::zero() {
        if d != T::zero() {
            return d.signum() * T::infinity();
        }
        return k * ratio * u0 * p0;
    }
    let diff = p1 - p0;
    d * diff + k * (ratio * (u0 * p0 - u1 * p1) - u1 * diff)
}

/// Source of `|t - s_j|^{e}` for the breakpoints `s_j` of one evaluation
/// point: either a precomputed table (uniform grids, standard offsets) or
/// direct evaluation.
#[derive(Clone, Copy)]
pub(crate) enum Pw<'a, T> {
    /// `tab[j.abs_diff(base) - shift]`.
    Left { tab: &'a [T], k: usize },
    Right { tab: &'a [T], k: usize },
    Direct { times: &'a [T], t: T, e: T },
}

impl<T: Real> Pw<'_, T> {
    #[inline]
    pub(crate) fn get(&self, j: usize) -> T {
        match *self {
            Pw::Left { tab, k } => tab[k - j],
            Pw::Right { tab, k } => tab[j - k - 1],
            Pw::Direct { times, t, e } => (t - times[j]).abs().pow_signed(e),
        }
    }
}

/// Evaluation points for pairing integrals.
///
/// Points are grouped by grid cell; when the grid is uniform every point
/// sits at one of a few standard fractional offsets, and kernel powers are
/// read from per-offset tables instead of being recomputed.
#[derive(Debug, Clone)]
pub struct Sites<T> {
    pub t: Vec<T>,
    /// Quadrature weights including the cell length (zero for plain
    /// evaluation grids).
    pub w: Vec<T>,
    pub cell: Vec<usize>,
    /// Index into `offsets`, or `NO_SLOT`.
    pub slot: Vec<usize>,
    pub offsets: Vec<T>,
    pub h: Option<T>,
    pub q: usize,
}

pub(crate) const NO_SLOT: usize = usize::MAX;

impl<T: Real> Sites<T> {
    /// `q` graded Gauss–Legendre points in every cell of `times`.
    pub fn graded(times: &[T], q: usize) -> Self {
        let rule = quadrature::graded(q);
        let cells = times.len() - 1;
        let h = uniform_step(times);
        let mut s = Sites {
            t: Vec::with_capacity(cells * q),
            w: Vec::with_capacity(cells * q),
            cell: Vec::with_capacity(cells * q),
            slot: Vec::with_capacity(cells * q),
            offsets: rule.nodes.iter().map(|&x| T::lit(x)).collect(),
            h,
            q: rule.len(),
        };
        for k in 0..cells {
            let (t0, t1) = (times[k], times[k + 1]);
            for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                s.t.push(t0 + (t1 - t0) * T::lit(x));
                s.w.push((t1 - t0) * T::lit(w));
                s.cell.push(k);
                s.slot.push(if h.is_some() { i } else { NO_SLOT });
            }
        }
        s
    }

    /// Arbitrary evaluation times in `[times[0], times[n]]`.
    pub fn at(times: &[T], ts: &[T]) -> Result<Self> {
        let (a, b) = (times[0], times[times.len() - 1]);
        let h = uniform_step(times);
        let mut s = Sites {
            t: Vec::with_capacity(ts.len()),
            w: vec![T::zero(); ts.len()],
            cell: Vec::with_capacity(ts.len()),
            slot: Vec::with_capacity(ts.len()),
            offsets: vec![T::zero()],
            h,
            q: 0,
        };
        for &t in ts {
            if !(t >= a && t <= b) {
                return Err(Error::OutOfDomain {
                    t: t.as_f64(),
                    a: a.as_f64(),
                    b: b.as_f64(),
                });
            }
            let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1) - 1;
            s.t.push(t);
            s.cell.push(k);
            s.slot.push(if h.is_some() && t == times[k] { 0 } else { NO_SLOT });
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `Σ w_i f_i g_i`.
    pub fn pair(&self, f: &[T], g: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.len() {
            acc = acc + self.w[i] * f[i] * g[i];
        }
        acc
    }
}

/// Common step when every cell has the same length.
pub(crate) fn uniform_step<T: Real>(times: &[T]) -> Option<T> {
    let n = times.len() - 1;
    let h = (times[n] - times[0]) / T::from_usize_lossy(n);
    let tol = T::lit(1e-9) * h;
    times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= tol)
        .then_some(h)
}

/// Per-offset tables of `((m + x) h)^e` (left) and `((m + 1 - x) h)^e` (right).
pub(crate) struct PowTables<T> {
    left: Vec<Vec<T>>,
    right: Vec<Vec<T>>,
}

impl<T: Real> PowTables<T> {
    pub(crate) fn new(sites: &Sites<T>, cells: usize, e: T) -> Option<Self> {
        let h = sites.h?;
        let build = |x: T| -> Vec<T> {
            (0..=cells)
                .map(|m| ((T::from_usize_lossy(m) + x) * h).pow_signed(e))
                .collect()
        };
        Some(PowTables {
            left: sites.offsets.iter().map(|&x| build(x)).collect(),
            right: sites.offsets.iter().map(|&x| build(T::one() - x)).collect(),
        })
    }

    #[inline]
    pub(crate) fn left<'a>(tables: &'a Option<Self>, sites: &Sites<T>, i: usize, times: &'a [T], e: T) -> Pw<'a, T> {
        match tables {
            Some(tb) if sites.slot[i] != NO_SLOT => Pw::Left {
                tab: &tb.left[sites.slot[i]],
                k: sites.cell[i],
            },
            _ => Pw::Direct { times, t: sites.t[i], e },
        }
    }

    #[inline]
    pub(crate) fn right<'a>(tables: &'a Option<Self>, sites: &Sites<T>, i: usize, times: &'a [T], e: T) -> Pw<'a, T> {
        match tables {
            Some(tb) if sites.slot[i] != NO_SLOT => Pw::Right {
                tab: &tb.right[sites.slot[i]],
                k: sites.cell[i],
            },
            _ => Pw::Direct { times, t: sites.t[i], e },
        }
    }
}

/// `α ∫_a^t (g(t) - g(s)) (t - s)^{-α-1} ds` for the linear interpolant of
/// node values `vals` with `t` in cell `k`; `pw(j) = (t - s_j)^{-α}`.
pub(crate) fn left_integral<T: Real>(
    times: &[T],
    vals: impl Fn(usize) -> T,
    k: usize,
    t: T,
    gt: T,
    alpha: T,
    pw: Pw<'_, T>,
) -> T {
    let ratio = alpha / (T::one() - alpha);
    let mut acc = T::zero();
    for p in 0..k {
        let u1 = t - times[p + 1];
        let u0 = t - times[p];
        let slope = (vals(p + 1) - vals(p)) / (times[p + 1] - times[p]);
        acc = acc + piece_term(gt - vals(p + 1), slope, u1, u0, pw.get(p + 1), pw.get(p), ratio);
    }
    let u0 = t - times[k];
    if u0 > T::zero() {
        let slope = (vals(k + 1) - vals(k)) / (times[k + 1] - times[k]);
        acc = acc + slope * ratio * u0 * pw.get(k);
    }
    acc
}

/// Mirror of [`left_integral`]: `α ∫_t^b (g(t) - g(s)) (s - t)^{-α-1} ds`,
/// `pw(j) = (s_j - t)^{-α}`.
pub(crate) fn right_integral<T: Real>(
    times: &[T],
    vals: impl Fn(usize) -> T,
    k: usize,
    t: T,
    gt: T,
    alpha: T,
    pw: Pw<'_, T>,
) -> T {
    let ratio = alpha / (T::one() - alpha);
    let n = times.len() - 1;
    let mut acc = T::zero();
    let u0 = times[k + 1] - t;
    if u0 > T::zero() {
        let slope = (vals(k + 1) - vals(k)) / (times[k + 1] - times[k]);
        acc = acc - slope * ratio * u0 * pw.get(k + 1);
    }
    for p in k + 1..n {
        let u1 = times[p] - t;
        let u0 = times[p + 1] - t;
        let slope = (vals(p + 1) - vals(p)) / (times[p + 1] - times[p]);
        acc = acc + piece_term(gt - vals(p), -slope, u1, u0, pw.get(p), pw.get(p + 1), ratio);
    }
    acc
}

/// Marchaud derivative of component `comp` of `path` at every site,
/// normalized by `Γ(1 - α)`. `base` is subtracted from the path.
pub(crate) fn marchaud_at_sites<T: Real>(
    path: &SampledPath<T>,
    comp: usize,
    side: Side,
    alpha: T,
    base: T,
    sites: &Sites<T>,
) -> Vec<T> {
    let times = path.times();
    let e = -alpha;
    let tables = PowTables::new(sites, path.cells(), e);
    let norm = T::one() / (T::one() - alpha).gamma();
    let n = path.len() - 1;
    (0..sites.len())
        .into_par_iter()
        .map(|i| {
            let t = sites.t[i];
            let k = sites.cell[i];
            let gt = path.eval_component(t, comp) - base;
            let vals = |j: usize| path.value(j, comp) - base;
            match side {
                Side::LeftAPlus => {
                    let pw = PowTables::left(&tables, sites, i, times, e);
                    let boundary = if t > times[0] {
                        gt * (t - times[0]).powf(e)
                    } else if gt == T::zero() {
                        T::zero()
                    } else {
                        gt.signum() * T::infinity()
                    };
                    (boundary + left_integral(times, vals, k, t, gt, alpha, pw)) * norm
                }
                Side::RightBMinus => {
                    let pw = PowTables::right(&tables, sites, i, times, e);
                    let boundary = if t < times[n] {
                        gt * (times[n] - t).powf(e)
                    } else if gt == T::zero() {
                        T::zero()
                    } else {
                        gt.signum() * T::infinity()
                    };
                    (boundary + right_integral(times, vals, k, t, gt, alpha, pw)) * norm
                }
            }
        })
        .collect()
}

/// Fractional derivative of every component of `path` on `t_grid`
/// (default: the path's own grid).
///
/// Only integrals of the result are contractually meaningful; point values
/// are those of the derivative of the linear interpolant.
pub fn frac_derivative<T: Real>(
    path: &SampledPath<T>,
    spec: &FracDerivSpec<T>,
    t_grid: Option<&[T]>,
) -> Result<SampledPath<T>> {
    check_open_unit("alpha", spec.alpha)?;
    let ts = t_grid.unwrap_or(path.times()).to_vec();
    let sites = Sites::at(path.times(), &ts)?;
    let m = path.dim();
    let mut out = vec![T::zero(); ts.len() * m];
    for c in 0..m {
        let base = match spec.base {
            BaseCorrection::SubtractFa => path.value(0, c),
            BaseCorrection::SubtractFb => path.value(path.len() - 1, c),
            BaseCorrection::None => T::zero(),
        };
        let vals = marchaud_at_sites(path, c, spec.side, spec.alpha, base, &sites);
        for (i, v) in vals.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Singular(format!(
                    "derivative of component {c} is unbounded at t = {}",
                    ts[i]
                )));
            }
            out[i * m + c] = v;
        }
    }
    SampledPath::from_flat(ts, out, m)
}

/// Scalar function that is linear between grid nodes plus finitely many
/// jumps `(c, J)` at arbitrary times (right-continuous).
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath<T> {
    pub cont: SampledPath<T>,
    pub jumps: Vec<(T, T)>,
}

impl<T: Real> JumpPath<T> {
    pub fn eval(&self, t: T) -> T {
        let mut v = self.cont.eval_component(t, 0);
        for &(c, j) in &self.jumps {
            if c <= t {
                v = v + j;
            }
        }
        v
    }

    /// `D^α_{a+}(f - base)` at every site, normalized.
    pub(crate) fn left_derivative(&self, alpha: T, base: T, sites: &Sites<T>) -> Vec<T> {
        let mut out = marchaud_at_sites(&self.cont, 0, Side::LeftAPlus, alpha, base, sites);
        if self.jumps.is_empty() {
            return out;
        }
        let norm = T::one() / (T::one() - alpha).gamma();
        out.par_iter_mut().enumerate().for_each(|(i, v)| {
            let t = sites.t[i];
            let mut acc = T::zero();
            for &(c, j) in &self.jumps {
                if c < t {
                    acc = acc + j * (t - c).powf(-alpha);
                } else if c == t && j != T::zero() {
                    acc = acc + j.signum() * T::infinity();
                }
            }
            *v = *v + acc * norm;
        });
        out
    }
}

/// `∂_i φ_j(X(t))` as a [`JumpPath`]: exact (piecewise constant with jumps
/// at crossing times) for piecewise-linear scalar coefficients, linear
/// interpolation of node values otherwise.
pub fn partial_along_path<T: Real>(coef: &BVCoefficient<T>, x: &SampledPath<T>, i: usize, j: usize) -> Result<JumpPath<T>> {
    coef.check_input(x)?;
    if !coef.is_piecewise_linear() {
        let cont = x.map_points(1, |p| vec![coef.partial(p, i, j)])?;
        return Ok(JumpPath { cont, jumps: Vec::new() });
    }
    let crossings = coef.kink_crossings(x);
    let slope_at = |v: T| coef.partial(&[v], 0, 0);
    // value on each open sub-interval, determined at its midpoint
    let mut pieces: Vec<(T, T)> = Vec::new(); // (start time, value)
    let mut ci = 0;
    for k in 0..x.cells() {
        let mut cuts = vec![x.time(k)];
        while ci < crossings.len() && crossings[ci].0 == k {
            cuts.push(crossings[ci].1);
            ci += 1;
        }
        cuts.push(x.time(k + 1));
        for w in cuts.windows(2) {
            let mid = (w[0] + w[1]) * T::lit(0.5);
            let v = slope_at(x.eval_component(mid, 0));
            pieces.push((w[0], v));
        }
    }
    let first = pieces[0].1;
    let mut jumps = Vec::new();
    for w in pieces.windows(2) {
        let d = w[1].1 - w[0].1;
        if d != T::zero() {
            jumps.push((w[1].0, d));
        }
    }
    let cont = SampledPath::from_fn(x.times().to_vec(), |_| first)?;
    Ok(JumpPath { cont, jumps })
}

/// Number of cells before the evaluation cell integrated with the
/// 4-point rule and direct numerators; farther cells use the separable
/// 2-point form.
const NEAR_CELLS: usize = 8;

/// Precomputed `θ` nodes for the compensated derivative.
struct ThetaNodes<T> {
    /// Per far-rule node: cell, offset slot (or `NO_SLOT`), θ, weight,
    /// `φ(X_θ) - Σ ∂_iφ(X_θ) X^i_θ`, and `∂_iφ(X_θ)` (m entries).
    cell: Vec<usize>,
    slot: Vec<usize>,
    theta: Vec<T>,
    w: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
    /// Start index of each cell's nodes.
    start: Vec<usize>,
    offsets: Vec<T>,
}

/// Compensated derivative `D̂^γ_{a+} φ_j(X)` at every site.
pub(crate) fn compensated_at_sites<T: Real>(
    x: &SampledPath<T>,
    coef: &BVCoefficient<T>,
    j: usize,
    gamma: T,
    sites: &Sites<T>,
) -> Vec<T> {
    let m = x.dim();
    let times = x.times();
    let cells = x.cells();
    let crossings = coef.kink_crossings(x);
    let mut cuts_per_cell: Vec<Vec<T>> = vec![Vec::new(); cells];
    for &(k, t) in &crossings {
        cuts_per_cell[k].push(t);
    }
    let far_rule = quadrature::legendre(2);
    let near_rule = quadrature::legendre(4);
    let own_rule = quadrature::graded(8);

    // far-rule θ nodes in every cell
    let mut nodes = ThetaNodes {
        cell: Vec::new(),
        slot: Vec::new(),
        theta: Vec::new(),
        w: Vec::new(),
        b: Vec::new(),
        c: Vec::new(),
        start: Vec::with_capacity(cells + 1),
        offsets: far_rule.nodes.iter().map(|&v| T::lit(v)).collect(),
    };
    let mut xb = vec![T::zero(); m];
    for k in 0..cells {
        nodes.start.push(nodes.theta.len());
        let mut edges = vec![times[k]];
        edges.extend(cuts_per_cell[k].iter().copied());
        edges.push(times[k + 1]);
        let split = edges.len() > 2;
        for w in edges.windows(2) {
            for (qi, (&v, &wt)) in far_rule.nodes.iter().zip(&far_rule.weights).enumerate() {
                let th = w[0] + (w[1] - w[0]) * T::lit(v);
                x.eval_into(th, &mut xb);
                let mut b = coef.value(&xb, j);
                for i in 0..m {
                    let ci = coef.partial(&xb, i, j);
                    b = b - ci * xb[i];
                    nodes.c.push(ci);
                }
                nodes.cell.push(k);
                nodes.slot.push(if split || sites.h.is_none() { NO_SLOT } else { qi });
                nodes.theta.push(th);
                nodes.w.push((w[1] - w[0]) * T::lit(wt));
                nodes.b.push(b);
            }
        }
    }
    nodes.start.push(nodes.theta.len());

    // kernel tables (r - θ)^{-γ-1} for uniform grids: ((m + x - y) h)
    let e = -gamma - T::one();
    let tables: Option<Vec<Vec<Vec<T>>>> = sites.h.map(|h| {
        sites
            .offsets
            .iter()
            .map(|&xo| {
                nodes
                    .offsets
                    .iter()
                    .map(|&yo| {
                        (0..=cells)
                            .map(|mm| {
                                let d = T::from_usize_lossy(mm) + xo - yo;
                                if d > T::zero() {
                                    (d * h).powf(e)
                                } else {
                                    T::zero()
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    });

    let norm = T::one() / (T::one() - gamma).gamma();
    let a = times[0];
    (0..sites.len())
        .into_par_iter()
        .map(|si| {
            let r = sites.t[si];
            let k = sites.cell[si];
            let mut xr = vec![T::zero(); m];
            let mut xt = vec![T::zero(); m];
            x.eval_into(r, &mut xr);
            let ar = coef.value(&xr, j);
            let boundary = if r > a {
                ar * (r - a).powf(-gamma)
            } else if ar == T::zero() {
                T::zero()
            } else {
                ar.signum() * T::infinity()
            };
            let numer = |th: T, xt: &mut [T]| -> T {
                x.eval_into(th, xt);
                let mut v = ar - coef.value(xt, j);
                for i in 0..m {
                    v = v - coef.partial(xt, i, j) * (xr[i] - xt[i]);
                }
                v
            };
            let mut integral = T::zero();
            // own cell [t_k, r] and the previous cell, graded
            let mut own_edges = vec![times[k]];
            own_edges.extend(cuts_per_cell[k].iter().copied().filter(|&c| c < r));
            own_edges.push(r);
            let mut near_pieces: Vec<(T, T, bool)> = own_edges.windows(2).map(|w| (w[0], w[1], true)).collect();
            if k >= 1 {
                let mut e2 = vec![times[k - 1]];
                e2.extend(cuts_per_cell[k - 1].iter().copied());
                e2.push(times[k]);
                near_pieces.extend(e2.windows(2).map(|w| (w[0], w[1], true)));
            }
            let lo_near = k.saturating_sub(NEAR_CELLS);
            for p in lo_near..k.saturating_sub(1) {
                let mut e2 = vec![times[p]];
                e2.extend(cuts_per_cell[p].iter().copied());
                e2.push(times[p + 1]);
                near_pieces.extend(e2.windows(2).map(|w| (w[0], w[1], false)));
            }
            for (lo, hi, graded) in near_pieces {
                if hi <= lo {
                    continue;
                }
                let rule = if graded { own_rule } else { near_rule };
                let len = hi - lo;
                for (&v, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    let th = lo + len * T::lit(v);
                    let d = r - th;
                    if d > T::zero() {
                        integral = integral + len * T::lit(wt) * numer(th, &mut xt) * d.powf(e);
                    }
                }
            }
            // far cells: separable numerator ar - b_θ - Σ c_θ X_r
            let far_end = nodes.start[lo_near];
            let slot = sites.slot[si];
            for n in 0..far_end {
                let kern = match (&tables, slot, nodes.slot[n]) {
                    (Some(tb), s, y) if s != NO_SLOT && y != NO_SLOT => tb[s][y][k - nodes.cell[n]],
                    _ => (r - nodes.theta[n]).powf(e),
                };
                let mut v = ar - nodes.b[n];
                for i in 0..m {
                    v = v - nodes.c[n * m + i] * xr[i];
                }
                integral = integral + nodes.w[n] * kern * v;
            }
            (boundary + gamma * integral) * norm
        })
        .collect()
}

/// Compensated fractional derivative `r ↦ D̂^γ_{a+} φ_j(X)(r)` on `r_grid`
/// (default: the path grid).
pub fn compensated_frac_derivative<T: Real>(
    x: &SampledPath<T>,
    coef: &BVCoefficient<T>,
    gamma: T,
    j: usize,
    r_grid: Option<&[T]>,
) -> Result<SampledPath<T>> {
    check_open_unit("gamma", gamma)?;
    coef.check_input(x)?;
    if j >= coef.output_dim() {
        return Err(Error::Dimension(format!("output index {j} of a {}-dimensional coefficient", coef.output_dim())));
    }
    let ts = r_grid.unwrap_or(x.times()).to_vec();
    let sites = Sites::at(x.times(), &ts)?;
    let vals = compensated_at_sites(x, coef, j, gamma, &sites);
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::Singular(format!("compensated derivative unbounded at r = {}", ts[i])));
    }
    SampledPath::scalar(ts, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::coefficient_library;
    use crate::path::uniform_grid;
    use proptest::prelude::*;

    fn gamma(x: f64) -> f64 {
        Real::gamma(x)
    }

    #[test]
    fn identity_left_half_derivative() {
        let p = SampledPath::from_fn(uniform_grid(0.0, 1.0, 64), |t| t).unwrap();
        let d = frac_derivative(&p, &FracDerivSpec::left(0.5).unwrap(), None).unwrap();
        let end = d.value(d.len() - 1, 0);
        assert!((end - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12, "{end}");
        for k in 0..d.len() {
            let t = d.time(k);
            let exact = t.sqrt() / gamma(1.5);
            assert!((d.value(k, 0) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_right_half_derivative_is_negative() {
        let p = SampledPath::from_fn(uniform_grid(0.0, 1.0, 64), |t| t).unwrap();
        let d = frac_derivative(&p, &FracDerivSpec::right(0.5).unwrap(), None).unwrap();
        assert!((d.value(0, 0) + 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        for k in 0..d.len() {
            let exact = -2.0 * (1.0 - d.time(k)).sqrt() / std::f64::consts::PI.sqrt();
            assert!((d.value(k, 0) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_have_zero_corrected_derivative() {
        let p = SampledPath::from_fn(uniform_grid(0.0, 2.0, 16), |_| 3.5).unwrap();
        for spec in [FracDerivSpec::left(0.3).unwrap(), FracDerivSpec::right(0.7).unwrap()] {
            let d = frac_derivative(&p, &spec, None).unwrap();
            assert!(d.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn uncorrected_left_derivative_is_singular_at_a() {
        let p = SampledPath::from_fn(uniform_grid(0.0, 1.0, 8), |_| 1.0).unwrap();
        let spec = FracDerivSpec::new(Side::LeftAPlus, 0.5, BaseCorrection::None).unwrap();
        assert!(matches!(frac_derivative(&p, &spec, None), Err(Error::Singular(_))));
        let inner = [0.25, 0.5];
        let d = frac_derivative(&p, &spec, Some(&inner)).unwrap();
        assert!((d.value(0, 0) - 0.25f64.powf(-0.5) / gamma(0.5)).abs() < 1e-12);
    }

    #[test]
    fn spec_rejects_mismatched_base() {
        assert!(FracDerivSpec::new(Side::LeftAPlus, 0.5, BaseCorrection::SubtractFb).is_err());
        assert!(FracDerivSpec::<f64>::left(1.0).is_err());
    }

    #[test]
    fn uniform_tables_match_direct_evaluation() {
        let times = uniform_grid(0.0, 1.0, 32);
        let mut nonuni = times.clone();
        nonuni[5] += 1e-3;
        let f = |t: f64| (7.0 * t).sin() + t * t;
        let p = SampledPath::from_fn(times.clone(), f).unwrap();
        let sites = Sites::graded(&times, 4);
        let fast = marchaud_at_sites(&p, 0, Side::LeftAPlus, 0.4, 0.0, &sites);
        let mut slow_sites = sites.clone();
        slow_sites.h = None;
        slow_sites.slot.iter_mut().for_each(|s| *s = NO_SLOT);
        let slow = marchaud_at_sites(&p, 0, Side::LeftAPlus, 0.4, 0.0, &slow_sites);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()));
        }
        let fast = marchaud_at_sites(&p, 0, Side::RightBMinus, 0.6, p.value(32, 0), &sites);
        let slow = marchaud_at_sites(&p, 0, Side::RightBMinus, 0.6, p.value(32, 0), &slow_sites);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()));
        }
        assert!(uniform_step(&nonuni).is_none());
    }

    #[test]
    fn step_function_derivative_closed_form() {
        // H(t - 0.3) on [0, 1]: D^α = (t - 0.3)^{-α} / Γ(1 - α) for t > 0.3
        let times = uniform_grid(0.0, 1.0, 10);
        let jp = JumpPath {
            cont: SampledPath::from_fn(times.clone(), |_| 0.0).unwrap(),
            jumps: vec![(0.3, 1.0)],
        };
        let sites = Sites::at(&times, &[0.2, 0.5, 1.0]).unwrap();
        let d = jp.left_derivative(0.25, 0.0, &sites);
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 0.2f64.powf(-0.25) / gamma(0.75)).abs() < 1e-13);
        assert!((d[2] - 0.7f64.powf(-0.25) / gamma(0.75)).abs() < 1e-13);
    }

    #[test]
    fn partial_of_abs_along_crossing_path() {
        let x = SampledPath::from_fn(uniform_grid(0.0, 1.0, 4), |t| t - 0.4).unwrap();
        let abs = coefficient_library::<f64>("abs", &[]).unwrap();
        let jp = partial_along_path(&abs, &x, 0, 0).unwrap();
        assert_eq!(jp.jumps.len(), 1);
        assert!((jp.jumps[0].0 - 0.4).abs() < 1e-15);
        assert_eq!(jp.jumps[0].1, 2.0);
        assert_eq!(jp.eval(0.1), -1.0);
        assert_eq!(jp.eval(0.9), 1.0);
    }

    #[test]
    fn compensated_derivative_linear_and_square() {
        let times = uniform_grid(0.0, 1.0, 64);
        let x = SampledPath::from_fn(times.clone(), |t| t).unwrap();
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        let d = compensated_frac_derivative(&x, &id, 0.5, 0, Some(&[0.25, 1.0])).unwrap();
        assert!((d.value(0, 0) - 0.25f64.powf(0.5) / gamma(0.5)).abs() < 1e-12);
        assert!((d.value(1, 0) - 1.0 / gamma(0.5)).abs() < 1e-12);

        let sq = coefficient_library::<f64>("square", &[]).unwrap();
        let d = compensated_frac_derivative(&x, &sq, 0.5, 0, None).unwrap();
        let end = d.value(d.len() - 1, 0);
        let exact = 2.0 / (1.5 * std::f64::consts::PI.sqrt());
        assert!((end - exact).abs() < 1e-9, "{end} vs {exact}");
        for k in 1..d.len() {
            let r = d.time(k);
            let e = 2.0 * r.powf(1.5) / (1.5 * gamma(0.5));
            assert!((d.value(k, 0) - e).abs() < 1e-9);
        }
    }

    #[test]
    fn compensated_numerator_obeys_holder_bound() {
        // |N(θ,r)| ≤ |X_{θ,r}|^{1+λ} [[φ']]_λ / (1+λ) with φ = sin, λ = 1
        let sinc = coefficient_library::<f64>("sin", &[1.0]).unwrap();
        let xs: Vec<f64> = (0..50).map(|k| (k as f64 * 0.37).sin() * 2.0).collect();
        let seminorm = sinc.partial_holder_seminorm(1.0, &[(-2.0, 2.0)], 0, 0);
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = sinc.value(&[b], 0) - sinc.value(&[a], 0) - sinc.partial(&[a], 0, 0) * (b - a);
            assert!(n.abs() <= (b - a).abs().powi(2) * seminorm / 2.0 * (1.0 + 1e-9));
        }
    }

    proptest! {
        #[test]
        fn derivative_is_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, alpha in 0.1f64..0.9) {
            let times = uniform_grid(0.0, 1.0, 24);
            let f = SampledPath::from_fn(times.clone(), |t: f64| (3.0 * t).cos()).unwrap();
            let g = SampledPath::from_fn(times.clone(), |t: f64| t.powi(3) - t).unwrap();
            let comb = f.scaled(c1).add(&g.scaled(c2)).unwrap();
            let spec = FracDerivSpec::left(alpha).unwrap();
            let df = frac_derivative(&f, &spec, None).unwrap();
            let dg = frac_derivative(&g, &spec, None).unwrap();
            let dc = frac_derivative(&comb, &spec, None).unwrap();
            for k in 0..times.len() {
                let lin = c1 * df.value(k, 0) + c2 * dg.value(k, 0);
                prop_assert!((dc.value(k, 0) - lin).abs() < 1e-9 * (1.0 + lin.abs()));
            }
        }
    }
}
