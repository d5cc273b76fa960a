//! Multiplicative functionals `(X, Y, X⊗Y)` over a common grid.
//!
//! Every construction here is determined by the two paths and one
//! `m × d` matrix per grid cell: the iterated integral `A_k` over that cell.
//! Values at arbitrary `s ≤ t` follow from Chen's relation, with the
//! in-cell part `((t - s)/h_k)^2 A_k` exact for linear interpolants.
//! Externally supplied node tables are kept verbatim for validation and
//! export; derivatives use their cell matrices.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frac_calc::{uniform_step, Sites, NO_SLOT};
use crate::path::{check_open_unit, SampledPath};
use crate::quadrature;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Construction {
    SmoothIterated,
    Geometric1d,
    Dyadic { level: u32 },
    External,
}

impl std::fmt::Display for Construction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Construction::SmoothIterated => write!(f, "smooth"),
            Construction::Geometric1d => write!(f, "geometric1d"),
            Construction::Dyadic { level } => write!(f, "dyadic({level})"),
            Construction::External => write!(f, "external"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiplicativeFunctional<T> {
    x: SampledPath<T>,
    y: SampledPath<T>,
    beta: T,
    construction: Construction,
    /// `A_k^{ij}` at `(k * m + i) * d + j`.
    areas: Vec<T>,
    /// `(X⊗Y)_{t_0, t_k}` in the same layout.
    prefix: Vec<T>,
    /// External node table `(X⊗Y)_{t_s, t_t}` at `((s * N + t) * m + i) * d + j`.
    dense: Option<Vec<T>>,
}

impl<T: Real> MultiplicativeFunctional<T> {
    fn from_areas(
        x: SampledPath<T>,
        y: SampledPath<T>,
        areas: Vec<T>,
        construction: Construction,
        dense: Option<Vec<T>>,
    ) -> Self {
        let (m, d) = (x.dim(), y.dim());
        let n = x.len();
        let mut prefix = vec![T::zero(); n * m * d];
        for k in 0..n - 1 {
            for i in 0..m {
                let x0k = x.value(k, i) - x.value(0, i);
                for j in 0..d {
                    let dy = y.value(k + 1, j) - y.value(k, j);
                    let idx = (k * m + i) * d + j;
                    prefix[idx + m * d] = prefix[idx] + x0k * dy + areas[idx];
                }
            }
        }
        let beta = T::lit((x.roughness_exponent().min(y.roughness_exponent()) - 0.02).clamp(0.01, 0.99));
        MultiplicativeFunctional {
            x,
            y,
            beta,
            construction,
            areas,
            prefix,
            dense,
        }
    }

    pub fn x(&self) -> &SampledPath<T> {
        &self.x
    }

    pub fn y(&self) -> &SampledPath<T> {
        &self.y
    }

    /// Declared Hölder exponent; defaults to a slightly shrunk estimate
    /// from the sampled paths.
    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn with_beta(mut self, beta: T) -> Result<Self> {
        check_open_unit("beta", beta)?;
        self.beta = beta;
        Ok(self)
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn m(&self) -> usize {
        self.x.dim()
    }

    pub fn d(&self) -> usize {
        self.y.dim()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> &[T] {
        self.x.times()
    }

    #[inline]
    pub(crate) fn area(&self, k: usize, i: usize, j: usize) -> T {
        self.areas[(k * self.m() + i) * self.d() + j]
    }

    /// `(X⊗Y)^{ij}_{t_s, t_t}` for node indices `s ≤ t`.
    pub fn node(&self, s: usize, t: usize, i: usize, j: usize) -> T {
        let (m, d, n) = (self.m(), self.d(), self.len());
        if let Some(dense) = &self.dense {
            return dense[((s * n + t) * m + i) * d + j];
        }
        let idx = |k: usize| (k * m + i) * d + j;
        self.prefix[idx(t)]
            - self.prefix[idx(s)]
            - (self.x.value(s, i) - self.x.value(0, i)) * (self.y.value(t, j) - self.y.value(s, j))
    }

    /// `(X⊗Y)^{ij}_{s,t}` at arbitrary times `s ≤ t`.
    pub fn at(&self, s: T, t: T, i: usize, j: usize) -> Result<T> {
        let ks = self.x.locate(s)?;
        let kt = self.x.locate(t)?;
        if s > t {
            return Err(Error::Parse(format!("tensor evaluated below the diagonal at ({s}, {t})")));
        }
        let times = self.times();
        let cell_part = |k: usize, lo: T, hi: T| {
            let h = times[k + 1] - times[k];
            let r = (hi - lo) / h;
            r * r * self.area(k, i, j)
        };
        if ks == kt {
            return Ok(cell_part(ks, s, t));
        }
        let (n1, nl) = (ks + 1, kt);
        let xs = self.x.eval_component(s, i);
        let yt = self.y.eval_component(t, j);
        let mut v = cell_part(ks, s, times[n1]);
        v = v + (self.x.value(n1, i) - xs) * (self.y.value(nl, j) - self.y.value(n1, j));
        v = v + self.node(n1, nl, i, j);
        v = v + (self.x.value(nl, i) - xs) * (yt - self.y.value(nl, j));
        v = v + cell_part(kt, times[nl], t);
        Ok(v)
    }

    /// Largest Chen defect over the components at node triples `s ≤ u ≤ t`.
    pub fn chen_defect(&self, s: usize, u: usize, t: usize) -> T {
        let mut worst = T::zero();
        for i in 0..self.m() {
            for j in 0..self.d() {
                let lhs = self.node(s, u, i, j)
                    + self.node(u, t, i, j)
                    + (self.x.value(u, i) - self.x.value(s, i)) * (self.y.value(t, j) - self.y.value(u, j));
                worst = worst.max((lhs - self.node(s, t, i, j)).abs());
            }
        }
        worst
    }

    /// A copy whose node table is shifted by the increments `g(t) - g(s)`
    /// in every component; Chen's relation is unaffected.
    pub fn perturbed_by_increments(&self, g: &[T]) -> Result<Self> {
        let n = self.len();
        if g.len() != n {
            return Err(Error::Dimension(format!("{} perturbation values for {n} nodes", g.len())));
        }
        let (m, d) = (self.m(), self.d());
        let mut dense = vec![T::zero(); n * n * m * d];
        for s in 0..n {
            for t in s..n {
                for i in 0..m {
                    for j in 0..d {
                        dense[((s * n + t) * m + i) * d + j] = self.node(s, t, i, j) + g[t] - g[s];
                    }
                }
            }
        }
        lift_external(self.x.clone(), self.y.clone(), dense)
    }

    /// Writes rows `i,j,s_index,t_index,value` for all node pairs `s < t`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "s_index", "t_index", "value"])?;
        let n = self.len();
        for i in 0..self.m() {
            for j in 0..self.d() {
                for s in 0..n {
                    for t in s + 1..n {
                        w.write_record(&[
                            i.to_string(),
                            j.to_string(),
                            s.to_string(),
                            t.to_string(),
                            crate::path::format_num(self.node(s, t, i, j)),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a node table written by [`Self::write_csv`] for the given paths.
    pub fn read_csv<R: Read>(x: SampledPath<T>, y: SampledPath<T>, reader: R) -> Result<Self> {
        check_common_grid(&x, &y)?;
        let (n, m, d) = (x.len(), x.dim(), y.dim());
        let mut dense = vec![T::zero(); n * n * m * d];
        let mut seen = vec![false; n * n * m * d];
        let mut r = csv::Reader::from_reader(reader);
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::Parse(format!("tensor row has {} fields, expected 5", rec.len())));
            }
            let idx = |f: usize, bound: usize| -> Result<usize> {
                let v: usize = rec[f]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad index `{}`", &rec[f])))?;
                if v >= bound {
                    return Err(Error::Parse(format!("index {v} out of range {bound}")));
                }
                Ok(v)
            };
            let (i, j, s, t) = (idx(0, m)?, idx(1, d)?, idx(2, n)?, idx(3, n)?);
            if s > t {
                return Err(Error::Parse(format!("row below the diagonal: s_index {s} > t_index {t}")));
            }
            let v: f64 = rec[4]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{}`", &rec[4])))?;
            let at = ((s * n + t) * m + i) * d + j;
            dense[at] = T::lit(v);
            seen[at] = true;
        }
        for k in 0..n - 1 {
            for i in 0..m {
                for j in 0..d {
                    if !seen[((k * n + k + 1) * m + i) * d + j] {
                        return Err(Error::Parse(format!("missing tensor entry ({i},{j}) for cell {k}")));
                    }
                }
            }
        }
        lift_external(x, y, dense)
    }
}

fn check_common_grid<T: Real>(x: &SampledPath<T>, y: &SampledPath<T>) -> Result<()> {
    if x.times() != y.times() {
        return Err(Error::GridMismatch("X and Y must be sampled on the same grid".into()));
    }
    Ok(())
}

/// Iterated integrals of the piecewise-linear interpolants.
pub fn lift_smooth<T: Real>(x: &SampledPath<T>, y: &SampledPath<T>) -> Result<MultiplicativeFunctional<T>> {
    check_common_grid(x, y)?;
    let (m, d) = (x.dim(), y.dim());
    let mut areas = vec![T::zero(); x.cells() * m * d];
    for k in 0..x.cells() {
        for i in 0..m {
            let dx = x.value(k + 1, i) - x.value(k, i);
            for j in 0..d {
                let dy = y.value(k + 1, j) - y.value(k, j);
                areas[(k * m + i) * d + j] = dx * dy * T::lit(0.5);
            }
        }
    }
    Ok(MultiplicativeFunctional::from_areas(
        x.clone(),
        y.clone(),
        areas,
        Construction::SmoothIterated,
        None,
    ))
}

/// `(X⊗X)_{s,t} = X_{s,t}^2 / 2` for a scalar path.
pub fn lift_geometric_1d<T: Real>(x: &SampledPath<T>) -> Result<MultiplicativeFunctional<T>> {
    if x.dim() != 1 {
        return Err(Error::Dimension(format!("geometric lift needs a scalar path, got dimension {}", x.dim())));
    }
    let areas = (0..x.cells())
        .map(|k| {
            let dx = x.value(k + 1, 0) - x.value(k, 0);
            dx * dx * T::lit(0.5)
        })
        .collect();
    Ok(MultiplicativeFunctional::from_areas(
        x.clone(),
        x.clone(),
        areas,
        Construction::Geometric1d,
        None,
    ))
}

/// Interpolant of `p` through the `2^level + 1` dyadic points of its
/// interval, resampled on the original grid.
pub fn dyadic_interpolant<T: Real>(p: &SampledPath<T>, level: u32) -> Result<SampledPath<T>> {
    let cells = 1usize
        .checked_shl(level)
        .filter(|&c| c <= p.cells())
        .ok_or_else(|| Error::param("level", level as f64, format!("[0, log2({})]", p.cells())))?;
    let coarse_t = crate::path::uniform_grid(p.start(), p.end(), cells);
    let coarse: Vec<Vec<T>> = coarse_t.iter().map(|&t| p.eval(t)).collect::<Result<_>>()?;
    let coarse = SampledPath::new(coarse_t, coarse)?;
    let mut vals = Vec::with_capacity(p.len() * p.dim());
    let mut buf = vec![T::zero(); p.dim()];
    for &t in p.times() {
        coarse.eval_into(t, &mut buf);
        vals.extend_from_slice(&buf);
    }
    SampledPath::from_flat(p.times().to_vec(), vals, p.dim())
}

/// Smooth lift of the level-`k` dyadic interpolants of `X` and `Y`.
pub fn lift_dyadic<T: Real>(
    x: &SampledPath<T>,
    y: &SampledPath<T>,
    level: u32,
) -> Result<MultiplicativeFunctional<T>> {
    check_common_grid(x, y)?;
    let xk = dyadic_interpolant(x, level)?;
    let yk = dyadic_interpolant(y, level)?;
    let mut mf = lift_smooth(&xk, &yk)?;
    mf.construction = Construction::Dyadic { level };
    Ok(mf)
}

/// Wraps a user-supplied node table (layout as in
/// [`MultiplicativeFunctional::node`]); run [`validate_mf`] before use.
pub fn lift_external<T: Real>(
    x: SampledPath<T>,
    y: SampledPath<T>,
    dense: Vec<T>,
) -> Result<MultiplicativeFunctional<T>> {
    check_common_grid(&x, &y)?;
    let (n, m, d) = (x.len(), x.dim(), y.dim());
    if dense.len() != n * n * m * d {
        return Err(Error::Dimension(format!("node table has {} entries, expected {}", dense.len(), n * n * m * d)));
    }
    let mut areas = vec![T::zero(); (n - 1) * m * d];
    for k in 0..n - 1 {
        for i in 0..m {
            for j in 0..d {
                areas[(k * m + i) * d + j] = dense[((k * n + k + 1) * m + i) * d + j];
            }
        }
    }
    Ok(MultiplicativeFunctional::from_areas(x, y, areas, Construction::External, Some(dense)))
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelDifference {
    pub level: u32,
    /// Sup-norm distance to the previous level over node pairs.
    pub cauchy_difference: Option<f64>,
    pub c_beta: f64,
}

/// Cauchy differences and `2β`-constants of consecutive dyadic lifts.
pub fn dyadic_convergence<T: Real>(
    x: &SampledPath<T>,
    y: &SampledPath<T>,
    levels: std::ops::RangeInclusive<u32>,
    beta: T,
) -> Result<Vec<LevelDifference>> {
    let mut out = Vec::new();
    let mut prev: Option<MultiplicativeFunctional<T>> = None;
    for level in levels {
        let mf = lift_dyadic(x, y, level)?;
        let c_beta = two_beta_constant(&mf, beta).as_f64();
        let cauchy_difference = prev.as_ref().map(|p| sup_distance(p, &mf).as_f64());
        out.push(LevelDifference {
            level,
            cauchy_difference,
            c_beta,
        });
        prev = Some(mf);
    }
    Ok(out)
}

/// Node subset used for sup-type statistics over pairs.
fn pair_nodes(n: usize) -> Vec<usize> {
    const MAX: usize = 4097;
    if n <= MAX {
        return (0..n).collect();
    }
    let step = (n - 1).div_ceil(MAX - 1);
    let mut v: Vec<usize> = (0..n).step_by(step).collect();
    if *v.last().unwrap() != n - 1 {
        v.push(n - 1);
    }
    v
}

fn sup_distance<T: Real>(a: &MultiplicativeFunctional<T>, b: &MultiplicativeFunctional<T>) -> T {
    let nodes = pair_nodes(a.len());
    nodes
        .par_iter()
        .enumerate()
        .map(|(si, &s)| {
            let mut worst = T::zero();
            for &t in &nodes[si + 1..] {
                for i in 0..a.m() {
                    for j in 0..a.d() {
                        worst = worst.max((a.node(s, t, i, j) - b.node(s, t, i, j)).abs());
                    }
                }
            }
            worst
        })
        .reduce(T::zero, |p, q| p.max(q))
}

/// `sup |(X⊗Y)_{s,t}| / |t - s|^{2β}` over node pairs (all pairs up to
/// 4097 nodes, an even subset beyond).
pub fn two_beta_constant<T: Real>(mf: &MultiplicativeFunctional<T>, beta: T) -> T {
    let nodes = pair_nodes(mf.len());
    let times = mf.times();
    let e = -(beta + beta);
    nodes
        .par_iter()
        .enumerate()
        .map(|(si, &s)| {
            let mut worst = T::zero();
            for &t in &nodes[si + 1..] {
                let w = (times[t] - times[s]).powf(e);
                for i in 0..mf.m() {
                    for j in 0..mf.d() {
                        worst = worst.max(mf.node(s, t, i, j).abs() * w);
                    }
                }
            }
            worst
        })
        .reduce(T::zero, |p, q| p.max(q))
}

#[derive(Debug, Clone, Serialize)]
pub struct MfValidation {
    pub construction: Construction,
    pub triples: usize,
    pub max_chen_defect: f64,
    pub c_beta: f64,
    pub max_diagonal: f64,
    pub holder_x: f64,
    pub holder_y: f64,
}

/// Chen defect over `triples` random node triples (seeded), the empirical
/// `2β`-constant, diagonal values and Hölder seminorms of both paths.
pub fn validate_mf<T: Real>(mf: &MultiplicativeFunctional<T>, beta: T, triples: usize, seed: u64) -> Result<MfValidation> {
    check_open_unit("beta", beta)?;
    let n = mf.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for _ in 0..triples {
        let mut v = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
        v.sort_unstable();
        worst = worst.max(mf.chen_defect(v[0], v[1], v[2]));
    }
    let mut diag = T::zero();
    for k in 0..n {
        for i in 0..mf.m() {
            for j in 0..mf.d() {
                diag = diag.max(mf.node(k, k, i, j).abs());
            }
        }
    }
    Ok(MfValidation {
        construction: mf.construction,
        triples,
        max_chen_defect: worst.as_f64(),
        c_beta: two_beta_constant(mf, beta).as_f64(),
        max_diagonal: diag.as_f64(),
        holder_x: mf.x.holder_seminorm(beta)?.value.as_f64(),
        holder_y: mf.y.holder_seminorm(beta)?.value.as_f64(),
    })
}

/// Cells within this distance use the exact in-cell integral of the
/// quadratic-in-time tensor; farther cells use 2-point Gauss–Legendre.
const TENSOR_NEAR_CELLS: usize = 16;

/// `(1/Γ(1-γ)) [T_{r,b}/(b-r)^γ + γ ∫_r^b T_{r,s}/(s-r)^{γ+1} ds]` for every
/// component `i * d + j` at every site.
pub(crate) fn tensor_derivative_at_sites<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    gamma: T,
    sites: &Sites<T>,
) -> Vec<Vec<T>> {
    let (m, d) = (mf.m(), mf.d());
    let md = m * d;
    let times = mf.times();
    let n = times.len() - 1;
    let b = times[n];
    let g2 = quadrature::legendre(2);
    let gl_y: Vec<T> = g2.nodes.iter().map(|&v| T::lit(v)).collect();
    let gl_w: Vec<T> = g2.weights.iter().map(|&v| T::lit(v)).collect();
    let e = -gamma - T::one();
    // kernel tables ((p - k - x + y) h)^e indexed by site slot and GL node
    let tables: Option<Vec<[Vec<T>; 2]>> = sites.h.map(|h| {
        sites
            .offsets
            .iter()
            .map(|&x| {
                let mk = |y: T| {
                    (0..=n)
                        .map(|mm| {
                            let dist = T::from_usize_lossy(mm) - x + y;
                            if dist > T::zero() {
                                (dist * h).powf(e)
                            } else {
                                T::zero()
                            }
                        })
                        .collect::<Vec<T>>()
                };
                [mk(gl_y[0]), mk(gl_y[1])]
            })
            .collect()
    });
    let norm = T::one() / (T::one() - gamma).gamma();
    let two = T::lit(2.0);
    let c1 = gamma / (T::one() - gamma);
    let c2 = gamma / (two - gamma);
    let per_site: Vec<Vec<T>> = (0..sites.len())
        .into_par_iter()
        .map(|si| {
            let r = sites.t[si];
            let k = sites.cell[si];
            let mut out = vec![T::zero(); md];
            if r >= b {
                return out;
            }
            let hk = times[k + 1] - times[k];
            let u0 = times[k + 1] - r;
            let own = u0 * u0 * u0.powf(-gamma) / (hk * hk);
            let mut c = vec![T::zero(); md];
            let mut xd = vec![T::zero(); m];
            for i in 0..m {
                xd[i] = mf.x.value(k + 1, i) - mf.x.eval_component(r, i);
            }
            for i in 0..m {
                for j in 0..d {
                    let a = mf.area(k, i, j);
                    out[i * d + j] = c2 * a * own;
                    c[i * d + j] = (u0 / hk) * (u0 / hk) * a;
                }
            }
            let slot = sites.slot[si];
            for p in k + 1..n {
                let hp = times[p + 1] - times[p];
                let dist = times[p] - r;
                let near = p - k <= TENSOR_NEAR_CELLS;
                let (p1, p0) = if near {
                    (dist.powf(-gamma), (dist + hp).powf(-gamma))
                } else {
                    (T::zero(), T::zero())
                };
                let kern: [T; 2] = if near {
                    [T::zero(); 2]
                } else {
                    match (&tables, slot) {
                        (Some(tb), s) if s != NO_SLOT => [tb[s][0][p - k], tb[s][1][p - k]],
                        _ => [
                            (dist + gl_y[0] * hp).powf(e),
                            (dist + gl_y[1] * hp).powf(e),
                        ],
                    }
                };
                for i in 0..m {
                    for j in 0..d {
                        let ij = i * d + j;
                        let dy = mf.y.value(p + 1, j) - mf.y.value(p, j);
                        let a = mf.area(p, i, j);
                        let dd = xd[i] * dy / hp;
                        let ee = a / (hp * hp);
                        let cc = c[ij];
                        let v = if near {
                            let u1 = dist;
                            let u0 = dist + hp;
                            let q0 = cc - dd * u1 + ee * u1 * u1;
                            let q1 = dd - two * ee * u1;
                            q0 * (p1 - p0) + c1 * q1 * (u0 * p0 - u1 * p1) + c2 * ee * (u0 * u0 * p0 - u1 * u1 * p1)
                        } else {
                            let mut acc = T::zero();
                            for g in 0..2 {
                                let w = gl_y[g] * hp;
                                acc = acc + gl_w[g] * kern[g] * (cc + dd * w + ee * w * w);
                            }
                            gamma * hp * acc
                        };
                        out[ij] = out[ij] + v;
                        c[ij] = cc + xd[i] * dy + a;
                    }
                }
                for i in 0..m {
                    xd[i] = xd[i] + mf.x.value(p + 1, i) - mf.x.value(p, i);
                }
            }
            let bt = (b - r).powf(-gamma);
            for ij in 0..md {
                out[ij] = (out[ij] + c[ij] * bt) * norm;
            }
            out
        })
        .collect();
    (0..md).map(|ij| per_site.iter().map(|v| v[ij]).collect()).collect()
}

/// Right-sided derivative of order `γ` of the tensor's first argument on
/// `r_grid` (default: the grid of the functional). Component `i * d + j`
/// of the returned path holds the `(i, j)` entry.
pub fn frac_derivative_tensor<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    gamma: T,
    r_grid: Option<&[T]>,
) -> Result<SampledPath<T>> {
    let two_beta = mf.beta() + mf.beta();
    let cap = if two_beta < T::one() { two_beta } else { T::one() };
    if !(gamma > T::zero() && gamma < cap) {
        return Err(Error::param("gamma", gamma.as_f64(), format!("(0, {})", cap.as_f64())));
    }
    let ts = r_grid.unwrap_or(mf.times()).to_vec();
    let sites = Sites::at(mf.times(), &ts)?;
    let comps = tensor_derivative_at_sites(mf, gamma, &sites);
    let md = comps.len();
    let mut vals = vec![T::zero(); ts.len() * md];
    for (c, col) in comps.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            vals[i * md + c] = v;
        }
    }
    SampledPath::from_flat(ts, vals, md)
}

/// Inverse of the Vandermonde matrix in `2x - 1` at the given offsets, so
/// that `a = V^{-1} g` are monomial coefficients in the cell variable.
fn vandermonde_inverse(offsets: &[f64]) -> Vec<Vec<f64>> {
    let q = offsets.len();
    let mut a: Vec<Vec<f64>> = offsets
        .iter()
        .map(|&x| {
            let z = 2.0 * x - 1.0;
            let mut row: Vec<f64> = (0..q).map(|i| z.powi(i as i32)).collect();
            row.extend(std::iter::repeat_n(0.0, q));
            row
        })
        .collect();
    for (r, row) in a.iter_mut().enumerate() {
        row[q + r] = 1.0;
    }
    for col in 0..q {
        let piv = (col..q)
            .max_by(|&u, &v| a[u][col].abs().partial_cmp(&a[v][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..q {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * q {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    // rows of [I | V^{-1}]: V^{-1}[i][s] maps samples to coefficient i
    a.into_iter().map(|row| row[q..].to_vec()).collect()
}

/// Coefficients of `P(r + v) = Σ_j c_j v^j` given monomial coefficients
/// `a` in `z = 2(s - t_p)/h - 1` and `z_r` at `s = r`.
fn taylor_shift<T: Real>(a: &[T], z_r: T, h: T, out: &mut [T]) {
    let q = a.len();
    let scale = T::lit(2.0) / h;
    let mut sp = T::one();
    for j in 0..q {
        let mut acc = T::zero();
        let mut binom = T::one();
        let mut zp = T::one();
        for i in j..q {
            acc = acc + a[i] * binom * zp;
            binom = binom * T::from_usize_lossy(i + 1) / T::from_usize_lossy(i + 1 - j);
            zp = zp * z_r;
        }
        out[j] = acc * sp;
        sp = sp * scale;
    }
}

/// `D^γ_{b-} r ↦ g_{ij}(r)` at graded sites, where `g_{ij}` is the tensor
/// derivative of order `γ` at the same sites; the outer derivative has
/// `g(b) = 0` and uses a per-cell polynomial fit of `g`.
pub(crate) fn nested_tensor_derivative<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    gamma: T,
    sites: &Sites<T>,
) -> Vec<Vec<T>> {
    nested_tensor_derivative_at(mf, gamma, sites, None)
}

/// [`nested_tensor_derivative`] evaluated at `extra` sites (any times
/// inside the grid) instead of the graded sites themselves; the graded
/// sites still carry the quadrature of the outer derivative.
pub(crate) fn nested_tensor_derivative_at<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    gamma: T,
    sites: &Sites<T>,
    extra: Option<&Sites<T>>,
) -> Vec<Vec<T>> {
    let q = sites.q;
    assert!(q >= 2 && sites.len() == q * (mf.len() - 1), "nested derivative needs graded sites");
    let inner = tensor_derivative_at_sites(mf, gamma, sites);
    let inner_extra = extra.map(|ex| tensor_derivative_at_sites(mf, gamma, ex));
    let eval = extra.unwrap_or(sites);
    let times = mf.times();
    let n = times.len() - 1;
    let b = times[n];
    let offs: Vec<f64> = sites.offsets.iter().map(|v| v.as_f64()).collect();
    let vinv: Vec<Vec<T>> = vandermonde_inverse(&offs)
        .into_iter()
        .map(|r| r.into_iter().map(T::lit).collect())
        .collect();
    let e = -gamma - T::one();
    let h_uni = uniform_step(times);
    // ((p - k + y - x) h)^e for p - k ≥ 2, by site slot and node slot
    let tables: Option<Vec<Vec<Vec<T>>>> = h_uni.map(|h| {
        sites
            .offsets
            .iter()
            .map(|&x| {
                sites
                    .offsets
                    .iter()
                    .map(|&y| {
                        (0..=n)
                            .map(|mm| {
                                let dist = T::from_usize_lossy(mm) + y - x;
                                if mm >= 2 {
                                    (dist * h).powf(e)
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
    inner
        .iter()
        .enumerate()
        .map(|(comp, g)| {
            let g_eval = inner_extra.as_ref().map_or(g, |ie| &ie[comp]);
            let coeffs: Vec<Vec<T>> = (0..n)
                .map(|k| {
                    (0..q)
                        .map(|i| {
                            let mut acc = T::zero();
                            for s in 0..q {
                                acc = acc + vinv[i][s] * g[k * q + s];
                            }
                            acc
                        })
                        .collect()
                })
                .collect();
            (0..eval.len())
                .into_par_iter()
                .map(|si| {
                    let r = eval.t[si];
                    let k = eval.cell[si].min(n - 1);
                    let gr = g_eval[si];
                    let mut c = vec![T::zero(); q];
                    let hk = times[k + 1] - times[k];
                    let zr = T::lit(2.0) * (r - times[k]) / hk - T::one();
                    taylor_shift(&coeffs[k], zr, hk, &mut c);
                    let u0 = times[k + 1] - r;
                    let mut integral = T::zero();
                    for (j, &cj) in c.iter().enumerate().skip(1) {
                        let ej = T::from_usize_lossy(j) - gamma;
                        integral = integral - gamma * cj * u0.powf(ej) / ej;
                    }
                    if k + 1 < n {
                        let h1 = times[k + 2] - times[k + 1];
                        let u1 = u0;
                        let u2 = u0 + h1;
                        let z1 = -T::one() - T::lit(2.0) * u1 / h1;
                        taylor_shift(&coeffs[k + 1], z1, h1, &mut c);
                        integral = integral + (gr - c[0]) * (u1.powf(-gamma) - u2.powf(-gamma));
                        for (j, &cj) in c.iter().enumerate().skip(1) {
                            let ej = T::from_usize_lossy(j) - gamma;
                            integral = integral - gamma * cj * (u2.powf(ej) - u1.powf(ej)) / ej;
                        }
                    }
                    let slot = if extra.is_some() { NO_SLOT } else { sites.slot[si] };
                    let mut far = T::zero();
                    for p in k + 2..n {
                        for s in 0..q {
                            let ii = p * q + s;
                            let kern = match (&tables, slot) {
                                (Some(tb), sl) if sl != NO_SLOT => tb[sl][s][p - k],
                                _ => (sites.t[ii] - r).powf(e),
                            };
                            far = far + sites.w[ii] * (gr - g[ii]) * kern;
                        }
                    }
                    (gr * (b - r).powf(-gamma) + integral + gamma * far) * norm
                })
                .collect()
        })
        .collect()
}
