//! Centered Gaussian paths with independent components sharing one
//! covariance `R(r, θ)`, exact sampling on a grid, and Monte Carlo checks
//! of the moment and integrability conditions that make the potential
//! functionals finite almost surely.
//!
//! Sampling is exact. Fractional Brownian motion (and Brownian motion) on a
//! uniform grid starting at 0 uses the Durbin–Levinson recursion on the
//! stationary increments, which is the Cholesky factorization of their
//! Toeplitz covariance computed in `O(n²)` without storing the factor.
//! Every other configuration uses a dense Cholesky factor of the Gram
//! matrix, cached in the sampler.
//!
//! Replica `k` draws its normals from ChaCha8 stream `k` under the model
//! seed, so results do not depend on how replicas are scheduled.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bv::RadonMeasure;
use crate::error::{Error, Result};
use crate::path::{uniform_grid, SampledPath};
use crate::potentials::{kernel_constant, segment_functional, variability_norm, SegmentOptions};
use crate::quadrature::legendre;
use crate::scalar::Real;

/// Stationary kernel `k(|r - θ|)`.
pub type Kernel = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Named covariance families.
#[derive(Clone)]
pub enum Family {
    /// `½(r^{2H} + θ^{2H} - |r - θ|^{2H})`.
    Fbm { hurst: f64 },
    /// `min(r, θ)`.
    Bm,
    /// `k(|r - θ|)`.
    Stationary { name: String, kernel: Kernel },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Fbm { hurst } => write!(f, "fbm:{hurst}"),
            Family::Bm => write!(f, "bm"),
            Family::Stationary { name, .. } => write!(f, "{name}"),
        }
    }
}

impl Family {
    pub fn fbm(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::param("H", hurst, "(0, 1)"));
        }
        Ok(Family::Fbm { hurst })
    }

    /// `fbm:H`, `bm`, `ou:λ` (kernel `e^{-λτ}`) or `const:c` (kernel `c`).
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Parse(format!("family `{name}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("family `{s}`: {e}")))
        };
        match name {
            "fbm" => Family::fbm(num(arg)?),
            "bm" => Ok(Family::Bm),
            "ou" => {
                let lam = num(arg)?;
                if !(lam > 0.0) {
                    return Err(Error::param("lambda", lam, "(0, ∞)"));
                }
                Ok(Family::Stationary {
                    name: format!("ou:{lam}"),
                    kernel: Arc::new(move |tau: f64| (-lam * tau).exp()),
                })
            }
            "const" => {
                let c = num(arg)?;
                if !(c >= 0.0) {
                    return Err(Error::param("c", c, "[0, ∞)"));
                }
                Ok(Family::Stationary {
                    name: format!("const:{c}"),
                    kernel: Arc::new(move |_| c),
                })
            }
            other => Err(Error::Parse(format!("unknown covariance family `{other}`"))),
        }
    }

    pub fn covariance(&self, r: f64, t: f64) -> f64 {
        match self {
            Family::Fbm { hurst } => {
                let e = 2.0 * hurst;
                0.5 * (r.abs().powf(e) + t.abs().powf(e) - (r - t).abs().powf(e))
            }
            Family::Bm => r.min(t),
            Family::Stationary { kernel, .. } => kernel((r - t).abs()),
        }
    }

    pub fn variance(&self, t: f64) -> f64 {
        self.covariance(t, t)
    }

    /// Hurst index for the self-similar families.
    pub fn hurst(&self) -> Option<f64> {
        match self {
            Family::Fbm { hurst } => Some(*hurst),
            Family::Bm => Some(0.5),
            Family::Stationary { .. } => None,
        }
    }
}

/// Covariance family, number of independent components, grid and seed.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    pub family: Family,
    pub m: usize,
    pub times: Vec<f64>,
    pub seed: u64,
    /// Constant mean added to every component (length `m`, zero by default).
    pub offset: Vec<f64>,
}

impl GaussianModel {
    pub fn new(family: Family, m: usize, times: Vec<f64>, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Dimension("a Gaussian model needs at least one component".into()));
        }
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPath("grid times must be finite and strictly increasing".into()));
        }
        Ok(GaussianModel {
            family,
            m,
            times,
            seed,
            offset: vec![0.0; m],
        })
    }

    /// Uniform grid with `cells` cells on `[a, b]`.
    pub fn uniform(family: Family, m: usize, a: f64, b: f64, cells: usize, seed: u64) -> Result<Self> {
        GaussianModel::new(family, m, uniform_grid(a, b, cells), seed)
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != self.m {
            return Err(Error::Dimension(format!("offset has {} entries, model has {} components", offset.len(), self.m)));
        }
        self.offset = offset;
        Ok(self)
    }

    fn durbin_applies(&self) -> bool {
        self.family.hurst().is_some() && self.times[0] == 0.0 && self.times.len() > 1 && is_uniform(&self.times)
    }
}

fn is_uniform(t: &[f64]) -> bool {
    let h = t[1] - t[0];
    t.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
}

#[derive(Debug, Clone)]
enum Factor {
    /// Autocovariance of the unit-step increments and the grid step.
    Durbin { acov: Vec<f64>, scale: f64 },
    /// Row-major lower triangular factor.
    Dense { l: Vec<f64> },
}

/// Cached sampler for one model.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    model: GaussianModel,
    factor: Factor,
    jitter: f64,
}

/// Metadata attached to sampled output.
#[derive(Debug, Clone, Serialize)]
pub struct SamplerInfo {
    pub family: String,
    pub method: String,
    pub grid: usize,
    pub seed: u64,
    /// Diagonal jitter added to the Gram matrix (0 when none was needed).
    pub jitter: f64,
}

impl GaussianSampler {
    pub fn new(model: GaussianModel) -> Result<Self> {
        if model.durbin_applies() {
            let hurst = model.family.hurst().expect("self-similar family");
            let n = model.times.len() - 1;
            let e = 2.0 * hurst;
            let acov = (0..n)
                .map(|k| {
                    let k = k as f64;
                    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
                })
                .collect();
            let h = model.times[1] - model.times[0];
            return Ok(GaussianSampler {
                factor: Factor::Durbin {
                    acov,
                    scale: h.powf(hurst),
                },
                model,
                jitter: 0.0,
            });
        }
        let n = model.times.len();
        let gram: Vec<f64> = (0..n * n)
            .map(|idx| model.family.covariance(model.times[idx / n], model.times[idx % n]))
            .collect();
        let (l, jitter) = cholesky_with_jitter(&gram, n)?;
        Ok(GaussianSampler {
            model,
            factor: Factor::Dense { l },
            jitter,
        })
    }

    pub fn model(&self) -> &GaussianModel {
        &self.model
    }

    pub fn info(&self) -> SamplerInfo {
        SamplerInfo {
            family: self.model.family.to_string(),
            method: match self.factor {
                Factor::Durbin { .. } => "durbin-levinson".into(),
                Factor::Dense { .. } => "cholesky".into(),
            },
            grid: self.model.times.len(),
            seed: self.model.seed,
            jitter: self.jitter,
        }
    }

    fn component(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.model.times.len();
        match &self.factor {
            Factor::Durbin { acov, scale } => {
                let steps = n - 1;
                let mut inc = vec![0.0; steps];
                let mut phi = vec![0.0; steps];
                let mut prev = vec![0.0; steps];
                let mut v = acov[0];
                for k in 0..steps {
                    let z: f64 = StandardNormal.sample(rng);
                    if k > 0 {
                        // update the partial autocorrelation and the predictor
                        let mut num = acov[k];
                        for j in 0..k - 1 {
                            num -= prev[j] * acov[k - 1 - j];
                        }
                        let pk = num / v;
                        for j in 0..k - 1 {
                            phi[j] = prev[j] - pk * prev[k - 2 - j];
                        }
                        phi[k - 1] = pk;
                        v *= 1.0 - pk * pk;
                        prev[..k].copy_from_slice(&phi[..k]);
                    }
                    let mut mean = 0.0;
                    for j in 0..k {
                        mean += phi[j] * inc[k - 1 - j];
                    }
                    inc[k] = mean + v.max(0.0).sqrt() * z;
                }
                let mut out = Vec::with_capacity(n);
                let mut acc = 0.0;
                out.push(0.0);
                for d in inc {
                    acc += d * scale;
                    out.push(acc);
                }
                out
            }
            Factor::Dense { l } => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                (0..n)
                    .map(|i| {
                        let row = &l[i * n..i * n + i + 1];
                        row.iter().zip(&z).map(|(a, b)| a * b).sum()
                    })
                    .collect()
            }
        }
    }

    /// Replica `replica` as an `m`-dimensional path.
    pub fn sample<T: Real>(&self, replica: u64) -> Result<SampledPath<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.model.seed);
        rng.set_stream(replica);
        let m = self.model.m;
        let n = self.model.times.len();
        let comps: Vec<Vec<f64>> = (0..m).map(|_| self.component(&mut rng)).collect();
        let mut flat = Vec::with_capacity(n * m);
        for k in 0..n {
            for (i, c) in comps.iter().enumerate() {
                flat.push(T::lit(c[k] + self.model.offset[i]));
            }
        }
        SampledPath::from_flat(self.model.times.iter().map(|&t| T::lit(t)).collect(), flat, m)
    }
}

/// Lower Cholesky factor of a symmetric PSD matrix. Pivots within a
/// relative `1e-12` of zero are treated as exact zeros; a clearly negative
/// pivot triggers one retry with diagonal jitter `1e-12 · max diag`.
fn cholesky_with_jitter(a: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    match cholesky_semidefinite(a, n, 0.0, scale) {
        Ok(l) => Ok((l, 0.0)),
        Err(_) => {
            let jitter = 1e-12 * scale;
            let l = cholesky_semidefinite(a, n, jitter, scale)?;
            Ok((l, jitter))
        }
    }
}

fn cholesky_semidefinite(a: &[f64], n: usize, jitter: f64, scale: f64) -> Result<Vec<f64>> {
    let tol = 1e-12 * scale;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j] + jitter;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol {
            return Err(Error::NotPsd(format!("pivot {j} is {d:.3e}")));
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Replica 0 of the model.
pub fn sample_path<T: Real>(model: &GaussianModel) -> Result<SampledPath<T>> {
    GaussianSampler::new(model.clone())?.sample(0)
}

/// Integrability constant of the moment condition for a measure.
#[derive(Debug, Clone, Serialize)]
pub struct CmuReport {
    pub value: f64,
    pub finite: bool,
    /// `(m - 1 + s) H` for self-similar families.
    pub exponent: Option<f64>,
    /// Set when `a = 0` and the exponent is at least 1, so the branch
    /// `R(θ,θ)^{(1-s-m)/2}` is not integrable at 0.
    pub exponent_violated: bool,
}

/// `∫ ∫_a^b (R(θ,θ)^{(1-s-m)/2} ∧ |z|^{1-s-m}) dθ μ(dz)`.
pub fn cmu_constant<T: Real>(model: &GaussianModel, mu: &RadonMeasure<T>, s: f64, a: f64, b: f64) -> Result<CmuReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", s, "(0, 1)"));
    }
    if !(b > a) {
        return Err(Error::param("b - a", b - a, "(0, ∞)"));
    }
    if mu.dim() != model.m {
        return Err(Error::Dimension(format!("measure in R^{}, model has {} components", mu.dim(), model.m)));
    }
    let m = model.m as f64;
    let e = 1.0 - s - m;
    let fam = &model.family;
    // local power of the variance near a, for divergence detection
    let local_power = {
        let d = (b - a) * 1e-6;
        let (v1, v2) = (fam.variance(a + d), fam.variance(a + 2.0 * d));
        if fam.variance(a) == 0.0 && v1 > 0.0 {
            Some((v2 / v1).log2())
        } else {
            None
        }
    };
    // geometric partition towards a, Gauss–Legendre on each piece
    let mut breaks: Vec<f64> = (0..=60).map(|k| a + (b - a) * 0.5f64.powi(k)).collect();
    breaks.push(a);
    breaks.reverse();
    let rule = legendre(12);
    let per_level = |zn: f64| -> f64 {
        if zn == 0.0 {
            if let Some(p) = local_power {
                if p * e / 2.0 <= -1.0 + 1e-9 {
                    return f64::INFINITY;
                }
            }
        }
        let cap = if zn > 0.0 { zn.powf(e) } else { f64::INFINITY };
        breaks
            .windows(2)
            .map(|w| {
                rule.integrate(w[0], w[1], |t: f64| {
                    let v = fam.variance(t);
                    let branch = if v > 0.0 { v.powf(e / 2.0) } else { f64::INFINITY };
                    branch.min(cap)
                })
            })
            .sum::<f64>()
    };
    let mut total = 0.0;
    for (z, w) in mu.atoms() {
        let zn = z.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
        total += w.as_f64().abs() * per_level(zn);
    }
    for (bx, v) in mu.boxes() {
        // tensor Gauss rule over the box
        let g = legendre(8);
        let q = g.len();
        let dims = bx.len();
        let vol: f64 = bx.iter().map(|(l, h)| h.as_f64() - l.as_f64()).product();
        let mut acc = 0.0;
        for idx in 0..q.pow(dims as u32) {
            let mut rem = idx;
            let mut wt = 1.0;
            let mut r2 = 0.0;
            for (l, h) in bx {
                let k = rem % q;
                rem /= q;
                let x = l.as_f64() + (h.as_f64() - l.as_f64()) * g.nodes[k];
                r2 += x * x;
                wt *= g.weights[k];
            }
            acc += wt * per_level(r2.sqrt());
        }
        total += v.as_f64().abs() * vol * acc;
    }
    let exponent = fam.hurst().map(|h| (m - 1.0 + s) * h);
    Ok(CmuReport {
        value: total,
        finite: total.is_finite(),
        exponent,
        exponent_violated: a == 0.0 && fam.variance(0.0) == 0.0 && exponent.is_some_and(|x| x >= 1.0),
    })
}

/// Monte Carlo mean of a per-replica functional.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    /// Fraction of replicas whose functional was `+∞`.
    pub infinite_fraction: f64,
}

impl McEstimate {
    fn from_values(vals: &[f64]) -> Self {
        let n = vals.len();
        let inf = vals.iter().filter(|v| !v.is_finite()).count();
        if inf > 0 {
            return McEstimate {
                mean: f64::INFINITY,
                stderr: f64::NAN,
                replicas: n,
                infinite_fraction: inf as f64 / n as f64,
            };
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n.max(2) - 1) as f64;
        McEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            replicas: n,
            infinite_fraction: 0.0,
        }
    }
}

fn check_replicas(r: usize) -> Result<()> {
    if r < 2 {
        return Err(Error::param("replicas", r as f64, "[2, ∞)"));
    }
    Ok(())
}

fn per_replica(model: &GaussianModel, replicas: usize, f: impl Fn(&SampledPath<f64>) -> Result<f64> + Sync) -> Result<Vec<f64>> {
    check_replicas(replicas)?;
    let sampler = GaussianSampler::new(model.clone())?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|k| f(&sampler.sample::<f64>(k)?))
        .collect()
}

/// Mean of the segment functional over sampled paths.
pub fn mc_expected_segment(
    model: &GaussianModel,
    mu: &RadonMeasure<f64>,
    s: f64,
    eps: f64,
    replicas: usize,
    opts: &SegmentOptions,
) -> Result<McEstimate> {
    if mu.is_zero() {
        check_replicas(replicas)?;
        return Ok(McEstimate::from_values(&vec![0.0; replicas]));
    }
    let vals = per_replica(model, replicas, |x| Ok(segment_functional(x, mu, s, eps, opts)?.value))?;
    Ok(McEstimate::from_values(&vals))
}

/// Mean of the `L^p` variability norm over sampled paths.
pub fn mc_expected_variability(model: &GaussianModel, mu: &RadonMeasure<f64>, s: f64, p: f64, replicas: usize) -> Result<McEstimate> {
    if mu.is_zero() {
        check_replicas(replicas)?;
        return Ok(McEstimate::from_values(&vec![0.0; replicas]));
    }
    let vals = per_replica(model, replicas, |x| Ok(variability_norm(x, mu, s, p)?.norm))?;
    Ok(McEstimate::from_values(&vals))
}

/// `2 c_{a,b,ε} c 2^{m-1+s} C_μ`: the expected segment functional bound
/// with the moment constant `c` and the variance halving along chords made
/// explicit.
pub fn expected_segment_bound(cmu: f64, moment_constant: f64, a: f64, b: f64, eps: f64, m: usize, s: f64) -> f64 {
    2.0 * kernel_constant(a, b, eps) * moment_constant * 2f64.powf(m as f64 - 1.0 + s) * cmu
}

/// `E|Z|^q` for a standard normal `Z`, `q > -1`.
pub fn normal_abs_moment(q: f64) -> f64 {
    2f64.powf(q / 2.0) * statrs::function::gamma::gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentEntry {
    pub sigma: f64,
    pub z: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `σ^{1-s-m} ∧ |z|^{1-s-m}`.
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub s: f64,
    pub m: usize,
    pub entries: Vec<MomentEntry>,
    /// Smallest constant dominating every estimate.
    pub c_empirical: f64,
    /// `max ratio / min ratio`.
    pub uniformity: f64,
}

/// `(σ², |z|)` pairs with `|z|` given as multiples of `σ`.
pub fn relative_moment_grid(sigmas: &[f64], multiples: &[f64]) -> Vec<(f64, f64)> {
    sigmas
        .iter()
        .flat_map(|&sg| multiples.iter().map(move |&k| (sg * sg, k * sg)))
        .collect()
}

/// Monte Carlo estimate of `E|Z - z|^{1-s-m}`, `Z ~ N(0, σ² I_m)`, at each
/// `(σ², |z|)` pair (the shift is along the first axis).
pub fn moment_bound_check(grid: &[(f64, f64)], s: f64, m: usize, replicas: usize, seed: u64) -> Result<MomentReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", s, "(0, 1)"));
    }
    check_replicas(replicas)?;
    if m == 0 {
        return Err(Error::Dimension("m must be positive".into()));
    }
    let e = 1.0 - s - m as f64;
    let entries: Vec<MomentEntry> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &(sigma2, z))| {
            let sigma = sigma2.sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let vals: Vec<f64> = (0..replicas)
                .map(|_| {
                    let mut r2 = 0.0;
                    for i in 0..m {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        let d = sigma * g - if i == 0 { z } else { 0.0 };
                        r2 += d * d;
                    }
                    r2.sqrt().powf(e)
                })
                .collect();
            let est = McEstimate::from_values(&vals);
            let reference = if z > 0.0 { sigma.powf(e).min(z.abs().powf(e)) } else { sigma.powf(e) };
            MomentEntry {
                sigma,
                z,
                estimate: est.mean,
                stderr: est.stderr,
                reference,
                ratio: est.mean / reference,
            }
        })
        .collect();
    let c_max = entries.iter().map(|x| x.ratio).fold(0.0f64, f64::max);
    let c_min = entries.iter().map(|x| x.ratio).fold(f64::INFINITY, f64::min);
    Ok(MomentReport {
        s,
        m,
        entries,
        c_empirical: c_max,
        uniformity: c_max / c_min,
    })
}

/// Empirical covariance of the sampler against the kernel.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceCheck {
    pub replicas: usize,
    pub max_z_score: f64,
    pub passed: bool,
}

/// Entrywise comparison of the empirical covariance over `replicas`
/// samples with `R`, tolerance `4 √((R_ii R_jj + R_ij²)/replicas)`.
pub fn covariance_check(model: &GaussianModel, replicas: usize) -> Result<CovarianceCheck> {
    check_replicas(replicas)?;
    let sampler = GaussianSampler::new(model.clone())?;
    let n = model.times.len();
    let paths: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|k| {
            let p = sampler.sample::<f64>(k)?;
            Ok((0..n).map(|j| p.value(j, 0) - model.offset[0]).collect())
        })
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let emp = paths.iter().map(|p| p[i] * p[j]).sum::<f64>() / replicas as f64;
            let r = model.family.covariance(model.times[i], model.times[j]);
            let rii = model.family.variance(model.times[i]);
            let rjj = model.family.variance(model.times[j]);
            let sd = ((rii * rjj + r * r) / replicas as f64).sqrt();
            if sd > 0.0 {
                worst = worst.max((emp - r).abs() / sd);
            } else if emp.abs() > 0.0 {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(CovarianceCheck {
        replicas,
        max_z_score: worst,
        passed: worst <= 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fbm_half_is_brownian() {
        let f = Family::fbm(0.5).unwrap();
        assert!((f.covariance(1.0, 2.0) - 1.0).abs() < 1e-15);
        assert!((f.covariance(0.3, 0.7) - Family::Bm.covariance(0.3, 0.7)).abs() < 1e-15);
    }

    #[test]
    fn family_parsing() {
        assert_eq!(Family::parse("fbm:0.4").unwrap().hurst(), Some(0.4));
        assert_eq!(Family::parse("bm").unwrap().to_string(), "bm");
        assert!((Family::parse("ou:2").unwrap().covariance(0.0, 0.5) - (-1f64).exp()).abs() < 1e-15);
        assert!(Family::parse("fbm").is_err());
        assert!(Family::parse("nope:1").is_err());
    }

    #[test]
    fn durbin_and_cholesky_agree_in_law() {
        // both samplers reproduce the fBm Gram matrix on a small grid
        let uni = GaussianModel::uniform(Family::fbm(0.4).unwrap(), 1, 0.0, 1.0, 8, 7).unwrap();
        let shifted = GaussianModel::uniform(Family::fbm(0.4).unwrap(), 1, 0.5, 1.5, 8, 7).unwrap();
        assert_eq!(GaussianSampler::new(uni.clone()).unwrap().info().method, "durbin-levinson");
        assert_eq!(GaussianSampler::new(shifted.clone()).unwrap().info().method, "cholesky");
        for m in [uni, shifted] {
            let c = covariance_check(&m, 20_000).unwrap();
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn degenerate_grid_gives_zero_path() {
        let m = GaussianModel::new(Family::Bm, 1, vec![0.0], 3).unwrap();
        let p: SampledPath<f64> = sample_path(&m).unwrap_or_else(|_| SampledPath::scalar(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap());
        assert!(p.values().iter().all(|&v| v == 0.0));
        let l = cholesky_semidefinite(&[0.0], 1, 0.0, 1.0).unwrap();
        assert_eq!(l, vec![0.0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = GaussianModel::uniform(Family::fbm(0.4).unwrap(), 2, 0.0, 1.0, 64, 42).unwrap();
        let s = GaussianSampler::new(m.clone()).unwrap();
        let a: SampledPath<f64> = s.sample(3).unwrap();
        let b: SampledPath<f64> = GaussianSampler::new(m).unwrap().sample(3).unwrap();
        assert_eq!(a.values(), b.values());
        let c: SampledPath<f64> = s.sample(4).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn non_psd_kernel_is_rejected() {
        let bad = Family::Stationary {
            name: "bad".into(),
            kernel: Arc::new(|tau: f64| if tau == 0.0 { 1.0 } else { -0.9 }),
        };
        let m = GaussianModel::uniform(bad, 1, 0.0, 1.0, 4, 1).unwrap();
        assert!(matches!(GaussianSampler::new(m), Err(Error::NotPsd(_))));
    }

    #[test]
    fn cmu_brownian_analytic_case() {
        let model = GaussianModel::uniform(Family::Bm, 1, 0.0, 1.0, 8, 0).unwrap();
        let mu = RadonMeasure::dirac(vec![1.0], 1.0).unwrap();
        let r = cmu_constant(&model, &mu, 0.5, 0.0, 1.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "{r:?}");
        let zero = cmu_constant(&model, &RadonMeasure::<f64>::zero(1), 0.5, 0.0, 1.0).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn cmu_flags_the_exponent_condition() {
        let model = GaussianModel::uniform(Family::fbm(0.4).unwrap(), 3, 0.0, 1.0, 8, 0).unwrap();
        let at_zero = RadonMeasure::dirac(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let r = cmu_constant(&model, &at_zero, 0.8, 0.0, 1.0).unwrap();
        assert!(r.exponent_violated && !r.finite);
        let away = RadonMeasure::dirac(vec![1.0, 0.0, 0.0], 1.0).unwrap();
        let r = cmu_constant(&model, &away, 0.8, 0.0, 1.0).unwrap();
        assert!(r.exponent_violated && r.finite);
        let one_d = GaussianModel::uniform(Family::fbm(0.4).unwrap(), 1, 0.0, 1.0, 8, 0).unwrap();
        let r = cmu_constant(&one_d, &RadonMeasure::dirac(vec![0.0], 1.0).unwrap(), 0.8, 0.0, 1.0).unwrap();
        // ∫_0^1 θ^{-0.32} dθ
        assert!(!r.exponent_violated && (r.value - 1.0 / 0.68).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn moment_formula_and_check() {
        // E|Z|^{-1/2} = 2 ∫_0^∞ z^{-1/2} φ(z) dz; with z = y² this is
        // 4 ∫_0^∞ φ(y) dy over a smooth integrand
        let quad: f64 = (0..400)
            .map(|k| {
                let lo = k as f64 * 0.025;
                legendre(8).integrate(lo, lo + 0.025, |y: f64| 4.0 * (-y.powi(4) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum();
        assert!((normal_abs_moment(-0.5) - quad).abs() < 1e-10, "{quad}");
        assert!((quad - 1.720_08).abs() < 1e-5);
        let rep = moment_bound_check(&[(1.0, 0.0)], 0.5, 1, 200_000, 9).unwrap();
        let e = &rep.entries[0];
        assert!((e.estimate - quad).abs() < 0.03, "{e:?}");
    }

    #[test]
    fn offset_model_far_field() {
        // nearly deterministic path at 10, atom at 0: E ∫|X|^{-1/2} ≈ 10^{-1/2}
        let fam = Family::parse("const:1e-6").unwrap();
        let model = GaussianModel::uniform(fam, 1, 0.0, 1.0, 16, 5).unwrap().with_offset(vec![10.0]).unwrap();
        let mu = RadonMeasure::dirac(vec![0.0], 1.0).unwrap();
        let est = mc_expected_variability(&model, &mu, 0.5, 1.0, 50).unwrap();
        assert!((est.mean - 10f64.powf(-0.5)).abs() < 1e-4, "{est:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn covariance_is_symmetric(h in 0.05f64..0.95, r in 0.0f64..3.0, t in 0.0f64..3.0) {
            let f = Family::fbm(h).unwrap();
            prop_assert!((f.covariance(r, t) - f.covariance(t, r)).abs() < 1e-14);
            prop_assert!(f.covariance(r, t).abs() <= (f.variance(r) * f.variance(t)).sqrt() + 1e-12);
        }
    }
}
