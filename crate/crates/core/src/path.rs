//! Sampled vector-valued paths, piecewise-linear evaluation, and Hölder /
//! Gagliardo seminorm estimators.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::Real;

/// A path `[a, b] -> R^m` known at grid times and interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath<T> {
    times: Vec<T>,
    /// Row-major `len × dim` node values.
    values: Vec<T>,
    dim: usize,
}

impl<T: Real> SampledPath<T> {
    /// Build from node times and one point per node.
    pub fn new(times: Vec<T>, points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidPath("ragged point dimensions".into()));
        }
        let values = points.into_iter().flatten().collect();
        Self::from_flat(times, values, dim)
    }

    /// Build from row-major node values.
    pub fn from_flat(times: Vec<T>, values: Vec<T>, dim: usize) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidPath("need at least two grid points".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if values.len() != times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values for {} times of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath("times must be strictly increasing".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite sample".into()));
        }
        Ok(SampledPath { times, values, dim })
    }

    /// One-dimensional path from scalar samples.
    pub fn scalar(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        Self::from_flat(times, values, 1)
    }

    /// Scalar path sampling `f` at the given times.
    pub fn from_fn(times: Vec<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::scalar(times, values)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn start(&self) -> T {
        self.times[0]
    }

    pub fn end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn time(&self, k: usize) -> T {
        self.times[k]
    }

    /// Node value `k` as a slice of length `dim`.
    pub fn point(&self, k: usize) -> &[T] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn value(&self, k: usize, i: usize) -> T {
        self.values[k * self.dim + i]
    }

    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    /// Index `k` of the cell `[t_k, t_{k+1}]` containing `t` (last cell for `t = b`).
    pub fn locate(&self, t: T) -> Result<usize> {
        self.check_domain(t)?;
        Ok(self.locate_unchecked(t))
    }

    pub(crate) fn locate_unchecked(&self, t: T) -> usize {
        let n = self.times.len();
        let idx = self.times.partition_point(|&s| s <= t);
        idx.clamp(1, n - 1) - 1
    }

    fn check_domain(&self, t: T) -> Result<()> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::OutOfDomain {
                t: t.as_f64(),
                a: self.start().as_f64(),
                b: self.end().as_f64(),
            });
        }
        Ok(())
    }

    /// Linear interpolant at `t`.
    pub fn eval(&self, t: T) -> Result<Vec<T>> {
        self.check_domain(t)?;
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(t, &mut out);
        Ok(out)
    }

    /// Interpolant into a caller-provided buffer; `t` must lie in `[a, b]`.
    pub fn eval_into(&self, t: T, out: &mut [T]) {
        let k = self.locate_unchecked(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let lam = (t - t0) / (t1 - t0);
        for i in 0..self.dim {
            let v0 = self.value(k, i);
            let v1 = self.value(k + 1, i);
            out[i] = v0 + lam * (v1 - v0);
        }
    }

    /// Component `i` of the interpolant at `t` (`t` must lie in `[a, b]`).
    pub fn eval_component(&self, t: T, i: usize) -> T {
        let k = self.locate_unchecked(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let lam = (t - t0) / (t1 - t0);
        let v0 = self.value(k, i);
        v0 + lam * (self.value(k + 1, i) - v0)
    }

    /// Slope of component `i` on cell `k`.
    pub fn slope(&self, k: usize, i: usize) -> T {
        (self.value(k + 1, i) - self.value(k, i)) / (self.times[k + 1] - self.times[k])
    }

    /// Scalar path of component `i`.
    pub fn component(&self, i: usize) -> SampledPath<T> {
        let vals = (0..self.len()).map(|k| self.value(k, i)).collect();
        SampledPath {
            times: self.times.clone(),
            values: vals,
            dim: 1,
        }
    }

    /// Apply `f` to every node value (the result is again interpolated linearly).
    pub fn map_points(&self, out_dim: usize, f: impl Fn(&[T]) -> Vec<T>) -> Result<SampledPath<T>> {
        let mut values = Vec::with_capacity(self.len() * out_dim);
        for k in 0..self.len() {
            let v = f(self.point(k));
            if v.len() != out_dim {
                return Err(Error::Dimension(format!("map returned {} values, expected {out_dim}", v.len())));
            }
            values.extend(v);
        }
        SampledPath::from_flat(self.times.clone(), values, out_dim)
    }

    /// `self - c` componentwise.
    pub fn shifted(&self, c: &[T]) -> SampledPath<T> {
        let mut out = self.clone();
        for k in 0..self.len() {
            for i in 0..self.dim {
                out.values[k * self.dim + i] = out.values[k * self.dim + i] - c[i];
            }
        }
        out
    }

    pub fn scaled(&self, c: T) -> SampledPath<T> {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * c);
        out
    }

    /// Pointwise sum on a shared grid.
    pub fn add(&self, other: &SampledPath<T>) -> Result<SampledPath<T>> {
        if self.times != other.times || self.dim != other.dim {
            return Err(Error::GridMismatch("add needs identical grids and dimensions".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect();
        SampledPath::from_flat(self.times.clone(), values, self.dim)
    }

    /// Insert `factor - 1` equally spaced nodes into every cell; the
    /// interpolant is unchanged.
    pub fn refine(&self, factor: usize) -> SampledPath<T> {
        let factor = factor.max(1);
        let mut times = Vec::with_capacity(self.cells() * factor + 1);
        let mut values = Vec::with_capacity((self.cells() * factor + 1) * self.dim);
        for k in 0..self.cells() {
            for j in 0..factor {
                let lam = T::from_usize_lossy(j) / T::from_usize_lossy(factor);
                times.push(self.times[k] + lam * (self.times[k + 1] - self.times[k]));
                for i in 0..self.dim {
                    let v0 = self.value(k, i);
                    values.push(v0 + lam * (self.value(k + 1, i) - v0));
                }
            }
        }
        times.push(self.end());
        values.extend_from_slice(self.point(self.len() - 1));
        SampledPath {
            times,
            values,
            dim: self.dim,
        }
    }

    /// Add nodes at `extra` times (duplicates and out-of-range entries are
    /// ignored); the interpolant is unchanged.
    pub fn with_extra_nodes(&self, extra: &[T]) -> SampledPath<T> {
        let (a, b) = (self.start(), self.end());
        let mut add: Vec<T> = extra.iter().copied().filter(|&t| t > a && t < b).collect();
        if add.is_empty() {
            return self.clone();
        }
        add.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut times = Vec::with_capacity(self.len() + add.len());
        let mut values = Vec::with_capacity((self.len() + add.len()) * self.dim);
        let mut buf = vec![T::zero(); self.dim];
        let mut j = 0;
        for k in 0..self.len() {
            let tk = self.times[k];
            while j < add.len() && add[j] < tk {
                let t = add[j];
                if times.last().is_none_or(|&last| t > last) {
                    self.eval_into(t, &mut buf);
                    times.push(t);
                    values.extend_from_slice(&buf);
                }
                j += 1;
            }
            while j < add.len() && add[j] == tk {
                j += 1;
            }
            times.push(tk);
            values.extend_from_slice(self.point(k));
        }
        SampledPath {
            times,
            values,
            dim: self.dim,
        }
    }

    /// Keep every `step`-th node (the last node is always kept).
    pub fn subsample(&self, step: usize) -> Result<SampledPath<T>> {
        let step = step.max(1);
        if self.cells() % step != 0 {
            return Err(Error::GridMismatch(format!(
                "{} cells not divisible by {step}",
                self.cells()
            )));
        }
        let idx: Vec<usize> = (0..self.len()).step_by(step).collect();
        let times = idx.iter().map(|&k| self.times[k]).collect();
        let values = idx.iter().flat_map(|&k| self.point(k).to_vec()).collect();
        SampledPath::from_flat(times, values, self.dim)
    }

    /// Times at which component `i` of the interpolant crosses one of
    /// `levels` transversally inside a cell.
    pub fn crossing_times(&self, i: usize, levels: &[T]) -> Vec<T> {
        let mut out = Vec::new();
        for k in 0..self.cells() {
            let (v0, v1) = (self.value(k, i), self.value(k + 1, i));
            if v0 == v1 {
                continue;
            }
            for &z in levels {
                let lam = (z - v0) / (v1 - v0);
                if lam > T::zero() && lam < T::one() {
                    out.push(self.times[k] + lam * (self.times[k + 1] - self.times[k]));
                }
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out
    }

    /// Euclidean norm of the increment between nodes `j` and `k`.
    pub fn node_distance(&self, j: usize, k: usize) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim {
            let d = self.value(k, i) - self.value(j, i);
            acc = acc + d * d;
        }
        acc.sqrt()
    }

    /// Regularity estimate from the scaling of mean squared node increments
    /// over lags 1, 2, 4, … (least-squares slope in log-log, halved). Close
    /// to 1 for smooth paths and to `H` for fBm samples.
    pub fn roughness_exponent(&self) -> f64 {
        let n = self.cells();
        let mut pts = Vec::new();
        let mut lag = 1;
        while lag * 8 <= n.max(8) && lag <= n {
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for k in 0..=(n - lag) {
                acc += self.node_distance(k, k + lag).as_f64().powi(2);
                cnt += 1;
            }
            let dt = (self.times[lag] - self.times[0]).as_f64();
            if acc > 0.0 {
                pts.push((dt.ln(), (acc / cnt as f64).ln()));
            }
            lag *= 2;
        }
        if pts.len() < 2 {
            return 1.0;
        }
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let (num, den) = pts
            .iter()
            .fold((0.0, 0.0), |(n, d), p| (n + (p.0 - mx) * (p.1 - my), d + (p.0 - mx).powi(2)));
        (0.5 * num / den).clamp(0.0, 1.0)
    }

    /// Whether all cells have the same length up to relative `1e-12`.
    pub fn is_uniform(&self) -> bool {
        let h = (self.end() - self.start()) / T::from_usize_lossy(self.cells());
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= T::lit(1e-9) * h)
    }

    /// Node-pair estimate of the `β`-Hölder seminorm.
    pub fn holder_seminorm(&self, beta: T) -> Result<SeminormReport<T>> {
        self.holder_seminorm_with(beta, HolderMode::AllPairs)
    }

    pub fn holder_seminorm_with(&self, beta: T, mode: HolderMode) -> Result<SeminormReport<T>> {
        check_open_unit("beta", beta)?;
        let n = self.len();
        let mut best = T::zero();
        let mut visit = |j: usize, k: usize| {
            let d = self.node_distance(j, k);
            if d > T::zero() {
                let q = d / (self.times[k] - self.times[j]).powf(beta);
                if q > best {
                    best = q;
                }
            }
        };
        match mode {
            HolderMode::AllPairs => {
                for j in 0..n {
                    for k in j + 1..n {
                        visit(j, k);
                    }
                }
            }
            HolderMode::Dyadic => {
                let mut lag = 1;
                while lag < n {
                    for j in 0..n - lag {
                        visit(j, j + lag);
                    }
                    lag *= 2;
                }
                visit(0, n - 1);
            }
        }
        Ok(SeminormReport {
            value: best,
            kind: SeminormKind::Holder { beta },
            grid_resolution: n,
            divergence_warning: false,
        })
    }

    /// `(β, p)`-Gagliardo seminorm of the interpolant over the time interval.
    ///
    /// Diagonal cells use the closed form for linear pieces; other cell pairs
    /// use graded tensor Gauss–Legendre.
    pub fn gagliardo_seminorm(&self, beta: T, p: T) -> Result<SeminormReport<T>> {
        check_open_unit("beta", beta)?;
        if !(p >= T::one()) || !p.is_finite() {
            return Err(Error::param("p", p.as_f64(), "[1, inf)"));
        }
        let m = self.dim;
        let expo = T::one() + beta * p;
        let cells = self.cells();
        let q_diag = p - expo;
        let two = T::lit(2.0);
        let slope_norm = |k: usize| {
            let mut acc = T::zero();
            for i in 0..m {
                let s = self.slope(k, i);
                acc = acc + s * s;
            }
            acc.sqrt()
        };
        let near = quadrature::graded(6);
        let far = quadrature::legendre(4);
        let mut total = T::zero();
        let mut a = vec![T::zero(); m];
        let mut bpt = vec![T::zero(); m];
        for k in 0..cells {
            let h = self.times[k + 1] - self.times[k];
            let kn = slope_norm(k);
            if kn > T::zero() {
                total = total
                    + kn.powf(p) * two * h.powf(q_diag + two)
                        / ((q_diag + T::one()) * (q_diag + two));
            }
        }
        for j in 0..cells {
            let (x0, x1) = (self.times[j], self.times[j + 1]);
            for k in j + 1..cells {
                let (y0, y1) = (self.times[k], self.times[k + 1]);
                let rule = if k == j + 1 { near } else { far };
                let mut cell = T::zero();
                for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
                    let x = x0 + (x1 - x0) * T::lit(u);
                    self.eval_into(x, &mut a);
                    for (&v, &wv) in rule.nodes.iter().zip(&rule.weights) {
                        let y = y0 + (y1 - y0) * T::lit(v);
                        self.eval_into(y, &mut bpt);
                        let mut d2 = T::zero();
                        for i in 0..m {
                            let d = bpt[i] - a[i];
                            d2 = d2 + d * d;
                        }
                        if d2 > T::zero() {
                            let val = d2.sqrt().powf(p) / (y - x).powf(expo);
                            cell = cell + T::lit(wu * wv) * val;
                        }
                    }
                }
                total = total + two * cell * (x1 - x0) * (y1 - y0);
            }
        }
        Ok(SeminormReport {
            value: total.powf(T::one() / p),
            kind: SeminormKind::Gagliardo { beta, p },
            grid_resolution: self.len(),
            divergence_warning: beta * p >= T::one(),
        })
    }

    /// Write the path as CSV with header `t,x1,...,xm`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![format_num(self.times[k])];
            row.extend(self.point(k).iter().map(|&v| format_num(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV written by [`SampledPath::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::Parse("path CSV header must be `t,x1,...,xm`".into()));
        }
        let dim = headers.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::Parse(format!("row with {} fields, expected {}", rec.len(), dim + 1)));
            }
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("not a number: `{field}`")))?;
                if c == 0 {
                    times.push(T::lit(v));
                } else {
                    values.push(T::lit(v));
                }
            }
        }
        SampledPath::from_flat(times, values, dim)
    }
}

/// Shortest round-trip decimal form.
pub(crate) fn format_num<T: Real>(v: T) -> String {
    format!("{}", v.as_f64())
}

pub(crate) fn check_open_unit<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v < T::one() {
        Ok(())
    } else {
        Err(Error::param(name, v.as_f64(), "(0, 1)"))
    }
}

/// Uniform grid with `cells` cells on `[a, b]`.
pub fn uniform_grid<T: Real>(a: T, b: T, cells: usize) -> Vec<T> {
    let n = T::from_usize_lossy(cells);
    (0..=cells)
        .map(|k| {
            if k == cells {
                b
            } else {
                a + (b - a) * T::from_usize_lossy(k) / n
            }
        })
        .collect()
}

/// Which node pairs enter the Hölder estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HolderMode {
    /// All `O(n²)` pairs.
    AllPairs,
    /// Pairs at dyadic lags only, `O(n log n)`.
    Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeminormKind<T> {
    Holder { beta: T },
    Gagliardo { beta: T, p: T },
}

/// Seminorm estimate with the grid it was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeminormReport<T> {
    pub value: T,
    pub kind: SeminormKind<T>,
    pub grid_resolution: usize,
    /// Set when `βp ≥ 1`, where the continuum seminorm of a non-constant
    /// path is infinite and the quadrature value is grid-dependent.
    pub divergence_warning: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity(cells: usize) -> SampledPath<f64> {
        SampledPath::from_fn(uniform_grid(0.0, 1.0, cells), |t| t).unwrap()
    }

    #[test]
    fn eval_interpolates_and_hits_nodes() {
        let p = SampledPath::scalar(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(p.eval(0.5).unwrap(), vec![0.5]);
        let hat = SampledPath::scalar(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(hat.eval(0.25).unwrap(), vec![0.5]);
        for k in 0..3 {
            assert_eq!(hat.eval(hat.time(k)).unwrap()[0], hat.value(k, 0));
        }
    }

    #[test]
    fn eval_outside_domain_is_an_error() {
        let p = identity(4);
        assert!(matches!(p.eval(1.5), Err(Error::OutOfDomain { .. })));
        assert!(p.eval(-1e-9).is_err());
    }

    #[test]
    fn construction_rejects_bad_grids() {
        assert!(SampledPath::scalar(vec![0.0], vec![1.0]).is_err());
        assert!(SampledPath::scalar(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(SampledPath::scalar(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SampledPath::scalar(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn holder_of_constant_and_identity() {
        let c = SampledPath::from_fn(uniform_grid(0.0, 1.0, 16), |_| 3.0).unwrap();
        assert_eq!(c.holder_seminorm(0.5).unwrap().value, 0.0);
        let id = identity(256);
        assert!((id.holder_seminorm(0.5).unwrap().value - 1.0).abs() < 1e-12);
        assert!(id.holder_seminorm(1.0).is_err());
    }

    #[test]
    fn holder_of_sqrt_approaches_one() {
        let p = SampledPath::from_fn(uniform_grid(0.0, 1.0, 1 << 12), |t: f64| t.sqrt()).unwrap();
        let v = p.holder_seminorm_with(0.5, HolderMode::Dyadic).unwrap().value;
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        let all = p.holder_seminorm(0.5).unwrap().value;
        assert!(all <= 1.0 + 1e-12 && all >= v);
    }

    #[test]
    fn gagliardo_analytic_cases() {
        let id = identity(64);
        let r = id.gagliardo_seminorm(0.5, 2.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
        let c = SampledPath::from_fn(uniform_grid(0.0, 1.0, 8), |_| -2.0).unwrap();
        assert_eq!(c.gagliardo_seminorm(0.25, 2.0).unwrap().value, 0.0);
        let id = identity(1 << 10);
        let v = id.gagliardo_seminorm(0.25, 2.0).unwrap().value;
        let exact = (8.0f64 / 15.0).sqrt();
        assert!(((v - exact) / exact).abs() < 1e-3, "{v} vs {exact}");
        assert!(id.gagliardo_seminorm(0.5, 0.5).is_err());
        assert!(id.gagliardo_seminorm(0.75, 2.0).unwrap().divergence_warning);
    }

    #[test]
    fn csv_round_trip() {
        let p = SampledPath::new(vec![0.0, 0.5, 1.0], vec![vec![1.0, -2.0], vec![0.25, 3.5], vec![0.0, 1e-17]]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t,x1,x2\n"));
        let q = SampledPath::<f64>::read_csv(&buf[..]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn extra_nodes_keep_the_interpolant() {
        let p = SampledPath::scalar(vec![0.0f64, 1.0, 2.0], vec![0.0, 2.0, -2.0]).unwrap();
        let q = p.with_extra_nodes(&[0.5, 1.0, 1.5, 3.0]);
        assert_eq!(q.times(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        for t in [0.1, 0.7, 1.2, 1.9] {
            assert!((p.eval(t).unwrap()[0] - q.eval(t).unwrap()[0]).abs() < 1e-15);
        }
        assert_eq!(p.crossing_times(0, &[0.0]), vec![1.5]);
    }

    proptest! {
        #[test]
        fn holder_scales_linearly(vals in proptest::collection::vec(-5.0f64..5.0, 3..40), c in -4.0f64..4.0) {
            let n = vals.len();
            let p = SampledPath::scalar(uniform_grid(0.0, 1.0, n - 1), vals).unwrap();
            let base = p.holder_seminorm(0.4).unwrap().value;
            let scaled = p.scaled(c).holder_seminorm(0.4).unwrap().value;
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * (1.0 + base));
        }

        #[test]
        fn holder_nondecreasing_under_refinement(vals in proptest::collection::vec(-5.0f64..5.0, 3..30)) {
            // adding samples of the same function can only raise the node-pair sup
            let n = vals.len();
            let fine = SampledPath::scalar(uniform_grid(0.0, 1.0, n - 1), vals).unwrap();
            let coarse_idx: Vec<usize> = (0..n).step_by(2).chain(std::iter::once(n - 1)).collect();
            let mut ci = coarse_idx.clone();
            ci.dedup();
            let coarse = SampledPath::scalar(
                ci.iter().map(|&k| fine.time(k)).collect(),
                ci.iter().map(|&k| fine.value(k, 0)).collect(),
            ).unwrap();
            prop_assert!(fine.holder_seminorm(0.3).unwrap().value + 1e-12 >= coarse.holder_seminorm(0.3).unwrap().value);
        }
    }
}
