//! Bounded-variation functions, Radon measures in atom + box-density form,
//! and the coefficient classes `φ: R^m -> R^d` consumed by the integrals.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::path::SampledPath;
use crate::scalar::Real;

/// Nonnegative measure on `R^m`: point masses plus a piecewise-constant
/// density on axis-aligned boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonMeasure<T> {
    dim: usize,
    atoms: Vec<(Vec<T>, T)>,
    boxes: Vec<(Vec<(T, T)>, T)>,
}

impl<T: Real> RadonMeasure<T> {
    pub fn zero(dim: usize) -> Self {
        RadonMeasure {
            dim,
            atoms: Vec::new(),
            boxes: Vec::new(),
        }
    }

    /// `w·δ_z`.
    pub fn dirac(z: Vec<T>, w: T) -> Result<Self> {
        let dim = z.len();
        Self::new(dim, vec![(z, w)], Vec::new())
    }

    /// Lebesgue measure times `value` on the box `∏[lo_i, hi_i]`.
    pub fn uniform_box(bounds: Vec<(T, T)>, value: T) -> Result<Self> {
        let dim = bounds.len();
        Self::new(dim, Vec::new(), vec![(bounds, value)])
    }

    pub fn new(dim: usize, atoms: Vec<(Vec<T>, T)>, boxes: Vec<(Vec<(T, T)>, T)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("measure dimension must be positive".into()));
        }
        for (z, w) in &atoms {
            if z.len() != dim {
                return Err(Error::Dimension(format!("atom of dimension {} in R^{dim}", z.len())));
            }
            if !(*w >= T::zero()) || !w.is_finite() || z.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("atom weight", w.as_f64(), "[0, inf)"));
            }
        }
        for (b, v) in &boxes {
            if b.len() != dim {
                return Err(Error::Dimension(format!("box of dimension {} in R^{dim}", b.len())));
            }
            if b.iter().any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
                return Err(Error::Parse("box bounds must satisfy lo < hi".into()));
            }
            if !(*v >= T::zero()) || !v.is_finite() {
                return Err(Error::param("density", v.as_f64(), "[0, inf)"));
            }
        }
        let atoms = atoms.into_iter().filter(|(_, w)| *w > T::zero()).collect();
        let boxes = boxes.into_iter().filter(|(_, v)| *v > T::zero()).collect();
        Ok(RadonMeasure { dim, atoms, boxes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(Vec<T>, T)] {
        &self.atoms
    }

    pub fn boxes(&self) -> &[(Vec<(T, T)>, T)] {
        &self.boxes
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.boxes.is_empty()
    }

    pub fn total_mass(&self) -> T {
        let a: T = self.atoms.iter().map(|(_, w)| *w).sum();
        let b: T = self
            .boxes
            .iter()
            .map(|(bx, v)| *v * bx.iter().map(|(lo, hi)| *hi - *lo).fold(T::one(), |p, l| p * l))
            .sum();
        a + b
    }

    pub fn scaled(&self, c: T) -> Self {
        assert!(c >= T::zero(), "measures scale by nonnegative factors");
        RadonMeasure {
            dim: self.dim,
            atoms: self.atoms.iter().map(|(z, w)| (z.clone(), *w * c)).filter(|(_, w)| *w > T::zero()).collect(),
            boxes: self.boxes.iter().map(|(b, v)| (b.clone(), *v * c)).filter(|(_, v)| *v > T::zero()).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension("adding measures of different dimension".into()));
        }
        let mut out = self.clone();
        out.atoms.extend(other.atoms.iter().cloned());
        out.boxes.extend(other.boxes.iter().cloned());
        Ok(out)
    }

    /// Mass of the closed ball `B(x, r)`, exact for atoms and for boxes in
    /// one dimension; boxes in higher dimension use a midpoint sub-grid.
    pub fn ball_mass(&self, x: &[T], r: T) -> T {
        let mut m = T::zero();
        for (z, w) in &self.atoms {
            if dist(x, z) <= r {
                m = m + *w;
            }
        }
        for (b, v) in &self.boxes {
            if self.dim == 1 {
                let lo = b[0].0.max(x[0] - r);
                let hi = b[0].1.min(x[0] + r);
                if hi > lo {
                    m = m + *v * (hi - lo);
                }
            } else {
                m = m + *v * box_ball_volume(b, x, r, 24);
            }
        }
        m
    }
}

/// Euclidean distance.
pub(crate) fn dist<T: Real>(x: &[T], z: &[T]) -> T {
    x.iter()
        .zip(z)
        .map(|(&a, &b)| (a - b) * (a - b))
        .fold(T::zero(), |s, v| s + v)
        .sqrt()
}

fn box_ball_volume<T: Real>(b: &[(T, T)], x: &[T], r: T, per_axis: usize) -> T {
    // midpoint rule over a tensor sub-grid of the box
    let m = b.len();
    let total = per_axis.pow(m as u32);
    let cell: T = b
        .iter()
        .map(|(lo, hi)| (*hi - *lo) / T::from_usize_lossy(per_axis))
        .fold(T::one(), |p, l| p * l);
    let mut count = 0usize;
    let mut pt = vec![T::zero(); m];
    for idx in 0..total {
        let mut rem = idx;
        for (i, (lo, hi)) in b.iter().enumerate() {
            let k = rem % per_axis;
            rem /= per_axis;
            pt[i] = *lo + (*hi - *lo) * (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(per_axis);
        }
        if dist(&pt, x) <= r {
            count += 1;
        }
    }
    cell * T::from_usize_lossy(count)
}

/// One-dimensional BV function: `base_value` plus the cumulative signed
/// measure `Σ w_k δ_{x_k} + density dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct BV1D<T> {
    pub base_value: T,
    pub atoms: Vec<(T, T)>,
    /// `(lo, hi, value)` intervals of signed density.
    pub density: Vec<(T, T, T)>,
    pub convention: JumpConvention,
}

impl<T: Real> BV1D<T> {
    pub fn new(base_value: T, atoms: Vec<(T, T)>, density: Vec<(T, T, T)>) -> Result<Self> {
        if density.iter().any(|(lo, hi, _)| !(hi > lo)) {
            return Err(Error::Parse("density intervals need lo < hi".into()));
        }
        Ok(BV1D {
            base_value,
            atoms,
            density,
            convention: JumpConvention::Midpoint,
        })
    }

    /// `sign(x)`: a jump of size 2 at the origin.
    pub fn sign() -> Self {
        BV1D::new(-T::one(), vec![(T::zero(), T::lit(2.0))], Vec::new()).unwrap()
    }

    /// Indicator of `[lo, hi]`.
    pub fn indicator(lo: T, hi: T) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Parse("indicator needs lo < hi".into()));
        }
        BV1D::new(T::zero(), vec![(lo, T::one()), (hi, -T::one())], Vec::new())
    }

    pub fn eval(&self, x: T) -> T {
        let mut v = self.base_value;
        for &(z, w) in &self.atoms {
            if z < x {
                v = v + w;
            } else if z == x {
                v = v + w * self.convention.weight::<T>();
            }
        }
        for &(lo, hi, d) in &self.density {
            if x > lo {
                v = v + d * (x.min(hi) - lo);
            }
        }
        v
    }

    /// Total variation measure `‖Df‖`.
    pub fn gradient_measure(&self) -> RadonMeasure<T> {
        RadonMeasure::new(
            1,
            self.atoms.iter().map(|&(z, w)| (vec![z], w.abs())).collect(),
            self.density.iter().map(|&(lo, hi, d)| (vec![(lo, hi)], d.abs())).collect(),
        )
        .expect("absolute values are valid weights")
    }

    pub fn total_variation(&self) -> T {
        self.gradient_measure().total_mass()
    }
}

/// Which representative a BV function takes at a jump point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpConvention {
    LeftLimit,
    RightLimit,
    #[default]
    Midpoint,
}

impl JumpConvention {
    /// Fraction of a jump already taken at the jump point.
    pub fn weight<T: Real>(self) -> T {
        match self {
            JumpConvention::LeftLimit => T::zero(),
            JumpConvention::RightLimit => T::one(),
            JumpConvention::Midpoint => T::lit(0.5),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "left" | "left_limit" => Ok(JumpConvention::LeftLimit),
            "right" | "right_limit" => Ok(JumpConvention::RightLimit),
            "mid" | "midpoint" => Ok(JumpConvention::Midpoint),
            other => Err(Error::Parse(format!("unknown jump convention `{other}`"))),
        }
    }
}

type Scalar1<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
type ValueFn<T> = Arc<dyn Fn(&[T], usize) -> T + Send + Sync>;
type PartialFn<T> = Arc<dyn Fn(&[T], usize, usize) -> T + Send + Sync>;

#[derive(Clone)]
enum Kind<T> {
    /// Piecewise-linear `R -> R`, possibly with value jumps (then not Lipschitz).
    Piecewise {
        knots: Vec<T>,
        /// `slopes[l]` on the piece left of `knots[l]`; `slopes[K]` right of the last knot.
        slopes: Vec<T>,
        left_vals: Vec<T>,
        right_vals: Vec<T>,
    },
    /// Smooth `R -> R` with `λ`-Hölder derivative.
    Smooth {
        f: Scalar1<T>,
        df: Scalar1<T>,
        lambda: T,
        /// Global Lipschitz constant when one exists.
        lip: T,
    },
    /// General `R^m -> R^d` from closures and user-supplied dominating measures.
    General {
        m: usize,
        d: usize,
        value: ValueFn<T>,
        partial: PartialFn<T>,
        lip: Vec<T>,
        /// `‖D ∂_i φ_j‖` at index `i * d + j`.
        measures: Vec<RadonMeasure<T>>,
        lambda: Option<T>,
    },
}

/// Lipschitz coefficient `φ: R^m -> R^d` whose first partials are BV.
#[derive(Clone)]
pub struct BVCoefficient<T> {
    name: String,
    kind: Kind<T>,
    pub convention: JumpConvention,
}

impl<T: Real> fmt::Debug for BVCoefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BVCoefficient")
            .field("name", &self.name)
            .field("m", &self.input_dim())
            .field("d", &self.output_dim())
            .field("convention", &self.convention)
            .finish()
    }
}

impl<T: Real> BVCoefficient<T> {
    /// Continuous piecewise-linear `φ` with `φ(knots[0]) = value_at_first`.
    pub fn piecewise_linear(knots: Vec<T>, slopes: Vec<T>, value_at_first: T) -> Result<Self> {
        let jumps = vec![T::zero(); knots.len()];
        Self::piecewise_with_jumps(knots, slopes, value_at_first, jumps, "piecewise_linear")
    }

    /// Piecewise-linear `φ` with value jumps `jumps[l]` at `knots[l]`.
    pub fn piecewise_with_jumps(
        knots: Vec<T>,
        slopes: Vec<T>,
        value_at_first: T,
        jumps: Vec<T>,
        name: &str,
    ) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Parse("piecewise_linear needs at least one knot".into()));
        }
        if slopes.len() != knots.len() + 1 || jumps.len() != knots.len() {
            return Err(Error::Parse(format!(
                "{} knots need {} slopes, got {}",
                knots.len(),
                knots.len() + 1,
                slopes.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("knots must be strictly increasing".into()));
        }
        let mut left_vals = Vec::with_capacity(knots.len());
        let mut right_vals = Vec::with_capacity(knots.len());
        let mut v = value_at_first;
        for l in 0..knots.len() {
            if l > 0 {
                v = right_vals[l - 1] + slopes[l] * (knots[l] - knots[l - 1]);
            }
            left_vals.push(v);
            right_vals.push(v + jumps[l]);
        }
        Ok(BVCoefficient {
            name: name.to_string(),
            kind: Kind::Piecewise {
                knots,
                slopes,
                left_vals,
                right_vals,
            },
            convention: JumpConvention::Midpoint,
        })
    }

    /// Smooth scalar coefficient from `φ`, `φ'`, the Hölder exponent of `φ'`
    /// and a global Lipschitz constant (`inf` if none).
    pub fn smooth(
        name: &str,
        f: impl Fn(T) -> T + Send + Sync + 'static,
        df: impl Fn(T) -> T + Send + Sync + 'static,
        lambda: T,
        lip: T,
    ) -> Result<Self> {
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(Error::param("lambda", lambda.as_f64(), "(0, 1]"));
        }
        Ok(BVCoefficient {
            name: name.to_string(),
            kind: Kind::Smooth {
                f: Arc::new(f),
                df: Arc::new(df),
                lambda,
                lip,
            },
            convention: JumpConvention::Midpoint,
        })
    }

    /// General `R^m -> R^d` coefficient. `measures[i * d + j]` dominates
    /// `‖D ∂_i φ_j‖`; pass `lambda` when the partials are `λ`-Hölder.
    #[allow(clippy::too_many_arguments)]
    pub fn general(
        name: &str,
        m: usize,
        d: usize,
        value: impl Fn(&[T], usize) -> T + Send + Sync + 'static,
        partial: impl Fn(&[T], usize, usize) -> T + Send + Sync + 'static,
        lip: Vec<T>,
        measures: Vec<RadonMeasure<T>>,
        lambda: Option<T>,
    ) -> Result<Self> {
        if m == 0 || d == 0 || lip.len() != d {
            return Err(Error::Dimension("general coefficient needs m, d > 0 and d Lipschitz constants".into()));
        }
        if measures.len() != m * d || measures.iter().any(|mu| mu.dim() != m) {
            return Err(Error::Dimension(format!("need {} measures on R^{m}", m * d)));
        }
        Ok(BVCoefficient {
            name: name.to_string(),
            kind: Kind::General {
                m,
                d,
                value: Arc::new(value),
                partial: Arc::new(partial),
                lip,
                measures,
                lambda,
            },
            convention: JumpConvention::Midpoint,
        })
    }

    /// Identity map on `R^m` (all partials constant).
    pub fn identity(m: usize) -> Self {
        if m == 1 {
            return Self::smooth("identity", |x| x, |_| T::one(), T::one(), T::one()).unwrap();
        }
        Self::general(
            "identity",
            m,
            m,
            |x, j| x[j],
            |_, i, j| if i == j { T::one() } else { T::zero() },
            vec![T::one(); m],
            (0..m * m).map(|_| RadonMeasure::zero(m)).collect(),
            Some(T::one()),
        )
        .unwrap()
    }

    pub fn with_convention(mut self, c: JumpConvention) -> Self {
        self.convention = c;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            Kind::General { m, .. } => *m,
            _ => 1,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            Kind::General { d, .. } => *d,
            _ => 1,
        }
    }

    /// `φ_j(x)`.
    pub fn value(&self, x: &[T], j: usize) -> T {
        match &self.kind {
            Kind::Piecewise {
                knots,
                slopes,
                left_vals,
                right_vals,
            } => {
                let x = x[0];
                let l = knots.partition_point(|&k| k < x);
                if l < knots.len() && knots[l] == x {
                    let w = self.convention.weight::<T>();
                    return left_vals[l] + w * (right_vals[l] - left_vals[l]);
                }
                if l == 0 {
                    left_vals[0] - slopes[0] * (knots[0] - x)
                } else {
                    right_vals[l - 1] + slopes[l] * (x - knots[l - 1])
                }
            }
            Kind::Smooth { f, .. } => f(x[0]),
            Kind::General { value, .. } => value(x, j),
        }
    }

    /// `∂_i φ_j(x)`, using the jump convention at kinks.
    pub fn partial(&self, x: &[T], i: usize, j: usize) -> T {
        match &self.kind {
            Kind::Piecewise { knots, slopes, .. } => {
                let x = x[0];
                let l = knots.partition_point(|&k| k < x);
                if l < knots.len() && knots[l] == x {
                    let w = self.convention.weight::<T>();
                    return slopes[l] + w * (slopes[l + 1] - slopes[l]);
                }
                slopes[l]
            }
            Kind::Smooth { df, .. } => df(x[0]),
            Kind::General { partial, .. } => partial(x, i, j),
        }
    }

    /// Lipschitz constant of `φ_j` (`inf` when `φ_j` jumps).
    pub fn lip(&self, j: usize) -> T {
        match &self.kind {
            Kind::Piecewise {
                slopes,
                left_vals,
                right_vals,
                ..
            } => {
                if left_vals.iter().zip(right_vals).any(|(a, b)| a != b) {
                    T::infinity()
                } else {
                    slopes.iter().fold(T::zero(), |m, s| m.max(s.abs()))
                }
            }
            Kind::Smooth { lip, .. } => *lip,
            Kind::General { lip, .. } => lip[j],
        }
    }

    /// Hölder exponent of the partials, if they are continuous.
    pub fn partial_holder_exponent(&self) -> Option<T> {
        match &self.kind {
            Kind::Piecewise { .. } => None,
            Kind::Smooth { lambda, .. } => Some(*lambda),
            Kind::General { lambda, .. } => *lambda,
        }
    }

    /// `‖D ∂_i φ_j‖`.
    pub fn partial_gradient_measure(&self, i: usize, j: usize) -> RadonMeasure<T> {
        match &self.kind {
            Kind::Piecewise { knots, slopes, .. } => RadonMeasure::new(
                1,
                knots
                    .iter()
                    .enumerate()
                    .map(|(l, &k)| (vec![k], (slopes[l + 1] - slopes[l]).abs()))
                    .collect(),
                Vec::new(),
            )
            .expect("nonnegative"),
            Kind::Smooth { .. } => RadonMeasure::zero(1),
            Kind::General { d, measures, .. } => measures[i * d + j].clone(),
        }
    }

    /// `‖D φ_j‖` for one-dimensional coefficients (slopes as density, value
    /// jumps as atoms) over the window `[lo, hi]`.
    pub fn value_gradient_measure(&self, lo: T, hi: T) -> Option<RadonMeasure<T>> {
        match &self.kind {
            Kind::Piecewise {
                knots,
                slopes,
                left_vals,
                right_vals,
            } => {
                let atoms = knots
                    .iter()
                    .enumerate()
                    .map(|(l, &k)| (vec![k], (right_vals[l] - left_vals[l]).abs()))
                    .collect();
                let mut edges = vec![lo];
                edges.extend(knots.iter().copied().filter(|&k| k > lo && k < hi));
                edges.push(hi);
                let mut boxes = Vec::new();
                for w in edges.windows(2) {
                    let mid = (w[0] + w[1]) * T::lit(0.5);
                    let l = knots.partition_point(|&k| k < mid);
                    if w[1] > w[0] {
                        boxes.push((vec![(w[0], w[1])], slopes[l].abs()));
                    }
                }
                RadonMeasure::new(1, atoms, boxes).ok()
            }
            _ => None,
        }
    }

    /// Whether every partial is piecewise constant with finitely many kinks
    /// (one-dimensional piecewise-linear coefficients).
    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self.kind, Kind::Piecewise { .. })
    }

    /// Levels in `R` at which the partial of a scalar coefficient jumps.
    pub fn kink_levels(&self) -> Vec<T> {
        match &self.kind {
            Kind::Piecewise { knots, .. } => knots.clone(),
            _ => Vec::new(),
        }
    }

    /// `[[∂_i φ_j]]_λ` over the box `range` (node-pair estimate on a
    /// 257-point grid per axis for `m = 1`, random pairs otherwise).
    /// Infinite when the partial jumps inside the range.
    pub fn partial_holder_seminorm(&self, lambda: T, range: &[(T, T)], i: usize, j: usize) -> T {
        match &self.kind {
            Kind::Piecewise { knots, slopes, .. } => {
                let (lo, hi) = range[0];
                for (l, &k) in knots.iter().enumerate() {
                    if k >= lo && k <= hi && slopes[l] != slopes[l + 1] {
                        return T::infinity();
                    }
                }
                T::zero()
            }
            Kind::Smooth { df, .. } => {
                let (lo, hi) = range[0];
                if !(hi > lo) {
                    return T::zero();
                }
                let n = 257;
                let xs: Vec<T> = (0..n)
                    .map(|k| lo + (hi - lo) * T::from_usize_lossy(k) / T::from_usize_lossy(n - 1))
                    .collect();
                let vals: Vec<T> = xs.iter().map(|&x| df(x)).collect();
                let mut best = T::zero();
                for a in 0..n {
                    for b in a + 1..n {
                        let q = (vals[b] - vals[a]).abs() / (xs[b] - xs[a]).powf(lambda);
                        best = best.max(q);
                    }
                }
                best
            }
            Kind::General { m, partial, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                let mut best = T::zero();
                let mut x = vec![T::zero(); *m];
                let mut y = vec![T::zero(); *m];
                for _ in 0..4000 {
                    for k in 0..*m {
                        let (lo, hi) = range[k];
                        x[k] = lo + (hi - lo) * T::lit(rng.random::<f64>());
                        y[k] = lo + (hi - lo) * T::lit(rng.random::<f64>());
                    }
                    let d = dist(&x, &y);
                    if d > T::zero() {
                        let q = (partial(&y, i, j) - partial(&x, i, j)).abs() / d.powf(lambda);
                        best = best.max(q);
                    }
                }
                best
            }
        }
    }

    /// `φ_j(X)` sampled at the path nodes.
    pub fn compose(&self, x: &SampledPath<T>, j: usize) -> Result<SampledPath<T>> {
        self.check_input(x)?;
        x.map_points(1, |p| vec![self.value(p, j)])
    }

    pub(crate) fn check_input(&self, x: &SampledPath<T>) -> Result<()> {
        if x.dim() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "coefficient `{}` takes R^{} input, path has dimension {}",
                self.name,
                self.input_dim(),
                x.dim()
            )));
        }
        Ok(())
    }

    /// Times where the scalar path `X` crosses kink levels of `φ`, inside
    /// each cell. Returns `(cell, time)` pairs in increasing time.
    pub(crate) fn kink_crossings(&self, x: &SampledPath<T>) -> Vec<(usize, T)> {
        let levels = self.kink_levels();
        if levels.is_empty() || x.dim() != 1 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for k in 0..x.cells() {
            let (v0, v1) = (x.value(k, 0), x.value(k + 1, 0));
            if v0 == v1 {
                continue;
            }
            let mut here: Vec<T> = levels
                .iter()
                .filter_map(|&z| {
                    let lam = (z - v0) / (v1 - v0);
                    (lam > T::zero() && lam < T::one()).then(|| x.time(k) + lam * (x.time(k + 1) - x.time(k)))
                })
                .collect();
            here.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.extend(here.into_iter().map(|t| (k, t)));
        }
        out
    }

    /// Largest observed `|φ_j(x) - φ_j(y)| / |x - y|` over random pairs in
    /// the box `range`.
    pub fn lipschitz_spot_check(&self, j: usize, range: &[(T, T)], pairs: usize, seed: u64) -> T {
        let m = self.input_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = T::zero();
        let mut x = vec![T::zero(); m];
        let mut y = vec![T::zero(); m];
        for _ in 0..pairs {
            for k in 0..m {
                let (lo, hi) = range[k.min(range.len() - 1)];
                x[k] = lo + (hi - lo) * T::lit(rng.random::<f64>());
                y[k] = lo + (hi - lo) * T::lit(rng.random::<f64>());
            }
            let d = dist(&x, &y);
            if d > T::zero() {
                best = best.max((self.value(&y, j) - self.value(&x, j)).abs() / d);
            }
        }
        best
    }
}

/// Names accepted by [`coefficient_library`].
pub const LIBRARY_NAMES: &[&str] = &[
    "abs",
    "ramp",
    "clip",
    "piecewise_linear",
    "sign",
    "square",
    "cube",
    "identity",
    "sin",
    "cos",
    "exp",
    "tanh",
];

/// Named coefficients. Parameters: `clip` takes `(a, b)`; `piecewise_linear`
/// takes knots followed by slopes (`K` knots, `K + 1` slopes, `φ(knot_0) = 0`);
/// smooth entries take an optional Hölder exponent `λ` of `φ'` (default 1).
pub fn coefficient_library<T: Real>(name: &str, params: &[f64]) -> Result<BVCoefficient<T>> {
    let p = |k: usize| params.get(k).copied().map(T::lit);
    let lam = p(0).unwrap_or(T::one());
    let z = T::zero();
    let one = T::one();
    let c = match name {
        "abs" => BVCoefficient::piecewise_linear(vec![z], vec![-one, one], z)?,
        "ramp" => BVCoefficient::piecewise_linear(vec![z], vec![z, one], z)?,
        "clip" => {
            let (a, b) = match (p(0), p(1)) {
                (Some(a), Some(b)) => (a, b),
                _ => (-one, one),
            };
            if !(b > a) {
                return Err(Error::Parse("clip(a, b) needs a < b".into()));
            }
            BVCoefficient::piecewise_linear(vec![a, b], vec![z, one, z], a)?
        }
        "piecewise_linear" => {
            if params.len() < 3 || params.len() % 2 == 0 {
                return Err(Error::Parse("piecewise_linear needs K knots then K+1 slopes".into()));
            }
            let k = (params.len() - 1) / 2;
            let knots = params[..k].iter().map(|&v| T::lit(v)).collect();
            let slopes = params[k..].iter().map(|&v| T::lit(v)).collect();
            BVCoefficient::piecewise_linear(knots, slopes, z)?
        }
        "sign" => BVCoefficient::piecewise_with_jumps(vec![z], vec![z, z], -one, vec![T::lit(2.0)], "sign")?,
        "square" => BVCoefficient::smooth("square", |x| x * x, |x| T::lit(2.0) * x, lam, T::infinity())?,
        "cube" => BVCoefficient::smooth("cube", |x| x * x * x, |x| T::lit(3.0) * x * x, lam, T::infinity())?,
        "identity" => BVCoefficient::smooth("identity", |x| x, |_| T::one(), lam, one)?,
        "sin" => BVCoefficient::smooth("sin", |x: T| x.sin(), |x: T| x.cos(), lam, one)?,
        "cos" => BVCoefficient::smooth("cos", |x: T| x.cos(), |x: T| -x.sin(), lam, one)?,
        "exp" => BVCoefficient::smooth("exp", |x: T| x.exp(), |x: T| x.exp(), lam, T::infinity())?,
        "tanh" => BVCoefficient::smooth(
            "tanh",
            |x: T| x.tanh(),
            |x: T| {
                let t = x.tanh();
                T::one() - t * t
            },
            lam,
            one,
        )?,
        other => return Err(Error::UnknownCoefficient(other.to_string())),
    };
    Ok(c)
}

/// Outcome of [`check_domination`].
#[derive(Debug, Clone, PartialEq)]
pub struct Domination<T> {
    pub holds: bool,
    /// A point where the dominated measure exceeds the dominating one.
    pub witness: Option<Vec<T>>,
}

/// Whether `psi ≤ mu` setwise, comparing atoms pointwise and densities on
/// the common refinement of the box partitions.
pub fn check_domination<T: Real>(psi: &RadonMeasure<T>, mu: &RadonMeasure<T>) -> Result<Domination<T>> {
    if psi.dim() != mu.dim() {
        return Err(Error::Dimension("measures live in different dimensions".into()));
    }
    let fail = |w: Vec<T>| Ok(Domination {
        holds: false,
        witness: Some(w),
    });
    for (z, w) in psi.atoms() {
        let cap: T = mu.atoms().iter().filter(|(y, _)| y == z).map(|(_, v)| *v).sum();
        if *w > cap * (T::one() + T::lit(1e-12)) {
            return fail(z.clone());
        }
    }
    let dim = psi.dim();
    let mut cuts: Vec<Vec<T>> = vec![Vec::new(); dim];
    for (b, _) in psi.boxes().iter().chain(mu.boxes()) {
        for i in 0..dim {
            cuts[i].push(b[i].0);
            cuts[i].push(b[i].1);
        }
    }
    for c in cuts.iter_mut() {
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c.dedup();
    }
    if psi.boxes().is_empty() {
        return Ok(Domination {
            holds: true,
            witness: None,
        });
    }
    let density_at = |m: &RadonMeasure<T>, x: &[T]| -> T {
        m.boxes()
            .iter()
            .filter(|(b, _)| b.iter().zip(x).all(|((lo, hi), v)| v > lo && v < hi))
            .map(|(_, v)| *v)
            .sum()
    };
    let counts: Vec<usize> = cuts.iter().map(|c| c.len().saturating_sub(1)).collect();
    let total: usize = counts.iter().product();
    let mut mid = vec![T::zero(); dim];
    for idx in 0..total {
        let mut rem = idx;
        for i in 0..dim {
            let k = rem % counts[i];
            rem /= counts[i];
            mid[i] = (cuts[i][k] + cuts[i][k + 1]) * T::lit(0.5);
        }
        let a = density_at(psi, &mid);
        if a > T::zero() && a > density_at(mu, &mid) * (T::one() + T::lit(1e-12)) {
            return fail(mid.clone());
        }
    }
    Ok(Domination {
        holds: true,
        witness: None,
    })
}

/// Parsed `key=value` specification of a measure or coefficient.
///
/// Recognised keys: `name`, `params` (comma separated), `dim`,
/// `atoms=x:w;...` (points comma separated), `density=lo..hi:value;...`
/// (boxes as `lo1..hi1,lo2..hi2`), `convention`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecFile {
    pub name: Option<String>,
    pub params: Vec<f64>,
    pub dim: Option<usize>,
    pub atoms: Vec<(Vec<f64>, f64)>,
    pub density: Vec<(Vec<(f64, f64)>, f64)>,
    pub convention: Option<String>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SpecFile::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
            let value = value.trim();
            match key.trim() {
                "name" => spec.name = Some(value.to_string()),
                "params" => spec.params = parse_list(value)?,
                "dim" => {
                    spec.dim = Some(
                        value
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad dim `{value}`")))?,
                    )
                }
                "atoms" => {
                    for item in value.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                        let (pt, w) = item
                            .rsplit_once(':')
                            .ok_or_else(|| Error::Parse(format!("atom `{item}` needs point:weight")))?;
                        spec.atoms.push((parse_list(pt)?, parse_num(w)?));
                    }
                }
                "density" => {
                    for item in value.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                        let (bx, v) = item
                            .rsplit_once(':')
                            .ok_or_else(|| Error::Parse(format!("density `{item}` needs box:value")))?;
                        let mut bounds = Vec::new();
                        for side in bx.split(',') {
                            let (lo, hi) = side
                                .split_once("..")
                                .ok_or_else(|| Error::Parse(format!("box side `{side}` needs lo..hi")))?;
                            bounds.push((parse_num(lo)?, parse_num(hi)?));
                        }
                        spec.density.push((bounds, parse_num(v)?));
                    }
                }
                "convention" => spec.convention = Some(value.to_string()),
                other => return Err(Error::Parse(format!("unknown key `{other}`"))),
            }
        }
        Ok(spec)
    }

    /// The measure described by `atoms` and `density`.
    pub fn measure<T: Real>(&self) -> Result<RadonMeasure<T>> {
        let dim = self
            .dim
            .or_else(|| self.atoms.first().map(|a| a.0.len()))
            .or_else(|| self.density.first().map(|d| d.0.len()))
            .unwrap_or(1);
        RadonMeasure::new(
            dim,
            self.atoms
                .iter()
                .map(|(z, w)| (z.iter().map(|&v| T::lit(v)).collect(), T::lit(*w)))
                .collect(),
            self.density
                .iter()
                .map(|(b, v)| (b.iter().map(|&(lo, hi)| (T::lit(lo), T::lit(hi))).collect(), T::lit(*v)))
                .collect(),
        )
    }

    /// The library coefficient named by `name`/`params`.
    pub fn coefficient<T: Real>(&self) -> Result<BVCoefficient<T>> {
        let name = self
            .name
            .as_deref()
            .ok_or_else(|| Error::Parse("coefficient spec needs `name=`".into()))?;
        let mut c = coefficient_library(name, &self.params)?;
        if let Some(conv) = &self.convention {
            c = c.with_convention(JumpConvention::parse(conv)?);
        }
        Ok(c)
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: `{}`", s.trim())))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(parse_num)
        .collect()
}

/// Parse `NAME` or `NAME:p1,p2,...` into a library coefficient.
pub fn parse_coefficient<T: Real>(s: &str) -> Result<BVCoefficient<T>> {
    let (name, params) = match s.split_once(':') {
        Some((n, p)) => (n.trim(), parse_list(p)?),
        None => (s.trim(), Vec::new()),
    };
    coefficient_library(name, &params)
}
