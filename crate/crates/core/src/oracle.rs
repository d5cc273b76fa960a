//! Reference sums on a ladder of coarsenings of the sampled grid, with
//! Richardson extrapolation. Left-point Riemann–Stieltjes sums serve the
//! Young regime; compensated sums that add `∂_iφ_j(X) (X⊗Y)^{ij}` on each
//! step serve the rough regime.

use serde::Serialize;

use crate::bv::BVCoefficient;
use crate::error::{Error, Result};
use crate::lift::MultiplicativeFunctional;
use crate::path::SampledPath;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    RiemannStieltjes,
    MidpointCompensated,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub kind: OracleKind,
    /// Cells per rung, strictly increasing.
    pub ladder: Vec<usize>,
    pub values: Vec<f64>,
    pub extrapolated: f64,
    /// Least-squares slope of `-log|v_{r+1} - v_r|` against `log n_r`,
    /// `None` when the differences do not decrease.
    pub observed_order: Option<f64>,
    /// RMS residual of that fit.
    pub fit_residual: Option<f64>,
}

impl OracleResult {
    pub fn finest(&self) -> f64 {
        *self.values.last().expect("ladder is non-empty")
    }
}

/// Rungs `cells / 2^k` for `k = levels-1, …, 0`.
pub fn dyadic_ladder(cells: usize, levels: usize) -> Vec<usize> {
    (0..levels)
        .rev()
        .map(|k| cells >> k)
        .filter(|&c| c >= 1)
        .collect()
}

fn check_ladder(cells: usize, ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::GridMismatch("empty grid ladder".into()));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("grid ladder must be strictly refining".into()));
    }
    for &n in ladder {
        if n == 0 || cells % n != 0 {
            return Err(Error::GridMismatch(format!("rung with {n} cells does not divide the {cells}-cell grid")));
        }
    }
    Ok(())
}

fn extrapolate(ladder: &[usize], values: &[f64]) -> (f64, Option<f64>, Option<f64>) {
    let finest = *values.last().expect("non-empty");
    if values.len() < 3 {
        return (finest, None, None);
    }
    let pts: Vec<(f64, f64)> = values
        .windows(2)
        .zip(ladder.windows(2))
        .filter_map(|(v, n)| {
            let d = (v[1] - v[0]).abs();
            (d > 0.0).then(|| ((n[0] as f64).ln(), -d.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return (finest, None, None);
    }
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let p = sxy / sxx;
    let resid = (pts.iter().map(|q| (q.1 - my - p * (q.0 - mx)).powi(2)).sum::<f64>() / k).sqrt();
    if !(p.is_finite() && p > 0.1) {
        return (finest, None, Some(resid));
    }
    let l = values.len();
    let rho = ladder[l - 1] as f64 / ladder[l - 2] as f64;
    let extrap = finest + (finest - values[l - 2]) / (rho.powf(p) - 1.0);
    (extrap, Some(p), Some(resid))
}

fn finish(kind: OracleKind, ladder: &[usize], values: Vec<f64>) -> OracleResult {
    let (extrapolated, observed_order, fit_residual) = extrapolate(ladder, &values);
    OracleResult {
        kind,
        ladder: ladder.to_vec(),
        values,
        extrapolated,
        observed_order,
        fit_residual,
    }
}

/// `Σ_k Σ_j φ_j(X(t_k)) (Y^j(t_{k+1}) - Y^j(t_k))` on every rung.
pub fn riemann_stieltjes_oracle<T: Real>(
    x: &SampledPath<T>,
    y: &SampledPath<T>,
    phi: &BVCoefficient<T>,
    ladder: &[usize],
) -> Result<OracleResult> {
    if x.times() != y.times() {
        return Err(Error::GridMismatch("X and Y must share one grid".into()));
    }
    phi.check_input(x)?;
    if phi.output_dim() != y.dim() {
        return Err(Error::Dimension(format!("coefficient has {} outputs, Y has dimension {}", phi.output_dim(), y.dim())));
    }
    let cells = x.cells();
    check_ladder(cells, ladder)?;
    let values = ladder
        .iter()
        .map(|&n| {
            let step = cells / n;
            let mut acc = 0.0;
            for k in (0..cells).step_by(step) {
                let xk = x.point(k);
                for j in 0..y.dim() {
                    acc += phi.value(xk, j).as_f64() * (y.value(k + step, j) - y.value(k, j)).as_f64();
                }
            }
            acc
        })
        .collect();
    Ok(finish(OracleKind::RiemannStieltjes, ladder, values))
}

/// `Σ_k Σ_j [φ_j(X(t_k)) Y^j_{t_k,t_{k+1}} + Σ_i ∂_iφ_j(X(t_k)) (X⊗Y)^{ij}_{t_k,t_{k+1}}]`
/// on every rung, with the tensor of `mf` taken between rung nodes.
pub fn midpoint_compensated_oracle<T: Real>(
    mf: &MultiplicativeFunctional<T>,
    phi: &BVCoefficient<T>,
    ladder: &[usize],
) -> Result<OracleResult> {
    let (x, y) = (mf.x(), mf.y());
    phi.check_input(x)?;
    if phi.output_dim() != y.dim() {
        return Err(Error::Dimension(format!("coefficient has {} outputs, Y has dimension {}", phi.output_dim(), y.dim())));
    }
    let cells = x.cells();
    check_ladder(cells, ladder)?;
    let values = ladder
        .iter()
        .map(|&n| {
            let step = cells / n;
            let mut acc = 0.0;
            for k in (0..cells).step_by(step) {
                let xk = x.point(k);
                for j in 0..y.dim() {
                    acc += phi.value(xk, j).as_f64() * (y.value(k + step, j) - y.value(k, j)).as_f64();
                    for i in 0..x.dim() {
                        acc += phi.partial(xk, i, j).as_f64() * mf.node(k, k + step, i, j).as_f64();
                    }
                }
            }
            acc
        })
        .collect();
    Ok(finish(OracleKind::MidpointCompensated, ladder, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::coefficient_library;
    use crate::lift::{lift_geometric_1d, lift_smooth};
    use crate::path::uniform_grid;
    use proptest::prelude::*;

    fn lin(n: usize, f: impl Fn(f64) -> f64) -> SampledPath<f64> {
        SampledPath::from_fn(uniform_grid(0.0, 1.0, n), f).unwrap()
    }

    #[test]
    fn identity_sums_extrapolate_to_one_half() {
        let x = lin(1024, |t| t);
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        let r = riemann_stieltjes_oracle(&x, &x, &id, &dyadic_ladder(1024, 6)).unwrap();
        for (v, n) in r.values.iter().zip(&r.ladder) {
            assert!((v - (0.5 - 0.5 / *n as f64)).abs() < 1e-12);
        }
        assert!((r.extrapolated - 0.5).abs() < 1e-10);
        assert!((r.observed_order.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_coefficient_is_exact_on_every_rung() {
        let x = lin(64, |t| (3.0 * t).sin());
        let c = crate::bv::BVCoefficient::<f64>::smooth("c", |_| 2.5, |_| 0.0, 1.0, 0.0).unwrap();
        let r = riemann_stieltjes_oracle(&x, &x, &c, &[4, 16, 64]).unwrap();
        for v in &r.values {
            assert!((v - 2.5 * 3f64.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn compensated_sums_are_exact_for_square_and_geometric_lift() {
        // the compensated sum of x² misses Σ ΔX³/3 only
        let x = lin(256, |t| (5.0 * t).cos());
        let mf = lift_geometric_1d(&x).unwrap();
        let sq = coefficient_library::<f64>("square", &[]).unwrap();
        let r = midpoint_compensated_oracle(&mf, &sq, &dyadic_ladder(256, 5)).unwrap();
        let exact = ((5f64).cos().powi(3) - 1.0) / 3.0;
        assert!((r.extrapolated - exact).abs() < 1e-6, "{r:?}");
        assert!(r.observed_order.unwrap() > 1.5);
    }

    #[test]
    fn compensated_matches_plain_sums_for_linear_coefficient() {
        let x = lin(512, |t| t * t);
        let mf = lift_smooth(&x, &x).unwrap();
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        let a = midpoint_compensated_oracle(&mf, &id, &dyadic_ladder(512, 5)).unwrap();
        let b = riemann_stieltjes_oracle(&x, &x, &id, &dyadic_ladder(512, 5)).unwrap();
        assert!((a.extrapolated - b.extrapolated).abs() < 1e-4);
        assert!((a.finest() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ladder_validation() {
        let x = lin(12, |t| t);
        let id = coefficient_library::<f64>("identity", &[]).unwrap();
        assert!(riemann_stieltjes_oracle(&x, &x, &id, &[4, 3]).is_err());
        assert!(riemann_stieltjes_oracle(&x, &x, &id, &[5]).is_err());
        assert!(riemann_stieltjes_oracle(&x, &x, &id, &[3, 6, 12]).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn sums_are_linear_in_the_integrator(c in -3.0f64..3.0) {
            let x = lin(32, |t| (2.0 * t).sin());
            let y = lin(32, |t| t * t);
            let y2 = lin(32, move |t| c * t * t);
            let sq = coefficient_library::<f64>("square", &[]).unwrap();
            let a = riemann_stieltjes_oracle(&x, &y, &sq, &[8, 32]).unwrap();
            let b = riemann_stieltjes_oracle(&x, &y2, &sq, &[8, 32]).unwrap();
            prop_assert!((b.finest() - c * a.finest()).abs() < 1e-12);
        }
    }
}
