//! Built-in verification suites with closed-form targets.

use anyhow::Result;
use serde::Serialize;
use serde_json::json;

use roughint::bv::{coefficient_library, RadonMeasure};
use roughint::gaussian::{mc_expected_variability, normal_abs_moment, Family, GaussianModel, GaussianSampler};
use roughint::lift::{lift_geometric_1d, lift_smooth, validate_mf};
use roughint::potentials::{segment_bound, segment_functional, variability_norm, SegmentOptions};
use roughint::rough::{check_rough_admissible_smooth, rough_integrate};
use roughint::young::{composition_integral, zahle_integral};
use roughint::{uniform_grid, Path64};

use crate::args::Suite;
use crate::output::Outcome;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct Recorder {
    suite: &'static str,
    checks: Vec<CheckRecord>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Self { suite, checks: Vec::new() }
    }

    /// Absolute-deviation check `|value - target| <= tolerance`.
    fn close(&mut self, name: impl Into<String>, value: f64, target: f64, tolerance: f64) {
        self.checks.push(CheckRecord {
            suite: self.suite,
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        });
    }

    /// One-sided check `value <= bound`.
    fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.checks.push(CheckRecord {
            suite: self.suite,
            name: name.into(),
            value,
            target: bound,
            tolerance: 0.0,
            pass: value <= bound,
        });
    }
}

fn fbm(h: f64, cells: usize, seed: u64) -> Result<Path64> {
    let model = GaussianModel::uniform(Family::fbm(h)?, 1, 0.0, 1.0, cells, seed)?;
    Ok(GaussianSampler::new(model)?.sample(0)?)
}

fn smooth_suite() -> Result<Vec<CheckRecord>> {
    let mut r = Recorder::new("smooth");
    let t = uniform_grid(0.0, 1.0, 1 << 10);
    let x = Path64::from_fn(t.clone(), |t| t)?;
    let y2 = Path64::from_fn(t.clone(), |t| t * t)?;
    r.close("int t dt", zahle_integral(&x, &x, 0.5)?.value, 0.5, 1e-4);
    r.close("int t d(t^2)", zahle_integral(&x, &y2, 0.5)?.value, 2.0 / 3.0, 1e-4);
    let s = Path64::from_fn(t, |t| (3.0 * t).sin())?;
    let cos = coefficient_library::<f64>("cos", &[])?;
    let end = s.value(s.cells(), 0);
    r.close("int cos(X) dX", composition_integral(&s, &cos, &s, 0.4)?.value, end.sin(), 1e-4);
    Ok(r.checks)
}

fn lift_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut r = Recorder::new("lift");
    let x = fbm(0.4, 1 << 10, seed)?;
    let v = validate_mf(&lift_geometric_1d(&x)?, 0.38, 1000, seed)?;
    r.at_most("Chen defect, geometric 1d lift", v.max_chen_defect, 1e-10);
    let t = uniform_grid(0.0, 1.0, 256);
    let xs = Path64::from_fn(t.clone(), |t| (3.0 * t).sin())?;
    let ys = Path64::from_fn(t, |t| t * t - t)?;
    let v = validate_mf(&lift_smooth(&xs, &ys)?, 0.45, 1000, seed)?;
    r.at_most("Chen defect, smooth lift", v.max_chen_defect, 1e-10);
    Ok(r.checks)
}

fn rough_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut r = Recorder::new("rough");
    let x = fbm(0.4, 1 << 11, seed)?;
    let b1 = x.value(x.cells(), 0);
    let mf = lift_geometric_1d(&x)?.with_beta(0.38)?;
    let alpha = check_rough_admissible_smooth(0.38, 0.99)?
        .map(|w| w.midpoint())
        .unwrap_or(0.65);
    let id = coefficient_library::<f64>("identity", &[])?;
    let sq = coefficient_library::<f64>("square", &[])?;
    let v = rough_integrate(&mf, &id, alpha)?.value;
    r.close("int B dB = B(1)^2/2", v, b1 * b1 / 2.0, 2e-2 * (b1 * b1 / 2.0).abs().max(1e-3));
    let v = rough_integrate(&mf, &sq, alpha)?.value;
    let target = b1.powi(3) / 3.0;
    r.close("int B^2 dB = B(1)^3/3", v, target, 2e-2 * target.abs().max(1e-3));
    Ok(r.checks)
}

fn potentials_suite() -> Result<Vec<CheckRecord>> {
    let mut r = Recorder::new("potentials");
    let t = uniform_grid(0.0, 1.0, 1 << 10);
    let x = Path64::from_fn(t, |t| t)?;
    let nu = RadonMeasure::dirac(vec![0.5], 1.0)?;
    // ∫_0^1 |t - 1/2|^{-s} dt = 2 (1/2)^{1-s} / (1 - s)
    let s = 0.5;
    let exact = 2.0 * 0.5f64.powf(1.0 - s) / (1.0 - s);
    r.close("variability of t against delta_1/2", variability_norm(&x, &nu, s, 1.0)?.norm, exact, 1e-6 * exact);
    let eps = 0.1;
    let seg = segment_functional(&x, &nu, 0.8, eps, &SegmentOptions::default())?;
    r.at_most("segment functional below its bound", seg.value, segment_bound(&x, &nu, 0.8, eps)?);
    Ok(r.checks)
}

fn gaussian_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut r = Recorder::new("gaussian");
    let bm = GaussianModel::uniform(Family::Bm, 1, 0.0, 1.0, 1 << 8, seed)?;
    let d0 = RadonMeasure::dirac(vec![0.0], 1.0)?;
    let mc = mc_expected_variability(&bm, &d0, 0.5, 1.0, 2000)?;
    // E ∫_0^1 |B_t|^{-1/2} dt = E|Z|^{-1/2} ∫_0^1 t^{-1/4} dt
    let target = 4.0 / 3.0 * normal_abs_moment(-0.5);
    r.close("E int |B|^-1/2 dt", mc.mean, target, 4.0 * mc.stderr);
    Ok(r.checks)
}

pub fn run(suite: Suite, seed: u64) -> Result<(Outcome, bool)> {
    let mut checks = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Smooth {
        checks.extend(smooth_suite()?);
    }
    if all || suite == Suite::Lift {
        checks.extend(lift_suite(seed)?);
    }
    if all || suite == Suite::Rough {
        checks.extend(rough_suite(seed)?);
    }
    if all || suite == Suite::Potentials {
        checks.extend(potentials_suite()?);
    }
    if all || suite == Suite::Gaussian {
        checks.extend(gaussian_suite(seed)?);
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    let ok = passed == checks.len();
    let mut out = Outcome::new("verify");
    out.metadata = json!({"suite": format!("{suite:?}").to_lowercase(), "seed": seed});
    out.result = json!({"passed": passed, "total": checks.len(), "all_passed": ok, "checks": checks});
    Ok((out, ok))
}
