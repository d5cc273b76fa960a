//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by
//! the individual checks, and exits non-zero only when a criterion fails
//! that is not on the known-deviation list below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use roughint::bv::{coefficient_library, RadonMeasure};
use roughint::frac_calc::{frac_derivative, FracDerivSpec};
use roughint::gaussian::{
    cmu_constant, covariance_check, mc_expected_variability, moment_bound_check, normal_abs_moment,
    relative_moment_grid, Family, GaussianModel, GaussianSampler,
};
use roughint::lift::{lift_dyadic, lift_geometric_1d, lift_smooth, two_beta_constant, validate_mf};
use roughint::oracle::midpoint_compensated_oracle;
use roughint::potentials::{
    riesz_potential, segment_bound, segment_functional, sup_occupation_functional, variability_norm, SegmentOptions,
};
use roughint::rough::{bound_bv, check_rough_admissible_bv, check_rough_admissible_smooth, rough_integrate};
use roughint::young::{alpha_sweep, composition_integral, zahle_integral};
use roughint::{uniform_grid, Real, SampledPath};

/// Criteria expected to fail, with the reason. Analysis in the decisions
/// ledger kept alongside the project.
const KNOWN_DEVIATIONS: &[(u8, &str)] = &[
    (
        3,
        "the discretisation error of the composed path is sum(dX^3)/6, a zero-mean random \
         term shrinking like n^-1.75, so the halving ratio is not stable for a fixed seed",
    ),
    (
        9,
        "the pinned target 1.64807 uses E|Z|^-1/2 = 1.23605; the Gaussian moment formula \
         gives 1.72008 and a target of 2.29344",
    ),
];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn fbm_path(h: f64, m: usize, cells: usize, seed: u64) -> SampledPath<f64> {
    let model = GaussianModel::uniform(Family::fbm(h).unwrap(), m, 0.0, 1.0, cells, seed).unwrap();
    GaussianSampler::new(model).unwrap().sample(0).unwrap()
}

const SEED: u64 = 42;
const N12: usize = 1 << 12;

fn criterion_1() -> Vec<Check> {
    let mut out = Vec::new();
    let times = uniform_grid(0.0, 1.0, N12);
    for mu in [1.0f64, 1.5, 2.0] {
        for alpha in [0.3f64, 0.5, 0.7] {
            let c = Real::gamma(mu + 1.0) / Real::gamma(mu + 1.0 - alpha);
            for (side, f, exact) in [
                (
                    "left",
                    Box::new(move |t: f64| t.powf(mu)) as Box<dyn Fn(f64) -> f64>,
                    Box::new(move |t: f64| c * t.powf(mu - alpha)) as Box<dyn Fn(f64) -> f64>,
                ),
                (
                    "right",
                    Box::new(move |t: f64| (1.0 - t).powf(mu)),
                    Box::new(move |t: f64| c * (1.0 - t).powf(mu - alpha)),
                ),
            ] {
                let p = SampledPath::from_fn(times.clone(), &*f).unwrap();
                let spec = if side == "left" {
                    FracDerivSpec::left(alpha).unwrap()
                } else {
                    FracDerivSpec::right(alpha).unwrap()
                };
                let d = frac_derivative(&p, &spec, None).unwrap();
                let (mut num, mut den, mut sup_rel) = (0.0, 0.0, 0.0f64);
                for k in 0..d.len() {
                    let e = exact(d.time(k));
                    let err = (d.value(k, 0) - e).abs();
                    num += err;
                    den += e.abs();
                    if e != 0.0 {
                        sup_rel = sup_rel.max(err / e.abs());
                    }
                }
                let far = if side == "left" { N12 } else { 0 };
                let end_rel = rel(d.value(far, 0), exact(d.time(far)));
                let l1_rel = num / den;
                out.push(check(
                    format!("{side} mu={mu} alpha={alpha}"),
                    l1_rel <= 1e-4 && end_rel <= 1e-4,
                    format!("L1 rel {l1_rel:.2e}, far-end rel {end_rel:.2e} (pointwise sup rel {sup_rel:.2e}, info)"),
                ));
            }
        }
    }
    out
}

fn criterion_2() -> Vec<Check> {
    let t = uniform_grid(0.0, 1.0, 1 << 10);
    let x = SampledPath::from_fn(t.clone(), |t| t).unwrap();
    let y2 = SampledPath::from_fn(t, |t| t * t).unwrap();
    let v1 = zahle_integral(&x, &x, 0.5).unwrap().value;
    let v2 = zahle_integral(&x, &y2, 0.5).unwrap().value;
    let alphas = [0.3, 0.4, 0.5, 0.6, 0.7];
    let sw1 = alpha_sweep(|a| Ok(zahle_integral(&x, &x, a)?.value), &alphas);
    let sw2 = alpha_sweep(|a| Ok(zahle_integral(&x, &y2, a)?.value), &alphas);
    vec![
        check("int t dt", (v1 - 0.5).abs() <= 1e-4, format!("{v1:.10} vs 0.5")),
        check("int t d(t^2)", (v2 - 2.0 / 3.0).abs() <= 1e-4, format!("{v2:.10} vs 2/3")),
        check(
            "alpha sweep, t dt",
            sw1.entries.iter().all(|e| e.value.is_some()) && sw1.max_deviation <= 1e-3,
            format!("max deviation {:.2e}", sw1.max_deviation),
        ),
        check(
            "alpha sweep, t d(t^2)",
            sw2.entries.iter().all(|e| e.value.is_some()) && sw2.max_deviation <= 1e-3,
            format!("max deviation {:.2e}", sw2.max_deviation),
        ),
    ]
}

fn criterion_3() -> Vec<Check> {
    let fine = fbm_path(0.75, 1, 2 * N12, SEED);
    let coarse = fine.subsample(2).unwrap();
    let sq = coefficient_library::<f64>("square", &[]).unwrap();
    let b1 = fine.value(fine.cells(), 0);
    let target = b1.powi(3) / 3.0;
    let alpha = 0.5;
    let v = composition_integral(&coarse, &sq, &coarse, alpha).unwrap().value;
    let vf = composition_integral(&fine, &sq, &fine, alpha).unwrap().value;
    let (d, df) = ((v - target).abs(), (vf - target).abs());
    let ratio = df / d;
    vec![
        check(
            "chain rule at 2^12",
            d <= 1e-2 * target.abs().max(1.0),
            format!("value {v:.10}, B(1)^3/3 = {target:.10}, deviation {d:.3e}"),
        ),
        check(
            "deviation halves on doubling (ratio in [0.375, 0.625])",
            (0.375..=0.625).contains(&ratio),
            format!("deviation at 2^13 {df:.3e}, ratio {ratio:.3}"),
        ),
    ]
}

fn criterion_4() -> Vec<Check> {
    let mut out = Vec::new();
    let t = uniform_grid(0.0, 1.0, 256);
    let xs = SampledPath::from_fn(t.clone(), |t: f64| (3.0 * t).sin()).unwrap();
    let ys = SampledPath::from_fn(t, |t| t * t - t).unwrap();
    let pair = fbm_path(0.4, 2, 1 << 10, SEED);
    let (bx, by) = (pair.component(0), pair.component(1));
    let beta = 0.38;
    let mfs = vec![
        ("smooth lift, smooth pair", lift_smooth(&xs, &ys).unwrap()),
        ("smooth lift, fBm pair", lift_smooth(&bx, &by).unwrap()),
        ("geometric 1d lift, fBm", lift_geometric_1d(&bx).unwrap()),
        ("dyadic lift level 8, fBm pair", lift_dyadic(&bx, &by, 8).unwrap()),
    ];
    for (name, mf) in &mfs {
        let v = validate_mf(mf, beta, 1000, SEED).unwrap();
        out.push(check(
            format!("Chen defect, {name}"),
            v.max_chen_defect <= 1e-10,
            format!("max defect {:.2e} over {} triples", v.max_chen_defect, v.triples),
        ));
    }
    let cs: Vec<f64> = (7..=10)
        .map(|l| two_beta_constant(&lift_dyadic(&bx, &by, l).unwrap(), beta))
        .collect();
    let ratios: Vec<f64> = cs.windows(2).map(|w| w[1] / w[0]).collect();
    out.push(check(
        "2beta constant stable over dyadic levels 7-10",
        ratios.iter().all(|r| (0.5..=2.0).contains(r)),
        format!("constants {cs:.4?}, ratios {ratios:.3?}"),
    ));
    out
}

/// Fine fBm path at 2^15 cells, its 2^12-cell subsample with the geometric
/// lift, and the geometric lift of the fine path for the oracle.
fn rough_setup() -> (
    roughint::MultiplicativeFunctional<f64>,
    roughint::MultiplicativeFunctional<f64>,
    f64,
    Vec<usize>,
) {
    let fine = fbm_path(0.4, 1, 8 * N12, SEED);
    let x = fine.subsample(8).unwrap();
    let b1 = x.value(x.cells(), 0);
    let mf = lift_geometric_1d(&x).unwrap().with_beta(0.38).unwrap();
    let mf_fine = lift_geometric_1d(&fine).unwrap().with_beta(0.38).unwrap();
    (mf, mf_fine, b1, vec![N12, 2 * N12, 4 * N12, 8 * N12])
}

fn criterion_5() -> Vec<Check> {
    let (mf, mf_fine, b1, ladder) = rough_setup();
    let sq = coefficient_library::<f64>("square", &[]).unwrap();
    let window = check_rough_admissible_smooth(0.38, 0.99).unwrap().expect("non-empty window");
    let r = rough_integrate(&mf, &sq, window.midpoint()).unwrap();
    let o = midpoint_compensated_oracle(&mf_fine, &sq, &ladder).unwrap();
    let target = b1.powi(3) / 3.0;
    vec![
        check(
            "chain rule",
            rel(r.value, target) <= 2e-2,
            format!("alpha {:.4}, value {:.8}, B(1)^3/3 = {target:.8}, rel {:.2e}", r.alpha_used, r.value, rel(r.value, target)),
        ),
        check(
            "agrees with compensated sums",
            rel(r.value, o.extrapolated) <= 2e-2,
            format!("oracle {:.8} (rungs {:?}), rel {:.2e}", o.extrapolated, o.ladder, rel(r.value, o.extrapolated)),
        ),
    ]
}

fn criterion_6() -> Vec<Check> {
    let (mf, mf_fine, _, ladder) = rough_setup();
    let abs = coefficient_library::<f64>("abs", &[]).unwrap();
    let s = 0.8;
    let adm = check_rough_admissible_bv(0.38, s).unwrap();
    let (lo, hi) = adm.eps_window.expect("non-empty epsilon window");
    let o = midpoint_compensated_oracle(&mf_fine, &abs, &ladder).unwrap();
    let mut out = Vec::new();
    let mut vals = Vec::new();
    for k in 1..=3 {
        let eps = lo + (hi - lo) * k as f64 / 4.0;
        let alpha = adm.alpha_for(eps).unwrap();
        let r = rough_integrate(&mf, &abs, alpha).unwrap();
        out.push(check(
            format!("eps {eps:.3} (alpha {alpha:.3}) vs compensated sums"),
            rel(r.value, o.extrapolated) <= 5e-2,
            format!("value {:.8}, oracle {:.8}, rel {:.2e}", r.value, o.extrapolated, rel(r.value, o.extrapolated)),
        ));
        vals.push(r.value);
    }
    let (mn, mx) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = (mx - mn) / mx.abs().max(mn.abs());
    out.push(check("mutual deviation across induced alpha", spread <= 3e-2, format!("relative spread {spread:.2e}")));
    let eps = adm.default_eps().unwrap();
    let b = bound_bv(&mf, &abs, s, eps, &SegmentOptions::default()).unwrap();
    let ratio = vals[1].abs() / b.rhs;
    out.push(check(
        "bound finite and dominates |value|",
        b.finite && ratio <= 1.0,
        format!("rhs {:.4e}, |value|/rhs {ratio:.2e}", b.rhs),
    ));
    out
}

fn criterion_7() -> Vec<Check> {
    let dirac0 = RadonMeasure::dirac(vec![0.0], 1.0).unwrap();
    let two0 = RadonMeasure::dirac(vec![0.0], 2.0).unwrap();
    let half = RadonMeasure::dirac(vec![0.5], 1.0).unwrap();
    let leb = RadonMeasure::uniform_box(vec![(0.0, 1.0)], 1.0).unwrap();
    let x = SampledPath::from_fn(uniform_grid(0.0, 1.0, 1 << 10), |t| t).unwrap();
    let zero = SampledPath::from_fn(uniform_grid(0.0, 1.0, 64), |_| 0.0).unwrap();
    let r1 = riesz_potential(&dirac0, 0.5, &[2.0]).unwrap();
    let r2: f64 = riesz_potential(&leb, 0.5, &[0.0]).unwrap();
    let v1: f64 = variability_norm(&x, &two0, 0.5, 1.0).unwrap().norm;
    let v2 = variability_norm(&x, &half, 0.5, 1.0).unwrap().norm;
    let at_one = RadonMeasure::dirac(vec![1.0], 1.0).unwrap();
    let seg: f64 = segment_functional(&zero, &at_one, 0.5, 0.5, &SegmentOptions::default()).unwrap().value;
    vec![
        check("riesz delta_0 at 2", (r1 - 0.5f64.sqrt()).abs() <= 1e-6, format!("{r1:.10}")),
        check("riesz Lebesgue at 0", (r2 - 2.0).abs() <= 1e-6, format!("{r2:.10}")),
        check("variability 2 delta_0 along t", (v1 - 4.0).abs() <= 1e-6, format!("{v1:.10}")),
        check("variability delta_0.5 along t", (v2 - 8f64.sqrt()).abs() <= 1e-6, format!("{v2:.10}")),
        check("segment functional 16/9", (seg - 16.0 / 9.0).abs() <= 1e-3, format!("{seg:.8}")),
    ]
}

fn criterion_8() -> Vec<Check> {
    let s = 0.8;
    let eps = check_rough_admissible_bv(0.38, s).unwrap().default_eps().unwrap();
    // ψ = sign, ‖Dψ‖ = 2δ_0
    let sign_measure = RadonMeasure::dirac(vec![0.0], 2.0).unwrap();
    let mut out = Vec::new();
    for seed in 0..5u64 {
        let x = fbm_path(0.4, 1, 1 << 10, seed);
        let occ = sup_occupation_functional(&x, s).unwrap().value;
        let occ_fine = sup_occupation_functional(&x.refine(2), s).unwrap().value;
        let stab = rel(occ_fine, occ);
        let seg = segment_functional(&x, &sign_measure, s, eps, &SegmentOptions::default()).unwrap();
        let bound = segment_bound(&x, &sign_measure, s, eps).unwrap();
        let var = variability_norm(&x, &sign_measure, s, 1.0).unwrap();
        out.push(check(
            format!("seed {seed}"),
            occ.is_finite() && stab <= 2e-2 && seg.finite && seg.value <= bound && var.finite,
            format!(
                "sup occupation {occ:.4} (refined z-grid {occ_fine:.4}, rel {stab:.1e}), segment {:.3} <= bound {bound:.3}, variability {:.4}",
                seg.value, var.norm
            ),
        ));
    }
    out
}

fn criterion_9() -> Vec<Check> {
    let bm = GaussianModel::uniform(Family::Bm, 1, 0.0, 1.0, 1 << 8, SEED).unwrap();
    let d1 = RadonMeasure::dirac(vec![1.0], 1.0).unwrap();
    let d0 = RadonMeasure::dirac(vec![0.0], 1.0).unwrap();
    let cmu = cmu_constant(&bm, &d1, 0.5, 0.0, 1.0).unwrap();
    let mc = mc_expected_variability(&bm, &d0, 0.5, 1.0, 10_000).unwrap();
    let pinned = 1.64807;
    let corrected = 4.0 / 3.0 * normal_abs_moment(-0.5);
    let z_pinned = (mc.mean - pinned) / mc.stderr;
    let z_corr = (mc.mean - corrected) / mc.stderr;
    let grid = relative_moment_grid(&[0.25, 1.0, 4.0], &[0.0, 1.0, 10.0]);
    let mom = moment_bound_check(&grid, 0.5, 1, 100_000, SEED).unwrap();
    vec![
        check("C_mu analytic case", (cmu.value - 1.0).abs() <= 1e-6, format!("{:.10}", cmu.value)),
        check(
            "E int |B|^-1/2 within 3 stderr of 1.64807",
            z_pinned.abs() <= 3.0 && mc.infinite_fraction == 0.0,
            format!(
                "mean {:.5} +- {:.5} ({} replicas), z = {z_pinned:.1}; against (4/3) E|Z|^-1/2 = {corrected:.5}: z = {z_corr:.2} (info)",
                mc.mean, mc.stderr, mc.replicas
            ),
        ),
        check(
            "moment constant uniform (max/min <= 3)",
            mom.uniformity <= 3.0,
            format!("c = {:.4}, max/min = {:.3}", mom.c_empirical, mom.uniformity),
        ),
    ]
}

fn criterion_10() -> Vec<Check> {
    let times = uniform_grid(0.0, 1.0, 16);
    let model = GaussianModel::new(Family::fbm(0.4).unwrap(), 1, times[1..].to_vec(), SEED).unwrap();
    let cov = covariance_check(&model, 10_000).unwrap();
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let m = GaussianModel::uniform(Family::fbm(0.4).unwrap(), 2, 0.0, 1.0, 1 << 10, SEED).unwrap();
            let p: SampledPath<f64> = GaussianSampler::new(m).unwrap().sample(3).unwrap();
            let mut buf = Vec::new();
            p.write_csv(&mut buf).unwrap();
            buf
        })
    };
    let (a, b, c) = (csv(1), csv(1), csv(4));
    vec![
        check(
            "empirical covariance on 16 points",
            cov.passed,
            format!("max z-score {:.2} over {} replicas", cov.max_z_score, cov.replicas),
        ),
        check("byte-identical reruns (1 and 4 threads)", a == b && a == c, format!("{} bytes", a.len())),
    ]
}

fn main() -> ExitCode {
    type Criterion = (u8, &'static str, Duration, fn() -> Vec<Check>);
    let criteria: [Criterion; 10] = [
        (1, "fractional derivative closed forms", Duration::from_secs(5), criterion_1),
        (2, "smooth Zahle integral", Duration::from_secs(5), criterion_2),
        (3, "Young chain rule, fBm H=0.75", Duration::from_secs(30), criterion_3),
        (4, "multiplicative functional validity", Duration::from_secs(60), criterion_4),
        (5, "rough chain rule, smooth coefficient", Duration::from_secs(60), criterion_5),
        (6, "rough integral, BV coefficient", Duration::from_secs(120), criterion_6),
        (7, "potential closed forms", Duration::from_secs(5), criterion_7),
        (8, "segment bound chain, fBm H=0.4", Duration::from_secs(60), criterion_8),
        (9, "Gaussian sufficient conditions", Duration::from_secs(180), criterion_9),
        (10, "sampler exactness and determinism", Duration::from_secs(60), criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (id, title, limit, run) in criteria {
        let start = Instant::now();
        let checks = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < limit;
        let pass = in_time && checks.iter().all(|c| c.pass);
        println!(
            "criterion {id:>2} {:<4} {title} ({:.1} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        for c in &checks {
            println!("    [{}] {}: {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.detail);
        }
        if !in_time {
            println!("    [FAIL] runtime limit exceeded");
        }
        match KNOWN_DEVIATIONS.iter().find(|(k, _)| *k == id) {
            Some((_, why)) if !pass => println!("    known deviation: {why}"),
            Some(_) => println!("    note: listed as a known deviation but passed"),
            None if !pass => unexpected.push(id),
            None => {}
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
