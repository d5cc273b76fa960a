use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use roughint::bv::{parse_coefficient, SpecFile};
use roughint::gaussian::{
    cmu_constant, covariance_check, expected_segment_bound, mc_expected_segment, mc_expected_variability,
    moment_bound_check, relative_moment_grid,
};
use roughint::lift::{
    dyadic_convergence, lift_dyadic, lift_geometric_1d, lift_smooth, two_beta_constant, validate_mf, MfValidation,
};
use roughint::potentials::{kernel_constant, segment_bound, segment_functional, sup_occupation_functional};
use roughint::rough::{
    bound_bv, bound_smooth, check_rough_admissible_bv, check_rough_admissible_smooth, rough_alpha_sweep,
    rough_integrate_with, AlphaWindow,
};
use roughint::young::{alpha_sweep, auto_alpha, check_young_admissible, compose_path, zahle_integral_with, YoungOptions};
use roughint::{
    variability_norm, BVCoefficient, Family, GaussianModel, GaussianSampler, MultiplicativeFunctional, Path64,
    RadonMeasure, SegmentOptions,
};

use crate::args::{
    GaussArgs, LiftArgs, LiftMethod, LiftSource, PairArgs, RoughArgs, SampleArgs, SegmentArgs, SweepArgs, SweepKind,
    VariabilityArgs, YoungArgs,
};
use crate::output::Outcome;

pub fn read_path(p: &Path) -> Result<Path64> {
    let f = File::open(p).with_context(|| format!("cannot open path file {}", p.display()))?;
    Path64::read_csv(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
}

fn read_pair(pair: &PairArgs) -> Result<(Path64, Path64)> {
    let x = read_path(&pair.x)?;
    let y = match &pair.y {
        Some(p) => read_path(p)?,
        None => x.clone(),
    };
    if x.times() != y.times() {
        bail!("--x and --y must share one time grid");
    }
    Ok((x, y))
}

/// `NAME[:params]`, or the path of a coefficient spec file.
pub fn load_coefficient(s: &str) -> Result<BVCoefficient<f64>> {
    let p = Path::new(s);
    if p.is_file() {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        return SpecFile::parse(&text)
            .and_then(|spec| spec.coefficient())
            .with_context(|| format!("coefficient spec {}", p.display()));
    }
    parse_coefficient(s).with_context(|| format!("--phi `{s}`"))
}

pub fn load_measure(p: &Path) -> Result<RadonMeasure<f64>> {
    let text = std::fs::read_to_string(p).with_context(|| format!("cannot read measure spec {}", p.display()))?;
    SpecFile::parse(&text)
        .and_then(|spec| spec.measure())
        .with_context(|| format!("measure spec {}", p.display()))
}

fn path_meta(x: &Path64) -> Value {
    json!({
        "cells": x.cells(),
        "dim": x.dim(),
        "interval": [x.start(), x.end()],
        "uniform": x.is_uniform(),
    })
}

pub fn integrate_young(args: &YoungArgs) -> Result<Outcome> {
    let (x, y) = read_pair(&args.pair)?;
    let (integrand, phi_name) = match &args.phi {
        Some(s) => {
            let phi = load_coefficient(s)?;
            (compose_path(&x, &phi)?, Some(phi.name().to_string()))
        }
        None => (x.clone(), None),
    };
    if integrand.dim() != y.dim() {
        bail!("integrand has dimension {} but Y has dimension {}", integrand.dim(), y.dim());
    }
    let opts = YoungOptions {
        no_base_correction: args.no_base_correction,
        points_per_cell: args.points_per_cell,
    };
    let (gamma, delta) = (integrand.roughness_exponent().min(0.999), y.roughness_exponent().min(0.999));
    let adm = check_young_admissible(gamma.max(1e-3), delta.max(1e-3), f64::INFINITY, f64::INFINITY)?;
    let mut out = Outcome::new("integrate-young");
    if !adm.admissible {
        out.warn(format!(
            "estimated Hölder exponents {gamma:.3} and {delta:.3} do not satisfy γ + δ > 1 (advisory)"
        ));
    }
    let result = if let Some(alphas) = &args.alpha_sweep {
        let table = alpha_sweep(|a| Ok(zahle_integral_with(&integrand, &y, a, &opts)?.value), alphas);
        let first = alphas.first().copied().ok_or_else(|| anyhow!("--alpha-sweep needs at least one order"))?;
        let mut r = zahle_integral_with(&integrand, &y, first, &opts)?;
        r.sweep = Some(table);
        r
    } else {
        let alpha = args.alpha.unwrap_or_else(|| auto_alpha(&integrand, &y));
        zahle_integral_with(&integrand, &y, alpha, &opts)?
    };
    out.metadata = json!({
        "x": path_meta(&x),
        "phi": phi_name,
        "alpha_used": result.alpha_used,
        "alpha_window_estimate": [1.0 - delta, gamma],
        "holder_estimates": {"integrand": gamma, "integrator": delta},
        "young_admissible": adm,
        "no_base_correction": args.no_base_correction,
        "points_per_cell": args.points_per_cell,
    });
    out.result = serde_json::to_value(&result)?;
    Ok(out)
}

fn build_lift(x: &Path64, y: &Path64, source: &LiftSource) -> Result<(MultiplicativeFunctional<f64>, Option<MfValidation>)> {
    if let Some(t) = &source.tensor {
        let f = File::open(t).with_context(|| format!("cannot open tensor {}", t.display()))?;
        let mf = MultiplicativeFunctional::read_csv(x.clone(), y.clone(), BufReader::new(f))
            .with_context(|| format!("reading tensor {}", t.display()))?;
        let v = validate_mf(&mf, source.beta.unwrap_or(0.4), 1000, 0)?;
        return Ok((mf, Some(v)));
    }
    let same = x.values() == y.values();
    let mf = match source.lift.as_str() {
        "auto" if x.dim() == 1 && same => lift_geometric_1d(x)?,
        "auto" | "smooth" => lift_smooth(x, y)?,
        "geometric1d" => {
            if !same {
                bail!("--lift geometric1d needs Y = X");
            }
            lift_geometric_1d(x)?
        }
        other => match other.strip_prefix("dyadic:") {
            Some(k) => lift_dyadic(x, y, k.parse().with_context(|| format!("--lift: bad level `{k}`"))?)?,
            None => bail!("--lift: expected auto, smooth, geometric1d or dyadic:K, got `{other}`"),
        },
    };
    Ok((mf, None))
}

enum BoundSpec {
    Smooth(f64),
    Bv(f64, f64),
}

fn parse_bound(s: &str) -> Result<BoundSpec> {
    let num = |v: &str| v.trim().parse::<f64>().with_context(|| format!("--bound: not a number `{v}`"));
    if let Some(l) = s.strip_prefix("smooth:") {
        return Ok(BoundSpec::Smooth(num(l)?));
    }
    if let Some(rest) = s.strip_prefix("bv:") {
        let (a, b) = rest.split_once(',').ok_or_else(|| anyhow!("--bound: expected bv:s,ε"))?;
        return Ok(BoundSpec::Bv(num(a)?, num(b)?));
    }
    bail!("--bound: expected smooth:λ or bv:s,ε, got `{s}`")
}

/// Admissibility bookkeeping shared by `integrate-rough` and `alpha-sweep`.
struct RoughSetup {
    mf: MultiplicativeFunctional<f64>,
    phi: BVCoefficient<f64>,
    beta: f64,
    regime: &'static str,
    lambda: Option<f64>,
    s: Option<f64>,
    eps: Option<f64>,
    window: Option<AlphaWindow>,
    induced_alpha: Option<f64>,
    validation: Option<MfValidation>,
}

fn rough_setup(
    pair: &PairArgs,
    source: &LiftSource,
    phi: &str,
    s_arg: Option<f64>,
    eps_arg: Option<f64>,
    out: &mut Outcome,
) -> Result<RoughSetup> {
    let (x, y) = read_pair(pair)?;
    let phi = load_coefficient(phi)?;
    let (mf, validation) = build_lift(&x, &y, source)?;
    if let Some(v) = &validation {
        if !(v.max_chen_defect <= 1e-8 * (1.0 + v.c_beta)) {
            out.violate(format!("supplied tensor violates Chen's relation (defect {:.3e})", v.max_chen_defect));
        }
    }
    let beta = match source.beta {
        Some(b) => b,
        None => (x.roughness_exponent().min(y.roughness_exponent()) - 0.02).min(0.499),
    };
    let in_range = beta > 1.0 / 3.0 && beta < 0.5;
    if !in_range {
        out.violate(format!("β = {beta:.4} outside (1/3, 1/2)"));
    }
    let mf = mf.with_beta(beta.clamp(0.01, 0.99))?;
    let mut setup = RoughSetup {
        mf,
        beta,
        regime: "smooth",
        lambda: None,
        s: None,
        eps: None,
        window: None,
        induced_alpha: None,
        validation,
        phi,
    };
    if let Some(lam) = setup.phi.partial_holder_exponent() {
        // λ = 1 partials are λ'-Hölder for every λ' < 1 on bounded sets
        let lam = lam.min(0.99);
        setup.lambda = Some(lam);
        if in_range {
            setup.window = check_rough_admissible_smooth(beta, lam)?;
            if setup.window.is_none() {
                out.violate(format!("1/β - 2 < λ fails for β = {beta:.4}, λ = {lam}"));
            }
        }
    } else {
        setup.regime = "bv";
        if in_range {
            let s = s_arg.unwrap_or(0.5 * ((1.0 / beta - 2.0) + 1.0));
            let adm = check_rough_admissible_bv(beta, s)?;
            setup.s = Some(s);
            setup.window = adm.alpha_window;
            match adm.eps_window {
                None => out.violate(format!("1/β - 2 < s < 1 fails for β = {beta:.4}, s = {s}")),
                Some((lo, hi)) => {
                    let eps = eps_arg.or(adm.default_eps()).expect("window present");
                    setup.eps = Some(eps);
                    match adm.alpha_for(eps) {
                        Ok(a) => setup.induced_alpha = Some(a),
                        Err(_) => out.violate(format!("ε = {eps} outside ({lo}, {hi})")),
                    }
                }
            }
        }
    }
    Ok(setup)
}

fn window_json(w: Option<AlphaWindow>) -> Value {
    w.map(|w| json!([w.lo, w.hi])).unwrap_or(Value::Null)
}

pub fn integrate_rough(args: &RoughArgs) -> Result<Outcome> {
    let mut out = Outcome::new("integrate-rough");
    let bound = args.bound.as_deref().map(parse_bound).transpose()?;
    let (s_arg, eps_arg) = match bound {
        Some(BoundSpec::Bv(s, e)) => (args.s.or(Some(s)), args.eps.or(Some(e))),
        _ => (args.s, args.eps),
    };
    let setup = rough_setup(&args.pair, &args.source, &args.phi, s_arg, eps_arg, &mut out)?;
    let alpha = match args.alpha {
        Some(a) => {
            if let Some(w) = setup.window {
                if !w.contains(a) {
                    out.violate(format!("α = {a} outside the admissible window ({}, {})", w.lo, w.hi));
                }
            }
            a
        }
        None => match (setup.regime, setup.window, setup.induced_alpha) {
            ("bv", _, Some(a)) => a,
            ("smooth", Some(w), _) => w.midpoint(),
            ("bv", Some(w), None) => {
                out.warn(format!("evaluating at the window midpoint α = {}", w.midpoint()));
                w.midpoint()
            }
            _ => {
                let a = (1.0 - setup.beta + 0.02).clamp(0.5, 0.95);
                out.warn(format!("no admissible window; evaluating at α = {a}"));
                a
            }
        },
    };
    let result = match rough_integrate_with(&setup.mf, &setup.phi, alpha, args.points_per_cell) {
        Ok(mut r) => {
            if let Some(alphas) = &args.sweep {
                r.sweep = Some(rough_alpha_sweep(&setup.mf, &setup.phi, alphas));
            }
            match bound {
                Some(BoundSpec::Smooth(lam)) => {
                    let mut b = bound_smooth(&setup.mf, &setup.phi, lam)?;
                    b.ratio = Some(r.value.abs() / b.rhs);
                    r.bound_report = Some(b);
                }
                Some(BoundSpec::Bv(s, e)) => {
                    let mut b = bound_bv(&setup.mf, &setup.phi, s, e, &SegmentOptions::default())?;
                    b.ratio = Some(r.value.abs() / b.rhs);
                    r.bound_report = Some(b);
                }
                None => {}
            }
            if let Some(b) = &r.bound_report {
                if !b.finite {
                    out.violate("a-priori bound is infinite; the value is not supported by the theory");
                }
            }
            serde_json::to_value(&r)?
        }
        Err(e) if !out.violations.is_empty() => {
            out.warn(format!("integral not computed: {e}"));
            Value::Null
        }
        Err(e) => return Err(e.into()),
    };
    out.metadata = json!({
        "x": path_meta(setup.mf.x()),
        "phi": setup.phi.name(),
        "construction": setup.mf.construction().to_string(),
        "beta": setup.beta,
        "regime": setup.regime,
        "lambda": setup.lambda,
        "s": setup.s,
        "eps": setup.eps,
        "alpha_window": window_json(setup.window),
        "alpha_used": alpha,
        "points_per_cell": args.points_per_cell,
        "tensor_validation": setup.validation,
    });
    out.result = result;
    Ok(out)
}

pub fn alpha_sweep_cmd(args: &SweepArgs) -> Result<Outcome> {
    let mut out = Outcome::new("alpha-sweep");
    match args.kind {
        SweepKind::Young => {
            let (x, y) = read_pair(&args.pair)?;
            let integrand = match &args.phi {
                Some(s) => compose_path(&x, &load_coefficient(s)?)?,
                None => x.clone(),
            };
            let (g, d) = (integrand.roughness_exponent().min(0.999), y.roughness_exponent().min(0.999));
            let alphas = match &args.alphas {
                Some(a) => a.clone(),
                None => {
                    let w = AlphaWindow { lo: 1.0 - d, hi: g };
                    if !(w.lo < w.hi) {
                        out.violate(format!("estimated window ({:.3}, {:.3}) is empty", w.lo, w.hi));
                        vec![0.5]
                    } else {
                        w.interior(args.count)
                    }
                }
            };
            let table = alpha_sweep(|a| Ok(zahle_integral_with(&integrand, &y, a, &YoungOptions::default())?.value), &alphas);
            out.metadata = json!({"kind": "young", "x": path_meta(&x), "alphas": alphas, "holder_estimates": [g, d]});
            out.result = serde_json::to_value(&table)?;
        }
        SweepKind::Rough => {
            let phi = args.phi.clone().unwrap_or_else(|| "identity".into());
            let setup = rough_setup(&args.pair, &args.source, &phi, args.s, None, &mut out)?;
            let alphas = match (&args.alphas, setup.window) {
                (Some(a), _) => a.clone(),
                (None, Some(w)) => w.interior(args.count),
                (None, None) => bail!("no admissible window; pass --alphas explicitly"),
            };
            if let Some(w) = setup.window {
                for &a in &alphas {
                    if !w.contains(a) {
                        out.violate(format!("α = {a} outside the admissible window ({}, {})", w.lo, w.hi));
                    }
                }
            }
            let table = rough_alpha_sweep(&setup.mf, &setup.phi, &alphas);
            out.metadata = json!({
                "kind": "rough",
                "x": path_meta(setup.mf.x()),
                "phi": setup.phi.name(),
                "construction": setup.mf.construction().to_string(),
                "beta": setup.beta,
                "regime": setup.regime,
                "s": setup.s,
                "alpha_window": window_json(setup.window),
                "alphas": alphas,
            });
            out.result = serde_json::to_value(&table)?;
        }
    }
    Ok(out)
}

pub fn lift(args: &LiftArgs) -> Result<Outcome> {
    let (x, y) = read_pair(&args.pair)?;
    let mf = match args.method {
        LiftMethod::Smooth => lift_smooth(&x, &y)?,
        LiftMethod::Geometric1d => {
            if x.values() != y.values() {
                bail!("--method geometric1d needs Y = X");
            }
            lift_geometric_1d(&x)?
        }
        LiftMethod::Dyadic => {
            let level = args.level.ok_or_else(|| anyhow!("--level is required for --method dyadic"))?;
            lift_dyadic(&x, &y, level)?
        }
    };
    let beta = args
        .beta
        .unwrap_or_else(|| (x.roughness_exponent().min(y.roughness_exponent()) - 0.02).clamp(0.01, 0.99));
    let validation = validate_mf(&mf, beta, args.triples, args.seed)?;
    let f = File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    mf.write_csv(std::io::BufWriter::new(f))?;
    let mut out = Outcome::new("lift");
    if let Some(p) = &args.path_out {
        let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
        mf.x().write_csv(std::io::BufWriter::new(f))?;
    } else if args.method == LiftMethod::Dyadic {
        out.warn("the dyadic table lifts the level-K interpolant of X; pass --path-out to save that path");
    }
    let convergence = match (args.method, args.level) {
        (LiftMethod::Dyadic, Some(level)) => {
            Some(dyadic_convergence(&x, &y, level.saturating_sub(4).max(1)..=level, beta)?)
        }
        _ => None,
    };
    out.metadata = json!({
        "x": path_meta(&x),
        "construction": mf.construction().to_string(),
        "beta": beta,
        "seed": args.seed,
        "tensor_file": args.out.display().to_string(),
    });
    out.result = json!({
        "validation": validation,
        "two_beta_constant": two_beta_constant(&mf, beta),
        "dyadic_convergence": convergence,
    });
    Ok(out)
}

pub fn variability(args: &VariabilityArgs) -> Result<Outcome> {
    let x = read_path(&args.x)?;
    let nu = load_measure(&args.measure)?;
    let r = variability_norm(&x, &nu, args.s, args.p)?;
    let mut out = Outcome::new("variability");
    if !r.finite {
        out.violate("variability norm is infinite");
    }
    out.metadata = json!({"x": path_meta(&x), "s": args.s, "p": args.p, "measure_mass": nu.total_mass()});
    out.result = serde_json::to_value(&r)?;
    Ok(out)
}

pub fn segment_check(args: &SegmentArgs) -> Result<Outcome> {
    let x = read_path(&args.x)?;
    let nu = load_measure(&args.measure)?;
    let opts = SegmentOptions {
        points_per_cell: args.points_per_cell,
        max_cells: (args.max_cells > 0).then_some(args.max_cells),
    };
    let seg = segment_functional(&x, &nu, args.s, args.eps, &opts)?;
    let mut out = Outcome::new("segment-check");
    if !seg.finite {
        out.violate("segment functional is infinite");
    }
    let (bound, occupation) = if x.dim() == 1 {
        let occ = sup_occupation_functional(&x, args.s)?;
        (Some(segment_bound(&x, &nu, args.s, args.eps)?), Some(occ))
    } else {
        (None, None)
    };
    out.metadata = json!({
        "x": path_meta(&x),
        "s": args.s,
        "eps": args.eps,
        "options": opts,
        "kernel_constant": kernel_constant(x.start(), x.end(), args.eps),
    });
    out.result = json!({
        "segment": seg,
        "bound": bound,
        "dominated": bound.map(|b| seg.value <= b),
        "sup_occupation": occupation,
    });
    Ok(out)
}

fn family_from(s: &str) -> Result<Family> {
    Family::parse(s).with_context(|| format!("--family `{s}`"))
}

pub fn fbm_sample(args: &SampleArgs) -> Result<Outcome> {
    let family = match &args.family {
        Some(f) => family_from(f)?,
        None => Family::fbm(args.hurst).context("--H")?,
    };
    let model = GaussianModel::uniform(family, args.m, args.a, args.b, args.n, args.seed)?;
    let sampler = GaussianSampler::new(model)?;
    let path: Path64 = sampler.sample(args.replica)?;
    let f = File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    path.write_csv(std::io::BufWriter::new(f))?;
    let mut out = Outcome::new("fbm-sample");
    out.metadata = json!({"sampler": sampler.info(), "replica": args.replica, "path_file": args.out.display().to_string()});
    out.result = json!({"end_value": path.point(path.cells()), "cells": path.cells(), "dim": path.dim()});
    if sampler.info().jitter > 0.0 {
        out.warn(format!("diagonal jitter {:e} added to the Gram matrix", sampler.info().jitter));
    }
    Ok(out)
}

pub fn gauss_check(args: &GaussArgs) -> Result<Outcome> {
    let family = family_from(&args.family)?;
    let model = GaussianModel::uniform(family, args.m, args.a, args.b, args.n, args.seed)?;
    let mu = load_measure(&args.mu)?;
    if mu.dim() != args.m {
        bail!("--mu lives in dimension {} but --m is {}", mu.dim(), args.m);
    }
    let mut out = Outcome::new("gauss-check");
    let cmu = cmu_constant(&model, &mu, args.s, args.a, args.b)?;
    if !cmu.finite || cmu.exponent_violated {
        out.violate("C_μ is infinite: (m - 1 + s)H ≥ 1 with a variance vanishing at a");
    }
    let opts = SegmentOptions {
        points_per_cell: 2,
        max_cells: Some(args.max_cells),
    };
    let var = mc_expected_variability(&model, &mu, args.s, args.p, args.replicas)?;
    let seg = mc_expected_segment(&model, &mu, args.s, args.eps, args.replicas, &opts)?;
    if var.infinite_fraction > 0.0 || seg.infinite_fraction > 0.0 {
        out.violate("some replicas have an infinite functional");
    }
    let moment = moment_bound_check(
        &relative_moment_grid(&[1.0], &[0.0, 0.5, 1.0, 2.0, 4.0, 10.0]),
        args.s,
        args.m,
        20_000,
        args.seed,
    )?;
    let bound = expected_segment_bound(cmu.value, moment.c_empirical, args.a, args.b, args.eps, args.m, args.s);
    let consistent = seg.mean <= bound + 3.0 * seg.stderr;
    if !consistent {
        out.warn("Monte Carlo segment mean exceeds the expected-value bound");
    }
    let covariance = args.covariance_replicas.map(|r| covariance_check(&model, r)).transpose()?;
    if let Some(c) = &covariance {
        if !c.passed {
            out.warn(format!("empirical covariance check failed (max z-score {:.2})", c.max_z_score));
        }
    }
    let sampler = GaussianSampler::new(model)?;
    out.metadata = json!({
        "sampler": sampler.info(),
        "s": args.s,
        "eps": args.eps,
        "p": args.p,
        "replicas": args.replicas,
        "interval": [args.a, args.b],
        "segment_options": opts,
    });
    out.result = json!({
        "cmu": cmu,
        "expected_variability": var,
        "expected_segment": seg,
        "moment_constant": moment.c_empirical,
        "expected_segment_bound": bound,
        "bound_consistent": consistent,
        "covariance_check": covariance,
    });
    Ok(out)
}
