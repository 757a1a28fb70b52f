use std::collections::BTreeMap;

use cwsoc::audit::{self, AuditContext};
use cwsoc::expansion::{
    bound_constants, check_cancellation, expansion_convergence, taylor_h, verify_dagger_bound, Box2, CutoffSpec,
    ExactScale, Profile,
};
use cwsoc::io::read_path_csv;
use cwsoc::model::FluctuationScale;
use cwsoc::poly::{from_f64, ratio, to_f64, Poly2};
use cwsoc::rng::{splitmix64, stream};
use cwsoc::simulate::{
    run_ensemble, sample_gibbs, simulate_critical, static_law_fit, simulate_fluctuation, simulate_full, simulate_ou, simulate_reduced,
    CriticalSpec, GibbsSpec, InitialCondition, OuSpec, Path, SimSpec, Workers,
};
use cwsoc::stats::{summarize, Summary};
use cwsoc::variational::{action, optimal_path, solve_resolvent, InitialCost, OptimalPathOptions, ResolventProblem};
use cwsoc::verify::{
    check_clt_increment, check_critical_limit, check_ou_limit, collapse_medians, containment_diagnostic,
    estimate_rate, tail_bound_check, tail_empirical, ContainmentSpec, LimitTestReport, RateSpec,
};
use cwsoc::{Error, ModelParams, Result, ScalingSchedule};
use rand::RngExt;
use serde_json::json;

use crate::config::{InitialCostKind, InitialKind, RunConfig};
use crate::output::Output;
use crate::{CheckKind, Cli, Command, SimKind, VerifyKind};

/// `Ok(true)` on success, `Ok(false)` when an asserted property failed.
pub fn dispatch(cli: &Cli) -> Result<bool> {
    let (sub, default_replicas) = naming(&cli.command);
    let mut overrides = shortcut_overrides(cli);
    overrides.extend(cli.set.iter().cloned());
    let mut cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if cfg.run.replicas == 0 {
        cfg.run.replicas = default_replicas;
    }
    let threads = cli.threads.unwrap_or(1);
    let workers = Workers::new(threads)?;
    let out = Output::create(&cli.out, &sub, cli.label.as_deref(), cli.format)?;
    out.echo(&cfg.echo())?;
    let ctx = Ctx { cfg, workers, threads, out };
    match &cli.command {
        Command::Simulate { which } => simulate(&ctx, *which),
        Command::Gibbs => gibbs(&ctx),
        Command::Verify { which } => verify(&ctx, *which),
        Command::Action { path } => action_cmd(&ctx, path),
        Command::OptimalPath => optimal(&ctx),
        Command::Resolvent => resolvent(&ctx),
        Command::Check { which } => check(&ctx, *which),
        Command::EstimateRate => rate(&ctx),
        Command::LimitsAudit { only } => limits_audit(&ctx, only),
    }
}

struct Ctx {
    cfg: RunConfig,
    workers: Workers,
    threads: usize,
    out: Output,
}

/// Output directory name and default replica count.
fn naming(c: &Command) -> (String, usize) {
    let kebab = |v: &dyn std::fmt::Debug| {
        let s = format!("{v:?}");
        let head = s.split([' ', '{']).next().unwrap_or("").to_string();
        let mut out = String::new();
        for (i, ch) in head.chars().enumerate() {
            if ch.is_uppercase() && i > 0 {
                out.push('-');
            }
            out.push(ch.to_ascii_lowercase());
        }
        out
    };
    match c {
        Command::Simulate { which } => (format!("simulate-{}", kebab(which)), 1),
        Command::Gibbs => ("gibbs".into(), 1),
        Command::Verify { which } => (format!("verify-{}", kebab(which)), 1),
        Command::Action { .. } => ("action".into(), 1),
        Command::OptimalPath => ("optimal-path".into(), 1),
        Command::Resolvent => ("resolvent".into(), 1),
        Command::Check { which: CheckKind::Tail } => ("check-tail".into(), 0),
        Command::Check { which } => (format!("check-{}", kebab(which)), 1000),
        Command::EstimateRate => ("estimate-rate".into(), 10_000),
        Command::LimitsAudit { .. } => ("limits-audit".into(), 1),
    }
}

/// Named flags are shorthands for config keys; which key depends on the subcommand.
fn shortcut_overrides(cli: &Cli) -> Vec<(String, String)> {
    let mut v = Vec::new();
    let mut put = |k: &str, val: String| v.push((k.to_string(), val));
    let (t_key, x0_key, y0_key) = match &cli.command {
        Command::OptimalPath | Command::Action { .. } => ("variational.horizon", "variational.x0", "sim.y0"),
        Command::Check { which: CheckKind::Tail } => ("sim.horizon", "sim.x0", "sim.y0"),
        Command::Check { .. } => ("check.t", "sim.x0", "sim.y0"),
        Command::EstimateRate => ("rate.horizon", "rate.start", "sim.y0"),
        _ => ("sim.horizon", "sim.x0", "sim.y0"),
    };
    if let Some(s) = cli.seed {
        put("run.seed", s.to_string());
    }
    if let Some(r) = cli.replicas {
        put("run.replicas", r.to_string());
    }
    if let Some(s) = cli.sigma {
        put("model.sigma", fmt(s));
    }
    if let Some(n) = cli.n {
        put("model.n", n.to_string());
    }
    if let Some(t) = cli.horizon {
        put(t_key, fmt(t));
    }
    if let Some(d) = cli.dt {
        put("sim.dt", fmt(d));
    }
    if let Some(x) = cli.x0 {
        put(x0_key, fmt(x));
    }
    if let Some(y) = cli.y0 {
        put(y0_key, fmt(y));
    }
    if cli.no_noise {
        put("sim.noise", "false".into());
    }
    if let Some(a) = cli.alpha {
        put("schedule.alpha", fmt(a));
    }
    if let Command::Verify { which: VerifyKind::Cancellation { degree: Some(d) } } = &cli.command {
        put("expansion.degree", d.to_string());
    }
    v
}

/// A float literal that TOML reads back as a float.
fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn params(cfg: &RunConfig) -> Result<ModelParams> {
    ModelParams::new(cfg.model.sigma, cfg.model.n)
}

fn schedule(cfg: &RunConfig) -> Result<ScalingSchedule> {
    if cfg.schedule.table.is_empty() {
        ScalingSchedule::power(cfg.schedule.alpha)
    } else {
        ScalingSchedule::table(cfg.schedule.table.iter().copied())
    }
}

fn sim_spec(cfg: &RunConfig) -> Result<SimSpec> {
    let mut s = SimSpec::new(params(cfg)?, cfg.sim.horizon, cfg.sim.dt);
    s.schedule = Some(schedule(cfg)?);
    s.initial = match cfg.sim.initial {
        InitialKind::IidGaussian => InitialCondition::IidGaussian,
        InitialKind::FixedReducedState => InitialCondition::FixedReducedState { x: cfg.sim.x0, y: cfg.sim.y0 },
    };
    s.seed = cfg.run.seed;
    s.replicas = cfg.run.replicas.max(1);
    s.record_every = cfg.sim.record_every;
    s.noise = cfg.sim.noise;
    s.engine = cfg.sim.engine;
    Ok(s)
}

fn profile(cfg: &RunConfig) -> Profile {
    Profile::Polynomial(cfg.expansion.coefficients.clone()).mollified(cfg.expansion.inner)
}

fn stem(i: usize, replicas: usize) -> String {
    if replicas == 1 {
        "path".into()
    } else {
        format!("path_{i:05}")
    }
}

fn terminal_summary(xs: &[f64]) -> Summary {
    summarize(xs)
}

fn simulate(ctx: &Ctx, which: SimKind) -> Result<bool> {
    let cfg = &ctx.cfg;
    let spec = sim_spec(cfg)?;
    let hash = spec.hash();
    let mut report = BTreeMap::new();
    report.insert("spec_hash", json!(hash));
    match which {
        SimKind::Full | SimKind::Reduced | SimKind::Fluctuation => {
            let e = run_ensemble(spec.seed, spec.replicas, &hash, &ctx.workers, |_, rng| match which {
                SimKind::Full => Ok((simulate_full(&spec, rng)?, 0.0)),
                SimKind::Reduced => {
                    let r = simulate_reduced(&spec, rng)?;
                    let f = r.clamp_fraction();
                    Ok((r.path, f))
                }
                _ => {
                    let r = simulate_fluctuation(&spec, cfg.sim.method, rng)?;
                    let f = r.clamp_fraction();
                    Ok((r.path, f))
                }
            })?;
            for (i, (p, _)) in e.outcomes.iter().enumerate() {
                ctx.out.path2(&stem(i, spec.replicas), p)?;
            }
            let xs: Vec<f64> = e.outcomes.iter().map(|(p, _)| p.last().unwrap().0).collect();
            let ys: Vec<f64> = e.outcomes.iter().map(|(p, _)| p.last().unwrap().1).collect();
            let clamp = e.outcomes.iter().map(|(_, f)| *f).fold(0.0, f64::max);
            report.insert("spec", serde_json::to_value(&spec)?);
            report.insert("seeds", json!(e.seeds));
            report.insert("terminal_x", serde_json::to_value(terminal_summary(&xs))?);
            report.insert("terminal_y", serde_json::to_value(terminal_summary(&ys))?);
            report.insert("max_clamp_fraction", json!(clamp));
            if spec.replicas == 1 {
                println!("terminal: x = {:.10}  y = {:.10}", xs[0], ys[0]);
            } else {
                let (sx, sy) = (summarize(&xs), summarize(&ys));
                println!("terminal x: mean {:.6} var {:.6}   y: mean {:.6} var {:.6}", sx.mean, sx.variance, sy.mean, sy.variance);
            }
        }
        SimKind::Critical | SimKind::Ou => {
            let sigma = cfg.model.sigma;
            let e = run_ensemble(spec.seed, spec.replicas, &hash, &ctx.workers, |_, rng| {
                if matches!(which, SimKind::Critical) {
                    let c = CriticalSpec {
                        sigma,
                        horizon: cfg.sim.horizon,
                        dt: cfg.sim.dt,
                        x0: cfg.sim.x0,
                        noise: cfg.sim.noise,
                        record_every: cfg.sim.record_every,
                    };
                    simulate_critical(&c, rng)
                } else {
                    let o = OuSpec {
                        sigma,
                        horizon: cfg.sim.horizon,
                        dt: cfg.sim.dt,
                        y0: cfg.sim.y0,
                        record_every: cfg.sim.record_every,
                    };
                    simulate_ou(&o, rng)
                }
            })?;
            for (i, p) in e.outcomes.iter().enumerate() {
                ctx.out.path(&stem(i, spec.replicas), p)?;
            }
            let ends: Vec<f64> = e.outcomes.iter().map(|p| *p.last().unwrap()).collect();
            report.insert("seeds", json!(e.seeds));
            report.insert("terminal", serde_json::to_value(terminal_summary(&ends))?);
            if ends.len() == 1 {
                println!("terminal: {:.10}", ends[0]);
            } else {
                let s = summarize(&ends);
                println!("terminal: mean {:.6} var {:.6} over {} replicas", s.mean, s.variance, s.count);
            }
        }
    }
    ctx.out.report(&report)?;
    Ok(true)
}

fn gibbs(ctx: &Ctx) -> Result<bool> {
    let cfg = &ctx.cfg;
    let spec = GibbsSpec { params: params(cfg)?, burn_in: cfg.gibbs.burn_in, sweeps: cfg.gibbs.sweeps, thin: cfg.gibbs.thin };
    let run = sample_gibbs(&spec, &mut stream(cfg.run.seed))?;
    let s2 = spec.params.sigma2();
    let n = spec.params.nf();
    let rows: Vec<Vec<f64>> = run
        .samples
        .iter()
        .enumerate()
        .map(|(i, z)| vec![i as f64, z.s() / n, z.t() / n - s2])
        .collect();
    ctx.out.table("samples", &["sample", "x", "y"], &rows)?;
    let xs: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    if let Some(w) = &run.warning {
        eprintln!("warning: {w}");
    }
    println!(
        "{} samples, step {:.4}, acceptance {:.3}; mean x {:.5}, mean y {:.5}",
        rows.len(),
        run.step,
        run.acceptance,
        summarize(&xs).mean,
        summarize(&ys).mean
    );
    let fit = static_law_fit(&run.samples, cfg.model.sigma);
    println!(
        "S/n^(3/4) vs exp(-x^4/(4 sigma^4)): KS p = {:.4};  vs exp(-x^4/12): KS p = {:.4}",
        fit.critical_sde.p_value, fit.bare_quartic.p_value
    );
    ctx.out.report(&json!({
        "spec": spec, "step": run.step, "acceptance": run.acceptance, "warning": run.warning,
        "x": summarize(&xs), "y": summarize(&ys), "static_law": fit,
    }))?;
    Ok(true)
}

fn verify(ctx: &Ctx, which: VerifyKind) -> Result<bool> {
    let cfg = &ctx.cfg;
    let ex = &cfg.expansion;
    match which {
        VerifyKind::Cancellation { .. } => {
            let s2 = from_f64(cfg.model.sigma * cfg.model.sigma);
            let mut polys: Vec<Poly2> = (0..=ex.degree).map(|k| Poly2::monomial(ratio(1, 1), k, 0)).collect();
            let mut rng = stream(splitmix64(cfg.run.seed));
            for _ in 0..ex.random {
                let deg = rng.random_range(0..=ex.degree as usize);
                let c: Vec<_> = (0..=deg).map(|_| ratio(rng.random_range(-20..=20), rng.random_range(1..=12))).collect();
                polys.push(Poly2::univariate(&c));
            }
            let mut rows = Vec::new();
            let mut all = true;
            for f in &polys {
                let r = check_cancellation(f, &s2);
                all &= r.is_zero();
                rows.push(json!({ "f": f.to_string(), "first": r.first.to_string(), "second": r.second.to_string() }));
            }
            println!("{} polynomials checked (degree <= {}): residuals {}", polys.len(), ex.degree, if all { "all zero" } else { "NONZERO" });
            ctx.out.report(&json!({ "sigma2": s2.to_string(), "all_zero": all, "residuals": rows }))?;
            Ok(all)
        }
        VerifyKind::Expansion => {
            let rows = expansion_convergence(&profile(cfg), &params(cfg)?, &schedule(cfg)?, &Box2::square(ex.half_width), &ex.ns, ex.pitch)?;
            println!("{:>10} {:>10} {:>14}", "n", "b_n", "sup|HnF-Hf|");
            for r in &rows {
                println!("{:>10} {:>10.4} {:>14.6e}", r.n, r.b, r.sup);
            }
            let dec = rows.windows(2).all(|w| w[1].sup < w[0].sup);
            println!("strictly decreasing: {}", verdict(dec));
            ctx.out.table("convergence", &["n", "b", "sup"], &rows.iter().map(|r| vec![r.n as f64, r.b, r.sup]).collect::<Vec<_>>())?;
            ctx.out.report(&json!({ "rows": rows, "decreasing": dec }))?;
            Ok(dec)
        }
        VerifyKind::Taylor => {
            let p = params(cfg)?;
            let sch = schedule(cfg)?;
            let s2 = p.sigma2();
            let mut rows = Vec::new();
            let mut worst_exact: f64 = 0.0;
            for &n in &ex.taylor_ns {
                let scale = FluctuationScale::new(p.with_n(n)?, &sch)?;
                let l = scale.b.sqrt().ln();
                let half = s2 * l.sqrt();
                let exact = ExactScale::new(from_f64(s2), from_f64(scale.b), n);
                let mut sup = 0.0f64;
                for i in 0..=4000 {
                    let y = -half + 2.0 * half * i as f64 / 4000.0;
                    let t = taylor_h(&scale, y)?;
                    sup = sup.max(t.epsilon.abs());
                    if i % 400 == 0 {
                        let (_, e) = exact.taylor_h(&from_f64(y))?;
                        let e = to_f64(&e);
                        worst_exact = worst_exact.max((t.epsilon - e).abs() / e.abs().max(1e-300));
                    }
                }
                rows.push(vec![n as f64, scale.b, sup, sup * scale.b / l.powf(1.5)]);
            }
            let consts: Vec<f64> = rows.iter().map(|r| r[3]).collect();
            let ratio = consts.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / consts.iter().cloned().fold(f64::INFINITY, f64::min);
            let ok = ratio < 3.0 && worst_exact < 1e-8;
            println!("{:>12} {:>10} {:>14} {:>10}", "n", "b_n", "sup|eps_n|", "constant");
            for r in &rows {
                println!("{:>12} {:>10.4} {:>14.6e} {:>10.5}", r[0], r[1], r[2], r[3]);
            }
            println!("max/min constant {ratio:.4} (< 3); float vs exact remainder, max relative gap {worst_exact:.2e}: {}", verdict(ok));
            ctx.out.table("taylor", &["n", "b", "sup_eps", "constant"], &rows)?;
            ctx.out.report(&json!({ "rows": rows, "ratio": ratio, "exact_relative_gap": worst_exact, "pass": ok }))?;
            Ok(ok)
        }
        VerifyKind::DaggerBound => {
            let p = params(cfg)?;
            let sch = schedule(cfg)?;
            let f = profile(cfg);
            let region = Box2::square(ex.half_width);
            let mut reports = Vec::new();
            for &n in &ex.ns {
                reports.push(verify_dagger_bound(&f, ex.eps, &p.with_n(n)?, &sch, &region, ex.pitch, ex.mode)?);
            }
            println!("{:>10} {:>9} {:>12} {:>12} {:>12}", "n", "b_n", "upper", "lower", "remainder");
            for r in &reports {
                println!("{:>10} {:>9.4} {:>12.5} {:>12.5} {:>12.4}", r.n, r.b, r.upper.value, r.lower.value, r.remainder);
            }
            let up: Vec<f64> = reports.iter().map(|r| r.upper.value).collect();
            let lo: Vec<f64> = reports.iter().map(|r| r.lower.value).collect();
            let ok = |v: &[f64]| v.last().is_some_and(|l| *l <= ex.slack_tol) && v.windows(2).all(|w| w[1] < w[0]);
            let pass = ok(&up) && ok(&lo);
            println!("N* = {}; final slacks <= {} and decreasing: {}", reports[0].constants.n_star, ex.slack_tol, verdict(pass));
            ctx.out.table(
                "dagger",
                &["n", "b", "upper", "lower", "remainder"],
                &reports.iter().map(|r| vec![r.n as f64, r.b, r.upper.value, r.lower.value, r.remainder]).collect::<Vec<_>>(),
            )?;
            ctx.out.report(&json!({ "reports": reports, "pass": pass }))?;
            Ok(pass)
        }
        VerifyKind::Cutoff => verify_cutoff(ctx),
    }
}

/// Scans `chi_n` for the identity band, plateaus, monotonicity, continuity
/// and the derivative bounds `|chi'| <= 1.25`, `|chi''| <= 4`.
fn verify_cutoff(ctx: &Ctx) -> Result<bool> {
    let cfg = &ctx.cfg;
    let p = params(cfg)?;
    let sch = schedule(cfg)?;
    let consts = bound_constants(&profile(cfg), cfg.expansion.eps, &p, &sch)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for &n in &cfg.expansion.ns {
        let scale = FluctuationScale::new(p.with_n(n)?, &sch)?;
        let radius = CutoffSpec::radius_for(&scale);
        let Ok(c) = CutoffSpec::new(&scale) else {
            println!("n={n:<10} R={radius:.4}: band too narrow, chi_n not defined");
            rows.push(json!({ "n": n, "radius": radius, "defined": false }));
            continue;
        };
        let (mut d1, mut d2, mut ident, mut plateau, mut mono, mut jump) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, true, 0.0f64);
        let lim = radius + 1.0;
        let steps = 20_000;
        let mut prev: Option<[f64; 3]> = None;
        for i in 0..=steps {
            let z = -lim + 2.0 * lim * i as f64 / steps as f64;
            let v = c.chi(z);
            d1 = d1.max(v[1].abs());
            d2 = d2.max(v[2].abs());
            if z.abs() <= radius - 2.0 {
                ident = ident.max((v[0] - z).abs() + (v[1] - 1.0).abs() + v[2].abs());
            }
            if z.abs() >= radius {
                plateau = plateau.max((v[0].abs() - (radius - 1.0)).abs() + v[1].abs() + v[2].abs());
            }
            if let Some(q) = prev {
                mono &= v[0] >= q[0];
                jump = jump.max((v[0] - q[0]).abs());
            }
            prev = Some(v);
        }
        // continuity of the jet across the four band edges
        let mut edge_gap = 0.0f64;
        for e in [-radius, -(radius - 2.0), radius - 2.0, radius] {
            let (a, b) = (c.chi(e - 1e-9), c.chi(e + 1e-9));
            for k in 0..3 {
                edge_gap = edge_gap.max((a[k] - b[k]).abs());
            }
        }
        let ok = d1 <= 1.25 && d2 <= 4.0 && ident == 0.0 && plateau == 0.0 && mono && edge_gap < 1e-6;
        pass &= ok;
        rows.push(json!({ "n": n, "radius": radius, "defined": true, "sup_d1": d1, "sup_d2": d2,
                          "identity_error": ident, "plateau_error": plateau, "monotone": mono,
                          "edge_gap": edge_gap, "pass": ok }));
        println!("n={n:<10} R={radius:.4} sup|chi'|={d1:.4} sup|chi''|={d2:.4} monotone={mono} edge gap {edge_gap:.1e}: {}", verdict(ok));
    }
    println!("C = {:.4}, N1 = {}, N2 = {}, N* = {}", consts.cbar, consts.n1, consts.n2, consts.n_star);
    ctx.out.report(&json!({ "constants": consts, "rows": rows, "pass": pass }))?;
    Ok(pass)
}

/// Mesh floor for `action`: the file is read as the piecewise-linear path
/// through its nodes, and each segment is split so the midpoint rule sees
/// at least this many intervals.
const MIN_INTERVALS: usize = 4096;

fn refine(path: &Path, min_intervals: usize) -> Result<Path> {
    let segs = path.len() - 1;
    let k = min_intervals.div_ceil(segs).max(1);
    if k == 1 {
        return Ok(path.clone());
    }
    let (t, v) = (path.times(), path.values());
    let mut times = Vec::with_capacity(segs * k + 1);
    let mut values = Vec::with_capacity(segs * k + 1);
    for i in 0..segs {
        for j in 0..k {
            let w = j as f64 / k as f64;
            times.push(t[i] + w * (t[i + 1] - t[i]));
            values.push(v[i] + w * (v[i + 1] - v[i]));
        }
    }
    times.push(t[segs]);
    values.push(v[segs]);
    Path::new(times, values)
}

fn action_cmd(ctx: &Ctx, file: &std::path::Path) -> Result<bool> {
    let cfg = &ctx.cfg;
    let path = read_path_csv(std::fs::File::open(file)?)?;
    let initial = match cfg.variational.initial {
        InitialCostKind::Deterministic => InitialCost::Deterministic { x0: cfg.variational.x0 },
        InitialCostKind::Free => InitialCost::Free,
    };
    let fine = refine(&path, MIN_INTERVALS)?;
    let r = action(cfg.model.sigma, &fine, &initial)?;
    println!(
        "action: running {:.10} + initial {:.10} = {:.10} ({} nodes read, {} evaluated)",
        r.running_cost,
        r.initial_cost,
        r.total,
        path.len(),
        r.nodes
    );
    ctx.out.report(&json!({ "nodes_read": path.len(), "report": r, "total": r.total }))?;
    Ok(true)
}

fn optimal(ctx: &Ctx) -> Result<bool> {
    let v = &ctx.cfg.variational;
    let opts = OptimalPathOptions {
        max_iterations: v.max_iterations,
        gradient_tol: v.gradient_tol,
        shooting_steps: v.shooting_steps,
        agreement: v.agreement,
    };
    let r = optimal_path(ctx.cfg.model.sigma, v.x0, v.x_end, v.horizon, v.nodes, &opts)?;
    println!(
        "optimal path {} -> {} on [0, {}]: action {:.10} (shooting {:.10}, relative gap {:.2e}, {} Newton steps)",
        v.x0, v.x_end, v.horizon, r.action, r.shooting_action, r.relative_gap, r.iterations
    );
    ctx.out.path("path", &r.path)?;
    ctx.out.report(&json!({
        "action": r.action, "shooting_action": r.shooting_action, "shooting_p0": r.shooting_p0,
        "relative_gap": r.relative_gap, "iterations": r.iterations, "gradient_norm": r.gradient_norm,
    }))?;
    Ok(true)
}

fn resolvent_rhs(spec: &str, xs: &[f64]) -> Result<Vec<f64>> {
    match spec {
        "cos" => Ok(xs.iter().map(|x| x.cos()).collect()),
        "square" => Ok(xs.iter().map(|x| x * x).collect()),
        "bump" => Ok(xs.iter().map(|x| (-x * x).exp()).collect()),
        file => {
            let p = read_path_csv(std::fs::File::open(file)?)?;
            Ok(xs.iter().map(|&x| p.at(x)).collect())
        }
    }
}

fn resolvent(ctx: &Ctx) -> Result<bool> {
    let v = &ctx.cfg.variational;
    let mut p = ResolventProblem { sigma: ctx.cfg.model.sigma, lambda: v.lambda, domain: v.domain, h: vec![0.0; v.points] };
    let xs = p.grid();
    p.h = resolvent_rhs(&v.h, &xs)?;
    let s = solve_resolvent(&p, &p.h, v.tol, v.max_iterations)?;
    println!("resolvent: {} points, residual {:.2e} after {} iterations", xs.len(), s.residual, s.iterations);
    ctx.out.table("solution", &["x", "f", "h"], &xs.iter().zip(&s.f).zip(&p.h).map(|((x, f), h)| vec![*x, *f, *h]).collect::<Vec<_>>())?;
    ctx.out.report(&json!({ "problem": p, "residual": s.residual, "iterations": s.iterations }))?;
    Ok(true)
}

fn print_limit(r: &LimitTestReport) {
    println!(
        "{}: sizes {:?}, KS D = {:.5}, p = {:.4}, alpha {}{}: {}",
        r.name,
        r.sizes,
        r.statistic,
        r.p_value,
        r.alpha,
        if r.degenerate { " (degenerate)" } else { "" },
        verdict(r.pass)
    );
    for (k, v) in &r.extra {
        println!("  {k:<24} {v:.6}");
    }
}

fn check(ctx: &Ctx, which: CheckKind) -> Result<bool> {
    let cfg = &ctx.cfg;
    let mut spec = sim_spec(cfg)?;
    spec.horizon = cfg.check.t;
    match which {
        CheckKind::Clt | CheckKind::Ou => {
            let r = if matches!(which, CheckKind::Clt) {
                check_clt_increment(&spec, &ctx.workers)?
            } else {
                check_ou_limit(&spec, &ctx.workers)?
            };
            print_limit(&r);
            ctx.out.report(&r)?;
            Ok(r.pass)
        }
        CheckKind::Critical => {
            let r = check_critical_limit(&spec, cfg.check.t, &ctx.workers)?;
            print_limit(&r);
            let col = collapse_medians(&spec, &cfg.check.ns, cfg.check.t, &ctx.workers)?;
            let shrinking = col.windows(2).all(|w| w[1].median < w[0].median);
            for c in &col {
                println!("  collapse median n={:<10} {:.6}", c.n, c.median);
            }
            println!("  collapse shrinking: {}", verdict(shrinking));
            ctx.out.table("collapse", &["n", "median"], &col.iter().map(|c| vec![c.n as f64, c.median]).collect::<Vec<_>>())?;
            ctx.out.report(&json!({ "limit": r, "collapse": col, "collapse_shrinking": shrinking }))?;
            Ok(r.pass && shrinking)
        }
        CheckKind::Tail => {
            let p = params(cfg)?;
            let b = schedule(cfg)?.b(p.n())?;
            let r = tail_bound_check(cfg.check.a, &p, b)?;
            println!(
                "a = {}, n = {}, b_n = {:.5}: integral {:.6e} <= Feller {:.6e}: {}",
                r.a, r.n, r.b, r.integral, r.feller, verdict(r.holds)
            );
            println!("  printed bound (2 sigma^4 smaller) {:.6e}, holds: {}", r.displayed, r.displayed_holds);
            println!("  with exp(-{:.4}) removed: integral {:.10e}, Feller {:.10e}", r.exponent, r.integral_scaled, r.feller_scaled);
            let emp = if cfg.run.replicas > 0 {
                let mut s = spec.clone();
                s.horizon = cfg.sim.horizon;
                let e = tail_empirical(&s, cfg.check.a, b, &ctx.workers)?;
                println!(
                    "  empirical {}/{} = {:.4e}, Wilson [{:.3e}, {:.3e}], consistent with bound: {}",
                    e.hits, e.replicas, e.frequency, e.wilson.0, e.wilson.1, e.consistent
                );
                Some(e)
            } else {
                None
            };
            ctx.out.report(&json!({ "tail": r, "empirical": emp }))?;
            Ok(r.holds && emp.is_none_or(|e| e.consistent))
        }
        CheckKind::Containment => {
            let c = ContainmentSpec { sim: spec, ns: cfg.check.ns.clone(), boxes: cfg.check.boxes.clone() };
            let t = containment_diagnostic(&c, &ctx.workers)?;
            println!("{:>10} {:>7} {:>8} {:>16} {:>14}", "n", "box", "exits", "p_hat", "-(b^4/n)log p");
            for r in &t.rows {
                let norm = r.normalized.map_or("-".to_string(), |v| format!("{v:.5}"));
                println!("{:>10} {:>7} {:>8} {:>16} {:>14}", r.n, r.half_width, r.exits, r.display, norm);
            }
            for u in &t.upsilon {
                println!("  n={:<10} mean running max Upsilon {:.5}, sup H_n Upsilon on smallest box {:.5}", u.n, u.mean_running_max, u.sup_h_upsilon);
            }
            println!("decay in box: {}, decay in n: {}", verdict(t.decay_in_box), verdict(t.decay_in_n));
            ctx.out.table(
                "containment",
                &["n", "box", "exits", "replicas", "p_hat", "wilson_lo", "wilson_hi"],
                &t.rows.iter().map(|r| vec![r.n as f64, r.half_width, r.exits as f64, r.replicas as f64, r.p_hat, r.wilson.0, r.wilson.1]).collect::<Vec<_>>(),
            )?;
            ctx.out.report(&t)?;
            Ok(t.decay_in_box && t.decay_in_n)
        }
    }
}

fn rate(ctx: &Ctx) -> Result<bool> {
    let cfg = &ctx.cfg;
    let r = &cfg.rate;
    let (start, slope) = (r.start, r.slope);
    let spec = RateSpec {
        sigma: cfg.model.sigma,
        gamma: Path::uniform(r.horizon, 2, |t| start + slope * t),
        delta: r.delta,
        ns: r.ns.clone(),
        schedule: schedule(cfg)?,
        dt: cfg.sim.dt,
        replicas: cfg.run.replicas,
        seed: cfg.run.seed,
        engine: cfg.sim.engine,
    };
    let est = estimate_rate(&spec, &ctx.workers)?;
    println!("{:>10} {:>9} {:>8} {:>12} {:>12} {:>24}", "n", "speed", "hits", "p_hat", "normalized", "interval");
    for row in &est.rows {
        let norm = row.normalized.map_or("inf".to_string(), |v| format!("{v:.5}"));
        println!(
            "{:>10} {:>9.3} {:>8} {:>12.4e} {:>12} {:>11.4} .. {:<11.4}",
            row.n, row.speed, row.hits, row.p_hat, norm, row.normalized_interval.0, row.normalized_interval.1
        );
    }
    for c in &est.candidates {
        println!("  {:<32} action {:.6} max dev {:.4} inside {}", c.label, c.action, c.max_deviation, c.inside);
    }
    println!(
        "I(gamma) = {:.6}, best tube action {:.6} (tube infimum approximated by the scan); positive {}, increasing {}, within x3 {}: {}",
        est.gamma_action, est.best_action, est.positive, est.increasing, est.within_factor_3, verdict(est.verdict())
    );
    ctx.out.table(
        "exponent",
        &["n", "normalized", "lower", "upper"],
        &est.rows
            .iter()
            .map(|r| vec![r.n as f64, r.normalized.unwrap_or(f64::INFINITY), r.normalized_interval.0, r.normalized_interval.1])
            .collect::<Vec<_>>(),
    )?;
    ctx.out.report(&est)?;
    Ok(est.verdict())
}

fn limits_audit(ctx: &Ctx, only: &[u8]) -> Result<bool> {
    let actx = AuditContext { seed: ctx.cfg.run.seed, workers: Workers::new(ctx.threads)? };
    let mut outcomes = Vec::new();
    for id in 1..=12u8 {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let o = audit::run(id, &actx);
        println!("criterion {:>2} {:<30} {}  {}", o.id, o.title, verdict(o.pass), o.detail);
        outcomes.push(o);
    }
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no criteria selected".into()));
    }
    let pass = outcomes.iter().all(|o| o.pass);
    ctx.out.report(&outcomes)?;
    Ok(pass)
}
