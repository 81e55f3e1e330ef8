//! Subcommand bodies. Each resolves and checks its parameters before sampling anything.

use crate::config::Params;
use crate::error::CliError;
use crate::output::{write_atomic, Manifest, Report, Scales};
use boolperc::connectivity::EventSpec;
use boolperc::estimators::{
    correlation_length, critical_search, delta_derivative, estimate_event, estimate_event_curve, estimate_phi,
    estimate_pivotal, pivotal::finite_difference_delta, talagrand_diagnostic, two_arm_decay, CriticalMode,
    CriticalSearch,
};
use boolperc::exploration::{
    percolation_frequency, run_exploration, sprinkling_gain, ExplorationSetup, SprinkleGeometry, SprinkleParams,
};
use boolperc::hypercube::{
    dyadic::Dyadic, encoding_bounds_check, talagrand_check, BooleanFunction, Table,
};
use boolperc::sampling::{encoding_check, io as cfg_io, Sampler, SamplerSpec};
use boolperc::{Estimate, Region, Window};
use std::path::Path;

pub const OPS: [&str; 18] = [
    "sample",
    "estimate-event",
    "crossing",
    "lambda-c",
    "lambda-hat-c",
    "slab",
    "phi",
    "correlation-length",
    "pivotal",
    "delta-derivative",
    "talagrand-diagnostic",
    "two-arm",
    "hypercube-check",
    "encoding-check",
    "explore-gm",
    "explore-abstract",
    "sprinkle-gain",
    "merge",
];

/// One-line help text for a subcommand.
pub fn about(op: &str) -> &'static str {
    match op {
        "sample" => "Draw one configuration and dump its balls",
        "estimate-event" => "Estimate the probability of an event",
        "crossing" => "Estimate the probability that B_inner is connected to the sphere of radius outer",
        "lambda-c" => "Bracket the critical intensity from P(0 <-> dB_r) on a scale ladder",
        "lambda-hat-c" => "Bracket the critical intensity from P(B_r <-> dB_2r) on a scale ladder",
        "slab" => "Bracket the critical intensity of the slab of thickness k",
        "phi" => "Estimate the phi functional of a ball",
        "correlation-length" => "Smallest radius where phi drops below 1/e",
        "pivotal" => "Estimate the pivotal integral of one cell",
        "delta-derivative" => "Derivative of an event probability in delta, by Mecke formula and finite difference",
        "talagrand-diagnostic" => "Compare the influence sum with the variance of an event",
        "two-arm" => "Two-arm probabilities and bad-ball counts",
        "hypercube-check" => "Check the dyadic identities for every Boolean function of n bits",
        "encoding-check" => "Compare encoded and exact configurations at several depths",
        "explore-gm" => "Run the box exploration with sprinkling",
        "explore-abstract" => "Run the abstract site exploration",
        "sprinkle-gain" => "Probability of reaching the target before and after sprinkling",
        _ => "",
    }
}

/// Runs `op` and writes its outputs to `out`.
pub fn run(op: &str, p: &Params, out: &Path) -> Result<(), CliError> {
    match op {
        "sample" => sample(p, out),
        "hypercube-check" => hypercube(p, out),
        "encoding-check" => encoding(p, out),
        _ => {
            let report = match op {
                "estimate-event" => estimate(op, p, p.event()?)?,
                "crossing" => {
                    let ev = EventSpec::Crossing { inner: p.inner.unwrap_or(0.0), outer: p.req_f64(p.outer, "outer")? };
                    estimate(op, p, ev)?
                }
                "lambda-c" => critical(op, p, CriticalMode::LambdaC)?,
                "lambda-hat-c" => critical(op, p, CriticalMode::LambdaHatC)?,
                "slab" => critical(op, p, CriticalMode::Slab { k: p.req_f64(p.k, "k")? })?,
                "phi" => phi(op, p)?,
                "correlation-length" => corr_length(op, p)?,
                "pivotal" => pivotal(op, p)?,
                "delta-derivative" => derivative(op, p)?,
                "talagrand-diagnostic" => talagrand(op, p)?,
                "two-arm" => two_arm(op, p)?,
                "explore-gm" => explore_gm(op, p)?,
                "explore-abstract" => explore_abstract(op, p)?,
                "sprinkle-gain" => sprinkle(op, p)?,
                other => return Err(CliError::Config(format!("unknown subcommand `{other}`"))),
            };
            report.write(out, p)
        }
    }
}

/// Columns `(n, N, rho, scale)` describing an event.
fn event_scales(ev: &EventSpec) -> Scales {
    let mut s = Scales::default();
    match *ev {
        EventSpec::Crossing { outer, .. } => s.scale = Some(outer),
        EventSpec::Seed { n, big_n, rho } => {
            s.n = Some(n);
            s.big_n = Some(big_n);
            s.rho = Some(rho);
        }
        EventSpec::BigBall { n, threshold } => {
            s.n = Some(n);
            s.scale = Some(threshold);
        }
        EventSpec::TwoArm { k, big_k } => {
            s.n = Some(k);
            s.scale = Some(big_k);
        }
        EventSpec::Connection { ref b, .. } => s.scale = Some(b.bounding_radius()),
        EventSpec::GeneralSeed { min_radius, .. } => s.n = Some(min_radius),
    }
    s
}

fn with_lambda(mut s: Scales, lambda: f64) -> Scales {
    s.lambda = Some(lambda);
    s
}

fn estimate(op: &str, p: &Params, ev: EventSpec) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    let scales = event_scales(&ev);
    match &p.lambdas {
        Some(ls) if !ls.is_empty() => {
            let points: Vec<(f64, Option<f64>)> = ls.iter().map(|&l| (l, None)).collect();
            for (l, e) in ls.iter().zip(estimate_event_curve(&ev, &mu, &points, &mc)?) {
                rep.estimate(op, with_lambda(scales, *l), &e);
            }
        }
        _ => {
            let lambda = p.lambda()?;
            let e = estimate_event(&ev, lambda, &mu, &mc)?;
            rep.estimate(op, with_lambda(scales, lambda), &e);
        }
    }
    Ok(rep)
}

fn critical(op: &str, p: &Params, mode: CriticalMode) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let mut cs = CriticalSearch::new(
        p.req_f64(p.lambda_lo, "lambda_lo")?,
        p.req_f64(p.lambda_hi, "lambda_hi")?,
        p.tolerance.unwrap_or(0.01),
        p.ladder.clone().unwrap_or_else(|| vec![4.0, 8.0, 16.0]),
    );
    if let Some(t) = p.theta {
        cs.theta = t;
    }
    if let Some(m) = p.max_replicas {
        cs.max_replicas = m;
    }
    cs.validate()?;
    let res = critical_search(&cs, &mu, mode, &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    let k = match mode {
        CriticalMode::Slab { k } => Some(k),
        _ => None,
    };
    for step in &res.trace {
        for (scale, e) in &step.ladder {
            let s = Scales { lambda: Some(step.lambda), n: k, scale: Some(*scale), ..Scales::default() };
            rep.estimate(&format!("{op}:step"), s, e);
        }
    }
    let s = Scales { n: k, scale: Some(res.scale), ..Scales::default() };
    rep.value(op, s, res.midpoint(), 0.5 * (res.hi - res.lo), (res.lo, res.hi), mc.replicas, mc.seed);
    rep.extra = serde_json::json!({ "theta": res.theta, "mode": res.mode });
    Ok(rep)
}

fn phi(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let n = p.req_f64(p.n, "n")?;
    let s = p.req_f64(p.s, "s")?;
    let lambda = p.lambda()?;
    let e = estimate_phi(n, &Region::ball_at_origin(p.dim()?, s), lambda, &mu, &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    rep.estimate(op, Scales { lambda: Some(lambda), n: Some(n), scale: Some(s), ..Scales::default() }, &e);
    Ok(rep)
}

fn corr_length(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let n = p.req_f64(p.n, "n")?;
    let lambda = p.lambda()?;
    let ell_max = p.req_f64(p.ell_max, "ell_max")?;
    let cl = correlation_length(n, lambda, &mu, ell_max, p.ratio.unwrap_or(2.0), &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    for (s, e) in &cl.grid {
        rep.estimate(&format!("{op}:phi"), Scales { lambda: Some(lambda), n: Some(n), scale: Some(*s), ..Scales::default() }, e);
    }
    let s = Scales { lambda: Some(lambda), n: Some(n), scale: Some(ell_max), ..Scales::default() };
    rep.value(op, s, cl.length, 0.0, (cl.length, cl.length), mc.replicas, mc.seed);
    Ok(rep)
}

fn pivotal(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let ev = p.event()?;
    let d = p.dim()?;
    let lambda = p.lambda()?;
    let x = p.x.clone().unwrap_or_else(|| vec![0.0; d]);
    if x.len() != d {
        return Err(CliError::Config(format!("x has {} coordinates, d = {d}", x.len())));
    }
    let band = p.band.unwrap_or(1);
    let e = estimate_pivotal(&ev, &x, band, lambda, &mu, p.draws.unwrap_or(64), &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    rep.estimate(op, with_lambda(event_scales(&ev), lambda), &e);
    rep.extra = serde_json::json!({ "x": x, "band": band });
    Ok(rep)
}

fn derivative(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let ev = p.event()?;
    let lambda = p.lambda()?;
    let dd = delta_derivative(&ev, lambda, &mu, p.draws.unwrap_or(64), p.tail_budget.unwrap_or(1e-3), &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    let s = with_lambda(event_scales(&ev), lambda);
    rep.estimate(op, s, &dd.estimate);
    if let Some(h) = p.h {
        // the coupled difference estimates the negative derivative; flip it so both rows share a sign
        let fd = finite_difference_delta(&ev, lambda, &mu, h, &mc)?;
        let mut acc = fd.acc;
        acc.sum = -acc.sum;
        let fd = Estimate::from_accumulator(acc, fd.kind, fd.seed, fd.bias_note);
        rep.estimate(&format!("{op}:fd"), s, &fd);
    }
    rep.extra = serde_json::json!({ "r_max": dd.r_max, "tail_bound": dd.tail_bound });
    Ok(rep)
}

fn talagrand(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let ev = p.event()?;
    let lambda = p.lambda()?;
    let t = talagrand_diagnostic(&ev, lambda, &mu, p.cell_budget.unwrap_or(400), p.draws.unwrap_or(32), &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    let s = with_lambda(event_scales(&ev), lambda);
    let z = 1.959963984540054;
    rep.value(&format!("{op}:lhs"), s, t.lhs, t.lhs_stderr, (t.lhs - z * t.lhs_stderr, t.lhs + z * t.lhs_stderr), mc.replicas, mc.seed);
    rep.estimate(&format!("{op}:probability"), s, &t.probability);
    let ratio = t.ratio.unwrap_or(f64::NAN);
    rep.value(&format!("{op}:ratio"), s, ratio, f64::NAN, (ratio, ratio), mc.replicas, mc.seed);
    rep.extra = serde_json::json!({ "max_piv": t.max_piv, "rhs_factor": t.rhs_factor, "cells": t.cells, "degenerate": t.degenerate() });
    Ok(rep)
}

fn two_arm(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let k = p.req_f64(p.k, "k")?;
    let ks = p.ks.clone().ok_or_else(|| CliError::Config("missing required key `ks`".into()))?;
    let lambda = p.lambda()?;
    let r = two_arm_decay(k, &ks, lambda, &mu, &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    for pt in &r.points {
        let s = Scales { lambda: Some(lambda), n: Some(k), scale: Some(pt.big_k), ..Scales::default() };
        rep.estimate(op, s, &pt.two_arm);
        rep.estimate(&format!("{op}:bad"), s, &pt.bad);
        rep.value(&format!("{op}:bad-exact"), s, pt.bad_exact, 0.0, (pt.bad_exact, pt.bad_exact), 0, mc.seed);
    }
    rep.extra = serde_json::json!({ "decreasing_within_ci": r.decreasing_within_ci });
    Ok(rep)
}

fn explore_gm(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let lambda = p.lambda()?;
    let setup = ExplorationSetup::new(
        p.dim()?,
        p.req_f64(p.n, "n")?,
        p.req_f64(p.big_n, "N")?,
        p.half_sites.unwrap_or(4),
    );
    setup.validate()?;
    let sprinkle = match (p.beta, p.xi) {
        (Some(b), Some(x)) => SprinkleParams::new(b, x),
        (None, None) => SprinkleParams::none(),
        _ => return Err(CliError::Config("beta and xi must be given together".into())),
    };
    sprinkle.validate()?;
    let truncation = p.truncation();
    // surfaces truncation and parameter errors before the replicas start
    Sampler::new(SamplerSpec::new(lambda, mu.clone(), setup.window()).truncation(truncation))?;
    let runs = mc.run(|s, _| run_exploration(lambda, &mu, &setup, &sprinkle, truncation, s));
    let runs: Vec<_> = runs.into_iter().collect::<Result<_, _>>()?;
    if let Some(path) = &p.trace {
        let mut buf = Vec::new();
        runs[0].write_trace(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    let hits: Vec<bool> = runs.iter().map(|o| o.reached_boundary).collect();
    let sizes: Vec<f64> = runs.iter().map(|o| o.accepted as f64).collect();
    let mut rep = Report::new(op, p, Some(&mu))?;
    let s = Scales {
        lambda: Some(lambda),
        n: Some(setup.n),
        big_n: Some(setup.big_n),
        scale: Some(setup.half_sites as f64),
        ..Scales::default()
    };
    rep.estimate(op, s, &Estimate::bernoulli(&hits, mc.seed, 0.0));
    rep.estimate(&format!("{op}:accepted"), s, &Estimate::mean(&sizes, mc.seed, 0.0));
    rep.extra = serde_json::json!({ "sprinkle": sprinkle });
    Ok(rep)
}

fn explore_abstract(op: &str, p: &Params) -> Result<Report, CliError> {
    let mc = p.mc()?;
    let qs = p.q.clone().ok_or_else(|| CliError::Config("missing required key `q`".into()))?;
    if let Some(q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(CliError::Config(format!("q must lie in [0, 1], got {q}")));
    }
    let m = p.half_sites.unwrap_or(64);
    let mut rep = Report::new(op, p, None)?;
    for &q in &qs {
        let e = percolation_frequency(q, m, &mc)?;
        rep.estimate(op, Scales { lambda: Some(q), scale: Some(m as f64), ..Scales::default() }, &e);
    }
    Ok(rep)
}

fn sprinkle(op: &str, p: &Params) -> Result<Report, CliError> {
    let mu = p.measure()?;
    let mc = p.mc()?;
    let d = p.dim()?;
    let lambda = p.lambda()?;
    let a = p.a_size.unwrap_or(1.0);
    let room = p.room.unwrap_or(4.0);
    let target = p.target.unwrap_or(3.5);
    let geom = match p.geometry.as_deref().unwrap_or("ball") {
        "ball" => SprinkleGeometry {
            a: Region::ball_at_origin(d, a),
            room: Window::ball(d, room),
            targets: Some(Region::sphere_at_origin(d, target)),
            target_balls: None,
        },
        "cube" => SprinkleGeometry {
            a: Region::cube_at_origin(d, a),
            room: Window::cube(d, room),
            targets: Some(Region::CubeBoundary { center: vec![0.0; d], half: target }),
            target_balls: None,
        },
        other => return Err(CliError::Config(format!("unknown geometry `{other}`"))),
    };
    geom.validate()?;
    let r = sprinkling_gain(&geom, lambda, &mu, p.req_f64(p.beta, "beta")?, p.xi, &mc)?;
    let mut rep = Report::new(op, p, Some(&mu))?;
    let s = Scales { lambda: Some(lambda), n: Some(a), big_n: Some(target), scale: Some(room), ..Scales::default() };
    rep.estimate(&format!("{op}:hypothesis"), s, &r.hypothesis);
    rep.estimate(&format!("{op}:conditioning"), s, &r.conditioning);
    rep.estimate(&format!("{op}:before"), s, &r.before);
    rep.estimate(&format!("{op}:after"), s, &r.after);
    let hb = r.hypothesis_bound;
    let cb = r.conclusion_bound;
    rep.value(&format!("{op}:hypothesis-bound"), s, hb, 0.0, (hb, hb), 0, mc.seed);
    rep.value(&format!("{op}:conclusion-bound"), s, cb, 0.0, (cb, cb), 0, mc.seed);
    rep.extra = serde_json::json!({ "params": r.params, "hypothesis_holds": r.hypothesis_holds(), "conclusion_holds_3sigma": r.conclusion_holds(3.0) });
    Ok(rep)
}

fn bare_manifest(op: &str, p: &Params, rows: usize, seed: u64, extra: serde_json::Value) -> Manifest {
    Manifest {
        artifact: "boolperc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        op: op.into(),
        run_id: crate::output::run_id(op, p),
        config: p.clone(),
        seeds: vec![seed],
        bias_notes: vec![],
        rows,
        stats: vec![],
        wall_ms: 0,
        extra,
    }
}

fn write_with_manifest(out: &Path, csv: &[u8], m: &Manifest) -> Result<(), CliError> {
    write_atomic(&crate::output::manifest_path(out), &serde_json::to_vec_pretty(m).expect("manifest serializes"))?;
    write_atomic(out, csv)
}

fn sample(p: &Params, out: &Path) -> Result<(), CliError> {
    let mu = p.measure()?;
    let lambda = p.lambda()?;
    let window = Window::ball(p.dim()?, p.req_f64(p.room, "room")?);
    let sampler = Sampler::new(SamplerSpec::new(lambda, mu.clone(), window).truncation(p.truncation()))?;
    let start = std::time::Instant::now();
    let cfg = sampler.sample(p.seed());
    let mut buf = Vec::new();
    cfg_io::write_csv(&cfg, &mut buf)?;
    let extra = serde_json::to_value(cfg_io::manifest(&cfg, &mu)).expect("manifest serializes");
    let mut m = bare_manifest("sample", p, cfg.len(), p.seed(), extra);
    m.wall_ms = start.elapsed().as_millis() as u64;
    write_with_manifest(out, &buf, &m)
}

fn parse_p(p: &Params, bits: usize) -> Result<Vec<Dyadic>, CliError> {
    let raw = p.p.clone().unwrap_or_else(|| vec!["1/2".into()]);
    let vals: Vec<Dyadic> = raw
        .iter()
        .map(|s| Dyadic::parse(s).ok_or_else(|| CliError::Config(format!("p = {s:?} is not a dyadic rational"))))
        .collect::<Result<_, _>>()?;
    match vals.len() {
        1 => Ok(vec![vals[0].clone(); bits]),
        k if k == bits => Ok(vals),
        k => Err(CliError::Config(format!("p has {k} entries for {bits} variables"))),
    }
}

fn hypercube(p: &Params, out: &Path) -> Result<(), CliError> {
    let n = p.n.unwrap_or(3.0);
    if n.fract() != 0.0 || !(1.0..=4.0).contains(&n) {
        return Err(CliError::Config(format!("hypercube-check enumerates n in 1..=4 variables, got {n}")));
    }
    let bits = n as usize;
    let pv = parse_p(p, bits)?;
    let p_text = pv.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
    let start = std::time::Instant::now();
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["function_id", "p", "lhs", "variance", "max_term", "implied_c", "degenerate", "identity", "bounds"])?;
    let (mut min_c, mut all_ok) = (f64::INFINITY, true);
    for id in 0..1u64 << (1u64 << bits) {
        let f = BooleanFunction::new(Table::numbered(bits, id).map_err(|e| CliError::Config(e.to_string()))?, pv.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        let lifted = f.lift().map_err(|e| CliError::Other(e.to_string()))?;
        let reports: Vec<_> = (0..bits).map(|i| encoding_bounds_check(&f, &lifted, i)).collect();
        let identity = reports.iter().all(|r| r.bits.iter().all(|b| b.identity));
        let bounds = reports.iter().all(|r| r.bits.iter().all(|b| b.within_bound) && r.aggregate_holds);
        let t = talagrand_check(&f);
        if !t.degenerate {
            min_c = min_c.min(t.implied_c);
        }
        all_ok &= identity && bounds;
        wr.write_record([
            id.to_string(),
            p_text.clone(),
            format!("{:?}", t.lhs),
            format!("{:?}", t.variance),
            format!("{:?}", t.max_term),
            format!("{:?}", t.implied_c),
            t.degenerate.to_string(),
            identity.to_string(),
            bounds.to_string(),
        ])?;
    }
    let buf = wr.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
    let mut m = bare_manifest(
        "hypercube-check",
        p,
        1 << (1 << bits),
        0,
        serde_json::json!({ "min_implied_c": min_c, "all_hold": all_ok }),
    );
    m.wall_ms = start.elapsed().as_millis() as u64;
    write_with_manifest(out, &buf, &m)?;
    if !all_ok {
        return Err(CliError::Other("an exact identity or bound failed".into()));
    }
    Ok(())
}

fn encoding(p: &Params, out: &Path) -> Result<(), CliError> {
    let d = p.dim()?;
    let lambda = p.lambda()?;
    let delta = p.delta.unwrap_or(1.0);
    let x: Vec<i64> = match &p.x {
        Some(v) if v.iter().all(|a| a.fract() == 0.0) && v.len() == d => v.iter().map(|&a| a as i64).collect(),
        Some(v) => return Err(CliError::Config(format!("x must hold {d} integers, got {v:?}"))),
        None => vec![0; d],
    };
    let band = p.band.unwrap_or(1);
    let depths = p.depths.clone().unwrap_or_else(|| vec![4, 8]);
    let start = std::time::Instant::now();
    let chk = encoding_check(lambda, delta, d, (x, band), p.replicas()?, &depths, p.seed())?;
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["depth", "replicas", "count_p", "radius_p", "min_error", "max_error", "bound", "holds"])?;
    for pc in &chk.projection {
        wr.write_record([
            pc.depth.to_string(),
            chk.replicas.to_string(),
            format!("{:?}", chk.count_p),
            format!("{:?}", chk.radius_p),
            format!("{:?}", pc.min_error),
            format!("{:?}", pc.max_error),
            format!("{:?}", pc.bound),
            pc.holds().to_string(),
        ])?;
    }
    let buf = wr.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
    let ok = chk.projection.iter().all(|pc| pc.holds());
    let mut m = bare_manifest("encoding-check", p, chk.projection.len(), p.seed(), serde_json::to_value(&chk).expect("serializes"));
    m.wall_ms = start.elapsed().as_millis() as u64;
    write_with_manifest(out, &buf, &m)?;
    if !ok {
        return Err(CliError::Other("projection error bound failed".into()));
    }
    Ok(())
}
