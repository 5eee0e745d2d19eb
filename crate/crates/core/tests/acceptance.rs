//! Acceptance run: one line per criterion, non-zero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use alpha_csf::cli::profile_with_refinement;
use alpha_csf::entropy;
use alpha_csf::flow::{self, FlowConfig, FlowMode};
use alpha_csf::modes;
use alpha_csf::shrinker::{self, ProfileKind};
use alpha_csf::spectral;
use alpha_csf::{AngularGrid, SupportFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.1} s over {limit_s} s", elapsed.as_secs_f64())
    })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn circle_spectrum() -> Outcome {
    let start = Instant::now();
    let grid = AngularGrid::new(256).map_err(err)?;
    let h = SupportFunction::circle(&grid, 1.0);
    let d = spectral::decompose(&h, 0.125, Some(22)).map_err(err)?;
    let mut worst = 0.0f64;
    // ascending order: l = 0 once, then each l >= 1 twice
    for l in 0..=10usize {
        let exact = 0.125 * ((l * l) as f64 - 1.0) - 1.0;
        let slots = if l == 0 { vec![0] } else { vec![2 * l - 1, 2 * l] };
        for idx in slots {
            worst = worst.max((d.eigenvalues[idx] - exact).abs());
        }
    }
    check(worst < 1e-9, || format!("max |dlambda| = {worst:.2e}"))?;
    for (alpha, kernel) in [(0.125, 2), (1.0 / 15.0, 2), (0.5, 0), (0.2, 0)] {
        let d = spectral::decompose(&h, alpha, Some(30)).map_err(err)?;
        check(d.kernel_dim == kernel, || {
            format!("kernel_dim = {} at alpha = {alpha}, expected {kernel}", d.kernel_dim)
        })?;
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("max |dlambda| = {worst:.1e}"))
}

fn shrinker_construction() -> Outcome {
    let start = Instant::now();
    let alpha = 1.0 / 24.0;
    let mut notes = Vec::new();
    for k in [3, 4] {
        let p = profile_with_refinement(alpha, ProfileKind::KFold(k), None).map_err(err)?;
        let seg = shrinker::segment_for_k(alpha, k).map_err(err)?;
        let drift = seg.first_integral_drift();
        check(p.residual < 1e-7, || format!("k = {k}: residual {:.2e}", p.residual))?;
        check(drift < 1e-9, || format!("k = {k}: first integral drift {drift:.2e}"))?;
        notes.push(format!("k{k} res {:.1e} drift {:.1e}", p.residual, drift));
    }
    for a in [0.125, 1.0 / 15.0, alpha] {
        let theta = shrinker::period(a, 1.0 + 1e-8).map_err(err)?;
        let limit = PI * (a / (1.0 + a)).sqrt();
        check((theta - limit).abs() < 1e-6, || {
            format!("Theta({a}, 1+) = {theta}, limit {limit}")
        })?;
    }
    within(start.elapsed(), 10.0)?;
    Ok(notes.join(", "))
}

fn shrinker_morse() -> Outcome {
    let alpha = 1.0 / 24.0;
    let mut notes = Vec::new();
    for (k, morse) in [(3, 5), (4, 7)] {
        let p = profile_with_refinement(alpha, ProfileKind::KFold(k), None).map_err(err)?;
        let d = spectral::decompose(&p.h, alpha, Some(2 * k + 4)).map_err(err)?;
        check(d.morse_index == morse, || {
            format!("k = {k}: morse index {}, expected {morse}", d.morse_index)
        })?;
        check(d.kernel_dim == 1, || format!("k = {k}: kernel dim {}", d.kernel_dim))?;
        let ip = d.inner_product();
        let ht = p.h.derivative();
        let scale = ip.norm(&ht).map_err(err)?;
        let phi = &d.eigenfunctions[d.kernel()[0]];
        let sign = ip.inner(phi, &ht).map_err(err)?.signum();
        let diff: Vec<f64> = phi.iter().zip(&ht).map(|(a, b)| a - sign * b / scale).collect();
        let e = ip.norm(&diff).map_err(err)?;
        check(e < 1e-4, || format!("k = {k}: kernel vs h_theta {e:.2e}"))?;
        notes.push(format!("k{k} morse {} kernel err {e:.1e}", d.morse_index));
    }
    Ok(notes.join(", "))
}

fn entropy_ordering() -> Outcome {
    let mut worst_gap = f64::INFINITY;
    let mut worst_path = 0.0f64;
    for alpha in [1.0 / 24.0, 1.0 / 30.0] {
        let table = shrinker::entropy_ordering(alpha).map_err(err)?;
        check(table.len() >= 3, || format!("only {} profiles at alpha = {alpha}", table.len()))?;
        for pair in table.windows(2) {
            worst_gap = worst_gap.min(pair[0].1 - pair[1].1);
        }
        let grid = AngularGrid::new(256).map_err(err)?;
        let circle = entropy::entropy(&SupportFunction::circle(&grid, 1.0), alpha).map_err(err)?;
        check(circle.value.abs() < 1e-9, || format!("circle entropy {:.2e}", circle.value))?;
        for (kind, e) in table.iter().skip(1) {
            let p = profile_with_refinement(alpha, *kind, None).map_err(err)?;
            let direct = entropy::entropy(&p.h, alpha).map_err(err)?;
            worst_path = worst_path.max((direct.value - e).abs());
        }
    }
    check(worst_gap > 1e-6, || format!("smallest gap {worst_gap:.2e}"))?;
    check(worst_path < 1e-6, || format!("paths differ by {worst_path:.2e}"))?;
    Ok(format!("smallest gap {worst_gap:.2e}, path agreement {worst_path:.1e}"))
}

fn entropy_bound() -> Outcome {
    let start = Instant::now();
    let grid = AngularGrid::new(128).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bodies: Vec<SupportFunction> = (0..200).map(|_| common::random_body(&mut rng, &grid)).collect();
    let bound = 2f64.ln();
    let mut worst = f64::NEG_INFINITY;
    for alpha in [0.1, 0.25, 1.0 / 3.0] {
        for (i, u) in bodies.iter().enumerate() {
            let e = entropy::entropy(u, alpha).map_err(|e| format!("body {i}, alpha {alpha}: {e}"))?;
            worst = worst.max(e.value - bound);
        }
    }
    check(worst <= 1e-8, || format!("bound exceeded by {worst:.2e}"))?;
    within(start.elapsed(), 120.0)?;
    Ok(format!("max E - log 2 = {worst:.3}"))
}

fn entropy_monotonicity() -> Outcome {
    let alpha = 0.5;
    let grid = AngularGrid::new(128).map_err(err)?;
    let raw = SupportFunction::from_fn(&grid, |t| 1.0 + 0.2 * (2.0 * t).cos()).map_err(err)?;
    let u0 = flow::anchor_to_extinction(&raw, alpha).map_err(err)?;
    let mut cfg = FlowConfig::new(alpha, FlowMode::NormalizedTau, u0, 6.0);
    cfg.sample_interval = Some(0.05);
    cfg.log_entropy = true;
    let trace = flow::run(&cfg).map_err(err)?;
    check(trace.last().time >= 6.0 - 1e-9, || {
        format!("stopped at tau = {} ({})", trace.last().time, trace.terminal_reason)
    })?;
    let rise = flow::entropy_monotonicity_check(&trace);
    check(rise <= 1e-7, || format!("entropy rose by {rise:.2e}"))?;
    Ok(format!("{} samples, largest step change {rise:.1e}", trace.rows.len()))
}

fn area_law() -> Outcome {
    let mut notes = Vec::new();
    let grid = AngularGrid::new(128).map_err(err)?;
    for alpha in [0.5, 1.0] {
        let cfg = FlowConfig::new(alpha, FlowMode::Unnormalized, SupportFunction::circle(&grid, 1.0), 10.0);
        let trace = flow::run(&cfg).map_err(err)?;
        let p = 1.0 + alpha;
        let mut oracle = 0.0f64;
        for row in &trace.rows {
            let exact = PI * (1.0 - p * row.time).powf(2.0 / p);
            oracle = oracle.max(common::rel(row.area, exact));
        }
        let fit = flow::area_law_fit(&trace).map_err(err)?;
        let target = 2.0 / p;
        check(common::rel(fit.exponent, target) < 0.01, || {
            format!("alpha = {alpha}: exponent {}", fit.exponent)
        })?;
        check(oracle < 1e-6, || format!("alpha = {alpha}: area off the exact circle by {oracle:.2e}"))?;
        notes.push(format!("circle a={alpha} {:.6}", fit.exponent));
    }
    let alpha = 0.5;
    let u0 = SupportFunction::from_fn(&grid, |t| 1.0 + 0.2 * (2.0 * t).cos()).map_err(err)?;
    let trace = flow::run(&FlowConfig::new(alpha, FlowMode::Unnormalized, u0, 10.0)).map_err(err)?;
    let fit = flow::area_law_fit(&trace).map_err(err)?;
    check(common::rel(fit.exponent, 2.0 / 1.5) < 0.02, || {
        format!("perturbed: exponent {}", fit.exponent)
    })?;
    notes.push(format!("perturbed {:.6}", fit.exponent));
    Ok(notes.join(", "))
}

fn growth_rates() -> Outcome {
    let grid = AngularGrid::new(64).map_err(err)?;
    let h = SupportFunction::circle(&grid, 1.0);
    let mode = |m: f64| grid.nodes().iter().map(|t| (m * t).cos()).collect::<Vec<f64>>();
    let mut notes = Vec::new();
    for (alpha, m) in [(0.125, 2usize), (0.5, 3)] {
        let lambda = alpha * ((m * m) as f64 - 1.0) - 1.0;
        let g = spectral::measure_growth_rate_along(&h, alpha, &mode(m as f64), 1e-6, (0.5, 2.0)).map_err(err)?;
        check(common::rel(g.rate, -lambda) < 0.01, || {
            format!("alpha {alpha}, cos {m}theta: rate {} vs {}", g.rate, -lambda)
        })?;
        notes.push(format!("{:+.6}", g.rate));
    }
    let eps = 1e-3;
    let g = spectral::measure_growth_rate_along(&h, 0.125, &mode(3.0), eps, (0.5, 2.0)).map_err(err)?;
    check(g.rate.abs() < 10.0 * eps, || format!("neutral rate {}", g.rate))?;
    notes.push(format!("neutral {:+.1e}", g.rate));
    Ok(notes.join(", "))
}

fn slow_manifold_run(eps: f64) -> Result<modes::ModeTrace, String> {
    let k = 3;
    let alpha = modes::critical_alpha(k);
    let grid = AngularGrid::new(64).map_err(err)?;
    let v0 = modes::slow_manifold_perturbation(&grid, k, eps, 0.3, false).map_err(err)?;
    let mut cfg = FlowConfig::perturbation(alpha, SupportFunction::circle(&grid, 1.0), v0, 8.0);
    cfg.sample_interval = Some(0.01);
    cfg.snapshot_every = 1;
    let trace = flow::run(&cfg).map_err(err)?;
    modes::track_modes(&trace, k, 2 * k).map_err(err)
}

fn cstar() -> Outcome {
    let start = Instant::now();
    for k in 3..=12usize {
        let c = modes::cstar(k).map_err(err)?;
        let kk = (k * k) as f64;
        check(c == kk * (4.0 - kk) / 6.0, || format!("k = {k}: C* = {c}"))?;
    }
    let mut errors = Vec::new();
    for eps in [1e-3, 5e-4, 2.5e-4] {
        let mt = slow_manifold_run(eps)?;
        let m = modes::measure_cstar(&mt, (5.0, 8.0)).map_err(err)?;
        errors.push(common::rel(m.value, -7.5));
    }
    check(errors[0] < 0.15, || format!("eps = 1e-3: relative error {:.3}", errors[0]))?;
    check(errors.windows(2).all(|w| w[1] < w[0]), || format!("errors not decreasing: {errors:?}"))?;
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "exact for k = 3..12; relative errors {:.1e}, {:.1e}, {:.1e}",
        errors[0], errors[1], errors[2]
    ))
}

fn quasi_steady() -> Outcome {
    let mt = slow_manifold_run(1e-3)?;
    let tau_min = 5.0 / modes::circle_lambda(mt.alpha, 6);
    let qs = modes::quasi_steady(&mt, tau_min).map_err(err)?;
    check(qs.a0_relative < 0.2, || format!("A_0 off by {:.3}", qs.a0_relative))?;
    check(qs.q_relative < 0.2, || format!("Q off by {:.3}", qs.q_relative))?;
    Ok(format!("A_0 {:.3}, Q {:.3} over {} rows", qs.a0_relative, qs.q_relative, qs.rows_used))
}

fn geometry_properties() -> Outcome {
    let grid = AngularGrid::new(256).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let quarter = 1.0 / (4.0 * PI);
    for i in 0..100 {
        let u = common::random_body(&mut rng, &grid);
        let z = [rand::Rng::gen_range(&mut rng, -2.0..2.0), rand::Rng::gen_range(&mut rng, -2.0..2.0)];
        let t = u.translate(z);
        let (a, l, q) = (u.area().map_err(err)?, u.length().map_err(err)?, u.isoperimetric_ratio().map_err(err)?);
        check(common::rel(t.area().map_err(err)?, a) < 1e-10, || format!("body {i}: area moved"))?;
        check(common::rel(t.length().map_err(err)?, l) < 1e-10, || format!("body {i}: length moved"))?;
        check(common::rel(t.isoperimetric_ratio().map_err(err)?, q) < 1e-10, || format!("body {i}: ratio moved"))?;
        let (w, wt) = (u.radius_of_curvature(), t.radius_of_curvature());
        let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dw = w.iter().zip(&wt).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        check(dw / scale < 1e-10, || format!("body {i}: radius of curvature moved by {dw:.2e}"))?;
        let s = 0.37 + i as f64 * 0.05;
        let us = u.scaled(s);
        check(common::rel(us.area().map_err(err)?, s * s * a) < 1e-12, || format!("body {i}: area scaling"))?;
        check(common::rel(us.length().map_err(err)?, s * l) < 1e-12, || format!("body {i}: length scaling"))?;
        check(q <= quarter + 1e-12, || format!("body {i}: ratio {q} above 1/(4 pi)"))?;
    }
    let circle = SupportFunction::circle(&grid, 1.0).translate([0.3, -0.2]);
    let q = circle.isoperimetric_ratio().map_err(err)?;
    check((q - quarter).abs() < 1e-12, || format!("circle ratio {q}"))?;

    // trigonometric polynomial of degree < n/2: w = sum (1 - m^2) c_m cos(m t)
    let modes: Vec<(f64, f64)> = (0..127).map(|m| (m as f64, if m == 0 { 1.0 } else { 0.3 / (m * m) as f64 })).collect();
    let u = SupportFunction::from_fn(&grid, |t| modes.iter().map(|(m, c)| c * (m * t + 0.1 * m).cos()).sum()).map_err(err)?;
    let w = u.radius_of_curvature();
    let mut worst = 0.0f64;
    for (i, wi) in w.iter().enumerate() {
        let t = grid.theta(i);
        let exact: f64 = modes.iter().map(|(m, c)| (1.0 - m * m) * c * (m * t + 0.1 * m).cos()).sum();
        worst = worst.max((wi - exact).abs());
    }
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check(worst / scale < 1e-12, || format!("radius of curvature off by {:.2e}", worst / scale))?;
    Ok(format!("100 bodies; spectral exactness {:.1e}", worst / scale))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("circle spectrum", circle_spectrum),
        ("shrinker construction", shrinker_construction),
        ("morse index and kernel", shrinker_morse),
        ("entropy ordering", entropy_ordering),
        ("entropy bound", entropy_bound),
        ("entropy monotonicity", entropy_monotonicity),
        ("area law", area_law),
        ("linear growth rates", growth_rates),
        ("C* verification", cstar),
        ("quasi-steady relations", quasi_steady),
        ("geometry properties", geometry_properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name} ({secs:.1} s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1} s): {msg}", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
