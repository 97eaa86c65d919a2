//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as its own binary (`harness = false`) so the lines are printed even
//! when everything passes: `cargo test -p wcs-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wcs_core::config::RunConfig;
use wcs_core::curvature::verify_curvature_pullback;
use wcs_core::geometry::DerivativeEngine;
use wcs_core::homotopy::{random_homotopy_points, stokes_check, vanishing_scan, verify_isometry};
use wcs_core::ktensor::{build_k, k_gradient, tilde_k};
use wcs_core::loops::{invariant_i, pullback_form_at, scaling_check};
use wcs_core::suite::{self, cartan_agreement, Context};
use wcs_core::zoo::{make_berger_s5, make_flat_torus, make_round_sphere, ZooEntry};
use wcs_core::{riemann_at, ContractionSchedule, KField, Result, ThetaGrid};

struct Outcome {
    pass: bool,
    detail: String,
    /// Failure caused by the host rather than the code.
    environmental: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Outcome {
        Outcome { pass, detail, environmental: false }
    }
}

fn series() -> DerivativeEngine {
    DerivativeEngine::series()
}

fn kfield(e: &ZooEntry) -> KField {
    KField::new(e.metric.clone(), series()).unwrap()
}

fn rel(v: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        v.abs() / scale
    } else {
        v.abs()
    }
}

fn flat_torus_null() -> Result<Outcome> {
    let start = Instant::now();
    let e = make_flat_torus(5)?;
    let kf = kfield(&e);
    let theta = ThetaGrid::new(16);
    let (mut r, mut k, mut cs) = (0.0f64, 0.0f64, 0.0f64);
    for x in e.random_points(1000, 1) {
        let c = riemann_at(&e.metric, &x, &series())?;
        r = r.max(wcs_core::linalg::max_abs(&c.riemann_lowered));
        k = k.max(wcs_core::linalg::max_abs(&build_k(&c, &kf.schedule)?.kappa));
        for a in &e.actions {
            cs = cs.max(pullback_form_at(&kf, a, &x, &theta)?.value.abs());
        }
    }
    let grid = RunConfig::default().grid_for(e.chart(), None)?;
    for a in &e.actions {
        cs = cs.max(invariant_i(&kf, a, &grid, &theta, 1)?.value.abs());
    }
    let t = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        r < 1e-12 && k < 1e-12 && cs < 1e-12 && t < 60.0,
        format!("|R| {r:.1e}, |K| {k:.1e}, |CS| {cs:.1e}, {t:.1} s"),
    ))
}

/// Brute-force `κ` for dimension 5 straight from the definition.
fn naive_kappa(r: &[f64], nu: usize, lambda: [usize; 5]) -> (f64, f64) {
    let n = 5;
    let at = |a: usize, b: usize, c: usize, d: usize| r[((a * n + b) * n + c) * n + d];
    let (mut sum, mut mag) = (0.0, 0.0);
    for code in 0..3125usize {
        let p: Vec<usize> = (0..5).map(|i| (code / 5usize.pow(i)) % 5).collect();
        let mut seen = [false; 5];
        if p.iter().any(|&i| std::mem::replace(&mut seen[i], true)) {
            continue;
        }
        let inv = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        let sign = if inv % 2 == 0 { 1.0 } else { -1.0 };
        let l: Vec<usize> = p.iter().map(|&i| lambda[i]).collect();
        for e1 in 0..n {
            for e2 in 0..n {
                for e3 in 0..n {
                    let t = at(l[0], e1, nu, e2) * at(l[1], l[2], e2, e3) * at(l[3], l[4], e3, e1);
                    sum += sign * t;
                    mag += t.abs();
                }
            }
        }
    }
    (sum, mag)
}

fn k_antisymmetry() -> Result<Outcome> {
    let mut flip = 0.0f64;
    let mut oracle = 0.0f64;
    let sched = ContractionSchedule::cyclic(3);
    for (e, count) in [(make_round_sphere(5)?, 100), (make_berger_s5(0.5)?, 10)] {
        for x in e.random_points(count, 2) {
            let c = riemann_at(&e.metric, &x, &series())?;
            let k = build_k(&c, &sched)?;
            for nu in 0..5 {
                let id = [0, 1, 2, 3, 4];
                let (base, mag) = naive_kappa(&c.riemann_mixed, nu, id);
                oracle = oracle.max(rel(k.kappa[nu] - base, mag));
                for t in 0..4 {
                    let mut l = id;
                    l.swap(t, t + 1);
                    let (swapped, _) = naive_kappa(&c.riemann_mixed, nu, l);
                    flip = flip.max(rel(swapped + base, mag));
                    flip = flip.max(rel(k.get(nu, &l) + k.get(nu, &id), k.magnitude[nu]));
                }
            }
        }
    }
    Ok(Outcome::new(
        flip < 1e-9 && oracle < 1e-12,
        format!("transposition {flip:.1e}, brute force {oracle:.1e}"),
    ))
}

fn curvature_pullback() -> Result<Outcome> {
    let e = make_round_sphere(5)?;
    let pts = e.random_points(200, 3);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (_, iso) in e.isometries.iter().filter(|(l, _)| l.starts_with("orthogonal")) {
        let rep = verify_curvature_pullback(&e.metric, iso.as_ref(), &pts, &series())?;
        worst = worst.max(rep.curvature_deviation);
        count += 1;
    }
    Ok(Outcome::new(count > 0 && worst < 1e-8, format!("{count} SO(6) maps, max {worst:.1e}")))
}

fn tilde_k_check() -> Result<Outcome> {
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for e in [make_round_sphere(5)?, make_berger_s5(0.5)?] {
        for x in e.random_points(50, 4) {
            let g = k_gradient(&e.metric, &x, &series(), &ContractionSchedule::cyclic(3))?;
            let xi: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cols: Vec<Vec<f64>> = (0..6).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let frame: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            worst = worst.max(tilde_k(&g, &xi, &frame).relative());
        }
    }
    Ok(Outcome::new(worst < 1e-6, format!("max {worst:.1e} over 100 samples")))
}

fn dual_evaluator() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for e in [make_berger_s5(0.5)?, make_round_sphere(5)?] {
        let h = e.homotopy("generic-diffeo")?;
        let pts = random_homotopy_points(&e.sample_box, (0.05, 0.95), 50, 5);
        let rep = vanishing_scan(&kfield(&e), &h, &pts, &ThetaGrid::new(64))?;
        worst = worst.max(rep.max_dual_difference);
    }
    Ok(Outcome::new(worst < 1e-5, format!("max {worst:.1e}")))
}

fn cartan_oracle() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for e in [make_berger_s5(0.5)?, make_round_sphere(5)?] {
        let h = e.homotopy("generic-diffeo")?;
        let pts = random_homotopy_points(&e.sample_box, (0.05, 0.95), 20, 6);
        worst = worst.max(cartan_agreement(&kfield(&e), &h, &pts, 1e-2, &ThetaGrid::new(64))?);
    }
    Ok(Outcome::new(worst < 1e-4, format!("max relative {worst:.1e}")))
}

fn vanishing() -> Result<Outcome> {
    let theta = ThetaGrid::new(64);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (e, label) in [
        (make_round_sphere(5)?, "orthogonal-conjugation"),
        (make_berger_s5(0.5)?, "constant"),
        (make_berger_s5(0.5)?, "unitary-swap"),
    ] {
        let h = e.homotopy(label)?;
        verify_isometry(&e.metric, &h, &e.sample_box, &series(), 7)?;
        let pts = random_homotopy_points(&e.sample_box, (0.0, 1.0), 50, 7);
        let rep = vanishing_scan(&kfield(&e), &h, &pts, &theta)?;
        worst = worst.max(rep.max_reduced);
        parts.push(format!("{label} {:.1e}", rep.max_reduced));
    }
    let e = make_berger_s5(0.5)?;
    let pts = random_homotopy_points(&e.sample_box, (0.0, 1.0), 50, 7);
    let control = vanishing_scan(&kfield(&e), &e.homotopy("conformal")?, &pts, &theta)?.max_reduced;
    parts.push(format!("conformal control {control:.1e}"));
    Ok(Outcome::new(worst < 1e-6 && control > 10.0 * 1e-6, parts.join(", ")))
}

fn iterate_scaling() -> Result<Outcome> {
    let e = make_berger_s5(0.5)?;
    let kf = kfield(&e);
    let theta = ThetaGrid::new(64);
    let grid = RunConfig::default().grid_for(e.chart(), None)?;
    let pts = e.random_points(20, 8);
    let mut point = 0.0f64;
    let mut integral = 0.0f64;
    let mut resolved = true;
    for label in ["fiber-rotation", "rotation-z1"] {
        let a = e.action(label)?;
        for n in [2, 3] {
            let rep = scaling_check(&kf, &a, n, &pts, Some((&grid, 1)), &theta)?;
            point = point.max(rep.pointwise_deviation());
            match (rep.base_integral, rep.integral_ratio_deviation) {
                (Some(b), Some(d)) if b.is_nonzero() => integral = integral.max(d.abs()),
                _ => resolved = false,
            }
        }
    }
    Ok(Outcome::new(
        point < 1e-10 && integral < 1e-8 && resolved,
        format!("pointwise {point:.1e}, integral ratio {integral:.1e}"),
    ))
}

fn covering() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for t in [0.5, 1.5] {
        let cfg = RunConfig {
            metric: format!("berger:t={t}"),
            lens: vec![2, 3],
            iterates: vec![],
            workers: 1,
            ..RunConfig::default()
        };
        let out = suite::scaling(&cfg)?;
        for l in &out.lens {
            worst = worst.max(l.covering_deviation);
            parts.push(format!("t={t} p={} {:.1e}", l.p, l.covering_deviation));
        }
        if out.lens.len() != 2 {
            return Ok(Outcome::new(false, "lens evaluation failed".into()));
        }
    }
    Ok(Outcome::new(worst < 1e-8, parts.join(", ")))
}

fn stokes() -> Result<Outcome> {
    let e = make_berger_s5(0.5)?;
    let kf = kfield(&e);
    let grid = RunConfig::default().grid_for(e.chart(), None)?;
    let theta = ThetaGrid::new(64);
    let mut ok = true;
    let mut parts = Vec::new();
    for label in ["unitary-swap", "constant"] {
        let h = e.homotopy(label)?;
        let rep = stokes_check(&kf, &h, &e.sample_box, &grid, &theta, 1)?;
        ok &= rep.passed;
        parts.push(format!("{label} |ΔI| {:.2e} vs {:.2e}", rep.difference.abs(), rep.combined_error));
    }
    Ok(Outcome::new(ok, parts.join(", ")))
}

fn performance() -> Result<Outcome> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cfg = RunConfig {
        workers: 8,
        ..RunConfig::default()
    };
    let table = suite::bench(&cfg)?;
    let k_ms = table.get("k-eval-precomputed-curvature").unwrap_or(f64::INFINITY);
    let start = Instant::now();
    let report = suite::verify_lemmas(&RunConfig::default())?;
    let verify_s = start.elapsed().as_secs_f64();
    let timing_ok = k_ms <= 1.0 && verify_s <= 600.0 && report.all_ok();
    let speed_ok = table.speedup >= 5.0;
    Ok(Outcome {
        pass: timing_ok && speed_ok,
        detail: format!(
            "K eval {k_ms:.3} ms, speedup {:.2}x at 8 workers on {cores} core(s), fast verify-lemmas {verify_s:.0} s",
            table.speedup
        ),
        environmental: timing_ok && !speed_ok && cores < 8,
    })
}

fn main() -> ExitCode {
    // Context construction is exercised once up front so configuration
    // errors surface before the long checks.
    if let Err(e) = Context::new(&RunConfig::default()) {
        eprintln!("configuration error: {e}");
        return ExitCode::FAILURE;
    }
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("flat torus null suite", flat_torus_null),
        ("K antisymmetry and brute-force assembly", k_antisymmetry),
        ("curvature pullback under SO(6)", curvature_pullback),
        ("alternating derivative sum vanishes", tilde_k_check),
        ("formula and reduced evaluators agree", dual_evaluator),
        ("finite-difference exterior derivative", cartan_oracle),
        ("isometry vanishing with conformal control", vanishing),
        ("iterate scaling", iterate_scaling),
        ("lens covering scaling", covering),
        ("Stokes for isometry-homotopic actions", stokes),
        ("performance", performance),
    ];
    let mut failed = false;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let label = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{label} {:>2} {name}: {} [{:.1} s]",
            i + 1,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass && outcome.environmental {
            println!("        parallel speedup is not measurable on this host; not counted");
        }
        failed |= !outcome.pass && !outcome.environmental;
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
