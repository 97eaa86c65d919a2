//! The batch commands: `verify-lemmas`, `invariant`, `scaling`, `bench` and
//! `curvature-dump`, each driven by a [`RunConfig`].

use std::f64::consts::TAU;
use std::time::Instant;

use serde::Serialize;

use crate::cache::{self, essential_nodes};
use crate::config::RunConfig;
use crate::curvature::{riemann_at, verify_curvature_pullback};
use crate::error::{Error, Result};
use crate::homotopy::{
    cartan_fd_oracle, d_pullback_formula, isometry_deviation, random_homotopy_points, stokes_check,
    tilde_k_vanishing_check, vanishing_scan, verify_isometry, Homotopy, Regularity, ENDPOINT_TOL,
};
use crate::ktensor::{build_k, build_k_general, KField};
use crate::loops::{invariant_i, iterate_action, scaling_check, CircleAction, InvariantResult, ThetaGrid, ACTION_TOL};
use crate::quadrature::{par_map_indexed, Axis, QuadratureGrid, QuadratureRule};
use crate::report::{CheckReport, Status, SuiteReport};
use crate::zoo::{action_from_spec, entry_from_spec, make_lens, ZooEntry};

/// Isometry deviation a negative control must exceed.
pub const CONTROL_ISOMETRY_GAP: f64 = 1e-3;
/// Factor by which a negative control must exceed the vanishing tolerance.
pub const CONTROL_FACTOR: f64 = 10.0;

/// Everything a command needs, built once from the config.
pub struct Context {
    pub config: RunConfig,
    pub entry: ZooEntry,
    pub kfield: KField,
    pub theta: ThetaGrid,
}

impl Context {
    pub fn new(config: &RunConfig) -> Result<Context> {
        config.validate()?;
        let entry = entry_from_spec(&config.metric)?;
        let kfield = KField::new(entry.metric.clone(), config.engine())?;
        Ok(Context {
            theta: config.theta()?,
            config: config.clone(),
            entry,
            kfield,
        })
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        self.config.grid_for(self.entry.chart(), None)
    }

    /// Seeds `K` from the curvature cache when a cache directory is set.
    pub fn warm(&self, grid: &QuadratureGrid) -> Result<Option<bool>> {
        match &self.config.cache_dir {
            Some(dir) => Ok(Some(
                cache::load_or_build_curvature(&self.kfield, grid, dir, self.config.workers)?.1,
            )),
            None => Ok(None),
        }
    }

    fn points(&self, salt: u64) -> Vec<Vec<f64>> {
        self.entry.random_points(self.config.samples, self.config.seed ^ salt)
    }

    fn homotopy_points(&self, salt: u64) -> Vec<crate::homotopy::HomotopyPoint> {
        random_homotopy_points(&self.entry.sample_box, (0.05, 0.95), self.config.samples, self.config.seed ^ salt)
    }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<CheckReport>) -> CheckReport {
    f().unwrap_or_else(|e| CheckReport::error(name, &e))
}

/// Runs every identity check on the configured metric.
pub fn verify_lemmas(config: &RunConfig) -> Result<SuiteReport> {
    let start = Instant::now();
    let ctx = Context::new(config)?;
    let tol = &config.tolerances;
    let entry = &ctx.entry;
    let kf = &ctx.kfield;
    let engine = config.engine();
    let points = ctx.points(0x11);
    let mut checks = Vec::new();

    checks.push(guarded("curvature-identities", || {
        let mut worst = 0.0f64;
        for x in &points {
            worst = worst.max(riemann_at(&entry.metric, x, &engine)?.identity_residuals().max());
        }
        Ok(CheckReport::bound("curvature-identities", points.len(), worst, tol.curvature_identities))
    }));

    for (label, iso) in &entry.isometries {
        let name = format!("curvature-pullback/{label}");
        checks.push(guarded(&name, || {
            let rep = verify_curvature_pullback(&entry.metric, iso.as_ref(), &points, &engine)?;
            Ok(CheckReport::bound(&name, points.len(), rep.curvature_deviation, tol.curvature_pullback)
                .with_detail(&rep))
        }));
    }

    let action_samples: Vec<(f64, Vec<f64>)> = points
        .iter()
        .enumerate()
        .map(|(i, m)| (TAU * (i as f64 + 0.5) / points.len() as f64, m.clone()))
        .collect();
    for a in &entry.actions {
        let dev = a.invariant_deviation(&action_samples);
        checks.push(CheckReport::bound(format!("action-invariants/{}", a.label), points.len(), dev, ACTION_TOL));
    }

    checks.push(guarded("k-assembly-routes", || {
        let mut worst = 0.0f64;
        for x in &points {
            let curv = riemann_at(&entry.metric, x, &engine)?;
            let fast = build_k(&curv, &kf.schedule)?;
            let general = build_k_general(&curv, &kf.schedule)?;
            for nu in 0..fast.dim {
                let scale = fast.magnitude[nu].max(general.magnitude[nu]);
                let d = (fast.kappa[nu] - general.kappa[nu]).abs();
                worst = worst.max(if scale > 0.0 { d / scale } else { d });
            }
        }
        Ok(CheckReport::bound("k-assembly-routes", points.len(), worst, 1e-12))
    }));

    let hpoints = ctx.homotopy_points(0x22);
    for h in &entry.homotopies {
        checks.push(CheckReport::bound(
            format!("homotopy-endpoints/{}", h.label),
            hpoints.len(),
            h.endpoint_deviation(&hpoints),
            ENDPOINT_TOL,
        ));
    }

    if let Ok(h) = entry.homotopy("generic-diffeo") {
        let name = "tilde-k/generic-diffeo";
        checks.push(guarded(name, || {
            let rep = tilde_k_vanishing_check(kf, &h, &hpoints)?;
            Ok(CheckReport::bound(name, hpoints.len(), rep.max_relative, tol.tilde_k).with_detail(&rep))
        }));
        match vanishing_scan(kf, &h, &hpoints, &ctx.theta) {
            Ok(rep) => {
                checks.push(
                    CheckReport::bound("dual-evaluator/generic-diffeo", hpoints.len(), rep.max_dual_difference, tol.dual_evaluator)
                        .with_detail(&rep),
                );
                checks.push(CheckReport::bound(
                    "alpha-periodicity/generic-diffeo",
                    hpoints.len(),
                    rep.max_alpha_period,
                    tol.alpha_period,
                ));
            }
            Err(e) => checks.push(CheckReport::error("dual-evaluator/generic-diffeo", &e)),
        }
        let name = "cartan-oracle/generic-diffeo";
        checks.push(guarded(name, || {
            let worst = cartan_agreement(kf, &h, &hpoints, config.cartan_step, &ctx.theta)?;
            Ok(CheckReport::bound(name, hpoints.len(), worst, tol.cartan))
        }));
    }

    for h in entry.homotopies.iter().filter(|h| h.claim == Regularity::Isometry) {
        let name = format!("isometry-vanishing/{}", h.label);
        checks.push(guarded(&name, || {
            let dev = verify_isometry(&entry.metric, h, &entry.sample_box, &engine, config.seed)?;
            let mut rep = vanishing_scan(kf, h, &hpoints, &ctx.theta)?;
            rep.isometry_deviation = Some(dev);
            let worst = rep.max_reduced.max(rep.max_formula);
            let mut c = CheckReport::bound(&name, hpoints.len(), worst, tol.vanishing).with_detail(&rep);
            if rep.max_alpha_period > tol.alpha_period {
                c.status = Status::Fail;
            }
            Ok(c)
        }));
    }

    if let Ok(h) = entry.homotopy("conformal") {
        let name = "negative-control/conformal";
        checks.push(guarded(name, || {
            let iso_pts = random_homotopy_points(&entry.sample_box, (0.0, 1.0), 200, config.seed ^ 0x33);
            let dev = isometry_deviation(&entry.metric, &h, &iso_pts, &engine)?;
            let mut rep = vanishing_scan(kf, &h, &hpoints, &ctx.theta)?;
            rep.isometry_deviation = Some(dev);
            let mut c = CheckReport::control(name, hpoints.len(), rep.max_reduced, tol.vanishing, CONTROL_FACTOR)
                .with_detail(&rep);
            if dev <= CONTROL_ISOMETRY_GAP {
                c.status = Status::UnexpectedPass;
            }
            Ok(c)
        }));
    }

    let stokes_label = config
        .homotopy
        .clone()
        .unwrap_or_else(|| if entry.homotopy("unitary-swap").is_ok() { "unitary-swap" } else { "constant" }.into());
    let name = format!("stokes/{stokes_label}");
    checks.push(guarded(&name, || {
        let h = entry.homotopy(&stokes_label)?;
        let grid = ctx.grid()?;
        ctx.warm(&grid)?;
        let rep = stokes_check(kf, &h, &entry.sample_box, &grid, &ctx.theta, config.workers)?;
        let mut c = CheckReport::bound(&name, grid.total(), rep.difference.abs(), rep.combined_error)
            .with_detail(&rep);
        c.status = if rep.passed { Status::Pass } else { Status::Fail };
        Ok(c)
    }));

    Ok(SuiteReport {
        command: "verify-lemmas".into(),
        metric: entry.metric.label(),
        config: config.clone(),
        checks,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// `max |formula − oracle|` over the samples, relative to the larger of
/// `|formula|`, the coefficient sizes and their cancellation-free scale.
pub fn cartan_agreement(
    kf: &KField,
    h: &Homotopy,
    points: &[crate::homotopy::HomotopyPoint],
    step: f64,
    theta: &ThetaGrid,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in points {
        let f = d_pullback_formula(kf, h, p.s, &p.x, theta)?;
        let c = cartan_fd_oracle(kf, h, p.s, &p.x, step, theta)?;
        let scale = f.value.abs().max(c.size).max(c.scale);
        let d = (f.value - c.value).abs();
        worst = worst.max(if scale > 0.0 { d / scale } else { d });
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantRow {
    pub metric: String,
    pub action: String,
    pub n: u32,
    pub grid: String,
    pub theta_nodes: usize,
    pub nodes: usize,
    pub value: f64,
    pub error: f64,
    pub scale: f64,
    pub nonzero: bool,
    pub cache_hit: Option<bool>,
    pub wall_time_s: f64,
}

impl InvariantRow {
    fn new(ctx: &Context, action: &CircleAction, n: u32, grid: &QuadratureGrid, r: &InvariantResult, t: f64) -> Self {
        InvariantRow {
            metric: ctx.entry.metric.label(),
            action: action.label.clone(),
            n,
            grid: ctx.config.grid.clone(),
            theta_nodes: ctx.theta.len(),
            nodes: grid.total(),
            value: r.value,
            error: r.error,
            scale: r.scale,
            nonzero: r.is_nonzero(),
            cache_hit: None,
            wall_time_s: t,
        }
    }
}

/// Rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `I(a)` for the configured action.
pub fn invariant(config: &RunConfig) -> Result<InvariantRow> {
    let ctx = Context::new(config)?;
    let action = action_from_spec(&ctx.entry, &config.action)?;
    let grid = ctx.grid()?;
    let start = Instant::now();
    let hit = ctx.warm(&grid)?;
    let r = invariant_i(&ctx.kfield, &action, &grid, &ctx.theta, config.workers)?;
    let mut row = InvariantRow::new(&ctx, &action, 1, &grid, &r, start.elapsed().as_secs_f64());
    row.cache_hit = hit;
    Ok(row)
}

#[derive(Clone, Debug, Serialize)]
pub struct LensRow {
    pub p: u32,
    pub total: InvariantResult,
    pub fundamental: InvariantResult,
    /// `I` of the rotation by `θ/p` over the fundamental domain.
    pub quotient: InvariantResult,
    /// `|I_total − p I_fund| / |I_total|` (scale-relative when `I_total` is
    /// not resolved above its error).
    pub covering_deviation: f64,
    /// `|I_fund − p I_quotient|`, same normalization.
    pub quotient_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingOutcome {
    pub report: SuiteReport,
    pub iterates: Vec<InvariantRow>,
    pub lens: Vec<LensRow>,
}

fn rel_to(v: f64, r: &InvariantResult) -> f64 {
    let denom = if r.is_nonzero() { r.value.abs() } else { r.scale };
    if denom > 0.0 {
        v.abs() / denom
    } else {
        v.abs()
    }
}

/// Grid over `bounds` with the periodic axes rounded up to multiples of `p`.
fn lens_grid(base: &QuadratureGrid, p: usize, phi1: usize, fundamental: bool) -> Result<QuadratureGrid> {
    let axes = base
        .axes
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            if ax.rule != QuadratureRule::PeriodicTrapezoid {
                return Ok(ax.clone());
            }
            let count = ax.count.div_ceil(p) * p;
            if fundamental && a == phi1 {
                Axis::new(ax.lo, ax.lo + (ax.hi - ax.lo) / p as f64, count / p, QuadratureRule::PeriodicTrapezoid)
            } else {
                Axis::new(ax.lo, ax.hi, count, QuadratureRule::PeriodicTrapezoid)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadratureGrid::new(axes))
}

/// Iterate scaling of the configured action and lens covering scaling.
pub fn scaling(config: &RunConfig) -> Result<ScalingOutcome> {
    let start = Instant::now();
    let ctx = Context::new(config)?;
    let tol = &config.tolerances;
    let action = action_from_spec(&ctx.entry, &config.action)?;
    let grid = ctx.grid()?;
    ctx.warm(&grid)?;
    let points = ctx.points(0x44);
    let mut checks = Vec::new();
    let mut rows = Vec::new();

    let t0 = Instant::now();
    let base = invariant_i(&ctx.kfield, &action, &grid, &ctx.theta, config.workers)?;
    rows.push(InvariantRow::new(&ctx, &action, 1, &grid, &base, t0.elapsed().as_secs_f64()));
    let mut ns = vec![1];
    ns.extend(config.iterates.iter().copied().filter(|&n| n != 1));
    for n in ns {
        let rep = match scaling_check(&ctx.kfield, &action, n, &points, None, &ctx.theta) {
            Ok(r) => r,
            Err(e) => {
                checks.push(CheckReport::error(format!("iterate-pointwise/n={n}"), &e));
                continue;
            }
        };
        checks.push(
            CheckReport::bound(
                format!("iterate-pointwise/n={n}"),
                points.len(),
                rep.pointwise_deviation(),
                tol.scaling_pointwise,
            )
            .with_detail(&rep),
        );
        if n == 1 {
            continue;
        }
        let an = iterate_action(&action, n)?;
        let t = Instant::now();
        let it = invariant_i(&ctx.kfield, &an, &grid, &ctx.theta, config.workers)?;
        rows.push(InvariantRow::new(&ctx, &an, n, &grid, &it, t.elapsed().as_secs_f64()));
        let name = format!("iterate-integral/n={n}");
        if base.is_nonzero() {
            let dev = (it.value / (n as f64 * base.value) - 1.0).abs();
            checks.push(CheckReport::bound(name, grid.total(), dev, tol.scaling_integral));
        } else {
            let d = (it.value - n as f64 * base.value).abs();
            let scale = it.scale.max(n as f64 * base.scale);
            let dev = if scale > 0.0 { d / scale } else { d };
            checks.push(CheckReport::bound(name, grid.total(), dev, tol.scaling_integral));
        }
    }

    let mut lens_rows = Vec::new();
    for &p in &config.lens {
        let name = format!("lens-covering/p={p}");
        let result = (|| -> Result<LensRow> {
            let lens = make_lens(p, &ctx.entry)?;
            let phi1 = lens.phi1_axis();
            let total_grid = lens_grid(&grid, p as usize, phi1, false)?;
            let fund_grid = lens_grid(&grid, p as usize, phi1, true)?;
            let total = invariant_i(&ctx.kfield, &lens.lifted, &total_grid, &ctx.theta, config.workers)?;
            let fundamental = invariant_i(&ctx.kfield, &lens.lifted, &fund_grid, &ctx.theta, config.workers)?;
            let quotient = invariant_i(&ctx.kfield, &lens.quotient, &fund_grid, &ctx.theta, config.workers)?;
            Ok(LensRow {
                p,
                covering_deviation: rel_to(total.value - p as f64 * fundamental.value, &total),
                quotient_deviation: rel_to(fundamental.value - p as f64 * quotient.value, &fundamental),
                total,
                fundamental,
                quotient,
            })
        })();
        match result {
            Ok(row) => {
                checks.push(
                    CheckReport::bound(&name, row.total.nodes, row.covering_deviation.max(row.quotient_deviation), tol.lens)
                        .with_detail(&row),
                );
                lens_rows.push(row);
            }
            Err(e) => checks.push(CheckReport::error(&name, &e)),
        }
    }

    Ok(ScalingOutcome {
        report: SuiteReport {
            command: "scaling".into(),
            metric: ctx.entry.metric.label(),
            config: config.clone(),
            checks,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        iterates: rows,
        lens: lens_rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchTable {
    pub metric: String,
    pub rows: Vec<BenchRow>,
    /// Grid-fill speedup of `workers` over one worker.
    pub speedup: f64,
    pub workers: usize,
    pub cores: usize,
}

impl BenchTable {
    pub fn to_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

/// Mean wall time of `f` over `reps` calls, in seconds.
fn time_per<T>(reps: usize, mut f: impl FnMut() -> T) -> f64 {
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(f());
    }
    start.elapsed().as_secs_f64() / reps as f64
}

/// Nodes for the grid-fill benchmark: every node of a grid over the
/// non-ignorable axes.
pub fn fill_nodes(ctx: &Context) -> Result<Vec<Vec<f64>>> {
    let mut cfg = ctx.config.clone();
    cfg.grid = "default".into();
    let grid = cfg.grid_for(ctx.entry.chart(), None)?;
    Ok(essential_nodes(&ctx.entry.metric, &grid).1)
}

/// Uncached `K` at every node, in parallel.
pub fn grid_fill(ctx: &Context, nodes: &[Vec<f64>], workers: usize) -> Result<Vec<Vec<f64>>> {
    let m = &ctx.entry.metric;
    let engine = ctx.config.engine();
    let schedule = &ctx.kfield.schedule;
    par_map_indexed(nodes.len(), workers, |i| {
        crate::ktensor::k_at(m, &nodes[i], &engine, schedule).map(|k| k.kappa)
    })
}

pub fn bench(config: &RunConfig) -> Result<BenchTable> {
    let ctx = Context::new(config)?;
    let engine = config.engine();
    let x = ctx.entry.random_points(1, config.seed)[0].clone();
    let curv = riemann_at(&ctx.entry.metric, &x, &engine)?;
    let schedule = ctx.kfield.schedule.clone();
    let reps = 2000;
    let k_pre = time_per(reps, || build_k(&curv, &schedule).map(|k| k.kappa[0]));
    let k_gen = time_per(20, || build_k_general(&curv, &schedule).map(|k| k.kappa[0]));
    let curv_t = time_per(50, || riemann_at(&ctx.entry.metric, &x, &engine).map(|c| c.riemann_mixed[0]));
    let nodes = fill_nodes(&ctx)?;
    let t1 = time_per(1, || grid_fill(&ctx, &nodes, 1));
    let tn = time_per(1, || grid_fill(&ctx, &nodes, config.workers));
    let speedup = t1 / tn;
    let rows = vec![
        BenchRow { name: "k-eval-precomputed-curvature".into(), value: k_pre * 1e3, unit: "ms".into() },
        BenchRow { name: "k-evals-per-second".into(), value: 1.0 / k_pre, unit: "1/s".into() },
        BenchRow { name: "k-eval-general-table".into(), value: k_gen * 1e3, unit: "ms".into() },
        BenchRow { name: "curvature-eval".into(), value: curv_t * 1e3, unit: "ms".into() },
        BenchRow { name: "grid-fill-nodes".into(), value: nodes.len() as f64, unit: "nodes".into() },
        BenchRow { name: "grid-fill-1-worker".into(), value: t1, unit: "s".into() },
        BenchRow { name: format!("grid-fill-{}-workers", config.workers), value: tn, unit: "s".into() },
        BenchRow { name: "parallel-speedup".into(), value: speedup, unit: "x".into() },
    ];
    Ok(BenchTable {
        metric: ctx.entry.metric.label(),
        rows,
        speedup,
        workers: config.workers,
        cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
    })
}

/// `R_{ijkℓ}` at every non-ignorable grid node as CSV. Writes the curvature
/// cache too when a cache directory is configured.
pub fn curvature_dump(config: &RunConfig) -> Result<String> {
    let ctx = Context::new(config)?;
    let grid = ctx.grid()?;
    let engine = config.engine();
    let (_, nodes) = essential_nodes(&ctx.entry.metric, &grid);
    let samples = par_map_indexed(nodes.len(), config.workers, |i| riemann_at(&ctx.entry.metric, &nodes[i], &engine))?;
    if let Some(dir) = &config.cache_dir {
        let c = cache::curvature_grid(&ctx.entry.metric, &grid, &engine, config.workers)?;
        c.write(&cache::cache_path(dir, "curvature", &ctx.entry.metric, &grid))?;
    }
    let n = ctx.entry.dim();
    let names = &ctx.entry.chart().coordinate_names;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(names.iter().map(String::as_str).chain(["i", "j", "k", "l", "R_ijkl"]))?;
    for s in &samples {
        let coords: Vec<String> = s.point.iter().map(|v| format!("{v:.17e}")).collect();
        for (idx, v) in s.riemann_lowered.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let ix = [idx / n.pow(3), (idx / n.pow(2)) % n, (idx / n) % n, idx % n].map(|i| i.to_string());
            let mut rec = coords.clone();
            rec.extend(ix);
            rec.push(format!("{v:.17e}"));
            w.write_record(&rec)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `I(a)` with the curvature grid reloaded from `dir`, for determinism
/// checks.
pub fn invariant_from_cache(ctx: &Context, action: &CircleAction, grid: &QuadratureGrid) -> Result<InvariantResult> {
    let dir = ctx
        .config
        .cache_dir
        .as_ref()
        .ok_or_else(|| Error::Config("no cache directory configured".into()))?;
    let fresh = KField::new(ctx.entry.metric.clone(), ctx.config.engine())?;
    cache::load_or_build_curvature(&fresh, grid, dir, ctx.config.workers)?;
    invariant_i(&fresh, action, grid, &ctx.theta, ctx.config.workers)
}
