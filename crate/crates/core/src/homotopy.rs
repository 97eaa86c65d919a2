//! Homotopies of circle actions and the exterior derivative of the pulled
//! back Chern–Simons form.
//!
//! A homotopy is `F(s, θ, x)` on `[0,1] × S¹ × M`. Write `∂_0 = ∂_s` and
//! `∂_1 … ∂_n` for the spatial coordinates. The coefficient of
//! `d(F^* CS)` on `[0,1] × M` is
//!
//! ```text
//! Σ_a (−1)^a ∫ K_ν(F; ∂_0F, …, ∂̂_aF, …, ∂_nF) ∂_a∂_θF^ν dθ
//! ```
//!
//! When every `F(s, θ, ·)` is a diffeomorphism, `∂_sF = α^i ∂_iF` and the sum
//! collapses to `∫ K(F; J ∂_θα, ∂_1F, …, ∂_nF) dθ` with `J = (∂_iF)`. If the
//! maps are isometries the integrand is `K(x; ∂_θα, ∂_1, …, ∂_n)`, whose
//! θ-integral vanishes because `α` is periodic.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::curvature::ISOMETRY_TOL;
use crate::error::{Error, Result};
use crate::geometry::{Chart, DerivativeEngine, SmoothMap, Taylor};
use crate::jet::{Jet, Scalar};
use crate::ktensor::{abs_dot, det_magnitude, dot, tilde_k, KField};
use crate::linalg;
use crate::loops::{invariant_i, theta_integral, CircleAction, InvariantResult, LoopIntegral, ThetaGrid};
use crate::quadrature::QuadratureGrid;
use crate::curvature::MetricField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    None,
    Diffeomorphism,
    Isometry,
}

/// Tolerance for `F(0, ·) = a₀`, `F(1, ·) = a₁` and `F(s, 0, ·) = id`.
pub const ENDPOINT_TOL: f64 = 1e-10;

/// Condition number above which the spatial Jacobian counts as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// `F: [0,1] × S¹ × M → M` with its endpoint actions and the claimed
/// regularity of each `F(s, θ, ·)`. The claim is recorded, never trusted.
#[derive(Clone)]
pub struct Homotopy {
    pub label: String,
    pub map: Arc<dyn SmoothMap>,
    pub a0: CircleAction,
    pub a1: CircleAction,
    pub claim: Regularity,
}

impl std::fmt::Debug for Homotopy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Homotopy({}, {:?})", self.label, self.claim)
    }
}

struct Slice {
    inner: Arc<dyn SmoothMap>,
    s: f64,
    domain: Arc<Chart>,
}

impl SmoothMap for Slice {
    fn domain(&self) -> &Arc<Chart> {
        &self.domain
    }
    fn codomain(&self) -> &Arc<Chart> {
        self.inner.codomain()
    }
    fn derivative_order(&self) -> usize {
        self.inner.derivative_order()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(x.len() + 1);
        y.push(self.s);
        y.extend_from_slice(x);
        self.inner.eval(&y)
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        let mut y = Vec::with_capacity(x.len() + 1);
        y.push(x[0].lift(self.s));
        y.extend_from_slice(x);
        self.inner.eval_jet(&y)
    }
}

fn slice_action(label: &str, map: &Arc<dyn SmoothMap>, s: f64) -> CircleAction {
    let m = map.codomain();
    let domain = Chart::product(&[&Chart::circle(), m]);
    CircleAction {
        label: label.to_string(),
        map: Arc::new(Slice { inner: map.clone(), s, domain }),
    }
}

impl Homotopy {
    /// Endpoints are taken to be the slices `s = 0` and `s = 1`.
    pub fn new(label: impl Into<String>, map: Arc<dyn SmoothMap>, claim: Regularity) -> Result<Homotopy> {
        let label = label.into();
        let dom = map.domain();
        let cod = map.codomain();
        if dom.dim() != cod.dim() + 2 || dom.periods[0].is_some() || dom.periods[1] != Some(TAU) {
            return Err(Error::ChartMismatch {
                expected: format!("IxS1x{}", cod.name),
                found: dom.name.clone(),
            });
        }
        let a0 = slice_action(&format!("{label}@0"), &map, 0.0);
        let a1 = slice_action(&format!("{label}@1"), &map, 1.0);
        Ok(Homotopy { label, map, a0, a1, claim })
    }

    /// Replaces the endpoint actions, e.g. by cheaper closed forms of the
    /// same maps. Call [`Homotopy::endpoint_deviation`] to confirm them.
    pub fn with_endpoints(mut self, a0: CircleAction, a1: CircleAction) -> Homotopy {
        self.a0 = a0;
        self.a1 = a1;
        self
    }

    pub fn manifold(&self) -> &Arc<Chart> {
        self.map.codomain()
    }

    pub fn dim(&self) -> usize {
        self.manifold().dim()
    }

    pub fn eval(&self, s: f64, theta: f64, x: &[f64]) -> Vec<f64> {
        self.map.eval(&stack(s, theta, x))
    }

    pub fn slice(&self, s: f64) -> CircleAction {
        slice_action(&format!("{}@{s}", self.label), &self.map, s)
    }

    /// Largest chart distance in `F(0,θ,x) = a₀(θ,x)`, `F(1,θ,x) = a₁(θ,x)`
    /// and `F(s,0,x) = x` over the samples.
    pub fn endpoint_deviation(&self, samples: &[HomotopyPoint]) -> f64 {
        let chart = self.manifold();
        let mut dev = 0.0f64;
        for p in samples {
            dev = dev
                .max(chart.distance(&self.eval(0.0, p.theta, &p.x), &self.a0.apply(p.theta, &p.x)))
                .max(chart.distance(&self.eval(1.0, p.theta, &p.x), &self.a1.apply(p.theta, &p.x)))
                .max(chart.distance(&self.eval(p.s, 0.0, &p.x), &p.x));
        }
        dev
    }

    pub fn check_endpoints(&self, samples: &[HomotopyPoint]) -> Result<()> {
        let dev = self.endpoint_deviation(samples);
        if dev > ENDPOINT_TOL {
            return Err(Error::InvalidParameter(format!(
                "homotopy `{}` misses its endpoints by {dev:e}",
                self.label
            )));
        }
        Ok(())
    }
}

fn stack(s: f64, theta: f64, x: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len() + 2);
    y.push(s);
    y.push(theta);
    y.extend_from_slice(x);
    y
}

/// A point `(s, θ, x)` of `[0,1] × S¹ × M`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomotopyPoint {
    pub s: f64,
    pub theta: f64,
    pub x: Vec<f64>,
}

/// Uniform random points with `s` in `s_range` and `x` in `sample_box`.
pub fn random_homotopy_points(
    sample_box: &[(f64, f64)],
    s_range: (f64, f64),
    count: usize,
    seed: u64,
) -> Vec<HomotopyPoint> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| HomotopyPoint {
            s: rng.random_range(s_range.0..=s_range.1),
            theta: rng.random_range(0.0..TAU),
            x: sample_box.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect(),
        })
        .collect()
}

/// Variable index of `∂_a` (`a = 0` is `s`) in the stacked coordinates.
fn var(a: usize) -> usize {
    if a == 0 {
        0
    } else {
        a + 1
    }
}

const THETA: usize = 1;

/// `F_*(∂_s) = α^i F_*(∂_i)` at one point.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaCoefficients {
    pub alpha: Vec<f64>,
    /// `|∂_sF − α^i ∂_iF|`.
    pub residual: f64,
    /// `|∂_sF|`, the scale the residual is judged against.
    pub scale: f64,
    pub condition: f64,
    /// `∂α/∂θ`.
    pub dtheta_alpha: Vec<f64>,
}

/// How `∂α/∂θ` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaDerivative {
    /// Differentiating `J α = ∂_sF` in θ: `J ∂_θα = ∂_θ∂_sF − (∂_θJ) α`.
    Implicit,
    /// Central differences of the solve at `θ ± h` and `θ ± h/2`, Richardson
    /// refined.
    FiniteDifference { step: f64 },
}

fn jacobian_rows(cols: &[Vec<f64>]) -> Vec<f64> {
    let n = cols.len();
    let mut a = vec![0.0; n * n];
    for (c, col) in cols.iter().enumerate() {
        for r in 0..n {
            a[r * n + c] = col[r];
        }
    }
    a
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve_checked(cols: &[Vec<f64>], rhs: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let n = cols.len();
    let (x, residual, condition) = linalg::solve_least_squares(&jacobian_rows(cols), n, n, rhs);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::JacobianSingular { condition });
    }
    Ok((x, residual, condition))
}

/// First and mixed θ-derivatives of `F` at one point.
struct Frame {
    value: Vec<f64>,
    /// `∂_aF`, `a = 0 … n`.
    cols: Vec<Vec<f64>>,
    dtheta: Vec<f64>,
    /// `∂_a∂_θF`, present for order-2 frames.
    mixed: Vec<Vec<f64>>,
}

fn frame(h: &Homotopy, engine: &DerivativeEngine, s: f64, theta: f64, x: &[f64], order: usize) -> Result<Frame> {
    let n = h.dim();
    let t: Taylor = engine.taylor(h.map.as_ref(), &stack(s, theta, x), order)?;
    let cols = (0..=n).map(|a| t.column(var(a))).collect();
    let mixed = if order >= 2 {
        (0..=n).map(|a| t.partial(&[var(a), THETA])).collect()
    } else {
        Vec::new()
    };
    Ok(Frame {
        value: t.value(),
        cols,
        dtheta: t.column(THETA),
        mixed,
    })
}

fn alpha_from_frame(f: &Frame) -> Result<AlphaCoefficients> {
    let n = f.cols.len() - 1;
    let spatial = &f.cols[1..];
    let (alpha, residual, condition) = solve_checked(spatial, &f.cols[0])?;
    let mut dtheta_alpha = Vec::new();
    if !f.mixed.is_empty() {
        let mut rhs = f.mixed[0].clone();
        for i in 0..n {
            for (r, v) in rhs.iter_mut().enumerate() {
                *v -= alpha[i] * f.mixed[i + 1][r];
            }
        }
        dtheta_alpha = solve_checked(spatial, &rhs)?.0;
    }
    Ok(AlphaCoefficients {
        alpha,
        residual,
        scale: norm(&f.cols[0]),
        condition,
        dtheta_alpha,
    })
}

/// Solves for `α` at `(s, θ, x)`; `∂α/∂θ` by the requested route.
pub fn solve_alpha(
    h: &Homotopy,
    engine: &DerivativeEngine,
    p: &HomotopyPoint,
    route: AlphaDerivative,
) -> Result<AlphaCoefficients> {
    match route {
        AlphaDerivative::Implicit => alpha_from_frame(&frame(h, engine, p.s, p.theta, &p.x, 2)?),
        AlphaDerivative::FiniteDifference { step } => {
            let mut out = alpha_from_frame(&frame(h, engine, p.s, p.theta, &p.x, 1)?)?;
            let at = |dt: f64| -> Result<Vec<f64>> {
                Ok(alpha_from_frame(&frame(h, engine, p.s, p.theta + dt, &p.x, 1)?)?.alpha)
            };
            let (p1, m1, p2, m2) = (at(step)?, at(-step)?, at(step / 2.0)?, at(-step / 2.0)?);
            out.dtheta_alpha = (0..out.alpha.len())
                .map(|i| {
                    let coarse = (p1[i] - m1[i]) / (2.0 * step);
                    let fine = (p2[i] - m2[i]) / step;
                    (4.0 * fine - coarse) / 3.0
                })
                .collect();
            Ok(out)
        }
    }
}

fn check_dims(kfield: &KField, h: &Homotopy) -> Result<()> {
    if kfield.dim() != h.dim() || h.manifold() != &kfield.metric.chart {
        return Err(Error::ChartMismatch {
            expected: kfield.metric.chart.name.clone(),
            found: h.manifold().name.clone(),
        });
    }
    Ok(())
}

fn without(cols: &[Vec<f64>], a: usize) -> Vec<&[f64]> {
    cols.iter()
        .enumerate()
        .filter(|&(b, _)| b != a)
        .map(|(_, c)| c.as_slice())
        .collect()
}

fn sign(a: usize) -> f64 {
    if a % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// The full alternating sum at one `(s, θ, x)`: value and magnitude.
fn formula_integrand(kfield: &KField, h: &Homotopy, s: f64, theta: f64, x: &[f64]) -> Result<(f64, f64)> {
    let f = frame(h, &kfield.engine, s, theta, x, 2)?;
    let k = kfield.k(&f.value)?;
    let mut value = 0.0;
    let mut mag = 0.0;
    for a in 0..f.cols.len() {
        let rest = without(&f.cols, a);
        value += sign(a) * dot(&k.kappa, &f.mixed[a]) * linalg::det_columns(&rest);
        mag += abs_dot(&k.magnitude, &f.mixed[a]) * det_magnitude(&rest);
    }
    Ok((value, mag))
}

/// Coefficient of `d(F^*CS)` at `(s, x)` from the alternating formula.
pub fn d_pullback_formula(
    kfield: &KField,
    h: &Homotopy,
    s: f64,
    x: &[f64],
    theta: &ThetaGrid,
) -> Result<LoopIntegral> {
    check_dims(kfield, h)?;
    let samples = theta
        .nodes()
        .iter()
        .map(|&t| formula_integrand(kfield, h, s, t, x))
        .collect::<Result<Vec<_>>>()?;
    theta_integral(theta, &samples)
}

/// Per-θ data of the reduced evaluator.
struct ReducedSample {
    value: f64,
    magnitude: f64,
    dtheta_alpha: Vec<f64>,
    /// `K(x; ∂_θα, ∂_1, …, ∂_n)`, the integrand the isometry case should
    /// reduce to.
    natural: f64,
}

fn reduced_integrand(
    kfield: &KField,
    h: &Homotopy,
    s: f64,
    theta: f64,
    x: &[f64],
    route: AlphaDerivative,
    k_here: Option<&[f64]>,
) -> Result<ReducedSample> {
    let p = HomotopyPoint { s, theta, x: x.to_vec() };
    let f = frame(h, &kfield.engine, s, theta, x, 1)?;
    let alpha = solve_alpha(h, &kfield.engine, &p, route)?;
    let n = h.dim();
    let spatial: Vec<&[f64]> = f.cols[1..].iter().map(Vec::as_slice).collect();
    let mut pushed = vec![0.0; n];
    let mut pushed_mag = vec![0.0; n];
    for (i, col) in spatial.iter().enumerate() {
        for r in 0..n {
            pushed[r] += alpha.dtheta_alpha[i] * col[r];
            pushed_mag[r] += (alpha.dtheta_alpha[i] * col[r]).abs();
        }
    }
    let k = kfield.k(&f.value)?;
    let det = linalg::det_columns(&spatial);
    Ok(ReducedSample {
        value: dot(&k.kappa, &pushed) * det,
        magnitude: abs_dot(&k.magnitude, &pushed_mag) * det_magnitude(&spatial),
        natural: k_here.map_or(0.0, |kx| dot(kx, &alpha.dtheta_alpha)),
        dtheta_alpha: alpha.dtheta_alpha,
    })
}

/// Coefficient of `d(F^*CS)` at `(s, x)` from the α-reduced integrand.
pub fn d_pullback_reduced(
    kfield: &KField,
    h: &Homotopy,
    s: f64,
    x: &[f64],
    theta: &ThetaGrid,
    route: AlphaDerivative,
) -> Result<LoopIntegral> {
    check_dims(kfield, h)?;
    let samples = theta
        .nodes()
        .iter()
        .map(|&t| reduced_integrand(kfield, h, s, t, x, route, None).map(|r| (r.value, r.magnitude)))
        .collect::<Result<Vec<_>>>()?;
    theta_integral(theta, &samples)
}

/// `∫₀^{2π} ∂α^i/∂θ dθ` at `(s, x)` for each `i`, with `∫ |∂α^i/∂θ|`.
pub fn alpha_periodicity(
    h: &Homotopy,
    engine: &DerivativeEngine,
    s: f64,
    x: &[f64],
    theta: &ThetaGrid,
    route: AlphaDerivative,
) -> Result<Vec<LoopIntegral>> {
    let n = h.dim();
    let mut per: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(theta.len()); n];
    for &t in theta.nodes() {
        let a = solve_alpha(h, engine, &HomotopyPoint { s, theta: t, x: x.to_vec() }, route)?;
        for i in 0..n {
            per[i].push((a.dtheta_alpha[i], a.dtheta_alpha[i].abs()));
        }
    }
    let grid = ThetaGrid { tolerance: None, ..theta.clone() };
    per.iter().map(|v| theta_integral(&grid, v)).collect()
}

/// Largest `|g(x) − F_{s,θ}^* g(x)| / |g(x)|` over the samples.
pub fn isometry_deviation(
    metric: &MetricField,
    h: &Homotopy,
    samples: &[HomotopyPoint],
    engine: &DerivativeEngine,
) -> Result<f64> {
    let n = h.dim();
    let mut worst = 0.0f64;
    for p in samples {
        let f = frame(h, engine, p.s, p.theta, &p.x, 1)?;
        let g = metric.eval(&p.x);
        let gf = metric.eval(&f.value);
        let jac = &f.cols[1..];
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut pulled = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        pulled += jac[i][a] * gf[a * n + b] * jac[j][b];
                    }
                }
                dev = dev.max((pulled - g[i * n + j]).abs());
            }
        }
        worst = worst.max(dev / linalg::max_abs(&g));
    }
    Ok(worst)
}

/// Number of random samples used to confirm an isometry claim.
pub const ISOMETRY_SAMPLES: usize = 200;

/// Confirms that every `F(s, θ, ·)` preserves the metric at
/// [`ISOMETRY_SAMPLES`] random points of `[0,1] × S¹ × sample_box`.
pub fn verify_isometry(
    metric: &MetricField,
    h: &Homotopy,
    sample_box: &[(f64, f64)],
    engine: &DerivativeEngine,
    seed: u64,
) -> Result<f64> {
    let pts = random_homotopy_points(sample_box, (0.0, 1.0), ISOMETRY_SAMPLES, seed);
    let dev = isometry_deviation(metric, h, &pts, engine)?;
    if dev > ISOMETRY_TOL {
        return Err(Error::IsometryCheckFailed {
            deviation: dev,
            tolerance: ISOMETRY_TOL,
        });
    }
    Ok(dev)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VanishingReport {
    pub samples: usize,
    /// Metric deviation found by the isometry check, when one was run.
    pub isometry_deviation: Option<f64>,
    /// `max |reduced| / scale`.
    pub max_reduced: f64,
    /// `max |formula| / scale`.
    pub max_formula: f64,
    /// `max |formula − reduced| / scale`.
    pub max_dual_difference: f64,
    /// `max_i |∫ ∂α^i/∂θ dθ|`.
    pub max_alpha_period: f64,
    /// `max |Σ_i K_i(x) ∫ ∂α^i/∂θ dθ| / scale`.
    pub max_mechanism: f64,
    /// `max_θ |K(F; J∂_θα, ∂_1F, …) − K(x; ∂_θα, ∂_1, …)| / pointwise scale`,
    /// which is zero exactly when the integrand is natural under `F`.
    pub max_naturality: f64,
    pub worst: Option<HomotopyPoint>,
}

fn relative(v: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        v.abs() / scale
    } else {
        v.abs()
    }
}

/// Evaluates both coefficient formulas and the α-mechanism at each `(s, x)`
/// without assuming anything about `F`.
pub fn vanishing_scan(
    kfield: &KField,
    h: &Homotopy,
    points: &[HomotopyPoint],
    theta: &ThetaGrid,
) -> Result<VanishingReport> {
    check_dims(kfield, h)?;
    let n = h.dim();
    let mut rep = VanishingReport {
        samples: points.len(),
        ..Default::default()
    };
    let mut worst = -1.0;
    for p in points {
        let kx = kfield.k(&p.x)?;
        let mut red = Vec::with_capacity(theta.len());
        let mut form = Vec::with_capacity(theta.len());
        let mut per: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(theta.len()); n];
        let mut natural_dev = 0.0f64;
        for &t in theta.nodes() {
            let r = reduced_integrand(kfield, h, p.s, t, &p.x, AlphaDerivative::Implicit, Some(&kx.kappa))?;
            let nat_scale = r.magnitude.max(abs_dot(&kx.magnitude, &r.dtheta_alpha.iter().map(|v| v.abs()).collect::<Vec<_>>()));
            natural_dev = natural_dev.max(relative(r.value - r.natural, nat_scale));
            for i in 0..n {
                per[i].push((r.dtheta_alpha[i], r.dtheta_alpha[i].abs()));
            }
            red.push((r.value, r.magnitude));
            form.push(formula_integrand(kfield, h, p.s, t, &p.x)?);
        }
        let reduced = theta_integral(theta, &red)?;
        let formula = theta_integral(theta, &form)?;
        let scale = reduced.scale.max(formula.scale);
        let periods = per
            .iter()
            .map(|v| theta_integral(&ThetaGrid { tolerance: None, ..theta.clone() }, v).map(|l| l.value))
            .collect::<Result<Vec<_>>>()?;
        let mechanism: f64 = (0..n).map(|i| kx.kappa[i] * periods[i]).sum();
        let r = relative(reduced.value, scale);
        if r > worst {
            worst = r;
            rep.worst = Some(p.clone());
        }
        rep.max_reduced = rep.max_reduced.max(r);
        rep.max_formula = rep.max_formula.max(relative(formula.value, scale));
        rep.max_dual_difference = rep.max_dual_difference.max(relative(formula.value - reduced.value, scale));
        rep.max_alpha_period = periods.iter().fold(rep.max_alpha_period, |m, v| m.max(v.abs()));
        rep.max_mechanism = rep.max_mechanism.max(relative(mechanism, scale));
        rep.max_naturality = rep.max_naturality.max(natural_dev);
    }
    Ok(rep)
}

/// Verifies the isometry claim on `F`, then runs [`vanishing_scan`].
pub fn isometry_vanishing_check(
    kfield: &KField,
    h: &Homotopy,
    points: &[HomotopyPoint],
    sample_box: &[(f64, f64)],
    theta: &ThetaGrid,
) -> Result<VanishingReport> {
    let dev = verify_isometry(&kfield.metric, h, sample_box, &kfield.engine, 0x150)?;
    let mut rep = vanishing_scan(kfield, h, points, theta)?;
    rep.isometry_deviation = Some(dev);
    Ok(rep)
}

/// Largest tolerated ratio of the finite-difference rounding estimate to
/// the size of the differenced coefficients.
pub const FD_NOISE_LIMIT: f64 = 1e-7;

/// Central-difference exterior derivative `Σ_a (−1)^a ∂_a ω_â` of an
/// `(m−1)`-form on an `m`-dimensional chart, with `ω_â` the coefficient on
/// the coordinate slots other than `a`. Each partial is Richardson refined
/// from steps `h` and `h/2`.
///
/// Returns the value and the largest `|ω_â|` seen at the stencil points.
pub fn fd_exterior_derivative<F>(coefficient: F, x: &[f64], step: f64) -> Result<(f64, f64)>
where
    F: Fn(usize, &[f64]) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    let mut total = 0.0;
    let mut size = 0.0f64;
    for a in 0..x.len() {
        let at = |d: f64| -> Result<f64> {
            let mut y = x.to_vec();
            y[a] += d;
            coefficient(a, &y)
        };
        let (p1, m1, p2, m2) = (at(step)?, at(-step)?, at(step / 2.0)?, at(-step / 2.0)?);
        size = size.max(p1.abs()).max(m1.abs()).max(p2.abs()).max(m2.abs());
        let coarse = (p1 - m1) / (2.0 * step);
        let fine = (p2 - m2) / step;
        total += sign(a) * (4.0 * fine - coarse) / 3.0;
    }
    let noise = 8.0 * f64::EPSILON * size / step;
    if size > 0.0 && noise > FD_NOISE_LIMIT * size {
        return Err(Error::StepTooSmall { noise });
    }
    Ok((total, size))
}

/// Default step of the Cartan oracle.
pub const CARTAN_STEP: f64 = 1e-2;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CartanValue {
    pub value: f64,
    /// Largest coefficient magnitude entering the differences.
    pub size: f64,
    /// Largest cancellation-free integrand scale of those coefficients.
    pub scale: f64,
}

/// Coefficient of `F^*CS` on the slots of `[0,1] × M` other than `a`.
pub fn pullback_coefficient(
    kfield: &KField,
    h: &Homotopy,
    a: usize,
    s: f64,
    x: &[f64],
    theta: &ThetaGrid,
) -> Result<LoopIntegral> {
    let samples = theta
        .nodes()
        .iter()
        .map(|&t| {
            let f = frame(h, &kfield.engine, s, t, x, 1)?;
            let k = kfield.k(&f.value)?;
            let rest = without(&f.cols, a);
            Ok((
                dot(&k.kappa, &f.dtheta) * linalg::det_columns(&rest),
                abs_dot(&k.magnitude, &f.dtheta) * det_magnitude(&rest),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    theta_integral(&ThetaGrid { tolerance: None, ..theta.clone() }, &samples)
}

/// Exterior derivative of `F^*CS` at `(s, x)` by finite differences of its
/// coefficients, independent of the closed formula.
pub fn cartan_fd_oracle(
    kfield: &KField,
    h: &Homotopy,
    s: f64,
    x: &[f64],
    fd_step: f64,
    theta: &ThetaGrid,
) -> Result<CartanValue> {
    check_dims(kfield, h)?;
    let mut point = vec![s];
    point.extend_from_slice(x);
    let scale = std::cell::Cell::new(0.0f64);
    let (value, size) = fd_exterior_derivative(
        |a, y| {
            let l = pullback_coefficient(kfield, h, a, y[0], &y[1..], theta)?;
            scale.set(scale.get().max(l.scale));
            Ok(l.value)
        },
        &point,
        fd_step,
    )?;
    Ok(CartanValue { value, size, scale: scale.get() })
}

#[derive(Clone, Debug, Serialize)]
pub struct StokesReport {
    pub isometry_deviation: f64,
    pub i0: InvariantResult,
    pub i1: InvariantResult,
    pub difference: f64,
    pub combined_error: f64,
    /// `|I(a₀) − I(a₁)|` relative to the larger integrand scale.
    pub relative_difference: f64,
    pub passed: bool,
}

/// `I(a₀) − I(a₁)` for an isometry homotopy, compared with the sum of the
/// two error estimates.
pub fn stokes_check(
    kfield: &KField,
    h: &Homotopy,
    sample_box: &[(f64, f64)],
    grid: &QuadratureGrid,
    theta: &ThetaGrid,
    workers: usize,
) -> Result<StokesReport> {
    check_dims(kfield, h)?;
    let isometry_deviation = verify_isometry(&kfield.metric, h, sample_box, &kfield.engine, 0x570)?;
    let i0 = invariant_i(kfield, &h.a0, grid, theta, workers)?;
    let i1 = invariant_i(kfield, &h.a1, grid, theta, workers)?;
    let difference = i0.value - i1.value;
    let combined_error = i0.error + i1.error;
    let scale = i0.scale.max(i1.scale);
    Ok(StokesReport {
        isometry_deviation,
        i0,
        i1,
        difference,
        combined_error,
        relative_difference: relative(difference, scale),
        passed: difference.abs() <= combined_error.max(f64::EPSILON * scale),
    })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TildeKReport {
    pub samples: usize,
    /// `max |Σ| / per-term scale`.
    pub max_relative: f64,
    pub max_abs: f64,
}

/// The alternating `∂K` sum with `ξ = ∂_θF`, `X_a = ∂_aF` at each sample.
pub fn tilde_k_vanishing_check(kfield: &KField, h: &Homotopy, points: &[HomotopyPoint]) -> Result<TildeKReport> {
    check_dims(kfield, h)?;
    let mut rep = TildeKReport {
        samples: points.len(),
        ..Default::default()
    };
    for p in points {
        let f = frame(h, &kfield.engine, p.s, p.theta, &p.x, 1)?;
        let grad = kfield.gradient(&f.value)?;
        let refs: Vec<&[f64]> = f.cols.iter().map(Vec::as_slice).collect();
        let t = tilde_k(&grad, &f.dtheta, &refs);
        rep.max_relative = rep.max_relative.max(t.relative());
        rep.max_abs = rep.max_abs.max(t.value.abs());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exterior_derivative_of_x_dy_is_one() {
        // ω = x dy: the coefficient without slot 0 is x, without slot 1 is 0.
        let coeff = |a: usize, y: &[f64]| Ok(if a == 0 { y[0] } else { 0.0 });
        let (v, _) = fd_exterior_derivative(coeff, &[0.25, -1.5], 1.0 / 64.0).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn exterior_derivative_of_closed_constant_form_vanishes() {
        let coeff = |a: usize, _: &[f64]| Ok([2.0, -3.0, 0.5][a]);
        let (v, _) = fd_exterior_derivative(coeff, &[0.1, 0.2, 0.3], 1e-2).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn tiny_steps_are_rejected() {
        let coeff = |_: usize, y: &[f64]| Ok(1.0 + y[0]);
        assert!(matches!(
            fd_exterior_derivative(coeff, &[0.5, 0.5], 1e-12),
            Err(Error::StepTooSmall { .. })
        ));
    }
}
