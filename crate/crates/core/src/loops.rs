//! Loops, circle actions, the Chern–Simons form on loop space and its
//! pullback along circle actions.
//!
//! For a loop `γ` and tangent fields `X₁ … Xₙ` along it,
//!
//! ```text
//! CS(γ)(X₁, …, Xₙ) = ∫₀^{2π} K_{ν λ₁…λₙ}(γ(θ)) γ̇^ν X₁^{λ₁} ⋯ Xₙ^{λₙ} dθ
//! ```
//!
//! A circle action `a(θ, m)` turns every point `m` into the loop
//! `θ ↦ a(θ, m)` and every coordinate vector `∂_i` into the field
//! `∂a/∂x^i` along it, so the pulled-back form is the top-degree form whose
//! single chart coefficient is `CS(a(·, m))(∂_1 a, …, ∂_n a)`.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Chart, SmoothMap};
use crate::jet::Jet;
use crate::ktensor::{abs_dot, det_magnitude, dot, KField};
use crate::linalg;
use crate::quadrature::{integrate_values, parallel_map, Axis, Estimate, QuadratureGrid};

/// Default number of θ nodes.
pub const DEFAULT_THETA_NODES: usize = 256;

/// Uniform periodic θ grid on `[offset, offset + 2π)`.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaGrid {
    pub axis: Axis,
    /// Relative refinement tolerance; `None` disables the check.
    pub tolerance: Option<f64>,
}

impl ThetaGrid {
    pub fn new(nodes: usize) -> ThetaGrid {
        ThetaGrid::shifted(nodes, 0.0)
    }

    pub fn shifted(nodes: usize, offset: f64) -> ThetaGrid {
        ThetaGrid {
            axis: Axis::periodic(offset, offset + TAU, nodes).expect("θ axis"),
            tolerance: None,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> ThetaGrid {
        self.tolerance = Some(tol);
        self
    }

    pub fn nodes(&self) -> &[f64] {
        self.axis.nodes()
    }

    pub fn len(&self) -> usize {
        self.axis.count
    }

    pub fn is_empty(&self) -> bool {
        self.axis.count == 0
    }
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid::new(DEFAULT_THETA_NODES)
    }
}

/// Result of a θ-integral: trapezoid value, the difference to the
/// every-other-node rule, and the integral of the cancellation-free
/// integrand magnitude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LoopIntegral {
    pub value: f64,
    pub error: f64,
    pub scale: f64,
}

impl LoopIntegral {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            self.value.abs()
        }
    }
}

/// Integrates samples `(value, magnitude)` taken at every node of `grid`.
pub fn theta_integral(grid: &ThetaGrid, samples: &[(f64, f64)]) -> Result<LoopIntegral> {
    let n = samples.len();
    let h = TAU / n as f64;
    let value = h * crate::quadrature::ordered_sum(samples.iter().map(|s| s.0));
    let scale = h * crate::quadrature::ordered_sum(samples.iter().map(|s| s.1));
    let error = if n % 2 == 0 {
        let coarse = 2.0 * h * crate::quadrature::ordered_sum(samples.iter().step_by(2).map(|s| s.0));
        (value - coarse).abs()
    } else {
        0.0
    };
    if let Some(tol) = grid.tolerance {
        if error > tol * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::GridTooCoarse {
                estimate: error / scale,
                tolerance: tol,
            });
        }
    }
    Ok(LoopIntegral { value, error, scale })
}

/// `a(θ, m)`: a smooth map `S¹ × M → M` with `a(0, ·) = id`.
#[derive(Clone)]
pub struct CircleAction {
    pub label: String,
    pub map: Arc<dyn SmoothMap>,
}

impl std::fmt::Debug for CircleAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CircleAction({})", self.label)
    }
}

/// Tolerance for `a(0, m) = m` and `a(θ + 2π, m) = a(θ, m)`.
pub const ACTION_TOL: f64 = 1e-12;

impl CircleAction {
    pub fn new(label: impl Into<String>, map: Arc<dyn SmoothMap>) -> Result<CircleAction> {
        let dom = map.domain();
        let cod = map.codomain();
        if dom.dim() != cod.dim() + 1 || dom.periods[0] != Some(TAU) {
            return Err(Error::ChartMismatch {
                expected: format!("S1x{}", cod.name),
                found: dom.name.clone(),
            });
        }
        Ok(CircleAction {
            label: label.into(),
            map,
        })
    }

    pub fn manifold(&self) -> &Arc<Chart> {
        self.map.codomain()
    }

    pub fn dim(&self) -> usize {
        self.manifold().dim()
    }

    pub fn apply(&self, theta: f64, m: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(m.len() + 1);
        x.push(theta);
        x.extend_from_slice(m);
        self.map.eval(&x)
    }

    /// Largest violation of the identity-at-zero and periodicity invariants
    /// over `samples`, measured in chart distance.
    pub fn invariant_deviation(&self, samples: &[(f64, Vec<f64>)]) -> f64 {
        let chart = self.manifold();
        samples
            .iter()
            .map(|(theta, m)| {
                let at0 = chart.distance(&self.apply(0.0, m), m);
                let per = chart.distance(&self.apply(theta + TAU, m), &self.apply(*theta, m));
                at0.max(per)
            })
            .fold(0.0, f64::max)
    }

    pub fn check(&self, samples: &[(f64, Vec<f64>)]) -> Result<()> {
        let dev = self.invariant_deviation(samples);
        if dev > ACTION_TOL {
            return Err(Error::InvalidParameter(format!(
                "action `{}` violates a(0,·)=id or 2π-periodicity by {dev:e}",
                self.label
            )));
        }
        Ok(())
    }
}

struct Iterate {
    inner: Arc<dyn SmoothMap>,
    n: f64,
}

impl SmoothMap for Iterate {
    fn domain(&self) -> &Arc<Chart> {
        self.inner.domain()
    }
    fn codomain(&self) -> &Arc<Chart> {
        self.inner.codomain()
    }
    fn derivative_order(&self) -> usize {
        self.inner.derivative_order()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y[0] *= self.n;
        self.inner.eval(&y)
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        let mut y = x.to_vec();
        y[0] = y[0].clone() * self.n;
        self.inner.eval_jet(&y)
    }
}

/// `a_n(θ, m) = a(nθ, m)`.
pub fn iterate_action(action: &CircleAction, n: u32) -> Result<CircleAction> {
    if n == 0 {
        return Err(Error::InvalidParameter("iterate count must be ≥ 1".into()));
    }
    if n == 1 {
        return Ok(action.clone());
    }
    Ok(CircleAction {
        label: format!("{}^{n}", action.label),
        map: Arc::new(Iterate {
            inner: action.map.clone(),
            n: n as f64,
        }),
    })
}

/// A loop `γ: S¹ → M`.
#[derive(Clone)]
pub struct Loop {
    pub gamma: Arc<dyn SmoothMap>,
}

type FrameField = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Tangent fields `X₁ … Xₙ` along a loop, as functions of θ.
#[derive(Clone)]
pub struct LoopTangentFrame {
    pub fields: Vec<FrameField>,
}

impl LoopTangentFrame {
    /// Constant coordinate frame `∂_1, …, ∂_n`.
    pub fn coordinate(n: usize) -> LoopTangentFrame {
        LoopTangentFrame {
            fields: (0..n)
                .map(|i| {
                    Arc::new(move |_: f64| (0..n).map(|j| (i == j) as u8 as f64).collect()) as FrameField
                })
                .collect(),
        }
    }

    pub fn swapped(&self, i: usize, j: usize) -> LoopTangentFrame {
        let mut f = self.clone();
        f.fields.swap(i, j);
        f
    }
}

/// `∫₀^{2π} K(γ)(γ̇; X₁, …, Xₙ) dθ`.
pub fn csw_eval(
    kfield: &KField,
    gamma: &Loop,
    frame: &LoopTangentFrame,
    grid: &ThetaGrid,
) -> Result<LoopIntegral> {
    let n = kfield.dim();
    if frame.fields.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: frame.fields.len(),
        });
    }
    let mut samples = Vec::with_capacity(grid.len());
    for &theta in grid.nodes() {
        let t = kfield.engine.taylor(gamma.gamma.as_ref(), &[theta], 1)?;
        let x = t.value();
        let vel = t.column(0);
        let cols: Vec<Vec<f64>> = frame.fields.iter().map(|f| f(theta)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let k = kfield.k(&x)?;
        samples.push((k.contract(&vel, &refs), k.contract_magnitude(&vel, &refs)));
    }
    theta_integral(grid, &samples)
}

/// Integrand of the pulled-back form at `(θ, m)`: the value and its
/// cancellation-free magnitude.
pub fn pullback_integrand(kfield: &KField, action: &CircleAction, theta: f64, m: &[f64]) -> Result<(f64, f64)> {
    let n = m.len();
    let mut x = Vec::with_capacity(n + 1);
    x.push(theta);
    x.extend_from_slice(m);
    let t = kfield.engine.taylor(action.map.as_ref(), &x, 1)?;
    let gamma = t.value();
    let vel = t.column(0);
    let cols: Vec<Vec<f64>> = (1..=n).map(|i| t.column(i)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let k = kfield.k(&gamma)?;
    Ok((
        dot(&k.kappa, &vel) * linalg::det_columns(&refs),
        abs_dot(&k.magnitude, &vel) * det_magnitude(&refs),
    ))
}

/// Chart coefficient of the pulled-back form at `m`.
pub fn pullback_form_at(
    kfield: &KField,
    action: &CircleAction,
    m: &[f64],
    grid: &ThetaGrid,
) -> Result<LoopIntegral> {
    if action.dim() != kfield.dim() || m.len() != kfield.dim() {
        return Err(Error::DimensionMismatch {
            expected: kfield.dim(),
            found: m.len(),
        });
    }
    let samples = grid
        .nodes()
        .iter()
        .map(|&theta| pullback_integrand(kfield, action, theta, m))
        .collect::<Result<Vec<_>>>()?;
    theta_integral(grid, &samples)
}

/// `I(a) = ∫_M a*CS` with its error budget.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvariantResult {
    pub value: f64,
    /// Spatial refinement estimate plus accumulated θ refinement estimate.
    pub error: f64,
    pub spatial_error: f64,
    pub theta_error: f64,
    /// `∫_M` of the cancellation-free integrand magnitude.
    pub scale: f64,
    pub nodes: usize,
}

impl InvariantResult {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            error: self.error,
        }
    }

    pub fn is_nonzero(&self) -> bool {
        self.estimate().is_nonzero()
    }
}

/// Integrates the pulled-back form over the box of `grid` (coordinate
/// measure; the integrand is already a top-form coefficient).
pub fn invariant_i(
    kfield: &KField,
    action: &CircleAction,
    grid: &QuadratureGrid,
    theta: &ThetaGrid,
    workers: usize,
) -> Result<InvariantResult> {
    if grid.dim() != kfield.dim() {
        return Err(Error::DimensionMismatch {
            expected: kfield.dim(),
            found: grid.dim(),
        });
    }
    let point = |m: &[f64]| pullback_form_at(kfield, action, m, theta);
    let fine: Vec<LoopIntegral> =
        crate::quadrature::par_map_indexed(grid.total(), workers, |i| point(&grid.node(i)))?;
    let values: Vec<f64> = fine.iter().map(|l| l.value).collect();
    let est = integrate_values(|m: &[f64]| point(m).map(|l| l.value), grid, &values, workers)?;
    let weighted = |f: &dyn Fn(&LoopIntegral) -> f64| {
        crate::quadrature::ordered_sum(fine.iter().enumerate().map(|(i, l)| grid.weight(i) * f(l)))
    };
    let theta_error = weighted(&|l| l.error);
    let scale = weighted(&|l| l.scale);
    Ok(InvariantResult {
        value: est.value,
        error: est.error + theta_error,
        spatial_error: est.error,
        theta_error,
        scale,
        nodes: grid.total(),
    })
}

/// Values of the pulled-back form at every node of `grid`.
pub fn pullback_grid(
    kfield: &KField,
    action: &CircleAction,
    grid: &QuadratureGrid,
    theta: &ThetaGrid,
    workers: usize,
) -> Result<Vec<f64>> {
    parallel_map(|m| pullback_form_at(kfield, action, m, theta).map(|l| l.value), grid, workers)
}

/// Relative threshold below which the ratio test falls back to a
/// difference test.
pub const RATIO_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub n: u32,
    pub samples: usize,
    /// Samples whose base value exceeded the threshold.
    pub ratio_samples: usize,
    /// `max |P(a_n)/P(a) − n| / n` over the ratio samples.
    pub pointwise_ratio_deviation: Option<f64>,
    /// `max |P(a_n) − n P(a)| / scale` over all samples.
    pub pointwise_difference: f64,
    pub base_integral: Option<InvariantResult>,
    pub iterated_integral: Option<InvariantResult>,
    /// `I(a_n) / (n I(a)) − 1`.
    pub integral_ratio_deviation: Option<f64>,
}

impl ScalingReport {
    pub fn pointwise_deviation(&self) -> f64 {
        self.pointwise_ratio_deviation
            .unwrap_or(0.0)
            .max(self.pointwise_difference)
    }
}

/// Compares the pulled-back form of `a_n` with `n` times that of `a`.
pub fn scaling_check(
    kfield: &KField,
    action: &CircleAction,
    n: u32,
    samples: &[Vec<f64>],
    integral: Option<(&QuadratureGrid, usize)>,
    theta: &ThetaGrid,
) -> Result<ScalingReport> {
    let an = iterate_action(action, n)?;
    let nf = n as f64;
    let mut ratio_dev: Option<f64> = None;
    let mut ratio_samples = 0;
    let mut diff = 0.0f64;
    for m in samples {
        let base = pullback_form_at(kfield, action, m, theta)?;
        let iter = pullback_form_at(kfield, &an, m, theta)?;
        let scale = nf * base.scale.max(iter.scale / nf);
        let d = if scale > 0.0 {
            (iter.value - nf * base.value).abs() / scale
        } else {
            (iter.value - nf * base.value).abs()
        };
        diff = diff.max(d);
        if base.value.abs() > RATIO_THRESHOLD * base.scale && base.value != 0.0 {
            ratio_samples += 1;
            let r = ((iter.value / base.value) - nf).abs() / nf;
            ratio_dev = Some(ratio_dev.map_or(r, |x| x.max(r)));
        }
    }
    if ratio_samples == 0 && diff > RATIO_THRESHOLD && !samples.is_empty() {
        return Err(Error::DenominatorBelowThreshold);
    }
    let (base_integral, iterated_integral, integral_ratio_deviation) = match integral {
        Some((grid, workers)) => {
            let b = invariant_i(kfield, action, grid, theta, workers)?;
            let it = invariant_i(kfield, &an, grid, theta, workers)?;
            let dev = if b.is_nonzero() {
                Some(it.value / (nf * b.value) - 1.0)
            } else {
                None
            };
            (Some(b), Some(it), dev)
        }
        None => (None, None, None),
    };
    Ok(ScalingReport {
        n,
        samples: samples.len(),
        ratio_samples,
        pointwise_ratio_deviation: ratio_dev,
        pointwise_difference: diff,
        base_integral,
        iterated_integral,
        integral_ratio_deviation,
    })
}
