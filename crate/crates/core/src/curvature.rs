//! Christoffel symbols and Riemann curvature of chart metrics.
//!
//! Sign convention, used everywhere in the crate:
//!
//! ```text
//! Γ^i_{jk}    = ½ g^{iℓ} (∂_j g_{ℓk} + ∂_k g_{jℓ} − ∂_ℓ g_{jk})
//! R_{ijk}^ℓ   = ∂_i Γ^ℓ_{jk} − ∂_j Γ^ℓ_{ik} + Γ^ℓ_{im} Γ^m_{jk} − Γ^ℓ_{jm} Γ^m_{ik}
//! R_{ijkℓ}    = R_{ijk}^m g_{mℓ}
//! ```
//!
//! so that `R(∂_i, ∂_j)∂_k = R_{ijk}^ℓ ∂_ℓ`. With this choice the unit round
//! sphere has `R_{ijkℓ} = g_{iℓ} g_{jk} − g_{ik} g_{jℓ}`.
//!
//! Everything is computed by one forward pass over jets: the metric is
//! expanded to order `r + 2`, Christoffel symbols to order `r + 1`, and the
//! curvature comes out as jets of order `r`, which gives `∂R` for free when
//! `r = 1`.

use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Chart, ChartedMap, DerivativeEngine, PointInChart, ScalarMap, SmoothMap};
use crate::jet::{Jet, Scalar};
use crate::linalg;

/// Relative tolerance for the symmetry of `g(x)`.
pub const METRIC_SYMMETRY_TOL: f64 = 1e-12;

/// A metric on a chart.
///
/// `g` maps chart coordinates to the `dim × dim` matrix `g_ij(x)`, flattened
/// row-major.
#[derive(Clone)]
pub struct MetricField {
    pub name: String,
    pub params: Vec<(String, f64)>,
    pub chart: Arc<Chart>,
    pub g: Arc<dyn SmoothMap>,
    ignorable: Vec<bool>,
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("chart", &self.chart.name)
            .finish()
    }
}

fn matrix_chart(n: usize) -> Arc<Chart> {
    Chart::new(
        format!("Sym({n})"),
        (0..n * n).map(|k| format!("g{}{}", k / n, k % n)).collect(),
        vec![None; n * n],
        vec![(f64::NEG_INFINITY, f64::INFINITY); n * n],
    )
    .expect("matrix chart")
}

impl MetricField {
    pub fn new<M: ScalarMap + 'static>(
        name: impl Into<String>,
        params: Vec<(String, f64)>,
        chart: &Arc<Chart>,
        formula: M,
    ) -> MetricField {
        let g = ChartedMap::shared(chart, &matrix_chart(chart.dim()), formula);
        MetricField {
            name: name.into(),
            params,
            chart: chart.clone(),
            g,
            ignorable: vec![false; chart.dim()],
        }
    }

    /// Marks coordinates the metric components do not depend on. Curvature
    /// caches key only on the remaining coordinates.
    pub fn with_ignorable(mut self, ignorable: &[usize]) -> MetricField {
        for &i in ignorable {
            self.ignorable[i] = true;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn ignorable(&self) -> &[bool] {
        &self.ignorable
    }

    /// Coordinates that determine every local invariant of the metric.
    pub fn essential_coords(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.ignorable)
            .filter(|(_, &ign)| !ign)
            .map(|(&v, _)| v)
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.g.eval(x)
    }

    /// Display label such as `berger:t=0.5`.
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            self.name.clone()
        } else {
            let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{}:{}", self.name, p.join(","))
        }
    }

    /// SHA-256 over the name, chart and parameter values, truncated to 64 bits.
    pub fn param_hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([0]);
        h.update(self.chart.name.as_bytes());
        for (k, v) in &self.params {
            h.update([0]);
            h.update(k.as_bytes());
            h.update(v.to_le_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }

    /// Checks symmetry and positive definiteness of `g` at `x`.
    pub fn check_at(&self, x: &[f64]) -> Result<()> {
        check_metric_values(&self.eval(x), self.dim(), x)
    }
}

fn check_metric_values(g: &[f64], n: usize, x: &[f64]) -> Result<()> {
    let scale = linalg::max_abs(g);
    if !g.iter().all(|v| v.is_finite()) || scale == 0.0 {
        return Err(Error::SingularMetric { point: x.to_vec() });
    }
    for i in 0..n {
        for j in 0..i {
            if (g[i * n + j] - g[j * n + i]).abs() > METRIC_SYMMETRY_TOL * scale {
                return Err(Error::InvalidParameter(format!(
                    "metric is not symmetric at {x:?} (entry {i},{j})"
                )));
            }
        }
    }
    if !linalg::is_positive_definite(g, n) {
        return Err(Error::NotPositiveDefinite {
            point: x.to_vec(),
            min_eigenvalue: linalg::min_eigenvalue(g, n),
        });
    }
    Ok(())
}

/// Curvature data at one point. Index layout is row-major in the order the
/// indices are written: `christoffel[i][j][k] = Γ^i_{jk}`,
/// `riemann_mixed[i][j][k][ℓ] = R_{ijk}^ℓ`, `riemann_lowered[i][j][k][ℓ] = R_{ijkℓ}`.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    pub dim: usize,
    pub metric: Vec<f64>,
    pub christoffel: Vec<f64>,
    pub riemann_mixed: Vec<f64>,
    pub riemann_lowered: Vec<f64>,
}

impl CurvatureSample {
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim;
        self.christoffel[(i * n + j) * n + k]
    }

    pub fn r_mixed(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.riemann_mixed[((i * n + j) * n + k) * n + l]
    }

    pub fn r_lowered(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.riemann_lowered[((i * n + j) * n + k) * n + l]
    }

    /// Residuals of the algebraic curvature identities, each relative to
    /// `max |R_{ijkℓ}|` (absolute when the curvature vanishes).
    pub fn identity_residuals(&self) -> CurvatureResiduals {
        let n = self.dim;
        let scale = linalg::max_abs(&self.riemann_lowered);
        let rel = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        let gscale = linalg::max_abs(&self.christoffel);
        let grel = if gscale > 0.0 { 1.0 / gscale } else { 1.0 };
        let mut res = CurvatureResiduals {
            scale,
            ..Default::default()
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    res.christoffel_symmetry = res
                        .christoffel_symmetry
                        .max((self.gamma(i, j, k) - self.gamma(i, k, j)).abs() * grel);
                    for l in 0..n {
                        let r = self.r_lowered(i, j, k, l);
                        res.antisymmetry_ij = res
                            .antisymmetry_ij
                            .max((r + self.r_lowered(j, i, k, l)).abs() * rel);
                        res.antisymmetry_kl = res
                            .antisymmetry_kl
                            .max((r + self.r_lowered(i, j, l, k)).abs() * rel);
                        let b = r + self.r_lowered(j, k, i, l) + self.r_lowered(k, i, j, l);
                        res.bianchi = res.bianchi.max(b.abs() * rel);
                    }
                }
            }
        }
        res
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct CurvatureResiduals {
    pub scale: f64,
    pub christoffel_symmetry: f64,
    pub antisymmetry_ij: f64,
    pub antisymmetry_kl: f64,
    pub bianchi: f64,
}

impl CurvatureResiduals {
    pub fn max(&self) -> f64 {
        self.christoffel_symmetry
            .max(self.antisymmetry_ij)
            .max(self.antisymmetry_kl)
            .max(self.bianchi)
    }
}

/// Jets of the curvature at a point, truncated to the requested order.
pub struct CurvatureJets {
    pub dim: usize,
    pub order: usize,
    pub metric: Vec<Jet>,
    pub christoffel: Vec<Jet>,
    pub riemann_mixed: Vec<Jet>,
}

impl CurvatureJets {
    /// `∂_μ R_{ijk}^ℓ` for every component (requires order ≥ 1).
    pub fn riemann_partial(&self, mu: usize) -> Vec<f64> {
        self.riemann_mixed
            .iter()
            .map(|r| r.partial(&[mu]).expect("curvature jets of order ≥ 1"))
            .collect()
    }

    pub fn riemann_values(&self) -> Vec<f64> {
        self.riemann_mixed.iter().map(Jet::value).collect()
    }
}

/// Curvature jets of order `order` (0 or 1) at `x`.
pub fn curvature_jets(
    metric: &MetricField,
    x: &[f64],
    engine: &DerivativeEngine,
    order: usize,
) -> Result<CurvatureJets> {
    let n = metric.dim();
    let g = engine.taylor(metric.g.as_ref(), x, order + 2)?.into_components();
    let g0: Vec<f64> = g.iter().map(Jet::value).collect();
    check_metric_values(&g0, n, x)?;

    let g1: Vec<Jet> = g.iter().map(|c| c.truncate(order + 1)).collect();
    let ginv = linalg::invert(&g1, n).ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
    // dg[(m, a, b)] = ∂_m g_ab
    let dg: Vec<Jet> = (0..n)
        .flat_map(|m| g.iter().map(move |c| c.derivative(m)))
        .collect();
    let dg_at = |m: usize, a: usize, b: usize| &dg[(m * n + a) * n + b];

    // Γ_{ℓjk} = ½(∂_j g_ℓk + ∂_k g_jℓ − ∂_ℓ g_jk), then raised with g^{iℓ}.
    let mut christoffel: Vec<Option<Jet>> = vec![None; n * n * n];
    let mut lower = vec![None; n];
    for j in 0..n {
        for k in j..n {
            for (l, slot) in lower.iter_mut().enumerate() {
                *slot = Some(
                    (dg_at(j, l, k).clone() + dg_at(k, j, l).clone() - dg_at(l, j, k).clone()) * 0.5,
                );
            }
            for i in 0..n {
                let mut acc = ginv[i * n].clone() * lower[0].clone().expect("set");
                for (l, low) in lower.iter().enumerate().skip(1) {
                    acc = acc + ginv[i * n + l].clone() * low.clone().expect("set");
                }
                christoffel[(i * n + j) * n + k] = Some(acc.clone());
                christoffel[(i * n + k) * n + j] = Some(acc);
            }
        }
    }
    let christoffel: Vec<Jet> = christoffel.into_iter().map(|c| c.expect("filled")).collect();

    let dgamma: Vec<Vec<Jet>> = (0..n)
        .map(|m| christoffel.iter().map(|c| c.derivative(m)).collect())
        .collect();
    let gamma_r: Vec<Jet> = christoffel.iter().map(|c| c.truncate(order)).collect();
    let riemann_mixed = assemble_riemann(n, &gamma_r, &dgamma);
    Ok(CurvatureJets {
        dim: n,
        order,
        metric: g.iter().map(|c| c.truncate(order)).collect(),
        christoffel: gamma_r,
        riemann_mixed,
    })
}

/// `R_{ijk}^ℓ` from `Γ` and `dgamma[m] = ∂_m Γ`.
fn assemble_riemann<S: Scalar>(n: usize, gamma: &[S], dgamma: &[Vec<S>]) -> Vec<S> {
    let gi = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    let mut out = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = dgamma[i][gi(l, j, k)].clone() - dgamma[j][gi(l, i, k)].clone();
                    for m in 0..n {
                        acc = acc + gamma[gi(l, i, m)].clone() * gamma[gi(m, j, k)].clone()
                            - gamma[gi(l, j, m)].clone() * gamma[gi(m, i, k)].clone();
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

fn lower_index(n: usize, mixed: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n * n];
    for ijk in 0..n * n * n {
        for l in 0..n {
            out[ijk * n + l] = (0..n).map(|m| mixed[ijk * n + m] * g[m * n + l]).sum();
        }
    }
    out
}

fn check_point(metric: &MetricField, point: &PointInChart) -> Result<()> {
    if point.chart() != &metric.chart {
        return Err(Error::ChartMismatch {
            expected: metric.chart.name.clone(),
            found: point.chart().name.clone(),
        });
    }
    Ok(())
}

/// `Γ^i_{jk}` at `point`, flattened as `[i][j][k]`.
pub fn christoffel(
    metric: &MetricField,
    point: &PointInChart,
    engine: &DerivativeEngine,
) -> Result<Vec<f64>> {
    check_point(metric, point)?;
    let n = metric.dim();
    let g = engine.taylor(metric.g.as_ref(), point.coords(), 1)?.into_components();
    let g0: Vec<f64> = g.iter().map(Jet::value).collect();
    check_metric_values(&g0, n, point.coords())?;
    let ginv = linalg::invert(&g0, n).ok_or_else(|| Error::SingularMetric {
        point: point.coords().to_vec(),
    })?;
    let dg = |m: usize, a: usize, b: usize| g[a * n + b].partial(&[m]).expect("order 1");
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = 0.5
                    * (0..n)
                        .map(|l| ginv[i * n + l] * (dg(j, l, k) + dg(k, j, l) - dg(l, j, k)))
                        .sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// Full curvature sample at `point`.
pub fn riemann(
    metric: &MetricField,
    point: &PointInChart,
    engine: &DerivativeEngine,
) -> Result<CurvatureSample> {
    check_point(metric, point)?;
    riemann_at(metric, point.coords(), engine)
}

/// [`riemann`] on raw coordinates.
pub fn riemann_at(metric: &MetricField, x: &[f64], engine: &DerivativeEngine) -> Result<CurvatureSample> {
    let n = metric.dim();
    let jets = curvature_jets(metric, x, engine, 0)?;
    let g: Vec<f64> = jets.metric.iter().map(Jet::value).collect();
    let mixed = jets.riemann_values();
    Ok(CurvatureSample {
        point: x.to_vec(),
        dim: n,
        riemann_lowered: lower_index(n, &mixed, &g),
        christoffel: jets.christoffel.iter().map(Jet::value).collect(),
        riemann_mixed: mixed,
        metric: g,
    })
}

/// Outcome of a curvature-naturality check under a map.
#[derive(Clone, Debug, Serialize)]
pub struct PullbackReport {
    pub samples: usize,
    /// `max |g − F*g| / max |g|` over the samples.
    pub metric_deviation: f64,
    /// `max |R(x) − F*R(F(x))| / max |R(x)|` over the samples.
    pub curvature_deviation: f64,
}

/// Tolerance for accepting a map as metric-preserving.
pub const ISOMETRY_TOL: f64 = 1e-8;

/// `max |g(x) − Jᵀ g(F(x)) J| / max |g(x)|` at one point.
pub fn metric_pullback_deviation(
    metric: &MetricField,
    map: &dyn SmoothMap,
    x: &[f64],
    engine: &DerivativeEngine,
) -> Result<f64> {
    let n = metric.dim();
    let t = engine.taylor(map, x, 1)?;
    let fx = t.value();
    let jac: Vec<Vec<f64>> = (0..n).map(|i| t.column(i)).collect();
    let g = metric.eval(x);
    let gf = metric.eval(&fx);
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
    Ok(dev / linalg::max_abs(&g))
}

/// Checks `R_{ijkℓ}(x) = R_{λμνκ}(F(x)) ∂_iF^λ ∂_jF^μ ∂_kF^ν ∂_ℓF^κ` at each
/// sample after confirming that `F` preserves the metric.
pub fn verify_curvature_pullback(
    metric: &MetricField,
    isometry: &dyn SmoothMap,
    points: &[Vec<f64>],
    engine: &DerivativeEngine,
) -> Result<PullbackReport> {
    if isometry.domain() != &metric.chart || isometry.codomain() != &metric.chart {
        return Err(Error::ChartMismatch {
            expected: metric.chart.name.clone(),
            found: isometry.domain().name.clone(),
        });
    }
    let n = metric.dim();
    let mut metric_dev = 0.0f64;
    for x in points {
        metric_dev = metric_dev.max(metric_pullback_deviation(metric, isometry, x, engine)?);
    }
    if metric_dev > ISOMETRY_TOL {
        return Err(Error::NotAnIsometry {
            deviation: metric_dev,
            tolerance: ISOMETRY_TOL,
        });
    }
    let mut curv_dev = 0.0f64;
    for x in points {
        let t = engine.taylor(isometry, x, 1)?;
        let jac: Vec<Vec<f64>> = (0..n).map(|i| t.column(i)).collect();
        let here = riemann_at(metric, x, engine)?;
        let there = riemann_at(metric, &t.value(), engine)?;
        let pulled = pull_back_4(n, &there.riemann_lowered, &jac);
        let diff = here
            .riemann_lowered
            .iter()
            .zip(&pulled)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = linalg::max_abs(&here.riemann_lowered);
        curv_dev = curv_dev.max(if scale > 0.0 { diff / scale } else { diff });
    }
    Ok(PullbackReport {
        samples: points.len(),
        metric_deviation: metric_dev,
        curvature_deviation: curv_dev,
    })
}

/// `T_{ijkℓ} = S_{abcd} J_i^a J_j^b J_k^c J_ℓ^d` with `jac[i][a] = ∂_i F^a`,
/// contracted one index at a time.
pub fn pull_back_4(n: usize, s: &[f64], jac: &[Vec<f64>]) -> Vec<f64> {
    let mut cur = s.to_vec();
    for slot in 0..4 {
        let stride = n.pow(3 - slot as u32);
        let mut next = vec![0.0; cur.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            *out = (0..n).map(|a| jac[i][a] * cur[base + a * stride]).sum();
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    struct Euclid(usize);
    impl ScalarMap for Euclid {
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            let n = self.0;
            (0..n * n)
                .map(|k| x[0].lift((k / n == k % n) as u8 as f64))
                .collect()
        }
    }

    struct Sphere2;
    impl ScalarMap for Sphere2 {
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            let s = x[0].sin();
            vec![x[0].lift(1.0), x[0].lift(0.0), x[0].lift(0.0), s.clone() * s]
        }
    }

    fn polar_chart() -> Arc<Chart> {
        Chart::new(
            "S2-polar",
            vec!["theta".into(), "phi".into()],
            vec![None, Some(2.0 * PI)],
            vec![(0.0, PI), (0.0, 2.0 * PI)],
        )
        .unwrap()
    }

    #[test]
    fn euclidean_metric_is_flat() {
        let c = Chart::new("R3", vec!["x".into(), "y".into(), "z".into()], vec![None; 3], vec![(-1.0, 1.0); 3])
            .unwrap();
        let m = MetricField::new("euclid", vec![], &c, Euclid(3));
        let p = PointInChart::new(&c, vec![0.1, 0.2, 0.3]).unwrap();
        let e = DerivativeEngine::series();
        assert!(christoffel(&m, &p, &e).unwrap().iter().all(|&v| v == 0.0));
        let s = riemann(&m, &p, &e).unwrap();
        assert!(s.riemann_lowered.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_sphere_christoffel_closed_form() {
        let c = polar_chart();
        let m = MetricField::new("S2", vec![], &c, Sphere2);
        let th = PI / 3.0;
        let p = PointInChart::new(&c, vec![th, 0.4]).unwrap();
        let g = christoffel(&m, &p, &DerivativeEngine::series()).unwrap();
        let at = |i: usize, j: usize, k: usize| g[(i * 2 + j) * 2 + k];
        assert!((at(0, 1, 1) + th.sin() * th.cos()).abs() < 1e-15);
        assert!((at(1, 0, 1) - th.cos() / th.sin()).abs() < 1e-15);
        assert!((at(1, 1, 0) - th.cos() / th.sin()).abs() < 1e-15);
        assert_eq!(at(0, 0, 0), 0.0);
    }

    #[test]
    fn two_sphere_has_unit_sectional_curvature() {
        let c = polar_chart();
        let m = MetricField::new("S2", vec![], &c, Sphere2);
        let s = riemann_at(&m, &[1.1, 0.0], &DerivativeEngine::series()).unwrap();
        // R_{θφφθ} = g_θθ g_φφ with this sign convention.
        let want = 1.1f64.sin().powi(2);
        assert!((s.r_lowered(0, 1, 1, 0) - want).abs() < 1e-14);
        assert!((s.r_lowered(0, 1, 0, 1) + want).abs() < 1e-14);
        assert!(s.identity_residuals().max() < 1e-14);
    }

    #[test]
    fn singular_and_indefinite_metrics_are_rejected() {
        struct Bad;
        impl ScalarMap for Bad {
            fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
                vec![x[0].lift(1.0), x[0].lift(0.0), x[0].lift(0.0), x[0].clone() - 0.5]
            }
        }
        let c = Chart::new("R2", vec!["x".into(), "y".into()], vec![None; 2], vec![(-1.0, 1.0); 2]).unwrap();
        let m = MetricField::new("bad", vec![], &c, Bad);
        let e = DerivativeEngine::series();
        assert!(matches!(riemann_at(&m, &[0.0, 0.0], &e), Err(Error::NotPositiveDefinite { .. })));
        assert!(matches!(riemann_at(&m, &[0.5, 0.0], &e), Err(Error::SingularMetric { .. }) | Err(Error::NotPositiveDefinite { .. })));
        assert!(riemann_at(&m, &[0.9, 0.0], &e).is_ok());
    }

    #[test]
    fn pull_back_4_identity_and_scaling() {
        let n = 2;
        let s: Vec<f64> = (0..16).map(|k| k as f64).collect();
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(pull_back_4(n, &s, &id), s);
        let twice = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let out = pull_back_4(n, &s, &twice);
        assert!(out.iter().zip(&s).all(|(a, b)| *a == 16.0 * b));
        // Swap of the two coordinates permutes every index.
        let swap = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let out = pull_back_4(n, &s, &swap);
        assert_eq!(out[0], s[15]);
        assert_eq!(out[1], s[14]);
    }
}
