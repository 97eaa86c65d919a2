//! Charts, points, smooth maps and the derivative engine.
//!
//! Manifolds are presented as single almost-global charts: a coordinate box
//! with optional per-axis periods. Smooth maps are evaluated either on plain
//! `f64` coordinates or on [`Jet`]s, which is how the series derivative mode
//! obtains exact partials up to order three.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetLayout, Scalar, MAX_ORDER};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chart {
    pub name: String,
    pub coordinate_names: Vec<String>,
    pub periods: Vec<Option<f64>>,
    pub domain: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        coordinate_names: Vec<String>,
        periods: Vec<Option<f64>>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Arc<Chart>> {
        let dim = coordinate_names.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("chart dimension must be ≥ 1".into()));
        }
        if periods.len() != dim || domain.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: periods.len().min(domain.len()),
            });
        }
        if let Some(p) = periods.iter().flatten().find(|p| !(**p > 0.0)) {
            return Err(Error::InvalidParameter(format!("period {p} is not positive")));
        }
        if let Some((lo, hi)) = domain.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidParameter(format!("empty domain [{lo}, {hi}]")));
        }
        Ok(Arc::new(Chart {
            name: name.into(),
            coordinate_names,
            periods,
            domain,
        }))
    }

    /// The circle with coordinate θ of period 2π.
    pub fn circle() -> Arc<Chart> {
        Chart::new("S1", vec!["theta".into()], vec![Some(TAU)], vec![(0.0, TAU)])
            .expect("circle chart")
    }

    /// The unit interval used as homotopy parameter.
    pub fn unit_interval() -> Arc<Chart> {
        Chart::new("I", vec!["x0".into()], vec![None], vec![(0.0, 1.0)]).expect("interval chart")
    }

    /// Cartesian product of charts, coordinates concatenated in order.
    pub fn product(parts: &[&Chart]) -> Arc<Chart> {
        let name = parts
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join("x");
        let mut names = Vec::new();
        let mut periods = Vec::new();
        let mut domain = Vec::new();
        for c in parts {
            names.extend(c.coordinate_names.iter().cloned());
            periods.extend(c.periods.iter().copied());
            domain.extend(c.domain.iter().copied());
        }
        Chart::new(name, names, periods, domain).expect("product of valid charts")
    }

    pub fn dim(&self) -> usize {
        self.coordinate_names.len()
    }

    /// Checks `coords` against the domain box; periodic axes accept any
    /// finite value.
    pub fn check(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: coords.len(),
            });
        }
        for (axis, (&x, (&(lo, hi), period))) in coords
            .iter()
            .zip(self.domain.iter().zip(&self.periods))
            .enumerate()
        {
            let ok = match period {
                Some(_) => x.is_finite(),
                None => (lo..=hi).contains(&x),
            };
            if !ok {
                return Err(Error::PointOutsideDomain {
                    axis,
                    value: x,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Reduces periodic coordinates into `[lo, lo + period)`.
    pub fn wrap(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .zip(self.domain.iter().zip(&self.periods))
            .map(|(&x, (&(lo, _), period))| match period {
                Some(p) => lo + (x - lo).rem_euclid(*p),
                None => x,
            })
            .collect()
    }

    /// Largest coordinate difference between `a` and `b`, with periodic axes
    /// compared modulo their period.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.periods)
            .map(|((x, y), period)| {
                let d = x - y;
                match period {
                    Some(p) => {
                        let r = d.rem_euclid(*p);
                        r.min(p - r)
                    }
                    None => d.abs(),
                }
            })
            .fold(0.0, f64::max)
    }

    /// Distance from the nearest non-periodic boundary of the domain box.
    pub fn boundary_margin(&self, coords: &[f64]) -> f64 {
        coords
            .iter()
            .zip(self.domain.iter().zip(&self.periods))
            .filter(|(_, (_, p))| p.is_none())
            .map(|(&x, (&(lo, hi), _))| (x - lo).min(hi - x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct PointInChart {
    chart: Arc<Chart>,
    coords: Vec<f64>,
}

impl PointInChart {
    pub fn new(chart: &Arc<Chart>, coords: Vec<f64>) -> Result<PointInChart> {
        chart.check(&coords)?;
        Ok(PointInChart {
            chart: chart.clone(),
            coords,
        })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// A smooth map between charts, evaluable on values and on jets.
pub trait SmoothMap: Send + Sync {
    fn domain(&self) -> &Arc<Chart>;
    fn codomain(&self) -> &Arc<Chart>;

    /// Highest derivative order the map supports.
    fn derivative_order(&self) -> usize {
        MAX_ORDER
    }

    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet>;
}

impl fmt::Debug for dyn SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothMap({} -> {})", self.domain().name, self.codomain().name)
    }
}

/// A formula written once over any [`Scalar`].
///
/// Wrap it in [`ChartedMap`] to obtain a [`SmoothMap`].
pub trait ScalarMap: Send + Sync {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S>;
}

pub struct ChartedMap<M> {
    map: M,
    domain: Arc<Chart>,
    codomain: Arc<Chart>,
}

impl<M: ScalarMap + 'static> ChartedMap<M> {
    pub fn new(domain: &Arc<Chart>, codomain: &Arc<Chart>, map: M) -> ChartedMap<M> {
        ChartedMap {
            map,
            domain: domain.clone(),
            codomain: codomain.clone(),
        }
    }

    pub fn shared(domain: &Arc<Chart>, codomain: &Arc<Chart>, map: M) -> Arc<dyn SmoothMap> {
        Arc::new(Self::new(domain, codomain, map))
    }

    pub fn inner(&self) -> &M {
        &self.map
    }
}

impl<M: ScalarMap> SmoothMap for ChartedMap<M> {
    fn domain(&self) -> &Arc<Chart> {
        &self.domain
    }
    fn codomain(&self) -> &Arc<Chart> {
        &self.codomain
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.map.apply(x)
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.map.apply(x)
    }
}

pub struct IdentityFormula;

impl ScalarMap for IdentityFormula {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x.to_vec()
    }
}

pub fn identity_map(chart: &Arc<Chart>) -> Arc<dyn SmoothMap> {
    ChartedMap::shared(chart, chart, IdentityFormula)
}

/// `x ↦ A x + b` with `A` stored row-major.
pub struct AffineFormula {
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl ScalarMap for AffineFormula {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        (0..self.rows)
            .map(|r| {
                let mut acc = x[0].lift(self.offset[r]);
                for (c, xc) in x.iter().enumerate().take(self.cols) {
                    acc = acc + xc.clone() * self.matrix[r * self.cols + c];
                }
                acc
            })
            .collect()
    }
}

struct Composed {
    outer: Arc<dyn SmoothMap>,
    inner: Arc<dyn SmoothMap>,
}

impl SmoothMap for Composed {
    fn domain(&self) -> &Arc<Chart> {
        self.inner.domain()
    }
    fn codomain(&self) -> &Arc<Chart> {
        self.outer.codomain()
    }
    fn derivative_order(&self) -> usize {
        self.outer.derivative_order().min(self.inner.derivative_order())
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.outer.eval(&self.inner.eval(x))
    }
    fn eval_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.outer.eval_jet(&self.inner.eval_jet(x))
    }
}

/// `f ∘ g`. The codomain chart of `g` must equal the domain chart of `f`.
pub fn compose_maps(f: &Arc<dyn SmoothMap>, g: &Arc<dyn SmoothMap>) -> Result<Arc<dyn SmoothMap>> {
    if g.codomain() != f.domain() {
        return Err(Error::ChartMismatch {
            expected: f.domain().name.clone(),
            found: g.codomain().name.clone(),
        });
    }
    Ok(Arc::new(Composed {
        outer: f.clone(),
        inner: g.clone(),
    }))
}

/// All partial derivatives of a map's components up to some order at one
/// point, stored as jets.
#[derive(Clone, Debug)]
pub struct Taylor {
    components: Vec<Jet>,
}

impl Taylor {
    pub fn from_jets(components: Vec<Jet>) -> Taylor {
        Taylor { components }
    }

    pub fn components(&self) -> &[Jet] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Jet> {
        self.components
    }

    pub fn value(&self) -> Vec<f64> {
        self.components.iter().map(Jet::value).collect()
    }

    /// `∂^{multi_index}` of every component.
    pub fn partial(&self, multi_index: &[usize]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.partial(multi_index).unwrap_or(f64::NAN))
            .collect()
    }

    /// Jacobian column `∂F/∂x^i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.partial(&[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// Forward-propagated truncated Taylor series (exact to rounding).
    Series,
    /// Nested central differences with one Richardson step.
    FiniteDifference,
}

/// Derivative engine.
///
/// In finite-difference mode an order-`m` partial uses nested central
/// differences with step `fd_step · 10^(m−1)`, refined by one Richardson
/// extrapolation between `h` and `h/2`, giving O(h⁴) truncation error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeEngine {
    pub mode: DerivativeMode,
    pub fd_step: f64,
    pub max_order: usize,
}

impl Default for DerivativeEngine {
    fn default() -> Self {
        DerivativeEngine::series()
    }
}

impl DerivativeEngine {
    pub const DEFAULT_FD_STEP: f64 = 1e-4;

    pub fn series() -> DerivativeEngine {
        DerivativeEngine {
            mode: DerivativeMode::Series,
            fd_step: Self::DEFAULT_FD_STEP,
            max_order: MAX_ORDER,
        }
    }

    pub fn finite_difference(fd_step: f64) -> DerivativeEngine {
        DerivativeEngine {
            mode: DerivativeMode::FiniteDifference,
            fd_step,
            max_order: MAX_ORDER,
        }
    }

    pub fn with_mode(mode: DerivativeMode) -> DerivativeEngine {
        match mode {
            DerivativeMode::Series => Self::series(),
            DerivativeMode::FiniteDifference => Self::finite_difference(Self::DEFAULT_FD_STEP),
        }
    }

    fn check_order(&self, map: &dyn SmoothMap, order: usize) -> Result<()> {
        let supported = self.max_order.min(map.derivative_order());
        if order > supported {
            return Err(Error::OrderExceeded {
                requested: order,
                supported,
            });
        }
        Ok(())
    }

    /// Every partial derivative of `map` up to `order` at `point`.
    pub fn taylor(&self, map: &dyn SmoothMap, point: &[f64], order: usize) -> Result<Taylor> {
        self.check_order(map, order)?;
        map.domain().check(point)?;
        match self.mode {
            DerivativeMode::Series => Ok(Taylor::from_jets(map.eval_jet(&Jet::seed(point, order)))),
            DerivativeMode::FiniteDifference => Ok(self.fd_taylor(map, point, order)),
        }
    }

    /// `∂^{|multi_index|} map / ∂x^{multi_index}` componentwise.
    pub fn partial_derivative(
        &self,
        map: &dyn SmoothMap,
        point: &PointInChart,
        multi_index: &[usize],
    ) -> Result<Vec<f64>> {
        if point.chart() != map.domain() {
            return Err(Error::ChartMismatch {
                expected: map.domain().name.clone(),
                found: point.chart().name.clone(),
            });
        }
        if let Some(&bad) = multi_index.iter().find(|&&i| i >= map.domain().dim()) {
            return Err(Error::InvalidParameter(format!("coordinate index {bad} out of range")));
        }
        let order = multi_index.len();
        self.check_order(map, order)?;
        map.domain().check(point.coords())?;
        match self.mode {
            DerivativeMode::Series => {
                let jets = map.eval_jet(&Jet::seed(point.coords(), order));
                Ok(jets
                    .iter()
                    .map(|j| j.partial(multi_index).expect("order checked"))
                    .collect())
            }
            DerivativeMode::FiniteDifference => Ok(self.fd_partial(map, point.coords(), multi_index)),
        }
    }

    fn fd_nested(map: &dyn SmoothMap, x: &[f64], multi_index: &[usize], h: f64) -> Vec<f64> {
        let m = multi_index.len();
        if m == 0 {
            return map.eval(x);
        }
        // Periodic outputs are unwrapped against the centre value so a branch
        // cut between stencil points does not enter the difference.
        let centre = map.eval(x);
        let periods = &map.codomain().periods;
        let mut acc = vec![0.0; map.codomain().dim()];
        let mut y = x.to_vec();
        for signs in 0..(1u32 << m) {
            y.copy_from_slice(x);
            let mut parity = 1.0;
            for (bit, &i) in multi_index.iter().enumerate() {
                if signs >> bit & 1 == 1 {
                    y[i] -= h;
                    parity = -parity;
                } else {
                    y[i] += h;
                }
            }
            for ((a, v), (c, period)) in acc.iter_mut().zip(map.eval(&y)).zip(centre.iter().zip(periods)) {
                let v = match period {
                    Some(p) => v - p * ((v - c) / p).round(),
                    None => v,
                };
                *a += parity * v;
            }
        }
        let denom = (2.0 * h).powi(m as i32);
        acc.iter_mut().for_each(|a| *a /= denom);
        acc
    }

    fn fd_partial(&self, map: &dyn SmoothMap, x: &[f64], multi_index: &[usize]) -> Vec<f64> {
        let m = multi_index.len();
        if m == 0 {
            return map.eval(x);
        }
        let h = self.fd_step * 10f64.powi(m as i32 - 1);
        let coarse = Self::fd_nested(map, x, multi_index, h);
        let fine = Self::fd_nested(map, x, multi_index, h / 2.0);
        coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| (4.0 * f - c) / 3.0)
            .collect()
    }

    fn fd_taylor(&self, map: &dyn SmoothMap, x: &[f64], order: usize) -> Taylor {
        let layout = JetLayout::get(x.len());
        let outputs = map.codomain().dim();
        let nmono = layout.len(order);
        let probe = Jet::constant(&layout, order, 0.0);
        let mut derivs = vec![vec![0.0; nmono]; outputs];
        for m in 0..nmono {
            let multi: Vec<usize> = probe
                .monomial(m)
                .iter()
                .enumerate()
                .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
                .collect();
            for (k, v) in self.fd_partial(map, x, &multi).into_iter().enumerate() {
                derivs[k][m] = v;
            }
        }
        Taylor::from_jets(
            derivs
                .iter()
                .map(|d| Jet::from_derivatives(&layout, order, d))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(n: usize) -> Arc<Chart> {
        Chart::new(
            format!("R{n}"),
            (0..n).map(|i| format!("x{i}")).collect(),
            vec![None; n],
            vec![(-10.0, 10.0); n],
        )
        .unwrap()
    }

    struct Product01;
    impl ScalarMap for Product01 {
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0].clone() * x[1].clone()]
        }
    }

    #[test]
    fn identity_first_derivative_is_unit_column() {
        let c = plane(3);
        let id = identity_map(&c);
        let p = PointInChart::new(&c, vec![0.5, -1.0, 2.0]).unwrap();
        let e = DerivativeEngine::series();
        for i in 0..3 {
            let col = e.partial_derivative(id.as_ref(), &p, &[i]).unwrap();
            let want: Vec<f64> = (0..3).map(|k| (k == i) as u8 as f64).collect();
            assert_eq!(col, want);
        }
    }

    #[test]
    fn mixed_partial_of_product() {
        let c = plane(2);
        let f = ChartedMap::shared(&c, &plane(1), Product01);
        let p = PointInChart::new(&c, vec![0.3, 0.9]).unwrap();
        let e = DerivativeEngine::series();
        assert_eq!(e.partial_derivative(f.as_ref(), &p, &[0, 1]).unwrap(), vec![1.0]);
        assert_eq!(e.partial_derivative(f.as_ref(), &p, &[1, 0]).unwrap(), vec![1.0]);
        let fd = DerivativeEngine::finite_difference(1e-4);
        let v = fd.partial_derivative(f.as_ref(), &p, &[0, 1]).unwrap()[0];
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn errors_on_order_and_domain() {
        let c = plane(2);
        let f = ChartedMap::shared(&c, &plane(1), Product01);
        let e = DerivativeEngine {
            max_order: 2,
            ..DerivativeEngine::series()
        };
        let p = PointInChart::new(&c, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            e.partial_derivative(f.as_ref(), &p, &[0, 0, 1]),
            Err(Error::OrderExceeded { requested: 3, supported: 2 })
        ));
        assert!(matches!(
            PointInChart::new(&c, vec![11.0, 0.0]),
            Err(Error::PointOutsideDomain { axis: 0, .. })
        ));
        assert!(e.taylor(f.as_ref(), &[0.0, 20.0], 1).is_err());
    }

    #[test]
    fn periodic_axes_accept_any_value_and_wrap() {
        let s = Chart::circle();
        assert!(s.check(&[100.0]).is_ok());
        let w = s.wrap(&[-0.5]);
        assert!((w[0] - (TAU - 0.5)).abs() < 1e-15);
        assert!(s.distance(&[0.1], &[TAU + 0.1]) < 1e-14);
    }

    #[test]
    fn compose_rejects_chart_mismatch() {
        let a = identity_map(&plane(2));
        let b = identity_map(&plane(3));
        assert!(matches!(compose_maps(&a, &b), Err(Error::ChartMismatch { .. })));
        let ok = compose_maps(&a, &a).unwrap();
        assert_eq!(ok.eval(&[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn composed_linear_maps_multiply_jacobians() {
        let c = plane(2);
        let f = ChartedMap::shared(
            &c,
            &c,
            AffineFormula {
                rows: 2,
                cols: 2,
                matrix: vec![1.0, 2.0, 3.0, 4.0],
                offset: vec![0.0, 1.0],
            },
        );
        let g = ChartedMap::shared(
            &c,
            &c,
            AffineFormula {
                rows: 2,
                cols: 2,
                matrix: vec![0.0, -1.0, 5.0, 0.5],
                offset: vec![2.0, 0.0],
            },
        );
        let fg = compose_maps(&f, &g).unwrap();
        let t = DerivativeEngine::series().taylor(fg.as_ref(), &[0.2, 0.7], 1).unwrap();
        // (AB) = [[1,2],[3,4]]·[[0,-1],[5,0.5]] = [[10, 0], [20, -1]]
        assert_eq!(t.column(0), vec![10.0, 20.0]);
        assert_eq!(t.column(1), vec![0.0, -1.0]);
    }
}
