//! Tensor-product quadrature, deterministic parallel evaluation and grid
//! refinement estimates.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Uniform nodes `lo + i·h`, equal weights; spectrally accurate for
    /// smooth periodic integrands.
    PeriodicTrapezoid,
    /// Cell midpoints, equal weights; never touches the endpoints.
    OpenMidpoint,
    /// Gauss–Legendre nodes; interior only, exact for polynomials of degree
    /// `2N − 1`.
    GaussLegendre,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub rule: QuadratureRule,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize, rule: QuadratureRule) -> Result<Axis> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("bad axis [{lo}, {hi}]")));
        }
        if count == 0 {
            return Err(Error::InvalidParameter("axis needs at least one node".into()));
        }
        let len = hi - lo;
        let (nodes, weights) = match rule {
            QuadratureRule::PeriodicTrapezoid => {
                let h = len / count as f64;
                ((0..count).map(|i| lo + i as f64 * h).collect(), vec![h; count])
            }
            QuadratureRule::OpenMidpoint => {
                let h = len / count as f64;
                (
                    (0..count).map(|i| lo + (i as f64 + 0.5) * h).collect(),
                    vec![h; count],
                )
            }
            QuadratureRule::GaussLegendre => {
                let (x, w) = gauss_legendre(count);
                (
                    x.iter().map(|t| lo + 0.5 * len * (t + 1.0)).collect(),
                    w.iter().map(|v| 0.5 * len * v).collect(),
                )
            }
        };
        Ok(Axis {
            lo,
            hi,
            count,
            rule,
            nodes,
            weights,
        })
    }

    pub fn periodic(lo: f64, hi: f64, count: usize) -> Result<Axis> {
        Axis::new(lo, hi, count, QuadratureRule::PeriodicTrapezoid)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same axis with half the nodes (at least one).
    pub fn coarsened(&self) -> Axis {
        Axis::new(self.lo, self.hi, self.count.div_ceil(2), self.rule).expect("valid axis")
    }

    /// Whether the nodes of [`coarsened`](Self::coarsened) are every other
    /// node of this axis.
    fn nests(&self) -> bool {
        self.rule == QuadratureRule::PeriodicTrapezoid && self.count % 2 == 0
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A tensor-product grid. Node `i` enumerates axes row-major with the last
/// axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureGrid {
    pub axes: Vec<Axis>,
}

impl QuadratureGrid {
    pub fn new(axes: Vec<Axis>) -> QuadratureGrid {
        QuadratureGrid { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn total(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|a| a.count).product()
        }
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.hi - a.lo).product()
    }

    fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            idx[d] = i % axis.count;
            i /= axis.count;
        }
        idx
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        self.multi_index(i)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.nodes[k])
            .collect()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.multi_index(i)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.weights[k])
            .product()
    }

    pub fn coarsened(&self) -> QuadratureGrid {
        QuadratureGrid::new(self.axes.iter().map(Axis::coarsened).collect())
    }

    /// Index in this grid of every node of the coarsened grid, when the
    /// coarse nodes are a subset.
    fn coarse_subset(&self) -> Option<Vec<usize>> {
        if !self.axes.iter().all(Axis::nests) {
            return None;
        }
        let coarse = self.coarsened();
        Some(
            (0..coarse.total())
                .map(|c| {
                    coarse
                        .multi_index(c)
                        .iter()
                        .zip(&self.axes)
                        .fold(0, |acc, (&k, a)| acc * a.count + 2 * k)
                })
                .collect(),
        )
    }
}

/// A value with a refinement error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    /// `|value| > 10 · error`.
    pub fn is_nonzero(&self) -> bool {
        self.value.abs() > 10.0 * self.error
    }
}

/// Compensated (Neumaier) sum in the given order.
pub fn ordered_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Evaluates `f(0..n)` on `workers` threads. The output is in index order
/// and does not depend on the worker count. The first failing index (in
/// index order) determines the error; a panic surfaces as [`Error::Worker`].
pub fn par_map_indexed<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if n == 0 {
        return Ok(Vec::new());
    }
    let workers = workers.max(1);
    let run = || -> Vec<Result<T>> {
        if workers == 1 {
            (0..n).map(&f).collect()
        } else {
            (0..n).into_par_iter().map(&f).collect()
        }
    };
    let results = if workers == 1 {
        catch_unwind(AssertUnwindSafe(run))
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Worker(e.to_string()))?;
        catch_unwind(AssertUnwindSafe(|| pool.install(run)))
    }
    .map_err(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "worker panicked".into());
        Error::Worker(msg)
    })?;
    results.into_iter().collect()
}

/// Field values at every node of `grid`.
pub fn parallel_map<F>(field: F, grid: &QuadratureGrid, workers: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    par_map_indexed(grid.total(), workers, |i| field(&grid.node(i)))
}

fn weighted_sum(grid: &QuadratureGrid, values: &[f64]) -> f64 {
    ordered_sum(values.iter().enumerate().map(|(i, v)| grid.weight(i) * v))
}

/// `∫ field` over the grid box with `|I_N − I_{N/2}|` as error estimate.
pub fn integrate<F>(field: F, grid: &QuadratureGrid, workers: usize) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    let fine_vals = parallel_map(&field, grid, workers)?;
    integrate_values(&field, grid, &fine_vals, workers)
}

/// Like [`integrate`], starting from values already computed on `grid`.
pub fn integrate_values<F>(field: F, grid: &QuadratureGrid, values: &[f64], workers: usize) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    let fine = weighted_sum(grid, values);
    let coarse_grid = grid.coarsened();
    let coarse_vals = match grid.coarse_subset() {
        Some(idx) => idx.iter().map(|&i| values[i]).collect(),
        None => parallel_map(&field, &coarse_grid, workers)?,
    };
    let coarse = weighted_sum(&coarse_grid, &coarse_vals);
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_volume() {
        for rule in [
            QuadratureRule::PeriodicTrapezoid,
            QuadratureRule::OpenMidpoint,
            QuadratureRule::GaussLegendre,
        ] {
            let g = QuadratureGrid::new(vec![
                Axis::new(0.0, 2.0 * PI, 6, rule).unwrap(),
                Axis::new(-1.0, 0.5, 5, rule).unwrap(),
            ]);
            let s: f64 = (0..g.total()).map(|i| g.weight(i)).sum();
            assert!((s - g.volume()).abs() < 1e-12 * g.volume());
        }
    }

    #[test]
    fn subset_reuse_matches_fresh_evaluation() {
        let g = QuadratureGrid::new(vec![
            Axis::periodic(0.0, 2.0 * PI, 8).unwrap(),
            Axis::periodic(0.0, 1.0, 4).unwrap(),
        ]);
        let idx = g.coarse_subset().unwrap();
        let c = g.coarsened();
        for (ci, &fi) in idx.iter().enumerate() {
            assert_eq!(c.node(ci), g.node(fi));
        }
    }

    #[test]
    fn worker_panic_becomes_error() {
        let r: Result<Vec<usize>> = par_map_indexed(4, 2, |i| {
            if i == 2 {
                panic!("boom");
            }
            Ok(i)
        });
        assert!(matches!(r, Err(Error::Worker(m)) if m.contains("boom")));
    }

    #[test]
    fn first_error_in_index_order_wins() {
        let r: Result<Vec<usize>> = par_map_indexed(10, 3, |i| {
            if i >= 4 {
                Err(Error::InvalidParameter(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        assert!(matches!(r, Err(Error::InvalidParameter(m)) if m == "4"));
    }
}
