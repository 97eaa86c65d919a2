//! Concrete metrics, isometries, circle actions and homotopies.
//!
//! Odd spheres `S^{2c−1} ⊂ ℂ^c` (`c = 2, 3`) use Hopf coordinates. On S⁵,
//!
//! ```text
//! z = (cos α e^{iφ₁}, sin α cos β e^{iφ₂}, sin α sin β e^{iφ₃}),   α, β ∈ [0, π/2]
//! ```
//!
//! and on S³ `z = (cos α e^{iφ₁}, sin α e^{iφ₂})`. Real coordinates of `ℂ^c`
//! are ordered `(Re z₁, Im z₁, Re z₂, …)`. The Berger family rescales the
//! Hopf fibre: `g_t = g + (t² − 1) η ⊗ η` with `η` the contact form dual to
//! `V = Σ ∂_{φ_j}`, so `|V|² = t²` and `t = 1` is the round metric.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::curvature::{metric_pullback_deviation, MetricField, ISOMETRY_TOL};
use crate::error::{Error, Result};
use crate::geometry::{Chart, ChartedMap, DerivativeEngine, ScalarMap, SmoothMap};
use crate::homotopy::{Homotopy, Regularity};
use crate::jet::Scalar;
use crate::linalg;
use crate::loops::CircleAction;

/// Hopf-coordinate chart of `S^{2c−1}`.
pub fn sphere_chart(c: usize) -> Arc<Chart> {
    match c {
        2 => Chart::new(
            "S3-hopf",
            vec!["alpha".into(), "phi1".into(), "phi2".into()],
            vec![None, Some(TAU), Some(TAU)],
            vec![(0.0, FRAC_PI_2), (0.0, TAU), (0.0, TAU)],
        ),
        3 => Chart::new(
            "S5-hopf",
            ["alpha", "beta", "phi1", "phi2", "phi3"].iter().map(|s| s.to_string()).collect(),
            vec![None, None, Some(TAU), Some(TAU), Some(TAU)],
            vec![(0.0, FRAC_PI_2), (0.0, FRAC_PI_2), (0.0, TAU), (0.0, TAU), (0.0, TAU)],
        ),
        _ => panic!("sphere chart only for S3 and S5"),
    }
    .expect("sphere chart")
}

pub fn torus_chart(dim: usize) -> Arc<Chart> {
    Chart::new(
        format!("T{dim}"),
        (1..=dim).map(|i| format!("x{i}")).collect(),
        vec![Some(TAU); dim],
        vec![(0.0, TAU); dim],
    )
    .expect("torus chart")
}

/// Number of angular (non-periodic) coordinates in the Hopf chart.
fn radial_count(c: usize) -> usize {
    c - 1
}

/// Moduli `|z_j|` in Hopf coordinates.
fn moduli<S: Scalar>(x: &[S], c: usize) -> Vec<S> {
    let a = &x[0];
    match c {
        2 => vec![a.cos(), a.sin()],
        3 => {
            let (sa, b) = (a.sin(), &x[1]);
            vec![a.cos(), sa.clone() * b.cos(), sa * b.sin()]
        }
        _ => unreachable!(),
    }
}

/// Hopf coordinates → real coordinates of `ℂ^c`.
pub fn embed<S: Scalar>(x: &[S], c: usize) -> Vec<S> {
    let r = moduli(x, c);
    let phis = &x[radial_count(c)..];
    let mut out = Vec::with_capacity(2 * c);
    for (rj, phi) in r.into_iter().zip(phis) {
        out.push(rj.clone() * phi.cos());
        out.push(rj * phi.sin());
    }
    out
}

/// Real coordinates of a nonzero vector of `ℂ^c` → Hopf coordinates of its
/// normalization. Scale invariant, so projective maps need no normalization.
pub fn unembed<S: Scalar>(y: &[S], c: usize) -> Vec<S> {
    let r: Vec<S> = (0..c)
        .map(|j| (y[2 * j].square() + y[2 * j + 1].square()).sqrt())
        .collect();
    let mut out = Vec::with_capacity(2 * c - 1);
    match c {
        2 => out.push(r[1].atan2(&r[0])),
        3 => {
            let rho = (r[1].square() + r[2].square()).sqrt();
            out.push(rho.atan2(&r[0]));
            out.push(r[2].atan2(&r[1]));
        }
        _ => unreachable!(),
    }
    for j in 0..c {
        out.push(y[2 * j + 1].atan2(&y[2 * j]));
    }
    out
}

fn mat_vec<S: Scalar>(m: &[S], v: &[S]) -> Vec<S> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = m[i * n].clone() * v[0].clone();
            for j in 1..n {
                acc = acc + m[i * n + j].clone() * v[j].clone();
            }
            acc
        })
        .collect()
}

fn const_mat_vec<S: Scalar>(m: &[f64], v: &[S]) -> Vec<S> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = v[0].clone() * m[i * n];
            for j in 1..n {
                acc = acc + v[j].clone() * m[i * n + j];
            }
            acc
        })
        .collect()
}

fn mat_mul<S: Scalar>(a: &[S], b: &[S], n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = a[i * n].clone() * b[j].clone();
            for k in 1..n {
                acc = acc + a[i * n + k].clone() * b[k * n + j].clone();
            }
            out.push(acc);
        }
    }
    out
}

fn transpose<S: Clone>(a: &[S], n: usize) -> Vec<S> {
    (0..n * n).map(|k| a[(k % n) * n + k / n].clone()).collect()
}

/// Multiplies `z_j` by `e^{i angle_j}` in place.
fn rotate_phases<S: Scalar>(y: &mut [S], angles: &[S]) {
    for (j, ang) in angles.iter().enumerate() {
        let (c, s) = (ang.cos(), ang.sin());
        let (re, im) = (y[2 * j].clone(), y[2 * j + 1].clone());
        y[2 * j] = re.clone() * c.clone() - im.clone() * s.clone();
        y[2 * j + 1] = re * s + im * c;
    }
}

/// `exp(s Λ)` as a matrix over `S`: `exp(s₀Λ) · Σ_{k≤3} (s − s₀)^k Λ^k / k!`,
/// exact for jets of order ≤ 3.
fn exp_path<S: Scalar>(s: &S, lambda: &[f64], n: usize) -> Vec<S> {
    let s0 = s.value();
    let q0 = linalg::expm(&lambda.iter().map(|v| v * s0).collect::<Vec<_>>(), n);
    let delta = s.clone() - s0;
    let l2 = linalg::matmul(lambda, lambda, n, n, n);
    let l3 = linalg::matmul(&l2, lambda, n, n, n);
    let d2 = delta.square();
    let d3 = d2.clone() * delta.clone();
    let series: Vec<S> = (0..n * n)
        .map(|k| {
            let id = if k / n == k % n { 1.0 } else { 0.0 };
            delta.clone() * lambda[k] + d2.clone() * (l2[k] / 2.0) + d3.clone() * (l3[k] / 6.0) + id
        })
        .collect();
    let q0s: Vec<S> = q0.iter().map(|&v| s.lift(v)).collect();
    mat_mul(&q0s, &series, n)
}

/// Round metric plus `(t² − 1) η ⊗ η` in Hopf coordinates.
pub struct HopfMetric {
    pub c: usize,
    pub t: f64,
}

impl ScalarMap for HopfMetric {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let c = self.c;
        let n = 2 * c - 1;
        let r = moduli(x, c);
        let zero = x[0].zero_like();
        let mut diag = vec![x[0].lift(1.0)];
        if c == 3 {
            diag.push(x[0].sin().square());
        }
        let eta: Vec<S> = r.iter().map(|rj| rj.square()).collect();
        diag.extend(eta.iter().cloned());
        let mut g = vec![zero; n * n];
        for i in 0..n {
            g[i * n + i] = diag[i].clone();
        }
        let k = self.t * self.t - 1.0;
        if k != 0.0 {
            let off = radial_count(c);
            for (a, ea) in eta.iter().enumerate() {
                for (b, eb) in eta.iter().enumerate() {
                    let idx = (off + a) * n + off + b;
                    g[idx] = g[idx].clone() + ea.clone() * eb.clone() * k;
                }
            }
        }
        g
    }
}

pub struct FlatMetric(pub usize);

impl ScalarMap for FlatMetric {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.0;
        (0..n * n)
            .map(|k| x[0].lift(if k / n == k % n { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// `(θ, x) ↦ x + θ w` on the chart coordinates.
pub struct Translation {
    pub weights: Vec<f64>,
}

impl ScalarMap for Translation {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x[1..]
            .iter()
            .zip(&self.weights)
            .map(|(xi, &w)| if w == 0.0 { xi.clone() } else { xi.clone() + x[0].clone() * w })
            .collect()
    }
}

/// `x ↦ x + offset`.
pub struct Shift {
    pub offset: Vec<f64>,
}

impl ScalarMap for Shift {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x.iter().zip(&self.offset).map(|(xi, &o)| xi.clone() + o).collect()
    }
}

/// `x ↦ unembed(Q · embed(x))` for a fixed real `2c × 2c` matrix `Q`.
pub struct LinearSphereMap {
    pub c: usize,
    pub matrix: Vec<f64>,
}

impl ScalarMap for LinearSphereMap {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        unembed(&const_mat_vec(&self.matrix, &embed(x, self.c)), self.c)
    }
}

/// Coordinate-plane quarter turn `(x_i, x_j) ↦ (−x_j, x_i)` of a torus.
pub struct QuarterTurn {
    pub i: usize,
    pub j: usize,
}

impl ScalarMap for QuarterTurn {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut y = x.to_vec();
        y[self.i] = -x[self.j].clone();
        y[self.j] = x[self.i].clone();
        y
    }
}

/// `(s, θ, x) ↦ unembed(Q(s) R_w(θ) Q(s)ᵀ embed(x))`, `Q(s) = exp(sΛ)`.
pub struct ConjugationPath {
    pub c: usize,
    pub lambda: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ScalarMap for ConjugationPath {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = 2 * self.c;
        let q = exp_path(&x[0], &self.lambda, n);
        let mut y = mat_vec(&transpose(&q, n), &embed(&x[2..], self.c));
        let angles: Vec<S> = self.weights.iter().map(|&w| x[1].clone() * w).collect();
        rotate_phases(&mut y, &angles);
        unembed(&mat_vec(&q, &y), self.c)
    }
}

/// `(s, θ, x) ↦ unembed((I + sε(B(θ) − B(0))) R_w(θ) embed(x))` with
/// `B(θ) = B₁ cos θ + B₂ sin θ + B₃ sin 2θ`.
pub struct ProjectivePath {
    pub c: usize,
    pub eps: f64,
    pub b: [Vec<f64>; 3],
    pub weights: Vec<f64>,
}

impl ScalarMap for ProjectivePath {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = 2 * self.c;
        let (s, th) = (&x[0], &x[1]);
        let mut y = embed(&x[2..], self.c);
        let angles: Vec<S> = self.weights.iter().map(|&w| th.clone() * w).collect();
        rotate_phases(&mut y, &angles);
        let (c1, s1, s2) = (th.cos() - 1.0, th.sin(), (th.clone() * 2.0).sin());
        let se = s.clone() * self.eps;
        let out: Vec<S> = (0..n)
            .map(|i| {
                let mut by = y[0].zero_like();
                for (j, yj) in y.iter().enumerate() {
                    let k = i * n + j;
                    let coef = c1.clone() * self.b[0][k] + s1.clone() * self.b[1][k] + s2.clone() * self.b[2][k];
                    by = by + coef * yj.clone();
                }
                y[i].clone() + se.clone() * by
            })
            .collect();
        unembed(&out, self.c)
    }
}

/// Möbius boost of the unit sphere along the first real axis.
fn boost<S: Scalar>(y: &[S], tau: &S) -> Vec<S> {
    let ch = (tau.exp() + (-tau.clone()).exp()) * 0.5;
    let sh = (tau.exp() - (-tau.clone()).exp()) * 0.5;
    let den = ch.clone() + sh.clone() * y[0].clone();
    let mut out = Vec::with_capacity(y.len());
    out.push((sh + ch * y[0].clone()) / den.clone());
    for yi in &y[1..] {
        out.push(yi.clone() / den.clone());
    }
    out
}

/// `(s, θ, x) ↦ D_{sτ} R_w(θ) D_{−sτ}(x)`, a conformal but non-isometric
/// deformation of a weighted rotation.
pub struct ConformalPath {
    pub c: usize,
    pub tau: f64,
    pub weights: Vec<f64>,
}

impl ScalarMap for ConformalPath {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let st = x[0].clone() * self.tau;
        let mut y = boost(&embed(&x[2..], self.c), &(-st.clone()));
        let angles: Vec<S> = self.weights.iter().map(|&w| x[1].clone() * w).collect();
        rotate_phases(&mut y, &angles);
        unembed(&boost(&y, &st), self.c)
    }
}

/// `(s, θ, x) ↦ x + θ w + sε (sin(x_{i+1} + θ) − sin x_{i+1}) e_i` on a
/// torus.
pub struct TorusWave {
    pub weights: Vec<f64>,
    pub eps: f64,
}

impl ScalarMap for TorusWave {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.weights.len();
        let (s, th) = (&x[0], &x[1]);
        let m = &x[2..];
        (0..n)
            .map(|i| {
                let nb = &m[(i + 1) % n];
                let wave = (nb.clone() + th.clone()).sin() - nb.sin();
                m[i].clone() + th.clone() * self.weights[i] + s.clone() * self.eps * wave
            })
            .collect()
    }
}

/// `(s, θ, x) ↦ a(θ, x)`.
pub struct ConstantPath<M> {
    pub action: M,
}

impl<M: ScalarMap> ScalarMap for ConstantPath<M> {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.action.apply(&x[1..])
    }
}

/// Real 6×6 (or 4×4) form of the complex matrix `A + iB`.
pub fn complex_to_real(a: &[f64], b: &[f64], c: usize) -> Vec<f64> {
    let n = 2 * c;
    let mut m = vec![0.0; n * n];
    for j in 0..c {
        for k in 0..c {
            let (re, im) = (a[j * c + k], b[j * c + k]);
            m[(2 * j) * n + 2 * k] = re;
            m[(2 * j) * n + 2 * k + 1] = -im;
            m[(2 * j + 1) * n + 2 * k] = im;
            m[(2 * j + 1) * n + 2 * k + 1] = re;
        }
    }
    m
}

/// Random element of `so(n)` with entries in `[−scale, scale]`.
pub fn random_skew(rng: &mut StdRng, n: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(-scale..scale);
            m[i * n + j] = v;
            m[j * n + i] = -v;
        }
    }
    m
}

/// Random element of `u(c)` in real form.
pub fn random_unitary_generator(rng: &mut StdRng, c: usize, scale: f64) -> Vec<f64> {
    let a = random_skew(rng, c, scale);
    let mut b = vec![0.0; c * c];
    for i in 0..c {
        for j in i..c {
            let v = rng.random_range(-scale..scale);
            b[i * c + j] = v;
            b[j * c + i] = v;
        }
    }
    complex_to_real(&a, &b, c)
}

/// Generator of the real rotation carrying `z₁` to `z₂` at time 1.
pub fn swap_generator(c: usize) -> Vec<f64> {
    let mut a = vec![0.0; c * c];
    a[c] = FRAC_PI_2;
    a[1] = -FRAC_PI_2;
    complex_to_real(&a, &vec![0.0; c * c], c)
}

/// A metric with its registered symmetries and test objects.
pub struct ZooEntry {
    pub metric: Arc<MetricField>,
    pub isometries: Vec<(String, Arc<dyn SmoothMap>)>,
    pub actions: Vec<CircleAction>,
    pub homotopies: Vec<Homotopy>,
    /// Coordinate box for random sample points, kept away from chart
    /// singularities.
    pub sample_box: Vec<(f64, f64)>,
    pub notes: String,
}

impl ZooEntry {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.metric.chart
    }

    pub fn action(&self, label: &str) -> Result<CircleAction> {
        self.actions
            .iter()
            .find(|a| a.label == label)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("no action `{label}` on {}", self.metric.label())))
    }

    pub fn homotopy(&self, label: &str) -> Result<Homotopy> {
        self.homotopies
            .iter()
            .find(|h| h.label == label)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("no homotopy `{label}` on {}", self.metric.label())))
    }

    pub fn isometry(&self, label: &str) -> Result<Arc<dyn SmoothMap>> {
        self.isometries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| Error::InvalidParameter(format!("no isometry `{label}` on {}", self.metric.label())))
    }

    pub fn random_point(&self, rng: &mut StdRng) -> Vec<f64> {
        self.sample_box
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect()
    }

    pub fn random_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..count).map(|_| self.random_point(&mut rng)).collect()
    }

    /// Coordinate box of the whole chart with the given node rule per axis.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.chart().domain.clone()
    }
}

fn action(label: &str, chart: &Arc<Chart>, map: impl ScalarMap + 'static) -> CircleAction {
    let dom = Chart::product(&[&Chart::circle(), chart]);
    CircleAction::new(label, ChartedMap::shared(&dom, chart, map)).expect("action charts")
}

fn path(chart: &Arc<Chart>, map: impl ScalarMap + 'static) -> Arc<dyn SmoothMap> {
    let dom = Chart::product(&[&Chart::unit_interval(), &Chart::circle(), chart]);
    ChartedMap::shared(&dom, chart, map)
}

/// Rotation weights on the angles of a Hopf chart, padded with zeros for the
/// non-periodic coordinates.
fn hopf_translation(c: usize, w: &[f64]) -> Translation {
    let mut weights = vec![0.0; radial_count(c)];
    weights.extend_from_slice(w);
    Translation { weights }
}

pub const FLAT_TORUS: &str = "flat-torus";
pub const ROUND: &str = "round";
pub const BERGER: &str = "berger";

pub fn make_flat_torus(dim: usize) -> Result<ZooEntry> {
    if dim % 2 == 0 || dim == 0 {
        return Err(Error::InvalidParameter(format!("torus dimension {dim} must be odd")));
    }
    let chart = torus_chart(dim);
    let metric = Arc::new(
        MetricField::new(FLAT_TORUS, vec![("dim".into(), dim as f64)], &chart, FlatMetric(dim))
            .with_ignorable(&(0..dim).collect::<Vec<_>>()),
    );
    let ones = vec![1.0; dim];
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    let actions = vec![
        action("trivial", &chart, Translation { weights: vec![0.0; dim] }),
        action("fiber-rotation", &chart, Translation { weights: ones.clone() }),
        action("translation", &chart, Translation { weights: e1 }),
    ];
    let homotopies = vec![
        Homotopy::new(
            "constant",
            path(&chart, ConstantPath { action: Translation { weights: ones.clone() } }),
            Regularity::Isometry,
        )?
        .with_endpoints(actions[1].clone(), actions[1].clone()),
        Homotopy::new(
            "generic-diffeo",
            path(&chart, TorusWave { weights: ones, eps: 0.2 }),
            Regularity::Diffeomorphism,
        )?,
    ];
    let isometries: Vec<(String, Arc<dyn SmoothMap>)> = vec![
        ("shift".into(), ChartedMap::shared(&chart, &chart, Shift { offset: (0..dim).map(|i| 0.3 + 0.1 * i as f64).collect() })),
        ("quarter-turn".into(), ChartedMap::shared(&chart, &chart, QuarterTurn { i: 0, j: 1 })),
    ];
    Ok(ZooEntry {
        metric,
        isometries,
        actions,
        homotopies,
        sample_box: vec![(0.0, TAU); dim],
        notes: "Flat torus with periodic coordinates; every curvature quantity vanishes.".into(),
    })
}

fn sphere_sample_box(c: usize) -> Vec<(f64, f64)> {
    let margin = 0.15;
    let mut b = vec![(margin, FRAC_PI_2 - margin); radial_count(c)];
    b.extend(vec![(0.0, TAU); c]);
    b
}

fn hopf_entry(c: usize, t: f64, name: &str, seed: u64) -> Result<ZooEntry> {
    let chart = sphere_chart(c);
    let n = 2 * c;
    let mut params = vec![("dim".into(), (2 * c - 1) as f64)];
    if name == BERGER {
        params.push(("t".into(), t));
    }
    let ignorable: Vec<usize> = (radial_count(c)..2 * c - 1).collect();
    let metric = Arc::new(MetricField::new(name, params, &chart, HopfMetric { c, t }).with_ignorable(&ignorable));
    let ones = vec![1.0; c];
    let mut e1 = vec![0.0; c];
    e1[0] = 1.0;
    let mut e2 = vec![0.0; c];
    e2[1] = 1.0;
    let actions = vec![
        action("trivial", &chart, hopf_translation(c, &vec![0.0; c])),
        action("fiber-rotation", &chart, hopf_translation(c, &ones)),
        action("rotation-z1", &chart, hopf_translation(c, &e1)),
        action("rotation-z2", &chart, hopf_translation(c, &e2)),
    ];

    let mut rng = StdRng::seed_from_u64(seed);
    let mut isometries: Vec<(String, Arc<dyn SmoothMap>)> = Vec::new();
    let mut fibre_shift = vec![0.0; radial_count(c)];
    fibre_shift.extend(vec![0.7; c]);
    isometries.push(("fiber-shift".into(), ChartedMap::shared(&chart, &chart, Shift { offset: fibre_shift })));
    for k in 0..3 {
        let gen = random_unitary_generator(&mut rng, c, 1.0);
        isometries.push((
            format!("unitary-{k}"),
            ChartedMap::shared(&chart, &chart, LinearSphereMap { c, matrix: linalg::expm(&gen, n) }),
        ));
    }
    if t == 1.0 {
        for k in 0..3 {
            let gen = random_skew(&mut rng, n, 1.0);
            isometries.push((
                format!("orthogonal-{k}"),
                ChartedMap::shared(&chart, &chart, LinearSphereMap { c, matrix: linalg::expm(&gen, n) }),
            ));
        }
    }

    let mut homotopies = vec![
        Homotopy::new(
            "constant",
            path(&chart, ConstantPath { action: hopf_translation(c, &ones) }),
            Regularity::Isometry,
        )?
        .with_endpoints(actions[1].clone(), actions[1].clone()),
        Homotopy::new(
            "unitary-swap",
            path(&chart, ConjugationPath { c, lambda: swap_generator(c), weights: e1.clone() }),
            Regularity::Isometry,
        )?
        .with_endpoints(actions[2].clone(), actions[3].clone()),
    ];
    let unitary_gen = random_unitary_generator(&mut rng, c, 0.8);
    homotopies.push(Homotopy::new(
        "unitary-conjugation",
        path(&chart, ConjugationPath { c, lambda: unitary_gen, weights: vec![1.0, 0.0, -1.0][..c].to_vec() }),
        Regularity::Isometry,
    )?);
    if t == 1.0 {
        let gen = random_skew(&mut rng, n, 0.8);
        homotopies.push(Homotopy::new(
            "orthogonal-conjugation",
            path(&chart, ConjugationPath { c, lambda: gen, weights: ones.clone() }),
            Regularity::Isometry,
        )?);
    }
    let b = [
        random_skew(&mut rng, n, 1.0),
        (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    ];
    homotopies.push(Homotopy::new(
        "generic-diffeo",
        path(&chart, ProjectivePath { c, eps: 0.15, b, weights: ones.clone() }),
        Regularity::Diffeomorphism,
    )?);
    homotopies.push(Homotopy::new(
        "conformal",
        path(&chart, ConformalPath { c, tau: 0.5, weights: ones.clone() }),
        Regularity::Diffeomorphism,
    )?);

    let notes = if name == BERGER {
        format!(
            "Berger sphere S{}: round metric with the Hopf fibre length scaled by t = {t}. \
             Unitary maps and fibre rotations are isometries for every t.",
            2 * c - 1
        )
    } else {
        format!("Unit round sphere S{} in Hopf coordinates.", 2 * c - 1)
    };
    Ok(ZooEntry {
        metric,
        isometries,
        actions,
        homotopies,
        sample_box: sphere_sample_box(c),
        notes,
    })
}

/// Unit round `S^dim`, `dim ∈ {3, 5}`.
pub fn make_round_sphere(dim: usize) -> Result<ZooEntry> {
    match dim {
        3 | 5 => hopf_entry(dim.div_ceil(2), 1.0, ROUND, 0x5eed_0001 + dim as u64),
        _ => Err(Error::InvalidParameter(format!("round sphere of dimension {dim} not supported"))),
    }
}

/// Berger deformation of `S^dim`.
pub fn make_berger(dim: usize, t: f64) -> Result<ZooEntry> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("Berger parameter t = {t} must be positive")));
    }
    match dim {
        3 | 5 => hopf_entry(dim.div_ceil(2), t, BERGER, 0x5eed_0101 + dim as u64),
        _ => Err(Error::InvalidParameter(format!("Berger sphere of dimension {dim} not supported"))),
    }
}

pub fn make_berger_s5(t: f64) -> Result<ZooEntry> {
    make_berger(5, t)
}

/// `S⁵ → S⁵/ℤ_p` covering data for a Hopf-chart entry.
pub struct LensDescriptor {
    pub p: u32,
    /// Generator of the deck group: every `φ_j` advanced by `2π/p`.
    pub deck: Arc<dyn SmoothMap>,
    /// `φ₁ ∈ [0, 2π/p)`, all other coordinates over the full chart.
    pub fundamental_domain: Vec<(f64, f64)>,
    /// Fibre rotation upstairs; it commutes with the deck group and descends.
    pub lifted: CircleAction,
    /// `θ ↦ rotation by θ/p`. Closed only in the quotient: upstairs
    /// `a(2π, m) = deck(m)`.
    pub quotient: CircleAction,
}

impl LensDescriptor {
    /// Index of `φ₁` in the chart.
    pub fn phi1_axis(&self) -> usize {
        self.fundamental_domain.len() - self.lifted.dim().div_ceil(2)
    }
}

pub fn make_lens(p: u32, base: &ZooEntry) -> Result<LensDescriptor> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("lens order p = {p} must be ≥ 2")));
    }
    let chart = base.chart().clone();
    let n = chart.dim();
    if !chart.name.ends_with("-hopf") {
        return Err(Error::InvalidParameter("lens spaces need a Hopf-chart sphere".into()));
    }
    let c = n.div_ceil(2);
    let step = TAU / p as f64;
    let mut offset = vec![0.0; radial_count(c)];
    offset.extend(vec![step; c]);
    let deck = ChartedMap::shared(&chart, &chart, Shift { offset });

    let engine = DerivativeEngine::series();
    let mut worst = 0.0f64;
    for x in base.random_points(20, 0x1e75 + p as u64) {
        worst = worst.max(metric_pullback_deviation(&base.metric, deck.as_ref(), &x, &engine)?);
    }
    if worst > ISOMETRY_TOL {
        return Err(Error::DeckNotIsometry { deviation: worst });
    }

    let mut fundamental_domain = chart.domain.clone();
    fundamental_domain[radial_count(c)] = (0.0, step);
    let ones = vec![1.0; c];
    let frac = vec![1.0 / p as f64; c];
    Ok(LensDescriptor {
        p,
        deck,
        fundamental_domain,
        lifted: action("fiber-rotation", &chart, hopf_translation(c, &ones)),
        quotient: action(&format!("fiber-rotation/{p}"), &chart, hopf_translation(c, &frac)),
    })
}

/// The conformal non-isometric homotopy of an entry.
pub fn make_conformal_homotopy(entry: &ZooEntry) -> Result<Homotopy> {
    entry.homotopy("conformal")
}

/// `name:key=value,key=value` → `(name, {key: value})`.
pub fn parse_spec(spec: &str) -> Result<(String, BTreeMap<String, String>)> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n, r),
        None => (spec, ""),
    };
    let name = name.trim();
    if name.is_empty() {
        return Err(Error::Config(format!("empty spec `{spec}`")));
    }
    let mut params = BTreeMap::new();
    for kv in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value in `{spec}`, got `{kv}`")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((name.to_string(), params))
}

fn take_f64(params: &mut BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.remove(key) {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("`{key}={v}` is not a number"))),
        None => Ok(default),
    }
}

/// Builds a zoo entry from a spec such as `berger:t=0.5`, `round:dim=3` or
/// `flat-torus:dim=5`.
pub fn entry_from_spec(spec: &str) -> Result<ZooEntry> {
    let (name, mut params) = parse_spec(spec)?;
    let dim = take_f64(&mut params, "dim", 5.0)? as usize;
    let entry = match name.as_str() {
        FLAT_TORUS | "torus" => make_flat_torus(dim),
        ROUND | "sphere" => make_round_sphere(dim),
        BERGER => {
            let t = take_f64(&mut params, "t", 0.5)?;
            make_berger(dim, t)
        }
        other => Err(Error::Config(format!("unknown metric `{other}`"))),
    }?;
    if let Some(k) = params.keys().next() {
        return Err(Error::Config(format!("unknown parameter `{k}` for metric `{name}`")));
    }
    Ok(entry)
}

/// `p=3` → 3.
pub fn lens_from_spec(spec: &str) -> Result<u32> {
    let (_, params) = parse_spec(&format!("lens:{spec}"))?;
    let p = params
        .get("p")
        .ok_or_else(|| Error::Config(format!("lens spec `{spec}` needs p=")))?;
    p.parse()
        .map_err(|_| Error::Config(format!("lens order `{p}` is not an integer")))
}

/// Resolves an action spec against an entry: a registered label such as
/// `fiber-rotation`, or `rotation:w=1,0,0` for the weighted rotation of the
/// angle coordinates (all coordinates on a torus).
pub fn action_from_spec(entry: &ZooEntry, spec: &str) -> Result<CircleAction> {
    let Some(rest) = spec.strip_prefix("rotation:") else {
        return entry.action(spec.trim());
    };
    let list = rest
        .trim()
        .strip_prefix("w=")
        .ok_or_else(|| Error::Config(format!("expected rotation:w=…, got `{spec}`")))?;
    let w = list
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Config(format!("bad weights in `{spec}`")))?;
    let chart = entry.chart().clone();
    let n = chart.dim();
    let angles = chart.periods.iter().filter(|p| p.is_some()).count();
    if w.len() != angles {
        return Err(Error::Config(format!("`{spec}` needs {angles} weights")));
    }
    let mut weights = vec![0.0; n - angles];
    weights.extend_from_slice(&w);
    Ok(action(&format!("rotation:w={list}"), &chart, Translation { weights }))
}

/// Coordinate box of an entry with angular margins removed. Used only for
/// pointwise sampling; integrals always use the full domain.
pub fn interior_box(entry: &ZooEntry) -> Vec<(f64, f64)> {
    entry.sample_box.clone()
}

/// Equatorial great-circle loop used by tests and the CLI.
pub fn hopf_fibre_loop(c: usize, m: &[f64]) -> Arc<dyn SmoothMap> {
    struct Fibre {
        base: Vec<f64>,
        c: usize,
    }
    impl ScalarMap for Fibre {
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            let r = radial_count(self.c);
            self.base
                .iter()
                .enumerate()
                .map(|(i, &b)| if i < r { x[0].lift(b) } else { x[0].clone() + b })
                .collect()
        }
    }
    let chart = sphere_chart(c);
    ChartedMap::shared(&Chart::circle(), &chart, Fibre { base: m.to_vec(), c })
}
