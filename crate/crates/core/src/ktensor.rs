//! The K-tensor: a signed sum over permutations of products of `k`
//! curvature factors on a manifold of dimension `2k − 1`.
//!
//! `K_{ν λ₁…λ_{2k−1}}` is totally antisymmetric in the `λ` block, and the
//! block has exactly `dim` slots, so the whole tensor is determined by the
//! covector `κ_ν = K_{ν 0 1 … (n−1)}`:
//!
//! ```text
//! K_{ν λ₁…λₙ} = κ_ν · ε_{λ₁…λₙ}
//! K(ξ; X₁, …, Xₙ) = κ(ξ) · det(X₁ | … | Xₙ)
//! ```
//!
//! [`KTensorSample`] stores `κ` only and reconstructs components with the
//! permutation sign.

use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use serde::Serialize;

use crate::curvature::{curvature_jets, riemann_at, CurvatureSample, MetricField};
use crate::error::{Error, Result};
use crate::geometry::{DerivativeEngine, DerivativeMode};
use crate::linalg;

/// One index slot of a curvature factor `R_{abc}^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Slot {
    /// The `i`-th antisymmetrized index, `λ_{σ(i)}` (zero based).
    Lambda(usize),
    /// Summed dummy index `e_i`.
    Dummy(usize),
    /// The free index `ν`.
    Nu,
}

/// `R_{lower[0] lower[1] lower[2]}^{upper}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Factor {
    pub lower: [Slot; 3],
    pub upper: Slot,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ContractionSchedule {
    pub k: usize,
    pub factors: Vec<Factor>,
}

impl ContractionSchedule {
    /// Closed trace cycle
    /// `R_{λ₁ e₁ ν}^{e₂} R_{λ₂ λ₃ e₂}^{e₃} ⋯ R_{λ_{2k−2} λ_{2k−1} e_k}^{e₁}`,
    /// i.e. `Tr(A · B₂ ⋯ B_k)` with `A[e][f] = R_{λ e ν}^f` and
    /// `B[e][f] = R_{λ λ' e}^f`.
    pub fn cyclic(k: usize) -> ContractionSchedule {
        let mut factors = vec![Factor {
            lower: [Slot::Lambda(0), Slot::Dummy(0), Slot::Nu],
            upper: Slot::Dummy(1 % k),
        }];
        for j in 1..k {
            factors.push(Factor {
                lower: [Slot::Lambda(2 * j - 1), Slot::Lambda(2 * j), Slot::Dummy(j)],
                upper: Slot::Dummy((j + 1) % k),
            });
        }
        ContractionSchedule { k, factors }
    }

    /// The chain read off index by index: first factor `R_{λ₁ e₁ ν}^{e₂}`,
    /// factor `j ≥ 2` equal to `R_{λ λ e_{j+1}}^{e_{j−1}}` with dummy labels
    /// taken cyclically. For `k = 3` this uses `e₁` three times and fails
    /// [`validate`](Self::validate).
    pub fn shifted_chain(k: usize) -> ContractionSchedule {
        let cyc = |i: usize| i % k;
        let mut factors = vec![Factor {
            lower: [Slot::Lambda(0), Slot::Dummy(0), Slot::Nu],
            upper: Slot::Dummy(cyc(1)),
        }];
        for j in 2..=k {
            factors.push(Factor {
                lower: [
                    Slot::Lambda(2 * j - 3),
                    Slot::Lambda(2 * j - 2),
                    Slot::Dummy(cyc(j)),
                ],
                upper: Slot::Dummy(cyc(j + k - 2)),
            });
        }
        ContractionSchedule { k, factors }
    }

    pub fn dim(&self) -> usize {
        2 * self.k - 1
    }

    pub fn dummy_count(&self) -> usize {
        self.slots()
            .filter_map(|(s, _)| match s {
                Slot::Dummy(d) => Some(d + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn slots(&self) -> impl Iterator<Item = (Slot, bool)> + '_ {
        self.factors.iter().flat_map(|f| {
            f.lower
                .iter()
                .map(|&s| (s, false))
                .chain(std::iter::once((f.upper, true)))
        })
    }

    /// Every dummy appears once up and once down, each `λ` slot and `ν`
    /// exactly once, and there are `k` factors.
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::ScheduleInvalid("k must be ≥ 1".into()));
        }
        if self.factors.len() != self.k {
            return Err(Error::ScheduleInvalid(format!(
                "{} factors for k = {}",
                self.factors.len(),
                self.k
            )));
        }
        let n = self.dim();
        let d = self.dummy_count();
        let mut lambda = vec![0usize; n];
        let mut up = vec![0usize; d];
        let mut down = vec![0usize; d];
        let mut nu = 0;
        for (slot, is_upper) in self.slots() {
            match slot {
                Slot::Lambda(i) if i < n && !is_upper => lambda[i] += 1,
                Slot::Lambda(i) => {
                    return Err(Error::ScheduleInvalid(format!("λ slot {i} out of range or raised")))
                }
                Slot::Dummy(e) if is_upper => up[e] += 1,
                Slot::Dummy(e) => down[e] += 1,
                Slot::Nu if !is_upper => nu += 1,
                Slot::Nu => return Err(Error::ScheduleInvalid("ν in an upper slot".into())),
            }
        }
        if let Some(i) = lambda.iter().position(|&c| c != 1) {
            return Err(Error::ScheduleInvalid(format!("λ slot {i} used {} times", lambda[i])));
        }
        if nu != 1 {
            return Err(Error::ScheduleInvalid(format!("ν used {nu} times")));
        }
        for e in 0..d {
            if up[e] != 1 || down[e] != 1 {
                return Err(Error::ScheduleInvalid(format!(
                    "dummy e{} appears {} times up and {} times down",
                    e + 1,
                    up[e],
                    down[e]
                )));
            }
        }
        Ok(())
    }

    pub fn is_cyclic_default(&self) -> bool {
        *self == ContractionSchedule::cyclic(self.k)
    }
}

/// All permutations of `0..n` with their signs, in lexicographic order.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let s = permutation_sign(&p);
            (p, s)
        })
        .collect()
}

/// Sign of the permutation that sorts `idx`; 0 if an entry repeats.
pub fn permutation_sign<T: PartialOrd>(idx: &[T]) -> f64 {
    let mut s = 1.0;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                s = -s;
            }
        }
    }
    s
}

fn perm_table(n: usize) -> &'static [(Vec<usize>, f64)] {
    static TABLES: OnceLock<Vec<Vec<(Vec<usize>, f64)>>> = OnceLock::new();
    &TABLES.get_or_init(|| (0..=7).map(signed_permutations).collect())[n]
}

/// Permutations of the `λ` block that start with `l` and keep every pair of
/// the `B` factors increasing; each stands for `2^{k−1}` equal terms.
fn paired_tails(n: usize) -> &'static [Vec<(Vec<usize>, f64)>] {
    static TABLES: OnceLock<Vec<Vec<Vec<(Vec<usize>, f64)>>>> = OnceLock::new();
    &TABLES.get_or_init(|| {
        (0..=7)
            .map(|n| {
                (0..n)
                    .map(|l| {
                        perm_table(n)
                            .iter()
                            .filter(|(p, _)| p[0] == l && p[1..].chunks(2).all(|c| c.len() < 2 || c[0] < c[1]))
                            .cloned()
                            .collect()
                    })
                    .collect()
            })
            .collect()
    })[n]
}

/// `K` at one point, stored as the covector `κ`.
#[derive(Clone, Debug, Serialize)]
pub struct KTensorSample {
    pub point: Vec<f64>,
    pub dim: usize,
    pub order_k: usize,
    /// `κ_ν = K_{ν 0 1 … (n−1)}`.
    pub kappa: Vec<f64>,
    /// Sum of the absolute values of every monomial contributing to `κ_ν`.
    /// It bounds `|κ_ν|` and sets the rounding scale of the assembly.
    pub magnitude: Vec<f64>,
}

impl KTensorSample {
    /// `K_{ν λ₁…λₙ}`.
    pub fn get(&self, nu: usize, lambdas: &[usize]) -> f64 {
        assert_eq!(lambdas.len(), self.dim);
        permutation_sign(lambdas) * self.kappa[nu]
    }

    /// The full array `K[ν][λ₁]…[λₙ]`, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.dim;
        let total = n.pow(n as u32 + 1);
        let mut out = vec![0.0; total];
        let mut idx = vec![0usize; n];
        for (flat, slot) in out.iter_mut().enumerate() {
            let nu = flat / n.pow(n as u32);
            let mut rest = flat % n.pow(n as u32);
            for i in (0..n).rev() {
                idx[i] = rest % n;
                rest /= n;
            }
            *slot = self.get(nu, &idx);
        }
        out
    }

    /// `K(ξ; X₁, …, Xₙ)`.
    pub fn contract(&self, xi: &[f64], frame: &[&[f64]]) -> f64 {
        dot(&self.kappa, xi) * linalg::det_columns(frame)
    }

    /// `|K|(|ξ|; |X₁|, …)`: the contraction with every cancellation removed.
    pub fn contract_magnitude(&self, xi: &[f64], frame: &[&[f64]]) -> f64 {
        abs_dot(&self.magnitude, xi) * det_magnitude(frame)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn abs_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.abs() * y.abs()).sum()
}

/// Permanent-style bound `Σ_σ Π |X_{σ(i)}^i|` for the determinant, computed
/// as the product of column 1-norms (an upper bound).
pub(crate) fn det_magnitude(frame: &[&[f64]]) -> f64 {
    frame
        .iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .product()
}

fn check_dims(dim: usize, schedule: &ContractionSchedule) -> Result<()> {
    schedule.validate()?;
    if dim != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim(),
            found: dim,
        });
    }
    Ok(())
}

/// Assembles `K` from a curvature sample.
pub fn build_k(curv: &CurvatureSample, schedule: &ContractionSchedule) -> Result<KTensorSample> {
    check_dims(curv.dim, schedule)?;
    let n = curv.dim;
    let factors = vec![curv.riemann_mixed.as_slice(); schedule.k];
    let (kappa, magnitude) = if schedule.is_cyclic_default() {
        (
            kappa_cyclic(n, schedule.k, &factors, false),
            kappa_cyclic(n, schedule.k, &factors, true),
        )
    } else {
        kappa_general(n, schedule, &factors)
    };
    Ok(KTensorSample {
        point: curv.point.clone(),
        dim: n,
        order_k: schedule.k,
        kappa,
        magnitude,
    })
}

/// [`build_k`] through the general table route regardless of schedule.
pub fn build_k_general(curv: &CurvatureSample, schedule: &ContractionSchedule) -> Result<KTensorSample> {
    check_dims(curv.dim, schedule)?;
    let factors = vec![curv.riemann_mixed.as_slice(); schedule.k];
    let (kappa, magnitude) = kappa_general(curv.dim, schedule, &factors);
    Ok(KTensorSample {
        point: curv.point.clone(),
        dim: curv.dim,
        order_k: schedule.k,
        kappa,
        magnitude,
    })
}

#[inline]
fn r_at(r: &[f64], n: usize, a: usize, b: usize, c: usize, d: usize) -> f64 {
    r[((a * n + b) * n + c) * n + d]
}

/// Trace-cycle assembly, multilinear in the per-factor curvature arrays
/// `factors[j]` (all equal for `K` itself, one replaced by `∂R` for `∂K`).
/// With `absolute` set, every entry and sign is replaced by its absolute
/// value.
fn kappa_cyclic(n: usize, k: usize, factors: &[&[f64]], absolute: bool) -> Vec<f64> {
    let f = |x: f64| if absolute { x.abs() } else { x };
    let pair_weight = (1u32 << (k - 1)) as f64;
    let tails = paired_tails(n);
    let mut kappa = vec![0.0; n];
    let mut prod = vec![0.0; n * n];
    let mut tmp = vec![0.0; n * n];
    let mut q = vec![0.0; n * n];
    for (l, perms) in tails.iter().enumerate() {
        // Q_l = Σ_σ sgn(σ) B₂(σ₂,σ₃) ⋯ B_k(σ_{2k−2}, σ_{2k−1})
        q.iter_mut().for_each(|v| *v = 0.0);
        for (p, sgn) in perms {
            for e in 0..n {
                for g in 0..n {
                    prod[e * n + g] = if e == g { 1.0 } else { 0.0 };
                }
            }
            for j in 1..k {
                let (a, b) = (p[2 * j - 1], p[2 * j]);
                let r = factors[j];
                tmp.iter_mut().for_each(|v| *v = 0.0);
                for e in 0..n {
                    for m in 0..n {
                        let x = prod[e * n + m];
                        if x == 0.0 {
                            continue;
                        }
                        for g in 0..n {
                            tmp[e * n + g] += x * f(r_at(r, n, a, b, m, g));
                        }
                    }
                }
                std::mem::swap(&mut prod, &mut tmp);
            }
            let s = if absolute { 1.0 } else { *sgn };
            for (qv, pv) in q.iter_mut().zip(&prod) {
                *qv += s * pv;
            }
        }
        // κ_ν += Tr(A(l, ν) Q_l), A[e][g] = R_{l e ν}^g
        let r = factors[0];
        for (nu, kap) in kappa.iter_mut().enumerate() {
            let mut tr = 0.0;
            for e in 0..n {
                for g in 0..n {
                    tr += f(r_at(r, n, l, e, nu, g)) * q[g * n + e];
                }
            }
            *kap += pair_weight * tr;
        }
    }
    kappa
}

/// Direct evaluation of any valid schedule: for every permutation and every
/// assignment of the dummy indices, multiply the factors.
fn kappa_general(n: usize, schedule: &ContractionSchedule, factors: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let d = schedule.dummy_count();
    let mut kappa = vec![0.0; n];
    let mut mag = vec![0.0; n];
    let mut dummy = vec![0usize; d];
    let assignments = n.pow(d as u32);
    for (nu, (kap, mg)) in kappa.iter_mut().zip(mag.iter_mut()).enumerate() {
        for (perm, sgn) in perm_table(n) {
            let resolve = |s: Slot, dummy: &[usize]| match s {
                Slot::Lambda(i) => perm[i],
                Slot::Dummy(e) => dummy[e],
                Slot::Nu => nu,
            };
            for code in 0..assignments {
                let mut c = code;
                for v in dummy.iter_mut() {
                    *v = c % n;
                    c /= n;
                }
                let mut term = 1.0;
                for (f, r) in schedule.factors.iter().zip(factors) {
                    term *= r_at(
                        r,
                        n,
                        resolve(f.lower[0], &dummy),
                        resolve(f.lower[1], &dummy),
                        resolve(f.lower[2], &dummy),
                        resolve(f.upper, &dummy),
                    );
                    if term == 0.0 {
                        break;
                    }
                }
                *kap += sgn * term;
                *mg += term.abs();
            }
        }
    }
    (kappa, mag)
}

/// `K` and its first partial derivatives at a point.
#[derive(Clone, Debug, Serialize)]
pub struct KGradient {
    pub k: KTensorSample,
    /// `partials[μ][ν] = ∂_μ κ_ν`.
    pub partials: Vec<Vec<f64>>,
    /// Cancellation-free magnitudes matching `partials`.
    pub magnitude: Vec<Vec<f64>>,
}

/// K assembled from the curvature of `metric` at `x`.
pub fn k_at(
    metric: &MetricField,
    x: &[f64],
    engine: &DerivativeEngine,
    schedule: &ContractionSchedule,
) -> Result<KTensorSample> {
    build_k(&riemann_at(metric, x, engine)?, schedule)
}

/// `K` and `∂K` at `x`.
///
/// Series mode differentiates through the assembly by the product rule on
/// order-1 curvature jets. Finite-difference mode applies Richardson-refined
/// central differences with step `engine.fd_step` to `κ` assembled from
/// series-mode curvature.
pub fn k_gradient(
    metric: &MetricField,
    x: &[f64],
    engine: &DerivativeEngine,
    schedule: &ContractionSchedule,
) -> Result<KGradient> {
    check_dims(metric.dim(), schedule)?;
    let n = metric.dim();
    let k = schedule.k;
    match engine.mode {
        DerivativeMode::Series => {
            if engine.max_order < 3 {
                return Err(Error::OrderExceeded {
                    requested: 3,
                    supported: engine.max_order,
                });
            }
            let jets = curvature_jets(metric, x, engine, 1)?;
            let r = jets.riemann_values();
            let base = build_k(&curvature_sample_from(metric, x, &jets, r.clone()), schedule)?;
            let mut partials = Vec::with_capacity(n);
            let mut magnitude = Vec::with_capacity(n);
            for mu in 0..n {
                let dr = jets.riemann_partial(mu);
                let mut d = vec![0.0; n];
                let mut m = vec![0.0; n];
                for slot in 0..k {
                    let factors: Vec<&[f64]> = (0..k)
                        .map(|j| if j == slot { dr.as_slice() } else { r.as_slice() })
                        .collect();
                    let (v, a) = if schedule.is_cyclic_default() {
                        (
                            kappa_cyclic(n, k, &factors, false),
                            kappa_cyclic(n, k, &factors, true),
                        )
                    } else {
                        kappa_general(n, schedule, &factors)
                    };
                    for nu in 0..n {
                        d[nu] += v[nu];
                        m[nu] += a[nu];
                    }
                }
                partials.push(d);
                magnitude.push(m);
            }
            Ok(KGradient {
                k: base,
                partials,
                magnitude,
            })
        }
        DerivativeMode::FiniteDifference => {
            let series = DerivativeEngine::series();
            let base = k_at(metric, x, &series, schedule)?;
            let h = engine.fd_step;
            let eval = |mu: usize, step: f64| -> Result<KTensorSample> {
                let mut y = x.to_vec();
                y[mu] += step;
                k_at(metric, &y, &series, schedule)
            };
            let mut partials = Vec::with_capacity(n);
            let mut magnitude = Vec::with_capacity(n);
            for mu in 0..n {
                let (p1, m1) = (eval(mu, h)?, eval(mu, -h)?);
                let (p2, m2) = (eval(mu, h / 2.0)?, eval(mu, -h / 2.0)?);
                let mut d = vec![0.0; n];
                let mut m = vec![0.0; n];
                for nu in 0..n {
                    let coarse = (p1.kappa[nu] - m1.kappa[nu]) / (2.0 * h);
                    let fine = (p2.kappa[nu] - m2.kappa[nu]) / h;
                    d[nu] = (4.0 * fine - coarse) / 3.0;
                    let cm = (p1.magnitude[nu] + m1.magnitude[nu]) / (2.0 * h);
                    m[nu] = cm.max(d[nu].abs());
                }
                partials.push(d);
                magnitude.push(m);
            }
            Ok(KGradient {
                k: base,
                partials,
                magnitude,
            })
        }
    }
}

fn curvature_sample_from(
    metric: &MetricField,
    x: &[f64],
    jets: &crate::curvature::CurvatureJets,
    mixed: Vec<f64>,
) -> CurvatureSample {
    CurvatureSample {
        point: x.to_vec(),
        dim: metric.dim(),
        metric: jets.metric.iter().map(|j| j.value()).collect(),
        christoffel: jets.christoffel.iter().map(|j| j.value()).collect(),
        riemann_lowered: Vec::new(),
        riemann_mixed: mixed,
    }
}

/// `∂_{x^μ} K_{ν λ₁…λₙ}` as the covector `∂_μ κ`.
pub fn k_partials(
    metric: &MetricField,
    x: &[f64],
    mu: usize,
    engine: &DerivativeEngine,
    schedule: &ContractionSchedule,
) -> Result<Vec<f64>> {
    if mu >= metric.dim() {
        return Err(Error::InvalidParameter(format!("direction {mu} out of range")));
    }
    Ok(k_gradient(metric, x, engine, schedule)?.partials.swap_remove(mu))
}

/// Value of the alternating sum
/// `Σ_a (−1)^a (∂_{X_a} K)(ξ; X₀, …, X̂_a, …, X_n)` together with the largest
/// cancellation-free term magnitude.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TildeK {
    pub value: f64,
    pub scale: f64,
}

impl TildeK {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            self.value.abs()
        }
    }
}

/// `frame` holds `X₀ … X_n`: one more vector than the dimension.
pub fn tilde_k(grad: &KGradient, xi: &[f64], frame: &[&[f64]]) -> TildeK {
    let n = grad.k.dim;
    assert_eq!(frame.len(), n + 1, "tilde_k needs dim + 1 vectors");
    let mut value = 0.0;
    let mut scale = 0.0f64;
    for a in 0..=n {
        let xa = frame[a];
        let rest: Vec<&[f64]> = frame
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a)
            .map(|(_, v)| *v)
            .collect();
        let mut dk = 0.0;
        let mut dk_mag = 0.0;
        for mu in 0..n {
            dk += xa[mu] * dot(&grad.partials[mu], xi);
            dk_mag += xa[mu].abs() * abs_dot(&grad.magnitude[mu], xi);
        }
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        value += sign * dk * linalg::det_columns(&rest);
        scale = scale.max(dk_mag * det_magnitude(&rest));
    }
    TildeK { value, scale }
}

/// Memoized `K` (and optionally `∂K`) over a metric. Entries are keyed by the
/// bit patterns of the metric's essential coordinates, so points that differ
/// only in ignorable coordinates share one entry.
pub struct KField {
    pub metric: Arc<MetricField>,
    pub engine: DerivativeEngine,
    pub schedule: ContractionSchedule,
    values: DashMap<Vec<u64>, Arc<KTensorSample>>,
    gradients: DashMap<Vec<u64>, Arc<KGradient>>,
}

impl KField {
    pub fn new(metric: Arc<MetricField>, engine: DerivativeEngine) -> Result<KField> {
        let n = metric.dim();
        if n % 2 == 0 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                found: n,
            });
        }
        Ok(KField {
            schedule: ContractionSchedule::cyclic(n.div_ceil(2)),
            metric,
            engine,
            values: DashMap::new(),
            gradients: DashMap::new(),
        })
    }

    pub fn with_schedule(mut self, schedule: ContractionSchedule) -> Result<KField> {
        check_dims(self.metric.dim(), &schedule)?;
        self.schedule = schedule;
        self.clear();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn key(&self, x: &[f64]) -> Vec<u64> {
        self.metric
            .essential_coords(x)
            .iter()
            .map(|v| v.to_bits())
            .collect()
    }

    pub fn k(&self, x: &[f64]) -> Result<Arc<KTensorSample>> {
        let key = self.key(x);
        if let Some(v) = self.values.get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(k_at(&self.metric, x, &self.engine, &self.schedule)?);
        self.values.insert(key, v.clone());
        Ok(v)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Arc<KGradient>> {
        let key = self.key(x);
        if let Some(v) = self.gradients.get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(k_gradient(&self.metric, x, &self.engine, &self.schedule)?);
        self.gradients.insert(key, v.clone());
        Ok(v)
    }

    /// Inserts precomputed values, e.g. from a grid cache.
    pub fn seed(&self, x: &[f64], sample: KTensorSample) {
        self.values.insert(self.key(x), Arc::new(sample));
    }

    pub fn cached(&self) -> usize {
        self.values.len()
    }

    pub fn clear(&self) {
        self.values.clear();
        self.gradients.clear();
    }
}
