//! Independent closed-form oracles for the numerical kernels.

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wcs_core::curvature::riemann_at;
use wcs_core::geometry::{Chart, ChartedMap, DerivativeEngine, ScalarMap};
use wcs_core::homotopy::{solve_alpha, AlphaDerivative, Homotopy, HomotopyPoint, Regularity};
use wcs_core::jet::{Jet, Scalar};
use wcs_core::ktensor::{build_k, ContractionSchedule};
use wcs_core::zoo::{make_berger_s5, make_round_sphere, torus_chart};
use wcs_core::MetricField;

/// `dθ² + sin²θ dφ²`.
struct TwoSphere;

impl ScalarMap for TwoSphere {
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let z = x[0].zero_like();
        vec![x[0].lift(1.0), z.clone(), z, x[0].sin().square()]
    }
}

fn two_sphere() -> MetricField {
    let chart = Chart::new(
        "S2",
        vec!["theta".into(), "phi".into()],
        vec![None, Some(2.0 * PI)],
        vec![(0.0, PI), (0.0, 2.0 * PI)],
    )
    .unwrap();
    MetricField::new("s2", vec![], &chart, TwoSphere)
}

#[test]
fn two_sphere_christoffel_symbols_match_closed_form() {
    let m = two_sphere();
    for &th in &[0.3, 0.9, 1.4, 2.5] {
        let c = riemann_at(&m, &[th, 1.1], &DerivativeEngine::series()).unwrap();
        let want_tpp = -th.sin() * th.cos();
        let want_ptp = th.cos() / th.sin();
        assert!((c.gamma(0, 1, 1) - want_tpp).abs() < 1e-14);
        assert!((c.gamma(1, 0, 1) - want_ptp).abs() < 1e-13);
        assert!((c.gamma(1, 1, 0) - want_ptp).abs() < 1e-13);
        for (i, j, k) in [(0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 1, 1)] {
            assert_eq!(c.gamma(i, j, k), 0.0, "Γ^{i}_{j}{k}");
        }
        // R_{θφφθ} = g_θθ g_φφ = sin²θ
        assert!((c.r_lowered(0, 1, 1, 0) - th.sin().powi(2)).abs() < 1e-13);
        assert!((c.r_lowered(0, 1, 0, 1) + th.sin().powi(2)).abs() < 1e-13);
    }
}

fn assert_space_form(metric: &MetricField, points: &[Vec<f64>], tol: f64) {
    for x in points {
        let c = riemann_at(metric, x, &DerivativeEngine::series()).unwrap();
        let n = c.dim;
        let g = |a: usize, b: usize| c.metric[a * n + b];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let want = g(i, l) * g(j, k) - g(i, k) * g(j, l);
                        let got = c.r_lowered(i, j, k, l);
                        assert!((got - want).abs() < tol, "R_{i}{j}{k}{l} = {got}, want {want} at {x:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn round_spheres_have_unit_sectional_curvature() {
    for dim in [3, 5] {
        let e = make_round_sphere(dim).unwrap();
        assert_space_form(&e.metric, &e.random_points(10, 3), 1e-12);
    }
}

/// Literal definition: sum over every permutation of the λ block and every
/// value of the three dummies of
/// `R_{λσ0 e1 ν}^{e2} R_{λσ1 λσ2 e2}^{e3} R_{λσ3 λσ4 e3}^{e1}`.
fn naive_k(r: &[f64], nu: usize, lambda: &[usize]) -> (f64, f64) {
    let n = 5;
    let at = |a: usize, b: usize, c: usize, d: usize| r[((a * n + b) * n + c) * n + d];
    let mut perms = Vec::new();
    let mut stack = vec![(vec![], vec![true; n])];
    while let Some((cur, free)) = stack.pop() {
        if cur.len() == n {
            perms.push(cur);
            continue;
        }
        for i in 0..n {
            if free[i] {
                let mut c2: Vec<usize> = cur.clone();
                c2.push(i);
                let mut f2 = free.clone();
                f2[i] = false;
                stack.push((c2, f2));
            }
        }
    }
    assert_eq!(perms.len(), 120);
    let (mut sum, mut mag) = (0.0, 0.0);
    for p in perms {
        let inversions = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
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

#[test]
fn k_assembly_matches_brute_force_sum() {
    let engine = DerivativeEngine::series();
    let schedule = ContractionSchedule::cyclic(3);
    for e in [make_berger_s5(0.5).unwrap(), make_berger_s5(1.7).unwrap(), make_round_sphere(5).unwrap()] {
        for x in e.random_points(3, 11) {
            let c = riemann_at(&e.metric, &x, &engine).unwrap();
            let k = build_k(&c, &schedule).unwrap();
            for nu in 0..5 {
                let (want, mag) = naive_k(&c.riemann_mixed, nu, &[0, 1, 2, 3, 4]);
                assert!(
                    (k.kappa[nu] - want).abs() <= 1e-12 * mag.max(f64::MIN_POSITIVE),
                    "κ_{nu}: {} vs {want} (scale {mag})",
                    k.kappa[nu]
                );
                // adjacent transposition of λ flips the sign
                let (swapped, _) = naive_k(&c.riemann_mixed, nu, &[1, 0, 2, 3, 4]);
                assert!((swapped + want).abs() <= 1e-12 * mag.max(f64::MIN_POSITIVE));
            }
        }
    }
}

#[test]
fn berger_k_is_nonzero_and_round_k_vanishes() {
    let engine = DerivativeEngine::series();
    let schedule = ContractionSchedule::cyclic(3);
    let x = [0.6, 0.8, 0.1, 0.2, 0.3];
    let b = build_k(&riemann_at(&make_berger_s5(0.5).unwrap().metric, &x, &engine).unwrap(), &schedule).unwrap();
    assert!(b.kappa.iter().any(|v| v.abs() > 1e-3 * b.magnitude.iter().cloned().fold(0.0, f64::max)));
    let r = build_k(&riemann_at(&make_round_sphere(5).unwrap().metric, &x, &engine).unwrap(), &schedule).unwrap();
    for nu in 0..5 {
        assert!(r.kappa[nu].abs() <= 1e-12 * r.magnitude[nu].max(1.0));
    }
}

#[test]
fn jets_follow_the_chain_rule() {
    let (x0, y0) = (0.7, -0.4);
    let v = Jet::seed(&[x0, y0], 3);
    let f = (v[0].clone() * v[1].clone()).sin() * v[1].exp();
    let u = x0 * y0;
    let e = y0.exp();
    // ∂x f = y cos(xy) e^y, ∂y f = (x cos(xy) + sin(xy)) e^y
    assert!((f.partial(&[0]).unwrap() - y0 * u.cos() * e).abs() < 1e-15);
    assert!((f.partial(&[1]).unwrap() - (x0 * u.cos() + u.sin()) * e).abs() < 1e-15);
    // ∂x∂x f = −y² sin(xy) e^y
    assert!((f.partial(&[0, 0]).unwrap() + y0 * y0 * u.sin() * e).abs() < 1e-15);
}

#[test]
fn third_derivative_of_sine() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..50 {
        let x: f64 = rng.random_range(-4.0..4.0);
        let j = Jet::seed(&[x], 3)[0].sin();
        assert!((j.partial(&[0, 0, 0]).unwrap() + x.cos()).abs() < 1e-14);
        assert!((j.partial(&[0, 0]).unwrap() + x.sin()).abs() < 1e-14);
    }
}

/// `F(s, θ, x) = x + 0.3 sin θ · x₁ e₀ + s u(θ)` on the flat 3-torus chart.
struct ShearFlow;

fn u<S: Scalar>(th: &S) -> [S; 3] {
    [th.cos(), th.sin(), (th.clone() * 2.0).cos() * 0.5]
}

impl ScalarMap for ShearFlow {
    fn apply<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        let (s, th, x) = (&y[0], &y[1], &y[2..]);
        let u = u(th);
        vec![
            x[0].clone() + th.sin() * x[1].clone() * 0.3 + s.clone() * u[0].clone(),
            x[1].clone() + s.clone() * u[1].clone(),
            x[2].clone() + s.clone() * u[2].clone(),
        ]
    }
}

#[test]
fn alpha_coefficients_of_a_shear_flow() {
    let m = torus_chart(3);
    let dom = Chart::product(&[&Chart::unit_interval(), &Chart::circle(), &m]);
    let h = Homotopy::new("shear", ChartedMap::shared(&dom, &m, ShearFlow), Regularity::Diffeomorphism).unwrap();
    let engine = DerivativeEngine::series();
    for &(s, th) in &[(0.2, 0.4), (0.7, 2.9), (0.5, 5.5)] {
        let p = HomotopyPoint { s, theta: th, x: vec![0.3, 1.2, 4.0] };
        // J = [[1, 0.3 sin θ, 0], [0, 1, 0], [0, 0, 1]], ∂_sF = u(θ)
        let uu = u(&th);
        let sh = 0.3 * th.sin();
        let want = [uu[0] - sh * uu[1], uu[1], uu[2]];
        let du = [-th.sin(), th.cos(), -(2.0 * th).sin()];
        let dsh = 0.3 * th.cos();
        let dwant = [du[0] - dsh * uu[1] - sh * du[1], du[1], du[2]];
        for route in [AlphaDerivative::Implicit, AlphaDerivative::FiniteDifference { step: 1e-3 }] {
            let a = solve_alpha(&h, &engine, &p, route).unwrap();
            let tol = if route == AlphaDerivative::Implicit { 1e-14 } else { 1e-9 };
            for i in 0..3 {
                assert!((a.alpha[i] - want[i]).abs() < 1e-14);
                assert!((a.dtheta_alpha[i] - dwant[i]).abs() < tol, "{route:?} {i}");
            }
        }
    }
}

#[test]
fn sampler_stays_inside_the_box() {
    let e = make_berger_s5(0.5).unwrap();
    for x in e.random_points(200, 9) {
        for (v, (lo, hi)) in x.iter().zip(&e.sample_box) {
            assert!(v >= lo && v <= hi);
        }
    }
}
