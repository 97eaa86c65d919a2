use std::f64::consts::TAU;

use proptest::prelude::*;
use wcs_core::cache::{CacheHeader, GridCache, FORMAT_VERSION};
use wcs_core::geometry::DerivativeEngine;
use wcs_core::ktensor::{k_gradient, permutation_sign, tilde_k};
use wcs_core::loops::{pullback_form_at, scaling_check};
use wcs_core::zoo::make_berger_s5;
use wcs_core::{riemann_at, KField, ThetaGrid};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

fn hopf_point() -> impl Strategy<Value = Vec<f64>> {
    (0.2..1.35f64, 0.2..1.35f64, 0.0..TAU, 0.0..TAU, 0.0..TAU).prop_map(|(a, b, p, q, r)| vec![a, b, p, q, r])
}

fn vec5() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 5)
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn contraction_is_alternating_and_linear(x in hopf_point(), xi in vec5(), eta in vec5(),
                                             cols in prop::collection::vec(vec5(), 5),
                                             i in 0usize..5, j in 0usize..5, c in -2.0..2.0f64) {
        prop_assume!(i != j);
        let kf = KField::new(make_berger_s5(0.5).unwrap().metric, DerivativeEngine::series()).unwrap();
        let k = kf.k(&x).unwrap();
        let frame: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let mut swapped = frame.clone();
        swapped.swap(i, j);
        let scale = k.contract_magnitude(&xi, &frame).max(1e-300);
        prop_assert!((k.contract(&xi, &frame) + k.contract(&xi, &swapped)).abs() <= 1e-12 * scale);
        let comb: Vec<f64> = xi.iter().zip(&eta).map(|(a, b)| a + c * b).collect();
        let lin = k.contract(&comb, &frame) - k.contract(&xi, &frame) - c * k.contract(&eta, &frame);
        let lscale = scale + k.contract_magnitude(&eta, &frame) * c.abs();
        prop_assert!(lin.abs() <= 1e-12 * lscale);
    }

    #[test]
    fn alternating_derivative_sum_vanishes(x in hopf_point(), t in 0.3..2.0f64, xi in vec5(),
                                           cols in prop::collection::vec(vec5(), 6)) {
        let m = make_berger_s5(t).unwrap().metric;
        let g = k_gradient(&m, &x, &DerivativeEngine::series(), &wcs_core::ContractionSchedule::cyclic(3)).unwrap();
        let frame: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        prop_assert!(tilde_k(&g, &xi, &frame).relative() < 1e-6);
    }

    #[test]
    fn curvature_identities_hold_on_berger_spheres(x in hopf_point(), t in 0.2..3.0f64) {
        let m = make_berger_s5(t).unwrap().metric;
        let c = riemann_at(&m, &x, &DerivativeEngine::series()).unwrap();
        prop_assert!(c.identity_residuals().max() < 1e-10);
    }

    #[test]
    fn curvature_is_periodic_in_the_phases(x in hopf_point(), axis in 2usize..5, wraps in -3i32..3) {
        let m = make_berger_s5(0.8).unwrap().metric;
        let mut y = x.clone();
        y[axis] += TAU * wraps as f64;
        let e = DerivativeEngine::series();
        let a = riemann_at(&m, &x, &e).unwrap();
        let b = riemann_at(&m, &y, &e).unwrap();
        for (u, v) in a.riemann_lowered.iter().zip(&b.riemann_lowered) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn mixed_partials_commute(x in hopf_point(), i in 0usize..5, j in 0usize..5) {
        let m = make_berger_s5(0.5).unwrap().metric;
        let t = DerivativeEngine::series().taylor(m.g.as_ref(), &x, 2).unwrap();
        let a = t.partial(&[i, j]);
        let b = t.partial(&[j, i]);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn permutation_sign_is_multiplicative(p in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
                                          q in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
        let pq: Vec<usize> = q.iter().map(|&i| p[i]).collect();
        prop_assert_eq!(permutation_sign(&pq), permutation_sign(&p) * permutation_sign(&q));
    }

    #[test]
    fn cache_round_trips_arbitrary_payloads(payload in prop::collection::vec(any::<f64>(), 0..64), name in "[a-z]{1,12}", hash in any::<u64>()) {
        let c = GridCache {
            header: CacheHeader {
                version: FORMAT_VERSION,
                metric: name,
                param_hash: hash,
                chart_dim: 1,
                counts: vec![payload.len() as u32],
                rank: 0,
                components: 1,
                little_endian: true,
            },
            payload,
        };
        let back = GridCache::from_bytes(&c.to_bytes()).unwrap();
        prop_assert_eq!(back.header, c.header);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.payload), bits(&c.payload));
    }
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn theta_origin_does_not_matter(x in hopf_point(), offset in 0.0..TAU) {
        let e = make_berger_s5(0.5).unwrap();
        let kf = KField::new(e.metric.clone(), DerivativeEngine::series()).unwrap();
        let a = e.action("rotation-z2").unwrap();
        let base = pullback_form_at(&kf, &a, &x, &ThetaGrid::new(32)).unwrap();
        let moved = pullback_form_at(&kf, &a, &x, &ThetaGrid::shifted(32, offset)).unwrap();
        prop_assert!((base.value - moved.value).abs() <= 1e-10 * base.scale);
    }

    #[test]
    fn iterates_scale_the_pulled_back_form(x in hopf_point(), n in 2u32..6) {
        let e = make_berger_s5(0.5).unwrap();
        let kf = KField::new(e.metric.clone(), DerivativeEngine::series()).unwrap();
        let a = e.action("rotation-z1").unwrap();
        let rep = scaling_check(&kf, &a, n, &[x], None, &ThetaGrid::new(32)).unwrap();
        prop_assert!(rep.pointwise_deviation() < 1e-10);
    }
}
