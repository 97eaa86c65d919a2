use wcs_core::cache::{self, GridCache};
use wcs_core::config::RunConfig;
use wcs_core::geometry::DerivativeEngine;
use wcs_core::zoo::{make_berger, make_berger_s5};
use wcs_core::{invariant_i, Error, KField, ThetaGrid};

fn small_cache() -> (GridCache, wcs_core::MetricField, wcs_core::QuadratureGrid) {
    let e = make_berger(3, 0.6).unwrap();
    let cfg = RunConfig {
        grid: "3,4,4".into(),
        ..RunConfig::default()
    };
    let grid = cfg.grid_for(e.chart(), None).unwrap();
    let c = cache::curvature_grid(&e.metric, &grid, &DerivativeEngine::series(), 1).unwrap();
    (c, (*e.metric).clone(), grid)
}

#[test]
fn round_trip_is_bit_exact() {
    let (c, m, _) = small_cache();
    // only α varies for this metric
    assert_eq!(c.header.counts, vec![3, 1, 1]);
    let back = GridCache::from_bytes(&c.to_bytes()).unwrap();
    assert_eq!(back, c);
    back.check_metric(&m).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.wcs");
    c.write(&path).unwrap();
    assert_eq!(GridCache::read(&path).unwrap(), c);
}

#[test]
fn tampering_is_detected() {
    let (c, _, _) = small_cache();
    let bytes = c.to_bytes();

    let mut payload = bytes.clone();
    let last = payload.len() - 3;
    payload[last] ^= 0x10;
    assert!(matches!(GridCache::from_bytes(&payload), Err(Error::HashMismatch(_))));

    let mut header = bytes.clone();
    header[20] ^= 0x01; // inside the metric name
    assert!(matches!(GridCache::from_bytes(&header), Err(Error::HashMismatch(_))));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(GridCache::from_bytes(&magic), Err(Error::CorruptHeader(_))));

    let short = &bytes[..bytes.len() - 8];
    assert!(matches!(GridCache::from_bytes(short), Err(Error::TruncatedPayload { .. })));
    assert!(GridCache::from_bytes(&bytes[..10]).is_err());
}

#[test]
fn cache_for_another_metric_is_rejected() {
    let (c, _, _) = small_cache();
    let other = make_berger(3, 0.7).unwrap();
    assert!(matches!(c.check_metric(&other.metric), Err(Error::HashMismatch(_))));
}

#[test]
fn invariant_is_bit_identical_after_reload() {
    let e = make_berger_s5(0.5).unwrap();
    let cfg = RunConfig {
        grid: "3,3,2,2,2".into(),
        ..RunConfig::default()
    };
    let grid = cfg.grid_for(e.chart(), None).unwrap();
    let theta = ThetaGrid::new(16);
    let action = e.action("fiber-rotation").unwrap();
    let dir = tempfile::tempdir().unwrap();

    let fresh = KField::new(e.metric.clone(), DerivativeEngine::series()).unwrap();
    let direct = invariant_i(&fresh, &action, &grid, &theta, 1).unwrap();

    let built = KField::new(e.metric.clone(), DerivativeEngine::series()).unwrap();
    let (_, hit) = cache::load_or_build_curvature(&built, &grid, dir.path(), 1).unwrap();
    assert!(!hit);
    let first = invariant_i(&built, &action, &grid, &theta, 1).unwrap();

    let loaded = KField::new(e.metric.clone(), DerivativeEngine::series()).unwrap();
    let (_, hit) = cache::load_or_build_curvature(&loaded, &grid, dir.path(), 1).unwrap();
    assert!(hit);
    let second = invariant_i(&loaded, &action, &grid, &theta, 1).unwrap();

    assert_eq!(first.value.to_bits(), second.value.to_bits());
    assert_eq!(direct.value.to_bits(), second.value.to_bits());
    assert!(direct.value != 0.0);
}

#[test]
fn worker_count_does_not_change_the_result() {
    let e = make_berger_s5(0.5).unwrap();
    let cfg = RunConfig {
        grid: "3,3,2,2,2".into(),
        ..RunConfig::default()
    };
    let grid = cfg.grid_for(e.chart(), None).unwrap();
    let theta = ThetaGrid::new(16);
    let action = e.action("rotation-z1").unwrap();
    let run = |w| {
        let k = KField::new(e.metric.clone(), DerivativeEngine::series()).unwrap();
        invariant_i(&k, &action, &grid, &theta, w).unwrap().value.to_bits()
    };
    assert_eq!(run(1), run(4));
}
