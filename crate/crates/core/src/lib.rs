//! Numerical engine for Wodzicki–Chern–Simons forms on loop spaces of
//! odd-dimensional Riemannian manifolds.
//!
//! The crate computes curvature from chart metrics, assembles the K-tensor,
//! integrates the pulled-back Chern–Simons form over circle actions and
//! homotopies, and checks the identities these objects satisfy.

pub mod error;
pub mod cache;
pub mod config;
pub mod curvature;
pub mod geometry;
pub mod homotopy;
pub mod jet;
pub mod ktensor;
pub mod linalg;
pub mod loops;
pub mod quadrature;
pub mod report;
pub mod suite;
pub mod zoo;

pub use error::{Error, Result};
pub use geometry::{
    compose_maps, identity_map, Chart, ChartedMap, DerivativeEngine, DerivativeMode, PointInChart,
    ScalarMap, SmoothMap, Taylor,
};
pub use jet::{Jet, JetLayout, Scalar, MAX_ORDER};
pub use config::{BoxRule, RunConfig, Tolerances};
pub use curvature::{riemann_at, CurvatureSample, MetricField};
pub use homotopy::{AlphaDerivative, Homotopy, HomotopyPoint, Regularity};
pub use ktensor::{build_k, ContractionSchedule, KField, KTensorSample};
pub use loops::{invariant_i, CircleAction, InvariantResult, ThetaGrid};
pub use quadrature::{Axis, QuadratureGrid, QuadratureRule};
pub use report::{CheckReport, Status, SuiteReport};
pub use zoo::{entry_from_spec, LensDescriptor, ZooEntry};
