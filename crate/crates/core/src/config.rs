//! Run configuration: one TOML file plus command-line overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Chart, DerivativeEngine, DerivativeMode};
use crate::loops::ThetaGrid;
use crate::quadrature::{Axis, QuadratureGrid, QuadratureRule};

/// Acceptance thresholds. All are relative to the integrand scale of the
/// quantity they bound unless noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute bound on flat-metric curvature, K and integrals.
    pub null: f64,
    pub curvature_identities: f64,
    pub curvature_pullback: f64,
    pub tilde_k: f64,
    pub dual_evaluator: f64,
    pub cartan: f64,
    pub vanishing: f64,
    /// Absolute bound on `∫ ∂α/∂θ dθ`.
    pub alpha_period: f64,
    pub scaling_pointwise: f64,
    pub scaling_integral: f64,
    pub lens: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            null: 1e-12,
            curvature_identities: 1e-8,
            curvature_pullback: 1e-8,
            tilde_k: 1e-6,
            dual_evaluator: 1e-5,
            cartan: 1e-4,
            vanishing: 1e-6,
            alpha_period: 1e-9,
            scaling_pointwise: 1e-10,
            scaling_integral: 1e-8,
            lens: 1e-8,
        }
    }
}

impl Tolerances {
    fn check(&self) -> Result<()> {
        let all = [
            ("null", self.null),
            ("curvature_identities", self.curvature_identities),
            ("curvature_pullback", self.curvature_pullback),
            ("tilde_k", self.tilde_k),
            ("dual_evaluator", self.dual_evaluator),
            ("cartan", self.cartan),
            ("vanishing", self.vanishing),
            ("alpha_period", self.alpha_period),
            ("scaling_pointwise", self.scaling_pointwise),
            ("scaling_integral", self.scaling_integral),
            ("lens", self.lens),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("tolerance `{name}` = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Node rule for the non-periodic chart axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxRule {
    OpenMidpoint,
    GaussLegendre,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `berger:t=0.5`, `round:dim=5`, `flat-torus:dim=5`, …
    pub metric: String,
    pub action: String,
    pub homotopy: Option<String>,
    /// Lens orders for the covering check.
    pub lens: Vec<u32>,
    /// `fast` (8 nodes per axis, 64 θ nodes), `default` (16 per axis, 256 θ
    /// nodes) or explicit per-axis counts such as `8,8,6,6,6`.
    pub grid: String,
    pub rule: BoxRule,
    /// Overrides the preset θ node count.
    pub theta_nodes: Option<usize>,
    pub engine: DerivativeMode,
    pub fd_step: f64,
    pub cartan_step: f64,
    pub tolerances: Tolerances,
    pub workers: usize,
    /// Random sample points per pointwise check.
    pub samples: usize,
    pub seed: u64,
    pub iterates: Vec<u32>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            metric: "berger:t=0.5".into(),
            action: "fiber-rotation".into(),
            homotopy: None,
            lens: vec![2, 3],
            grid: "fast".into(),
            rule: BoxRule::OpenMidpoint,
            theta_nodes: None,
            engine: DerivativeMode::Series,
            fd_step: DerivativeEngine::DEFAULT_FD_STEP,
            cartan_step: crate::homotopy::CARTAN_STEP,
            tolerances: Tolerances::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            samples: 20,
            seed: 1,
            iterates: vec![2, 3],
            cache_dir: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.check()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be ≥ 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be ≥ 1".into()));
        }
        for (name, v) in [("fd_step", self.fd_step), ("cartan_step", self.cartan_step)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("`{name}` = {v} must be positive")));
            }
        }
        if let Some(0) = self.theta_nodes {
            return Err(Error::Config("theta_nodes must be ≥ 1".into()));
        }
        if self.iterates.contains(&0) {
            return Err(Error::Config("iterates must be ≥ 1".into()));
        }
        if self.lens.iter().any(|&p| p < 2) {
            return Err(Error::Config("lens orders must be ≥ 2".into()));
        }
        self.preset()?;
        Ok(())
    }

    /// Per-axis node count (uniform presets) or explicit counts.
    fn preset(&self) -> Result<(GridCounts, usize)> {
        match self.grid.as_str() {
            "fast" => Ok((GridCounts::Uniform(8), 64)),
            "default" => Ok((GridCounts::Uniform(16), 256)),
            spec => {
                let counts = spec
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Config(format!("grid `{spec}` is neither a preset nor a count list")))?;
                if counts.contains(&0) {
                    return Err(Error::Config("grid counts must be ≥ 1".into()));
                }
                Ok((GridCounts::Explicit(counts), 256))
            }
        }
    }

    pub fn engine(&self) -> DerivativeEngine {
        match self.engine {
            DerivativeMode::Series => DerivativeEngine::series(),
            DerivativeMode::FiniteDifference => DerivativeEngine::finite_difference(self.fd_step),
        }
    }

    pub fn theta(&self) -> Result<ThetaGrid> {
        let n = match self.theta_nodes {
            Some(n) => n,
            None => self.preset()?.1,
        };
        Ok(ThetaGrid::new(n))
    }

    /// Tensor-product grid over `bounds` (defaults to the chart domain).
    pub fn grid_for(&self, chart: &Chart, bounds: Option<&[(f64, f64)]>) -> Result<QuadratureGrid> {
        let dim = chart.dim();
        let counts = match self.preset()?.0 {
            GridCounts::Uniform(c) => vec![c; dim],
            GridCounts::Explicit(c) if c.len() == dim => c,
            GridCounts::Explicit(c) => {
                return Err(Error::Config(format!("grid lists {} counts for a {dim}-dimensional chart", c.len())))
            }
        };
        let bounds = bounds.unwrap_or(&chart.domain);
        let axes = (0..dim)
            .map(|a| {
                let (lo, hi) = bounds[a];
                let rule = match (chart.periods[a], self.rule) {
                    (Some(_), _) => QuadratureRule::PeriodicTrapezoid,
                    (None, BoxRule::OpenMidpoint) => QuadratureRule::OpenMidpoint,
                    (None, BoxRule::GaussLegendre) => QuadratureRule::GaussLegendre,
                };
                Axis::new(lo, hi, counts[a], rule)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuadratureGrid::new(axes))
    }
}

enum GridCounts {
    Uniform(usize),
    Explicit(Vec<usize>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_tolerances_are_rejected() {
        assert!(RunConfig::from_toml("metrc = \"round\"").is_err());
        assert!(RunConfig::from_toml("[tolerances]\ncartan = -1.0").is_err());
        assert!(RunConfig::from_toml("[tolerances]\nbogus = 1.0").is_err());
        assert!(RunConfig::from_toml("grid = \"8,x\"").is_err());
        assert!(RunConfig::from_toml("workers = 0").is_err());
        let cfg = RunConfig::from_toml("metric = \"round:dim=3\"\ngrid = \"4,6,6\"\nengine = \"finite-difference\"").unwrap();
        assert_eq!(cfg.engine().mode, DerivativeMode::FiniteDifference);
        let chart = crate::zoo::sphere_chart(2);
        let g = cfg.grid_for(&chart, None).unwrap();
        assert_eq!(g.counts(), vec![4, 6, 6]);
        assert!(cfg.grid_for(&crate::zoo::sphere_chart(3), None).is_err());
    }
}
