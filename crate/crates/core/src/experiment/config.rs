use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::aw::{BoxFamily, Budget};
use crate::error::{Error, Result};
use crate::lattice::Graph;
use crate::measures::{self_dual_p, AtomicBaseMeasure, DensityVariant, DisorderDistribution, ModelSpec};
use crate::sampler::{Boundary, MIN_BATCHES};

/// Whole run configuration. Every table rejects unknown keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub suites: SuiteConfig,
    #[serde(default)]
    pub gap_scan: GapScanConfig,
    #[serde(default)]
    pub aw_stats: AwStatsConfig,
    #[serde(default)]
    pub potential_table: PotentialTableConfig,
}

fn one() -> usize {
    1
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            workers: 1,
            out_dir: None,
            model: ModelConfig::default(),
            suites: SuiteConfig::default(),
            gap_scan: GapScanConfig::default(),
            aw_stats: AwStatsConfig::default(),
            potential_table: PotentialTableConfig::default(),
        }
    }
}

/// Base measure of one edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoConfig {
    Atomic { atoms: Vec<f64>, weights: Vec<f64> },
    /// `p δ_q + (1 − p) δ_1`.
    TwoPoint { p: f64, q: f64 },
    /// Two-point law at `p = q^{1/4}/(1 + q^{1/4})`.
    SelfDual { q: f64 },
}

impl RhoConfig {
    pub fn build(&self) -> Result<AtomicBaseMeasure> {
        match self {
            RhoConfig::Atomic { atoms, weights } => AtomicBaseMeasure::new(atoms.clone(), weights.clone()),
            RhoConfig::TwoPoint { p, q } => AtomicBaseMeasure::two_point(*p, *q),
            RhoConfig::SelfDual { q } => AtomicBaseMeasure::two_point(self_dual_p(*q), *q),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoOverride {
    pub edge: usize,
    pub rho: RhoConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub radius: usize,
    pub boundary: Boundary,
    pub lambda: f64,
    pub rho: RhoConfig,
    #[serde(default)]
    pub rho_overrides: Vec<RhoOverride>,
    pub disorder: DisorderDistribution,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 2,
            radius: 1,
            boundary: Boundary::Free,
            lambda: 3.0,
            rho: RhoConfig::TwoPoint { p: 0.5, q: 3.0 },
            rho_overrides: Vec::new(),
            disorder: DisorderDistribution::None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.radius == 0 {
            return Err(Error::Config("model.dim and model.radius must be positive".into()));
        }
        self.disorder.validate().map_err(|e| Error::Config(format!("model.disorder: {e}")))?;
        self.rho.build().map_err(|e| Error::Config(format!("model.rho: {e}")))?;
        Ok(())
    }

    pub fn family(&self) -> Result<BoxFamily> {
        Ok(BoxFamily {
            dim: self.dim,
            rho: self.rho.build()?,
            lambda: self.lambda,
            disorder: self.disorder.clone(),
        })
    }

    /// The configured box (free, before any wiring) with `xi` as disorder.
    pub fn spec_with(&self, xi: Vec<f64>) -> Result<ModelSpec> {
        let g = Graph::build_box(self.dim, self.radius);
        let m = g.num_edges();
        let mut rho = vec![self.rho.build()?; m];
        for o in &self.rho_overrides {
            if o.edge >= m {
                return Err(Error::Config(format!("model.rho_overrides: edge {} out of range", o.edge)));
            }
            rho[o.edge] = o.rho.build()?;
        }
        ModelSpec::new(g, rho, xi, self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Random witnesses per randomized check.
    pub trials: usize,
    /// Sweeps of the sampler-exactness chains.
    pub sweeps: u64,
    pub burn_in: u64,
    /// Draws for the conditional-Gaussian moments.
    pub gaussian_samples: usize,
    /// Density scored by the lattice-condition check; `negated_exponent`
    /// is a seeded fault for exercising the failure path.
    pub density: DensityVariant,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trials: 1000,
            sweeps: 100_000,
            burn_in: 1000,
            gaussian_samples: 100_000,
            density: DensityVariant::Standard,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapScanConfig {
    pub radii: Vec<usize>,
    pub replicas: usize,
    pub sweeps: u64,
    pub burn_in: u64,
    pub batches: usize,
}

impl Default for GapScanConfig {
    fn default() -> Self {
        GapScanConfig {
            radii: vec![2, 3],
            replicas: 5,
            sweeps: 2000,
            burn_in: 200,
            batches: MIN_BATCHES,
        }
    }
}

impl GapScanConfig {
    pub fn budget(&self) -> Budget {
        Budget {
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            batches: self.batches,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AwStatsConfig {
    pub inner: usize,
    pub outer: usize,
    pub replicas: usize,
    pub resamples: usize,
    pub sweeps: u64,
    pub burn_in: u64,
    pub batches: usize,
    /// Repeat every conditional average on `Λ_{2N}` as a sensitivity probe.
    pub doubling_probe: bool,
}

impl Default for AwStatsConfig {
    fn default() -> Self {
        AwStatsConfig {
            inner: 1,
            outer: 2,
            replicas: 4,
            resamples: 30,
            sweeps: 400,
            burn_in: 50,
            batches: MIN_BATCHES,
            doubling_probe: false,
        }
    }
}

impl AwStatsConfig {
    pub fn budget(&self) -> Budget {
        Budget {
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            batches: self.batches,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialTableConfig {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    pub xi: Vec<f64>,
}

impl Default for PotentialTableConfig {
    fn default() -> Self {
        PotentialTableConfig {
            s_min: -3.0,
            s_max: 3.0,
            points: 61,
            xi: vec![0.0],
        }
    }
}

impl Config {
    /// Parse TOML; errors carry the line, column and offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        // TOML integers are signed
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        self.model.validate()?;
        if self.potential_table.points < 2 || !(self.potential_table.s_max > self.potential_table.s_min) {
            return Err(Error::Config("potential_table needs points ≥ 2 and s_max > s_min".into()));
        }
        if self.aw_stats.outer <= self.aw_stats.inner {
            return Err(Error::Config("aw_stats.outer must exceed aw_stats.inner".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(Config::from_toml("").unwrap(), c);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = Config::from_toml("seed = 3\n[model]\ndim = 2\nradius = 1\nboundary = \"free\"\nlambda = 3.0\ncolour = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("colour"), "{err}");
        assert!(err.contains("line 7"), "{err}");
    }

    #[test]
    fn self_dual_rho() {
        let r = RhoConfig::SelfDual { q: 16.0 }.build().unwrap();
        assert!((r.weights()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply() {
        let mut m = ModelConfig::default();
        m.rho_overrides.push(RhoOverride {
            edge: 3,
            rho: RhoConfig::Atomic {
                atoms: vec![2.0],
                weights: vec![1.0],
            },
        });
        let s = m.spec_with(vec![0.0; 12]).unwrap();
        assert_eq!(s.rho(3).atoms(), &[2.0]);
        assert_eq!(s.rho(2).len(), 2);
    }
}
