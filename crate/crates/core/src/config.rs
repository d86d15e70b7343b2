//! Run configuration: a single TOML file with nested sections. Unknown keys
//! are rejected, and every numeric field is validated before any
//! computation starts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amc::{BaseSystem, PriorityPolicy, SystemConfig};
use crate::dph::DphDistribution;
use crate::error::{Error, Result};
use crate::optimizer::DistFamily;

/// A service-time distribution as written in the config file.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistSpec {
    Geometric { p: f64 },
    Uniform { a: u64, b: u64 },
    Triangular { mean: f64, variance: f64 },
    /// Explicit PMF; keys are support values written as strings.
    Pmf { masses: BTreeMap<String, f64> },
}

impl DistSpec {
    pub fn build(&self) -> Result<DphDistribution> {
        match self {
            DistSpec::Geometric { p } => DphDistribution::geometric(*p),
            DistSpec::Uniform { a, b } => DphDistribution::uniform(*a, *b),
            DistSpec::Triangular { mean, variance } => {
                DphDistribution::triangular(*mean, *variance)
            }
            DistSpec::Pmf { masses } => {
                let mut parsed = BTreeMap::new();
                for (key, &value) in masses {
                    let w: u64 = key.parse().map_err(|_| {
                        Error::InvalidParameter(format!(
                            "PMF support value {key:?} is not a nonnegative integer"
                        ))
                    })?;
                    parsed.insert(w, value);
                }
                DphDistribution::from_pmf(&parsed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrioritySpec {
    #[default]
    S1,
    S2,
}

impl From<PrioritySpec> for PriorityPolicy {
    fn from(p: PrioritySpec) -> Self {
        match p {
            PrioritySpec::S1 => PriorityPolicy::S1Priority,
            PrioritySpec::S2 => PriorityPolicy::S2Priority,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub server1: DistSpec,
    pub server2: DistSpec,
    /// Freezing parameter; required by `analyze` (`>= 1`) and `simulate`
    /// (`>= 0`), ignored by the scan commands.
    pub k: Option<u64>,
    #[serde(default)]
    pub priority: PrioritySpec,
}

impl SystemSection {
    pub fn base_system(&self) -> Result<BaseSystem> {
        Ok(BaseSystem {
            dph1: self.server1.build()?,
            dph2: self.server2.build()?,
            priority: self.priority.into(),
        })
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let k = self.k.ok_or_else(|| {
            Error::InvalidParameter("system.k is required for this command".into())
        })?;
        Ok(self.base_system()?.with_k(k as usize))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub tail_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub slots: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub k_max: Option<u64>,
    /// Slot budget for the zero-wait baseline simulation.
    pub baseline_slots: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Mean,
    Variance,
    Nonidentical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilySpec {
    Geometric,
    Uniform,
    Triangular,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub family: FamilySpec,
    /// Fixed variance for triangular grids (mean and nonidentical sweeps).
    pub variance: Option<f64>,
    /// Mean grid for `kind = "mean"`.
    pub means: Option<Vec<f64>>,
    /// Axis grids for `kind = "nonidentical"`.
    pub means1: Option<Vec<f64>>,
    pub means2: Option<Vec<f64>>,
    /// Fixed mean for `kind = "variance"`.
    pub mean: Option<f64>,
    pub variances: Option<Vec<f64>>,
    pub k_max: Option<u64>,
    pub slots: Option<u64>,
    pub seed: Option<u64>,
}

impl SweepSection {
    pub fn family(&self) -> Result<DistFamily> {
        Ok(match self.family {
            FamilySpec::Geometric => DistFamily::Geometric,
            FamilySpec::Uniform => DistFamily::Uniform,
            FamilySpec::Triangular => DistFamily::Triangular {
                variance: self.variance.ok_or_else(|| {
                    Error::InvalidParameter(
                        "sweep.variance is required for the triangular family".into(),
                    )
                })?,
            },
        })
    }
}

/// Parsed configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub analysis: Option<AnalysisSection>,
    pub simulation: Option<SimulationSection>,
    pub optimize: Option<OptimizeSection>,
    pub sweep: Option<SweepSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("config error: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<(RunConfig, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config = Self::parse(&text)?;
        Ok((config, sha256_hex(text.as_bytes())))
    }

    pub fn tail_tol(&self) -> f64 {
        self.analysis
            .as_ref()
            .and_then(|a| a.tail_tol)
            .unwrap_or(crate::metrics::DEFAULT_TAIL_TOL)
    }
}

/// Hex SHA-256, used to stamp outputs with the exact config they came from.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
k = 4
[system.server1]
kind = "geometric"
p = 0.25
[system.server2]
kind = "uniform"
a = 1
b = 3
"#;

    #[test]
    fn parses_minimal_config() {
        let config = RunConfig::parse(MINIMAL).unwrap();
        let system = config.system.system_config().unwrap();
        assert_eq!(system.k, 4);
        assert_eq!(system.priority, PriorityPolicy::S1Priority);
        assert_eq!(system.dph1.order(), 1);
        assert_eq!(system.dph2.order(), 3);
        assert_eq!(config.tail_tol(), crate::metrics::DEFAULT_TAIL_TOL);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{MINIMAL}\n[analysis]\ntail_tol = 1e-9\ntypo_key = 3\n");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("typo_key"), "{err}");
    }

    #[test]
    fn rejects_unknown_distribution_fields() {
        let bad = MINIMAL.replace("p = 0.25", "p = 0.25\nrate = 3.0");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn pmf_spec_builds() {
        let text = r#"
[system]
k = 1
[system.server1]
kind = "pmf"
masses = { 1 = 0.5, 3 = 0.5 }
[system.server2]
kind = "triangular"
mean = 3.0
variance = 0.5
"#;
        let config = RunConfig::parse(text).unwrap();
        let system = config.system.system_config().unwrap();
        assert_eq!(system.dph1.order(), 3);
        assert!((system.dph2.mean() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn missing_k_is_an_error_for_fixed_k_commands() {
        let text = MINIMAL.replace("k = 4\n", "");
        let config = RunConfig::parse(&text).unwrap();
        assert!(config.system.system_config().is_err());
        assert!(config.system.base_system().is_ok());
    }

    #[test]
    fn sha256_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
