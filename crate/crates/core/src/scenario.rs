//! Scenario configuration: one JSON document per run. Unknown keys are
//! rejected so parameter-name typos fail loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchangeable::MixingDistribution;
use crate::indep::PlacementPmf;
use crate::model::{NetworkConfig, ZipfPopularity};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    pub lambda: f64,
    pub r_dd: f64,
    pub m: usize,
    pub n: usize,
    pub gamma_r: f64,
}

fn default_reps() -> u64 {
    10_000
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    #[serde(default = "default_reps")]
    pub n_reps: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_side: Option<f64>,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            n_reps: default_reps(),
            seed: default_seed(),
            window_side: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GammaR,
    RDd,
    Lambda,
    N,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixSpec {
    Degenerate { theta: f64 },
    TwoPoint { theta0: f64, theta1: f64, w: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl MixSpec {
    pub fn build(&self) -> Result<MixingDistribution> {
        match *self {
            MixSpec::Degenerate { theta } => MixingDistribution::degenerate(theta),
            MixSpec::TwoPoint { theta0, theta1, w } => {
                MixingDistribution::two_point(theta0, theta1, w)
            }
            MixSpec::Beta { alpha, beta } => MixingDistribution::beta(alpha, beta),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// Independent placement; `pc` overrides the optimizer output.
    Independent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pc: Option<Vec<f64>>,
        #[serde(default)]
        exact_n: bool,
    },
    /// Exchangeable placement with one mixing spec per file.
    Exchangeable { mixes: Vec<MixSpec> },
    /// Matérn hard-core placement with optimized exclusion radii.
    Mhc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: NetworkParams,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySpec>,
}

impl Scenario {
    /// Documented defaults: M=100, N=10, gamma_r=0.8, lambda=1, r_dd=1,
    /// 10^4 replications, seed 42.
    pub fn default_scenario() -> Self {
        Self {
            network: NetworkParams {
                lambda: 1.0,
                r_dd: 1.0,
                m: 100,
                n: 10,
                gamma_r: 0.8,
            },
            sim: SimParams::default(),
            sweep: None,
            strategy: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let scenario: Scenario = serde_json::from_str(&text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.network_config()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep.values must be non-empty".into()));
            }
            if sweep.parameter == SweepParam::N {
                for &v in &sweep.values {
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(Error::Config(format!(
                            "sweep over N needs positive integers, got {v}"
                        )));
                    }
                }
            }
        }
        if let Some(StrategySpec::Independent { pc: Some(pc), .. }) = &self.strategy {
            if pc.len() != self.network.m {
                return Err(Error::DimensionMismatch {
                    expected: self.network.m,
                    got: pc.len(),
                });
            }
            PlacementPmf::new(pc.clone())?;
        }
        if let Some(StrategySpec::Exchangeable { mixes }) = &self.strategy {
            if mixes.len() != self.network.m {
                return Err(Error::DimensionMismatch {
                    expected: self.network.m,
                    got: mixes.len(),
                });
            }
            for m in mixes {
                m.build()?;
            }
        }
        Ok(())
    }

    pub fn network_config(&self) -> Result<NetworkConfig> {
        let pop = ZipfPopularity::new(self.network.m, self.network.gamma_r)?;
        NetworkConfig::new(self.network.lambda, self.network.r_dd, pop, self.network.n)
    }

    /// The scenario with a parameter overridden, for sweep points.
    pub fn with_sweep_value(&self, param: SweepParam, value: f64) -> Self {
        let mut s = self.clone();
        match param {
            SweepParam::GammaR => s.network.gamma_r = value,
            SweepParam::RDd => s.network.r_dd = value,
            SweepParam::Lambda => s.network.lambda = value,
            SweepParam::N => s.network.n = value as usize,
        }
        s.sweep = None;
        s
    }
}
