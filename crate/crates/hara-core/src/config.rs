//! Run configuration read from TOML.
//!
//! ```toml
//! [market]
//! r = 0.02
//! sigma = 0.2
//! T = 1.0
//!
//! [prior]
//! kind = "discrete"
//! atoms = [[0.2, 0.5], [0.6, 0.5]]
//!
//! [utility]
//! family = "power"
//! gamma = -1.0
//!
//! [eval]
//! t = [0.0, 0.5]
//! y = [-1.0, 0.0, 1.0]
//! x = [1.0]
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HaraError, Result};
use crate::numerics::QuadConfig;
use crate::policy::{EvalPoint, MarketParams, Model, Utility};
use crate::prior::Prior;
use crate::simulator::{SimConfig, Strategy, DEFAULT_TABLE_NODES};
use crate::verify::SuiteOptions;

/// Environment variable overriding both quadrature node counts.
pub const QUAD_NODES_ENV: &str = "HARA_QUAD_NODES";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    PointMass {
        theta: f64,
    },
    Discrete {
        atoms: Vec<[f64; 2]>,
    },
    Gaussian {
        mean: f64,
        std_dev: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<usize>,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
    TruncatedNormal {
        mean: f64,
        std_dev: f64,
        lower: f64,
        upper: f64,
    },
}

impl PriorSpec {
    pub fn build(&self, quad: &QuadConfig) -> Result<Prior> {
        match self {
            PriorSpec::PointMass { theta } => Prior::point_mass(*theta),
            PriorSpec::Discrete { atoms } => Prior::discrete(atoms.iter().map(|a| (a[0], a[1]))),
            PriorSpec::Gaussian {
                mean,
                std_dev,
                nodes,
            } => Prior::gaussian_with_nodes(*mean, *std_dev, nodes.unwrap_or(quad.theta_nodes)),
            PriorSpec::Uniform { lower, upper } => Prior::uniform(*lower, *upper),
            PriorSpec::TruncatedNormal {
                mean,
                std_dev,
                lower,
                upper,
            } => Prior::truncated_normal(*mean, *std_dev, *lower, *upper),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Power {
        gamma: f64,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default)]
        eta: f64,
    },
    Log {
        #[serde(default = "one")]
        beta: f64,
        #[serde(default)]
        eta: f64,
    },
    Exp {
        #[serde(default = "one")]
        beta: f64,
    },
}

impl UtilitySpec {
    pub fn build(&self) -> Result<Utility> {
        match *self {
            UtilitySpec::Power { gamma, beta, eta } => Utility::power(gamma, beta, eta),
            UtilitySpec::Log { beta, eta } => Utility::log(beta, eta),
            UtilitySpec::Exp { beta } => Utility::exp(beta),
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            UtilitySpec::Power { beta, .. }
            | UtilitySpec::Log { beta, .. }
            | UtilitySpec::Exp { beta } => beta,
        }
    }

    pub fn eta(&self) -> f64 {
        match *self {
            UtilitySpec::Power { eta, .. } | UtilitySpec::Log { eta, .. } => eta,
            UtilitySpec::Exp { .. } => 0.0,
        }
    }
}

/// Evaluation points: an explicit list plus the product grid `t × y × x`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<EvalPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub t: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub y: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub x: Vec<f64>,
    /// γ grid for sweeps and the verification suite.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gammas: Vec<f64>,
}

impl EvalSection {
    pub fn points(&self) -> Vec<EvalPoint> {
        let mut out = self.points.clone();
        let xs: &[f64] = if self.x.is_empty() { &[1.0] } else { &self.x };
        for &t in &self.t {
            for &y in &self.y {
                for &x in xs {
                    out.push(EvalPoint::new(t, x, y));
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Optimal,
    Myopic,
}

fn default_paths() -> usize {
    10_000
}
fn default_steps() -> usize {
    250
}
fn default_strategies() -> Vec<StrategyName> {
    vec![StrategyName::Optimal, StrategyName::Myopic]
}
fn default_table() -> usize {
    DEFAULT_TABLE_NODES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyName>,
    /// Fixed-θ Merton strategies to run alongside.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_merton: Vec<f64>,
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default = "default_table")]
    pub table_nodes: usize,
    /// Number of leading paths written to the per-path CSV.
    #[serde(default)]
    pub record_paths: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            n_paths: default_paths(),
            n_steps: default_steps(),
            seed: 0,
            strategies: default_strategies(),
            fixed_merton: Vec::new(),
            x0: 1.0,
            antithetic: false,
            table_nodes: default_table(),
            record_paths: 0,
        }
    }
}

fn default_precision() -> usize {
    12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths_csv: Option<String>,
    /// Significant digits of floating output.
    #[serde(default = "default_precision")]
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: None,
            paths_csv: None,
            precision: default_precision(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    pub prior: PriorSpec,
    pub utility: UtilitySpec,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HaraError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HaraError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HaraError::Config(e.to_string()))
    }

    /// Checks that every section builds into its library type.
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.quad.validate()?;
        self.prior()?;
        self.utility()?;
        if self.output.precision == 0 || self.output.precision > 17 {
            return Err(HaraError::param("output.precision", "must be in 1..=17"));
        }
        Ok(())
    }

    /// Applies a node-count override such as the value of
    /// [`QUAD_NODES_ENV`].
    pub fn apply_quad_override(&mut self, value: Option<&str>) -> Result<()> {
        let Some(v) = value else { return Ok(()) };
        let n: usize = v.trim().parse().map_err(|_| {
            HaraError::Config(format!("{QUAD_NODES_ENV}={v:?} is not a node count"))
        })?;
        self.quad.z_nodes = n;
        self.quad.theta_nodes = n;
        self.quad.validate()
    }

    pub fn prior(&self) -> Result<Prior> {
        self.prior.build(&self.quad)
    }

    pub fn utility(&self) -> Result<Utility> {
        self.utility.build()
    }

    pub fn model(&self) -> Result<Model> {
        Model::with_quad(self.prior()?, self.market, self.quad)
    }

    pub fn eval_points(&self) -> Vec<EvalPoint> {
        self.eval.points()
    }

    pub fn suite_options(&self) -> SuiteOptions {
        let defaults = SuiteOptions::default();
        let points = self.eval_points();
        SuiteOptions {
            points: if points.is_empty() {
                defaults.points
            } else {
                points
            },
            gammas: if self.eval.gammas.is_empty() {
                defaults.gammas
            } else {
                self.eval.gammas.clone()
            },
            beta: self.utility.beta(),
            eta: self.utility.eta(),
        }
    }

    pub fn sim_config(&self, seed: Option<u64>) -> Result<SimConfig> {
        let mut strategies: Vec<Strategy> = self
            .sim
            .strategies
            .iter()
            .map(|s| match s {
                StrategyName::Optimal => Strategy::Optimal,
                StrategyName::Myopic => Strategy::Myopic,
            })
            .collect();
        strategies.extend(
            self.sim
                .fixed_merton
                .iter()
                .map(|&t| Strategy::FixedMerton(t)),
        );
        let cfg = SimConfig {
            n_paths: self.sim.n_paths,
            n_steps: self.sim.n_steps,
            seed: seed.unwrap_or(self.sim.seed),
            strategies,
            utility: self.utility()?,
            prior: self.prior()?,
            market: self.market,
            x0: self.sim.x0,
            antithetic: self.sim.antithetic,
            quad: self.quad,
            table_nodes: self.sim.table_nodes,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
