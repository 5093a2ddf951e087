//! Experiment configuration files.
//!
//! A configuration file is TOML with one experiment per top-level table.
//! Every key inside a table is a scalar (or a two-element array for
//! `correlation_bins`); experiments run in file order.
//!
//! ```toml
//! [bonus-ge09]
//! env = "bridge"
//! k = 5
//! agent = "egreedy-bonus"
//! gamma_e = 0.9
//! trials = 50
//! ```

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::agent::{AgentKind, AgentParams};
use crate::env::{make_bridge, make_cliff, make_tree, MountainCarEnv};
use crate::error::{config_err, Error, Result};
use crate::mdp::TabularMdp;
use crate::select::StochasticRule;

pub const ENV_NAMES: [&str; 4] = ["bridge", "tree", "cliff", "mountaincar"];

const DEFAULT_TRIALS: usize = 50;
const DEFAULT_MAX_STEPS: usize = 1_000_000;
const MOUNTAIN_CAR_GAMMA: f64 = 0.99;
const MOUNTAIN_CAR_BETA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvSpec {
    Bridge { k: usize, normalized: bool },
    Tree { k: usize },
    Cliff { height: usize, width: usize },
    MountainCar,
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Bridge { .. } => "bridge",
            EnvSpec::Tree { .. } => "tree",
            EnvSpec::Cliff { .. } => "cliff",
            EnvSpec::MountainCar => "mountaincar",
        }
    }

    pub fn is_tabular(&self) -> bool {
        !matches!(self, EnvSpec::MountainCar)
    }

    /// Builds the tabular MDP; continuous environments are unsupported.
    pub fn tabular(&self) -> Result<TabularMdp> {
        match *self {
            EnvSpec::Bridge { k, normalized } => make_bridge(k, normalized),
            EnvSpec::Tree { k } => make_tree(k),
            EnvSpec::Cliff { height, width } => make_cliff(height, width),
            EnvSpec::MountainCar => Err(Error::Unsupported(
                "oracle requires tabular environment".into(),
            )),
        }
    }

    fn default_episodes(&self) -> usize {
        match *self {
            EnvSpec::Bridge { k, .. } if k >= 15 => 4000,
            _ => 1000,
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::Bridge { k, normalized } => {
                write!(f, "bridge(k={k}{})", if *normalized { ", normalized" } else { "" })
            }
            EnvSpec::Tree { k } => write!(f, "tree(k={k})"),
            EnvSpec::Cliff { height, width } => write!(f, "cliff({height}x{width})"),
            EnvSpec::MountainCar => f.write_str("mountaincar"),
        }
    }
}

/// One fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvSpec,
    pub agent: AgentKind,
    pub params: AgentParams,
    /// Discount of the task; `None` keeps the environment's own.
    pub gamma: Option<f64>,
    pub episodes: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// Metric rows are written every `eval_every` episodes.
    pub eval_every: usize,
    /// Table or weight snapshots of the first trial every this many episodes.
    pub snapshot_every: Option<usize>,
    /// Truncation guard for tabular episodes.
    pub max_steps: usize,
    /// Record convergence-versus-counter rows for the first trial.
    pub fig6: bool,
    /// Run the visit-count correlation analysis on the first trial.
    pub correlation: bool,
    pub correlation_bins: (usize, usize),
    pub correlation_samples: usize,
    /// File stem for outputs.
    pub out: String,
}

impl ExperimentConfig {
    /// A config with every default filled in.
    pub fn new(name: impl Into<String>, env: EnvSpec, agent: AgentKind) -> Self {
        let name = name.into();
        let mut params = AgentParams::default();
        if !env.is_tabular() {
            params.beta = MOUNTAIN_CAR_BETA;
        }
        Self {
            out: name.clone(),
            name,
            env,
            agent,
            params,
            gamma: (!env.is_tabular()).then_some(MOUNTAIN_CAR_GAMMA),
            episodes: env.default_episodes(),
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            eval_every: 1,
            snapshot_every: None,
            max_steps: DEFAULT_MAX_STEPS,
            fig6: false,
            correlation: false,
            correlation_bins: (20, 20),
            correlation_samples: 1000,
        }
    }

    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    /// Tabular MDP with the configured discount applied.
    pub fn tabular_mdp(&self) -> Result<TabularMdp> {
        let mdp = self.env.tabular()?;
        match self.gamma {
            Some(g) => mdp.with_discount(g),
            None => Ok(mdp),
        }
    }

    pub fn mountain_car(&self) -> MountainCarEnv {
        MountainCarEnv::default()
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: String| Error::Config(format!("[{}] {msg}", self.name));
        if self.trials < 1 {
            return Err(ctx("trials must be at least 1".into()));
        }
        if self.episodes < 1 {
            return Err(ctx("episodes must be at least 1".into()));
        }
        if self.eval_every < 1 || self.snapshot_every == Some(0) {
            return Err(ctx("cadences must be at least 1".into()));
        }
        if self.max_steps < 1 {
            return Err(ctx("max_steps must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(ctx(format!("gamma must lie in [0, 1), got {g}")));
            }
        }
        let p = &self.params;
        if !(p.alpha > 0.0 && p.alpha <= 1.0) || !(p.alpha_e > 0.0 && p.alpha_e < 1.0) {
            return Err(ctx("alpha must lie in (0, 1] and alpha_e in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&p.gamma_e) {
            return Err(ctx(format!("gamma_e must lie in [0, 1), got {}", p.gamma_e)));
        }
        StochasticRule::epsilon_greedy(p.epsilon).map_err(|e| ctx(e.to_string()))?;
        StochasticRule::softmax(p.temperature).map_err(|e| ctx(e.to_string()))?;
        if self.env.is_tabular() {
            if self.correlation {
                return Err(ctx("correlation analysis needs mountaincar".into()));
            }
        } else {
            if self.agent.uses_counters() || self.agent == AgentKind::DelayedQ {
                return Err(ctx(format!(
                    "agent '{}' needs a tabular environment",
                    self.agent
                )));
            }
            if self.fig6 {
                return Err(ctx("fig6 rows need a tabular environment".into()));
            }
        }
        if self.correlation && self.snapshot_every.is_none() {
            return Err(ctx("correlation needs snapshot_every".into()));
        }
        if self.correlation_bins.0 < 1 || self.correlation_bins.1 < 1 {
            return Err(ctx("correlation_bins must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSection {
    env: String,
    agent: String,
    k: Option<usize>,
    normalized: Option<bool>,
    height: Option<usize>,
    width: Option<usize>,
    alpha: Option<f64>,
    alpha_e: Option<f64>,
    gamma: Option<f64>,
    gamma_e: Option<f64>,
    epsilon: Option<f64>,
    temperature: Option<f64>,
    beta: Option<f64>,
    m: Option<u32>,
    epsilon1: Option<f64>,
    episodes: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    eval_every: Option<usize>,
    snapshot_every: Option<usize>,
    max_steps: Option<usize>,
    fig6: Option<bool>,
    correlation: Option<bool>,
    correlation_bins: Option<[usize; 2]>,
    correlation_samples: Option<usize>,
    out: Option<String>,
}

impl RawSection {
    fn resolve(self, name: &str) -> Result<ExperimentConfig> {
        let env = match self.env.as_str() {
            "bridge" => EnvSpec::Bridge {
                k: self.k.unwrap_or(5),
                normalized: self.normalized.unwrap_or(false),
            },
            "tree" => EnvSpec::Tree {
                k: self.k.unwrap_or(4),
            },
            "cliff" => EnvSpec::Cliff {
                height: self.height.unwrap_or(4),
                width: self.width.unwrap_or(12),
            },
            "mountaincar" => EnvSpec::MountainCar,
            other => {
                return config_err(format!(
                    "[{name}] unknown environment '{other}'; valid environments: {}",
                    ENV_NAMES.join(", ")
                ))
            }
        };
        let agent: AgentKind = self
            .agent
            .parse()
            .map_err(|e: Error| Error::Config(format!("[{name}] {e}")))?;
        let mut cfg = ExperimentConfig::new(name, env, agent);
        let p = &mut cfg.params;
        if let Some(a) = self.alpha {
            p.alpha = a;
            p.alpha_e = a;
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            alpha_e => p.alpha_e,
            gamma_e => p.gamma_e,
            epsilon => p.epsilon,
            temperature => p.temperature,
            beta => p.beta,
            m => p.m,
            epsilon1 => p.epsilon1,
            episodes => cfg.episodes,
            trials => cfg.trials,
            seed => cfg.base_seed,
            eval_every => cfg.eval_every,
            max_steps => cfg.max_steps,
            fig6 => cfg.fig6,
            correlation => cfg.correlation,
            correlation_samples => cfg.correlation_samples,
            out => cfg.out,
        }
        if let Some(g) = self.gamma {
            cfg.gamma = Some(g);
        }
        if let Some(s) = self.snapshot_every {
            cfg.snapshot_every = Some(s);
        }
        if let Some([p, v]) = self.correlation_bins {
            cfg.correlation_bins = (p, v);
        }
        if cfg.correlation && cfg.snapshot_every.is_none() {
            cfg.snapshot_every = Some(10);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses every experiment in a configuration document, in file order.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(table.len());
    for (name, value) in table {
        if !value.is_table() {
            return config_err(format!(
                "top-level key '{name}' must be an experiment table"
            ));
        }
        let raw: RawSection = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("[{name}] {}", e.message())))?;
        out.push(raw.resolve(&name)?);
    }
    if out.is_empty() {
        return config_err("configuration defines no experiments");
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<ExperimentConfig>> {
    parse_config(&std::fs::read_to_string(path)?)
}
