//! Run configuration, read from a TOML file.
//!
//! Without a file the configuration describes the 40-node, two-cluster
//! simulation design (terms edges, gwesp decay 0.25 and nodematch on `X`;
//! 17500 iterations with 7500 burn-in; prior mean (-1, 0, 0)). Inside a file
//! every omitted field takes its generic default instead, which for the prior
//! mean means the zero vector (or the log expected degree on the edges entry
//! when the size offset is on).
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! terms = ["edges", "gwesp decay=0.25", "mix attr=party levels=D,R"]
//! size_offset = true
//!
//! [fit]
//! k_min = 1
//! k_max = 4
//! total_iterations = 80000
//! burn_in = 30000
//! thin = 50
//! init = "random"          # or "mple_kmeans"
//!
//! [prior]
//! alpha = 3.0
//! psi = 25.0
//! proposal_sd = 0.05
//! expected_degree = 8.0    # or mu = [..] to set the mean directly
//! ```
//!
//! Relative paths are resolved against the working directory.

use std::path::{Path, PathBuf};

use mixergm::engine::SamplerConfig;
use mixergm::metrics::{GraphMetric, DEFAULT_HELLINGER_BINS};
use mixergm::selection::DEFAULT_EPSILON;
use mixergm::{ChainConfig, InitStrategy, ModelSpec, PriorSpec, Proposal, Term};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub select: SelectConfig,
    #[serde(default)]
    pub ppc: PpcConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            model: ModelConfig::default(),
            fit: FitConfig::default(),
            prior: PriorConfig {
                mu: Some(vec![-1.0, 0.0, 0.0]),
                ..PriorConfig::default()
            },
            select: SelectConfig::default(),
            ppc: PpcConfig::default(),
            simulate: SimulateConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub terms: Vec<String>,
    pub size_offset: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            terms: vec!["edges".into(), "gwesp decay=0.25".into(), "nodematch attr=X".into()],
            size_offset: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Random,
    MpleKmeans,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub init: InitKind,
    pub edges_anchor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k_min: 1,
            k_max: 3,
            total_iterations: 17_500,
            burn_in: 7_500,
            thin: ChainConfig::DEFAULT_THIN,
            init: InitKind::Random,
            edges_anchor: InitStrategy::DEFAULT_EDGES_ANCHOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub alpha: f64,
    pub mu: Option<Vec<f64>>,
    pub psi: f64,
    pub proposal_sd: f64,
    pub expected_degree: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            alpha: PriorSpec::DEFAULT_ALPHA,
            mu: None,
            psi: PriorSpec::DEFAULT_PSI,
            proposal_sd: PriorSpec::DEFAULT_PROPOSAL_SD,
            expected_degree: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub epsilon: f64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    TieNoTie,
    UniformDyad,
}

/// Graph-simulation settings; unset values scale with the node count.
#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub burn_in: Option<usize>,
    pub interval: Option<usize>,
    pub proposal: Option<ProposalKind>,
}

impl SamplerSettings {
    pub fn for_nodes(&self, n: usize) -> SamplerConfig {
        let base = SamplerConfig::for_nodes(n);
        SamplerConfig {
            burn_in: self.burn_in.unwrap_or(base.burn_in),
            interval: self.interval.unwrap_or(base.interval),
            proposal: match self.proposal {
                Some(ProposalKind::UniformDyad) => Proposal::UniformDyad,
                Some(ProposalKind::TieNoTie) => Proposal::TieNoTie,
                None => base.proposal,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpcConfig {
    /// Predictive replicates of the whole ensemble.
    pub replicates: usize,
    pub metrics: Vec<String>,
    pub bins: usize,
    /// Node attribute giving the partition for modularity; no modularity
    /// column when unset.
    pub partition_attr: Option<String>,
    pub sampler: SamplerSettings,
}

impl Default for PpcConfig {
    fn default() -> Self {
        PpcConfig {
            replicates: 10,
            metrics: GraphMetric::ALL.iter().map(|m| m.name().to_string()).collect(),
            bins: DEFAULT_HELLINGER_BINS,
            partition_attr: None,
            sampler: SamplerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub nodes: usize,
    /// Binary covariate name; the first half of the nodes take value 0.
    pub covariate: String,
    /// One parameter row per cluster.
    pub thetas: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<usize>,
    pub sampler: SamplerSettings,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            nodes: 40,
            covariate: "X".into(),
            thetas: vec![vec![-1.15, 0.0, 0.0], vec![-2.85, 0.25, 2.25]],
            cluster_sizes: vec![10, 10],
            sampler: SamplerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Ensemble manifest to fit; defaults to `<out>/data/manifest.csv`.
    pub ensemble: Option<PathBuf>,
    /// Ground-truth labels, if known; defaults to `<out>/data/truth.csv`
    /// when that file exists.
    pub truth: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let terms = self
            .model
            .terms
            .iter()
            .map(|t| t.parse::<Term>())
            .collect::<mixergm::Result<Vec<_>>>()?;
        Ok(ModelSpec::new(terms, self.model.size_offset)?)
    }

    pub fn prior(&self, k: usize, spec: &ModelSpec) -> Result<PriorSpec> {
        let mut prior = PriorSpec::defaults(k, spec, self.prior.expected_degree);
        prior.alpha = vec![self.prior.alpha; k];
        prior.psi_diag = vec![self.prior.psi; spec.dim()];
        prior.proposal_sd = self.prior.proposal_sd;
        if let Some(mu) = &self.prior.mu {
            if mu.len() != spec.dim() {
                return Err(CliError::config(format!(
                    "prior mean has {} entries but the model has {} terms",
                    mu.len(),
                    spec.dim()
                )));
            }
            prior.mu = mu.clone();
        }
        prior.validate(k, spec.dim())?;
        Ok(prior)
    }

    pub fn chain(&self, seed: u64) -> Result<ChainConfig> {
        let config = ChainConfig {
            total_iterations: self.fit.total_iterations,
            burn_in: self.fit.burn_in,
            thin: self.fit.thin,
            init: match self.fit.init {
                InitKind::Random => InitStrategy::Random {
                    edges_anchor: self.fit.edges_anchor,
                },
                InitKind::MpleKmeans => InitStrategy::MpleKmeans,
            },
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn k_range(&self) -> Result<std::ops::RangeInclusive<usize>> {
        let (lo, hi) = (self.fit.k_min, self.fit.k_max);
        if lo < 1 || hi < lo {
            return Err(CliError::config(format!("invalid K range [{lo}, {hi}]")));
        }
        Ok(lo..=hi)
    }

    pub fn metrics(&self) -> Result<Vec<GraphMetric>> {
        Ok(self
            .ppc
            .metrics
            .iter()
            .map(|m| m.parse())
            .collect::<mixergm::Result<Vec<_>>>()?)
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        let spec = self.model_spec()?;
        self.k_range()?;
        self.chain(self.seed)?;
        self.prior(self.fit.k_max.max(1), &spec)?;
        self.metrics()?;
        if self.ppc.bins < 2 {
            return Err(CliError::config("ppc.bins must be at least 2"));
        }
        if self.select.epsilon.is_nan() {
            return Err(CliError::config("select.epsilon is NaN"));
        }
        Ok(())
    }
}
