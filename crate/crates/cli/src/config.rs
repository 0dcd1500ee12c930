//! Fully-resolved run configuration: defaults, then the TOML file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempered_causal::baseline::{BootstrapScheme, DEFAULT_MAX_ITER, DEFAULT_REPLICATES, DEFAULT_RIDGE, DEFAULT_TOL};
use tempered_causal::io::PanelSchema;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub alpha: f64,
    pub input: InputConfig,
    pub simulate: SimulateConfig,
    pub chain: ChainConfig,
    pub factor: FactorConfig,
    pub selection: SelectionConfig,
    pub fit: FitConfig,
    pub regression: RegressionConfig,
    pub baseline: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            seed: 1,
            alpha: 0.05,
            input: InputConfig::default(),
            simulate: SimulateConfig::default(),
            chain: ChainConfig::default(),
            factor: FactorConfig::default(),
            selection: SelectionConfig::default(),
            fit: FitConfig::default(),
            regression: RegressionConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Long-format panel file, or a cross-sectional table for `fit-regression`.
    pub path: Option<PathBuf>,
    pub schema: PanelSchema,
    /// Outcome columns evaluated one after another; empty means
    /// `schema.outcome` alone.
    pub outcomes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    Panel,
    CrossSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauKind {
    Constant,
    Ramp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub design: Design,
    pub n_units: usize,
    pub n_times: usize,
    pub k: usize,
    pub beta_u: f64,
    pub tau: TauKind,
    pub tau_base: f64,
    pub tau_slope: f64,
    /// Inclusive range of treatment starts; absent means
    /// `[round(0.4 T), round(0.95 T)]`.
    pub start_min: Option<usize>,
    pub start_max: Option<usize>,
    pub never_treated: usize,
    /// Cross-sectional sample size.
    pub n: usize,
    pub gamma: f64,
    pub tau_true: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            design: Design::Panel,
            n_units: 30,
            n_times: 100,
            k: 2,
            beta_u: 0.0,
            tau: TauKind::Constant,
            tau_base: 1.0,
            tau_slope: 0.0,
            start_min: None,
            start_max: None,
            never_treated: 0,
            n: 500,
            gamma: 0.0,
            tau_true: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burnin: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { iterations: tempered_causal::factor::DEFAULT_ITERATIONS, burnin: tempered_causal::factor::DEFAULT_BURNIN }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceKind {
    UnitSpecific,
    Shared,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorConfig {
    pub variance: VarianceKind,
    /// Noise variance when `variance = "fixed"`.
    pub sigma2: f64,
    pub loading_scale: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for FactorConfig {
    fn default() -> Self {
        Self { variance: VarianceKind::UnitSpecific, sigma2: 1.0, loading_scale: 1.0, a: 0.01, b: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub omega_grid: Vec<f64>,
    pub ks: Vec<usize>,
    pub pseudo_fraction: f64,
    pub tune_fraction: f64,
    pub start_min: Option<usize>,
    pub start_max: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            omega_grid: (1..=30).map(|j| j as f64 / 10.0).collect(),
            ks: vec![1, 2, 3],
            pseudo_fraction: 0.15,
            tune_fraction: 0.20,
            start_min: None,
            start_max: None,
        }
    }
}

/// Fixed `(K, ω)`; when either is absent `evaluate` and `compare` select
/// them first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub k: Option<usize>,
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    pub intercept: bool,
    /// Known noise variance; absent means it is sampled.
    pub sigma2: Option<f64>,
    pub prior_variance: f64,
    pub a0: f64,
    pub b0: f64,
    pub iterations: usize,
    pub burnin: usize,
    /// ω values fitted; with `tau_true` set the grid is scored and the
    /// minimizer reported.
    pub omegas: Vec<f64>,
    pub tau_true: Option<f64>,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            outcome: "y".into(),
            treatment: "d".into(),
            covariates: vec!["x1".into()],
            intercept: false,
            sigma2: None,
            prior_variance: 100.0,
            a0: 0.01,
            b0: 0.01,
            iterations: tempered_causal::regression::DEFAULT_ITERATIONS,
            burnin: tempered_causal::regression::DEFAULT_BURNIN,
            omegas: vec![1.0],
            tau_true: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub enabled: bool,
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub replicates: usize,
    pub scheme: BootstrapScheme,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            ridge: DEFAULT_RIDGE,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            replicates: DEFAULT_REPLICATES,
            scheme: BootstrapScheme::Predictive,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha {} must lie in (0, 1)", self.alpha);
        }
        if self.chain.iterations <= self.chain.burnin {
            bail!("chain.iterations must exceed chain.burnin");
        }
        if self.selection.omega_grid.is_empty() || self.selection.ks.is_empty() {
            bail!("selection grids must be non-empty");
        }
        if self.simulate.start_min.is_some() != self.simulate.start_max.is_some() {
            bail!("simulate.start_min and simulate.start_max go together");
        }
        if self.selection.start_min.is_some() != self.selection.start_max.is_some() {
            bail!("selection.start_min and selection.start_max go together");
        }
        Ok(())
    }

    pub fn outcomes(&self) -> Vec<String> {
        if self.input.outcomes.is_empty() {
            vec![self.input.schema.outcome.clone()]
        } else {
            self.input.outcomes.clone()
        }
    }
}
