//! Run configuration: file keys, flag overrides and defaults.

use std::path::Path;

use bfmix_core::model::{BnbPrior, ChainConfig, GammaSpec, KPrior};
use bfmix_core::sampler::SamplerMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Gibbs sampling with a fixed number of components.
    FixedK,
    /// Sparse finite mixture: large K, small fixed γ.
    Sfm,
    /// Mixture of finite mixtures with a BNB prior on K, telescoping sampler.
    Mfm,
}

/// Every key is optional; absent keys fall back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub mode: Option<Mode>,
    pub k: Option<usize>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub bnb: Option<[f64; 3]>,
    pub k_max: Option<usize>,
    pub c: Option<f64>,
    pub phi: Option<f64>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub store_assignments: Option<bool>,
    pub permute: Option<bool>,
    pub columns: Option<Vec<String>>,
    pub label_col: Option<String>,
}

impl PartialConfig {
    /// Keys set in `self` win over keys in `base`.
    pub fn over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            mode: self.mode.or(base.mode),
            k: self.k.or(base.k),
            gamma: self.gamma.or(base.gamma),
            alpha: self.alpha.or(base.alpha),
            bnb: self.bnb.or(base.bnb),
            k_max: self.k_max.or(base.k_max),
            c: self.c.or(base.c),
            phi: self.phi.or(base.phi),
            iters: self.iters.or(base.iters),
            burnin: self.burnin.or(base.burnin),
            thin: self.thin.or(base.thin),
            seed: self.seed.or(base.seed),
            chains: self.chains.or(base.chains),
            store_assignments: self.store_assignments.or(base.store_assignments),
            permute: self.permute.or(base.permute),
            columns: self.columns.or(base.columns),
            label_col: self.label_col.or(base.label_col),
        }
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let mode = self.mode.unwrap_or(Mode::FixedK);
        let k = self.k.unwrap_or(match mode {
            Mode::FixedK => 3,
            Mode::Sfm | Mode::Mfm => 10,
        });
        let gamma = match mode {
            Mode::FixedK => Some(self.gamma.unwrap_or(1.0)),
            Mode::Sfm => Some(self.gamma.unwrap_or(0.01)),
            Mode::Mfm => None,
        };
        if mode == Mode::Mfm && self.gamma.is_some() {
            return Err(CliError::config(
                "--gamma does not apply to mfm; set --alpha for γ_K = α/K",
            ));
        }
        let cfg = RunConfig {
            mode,
            k,
            gamma,
            alpha: (mode == Mode::Mfm).then(|| self.alpha.unwrap_or(0.5)),
            bnb: (mode == Mode::Mfm).then(|| self.bnb.unwrap_or([1.0, 4.0, 3.0])),
            k_max: (mode == Mode::Mfm).then(|| self.k_max.unwrap_or(100)),
            c: self.c.unwrap_or(2.5),
            phi: self.phi.unwrap_or(0.75),
            iters: self.iters.unwrap_or(30_000),
            burnin: self.burnin.unwrap_or(5_000),
            thin: self.thin.unwrap_or(1),
            seed: self.seed.unwrap_or(1),
            chains: self.chains.unwrap_or(1),
            store_assignments: self.store_assignments.unwrap_or(false),
            permute: self.permute.unwrap_or(false),
            columns: self.columns,
            label_col: self.label_col,
        };
        cfg.check()?;
        Ok(cfg)
    }
}

/// Fully resolved configuration, echoed into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    /// Components for fixed-k and sfm, initial K for mfm.
    pub k: usize,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub bnb: Option<[f64; 3]>,
    pub k_max: Option<usize>,
    pub c: f64,
    pub phi: f64,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub store_assignments: bool,
    pub permute: bool,
    pub columns: Option<Vec<String>>,
    pub label_col: Option<String>,
}

impl RunConfig {
    fn check(&self) -> Result<(), CliError> {
        if self.k == 0 {
            return Err(CliError::config("K must be at least 1"));
        }
        if self.chains == 0 {
            return Err(CliError::config("--chains must be at least 1"));
        }
        if !(self.c > 0.0 && self.phi > 0.0) {
            return Err(CliError::config("c and phi must be positive"));
        }
        if let Some(k_max) = self.k_max {
            if self.k > k_max {
                return Err(CliError::config(format!(
                    "initial K = {} exceeds k_max = {k_max}",
                    self.k
                )));
            }
        }
        self.chain_config()
            .validate()
            .map_err(|e| CliError::config(e.to_string()))
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_iter: self.iters,
            burn_in: self.burnin,
            seed: self.seed,
            store_assignments: self.store_assignments,
            permutation_step: self.permute,
            thinning: self.thin,
        }
    }

    pub fn sampler_mode(&self) -> SamplerMode {
        match self.mode {
            Mode::FixedK => SamplerMode::FixedK,
            Mode::Sfm => SamplerMode::Sparse,
            Mode::Mfm => SamplerMode::Telescoping { initial_k: self.k },
        }
    }

    pub fn gamma_spec(&self) -> GammaSpec {
        match (self.gamma, self.alpha) {
            (Some(gamma), _) => GammaSpec::Fixed { gamma },
            (None, alpha) => GammaSpec::Dynamic {
                alpha: alpha.unwrap_or(0.5),
            },
        }
    }

    pub fn k_prior(&self) -> KPrior {
        match self.mode {
            Mode::FixedK => KPrior::Fixed { k: self.k },
            Mode::Sfm => KPrior::Sparse { k: self.k },
            Mode::Mfm => {
                let [a_l, a_pi, b_pi] = self.bnb.unwrap_or([1.0, 4.0, 3.0]);
                KPrior::Random {
                    bnb: BnbPrior { a_l, a_pi, b_pi },
                    k_max: self.k_max.unwrap_or(100),
                }
            }
        }
    }
}

impl From<RunConfig> for PartialConfig {
    fn from(c: RunConfig) -> Self {
        PartialConfig {
            mode: Some(c.mode),
            k: Some(c.k),
            gamma: c.gamma,
            alpha: c.alpha,
            bnb: c.bnb,
            k_max: c.k_max,
            c: Some(c.c),
            phi: Some(c.phi),
            iters: Some(c.iters),
            burnin: Some(c.burnin),
            thin: Some(c.thin),
            seed: Some(c.seed),
            chains: Some(c.chains),
            store_assignments: Some(c.store_assignments),
            permute: Some(c.permute),
            columns: c.columns,
            label_col: c.label_col,
        }
    }
}

/// Read a TOML or JSON config file. A run manifest is accepted too; its
/// echoed configuration is used.
pub fn load(path: &Path) -> Result<PartialConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| CliError::config(format!("{}: {e}", path.display()));
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        if let Some(inner) = v.get_mut("config") {
            v = inner.take();
        }
        serde_json::from_value(v).map_err(|e| bad(&e))
    } else {
        toml::from_str(&text).map_err(|e| bad(&e))
    }
}
