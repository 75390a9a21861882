//! Experiment configuration file.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use rlmeta::benchfn::{lookup_id, registry_list, FunctionId};
use rlmeta::env::{Algorithm, RunSettings, TEST_RUNS};
use rlmeta::observe::ObservationSpec;
use rlmeta::policy::ActionKind;
use rlmeta::ppo::PpoConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment name, used as a directory component for outputs.
    pub name: String,
    pub seed: u64,
    pub action: ActionKind,
    /// Training episodes (one episode = one full run).
    pub episodes: usize,
    /// Extra training attempts after numerical instability, each with the
    /// next seed.
    pub retries: usize,
    /// `Name:dim` entries; empty means the whole registry.
    pub functions: Vec<String>,
    pub observation: ObservationSpec,
    pub run: RunSettings,
    pub ppo: PpoConfig,
    pub test: TestSettings,
    pub fixed: FixedParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSettings {
    pub runs: usize,
    /// First seed of the test protocol; run i uses `seed + i`.
    pub seed: u64,
    pub write_traces: bool,
}

impl Default for TestSettings {
    fn default() -> Self {
        Self { runs: TEST_RUNS, seed: 1000, write_traces: true }
    }
}

/// Parameters of the `fixed` controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedParams {
    pub f: f64,
    pub cr: f64,
    pub sigma: f64,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self { f: 0.5, cr: 0.9, sigma: 0.5 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            action: ActionKind::DeUniform,
            episodes: 5000,
            retries: 3,
            functions: Vec::new(),
            observation: ObservationSpec::default(),
            run: RunSettings::default(),
            ppo: PpoConfig::default(),
            test: TestSettings::default(),
            fixed: FixedParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("name must be a non-empty single path component");
        }
        if self.episodes == 0 {
            bail!("episodes must be positive");
        }
        if self.test.runs == 0 {
            bail!("test.runs must be positive");
        }
        if self.observation.history_length == 0 {
            bail!("observation.history_length must be at least 1");
        }
        self.run.validate()?;
        self.ppo.validate()?;
        self.function_ids()?;
        Ok(())
    }

    /// Resolved function set, checked against the registry.
    pub fn function_ids(&self) -> anyhow::Result<Vec<FunctionId>> {
        if self.functions.is_empty() {
            return Ok(registry_list());
        }
        self.functions
            .iter()
            .map(|s| {
                let id: FunctionId = s.parse()?;
                lookup_id::<f64>(&id)?;
                Ok(id)
            })
            .collect()
    }

    pub fn algorithm(&self) -> Algorithm {
        Algorithm::for_action(self.action)
    }
}
