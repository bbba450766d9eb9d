//! Experiment configuration: one JSON document describing the
//! environment source, simulator and agent parameters, the steps grid,
//! episode counts, seeds, methods and output location.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentConfig;
use crate::error::{Error, Result};
use crate::graph_gen::PipelineConfig;
use crate::student_sim::SimConfig;

use super::synthetic::SyntheticGraphSpec;

pub const METHOD_FULL: &str = "full";
pub const METHOD_NO_S: &str = "no_s";
pub const METHOD_RANDOM: &str = "random";
pub const METHOD_PREREQ_GREEDY: &str = "prereq_greedy";

pub fn known_methods() -> [&'static str; 4] {
    [METHOD_FULL, METHOD_NO_S, METHOD_RANDOM, METHOD_PREREQ_GREEDY]
}

/// Where the concept graph (and exercise bank) comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphSource {
    /// Graph JSON on disk; exercises JSON optional (a default bank is
    /// synthesized when absent).
    File {
        path: PathBuf,
        #[serde(default)]
        exercises: Option<PathBuf>,
    },
    /// Layered synthetic generator.
    Synthetic { spec: SyntheticGraphSpec },
    /// Generation pipeline against the stub backend driven by a planted
    /// ontology file.
    Pipeline {
        ontology: PathBuf,
        #[serde(default)]
        pipeline: PipelineConfig,
    },
}

impl Default for GraphSource {
    fn default() -> Self {
        GraphSource::Synthetic {
            spec: SyntheticGraphSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub graph: GraphSource,
    pub sim: SimConfig,
    pub agent: AgentConfig,
    /// Episode budgets to sweep.
    pub steps: Vec<usize>,
    /// Evaluation episodes per report cell (distributed over seeds).
    pub eval_episodes: usize,
    pub train_episodes: usize,
    pub methods: Vec<String>,
    /// Method whose per-episode results anchor the paired tests.
    pub reference: String,
    pub output_dir: PathBuf,
    pub permutation_resamples: usize,
    /// Exercises per concept for synthesized default banks.
    pub default_exercises_per_kc: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![7],
            graph: GraphSource::default(),
            sim: SimConfig::default(),
            agent: AgentConfig::default(),
            steps: vec![5, 10, 15, 20],
            eval_episodes: 200,
            train_episodes: 2000,
            methods: known_methods().iter().map(|m| m.to_string()).collect(),
            reference: METHOD_FULL.to_string(),
            output_dir: PathBuf::from("out"),
            permutation_resamples: 10_000,
            default_exercises_per_kc: 4,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid_config("seeds must be non-empty"));
        }
        if self.steps.is_empty() || self.steps.iter().any(|&s| s == 0) {
            return Err(Error::invalid_config("steps must be non-empty and positive"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::invalid_config("eval_episodes must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid_config("methods must be non-empty"));
        }
        for method in &self.methods {
            if !known_methods().contains(&method.as_str()) {
                return Err(Error::invalid_config(format!(
                    "unknown method {method:?}; known: {:?}",
                    known_methods()
                )));
            }
        }
        if !self.methods.contains(&self.reference) {
            return Err(Error::invalid_config(format!(
                "reference {:?} is not among methods {:?}",
                self.reference, self.methods
            )));
        }
        self.sim.validate()?;
        self.agent.validate()?;
        if let GraphSource::Synthetic { spec } = &self.graph {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Ingest(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, for report provenance. The
    /// output directory is excluded: where a report lands is not part
    /// of the experiment's content.
    pub fn content_hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_string(&canonical)?.as_bytes());
        Ok(format!("{digest:x}"))
    }

    pub fn base_seed(&self) -> u64 {
        self.seeds[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_method_and_bad_reference_are_rejected() {
        let mut config = ExperimentConfig {
            methods: vec!["telepathy".into()],
            ..ExperimentConfig::default()
        };
        assert!(config.validate().is_err());
        config.methods = vec![METHOD_RANDOM.to_string()];
        config.reference = METHOD_FULL.to_string();
        assert!(config.validate().is_err());
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        assert_eq!(a.content_hash().unwrap(), b.content_hash().unwrap());
        b.eval_episodes = 10;
        assert_ne!(a.content_hash().unwrap(), b.content_hash().unwrap());
    }

    #[test]
    fn config_json_round_trips() {
        let config = ExperimentConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        config.save_json(&path).unwrap();
        let back = ExperimentConfig::load_json(&path).unwrap();
        assert_eq!(config, back);
    }
}
