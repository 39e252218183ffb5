//! Task-configuration files: which profile to load, which analyses to run
//! on it, and with what hyperparameters.
//!
//! The format is TOML; see `docs/task_config.md` for a complete commented
//! example. Paths inside a config resolve relative to the config file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::comparative::PairJoinKey;
use crate::ingest::ColumnSchema;
use crate::targets::{AlphaBuckets, TargetKind};

/// Ensemble and belief hyperparameters as exposed to configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub kappa: f64,
    pub tau: usize,
    pub draws: usize,
    pub gamma: f64,
    pub fidelity_epsilon: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            tau: 5,
            draws: 50_000,
            gamma: 1.0,
            fidelity_epsilon: 1e-6,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "kappa {} outside (0, 1]",
                self.kappa
            )));
        }
        if self.tau == 0 {
            return Err(ConfigError::Invalid("tau must be at least 1".into()));
        }
        if self.draws == 0 {
            return Err(ConfigError::Invalid("draws must be at least 1".into()));
        }
        if self.gamma <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "gamma {} must be positive",
                self.gamma
            )));
        }
        if self.fidelity_epsilon < 0.0 {
            return Err(ConfigError::Invalid(
                "fidelity_epsilon must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn merged_with(&self, over: &HyperOverride) -> HyperParams {
        HyperParams {
            kappa: over.kappa.unwrap_or(self.kappa),
            tau: over.tau.unwrap_or(self.tau),
            draws: over.draws.unwrap_or(self.draws),
            gamma: over.gamma.unwrap_or(self.gamma),
            fidelity_epsilon: over.fidelity_epsilon.unwrap_or(self.fidelity_epsilon),
        }
    }
}

/// Per-task partial override of the global hyperparameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperOverride {
    pub kappa: Option<f64>,
    pub tau: Option<usize>,
    pub draws: Option<usize>,
    pub gamma: Option<f64>,
    pub fidelity_epsilon: Option<f64>,
}

/// Kernel selection for a task: every kernel in the profile, or a list.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum KernelSelect {
    Keyword(String),
    List(Vec<String>),
}

impl Default for KernelSelect {
    fn default() -> Self {
        KernelSelect::Keyword("all".into())
    }
}

/// Row grouping for workload-averaged significance. Without a key the whole
/// selection is analyzed as one workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKey {
    Workload,
    WorkloadFrequency,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default)]
    pub kernels: KernelSelect,
    pub target: TargetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload_key: Option<WorkloadKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparams: Option<HyperOverride>,
}

/// One comparison, referencing two `task:kernel` endpoints.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    pub pair: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join: Option<PairJoinKey>,
}

/// Dominance cutoffs for the suggestion engine.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuggestionSettings {
    pub top_k: usize,
    pub threshold: f64,
}

impl Default for SuggestionSettings {
    fn default() -> Self {
        Self {
            top_k: crate::suggest::DEFAULT_TOP_K,
            threshold: crate::suggest::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Profile CSV, relative to the config file.
    pub data: PathBuf,
    /// Optional machine-model file; the built-in default is used otherwise.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Optional suggestion-rule file; built-in default otherwise.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Application label for reports; defaults to the data file stem.
    #[serde(default)]
    pub app: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub schema: ColumnSchema,
    #[serde(default)]
    pub hyperparams: HyperParams,
    #[serde(default)]
    pub alpha: AlphaBuckets,
    #[serde(default)]
    pub suggestions: SuggestionSettings,
    pub tasks: BTreeMap<String, TaskSpec>,
    #[serde(default)]
    pub comparisons: Vec<ComparisonSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("comparison references unknown task `{0}`")]
    UnknownTask(String),
    #[error("comparison endpoint `{0}` is not of the form task:kernel")]
    BadPairSpec(String),
    #[error("comparison `{a}` vs `{b}`: tasks use different targets")]
    TargetMismatch { a: String, b: String },
    #[error("comparison endpoint `{endpoint}`: kernel not listed in task `{task}`")]
    KernelNotInTask { endpoint: String, task: String },
}

/// A parsed `task:kernel` comparison endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub task: String,
    pub kernel: String,
}

pub fn parse_endpoint(spec: &str) -> Result<Endpoint, ConfigError> {
    match spec.split_once(':') {
        Some((task, kernel)) if !task.is_empty() && !kernel.is_empty() => Ok(Endpoint {
            task: task.to_string(),
            kernel: kernel.to_string(),
        }),
        _ => Err(ConfigError::BadPairSpec(spec.to_string())),
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() {
            return Err(ConfigError::Invalid("no tasks defined".into()));
        }
        self.hyperparams.validate()?;
        self.alpha
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.suggestions.top_k == 0 {
            return Err(ConfigError::Invalid(
                "suggestions.top_k must be at least 1".into(),
            ));
        }
        for (name, task) in &self.tasks {
            if let Some(over) = &task.hyperparams {
                self.hyperparams
                    .merged_with(over)
                    .validate()
                    .map_err(|e| ConfigError::Invalid(format!("task `{name}`: {e}")))?;
            }
            if let KernelSelect::Keyword(word) = &task.kernels {
                if word != "all" {
                    return Err(ConfigError::Invalid(format!(
                        "task `{name}`: kernels must be \"all\" or a list, got `{word}`"
                    )));
                }
            }
        }
        for comparison in &self.comparisons {
            let endpoints = [
                parse_endpoint(&comparison.pair[0])?,
                parse_endpoint(&comparison.pair[1])?,
            ];
            for (endpoint, raw) in endpoints.iter().zip(&comparison.pair) {
                let task = self
                    .tasks
                    .get(&endpoint.task)
                    .ok_or_else(|| ConfigError::UnknownTask(endpoint.task.clone()))?;
                if let KernelSelect::List(list) = &task.kernels {
                    if !list.contains(&endpoint.kernel) {
                        return Err(ConfigError::KernelNotInTask {
                            endpoint: raw.clone(),
                            task: endpoint.task.clone(),
                        });
                    }
                }
            }
            let t1 = &self.tasks[&endpoints[0].task].target;
            let t2 = &self.tasks[&endpoints[1].task].target;
            if t1 != t2 {
                return Err(ConfigError::TargetMismatch {
                    a: comparison.pair[0].clone(),
                    b: comparison.pair[1].clone(),
                });
            }
        }
        Ok(())
    }
}

/// Parses and validates a task configuration document.
pub fn load_task_config(text: &str) -> Result<TaskConfig, ConfigError> {
    let config: TaskConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}
