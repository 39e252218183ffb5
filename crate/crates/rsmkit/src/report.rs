//! The canonical JSON report model.
//!
//! `report.json` is the single source of truth for every number the SVG
//! views draw. All maps are ordered and no timestamps are included, so two
//! runs over identical inputs serialize byte-identically; volatile metadata
//! goes to the `run_meta.json` side file instead. The shipped schema lives
//! at `schemas/report.schema.json`.

use std::collections::BTreeMap;

use crate::config::HyperParams;
use crate::suggest::{ExpectedImprovement, FiredRule};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Report {
    pub app: String,
    pub seed: u64,
    /// Global hyperparameters after CLI overrides; per-task values may
    /// differ and are recorded on each task.
    pub hyperparams: HyperParams,
    pub alpha: AlphaOut,
    pub suggestion_settings: SuggestionSettingsOut,
    /// Group names of the active machine model, in model order.
    pub model_groups: Vec<String>,
    pub tasks: BTreeMap<String, TaskReport>,
    pub comparisons: BTreeMap<String, ComparisonReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlphaOut {
    pub low: f64,
    pub moderate: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SuggestionSettingsOut {
    pub top_k: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TaskReport {
    pub target: String,
    pub hyperparams: HyperParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workload_key: Option<String>,
    pub kernels: BTreeMap<String, KernelReport>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelReport {
    /// Dictionary rows after replicate averaging.
    pub rows: usize,
    /// Event columns that entered the analysis (exclusions removed).
    pub events_analyzed: usize,
    pub target_normalization: TargetNormalizationOut,
    /// Events excluded by the machine model (e.g. hit counters).
    pub excluded_events: Vec<String>,
    /// Events the model could not place; they still participate under the
    /// UNCAT pseudo-group.
    pub uncategorized_events: Vec<String>,
    /// Events that were constant in every analyzed row subset; they carry
    /// belief zero by convention.
    pub dropped_constant_events: Vec<String>,
    pub resources: BTreeMap<String, ResourceEntry>,
    pub events: BTreeMap<String, EventEntry>,
    /// Per-workload unnormalized significance, present when the task set a
    /// workload key.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workloads: Option<BTreeMap<String, BTreeMap<String, f64>>>,
    pub suggestions: Vec<SuggestionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResourceEntry {
    /// Workload-averaged significance in [0, 1].
    pub rsm: f64,
    /// Per-kernel normalized share; sums to one across resources.
    pub rsm_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EventEntry {
    pub group: String,
    pub belief: f64,
    pub selection_frequency: f64,
    pub avg_coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetNormalizationOut {
    None,
    MaxDivide { max: f64 },
    MinMax { min: f64, max: f64 },
}

impl From<crate::targets::Normalization> for TargetNormalizationOut {
    fn from(n: crate::targets::Normalization) -> Self {
        match n {
            crate::targets::Normalization::None => Self::None,
            crate::targets::Normalization::MaxDivide { max } => Self::MaxDivide { max },
            crate::targets::Normalization::MinMax { min, max } => Self::MinMax { min, max },
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SuggestionEntry {
    pub rule: String,
    pub matched_groups: Vec<String>,
    pub matched_rsm: Vec<f64>,
    pub max_rsm: f64,
    pub tuning_opportunity: String,
    pub transformation: String,
    pub expected_primary: ExpectedImprovement,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_secondary: Option<ExpectedImprovement>,
}

impl From<FiredRule> for SuggestionEntry {
    fn from(f: FiredRule) -> Self {
        Self {
            rule: f.rule_id,
            matched_groups: f.matched_groups,
            matched_rsm: f.matched_rsm,
            max_rsm: f.max_rsm,
            tuning_opportunity: f.tuning_opportunity,
            transformation: f.transformation,
            expected_primary: f.expected_primary,
            expected_secondary: f.expected_secondary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonReport {
    pub pair: [String; 2],
    pub join: String,
    pub rows_matched: usize,
    pub dropped_rows: Vec<String>,
    pub dropped_columns: Vec<String>,
    pub resources: BTreeMap<String, ComparisonEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonEntry {
    pub neg_rsm: f64,
    pub pos_rsm: f64,
    /// Signed relative usage change; null when one side's mean is zero.
    pub rel_change: Option<f64>,
    pub rel_change_defined: bool,
    pub bar_value: f64,
}

impl Report {
    /// Canonical serialized form (pretty JSON with ordered keys).
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
