//! Rule engine mapping dominant resource groups to code-transformation
//! suggestions.
//!
//! A rule fires when any of its trigger groups is in the dominant set: the
//! `top_k` resources of a normalized significance report that clear the
//! mass threshold. Rules marked `also_trigger_from_above` additionally fire
//! from groups sitting above their triggers in the memory hierarchy.

use std::collections::BTreeMap;

use crate::model::MachineModel;
use crate::rsm::RsmReport;

/// Default rules shipped with the crate (see `data/rules.toml`).
pub const DEFAULT_RULES_TOML: &str = include_str!("data/rules.toml");

pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedImprovement {
    Speedup,
    Utilization,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestionRule {
    pub id: String,
    pub trigger_groups: Vec<String>,
    #[serde(default)]
    pub also_trigger_from_above: bool,
    pub tuning_opportunity: String,
    pub transformation: String,
    pub expected_primary: ExpectedImprovement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_secondary: Option<ExpectedImprovement>,
    /// Trigger groups plus hierarchy expansion, resolved at load time.
    #[serde(skip)]
    effective_triggers: Vec<String>,
}

impl SuggestionRule {
    pub fn effective_triggers(&self) -> &[String] {
        &self.effective_triggers
    }
}

#[derive(Debug, serde::Deserialize)]
struct RulesFile {
    #[serde(default)]
    rules: Vec<SuggestionRule>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuggestError {
    #[error("rule `{rule}` triggers on `{group}`, which the machine model does not define")]
    UnknownGroupInRule { rule: String, group: String },
    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(String),
    #[error("rule `{0}` has no trigger groups")]
    EmptyTriggers(String),
    #[error("suggestions require a normalized significance report")]
    UnnormalizedReport,
    #[error("rules parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Parses and validates a ruleset against the active machine model; pass
/// `None` for the built-in default rules.
pub fn load_rules(
    config: Option<&str>,
    model: &MachineModel,
) -> Result<Vec<SuggestionRule>, SuggestError> {
    let text = config.unwrap_or(DEFAULT_RULES_TOML);
    let mut parsed: RulesFile = toml::from_str(text)?;

    let mut seen = Vec::new();
    for rule in &mut parsed.rules {
        if seen.contains(&rule.id) {
            return Err(SuggestError::DuplicateRuleId(rule.id.clone()));
        }
        seen.push(rule.id.clone());
        if rule.trigger_groups.is_empty() {
            return Err(SuggestError::EmptyTriggers(rule.id.clone()));
        }
        let mut effective = Vec::new();
        for group in &rule.trigger_groups {
            if !model.has_group(group) {
                return Err(SuggestError::UnknownGroupInRule {
                    rule: rule.id.clone(),
                    group: group.clone(),
                });
            }
            if !effective.contains(group) {
                effective.push(group.clone());
            }
            if rule.also_trigger_from_above {
                for above in model.groups_above(group) {
                    if !effective.iter().any(|g| g == above) {
                        effective.push(above.to_string());
                    }
                }
            }
        }
        rule.effective_triggers = effective;
    }
    Ok(parsed.rules)
}

/// One rule that fired, with the dominant groups that matched it.
#[derive(Debug, Clone, PartialEq)]
pub struct FiredRule {
    pub rule_id: String,
    pub matched_groups: Vec<String>,
    pub matched_rsm: Vec<f64>,
    pub max_rsm: f64,
    pub tuning_opportunity: String,
    pub transformation: String,
    pub expected_primary: ExpectedImprovement,
    pub expected_secondary: Option<ExpectedImprovement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionReport {
    pub kernel: String,
    /// Ordered by descending maximum matched significance, then rule id.
    pub fired: Vec<FiredRule>,
    pub threshold_used: f64,
    pub top_k_used: usize,
}

/// Fires rules against the dominant resources of a normalized report.
pub fn suggest(
    kernel: &str,
    report: &RsmReport,
    rules: &[SuggestionRule],
    top_k: usize,
    threshold: f64,
) -> Result<SuggestionReport, SuggestError> {
    if !report.normalized {
        return Err(SuggestError::UnnormalizedReport);
    }

    let mut ranked: Vec<(&String, f64)> =
        report.per_resource.iter().map(|(k, &v)| (k, v)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    let dominant: BTreeMap<&str, f64> = ranked
        .into_iter()
        .take(top_k)
        .filter(|(_, v)| *v >= threshold)
        .map(|(k, v)| (k.as_str(), v))
        .collect();

    let mut fired = Vec::new();
    for rule in rules {
        let mut matched: Vec<(String, f64)> = rule
            .effective_triggers
            .iter()
            .filter_map(|g| dominant.get(g.as_str()).map(|&v| (g.clone(), v)))
            .collect();
        if matched.is_empty() {
            continue;
        }
        matched.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let max_rsm = matched[0].1;
        fired.push(FiredRule {
            rule_id: rule.id.clone(),
            matched_groups: matched.iter().map(|(g, _)| g.clone()).collect(),
            matched_rsm: matched.iter().map(|(_, v)| *v).collect(),
            max_rsm,
            tuning_opportunity: rule.tuning_opportunity.clone(),
            transformation: rule.transformation.clone(),
            expected_primary: rule.expected_primary,
            expected_secondary: rule.expected_secondary,
        });
    }
    fired.sort_by(|a, b| {
        b.max_rsm
            .total_cmp(&a.max_rsm)
            .then(a.rule_id.cmp(&b.rule_id))
    });

    Ok(SuggestionReport {
        kernel: kernel.to_string(),
        fired,
        threshold_used: threshold,
        top_k_used: top_k,
    })
}
