//! Abstract machine model: named resource groups and the rules that
//! categorize raw event names into them.
//!
//! Patterns are literal substring matches plus an optional keyword set
//! rather than full regular expressions, which keeps shipped models and
//! user overrides auditable. Rule precedence is fixed: exclusions, then
//! manual overrides, then miss promotions, then group patterns; the first
//! match wins at every stage, so an event maps to at most one group.

use std::collections::BTreeMap;

use crate::dictionary::Dictionary;

/// Default model shipped with the crate (see `data/volta.toml`).
pub const DEFAULT_MODEL_TOML: &str = include_str!("data/volta.toml");

/// Event-type keywords. Counter names abbreviate load/store as `ld`/`st`,
/// so keyword matching is done on underscore-separated tokens with those
/// aliases honored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Read,
    Write,
    Queries,
    Load,
    Store,
}

impl Keyword {
    fn matches_token(self, token: &str) -> bool {
        match self {
            Keyword::Read => token == "read",
            Keyword::Write => token == "write",
            Keyword::Queries => token == "queries",
            Keyword::Load => token == "load" || token == "ld",
            Keyword::Store => token == "store" || token == "st",
        }
    }
}

/// One matchable pattern: all `contains` fragments must appear as substrings
/// of the (lowercased) event name; when `keywords` is non-empty at least one
/// keyword must match a token of the name.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventPattern {
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<Keyword>,
}

impl EventPattern {
    pub fn matches(&self, name: &str) -> bool {
        let name = name.to_ascii_lowercase();
        if !self.contains.iter().all(|frag| name.contains(frag)) {
            return false;
        }
        if self.keywords.is_empty() {
            return true;
        }
        name.split('_')
            .any(|token| self.keywords.iter().any(|k| k.matches_token(token)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceGroup {
    pub name: String,
    pub patterns: Vec<EventPattern>,
}

/// Attributes miss-type events to the next (slower) level of the hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromotionRule {
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<Keyword>,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineModel {
    pub groups: Vec<ResourceGroup>,
    /// Memory-hierarchy group names, fastest to slowest.
    #[serde(default)]
    pub hierarchy: Vec<String>,
    #[serde(default)]
    pub promotions: Vec<PromotionRule>,
    /// Exact event name (lowercase) to group name.
    #[serde(default)]
    pub overrides: BTreeMap<String, String>,
    #[serde(default)]
    pub exclusions: Vec<EventPattern>,
}

/// Outcome of categorizing a single event name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Categorization {
    Group(String),
    Excluded,
    Uncategorized,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate group `{0}`")]
    DuplicateGroup(String),
    #[error("group `{0}` has no patterns")]
    EmptyPatterns(String),
    #[error("promotion targets unknown group `{0}`")]
    UnknownPromotionTarget(String),
    #[error("override for `{event}` targets unknown group `{group}`")]
    UnknownOverrideTarget { event: String, group: String },
    #[error("hierarchy names unknown group `{0}`")]
    UnknownHierarchyGroup(String),
    #[error("identical pattern `{pattern}` appears in groups `{first}` and `{second}`")]
    AmbiguousRule {
        pattern: String,
        first: String,
        second: String,
    },
    #[error("model parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

impl MachineModel {
    /// The built-in Volta model.
    pub fn default_volta() -> Self {
        load_model(DEFAULT_MODEL_TOML).expect("embedded default model is valid")
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }

    pub fn has_group(&self, name: &str) -> bool {
        self.groups.iter().any(|g| g.name == name)
    }

    /// Groups strictly slower than `name` in the memory hierarchy, nearest
    /// first. Empty for groups outside the hierarchy.
    pub fn groups_above(&self, name: &str) -> Vec<&str> {
        match self.hierarchy.iter().position(|g| g == name) {
            Some(pos) => self.hierarchy[pos + 1..]
                .iter()
                .map(String::as_str)
                .collect(),
            None => Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let mut seen: Vec<&str> = Vec::new();
        for group in &self.groups {
            if seen.contains(&group.name.as_str()) {
                return Err(ModelError::DuplicateGroup(group.name.clone()));
            }
            seen.push(&group.name);
            if group.patterns.is_empty() {
                return Err(ModelError::EmptyPatterns(group.name.clone()));
            }
        }
        for rule in &self.promotions {
            if !self.has_group(&rule.to) {
                return Err(ModelError::UnknownPromotionTarget(rule.to.clone()));
            }
        }
        for (event, group) in &self.overrides {
            if !self.has_group(group) {
                return Err(ModelError::UnknownOverrideTarget {
                    event: event.clone(),
                    group: group.clone(),
                });
            }
        }
        for name in &self.hierarchy {
            if !self.has_group(name) {
                return Err(ModelError::UnknownHierarchyGroup(name.clone()));
            }
        }
        // A pattern repeated verbatim under two groups would make the
        // "first group in file order wins" rule silently decisive; reject.
        let mut pattern_owners: BTreeMap<String, &str> = BTreeMap::new();
        for group in &self.groups {
            for pattern in &group.patterns {
                let key = format!("{pattern:?}");
                if let Some(owner) = pattern_owners.get(key.as_str()) {
                    if *owner != group.name {
                        return Err(ModelError::AmbiguousRule {
                            pattern: pattern.contains.join("+"),
                            first: owner.to_string(),
                            second: group.name.clone(),
                        });
                    }
                }
                pattern_owners.insert(key, &group.name);
            }
        }
        Ok(())
    }
}

/// Parses and validates a model document. An empty document (like an absent
/// one) means "use the built-in default".
pub fn load_model(config: &str) -> Result<MachineModel, ModelError> {
    let blank = config.lines().all(|line| {
        let line = line.trim();
        line.is_empty() || line.starts_with('#')
    });
    if blank {
        return Ok(MachineModel::default_volta());
    }
    let model: MachineModel = toml::from_str(config)?;
    model.validate()?;
    Ok(model)
}

/// Categorizes a raw event name. Total: every name yields a group, an
/// exclusion, or `Uncategorized`.
pub fn categorize_event(name: &str, model: &MachineModel) -> Categorization {
    let lower = name.to_ascii_lowercase();
    if model.exclusions.iter().any(|p| p.matches(&lower)) {
        return Categorization::Excluded;
    }
    if let Some(group) = model.overrides.get(&lower) {
        return Categorization::Group(group.clone());
    }
    for rule in &model.promotions {
        let as_pattern = EventPattern {
            contains: rule.contains.clone(),
            keywords: rule.keywords.clone(),
        };
        if as_pattern.matches(&lower) {
            return Categorization::Group(rule.to.clone());
        }
    }
    for group in &model.groups {
        if group.patterns.iter().any(|p| p.matches(&lower)) {
            return Categorization::Group(group.name.clone());
        }
    }
    Categorization::Uncategorized
}

/// Disjoint partition of a dictionary's columns into resource groups, plus
/// the columns excluded or left uncategorized by the model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnPartition {
    pub groups: BTreeMap<String, Vec<usize>>,
    pub uncategorized: Vec<usize>,
    pub excluded: Vec<usize>,
}

pub fn partition_columns(d: &Dictionary, model: &MachineModel) -> ColumnPartition {
    let mut partition = ColumnPartition::default();
    for (idx, label) in d.col_labels().iter().enumerate() {
        match categorize_event(label, model) {
            Categorization::Group(name) => partition.groups.entry(name).or_default().push(idx),
            Categorization::Excluded => partition.excluded.push(idx),
            Categorization::Uncategorized => partition.uncategorized.push(idx),
        }
    }
    partition
}
