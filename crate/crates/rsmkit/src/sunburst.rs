//! The four-level sunburst hierarchy: application, kernel, resource, event.
//!
//! Resource-level children of a kernel carry the normalized significance
//! shares (summing to one); event arcs apportion each resource's value by
//! belief mass within the group. Nodes are ordered by descending value and
//! then label, so the tree is deterministic.

use std::collections::BTreeMap;

use crate::report::KernelReport;
use crate::rsm::UNCATEGORIZED_GROUP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Application,
    Kernel,
    Resource,
    Event,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SunburstNode {
    pub label: String,
    pub level: Level,
    pub value: f64,
    /// Marks sectors needing analyst attention (the UNCAT pseudo-group).
    pub flagged: bool,
    pub children: Vec<SunburstNode>,
}

impl SunburstNode {
    fn sort_children(&mut self) {
        self.children
            .sort_by(|a, b| b.value.total_cmp(&a.value).then(a.label.cmp(&b.label)));
        for child in &mut self.children {
            child.sort_children();
        }
    }
}

/// Builds the tree for one task's kernels from their report entries.
pub fn build_sunburst(app: &str, kernels: &BTreeMap<String, KernelReport>) -> SunburstNode {
    let mut kernel_nodes = Vec::new();
    for (kernel_name, kernel) in kernels {
        let mut resource_nodes = Vec::new();
        for (group, entry) in &kernel.resources {
            // Belief mass of the group's events, renormalized to the
            // resource's share.
            let members: Vec<(&String, f64)> = kernel
                .events
                .iter()
                .filter(|(_, e)| &e.group == group)
                .map(|(name, e)| (name, e.belief))
                .collect();
            let belief_mass: f64 = members.iter().map(|(_, b)| b).sum();
            let children = if belief_mass > 0.0 {
                members
                    .into_iter()
                    .map(|(name, belief)| SunburstNode {
                        label: name.clone(),
                        level: Level::Event,
                        value: entry.rsm_normalized * belief / belief_mass,
                        flagged: false,
                        children: Vec::new(),
                    })
                    .collect()
            } else {
                Vec::new()
            };
            resource_nodes.push(SunburstNode {
                label: group.clone(),
                level: Level::Resource,
                value: entry.rsm_normalized,
                flagged: group == UNCATEGORIZED_GROUP,
                children,
            });
        }
        let value = resource_nodes.iter().map(|n| n.value).sum();
        kernel_nodes.push(SunburstNode {
            label: kernel_name.clone(),
            level: Level::Kernel,
            value,
            flagged: false,
            children: resource_nodes,
        });
    }
    let mut root = SunburstNode {
        label: app.to_string(),
        level: Level::Application,
        value: kernel_nodes.iter().map(|n| n.value).sum(),
        flagged: false,
        children: kernel_nodes,
    };
    root.sort_children();
    root
}
