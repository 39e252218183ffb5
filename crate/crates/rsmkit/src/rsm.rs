//! Per-event beliefs and the resource significance measure (RSM).
//!
//! Each event's prediction error `e_i = ||t - d_i a_i||^2` (with `a_i` the
//! ensemble-averaged coefficient) is mapped to a belief
//! `alpha_i = exp(-gamma * e_i)`; low error means high belief. A resource
//! group's RSM is the noisy-OR of its member beliefs,
//! `1 - prod(1 - alpha_i)`, optionally averaged over workloads and
//! normalized per kernel to sum to one for display.

use std::collections::BTreeMap;

use crate::dictionary::Dictionary;
use crate::model::ColumnPartition;
use crate::sparse::EnsembleResult;
use crate::targets::TargetVector;

/// Pseudo-group that collects columns the machine model could not place.
/// Kept visible in reports so coverage gaps are never silent.
pub const UNCATEGORIZED_GROUP: &str = "UNCAT";

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector {
    /// Squared reconstruction error per column.
    pub errors: Vec<f64>,
    /// `exp(-gamma * error)` per column, in (0, 1].
    pub beliefs: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum RsmError {
    #[error("no resource group covers any analyzed column")]
    EmptyGroupPartition,
    #[error("all resource significance values are zero; nothing to normalize")]
    AllZeroRsm,
}

/// Computes per-event beliefs from the ensemble-averaged coefficients.
///
/// The target should be the same (bounded, min-max normalized) vector the
/// ensemble ran on, so errors stay in a comparable range.
pub fn beliefs(
    d: &Dictionary,
    t: &TargetVector,
    ensemble: &EnsembleResult,
    gamma: f64,
) -> BeliefVector {
    assert!(gamma > 0.0, "gamma must be positive");
    assert_eq!(d.n_cols(), ensemble.avg_coefficients.len());
    assert_eq!(d.n_rows(), t.values.len());

    let mut errors = Vec::with_capacity(d.n_cols());
    for (c, &a) in ensemble.avg_coefficients.iter().enumerate() {
        let col = d.column(c);
        let e: f64 = t
            .values
            .iter()
            .zip(col)
            .map(|(tv, dv)| {
                let r = tv - dv * a;
                r * r
            })
            .sum();
        errors.push(e);
    }
    let beliefs = errors.iter().map(|e| (-gamma * e).exp()).collect();
    BeliefVector {
        errors,
        beliefs,
        gamma,
    }
}

/// Hierarchical significance values for one analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct RsmReport {
    pub per_resource: BTreeMap<String, f64>,
    pub per_event: BTreeMap<String, f64>,
    /// Per-workload resource values when the analysis was split by
    /// workload; these stay unnormalized.
    pub workload_breakdown: Option<BTreeMap<String, BTreeMap<String, f64>>>,
    pub normalized: bool,
}

/// Aggregates member-event beliefs per resource group (noisy-OR).
/// Uncategorized columns are reported under [`UNCATEGORIZED_GROUP`].
pub fn resource_rsm(
    b: &BeliefVector,
    partition: &ColumnPartition,
    col_labels: &[String],
) -> Result<RsmReport, RsmError> {
    if partition.groups.is_empty() && partition.uncategorized.is_empty() {
        return Err(RsmError::EmptyGroupPartition);
    }

    let noisy_or = |cols: &[usize]| -> f64 {
        let mut miss = 1.0f64;
        for &c in cols {
            miss *= 1.0 - b.beliefs[c];
        }
        1.0 - miss
    };

    let mut per_resource = BTreeMap::new();
    for (group, cols) in &partition.groups {
        per_resource.insert(group.clone(), noisy_or(cols));
    }
    if !partition.uncategorized.is_empty() {
        per_resource.insert(
            UNCATEGORIZED_GROUP.to_string(),
            noisy_or(&partition.uncategorized),
        );
    }

    let mut per_event = BTreeMap::new();
    for cols in partition
        .groups
        .values()
        .chain(std::iter::once(&partition.uncategorized))
    {
        for &c in cols {
            per_event.insert(col_labels[c].clone(), b.beliefs[c]);
        }
    }

    Ok(RsmReport {
        per_resource,
        per_event,
        workload_breakdown: None,
        normalized: false,
    })
}

/// Workload-averaged RSM: the mean of each resource's per-workload values.
/// A group missing from some workload (all its columns constant there)
/// contributes zero for that workload. Per-event beliefs average the same
/// way. The full breakdown is retained.
pub fn average_over_workloads(per_workload: &[(String, RsmReport)]) -> RsmReport {
    assert!(!per_workload.is_empty());
    let w = per_workload.len() as f64;

    let mut resource_sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut event_sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut breakdown = BTreeMap::new();
    for (workload, report) in per_workload {
        for (group, &v) in &report.per_resource {
            *resource_sums.entry(group.clone()).or_insert(0.0) += v;
        }
        for (event, &v) in &report.per_event {
            *event_sums.entry(event.clone()).or_insert(0.0) += v;
        }
        breakdown.insert(workload.clone(), report.per_resource.clone());
    }

    RsmReport {
        per_resource: resource_sums.into_iter().map(|(k, v)| (k, v / w)).collect(),
        per_event: event_sums.into_iter().map(|(k, v)| (k, v / w)).collect(),
        workload_breakdown: Some(breakdown),
        normalized: false,
    }
}

/// Scales the per-resource values to sum to one (per-kernel display form).
pub fn normalize_rsm(report: &RsmReport) -> Result<RsmReport, RsmError> {
    let sum: f64 = report.per_resource.values().sum();
    if sum <= 0.0 {
        return Err(RsmError::AllZeroRsm);
    }
    let mut out = report.clone();
    for v in out.per_resource.values_mut() {
        *v /= sum;
    }
    out.normalized = true;
    Ok(out)
}
