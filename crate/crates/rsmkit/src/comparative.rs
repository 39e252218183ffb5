//! Differential analysis between two kernels or code variants.
//!
//! Rows of the two dictionaries are matched on a join key (workload, or
//! workload plus frequency), columns are intersected, and the pipeline runs
//! on both difference dictionaries: `delta = d1 - d2` against
//! `dt = target1 - target2`, and its negation `delta_prime = d2 - d1`
//! against the same `dt`. High significance with a positive usage change
//! means the second variant leans harder on that resource; with a negative
//! change it was relieved.
//!
//! Everything here is constructed to be exactly antisymmetric: swapping the
//! two inputs negates `dt` and every `rel_change`, and swaps the two
//! directional significance values bitwise. For that reason the difference
//! target is scaled by its maximum magnitude (sign-symmetric) instead of
//! being min-max shifted, and relative change divides by the smaller of the
//! two group means.

use std::collections::BTreeMap;

use crate::dictionary::{
    normalize_columns, select_runs, Dictionary, DictionaryError, NormalizeMode, RowKey, RowKeySpec,
};
use crate::ingest::ProfileTable;
use crate::model::{partition_columns, MachineModel};
use crate::rsm::{beliefs, normalize_rsm, resource_rsm, RsmError, UNCATEGORIZED_GROUP};
use crate::sparse::{ensemble_omp, EnsembleParams, SparseError};
use crate::targets::TargetVector;

/// Denominator guard for relative-change ratios.
pub const REL_CHANGE_EPSILON: f64 = 1e-12;

/// Which metadata fields must agree for two rows to be paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairJoinKey {
    Workload,
    #[default]
    WorkloadFrequency,
}

/// Two aligned dictionaries plus their differences.
#[derive(Debug, Clone)]
pub struct PairedDictionaries {
    pub d1: Dictionary,
    pub d2: Dictionary,
    /// `d1 - d2`, elementwise on the aligned rows/columns.
    pub delta: Dictionary,
    /// `d2 - d1`; always the exact negation of `delta`.
    pub delta_prime: Dictionary,
    /// `target1 - target2` on the aligned rows.
    pub dt: Vec<f64>,
    pub pair_label: (String, String),
    /// Join keys present on one side only (dropped from the analysis).
    pub dropped_rows: Vec<String>,
    /// Events present on one side only (dropped from the analysis).
    pub dropped_columns: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ComparativeError {
    #[error("no join keys in common between the two selections")]
    EmptyIntersection,
    #[error("join key `{0}` matches more than one row; add frequency to the join key")]
    DuplicateJoinKey(String),
    #[error("the two dictionaries are identical; the difference carries no signal")]
    DegenerateDelta,
    #[error("the target difference is constant; nothing to attribute")]
    ConstantDeltaTarget,
    #[error("target rows do not match the kernel selection")]
    MisalignedTarget,
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Rsm(#[from] RsmError),
}

fn join_label(key: &RowKey, join: PairJoinKey) -> String {
    match join {
        PairJoinKey::Workload => key.workload.clone(),
        PairJoinKey::WorkloadFrequency => match key.frequency_mhz {
            Some(f) => format!("{}@{}MHz", key.workload, f),
            None => key.workload.clone(),
        },
    }
}

/// Aligns two kernel selections row-by-row on the join key and intersects
/// their event columns. The targets must have been computed from the same
/// selections (replicates averaged), one per side.
pub fn align_pairs(
    table1: &ProfileTable,
    kernel1: &str,
    target1: &TargetVector,
    table2: &ProfileTable,
    kernel2: &str,
    target2: &TargetVector,
    join: PairJoinKey,
) -> Result<PairedDictionaries, ComparativeError> {
    let runs1 = select_runs(table1, kernel1, RowKeySpec::AverageReplicates)?;
    let runs2 = select_runs(table2, kernel2, RowKeySpec::AverageReplicates)?;
    let d1_full = Dictionary::from_runs(&runs1);
    let d2_full = Dictionary::from_runs(&runs2);
    if target1.row_labels != d1_full.row_labels() || target2.row_labels != d2_full.row_labels() {
        return Err(ComparativeError::MisalignedTarget);
    }

    let index_side = |d: &Dictionary| -> Result<BTreeMap<String, usize>, ComparativeError> {
        let mut map = BTreeMap::new();
        for (i, key) in d.row_labels().iter().enumerate() {
            let label = join_label(key, join);
            if map.insert(label.clone(), i).is_some() {
                return Err(ComparativeError::DuplicateJoinKey(label));
            }
        }
        Ok(map)
    };
    let rows1 = index_side(&d1_full)?;
    let rows2 = index_side(&d2_full)?;

    let matched: Vec<&String> = rows1.keys().filter(|k| rows2.contains_key(*k)).collect();
    if matched.is_empty() {
        return Err(ComparativeError::EmptyIntersection);
    }
    let mut dropped_rows: Vec<String> = rows1
        .keys()
        .filter(|k| !rows2.contains_key(*k))
        .map(|k| format!("{kernel1}:{k}"))
        .chain(
            rows2
                .keys()
                .filter(|k| !rows1.contains_key(*k))
                .map(|k| format!("{kernel2}:{k}")),
        )
        .collect();
    dropped_rows.sort();

    let keep1: Vec<usize> = matched.iter().map(|k| rows1[*k]).collect();
    let keep2: Vec<usize> = matched.iter().map(|k| rows2[*k]).collect();

    // Column intersection in side-1 order.
    let common: Vec<usize> = (0..d1_full.n_cols())
        .filter(|&c| d2_full.col_labels().contains(&d1_full.col_labels()[c]))
        .collect();
    let mut dropped_columns: Vec<String> = d1_full
        .col_labels()
        .iter()
        .filter(|l| !d2_full.col_labels().contains(l))
        .cloned()
        .chain(
            d2_full
                .col_labels()
                .iter()
                .filter(|l| !d1_full.col_labels().contains(l))
                .cloned(),
        )
        .collect();
    dropped_columns.sort();

    let d1 = d1_full.select_rows(&keep1).select_columns(&common);
    let common2: Vec<usize> = d1
        .col_labels()
        .iter()
        .map(|l| d2_full.col_labels().iter().position(|m| m == l).unwrap())
        .collect();
    let d2 = d2_full.select_rows(&keep2).select_columns(&common2);

    // Difference dictionaries share canonical row keys derived from the
    // join label (frequency kept only when it is part of the key).
    let delta_keys: Vec<RowKey> = matched
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let src = &d1.row_labels()[i];
            RowKey {
                workload: src.workload.clone(),
                frequency_mhz: match join {
                    PairJoinKey::Workload => None,
                    PairJoinKey::WorkloadFrequency => src.frequency_mhz,
                },
                replicate: None,
            }
        })
        .collect();

    let mut delta_cols = Vec::with_capacity(d1.n_cols());
    let mut delta_prime_cols = Vec::with_capacity(d1.n_cols());
    for c in 0..d1.n_cols() {
        let col: Vec<f64> = d1
            .column(c)
            .iter()
            .zip(d2.column(c))
            .map(|(a, b)| a - b)
            .collect();
        delta_prime_cols.push(col.iter().map(|v| -v).collect());
        delta_cols.push(col);
    }
    let labels = d1.col_labels().to_vec();
    let delta = Dictionary::from_columns(delta_keys.clone(), labels.clone(), delta_cols);
    let delta_prime = Dictionary::from_columns(delta_keys, labels, delta_prime_cols);

    let dt: Vec<f64> = keep1
        .iter()
        .zip(&keep2)
        .map(|(&r1, &r2)| target1.values[r1] - target2.values[r2])
        .collect();

    Ok(PairedDictionaries {
        d1,
        d2,
        delta,
        delta_prime,
        dt,
        pair_label: (kernel1.to_string(), kernel2.to_string()),
        dropped_rows,
        dropped_columns,
    })
}

/// Per-resource outcome of a comparative run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceComparison {
    /// Normalized significance of `delta` (d1 - d2) for `dt`.
    pub neg_rsm: f64,
    /// Normalized significance of `delta_prime` (d2 - d1) for `dt`.
    pub pos_rsm: f64,
    /// Signed relative usage change; `None` when one side's mean usage is
    /// (numerically) zero and the ratio is undefined.
    pub rel_change: Option<f64>,
    /// `sign(rel_change) * max(neg_rsm, pos_rsm)`; zero when the change is
    /// zero or undefined.
    pub bar_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparativeResult {
    pub per_resource: BTreeMap<String, ResourceComparison>,
    pub pair_label: (String, String),
}

/// Runs the attribution pipeline on one difference dictionary.
fn directional_rsm(
    dict: &Dictionary,
    dt_scaled: &[f64],
    model: &MachineModel,
    params: &EnsembleParams,
    gamma: f64,
) -> Result<BTreeMap<String, f64>, ComparativeError> {
    // Hit events never participate in attribution.
    let partition = partition_columns(dict, model);
    let keep: Vec<usize> = (0..dict.n_cols())
        .filter(|c| !partition.excluded.contains(c))
        .collect();
    if keep.is_empty() {
        return Err(ComparativeError::DegenerateDelta);
    }
    let analyzed = dict.select_columns(&keep);

    let normalized = match normalize_columns(&analyzed, NormalizeMode::UnitNorm) {
        Ok(n) => n,
        // A fully constant difference means the variants moved in lockstep.
        Err(DictionaryError::AllColumnsConstant) => return Err(ComparativeError::DegenerateDelta),
        Err(e) => return Err(e.into()),
    };

    let target = TargetVector {
        kind: crate::targets::TargetKind::Ts,
        values: dt_scaled.to_vec(),
        row_labels: normalized.row_labels().to_vec(),
        normalization: crate::targets::Normalization::None,
    };
    let ensemble = ensemble_omp(&normalized, &target, params)?;
    let believed = beliefs(&normalized, &target, &ensemble, gamma);
    let retained_partition = partition_columns(&normalized, model);
    let report = resource_rsm(&believed, &retained_partition, normalized.col_labels())?;
    Ok(normalize_rsm(&report)?.per_resource)
}

/// Full comparative pipeline: both directional runs plus relative usage
/// change and the signed bar value per resource.
pub fn comparative_rsm(
    pair: &PairedDictionaries,
    model: &MachineModel,
    params: &EnsembleParams,
    gamma: f64,
) -> Result<ComparativeResult, ComparativeError> {
    if pair
        .delta
        .col_labels()
        .iter()
        .enumerate()
        .all(|(c, _)| pair.delta.column(c).iter().all(|&v| v == 0.0))
    {
        return Err(ComparativeError::DegenerateDelta);
    }

    let max_abs = pair.dt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Err(ComparativeError::ConstantDeltaTarget);
    }
    // Scale by magnitude only: negating dt must negate the scaled target
    // exactly, which keeps the swap antisymmetry bitwise.
    let dt_scaled: Vec<f64> = pair.dt.iter().map(|v| v / max_abs).collect();

    let neg = directional_rsm(&pair.delta, &dt_scaled, model, params, gamma)?;
    let pos = directional_rsm(&pair.delta_prime, &dt_scaled, model, params, gamma)?;
    let rel = relative_usage_change(pair, model);

    let mut per_resource = BTreeMap::new();
    let mut group_names: Vec<&String> = neg.keys().chain(pos.keys()).chain(rel.keys()).collect();
    group_names.sort();
    group_names.dedup();
    for name in group_names {
        let neg_rsm = neg.get(name).copied().unwrap_or(0.0);
        let pos_rsm = pos.get(name).copied().unwrap_or(0.0);
        let rel_change = rel.get(name).copied().flatten();
        let bar_value = match rel_change {
            Some(r) if r > 0.0 => neg_rsm.max(pos_rsm),
            Some(r) if r < 0.0 => -neg_rsm.max(pos_rsm),
            _ => 0.0,
        };
        per_resource.insert(
            name.clone(),
            ResourceComparison {
                neg_rsm,
                pos_rsm,
                rel_change,
                bar_value,
            },
        );
    }
    Ok(ComparativeResult {
        per_resource,
        pair_label: pair.pair_label.clone(),
    })
}

/// Mean usage change per resource group, independent of any significance
/// weighting: `(mean2 - mean1) / min(mean1, mean2)`, so +0.5 reads "half
/// again more usage" and swapping the sides negates the value exactly.
/// `None` marks groups where one side's mean is (numerically) zero.
pub fn relative_usage_change(
    pair: &PairedDictionaries,
    model: &MachineModel,
) -> BTreeMap<String, Option<f64>> {
    let partition = partition_columns(&pair.d1, model);
    let mut out = BTreeMap::new();
    let group_mean = |d: &Dictionary, cols: &[usize]| -> f64 {
        let count = (cols.len() * d.n_rows()) as f64;
        let sum: f64 = cols.iter().map(|&c| d.column(c).iter().sum::<f64>()).sum();
        sum / count
    };
    let mut entries: Vec<(String, Vec<usize>)> = partition
        .groups
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if !partition.uncategorized.is_empty() {
        entries.push((
            UNCATEGORIZED_GROUP.to_string(),
            partition.uncategorized.clone(),
        ));
    }
    for (group, cols) in entries {
        let m1 = group_mean(&pair.d1, &cols);
        let m2 = group_mean(&pair.d2, &cols);
        let low = m1.min(m2);
        let high = m1.max(m2);
        let value = if high <= REL_CHANGE_EPSILON {
            Some(0.0) // both sides idle: no change
        } else if low <= REL_CHANGE_EPSILON {
            None // ratio against a zero baseline is undefined
        } else {
            Some((m2 - m1) / low)
        };
        out.insert(group, value);
    }
    out
}
