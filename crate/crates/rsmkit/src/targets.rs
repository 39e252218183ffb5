//! Target vectors: the per-row metric the sparse selection explains.
//!
//! Three kinds are supported: normalized execution time (`ts`), utilization
//! loss (`1 - ul`), and a composite `score = 1 - alpha/ts` where `alpha` is
//! a step function of the SM-utilization bucket. Bucketing makes the
//! composite insensitive to small utilization differences, so configurations
//! with similar utilization are ranked by execution time.

use crate::dictionary::{select_runs, KernelRuns, RowKey, RowKeySpec};
use crate::ingest::ProfileTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Ts,
    UtilLoss,
    Score,
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetKind::Ts => "ts",
            TargetKind::UtilLoss => "util_loss",
            TargetKind::Score => "score",
        })
    }
}

/// Record of the scaling applied to a target vector.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// Division by the maximum over the normalization scope.
    MaxDivide {
        max: f64,
    },
    /// Affine rescale of [min, max] onto [0, 1].
    MinMax {
        min: f64,
        max: f64,
    },
}

/// Length-N target aligned row-for-row with a dictionary built from the
/// same run selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub kind: TargetKind,
    pub values: Vec<f64>,
    pub row_labels: Vec<RowKey>,
    pub normalization: Normalization,
}

/// Scope of the `ts` max-normalization. The default is global: one divisor
/// across all kernels and configurations, so times stay comparable between
/// kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsScope {
    #[default]
    Global,
    PerKernel,
}

/// Step values for the utilization buckets of the composite score.
/// Boundaries are fixed at 0.5 and 0.8, left-closed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaBuckets {
    pub low: f64,
    pub moderate: f64,
    pub high: f64,
}

pub const BUCKET_BOUNDARIES: (f64, f64) = (0.5, 0.8);

impl Default for AlphaBuckets {
    fn default() -> Self {
        Self {
            low: 0.1,
            moderate: 0.5,
            high: 0.8,
        }
    }
}

impl AlphaBuckets {
    /// Each step value must lie inside its own utilization range; the exact
    /// values matter less than that containment, which also forces
    /// low < moderate < high.
    pub fn validate(&self) -> Result<(), TargetError> {
        let (b1, b2) = BUCKET_BOUNDARIES;
        if !(self.low > 0.0 && self.low < b1) {
            return Err(TargetError::InvalidAlphaBuckets(format!(
                "low value {} must lie in (0, {b1})",
                self.low
            )));
        }
        if !(self.moderate >= b1 && self.moderate < b2) {
            return Err(TargetError::InvalidAlphaBuckets(format!(
                "moderate value {} must lie in [{b1}, {b2})",
                self.moderate
            )));
        }
        if !(self.high >= b2 && self.high <= 1.0) {
            return Err(TargetError::InvalidAlphaBuckets(format!(
                "high value {} must lie in [{b2}, 1]",
                self.high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TargetError {
    #[error("maximum execution time over the normalization scope is zero")]
    ZeroMaxTime,
    #[error("row `{0}` has non-positive execution time; ts requires positive times")]
    NonPositiveTime(String),
    #[error("utilization {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("target has {expected} rows but got {got} utilization values")]
    MisalignedRows { expected: usize, got: usize },
    #[error("expected a ts target, got {0}")]
    NotTs(TargetKind),
    #[error("invalid alpha buckets: {0}")]
    InvalidAlphaBuckets(String),
    #[error(transparent)]
    Dictionary(#[from] crate::dictionary::DictionaryError),
}

/// Maximum collapsed execution time across every kernel and configuration
/// in the table, under the same row collapsing as dictionary construction.
pub fn global_max_time(table: &ProfileTable, spec: RowKeySpec) -> Result<f64, TargetError> {
    let mut max = 0.0f64;
    for kernel in table.kernels() {
        let runs = select_runs(table, kernel, spec)?;
        for row in &runs.rows {
            max = max.max(row.exec_time_s);
        }
    }
    Ok(max)
}

/// Normalized execution time for one kernel: `time / max(time over scope)`,
/// so values lie in (0, 1] and the slowest in-scope configuration maps to 1.
pub fn compute_ts(
    table: &ProfileTable,
    kernel: &str,
    spec: RowKeySpec,
    scope: TsScope,
) -> Result<TargetVector, TargetError> {
    let runs = select_runs(table, kernel, spec)?;
    let max = match scope {
        TsScope::Global => global_max_time(table, spec)?,
        TsScope::PerKernel => runs
            .rows
            .iter()
            .map(|r| r.exec_time_s)
            .fold(0.0f64, f64::max),
    };
    ts_from_runs(&runs, max)
}

/// Core of [`compute_ts`] once the scope maximum is known.
pub fn ts_from_runs(runs: &KernelRuns, max_time: f64) -> Result<TargetVector, TargetError> {
    if max_time <= 0.0 {
        return Err(TargetError::ZeroMaxTime);
    }
    let mut values = Vec::with_capacity(runs.rows.len());
    for row in &runs.rows {
        if row.exec_time_s <= 0.0 {
            // A zero time would put ts outside (0, 1] and make the composite
            // score divide by zero; fail rather than impute.
            return Err(TargetError::NonPositiveTime(row.key.to_string()));
        }
        values.push(row.exec_time_s / max_time);
    }
    Ok(TargetVector {
        kind: TargetKind::Ts,
        values,
        row_labels: runs.rows.iter().map(|r| r.key.clone()).collect(),
        normalization: Normalization::MaxDivide { max: max_time },
    })
}

/// Step function mapping utilization to its bucket value:
/// [0, 0.5) low, [0.5, 0.8) moderate, [0.8, 1.0] high.
pub fn alpha_of(ul: f64, buckets: &AlphaBuckets) -> Result<f64, TargetError> {
    if !(0.0..=1.0).contains(&ul) {
        return Err(TargetError::OutOfRange(ul));
    }
    let (b1, b2) = BUCKET_BOUNDARIES;
    Ok(if ul < b1 {
        buckets.low
    } else if ul < b2 {
        buckets.moderate
    } else {
        buckets.high
    })
}

/// Utilization loss `1 - ul` per row. No further normalization; the values
/// are already in [0, 1].
pub fn compute_util_loss(
    table: &ProfileTable,
    kernel: &str,
    spec: RowKeySpec,
) -> Result<TargetVector, TargetError> {
    let runs = select_runs(table, kernel, spec)?;
    Ok(util_loss_from_runs(&runs))
}

pub fn util_loss_from_runs(runs: &KernelRuns) -> TargetVector {
    TargetVector {
        kind: TargetKind::UtilLoss,
        values: runs.rows.iter().map(|r| 1.0 - r.sm_utilization).collect(),
        row_labels: runs.rows.iter().map(|r| r.key.clone()).collect(),
        normalization: Normalization::None,
    }
}

/// Composite score per row: raw `1 - alpha(ul)/ts`.
///
/// The raw value can be negative (alpha above ts); with `renormalize` on
/// (the default in the pipeline) the vector is min-max rescaled to [0, 1],
/// which preserves ordering and gives the belief computation a bounded
/// error range. A constant raw vector rescales to all zeros: it carries no
/// signal to attribute.
pub fn compute_score(
    ts: &TargetVector,
    utilization: &[f64],
    buckets: &AlphaBuckets,
    renormalize: bool,
) -> Result<TargetVector, TargetError> {
    if ts.kind != TargetKind::Ts {
        return Err(TargetError::NotTs(ts.kind));
    }
    if utilization.len() != ts.values.len() {
        return Err(TargetError::MisalignedRows {
            expected: ts.values.len(),
            got: utilization.len(),
        });
    }
    buckets.validate()?;

    let mut raw = Vec::with_capacity(ts.values.len());
    for (&t, &ul) in ts.values.iter().zip(utilization) {
        raw.push(1.0 - alpha_of(ul, buckets)? / t);
    }

    let normalization = if renormalize {
        let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max - min > 0.0 {
            for v in raw.iter_mut() {
                *v = (*v - min) / (max - min);
            }
        } else {
            raw.iter_mut().for_each(|v| *v = 0.0);
        }
        Normalization::MinMax { min, max }
    } else {
        Normalization::None
    };

    Ok(TargetVector {
        kind: TargetKind::Score,
        values: raw,
        row_labels: ts.row_labels.clone(),
        normalization,
    })
}

/// Min-max rescale of an arbitrary aligned vector onto [0, 1]; used for
/// difference targets in comparative analysis. Returns the recorded range.
pub fn min_max_normalize(values: &mut [f64]) -> Normalization {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min > 0.0 {
        for v in values.iter_mut() {
            *v = (*v - min) / (max - min);
        }
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Normalization::MinMax { min, max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_profile_csv, ColumnSchema};

    fn table(text: &str) -> ProfileTable {
        parse_profile_csv(text.as_bytes(), &ColumnSchema::default()).unwrap()
    }

    #[test]
    fn ts_divides_by_global_max() {
        let t = table(
            "kernel,workload,time_s,sm_util,ev_a\n\
             k1,w1,1.0,0.5,1\n\
             k1,w2,2.0,0.5,2\n\
             k1,w3,4.0,0.5,3\n",
        );
        let ts = compute_ts(&t, "k1", RowKeySpec::default(), TsScope::Global).unwrap();
        assert_eq!(ts.values, [0.25, 0.5, 1.0]);
        assert_eq!(ts.normalization, Normalization::MaxDivide { max: 4.0 });
    }

    #[test]
    fn ts_single_record_is_one() {
        let t = table("kernel,workload,time_s,sm_util,ev_a\nk1,w1,3.5,0.5,1\n");
        let ts = compute_ts(&t, "k1", RowKeySpec::default(), TsScope::Global).unwrap();
        assert_eq!(ts.values, [1.0]);
    }

    #[test]
    fn ts_global_scope_uses_other_kernels_max() {
        let t = table(
            "kernel,workload,time_s,sm_util,ev_a\n\
             k1,w1,2.0,0.5,1\n\
             k1,w2,3.0,0.5,2\n\
             k2,w1,10.0,0.5,9\n",
        );
        let ts = compute_ts(&t, "k1", RowKeySpec::default(), TsScope::Global).unwrap();
        assert_eq!(ts.values, [0.2, 0.3]);
        let per_kernel = compute_ts(&t, "k1", RowKeySpec::default(), TsScope::PerKernel).unwrap();
        assert_eq!(per_kernel.values, [2.0 / 3.0, 1.0]);
    }

    #[test]
    fn alpha_step_values_and_boundaries() {
        let b = AlphaBuckets::default();
        assert_eq!(alpha_of(0.3, &b).unwrap(), 0.1);
        assert_eq!(alpha_of(0.5, &b).unwrap(), 0.5);
        assert_eq!(alpha_of(0.8, &b).unwrap(), 0.8);
        assert_eq!(alpha_of(1.0, &b).unwrap(), 0.8);
        assert_eq!(alpha_of(0.0, &b).unwrap(), 0.1);
        assert!(matches!(alpha_of(1.5, &b), Err(TargetError::OutOfRange(_))));
    }

    #[test]
    fn bucket_values_must_sit_inside_their_ranges() {
        let bad = AlphaBuckets {
            low: 0.6,
            moderate: 0.5,
            high: 0.8,
        };
        assert!(bad.validate().is_err());
        assert!(AlphaBuckets::default().validate().is_ok());
    }

    fn ts_vec(values: Vec<f64>) -> TargetVector {
        let row_labels = (0..values.len())
            .map(|i| RowKey {
                workload: format!("w{i}"),
                frequency_mhz: None,
                replicate: None,
            })
            .collect();
        TargetVector {
            kind: TargetKind::Ts,
            values,
            row_labels,
            normalization: Normalization::MaxDivide { max: 1.0 },
        }
    }

    #[test]
    fn raw_score_spot_values() {
        let b = AlphaBuckets::default();
        let score =
            compute_score(&ts_vec(vec![1.0, 0.8, 0.5]), &[0.3, 0.9, 0.5], &b, false).unwrap();
        assert_eq!(score.values[0], 0.9); // 1 - 0.1/1.0
        assert_eq!(score.values[1], 0.0); // 1 - 0.8/0.8
        assert_eq!(score.values[2], 0.0); // 1 - 0.5/0.5
    }

    #[test]
    fn renormalized_score_spans_unit_interval() {
        let b = AlphaBuckets::default();
        let score =
            compute_score(&ts_vec(vec![1.0, 0.4, 0.2]), &[0.3, 0.3, 0.9], &b, true).unwrap();
        let min = score.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = score
            .values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((min, max), (0.0, 1.0));
        assert!(matches!(score.normalization, Normalization::MinMax { .. }));
    }

    #[test]
    fn score_misaligned_rows_is_rejected() {
        let b = AlphaBuckets::default();
        let err = compute_score(&ts_vec(vec![1.0, 0.5]), &[0.3], &b, false).unwrap_err();
        assert!(matches!(
            err,
            TargetError::MisalignedRows {
                expected: 2,
                got: 1
            }
        ));
    }

    #[test]
    fn util_loss_flips_utilization() {
        let t = table(
            "kernel,workload,time_s,sm_util,ev_a\n\
             k1,w1,1.0,0.25,1\n\
             k1,w2,1.0,0.75,2\n",
        );
        let ul = compute_util_loss(&t, "k1", RowKeySpec::default()).unwrap();
        assert_eq!(ul.values, [0.75, 0.25]);
    }

    #[test]
    fn zero_max_time_is_rejected() {
        let t = table("kernel,workload,time_s,sm_util,ev_a\nk1,w1,0.0,0.5,1\n");
        assert!(matches!(
            compute_ts(&t, "k1", RowKeySpec::default(), TsScope::Global),
            Err(TargetError::ZeroMaxTime)
        ));
    }
}
