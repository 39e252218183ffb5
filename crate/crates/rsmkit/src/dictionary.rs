//! Per-kernel dictionaries: the runs x events matrix that sparse selection
//! operates on, plus column normalization.

use std::fmt;

use crate::ingest::ProfileTable;

/// Identifies one dictionary row (one run configuration).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RowKey {
    pub workload: String,
    pub frequency_mhz: Option<u32>,
    /// Present only when replicates are kept as separate rows.
    pub replicate: Option<u32>,
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.workload)?;
        if let Some(mhz) = self.frequency_mhz {
            write!(f, "@{mhz}MHz")?;
        }
        if let Some(rep) = self.replicate {
            write!(f, "#{rep}")?;
        }
        Ok(())
    }
}

/// How records collapse into dictionary rows.
///
/// Rows are configurations, not samples, so replicates of the same
/// (workload, frequency) are averaged by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowKeySpec {
    #[default]
    AverageReplicates,
    KeepReplicates,
}

/// The collapsed per-row view of one kernel's records. Dictionaries and
/// target vectors are both derived from this, which keeps them aligned
/// row-for-row by construction.
#[derive(Debug, Clone)]
pub struct KernelRuns {
    pub kernel: String,
    pub rows: Vec<RunRow>,
    pub event_names: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunRow {
    pub key: RowKey,
    pub exec_time_s: f64,
    pub sm_utilization: f64,
    pub power_w: Option<f64>,
    /// Aligned with `KernelRuns::event_names`.
    pub events: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum DictionaryError {
    #[error("kernel `{0}` not present in the profile")]
    UnknownKernel(String),
    #[error("row selection for kernel `{0}` is empty")]
    EmptySelection(String),
    #[error("every column is constant; nothing to analyze")]
    AllColumnsConstant,
}

/// Collapses a kernel's records into ordered rows.
///
/// Rows are sorted by (workload, frequency, replicate), so the result does
/// not depend on the input record order when replicates are averaged.
pub fn select_runs(
    table: &ProfileTable,
    kernel: &str,
    spec: RowKeySpec,
) -> Result<KernelRuns, DictionaryError> {
    let records: Vec<_> = table
        .records()
        .iter()
        .filter(|r| r.kernel_name == kernel)
        .collect();
    if records.is_empty() {
        return Err(DictionaryError::UnknownKernel(kernel.to_string()));
    }

    // Event columns in sorted name order, so the dictionary layout does not
    // depend on how the profile happened to order its columns or rows.
    let event_names: Vec<String> = records[0].event_counts.keys().cloned().collect();

    let mut rows: Vec<RunRow> = match spec {
        RowKeySpec::KeepReplicates => records
            .iter()
            .map(|rec| RunRow {
                key: RowKey {
                    workload: rec.workload_id.clone(),
                    frequency_mhz: rec.frequency_mhz,
                    replicate: Some(rec.replicate),
                },
                exec_time_s: rec.exec_time_s,
                sm_utilization: rec.sm_utilization,
                power_w: rec.power_w,
                events: event_names.iter().map(|n| rec.event_counts[n]).collect(),
            })
            .collect(),
        RowKeySpec::AverageReplicates => {
            let mut groups: std::collections::BTreeMap<(String, Option<u32>), Vec<&_>> =
                std::collections::BTreeMap::new();
            for rec in &records {
                groups
                    .entry((rec.workload_id.clone(), rec.frequency_mhz))
                    .or_default()
                    .push(rec);
            }
            groups
                .into_iter()
                .map(|((workload, frequency_mhz), members)| {
                    let n = members.len() as f64;
                    let mean = |f: &dyn Fn(&&&crate::ingest::RunRecord) -> f64| {
                        members.iter().map(f).sum::<f64>() / n
                    };
                    let power_w = if members.iter().all(|m| m.power_w.is_some()) {
                        Some(members.iter().map(|m| m.power_w.unwrap()).sum::<f64>() / n)
                    } else {
                        None
                    };
                    RunRow {
                        key: RowKey {
                            workload,
                            frequency_mhz,
                            replicate: None,
                        },
                        exec_time_s: mean(&|m| m.exec_time_s),
                        sm_utilization: mean(&|m| m.sm_utilization),
                        power_w,
                        events: event_names
                            .iter()
                            .map(|name| mean(&|m| m.event_counts[name]))
                            .collect(),
                    }
                })
                .collect()
        }
    };
    rows.sort_by(|a, b| a.key.cmp(&b.key));

    if rows.is_empty() {
        return Err(DictionaryError::EmptySelection(kernel.to_string()));
    }
    Ok(KernelRuns {
        kernel: kernel.to_string(),
        rows,
        event_names,
    })
}

/// Column statistics captured from the raw counts, kept through
/// normalization so coefficients can be mapped back to raw scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std_dev: f64,
    pub norm: f64,
    pub min: f64,
    pub max: f64,
    pub is_constant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    UnitNorm,
    Zscore,
}

/// Runs x events matrix with labeled rows and columns. Stored column-major
/// since the solver works column-by-column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    n_rows: usize,
    values: Vec<f64>,
    row_labels: Vec<RowKey>,
    col_labels: Vec<String>,
    col_stats: Vec<ColumnStats>,
    dropped_constant: Vec<String>,
    normalization: Option<NormalizeMode>,
}

impl Dictionary {
    /// Builds the raw (unnormalized) dictionary for already-selected runs.
    pub fn from_runs(runs: &KernelRuns) -> Self {
        let n_rows = runs.rows.len();
        let n_cols = runs.event_names.len();
        let mut values = vec![0.0; n_rows * n_cols];
        for (c, col) in values.chunks_mut(n_rows).enumerate() {
            for (r, row) in runs.rows.iter().enumerate() {
                col[r] = row.events[c];
            }
        }
        let col_stats = (0..n_cols)
            .map(|c| column_stats(&values[c * n_rows..(c + 1) * n_rows]))
            .collect();
        Self {
            n_rows,
            values,
            row_labels: runs.rows.iter().map(|r| r.key.clone()).collect(),
            col_labels: runs.event_names.clone(),
            col_stats,
            dropped_constant: Vec::new(),
            normalization: None,
        }
    }

    /// Builds a dictionary directly from a labeled column-major matrix.
    /// Intended for synthetic inputs and tests.
    pub fn from_columns(
        row_labels: Vec<RowKey>,
        col_labels: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Self {
        let n_rows = row_labels.len();
        assert_eq!(col_labels.len(), columns.len());
        let mut values = Vec::with_capacity(n_rows * columns.len());
        for col in &columns {
            assert_eq!(col.len(), n_rows, "ragged column");
            values.extend_from_slice(col);
        }
        let col_stats = columns.iter().map(|c| column_stats(c)).collect();
        Self {
            n_rows,
            values,
            row_labels,
            col_labels,
            col_stats,
            dropped_constant: Vec::new(),
            normalization: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_rows..(c + 1) * self.n_rows]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[c * self.n_rows + r]
    }

    pub fn row_labels(&self) -> &[RowKey] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn col_stats(&self) -> &[ColumnStats] {
        &self.col_stats
    }

    /// Columns dropped by [`normalize_columns`] because they carried no
    /// signal (constant over all rows).
    pub fn dropped_constant(&self) -> &[String] {
        &self.dropped_constant
    }

    pub fn normalization(&self) -> Option<NormalizeMode> {
        self.normalization
    }

    /// New dictionary keeping only the given columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut values = Vec::with_capacity(keep.len() * self.n_rows);
        for &c in keep {
            values.extend_from_slice(self.column(c));
        }
        Self {
            n_rows: self.n_rows,
            values,
            row_labels: self.row_labels.clone(),
            col_labels: keep.iter().map(|&c| self.col_labels[c].clone()).collect(),
            col_stats: keep.iter().map(|&c| self.col_stats[c]).collect(),
            dropped_constant: self.dropped_constant.clone(),
            normalization: self.normalization,
        }
    }

    /// New dictionary keeping only the given rows, in the given order.
    /// Column statistics are recomputed for the subset; any normalization
    /// of the parent is discarded.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let n_rows = keep.len();
        let n_cols = self.n_cols();
        let mut values = vec![0.0; n_rows * n_cols];
        for c in 0..n_cols {
            let src = self.column(c);
            for (r_new, &r_old) in keep.iter().enumerate() {
                values[c * n_rows + r_new] = src[r_old];
            }
        }
        let col_stats = (0..n_cols)
            .map(|c| column_stats(&values[c * n_rows..(c + 1) * n_rows]))
            .collect();
        Self {
            n_rows,
            values,
            row_labels: keep.iter().map(|&r| self.row_labels[r].clone()).collect(),
            col_labels: self.col_labels.clone(),
            col_stats,
            dropped_constant: Vec::new(),
            normalization: None,
        }
    }
}

fn column_stats(col: &[f64]) -> ColumnStats {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
    let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Relative spread test; a column whose values agree to ~1e-12 of their
    // magnitude carries no selectable signal.
    let scale = min.abs().max(max.abs()).max(1.0);
    let is_constant = (max - min).abs() <= 1e-12 * scale;
    ColumnStats {
        mean,
        std_dev: var.sqrt(),
        norm,
        min,
        max,
        is_constant,
    }
}

/// Convenience wrapper: select rows for `kernel` and build the raw dictionary.
pub fn build_dictionary(
    table: &ProfileTable,
    kernel: &str,
    spec: RowKeySpec,
) -> Result<Dictionary, DictionaryError> {
    Ok(Dictionary::from_runs(&select_runs(table, kernel, spec)?))
}

/// Drops constant columns and rescales the rest.
///
/// `UnitNorm` divides each column by its Euclidean norm. `Zscore` first
/// centers by the mean and divides by the (population) standard deviation,
/// then rescales to unit norm, so either mode yields unit-norm columns as
/// the correlation step requires. Original statistics stay in `col_stats`.
pub fn normalize_columns(
    d: &Dictionary,
    mode: NormalizeMode,
) -> Result<Dictionary, DictionaryError> {
    let retained: Vec<usize> = (0..d.n_cols())
        .filter(|&c| !d.col_stats[c].is_constant)
        .collect();
    if retained.is_empty() {
        return Err(DictionaryError::AllColumnsConstant);
    }
    let mut out = d.select_columns(&retained);
    out.dropped_constant = (0..d.n_cols())
        .filter(|&c| d.col_stats[c].is_constant)
        .map(|c| d.col_labels[c].clone())
        .collect();

    let n = out.n_rows;
    for c in 0..out.n_cols() {
        let stats = out.col_stats[c];
        let col = &mut out.values[c * n..(c + 1) * n];
        match mode {
            NormalizeMode::UnitNorm => {
                for v in col.iter_mut() {
                    *v /= stats.norm;
                }
            }
            NormalizeMode::Zscore => {
                for v in col.iter_mut() {
                    *v = (*v - stats.mean) / stats.std_dev;
                }
                let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in col.iter_mut() {
                    *v /= norm;
                }
            }
        }
    }
    out.normalization = Some(mode);
    Ok(out)
}
