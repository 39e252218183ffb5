//! Counter-profile ingestion.
//!
//! Profiles arrive as UTF-8 CSV with one row per kernel invocation sample.
//! A [`ColumnSchema`] names the metadata columns; every remaining column is
//! treated as a hardware performance event. Empty event cells mean "not
//! collected for this run", which lets kernels with different event sets
//! share one file, but within a single kernel every row must carry the same
//! event set.

use std::collections::BTreeMap;
use std::io::{Read, Write};

/// Names of the metadata columns in a profile CSV.
///
/// Defaults follow the documented file format: `kernel`, `workload`,
/// `frequency_mhz`, `time_s`, `sm_util`, `power_w`. The frequency and power
/// columns are optional; the others are required.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    pub kernel: String,
    pub workload: String,
    pub frequency: String,
    pub time: String,
    pub utilization: String,
    pub power: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            kernel: "kernel".into(),
            workload: "workload".into(),
            frequency: "frequency_mhz".into(),
            time: "time_s".into(),
            utilization: "sm_util".into(),
            power: "power_w".into(),
        }
    }
}

/// One kernel invocation sample: timing/utilization metadata plus the raw
/// event counts recorded for it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub kernel_name: String,
    /// Input-parameter label, e.g. `1100x1600`.
    pub workload_id: String,
    pub frequency_mhz: Option<u32>,
    pub exec_time_s: f64,
    /// Fraction of time the compute units were busy, in [0, 1].
    pub sm_utilization: f64,
    pub power_w: Option<f64>,
    pub event_counts: BTreeMap<String, f64>,
    /// Occurrence index among records sharing (kernel, workload, frequency),
    /// assigned in input order. Makes every record uniquely addressable.
    pub replicate: u32,
}

/// Validated collection of run records plus the ordered union of all event
/// names seen anywhere in the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    records: Vec<RunRecord>,
    event_universe: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cell `{value}` is not numeric")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: sm utilization {value} outside [0, 1]")]
    UtilizationOutOfRange { row: usize, value: f64 },
    #[error("row {row}, column `{column}`: negative value {value}")]
    NegativeValue {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("row {row}: frequency must be a positive integer")]
    InvalidFrequency { row: usize },
    #[error("kernel `{0}`: records disagree on the recorded event set")]
    InconsistentEventSet(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ProfileTable {
    /// Builds a table from records constructed in code, re-deriving replicate
    /// indices and the event universe, and enforcing the same invariants as
    /// CSV ingestion.
    pub fn from_records(mut records: Vec<RunRecord>) -> Result<Self, IngestError> {
        let mut replicate_counts: BTreeMap<(String, String, Option<u32>), u32> = BTreeMap::new();
        let mut universe: Vec<String> = Vec::new();
        for (i, rec) in records.iter_mut().enumerate() {
            let row = i + 1;
            validate_record(rec, row)?;
            let key = (
                rec.kernel_name.clone(),
                rec.workload_id.clone(),
                rec.frequency_mhz,
            );
            let n = replicate_counts.entry(key).or_insert(0);
            rec.replicate = *n;
            *n += 1;
            for name in rec.event_counts.keys() {
                if !universe.iter().any(|u| u == name) {
                    universe.push(name.clone());
                }
            }
        }
        check_event_consistency(&records)?;
        Ok(Self {
            records,
            event_universe: universe,
        })
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn event_universe(&self) -> &[String] {
        &self.event_universe
    }

    /// Kernel names in first-appearance order, deduplicated.
    pub fn kernels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for rec in &self.records {
            if !out.contains(&rec.kernel_name.as_str()) {
                out.push(&rec.kernel_name);
            }
        }
        out
    }
}

fn validate_record(rec: &RunRecord, row: usize) -> Result<(), IngestError> {
    if !(0.0..=1.0).contains(&rec.sm_utilization) {
        return Err(IngestError::UtilizationOutOfRange {
            row,
            value: rec.sm_utilization,
        });
    }
    if rec.exec_time_s < 0.0 || !rec.exec_time_s.is_finite() {
        return Err(IngestError::NegativeValue {
            row,
            column: "time".into(),
            value: rec.exec_time_s,
        });
    }
    if let Some(p) = rec.power_w {
        if p < 0.0 || !p.is_finite() {
            return Err(IngestError::NegativeValue {
                row,
                column: "power".into(),
                value: p,
            });
        }
    }
    if rec.frequency_mhz == Some(0) {
        return Err(IngestError::InvalidFrequency { row });
    }
    for (name, &v) in &rec.event_counts {
        if v < 0.0 || !v.is_finite() {
            return Err(IngestError::NegativeValue {
                row,
                column: name.clone(),
                value: v,
            });
        }
    }
    Ok(())
}

fn check_event_consistency(records: &[RunRecord]) -> Result<(), IngestError> {
    let mut per_kernel: BTreeMap<&str, &BTreeMap<String, f64>> = BTreeMap::new();
    for rec in records {
        match per_kernel.get(rec.kernel_name.as_str()) {
            None => {
                per_kernel.insert(&rec.kernel_name, &rec.event_counts);
            }
            Some(first) => {
                let same = first.len() == rec.event_counts.len()
                    && first
                        .keys()
                        .zip(rec.event_counts.keys())
                        .all(|(a, b)| a == b);
                if !same {
                    return Err(IngestError::InconsistentEventSet(rec.kernel_name.clone()));
                }
            }
        }
    }
    Ok(())
}

/// Parses a profile CSV into a [`ProfileTable`].
///
/// Row numbers in errors are 1-based over data rows (the header is row 0).
pub fn parse_profile_csv<R: Read>(
    source: R,
    schema: &ColumnSchema,
) -> Result<ProfileTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);

    let kernel_idx = index_of(&schema.kernel)
        .ok_or_else(|| IngestError::MissingColumn(schema.kernel.clone()))?;
    let workload_idx = index_of(&schema.workload)
        .ok_or_else(|| IngestError::MissingColumn(schema.workload.clone()))?;
    let time_idx =
        index_of(&schema.time).ok_or_else(|| IngestError::MissingColumn(schema.time.clone()))?;
    let util_idx = index_of(&schema.utilization)
        .ok_or_else(|| IngestError::MissingColumn(schema.utilization.clone()))?;
    let frequency_idx = index_of(&schema.frequency);
    let power_idx = index_of(&schema.power);

    let meta_indices: Vec<usize> = [
        Some(kernel_idx),
        Some(workload_idx),
        Some(time_idx),
        Some(util_idx),
        frequency_idx,
        power_idx,
    ]
    .into_iter()
    .flatten()
    .collect();

    // Everything that is not metadata is an event column, in header order.
    let event_columns: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !meta_indices.contains(i))
        .map(|(i, name)| (i, name.to_string()))
        .collect();

    let parse_f64 = |cell: &str, row: usize, column: &str| -> Result<f64, IngestError> {
        cell.trim()
            .parse::<f64>()
            .map_err(|_| IngestError::NonNumericCell {
                row,
                column: column.to_string(),
                value: cell.to_string(),
            })
    };

    let mut records = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result?;
        let cell = |idx: usize| record.get(idx).unwrap_or("");

        let exec_time_s = parse_f64(cell(time_idx), row, &schema.time)?;
        let sm_utilization = parse_f64(cell(util_idx), row, &schema.utilization)?;

        let frequency_mhz = match frequency_idx.map(cell) {
            None | Some("") => None,
            Some(raw) => {
                let v: i64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| IngestError::NonNumericCell {
                        row,
                        column: schema.frequency.clone(),
                        value: raw.to_string(),
                    })?;
                if v <= 0 || v > u32::MAX as i64 {
                    return Err(IngestError::InvalidFrequency { row });
                }
                Some(v as u32)
            }
        };
        let power_w = match power_idx.map(cell) {
            None | Some("") => None,
            Some(raw) => Some(parse_f64(raw, row, &schema.power)?),
        };

        let mut event_counts = BTreeMap::new();
        for (idx, name) in &event_columns {
            let raw = cell(*idx);
            if raw.is_empty() {
                continue; // event not collected for this run
            }
            event_counts.insert(name.clone(), parse_f64(raw, row, name)?);
        }

        let rec = RunRecord {
            kernel_name: cell(kernel_idx).to_string(),
            workload_id: cell(workload_idx).to_string(),
            frequency_mhz,
            exec_time_s,
            sm_utilization,
            power_w,
            event_counts,
            replicate: 0,
        };
        validate_record(&rec, row)?;
        records.push(rec);
    }

    // Keep the file's event-column order for the universe so that writing
    // the table back out reproduces the input byte layout of the header.
    let mut table = ProfileTable::from_records(records)?;
    let ordered: Vec<String> = event_columns
        .iter()
        .map(|(_, n)| n.clone())
        .filter(|n| table.event_universe.iter().any(|u| u == n))
        .collect();
    table.event_universe = ordered;
    Ok(table)
}

/// Serializes a table back to CSV. Re-parsing the output yields a table equal
/// field-for-field to the input (floats are written in shortest round-trip
/// form; absent optionals become empty cells).
pub fn write_profile_csv<W: Write>(
    table: &ProfileTable,
    schema: &ColumnSchema,
    sink: W,
) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(sink);

    let mut header: Vec<&str> = vec![
        &schema.kernel,
        &schema.workload,
        &schema.frequency,
        &schema.time,
        &schema.utilization,
        &schema.power,
    ];
    header.extend(table.event_universe.iter().map(String::as_str));
    writer.write_record(&header)?;

    for rec in &table.records {
        let mut row: Vec<String> = vec![
            rec.kernel_name.clone(),
            rec.workload_id.clone(),
            rec.frequency_mhz.map(|f| f.to_string()).unwrap_or_default(),
            format!("{}", rec.exec_time_s),
            format!("{}", rec.sm_utilization),
            rec.power_w.map(|p| format!("{p}")).unwrap_or_default(),
        ];
        for name in &table.event_universe {
            row.push(
                rec.event_counts
                    .get(name)
                    .map(|v| format!("{v}"))
                    .unwrap_or_default(),
            );
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProfileTable, IngestError> {
        parse_profile_csv(text.as_bytes(), &ColumnSchema::default())
    }

    #[test]
    fn minimal_well_formed_file() {
        let table = parse(
            "kernel,workload,time_s,sm_util,ev_a\n\
             k1,w1,1.0,0.5,10\n\
             k1,w2,2.0,0.6,20\n",
        )
        .unwrap();
        assert_eq!(table.records().len(), 2);
        assert_eq!(table.event_universe(), ["ev_a".to_string()]);
        assert_eq!(table.records()[0].event_counts["ev_a"], 10.0);
        assert_eq!(table.records()[1].exec_time_s, 2.0);
        assert_eq!(table.records()[0].frequency_mhz, None);
    }

    #[test]
    fn utilization_out_of_range_reports_row() {
        let err = parse(
            "kernel,workload,time_s,sm_util,ev_a\n\
             k1,w1,1.0,0.5,10\n\
             k1,w2,2.0,1.7,20\n",
        )
        .unwrap_err();
        match err {
            IngestError::UtilizationOutOfRange { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inconsistent_event_set_names_kernel() {
        // k1 records ev_a in one row and ev_b in another.
        let err = parse(
            "kernel,workload,time_s,sm_util,ev_a,ev_b\n\
             k1,w1,1.0,0.5,10,\n\
             k1,w2,2.0,0.6,,20\n",
        )
        .unwrap_err();
        match err {
            IngestError::InconsistentEventSet(kernel) => assert_eq!(kernel, "k1"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_coordinates() {
        let err = parse(
            "kernel,workload,time_s,sm_util,ev_a\n\
             k1,w1,1.0,0.5,oops\n",
        )
        .unwrap_err();
        match err {
            IngestError::NonNumericCell { row, column, .. } => {
                assert_eq!((row, column.as_str()), (1, "ev_a"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_required_column() {
        let err = parse("kernel,workload,time_s,ev_a\nk1,w1,1.0,10\n").unwrap_err();
        match err {
            IngestError::MissingColumn(name) => assert_eq!(name, "sm_util"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn replicates_are_indexed_in_input_order() {
        let table = parse(
            "kernel,workload,frequency_mhz,time_s,sm_util,ev_a\n\
             k1,w1,1000,1.0,0.5,10\n\
             k1,w1,1000,1.2,0.5,30\n\
             k1,w1,900,1.5,0.5,40\n",
        )
        .unwrap();
        let reps: Vec<u32> = table.records().iter().map(|r| r.replicate).collect();
        assert_eq!(reps, [0, 1, 0]);
    }

    #[test]
    fn round_trip_preserves_table() {
        let table = parse(
            "kernel,workload,frequency_mhz,time_s,sm_util,power_w,ev_a,ev_b\n\
             k1,w1,1530,1.25,0.5,110.5,10,0.125\n\
             k1,w2,,2.5,0.625,,20,7\n\
             k2,w1,945,0.75,0.875,90,3,\n",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&table, &ColumnSchema::default(), &mut buf).unwrap();
        let reparsed = parse_profile_csv(buf.as_slice(), &ColumnSchema::default()).unwrap();
        assert_eq!(table, reparsed);
    }
}
