//! Performance-counter attribution toolkit.
//!
//! Ingests per-kernel GPU hardware-counter profiles, identifies which
//! hardware resources statistically explain execution time, compute-unit
//! utilization loss, or a composite of both via ensemble sparse coding,
//! compares resource usage between code variants, and emits ranked reports,
//! charts, and rule-based optimization suggestions.
//!
//! The analysis chain is: ingest a profile CSV, build a per-kernel
//! runs x events dictionary, compute a target vector, run the randomized
//! matching-pursuit ensemble, turn per-event reconstruction errors into
//! beliefs, aggregate beliefs into per-resource significance, and feed the
//! normalized result to the visualization and suggestion layers.

pub mod comparative;
pub mod config;
pub mod dictionary;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod rsm;
pub mod sparse;
pub mod suggest;
pub mod sunburst;
pub mod svg;
pub mod targets;

pub use dictionary::{build_dictionary, normalize_columns, Dictionary, NormalizeMode, RowKeySpec};
pub use ingest::{parse_profile_csv, write_profile_csv, ColumnSchema, ProfileTable};
pub use model::{categorize_event, load_model, partition_columns, Categorization, MachineModel};
pub use rsm::{beliefs, normalize_rsm, resource_rsm, BeliefVector, RsmReport};
pub use sparse::{ensemble_omp, ensemble_omp_sequential, omp, EnsembleParams, EnsembleResult};
pub use targets::{
    alpha_of, compute_score, compute_ts, compute_util_loss, AlphaBuckets, TargetKind,
};
