//! End-to-end orchestration: config in, `report.json` and SVG charts out.
//!
//! For every task/kernel pair the chain is ingest -> dictionary -> target ->
//! ensemble -> beliefs -> significance -> normalize -> suggestions; each
//! configured comparison additionally runs the differential pipeline. All
//! output files are written atomically (temp file then rename) and the
//! report content is independent of wall-clock time; volatile metadata goes
//! to `run_meta.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::comparative::{align_pairs, comparative_rsm, PairJoinKey};
use crate::config::{parse_endpoint, HyperParams, KernelSelect, TaskConfig, TaskSpec, WorkloadKey};
use crate::dictionary::{
    normalize_columns, select_runs, Dictionary, KernelRuns, NormalizeMode, RowKeySpec,
};
use crate::ingest::{parse_profile_csv, ProfileTable};
use crate::model::{load_model, partition_columns, MachineModel};
use crate::report::{
    AlphaOut, ComparisonEntry, ComparisonReport, EventEntry, KernelReport, Report, ResourceEntry,
    SuggestionSettingsOut, TaskReport,
};
use crate::rsm::{average_over_workloads, beliefs, normalize_rsm, resource_rsm, RsmReport};
use crate::sparse::{ensemble_omp, EnsembleParams};
use crate::suggest::{load_rules, suggest, SuggestionRule};
use crate::sunburst::build_sunburst;
use crate::svg::{render_compare, render_sunburst};
use crate::targets::{
    compute_score, global_max_time, ts_from_runs, util_loss_from_runs, TargetKind, TargetVector,
};

/// CLI-level overrides; they win over both global and per-task config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub kappa: Option<f64>,
    pub tau: Option<usize>,
    pub gamma: Option<f64>,
}

/// Errors classified by pipeline stage; the CLI maps the class to its exit
/// code (config 2, data 3, analysis 4).
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("analysis error: {0}")]
    Analysis(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Analysis(_) => 4,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub report_path: PathBuf,
    pub svg_paths: Vec<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Derives a per-workload seed stream; splitmix-style so neighboring
/// workload indices do not correlate.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sanitize_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| PipelineError::Analysis(format!("writing {}: {e}", path.display())))
}

/// Runs every configured task and comparison, writing `report.json`,
/// `run_meta.json`, one `sunburst_<task>.svg` per task, and one
/// `compare_<pair>.svg` per comparison into the output directory.
///
/// `config_dir` anchors the relative paths inside the config.
pub fn run(
    config: &TaskConfig,
    config_dir: &Path,
    overrides: &Overrides,
) -> Result<RunOutput, PipelineError> {
    let started = std::time::Instant::now();
    config
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let model = match &config.model {
        None => MachineModel::default_volta(),
        Some(path) => {
            let path = resolve(config_dir, path);
            let text = fs::read_to_string(&path).map_err(|e| {
                PipelineError::Config(format!("reading model {}: {e}", path.display()))
            })?;
            load_model(&text).map_err(|e| PipelineError::Config(e.to_string()))?
        }
    };
    let rules = match &config.rules {
        None => load_rules(None, &model),
        Some(path) => {
            let path = resolve(config_dir, path);
            let text = fs::read_to_string(&path).map_err(|e| {
                PipelineError::Config(format!("reading rules {}: {e}", path.display()))
            })?;
            load_rules(Some(&text), &model)
        }
    }
    .map_err(|e| PipelineError::Config(e.to_string()))?;

    let data_path = resolve(config_dir, &config.data);
    let file = fs::File::open(&data_path)
        .map_err(|e| PipelineError::Data(format!("reading {}: {e}", data_path.display())))?;
    let table = parse_profile_csv(file, &config.schema)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", data_path.display())))?;

    let seed = overrides.seed.unwrap_or(config.seed);
    let global_hyper = apply_overrides(&config.hyperparams, overrides);
    global_hyper
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let max_time = global_max_time(&table, RowKeySpec::AverageReplicates)
        .map_err(|e| PipelineError::Data(e.to_string()))?;

    let analyzer = Analyzer {
        table: &table,
        model: &model,
        rules: &rules,
        config,
        max_time,
        seed,
    };

    let mut tasks_out = BTreeMap::new();
    for (task_name, task) in &config.tasks {
        let hyper = apply_overrides(
            &match &task.hyperparams {
                Some(over) => config.hyperparams.merged_with(over),
                None => config.hyperparams,
            },
            overrides,
        );
        hyper
            .validate()
            .map_err(|e| PipelineError::Config(format!("task `{task_name}`: {e}")))?;

        let kernels = analyzer.resolve_kernels(task)?;
        let mut kernels_out = BTreeMap::new();
        for kernel in kernels {
            let report = analyzer.analyze_kernel(&kernel, task, &hyper)?;
            kernels_out.insert(kernel, report);
        }
        tasks_out.insert(
            task_name.clone(),
            TaskReport {
                target: task.target.to_string(),
                hyperparams: hyper,
                workload_key: task.workload_key.map(|k| {
                    match k {
                        WorkloadKey::Workload => "workload",
                        WorkloadKey::WorkloadFrequency => "workload_frequency",
                    }
                    .to_string()
                }),
                kernels: kernels_out,
            },
        );
    }

    let mut comparisons_out = BTreeMap::new();
    for spec in &config.comparisons {
        let (name, report) = analyzer.run_comparison(spec, &global_hyper)?;
        comparisons_out.insert(name, report);
    }

    let app = config.app.clone().unwrap_or_else(|| {
        data_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "profile".to_string())
    });
    let report = Report {
        app,
        seed,
        hyperparams: global_hyper,
        alpha: AlphaOut {
            low: config.alpha.low,
            moderate: config.alpha.moderate,
            high: config.alpha.high,
        },
        suggestion_settings: SuggestionSettingsOut {
            top_k: config.suggestions.top_k,
            threshold: config.suggestions.threshold,
        },
        model_groups: model.group_names().iter().map(|s| s.to_string()).collect(),
        tasks: tasks_out,
        comparisons: comparisons_out,
    };

    // A CLI --out is relative to the caller's working directory; only
    // paths written inside the config resolve against the config file.
    let out_dir = overrides
        .output_dir
        .clone()
        .or_else(|| config.output_dir.as_ref().map(|p| resolve(config_dir, p)))
        .unwrap_or_else(|| config_dir.join("out"));
    fs::create_dir_all(&out_dir)
        .map_err(|e| PipelineError::Analysis(format!("creating {}: {e}", out_dir.display())))?;

    let report_path = out_dir.join("report.json");
    write_atomic(&report_path, report.to_canonical_json().as_bytes())?;

    let svg_paths = render_all(&report, &out_dir)?;

    let meta = serde_json::json!({
        "tool": "rsmkit",
        "version": env!("CARGO_PKG_VERSION"),
        "duration_ms": started.elapsed().as_millis() as u64,
        "unix_time_s": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    write_atomic(
        &out_dir.join("run_meta.json"),
        format!("{meta:#}\n").as_bytes(),
    )?;

    Ok(RunOutput {
        report,
        report_path,
        svg_paths,
    })
}

/// Regenerates every SVG view from an existing report (`--render-only`).
pub fn render_all(report: &Report, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut svg_paths = Vec::new();
    for (task_name, task) in &report.tasks {
        let tree = build_sunburst(&report.app, &task.kernels);
        let path = out_dir.join(format!("sunburst_{}.svg", sanitize_file_stem(task_name)));
        write_atomic(&path, render_sunburst(&tree).as_bytes())?;
        svg_paths.push(path);
    }
    for (name, comparison) in &report.comparisons {
        let path = out_dir.join(format!("compare_{}.svg", sanitize_file_stem(name)));
        write_atomic(&path, render_compare(comparison).as_bytes())?;
        svg_paths.push(path);
    }
    Ok(svg_paths)
}

fn apply_overrides(hyper: &HyperParams, over: &Overrides) -> HyperParams {
    HyperParams {
        kappa: over.kappa.unwrap_or(hyper.kappa),
        tau: over.tau.unwrap_or(hyper.tau),
        draws: over.draws.unwrap_or(hyper.draws),
        gamma: over.gamma.unwrap_or(hyper.gamma),
        fidelity_epsilon: hyper.fidelity_epsilon,
    }
}

struct Analyzer<'a> {
    table: &'a ProfileTable,
    model: &'a MachineModel,
    rules: &'a [SuggestionRule],
    config: &'a TaskConfig,
    max_time: f64,
    seed: u64,
}

impl Analyzer<'_> {
    fn resolve_kernels(&self, task: &TaskSpec) -> Result<Vec<String>, PipelineError> {
        match &task.kernels {
            KernelSelect::Keyword(_) => {
                let mut names: Vec<String> =
                    self.table.kernels().iter().map(|k| k.to_string()).collect();
                names.sort();
                Ok(names)
            }
            KernelSelect::List(list) => {
                for kernel in list {
                    if !self.table.kernels().contains(&kernel.as_str()) {
                        return Err(PipelineError::Data(format!(
                            "kernel `{kernel}` not present in the profile"
                        )));
                    }
                }
                Ok(list.clone())
            }
        }
    }

    fn target_for(
        &self,
        runs: &KernelRuns,
        kind: TargetKind,
    ) -> Result<TargetVector, PipelineError> {
        let to_analysis = |e: crate::targets::TargetError| PipelineError::Analysis(e.to_string());
        match kind {
            TargetKind::Ts => ts_from_runs(runs, self.max_time).map_err(to_analysis),
            TargetKind::UtilLoss => Ok(util_loss_from_runs(runs)),
            TargetKind::Score => {
                let ts = ts_from_runs(runs, self.max_time).map_err(to_analysis)?;
                let utilization: Vec<f64> = runs.rows.iter().map(|r| r.sm_utilization).collect();
                compute_score(&ts, &utilization, &self.config.alpha, true).map_err(to_analysis)
            }
        }
    }

    /// Row-index groups for the workload averaging, keyed by label, in key
    /// order. One group covering everything when no key is configured.
    fn workload_groups(
        &self,
        runs: &KernelRuns,
        key: Option<WorkloadKey>,
    ) -> Vec<(String, Vec<usize>)> {
        match key {
            None => vec![("all".to_string(), (0..runs.rows.len()).collect())],
            Some(key) => {
                let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
                for (i, row) in runs.rows.iter().enumerate() {
                    let label = match key {
                        WorkloadKey::Workload => row.key.workload.clone(),
                        WorkloadKey::WorkloadFrequency => match row.key.frequency_mhz {
                            Some(f) => format!("{}@{}MHz", row.key.workload, f),
                            None => row.key.workload.clone(),
                        },
                    };
                    groups.entry(label).or_default().push(i);
                }
                groups.into_iter().collect()
            }
        }
    }

    fn analyze_kernel(
        &self,
        kernel: &str,
        task: &TaskSpec,
        hyper: &HyperParams,
    ) -> Result<KernelReport, PipelineError> {
        let runs = select_runs(self.table, kernel, RowKeySpec::AverageReplicates)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        let raw = Dictionary::from_runs(&runs);

        // Hit-style events never enter the analysis.
        let raw_partition = partition_columns(&raw, self.model);
        let excluded_events: Vec<String> = raw_partition
            .excluded
            .iter()
            .map(|&c| raw.col_labels()[c].clone())
            .collect();
        let keep: Vec<usize> = (0..raw.n_cols())
            .filter(|c| !raw_partition.excluded.contains(c))
            .collect();
        if keep.is_empty() {
            return Err(PipelineError::Analysis(format!(
                "kernel `{kernel}`: every event is excluded by the machine model"
            )));
        }
        let analyzed = raw.select_columns(&keep);
        let uncategorized_events: Vec<String> = partition_columns(&analyzed, self.model)
            .uncategorized
            .iter()
            .map(|&c| analyzed.col_labels()[c].clone())
            .collect();

        let target = self.target_for(&runs, task.target)?;

        let groups = self.workload_groups(&runs, task.workload_key);
        let single_group = task.workload_key.is_none();
        let mut per_workload: Vec<(String, RsmReport)> = Vec::new();
        // Selection frequencies and averaged coefficients per event label,
        // averaged over workloads with the same missing-as-zero convention
        // as beliefs.
        let mut freq_sums: BTreeMap<String, f64> = BTreeMap::new();
        let mut coeff_sums: BTreeMap<String, f64> = BTreeMap::new();

        for (index, (label, rows)) in groups.iter().enumerate() {
            let sub = analyzed.select_rows(rows);
            let normalized = normalize_columns(&sub, NormalizeMode::UnitNorm).map_err(|e| {
                PipelineError::Analysis(format!("kernel `{kernel}`, workload `{label}`: {e}"))
            })?;
            let sub_target = TargetVector {
                kind: target.kind,
                values: rows.iter().map(|&r| target.values[r]).collect(),
                row_labels: rows.iter().map(|&r| target.row_labels[r].clone()).collect(),
                normalization: target.normalization,
            };
            let params = EnsembleParams {
                kappa: hyper.kappa,
                tau: hyper.tau,
                draws: hyper.draws,
                seed: if single_group {
                    self.seed
                } else {
                    mix_seed(self.seed, index as u64)
                },
                fidelity_epsilon: hyper.fidelity_epsilon,
            };
            let ensemble = ensemble_omp(&normalized, &sub_target, &params)
                .map_err(|e| PipelineError::Analysis(format!("kernel `{kernel}`: {e}")))?;
            let believed = beliefs(&normalized, &sub_target, &ensemble, hyper.gamma);
            let partition = partition_columns(&normalized, self.model);
            let rsm = resource_rsm(&believed, &partition, normalized.col_labels())
                .map_err(|e| PipelineError::Analysis(format!("kernel `{kernel}`: {e}")))?;
            for (c, event) in normalized.col_labels().iter().enumerate() {
                *freq_sums.entry(event.clone()).or_insert(0.0) += ensemble.selection_frequency[c];
                *coeff_sums.entry(event.clone()).or_insert(0.0) += ensemble.avg_coefficients[c];
            }
            per_workload.push((label.clone(), rsm));
        }

        let combined = if single_group {
            per_workload.pop().expect("one group").1
        } else {
            average_over_workloads(&per_workload)
        };
        let normalized_rsm = normalize_rsm(&combined)
            .map_err(|e| PipelineError::Analysis(format!("kernel `{kernel}`: {e}")))?;

        let suggestions = suggest(
            kernel,
            &normalized_rsm,
            self.rules,
            self.config.suggestions.top_k,
            self.config.suggestions.threshold,
        )
        .map_err(|e| PipelineError::Analysis(e.to_string()))?;

        // Events constant in every analyzed subset never entered a pursuit;
        // they are reported with belief zero.
        let w = groups.len() as f64;
        let mut events = BTreeMap::new();
        let mut dropped_constant = Vec::new();
        for label in analyzed.col_labels() {
            let belief = combined.per_event.get(label).copied().unwrap_or(0.0);
            if !combined.per_event.contains_key(label) {
                dropped_constant.push(label.clone());
            }
            let group = match crate::model::categorize_event(label, self.model) {
                crate::model::Categorization::Group(g) => g,
                _ => crate::rsm::UNCATEGORIZED_GROUP.to_string(),
            };
            events.insert(
                label.clone(),
                EventEntry {
                    group,
                    belief,
                    selection_frequency: freq_sums.get(label).copied().unwrap_or(0.0) / w,
                    avg_coefficient: coeff_sums.get(label).copied().unwrap_or(0.0) / w,
                },
            );
        }

        let resources = normalized_rsm
            .per_resource
            .iter()
            .map(|(group, &share)| {
                (
                    group.clone(),
                    ResourceEntry {
                        rsm: combined.per_resource[group],
                        rsm_normalized: share,
                    },
                )
            })
            .collect();

        Ok(KernelReport {
            rows: runs.rows.len(),
            events_analyzed: analyzed.n_cols(),
            target_normalization: target.normalization.into(),
            excluded_events,
            uncategorized_events,
            dropped_constant_events: dropped_constant,
            resources,
            events,
            workloads: combined.workload_breakdown.clone(),
            suggestions: suggestions.fired.into_iter().map(Into::into).collect(),
        })
    }

    fn run_comparison(
        &self,
        spec: &crate::config::ComparisonSpec,
        hyper: &HyperParams,
    ) -> Result<(String, ComparisonReport), PipelineError> {
        let first =
            parse_endpoint(&spec.pair[0]).map_err(|e| PipelineError::Config(e.to_string()))?;
        let second =
            parse_endpoint(&spec.pair[1]).map_err(|e| PipelineError::Config(e.to_string()))?;
        let kind = self.config.tasks[&first.task].target;
        let join = spec.join.unwrap_or_default();

        let runs1 = select_runs(self.table, &first.kernel, RowKeySpec::AverageReplicates)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        let runs2 = select_runs(self.table, &second.kernel, RowKeySpec::AverageReplicates)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        let target1 = self.target_for(&runs1, kind)?;
        let target2 = self.target_for(&runs2, kind)?;

        let pair = align_pairs(
            self.table,
            &first.kernel,
            &target1,
            self.table,
            &second.kernel,
            &target2,
            join,
        )
        .map_err(|e| PipelineError::Analysis(e.to_string()))?;

        let params = EnsembleParams {
            kappa: hyper.kappa,
            tau: hyper.tau,
            draws: hyper.draws,
            seed: self.seed,
            fidelity_epsilon: hyper.fidelity_epsilon,
        };
        let result = comparative_rsm(&pair, self.model, &params, hyper.gamma)
            .map_err(|e| PipelineError::Analysis(e.to_string()))?;

        let resources = result
            .per_resource
            .into_iter()
            .map(|(group, entry)| {
                (
                    group,
                    ComparisonEntry {
                        neg_rsm: entry.neg_rsm,
                        pos_rsm: entry.pos_rsm,
                        rel_change: entry.rel_change,
                        rel_change_defined: entry.rel_change.is_some(),
                        bar_value: entry.bar_value,
                    },
                )
            })
            .collect();

        let name = format!(
            "{}_vs_{}",
            sanitize_file_stem(&spec.pair[0]),
            sanitize_file_stem(&spec.pair[1])
        );
        Ok((
            name,
            ComparisonReport {
                pair: spec.pair.clone(),
                join: match join {
                    PairJoinKey::Workload => "workload",
                    PairJoinKey::WorkloadFrequency => "workload_frequency",
                }
                .to_string(),
                rows_matched: pair.d1.n_rows(),
                dropped_rows: pair.dropped_rows,
                dropped_columns: pair.dropped_columns,
                resources,
            },
        ))
    }
}
