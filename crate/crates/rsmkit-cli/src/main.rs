//! `rsmkit` command line: runs task configurations and renders reports.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 data errors,
//! 4 analysis errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsmkit::config::load_task_config;
use rsmkit::pipeline::{self, Overrides, PipelineError};
use rsmkit::report::Report;

#[derive(Parser)]
#[command(
    name = "rsmkit",
    version,
    about = "GPU counter-profile attribution toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses described by a task configuration file.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Task configuration file (TOML).
    config: PathBuf,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ensemble seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble draw count override.
    #[arg(long)]
    draws: Option<usize>,
    /// Sparsity fraction override, in (0, 1].
    #[arg(long)]
    kappa: Option<f64>,
    /// Candidate-set size override for the randomized step.
    #[arg(long)]
    tau: Option<usize>,
    /// Belief decay override.
    #[arg(long)]
    gamma: Option<f64>,
    /// Skip analysis: regenerate the SVG views from an existing report.
    #[arg(long, value_name = "REPORT")]
    render_only: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze(args) => match analyze(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => {
                eprintln!("rsmkit: {err}");
                ExitCode::from(err.exit_code() as u8)
            }
        },
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<(), PipelineError> {
    if let Some(report_path) = &args.render_only {
        return render_only(report_path, args.out.as_deref());
    }

    let text = fs::read_to_string(&args.config)
        .map_err(|e| PipelineError::Config(format!("reading {}: {e}", args.config.display())))?;
    let config = load_task_config(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
    let config_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();

    let overrides = Overrides {
        output_dir: args.out.clone(),
        seed: args.seed,
        draws: args.draws,
        kappa: args.kappa,
        tau: args.tau,
        gamma: args.gamma,
    };

    let output = pipeline::run(&config, &config_dir, &overrides)?;
    println!("wrote {}", output.report_path.display());
    for path in &output.svg_paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn render_only(report_path: &Path, out: Option<&Path>) -> Result<(), PipelineError> {
    let text = fs::read_to_string(report_path)
        .map_err(|e| PipelineError::Data(format!("reading {}: {e}", report_path.display())))?;
    let report = Report::from_json(&text)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", report_path.display())))?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| report_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .map_err(|e| PipelineError::Analysis(format!("creating {}: {e}", out_dir.display())))?;
    for path in pipeline::render_all(&report, &out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
