//! Command-line interface: fit a clustering tree at a fixed leaf budget,
//! sweep leaf budgets and keep the best-scoring model, or re-evaluate a
//! stored model against a labeled CSV.
//!
//! Exit codes: 0 success, 1 usage/data error, 2 infeasible, 3 search aborted
//! on the node limit.

use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use treeclust::discretize::Strategy;
use treeclust::metrics::MetricReport;
use treeclust::pipeline::{
    self, build_model_json, eval_model, fit_with_leaves, load_and_normalize, load_model,
    parse_range, prepare_candidates, run_sweep, sweep_csv, FitOutcome, OutputFormat,
    PipelineError, SelectionMetric,
};
use treeclust::solver::SolverError;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_ABORTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "treeclust",
    about = "Clustering with provably optimal multiway-split decision trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Input CSV with a header row; all non-label columns must be numeric
    #[arg(long)]
    input: PathBuf,

    /// Column holding ground-truth labels, removed from the features
    #[arg(long)]
    label_column: Option<String>,

    /// Discretization strategy: kmeans or tercile
    #[arg(long, default_value = "kmeans", value_parser = parse_strategy)]
    strategy: Strategy,

    /// Candidate cluster counts per feature for the kmeans strategy, "lo..hi"
    #[arg(long, default_value = "2..6", value_parser = parse_range_arg)]
    k_candidates: RangeInclusive<usize>,

    /// Maximum number of conditions per rule
    #[arg(long, default_value_t = 3)]
    max_depth: usize,

    /// Minimum fraction of points the clusters must jointly cover
    #[arg(long, default_value_t = 1.0)]
    rho: f64,

    /// Directory for model.json, metrics.json and tree renders
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Which tree renders to write: all, text, dot or json
    #[arg(long, default_value = "all", value_parser = parse_format)]
    format: OutputFormat,

    /// Abort enumeration beyond this many candidate paths
    #[arg(long, default_value_t = 5_000_000)]
    path_limit: usize,

    /// Abort the exact search beyond this many explored nodes
    #[arg(long)]
    node_limit: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model with a fixed maximum number of leaves
    Fit {
        #[command(flatten)]
        common: CommonOpts,

        /// Maximum number of leaves (clusters)
        #[arg(long)]
        leaves: usize,
    },
    /// Fit every leaf budget in a range and keep the best-scoring model
    Sweep {
        #[command(flatten)]
        common: CommonOpts,

        /// Leaf budgets to try, "lo..hi"
        #[arg(long, default_value = "2..10", value_parser = parse_range_arg)]
        sweep: RangeInclusive<usize>,

        /// Selection metric: silhouette or dunn
        #[arg(long, default_value = "silhouette", value_parser = parse_metric)]
        metric: SelectionMetric,
    },
    /// Re-assign a stored model on a dataset and report metrics
    Eval {
        /// Path to a model.json produced by fit or sweep
        #[arg(long)]
        model: PathBuf,

        /// Input CSV; header must contain the model's features
        #[arg(long)]
        input: PathBuf,

        /// Column holding ground-truth labels
        #[arg(long)]
        label_column: Option<String>,

        /// Optional directory for metrics.json
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn parse_metric(s: &str) -> Result<SelectionMetric, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

fn parse_range_arg(s: &str) -> Result<RangeInclusive<usize>, String> {
    parse_range(s)
}

fn print_metrics(report: &MetricReport) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!("{:<12} {:>10}", "metric", "value");
    println!("{:<12} {:>10}", "silhouette", fmt(report.silhouette));
    println!("{:<12} {:>10}", "dunn", fmt(report.dunn));
    println!("{:<12} {:>10}", "ari", fmt(report.ari));
    println!("{:<12} {:>10}", "n_evaluated", report.n_evaluated);
}

fn fail(err: &PipelineError) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        PipelineError::Solver(SolverError::NodeLimitExceeded { .. }) => {
            ExitCode::from(EXIT_ABORTED)
        }
        _ => ExitCode::from(EXIT_ERROR),
    }
}

fn cmd_fit(common: &CommonOpts, leaves: usize) -> ExitCode {
    let run = || -> Result<ExitCode, PipelineError> {
        let (_, dataset, truth) =
            load_and_normalize(&common.input, common.label_column.as_deref())?;
        let candidates = prepare_candidates(
            &dataset,
            common.strategy,
            common.k_candidates.clone(),
            common.max_depth,
            common.path_limit,
        )?;
        let outcome = fit_with_leaves(
            &dataset,
            truth.as_ref(),
            &candidates,
            leaves,
            common.rho,
            common.node_limit,
        )?;
        let fitted = match outcome {
            FitOutcome::Optimal(m) => m,
            FitOutcome::Infeasible => {
                eprintln!(
                    "infeasible: no selection of at most {leaves} disjoint rules covers \
                     the required fraction of points"
                );
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
        };
        let model = build_model_json(
            &dataset,
            common.strategy,
            &common.k_candidates,
            common.max_depth,
            common.rho,
            &candidates.binsets,
            &fitted,
        );
        pipeline::write_outputs(&common.out_dir, &dataset, &model, &fitted, common.format)?;
        print!(
            "{}",
            treeclust::tree::render_text(
                &fitted.tree,
                &dataset.feature_names,
                dataset.scales.as_deref()
            )
        );
        print_metrics(&fitted.metrics);
        println!("outputs written to {}", common.out_dir.display());
        Ok(ExitCode::SUCCESS)
    };
    run().unwrap_or_else(|e| fail(&e))
}

fn cmd_sweep(
    common: &CommonOpts,
    sweep: RangeInclusive<usize>,
    metric: SelectionMetric,
) -> ExitCode {
    let run = || -> Result<ExitCode, PipelineError> {
        let (_, dataset, truth) =
            load_and_normalize(&common.input, common.label_column.as_deref())?;
        let result = run_sweep(
            &dataset,
            truth.as_ref(),
            common.strategy,
            common.k_candidates.clone(),
            common.max_depth,
            common.rho,
            sweep,
            metric,
            common.path_limit,
            common.node_limit,
        )?;
        std::fs::create_dir_all(&common.out_dir)?;
        let table = sweep_csv(&result.rows);
        std::fs::write(common.out_dir.join("sweep.csv"), &table)?;
        print!("{table}");

        let Some(fitted) = result.best else {
            eprintln!("no leaf budget produced a feasible model");
            return Ok(ExitCode::from(if result.any_abort {
                EXIT_ABORTED
            } else {
                EXIT_INFEASIBLE
            }));
        };
        let model = build_model_json(
            &dataset,
            common.strategy,
            &common.k_candidates,
            common.max_depth,
            common.rho,
            &result.binsets,
            &fitted,
        );
        pipeline::write_outputs(&common.out_dir, &dataset, &model, &fitted, common.format)?;
        println!("best model: {} leaves", fitted.max_leaves);
        print!(
            "{}",
            treeclust::tree::render_text(
                &fitted.tree,
                &dataset.feature_names,
                dataset.scales.as_deref()
            )
        );
        print_metrics(&fitted.metrics);
        println!("outputs written to {}", common.out_dir.display());
        Ok(ExitCode::SUCCESS)
    };
    run().unwrap_or_else(|e| fail(&e))
}

fn cmd_eval(
    model_path: &PathBuf,
    input: &PathBuf,
    label_column: Option<&str>,
    out_dir: Option<&PathBuf>,
) -> ExitCode {
    let run = || -> Result<ExitCode, PipelineError> {
        let model = load_model(model_path)?;
        let (raw, labels) = treeclust::dataset::load_csv(input, label_column)?;
        let (_, report) = eval_model(&model, &raw, labels.as_ref())?;
        print_metrics(&report);
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            std::fs::write(dir.join("metrics.json"), text)?;
        }
        Ok(ExitCode::SUCCESS)
    };
    run().unwrap_or_else(|e| fail(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Fit { common, leaves } => cmd_fit(&common, leaves),
        Command::Sweep {
            common,
            sweep,
            metric,
        } => cmd_sweep(&common, sweep, metric),
        Command::Eval {
            model,
            input,
            label_column,
            out_dir,
        } => cmd_eval(&model, &input, label_column.as_deref(), out_dir.as_ref()),
    }
}
