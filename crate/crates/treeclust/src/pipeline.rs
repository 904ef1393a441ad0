//! End-to-end pipeline: load, normalize, discretize, enumerate and prune
//! candidate paths, solve, rebuild the tree, assign labels, score. Also owns
//! the serialized model schema and the leaf-count sweep.

use std::ops::RangeInclusive;
use std::path::Path as FsPath;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{normalize, Dataset, FeatureScale, LabelVector};
use crate::discretize::{discretize_feature, BinSet, DiscretizeError, Strategy};
use crate::graph::{
    build_graph, compute_costs, enumerate_paths, prune_redundant, Condition, GraphError, Path,
};
use crate::mask::CoverageMask;
use crate::metrics::{compute_report, MetricReport, MetricsError};
use crate::solver::{ProblemInstance, SolveStatus, SolverError};
use crate::tree::{assign, reconstruct, render_dot, render_text, MultiwayTree, TreeNode};
use crate::dataset::DataError;
use crate::discretize::Interval;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset: {0}")]
    Data(#[from] DataError),
    #[error("discretize: {0}")]
    Discretize(#[from] DiscretizeError),
    #[error("feature graph: {0}")]
    Graph(#[from] GraphError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("dataset is missing feature {name:?} required by the model")]
    MissingFeature { name: String },
    #[error("dataset has {got} features, model expects {expected}")]
    FeatureCountMismatch { got: usize, expected: usize },
}

/// Which internal metric drives model selection in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    Silhouette,
    Dunn,
}

impl std::str::FromStr for SelectionMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "silhouette" => Ok(Self::Silhouette),
            "dunn" => Ok(Self::Dunn),
            other => Err(format!("unknown metric {other:?} (use silhouette or dunn)")),
        }
    }
}

/// Parse "a..b" as the inclusive range a..=b; a bare "n" means n..=n.
pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("invalid range bound {t:?}"))
    };
    match s.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi || lo == 0 {
                return Err(format!("range {s:?} must satisfy 1 <= lo <= hi"));
            }
            Ok(lo..=hi)
        }
        None => {
            let v = parse(s)?;
            if v == 0 {
                return Err("range bound must be positive".into());
            }
            Ok(v..=v)
        }
    }
}

/// Everything that does not depend on the leaf budget: computed once and
/// reused across a sweep.
pub struct Candidates {
    pub binsets: Vec<BinSet>,
    pub paths: Vec<Path>,
}

/// Discretize every feature, enumerate paths up to `max_depth`, prune
/// redundant ones and compute their costs. `dataset` must be normalized.
pub fn prepare_candidates(
    dataset: &Dataset,
    strategy: Strategy,
    k_candidates: RangeInclusive<usize>,
    max_depth: usize,
    path_limit: usize,
) -> Result<Candidates, PipelineError> {
    let binsets: Vec<BinSet> = (0..dataset.n_features())
        .map(|f| discretize_feature(f, &dataset.column(f), strategy, k_candidates.clone()))
        .collect::<Result<_, _>>()?;
    let graph = build_graph(&binsets);
    let paths = enumerate_paths(&graph, dataset, max_depth, path_limit)?;
    let mut paths = prune_redundant(paths, dataset);
    compute_costs(&mut paths, dataset)?;
    Ok(Candidates { binsets, paths })
}

#[derive(Debug)]
pub struct FittedModel {
    pub max_leaves: usize,
    pub selected: Vec<Path>,
    /// Indices of the selected paths within the candidate set.
    pub chosen_indices: Vec<usize>,
    pub total_cost: f64,
    pub tree: MultiwayTree,
    pub assignments: LabelVector,
    pub metrics: MetricReport,
}

#[derive(Debug)]
pub enum FitOutcome {
    Optimal(Box<FittedModel>),
    Infeasible,
}

/// Solve the selection problem for one leaf budget and assemble the tree,
/// assignment and metric block.
pub fn fit_with_leaves(
    dataset: &Dataset,
    truth: Option<&LabelVector>,
    candidates: &Candidates,
    max_leaves: usize,
    rho: f64,
    node_limit: Option<u64>,
) -> Result<FitOutcome, PipelineError> {
    fit_with_leaves_hinted(dataset, truth, candidates, max_leaves, rho, node_limit, None)
}

/// [`fit_with_leaves`] with an optional warm-start hint (chosen path indices
/// from a previous, smaller budget); the fitted model is identical either
/// way, the hint only speeds up the search.
#[allow(clippy::too_many_arguments)]
pub fn fit_with_leaves_hinted(
    dataset: &Dataset,
    truth: Option<&LabelVector>,
    candidates: &Candidates,
    max_leaves: usize,
    rho: f64,
    node_limit: Option<u64>,
    hint: Option<&[usize]>,
) -> Result<FitOutcome, PipelineError> {
    let instance = ProblemInstance {
        costs: candidates.paths.iter().map(|p| p.cost).collect(),
        coverages: candidates.paths.iter().map(|p| p.coverage.clone()).collect(),
        sizes: candidates.paths.iter().map(|p| p.n_covered).collect(),
        max_leaves,
        rho,
        n_points: dataset.n_points(),
    };
    let selection = crate::solver::solve_with_hint(&instance, node_limit, hint)?;
    if selection.status == SolveStatus::Infeasible {
        return Ok(FitOutcome::Infeasible);
    }
    let selected: Vec<Path> = selection
        .chosen
        .iter()
        .map(|&j| candidates.paths[j].clone())
        .collect();
    let tree = reconstruct(&selected, dataset.n_features());
    let assignments = assign(&tree, dataset);
    let metrics = compute_report(dataset, &assignments, truth);
    Ok(FitOutcome::Optimal(Box::new(FittedModel {
        max_leaves,
        selected,
        chosen_indices: selection.chosen,
        total_cost: selection.total_cost,
        tree,
        assignments,
        metrics,
    })))
}

// ---------------------------------------------------------------------------
// Serialized model

#[derive(Debug, Serialize, Deserialize)]
pub struct ConditionJson {
    pub feature: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PathJson {
    pub conditions: Vec<ConditionJson>,
    pub n_covered: usize,
    pub cost: f64,
}

/// The full on-disk model. Conditions are stored in normalized coordinates;
/// `feature_scales` holds what is needed to renormalize new data and to
/// display bounds in original units.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelJson {
    pub schema_version: u32,
    pub strategy: Strategy,
    pub k_candidates: [usize; 2],
    pub max_depth: usize,
    pub rho: f64,
    pub max_leaves: usize,
    pub n_points: usize,
    pub feature_names: Vec<String>,
    pub feature_scales: Vec<FeatureScale>,
    pub binsets: Vec<BinSet>,
    pub paths: Vec<PathJson>,
    pub tree: TreeNode,
    pub depth: usize,
    pub total_cost: f64,
    pub assignments: Vec<i64>,
    pub metrics: MetricReport,
}

fn condition_to_json(c: &Condition) -> ConditionJson {
    ConditionJson {
        feature: c.feature,
        lower: (c.interval.lower != f64::NEG_INFINITY).then_some(c.interval.lower),
        upper: (c.interval.upper != f64::INFINITY).then_some(c.interval.upper),
    }
}

fn condition_from_json(c: &ConditionJson) -> Condition {
    Condition {
        feature: c.feature,
        interval: Interval::new(
            c.lower.unwrap_or(f64::NEG_INFINITY),
            c.upper.unwrap_or(f64::INFINITY),
        ),
    }
}

pub fn build_model_json(
    dataset: &Dataset,
    strategy: Strategy,
    k_candidates: &RangeInclusive<usize>,
    max_depth: usize,
    rho: f64,
    binsets: &[BinSet],
    fitted: &FittedModel,
) -> ModelJson {
    ModelJson {
        schema_version: SCHEMA_VERSION,
        strategy,
        k_candidates: [*k_candidates.start(), *k_candidates.end()],
        max_depth,
        rho,
        max_leaves: fitted.max_leaves,
        n_points: dataset.n_points(),
        feature_names: dataset.feature_names.clone(),
        feature_scales: dataset.scales.clone().unwrap_or_default(),
        binsets: binsets.to_vec(),
        paths: fitted
            .selected
            .iter()
            .map(|p| PathJson {
                conditions: p.conditions.iter().map(condition_to_json).collect(),
                n_covered: p.n_covered,
                cost: p.cost,
            })
            .collect(),
        tree: fitted.tree.root.clone(),
        depth: fitted.tree.depth,
        total_cost: fitted.total_cost,
        assignments: fitted.assignments.labels.clone(),
        metrics: fitted.metrics.clone(),
    }
}

pub fn model_to_string(model: &ModelJson) -> Result<String, PipelineError> {
    let mut s = serde_json::to_string_pretty(model)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_str(s: &str) -> Result<ModelJson, PipelineError> {
    let model: ModelJson = serde_json::from_str(s)?;
    if model.schema_version != SCHEMA_VERSION {
        return Err(PipelineError::SchemaVersion {
            found: model.schema_version,
        });
    }
    Ok(model)
}

pub fn load_model(path: &FsPath) -> Result<ModelJson, PipelineError> {
    model_from_str(&std::fs::read_to_string(path)?)
}

/// Rebuild the leaf rules of a stored model as paths (coverage left empty;
/// assignment only needs the conditions).
pub fn model_leaf_paths(model: &ModelJson) -> Vec<Path> {
    model
        .paths
        .iter()
        .map(|p| Path {
            conditions: p.conditions.iter().map(condition_from_json).collect(),
            coverage: CoverageMask::empty(0),
            n_covered: p.n_covered,
            cost: p.cost,
        })
        .collect()
}

/// Re-assign a stored model on a freshly loaded (raw) dataset: headers must
/// match the training features, and normalization reuses the training scales
/// so the stored conditions keep their meaning.
pub fn eval_model(
    model: &ModelJson,
    raw: &Dataset,
    truth: Option<&LabelVector>,
) -> Result<(LabelVector, MetricReport), PipelineError> {
    if raw.n_features() != model.feature_names.len() {
        for name in &model.feature_names {
            if !raw.feature_names.contains(name) {
                return Err(PipelineError::MissingFeature { name: name.clone() });
            }
        }
        return Err(PipelineError::FeatureCountMismatch {
            got: raw.n_features(),
            expected: model.feature_names.len(),
        });
    }
    for name in &model.feature_names {
        if !raw.feature_names.contains(name) {
            return Err(PipelineError::MissingFeature { name: name.clone() });
        }
    }
    // map model feature order onto the dataset's column order
    let col_of: Vec<usize> = model
        .feature_names
        .iter()
        .map(|name| raw.feature_names.iter().position(|h| h == name).unwrap())
        .collect();
    let rows: Vec<Vec<f64>> = (0..raw.n_points())
        .map(|i| {
            col_of
                .iter()
                .enumerate()
                .map(|(f, &c)| model.feature_scales[f].normalize(raw.value(i, c)))
                .collect()
        })
        .collect();
    let mut normalized = Dataset::from_rows(model.feature_names.clone(), &rows);
    normalized.scales = Some(model.feature_scales.clone());

    let leaf_paths = model_leaf_paths(model);
    let tree = reconstruct(&leaf_paths, normalized.n_features());
    let labels = assign(&tree, &normalized);
    let report = compute_report(&normalized, &labels, truth);
    Ok((labels, report))
}

// ---------------------------------------------------------------------------
// Fit and sweep drivers

pub struct FitRun {
    pub outcome: FitOutcome,
    pub binsets: Vec<BinSet>,
    pub solve_time: std::time::Duration,
}

/// Single fit at a fixed leaf budget over an already-normalized dataset.
pub fn run_fit(
    dataset: &Dataset,
    truth: Option<&LabelVector>,
    strategy: Strategy,
    k_candidates: RangeInclusive<usize>,
    max_depth: usize,
    rho: f64,
    leaves: usize,
    path_limit: usize,
    node_limit: Option<u64>,
) -> Result<FitRun, PipelineError> {
    let candidates = prepare_candidates(dataset, strategy, k_candidates, max_depth, path_limit)?;
    let start = Instant::now();
    let outcome = fit_with_leaves(dataset, truth, &candidates, leaves, rho, node_limit)?;
    Ok(FitRun {
        outcome,
        binsets: candidates.binsets,
        solve_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub leaves: usize,
    pub status: String,
    pub metric: Option<f64>,
    pub ari: Option<f64>,
    pub depth: Option<usize>,
    pub clusters: Option<usize>,
    pub solve_time_ms: f64,
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best: Option<Box<FittedModel>>,
    pub binsets: Vec<BinSet>,
    pub any_abort: bool,
}

/// Fit every leaf budget in the range over one shared candidate set and keep
/// the model with the best selection metric; ties go to the smaller budget.
/// Infeasible budgets (and budgets that hit the node limit) are recorded in
/// the table and skipped.
pub fn run_sweep(
    dataset: &Dataset,
    truth: Option<&LabelVector>,
    strategy: Strategy,
    k_candidates: RangeInclusive<usize>,
    max_depth: usize,
    rho: f64,
    leaf_range: RangeInclusive<usize>,
    metric: SelectionMetric,
    path_limit: usize,
    node_limit: Option<u64>,
) -> Result<SweepResult, PipelineError> {
    let candidates = prepare_candidates(dataset, strategy, k_candidates, max_depth, path_limit)?;
    let mut rows = Vec::new();
    let mut best: Option<(f64, Box<FittedModel>)> = None;
    let mut any_abort = false;
    // a smaller budget's optimum stays feasible for larger budgets and makes
    // a strong initial incumbent
    let mut warm: Option<Vec<usize>> = None;

    for leaves in leaf_range {
        let start = Instant::now();
        let outcome = match fit_with_leaves_hinted(
            dataset,
            truth,
            &candidates,
            leaves,
            rho,
            node_limit,
            warm.as_deref(),
        ) {
            Ok(outcome) => outcome,
            Err(PipelineError::Solver(SolverError::NodeLimitExceeded { .. })) => {
                any_abort = true;
                rows.push(SweepRow {
                    leaves,
                    status: "aborted".into(),
                    metric: None,
                    ari: None,
                    depth: None,
                    clusters: None,
                    solve_time_ms: start.elapsed().as_secs_f64() * 1e3,
                });
                continue;
            }
            Err(other) => return Err(other),
        };
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        match outcome {
            FitOutcome::Infeasible => rows.push(SweepRow {
                leaves,
                status: "infeasible".into(),
                metric: None,
                ari: None,
                depth: None,
                clusters: None,
                solve_time_ms: elapsed_ms,
            }),
            FitOutcome::Optimal(model) => {
                warm = Some(model.chosen_indices.clone());
                let value = match metric {
                    SelectionMetric::Silhouette => model.metrics.silhouette,
                    SelectionMetric::Dunn => model.metrics.dunn,
                };
                rows.push(SweepRow {
                    leaves,
                    status: "optimal".into(),
                    metric: value,
                    ari: model.metrics.ari,
                    depth: Some(model.tree.depth),
                    clusters: Some(model.selected.len()),
                    solve_time_ms: elapsed_ms,
                });
                if let Some(v) = value {
                    // strict improvement only: ascending order means ties
                    // keep the smaller budget
                    if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                        best = Some((v, model));
                    }
                }
            }
        }
    }

    Ok(SweepResult {
        rows,
        best: best.map(|(_, m)| m),
        binsets: candidates.binsets,
        any_abort,
    })
}

/// The sweep table as CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("leaves,status,metric,ari,depth,clusters,solve_time_ms\n");
    let opt = |v: &Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3}\n",
            r.leaves,
            r.status,
            opt(&r.metric),
            opt(&r.ari),
            r.depth.map_or(String::new(), |d| d.to_string()),
            r.clusters.map_or(String::new(), |c| c.to_string()),
            r.solve_time_ms,
        ));
    }
    out
}

/// Which tree renders to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    All,
    Text,
    Dot,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Self::All),
            "text" => Ok(Self::Text),
            "dot" => Ok(Self::Dot),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format {other:?} (use all, text, dot or json)")),
        }
    }
}

/// Write model.json, metrics.json and the requested tree renders into
/// `out_dir`, creating it if needed.
pub fn write_outputs(
    out_dir: &FsPath,
    dataset: &Dataset,
    model: &ModelJson,
    fitted: &FittedModel,
    format: OutputFormat,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("model.json"), model_to_string(model)?)?;
    let mut metrics = serde_json::to_string_pretty(&fitted.metrics)?;
    metrics.push('\n');
    std::fs::write(out_dir.join("metrics.json"), metrics)?;
    let scales = dataset.scales.as_deref();
    if matches!(format, OutputFormat::All | OutputFormat::Text) {
        std::fs::write(
            out_dir.join("tree.txt"),
            render_text(&fitted.tree, &dataset.feature_names, scales),
        )?;
    }
    if matches!(format, OutputFormat::All | OutputFormat::Dot) {
        std::fs::write(
            out_dir.join("tree.dot"),
            render_dot(&fitted.tree, &dataset.feature_names, scales),
        )?;
    }
    Ok(())
}

/// Load a CSV and normalize it, returning the raw and normalized datasets
/// plus optional labels.
pub fn load_and_normalize(
    input: &FsPath,
    label_column: Option<&str>,
) -> Result<(Dataset, Dataset, Option<LabelVector>), PipelineError> {
    let (raw, truth) = crate::dataset::load_csv(input, label_column)?;
    let normalized = normalize(&raw);
    Ok((raw, normalized, truth))
}
