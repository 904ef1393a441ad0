//! Cluster validity indices: silhouette and Dunn (internal), Rand index and
//! adjusted Rand index (external). All distances are Euclidean over the
//! dataset as given; the pipeline passes normalized features. Points carrying
//! the reserved unassigned label are excluded throughout.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, LabelVector, UNASSIGNED};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least 2 clusters, found {found}")]
    TooFewClusters { found: usize },
    #[error("label vectors have different lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least 2 evaluated points, found {n}")]
    TooFewPoints { n: usize },
}

/// Metric block of a fitted model. `dunn` is absent when every cluster has
/// zero diameter; `silhouette` is absent for single-cluster solutions; `ari`
/// is present only when ground-truth labels were supplied.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricReport {
    pub silhouette: Option<f64>,
    pub dunn: Option<f64>,
    pub ari: Option<f64>,
    pub n_evaluated: usize,
}

/// Cluster member lists over the assigned points.
fn cluster_members(labels: &LabelVector) -> Vec<Vec<usize>> {
    let mut groups: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, &l) in labels.labels.iter().enumerate() {
        if l != UNASSIGNED {
            groups.entry(l).or_default().push(i);
        }
    }
    let mut ids: Vec<i64> = groups.keys().copied().collect();
    ids.sort_unstable();
    ids.into_iter().map(|id| groups.remove(&id).unwrap()).collect()
}

/// Mean silhouette value over the assigned points: s(i) = (b - a) / max(a, b)
/// with a(i) the mean distance to the rest of the point's own cluster and
/// b(i) the mean distance to the nearest other cluster. Points in singleton
/// clusters contribute 0, as does the degenerate a = b = 0 case.
pub fn silhouette(dataset: &Dataset, labels: &LabelVector) -> Result<f64, MetricsError> {
    let groups = cluster_members(labels);
    if groups.len() < 2 {
        return Err(MetricsError::TooFewClusters { found: groups.len() });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            count += 1;
            if members.len() == 1 {
                continue; // singleton scores 0
            }
            let a = members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dataset.dist(i, j))
                .sum::<f64>()
                / (members.len() - 1) as f64;
            let b = groups
                .iter()
                .enumerate()
                .filter(|(h, other)| *h != g && !other.is_empty())
                .map(|(_, other)| {
                    other.iter().map(|&j| dataset.dist(i, j)).sum::<f64>() / other.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    Ok(total / count as f64)
}

/// Dunn index: minimum single-linkage distance between clusters divided by
/// the maximum cluster diameter. Returns `None` when every cluster has zero
/// diameter (all singletons or coincident points), where the ratio is
/// undefined.
pub fn dunn(dataset: &Dataset, labels: &LabelVector) -> Result<Option<f64>, MetricsError> {
    let groups = cluster_members(labels);
    if groups.len() < 2 {
        return Err(MetricsError::TooFewClusters { found: groups.len() });
    }
    let mut max_diameter = 0.0f64;
    for members in &groups {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                max_diameter = max_diameter.max(dataset.dist(i, j));
            }
        }
    }
    if max_diameter == 0.0 {
        return Ok(None);
    }
    let mut min_separation = f64::INFINITY;
    for (g, members) in groups.iter().enumerate() {
        for other in &groups[g + 1..] {
            for &i in members {
                for &j in other {
                    min_separation = min_separation.min(dataset.dist(i, j));
                }
            }
        }
    }
    Ok(Some(min_separation / max_diameter))
}

/// Indices where both labelings carry a real label.
fn common_assigned(pred: &LabelVector, truth: &LabelVector) -> Result<Vec<usize>, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            a: pred.len(),
            b: truth.len(),
        });
    }
    let idx: Vec<usize> = (0..pred.len())
        .filter(|&i| pred.labels[i] != UNASSIGNED && truth.labels[i] != UNASSIGNED)
        .collect();
    if idx.len() < 2 {
        return Err(MetricsError::TooFewPoints { n: idx.len() });
    }
    Ok(idx)
}

/// Rand index: the fraction of point pairs on which the two labelings agree
/// (same cluster in both, or different cluster in both).
pub fn rand_index(pred: &LabelVector, truth: &LabelVector) -> Result<f64, MetricsError> {
    let idx = common_assigned(pred, truth)?;
    let mut agree = 0usize;
    let mut total = 0usize;
    for (x, &i) in idx.iter().enumerate() {
        for &j in &idx[x + 1..] {
            total += 1;
            let same_pred = pred.labels[i] == pred.labels[j];
            let same_truth = truth.labels[i] == truth.labels[j];
            if same_pred == same_truth {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / total as f64)
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index via the contingency-table formula. When the correction
/// denominator is zero (both partitions trivial), returns 1 for identical
/// partitions and 0 otherwise.
pub fn ari(pred: &LabelVector, truth: &LabelVector) -> Result<f64, MetricsError> {
    let idx = common_assigned(pred, truth)?;
    // BTreeMaps keep the summation order fixed, so repeated runs produce
    // bit-identical values.
    let mut cells: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut row_sums: BTreeMap<i64, usize> = BTreeMap::new();
    let mut col_sums: BTreeMap<i64, usize> = BTreeMap::new();
    for &i in &idx {
        *cells.entry((pred.labels[i], truth.labels[i])).or_insert(0) += 1;
        *row_sums.entry(pred.labels[i]).or_insert(0) += 1;
        *col_sums.entry(truth.labels[i]).or_insert(0) += 1;
    }
    let sum_cells: f64 = cells.values().map(|&c| choose2(c as f64)).sum();
    let sum_rows: f64 = row_sums.values().map(|&c| choose2(c as f64)).sum();
    let sum_cols: f64 = col_sums.values().map(|&c| choose2(c as f64)).sum();
    let total_pairs = choose2(idx.len() as f64);

    let expected = sum_rows * sum_cols / total_pairs;
    let denom = 0.5 * (sum_rows + sum_cols) - expected;
    if denom == 0.0 {
        // both partitions trivial; identical iff pair agreement is complete
        let identical = sum_cells == sum_rows && sum_cells == sum_cols;
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((sum_cells - expected) / denom)
}

/// Compute the full metric block for a predicted labeling. Internal metrics
/// are omitted (not errors) when undefined for the solution at hand.
pub fn compute_report(
    dataset: &Dataset,
    pred: &LabelVector,
    truth: Option<&LabelVector>,
) -> MetricReport {
    let n_evaluated = pred.assigned_indices().len();
    let silhouette = silhouette(dataset, pred).ok();
    let dunn = dunn(dataset, pred).ok().flatten();
    let ari = truth.and_then(|t| ari(pred, t).ok());
    MetricReport {
        silhouette,
        dunn,
        ari,
        n_evaluated,
    }
}
