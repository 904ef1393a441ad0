//! Layered feature graph: one layer per feature whose nodes are that
//! feature's bins plus an implicit Skip choice. A Source-to-Sink path picks
//! one node per layer; its non-Skip picks form a conjunction of interval
//! conditions, which is a candidate cluster.

use std::collections::HashMap;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::discretize::{BinSet, Interval};
use crate::mask::CoverageMask;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("path enumeration exceeded the limit of {limit} paths")]
    PathLimitExceeded { limit: usize },
    #[error("path covers no points")]
    EmptyCoverage,
}

/// One graph layer: the bins of one feature. The Skip node is implicit and
/// ordered after the bins.
#[derive(Debug, Clone)]
pub struct Layer {
    pub feature_index: usize,
    pub bins: Vec<Interval>,
}

impl Layer {
    /// Node count including the Skip node.
    pub fn n_nodes(&self) -> usize {
        self.bins.len() + 1
    }
}

#[derive(Debug, Clone)]
pub struct FeatureGraph {
    pub layers: Vec<Layer>,
}

/// A single interval condition on one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub feature: usize,
    pub interval: Interval,
}

impl Condition {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.interval.contains(row[self.feature])
    }
}

/// A candidate cluster: a conjunction of conditions together with the mask of
/// points satisfying all of them. `cost` is NaN until the within-cluster sum
/// of squares has been filled in (costs are computed only for the paths that
/// survive redundancy pruning).
#[derive(Debug, Clone)]
pub struct Path {
    pub conditions: Vec<Condition>,
    pub coverage: CoverageMask,
    pub n_covered: usize,
    pub cost: f64,
}

impl Path {
    pub fn depth(&self) -> usize {
        self.conditions.len()
    }

    pub fn matches(&self, row: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.matches(row))
    }
}

/// Assemble the layered graph, one layer per feature in column order. Every
/// node of a layer connects to every node of the next, so only the layers
/// themselves are stored.
pub fn build_graph(binsets: &[BinSet]) -> FeatureGraph {
    let layers = binsets
        .iter()
        .enumerate()
        .map(|(f, bs)| {
            debug_assert_eq!(bs.feature_index, f, "binsets must be in column order");
            Layer {
                feature_index: f,
                bins: bs.bins().copied().collect(),
            }
        })
        .collect();
    FeatureGraph { layers }
}

/// Membership mask of the points whose feature `f` lies in `interval`.
fn condition_mask(dataset: &Dataset, feature: usize, interval: &Interval) -> CoverageMask {
    CoverageMask::from_pred(dataset.n_points(), |i| interval.contains(dataset.value(i, feature)))
}

/// Depth-first enumeration of every Source-to-Sink path with 1..=max_depth
/// non-Skip nodes. The all-Skip path is excluded, as are paths covering no
/// points (a subtree whose running coverage is empty can only produce empty
/// paths and is cut immediately). Order is lexicographic in the per-layer
/// node indices, bins before Skip, which downstream tie-breaking relies on.
pub fn enumerate_paths(
    graph: &FeatureGraph,
    dataset: &Dataset,
    max_depth: usize,
    path_limit: usize,
) -> Result<Vec<Path>, GraphError> {
    assert!(max_depth >= 1, "max_depth must be at least 1");
    let n = dataset.n_points();

    // Per-layer, per-bin membership masks, computed once.
    let bin_masks: Vec<Vec<CoverageMask>> = graph
        .layers
        .iter()
        .map(|layer| {
            layer
                .bins
                .iter()
                .map(|interval| condition_mask(dataset, layer.feature_index, interval))
                .collect()
        })
        .collect();

    struct Dfs<'a> {
        graph: &'a FeatureGraph,
        bin_masks: &'a [Vec<CoverageMask>],
        max_depth: usize,
        path_limit: usize,
        conditions: Vec<Condition>,
        paths: Vec<Path>,
    }

    impl Dfs<'_> {
        fn walk(&mut self, layer: usize, mask: &CoverageMask) -> Result<(), GraphError> {
            if layer == self.graph.layers.len() {
                if self.conditions.is_empty() {
                    return Ok(()); // all-Skip
                }
                if self.paths.len() >= self.path_limit {
                    return Err(GraphError::PathLimitExceeded {
                        limit: self.path_limit,
                    });
                }
                let n_covered = mask.count();
                self.paths.push(Path {
                    conditions: self.conditions.clone(),
                    coverage: mask.clone(),
                    n_covered,
                    cost: f64::NAN,
                });
                return Ok(());
            }
            let l = &self.graph.layers[layer];
            if self.conditions.len() < self.max_depth {
                for (b, interval) in l.bins.iter().enumerate() {
                    let next = mask.intersect(&self.bin_masks[layer][b]);
                    if next.is_empty() {
                        continue;
                    }
                    self.conditions.push(Condition {
                        feature: l.feature_index,
                        interval: *interval,
                    });
                    self.walk(layer + 1, &next)?;
                    self.conditions.pop();
                }
            }
            // Skip node, ordered after the bins.
            self.walk(layer + 1, mask)
        }
    }

    let mut dfs = Dfs {
        graph,
        bin_masks: &bin_masks,
        max_depth,
        path_limit,
        conditions: Vec::new(),
        paths: Vec::new(),
    };
    dfs.walk(0, &CoverageMask::full(n))?;
    Ok(dfs.paths)
}

/// Within-cluster sum of squares of the covered points around their mean,
/// summed over all features.
pub fn path_cost(coverage: &CoverageMask, dataset: &Dataset) -> Result<f64, GraphError> {
    let count = coverage.count();
    if count == 0 {
        return Err(GraphError::EmptyCoverage);
    }
    let p = dataset.n_features();
    let mut sums = vec![0.0; p];
    let mut sums_sq = vec![0.0; p];
    for i in coverage.ones() {
        for (f, &v) in dataset.row(i).iter().enumerate() {
            sums[f] += v;
            sums_sq[f] += v * v;
        }
    }
    let n = count as f64;
    let cost = (0..p)
        .map(|f| (sums_sq[f] - sums[f] * sums[f] / n).max(0.0))
        .sum();
    Ok(cost)
}

/// Fill in the cost of every path.
pub fn compute_costs(paths: &mut [Path], dataset: &Dataset) -> Result<(), GraphError> {
    for path in paths {
        path.cost = path_cost(&path.coverage, dataset)?;
    }
    Ok(())
}

/// Drop redundant candidates: first any path where deleting a single
/// condition leaves the covered set unchanged (its shorter reduction is
/// enumerated separately), then all but one of any group sharing a coverage
/// mask, keeping the fewest-condition, earliest-enumerated representative.
/// Output preserves enumeration order.
pub fn prune_redundant(paths: Vec<Path>, dataset: &Dataset) -> Vec<Path> {
    let n = dataset.n_points();
    // Distinct conditions are few; compute each membership mask once.
    let mut cache: HashMap<(usize, u64, u64), CoverageMask> = HashMap::new();
    let mut mask_of = |c: &Condition| -> CoverageMask {
        cache
            .entry((c.feature, c.interval.lower.to_bits(), c.interval.upper.to_bits()))
            .or_insert_with(|| condition_mask(dataset, c.feature, &c.interval))
            .clone()
    };

    let minimal: Vec<Path> = paths
        .into_iter()
        .filter(|path| {
            (0..path.conditions.len()).all(|drop| {
                let mut without = CoverageMask::full(n);
                for (i, c) in path.conditions.iter().enumerate() {
                    if i != drop {
                        without = without.intersect(&mask_of(c));
                    }
                }
                without != path.coverage
            })
        })
        .collect();

    // Earliest fewest-condition representative per coverage mask.
    let mut best: HashMap<&CoverageMask, (usize, usize)> = HashMap::new();
    for (idx, path) in minimal.iter().enumerate() {
        let entry = best.entry(&path.coverage).or_insert((path.depth(), idx));
        if path.depth() < entry.0 {
            *entry = (path.depth(), idx);
        }
    }
    let keep: std::collections::HashSet<usize> = best.values().map(|&(_, idx)| idx).collect();
    minimal
        .into_iter()
        .enumerate()
        .filter(|(idx, _)| keep.contains(idx))
        .map(|(_, p)| p)
        .collect()
}
