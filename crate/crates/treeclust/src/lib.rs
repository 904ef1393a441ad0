//! Clustering with provably optimal multiway-split decision trees.
//!
//! Each feature of a numeric table is discretized into intervals; candidate
//! clusters are conjunctions of per-feature interval conditions, enumerated
//! as paths through a layered feature graph; an exact 0-1 search picks the
//! cheapest disjoint set of candidates under leaf-count and coverage
//! constraints; the winners are reassembled into a multiway decision tree
//! whose leaves are the clusters.

pub mod dataset;
pub mod discretize;
pub mod graph;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod solver;
pub mod tree;

pub use dataset::{load_csv, normalize, Dataset, LabelVector, UNASSIGNED};
pub use discretize::{BinSet, Interval, Strategy};
pub use graph::{build_graph, enumerate_paths, prune_redundant, FeatureGraph, Path};
pub use solver::{brute_force_solve, solve, ProblemInstance, Selection, SolveStatus};
pub use tree::MultiwayTree;
